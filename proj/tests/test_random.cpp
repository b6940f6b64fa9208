#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "csflock/random.hpp"

using namespace csflock;

TEST(Philox, KnownAnswerVectors) {
  using philox::block;
  EXPECT_EQ(block({0, 0, 0, 0}, {0, 0}), (philox::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
            (philox::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (philox::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Philox, SameMaterialSameSequence) {
  NoiseStream a({42, 3, 7, 1}), b({42, 3, 7, 1});
  for (int i = 0; i < 10000; ++i)
    ASSERT_EQ(a.normal(), b.normal());
}

TEST(Philox, DistinctMaterialDistinctSequences) {
  const SeedMaterial base{42, 3, 7, 1};
  std::vector<SeedMaterial> variants{base, {43, 3, 7, 1}, {42, 4, 7, 1}, {42, 3, 8, 1}, {42, 3, 7, 2}};
  std::set<std::vector<double>> seen;
  for (const auto &m : variants) {
    NoiseStream s(m);
    std::vector<double> v(16);
    for (auto &x : v)
      x = s.normal();
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), variants.size());
}

TEST(Philox, EngineIsUniformBitGenerator) {
  static_assert(std::uniform_random_bit_generator<PhiloxEngine>);
  PhiloxEngine e({1, 0, 0, 0});
  double mean = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i)
    mean += static_cast<double>(e() >> 11) * 0x1.0p-53;
  mean /= n;
  EXPECT_NEAR(mean, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(NoiseStream, StandardNormalMoments) {
  NoiseStream s({7, 0, 0, 0});
  const int n = 400000;
  double m1 = 0.0, m2 = 0.0, m4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = s.normal();
    m1 += z;
    m2 += z * z;
    m4 += z * z * z * z;
  }
  m1 /= n;
  m2 /= n;
  m4 /= n;
  EXPECT_NEAR(m1, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(m2, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(m4, 3.0, 4.0 * std::sqrt(96.0 / n));
}

TEST(NoiseStream, IndependentStreamsUncorrelated) {
  NoiseStream a({7, 0, 0, 0}), b({7, 0, 0, 1});
  const int n = 200000;
  double c = 0.0;
  for (int i = 0; i < n; ++i)
    c += a.normal() * b.normal();
  EXPECT_NEAR(c / n, 0.0, 4.0 / std::sqrt(n));
}
