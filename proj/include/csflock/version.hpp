#pragma once

namespace csflock {

inline constexpr const char *kVersion = "0.1.0";

} // namespace csflock
