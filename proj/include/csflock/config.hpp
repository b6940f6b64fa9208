#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "csflock/errors.hpp"
#include "csflock/models.hpp"
#include "csflock/sweep.hpp"

namespace csflock {

/// Shortest text that parses back to exactly the same double (17 significant
/// digits, '.' separator, locale independent).
inline std::string format_double(double x) {
  if (std::isnan(x))
    return "nan";
  if (std::isinf(x))
    return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

/// Everything a run needs, with every default materialised. Defaults follow
/// the published experiments: dt = 1e-3, T = 30, Q = 100, lambda = 1, split
/// velocities and zero positions for the Cucker-Smale models.
struct RunConfig {
  ModelSpec model;
  double dt = 1e-3;
  double t_end = 30.0;
  double tau = 0.0;
  std::size_t paths = 100;
  std::uint64_t seed = 1;
  AxisSpec axis1{SweepParam::Sigma, 0.0, 2.0, 50};
  AxisSpec axis2{SweepParam::Tau, 0.0, 2.0, 50};
  double theta = kDefaultTheta;
  bool theta_calibrated = false;
  double window = 1.0;
  std::size_t thin = 1;

  IntegrationGrid grid() const { return IntegrationGrid::make(dt, t_end, tau); }

  SweepSpec sweep_spec(unsigned workers) const {
    SweepSpec s;
    s.model = model;
    s.axis1 = axis1;
    s.axis2 = axis2;
    s.q_paths = paths;
    s.dt = dt;
    s.t_end = t_end;
    s.tau = tau;
    s.base_seed = seed;
    s.theta = theta;
    s.window = window;
    s.workers = workers;
    return s;
  }
};

namespace detail {

inline std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline double parse_number(const std::string &key, const std::string &text) {
  const std::string t = trim(text);
  double v = 0.0;
  auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw ValidationError("config key '" + key + "': '" + text + "' is not a number");
  return v;
}

inline std::size_t parse_count(const std::string &key, const std::string &text) {
  const double v = parse_number(key, text);
  if (v < 0 || v != std::floor(v))
    throw ValidationError("config key '" + key + "' must be a non-negative integer");
  return static_cast<std::size_t>(v);
}

inline std::vector<double> parse_list(const std::string &key, const std::string &text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(parse_number(key, item));
  if (out.empty())
    throw ValidationError("config key '" + key + "' is empty");
  return out;
}

inline std::string join(const std::vector<double> &v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i)
      s += ',';
    s += format_double(v[i]);
  }
  return s;
}

inline ModelVariant parse_variant(const std::string &s) {
  if (s == "dgbm")
    return ModelVariant::DGBM;
  if (s == "cs-fixed")
    return ModelVariant::CSFixed;
  if (s == "cs-full")
    return ModelVariant::CSFull;
  throw ValidationError("unknown model variant '" + s + "' (expected dgbm, cs-fixed or cs-full)");
}

} // namespace detail

/// Reads the flat `key = value` format with [model], [grid], [ensemble],
/// [sweep] and [output] sections. Unknown keys are errors; a [manifest]
/// section is ignored so manifests can be fed back in as configs.
inline RunConfig parse_config(std::istream &in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error &e) {
    throw ValidationError(std::string("config parse error: ") + e.what());
  }

  static const std::set<std::string> known = {
      "model.variant",   "model.n_agents",   "model.lambda",      "model.sigma",       "model.beta",
      "model.initial_v", "model.initial_x",  "model.rate_timing", "grid.dt",           "grid.t_end",
      "grid.tau",        "ensemble.paths",   "ensemble.seed",     "sweep.axis1",       "sweep.axis1_min",
      "sweep.axis1_max", "sweep.axis1_count", "sweep.axis2",      "sweep.axis2_min",   "sweep.axis2_max",
      "sweep.axis2_count", "sweep.theta",    "sweep.window",      "output.thin"};
  for (const auto &[section, body] : tree) {
    if (section == "manifest")
      continue;
    if (body.empty())
      throw ValidationError("config: key '" + section + "' must live inside a section");
    for (const auto &[key, value] : body) {
      if (!known.contains(section + "." + key))
        throw ValidationError("config: unknown key '" + section + "." + key + "'");
    }
  }

  auto get = [&](const std::string &path) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(path, '.')))
      return *v;
    return std::nullopt;
  };

  RunConfig cfg;
  ModelSpec &m = cfg.model;
  m.variant = detail::parse_variant(get("model.variant").value_or("dgbm"));
  const bool cs = m.variant != ModelVariant::DGBM;
  m.n_agents = get("model.n_agents") ? detail::parse_count("model.n_agents", *get("model.n_agents")) : (cs ? 2 : 1);
  if (auto v = get("model.lambda"))
    m.lambda = detail::parse_number("model.lambda", *v);
  {
    const auto sig = detail::parse_list("model.sigma", get("model.sigma").value_or("0"));
    if (sig.size() == 1)
      m.sigma.assign(m.n_agents, sig[0]);
    else
      m.sigma = sig;
  }
  if (auto v = get("model.beta"))
    m.beta = detail::parse_number("model.beta", *v);
  {
    const std::string iv = get("model.initial_v").value_or(cs ? "split" : "1");
    if (iv == "split")
      m.initial_v = split_initial_data(m.n_agents);
    else {
      m.initial_v = detail::parse_list("model.initial_v", iv);
      if (m.initial_v.size() == 1 && m.n_agents > 1)
        m.initial_v.assign(m.n_agents, m.initial_v[0]);
    }
  }
  if (m.variant == ModelVariant::CSFull) {
    const std::string ix = get("model.initial_x").value_or("zeros");
    if (ix == "zeros")
      m.initial_x.assign(m.n_agents, 0.0);
    else
      m.initial_x = detail::parse_list("model.initial_x", ix);
  }
  if (auto v = get("model.rate_timing")) {
    if (*v == "delayed")
      m.rate_timing = RateTiming::Delayed;
    else if (*v == "current")
      m.rate_timing = RateTiming::Current;
    else
      throw ValidationError("model.rate_timing must be 'delayed' or 'current'");
  }

  if (auto v = get("grid.dt"))
    cfg.dt = detail::parse_number("grid.dt", *v);
  if (auto v = get("grid.t_end"))
    cfg.t_end = detail::parse_number("grid.t_end", *v);
  if (auto v = get("grid.tau"))
    cfg.tau = detail::parse_number("grid.tau", *v);
  if (auto v = get("ensemble.paths"))
    cfg.paths = detail::parse_count("ensemble.paths", *v);
  if (auto v = get("ensemble.seed")) {
    std::uint64_t s = 0;
    const std::string t = detail::trim(*v);
    auto res = std::from_chars(t.data(), t.data() + t.size(), s);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
      throw ValidationError("ensemble.seed must be an unsigned 64-bit integer");
    cfg.seed = s;
  }

  auto read_axis = [&](AxisSpec &a, const std::string &name) {
    if (auto v = get("sweep." + name))
      a.param = parse_sweep_param(*v);
    if (auto v = get("sweep." + name + "_min"))
      a.min = detail::parse_number("sweep." + name + "_min", *v);
    if (auto v = get("sweep." + name + "_max"))
      a.max = detail::parse_number("sweep." + name + "_max", *v);
    if (auto v = get("sweep." + name + "_count"))
      a.count = detail::parse_count("sweep." + name + "_count", *v);
  };
  read_axis(cfg.axis1, "axis1");
  read_axis(cfg.axis2, "axis2");
  if (auto v = get("sweep.theta")) {
    if (*v == "calibrated")
      cfg.theta_calibrated = true;
    else
      cfg.theta = detail::parse_number("sweep.theta", *v);
  }
  if (auto v = get("sweep.window"))
    cfg.window = detail::parse_number("sweep.window", *v);
  if (auto v = get("output.thin"))
    cfg.thin = detail::parse_count("output.thin", *v);
  if (cfg.thin < 1)
    throw ValidationError("output.thin must be at least 1");

  m.validate();
  return cfg;
}

inline RunConfig parse_config_file(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ValidationError("cannot open config file '" + path + "'");
  return parse_config(in);
}

/// Fully resolved configuration in the same format parse_config reads.
inline std::string to_ini(const RunConfig &cfg) {
  const ModelSpec &m = cfg.model;
  std::ostringstream o;
  o << "[model]\n";
  o << "variant = " << to_string(m.variant) << "\n";
  o << "n_agents = " << m.n_agents << "\n";
  o << "lambda = " << format_double(m.lambda) << "\n";
  o << "sigma = " << detail::join(m.sigma) << "\n";
  o << "beta = " << format_double(m.beta) << "\n";
  o << "initial_v = " << detail::join(m.initial_v) << "\n";
  if (m.variant == ModelVariant::CSFull)
    o << "initial_x = " << detail::join(m.initial_x) << "\n";
  o << "rate_timing = " << (m.rate_timing == RateTiming::Delayed ? "delayed" : "current") << "\n";
  o << "\n[grid]\n";
  o << "dt = " << format_double(cfg.dt) << "\n";
  o << "t_end = " << format_double(cfg.t_end) << "\n";
  o << "tau = " << format_double(cfg.tau) << "\n";
  o << "\n[ensemble]\n";
  o << "paths = " << cfg.paths << "\n";
  o << "seed = " << cfg.seed << "\n";
  o << "\n[sweep]\n";
  for (const auto &[a, name] : {std::pair{&cfg.axis1, "axis1"}, std::pair{&cfg.axis2, "axis2"}}) {
    o << name << " = " << to_string(a->param) << "\n";
    o << name << "_min = " << format_double(a->min) << "\n";
    o << name << "_max = " << format_double(a->max) << "\n";
    o << name << "_count = " << a->count << "\n";
  }
  o << "theta = " << (cfg.theta_calibrated ? std::string("calibrated") : format_double(cfg.theta)) << "\n";
  o << "window = " << format_double(cfg.window) << "\n";
  o << "\n[output]\n";
  o << "thin = " << cfg.thin << "\n";
  return o.str();
}

} // namespace csflock
