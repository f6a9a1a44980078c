#pragma once

// Scenario configuration files.
//
// Flat "key = value" text with [section] headers; '#' and ';' start comments.
// Every key is addressed as "section.key" and can be overridden from the
// command line. An optional [vary] section expands one file into several
// scenarios (one curve each):
//
//   [vary]
//   key = N
//   values = 10, 50, 100

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "qstatten/channel.hpp"
#include "qstatten/errors.hpp"
#include "qstatten/estimator.hpp"
#include "qstatten/metrics.hpp"

namespace qstatten {

inline constexpr std::string_view kVersion = "0.1.0";

enum class SystemKind { qubit, qutrit, two_qubit, two_qutrit };
enum class SampleKind { bloch, qutrit_grid, phi_family, theta_family };

inline std::string_view to_string(SystemKind s) {
  switch (s) {
    case SystemKind::qubit:
      return "qubit";
    case SystemKind::qutrit:
      return "qutrit";
    case SystemKind::two_qubit:
      return "two_qubit";
    case SystemKind::two_qutrit:
      return "two_qutrit";
  }
  return "unknown";
}

inline std::string_view to_string(SampleKind s) {
  switch (s) {
    case SampleKind::bloch:
      return "bloch";
    case SampleKind::qutrit_grid:
      return "qutrit_grid";
    case SampleKind::phi_family:
      return "phi_family";
    case SampleKind::theta_family:
      return "theta_family";
  }
  return "unknown";
}

inline int parties(SystemKind s) { return s == SystemKind::two_qubit || s == SystemKind::two_qutrit ? 2 : 1; }
inline int local_dim(SystemKind s) { return s == SystemKind::qubit || s == SystemKind::two_qubit ? 2 : 3; }

inline SampleKind default_sample(SystemKind s) {
  switch (s) {
    case SystemKind::qubit:
      return SampleKind::bloch;
    case SystemKind::qutrit:
      return SampleKind::qutrit_grid;
    case SystemKind::two_qubit:
      return SampleKind::phi_family;
    case SystemKind::two_qutrit:
      return SampleKind::theta_family;
  }
  return SampleKind::bloch;
}

struct FiberAxis {
  double alpha = 0.2;
  std::vector<double> lengths;
};

struct ScenarioConfig {
  std::string name = "scenario";
  SystemKind system = SystemKind::qubit;
  std::int64_t produced = 100;
  SampleKind sample = SampleKind::bloch;
  int sample_size = 220;  // bloch lattice points or phase-family members
  int sample_stride = 1;  // keep every stride-th state
  std::vector<MetricKind> metrics{MetricKind::fidelity};
  std::uint64_t seed = 1;
  std::vector<FiberAxis> fibers;
  ReconstructionOptions estimator = [] {
    ReconstructionOptions o;
    o.renormalize_counts = true;
    return o;
  }();
  ChannelOptions channel;

  void validate() const;
};

/// Ordered "section.key" -> value map with the source line of each entry.
class ConfigMap {
 public:
  struct Entry {
    std::string value;
    int line = 0;  // 0 for programmatic entries and overrides
  };

  void set(const std::string& key, std::string value, int line = 0) {
    auto [it, inserted] = entries_.try_emplace(key, Entry{value, line});
    if (!inserted) it->second = Entry{std::move(value), line};
    if (inserted) order_.push_back(key);
  }
  bool contains(const std::string& key) const { return entries_.count(key) != 0; }
  const Entry* find(const std::string& key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
  }
  void erase(const std::string& key) {
    entries_.erase(key);
    order_.erase(std::remove(order_.begin(), order_.end(), key), order_.end());
  }
  const std::vector<std::string>& keys() const { return order_; }

 private:
  std::map<std::string, Entry> entries_;
  std::vector<std::string> order_;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto piece = trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (!piece.empty()) out.push_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string context(const std::string& key, const ConfigMap::Entry& e) {
  return e.line > 0 ? fmt::format("line {}, field '{}'", e.line, key) : fmt::format("field '{}'", key);
}

inline double parse_double(const std::string& key, const ConfigMap::Entry& e, std::string_view text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(fmt::format("{}: expected a number, got '{}'", context(key, e), text));
  }
  return v;
}

template <class Int>
Int parse_int(const std::string& key, const ConfigMap::Entry& e, std::string_view text) {
  Int v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(fmt::format("{}: expected an integer, got '{}'", context(key, e), text));
  }
  return v;
}

inline bool parse_bool(const std::string& key, const ConfigMap::Entry& e) {
  const std::string& v = e.value;
  if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "off" || v == "no" || v == "0") return false;
  throw ConfigError(fmt::format("{}: expected true/false, got '{}'", context(key, e), v));
}

// "a:step:b" (inclusive) or a comma list.
inline std::vector<double> parse_grid(const std::string& key, const ConfigMap::Entry& e) {
  const std::string& v = e.value;
  if (v.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(v);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(trim(p));
    if (parts.size() != 3) throw ConfigError(fmt::format("{}: range must be start:step:stop", context(key, e)));
    const double a = parse_double(key, e, parts[0]);
    const double step = parse_double(key, e, parts[1]);
    const double b = parse_double(key, e, parts[2]);
    if (!(step > 0.0) || b < a) throw ConfigError(fmt::format("{}: invalid range '{}'", context(key, e), v));
    std::vector<double> out;
    const auto count = static_cast<long>(std::floor((b - a) / step + 1e-9));
    for (long i = 0; i <= count; ++i) out.push_back(a + step * static_cast<double>(i));
    return out;
  }
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(parse_double(key, e, item));
  return out;
}

template <class Enum>
Enum parse_enum(const std::string& key, const ConfigMap::Entry& e,
                std::initializer_list<std::pair<std::string_view, Enum>> options) {
  for (const auto& [name, value] : options) {
    if (e.value == name) return value;
  }
  std::string allowed;
  for (const auto& [name, value] : options) allowed += (allowed.empty() ? "" : ", ") + std::string(name);
  throw ConfigError(fmt::format("{}: '{}' is not one of {}", context(key, e), e.value, allowed));
}

inline const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "scenario.name",          "scenario.system",          "scenario.N",
      "scenario.sample",        "scenario.sample_size",     "scenario.sample_stride",
      "scenario.metrics",       "scenario.seed",            "fiber1.alpha",
      "fiber1.lengths",         "fiber2.alpha",             "fiber2.lengths",
      "estimator.restarts",     "estimator.max_iterations", "estimator.objective_tolerance",
      "estimator.parameter_tolerance", "estimator.model_counts", "estimator.renormalize_counts",
      "estimator.gradient",     "channel.attenuation_base", "channel.transmission_mode",
      "channel.loss",           "channel.shot_noise",       "vary.key",
      "vary.values"};
  return keys;
}

inline std::string fmt_double(double v) { return fmt::format("{:.17g}", v); }

}  // namespace detail

/// Parses configuration text. Unknown sections or keys are errors.
inline ConfigMap parse_config_text(std::string_view text) {
  ConfigMap out;
  std::string section;
  std::istringstream in{std::string(text)};
  int line_no = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const auto comment = raw.find_first_of("#;");
    std::string line = detail::trim(std::string_view(raw).substr(0, comment));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(fmt::format("line {}: unterminated section header", line_no));
      section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("line {}: expected 'key = value'", line_no));
    if (section.empty()) throw ConfigError(fmt::format("line {}: key outside of any [section]", line_no));
    const std::string key = section + "." + detail::trim(std::string_view(line).substr(0, eq));
    const auto& known = detail::known_keys();
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError(fmt::format("line {}: unknown field '{}'", line_no, key));
    }
    if (out.contains(key)) throw ConfigError(fmt::format("line {}: duplicate field '{}'", line_no, key));
    out.set(key, detail::trim(std::string_view(line).substr(eq + 1)), line_no);
  }
  return out;
}

inline ConfigMap load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config_text(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Applies "key=value". A bare key resolves to its unique section; bare
/// "alpha" and "lengths" address every fiber present.
inline void apply_override(ConfigMap& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError(fmt::format("override '{}': expected KEY=VALUE", assignment));
  }
  const std::string key = detail::trim(assignment.substr(0, eq));
  const std::string value = detail::trim(assignment.substr(eq + 1));
  const auto& known = detail::known_keys();
  if (key.find('.') != std::string::npos) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError(fmt::format("override '{}': unknown field '{}'", assignment, key));
    }
    config.set(key, value);
    return;
  }
  std::vector<std::string> matches;
  for (const auto& k : known) {
    if (k.substr(k.find('.') + 1) == key) matches.push_back(k);
  }
  if (matches.empty()) throw ConfigError(fmt::format("override '{}': unknown field '{}'", assignment, key));
  if (key == "alpha" || key == "lengths") {
    bool any = false;
    for (const auto& k : matches) {
      if (config.contains(k)) {
        config.set(k, value);
        any = true;
      }
    }
    if (!any) config.set("fiber1." + key, value);
    return;
  }
  if (matches.size() > 1) throw ConfigError(fmt::format("override '{}': ambiguous field '{}'", assignment, key));
  config.set(matches.front(), value);
}

/// Builds and validates one scenario; the [vary] section is ignored here.
inline ScenarioConfig build_scenario(const ConfigMap& map) {
  ScenarioConfig c;
  auto get = [&](const std::string& key) { return map.find(key); };
  using detail::parse_enum;

  if (const auto* e = get("scenario.name")) c.name = e->value;
  if (const auto* e = get("scenario.system")) {
    c.system = parse_enum<SystemKind>("scenario.system", *e,
                                      {{"qubit", SystemKind::qubit},
                                       {"qutrit", SystemKind::qutrit},
                                       {"two_qubit", SystemKind::two_qubit},
                                       {"two_qutrit", SystemKind::two_qutrit}});
  }
  c.sample = default_sample(c.system);
  c.sample_size = c.sample == SampleKind::bloch ? 220 : (c.sample == SampleKind::qutrit_grid ? 5184 : 100);
  if (const auto* e = get("scenario.sample")) {
    c.sample = parse_enum<SampleKind>("scenario.sample", *e,
                                      {{"bloch", SampleKind::bloch},
                                       {"qutrit_grid", SampleKind::qutrit_grid},
                                       {"phi_family", SampleKind::phi_family},
                                       {"theta_family", SampleKind::theta_family}});
    c.sample_size = c.sample == SampleKind::bloch ? 220 : (c.sample == SampleKind::qutrit_grid ? 5184 : 100);
  }
  if (const auto* e = get("scenario.sample_size")) c.sample_size = detail::parse_int<int>("scenario.sample_size", *e, e->value);
  if (const auto* e = get("scenario.sample_stride")) {
    c.sample_stride = detail::parse_int<int>("scenario.sample_stride", *e, e->value);
  }
  if (const auto* e = get("scenario.N")) c.produced = detail::parse_int<std::int64_t>("scenario.N", *e, e->value);
  if (const auto* e = get("scenario.seed")) c.seed = detail::parse_int<std::uint64_t>("scenario.seed", *e, e->value);
  if (const auto* e = get("scenario.metrics")) {
    c.metrics.clear();
    for (const auto& m : detail::split_list(e->value)) {
      try {
        c.metrics.push_back(parse_metric(m));
      } catch (const std::invalid_argument& err) {
        throw ConfigError(fmt::format("{}: {}", detail::context("scenario.metrics", *e), err.what()));
      }
    }
  }

  for (int f = 1; f <= 2; ++f) {
    const std::string sec = "fiber" + std::to_string(f);
    const auto* alpha = get(sec + ".alpha");
    const auto* lengths = get(sec + ".lengths");
    if (alpha == nullptr && lengths == nullptr) continue;
    if (alpha == nullptr || lengths == nullptr) {
      throw ConfigError(fmt::format("section [{}] needs both alpha and lengths", sec));
    }
    FiberAxis axis;
    axis.alpha = detail::parse_double(sec + ".alpha", *alpha, alpha->value);
    axis.lengths = detail::parse_grid(sec + ".lengths", *lengths);
    c.fibers.push_back(std::move(axis));
  }

  auto& est = c.estimator;
  if (const auto* e = get("estimator.restarts")) est.restarts = detail::parse_int<int>("estimator.restarts", *e, e->value);
  if (const auto* e = get("estimator.max_iterations")) {
    est.max_iterations = detail::parse_int<int>("estimator.max_iterations", *e, e->value);
  }
  if (const auto* e = get("estimator.objective_tolerance")) {
    est.objective_tolerance = detail::parse_double("estimator.objective_tolerance", *e, e->value);
  }
  if (const auto* e = get("estimator.parameter_tolerance")) {
    est.parameter_tolerance = detail::parse_double("estimator.parameter_tolerance", *e, e->value);
  }
  if (const auto* e = get("estimator.model_counts")) {
    est.model_counts = parse_enum<ModelCounts>("estimator.model_counts", *e,
                                               {{"continuous", ModelCounts::continuous}, {"rounded", ModelCounts::rounded}});
  }
  if (const auto* e = get("estimator.renormalize_counts")) {
    est.renormalize_counts = detail::parse_bool("estimator.renormalize_counts", *e);
  }
  if (const auto* e = get("estimator.gradient")) {
    est.gradient = parse_enum<GradientMode>("estimator.gradient", *e,
                                            {{"analytic", GradientMode::analytic},
                                             {"finite_difference", GradientMode::finite_difference}});
  }

  auto& ch = c.channel;
  if (const auto* e = get("channel.attenuation_base")) {
    ch.attenuation_base =
        parse_enum<AttenuationBase>("channel.attenuation_base", *e, {{"e", AttenuationBase::e}, {"10", AttenuationBase::ten}});
  }
  if (const auto* e = get("channel.transmission_mode")) {
    ch.transmission_mode = parse_enum<TransmissionMode>(
        "channel.transmission_mode", *e,
        {{"per_setting", TransmissionMode::per_setting}, {"per_state", TransmissionMode::per_state}});
  }
  if (const auto* e = get("channel.loss")) {
    ch.loss = parse_enum<LossModel>("channel.loss", *e, {{"binomial", LossModel::binomial}, {"none", LossModel::none}});
  }
  if (const auto* e = get("channel.shot_noise")) {
    ch.shot_noise = parse_enum<ShotNoise>("channel.shot_noise", *e, {{"poisson", ShotNoise::poisson}, {"mean", ShotNoise::mean}});
  }

  c.validate();
  return c;
}

inline void ScenarioConfig::validate() const {
  auto fail = [&](const std::string& msg) { throw ConfigError("scenario '" + name + "': " + msg); };
  if (name.empty() || name.front() == '.' ||
      name.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.-[]=") != std::string::npos) {
    fail("name must be a plain file name ([A-Za-z0-9_.-[]=], not starting with '.')");
  }
  if (produced < 0) fail("N must be non-negative");
  if (static_cast<int>(fibers.size()) != parties(system)) {
    fail(fmt::format("system {} needs {} fiber section(s), found {}", to_string(system), parties(system), fibers.size()));
  }
  for (std::size_t f = 0; f < fibers.size(); ++f) {
    const auto& axis = fibers[f];
    if (!(axis.alpha >= 0.0) || !std::isfinite(axis.alpha)) fail(fmt::format("fiber{} alpha must be finite and non-negative", f + 1));
    if (axis.lengths.empty()) fail(fmt::format("fiber{} length grid is empty", f + 1));
    for (std::size_t i = 0; i < axis.lengths.size(); ++i) {
      if (!(axis.lengths[i] >= 0.0) || !std::isfinite(axis.lengths[i])) fail(fmt::format("fiber{} has a negative length", f + 1));
      if (i > 0 && !(axis.lengths[i] > axis.lengths[i - 1])) fail(fmt::format("fiber{} lengths must be strictly increasing", f + 1));
    }
  }
  const bool two_party = parties(system) == 2;
  const int d = local_dim(system);
  const bool sample_ok = (system == SystemKind::qubit && sample == SampleKind::bloch) ||
                         (system == SystemKind::qutrit && sample == SampleKind::qutrit_grid) ||
                         (system == SystemKind::two_qubit && sample == SampleKind::phi_family) ||
                         (system == SystemKind::two_qutrit && sample == SampleKind::theta_family);
  if (!sample_ok) fail(fmt::format("sample {} does not match system {}", to_string(sample), to_string(system)));
  if (sample_size < 1) fail("sample_size must be positive");
  if (sample_stride < 1) fail("sample_stride must be positive");
  if (metrics.empty()) fail("no metrics requested");
  for (MetricKind m : metrics) {
    if (m == MetricKind::concurrence && !(two_party && d == 2)) fail("concurrence needs system = two_qubit");
    if (m == MetricKind::negativity && !two_party) fail("negativity needs a bipartite system");
  }
  try {
    estimator.validate();
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
}

/// Canonical text form of a single scenario; parsing it back yields an
/// identical ScenarioConfig.
inline std::string to_config_text(const ScenarioConfig& c) {
  std::string out;
  auto line = [&](std::string_view key, const std::string& value) { out += fmt::format("{} = {}\n", key, value); };
  auto join = [](const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += (s.empty() ? "" : ", ") + detail::fmt_double(x);
    return s;
  };
  out += "[scenario]\n";
  line("name", c.name);
  line("system", std::string(to_string(c.system)));
  line("N", std::to_string(c.produced));
  line("sample", std::string(to_string(c.sample)));
  line("sample_size", std::to_string(c.sample_size));
  line("sample_stride", std::to_string(c.sample_stride));
  std::string metrics;
  for (MetricKind m : c.metrics) metrics += (metrics.empty() ? "" : ", ") + std::string(to_string(m));
  line("metrics", metrics);
  line("seed", std::to_string(c.seed));
  for (std::size_t f = 0; f < c.fibers.size(); ++f) {
    out += fmt::format("\n[fiber{}]\n", f + 1);
    line("alpha", detail::fmt_double(c.fibers[f].alpha));
    line("lengths", join(c.fibers[f].lengths));
  }
  const auto& e = c.estimator;
  out += "\n[estimator]\n";
  line("restarts", std::to_string(e.restarts));
  line("max_iterations", std::to_string(e.max_iterations));
  line("objective_tolerance", detail::fmt_double(e.objective_tolerance));
  line("parameter_tolerance", detail::fmt_double(e.parameter_tolerance));
  line("model_counts", e.model_counts == ModelCounts::continuous ? "continuous" : "rounded");
  line("renormalize_counts", e.renormalize_counts ? "true" : "false");
  line("gradient", e.gradient == GradientMode::analytic ? "analytic" : "finite_difference");
  const auto& ch = c.channel;
  out += "\n[channel]\n";
  line("attenuation_base", ch.attenuation_base == AttenuationBase::e ? "e" : "10");
  line("transmission_mode", ch.transmission_mode == TransmissionMode::per_setting ? "per_setting" : "per_state");
  line("loss", ch.loss == LossModel::binomial ? "binomial" : "none");
  line("shot_noise", ch.shot_noise == ShotNoise::poisson ? "poisson" : "mean");
  return out;
}

/// One scenario per [vary] value (or just one without [vary]). Variant names
/// are "<name>[<key>=<value>]".
inline std::vector<ScenarioConfig> expand_scenarios(const ConfigMap& map) {
  const auto* key = map.find("vary.key");
  const auto* values = map.find("vary.values");
  ConfigMap base = map;
  base.erase("vary.key");
  base.erase("vary.values");
  if (key == nullptr && values == nullptr) return {build_scenario(base)};
  if (key == nullptr || values == nullptr) throw ConfigError("[vary] needs both key and values");

  const std::string base_name = base.find("scenario.name") ? base.find("scenario.name")->value : "scenario";
  std::vector<ScenarioConfig> out;
  for (const auto& v : detail::split_list(values->value)) {
    ConfigMap variant = base;
    try {
      apply_override(variant, key->value + "=" + v);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}: {}", detail::context("vary.key", *key), e.what()));
    }
    variant.set("scenario.name", fmt::format("{}[{}={}]", base_name, key->value, v));
    out.push_back(build_scenario(variant));
  }
  if (out.empty()) throw ConfigError(fmt::format("{}: no values", detail::context("vary.values", *values)));
  return out;
}

}  // namespace qstatten
