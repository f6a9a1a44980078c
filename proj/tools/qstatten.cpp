// qstatten: POVM self-checks, single reconstructions and fiber-length sweeps.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "qstatten/bundled_configs.hpp"
#include "qstatten/experiment.hpp"
#include "qstatten/selfcheck.hpp"

namespace fs = std::filesystem;
using namespace qstatten;

namespace {

struct CommonArgs {
  std::string out_dir = "results";
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::vector<std::string> overrides;
  bool quiet = false;
};

class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::optional<std::uint64_t> env_seed() {
  const char* raw = std::getenv("QSTATTEN_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  const std::string text(raw);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw UsageError("QSTATTEN_SEED must be an unsigned integer, got '" + text + "'");
  }
  return v;
}

// --seed wins over QSTATTEN_SEED, which wins over the config file.
void apply_common(ConfigMap& map, const CommonArgs& args) {
  for (const auto& o : args.overrides) apply_override(map, o);
  if (args.seed) {
    map.set("scenario.seed", std::to_string(*args.seed));
  } else if (const auto s = env_seed()) {
    map.set("scenario.seed", std::to_string(*s));
  }
}

int thread_count(const CommonArgs& args) {
  if (args.threads > 0) return args.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

// Resolves <out>/<name>.csv and refuses anything that would leave <out>.
fs::path output_file(const CommonArgs& args, const std::string& name) {
  if (name.empty() || name.find_first_of("/\\") != std::string::npos || name == "." || name == "..") {
    throw UsageError("output name '" + name + "' is not a plain file name");
  }
  const fs::path dir = fs::weakly_canonical(fs::absolute(args.out_dir));
  const fs::path file = (dir / (name + ".csv")).lexically_normal();
  if (file.parent_path() != dir) throw UsageError("output path for '" + name + "' escapes " + dir.string());
  fs::create_directories(dir);
  return file;
}

std::string base_name(const ConfigMap& map, const std::string& fallback) {
  if (const auto* e = map.find("scenario.name")) return e->value;
  return fallback;
}

SweepOptions sweep_options(const CommonArgs& args, const std::string& label) {
  SweepOptions o;
  o.threads = thread_count(args);
  if (!args.quiet) {
    o.progress = [label, last = std::make_shared<int>(-1)](std::size_t done, std::size_t total) {
      const int pct = static_cast<int>(100 * done / total);
      if (pct / 10 != *last / 10) {
        *last = pct;
        std::cerr << fmt::format("  {}: {}%\n", label, pct);
      }
    };
  }
  return o;
}

void print_summary(const ScenarioRun& run) {
  const auto& r = run.result;
  const auto& c = run.config;
  std::cout << fmt::format("  {} ({} states per cell)\n", c.name, r.cells.empty() ? 0 : r.cells.front().n);
  if (r.axes.size() == 1) {
    const auto& ls = r.axes[0];
    std::vector<std::size_t> picks{0};
    for (std::size_t i = 0; i < ls.size(); ++i) {
      if (ls[i] == 105.0) picks.push_back(i);
    }
    if (ls.size() > 1) picks.push_back(ls.size() - 1);
    for (MetricKind m : r.metrics) {
      for (std::size_t i : picks) {
        const CellStats& s = r.at(static_cast<int>(i), m);
        std::cout << fmt::format("    {} L={:g} km: {:.4f} +- {:.4f}\n", to_string(m), ls[i], s.mean, s.sd);
      }
    }
    return;
  }
  const int n1 = static_cast<int>(r.axes[0].size());
  const int n2 = static_cast<int>(r.axes[1].size());
  for (MetricKind m : r.metrics) {
    for (auto [i, j] : {std::pair{0, 0}, std::pair{n1 - 1, 0}, std::pair{n1 - 1, n2 - 1}}) {
      const CellStats& s = r.at(r.cell(i, j), m);
      std::cout << fmt::format("    {} (L1, L2)=({:g}, {:g}) km: {:.4f} +- {:.4f}\n", to_string(m), r.axes[0][i],
                               r.axes[1][j], s.mean, s.sd);
    }
    if (m == MetricKind::concurrence) {
      const auto crossings = threshold_contour(r, m, 1.0 / std::numbers::sqrt2);
      if (crossings.empty()) {
        std::cout << "    concurrence never crosses 1/sqrt(2) on this grid\n";
      } else {
        double lo = 1e300;
        double hi = -1e300;
        for (const auto& x : crossings) {
          lo = std::min(lo, x.l1 + x.l2);
          hi = std::max(hi, x.l1 + x.l2);
        }
        std::cout << fmt::format("    1/sqrt(2) crossing: L1+L2 in [{:.1f}, {:.1f}] km ({} edges)\n", lo, hi,
                                 crossings.size());
      }
    }
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- validate --------------------------------------------------------------

int cmd_validate(const std::string& fault) {
  SelfCheckOptions options;
  if (fault == "sic-fiducial") {
    ComplexVector f(3);
    f << 1.0, -0.8, 0.1;
    options.qutrit_fiducial = f;
  } else if (!fault.empty()) {
    throw UsageError("unknown fault '" + fault + "'");
  }
  const auto checks = run_self_checks(options);
  int failed = 0;
  std::cout << fmt::format("{:<44} {:>12} {:>10} {:>11}  {}\n", "check", "measured", "tolerance", "margin", "status");
  for (const auto& c : checks) {
    if (!c.passed()) ++failed;
    std::cout << fmt::format("{:<44} {:>12.3e} {:>10.1e} {:>11.3e}  {}{}\n", c.name, c.measured, c.tolerance, c.margin(),
                             c.passed() ? "PASS" : "FAIL", c.note.empty() ? "" : "  (" + c.note + ")");
  }
  std::cout << fmt::format("{} of {} checks passed\n", checks.size() - static_cast<std::size_t>(failed), checks.size());
  if (failed > 0) {
    for (const auto& c : checks) {
      if (!c.passed()) std::cerr << "failed: " << c.name << '\n';
    }
    return 1;
  }
  return 0;
}

// ---- reconstruct -----------------------------------------------------------

std::vector<std::int64_t> parse_counts(const std::string& text) {
  std::vector<std::int64_t> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    line = line.substr(0, line.find('#'));
    for (char& ch : line) {
      if (ch == ',' || ch == ';' || ch == '\t') ch = ' ';
    }
    std::istringstream fields(line);
    for (std::string tok; fields >> tok;) {
      std::int64_t v = 0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size() || v < 0) {
        throw UsageError("counts must be non-negative integers, got '" + tok + "'");
      }
      out.push_back(v);
    }
  }
  return out;
}

struct ReconstructArgs {
  std::string system;
  std::int64_t produced = -1;
  std::string counts;
  std::string counts_file;
  std::string config;
};

int cmd_reconstruct(const ReconstructArgs& a, const CommonArgs& common) {
  ConfigMap map;
  if (!a.config.empty()) map = load_config_file(a.config);
  if (!a.system.empty()) map.set("scenario.system", a.system);
  if (a.produced >= 0) map.set("scenario.N", std::to_string(a.produced));
  apply_common(map, common);
  // Fiber sections are irrelevant for a single fit; fill them so the scenario validates.
  for (const char* sec : {"fiber1", "fiber2"}) {
    map.erase(std::string(sec) + ".alpha");
    map.erase(std::string(sec) + ".lengths");
  }
  map.erase("vary.key");
  map.erase("vary.values");
  const std::string sys = map.find("scenario.system") ? map.find("scenario.system")->value : "qubit";
  const int fibers = sys.rfind("two_", 0) == 0 ? 2 : 1;
  for (int f = 1; f <= fibers; ++f) {
    map.set(fmt::format("fiber{}.alpha", f), "0");
    map.set(fmt::format("fiber{}.lengths", f), "0");
  }
  const ScenarioConfig c = build_scenario(map);

  std::string text = a.counts;
  if (!a.counts_file.empty()) {
    std::ifstream in(a.counts_file);
    if (!in) throw UsageError("cannot open counts file '" + a.counts_file + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  const PovmSet povm = build_povm(c.system);
  CountVector counts{parse_counts(text)};
  if (counts.size() != povm.eta()) {
    throw UsageError(fmt::format("system {} needs {} counts, got {}", to_string(c.system), povm.eta(), counts.size()));
  }

  const auto t0 = std::chrono::steady_clock::now();
  const ReconstructionResult fit = reconstruct(counts, povm, c.produced, c.estimator, RngStream(c.seed, 0));
  const auto& rho = fit.rho_hat.matrix();
  std::cout << fmt::format("system {}  N {}  counts total {}  seed {}\n", to_string(c.system), c.produced,
                           counts.total(), c.seed);
  std::cout << "rho_hat (re, im):\n";
  for (Eigen::Index i = 0; i < rho.rows(); ++i) {
    std::cout << " ";
    for (Eigen::Index j = 0; j < rho.cols(); ++j) {
      std::cout << fmt::format(" ({:+.6f}, {:+.6f})", rho(i, j).real(), rho(i, j).imag());
    }
    std::cout << '\n';
  }
  std::cout << fmt::format("objective {:.6g}  iterations {}  restarts {}  converged {}  purity {:.6f}\n",
                           fit.objective_value, fit.iterations_used, fit.restarts_used, fit.converged ? "yes" : "no",
                           fit.rho_hat.purity());
  if (c.system == SystemKind::two_qubit) {
    std::cout << fmt::format("concurrence {:.6f}\n", concurrence(fit.rho_hat).value);
  }
  if (parties(c.system) == 2) {
    const int d = local_dim(c.system);
    std::cout << fmt::format("negativity {:.6f}\n", negativity(fit.rho_hat, d, d).value);
  }
  std::cout << fmt::format("runtime {:.3f} s\n", seconds_since(t0));
  return 0;
}

// ---- sweep / figures -------------------------------------------------------

int cmd_sweep(const std::string& config_path, const CommonArgs& args) {
  ConfigMap map = load_config_file(config_path);
  apply_common(map, args);
  const auto scenarios = expand_scenarios(map);
  const fs::path csv = output_file(args, base_name(map, fs::path(config_path).stem().string()));

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<ScenarioRun> runs;
  for (const auto& c : scenarios) runs.push_back({c, run_sweep(c, sweep_options(args, c.name))});
  write_results(runs, csv);

  std::cout << fmt::format("wrote {} ({} scenario(s))\n", csv.string(), runs.size());
  for (const auto& run : runs) print_summary(run);
  std::cout << fmt::format("runtime {:.1f} s\n", seconds_since(t0));
  return 0;
}

// Scenarios that differ only in name and metrics share every random draw and
// fit, so they are computed once with the union of their metrics.
std::string sharing_key(ScenarioConfig c) {
  c.name = "_";
  c.metrics = {MetricKind::fidelity};
  return to_config_text(c);
}

int cmd_figures(const std::vector<std::string>& only, const CommonArgs& args) {
  std::vector<std::pair<std::string, ConfigMap>> figures;
  for (const auto& [name, text] : bundled::kConfigs) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    ConfigMap map;
    try {
      map = parse_config_text(text);
    } catch (const ConfigError& e) {
      throw ConfigError("bundled " + std::string(name) + ".cfg: " + e.what());
    }
    apply_common(map, args);
    figures.emplace_back(std::string(name), std::move(map));
  }
  for (const auto& name : only) {
    const bool known = std::any_of(bundled::kConfigs.begin(), bundled::kConfigs.end(),
                                   [&](const auto& e) { return e.first == name; });
    if (!known) throw UsageError("--only: no bundled figure named '" + name + "'");
  }

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::vector<ScenarioConfig>> expanded;
  std::map<std::string, ScenarioConfig> jobs;
  for (const auto& [name, map] : figures) {
    expanded.push_back(expand_scenarios(map));
    for (const auto& c : expanded.back()) {
      auto [it, inserted] = jobs.try_emplace(sharing_key(c), c);
      for (MetricKind m : c.metrics) {
        auto& ms = it->second.metrics;
        if (std::find(ms.begin(), ms.end(), m) == ms.end()) ms.push_back(m);
      }
    }
  }
  std::map<std::string, SweepResult> computed;
  for (std::size_t f = 0; f < figures.size(); ++f) {
    std::vector<ScenarioRun> runs;
    for (const auto& c : expanded[f]) {
      const std::string key = sharing_key(c);
      auto it = computed.find(key);
      if (it == computed.end()) {
        const ScenarioConfig& job = jobs.at(key);
        it = computed.emplace(key, run_sweep(job, sweep_options(args, c.name))).first;
      }
      runs.push_back({c, select_metrics(it->second, c.metrics)});
    }
    const fs::path csv = output_file(args, figures[f].first);
    write_results(runs, csv);
    std::cout << fmt::format("wrote {}\n", csv.string());
    for (const auto& run : runs) print_summary(run);
  }
  std::cout << fmt::format("runtime {:.1f} s\n", seconds_since(t0));
  return 0;
}

void add_common(CLI::App* cmd, CommonArgs& args, bool with_out) {
  if (with_out) cmd->add_option("--out", args.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--seed", args.seed, "Master seed (overrides QSTATTEN_SEED and the config)");
  cmd->add_option("--threads", args.threads, "Worker threads (default: all cores)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--override", args.overrides, "KEY=VALUE config override (repeatable)")->take_all();
  cmd->add_flag("--quiet", args.quiet, "No progress output");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fiber attenuation and photonic quantum state tomography"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  CommonArgs common;

  std::string fault;
  auto* validate = app.add_subcommand("validate", "Run the POVM, metric and parameterization self-checks");
  validate->add_option("--inject-fault", fault, "Corrupt a component to exercise failure reporting")->group("");

  ReconstructArgs rec;
  auto* reconstruct_cmd = app.add_subcommand("reconstruct", "Reconstruct one density matrix from counts");
  reconstruct_cmd->add_option("--system", rec.system, "qubit, qutrit, two_qubit or two_qutrit");
  reconstruct_cmd->add_option("--N", rec.produced, "Photons (pairs) produced per setting");
  auto* counts_opt = reconstruct_cmd->add_option("--counts", rec.counts, "Comma-separated counts in POVM order");
  auto* file_opt = reconstruct_cmd->add_option("--counts-file", rec.counts_file, "File with counts in POVM order");
  counts_opt->excludes(file_opt);
  reconstruct_cmd->add_option("--config", rec.config, "Config file for estimator settings");
  add_common(reconstruct_cmd, common, false);

  std::string config_path;
  auto* sweep = app.add_subcommand("sweep", "Run the sweep described by a config file");
  sweep->add_option("--config", config_path, "Scenario config file");
  add_common(sweep, common, true);

  std::vector<std::string> only;
  auto* figures = app.add_subcommand("figures", "Run the bundled fig1..fig8 scenarios");
  figures->add_option("--only", only, "Run only the named figure(s)")->delimiter(',');
  add_common(figures, common, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (validate->parsed()) return cmd_validate(fault);
    if (reconstruct_cmd->parsed()) {
      if (rec.counts.empty() && rec.counts_file.empty()) {
        std::cerr << reconstruct_cmd->help() << "\nerror: --counts or --counts-file is required\n";
        return 2;
      }
      return cmd_reconstruct(rec, common);
    }
    if (sweep->parsed()) {
      if (config_path.empty() || !fs::is_regular_file(config_path)) {
        std::cerr << sweep->help() << "\nerror: "
                  << (config_path.empty() ? "--config is required" : "config file '" + config_path + "' not found")
                  << '\n';
        return 2;
      }
      return cmd_sweep(config_path, common);
    }
    if (figures->parsed()) return cmd_figures(only, common);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
