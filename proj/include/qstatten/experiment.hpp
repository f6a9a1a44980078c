#pragma once

// Fiber-length sweeps: simulate counts for every (grid cell, sample state),
// reconstruct, evaluate metrics and aggregate mean / sample SD per cell.
//
// Random streams: unit (cell c, state s) uses
//   RngStream(seed, 0).child(c).child(s)
// with child(0) feeding the channel and child(1) the estimator restarts, so
// every cell value is independent of scheduling and thread count.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "qstatten/channel.hpp"
#include "qstatten/estimator.hpp"
#include "qstatten/metrics.hpp"
#include "qstatten/povm.hpp"
#include "qstatten/scenario.hpp"
#include "qstatten/states.hpp"

namespace qstatten {

struct CellStats {
  double mean = 0.0;
  double sd = 0.0;
  int n = 0;
  double converged_fraction = 0.0;
};

struct SweepResult {
  std::vector<std::vector<double>> axes;  // 1 or 2 length grids (km)
  std::vector<MetricKind> metrics;
  std::vector<CellStats> cells;  // [cell * metrics.size() + metric]

  int cell_count() const {
    int n = 1;
    for (const auto& a : axes) n *= static_cast<int>(a.size());
    return n;
  }
  int metric_index(MetricKind m) const {
    const auto it = std::find(metrics.begin(), metrics.end(), m);
    if (it == metrics.end()) throw std::invalid_argument("metric '" + std::string(to_string(m)) + "' is not in the result");
    return static_cast<int>(it - metrics.begin());
  }
  /// Cell index of grid point (i, j); j is ignored for one axis.
  int cell(int i, int j = 0) const {
    return axes.size() == 2 ? i * static_cast<int>(axes[1].size()) + j : i;
  }
  const CellStats& at(int cell_index, MetricKind m) const {
    return cells.at(static_cast<std::size_t>(cell_index) * metrics.size() + static_cast<std::size_t>(metric_index(m)));
  }
  CellStats& at(int cell_index, MetricKind m) {
    return cells.at(static_cast<std::size_t>(cell_index) * metrics.size() + static_cast<std::size_t>(metric_index(m)));
  }
};

struct SweepOptions {
  int threads = 1;
  // Called after each finished unit with (done, total); may be empty.
  std::function<void(std::size_t, std::size_t)> progress;
};

/// Plain mean and (n-1)-denominator SD, summed in index order.
inline CellStats summarize(std::span<const double> values, const std::vector<bool>& converged = {}) {
  CellStats s;
  s.n = static_cast<int>(values.size());
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  if (!converged.empty()) {
    s.converged_fraction =
        static_cast<double>(std::count(converged.begin(), converged.end(), true)) / static_cast<double>(converged.size());
  }
  return s;
}

inline StateSample build_sample(const ScenarioConfig& c) {
  StateSample full;
  switch (c.sample) {
    case SampleKind::bloch:
      full = qubit_sample(c.sample_size);
      break;
    case SampleKind::qutrit_grid:
      full = qutrit_grid();
      break;
    case SampleKind::phi_family:
      full = phase_sample(PhaseFamily::phi, c.sample_size);
      break;
    case SampleKind::theta_family:
      full = phase_sample(PhaseFamily::theta, c.sample_size);
      break;
  }
  if (c.sample_stride == 1) return full;
  StateSample out{full.label + "/" + std::to_string(c.sample_stride), full.parameter_names, {}, {}};
  for (std::size_t i = 0; i < full.size(); i += static_cast<std::size_t>(c.sample_stride)) {
    out.states.push_back(full.states[i]);
    out.parameters.push_back(full.parameters[i]);
  }
  return out;
}

inline PovmSet build_povm(SystemKind system) {
  const PovmSet local = sic_povm(local_dim(system));
  return parties(system) == 2 ? product_povm(local, local) : local;
}

namespace detail {

struct UnitOutcome {
  std::vector<double> values;
  bool converged = false;
};

inline UnitOutcome run_unit(const ScenarioConfig& c, const PovmSet& povm, const PureState& psi,
                            std::span<const FiberSpec> fibers, const RngStream& unit_stream) {
  const DensityMatrix rho_in = DensityMatrix::from_pure(psi);
  RngStream channel_stream = unit_stream.child(0);
  const CountVector counts = draw_measured_counts(rho_in, povm, c.produced, fibers, channel_stream, c.channel);
  const ReconstructionResult fit = reconstruct(counts, povm, c.produced, c.estimator, unit_stream.child(1));
  UnitOutcome out;
  out.converged = fit.converged;
  const int d = local_dim(c.system);
  for (MetricKind m : c.metrics) {
    switch (m) {
      case MetricKind::fidelity:
        out.values.push_back(fidelity(psi, fit.rho_hat).value);
        break;
      case MetricKind::concurrence:
        out.values.push_back(concurrence(fit.rho_hat).value);
        break;
      case MetricKind::negativity:
        out.values.push_back(negativity(fit.rho_hat, d, d).value);
        break;
    }
  }
  return out;
}

inline SweepResult run_sweep(const ScenarioConfig& c, const SweepOptions& options) {
  c.validate();
  const PovmSet povm = build_povm(c.system);
  const StateSample sample = build_sample(c);

  SweepResult result;
  for (const auto& f : c.fibers) result.axes.push_back(f.lengths);
  result.metrics = c.metrics;
  const int cells = result.cell_count();
  const std::size_t states = sample.size();
  const std::size_t units = static_cast<std::size_t>(cells) * states;

  std::vector<UnitOutcome> outcomes(units);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  const RngStream master(c.seed, 0);

  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t u = next++; u < units; u = next++) {
      try {
        const int cell = static_cast<int>(u / states);
        const std::size_t s = u % states;
        std::vector<FiberSpec> fibers;
        if (result.axes.size() == 1) {
          fibers.push_back({c.fibers[0].alpha, result.axes[0][static_cast<std::size_t>(cell)]});
        } else {
          const auto n2 = result.axes[1].size();
          fibers.push_back({c.fibers[0].alpha, result.axes[0][static_cast<std::size_t>(cell) / n2]});
          fibers.push_back({c.fibers[1].alpha, result.axes[1][static_cast<std::size_t>(cell) % n2]});
        }
        const RngStream unit_stream = master.child(static_cast<std::uint64_t>(cell)).child(s);
        outcomes[u] = run_unit(c, povm, sample.states[s], fibers, unit_stream);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = units;
        return;
      }
      const std::size_t finished = ++done;
      if (options.progress) options.progress(finished, units);
    }
  };

  const int threads = std::max(1, options.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  result.cells.resize(static_cast<std::size_t>(cells) * c.metrics.size());
  std::vector<double> values(states);
  std::vector<bool> converged(states);
  for (int cell = 0; cell < cells; ++cell) {
    for (std::size_t s = 0; s < states; ++s) converged[s] = outcomes[static_cast<std::size_t>(cell) * states + s].converged;
    for (std::size_t m = 0; m < c.metrics.size(); ++m) {
      for (std::size_t s = 0; s < states; ++s) values[s] = outcomes[static_cast<std::size_t>(cell) * states + s].values[m];
      result.cells[static_cast<std::size_t>(cell) * c.metrics.size() + m] = summarize(values, converged);
    }
  }
  return result;
}

}  // namespace detail

/// Single-system sweep over one length grid (qubit or qutrit).
inline SweepResult run_single_sweep(const ScenarioConfig& c, const SweepOptions& options = {}) {
  if (parties(c.system) != 1 || c.fibers.size() != 1) {
    throw std::invalid_argument("run_single_sweep: needs a qubit or qutrit scenario with one fiber");
  }
  return detail::run_sweep(c, options);
}

/// Two-fiber sweep over the (L1, L2) grid (two qubits or two qutrits).
inline SweepResult run_bipartite_sweep(const ScenarioConfig& c, const SweepOptions& options = {}) {
  if (parties(c.system) != 2 || c.fibers.size() != 2) {
    throw std::invalid_argument("run_bipartite_sweep: needs a two_qubit or two_qutrit scenario with two fibers");
  }
  return detail::run_sweep(c, options);
}

inline SweepResult run_sweep(const ScenarioConfig& c, const SweepOptions& options = {}) {
  return parties(c.system) == 2 ? run_bipartite_sweep(c, options) : run_single_sweep(c, options);
}

/// Copy of `r` restricted to `metrics`, in the given order.
inline SweepResult select_metrics(const SweepResult& r, std::span<const MetricKind> metrics) {
  SweepResult out;
  out.axes = r.axes;
  out.metrics.assign(metrics.begin(), metrics.end());
  out.cells.reserve(static_cast<std::size_t>(r.cell_count()) * metrics.size());
  for (int cell = 0; cell < r.cell_count(); ++cell) {
    for (MetricKind m : metrics) out.cells.push_back(r.at(cell, m));
  }
  return out;
}

struct ContourCrossing {
  int cell_a = 0;  // cell indices of the neighboring pair
  int cell_b = 0;
  double l1 = 0.0;  // linear-interpolation estimate of the crossing point
  double l2 = 0.0;
};

/// Neighboring grid cells (along either axis) whose means lie on opposite
/// sides of `level`, with the interpolated crossing point.
inline std::vector<ContourCrossing> threshold_contour(const SweepResult& r, MetricKind metric, double level) {
  if (r.axes.size() != 2) throw std::invalid_argument("threshold_contour: needs a two-axis result");
  r.metric_index(metric);
  const int n1 = static_cast<int>(r.axes[0].size());
  const int n2 = static_cast<int>(r.axes[1].size());
  std::vector<ContourCrossing> out;
  auto check = [&](int i, int j, int k, int l) {
    const double a = r.at(r.cell(i, j), metric).mean;
    const double b = r.at(r.cell(k, l), metric).mean;
    if ((a > level) == (b > level)) return;
    const double t = (a - level) / (a - b);
    ContourCrossing c;
    c.cell_a = r.cell(i, j);
    c.cell_b = r.cell(k, l);
    c.l1 = r.axes[0][i] + t * (r.axes[0][k] - r.axes[0][i]);
    c.l2 = r.axes[1][j] + t * (r.axes[1][l] - r.axes[1][j]);
    out.push_back(c);
  };
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      if (i + 1 < n1) check(i, j, i + 1, j);
      if (j + 1 < n2) check(i, j, i, j + 1);
    }
  }
  return out;
}

/// One scenario's configuration and outcome.
struct ScenarioRun {
  ScenarioConfig config;
  SweepResult result;
};

inline constexpr std::string_view kCsvHeader = "scenario,system,N,alpha1,alpha2,L1_km,L2_km,metric,mean,sd,n,converged_fraction,seed";

/// CSV rows for one run, header excluded.
inline std::string csv_rows(const ScenarioRun& run) {
  const auto& c = run.config;
  const auto& r = run.result;
  std::string out;
  const bool two = r.axes.size() == 2;
  const std::string alpha1 = detail::fmt_double(c.fibers[0].alpha);
  const std::string alpha2 = two ? detail::fmt_double(c.fibers[1].alpha) : "";
  for (int cell = 0; cell < r.cell_count(); ++cell) {
    const auto n2 = two ? r.axes[1].size() : 1;
    const double l1 = r.axes[0][static_cast<std::size_t>(cell) / n2];
    const std::string l2 = two ? detail::fmt_double(r.axes[1][static_cast<std::size_t>(cell) % n2]) : "";
    for (MetricKind m : r.metrics) {
      const CellStats& s = r.at(cell, m);
      out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", c.name, to_string(c.system), c.produced, alpha1,
                         alpha2, detail::fmt_double(l1), l2, to_string(m), detail::fmt_double(s.mean),
                         detail::fmt_double(s.sd), s.n, detail::fmt_double(s.converged_fraction), c.seed);
    }
  }
  return out;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  std::filesystem::path p = csv;
  p.replace_extension(".cfg");
  return p;
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

}  // namespace detail

/// Writes all runs into one CSV and a sidecar (<stem>.cfg) holding every run's
/// resolved configuration and the code version. Each sidecar block parses
/// back with parse_config_text.
inline void write_results(std::span<const ScenarioRun> runs, const std::filesystem::path& path) {
  std::string csv(kCsvHeader);
  csv += '\n';
  std::string sidecar = fmt::format("# qstatten {}\n", kVersion);
  for (const auto& run : runs) {
    csv += csv_rows(run);
    sidecar += fmt::format("\n# ---- {}\n", run.config.name);
    sidecar += to_config_text(run.config);
  }
  detail::write_text(path, csv);
  detail::write_text(sidecar_path(path), sidecar);
}

inline void write_results(const SweepResult& result, const ScenarioConfig& config, const std::filesystem::path& path) {
  const ScenarioRun run{config, result};
  write_results(std::span<const ScenarioRun>(&run, 1), path);
}

/// Splits a sidecar file back into per-scenario configuration texts.
inline std::vector<std::string> split_sidecar(const std::string& text) {
  std::vector<std::string> blocks;
  std::istringstream in(text);
  std::string current;
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("# ---- ", 0) == 0) {
      if (!current.empty()) blocks.push_back(current);
      current.clear();
      continue;
    }
    if (!blocks.empty() || !current.empty() || line.rfind("[", 0) == 0) current += line + "\n";
  }
  if (!current.empty()) blocks.push_back(current);
  return blocks;
}

struct CsvRow {
  std::string scenario;
  std::string system;
  std::int64_t produced = 0;
  double alpha1 = 0.0;
  std::optional<double> alpha2;
  double l1 = 0.0;
  std::optional<double> l2;
  std::string metric;
  double mean = 0.0;
  double sd = 0.0;
  int n = 0;
  double converged_fraction = 0.0;
  std::uint64_t seed = 0;
};

inline std::vector<CsvRow> read_results(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw std::runtime_error("'" + path.string() + "': missing or unexpected CSV header");
  }
  std::vector<CsvRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 13) throw std::runtime_error(fmt::format("{}:{}: expected 13 fields, got {}", path.string(), line_no, f.size()));
    auto num = [&](const std::string& s) {
      double v = 0.0;
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size()) {
        throw std::runtime_error(fmt::format("{}:{}: bad number '{}'", path.string(), line_no, s));
      }
      return v;
    };
    CsvRow r;
    r.scenario = f[0];
    r.system = f[1];
    r.produced = std::stoll(f[2]);
    r.alpha1 = num(f[3]);
    if (!f[4].empty()) r.alpha2 = num(f[4]);
    r.l1 = num(f[5]);
    if (!f[6].empty()) r.l2 = num(f[6]);
    r.metric = f[7];
    r.mean = num(f[8]);
    r.sd = num(f[9]);
    r.n = std::stoi(f[10]);
    r.converged_fraction = num(f[11]);
    r.seed = std::stoull(f[12]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace qstatten
