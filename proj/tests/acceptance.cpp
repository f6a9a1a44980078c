// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "oracles.hpp"
#include "qstatten/experiment.hpp"

using namespace qstatten;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double budget_s;
  std::function<Verdict()> check;
};

int worker_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::vector<ScenarioConfig> bundled(const std::string& figure, const std::vector<std::string>& overrides = {}) {
  ConfigMap map = load_config_file(std::string(QSTATTEN_CONFIG_DIR) + "/" + figure + ".cfg");
  for (const auto& o : overrides) apply_override(map, o);
  return expand_scenarios(map);
}

const ScenarioConfig& variant(const std::vector<ScenarioConfig>& list, const std::string& suffix) {
  for (const auto& c : list) {
    if (c.name.size() >= suffix.size() && c.name.compare(c.name.size() - suffix.size(), suffix.size(), suffix) == 0) return c;
  }
  throw std::runtime_error("no scenario ending in " + suffix);
}

SweepResult sweep(const ScenarioConfig& c) { return run_sweep(c, {worker_threads(), {}}); }

double standard_error(const CellStats& s) { return s.sd / std::sqrt(static_cast<double>(s.n)); }

int cell_at(const SweepResult& r, double length) {
  const auto& axis = r.axes[0];
  const auto it = std::find_if(axis.begin(), axis.end(), [&](double l) { return std::abs(l - length) < 1e-9; });
  if (it == axis.end()) throw std::runtime_error(fmt::format("grid has no {} km cell", length));
  return static_cast<int>(it - axis.begin());
}

// Weighted least-squares slope of F_av(L) and its standard error.
std::pair<double, double> fitted_slope(const SweepResult& r) {
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < r.cell_count(); ++i) {
    const CellStats& s = r.at(i, MetricKind::fidelity);
    const double w = 1.0 / std::pow(std::max(standard_error(s), 1e-9), 2);
    const double x = r.axes[0][static_cast<std::size_t>(i)];
    sw += w, sx += w * x, sy += w * s.mean, sxx += w * x * x, sxy += w * x * s.mean;
  }
  const double det = sw * sxx - sx * sx;
  return {(sw * sxy - sx * sy) / det, std::sqrt(sw / det)};
}

// Shared between the fidelity landmark and the plateau check.
const SweepResult& qubit_alpha05() {
  static const SweepResult r = sweep(variant(bundled("fig2"), "[alpha=0.5]"));
  return r;
}

Verdict povm_certification() {
  double completeness = 0.0;
  double overlap = 0.0;
  bool ok = true;
  const PovmSet q = sic_povm(2);
  const PovmSet t = sic_povm(3);
  for (const PovmSet& p : {q, t, product_povm(q, q), product_povm(t, t)}) {
    for (const auto& c : validate_povm(p, 1e-10).checks) {
      ok = ok && c.passed();
      if (c.name == "completeness") completeness = std::max(completeness, c.magnitude);
      if (c.name == "sic_overlap") overlap = std::max(overlap, c.magnitude);
    }
  }
  const int n2 = product_povm(q, q).eta();
  const int n3 = product_povm(t, t).eta();
  ok = ok && n2 == 16 && n3 == 81;
  return {ok, fmt::format("max completeness defect {:.1e}, max overlap defect {:.1e}, product sizes {} and {}",
                          completeness, overlap, n2, n3)};
}

Verdict metric_oracles() {
  double conc = 0.0;
  double neg = 0.0;
  for (int j = 0; j < 100; ++j) {
    const double phi = 2.0 * std::numbers::pi * j / 100.0;
    conc = std::max(conc, std::abs(concurrence(DensityMatrix::from_pure(phi_family(phi))).value - 1.0));
    neg = std::max(neg, std::abs(negativity(DensityMatrix::from_pure(theta_family(phi)), 3, 3).value - 1.0));
  }
  std::mt19937_64 gen(2024);
  double half = 0.0;
  for (int i = 0; i < 100; ++i) {
    const DensityMatrix rho = DensityMatrix::from_pure(PureState::normalized(oracle::random_ket(4, gen)));
    half = std::max(half, std::abs(negativity(rho, 2, 2).value - concurrence(rho).value / 2.0));
  }
  return {conc <= 1e-10 && neg <= 1e-10 && half <= 1e-9,
          fmt::format("|C-1| {:.1e}, |N-1| {:.1e}, |N-C/2| {:.1e}", conc, neg, half)};
}

Verdict noiseless_recovery() {
  ChannelOptions ideal;
  ideal.loss = LossModel::none;
  ideal.shot_noise = ShotNoise::mean;
  const std::int64_t n = 1000000;
  const RngStream root(31337, 0);
  double worst_qubit = 1.0;
  double worst_qutrit = 1.0;

  std::mt19937_64 gen(31337);
  const PovmSet q = sic_povm(2);
  for (int i = 0; i < 20; ++i) {
    const PureState psi = PureState::normalized(oracle::random_ket(2, gen));
    const RngStream s = root.child(static_cast<std::uint64_t>(i));
    RngStream ch = s.child(0);
    const CountVector m = draw_measured_counts(DensityMatrix::from_pure(psi), q, n, {FiberSpec{0.2, 100.0}}, ch, ideal);
    worst_qubit = std::min(worst_qubit, fidelity(psi, reconstruct(m, q, n, {}, s.child(1)).rho_hat).value);
  }
  const PovmSet t = sic_povm(3);
  const StateSample grid = qutrit_grid();
  for (int i = 0; i < 20; ++i) {
    const PureState& psi = grid.states[static_cast<std::size_t>(i) * 259];
    const RngStream s = root.child(static_cast<std::uint64_t>(100 + i));
    RngStream ch = s.child(0);
    const CountVector m = draw_measured_counts(DensityMatrix::from_pure(psi), t, n, {FiberSpec{0.2, 100.0}}, ch, ideal);
    worst_qutrit = std::min(worst_qutrit, fidelity(psi, reconstruct(m, t, n, {}, s.child(1)).rho_hat).value);
  }
  return {worst_qubit >= 0.999 && worst_qutrit >= 0.999,
          fmt::format("min F: qubits {:.6f}, grid qutrits {:.6f}", worst_qubit, worst_qutrit)};
}

Verdict landmark_fidelity_105() {
  const SweepResult& r = qubit_alpha05();
  const CellStats& s = r.at(cell_at(r, 105.0), MetricKind::fidelity);
  return {s.mean >= 0.40 && s.mean <= 0.64 && s.sd >= 0.15 && s.sd <= 0.45,
          fmt::format("F_av(105 km) = {:.4f} (want [0.40, 0.64]), SD = {:.4f} (want [0.15, 0.45]), n = {}", s.mean, s.sd,
                      s.n)};
}

Verdict landmark_chsh_threshold() {
  const ScenarioConfig c = bundled("fig4").front();
  const SweepResult r = sweep(c);
  const double level = 1.0 / std::numbers::sqrt2;
  double min_near = std::numeric_limits<double>::infinity();
  double max_far = -std::numeric_limits<double>::infinity();
  int bad_near = 0;
  int bad_far = 0;
  int near = 0;
  int far = 0;
  for (std::size_t i = 0; i < r.axes[0].size(); ++i) {
    for (std::size_t j = 0; j < r.axes[1].size(); ++j) {
      const double sum = r.axes[0][i] + r.axes[1][j];
      const double v = r.at(r.cell(static_cast<int>(i), static_cast<int>(j)), MetricKind::concurrence).mean;
      if (sum <= 110.0 + 1e-9) {
        ++near;
        min_near = std::min(min_near, v);
        if (!(v > level)) ++bad_near;
      }
      if (sum >= 150.0 - 1e-9) {
        ++far;
        max_far = std::max(max_far, v);
        if (!(v < level)) ++bad_far;
      }
    }
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& x : threshold_contour(r, MetricKind::concurrence, level)) {
    lo = std::min(lo, x.l1 + x.l2);
    hi = std::max(hi, x.l1 + x.l2);
  }
  return {bad_near == 0 && bad_far == 0,
          fmt::format("C_av(0,0) = {:.4f}; L1+L2<=110: min {:.4f}, {} of {} cells above 1/sqrt2; L1+L2>=150: max {:.4f}, "
                      "{} of {} cells below; contour at L1+L2 in [{:.0f}, {:.0f}] km",
                      r.at(0, MetricKind::concurrence).mean, min_near, near - bad_near, near, max_far, far - bad_far, far,
                      lo, hi)};
}

Verdict trends() {
  const auto qubit_list = bundled("fig1");
  const auto qutrit_list = bundled("fig5");
  std::vector<SweepResult> qubit;
  std::vector<SweepResult> qutrit;
  for (const char* n : {"[N=10]", "[N=50]", "[N=100]"}) {
    qubit.push_back(sweep(variant(qubit_list, n)));
    qutrit.push_back(sweep(variant(qutrit_list, n)));
  }

  // (a) negative slope at 3 sigma for N = 50 and N = 100.
  bool a = true;
  std::string a_detail;
  for (int k : {1, 2}) {
    for (const auto* set : {&qubit, &qutrit}) {
      const auto [slope, se] = fitted_slope((*set)[static_cast<std::size_t>(k)]);
      a = a && slope + 3.0 * se < 0.0;
      a_detail += fmt::format(" {}/N={}: {:.2e}+-{:.1e}", set == &qubit ? "qubit" : "qutrit", k == 1 ? 50 : 100, slope, se);
    }
  }

  // (b) F(100) >= F(50) >= F(10) at every L, up to 2 standard errors.
  int b_fail = 0;
  int b_total = 0;
  for (const auto* set : {&qubit, &qutrit}) {
    for (int hi_k = 2; hi_k >= 1; --hi_k) {
      const SweepResult& hi = (*set)[static_cast<std::size_t>(hi_k)];
      const SweepResult& lo = (*set)[static_cast<std::size_t>(hi_k - 1)];
      for (int i = 0; i < hi.cell_count(); ++i) {
        const CellStats& x = hi.at(i, MetricKind::fidelity);
        const CellStats& y = lo.at(i, MetricKind::fidelity);
        ++b_total;
        if (x.mean < y.mean - 2.0 * std::hypot(standard_error(x), standard_error(y))) ++b_fail;
      }
    }
  }
  const bool b = b_fail == 0;

  // (c) qubit plateau flat over [110, 150] km and the qutrit plateau lower.
  const SweepResult& qp = qubit_alpha05();
  double q_min = 1.0, q_max = 0.0, q_sum = 0.0;
  int q_n = 0;
  for (int i = 0; i < qp.cell_count(); ++i) {
    const double l = qp.axes[0][static_cast<std::size_t>(i)];
    if (l < 110.0 - 1e-9) continue;
    const double v = qp.at(i, MetricKind::fidelity).mean;
    q_min = std::min(q_min, v), q_max = std::max(q_max, v), q_sum += v, ++q_n;
  }
  const SweepResult tp = sweep(variant(bundled("fig6", {"fiber1.lengths=110:10:150"}), "[alpha=0.5]"));
  double t_sum = 0.0;
  for (int i = 0; i < tp.cell_count(); ++i) t_sum += tp.at(i, MetricKind::fidelity).mean;
  const double q_plateau = q_sum / q_n;
  const double t_plateau = t_sum / tp.cell_count();
  const bool c = q_max - q_min < 0.1 && t_plateau < q_plateau;

  return {a && b && c,
          fmt::format("(a) {}:{}; (b) {}: {} of {} cell pairs ordered; (c) {}: qubit plateau {:.4f} range {:.4f}, "
                      "qutrit plateau {:.4f}",
                      a ? "ok" : "FAIL", a_detail, b ? "ok" : "FAIL", b_total - b_fail, b_total, c ? "ok" : "FAIL",
                      q_plateau, q_max - q_min, t_plateau)};
}

Verdict determinism() {
  const fs::path dir = fs::temp_directory_path() / "qstatten_acceptance";
  fs::remove_all(dir);
  const std::string cli = QSTATTEN_CLI_PATH;
  const std::string config = std::string(QSTATTEN_CONFIG_DIR) + "/fig1.cfg";
  auto run = [&](const std::string& out, int threads) {
    const std::string cmd = fmt::format("'{}' sweep --quiet --config '{}' --out '{}' --threads {} > /dev/null", cli, config,
                                        (dir / out).string(), threads);
    return std::system(cmd.c_str());
  };
  if (run("a", 1) != 0 || run("b", 4) != 0) return {false, "sweep command failed"};
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string a = slurp(dir / "a" / "fig1.csv");
  const std::string b = slurp(dir / "b" / "fig1.csv");
  const bool same = !a.empty() && a == b && slurp(dir / "a" / "fig1.cfg") == slurp(dir / "b" / "fig1.cfg");
  return {same, fmt::format("fig1 with 1 and 4 threads: {} bytes, {}", a.size(), same ? "identical" : "DIFFERENT")};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"povm_certification", 1.0, povm_certification},
      {"metric_oracles", 10.0, metric_oracles},
      {"noiseless_recovery", 120.0, noiseless_recovery},
      {"landmark_fidelity_105km", 300.0, landmark_fidelity_105},
      {"landmark_chsh_threshold", 1200.0, landmark_chsh_threshold},
      {"trend_properties", 900.0, trends},
      {"determinism", 600.0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = v.pass && in_time;
    if (!pass) ++failed;
    std::cout << fmt::format("{}  {:<26} {:8.2f} s (budget {:.0f} s{})  {}\n", pass ? "PASS" : "FAIL", c.name, secs,
                             c.budget_s, in_time ? "" : ", EXCEEDED", v.detail)
              << std::flush;
  }
  std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
