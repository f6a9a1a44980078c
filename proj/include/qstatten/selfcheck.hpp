#pragma once

// Invariant suite behind `qstatten validate`: POVM identities, metric oracles
// and a params_to_density fuzz run. Each check reports its measured defect
// against a tolerance.

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "qstatten/channel.hpp"
#include "qstatten/estimator.hpp"
#include "qstatten/metrics.hpp"
#include "qstatten/povm.hpp"
#include "qstatten/states.hpp"

namespace qstatten {

struct SelfCheck {
  std::string name;
  double measured = 0.0;  // defect; 0 is perfect
  double tolerance = 0.0;
  std::string note;

  bool passed() const { return std::isfinite(measured) && measured <= tolerance; }
  double margin() const { return tolerance - measured; }
};

struct SelfCheckOptions {
  // Replaces the qutrit SIC fiducial; used for fault injection.
  std::optional<ComplexVector> qutrit_fiducial;
  int fuzz_trials = 10000;
  std::uint64_t seed = 7;
};

inline std::vector<SelfCheck> run_self_checks(const SelfCheckOptions& options = {}) {
  std::vector<SelfCheck> out;
  auto add_report = [&](const std::string& label, const PovmReport& report) {
    for (const auto& c : report.checks) out.push_back({label + "." + c.name, c.magnitude, c.tolerance, c.detail});
  };

  const PovmSet qubit = sic_povm(2);
  const PovmSet qutrit = options.qutrit_fiducial ? sic_povm_from_fiducial(*options.qutrit_fiducial) : sic_povm(3);
  const PovmSet two_qubit = product_povm(qubit, qubit);
  const PovmSet two_qutrit = product_povm(qutrit, qutrit);
  add_report("povm.qubit_sic", validate_povm(qubit));
  add_report("povm.qutrit_sic", validate_povm(qutrit));
  add_report("povm.two_qubit_product", validate_povm(two_qubit));
  add_report("povm.two_qutrit_product", validate_povm(two_qutrit));
  out.push_back({"povm.two_qubit_count", std::abs(two_qubit.eta() - 16.0), 0.0, "16 operators"});
  out.push_back({"povm.two_qutrit_count", std::abs(two_qutrit.eta() - 81.0), 0.0, "81 operators"});

  const double pi = std::numbers::pi;
  double conc_err = 0.0;
  double neg_err = 0.0;
  for (int j = 0; j < 100; ++j) {
    const double phi = 2.0 * pi * j / 100.0;
    conc_err = std::max(conc_err, std::abs(concurrence(DensityMatrix::from_pure(phi_family(phi))).value - 1.0));
    neg_err = std::max(neg_err, std::abs(negativity(DensityMatrix::from_pure(theta_family(phi)), 3, 3).value - 1.0));
  }
  out.push_back({"metrics.concurrence_phi_family", conc_err, 1e-10, "100 phases, expect 1"});
  out.push_back({"metrics.negativity_theta_family", neg_err, 1e-10, "100 phases, expect 1"});

  const DensityMatrix bell = DensityMatrix::from_pure(phi_family(0.0));
  out.push_back({"metrics.negativity_bell", std::abs(negativity(bell, 2, 2).value - 0.5), 1e-10, "expect 1/2"});
  const PureState product = PureState::normalized(tensor_product(bloch_qubit(0.7, 1.1).amplitudes(),
                                                                 bloch_qubit(2.1, -0.4).amplitudes()));
  const DensityMatrix prod = DensityMatrix::from_pure(product);
  out.push_back({"metrics.concurrence_product", concurrence(prod).value, 1e-9, "expect 0"});
  out.push_back({"metrics.negativity_product", negativity(prod, 2, 2).value, 1e-9, "expect 0"});
  out.push_back({"metrics.fidelity_self", std::abs(fidelity(bell, bell).value - 1.0), 1e-9, "expect 1"});

  // Born-rule normalization of the qutrit SIC on the grid states.
  double norm_err = 0.0;
  const StateSample grid = qutrit_grid();
  for (std::size_t i = 0; i < grid.size(); i += 97) {
    norm_err = std::max(norm_err, std::abs(qutrit.probabilities(grid.states[i].projector()).sum() - 1.0));
  }
  out.push_back({"povm.qutrit_probability_sum", norm_err, 1e-10, "sum_k Tr(M_k rho) = 1"});

  // params_to_density fuzz: every finite parameter vector is a valid state.
  RngStream rng(options.seed, 0);
  double worst_herm = 0.0;
  double worst_trace = 0.0;
  double worst_eig = 0.0;
  int failures = 0;
  static constexpr int kDims[] = {2, 3, 4, 9};
  for (int trial = 0; trial < options.fuzz_trials; ++trial) {
    const int d = kDims[trial % 4];
    CholeskyParams p{d, RealVector(d * d)};
    const double scale = std::pow(10.0, rng.uniform(-3.0, 3.0));
    for (int i = 0; i < d * d; ++i) p.t(i) = scale * rng.uniform(-1.0, 1.0);
    try {
      const DensityMatrix rho = params_to_density(p);
      worst_herm = std::max(worst_herm, hermiticity_defect(rho.matrix()));
      worst_trace = std::max(worst_trace, std::abs(rho.matrix().trace().real() - 1.0));
      worst_eig = std::max(worst_eig, std::max(0.0, -hermitian_eigvals(rho.matrix())(0)));
    } catch (const std::exception&) {
      ++failures;
    }
  }
  out.push_back({"estimator.cholesky_fuzz_failures", static_cast<double>(failures), 0.0,
                 std::to_string(options.fuzz_trials) + " random parameter vectors"});
  out.push_back({"estimator.cholesky_fuzz_hermiticity", worst_herm, 1e-10, ""});
  out.push_back({"estimator.cholesky_fuzz_trace", worst_trace, 1e-10, ""});
  out.push_back({"estimator.cholesky_fuzz_psd", worst_eig, 1e-10, ""});
  return out;
}

}  // namespace qstatten
