#pragma once

// Figures of merit for reconstructed states.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>

#include <Eigen/SVD>

#include "qstatten/qlinalg.hpp"

namespace qstatten {

enum class MetricKind { fidelity, concurrence, negativity };

inline std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::fidelity:
      return "fidelity";
    case MetricKind::concurrence:
      return "concurrence";
    case MetricKind::negativity:
      return "negativity";
  }
  return "unknown";
}

inline MetricKind parse_metric(std::string_view name) {
  if (name == "fidelity") return MetricKind::fidelity;
  if (name == "concurrence") return MetricKind::concurrence;
  if (name == "negativity") return MetricKind::negativity;
  throw std::invalid_argument("unknown metric '" + std::string(name) + "'");
}

struct MetricValue {
  MetricKind name;
  double value;
};

inline constexpr double kMetricBand = 1e-9;

namespace detail {

// Raw values inside [-1e-9, 1 + 1e-9] are clamped to [0, 1]; anything else
// is an error.
inline MetricValue clamp_metric(MetricKind kind, double raw) {
  if (!(raw >= -kMetricBand && raw <= 1.0 + kMetricBand)) {
    std::ostringstream os;
    os << to_string(kind) << " evaluated to " << raw << ", outside [0, 1]";
    throw MetricRangeError(os.str());
  }
  return {kind, std::clamp(raw, 0.0, 1.0)};
}

inline void require_same_dim(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("fidelity: dimensions differ (" + std::to_string(a.dim()) + " vs " +
                                std::to_string(b.dim()) + ")");
  }
}

}  // namespace detail

/// (Tr sqrt(sqrt(rho_in) rho_x sqrt(rho_in)))^2
inline MetricValue fidelity(const DensityMatrix& rho_in, const DensityMatrix& rho_x) {
  detail::require_same_dim(rho_in, rho_x);
  const ComplexMatrix s = psd_sqrt(rho_in.matrix());
  ComplexMatrix inner = s * rho_x.matrix() * s;
  inner = 0.5 * (inner + inner.adjoint());
  const RealVector eig = hermitian_eigvals(inner);
  if (eig(0) < -kPsdHardTol) throw NotPsdError("fidelity: intermediate matrix is not PSD");
  const double root_trace = spectral_roots(eig).sum();
  return detail::clamp_metric(MetricKind::fidelity, root_trace * root_trace);
}

/// <psi| rho |psi>, equal to fidelity() for a pure first argument.
inline MetricValue fidelity(const PureState& psi, const DensityMatrix& rho) {
  if (psi.dim() != rho.dim()) {
    throw std::invalid_argument("fidelity: dimensions differ (" + std::to_string(psi.dim()) + " vs " +
                                std::to_string(rho.dim()) + ")");
  }
  const Complex overlap = psi.amplitudes().dot(rho.matrix() * psi.amplitudes());
  return detail::clamp_metric(MetricKind::fidelity, overlap.real());
}

/// Two-qubit concurrence max(0, l1 - l2 - l3 - l4), with l_i the decreasing
/// square roots of the eigenvalues of rho (sy x sy) rho^* (sy x sy).
/// The l_i are computed as the singular values of Phi^T (sy x sy) Phi with
/// rho = Phi Phi^dagger, which keeps them accurate for nearly pure rho.
inline MetricValue concurrence(const DensityMatrix& rho) {
  if (rho.dim() != 4) throw std::invalid_argument("concurrence: defined for two qubits (dim 4), got dim " + std::to_string(rho.dim()));
  const auto [evals, evecs] = hermitian_eig(rho.matrix());
  if (evals(0) < -kPsdHardTol) throw NotPsdError("concurrence: rho is not PSD");
  const ComplexMatrix phi = evecs * evals.cwiseMax(0.0).cwiseSqrt().cast<Complex>().asDiagonal();
  const ComplexMatrix tau = phi.transpose() * tensor_product(pauli_y(), pauli_y()) * phi;
  const RealVector lambda = Eigen::JacobiSVD<ComplexMatrix>(tau).singularValues();  // decreasing
  const double raw = lambda(0) - lambda(1) - lambda(2) - lambda(3);
  return detail::clamp_metric(MetricKind::concurrence, std::max(0.0, raw));
}

/// (||rho^T_A||_1 - 1) / 2, transposing the first factor.
inline MetricValue negativity(const DensityMatrix& rho, int dim_a, int dim_b) {
  const ComplexMatrix pt = partial_transpose(rho.matrix(), dim_a, dim_b);
  const double raw = (trace_norm(pt) - 1.0) / 2.0;
  return detail::clamp_metric(MetricKind::negativity, raw);
}

/// Concurrence above 1/sqrt(2) (strictly) permits a Bell-CHSH violation.
inline bool chsh_violation_possible(const MetricValue& c) {
  if (c.name != MetricKind::concurrence) {
    throw std::invalid_argument("chsh_violation_possible: expected a concurrence, got " + std::string(to_string(c.name)));
  }
  return c.value > 1.0 / std::numbers::sqrt2;
}

}  // namespace qstatten
