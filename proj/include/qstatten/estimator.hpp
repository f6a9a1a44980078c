#pragma once

// Least-squares tomography over the Cholesky parameterization
//   rho(t) = T^dagger T / Tr(T^dagger T),
// with T lower triangular. Layout of t (length d^2): the d real diagonal
// entries T_00..T_{d-1,d-1}, then (Re T_ij, Im T_ij) for i > j in row-major
// order (i = 1..d-1, j = 0..i-1).

#include <cmath>
#include <cstdint>
#include <sstream>
#include <vector>

#include "qstatten/channel.hpp"
#include "qstatten/optimize.hpp"
#include "qstatten/povm.hpp"
#include "qstatten/qlinalg.hpp"

namespace qstatten {

enum class ModelCounts { continuous, rounded };
enum class GradientMode { analytic, finite_difference };

struct CholeskyParams {
  int dim = 0;
  RealVector t;

  void validate() const {
    if (dim <= 0 || t.size() != static_cast<Eigen::Index>(dim) * dim) {
      std::ostringstream os;
      os << "CholeskyParams: expected " << dim * dim << " parameters for d=" << dim << ", got " << t.size();
      throw std::invalid_argument(os.str());
    }
    if (!t.allFinite()) throw std::invalid_argument("CholeskyParams: non-finite parameter");
  }
};

struct ReconstructionOptions {
  int restarts = 5;
  int max_iterations = 2000;
  double objective_tolerance = 1e-12;
  double parameter_tolerance = 1e-10;
  ModelCounts model_counts = ModelCounts::continuous;
  // Scale the model to the observed total sum(m_k) instead of the nominal N.
  bool renormalize_counts = false;
  GradientMode gradient = GradientMode::analytic;

  void validate() const {
    if (restarts < 1) throw std::invalid_argument("ReconstructionOptions: restarts must be >= 1");
    if (max_iterations < 1) throw std::invalid_argument("ReconstructionOptions: max_iterations must be >= 1");
    if (!(objective_tolerance > 0.0) || !(parameter_tolerance > 0.0)) {
      throw std::invalid_argument("ReconstructionOptions: tolerances must be positive");
    }
  }
};

struct ReconstructionResult {
  DensityMatrix rho_hat;
  double objective_value = 0.0;
  int iterations_used = 0;
  int restarts_used = 0;
  bool converged = false;
};

namespace detail {

inline ComplexMatrix unpack_factor(int d, const RealVector& t) {
  ComplexMatrix tm = ComplexMatrix::Zero(d, d);
  Eigen::Index idx = 0;
  for (int i = 0; i < d; ++i) tm(i, i) = t(idx++);
  for (int i = 1; i < d; ++i) {
    for (int j = 0; j < i; ++j) {
      tm(i, j) = Complex(t(idx), t(idx + 1));
      idx += 2;
    }
  }
  return tm;
}

}  // namespace detail

/// Lower-triangular T assembled from t.
inline ComplexMatrix cholesky_factor(const CholeskyParams& params) {
  params.validate();
  return detail::unpack_factor(params.dim, params.t);
}

namespace detail {

constexpr double kDegenerateTrace = 1e-300;

// T^dagger T / trace, Hermitian-symmetrized. Throws on a zero trace.
inline ComplexMatrix normalized_gram(const ComplexMatrix& t) {
  ComplexMatrix a = t.adjoint() * t;
  const double tr = a.trace().real();
  if (!(tr >= kDegenerateTrace) || !std::isfinite(tr)) {
    throw DegenerateParametersError("params_to_density: Tr(T^dagger T) = " + std::to_string(tr) +
                                    " is degenerate");
  }
  a /= tr;
  return 0.5 * (a + a.adjoint());
}

}  // namespace detail

inline DensityMatrix params_to_density(const CholeskyParams& params) {
  return DensityMatrix::from_matrix(detail::normalized_gram(cholesky_factor(params)));
}

/// Objective and gradient of sum_k (e_k(t) - m_k)^2 for one data set.
class LsObjective {
 public:
  LsObjective(const PovmSet& povm, const CountVector& measured, std::int64_t produced,
              const ReconstructionOptions& options)
      : povm_(povm), options_(options), dim_(povm.dim()) {
    if (measured.size() != povm.eta()) {
      std::ostringstream os;
      os << "ls_objective: " << measured.size() << " counts for a POVM with " << povm.eta() << " operators";
      throw std::invalid_argument(os.str());
    }
    if (produced < 0) throw std::invalid_argument("ls_objective: produced must be non-negative");
    measured_.resize(povm.eta());
    for (int k = 0; k < povm.eta(); ++k) measured_(k) = static_cast<double>(measured[k]);
    scale_ = options.renormalize_counts ? measured_.sum() : static_cast<double>(produced);
  }

  int dim() const { return dim_; }
  int parameter_count() const { return dim_ * dim_; }
  double scale() const { return scale_; }

  /// Objective value; fills grad for continuous mode when requested.
  double operator()(const RealVector& t, RealVector* grad) const {
    const ComplexMatrix tm = factor(t);
    ComplexMatrix a = tm.adjoint() * tm;
    const double tr = a.trace().real();
    if (!(tr >= detail::kDegenerateTrace)) {
      throw DegenerateParametersError("ls_objective: degenerate Cholesky parameters");
    }
    const RealVector probs = povm_.flat() * hermitian_coordinates(a) / tr;
    RealVector model = scale_ * probs;
    if (options_.model_counts == ModelCounts::rounded) {
      for (Eigen::Index k = 0; k < model.size(); ++k) model(k) = std::max(0.0, round_half_up(model(k)));
    }
    const RealVector residual = model - measured_;
    const double value = residual.squaredNorm();
    if (grad != nullptr) {
      if (options_.gradient == GradientMode::finite_difference || options_.model_counts == ModelCounts::rounded) {
        *grad = finite_difference_gradient(t);
      } else {
        *grad = analytic_gradient(tm, tr, probs, residual);
      }
    }
    return value;
  }

  double value(const CholeskyParams& params) const {
    params.validate();
    if (params.dim != dim_) throw std::invalid_argument("ls_objective: parameter dimension does not match POVM");
    return (*this)(params.t, nullptr);
  }

  /// Objective evaluated directly at a state, without a parameterization.
  double value(const DensityMatrix& rho) const {
    if (rho.dim() != dim_) throw std::invalid_argument("ls_objective: state dimension does not match POVM");
    RealVector model = scale_ * povm_.probabilities(rho.matrix());
    if (options_.model_counts == ModelCounts::rounded) {
      for (Eigen::Index k = 0; k < model.size(); ++k) model(k) = std::max(0.0, round_half_up(model(k)));
    }
    return (model - measured_).squaredNorm();
  }

  /// Central differences, step 1e-6 relative.
  RealVector finite_difference_gradient(const RealVector& t) const {
    RealVector g(t.size());
    RealVector probe = t;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(t(i)));
      probe(i) = t(i) + h;
      const double up = (*this)(probe, nullptr);
      probe(i) = t(i) - h;
      const double down = (*this)(probe, nullptr);
      probe(i) = t(i);
      g(i) = (up - down) / (2.0 * h);
    }
    return g;
  }

 private:
  ComplexMatrix factor(const RealVector& t) const {
    if (t.size() != parameter_count()) throw std::invalid_argument("ls_objective: wrong parameter count");
    return detail::unpack_factor(dim_, t);
  }

  // With rho = A / s, A = T^dag T, s = Tr A and G = df/drho = 2 S sum_k r_k M_k:
  //   df = Tr(G' dA),  G' = (G - Tr(G rho) I) / s,
  //   df/dRe T_ij = 2 Re (G' T^dag)_ji,  df/dIm T_ij = -2 Im (G' T^dag)_ji.
  RealVector analytic_gradient(const ComplexMatrix& tm, double tr, const RealVector& probs,
                               const RealVector& residual) const {
    const RealVector weights = 2.0 * scale_ * residual;
    ComplexMatrix g = povm_.weighted_sum(weights);
    const double g_rho = weights.dot(probs);
    g.diagonal().array() -= g_rho;
    g /= tr;
    const ComplexMatrix y = g * tm.adjoint();
    RealVector out(parameter_count());
    Eigen::Index idx = 0;
    for (int i = 0; i < dim_; ++i) out(idx++) = 2.0 * y(i, i).real();
    for (int i = 1; i < dim_; ++i) {
      for (int j = 0; j < i; ++j) {
        out(idx++) = 2.0 * y(j, i).real();
        out(idx++) = -2.0 * y(j, i).imag();
      }
    }
    return out;
  }

  const PovmSet& povm_;
  ReconstructionOptions options_;
  int dim_;
  RealVector measured_;
  double scale_ = 0.0;
};

inline double ls_objective(const CholeskyParams& params, const CountVector& measured, const PovmSet& povm,
                           std::int64_t produced, const ReconstructionOptions& options = {}) {
  return LsObjective(povm, measured, produced, options).value(params);
}

/// Best of `restarts` quasi-Newton fits from starts drawn uniformly in
/// [-1,1]^(d^2). Restart r draws from rng.child(r); ties within 1e-9 keep the
/// earlier restart. Rounded mode polishes each BFGS fit with Nelder-Mead on
/// the piecewise-constant objective.
inline ReconstructionResult reconstruct(const CountVector& measured, const PovmSet& povm, std::int64_t produced,
                                        const ReconstructionOptions& options, const RngStream& rng) {
  options.validate();
  const LsObjective objective(povm, measured, produced, options);
  const int n = objective.parameter_count();

  ReconstructionOptions smooth = options;
  smooth.model_counts = ModelCounts::continuous;
  const LsObjective smooth_objective(povm, measured, produced, smooth);

  const optimize::Options opt{options.max_iterations, options.objective_tolerance, options.parameter_tolerance,
                              1e-12};

  struct Best {
    RealVector t;
    double f = std::numeric_limits<double>::infinity();
    int iterations = 0;
  } best;
  bool any_converged = false;

  for (int r = 0; r < options.restarts; ++r) {
    RngStream stream = rng.child(static_cast<std::uint64_t>(r));
    RealVector start(n);
    do {
      for (int i = 0; i < n; ++i) start(i) = stream.uniform(-1.0, 1.0);
    } while (start.squaredNorm() < 1e-12);

    optimize::Result run = optimize::minimize_bfgs(smooth_objective, start, opt);
    if (options.model_counts == ModelCounts::rounded) {
      optimize::Result polish = optimize::minimize_nelder_mead(objective, run.x, opt);
      polish.iterations += run.iterations;
      polish.converged = polish.converged || run.converged;
      run = std::move(polish);
      run.f = objective(run.x, nullptr);
    }
    any_converged = any_converged || run.converged;
    if (run.f < best.f - 1e-9) {
      best.t = run.x;
      best.f = run.f;
      best.iterations = run.iterations;
    }
  }

  const CholeskyParams params{povm.dim(), best.t};
  return {params_to_density(params), best.f, best.iterations, options.restarts, any_converged};
}

}  // namespace qstatten
