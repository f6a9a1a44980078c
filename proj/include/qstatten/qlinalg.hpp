#pragma once

// Small dense complex linear algebra for d <= 9: Kronecker products, partial
// transposes, Hermitian spectra, PSD square roots and trace norms, plus the
// validated state types built on them.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

#include "qstatten/errors.hpp"

namespace qstatten {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr double kHermitianTol = 1e-10;
inline constexpr double kTraceTol = 1e-10;
inline constexpr double kPsdTol = 1e-10;
// Eigenvalues in [-kPsdHardTol, 0) are treated as round-off and clamped.
inline constexpr double kPsdHardTol = 1e-8;
inline constexpr double kPureNormTol = 1e-12;

inline double max_abs(const ComplexMatrix& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

inline bool all_finite(const ComplexMatrix& a) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const Complex z = a.data()[i];
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return true;
}

/// max |A - A^dagger|; the matrix must be square.
inline double hermiticity_defect(const ComplexMatrix& a) {
  return max_abs(a - a.adjoint());
}

namespace detail {

inline void require_square(const ComplexMatrix& a, const char* what) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    std::ostringstream os;
    os << what << ": expected a non-empty square matrix, got " << a.rows() << "x" << a.cols();
    throw std::invalid_argument(os.str());
  }
}

inline void require_hermitian(const ComplexMatrix& a, const char* what) {
  require_square(a, what);
  const double defect = hermiticity_defect(a);
  if (!(defect <= kHermitianTol * std::max(1.0, max_abs(a)))) {
    std::ostringstream os;
    os << what << ": matrix is not Hermitian (max |A - A^dagger| = " << defect << ")";
    throw std::invalid_argument(os.str());
  }
}

}  // namespace detail

/// Kronecker product; block (i,j) of the result is A(i,j) * B.
inline ComplexMatrix tensor_product(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline ComplexVector tensor_product(const ComplexVector& a, const ComplexVector& b) {
  ComplexVector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

/// Transpose of the first tensor factor: the dimB x dimB block (i,j) is
/// replaced by block (j,i).
inline ComplexMatrix partial_transpose(const ComplexMatrix& rho, int dim_a, int dim_b) {
  if (dim_a <= 0 || dim_b <= 0 || rho.rows() != rho.cols() ||
      rho.rows() != static_cast<Eigen::Index>(dim_a) * dim_b) {
    std::ostringstream os;
    os << "partial_transpose: a " << rho.rows() << "x" << rho.cols()
       << " matrix does not factor as " << dim_a << " x " << dim_b;
    throw std::invalid_argument(os.str());
  }
  ComplexMatrix out(rho.rows(), rho.cols());
  for (int i = 0; i < dim_a; ++i) {
    for (int j = 0; j < dim_a; ++j) {
      out.block(i * dim_b, j * dim_b, dim_b, dim_b) = rho.block(j * dim_b, i * dim_b, dim_b, dim_b);
    }
  }
  return out;
}

struct HermitianEigen {
  RealVector values;      // ascending
  ComplexMatrix vectors;  // columns are the eigenvectors
};

inline HermitianEigen hermitian_eig(const ComplexMatrix& a) {
  detail::require_hermitian(a, "hermitian_eig");
  const ComplexMatrix sym = 0.5 * (a + a.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(sym, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw std::runtime_error("hermitian_eig: solver failed to converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

/// Real eigenvalues of a Hermitian matrix, ascending.
inline RealVector hermitian_eigvals(const ComplexMatrix& a) {
  detail::require_hermitian(a, "hermitian_eigvals");
  const ComplexMatrix sym = 0.5 * (a + a.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(sym, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw std::runtime_error("hermitian_eigvals: solver failed to converge");
  return solver.eigenvalues();
}

/// Square roots of a PSD spectrum. Values within round-off of zero (relative
/// to the largest) map to exactly zero instead of ~1e-8.
inline RealVector spectral_roots(const RealVector& values) {
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * std::max(values.maxCoeff(), 0.0);
  return values.unaryExpr([floor](double v) { return v <= floor ? 0.0 : std::sqrt(v); });
}

/// Square root of a Hermitian PSD matrix. Eigenvalues down to -1e-8 are
/// clamped to zero; anything more negative throws NotPsdError.
inline ComplexMatrix psd_sqrt(const ComplexMatrix& a) {
  const HermitianEigen eig = hermitian_eig(a);
  if (eig.values(0) < -kPsdHardTol) {
    std::ostringstream os;
    os << "psd_sqrt: smallest eigenvalue " << eig.values(0) << " is below -" << kPsdHardTol;
    throw NotPsdError(os.str());
  }
  const RealVector roots = spectral_roots(eig.values);
  return eig.vectors * roots.cast<Complex>().asDiagonal() * eig.vectors.adjoint();
}

/// Sum of singular values. Hermitian input takes the eigenvalue route.
inline double trace_norm(const ComplexMatrix& a) {
  detail::require_square(a, "trace_norm");
  if (hermiticity_defect(a) <= kHermitianTol * std::max(1.0, max_abs(a))) {
    return hermitian_eigvals(a).cwiseAbs().sum();
  }
  Eigen::JacobiSVD<ComplexMatrix> svd(a);
  return svd.singularValues().sum();
}

/// Unit-norm state vector.
class PureState {
 public:
  /// Validates ||psi|| = 1 within 1e-12.
  static PureState from_amplitudes(ComplexVector amplitudes) {
    if (amplitudes.size() == 0) throw std::invalid_argument("PureState: empty amplitude vector");
    const double norm = amplitudes.norm();
    if (!(std::abs(norm - 1.0) <= kPureNormTol)) {
      std::ostringstream os;
      os << "PureState: amplitude norm " << norm << " differs from 1";
      throw std::invalid_argument(os.str());
    }
    return PureState(std::move(amplitudes));
  }

  static PureState normalized(ComplexVector amplitudes) {
    const double norm = amplitudes.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw std::invalid_argument("PureState: cannot normalize a zero vector");
    return PureState(amplitudes / norm);
  }

  int dim() const { return static_cast<int>(amplitudes_.size()); }
  const ComplexVector& amplitudes() const { return amplitudes_; }
  ComplexMatrix projector() const { return amplitudes_ * amplitudes_.adjoint(); }

 private:
  explicit PureState(ComplexVector amplitudes) : amplitudes_(std::move(amplitudes)) {}
  ComplexVector amplitudes_;
};

inline bool supported_state_dim(Eigen::Index d) { return d == 2 || d == 3 || d == 4 || d == 9; }

/// Hermitian, PSD, unit-trace matrix of dimension 2, 3, 4 or 9. Immutable.
class DensityMatrix {
 public:
  /// Throws std::invalid_argument when a shape, finiteness, Hermiticity or
  /// trace check fails, NotPsdError when the spectrum is negative.
  static DensityMatrix from_matrix(ComplexMatrix m) {
    detail::require_square(m, "DensityMatrix");
    if (!supported_state_dim(m.rows())) {
      throw std::invalid_argument("DensityMatrix: dimension " + std::to_string(m.rows()) +
                                  " is not one of 2, 3, 4, 9");
    }
    if (!all_finite(m)) throw std::invalid_argument("DensityMatrix: non-finite entry");
    std::ostringstream os;
    const double herm = hermiticity_defect(m);
    if (herm > kHermitianTol) {
      os << "DensityMatrix: not Hermitian (defect " << herm << ")";
      throw std::invalid_argument(os.str());
    }
    const double trace_err = std::abs(m.trace() - Complex(1.0, 0.0));
    if (trace_err > kTraceTol) {
      os << "DensityMatrix: trace differs from 1 by " << trace_err;
      throw std::invalid_argument(os.str());
    }
    const double min_eig = hermitian_eigvals(m)(0);
    if (min_eig < -kPsdTol) {
      os << "DensityMatrix: smallest eigenvalue " << min_eig << " is negative";
      throw NotPsdError(os.str());
    }
    return DensityMatrix(std::move(m));
  }

  static DensityMatrix from_pure(const PureState& psi) { return from_matrix(psi.projector()); }

  static DensityMatrix maximally_mixed(int d) {
    return from_matrix(ComplexMatrix::Identity(d, d) / static_cast<double>(d));
  }

  int dim() const { return static_cast<int>(matrix_.rows()); }
  const ComplexMatrix& matrix() const { return matrix_; }
  double purity() const { return (matrix_ * matrix_).trace().real(); }

 private:
  explicit DensityMatrix(ComplexMatrix m) : matrix_(std::move(m)) {}
  ComplexMatrix matrix_;
};

inline ComplexMatrix partial_transpose(const DensityMatrix& rho, int dim_a, int dim_b) {
  return partial_transpose(rho.matrix(), dim_a, dim_b);
}

/// Pauli matrices, for the qubit constructions.
inline ComplexMatrix pauli_x() { return (ComplexMatrix(2, 2) << 0, 1, 1, 0).finished(); }
inline ComplexMatrix pauli_y() {
  return (ComplexMatrix(2, 2) << 0, Complex(0, -1), Complex(0, 1), 0).finished();
}
inline ComplexMatrix pauli_z() { return (ComplexMatrix(2, 2) << 1, 0, 0, -1).finished(); }

}  // namespace qstatten
