#pragma once

// SIC-POVMs for qubits and qutrits and their bipartite products.
//
// Operator order is part of the count-file contract:
//   qubit  : M_k = (I + s_k . sigma) / 4 with s_k in the order
//            (1,1,1), (1,-1,-1), (-1,1,-1), (-1,-1,1), all divided by sqrt(3)
//   qutrit : M_(a,b) = |psi_ab><psi_ab| / 3, |psi_ab> = X^a Z^b |f>,
//            f = (|0> - |1>)/sqrt(2), (a,b) lexicographic, k = 3a + b
//   product: M_(j,k) = P_j (x) Q_k, index j * eta_Q + k

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "qstatten/qlinalg.hpp"

namespace qstatten {

enum class PovmKind { sic, product, custom };

/// Real coordinates of the Hermitian part H = (A + A^dag)/2 of a square
/// matrix: H_ii first, then (Re H_ij, Im H_ij) for i < j in row-major order.
inline RealVector hermitian_coordinates(const ComplexMatrix& a) {
  const Eigen::Index d = a.rows();
  RealVector c(d * d);
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < d; ++i) c(idx++) = a(i, i).real();
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i + 1; j < d; ++j) {
      const Complex h = 0.5 * (a(i, j) + std::conj(a(j, i)));
      c(idx++) = h.real();
      c(idx++) = h.imag();
    }
  }
  return c;
}

/// Inverse of hermitian_coordinates.
inline ComplexMatrix from_hermitian_coordinates(const RealVector& c, int d) {
  if (c.size() != static_cast<Eigen::Index>(d) * d) {
    throw std::invalid_argument("from_hermitian_coordinates: expected " + std::to_string(d * d) + " coordinates");
  }
  ComplexMatrix a(d, d);
  Eigen::Index idx = 0;
  for (int i = 0; i < d; ++i) a(i, i) = c(idx++);
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      a(i, j) = Complex(c(idx), c(idx + 1));
      a(j, i) = std::conj(a(i, j));
      idx += 2;
    }
  }
  return a;
}

/// Ordered measurement operators on a d-dimensional space. The set is not
/// validated on construction; run validate_povm for that.
class PovmSet {
 public:
  PovmSet(int dim, int parties, PovmKind kind, std::vector<ComplexMatrix> operators)
      : dim_(dim), parties_(parties), kind_(kind), operators_(std::move(operators)) {
    if (dim_ <= 0) throw std::invalid_argument("PovmSet: dimension must be positive");
    if (parties_ < 1 || parties_ > 2) throw std::invalid_argument("PovmSet: 1 or 2 parties supported");
    if (operators_.empty()) throw std::invalid_argument("PovmSet: no operators");
    const auto d2 = static_cast<Eigen::Index>(dim_) * dim_;
    flat_.resize(static_cast<Eigen::Index>(operators_.size()), d2);
    for (std::size_t k = 0; k < operators_.size(); ++k) {
      const ComplexMatrix& m = operators_[k];
      if (m.rows() != dim_ || m.cols() != dim_) {
        std::ostringstream os;
        os << "PovmSet: operator " << k << " is " << m.rows() << "x" << m.cols() << ", expected " << dim_ << "x"
           << dim_;
        throw std::invalid_argument(os.str());
      }
      RealVector row = hermitian_coordinates(m);
      row.tail(d2 - dim_) *= 2.0;
      flat_.row(static_cast<Eigen::Index>(k)) = row.transpose();
    }
  }

  int dim() const { return dim_; }
  int parties() const { return parties_; }
  PovmKind kind() const { return kind_; }
  int eta() const { return static_cast<int>(operators_.size()); }
  const std::vector<ComplexMatrix>& operators() const { return operators_; }
  const ComplexMatrix& op(int k) const { return operators_.at(static_cast<std::size_t>(k)); }

  /// Row k holds the Hermitian coordinates of M_k with off-diagonal entries
  /// doubled, so flat() * hermitian_coordinates(A) = (Re Tr M_k A)_k.
  const Eigen::MatrixXd& flat() const { return flat_; }

  /// Born-rule probabilities Re Tr(M_k rho) for an arbitrary d x d matrix.
  RealVector probabilities(const ComplexMatrix& rho) const {
    if (rho.rows() != dim_ || rho.cols() != dim_) {
      throw std::invalid_argument("PovmSet::probabilities: state dimension " + std::to_string(rho.rows()) +
                                  " does not match POVM dimension " + std::to_string(dim_));
    }
    return flat_ * hermitian_coordinates(rho);
  }

  /// sum_k w_k M_k
  ComplexMatrix weighted_sum(const RealVector& weights) const {
    RealVector c = flat_.transpose() * weights;
    c.tail(c.size() - dim_) *= 0.5;
    return from_hermitian_coordinates(c, dim_);
  }

 private:
  int dim_;
  int parties_;
  PovmKind kind_;
  std::vector<ComplexMatrix> operators_;
  Eigen::MatrixXd flat_;
};

/// Tr(M_j M_k) for a SIC set in dimension d: (d delta_jk + 1) / (d^2 (d+1)).
inline double sic_overlap(int d, bool same) {
  return (d * (same ? 1.0 : 0.0) + 1.0) / (static_cast<double>(d) * d * (d + 1));
}

/// Qutrit Weyl-Heisenberg orbit {X^a Z^b |f>} scaled by 1/3. Any normalized
/// fiducial gives a complete POVM; only a SIC fiducial gives equal overlaps.
inline PovmSet sic_povm_from_fiducial(const ComplexVector& fiducial) {
  if (fiducial.size() != 3) throw std::invalid_argument("sic_povm_from_fiducial: fiducial must have 3 entries");
  const ComplexVector f = fiducial.normalized();
  const Complex omega = std::polar(1.0, 2.0 * std::numbers::pi / 3.0);
  ComplexMatrix shift = ComplexMatrix::Zero(3, 3);
  ComplexMatrix clock = ComplexMatrix::Zero(3, 3);
  for (int j = 0; j < 3; ++j) {
    shift((j + 1) % 3, j) = 1.0;
    clock(j, j) = std::pow(omega, j);
  }
  std::vector<ComplexMatrix> ops;
  ops.reserve(9);
  ComplexMatrix xa = ComplexMatrix::Identity(3, 3);
  for (int a = 0; a < 3; ++a) {
    ComplexMatrix zb = ComplexMatrix::Identity(3, 3);
    for (int b = 0; b < 3; ++b) {
      const ComplexVector psi = xa * zb * f;
      ops.push_back(psi * psi.adjoint() / 3.0);
      zb = clock * zb;
    }
    xa = shift * xa;
  }
  return PovmSet(3, 1, PovmKind::sic, std::move(ops));
}

inline ComplexVector default_qutrit_fiducial() {
  ComplexVector f(3);
  f << 1.0, -1.0, 0.0;
  return f / std::numbers::sqrt2;
}

/// SIC-POVM for d = 2 (tetrahedron, 4 operators) or d = 3 (9 operators).
inline PovmSet sic_povm(int d) {
  if (d == 2) {
    static constexpr double kSigns[4][3] = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
    const double inv_sqrt3 = 1.0 / std::sqrt(3.0);
    std::vector<ComplexMatrix> ops;
    ops.reserve(4);
    for (const auto& s : kSigns) {
      const ComplexMatrix bloch =
          inv_sqrt3 * (s[0] * pauli_x() + s[1] * pauli_y() + s[2] * pauli_z());
      ops.push_back(0.25 * (ComplexMatrix::Identity(2, 2) + bloch));
    }
    return PovmSet(2, 1, PovmKind::sic, std::move(ops));
  }
  if (d == 3) return sic_povm_from_fiducial(default_qutrit_fiducial());
  throw std::invalid_argument("sic_povm: unsupported dimension " + std::to_string(d) + " (supported: 2, 3)");
}

/// All products P_j (x) Q_k, j outer and k inner.
inline PovmSet product_povm(const PovmSet& p, const PovmSet& q) {
  std::vector<ComplexMatrix> ops;
  ops.reserve(static_cast<std::size_t>(p.eta()) * q.eta());
  for (const auto& a : p.operators()) {
    for (const auto& b : q.operators()) ops.push_back(tensor_product(a, b));
  }
  return PovmSet(p.dim() * q.dim(), p.parties() + q.parties(), PovmKind::product, std::move(ops));
}

struct PovmCheck {
  std::string name;
  double magnitude = 0.0;  // measured defect
  double tolerance = 0.0;
  std::string detail;

  bool passed() const { return magnitude <= tolerance; }
};

struct PovmReport {
  std::vector<PovmCheck> checks;

  std::vector<PovmCheck> violations() const {
    std::vector<PovmCheck> out;
    std::copy_if(checks.begin(), checks.end(), std::back_inserter(out), [](const PovmCheck& c) { return !c.passed(); });
    return out;
  }
  bool ok() const { return violations().empty(); }
};

/// Checks hermiticity, PSD, completeness and (for SIC sets) the overlap law.
inline PovmReport validate_povm(const PovmSet& povm, double tol = 1e-10) {
  PovmReport report;
  const int d = povm.dim();

  PovmCheck herm{"hermiticity", 0.0, tol, ""};
  PovmCheck psd{"positivity", 0.0, tol, ""};
  for (int k = 0; k < povm.eta(); ++k) {
    const ComplexMatrix& m = povm.op(k);
    const double defect = hermiticity_defect(m);
    if (defect > herm.magnitude) {
      herm.magnitude = defect;
      herm.detail = "operator " + std::to_string(k);
    }
    const ComplexMatrix sym = 0.5 * (m + m.adjoint());
    const double neg = std::max(0.0, -hermitian_eigvals(sym)(0));
    if (neg > psd.magnitude) {
      psd.magnitude = neg;
      psd.detail = "operator " + std::to_string(k);
    }
  }
  report.checks.push_back(herm);
  report.checks.push_back(psd);

  ComplexMatrix total = ComplexMatrix::Zero(d, d);
  for (const auto& m : povm.operators()) total += m;
  report.checks.push_back({"completeness", max_abs(total - ComplexMatrix::Identity(d, d)), tol, "max |sum M_k - I|"});

  if (povm.kind() == PovmKind::sic) {
    PovmCheck overlap{"sic_overlap", 0.0, tol, ""};
    if (povm.eta() != d * d) {
      overlap.magnitude = 1.0;
      overlap.detail = "eta = " + std::to_string(povm.eta()) + ", expected d^2 = " + std::to_string(d * d);
    }
    for (int j = 0; j < povm.eta(); ++j) {
      for (int k = j; k < povm.eta(); ++k) {
        const double hs = (povm.op(j) * povm.op(k)).trace().real();
        const double err = std::abs(hs - sic_overlap(d, j == k));
        if (err > overlap.magnitude) {
          overlap.magnitude = err;
          overlap.detail = "pair (" + std::to_string(j) + "," + std::to_string(k) + ")";
        }
      }
    }
    report.checks.push_back(overlap);
  }
  return report;
}

}  // namespace qstatten
