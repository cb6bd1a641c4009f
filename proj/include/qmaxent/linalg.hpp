#pragma once

// Dense Hermitian linear algebra on finite-dimensional Hilbert spaces.
//
// Conventions used across the library:
//  - bipartite spaces are ordered system first, environment second, with
//    row-major composite index s * d_E + e;
//  - entropies are in nats.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include "qmaxent/error.hpp"

namespace qmaxent {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

namespace tol {
inline constexpr double hermiticity = 1e-8;
inline constexpr double support_cutoff = 1e-12;  // relative to the largest eigenvalue
inline constexpr double support_leak = 1e-10;
inline constexpr double trace = 1e-8;
inline constexpr double psd = 1e-8;
inline constexpr double unitarity = 1e-10;
inline constexpr double projector = 1e-10;
}  // namespace tol

namespace detail {

inline bool all_finite(const Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (!std::isfinite(m.data()[i].real()) || !std::isfinite(m.data()[i].imag())) return false;
  }
  return true;
}

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline Matrix symmetrize(const Matrix& m) { return (m + m.adjoint()) / 2.0; }

inline double hermiticity_defect(const Matrix& m) { return max_abs(m - m.adjoint()); }

// Hilbert-Schmidt inner product tr{A B} for Hermitian A, B (real by construction).
inline double hs_inner(const Matrix& a, const Matrix& b) {
  return (a.cwiseProduct(b.transpose())).sum().real();
}

// Rescale a vector so its largest-magnitude component is real and positive.
inline void fix_phase(Eigen::Ref<Vector> v) {
  Eigen::Index best = 0;
  double best_mag = -1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double mag = std::abs(v(i));
    // tolerance keeps the choice stable when two components tie to rounding
    if (mag > best_mag + 1e-12) {
      best_mag = mag;
      best = i;
    }
  }
  if (best_mag <= 0.0) return;
  v *= std::conj(v(best)) / best_mag;
}

inline Matrix validated_square(const Matrix& m, const char* what) {
  require(m.rows() >= 1 && m.rows() == m.cols(), ErrorKind::invalid_input,
          std::string(what) + " must be a non-empty square matrix");
  require(all_finite(m), ErrorKind::invalid_input, std::string(what) + " has non-finite entries");
  return m;
}

}  // namespace detail

// An observable or Hamiltonian. Stored exactly Hermitian.
class HermitianOperator {
 public:
  HermitianOperator() : m_(Matrix::Zero(1, 1)) {}

  explicit HermitianOperator(const Matrix& m) {
    detail::validated_square(m, "Hermitian operator");
    const double defect = detail::hermiticity_defect(m);
    require(defect <= tol::hermiticity, ErrorKind::invalid_input,
            "matrix is not Hermitian (max |A - A^dagger| = " + std::to_string(defect) + ")");
    m_ = detail::symmetrize(m);
  }

  static HermitianOperator identity(int dim) { return HermitianOperator(Matrix::Identity(dim, dim)); }
  static HermitianOperator zero(int dim) { return HermitianOperator(Matrix::Zero(dim, dim)); }
  static HermitianOperator diagonal(const RealVector& d) {
    return HermitianOperator(Matrix(d.cast<Complex>().asDiagonal()));
  }

  int dim() const { return static_cast<int>(m_.rows()); }
  const Matrix& matrix() const { return m_; }

  double expectation(const Matrix& rho) const { return detail::hs_inner(m_, rho); }

 private:
  Matrix m_;
};

struct Spectrum {
  RealVector eigenvalues;  // ascending
  Matrix eigenvectors;     // columns
};

namespace detail {

inline Spectrum eig(const Matrix& h) {
  require(all_finite(h), ErrorKind::invalid_input, "eigendecomposition input has non-finite entries");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h);
  require(solver.info() == Eigen::Success, ErrorKind::domain, "eigendecomposition failed");
  Spectrum s{solver.eigenvalues(), solver.eigenvectors()};
  for (Eigen::Index c = 0; c < s.eigenvectors.cols(); ++c) fix_phase(s.eigenvectors.col(c));
  return s;
}

inline Matrix from_spectrum(const Matrix& vecs, const RealVector& vals) {
  return vecs * vals.cast<Complex>().asDiagonal() * vecs.adjoint();
}

}  // namespace detail

inline Spectrum eig_hermitian(const HermitianOperator& h) { return detail::eig(h.matrix()); }

// V f(diag) V^dagger. f must be finite on the spectrum.
template <class F>
HermitianOperator func_of_hermitian(const HermitianOperator& h, F&& f) {
  const Spectrum s = eig_hermitian(h);
  RealVector mapped(s.eigenvalues.size());
  for (Eigen::Index i = 0; i < mapped.size(); ++i) {
    mapped(i) = f(s.eigenvalues(i));
    require(std::isfinite(mapped(i)), ErrorKind::domain,
            "function undefined at eigenvalue " + std::to_string(s.eigenvalues(i)));
  }
  return HermitianOperator(detail::symmetrize(detail::from_spectrum(s.eigenvectors, mapped)));
}

inline HermitianOperator exp_hermitian(const HermitianOperator& h) {
  return func_of_hermitian(h, [](double x) { return std::exp(x); });
}

// Strict matrix logarithm: eigenvalues below the support cutoff are a domain error.
inline HermitianOperator log_hermitian(const HermitianOperator& h) {
  const Spectrum s = eig_hermitian(h);
  const double cutoff = tol::support_cutoff * std::max(s.eigenvalues.maxCoeff(), 0.0);
  return func_of_hermitian(h, [cutoff](double x) {
    return x > cutoff && x > 0.0 ? std::log(x) : std::numeric_limits<double>::quiet_NaN();
  });
}

// exp(-i H t)
inline Matrix evolution_operator(const HermitianOperator& h, double t) {
  const Spectrum s = eig_hermitian(h);
  Vector phases(s.eigenvalues.size());
  for (Eigen::Index i = 0; i < phases.size(); ++i) phases(i) = std::polar(1.0, -s.eigenvalues(i) * t);
  return s.eigenvectors * phases.asDiagonal() * s.eigenvectors.adjoint();
}

inline bool is_unitary(const Matrix& u, double tolerance = tol::unitarity) {
  if (u.rows() != u.cols()) return false;
  return detail::max_abs(u.adjoint() * u - Matrix::Identity(u.rows(), u.cols())) <= tolerance;
}

inline Matrix require_unitary(const Matrix& u, const std::string& what, double tolerance = 1e-9) {
  detail::validated_square(u, what.c_str());
  require(is_unitary(u, tolerance), ErrorKind::invalid_input, what + " is not unitary");
  return u;
}

// A quantum state: Hermitian, positive semidefinite, unit trace.
class DensityMatrix {
 public:
  DensityMatrix() : m_(Matrix::Ones(1, 1)) {}

  explicit DensityMatrix(const Matrix& m) {
    const HermitianOperator h(m);
    const double tr = h.matrix().trace().real();
    require(std::abs(tr - 1.0) <= tol::trace, ErrorKind::invalid_input,
            "density matrix trace is " + std::to_string(tr));
    const double lo = detail::eig(h.matrix()).eigenvalues.minCoeff();
    require(lo >= -tol::psd, ErrorKind::invalid_input,
            "density matrix has negative eigenvalue " + std::to_string(lo));
    m_ = h.matrix();
  }

  static DensityMatrix pure(const Vector& psi) {
    require(psi.size() >= 1 && psi.norm() > 0.0, ErrorKind::invalid_input, "pure state vector is empty or zero");
    const Vector n = psi / psi.norm();
    return DensityMatrix(n * n.adjoint());
  }
  static DensityMatrix basis_state(int dim, int index) {
    require(index >= 0 && index < dim, ErrorKind::invalid_input, "basis index out of range");
    Vector v = Vector::Zero(dim);
    v(index) = 1.0;
    return pure(v);
  }
  static DensityMatrix maximally_mixed(int dim) {
    require(dim >= 1, ErrorKind::invalid_input, "dimension must be positive");
    return DensityMatrix(Matrix::Identity(dim, dim) / static_cast<double>(dim));
  }
  static DensityMatrix diagonal(const RealVector& probabilities) {
    return DensityMatrix(Matrix(probabilities.cast<Complex>().asDiagonal()));
  }

  int dim() const { return static_cast<int>(m_.rows()); }
  const Matrix& matrix() const { return m_; }
  HermitianOperator hermitian() const { return HermitianOperator(m_); }

 private:
  Matrix m_;
};

// Gibbs state exp(-beta H) / Z, computed with a spectral shift.
inline DensityMatrix gibbs_state(const HermitianOperator& h, double beta) {
  const Spectrum s = eig_hermitian(h);
  RealVector w = (-beta * s.eigenvalues).array();
  w = (w.array() - w.maxCoeff()).exp();
  w /= w.sum();
  return DensityMatrix(detail::from_spectrum(s.eigenvectors, w));
}

// Apply a unitary by conjugation.
inline DensityMatrix conjugate(const Matrix& u, const DensityMatrix& rho) {
  require(u.cols() == rho.dim(), ErrorKind::invalid_input, "unitary and state dimensions differ");
  return DensityMatrix(u * rho.matrix() * u.adjoint());
}

// Kronecker product; subsystem ordering A (x) B.
inline Matrix tensor(const Matrix& a, const Matrix& b) {
  const double size = static_cast<double>(a.rows()) * static_cast<double>(b.rows());
  require(size <= 1 << 16, ErrorKind::invalid_input, "tensor product dimension too large");
  return Eigen::kroneckerProduct(a, b).eval();
}
inline HermitianOperator tensor(const HermitianOperator& a, const HermitianOperator& b) {
  return HermitianOperator(tensor(a.matrix(), b.matrix()));
}
inline DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b) {
  return DensityMatrix(tensor(a.matrix(), b.matrix()));
}

enum class Subsystem { system, environment };

struct BipartiteDims {
  int system = 1;
  int environment = 1;
  int total() const { return system * environment; }
};

inline Matrix partial_trace(const Matrix& m, BipartiteDims dims, Subsystem keep) {
  require(dims.system >= 1 && dims.environment >= 1, ErrorKind::invalid_input, "subsystem dims must be positive");
  require(m.rows() == dims.total() && m.cols() == dims.total(), ErrorKind::invalid_input,
          "partial trace: matrix dimension " + std::to_string(m.rows()) + " != " + std::to_string(dims.system) +
              " x " + std::to_string(dims.environment));
  const int ds = dims.system;
  const int de = dims.environment;
  if (keep == Subsystem::system) {
    Matrix out = Matrix::Zero(ds, ds);
    for (int s1 = 0; s1 < ds; ++s1)
      for (int s2 = 0; s2 < ds; ++s2)
        for (int e = 0; e < de; ++e) out(s1, s2) += m(s1 * de + e, s2 * de + e);
    return out;
  }
  Matrix out = Matrix::Zero(de, de);
  for (int e1 = 0; e1 < de; ++e1)
    for (int e2 = 0; e2 < de; ++e2)
      for (int s = 0; s < ds; ++s) out(e1, e2) += m(s * de + e1, s * de + e2);
  return out;
}

inline DensityMatrix partial_trace(const DensityMatrix& rho, BipartiteDims dims, Subsystem keep) {
  return DensityMatrix(partial_trace(rho.matrix(), dims, keep));
}

// Orthonormal basis of C^dim, stored as the columns of a unitary matrix.
class Basis {
 public:
  Basis() : v_(Matrix::Identity(1, 1)) {}

  explicit Basis(const Matrix& vectors) {
    detail::validated_square(vectors, "basis");
    require(is_unitary(vectors, tol::unitarity), ErrorKind::invalid_input, "basis vectors are not orthonormal");
    v_ = vectors;
  }

  static Basis computational(int dim) { return Basis(Matrix::Identity(dim, dim)); }
  static Basis eigenbasis(const HermitianOperator& h) { return Basis(eig_hermitian(h).eigenvectors); }

  int dim() const { return static_cast<int>(v_.rows()); }
  const Matrix& vectors() const { return v_; }
  Vector vector(int a) const { return v_.col(a); }
  Matrix projector(int a) const { return v_.col(a) * v_.col(a).adjoint(); }

  // p_a = <a|rho|a>
  RealVector populations(const Matrix& rho) const {
    require(rho.rows() == v_.rows(), ErrorKind::invalid_input, "basis and state dimensions differ");
    return (v_.adjoint() * rho * v_).diagonal().real();
  }

 private:
  Matrix v_;
};

// Trace distance (1/2)||a - b||_1 of Hermitian matrices.
inline double trace_distance(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::invalid_input, "trace distance: dimension mismatch");
  const Spectrum s = detail::eig(detail::symmetrize(a - b));
  return 0.5 * s.eigenvalues.cwiseAbs().sum();
}
inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  return trace_distance(a.matrix(), b.matrix());
}

// Orthonormal (tr{B_i B_j} = delta_ij) traceless Hermitian basis of dim^2 - 1
// generalized Gell-Mann matrices: symmetric, antisymmetric, then diagonal.
inline std::vector<HermitianOperator> traceless_hermitian_basis(int dim) {
  require(dim >= 1, ErrorKind::invalid_input, "dimension must be positive");
  std::vector<HermitianOperator> out;
  out.reserve(static_cast<std::size_t>(dim) * dim - 1);
  const double r2 = std::sqrt(0.5);
  for (int j = 0; j < dim; ++j) {
    for (int k = j + 1; k < dim; ++k) {
      Matrix m = Matrix::Zero(dim, dim);
      m(j, k) = r2;
      m(k, j) = r2;
      out.emplace_back(m);
    }
  }
  for (int j = 0; j < dim; ++j) {
    for (int k = j + 1; k < dim; ++k) {
      Matrix m = Matrix::Zero(dim, dim);
      m(j, k) = Complex(0.0, -r2);
      m(k, j) = Complex(0.0, r2);
      out.emplace_back(m);
    }
  }
  for (int l = 1; l < dim; ++l) {
    Matrix m = Matrix::Zero(dim, dim);
    const double norm = 1.0 / std::sqrt(static_cast<double>(l) * (l + 1));
    for (int j = 0; j < l; ++j) m(j, j) = norm;
    m(l, l) = -l * norm;
    out.emplace_back(m);
  }
  return out;
}

namespace pauli {
inline HermitianOperator identity() { return HermitianOperator::identity(2); }
inline HermitianOperator x() {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  return HermitianOperator(m);
}
inline HermitianOperator y() {
  Matrix m(2, 2);
  m << 0, Complex(0, -1), Complex(0, 1), 0;
  return HermitianOperator(m);
}
inline HermitianOperator z() {
  Matrix m(2, 2);
  m << 1, 0, 0, -1;
  return HermitianOperator(m);
}
}  // namespace pauli

}  // namespace qmaxent
