#pragma once

// Independent reference computations for the test suites. These deliberately avoid
// the library's spectral helpers: matrix functions go through Eigen's
// MatrixFunctions module, entropies through plain eigenvalue sums.

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

namespace oracle {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline double xlogx_sum(const RealVector& p) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p(i) > 1e-300) s -= p(i) * std::log(p(i));
  return s;
}

inline RealVector eigenvalues(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es((m + m.adjoint()) / 2.0, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline double entropy(const Matrix& rho) {
  RealVector w = eigenvalues(rho);
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = std::max(w(i), 0.0);
  return xlogx_sum(w);
}

// Full-rank states only: tr{rho (log rho - log sigma)} via the matrix logarithm.
inline double relative_entropy_full_rank(const Matrix& rho, const Matrix& sigma) {
  const Matrix lr = rho.log();
  const Matrix ls = sigma.log();
  return (rho * (lr - ls)).trace().real();
}

inline Matrix expm(const Matrix& m) { return m.exp(); }

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Explicit index loops, index s*dE + e.
inline Matrix trace_env(const Matrix& m, int ds, int de) {
  Matrix out = Matrix::Zero(ds, ds);
  for (int s = 0; s < ds; ++s)
    for (int t = 0; t < ds; ++t)
      for (int e = 0; e < de; ++e) out(s, t) += m(s * de + e, t * de + e);
  return out;
}

inline Matrix trace_sys(const Matrix& m, int ds, int de) {
  Matrix out = Matrix::Zero(de, de);
  for (int e = 0; e < de; ++e)
    for (int f = 0; f < de; ++f)
      for (int s = 0; s < ds; ++s) out(e, f) += m(s * de + e, s * de + f);
  return out;
}

inline double trace_norm_distance(const Matrix& a, const Matrix& b) {
  const RealVector w = eigenvalues(a - b);
  return 0.5 * w.cwiseAbs().sum();
}

inline double shannon(const RealVector& p) { return xlogx_sum(p); }

// Populations <a|rho|a> for the columns of v.
inline RealVector populations(const Matrix& v, const Matrix& rho) {
  RealVector p(v.cols());
  for (Eigen::Index a = 0; a < v.cols(); ++a) p(a) = (v.col(a).adjoint() * rho * v.col(a))(0, 0).real();
  return p;
}

// Seeded generators independent of the library's.
struct Gen {
  explicit Gen(std::uint64_t seed) : rng(seed) {}
  std::mt19937_64 rng;

  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

  Matrix gaussian(int r, int c) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix g(r, c);
    for (int j = 0; j < c; ++j)
      for (int i = 0; i < r; ++i) {
        const double re = n(rng);
        const double im = n(rng);
        g(i, j) = Complex(re, im);
      }
    return g;
  }
  Matrix state(int d, int rank = 0) {
    const Matrix g = gaussian(d, rank > 0 ? rank : d);
    Matrix rho = g * g.adjoint();
    rho /= rho.trace().real();
    return (rho + rho.adjoint()) / 2.0;
  }
  Matrix hermitian(int d) {
    const Matrix g = gaussian(d, d);
    return (g + g.adjoint()) / 2.0;
  }
  Matrix unitary(int d) {
    const Matrix h = hermitian(d);
    return (Complex(0.0, 1.0) * h).exp();
  }
};

}  // namespace oracle
