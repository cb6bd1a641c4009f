#pragma once

#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "qmaxent/linalg.hpp"

namespace qmaxent {

inline constexpr double infinite_entropy = std::numeric_limits<double>::infinity();

// Complete family of orthogonal projectors {Pi_i} with ranks V_i.
class CoarseGraining {
 public:
  CoarseGraining() = default;

  // Blocks of consecutive basis vectors; block_sizes must sum to the dimension.
  CoarseGraining(const Basis& basis, const std::vector<int>& block_sizes) {
    require(!block_sizes.empty(), ErrorKind::invalid_input, "coarse-graining needs at least one block");
    int offset = 0;
    for (int size : block_sizes) {
      require(size >= 1, ErrorKind::invalid_input, "coarse-graining block sizes must be positive");
      require(offset + size <= basis.dim(), ErrorKind::invalid_input, "coarse-graining blocks exceed the dimension");
      block_vectors_.push_back(basis.vectors().middleCols(offset, size));
      offset += size;
    }
    require(offset == basis.dim(), ErrorKind::invalid_input, "coarse-graining block sizes do not sum to the dimension");
    finish(basis.dim());
  }

  // From explicit projectors; each must be an orthogonal projector and the
  // family must resolve the identity.
  explicit CoarseGraining(const std::vector<Matrix>& projectors) {
    require(!projectors.empty(), ErrorKind::invalid_input, "coarse-graining needs at least one projector");
    const int dim = static_cast<int>(projectors.front().rows());
    Matrix sum = Matrix::Zero(dim, dim);
    for (std::size_t i = 0; i < projectors.size(); ++i) {
      const Matrix& p = projectors[i];
      require(p.rows() == dim && p.cols() == dim, ErrorKind::invalid_input, "projector dimensions differ");
      require(detail::all_finite(p), ErrorKind::invalid_input, "projector has non-finite entries");
      require(detail::hermiticity_defect(p) <= tol::projector, ErrorKind::invalid_input,
              "projector " + std::to_string(i) + " is not Hermitian");
      require(detail::max_abs(p * p - p) <= tol::projector, ErrorKind::invalid_input,
              "operator " + std::to_string(i) + " is not idempotent");
      for (std::size_t j = 0; j < i; ++j) {
        require(detail::max_abs(p * projectors[j]) <= tol::projector, ErrorKind::invalid_input,
                "projectors " + std::to_string(j) + " and " + std::to_string(i) + " are not orthogonal");
      }
      sum += p;
      const Spectrum s = detail::eig(detail::symmetrize(p));
      std::vector<Eigen::Index> cols;
      for (Eigen::Index c = 0; c < s.eigenvalues.size(); ++c)
        if (s.eigenvalues(c) > 0.5) cols.push_back(c);
      require(!cols.empty(), ErrorKind::invalid_input, "projector " + std::to_string(i) + " has rank zero");
      Matrix block(dim, static_cast<Eigen::Index>(cols.size()));
      for (std::size_t c = 0; c < cols.size(); ++c) block.col(static_cast<Eigen::Index>(c)) = s.eigenvectors.col(cols[c]);
      block_vectors_.push_back(block);
    }
    require(detail::max_abs(sum - Matrix::Identity(dim, dim)) <= tol::projector, ErrorKind::invalid_input,
            "projectors do not sum to the identity");
    finish(dim);
  }

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(projectors_.size()); }
  const std::vector<Matrix>& projectors() const { return projectors_; }
  const Matrix& projector(int i) const { return projectors_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& ranks() const { return ranks_; }
  int rank(int i) const { return ranks_[static_cast<std::size_t>(i)]; }
  // Orthonormal columns spanning block i.
  const Matrix& block_vectors(int i) const { return block_vectors_[static_cast<std::size_t>(i)]; }

  // p_i = tr{Pi_i rho}
  RealVector probabilities(const Matrix& rho) const {
    require(rho.rows() == dim_, ErrorKind::invalid_input, "coarse-graining and state dimensions differ");
    RealVector p(size());
    for (int i = 0; i < size(); ++i) p(i) = detail::hs_inner(projectors_[static_cast<std::size_t>(i)], rho);
    return p;
  }

  // sum_i p_i Pi_i / V_i
  Matrix block_uniform(const RealVector& p) const {
    Matrix out = Matrix::Zero(dim_, dim_);
    for (int i = 0; i < size(); ++i) out += (p(i) / rank(i)) * projector(i);
    return out;
  }

 private:
  void finish(int dim) {
    dim_ = dim;
    for (const Matrix& b : block_vectors_) {
      projectors_.push_back(b * b.adjoint());
      ranks_.push_back(static_cast<int>(b.cols()));
    }
  }

  int dim_ = 0;
  std::vector<Matrix> projectors_;
  std::vector<Matrix> block_vectors_;
  std::vector<int> ranks_;
};

// Joint outcome probabilities p_ij with marginals s_i (rows) and p_j (columns).
class JointOutcomeTable {
 public:
  explicit JointOutcomeTable(const RealMatrix& p) : p_(p) {
    require(p.size() > 0, ErrorKind::invalid_input, "outcome table is empty");
    require(p.allFinite() && p.minCoeff() >= -1e-15, ErrorKind::invalid_input, "outcome probabilities must be non-negative");
    require(std::abs(p.sum() - 1.0) <= tol::trace, ErrorKind::invalid_input, "outcome probabilities do not sum to one");
    p_ = p.cwiseMax(0.0);
    rows_ = p_.rowwise().sum();
    cols_ = p_.colwise().sum().transpose();
  }

  const RealMatrix& probabilities() const { return p_; }
  const RealVector& row_marginals() const { return rows_; }
  const RealVector& column_marginals() const { return cols_; }

 private:
  RealMatrix p_;
  RealVector rows_;
  RealVector cols_;
};

namespace detail {

// -sum p ln p over entries above the cutoff.
inline double shannon(const RealVector& p) {
  double s = 0.0;
  const double cutoff = tol::support_cutoff * std::max(p.maxCoeff(), 0.0);
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p(i) > cutoff && p(i) > 0.0) s -= p(i) * std::log(p(i));
  return s;
}

// -tr{rho ln sigma}, or +inf when rho leaks out of sigma's support.
inline double cross_entropy(const Matrix& rho, const Matrix& sigma) {
  require(rho.rows() == sigma.rows() && rho.cols() == sigma.cols(), ErrorKind::invalid_input,
          "relative entropy: dimension mismatch");
  const Spectrum sig = eig(symmetrize(sigma));
  const double cutoff = tol::support_cutoff * std::max(sig.eigenvalues.maxCoeff(), 0.0);
  // diagonal of rho in sigma's eigenbasis
  const RealVector w = (sig.eigenvectors.adjoint() * rho * sig.eigenvectors).diagonal().real();
  double leak = 0.0;
  double cross = 0.0;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    const double q = sig.eigenvalues(j);
    if (q > cutoff && q > 0.0) {
      cross -= w(j) * std::log(q);
    } else {
      leak += w(j);
    }
  }
  if (leak > tol::support_leak) return infinite_entropy;
  return cross;
}

}  // namespace detail

inline double von_neumann_entropy(const Matrix& rho) { return detail::shannon(detail::eig(detail::symmetrize(rho)).eigenvalues); }
inline double von_neumann_entropy(const DensityMatrix& rho) { return von_neumann_entropy(rho.matrix()); }

// S(rho || sigma) = tr{rho (ln rho - ln sigma)}; +inf when supp(rho) is not inside supp(sigma).
inline double relative_entropy(const Matrix& rho, const Matrix& sigma) {
  const double cross = detail::cross_entropy(rho, sigma);
  if (std::isinf(cross)) return infinite_entropy;
  return cross - von_neumann_entropy(rho);
}
inline double relative_entropy(const DensityMatrix& rho, const DensityMatrix& sigma) {
  require(rho.dim() == sigma.dim(), ErrorKind::invalid_input, "relative entropy: dimension mismatch");
  return relative_entropy(rho.matrix(), sigma.matrix());
}

inline double cross_entropy(const DensityMatrix& rho, const DensityMatrix& sigma) {
  return detail::cross_entropy(rho.matrix(), sigma.matrix());
}

// Shannon entropy of the populations <a|rho|a>.
inline double diagonal_entropy(const DensityMatrix& rho, const Basis& basis) {
  require(basis.dim() == rho.dim(), ErrorKind::invalid_input, "basis and state dimensions differ");
  return detail::shannon(basis.populations(rho.matrix()));
}

// -sum_i p_i ln(p_i / V_i)
inline double observational_entropy(const DensityMatrix& rho, const CoarseGraining& cg) {
  require(cg.dim() == rho.dim(), ErrorKind::invalid_input, "coarse-graining and state dimensions differ");
  const RealVector p = cg.probabilities(rho.matrix());
  const double cutoff = tol::support_cutoff * std::max(p.maxCoeff(), 0.0);
  double s = 0.0;
  for (int i = 0; i < cg.size(); ++i)
    if (p(i) > cutoff && p(i) > 0.0) s -= p(i) * std::log(p(i) / cg.rank(i));
  return s;
}

// S(rho_S) + S(rho_E) - S(rho_SE)
inline double mutual_information(const DensityMatrix& rho_se, BipartiteDims dims) {
  const Matrix rs = partial_trace(rho_se.matrix(), dims, Subsystem::system);
  const Matrix re = partial_trace(rho_se.matrix(), dims, Subsystem::environment);
  return von_neumann_entropy(rs) + von_neumann_entropy(re) - von_neumann_entropy(rho_se);
}

inline double classical_mutual_information(const JointOutcomeTable& table) {
  const RealMatrix& p = table.probabilities();
  const RealVector& s = table.row_marginals();
  const RealVector& q = table.column_marginals();
  double info = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.cols(); ++j)
      if (p(i, j) > 0.0) info += p(i, j) * std::log(p(i, j) / (s(i) * q(j)));
  return info;
}

}  // namespace qmaxent
