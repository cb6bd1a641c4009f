#pragma once

// Seeded random instances. Reproducible for a fixed seed within one build.

#include <cstdint>
#include <random>
#include <vector>

#include "qmaxent/entropy.hpp"
#include "qmaxent/linalg.hpp"

namespace qmaxent {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Child seed for stream `index` of a parent seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline Matrix ginibre(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) {
      const double re = normal(rng);
      const double im = normal(rng);
      g(i, j) = Complex(re, im);
    }
  return g;
}

// Haar-random unitary via QR of a Ginibre matrix with the R-diagonal phases removed.
inline Matrix random_unitary(int dim, Rng& rng) {
  const Matrix g = ginibre(dim, dim, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < dim; ++j) {
    const double mag = std::abs(r(j, j));
    if (mag > 0.0) q.col(j) *= r(j, j) / mag;
  }
  return q;
}

// Hilbert-Schmidt random state G G^dagger / tr{G G^dagger}; rank defaults to full.
inline DensityMatrix random_density_matrix(int dim, Rng& rng, int rank = 0) {
  const Matrix g = ginibre(dim, rank > 0 ? rank : dim, rng);
  Matrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix(detail::symmetrize(rho));
}

inline DensityMatrix random_pure_state(int dim, Rng& rng) {
  const Matrix g = ginibre(dim, 1, rng);
  return DensityMatrix::pure(g.col(0));
}

// GUE-distributed Hermitian operator scaled to unit-order spectrum.
inline HermitianOperator random_hermitian(int dim, Rng& rng) {
  const Matrix g = ginibre(dim, dim, rng);
  return HermitianOperator((g + g.adjoint()) / (2.0 * std::sqrt(static_cast<double>(dim))));
}

inline Basis random_basis(int dim, Rng& rng) { return Basis(random_unitary(dim, rng)); }

// Uniform point on the probability simplex.
inline RealVector random_probabilities(int size, Rng& rng) {
  std::exponential_distribution<double> expo(1.0);
  RealVector p(size);
  for (int i = 0; i < size; ++i) p(i) = expo(rng);
  return p / p.sum();
}

// Random composition of dim into at least min_blocks positive parts.
inline std::vector<int> random_block_sizes(int dim, Rng& rng, int min_blocks = 1) {
  std::vector<int> sizes;
  std::uniform_int_distribution<int> coin(0, 1);
  int current = 1;
  for (int i = 1; i < dim; ++i) {
    if (coin(rng) == 1) {
      sizes.push_back(current);
      current = 1;
    } else {
      ++current;
    }
  }
  sizes.push_back(current);
  // split the largest block until enough blocks exist
  while (static_cast<int>(sizes.size()) < std::min(min_blocks, dim)) {
    auto it = std::max_element(sizes.begin(), sizes.end());
    const int half = *it / 2;
    *it -= half;
    sizes.insert(it + 1, half);
  }
  return sizes;
}

inline CoarseGraining random_coarse_graining(int dim, Rng& rng, int min_blocks = 2) {
  return CoarseGraining(random_basis(dim, rng), random_block_sizes(dim, rng, min_blocks));
}

}  // namespace qmaxent
