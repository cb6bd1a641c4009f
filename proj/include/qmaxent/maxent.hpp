#pragma once

// Maximum-entropy state assignment under linear expectation constraints,
// some measured directly on the input and some measured on a channel output
// and pulled back through the adjoint channel.
//
// The state has the exponential-family form
//   rho(mu) = exp(-sum_k mu_k G_k) / Z(mu)
// and the multipliers minimize the convex dual ln Z(mu) + sum_k mu_k t_k.

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "qmaxent/channels.hpp"
#include "qmaxent/entropy.hpp"
#include "qmaxent/linalg.hpp"

namespace qmaxent {

struct LinearConstraint {
  HermitianOperator op;
  double target = 0.0;
  std::string label;
};

struct RoutedConstraint {
  HermitianOperator op;  // acts on the channel output
  std::shared_ptr<const KrausChannel> channel;
  double target = 0.0;
  std::string label;
};

struct ConstraintSet {
  int input_dim = 1;
  std::vector<LinearConstraint> direct;
  std::vector<RoutedConstraint> routed;

  std::size_t size() const { return direct.size() + routed.size(); }
};

struct SolverOptions {
  double constraint_tol = 1e-9;
  double multiplier_cap = 1e6;
  int max_iterations = 500;
  double gram_threshold = 1e-10;  // relative residual below which an operator is dependent
  double boundary_tol = 1e-12;    // relative distance of a target to a spectral edge
};

struct MaxEntSolution {
  DensityMatrix state;
  RealVector multipliers;  // one per pulled-back constraint: direct first, then routed
  double log_partition = 0.0;
  RealVector residuals;  // tr{G_k state} - t_k
  int iterations = 0;
  bool converged = false;
  std::vector<LinearConstraint> constraints;  // pulled-back list the state was solved under
  Matrix support;  // isometry onto the subspace the state lives in (identity unless a boundary was hit)
  double constraint_tol = 1e-9;

  double max_residual() const { return residuals.size() == 0 ? 0.0 : residuals.cwiseAbs().maxCoeff(); }
};

// -- constraint builders ----------------------------------------------------

inline double measure(const HermitianOperator& op, const DensityMatrix& rho) {
  require(op.dim() == rho.dim(), ErrorKind::invalid_input, "observable and state dimensions differ");
  return op.expectation(rho.matrix());
}

// {<a|rho|a> = p_a} for every basis vector.
inline std::vector<LinearConstraint> population_constraints(const Basis& basis, const DensityMatrix& rho,
                                                            const std::string& prefix = "population") {
  const RealVector p = basis.populations(rho.matrix());
  std::vector<LinearConstraint> out;
  for (int a = 0; a < basis.dim(); ++a)
    out.push_back({HermitianOperator(basis.projector(a)), p(a), prefix + "[" + std::to_string(a) + "]"});
  return out;
}

// {tr{Pi_i rho} = p_i} for every block.
inline std::vector<LinearConstraint> coarse_population_constraints(const CoarseGraining& cg, const DensityMatrix& rho,
                                                                   const std::string& prefix = "coarse_population") {
  const RealVector p = cg.probabilities(rho.matrix());
  std::vector<LinearConstraint> out;
  for (int i = 0; i < cg.size(); ++i)
    out.push_back({HermitianOperator(cg.projector(i)), p(i), prefix + "[" + std::to_string(i) + "]"});
  return out;
}

// Tomographically complete set: the traceless orthonormal Hermitian basis.
inline std::vector<LinearConstraint> tomography_constraints(const DensityMatrix& rho,
                                                            const std::string& prefix = "tomography") {
  std::vector<LinearConstraint> out;
  int idx = 0;
  for (HermitianOperator& b : traceless_hermitian_basis(rho.dim())) {
    const double t = measure(b, rho);
    out.push_back({std::move(b), t, prefix + "[" + std::to_string(idx++) + "]"});
  }
  return out;
}

// Complete tomography of the channel output, targets measured on the given output state.
inline std::vector<RoutedConstraint> routed_tomography(std::shared_ptr<const KrausChannel> channel,
                                                       const DensityMatrix& output_state,
                                                       const std::string& prefix = "output_tomography") {
  require(channel != nullptr, ErrorKind::invalid_input, "routed tomography needs a channel");
  require(output_state.dim() == channel->out_dim(), ErrorKind::invalid_input,
          "output state dimension differs from channel output dimension");
  std::vector<RoutedConstraint> out;
  int idx = 0;
  for (HermitianOperator& b : traceless_hermitian_basis(channel->out_dim())) {
    const double t = measure(b, output_state);
    out.push_back({std::move(b), channel, t, prefix + "[" + std::to_string(idx++) + "]"});
  }
  return out;
}

// -- pull back ----------------------------------------------------------------

// Routed constraints become (adjoint(O_i), o_i); direct constraints pass through first.
inline std::vector<LinearConstraint> pull_back(const ConstraintSet& cs) {
  require(cs.input_dim >= 1, ErrorKind::invalid_input, "constraint set input dimension must be positive");
  std::vector<LinearConstraint> out;
  out.reserve(cs.size());
  for (const LinearConstraint& c : cs.direct) {
    require(c.op.dim() == cs.input_dim, ErrorKind::invalid_input,
            "constraint '" + c.label + "' has dimension " + std::to_string(c.op.dim()) + ", expected " +
                std::to_string(cs.input_dim));
    require(std::isfinite(c.target), ErrorKind::invalid_input, "constraint '" + c.label + "' has a non-finite target");
    out.push_back(c);
  }
  for (const RoutedConstraint& c : cs.routed) {
    require(c.channel != nullptr, ErrorKind::invalid_input, "routed constraint '" + c.label + "' has no channel");
    require(c.channel->in_dim() == cs.input_dim, ErrorKind::invalid_input,
            "routed constraint '" + c.label + "' channel input dimension differs from the constraint set");
    require(c.op.dim() == c.channel->out_dim(), ErrorKind::invalid_input,
            "routed constraint '" + c.label + "' observable dimension differs from the channel output");
    require(std::isfinite(c.target), ErrorKind::invalid_input, "constraint '" + c.label + "' has a non-finite target");
    out.push_back({adjoint_apply(*c.channel, c.op), c.target, c.label});
  }
  return out;
}

// -- dual ---------------------------------------------------------------------

struct DualValue {
  double value = 0.0;  // ln Z(mu) + sum_k mu_k t_k
  RealVector gradient;  // t_k - tr{G_k rho(mu)}
  double log_partition = 0.0;
  Matrix state;  // rho(mu)
};

namespace detail {

inline DualValue dual_eval(const RealVector& mu, const std::vector<Matrix>& ops, const RealVector& targets, int dim) {
  Matrix exponent = Matrix::Zero(dim, dim);
  for (std::size_t k = 0; k < ops.size(); ++k) exponent -= mu(static_cast<Eigen::Index>(k)) * ops[k];
  const Spectrum s = eig(symmetrize(exponent));
  const double shift = s.eigenvalues.maxCoeff();
  const RealVector w = (s.eigenvalues.array() - shift).exp();
  const double z_shifted = w.sum();
  DualValue out;
  out.log_partition = shift + std::log(z_shifted);
  out.state = from_spectrum(s.eigenvectors, w / z_shifted);
  out.gradient.resize(static_cast<Eigen::Index>(ops.size()));
  for (std::size_t k = 0; k < ops.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    out.gradient(kk) = targets(kk) - hs_inner(ops[k], out.state);
  }
  out.value = out.log_partition + mu.dot(targets);
  return out;
}

// Hessian of ln Z(mu): the Kubo-Mori covariance of the operators at rho(mu).
inline RealMatrix dual_hessian(const RealVector& mu, const std::vector<Matrix>& ops, int dim) {
  Matrix exponent = Matrix::Zero(dim, dim);
  for (std::size_t k = 0; k < ops.size(); ++k) exponent -= mu(static_cast<Eigen::Index>(k)) * ops[k];
  const Spectrum s = eig(symmetrize(exponent));
  const RealVector& a = s.eigenvalues;
  const double shift = a.maxCoeff();
  const RealVector p = (a.array() - shift).exp() / (a.array() - shift).exp().sum();
  // divided differences of p over the exponent spectrum
  RealMatrix f(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      const double gap = a(i) - a(j);
      f(i, j) = std::abs(gap) < 1e-10 ? 0.5 * (p(i) + p(j)) : (p(i) - p(j)) / gap;
    }
  std::vector<Matrix> rotated;
  RealVector means(static_cast<Eigen::Index>(ops.size()));
  for (std::size_t k = 0; k < ops.size(); ++k) {
    rotated.push_back(s.eigenvectors.adjoint() * ops[k] * s.eigenvectors);
    means(static_cast<Eigen::Index>(k)) = rotated.back().diagonal().real().dot(p);
  }
  const auto m = static_cast<Eigen::Index>(ops.size());
  RealMatrix h(m, m);
  for (Eigen::Index k = 0; k < m; ++k)
    for (Eigen::Index l = k; l < m; ++l) {
      const Matrix& gk = rotated[static_cast<std::size_t>(k)];
      const Matrix& gl = rotated[static_cast<std::size_t>(l)];
      double acc = 0.0;
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) acc += f(i, j) * (gk(i, j) * gl(j, i)).real();
      h(k, l) = h(l, k) = acc - means(k) * means(l);
    }
  return h;
}

// Real coordinates of a Hermitian matrix in which the dot product is tr{A B}.
inline RealVector hs_vectorize(const Matrix& m) {
  const Eigen::Index n = m.rows();
  RealVector v(n * n);
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < n; ++i) v(idx++) = m(i, i).real();
  const double r2 = std::sqrt(2.0);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      v(idx++) = r2 * m(i, j).real();
      v(idx++) = r2 * m(i, j).imag();
    }
  return v;
}

inline Matrix hs_unvectorize(const RealVector& v, Eigen::Index n) {
  Matrix m = Matrix::Zero(n, n);
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < n; ++i) m(i, i) = v(idx++);
  const double r2 = std::sqrt(0.5);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Complex z(r2 * v(idx), r2 * v(idx + 1));
      idx += 2;
      m(i, j) = z;
      m(j, i) = std::conj(z);
    }
  return m;
}

}  // namespace detail

inline DualValue dual_objective(const RealVector& multipliers, const std::vector<LinearConstraint>& ops) {
  require(!ops.empty() || multipliers.size() == 0, ErrorKind::invalid_input, "dual objective needs constraints");
  require(multipliers.size() == static_cast<Eigen::Index>(ops.size()), ErrorKind::invalid_input,
          "multiplier count differs from constraint count");
  require(multipliers.allFinite(), ErrorKind::invalid_input, "multipliers must be finite");
  const int dim = ops.empty() ? 1 : ops.front().op.dim();
  std::vector<Matrix> mats;
  RealVector targets(static_cast<Eigen::Index>(ops.size()));
  for (std::size_t k = 0; k < ops.size(); ++k) {
    require(ops[k].op.dim() == dim, ErrorKind::invalid_input, "constraint operator dimensions differ");
    mats.push_back(ops[k].op.matrix());
    targets(static_cast<Eigen::Index>(k)) = ops[k].target;
  }
  return detail::dual_eval(multipliers, mats, targets, dim);
}

// -- solver -------------------------------------------------------------------

namespace detail {

struct ReducedProblem {
  Matrix support;                 // n x r isometry
  std::vector<Matrix> restricted;  // W^dagger G_k W
  std::vector<Matrix> basis;       // orthonormal traceless combinations B_m
  RealVector basis_targets;        // tau_m
  RealMatrix to_original;          // mu = to_original^T nu, shape m x K
};

inline std::string worst_label(const std::vector<LinearConstraint>& ops, const RealVector& residuals) {
  if (residuals.size() == 0) return "<none>";
  Eigen::Index worst = 0;
  residuals.cwiseAbs().maxCoeff(&worst);
  return ops[static_cast<std::size_t>(worst)].label;
}

// Least-squares state reconstruction from a tomographically complete family on
// one space. Returns false when the family is not complete.
inline bool reconstruct_if_complete(const std::vector<Matrix>& ops, const std::vector<double>& targets, int dim,
                                    Matrix& state) {
  const std::vector<HermitianOperator> basis = traceless_hermitian_basis(dim);
  const Eigen::Index m = static_cast<Eigen::Index>(basis.size());
  if (m == 0 || static_cast<Eigen::Index>(ops.size()) < m) return false;
  RealMatrix a(static_cast<Eigen::Index>(ops.size()), m);
  RealVector b(static_cast<Eigen::Index>(ops.size()));
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < m; ++j) a(ii, j) = hs_inner(ops[i], basis[static_cast<std::size_t>(j)].matrix());
    b(ii) = targets[i] - ops[i].trace().real() / dim;
  }
  Eigen::ColPivHouseholderQR<RealMatrix> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < m) return false;
  const RealVector x = qr.solve(b);
  state = Matrix::Identity(dim, dim) / static_cast<double>(dim);
  for (Eigen::Index j = 0; j < m; ++j) state += x(j) * basis[static_cast<std::size_t>(j)].matrix();
  state = symmetrize(state);
  return true;
}

// Operators whose expectation must vanish on every feasible state, derived from
// groups of constraints that fully determine a (possibly rank-deficient) output state.
inline std::vector<Matrix> kernel_constraints(const ConstraintSet& cs, const SolverOptions& opts) {
  std::vector<Matrix> out;
  auto handle_group = [&](const std::vector<Matrix>& ops, const std::vector<double>& targets, int dim,
                          const KrausChannel* channel, const std::string& what) {
    Matrix state;
    if (!reconstruct_if_complete(ops, targets, dim, state)) return;
    const Spectrum s = eig(state);
    const double top = std::max(s.eigenvalues.maxCoeff(), 0.0);
    require(s.eigenvalues.minCoeff() >= -1e-8 * std::max(top, 1.0), ErrorKind::infeasible,
            what + ": targets are not consistent with any density matrix (eigenvalue " +
                std::to_string(s.eigenvalues.minCoeff()) + ")");
    Matrix kernel = Matrix::Zero(dim, dim);
    bool any = false;
    for (Eigen::Index c = 0; c < s.eigenvalues.size(); ++c) {
      if (s.eigenvalues(c) <= opts.boundary_tol * std::max(top, 1.0)) {
        kernel += s.eigenvectors.col(c) * s.eigenvectors.col(c).adjoint();
        any = true;
      }
    }
    if (!any) return;
    out.push_back(channel == nullptr ? kernel : channel->adjoint_apply(kernel));
  };

  {
    std::vector<Matrix> ops;
    std::vector<double> targets;
    for (const LinearConstraint& c : cs.direct) {
      ops.push_back(c.op.matrix());
      targets.push_back(c.target);
    }
    handle_group(ops, targets, cs.input_dim, nullptr, "direct constraints");
  }
  std::vector<const KrausChannel*> seen;
  for (const RoutedConstraint& c : cs.routed) {
    const KrausChannel* ch = c.channel.get();
    if (std::find(seen.begin(), seen.end(), ch) != seen.end()) continue;
    seen.push_back(ch);
    std::vector<Matrix> ops;
    std::vector<double> targets;
    for (const RoutedConstraint& d : cs.routed) {
      if (d.channel.get() != ch) continue;
      ops.push_back(d.op.matrix());
      targets.push_back(d.target);
    }
    handle_group(ops, targets, ch->out_dim(), ch, "constraints routed through '" + c.label + "' channel");
  }
  return out;
}

// Eigenvectors (columns) of a Hermitian matrix with eigenvalue within `window` of `edge`.
inline Matrix eigenspace_near(const Spectrum& s, double edge, double window) {
  std::vector<Eigen::Index> cols;
  for (Eigen::Index c = 0; c < s.eigenvalues.size(); ++c)
    if (std::abs(s.eigenvalues(c) - edge) <= window) cols.push_back(c);
  Matrix out(s.eigenvectors.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = s.eigenvectors.col(cols[i]);
  return out;
}

// Shrink the support while some target sits on a spectral edge of its operator:
// tr{G rho} = lambda_min(G) forces rho onto the lambda_min eigenspace.
inline Matrix restrict_support(const std::vector<LinearConstraint>& ops, const std::vector<Matrix>& kernels, int n,
                               const SolverOptions& opts) {
  Matrix w = Matrix::Identity(n, n);
  bool changed = true;
  while (changed && w.cols() > 1) {
    changed = false;
    for (const Matrix& k : kernels) {
      const Spectrum s = eig(symmetrize(w.adjoint() * k * w));
      const double scale = std::max(1.0, s.eigenvalues.cwiseAbs().maxCoeff());
      const Matrix sub = eigenspace_near(s, 0.0, 1e-10 * scale);
      require(sub.cols() > 0, ErrorKind::infeasible, "constraints leave no feasible state");
      if (sub.cols() < w.cols()) {
        w = w * sub;
        changed = true;
        break;
      }
    }
    if (changed) continue;
    for (const LinearConstraint& c : ops) {
      const Spectrum s = eig(symmetrize(w.adjoint() * c.op.matrix() * w));
      const double lo = s.eigenvalues.minCoeff();
      const double hi = s.eigenvalues.maxCoeff();
      const double scale = std::max({1.0, std::abs(lo), std::abs(hi)});
      require(c.target >= lo - 1e-9 * scale && c.target <= hi + 1e-9 * scale, ErrorKind::infeasible,
              "constraint '" + c.label + "' target " + std::to_string(c.target) + " lies outside the attainable range [" +
                  std::to_string(lo) + ", " + std::to_string(hi) + "]");
      if (hi - lo <= opts.boundary_tol * scale) continue;
      Matrix sub;
      if (c.target <= lo + opts.boundary_tol * scale) {
        sub = eigenspace_near(s, lo, 1e-10 * scale);
      } else if (c.target >= hi - opts.boundary_tol * scale) {
        sub = eigenspace_near(s, hi, 1e-10 * scale);
      } else {
        continue;
      }
      w = w * sub;
      changed = true;
      break;
    }
  }
  return w;
}

inline ReducedProblem reduce(const std::vector<LinearConstraint>& ops, const Matrix& w, const SolverOptions& opts) {
  ReducedProblem rp;
  rp.support = w;
  const Eigen::Index r = w.cols();
  const Eigen::Index k_count = static_cast<Eigen::Index>(ops.size());
  std::vector<RealVector> q;     // orthonormal vectors
  std::vector<RealVector> coef;  // q_m = sum_k coef_m(k) v_k
  std::vector<double> tau;
  for (Eigen::Index k = 0; k < k_count; ++k) {
    const LinearConstraint& c = ops[static_cast<std::size_t>(k)];
    const Matrix restricted = symmetrize(w.adjoint() * c.op.matrix() * w);
    rp.restricted.push_back(restricted);
    const double shift = restricted.trace().real() / static_cast<double>(r);
    const Matrix traceless = restricted - shift * Matrix::Identity(r, r);
    const double t = c.target - shift;
    const RealVector v = hs_vectorize(traceless);
    const double vnorm = v.norm();
    RealVector residual = v;
    RealVector rc = RealVector::Zero(k_count);
    rc(k) = 1.0;
    double predicted = 0.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t m = 0; m < q.size(); ++m) {
        const double proj = q[m].dot(residual);
        residual -= proj * q[m];
        rc -= proj * coef[m];
        predicted += proj * tau[m];
      }
    }
    const double rnorm = residual.norm();
    if (vnorm <= 1e-14 || rnorm <= opts.gram_threshold * vnorm) {
      const double tolerance = opts.constraint_tol * std::max(1.0, vnorm);
      require(std::abs(t - predicted) <= tolerance, ErrorKind::infeasible,
              "constraint '" + c.label + "' is linearly dependent on earlier constraints with a contradictory target (mismatch " +
                  std::to_string(t - predicted) + ")");
      continue;
    }
    q.push_back(residual / rnorm);
    coef.push_back(rc / rnorm);
    tau.push_back((t - predicted) / rnorm);
  }
  const Eigen::Index m_count = static_cast<Eigen::Index>(q.size());
  rp.basis_targets.resize(m_count);
  rp.to_original.resize(m_count, k_count);
  for (Eigen::Index m = 0; m < m_count; ++m) {
    rp.basis.push_back(hs_unvectorize(q[static_cast<std::size_t>(m)], r));
    rp.basis_targets(m) = tau[static_cast<std::size_t>(m)];
    rp.to_original.row(m) = coef[static_cast<std::size_t>(m)].transpose();
  }
  return rp;
}

inline RealVector residuals_of(const ReducedProblem& rp, const std::vector<LinearConstraint>& ops, const Matrix& state_r) {
  RealVector res(static_cast<Eigen::Index>(ops.size()));
  for (std::size_t k = 0; k < ops.size(); ++k)
    res(static_cast<Eigen::Index>(k)) = hs_inner(rp.restricted[k], state_r) - ops[k].target;
  return res;
}

}  // namespace detail

// Maximum-entropy state for the constraint set. Throws infeasible / boundary
// errors; returns converged = false when the iteration budget runs out.
inline MaxEntSolution solve_mes(const ConstraintSet& cs, const SolverOptions& opts = {}) {
  const std::vector<LinearConstraint> ops = pull_back(cs);
  const int n = cs.input_dim;
  const std::vector<Matrix> kernels = detail::kernel_constraints(cs, opts);
  const Matrix w = detail::restrict_support(ops, kernels, n, opts);
  const detail::ReducedProblem rp = detail::reduce(ops, w, opts);
  const int r = static_cast<int>(w.cols());
  const Eigen::Index m = static_cast<Eigen::Index>(rp.basis.size());

  MaxEntSolution sol;
  sol.constraints = ops;
  sol.support = w;
  sol.constraint_tol = opts.constraint_tol;

  RealVector nu = RealVector::Zero(m);
  DualValue cur = detail::dual_eval(nu, rp.basis, rp.basis_targets, r);
  RealVector res = detail::residuals_of(rp, ops, cur.state);
  RealMatrix hinv = static_cast<double>(r) * RealMatrix::Identity(m, m);
  int it = 0;
  bool converged = res.size() == 0 || res.cwiseAbs().maxCoeff() <= opts.constraint_tol;
  while (!converged && it < opts.max_iterations) {
    ++it;
    RealVector dir = -hinv * cur.gradient;
    double slope = cur.gradient.dot(dir);
    if (!(slope < 0.0)) {
      hinv = static_cast<double>(r) * RealMatrix::Identity(m, m);
      dir = -hinv * cur.gradient;
      slope = cur.gradient.dot(dir);
    }
    double step = 1.0;
    DualValue next;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      next = detail::dual_eval(nu + step * dir, rp.basis, rp.basis_targets, r);
      const double slack = 1e-13 * (1.0 + std::abs(cur.value));
      if (std::isfinite(next.value) && next.value <= cur.value + 1e-4 * step * slope + slack) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if ((hinv - static_cast<double>(r) * RealMatrix::Identity(m, m)).cwiseAbs().maxCoeff() > 0.0) {
        hinv = static_cast<double>(r) * RealMatrix::Identity(m, m);
        continue;
      }
      break;  // stalled even along the steepest-descent direction
    }
    const RealVector s = step * dir;
    const RealVector y = next.gradient - cur.gradient;
    nu += s;
    cur = std::move(next);
    res = detail::residuals_of(rp, ops, cur.state);
    const double sy = s.dot(y);
    if (sy > 1e-14 * s.norm() * y.norm() && sy > 0.0) {
      const double rho_k = 1.0 / sy;
      const RealVector hy = hinv * y;
      hinv += (rho_k * rho_k * y.dot(hy) + rho_k) * (s * s.transpose()) - rho_k * (hy * s.transpose() + s * hy.transpose());
    } else {
      hinv = static_cast<double>(r) * RealMatrix::Identity(m, m);
    }
    const RealVector mu = rp.to_original.transpose() * nu;
    if (mu.size() > 0 && mu.cwiseAbs().maxCoeff() > opts.multiplier_cap) {
      fail(ErrorKind::boundary, "multipliers diverge (|mu| > " + std::to_string(opts.multiplier_cap) +
                                    "); worst-violated constraint '" + detail::worst_label(ops, res) + "'");
    }
    converged = res.cwiseAbs().maxCoeff() <= opts.constraint_tol;
  }

  // Newton polish past the requested tolerance so derived entropies carry less
  // error than the residual amplified by an ill-conditioned covariance
  if (converged && m > 0) {
    for (int polish = 0; polish < 20; ++polish) {
      const double before = res.cwiseAbs().maxCoeff();
      if (before <= 1e-15) break;
      const RealMatrix h = detail::dual_hessian(nu, rp.basis, r);
      const RealVector dir = h.ldlt().solve(-cur.gradient);
      if (!dir.allFinite()) break;
      const DualValue next = detail::dual_eval(nu + dir, rp.basis, rp.basis_targets, r);
      const RealVector next_res = detail::residuals_of(rp, ops, next.state);
      if (!std::isfinite(next.value) || !(next_res.cwiseAbs().maxCoeff() < before)) break;
      nu += dir;
      cur = next;
      res = next_res;
    }
  }

  sol.multipliers = m > 0 ? RealVector(rp.to_original.transpose() * nu) : RealVector::Zero(static_cast<Eigen::Index>(ops.size()));
  sol.residuals = res;
  sol.iterations = it;
  sol.converged = converged;
  sol.state = DensityMatrix(detail::symmetrize(w * cur.state * w.adjoint()));
  // ln Z for the original operators restricted to the support
  Matrix exponent = Matrix::Zero(r, r);
  for (std::size_t k = 0; k < ops.size(); ++k) exponent -= sol.multipliers(static_cast<Eigen::Index>(k)) * rp.restricted[k];
  const Spectrum es = detail::eig(detail::symmetrize(exponent));
  const double shift = es.eigenvalues.maxCoeff();
  sol.log_partition = shift + std::log((es.eigenvalues.array() - shift).exp().sum());
  if (r == 1 && sol.max_residual() > opts.constraint_tol) {
    fail(ErrorKind::infeasible, "constraints force a pure state that violates '" + detail::worst_label(ops, res) + "'");
  }
  return sol;
}

// Rebuild W exp(-sum_k mu_k W^dagger G_k W) W^dagger / Z from the stored multipliers.
inline Matrix reconstruct_state(const MaxEntSolution& sol) {
  const Matrix& w = sol.support;
  const Eigen::Index r = w.cols();
  Matrix exponent = Matrix::Zero(r, r);
  for (std::size_t k = 0; k < sol.constraints.size(); ++k)
    exponent -= sol.multipliers(static_cast<Eigen::Index>(k)) * (w.adjoint() * sol.constraints[k].op.matrix() * w);
  return w * exp_hermitian(HermitianOperator(detail::symmetrize(exponent))).matrix() * w.adjoint() /
         std::exp(sol.log_partition);
}

// Inverse temperature beta with tr{H e^{-beta H}} / tr{e^{-beta H}} = target.
inline double solve_beta(const HermitianOperator& h, double target_energy) {
  require(std::isfinite(target_energy), ErrorKind::invalid_input, "target energy must be finite");
  const RealVector e = eig_hermitian(h).eigenvalues;
  const double lo = e.minCoeff();
  const double hi = e.maxCoeff();
  const double scale = std::max({1.0, std::abs(lo), std::abs(hi)});
  const double mean = e.mean();
  if (std::abs(target_energy - mean) <= 1e-15 * scale) return 0.0;
  require(target_energy > lo + 1e-12 * scale && target_energy < hi - 1e-12 * scale, ErrorKind::infeasible,
          "target energy " + std::to_string(target_energy) + " outside the open spectral range (" + std::to_string(lo) +
              ", " + std::to_string(hi) + ")");

  // mean energy and variance at beta, shifted for stability
  auto moments = [&](double beta, double& energy, double& variance) {
    RealVector x = -beta * e;
    const RealVector w = (x.array() - x.maxCoeff()).exp();
    const double z = w.sum();
    energy = w.dot(e) / z;
    variance = w.dot((e.array() - energy).square().matrix()) / z;
  };
  // energy(beta) decreases monotonically; bracket the root
  double b_lo = -1.0;
  double b_hi = 1.0;
  double energy = 0.0;
  double variance = 0.0;
  for (moments(b_lo, energy, variance); energy < target_energy; moments(b_lo, energy, variance)) b_lo *= 2.0;
  for (moments(b_hi, energy, variance); energy > target_energy; moments(b_hi, energy, variance)) b_hi *= 2.0;
  double beta = 0.5 * (b_lo + b_hi);
  for (int it = 0; it < 200; ++it) {
    moments(beta, energy, variance);
    const double f = energy - target_energy;
    if (f > 0.0) {
      b_lo = beta;
    } else {
      b_hi = beta;
    }
    if (f == 0.0) return beta;
    double next = variance > 0.0 ? beta + f / variance : 0.5 * (b_lo + b_hi);
    if (std::abs(next - beta) <= 1e-14 * std::max(1.0, std::abs(beta))) return next;
    if (!(next > b_lo && next < b_hi)) next = 0.5 * (b_lo + b_hi);
    if (b_hi - b_lo <= 1e-15 * std::max(1.0, std::abs(beta))) return next;
    beta = next;
  }
  return beta;
}

// S(rho || mes.state). rho must reproduce the targets the state was solved under.
inline double entropy_production(const DensityMatrix& rho, const MaxEntSolution& mes) {
  require(rho.dim() == mes.state.dim(), ErrorKind::invalid_input, "state and maximum-entropy state dimensions differ");
  for (const LinearConstraint& c : mes.constraints) {
    const double mismatch = measure(c.op, rho) - c.target;
    require(std::abs(mismatch) < std::max(mes.constraint_tol, 1e-12), ErrorKind::inconsistent,
            "state does not reproduce constraint '" + c.label + "' (mismatch " + std::to_string(mismatch) + ")");
  }
  return relative_entropy(rho, mes.state);
}

}  // namespace qmaxent
