#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "qmaxent/entropy.hpp"
#include "qmaxent/linalg.hpp"

namespace qmaxent {

// CPTP map L(H_D) -> L(H_d) given by Kraus operators of shape d x D.
// Kraus lists are not canonicalized; compare channels by their action.
class KrausChannel {
 public:
  KrausChannel() : in_dim_(1), out_dim_(1), ops_{Matrix::Identity(1, 1)} {}

  explicit KrausChannel(std::vector<Matrix> ops) : ops_(std::move(ops)) {
    require(!ops_.empty(), ErrorKind::invalid_input, "channel needs at least one Kraus operator");
    out_dim_ = static_cast<int>(ops_.front().rows());
    in_dim_ = static_cast<int>(ops_.front().cols());
    require(in_dim_ >= 1 && out_dim_ >= 1, ErrorKind::invalid_input, "Kraus operators must be non-empty");
    Matrix completeness = Matrix::Zero(in_dim_, in_dim_);
    for (const Matrix& k : ops_) {
      require(k.rows() == out_dim_ && k.cols() == in_dim_, ErrorKind::invalid_input, "Kraus operator shapes differ");
      require(detail::all_finite(k), ErrorKind::invalid_input, "Kraus operator has non-finite entries");
      completeness += k.adjoint() * k;
    }
    const double defect = detail::max_abs(completeness - Matrix::Identity(in_dim_, in_dim_));
    require(defect <= 1e-10, ErrorKind::invalid_input,
            "Kraus operators are not trace preserving (max |sum K^dagger K - I| = " + std::to_string(defect) + ")");
  }

  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }
  const std::vector<Matrix>& kraus_ops() const { return ops_; }

  Matrix apply(const Matrix& rho) const {
    require(rho.rows() == in_dim_ && rho.cols() == in_dim_, ErrorKind::invalid_input,
            "channel input dimension is " + std::to_string(in_dim_) + ", got " + std::to_string(rho.rows()));
    Matrix out = Matrix::Zero(out_dim_, out_dim_);
    for (const Matrix& k : ops_) out.noalias() += k * rho * k.adjoint();
    return detail::symmetrize(out);
  }

  Matrix adjoint_apply(const Matrix& obs) const {
    require(obs.rows() == out_dim_ && obs.cols() == out_dim_, ErrorKind::invalid_input,
            "adjoint channel input dimension is " + std::to_string(out_dim_) + ", got " + std::to_string(obs.rows()));
    Matrix out = Matrix::Zero(in_dim_, in_dim_);
    for (const Matrix& k : ops_) out.noalias() += k.adjoint() * obs * k;
    return detail::symmetrize(out);
  }

 private:
  int in_dim_;
  int out_dim_;
  std::vector<Matrix> ops_;
};

inline DensityMatrix apply(const KrausChannel& ch, const DensityMatrix& rho) { return DensityMatrix(ch.apply(rho.matrix())); }

// Trace dual: tr{adjoint_apply(O) rho} = tr{O apply(rho)}.
inline HermitianOperator adjoint_apply(const KrausChannel& ch, const HermitianOperator& obs) {
  return HermitianOperator(ch.adjoint_apply(obs.matrix()));
}

inline KrausChannel identity_channel(int dim) { return KrausChannel({Matrix::Identity(dim, dim)}); }

inline KrausChannel unitary_channel(const Matrix& u) { return KrausChannel({require_unitary(u, "channel unitary")}); }

// Completely dephasing map in the given basis, Kraus ops {|a><a|}. Self-dual.
inline KrausChannel dephasing_channel(const Basis& basis) {
  std::vector<Matrix> ops;
  ops.reserve(static_cast<std::size_t>(basis.dim()));
  for (int a = 0; a < basis.dim(); ++a) ops.push_back(basis.projector(a));
  return KrausChannel(std::move(ops));
}

// K_{i mu nu} = |a_{i mu}><a_{i nu}| / sqrt(V_i); output sum_i p_i Pi_i / V_i.
inline KrausChannel coarse_graining_channel(const CoarseGraining& cg) {
  require(cg.size() >= 1, ErrorKind::invalid_input, "coarse-graining is empty");
  std::vector<Matrix> ops;
  for (int i = 0; i < cg.size(); ++i) {
    const Matrix& b = cg.block_vectors(i);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cg.rank(i)));
    for (Eigen::Index mu = 0; mu < b.cols(); ++mu)
      for (Eigen::Index nu = 0; nu < b.cols(); ++nu) ops.push_back(scale * b.col(mu) * b.col(nu).adjoint());
  }
  return KrausChannel(std::move(ops));
}

// Kraus ops I_S (x) <e| (keep system) or <s| (x) I_E (keep environment).
inline KrausChannel partial_trace_channel(BipartiteDims dims, Subsystem keep) {
  require(dims.system >= 1 && dims.environment >= 1, ErrorKind::invalid_input, "subsystem dims must be positive");
  std::vector<Matrix> ops;
  if (keep == Subsystem::system) {
    for (int e = 0; e < dims.environment; ++e) {
      Matrix bra = Matrix::Zero(1, dims.environment);
      bra(0, e) = 1.0;
      ops.push_back(tensor(Matrix::Identity(dims.system, dims.system), bra));
    }
  } else {
    for (int s = 0; s < dims.system; ++s) {
      Matrix bra = Matrix::Zero(1, dims.system);
      bra(0, s) = 1.0;
      ops.push_back(tensor(bra, Matrix::Identity(dims.environment, dims.environment)));
    }
  }
  return KrausChannel(std::move(ops));
}

enum class OneToOneKind { bit_flip, phase_flip, depolarizing, amplitude_damping };

inline std::string_view to_string(OneToOneKind kind) {
  switch (kind) {
    case OneToOneKind::bit_flip: return "bit_flip";
    case OneToOneKind::phase_flip: return "phase_flip";
    case OneToOneKind::depolarizing: return "depolarizing";
    case OneToOneKind::amplitude_damping: return "amplitude_damping";
  }
  return "unknown";
}

// Parameter values for which the qubit channel is injective:
// flips need p != 1/2, depolarizing p < 1, amplitude damping gamma < 1.
inline bool is_injective_regime(OneToOneKind kind, double parameter) {
  switch (kind) {
    case OneToOneKind::bit_flip:
    case OneToOneKind::phase_flip: return std::abs(parameter - 0.5) > 1e-12;
    case OneToOneKind::depolarizing:
    case OneToOneKind::amplitude_damping: return parameter < 1.0;
  }
  return false;
}

// Standard qubit noise channels:
//   bit_flip(p):        (1-p) rho + p X rho X
//   phase_flip(p):      (1-p) rho + p Z rho Z
//   depolarizing(p):    (1-p) rho + p I/2
//   amplitude_damping(g): K0 = diag(1, sqrt(1-g)), K1 = sqrt(g) |0><1|
inline KrausChannel named_one_to_one(OneToOneKind kind, double parameter) {
  require(std::isfinite(parameter) && parameter >= 0.0 && parameter <= 1.0, ErrorKind::invalid_input,
          std::string(to_string(kind)) + " parameter must lie in [0, 1]");
  const Matrix id = Matrix::Identity(2, 2);
  switch (kind) {
    case OneToOneKind::bit_flip:
      return KrausChannel({std::sqrt(1.0 - parameter) * id, std::sqrt(parameter) * pauli::x().matrix()});
    case OneToOneKind::phase_flip:
      return KrausChannel({std::sqrt(1.0 - parameter) * id, std::sqrt(parameter) * pauli::z().matrix()});
    case OneToOneKind::depolarizing: {
      const double q = std::sqrt(parameter / 4.0);
      return KrausChannel({std::sqrt(1.0 - 3.0 * parameter / 4.0) * id, q * pauli::x().matrix(), q * pauli::y().matrix(),
                           q * pauli::z().matrix()});
    }
    case OneToOneKind::amplitude_damping: {
      Matrix k0 = Matrix::Zero(2, 2);
      k0(0, 0) = 1.0;
      k0(1, 1) = std::sqrt(1.0 - parameter);
      Matrix k1 = Matrix::Zero(2, 2);
      k1(0, 1) = std::sqrt(parameter);
      return KrausChannel({k0, k1});
    }
  }
  fail(ErrorKind::invalid_input, "unknown channel kind");
}

// Superoperator matrix acting on row-major vec(rho).
inline Matrix transfer_matrix(const KrausChannel& ch) {
  const int din = ch.in_dim();
  const int dout = ch.out_dim();
  Matrix t = Matrix::Zero(dout * dout, din * din);
  for (int i = 0; i < din; ++i)
    for (int j = 0; j < din; ++j) {
      Matrix e = Matrix::Zero(din, din);
      e(i, j) = 1.0;
      Matrix out = Matrix::Zero(dout, dout);
      for (const Matrix& k : ch.kraus_ops()) out += k * e * k.adjoint();
      for (int a = 0; a < dout; ++a)
        for (int b = 0; b < dout; ++b) t(a * dout + b, i * din + j) = out(a, b);
    }
  return t;
}

// Behavioral injectivity: the transfer matrix has full column rank.
inline bool is_injective(const KrausChannel& ch, double threshold = 1e-10) {
  const Matrix t = transfer_matrix(ch);
  if (t.rows() < t.cols()) return false;
  Eigen::JacobiSVD<Matrix> svd(t);
  return svd.singularValues().minCoeff() > threshold * std::max(1.0, svd.singularValues().maxCoeff());
}

// Unitary U on system (x) ancilla with U (|psi> (x) |0>) = sum_k K_k |psi> (x) |k>.
struct DilationRecord {
  int system_dim = 1;
  int ancilla_dim = 1;
  Matrix unitary;
  int ancilla_ref_state = 0;
};

// Block-column isometry completed to a unitary by Gram-Schmidt over the
// standard basis, in index order, with the deterministic phase convention.
inline DilationRecord stinespring_dilation(const KrausChannel& ch) {
  require(ch.in_dim() == ch.out_dim(), ErrorKind::unsupported, "dilation requires a square channel");
  const int d = ch.in_dim();
  const int k_count = static_cast<int>(ch.kraus_ops().size());
  const int n = d * k_count;
  Matrix u = Matrix::Zero(n, n);
  std::vector<bool> filled(static_cast<std::size_t>(n), false);
  for (int s = 0; s < d; ++s) {
    const int col = s * k_count;
    for (int k = 0; k < k_count; ++k) {
      const Matrix& op = ch.kraus_ops()[static_cast<std::size_t>(k)];
      for (int r = 0; r < d; ++r) u(r * k_count + k, col) = op(r, s);
    }
    filled[static_cast<std::size_t>(col)] = true;
  }
  std::vector<int> done;
  for (int c = 0; c < n; ++c)
    if (filled[static_cast<std::size_t>(c)]) done.push_back(c);
  int candidate = 0;
  for (int c = 0; c < n; ++c) {
    if (filled[static_cast<std::size_t>(c)]) continue;
    for (;; ++candidate) {
      require(candidate < n, ErrorKind::domain, "dilation completion ran out of candidate vectors");
      Vector v = Vector::Zero(n);
      v(candidate) = 1.0;
      for (int pass = 0; pass < 2; ++pass)
        for (int j : done) v -= u.col(j) * u.col(j).dot(v);
      const double norm = v.norm();
      if (norm > 1e-6) {
        v /= norm;
        detail::fix_phase(v);
        u.col(c) = v;
        done.push_back(c);
        ++candidate;
        break;
      }
    }
  }
  require(is_unitary(u, 1e-10), ErrorKind::domain, "dilation completion is not unitary");
  return DilationRecord{d, k_count, u, 0};
}

// U (rho (x) |0><0|) U^dagger on system (x) ancilla.
inline DensityMatrix dilated_state(const DilationRecord& rec, const DensityMatrix& rho) {
  require(rho.dim() == rec.system_dim, ErrorKind::invalid_input, "dilation and state dimensions differ");
  Matrix ref = Matrix::Zero(rec.ancilla_dim, rec.ancilla_dim);
  ref(rec.ancilla_ref_state, rec.ancilla_ref_state) = 1.0;
  return DensityMatrix(rec.unitary * tensor(rho.matrix(), ref) * rec.unitary.adjoint());
}

// tr_A{U (rho (x) |0><0|) U^dagger}
inline DensityMatrix dilation_apply(const DilationRecord& rec, const DensityMatrix& rho) {
  return partial_trace(dilated_state(rec, rho), {rec.system_dim, rec.ancilla_dim}, Subsystem::system);
}

}  // namespace qmaxent
