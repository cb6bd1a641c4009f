#include <gtest/gtest.h>

#include "qmaxent/channels.hpp"
#include "qmaxent/random.hpp"
#include "support.hpp"

using namespace qmaxent;

namespace {

const std::vector<std::pair<OneToOneKind, double>> named_cases{{OneToOneKind::bit_flip, 0.25},
                                                                {OneToOneKind::phase_flip, 0.3},
                                                                {OneToOneKind::depolarizing, 0.5},
                                                                {OneToOneKind::amplitude_damping, 0.3}};

}  // namespace

TEST(KrausChannel, RejectsNonTracePreserving) {
  EXPECT_THROW(KrausChannel({Matrix::Identity(2, 2) * 0.9}), Error);
  EXPECT_THROW(KrausChannel({Matrix::Identity(2, 2), Matrix::Identity(3, 3)}), Error);
  EXPECT_THROW(KrausChannel(std::vector<Matrix>{}), Error);
  EXPECT_THROW(named_one_to_one(OneToOneKind::bit_flip, 1.5), Error);
}

TEST(KrausChannel, AdjointDualityProperty) {
  oracle::Gen g(21);
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = g.integer(2, 5);
    const int k = g.integer(1, 4);
    // random channel from an isometry split into Kraus blocks
    const Matrix iso = random_unitary(d * k, rng).leftCols(d);
    std::vector<Matrix> ops;
    for (int i = 0; i < k; ++i) ops.push_back(iso.middleRows(i * d, d));
    const KrausChannel ch(ops);
    const Matrix rho = g.state(d);
    const Matrix a = g.hermitian(d);
    const double lhs = (a * ch.apply(rho)).trace().real();
    const double rhs = (ch.adjoint_apply(a) * rho).trace().real();
    EXPECT_NEAR(lhs, rhs, 1e-12);
    EXPECT_NEAR(ch.apply(rho).trace().real(), 1.0, 1e-12);
    // unital adjoint: L*(I) = I
    EXPECT_LT((ch.adjoint_apply(Matrix::Identity(d, d)) - Matrix::Identity(d, d)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(NamedChannels, ActionOnReferenceStates) {
  const DensityMatrix zero = DensityMatrix::basis_state(2, 0);
  const Matrix bf = named_one_to_one(OneToOneKind::bit_flip, 0.25).apply(zero.matrix());
  EXPECT_NEAR(bf(0, 0).real(), 0.75, 1e-15);
  EXPECT_NEAR(bf(1, 1).real(), 0.25, 1e-15);
  // depolarizing(p) = (1-p) rho + p I/2
  oracle::Gen g(22);
  const Matrix rho = g.state(2);
  const Matrix dep = named_one_to_one(OneToOneKind::depolarizing, 0.5).apply(rho);
  EXPECT_LT((dep - (0.5 * rho + 0.25 * Matrix::Identity(2, 2))).cwiseAbs().maxCoeff(), 1e-14);
  // amplitude damping drains |1>
  const Matrix ad = named_one_to_one(OneToOneKind::amplitude_damping, 0.3).apply(DensityMatrix::basis_state(2, 1).matrix());
  EXPECT_NEAR(ad(0, 0).real(), 0.3, 1e-15);
  // phase flip shrinks coherences by 1 - 2p
  const Matrix pf = named_one_to_one(OneToOneKind::phase_flip, 0.3).apply(rho);
  EXPECT_NEAR(std::abs(pf(0, 1)), 0.4 * std::abs(rho(0, 1)), 1e-14);
}

TEST(NamedChannels, InjectiveRegime) {
  for (const auto& [kind, p] : named_cases) {
    EXPECT_TRUE(is_injective_regime(kind, p));
    EXPECT_TRUE(is_injective(named_one_to_one(kind, p)));
  }
  EXPECT_FALSE(is_injective(named_one_to_one(OneToOneKind::bit_flip, 0.5)));
  EXPECT_FALSE(is_injective(named_one_to_one(OneToOneKind::depolarizing, 1.0)));
  EXPECT_FALSE(is_injective(named_one_to_one(OneToOneKind::amplitude_damping, 1.0)));
  EXPECT_FALSE(is_injective(dephasing_channel(Basis::computational(2))));
  Rng rng(23);
  EXPECT_TRUE(is_injective(unitary_channel(random_unitary(3, rng))));
}

TEST(StructuralChannels, DephasingAndCoarseGraining) {
  Rng rng(24);
  const Basis b = random_basis(4, rng);
  const DensityMatrix rho = random_density_matrix(4, rng);
  const Matrix deph = dephasing_channel(b).apply(rho.matrix());
  const RealVector p = oracle::populations(b.vectors(), rho.matrix());
  EXPECT_LT((deph - b.vectors() * p.cast<Complex>().asDiagonal() * b.vectors().adjoint()).cwiseAbs().maxCoeff(), 1e-13);

  const CoarseGraining cg(b, {1, 3});
  const Matrix pinched = coarse_graining_channel(cg).apply(rho.matrix());
  Matrix ref = Matrix::Zero(4, 4);
  for (const Matrix& pr : cg.projectors()) ref += (pr * rho.matrix()).trace() / pr.trace() * pr;
  EXPECT_LT((pinched - ref).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(StructuralChannels, PartialTraceChannelMatchesPartialTrace) {
  oracle::Gen g(25);
  const Matrix rho = g.state(6);
  const KrausChannel keep_s = partial_trace_channel({2, 3}, Subsystem::system);
  const KrausChannel keep_e = partial_trace_channel({2, 3}, Subsystem::environment);
  EXPECT_EQ(keep_s.out_dim(), 2);
  EXPECT_EQ(keep_e.out_dim(), 3);
  EXPECT_LT((keep_s.apply(rho) - oracle::trace_env(rho, 2, 3)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((keep_e.apply(rho) - oracle::trace_sys(rho, 2, 3)).cwiseAbs().maxCoeff(), 1e-14);
  // adjoint embeds A as A (x) I
  const Matrix a = g.hermitian(2);
  EXPECT_LT((keep_s.adjoint_apply(a) - oracle::kron(a, Matrix::Identity(3, 3))).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Dilation, ReproducesChannelProperty) {
  Rng rng(26);
  for (const auto& [kind, p] : named_cases) {
    const KrausChannel ch = named_one_to_one(kind, p);
    const DilationRecord rec = stinespring_dilation(ch);
    EXPECT_EQ(rec.system_dim, 2);
    EXPECT_EQ(rec.ancilla_dim, static_cast<int>(ch.kraus_ops().size()));
    EXPECT_TRUE(is_unitary(rec.unitary, 1e-12));
    for (int trial = 0; trial < 10; ++trial) {
      const DensityMatrix rho = random_density_matrix(2, rng);
      EXPECT_LT((dilation_apply(rec, rho).matrix() - ch.apply(rho.matrix())).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
  // identical inputs give identical dilations
  const KrausChannel ch = named_one_to_one(OneToOneKind::depolarizing, 0.5);
  EXPECT_EQ(stinespring_dilation(ch).unitary, stinespring_dilation(ch).unitary);
}

TEST(Dilation, GeneralChannelAndRejectsRectangular) {
  Rng rng(27);
  const Matrix iso = random_unitary(9, rng).leftCols(3);
  const KrausChannel ch({iso.topRows(3), iso.middleRows(3, 3), iso.bottomRows(3)});
  const DilationRecord rec = stinespring_dilation(ch);
  const DensityMatrix rho = random_density_matrix(3, rng);
  EXPECT_LT((dilation_apply(rec, rho).matrix() - ch.apply(rho.matrix())).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(stinespring_dilation(partial_trace_channel({2, 2}, Subsystem::system)), Error);
}
