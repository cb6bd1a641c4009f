// Acceptance suite: one PASS/FAIL line per criterion, each checked at its stated
// tolerance against references computed independently in this file.
//
//   acceptance <qmaxent_cli path> <fixtures dir> <scratch dir>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "qmaxent/qmaxent.hpp"
#include "support.hpp"

using namespace qmaxent;

namespace {

// Collects the worst violation of each check within one criterion.
class Criterion {
 public:
  explicit Criterion(std::string title) : title_(std::move(title)) {}

  // |value - expected| <= tol
  void near(const std::string& what, double value, double expected, double tol) {
    const double dev = std::abs(value - expected);
    ++checks_;
    if (!(dev <= tol)) fail(what + ": |" + fmt(value) + " - " + fmt(expected) + "| = " + fmt(dev) + " > " + fmt(tol));
    worst_ = std::max(worst_, dev / tol);
  }
  void below(const std::string& what, double value, double bound) {
    ++checks_;
    if (!(value < bound)) fail(what + ": " + fmt(value) + " >= " + fmt(bound));
  }
  void at_least(const std::string& what, double value, double bound) {
    ++checks_;
    if (!(value >= bound)) fail(what + ": " + fmt(value) + " < " + fmt(bound));
  }
  void truth(const std::string& what, bool ok) {
    ++checks_;
    if (!ok) fail(what);
  }
  void fail(const std::string& msg) {
    if (failures_.size() < 5) failures_.push_back(msg);
    ok_ = false;
  }

  bool report(int index) const {
    std::cout << (ok_ ? "PASS" : "FAIL") << " criterion " << index << ": " << title_ << " [" << checks_ << " checks";
    if (ok_) std::cout << ", worst deviation " << fmt(worst_) << " of tolerance";
    std::cout << "]\n";
    for (const std::string& f : failures_) std::cout << "    " << f << '\n';
    return ok_;
  }

  static std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
  }

 private:
  std::string title_;
  bool ok_ = true;
  long checks_ = 0;
  double worst_ = 0.0;
  std::vector<std::string> failures_;
};

// Runs a criterion body, turning unexpected exceptions into failures.
bool run_criterion(int index, const std::string& title, const std::function<void(Criterion&)>& body) {
  Criterion c(title);
  try {
    body(c);
  } catch (const std::exception& e) {
    c.fail(std::string("unexpected exception: ") + e.what());
  }
  return c.report(index);
}

// Smallest entropy production seen anywhere in the suite.
double min_sigma = 0.0;
void saw_sigma(double s) { min_sigma = std::min(min_sigma, s); }

MaxEntSolution solve_direct(std::vector<LinearConstraint> cons, int dim, const SolverOptions& opts = {}) {
  ConstraintSet cs;
  cs.input_dim = dim;
  cs.direct = std::move(cons);
  return solve_mes(cs, opts);
}

Matrix diag_in(const Matrix& vecs, const oracle::RealVector& p) {
  return vecs * p.cast<Complex>().asDiagonal() * vecs.adjoint();
}

// Block populations and the block-uniform state, from explicit column ranges.
struct BlockOracle {
  oracle::RealVector p;
  Matrix uniform;
  double s_obs = 0.0;
};
BlockOracle block_oracle(const Matrix& vecs, const std::vector<int>& blocks, const Matrix& rho) {
  const oracle::RealVector pa = oracle::populations(vecs, rho);
  BlockOracle out;
  out.p.resize(static_cast<Eigen::Index>(blocks.size()));
  out.uniform = Matrix::Zero(rho.rows(), rho.cols());
  int offset = 0;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const int v = blocks[i];
    const double p = pa.segment(offset, v).sum();
    out.p(static_cast<Eigen::Index>(i)) = p;
    const Matrix cols = vecs.middleCols(offset, v);
    out.uniform += (p / v) * cols * cols.adjoint();
    if (p > 0.0) out.s_obs -= p * std::log(p / v);
    offset += v;
  }
  return out;
}

int exit_status(const std::string& cmd) {
  const int rc = std::system(cmd.c_str());
  if (rc == -1 || !WIFEXITED(rc)) return -1;
  return WEXITSTATUS(rc);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

// -- criteria ------------------------------------------------------------------

void fine_measurement(Criterion& c) {
  Rng rng(1001);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 2 + trial % 7;
    const DensityMatrix rho = random_density_matrix(d, rng);
    const Basis b = random_basis(d, rng);
    const MaxEntSolution mes = solve_direct(population_constraints(b, rho), d);
    c.truth("converged", mes.converged);
    const oracle::RealVector p = oracle::populations(b.vectors(), rho.matrix());
    c.below("MES trace distance", oracle::trace_norm_distance(mes.state.matrix(), diag_in(b.vectors(), p)), 1e-7);
    const double sigma = entropy_production(rho, mes);
    saw_sigma(sigma);
    c.near("sigma vs S_A - S", sigma, oracle::shannon(p) - oracle::entropy(rho.matrix()), 1e-8);
  }
  const DensityMatrix plus = DensityMatrix::pure(Vector::Constant(2, Complex(1.0, 0.0)));
  const double s = entropy_production(plus, solve_direct(population_constraints(Basis::computational(2), plus), 2));
  saw_sigma(s);
  c.near("|+> in Z basis", s, std::log(2.0), 1e-9);
}

void coarse_measurement(Criterion& c) {
  Rng rng(1002);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 2 + trial % 7;
    const DensityMatrix rho = random_density_matrix(d, rng);
    const Basis b = random_basis(d, rng);
    const std::vector<int> blocks = random_block_sizes(d, rng, 2);
    const CoarseGraining cg(b, blocks);
    const MaxEntSolution mes = solve_direct(coarse_population_constraints(cg, rho), d);
    c.truth("converged", mes.converged);
    const BlockOracle o = block_oracle(b.vectors(), blocks, rho.matrix());
    c.below("MES trace distance", oracle::trace_norm_distance(mes.state.matrix(), o.uniform), 1e-7);
    const double sigma = entropy_production(rho, mes);
    saw_sigma(sigma);
    c.near("sigma vs S_obs - S", sigma, o.s_obs - oracle::entropy(rho.matrix()), 1e-8);

    // rank-one blocks reproduce the fine-grained case
    const CoarseGraining fine(b, std::vector<int>(static_cast<std::size_t>(d), 1));
    const double s_fine = entropy_production(rho, solve_direct(coarse_population_constraints(fine, rho), d));
    const double s_pop = entropy_production(rho, solve_direct(population_constraints(b, rho), d));
    c.near("rank-one coarse-graining vs populations", s_fine, s_pop, 1e-8);
  }
}

void channel_routes(Criterion& c) {
  Rng rng(1003);
  for (int trial = 0; trial < 25; ++trial) {
    const int d = 2 + trial % 5;
    const DensityMatrix rho = random_density_matrix(d, rng);
    const Basis b = random_basis(d, rng);
    const ScenarioReport deph = scenario_dephasing_channel(b, rho);
    const double measurement = entropy_production(rho, solve_direct(population_constraints(b, rho), d));
    saw_sigma(deph.value("sigma_channel"));
    c.near("dephasing channel route vs measurement route", deph.value("sigma_channel"), measurement, 1e-7);
  }
  for (int trial = 0; trial < 25; ++trial) {
    const int d = 2 + trial % 5;
    const DensityMatrix rho = random_density_matrix(d, rng);
    const CoarseGraining cg(random_basis(d, rng), random_block_sizes(d, rng, 2));
    const ScenarioReport obs = scenario_obs_channel(cg, rho);
    const double measurement = entropy_production(rho, solve_direct(coarse_population_constraints(cg, rho), d));
    saw_sigma(obs.value("sigma_channel"));
    c.near("coarse-graining channel route vs measurement route", obs.value("sigma_channel"), measurement, 1e-7);
  }
}

void graded_knowledge(Criterion& c) {
  Rng rng(1004);
  const int des[] = {2, 4, 8};
  for (int trial = 0; trial < 25; ++trial) {
    const int de = des[trial % 3];
    const HermitianOperator he = random_hermitian(de, rng);
    const double beta0 = std::uniform_real_distribution<double>(0.2, 2.0)(rng);
    OpenSystemInput in{random_density_matrix(2, rng), gibbs_state(he, beta0), random_unitary(2 * de, rng), he,
                       {Knowledge::none, Knowledge::energy, Knowledge::full_initial, Knowledge::full_final_local}};
    const ScenarioReport r = scenario_open_system(in);
    c.truth("converged", r.converged);

    // independent quantities
    const Matrix rho_se = in.u_se * oracle::kron(in.rho_s0.matrix(), in.rho_e0.matrix()) * in.u_se.adjoint();
    const Matrix rs = oracle::trace_env(rho_se, 2, de), re = oracle::trace_sys(rho_se, 2, de);
    const double ds_s = oracle::entropy(rs) - oracle::entropy(in.rho_s0.matrix());
    const double de_e = (he.matrix() * (re - in.rho_e0.matrix())).trace().real();
    const double info = oracle::entropy(rs) + oracle::entropy(re) - oracle::entropy(rho_se);
    const double env_rel = oracle::relative_entropy_full_rank(re, in.rho_e0.matrix());

    c.near("(a) energy grade vs dS_S + beta0 dE_E", r.value("sigma_energy"), ds_s + beta0 * de_e, 1e-8);
    c.near("(b) full_initial vs S(rho_E||rho_E0) + I_SE", r.value("sigma_full_initial"), env_rel + info, 1e-8);
    c.near("(c) full_final_local vs I_SE", r.value("sigma_full_final_local"), info, 1e-8);
    c.near("(c) grade gap vs S(rho_E||rho_E0)", r.value("sigma_full_initial") - r.value("sigma_full_final_local"), env_rel, 1e-8);
    c.at_least("(c) gap non-negative", r.value("sigma_full_initial") - r.value("sigma_full_final_local"), -1e-12);
    for (const char* g : {"none", "energy", "full_initial", "full_final_local"}) {
      const double sigma = r.value(std::string("sigma_") + g);
      saw_sigma(sigma);
      c.near(std::string("(d) closure ") + g, sigma + r.value(std::string("phi_") + g), ds_s, 1e-9);
    }
  }
}

void joint_gap(Criterion& c) {
  Rng rng(1005);
  for (int trial = 0; trial < 25; ++trial) {
    const int ds = 2 + trial % 2;
    const int de = 2 + trial % 3;
    const Basis eb = random_basis(de, rng);
    const std::vector<int> blocks = random_block_sizes(de, rng, 1);
    const CoarseGraining cg(eb, blocks);
    const DensityMatrix rho0 =
        tensor(random_density_matrix(ds, rng), DensityMatrix(cg.block_uniform(random_probabilities(cg.size(), rng))));
    const Matrix u = random_unitary(ds * de, rng);
    const ScenarioReport r = scenario_joint_coarse(rho0, cg, u);
    c.truth("converged", r.converged);
    saw_sigma(r.value("sigma_joint"));
    saw_sigma(r.value("sigma_local"));

    // outcome table from the final system eigenbasis and environment blocks
    const Matrix rho = u * rho0.matrix() * u.adjoint();
    Eigen::SelfAdjointEigenSolver<Matrix> es(oracle::trace_env(rho, ds, de));
    const Matrix sv = es.eigenvectors();
    oracle::RealVector flat(ds * static_cast<int>(blocks.size()));
    Eigen::MatrixXd table(ds, static_cast<int>(blocks.size()));
    int offset = 0;
    for (std::size_t j = 0; j < blocks.size(); ++j) {
      const Matrix cols = eb.vectors().middleCols(offset, blocks[j]);
      offset += blocks[j];
      for (int i = 0; i < ds; ++i) {
        const Matrix proj = oracle::kron(sv.col(i) * sv.col(i).adjoint(), cols * cols.adjoint());
        table(i, static_cast<int>(j)) = (proj * rho).trace().real();
      }
    }
    const oracle::RealVector rows = table.rowwise().sum(), colsum = table.colwise().sum().transpose();
    const oracle::RealVector cells = table.reshaped();
    const double ic = oracle::shannon(rows) + oracle::shannon(colsum) - oracle::shannon(cells);
    c.near("gap vs classical mutual information", r.value("gap"), ic, 1e-8);
    c.at_least("gap non-negative", r.value("gap"), -1e-12);
  }
  Matrix cnot = Matrix::Zero(4, 4);
  cnot(0, 0) = cnot(1, 1) = cnot(2, 3) = cnot(3, 2) = 1.0;
  const ScenarioReport r = scenario_joint_coarse(tensor(DensityMatrix::maximally_mixed(2), DensityMatrix::basis_state(2, 0)),
                                                 CoarseGraining(Basis::computational(2), {1, 1}), cnot);
  c.near("perfectly correlated 2x2 gap", r.value("gap"), std::log(2.0), 1e-8);
}

void one_to_one(Criterion& c) {
  Rng rng(1006);
  const std::vector<std::pair<OneToOneKind, double>> cases{{OneToOneKind::bit_flip, 0.25},
                                                           {OneToOneKind::phase_flip, 0.3},
                                                           {OneToOneKind::depolarizing, 0.5},
                                                           {OneToOneKind::amplitude_damping, 0.3}};
  for (const auto& [kind, p] : cases) {
    const KrausChannel ch = named_one_to_one(kind, p);
    for (int trial = 0; trial < 10; ++trial) {
      const DensityMatrix rho = random_density_matrix(2, rng);
      const ScenarioReport r = scenario_one_to_one(ch, rho);
      saw_sigma(r.value("sigma_solver"));
      c.below(std::string(to_string(kind)) + " solver sigma", r.value("sigma_solver"), 1e-6);
      const double direct = oracle::entropy(ch.apply(rho.matrix())) - oracle::entropy(rho.matrix());
      c.near(std::string(to_string(kind)) + " dilation route", r.value("entropy_change_dilation"), direct, 1e-8);
    }
  }
  const ScenarioReport bf = scenario_one_to_one(named_one_to_one(OneToOneKind::bit_flip, 0.25), DensityMatrix::basis_state(2, 0));
  c.near("bit_flip(0.25) on |0><0|", bf.value("entropy_change_dilation"), 0.562335, 1e-5);
}

void solver_integrity(Criterion& c) {
  Rng rng(1007);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 2 + trial % 6;
    const int k = 1 + trial % 5;
    std::vector<LinearConstraint> cons;
    for (int i = 0; i < k; ++i) cons.push_back({random_hermitian(d, rng), std::uniform_real_distribution<double>(-1, 1)(rng), "g"});
    oracle::RealVector mu(k);
    for (int i = 0; i < k; ++i) mu(i) = std::uniform_real_distribution<double>(-2, 2)(rng);
    const DualValue v = dual_objective(mu, cons);
    const double h = 1e-5;
    for (int i = 0; i < k; ++i) {
      oracle::RealVector up = mu, dn = mu;
      up(i) += h;
      dn(i) -= h;
      // independent evaluation of ln tr exp(-sum mu G) + mu . t
      auto f = [&](const oracle::RealVector& m) {
        Matrix e = Matrix::Zero(d, d);
        double lin = 0.0;
        for (int j = 0; j < k; ++j) {
          e -= m(j) * cons[static_cast<std::size_t>(j)].op.matrix();
          lin += m(j) * cons[static_cast<std::size_t>(j)].target;
        }
        return std::log(oracle::expm(e).trace().real()) + lin;
      };
      const double fd = (f(up) - f(dn)) / (2.0 * h);
      c.below("relative gradient error", std::abs(v.gradient(i) - fd) / std::max(1.0, std::abs(fd)), 1e-6);
    }
  }
  const HermitianOperator two_level = HermitianOperator::diagonal(oracle::RealVector::Unit(2, 1));
  c.near("solve_beta ln 3", solve_beta(two_level, 0.25), std::log(3.0), 1e-10);

  const DensityMatrix zero = DensityMatrix::basis_state(3, 0);
  const MaxEntSolution boundary = solve_direct({{HermitianOperator(zero.matrix()), 1.0, "p0"}}, 3);
  c.truth("boundary p = 1 converged", boundary.converged);
  c.truth("boundary multipliers finite", boundary.multipliers.allFinite());
  c.below("boundary state", oracle::trace_norm_distance(boundary.state.matrix(), zero.matrix()), 1e-9);
  const double s = entropy_production(zero, boundary);
  saw_sigma(s);
  c.near("boundary sigma", s, 0.0, 1e-9);
}

void evolution_suite(Criterion& c) {
  Rng rng(1008);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 2 + trial % 5;
    const HermitianOperator h0 = random_hermitian(d, rng), h1 = random_hermitian(d, rng);
    const double t = std::uniform_real_distribution<double>(0.2, 3.0)(rng);
    const EvolutionSpec spec{{{0.0, h0}, {0.0, h1}, {t, h1}}, t, 64};
    const Matrix u = oracle::expm(Complex(0.0, -t) * h1.matrix());

    // fine-grained: rho0 diagonal in the H0 eigenbasis
    Eigen::SelfAdjointEigenSolver<Matrix> e0(h0.matrix()), e1(h1.matrix());
    const oracle::RealVector p = random_probabilities(d, rng);
    const DensityMatrix rho0(diag_in(e0.eigenvectors(), p));
    const ScenarioReport fine = scenario_fine_grained(rho0, spec);
    const Matrix rho_t = u * rho0.matrix() * u.adjoint();
    const double sd = oracle::shannon(oracle::populations(e1.eigenvectors(), rho_t)) - oracle::shannon(p);
    c.at_least("fine sigma non-negative", fine.value("sigma_solver"), -1e-12);
    c.near("fine solver vs closed form", fine.value("sigma_solver"), sd, 1e-7);
    saw_sigma(fine.value("sigma_solver"));

    // coarse-grained: block-uniform initial state
    const std::vector<int> blocks = random_block_sizes(d, rng, 2);
    const BlockOracle init = block_oracle(e0.eigenvectors(), blocks, random_density_matrix(d, rng).matrix());
    const DensityMatrix rho0c(init.uniform);
    const ScenarioReport coarse = scenario_coarse_grained(rho0c, blocks, spec);
    const BlockOracle fin = block_oracle(e1.eigenvectors(), blocks, u * rho0c.matrix() * u.adjoint());
    c.at_least("coarse sigma non-negative", coarse.value("sigma_solver"), -1e-12);
    c.near("coarse solver vs closed form", coarse.value("sigma_solver"), fin.s_obs - init.s_obs, 1e-7);
    saw_sigma(coarse.value("sigma_solver"));
  }
  // Richardson: error ratio of successive step doublings
  const HermitianOperator a = random_hermitian(3, rng), b = random_hermitian(3, rng);
  auto prop = [&](int n) { return propagate(EvolutionSpec{{{0.0, a}, {2.0, b}}, 2.0, n}); };
  const Matrix u1 = prop(16), u2 = prop(32), u4 = prop(64);
  const double ratio = (u1 - u2).norm() / (u2 - u4).norm();
  c.at_least("Richardson ratio lower", ratio, 3.5);
  c.truth("Richardson ratio upper (" + Criterion::fmt(ratio) + ")", ratio <= 4.5);
}

void cli_determinism(Criterion& c, const std::string& cli, const std::filesystem::path& fixtures,
                     const std::filesystem::path& scratch) {
  namespace fs = std::filesystem;
  fs::remove_all(scratch);
  const fs::path a = scratch / "a", b = scratch / "b";
  const std::string golden = (fixtures / "golden.json").string();
  const std::string quiet = " > /dev/null 2>&1";
  c.truth("first golden run exits 0", exit_status(quote(cli) + " run " + quote(golden) + " --output " + quote(a.string()) + quiet) == 0);
  c.truth("second golden run exits 0", exit_status(quote(cli) + " run " + quote(golden) + " --output " + quote(b.string()) + quiet) == 0);
  const std::string csv_a = slurp(a / "results.csv"), csv_b = slurp(b / "results.csv");
  c.truth("CSV written", !csv_a.empty());
  c.truth("CSV byte-identical across runs", csv_a == csv_b);
  const struct {
    const char* fixture;
    int code;
  } cases[] = {{"parse_error.json", 2}, {"infeasible.json", 3}, {"non_convergence.json", 4}, {"precondition.json", 5}};
  for (const auto& k : cases) {
    const int rc = exit_status(quote(cli) + " run " + quote((fixtures / k.fixture).string()) + " --output " +
                               quote((scratch / k.fixture).string()) + quiet);
    c.truth(std::string(k.fixture) + " exit " + std::to_string(rc) + " (expected " + std::to_string(k.code) + ")", rc == k.code);
  }
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 4) {
    std::cerr << "usage: acceptance <qmaxent_cli> <fixtures dir> <scratch dir>\n";
    return 2;
  }
  const std::string cli = argv[1];
  const std::filesystem::path fixtures = argv[2], scratch = argv[3];

  bool all = true;
  all &= run_criterion(1, "fine-grained measurement oracle", fine_measurement);
  all &= run_criterion(2, "coarse-grained measurement oracle", coarse_measurement);
  all &= run_criterion(3, "channel route equals measurement route", channel_routes);
  all &= run_criterion(4, "graded environment knowledge", graded_knowledge);
  all &= run_criterion(5, "joint vs local coarse measurement gap", joint_gap);
  all &= run_criterion(6, "one-to-one channels and dilation", one_to_one);
  all &= run_criterion(7, "solver integrity", [](Criterion& c) {
    solver_integrity(c);
    c.at_least("minimum entropy production over the suite", min_sigma, -1e-12);
  });
  all &= run_criterion(8, "unitary evolution suite", evolution_suite);
  all &= run_criterion(9, "command-line determinism and exit codes",
                       [&](Criterion& c) { cli_determinism(c, cli, fixtures, scratch); });
  return all ? 0 : 1;
}
