#pragma once

// Worked entropy-production scenarios. Each one runs the general solver and an
// independent closed form side by side and reports both with their delta.

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qmaxent/channels.hpp"
#include "qmaxent/entropy.hpp"
#include "qmaxent/linalg.hpp"
#include "qmaxent/maxent.hpp"
#include "qmaxent/report.hpp"

namespace qmaxent {

struct ScenarioOptions {
  SolverOptions solver;
  double tolerance = 1e-7;  // oracle-delta acceptance
  std::uint64_t seed = 0;   // recorded in the report
};

// -- time evolution -----------------------------------------------------------

struct HamiltonianPoint {
  double time = 0.0;
  HermitianOperator hamiltonian;
};

// H(t) is piecewise linear between schedule points; repeated times encode a
// sudden quench (the later entry applies for t > time).
struct EvolutionSpec {
  std::vector<HamiltonianPoint> schedule;
  double total_time = 0.0;
  int steps = 256;

  void validate() const {
    require(!schedule.empty(), ErrorKind::invalid_input, "evolution schedule is empty");
    require(steps >= 1, ErrorKind::invalid_input, "evolution needs at least one step");
    require(std::isfinite(total_time) && total_time >= 0.0, ErrorKind::invalid_input, "total time must be non-negative");
    const int dim = schedule.front().hamiltonian.dim();
    for (std::size_t i = 0; i < schedule.size(); ++i) {
      require(std::isfinite(schedule[i].time), ErrorKind::invalid_input, "schedule times must be finite");
      require(schedule[i].hamiltonian.dim() == dim, ErrorKind::invalid_input, "schedule Hamiltonian dimensions differ");
      if (i > 0)
        require(schedule[i].time >= schedule[i - 1].time, ErrorKind::invalid_input, "schedule times must be ascending");
    }
  }

  int dim() const { return schedule.front().hamiltonian.dim(); }
  const HermitianOperator& initial_hamiltonian() const { return schedule.front().hamiltonian; }

  HermitianOperator at(double t) const {
    if (schedule.size() == 1 || t <= schedule.front().time) {
      if (schedule.size() > 1 && t > schedule.front().time) return schedule.back().hamiltonian;
      return schedule.front().hamiltonian;
    }
    for (std::size_t i = schedule.size() - 1; i-- > 0;) {
      const HamiltonianPoint& a = schedule[i];
      const HamiltonianPoint& b = schedule[i + 1];
      if (t >= a.time && b.time > a.time) {
        if (t >= b.time) return b.hamiltonian;
        const double f = (t - a.time) / (b.time - a.time);
        return HermitianOperator((1.0 - f) * a.hamiltonian.matrix() + f * b.hamiltonian.matrix());
      }
      if (t > a.time && b.time == a.time) return b.hamiltonian;
    }
    return schedule.back().hamiltonian;
  }

  HermitianOperator final_hamiltonian() const { return at(total_time); }
};

// Midpoint-rule product of exp(-i H(t_mid) dt), latest step applied last.
inline Matrix propagate(const EvolutionSpec& spec) {
  spec.validate();
  const int dim = spec.dim();
  Matrix u = Matrix::Identity(dim, dim);
  const double dt = spec.total_time / spec.steps;
  for (int n = 0; n < spec.steps; ++n) {
    const HermitianOperator h = spec.at((n + 0.5) * dt);
    u = evolution_operator(h, dt) * u;
  }
  return u;
}

// -- registry -------------------------------------------------------------------

struct ScenarioInfo {
  std::string_view id;
  std::string_view parameters;
  std::string_view anchor;
};

inline std::span<const ScenarioInfo> scenario_registry() {
  static constexpr std::array<ScenarioInfo, 8> registry{{
      {"scenario_fine_grained", "rho0, evolution",
       "diagonal entropy production under unitary driving (fine-grained energy measurement)"},
      {"scenario_coarse_grained", "rho0, blocks, evolution",
       "observational entropy production under unitary driving (coarse-grained energy measurement)"},
      {"scenario_open_system", "rho_S0, rho_E0, U_SE, knowledge, [H_E]",
       "system-environment entropy production by environment knowledge grade; flux split"},
      {"scenario_joint_coarse", "rho_SE0, cg_E, U_SE",
       "joint vs local coarse measurement of system and environment; classical mutual information gap"},
      {"scenario_one_to_one", "channel, rho",
       "one-to-one channels: vanishing entropy production and entropy change through a dilation"},
      {"scenario_dephasing_channel", "basis, rho", "complete dephasing channel; relative entropy of coherence"},
      {"scenario_obs_channel", "cg, rho", "coarse-graining channel; observational entropy"},
      {"scenario_maxent", "rho, constraints", "generic maximum-entropy assignment and its entropy production"},
  }};
  return registry;
}

// -- helpers --------------------------------------------------------------------

namespace detail {

inline MaxEntSolution solve_direct(std::vector<LinearConstraint> constraints, int dim, const SolverOptions& opts) {
  ConstraintSet cs;
  cs.input_dim = dim;
  cs.direct = std::move(constraints);
  return solve_mes(cs, opts);
}

inline void append(std::vector<LinearConstraint>& a, std::vector<LinearConstraint> b) {
  for (LinearConstraint& c : b) a.push_back(std::move(c));
}

inline double offdiagonal_max(const Matrix& m) {
  Matrix off = m;
  off.diagonal().setZero();
  return max_abs(off);
}

}  // namespace detail

// -- closed-system scenarios -----------------------------------------------------

// Fine-grained energy measurement after unitary driving. rho0 must be diagonal in
// the eigenbasis of the initial Hamiltonian.
inline ScenarioReport scenario_fine_grained(const DensityMatrix& rho0, const EvolutionSpec& spec,
                                            const ScenarioOptions& opts = {}) {
  spec.validate();
  require(rho0.dim() == spec.dim(), ErrorKind::invalid_input, "state and Hamiltonian dimensions differ");
  const Basis basis0 = Basis::eigenbasis(spec.initial_hamiltonian());
  require(detail::offdiagonal_max(basis0.vectors().adjoint() * rho0.matrix() * basis0.vectors()) <= 1e-9,
          ErrorKind::precondition, "initial state is not diagonal in the initial energy basis");
  const Matrix u = propagate(spec);
  const DensityMatrix rho_t = conjugate(u, rho0);
  const Basis basis_t = Basis::eigenbasis(spec.final_hamiltonian());

  ScenarioReport r;
  r.scenario_id = "scenario_fine_grained";
  r.seed = opts.seed;
  r.tolerance = opts.tolerance;
  Digest dg;
  dg.add(rho0.matrix()).add(spec.total_time).add(static_cast<std::int64_t>(spec.steps));
  for (const HamiltonianPoint& p : spec.schedule) dg.add(p.time).add(p.hamiltonian.matrix());
  r.inputs_digest = dg.value();

  const double sd0 = diagonal_entropy(rho0, basis0);
  const double sdt = diagonal_entropy(rho_t, basis_t);
  const double closed = sdt - sd0;

  const MaxEntSolution mes_t = detail::solve_direct(population_constraints(basis_t, rho_t), rho0.dim(), opts.solver);
  const MaxEntSolution mes_0 = detail::solve_direct(population_constraints(basis0, rho0), rho0.dim(), opts.solver);
  const double sigma = entropy_production(rho_t, mes_t);
  const Matrix dephased = basis_t.vectors() * basis_t.populations(rho_t.matrix()).cast<Complex>().asDiagonal() *
                          basis_t.vectors().adjoint();

  r.converged = mes_t.converged && mes_0.converged;
  r.add("sigma_closed_form", closed);
  r.add("sigma_solver", sigma, closed);
  r.add("sigma_relative_entropy_form", sdt - von_neumann_entropy(rho_t), closed);
  r.add("diagonal_entropy_initial", sd0);
  r.add("diagonal_entropy_final", sdt);
  r.add("von_neumann_initial", von_neumann_entropy(rho0));
  r.add("von_neumann_final", von_neumann_entropy(rho_t), von_neumann_entropy(rho0));
  r.add("mes_entropy_change", von_neumann_entropy(mes_t.state) - von_neumann_entropy(mes_0.state), sigma);
  r.add_delta("mes_trace_distance", trace_distance(mes_t.state.matrix(), dephased));
  r.add("solver_iterations", mes_t.iterations);
  return r;
}

// Coarse-grained energy measurement after unitary driving. Projectors group the
// ascending energy eigenvectors into consecutive blocks of the given sizes.
inline ScenarioReport scenario_coarse_grained(const DensityMatrix& rho0, const std::vector<int>& blocks,
                                              const EvolutionSpec& spec, const ScenarioOptions& opts = {}) {
  spec.validate();
  require(rho0.dim() == spec.dim(), ErrorKind::invalid_input, "state and Hamiltonian dimensions differ");
  const CoarseGraining cg0(Basis::eigenbasis(spec.initial_hamiltonian()), blocks);
  const CoarseGraining cgt(Basis::eigenbasis(spec.final_hamiltonian()), blocks);
  const RealVector p0 = cg0.probabilities(rho0.matrix());
  require(detail::max_abs(cg0.block_uniform(p0) - rho0.matrix()) <= 1e-9, ErrorKind::precondition,
          "initial state is not uniform within the initial energy blocks");
  const Matrix u = propagate(spec);
  const DensityMatrix rho_t = conjugate(u, rho0);

  ScenarioReport r;
  r.scenario_id = "scenario_coarse_grained";
  r.seed = opts.seed;
  r.tolerance = opts.tolerance;
  Digest dg;
  dg.add(rho0.matrix()).add(spec.total_time).add(static_cast<std::int64_t>(spec.steps));
  for (int b : blocks) dg.add(static_cast<std::int64_t>(b));
  for (const HamiltonianPoint& p : spec.schedule) dg.add(p.time).add(p.hamiltonian.matrix());
  r.inputs_digest = dg.value();

  const double so0 = observational_entropy(rho0, cg0);
  const double sot = observational_entropy(rho_t, cgt);
  const double closed = sot - so0;
  const MaxEntSolution mes_t = detail::solve_direct(coarse_population_constraints(cgt, rho_t), rho0.dim(), opts.solver);
  const MaxEntSolution mes_0 = detail::solve_direct(coarse_population_constraints(cg0, rho0), rho0.dim(), opts.solver);
  const double sigma = entropy_production(rho_t, mes_t);

  r.converged = mes_t.converged && mes_0.converged;
  r.add("sigma_closed_form", closed);
  r.add("sigma_solver", sigma, closed);
  r.add("sigma_relative_entropy_form", sot - von_neumann_entropy(rho_t), closed);
  r.add("observational_entropy_initial", so0);
  r.add("observational_entropy_final", sot);
  r.add("von_neumann_initial", von_neumann_entropy(rho0));
  r.add("von_neumann_final", von_neumann_entropy(rho_t), von_neumann_entropy(rho0));
  r.add("mes_entropy_change", von_neumann_entropy(mes_t.state) - von_neumann_entropy(mes_0.state), sigma);
  r.add_delta("mes_trace_distance",
              trace_distance(mes_t.state.matrix(), cgt.block_uniform(cgt.probabilities(rho_t.matrix()))));
  r.add("solver_iterations", mes_t.iterations);
  return r;
}

// -- open system --------------------------------------------------------------------

enum class Knowledge { none, energy, full_initial, full_final_local };

inline std::string_view to_string(Knowledge k) {
  switch (k) {
    case Knowledge::none: return "none";
    case Knowledge::energy: return "energy";
    case Knowledge::full_initial: return "full_initial";
    case Knowledge::full_final_local: return "full_final_local";
  }
  return "unknown";
}

struct OpenSystemInput {
  DensityMatrix rho_s0;
  DensityMatrix rho_e0;
  Matrix u_se;
  std::optional<HermitianOperator> h_env;  // required for the energy grade
  std::vector<Knowledge> knowledge{Knowledge::none, Knowledge::full_initial, Knowledge::full_final_local};
};

// System S interacting unitarily with environment E from rho_S0 (x) rho_E0.
// For each knowledge grade: Sigma = S(rho_SE || mes) and the flux
// Phi = -dS_E - tr{rho_SE (ln rho_S (x) rho_E - ln mes)}, so that dS_S = Sigma + Phi.
inline ScenarioReport scenario_open_system(const OpenSystemInput& in, const ScenarioOptions& opts = {}) {
  const BipartiteDims dims{in.rho_s0.dim(), in.rho_e0.dim()};
  const int n = dims.total();
  require(in.u_se.rows() == n && in.u_se.cols() == n, ErrorKind::invalid_input, "interaction unitary has wrong dimension");
  require(is_unitary(in.u_se, 1e-9), ErrorKind::invalid_input, "interaction is not unitary");
  if (in.h_env) require(in.h_env->dim() == dims.environment, ErrorKind::invalid_input, "environment Hamiltonian has wrong dimension");

  const DensityMatrix rho_se0 = tensor(in.rho_s0, in.rho_e0);
  const DensityMatrix rho_se = conjugate(in.u_se, rho_se0);
  const DensityMatrix rho_s = partial_trace(rho_se, dims, Subsystem::system);
  const DensityMatrix rho_e = partial_trace(rho_se, dims, Subsystem::environment);

  ScenarioReport r;
  r.scenario_id = "scenario_open_system";
  r.seed = opts.seed;
  r.tolerance = opts.tolerance;
  Digest dg;
  dg.add(in.rho_s0.matrix()).add(in.rho_e0.matrix()).add(in.u_se);
  if (in.h_env) dg.add(in.h_env->matrix());
  for (Knowledge k : in.knowledge) dg.add(std::string(to_string(k)));
  r.inputs_digest = dg.value();

  const double s_s0 = von_neumann_entropy(in.rho_s0);
  const double s_e0 = von_neumann_entropy(in.rho_e0);
  const double s_s = von_neumann_entropy(rho_s);
  const double s_e = von_neumann_entropy(rho_e);
  const double ds_s = s_s - s_s0;
  const double ds_e = s_e - s_e0;
  const double info = mutual_information(rho_se, dims);
  const double env_rel = relative_entropy(rho_e, in.rho_e0);

  r.add("delta_S_system", ds_s);
  r.add("delta_S_environment", ds_e);
  r.add("mutual_information", info, relative_entropy(rho_se, tensor(rho_s, rho_e)));
  r.add("environment_relative_entropy", env_rel);
  r.add("global_entropy_change", von_neumann_entropy(rho_se) - von_neumann_entropy(rho_se0), 0.0);

  const auto tr_e = std::make_shared<const KrausChannel>(partial_trace_channel(dims, Subsystem::system));
  const auto tr_s = std::make_shared<const KrausChannel>(partial_trace_channel(dims, Subsystem::environment));
  const auto s_tomography = routed_tomography(tr_e, rho_s, "system_tomography");

  std::optional<double> sigma_full_initial;
  std::optional<double> sigma_final_local;
  bool converged = true;

  for (Knowledge grade : in.knowledge) {
    const std::string g(to_string(grade));
    ConstraintSet cs;
    cs.input_dim = n;
    cs.routed = s_tomography;
    DensityMatrix oracle;
    switch (grade) {
      case Knowledge::none:
        oracle = tensor(rho_s, DensityMatrix::maximally_mixed(dims.environment));
        break;
      case Knowledge::energy: {
        require(in.h_env.has_value(), ErrorKind::invalid_input, "energy knowledge grade needs the environment Hamiltonian");
        const double e0 = measure(*in.h_env, in.rho_e0);
        cs.direct.push_back({tensor(HermitianOperator::identity(dims.system), *in.h_env), e0, "environment_energy"});
        const double beta0 = solve_beta(*in.h_env, e0);
        const DensityMatrix gibbs = gibbs_state(*in.h_env, beta0);
        oracle = tensor(rho_s, gibbs);
        r.add("beta0", beta0);
        const double de_e = measure(*in.h_env, rho_e) - e0;
        r.add("delta_E_environment", de_e);
        if (trace_distance(gibbs, in.rho_e0) < 1e-9) r.add("sigma_energy_thermodynamic", ds_s + beta0 * de_e);
        break;
      }
      case Knowledge::full_initial:
        for (RoutedConstraint& c : routed_tomography(tr_s, in.rho_e0, "initial_environment_tomography")) cs.routed.push_back(std::move(c));
        oracle = tensor(rho_s, in.rho_e0);
        break;
      case Knowledge::full_final_local:
        for (RoutedConstraint& c : routed_tomography(tr_s, rho_e, "final_environment_tomography")) cs.routed.push_back(std::move(c));
        oracle = tensor(rho_s, rho_e);
        break;
    }
    const MaxEntSolution mes = solve_mes(cs, opts.solver);
    converged = converged && mes.converged;
    // knowledge about the initial environment is prior information, so rho_SE
    // need not reproduce those targets; use the relative entropy directly
    const double sigma = relative_entropy(rho_se, mes.state);
    const double closed = relative_entropy(rho_se, oracle);
    const double phi = -ds_e + (s_s + s_e) - cross_entropy(rho_se, mes.state);
    r.add("sigma_" + g, sigma, closed);
    r.add("phi_" + g, phi);
    r.add_delta("closure_" + g, ds_s - (sigma + phi));
    r.add_delta("mes_trace_distance_" + g, trace_distance(mes.state, oracle));
    if (grade == Knowledge::energy && r.has("sigma_energy_thermodynamic")) {
      r.add("sigma_energy_thermodynamic_gap", sigma - r.value("sigma_energy_thermodynamic"), 0.0);
    }
    if (grade == Knowledge::full_initial) {
      sigma_full_initial = sigma;
      r.add("sigma_full_initial_decomposition", env_rel + info, sigma);
    }
    if (grade == Knowledge::full_final_local) {
      sigma_final_local = sigma;
      r.add("sigma_full_final_local_vs_mutual_information", info, sigma);
    }
  }
  if (sigma_full_initial && sigma_final_local) {
    r.add("grade_gap", *sigma_full_initial - *sigma_final_local, env_rel);
  }
  r.converged = converged;
  return r;
}

// Joint coarse measurement {|s_i><s_i| (x) Pi_j} vs local measurements on S and E.
// rho_SE0 must be rho_S0 (x) sum_j p_j Pi_j / V_j.
inline ScenarioReport scenario_joint_coarse(const DensityMatrix& rho_se0, const CoarseGraining& cg_env, const Matrix& u_se,
                                            const ScenarioOptions& opts = {}) {
  const int de = cg_env.dim();
  require(de >= 1 && rho_se0.dim() % de == 0, ErrorKind::invalid_input, "state dimension is not a multiple of the environment dimension");
  const BipartiteDims dims{rho_se0.dim() / de, de};
  require(u_se.rows() == dims.total() && u_se.cols() == dims.total(), ErrorKind::invalid_input, "interaction unitary has wrong dimension");
  require(is_unitary(u_se, 1e-9), ErrorKind::invalid_input, "interaction is not unitary");
  const DensityMatrix rho_s0 = partial_trace(rho_se0, dims, Subsystem::system);
  const DensityMatrix rho_e0 = partial_trace(rho_se0, dims, Subsystem::environment);
  require(detail::max_abs(tensor(rho_s0.matrix(), rho_e0.matrix()) - rho_se0.matrix()) <= 1e-9, ErrorKind::precondition,
          "initial state is not a product state");
  require(detail::max_abs(cg_env.block_uniform(cg_env.probabilities(rho_e0.matrix())) - rho_e0.matrix()) <= 1e-9,
          ErrorKind::precondition, "initial environment state is not uniform within its energy blocks");

  const DensityMatrix rho_se = conjugate(u_se, rho_se0);
  const DensityMatrix rho_s = partial_trace(rho_se, dims, Subsystem::system);
  const DensityMatrix rho_e = partial_trace(rho_se, dims, Subsystem::environment);
  const Basis s_basis0 = Basis::eigenbasis(rho_s0.hermitian());
  const Basis s_basis = Basis::eigenbasis(rho_s.hermitian());

  auto joint_cg = [&](const Basis& sb) {
    std::vector<Matrix> projectors;
    for (int i = 0; i < dims.system; ++i)
      for (int j = 0; j < cg_env.size(); ++j) projectors.push_back(tensor(sb.projector(i), cg_env.projector(j)));
    return CoarseGraining(projectors);
  };
  const CoarseGraining cg_joint0 = joint_cg(s_basis0);
  const CoarseGraining cg_joint = joint_cg(s_basis);

  ScenarioReport r;
  r.scenario_id = "scenario_joint_coarse";
  r.seed = opts.seed;
  r.tolerance = opts.tolerance;
  Digest dg;
  dg.add(rho_se0.matrix()).add(u_se);
  for (const Matrix& p : cg_env.projectors()) dg.add(p);
  r.inputs_digest = dg.value();

  // outcome table p_ij in the same ordering as the joint projectors
  RealMatrix table(dims.system, cg_env.size());
  const RealVector pj = cg_joint.probabilities(rho_se.matrix());
  for (int i = 0; i < dims.system; ++i)
    for (int j = 0; j < cg_env.size(); ++j) table(i, j) = pj(i * cg_env.size() + j);
  const JointOutcomeTable outcomes(table);
  const double ic = classical_mutual_information(outcomes);

  const double joint_closed = observational_entropy(rho_se, cg_joint) - observational_entropy(rho_se0, cg_joint0);
  const double local_closed = (von_neumann_entropy(rho_s) - von_neumann_entropy(rho_s0)) +
                              (observational_entropy(rho_e, cg_env) - observational_entropy(rho_e0, cg_env));

  const MaxEntSolution mes_joint =
      detail::solve_direct(coarse_population_constraints(cg_joint, rho_se, "joint_population"), dims.total(), opts.solver);
  std::vector<LinearConstraint> local;
  {
    const RealVector s_pop = s_basis.populations(rho_s.matrix());
    for (int i = 0; i < dims.system; ++i)
      local.push_back({HermitianOperator(tensor(s_basis.projector(i), Matrix::Identity(de, de))), s_pop(i),
                       "system_population[" + std::to_string(i) + "]"});
    const RealVector e_pop = cg_env.probabilities(rho_e.matrix());
    for (int j = 0; j < cg_env.size(); ++j)
      local.push_back({HermitianOperator(tensor(Matrix::Identity(dims.system, dims.system), cg_env.projector(j))), e_pop(j),
                       "environment_shell[" + std::to_string(j) + "]"});
  }
  const MaxEntSolution mes_local = detail::solve_direct(std::move(local), dims.total(), opts.solver);
  const double sigma_joint = entropy_production(rho_se, mes_joint);
  const double sigma_local = entropy_production(rho_se, mes_local);

  const Matrix joint_oracle = cg_joint.block_uniform(pj);
  const Matrix local_oracle = tensor(rho_s.matrix(), cg_env.block_uniform(cg_env.probabilities(rho_e.matrix())));

  r.converged = mes_joint.converged && mes_local.converged;
  r.add("sigma_joint", sigma_joint, joint_closed);
  r.add("sigma_local", sigma_local, local_closed);
  r.add("gap", sigma_local - sigma_joint, ic);
  r.add("classical_mutual_information", ic);
  r.add_delta("mes_trace_distance_joint", trace_distance(mes_joint.state.matrix(), joint_oracle));
  r.add_delta("mes_trace_distance_local", trace_distance(mes_local.state.matrix(), local_oracle));
  r.add("global_entropy_change", von_neumann_entropy(rho_se) - von_neumann_entropy(rho_se0), 0.0);
  return r;
}

// -- channel scenarios ------------------------------------------------------------

// Injective square channel: (a) complete output tomography pins the MES to rho,
// so Sigma vanishes; (b) the entropy change S(L(rho)) - S(rho) obtained as a
// relative entropy through the Stinespring dilation,
//   S(U(rho (x) |0><0|)U^dagger || L(rho) (x) I_A/d_A) - ln d_A,
// the pure ancilla reference contributing zero entropy.
inline ScenarioReport scenario_one_to_one(const KrausChannel& ch, const DensityMatrix& rho, const ScenarioOptions& opts = {}) {
  require(ch.in_dim() == ch.out_dim(), ErrorKind::unsupported, "one-to-one scenario needs a square channel");
  require(is_injective(ch), ErrorKind::unsupported, "channel is not injective");
  require(rho.dim() == ch.in_dim(), ErrorKind::invalid_input, "state and channel dimensions differ");
  const auto shared = std::make_shared<const KrausChannel>(ch);
  const DensityMatrix out = apply(ch, rho);

  ScenarioReport r;
  r.scenario_id = "scenario_one_to_one";
  r.seed = opts.seed;
  r.tolerance = opts.tolerance;
  Digest dg;
  dg.add(rho.matrix());
  for (const Matrix& k : ch.kraus_ops()) dg.add(k);
  r.inputs_digest = dg.value();

  ConstraintSet cs;
  cs.input_dim = rho.dim();
  cs.routed = routed_tomography(shared, out);
  const MaxEntSolution mes = solve_mes(cs, opts.solver);
  const double sigma = entropy_production(rho, mes);

  const DilationRecord rec = stinespring_dilation(ch);
  const DensityMatrix global = dilated_state(rec, rho);
  const DensityMatrix marginal = partial_trace(global, {rec.system_dim, rec.ancilla_dim}, Subsystem::system);
  const double dilation_route =
      relative_entropy(global, tensor(marginal, DensityMatrix::maximally_mixed(rec.ancilla_dim))) -
      std::log(static_cast<double>(rec.ancilla_dim));
  const double direct = von_neumann_entropy(out) - von_neumann_entropy(rho);

  r.converged = mes.converged;
  r.add("sigma_solver", sigma, 0.0);
  r.add_delta("mes_trace_distance", trace_distance(mes.state, rho));
  r.add("entropy_change_direct", direct);
  r.add("entropy_change_dilation", dilation_route, direct);
  r.add_delta("dilation_roundtrip", detail::max_abs(marginal.matrix() - out.matrix()));
  r.add("ancilla_dim", rec.ancilla_dim);
  return r;
}

namespace detail {

// Channel route (complete output tomography pulled back through the channel) vs
// measurement route (direct populations) vs closed form.
inline void channel_vs_measurement(ScenarioReport& r, const KrausChannel& ch, const DensityMatrix& rho,
                                   std::vector<LinearConstraint> measurement, const Matrix& channel_output,
                                   double closed, const ScenarioOptions& opts) {
  const auto shared = std::make_shared<const KrausChannel>(ch);
  ConstraintSet cs;
  cs.input_dim = rho.dim();
  cs.routed = routed_tomography(shared, DensityMatrix(channel_output));
  const MaxEntSolution via_channel = solve_mes(cs, opts.solver);
  const MaxEntSolution via_measurement = solve_direct(std::move(measurement), rho.dim(), opts.solver);
  const double sigma_channel = entropy_production(rho, via_channel);
  const double sigma_measurement = entropy_production(rho, via_measurement);
  r.converged = via_channel.converged && via_measurement.converged;
  r.add("sigma_closed_form", closed);
  r.add("sigma_channel", sigma_channel, closed);
  r.add("sigma_measurement", sigma_measurement, closed);
  r.add("channel_minus_measurement", sigma_channel - sigma_measurement, 0.0);
  r.add_delta("mes_trace_distance", trace_distance(via_channel.state.matrix(), channel_output));
}

}  // namespace detail

// Complete dephasing in a basis; Sigma equals the relative entropy of coherence S_A - S.
inline ScenarioReport scenario_dephasing_channel(const Basis& basis, const DensityMatrix& rho, const ScenarioOptions& opts = {}) {
  require(basis.dim() == rho.dim(), ErrorKind::invalid_input, "basis and state dimensions differ");
  ScenarioReport r;
  r.scenario_id = "scenario_dephasing_channel";
  r.seed = opts.seed;
  r.tolerance = opts.tolerance;
  r.inputs_digest = Digest().add(basis.vectors()).add(rho.matrix()).value();
  const KrausChannel ch = dephasing_channel(basis);
  const double closed = diagonal_entropy(rho, basis) - von_neumann_entropy(rho);
  detail::channel_vs_measurement(r, ch, rho, population_constraints(basis, rho), ch.apply(rho.matrix()), closed, opts);
  return r;
}

// Coarse-graining channel; Sigma equals S_obs - S.
inline ScenarioReport scenario_obs_channel(const CoarseGraining& cg, const DensityMatrix& rho, const ScenarioOptions& opts = {}) {
  require(cg.dim() == rho.dim(), ErrorKind::invalid_input, "coarse-graining and state dimensions differ");
  ScenarioReport r;
  r.scenario_id = "scenario_obs_channel";
  r.seed = opts.seed;
  r.tolerance = opts.tolerance;
  Digest dg;
  dg.add(rho.matrix());
  for (const Matrix& p : cg.projectors()) dg.add(p);
  r.inputs_digest = dg.value();
  const KrausChannel ch = coarse_graining_channel(cg);
  const double closed = observational_entropy(rho, cg) - von_neumann_entropy(rho);
  detail::channel_vs_measurement(r, ch, rho, coarse_population_constraints(cg, rho), ch.apply(rho.matrix()), closed, opts);
  return r;
}

// Arbitrary constraint set measured on rho.
inline ScenarioReport scenario_maxent(const DensityMatrix& rho, const ConstraintSet& cs, const ScenarioOptions& opts = {}) {
  require(cs.input_dim == rho.dim(), ErrorKind::invalid_input, "state and constraint set dimensions differ");
  ScenarioReport r;
  r.scenario_id = "scenario_maxent";
  r.seed = opts.seed;
  r.tolerance = opts.tolerance;
  Digest dg;
  dg.add(rho.matrix());
  for (const LinearConstraint& c : cs.direct) dg.add(c.op.matrix()).add(c.target);
  for (const RoutedConstraint& c : cs.routed) {
    dg.add(c.op.matrix()).add(c.target);
    for (const Matrix& k : c.channel->kraus_ops()) dg.add(k);
  }
  r.inputs_digest = dg.value();
  const MaxEntSolution mes = solve_mes(cs, opts.solver);
  const double sigma = entropy_production(rho, mes);
  r.converged = mes.converged;
  r.add("sigma", sigma);
  r.add("entropy_state", von_neumann_entropy(rho));
  r.add("entropy_mes", von_neumann_entropy(mes.state));
  r.add_delta("max_residual", mes.max_residual());
  r.add("iterations", mes.iterations);
  r.add("constraints", static_cast<double>(mes.constraints.size()));
  return r;
}

}  // namespace qmaxent
