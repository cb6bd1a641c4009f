#pragma once

// Declarative run configuration (JSON). Parsing resolves every named object into
// library types and collects all validation issues with their JSON paths.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qmaxent/channels.hpp"
#include "qmaxent/entropy.hpp"
#include "qmaxent/linalg.hpp"
#include "qmaxent/maxent.hpp"
#include "qmaxent/random.hpp"
#include "qmaxent/report.hpp"
#include "qmaxent/scenarios.hpp"

namespace qmaxent::cli {

using Json = nlohmann::ordered_json;

struct ConfigIssue {
  std::string path;
  std::string message;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues)
      : Error(ErrorKind::invalid_input, summarize(issues)), issues_(std::move(issues)) {}
  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  static std::string summarize(const std::vector<ConfigIssue>& issues) {
    std::string s = "configuration has " + std::to_string(issues.size()) + " error(s)";
    for (const ConfigIssue& i : issues) s += "\n  " + (i.path.empty() ? std::string("/") : i.path) + ": " + i.message;
    return s;
  }
  std::vector<ConfigIssue> issues_;
};

using ScenarioRunner = std::function<ScenarioReport(const ScenarioOptions&)>;

struct ScenarioEntry {
  std::string id;
  Json params;
  ScenarioRunner runner;
};

struct OutputSpec {
  std::optional<std::string> dir;
  std::string csv = "results.csv";
  std::string report = "report.txt";
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::optional<BipartiteDims> dims;
  std::map<std::string, HermitianOperator> operators;
  std::map<std::string, Matrix> unitaries;
  std::map<std::string, DensityMatrix> states;
  std::map<std::string, Basis> bases;
  std::map<std::string, CoarseGraining> coarse_grainings;
  std::map<std::string, std::shared_ptr<const KrausChannel>> channels;
  std::vector<ScenarioEntry> scenarios;
  OutputSpec output;
  SolverOptions solver;
  double tolerance = 1e-7;
};

struct ParseOptions {
  std::optional<std::uint64_t> seed;  // overrides the config seed
};

namespace detail {

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  const std::size_t end = std::min(byte > 0 ? byte - 1 : 0, text.size());
  for (std::size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline Json complex_to_json(Complex z) { return Json::array({z.real(), z.imag()}); }

inline Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(complex_to_json(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::uint64_t name_stream(const std::string& name) { return Digest().add(name).value(); }

// Thrown after an issue has been recorded, to abandon the current entry.
struct Skip {};

class Builder {
 public:
  Builder(const Json& root, const ParseOptions& opts) : root_(root), opts_(opts) {}

  RunConfig build() {
    if (!root_.is_object()) {
      issue("", "top level must be an object");
      throw ConfigError(issues_);
    }
    static const std::vector<std::string> known{"seed",   "dims",     "operators", "unitaries",  "states",
                                                "bases",  "coarse_grainings", "channels", "scenarios",
                                                "output", "tolerances"};
    for (const auto& [key, value] : root_.items()) {
      if (std::find(known.begin(), known.end(), key) == known.end()) issue("/" + key, "unknown section '" + key + "'");
    }
    guard([&] { read_seed(); });
    guard([&] { read_dims(); });
    guard([&] { read_tolerances(); });
    guard([&] { read_output(); });
    section("operators", [&](const std::string& n, const Json& j, const std::string& p) { read_operator(n, j, p); });
    section("unitaries", [&](const std::string& n, const Json& j, const std::string& p) { read_unitary(n, j, p); });
    section("states", [&](const std::string& n, const Json& j, const std::string& p) { read_state(n, j, p); });
    section("bases", [&](const std::string& n, const Json& j, const std::string& p) { read_basis(n, j, p); });
    section("coarse_grainings", [&](const std::string& n, const Json& j, const std::string& p) { read_cg(n, j, p); });
    section("channels", [&](const std::string& n, const Json& j, const std::string& p) { read_channel(n, j, p); });
    read_scenarios();
    if (!issues_.empty()) throw ConfigError(issues_);
    return std::move(cfg_);
  }

 private:
  // -- issue bookkeeping --------------------------------------------------------

  void issue(const std::string& path, const std::string& message) { issues_.push_back({path, message}); }
  [[noreturn]] void skip(const std::string& path, const std::string& message) {
    issue(path, message);
    throw Skip{};
  }
  template <class F>
  void guard(F&& f, const std::string& path = "") {
    try {
      f();
    } catch (const Skip&) {
    } catch (const Error& e) {
      issue(path, e.what());
    }
  }
  template <class F>
  void section(const std::string& key, F&& f) {
    if (!root_.contains(key)) return;
    const Json& s = root_.at(key);
    const std::string base = "/" + key;
    if (!s.is_object()) {
      issue(base, "section must be an object of named entries");
      return;
    }
    for (const auto& [name, value] : s.items()) {
      const std::string path = base + "/" + name;
      guard([&] { f(name, value, path); }, path);
    }
  }

  // -- scalar readers -----------------------------------------------------------

  const Json& field(const Json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) skip(path + "/" + key, "missing field '" + key + "'");
    return obj.at(key);
  }
  double real(const Json& j, const std::string& path) {
    if (!j.is_number()) skip(path, "expected a number");
    return j.get<double>();
  }
  int integer(const Json& j, const std::string& path, int min_value = 0) {
    if (!j.is_number_integer()) skip(path, "expected an integer");
    const long long v = j.get<long long>();
    if (v < min_value || v > (1 << 20)) skip(path, "integer out of range");
    return static_cast<int>(v);
  }
  std::string string(const Json& j, const std::string& path) {
    if (!j.is_string()) skip(path, "expected a string");
    return j.get<std::string>();
  }
  Complex complex(const Json& j, const std::string& path) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
      return {j[0].get<double>(), j[1].get<double>()};
    skip(path, "expected a complex number as [re, im]");
  }
  Matrix matrix(const Json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) skip(path, "expected a non-empty array of rows");
    const std::size_t rows = j.size();
    if (!j[0].is_array() || j[0].empty()) skip(path + "/0", "expected a non-empty row");
    const std::size_t cols = j[0].size();
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::string rp = path + "/" + std::to_string(r);
      if (!j[r].is_array() || j[r].size() != cols) skip(rp, "rows must all have " + std::to_string(cols) + " entries");
      for (std::size_t c = 0; c < cols; ++c) m(r, c) = complex(j[r][c], rp + "/" + std::to_string(c));
    }
    return m;
  }
  Vector vector(const Json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) skip(path, "expected a non-empty array");
    Vector v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v(i) = complex(j[i], path + "/" + std::to_string(i));
    return v;
  }
  RealVector reals(const Json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) skip(path, "expected a non-empty array of numbers");
    RealVector v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v(i) = real(j[i], path + "/" + std::to_string(i));
    return v;
  }
  std::vector<int> integers(const Json& j, const std::string& path, int min_value) {
    if (!j.is_array() || j.empty()) skip(path, "expected a non-empty array of integers");
    std::vector<int> v;
    for (std::size_t i = 0; i < j.size(); ++i) v.push_back(integer(j[i], path + "/" + std::to_string(i), min_value));
    return v;
  }

  // Single-key object {"kind": payload}.
  std::pair<std::string, const Json*> kind_of(const Json& j, const std::string& path,
                                              const std::vector<std::string>& kinds) {
    if (!j.is_object()) skip(path, "expected an object");
    for (const std::string& k : kinds)
      if (j.contains(k)) return {k, &j.at(k)};
    std::string list;
    for (const std::string& k : kinds) list += (list.empty() ? "" : ", ") + k;
    skip(path, "entry must have one of: " + list);
  }

  template <class T>
  const T& ref(const std::map<std::string, T>& table, const Json& j, const std::string& path, const char* what) {
    const std::string name = string(j, path);
    auto it = table.find(name);
    if (it == table.end()) skip(path, std::string("unresolved ") + what + " reference '" + name + "'");
    return it->second;
  }
  void expect_dim(const std::string& path, const std::string& what, int actual, int expected) {
    if (actual != expected)
      skip(path, "dimension mismatch: " + what + " has dimension " + std::to_string(actual) + ", expected " +
                     std::to_string(expected));
  }

  Rng rng_for(const std::string& name) { return Rng(derive_seed(cfg_.seed, name_stream(name))); }

  // -- top-level scalars ----------------------------------------------------------

  void read_seed() {
    if (root_.contains("seed")) {
      const Json& j = root_.at("seed");
      if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
        skip("/seed", "seed must be a non-negative integer");
      cfg_.seed = j.get<std::uint64_t>();
    }
    if (opts_.seed) cfg_.seed = *opts_.seed;
  }

  void read_dims() {
    if (!root_.contains("dims")) return;
    const Json& j = root_.at("dims");
    const int s = integer(field(j, "S", "/dims"), "/dims/S", 1);
    const int e = integer(field(j, "E", "/dims"), "/dims/E", 1);
    cfg_.dims = BipartiteDims{s, e};
  }

  void read_tolerances() {
    if (!root_.contains("tolerances")) return;
    const Json& j = root_.at("tolerances");
    if (!j.is_object()) skip("/tolerances", "expected an object");
    for (const auto& [key, value] : j.items()) {
      const std::string p = "/tolerances/" + key;
      if (key == "constraint_tol") {
        cfg_.solver.constraint_tol = positive(value, p);
      } else if (key == "multiplier_cap") {
        cfg_.solver.multiplier_cap = positive(value, p);
      } else if (key == "max_iterations") {
        cfg_.solver.max_iterations = integer(value, p, 1);
      } else if (key == "tolerance") {
        cfg_.tolerance = positive(value, p);
      } else {
        issue(p, "unknown tolerance '" + key + "'");
      }
    }
  }
  double positive(const Json& j, const std::string& path) {
    const double v = real(j, path);
    if (!(v > 0.0) || !std::isfinite(v)) skip(path, "expected a positive finite number");
    return v;
  }

  void read_output() {
    if (!root_.contains("output")) return;
    const Json& j = root_.at("output");
    if (!j.is_object()) skip("/output", "expected an object");
    if (j.contains("dir")) cfg_.output.dir = string(j.at("dir"), "/output/dir");
    if (j.contains("csv")) cfg_.output.csv = string(j.at("csv"), "/output/csv");
    if (j.contains("report")) cfg_.output.report = string(j.at("report"), "/output/report");
  }

  // -- named objects ---------------------------------------------------------------

  HermitianOperator pauli_string(const std::string& s, const std::string& path) {
    if (s.empty()) skip(path, "empty Pauli string");
    std::optional<HermitianOperator> out;
    for (char c : s) {
      HermitianOperator f;
      switch (c) {
        case 'i': case 'I': f = pauli::identity(); break;
        case 'x': case 'X': f = pauli::x(); break;
        case 'y': case 'Y': f = pauli::y(); break;
        case 'z': case 'Z': f = pauli::z(); break;
        default: skip(path, std::string("unknown Pauli factor '") + c + "'");
      }
      out = out ? tensor(*out, f) : f;
    }
    return *out;
  }

  void read_operator(const std::string& name, const Json& j, const std::string& path) {
    const auto [kind, payload] =
        kind_of(j, path, {"matrix", "diag", "pauli", "tensor", "identity", "random_hermitian", "scale"});
    const std::string pp = path + "/" + kind;
    HermitianOperator op;
    if (kind == "matrix") {
      const Matrix m = matrix(*payload, pp);
      if (m.rows() != m.cols()) skip(pp, "operator literal must be square");
      if (qmaxent::detail::hermiticity_defect(m) > tol::hermiticity) skip(pp, "operator literal is not Hermitian");
      op = HermitianOperator(m);
    } else if (kind == "diag") {
      op = HermitianOperator::diagonal(reals(*payload, pp));
    } else if (kind == "pauli") {
      op = pauli_string(string(*payload, pp), pp);
    } else if (kind == "tensor") {
      if (!payload->is_array() || payload->empty()) skip(pp, "expected a list of operator names");
      std::optional<HermitianOperator> acc;
      for (std::size_t i = 0; i < payload->size(); ++i) {
        const HermitianOperator& f = ref(cfg_.operators, (*payload)[i], pp + "/" + std::to_string(i), "operator");
        acc = acc ? tensor(*acc, f) : f;
      }
      op = *acc;
    } else if (kind == "identity") {
      op = HermitianOperator::identity(integer(*payload, pp, 1));
    } else if (kind == "random_hermitian") {
      Rng rng = rng_for(name);
      op = random_hermitian(integer(field(*payload, "dim", pp), pp + "/dim", 1), rng);
    } else {  // scale: {"operator": name, "factor": x}
      const HermitianOperator& base = ref(cfg_.operators, field(*payload, "operator", pp), pp + "/operator", "operator");
      op = HermitianOperator(real(field(*payload, "factor", pp), pp + "/factor") * base.matrix());
    }
    cfg_.operators.emplace(name, std::move(op));
  }

  void read_unitary(const std::string& name, const Json& j, const std::string& path) {
    const auto [kind, payload] = kind_of(j, path, {"matrix", "exp", "random", "identity", "tensor"});
    const std::string pp = path + "/" + kind;
    Matrix u;
    if (kind == "matrix") {
      u = matrix(*payload, pp);
      if (u.rows() != u.cols() || !is_unitary(u, 1e-9)) skip(pp, "unitary literal is not unitary");
    } else if (kind == "exp") {
      const HermitianOperator& h = ref(cfg_.operators, field(*payload, "hamiltonian", pp), pp + "/hamiltonian", "operator");
      u = evolution_operator(h, real(field(*payload, "time", pp), pp + "/time"));
    } else if (kind == "random") {
      Rng rng = rng_for(name);
      u = random_unitary(integer(field(*payload, "dim", pp), pp + "/dim", 1), rng);
    } else if (kind == "identity") {
      const int d = integer(*payload, pp, 1);
      u = Matrix::Identity(d, d);
    } else {
      if (!payload->is_array() || payload->empty()) skip(pp, "expected a list of unitary names");
      u = Matrix::Identity(1, 1);
      for (std::size_t i = 0; i < payload->size(); ++i)
        u = tensor(u, ref(cfg_.unitaries, (*payload)[i], pp + "/" + std::to_string(i), "unitary"));
    }
    cfg_.unitaries.emplace(name, std::move(u));
  }

  void read_state(const std::string& name, const Json& j, const std::string& path) {
    const auto [kind, payload] = kind_of(
        j, path, {"matrix", "pure", "diag", "thermal", "maximally_mixed", "random", "product", "basis_state"});
    const std::string pp = path + "/" + kind;
    DensityMatrix rho;
    if (kind == "matrix") {
      const Matrix m = matrix(*payload, pp);
      if (m.rows() != m.cols()) skip(pp, "state literal must be square");
      if (qmaxent::detail::hermiticity_defect(m) > tol::hermiticity) skip(pp, "state literal is not Hermitian");
      rho = DensityMatrix(m);
    } else if (kind == "pure") {
      const Vector v = vector(*payload, pp);
      if (v.norm() == 0.0) skip(pp, "pure state vector is zero");
      rho = DensityMatrix::pure(v);
    } else if (kind == "diag") {
      rho = DensityMatrix::diagonal(reals(*payload, pp));
    } else if (kind == "thermal") {
      const HermitianOperator& h = ref(cfg_.operators, field(*payload, "hamiltonian", pp), pp + "/hamiltonian", "operator");
      rho = gibbs_state(h, real(field(*payload, "beta", pp), pp + "/beta"));
    } else if (kind == "maximally_mixed") {
      rho = DensityMatrix::maximally_mixed(integer(*payload, pp, 1));
    } else if (kind == "random") {
      const int d = integer(field(*payload, "dim", pp), pp + "/dim", 1);
      const int rank = payload->contains("rank") ? integer(payload->at("rank"), pp + "/rank", 0) : 0;
      if (rank > d) skip(pp + "/rank", "rank exceeds dimension");
      Rng rng = rng_for(name);
      rho = random_density_matrix(d, rng, rank);
    } else if (kind == "product") {
      if (!payload->is_array() || payload->empty()) skip(pp, "expected a list of state names");
      std::optional<DensityMatrix> acc;
      for (std::size_t i = 0; i < payload->size(); ++i) {
        const DensityMatrix& f = ref(cfg_.states, (*payload)[i], pp + "/" + std::to_string(i), "state");
        acc = acc ? tensor(*acc, f) : f;
      }
      rho = *acc;
    } else {
      const int d = integer(field(*payload, "dim", pp), pp + "/dim", 1);
      const int idx = integer(field(*payload, "index", pp), pp + "/index", 0);
      if (idx >= d) skip(pp + "/index", "index out of range");
      rho = DensityMatrix::basis_state(d, idx);
    }
    cfg_.states.emplace(name, std::move(rho));
  }

  void read_basis(const std::string& name, const Json& j, const std::string& path) {
    const auto [kind, payload] = kind_of(j, path, {"computational", "eigenbasis", "matrix"});
    const std::string pp = path + "/" + kind;
    Basis b;
    if (kind == "computational") {
      b = Basis::computational(integer(*payload, pp, 1));
    } else if (kind == "eigenbasis") {
      const std::string target = string(*payload, pp);
      if (auto it = cfg_.operators.find(target); it != cfg_.operators.end()) {
        b = Basis::eigenbasis(it->second);
      } else if (auto st = cfg_.states.find(target); st != cfg_.states.end()) {
        b = Basis::eigenbasis(st->second.hermitian());
      } else {
        skip(pp, "unresolved operator or state reference '" + target + "'");
      }
    } else {
      const Matrix v = matrix(*payload, pp);
      if (v.rows() != v.cols() || !is_unitary(v, 1e-9)) skip(pp, "basis columns must be orthonormal");
      b = Basis(v);
    }
    cfg_.bases.emplace(name, std::move(b));
  }

  void read_cg(const std::string& name, const Json& j, const std::string& path) {
    if (j.is_object() && j.contains("projectors")) {
      const Json& ps = j.at("projectors");
      const std::string pp = path + "/projectors";
      if (!ps.is_array() || ps.empty()) skip(pp, "expected a list of projector matrices");
      std::vector<Matrix> projectors;
      for (std::size_t i = 0; i < ps.size(); ++i) projectors.push_back(matrix(ps[i], pp + "/" + std::to_string(i)));
      cfg_.coarse_grainings.emplace(name, CoarseGraining(projectors));
      return;
    }
    const Basis& b = ref(cfg_.bases, field(j, "basis", path), path + "/basis", "basis");
    const std::vector<int> blocks = integers(field(j, "blocks", path), path + "/blocks", 1);
    cfg_.coarse_grainings.emplace(name, CoarseGraining(b, blocks));
  }

  void read_channel(const std::string& name, const Json& j, const std::string& path) {
    const auto [kind, payload] =
        kind_of(j, path, {"named", "kraus", "dephasing", "coarse_graining", "partial_trace", "unitary", "identity"});
    const std::string pp = path + "/" + kind;
    std::optional<KrausChannel> ch;
    if (kind == "named") {
      const std::string family = string(*payload, pp);
      std::optional<OneToOneKind> k;
      for (OneToOneKind c : {OneToOneKind::bit_flip, OneToOneKind::phase_flip, OneToOneKind::depolarizing,
                             OneToOneKind::amplitude_damping})
        if (to_string(c) == family) k = c;
      if (!k) skip(pp, "unknown channel family '" + family + "'");
      ch = named_one_to_one(*k, real(field(j, "parameter", path), path + "/parameter"));
    } else if (kind == "kraus") {
      if (!payload->is_array() || payload->empty()) skip(pp, "expected a list of Kraus matrices");
      std::vector<Matrix> ops;
      for (std::size_t i = 0; i < payload->size(); ++i) ops.push_back(matrix((*payload)[i], pp + "/" + std::to_string(i)));
      ch = KrausChannel(std::move(ops));
    } else if (kind == "dephasing") {
      ch = dephasing_channel(ref(cfg_.bases, *payload, pp, "basis"));
    } else if (kind == "coarse_graining") {
      ch = coarse_graining_channel(ref(cfg_.coarse_grainings, *payload, pp, "coarse-graining"));
    } else if (kind == "partial_trace") {
      const std::string keep = string(field(*payload, "keep", pp), pp + "/keep");
      if (keep != "system" && keep != "environment") skip(pp + "/keep", "keep must be 'system' or 'environment'");
      BipartiteDims d;
      if (payload->contains("S") || payload->contains("E")) {
        d = {integer(field(*payload, "S", pp), pp + "/S", 1), integer(field(*payload, "E", pp), pp + "/E", 1)};
      } else if (cfg_.dims) {
        d = *cfg_.dims;
      } else {
        skip(pp, "partial trace needs S and E dimensions (here or in /dims)");
      }
      ch = partial_trace_channel(d, keep == "system" ? Subsystem::system : Subsystem::environment);
    } else if (kind == "unitary") {
      ch = unitary_channel(ref(cfg_.unitaries, *payload, pp, "unitary"));
    } else {
      ch = identity_channel(integer(*payload, pp, 1));
    }
    cfg_.channels.emplace(name, std::make_shared<const KrausChannel>(std::move(*ch)));
  }

  // -- scenarios ---------------------------------------------------------------------

  void read_scenarios() {
    if (!root_.contains("scenarios")) {
      issue("/scenarios", "missing section 'scenarios'");
      return;
    }
    const Json& list = root_.at("scenarios");
    if (!list.is_array()) {
      issue("/scenarios", "expected a list of scenarios");
      return;
    }
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string path = "/scenarios/" + std::to_string(i);
      guard([&] { read_scenario(list[i], path); }, path);
    }
  }

  EvolutionSpec evolution(const Json& j, const std::string& path) {
    EvolutionSpec spec;
    const Json& sched = field(j, "schedule", path);
    const std::string sp = path + "/schedule";
    if (!sched.is_array() || sched.empty()) skip(sp, "expected a non-empty list of {time, hamiltonian}");
    for (std::size_t i = 0; i < sched.size(); ++i) {
      const std::string ip = sp + "/" + std::to_string(i);
      const double t = real(field(sched[i], "time", ip), ip + "/time");
      const HermitianOperator& h = ref(cfg_.operators, field(sched[i], "hamiltonian", ip), ip + "/hamiltonian", "operator");
      if (!spec.schedule.empty()) {
        expect_dim(ip + "/hamiltonian", "Hamiltonian", h.dim(), spec.schedule.front().hamiltonian.dim());
        if (t < spec.schedule.back().time) skip(ip + "/time", "schedule times must be ascending");
      }
      spec.schedule.push_back({t, h});
    }
    spec.total_time = j.contains("total_time") ? real(j.at("total_time"), path + "/total_time") : spec.schedule.back().time;
    if (spec.total_time < 0.0) skip(path + "/total_time", "total time must be non-negative");
    if (j.contains("steps")) spec.steps = integer(j.at("steps"), path + "/steps", 1);
    return spec;
  }

  Knowledge knowledge(const Json& j, const std::string& path) {
    const std::string s = string(j, path);
    for (Knowledge k : {Knowledge::none, Knowledge::energy, Knowledge::full_initial, Knowledge::full_final_local})
      if (to_string(k) == s) return k;
    skip(path, "unknown knowledge grade '" + s + "'");
  }

  // Constraint presets; a missing target is measured on the state (or on the channel output).
  void constraint(const Json& j, const std::string& path, const DensityMatrix& rho, ConstraintSet& cs) {
    if (!j.is_object()) skip(path, "expected a constraint object");
    std::shared_ptr<const KrausChannel> channel;
    if (j.contains("channel")) {
      channel = ref(cfg_.channels, j.at("channel"), path + "/channel", "channel");
      expect_dim(path + "/channel", "channel input", channel->in_dim(), rho.dim());
    }
    const int out_dim = channel ? channel->out_dim() : rho.dim();
    const DensityMatrix measured = channel ? apply(*channel, rho) : rho;
    std::optional<double> target;
    if (j.contains("target")) target = real(j.at("target"), path + "/target");

    std::vector<LinearConstraint> made;
    const std::string preset = j.contains("preset") ? string(j.at("preset"), path + "/preset") : std::string("operator");
    const std::string label = j.contains("label") ? string(j.at("label"), path + "/label") : preset;
    auto single = [&](HermitianOperator op) {
      const double t = target ? *target : measure(op, measured);
      made.push_back({std::move(op), t, label});
    };
    if (preset == "populations" || preset == "population") {
      const Basis& b = ref(cfg_.bases, field(j, "basis", path), path + "/basis", "basis");
      expect_dim(path + "/basis", "basis", b.dim(), out_dim);
      if (preset == "populations") {
        if (target) skip(path + "/target", "'populations' measures every target; use 'population' with an index");
        made = population_constraints(b, measured, label);
      } else {
        const int idx = integer(field(j, "index", path), path + "/index", 0);
        if (idx >= b.dim()) skip(path + "/index", "index out of range");
        single(HermitianOperator(b.projector(idx)));
      }
    } else if (preset == "coarse_populations" || preset == "coarse_population") {
      const CoarseGraining& cg = ref(cfg_.coarse_grainings, field(j, "cg", path), path + "/cg", "coarse-graining");
      expect_dim(path + "/cg", "coarse-graining", cg.dim(), out_dim);
      if (preset == "coarse_populations") {
        if (target) skip(path + "/target", "'coarse_populations' measures every target; use 'coarse_population'");
        made = coarse_population_constraints(cg, measured, label);
      } else {
        const int idx = integer(field(j, "index", path), path + "/index", 0);
        if (idx >= cg.size()) skip(path + "/index", "index out of range");
        single(HermitianOperator(cg.projector(idx)));
      }
    } else if (preset == "energy" || preset == "operator") {
      const char* key = preset == "energy" ? "hamiltonian" : "operator";
      const HermitianOperator& op = ref(cfg_.operators, field(j, key, path), path + "/" + key, "operator");
      expect_dim(path + "/" + key, "operator", op.dim(), out_dim);
      single(op);
    } else if (preset == "tomography") {
      if (target) skip(path + "/target", "tomography targets are always measured");
      made = tomography_constraints(measured, label);
    } else {
      skip(path + "/preset", "unknown constraint preset '" + preset + "'");
    }
    for (LinearConstraint& c : made) {
      if (channel) {
        cs.routed.push_back({std::move(c.op), channel, c.target, std::move(c.label)});
      } else {
        cs.direct.push_back(std::move(c));
      }
    }
  }

  void read_scenario(const Json& j, const std::string& path) {
    const std::string id = string(field(j, "id", path), path + "/id");
    const Json empty = Json::object();
    const Json& p = j.contains("params") ? j.at("params") : empty;
    const std::string pp = path + "/params";
    if (!p.is_object()) skip(pp, "params must be an object");
    auto state = [&](const char* key) -> const DensityMatrix& {
      return ref(cfg_.states, field(p, key, pp), pp + "/" + key, "state");
    };
    ScenarioRunner runner;
    if (id == "scenario_fine_grained" || id == "scenario_coarse_grained") {
      const DensityMatrix rho = state("rho0");
      const EvolutionSpec spec = evolution(field(p, "evolution", pp), pp + "/evolution");
      expect_dim(pp + "/rho0", "rho0", rho.dim(), spec.dim());
      if (id == "scenario_fine_grained") {
        runner = [rho, spec](const ScenarioOptions& o) { return scenario_fine_grained(rho, spec, o); };
      } else {
        const std::vector<int> blocks = integers(field(p, "blocks", pp), pp + "/blocks", 1);
        int total = 0;
        for (int b : blocks) total += b;
        expect_dim(pp + "/blocks", "block sizes", total, rho.dim());
        runner = [rho, spec, blocks](const ScenarioOptions& o) { return scenario_coarse_grained(rho, blocks, spec, o); };
      }
    } else if (id == "scenario_open_system") {
      OpenSystemInput in{state("rho_S0"), state("rho_E0"),
                         ref(cfg_.unitaries, field(p, "U_SE", pp), pp + "/U_SE", "unitary"), std::nullopt, {}};
      if (cfg_.dims) {
        expect_dim(pp + "/rho_S0", "rho_S0", in.rho_s0.dim(), cfg_.dims->system);
        expect_dim(pp + "/rho_E0", "rho_E0", in.rho_e0.dim(), cfg_.dims->environment);
      }
      expect_dim(pp + "/U_SE", "U_SE", static_cast<int>(in.u_se.rows()), in.rho_s0.dim() * in.rho_e0.dim());
      if (p.contains("H_E")) {
        in.h_env = ref(cfg_.operators, p.at("H_E"), pp + "/H_E", "operator");
        expect_dim(pp + "/H_E", "H_E", in.h_env->dim(), in.rho_e0.dim());
      }
      if (p.contains("knowledge")) {
        const Json& ks = p.at("knowledge");
        if (!ks.is_array() || ks.empty()) skip(pp + "/knowledge", "expected a non-empty list of knowledge grades");
        for (std::size_t i = 0; i < ks.size(); ++i)
          in.knowledge.push_back(knowledge(ks[i], pp + "/knowledge/" + std::to_string(i)));
      } else {
        in.knowledge = OpenSystemInput{}.knowledge;
      }
      for (Knowledge k : in.knowledge)
        if (k == Knowledge::energy && !in.h_env) skip(pp + "/H_E", "energy knowledge grade needs H_E");
      runner = [in](const ScenarioOptions& o) { return scenario_open_system(in, o); };
    } else if (id == "scenario_joint_coarse") {
      const DensityMatrix rho = state("rho_SE0");
      const CoarseGraining cg = ref(cfg_.coarse_grainings, field(p, "cg_E", pp), pp + "/cg_E", "coarse-graining");
      const Matrix u = ref(cfg_.unitaries, field(p, "U_SE", pp), pp + "/U_SE", "unitary");
      if (rho.dim() % cg.dim() != 0) skip(pp + "/cg_E", "environment dimension does not divide the state dimension");
      expect_dim(pp + "/U_SE", "U_SE", static_cast<int>(u.rows()), rho.dim());
      runner = [rho, cg, u](const ScenarioOptions& o) { return scenario_joint_coarse(rho, cg, u, o); };
    } else if (id == "scenario_one_to_one") {
      const std::shared_ptr<const KrausChannel> ch = ref(cfg_.channels, field(p, "channel", pp), pp + "/channel", "channel");
      const DensityMatrix rho = state("rho");
      expect_dim(pp + "/rho", "rho", rho.dim(), ch->in_dim());
      runner = [ch, rho](const ScenarioOptions& o) { return scenario_one_to_one(*ch, rho, o); };
    } else if (id == "scenario_dephasing_channel") {
      const Basis b = ref(cfg_.bases, field(p, "basis", pp), pp + "/basis", "basis");
      const DensityMatrix rho = state("rho");
      expect_dim(pp + "/rho", "rho", rho.dim(), b.dim());
      runner = [b, rho](const ScenarioOptions& o) { return scenario_dephasing_channel(b, rho, o); };
    } else if (id == "scenario_obs_channel") {
      const CoarseGraining cg = ref(cfg_.coarse_grainings, field(p, "cg", pp), pp + "/cg", "coarse-graining");
      const DensityMatrix rho = state("rho");
      expect_dim(pp + "/rho", "rho", rho.dim(), cg.dim());
      runner = [cg, rho](const ScenarioOptions& o) { return scenario_obs_channel(cg, rho, o); };
    } else if (id == "scenario_maxent") {
      const DensityMatrix rho = state("rho");
      const Json& list = field(p, "constraints", pp);
      if (!list.is_array()) skip(pp + "/constraints", "expected a list of constraints");
      ConstraintSet cs;
      cs.input_dim = rho.dim();
      const std::size_t before = issues_.size();
      for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string cp = pp + "/constraints/" + std::to_string(i);
        guard([&] { constraint(list[i], cp, rho, cs); }, cp);
      }
      if (issues_.size() != before) throw Skip{};
      runner = [rho, cs](const ScenarioOptions& o) { return scenario_maxent(rho, cs, o); };
    } else {
      skip(path + "/id", "unknown scenario id '" + id + "'");
    }
    cfg_.scenarios.push_back({id, p, std::move(runner)});
  }

  const Json& root_;
  ParseOptions opts_;
  RunConfig cfg_;
  std::vector<ConfigIssue> issues_;
};

}  // namespace detail

// Syntax errors report line and column; validation errors report JSON paths.
inline RunConfig parse_config(const std::string& text, const ParseOptions& opts = {}) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte);
    throw ConfigError({{"", "syntax error at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
                                e.what()}});
  }
  return detail::Builder(root, opts).build();
}

// Fully resolved configuration: every named object becomes a literal, so random
// entries are frozen and re-parsing reproduces the same matrices bit for bit.
inline std::string emit(const RunConfig& cfg) {
  using detail::matrix_to_json;
  Json root = Json::object();
  root["seed"] = cfg.seed;
  if (cfg.dims) root["dims"] = {{"S", cfg.dims->system}, {"E", cfg.dims->environment}};
  Json ops = Json::object();
  for (const auto& [name, op] : cfg.operators) ops[name] = {{"matrix", matrix_to_json(op.matrix())}};
  root["operators"] = ops;
  Json us = Json::object();
  for (const auto& [name, u] : cfg.unitaries) us[name] = {{"matrix", matrix_to_json(u)}};
  root["unitaries"] = us;
  Json states = Json::object();
  for (const auto& [name, rho] : cfg.states) states[name] = {{"matrix", matrix_to_json(rho.matrix())}};
  root["states"] = states;
  Json bases = Json::object();
  for (const auto& [name, b] : cfg.bases) bases[name] = {{"matrix", matrix_to_json(b.vectors())}};
  root["bases"] = bases;
  Json cgs = Json::object();
  for (const auto& [name, cg] : cfg.coarse_grainings) {
    Json ps = Json::array();
    for (const Matrix& p : cg.projectors()) ps.push_back(matrix_to_json(p));
    cgs[name] = {{"projectors", ps}};
  }
  root["coarse_grainings"] = cgs;
  Json chs = Json::object();
  for (const auto& [name, ch] : cfg.channels) {
    Json ks = Json::array();
    for (const Matrix& k : ch->kraus_ops()) ks.push_back(matrix_to_json(k));
    chs[name] = {{"kraus", ks}};
  }
  root["channels"] = chs;
  Json sc = Json::array();
  for (const ScenarioEntry& s : cfg.scenarios) sc.push_back({{"id", s.id}, {"params", s.params}});
  root["scenarios"] = sc;
  Json out = {{"csv", cfg.output.csv}, {"report", cfg.output.report}};
  if (cfg.output.dir) out["dir"] = *cfg.output.dir;
  root["output"] = out;
  root["tolerances"] = {{"constraint_tol", cfg.solver.constraint_tol},
                        {"multiplier_cap", cfg.solver.multiplier_cap},
                        {"max_iterations", cfg.solver.max_iterations},
                        {"tolerance", cfg.tolerance}};
  return root.dump(2) + "\n";
}

}  // namespace qmaxent::cli
