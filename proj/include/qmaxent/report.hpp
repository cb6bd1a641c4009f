#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "qmaxent/linalg.hpp"

namespace qmaxent {

// FNV-1a over the raw bytes of the inputs; stable within one build.
class Digest {
 public:
  Digest& add(double x) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &x, sizeof bits);
    return add_bytes(&bits, sizeof bits);
  }
  Digest& add(std::int64_t x) { return add_bytes(&x, sizeof x); }
  Digest& add(const std::string& s) {
    add(static_cast<std::int64_t>(s.size()));
    return add_bytes(s.data(), s.size());
  }
  Digest& add(const Matrix& m) {
    add(static_cast<std::int64_t>(m.rows()));
    add(static_cast<std::int64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      add(m.data()[i].real());
      add(m.data()[i].imag());
    }
    return *this;
  }
  std::uint64_t value() const { return h_; }

 private:
  Digest& add_bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= b[i];
      h_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

struct Quantity {
  std::string name;
  double value = 0.0;
  std::optional<double> oracle_delta;  // |value - independent oracle| when one exists
};

struct ScenarioReport {
  std::string scenario_id;
  std::uint64_t inputs_digest = 0;
  std::uint64_t seed = 0;
  std::vector<Quantity> quantities;
  bool converged = true;
  double tolerance = 1e-7;

  void add(const std::string& name, double value) { quantities.push_back({name, value, std::nullopt}); }
  void add(const std::string& name, double value, double oracle) {
    quantities.push_back({name, value, std::abs(value - oracle)});
  }
  // A quantity that is itself a discrepancy (distance, residual).
  void add_delta(const std::string& name, double delta) { quantities.push_back({name, delta, std::abs(delta)}); }

  const Quantity* find(const std::string& name) const {
    for (const Quantity& q : quantities)
      if (q.name == name) return &q;
    return nullptr;
  }
  bool has(const std::string& name) const { return find(name) != nullptr; }
  double value(const std::string& name) const {
    const Quantity* q = find(name);
    require(q != nullptr, ErrorKind::invalid_input, "report " + scenario_id + " has no quantity '" + name + "'");
    return q->value;
  }
  double oracle_delta(const std::string& name) const {
    const Quantity* q = find(name);
    require(q != nullptr && q->oracle_delta.has_value(), ErrorKind::invalid_input,
            "report " + scenario_id + " has no oracle delta for '" + name + "'");
    return *q->oracle_delta;
  }
  std::map<std::string, double> oracle_deltas() const {
    std::map<std::string, double> out;
    for (const Quantity& q : quantities)
      if (q.oracle_delta) out[q.name] = *q.oracle_delta;
    return out;
  }
  double max_oracle_delta() const {
    double worst = 0.0;
    for (const Quantity& q : quantities)
      if (q.oracle_delta) worst = std::max(worst, *q.oracle_delta);
    return worst;
  }
  bool within_tolerance() const { return max_oracle_delta() < tolerance; }
};

// Lossless float formatting (17 significant digits).
inline std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string format_digest(std::uint64_t d) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(d));
  return buf;
}

inline constexpr const char* csv_header = "scenario,quantity,value,oracle_delta,seed";

inline void write_csv_rows(std::ostream& out, const ScenarioReport& r) {
  for (const Quantity& q : r.quantities) {
    out << r.scenario_id << ',' << q.name << ',' << format_real(q.value) << ','
        << (q.oracle_delta ? format_real(*q.oracle_delta) : std::string()) << ',' << r.seed << '\n';
  }
}

inline void write_csv(std::ostream& out, const std::vector<ScenarioReport>& reports) {
  out << csv_header << '\n';
  for (const ScenarioReport& r : reports) write_csv_rows(out, r);
}

// Structured text: one section per scenario, `key = value` lines.
inline void write_report(std::ostream& out, const ScenarioReport& r) {
  out << '[' << r.scenario_id << "]\n";
  out << "inputs_digest = " << format_digest(r.inputs_digest) << '\n';
  out << "seed = " << r.seed << '\n';
  out << "converged = " << (r.converged ? "true" : "false") << '\n';
  out << "tolerance = " << format_real(r.tolerance) << '\n';
  out << "within_tolerance = " << (r.within_tolerance() ? "true" : "false") << '\n';
  for (const Quantity& q : r.quantities) out << "quantity." << q.name << " = " << format_real(q.value) << '\n';
  for (const Quantity& q : r.quantities)
    if (q.oracle_delta) out << "oracle_delta." << q.name << " = " << format_real(*q.oracle_delta) << '\n';
}

inline void write_reports(std::ostream& out, const std::vector<ScenarioReport>& reports) {
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (i > 0) out << '\n';
    write_report(out, reports[i]);
  }
}

}  // namespace qmaxent
