#include "pdecay/verify.hpp"

#include <cmath>
#include <ostream>

namespace pdecay {

namespace {

nlohmann::json real_or_null(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

nlohmann::json to_json(const CheckResult& c) {
  nlohmann::json j;
  j["name"] = c.name;
  j["passed"] = c.passed;
  j["inapplicable"] = c.inapplicable;
  j["worst_ratio"] = real_or_null(c.worst_ratio);
  j["witness"] = c.witness;
  j["tolerance"] = c.tolerance;
  j["notes"] = c.notes;
  return j;
}

nlohmann::json to_json(const VerificationReport& r) {
  nlohmann::json j;
  j["backend"] = r.backend;
  j["C_P"] = r.c_p;
  j["timestamp"] = r.timestamp;
  j["all_passed"] = r.all_passed();
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : r.checks) checks.push_back(to_json(c));
  j["checks"] = std::move(checks);
  return j;
}

void write_report_csv(std::ostream& out, const VerificationReport& r) {
  out << "name,passed,inapplicable,worst_ratio,witness,tolerance\n";
  for (const auto& c : r.checks) {
    out << csv_field(c.name) << ',' << (c.passed ? "true" : "false") << ','
        << (c.inapplicable ? "true" : "false") << ',' << format_real(c.worst_ratio) << ','
        << csv_field(c.witness) << ',' << format_real(c.tolerance) << '\n';
  }
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "quantity,axis,p,lambda_observed,lambda_bound,K_bound,worst_ratio\n";
  for (const auto& r : rows) {
    out << r.quantity << ',' << format_real(r.axis) << ',' << format_real(r.p) << ','
        << format_real(r.lambda_observed) << ',' << format_real(r.lambda_bound) << ','
        << format_real(r.k_bound) << ',' << format_real(r.worst_ratio) << '\n';
  }
}

}  // namespace pdecay
