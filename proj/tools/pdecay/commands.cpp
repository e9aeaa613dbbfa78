#include "commands.hpp"

#include "pdecay/errors.hpp"
#include "pdecay/verify.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <ostream>
#include <sstream>

namespace pdecay::cli {

namespace {

std::filesystem::path output_dir(const RunConfig& c) {
  std::filesystem::path dir(c.out);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

double default_t_end(const RunConfig& c, double gap) { return c.t_end > 0.0 ? c.t_end : 10.0 / gap; }

int ceil_log2(double p) {
  int e = 0;
  const double m = std::frexp(p, &e);
  return m == 0.5 ? e - 1 : e;
}

}  // namespace

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

int cmd_gap(const RunConfig& c, std::ostream& out) {
  const GeneratorRep g = build_backend(c);
  const SpectralDecomposition s = decompose(g);
  const double c_p = poincare_constant(s);
  std::ostringstream rates;
  write_rates_csv(rates, s);
  write_atomic(output_dir(c) / "rates.csv", rates.str());
  out << "gap=" << format_real(spectral_gap(s)) << " C_P=" << format_real(c_p) << '\n';
  return kExitOk;
}

int cmd_bounds(const RunConfig& c, std::ostream& out) {
  double c_p = 0.0;
  if (c.c_p) {
    c_p = *c.c_p;
  } else {
    c_p = poincare_constant(decompose(build_backend(c)));
  }
  nlohmann::json bounds = nlohmann::json::array();
  nlohmann::json dominance = nlohmann::json::array();
  int k_needed = 2;
  for (double p : c.p) {
    const double q = p >= 2.0 ? p : p / (p - 1.0);
    k_needed = std::max(k_needed, ceil_log2(q));
    const std::vector<DecayBound> all = all_bounds(p, c_p);
    for (const auto& b : all) {
      bounds.push_back(to_json(b));
      out << "p=" << format_real(p) << " source=" << to_string(b.source)
          << " lambda=" << format_real(b.lambda) << " K=" << format_real(b.K) << '\n';
    }
    for (std::size_t i = 0; i < all.size(); ++i) {
      for (std::size_t j = 0; j < all.size(); ++j) {
        if (i == j || !dominates(all[i], all[j])) continue;
        dominance.push_back({{"p", p},
                             {"stronger", to_string(all[i].source)},
                             {"weaker", to_string(all[j].source)}});
      }
    }
  }
  nlohmann::json doc;
  doc["C_P"] = c_p;
  doc["bounds"] = std::move(bounds);
  doc["dominance"] = std::move(dominance);
  doc["recursion"] = to_json(c_recursion(c_p, k_needed));
  write_atomic(output_dir(c) / "bounds.json", dump(doc));
  return kExitOk;
}

int cmd_evolve(const RunConfig& c, std::ostream& out) {
  const GeneratorRep g = build_backend(c);
  const SpectralDecomposition s = decompose(g);
  const double gap = spectral_gap(s);
  poincare_constant(s);
  const std::vector<double> times = uniform_time_grid(default_t_end(c, gap), c.t_points);
  const TestFunctionFamily family(s, family_kind_from_string(c.family), c.seed, c.count);
  std::vector<DecayCurve> curves;
  for (const auto& m : family.members()) {
    for (double p : c.p) curves.push_back(decay_curve(s, m.f, p, times, m.id));
  }
  std::ostringstream csv;
  write_curves_csv(csv, curves);
  write_atomic(output_dir(c) / "curves.csv", csv.str());
  out << "curves=" << curves.size() << " times=" << times.size() << '\n';
  return kExitOk;
}

int cmd_verify(const RunConfig& c, std::ostream& out) {
  const GeneratorRep g = build_backend(c);
  SuiteOptions options;
  options.seed = c.seed;
  options.count = c.count;
  options.slack = c.effective_slack();
  options.time_points = c.t_points;
  options.t_end = c.t_end;
  options.extra_bounds = c.extra_bounds;
  nlohmann::json backend = describe_backend(c);
  VerificationReport report = run_verification_suite(g, options, std::move(backend));
  report.timestamp = utc_timestamp();

  const auto dir = output_dir(c);
  write_atomic(dir / "report.json", dump(to_json(report)));
  std::ostringstream csv;
  write_report_csv(csv, report);
  write_atomic(dir / "report.csv", csv.str());

  for (const auto& check : report.checks) {
    const char* status = check.inapplicable ? "SKIP" : (check.passed ? "PASS" : "FAIL");
    out << status << ' ' << check.name << " worst_ratio=" << format_real(check.worst_ratio);
    if (!check.witness.empty()) out << " witness=" << check.witness;
    out << '\n';
  }
  const bool ok = report.all_passed();
  out << (ok ? "all checks passed" : "some checks failed") << '\n';
  return ok ? kExitOk : kExitCheckFailed;
}

int cmd_sweep(const RunConfig& c, std::ostream& out) {
  if (c.sweep_values.empty()) throw UsageError("sweep: empty axis");
  std::vector<SweepRow> rows;
  if (c.sweep_axis == "n") {
    std::vector<int> ns;
    for (double v : c.sweep_values) {
      if (v != std::floor(v) || v < 3.0) throw UsageError("sweep: n values must be integers >= 3");
      ns.push_back(static_cast<int>(v));
    }
    const Potential v = parse_potential(c.potential, c.interval);
    try {
      rows = sweep_grid_resolution(v.v, v.a, v.b, ns, v.continuum_gap);
    } catch (const NonErgodicError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConstructionError(std::string("sweep: ") + e.what());
    }
  } else if (c.sweep_axis == "p") {
    for (double p : c.sweep_values) {
      if (!(p >= 2.0)) throw UsageError("sweep: p values must be >= 2");
    }
    const GeneratorRep g = build_backend(c);
    const SpectralDecomposition s = decompose(g);
    const double gap = 1.0 / poincare_constant(s);
    const std::vector<double> times = uniform_time_grid(default_t_end(c, gap), c.t_points);
    const TestFunctionFamily family(s, family_kind_from_string(c.family), c.seed, c.count);
    rows = sweep_exponent(s, family, c.sweep_values, times);
  } else {
    throw UsageError("sweep: axis must be 'n' or 'p', got '" + c.sweep_axis + "'");
  }
  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  write_atomic(output_dir(c) / "sweep.csv", csv.str());
  out << "rows=" << rows.size() << '\n';
  return kExitOk;
}

}  // namespace pdecay::cli
