#include "pdecay/verify.hpp"

#include "pdecay/errors.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

namespace pdecay {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
/// Floor for checks that hold with equality on single modes.
constexpr double kRoundoffTolerance = 1e-12;

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

std::string at_time(const std::string& id, double t) { return id + "@t=" + fmt(t); }

// |x|^e with the convention |x|^0 = 1, as in the integrands |f|^{p-2} at p = 2.
double weight_pow(double x, double e) { return e == 0.0 ? 1.0 : abs_pow(x, e); }

bool is_power_of_two(double p) {
  int e = 0;
  return std::frexp(p, &e) == 0.5;
}

int log2_exact(double p) {
  int e = 0;
  std::frexp(p, &e);
  return e - 1;
}

void require_slack(double slack) {
  if (!(slack >= 0.0)) throw DomainError("slack must be nonnegative");
}

void require_uniform(std::span<const double> times) {
  if (times.size() < 3 || times.front() != 0.0) {
    throw PreconditionError("need a uniform time grid from 0 with at least 3 points");
  }
  const double step = times[1] - times[0];
  for (std::size_t j = 1; j < times.size(); ++j) {
    if (std::fabs((times[j] - times[j - 1]) - step) > 1e-9 * step) {
      throw PreconditionError("time grid must be uniform");
    }
  }
}

void require_mean_zero(const Observable& f, const std::string& id) {
  const double scale = std::max(1.0, lp_norm(f, 2.0));
  if (std::fabs(mean(f)) > 1e-10 * scale) {
    throw PreconditionError("test function '" + id + "' must have mean zero");
  }
}

double weighted_sum(const Observable& f, const Eigen::VectorXd& integrand) {
  return f.space()->weights().dot(integrand);
}

Eigen::VectorXd pointwise_gamma(const GeneratorRep& g, const Observable& f) {
  return carre_du_champ(g, f, f).values();
}

// Tracks the largest ratio and where it happened.
struct Worst {
  double ratio = kNegInf;
  std::string witness;
  void offer(double r, const std::string& where) {
    // Ratios within 1e-12 of the current worst count as ties; the earlier witness stays.
    if (ratio == kNegInf || r > ratio + 1e-12 * std::fabs(ratio) || std::isnan(r)) {
      ratio = r;
      witness = where;
    }
  }
};

Observable column(const Observable& f, const Eigen::MatrixXd& values, std::size_t j) {
  return f.with_values(values.col(static_cast<Eigen::Index>(j)));
}

Eigen::VectorXd padded(const SpectralDecomposition& s, const std::vector<double>& modes) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(s.size());
  for (std::size_t k = 0; k < modes.size() && static_cast<Eigen::Index>(k) < s.size(); ++k) {
    c[static_cast<Eigen::Index>(k)] = modes[k];
  }
  return c;
}

}  // namespace

CheckResult make_check(std::string name, double worst_ratio, std::string witness,
                       double tolerance) {
  CheckResult r;
  r.name = std::move(name);
  r.worst_ratio = worst_ratio;
  r.witness = std::move(witness);
  r.tolerance = tolerance;
  r.passed = worst_ratio <= 1.0 + tolerance;
  return r;
}

CheckResult inapplicable_check(std::string name, std::string reason, double tolerance) {
  CheckResult r;
  r.name = std::move(name);
  r.worst_ratio = std::numeric_limits<double>::quiet_NaN();
  r.tolerance = tolerance;
  r.inapplicable = true;
  r.notes.push_back(std::move(reason));
  return r;
}

CheckResult combine_checks(std::string name, std::span<const CheckResult> parts) {
  double tol = 0.0;
  bool any = false;
  for (const auto& p : parts) {
    if (!p.inapplicable) {
      tol = std::max(tol, p.tolerance);
      any = true;
    }
  }
  std::vector<std::string> notes;
  for (const auto& p : parts) {
    for (const auto& n : p.notes) notes.push_back(p.name + ": " + n);
  }
  if (!any) {
    CheckResult r = inapplicable_check(std::move(name), "all parts inapplicable", 0.0);
    r.notes.insert(r.notes.end(), notes.begin(), notes.end());
    return r;
  }
  // Rescale each part's excess to the common tolerance so pass/fail is preserved.
  Worst worst;
  for (const auto& p : parts) {
    if (p.inapplicable) continue;
    double r = p.worst_ratio;
    if (r > 1.0) {
      if (p.tolerance > 0.0) {
        r = 1.0 + (r - 1.0) * tol / p.tolerance;
      } else {
        r = 1.0 + tol + (r - 1.0);
      }
    }
    worst.offer(r, p.name + (p.witness.empty() ? "" : ":" + p.witness));
  }
  CheckResult r = make_check(std::move(name), worst.ratio, worst.witness, tol);
  r.notes = std::move(notes);
  return r;
}

std::string to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::random_smooth: return "random-smooth";
    case FamilyKind::eigen_mixtures: return "eigen-mixtures";
    case FamilyKind::polynomial: return "polynomial";
    case FamilyKind::sign_balanced: return "sign-balanced";
    case FamilyKind::nonnegative: return "nonnegative";
  }
  return "?";
}

FamilyKind family_kind_from_string(const std::string& name) {
  for (auto k : {FamilyKind::random_smooth, FamilyKind::eigen_mixtures, FamilyKind::polynomial,
                 FamilyKind::sign_balanced, FamilyKind::nonnegative}) {
    if (to_string(k) == name) return k;
  }
  throw PreconditionError("unknown family kind '" + name + "'");
}

int default_max_mode(const SpectralDecomposition& s) {
  const int n = static_cast<int>(s.size());
  return s.complete() ? std::min(n - 1, 12) : (n - 1) / 2;
}

TestFunctionFamily::TestFunctionFamily(const SpectralDecomposition& s, FamilyKind kind,
                                       std::uint64_t seed, int count, int max_mode)
    : kind_(kind), seed_(seed), max_mode_(max_mode > 0 ? max_mode : default_max_mode(s)),
      space_(s.space()) {
  if (count < 1) throw PreconditionError("test family: count must be >= 1");
  if (max_mode_ < 1) throw PreconditionError("test family: decomposition has no usable modes");
  max_mode_ = std::min<int>(max_mode_, static_cast<int>(s.size()) - 1);

  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(kind)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const int modes = max_mode_;

  auto smooth = [&]() {
    std::vector<double> c(static_cast<std::size_t>(modes) + 1);
    c[0] = normal(rng);
    for (int k = 1; k <= modes; ++k) c[static_cast<std::size_t>(k)] = normal(rng) / k;
    return s.synthesize(padded(s, c));
  };

  members_.reserve(static_cast<std::size_t>(count));
  switch (kind) {
    case FamilyKind::eigen_mixtures: {
      std::vector<std::pair<std::string, std::vector<double>>> fixed;
      fixed.push_back({"e1", {0.0, 1.0}});
      if (modes >= 2) {
        fixed.push_back({"e2", {0.0, 0.0, 1.0}});
        fixed.push_back({"e1+e2", {0.0, 1.0, 1.0}});
      }
      for (auto& [id, c] : fixed) {
        if (static_cast<int>(members_.size()) == count) break;
        members_.push_back({id, s.synthesize(padded(s, c))});
      }
      for (int i = static_cast<int>(members_.size()); i < count; ++i) {
        std::vector<double> c(static_cast<std::size_t>(modes) + 1, 0.0);
        if (i % 2 == 1) {
          const int terms = 1 + static_cast<int>(uniform(rng) * 3.0);
          for (int j = 0; j < terms; ++j) {
            const int k = 1 + static_cast<int>(uniform(rng) * modes) % modes;
            c[static_cast<std::size_t>(k)] += normal(rng);
          }
        } else {
          for (int k = 1; k <= modes; ++k) c[static_cast<std::size_t>(k)] = normal(rng);
        }
        members_.push_back({"mix-" + std::to_string(i), s.synthesize(padded(s, c))});
      }
      break;
    }
    case FamilyKind::random_smooth:
      for (int i = 0; i < count; ++i) members_.push_back({"smooth-" + std::to_string(i), smooth()});
      break;
    case FamilyKind::sign_balanced:
      for (int i = 0; i < count; ++i) {
        const Observable f = smooth();
        members_.push_back({"balanced-" + std::to_string(i), f - weighted_median(f)});
      }
      break;
    case FamilyKind::polynomial: {
      const Eigen::VectorXd& x = space_->points();
      const Observable xs(space_, x);
      const double sd = std::sqrt(variance(xs));
      const Eigen::ArrayXd y = (x.array() - mean(xs)) / (sd > 0.0 ? sd : 1.0);
      for (int i = 0; i < count; ++i) {
        const int degree = 1 + static_cast<int>(uniform(rng) * modes) % modes;
        Eigen::ArrayXd value = Eigen::ArrayXd::Zero(x.size());
        double factorial = 1.0;
        for (int j = 0; j <= degree; ++j) {
          if (j > 0) factorial *= j;
          value += (normal(rng) / factorial) * y.pow(j);
        }
        members_.push_back({"poly-" + std::to_string(i), Observable(space_, value.matrix())});
      }
      break;
    }
    case FamilyKind::nonnegative: {
      const Eigen::VectorXd e1 = s.eigenfunctions().col(1);
      const double eps = 0.5 / e1.cwiseAbs().maxCoeff();
      members_.push_back({"1+eps*e1", s.synthesize(padded(s, {1.0, eps}))});
      const int low = std::max(1, modes / 2);
      for (int i = 1; i < count; ++i) {
        std::vector<double> c(static_cast<std::size_t>(low) + 1);
        c[0] = normal(rng);
        for (int k = 1; k <= low; ++k) c[static_cast<std::size_t>(k)] = normal(rng) / k;
        const Observable g = s.synthesize(padded(s, c));
        const Observable sq = product(g, g);
        const double scale = mean(sq);
        const double delta = 0.05 + 0.45 * uniform(rng);
        members_.push_back({"square-" + std::to_string(i),
                            sq.with_values((sq.values().array() / scale + delta).matrix())});
      }
      break;
    }
  }
}

CheckResult check_envelope(const SpectralDecomposition& s, const DecayBound& b,
                           const TestFunctionFamily& family, std::span<const double> times,
                           double slack) {
  if (!(b.p >= 1.0)) throw DomainError("envelope: p must be >= 1");
  require_slack(slack);
  if (times.empty()) throw PreconditionError("envelope: empty time grid");
  const std::string name = "envelope." + to_string(b.source) + ".p=" + fmt(b.p);
  Worst worst;
  std::vector<std::string> notes;
  for (const auto& m : family.members()) {
    const double n0 = centered_norm(m.f, b.p);
    if (!(n0 > 1e-12 * std::max(lp_norm(m.f, b.p), 1e-300))) {
      notes.push_back("skipped constant member " + m.id);
      continue;
    }
    const Eigen::MatrixXd values = Orbit(s, m.f).values_at(times);
    for (std::size_t j = 0; j < times.size(); ++j) {
      const double nt = centered_norm(column(m.f, values, j), b.p);
      worst.offer(nt / (b.K * std::exp(-b.lambda * times[j]) * n0), at_time(m.id, times[j]));
    }
  }
  if (worst.ratio == kNegInf) return inapplicable_check(name, "every member was constant", slack);
  CheckResult r = make_check(name, worst.ratio, worst.witness, slack);
  r.notes = std::move(notes);
  return r;
}

CheckResult check_log_convexity(const SpectralDecomposition& s, const TestFunctionFamily& family,
                                std::span<const double> times) {
  require_uniform(times);
  const std::string name = "log-convexity";
  Worst worst;
  std::vector<std::string> notes;
  for (const auto& m : family.members()) {
    const Observable centered = m.f - mean(m.f);
    if (!(centered_norm(centered, 2.0) > 1e-12 * std::max(lp_norm(m.f, 2.0), 1e-300))) {
      notes.push_back("skipped constant member " + m.id);
      continue;
    }
    const ConvexityProfile profile = log_convexity_profile(s, centered, times);
    if (profile.truncated) notes.push_back(m.id + " truncated after underflow");
    for (std::size_t j = 0; j < profile.second_differences.size(); ++j) {
      worst.offer(1.0 - profile.second_differences[j], at_time(m.id, times[j + 1]));
    }
  }
  if (worst.ratio == kNegInf) {
    return inapplicable_check(name, "no member produced interior points", kConvexityTolerance);
  }
  CheckResult r = make_check(name, worst.ratio, worst.witness, kConvexityTolerance);
  r.notes = std::move(notes);
  return r;
}

std::string to_string(PointwiseInequality which) {
  switch (which) {
    case PointwiseInequality::lp_gradient: return "lp-gradient";
    case PointwiseInequality::lp_poincare: return "lp-poincare";
    case PointwiseInequality::median_lp: return "median-lp";
    case PointwiseInequality::median_comparison: return "median-comparison";
  }
  return "?";
}

double pointwise_constant(PointwiseInequality which, double p, double c_p) {
  switch (which) {
    case PointwiseInequality::lp_gradient:
    case PointwiseInequality::lp_poincare: {
      if (!(p >= 2.0) || !is_power_of_two(p)) {
        throw PreconditionError("default constant needs p a power of two >= 2, got " + fmt(p));
      }
      const int ip = static_cast<int>(p);
      const auto table = c_recursion(c_p, log2_exact(p));
      if (which == PointwiseInequality::lp_gradient) return table.d(ip);
      return kappa_lp(p, table.c(ip));
    }
    case PointwiseInequality::median_lp:
      return b_relation(9.0 * c_p, p);
    case PointwiseInequality::median_comparison:
      return 3.0;
  }
  return 0.0;
}

CheckResult check_pointwise_inequality(const GeneratorRep& g, const TestFunctionFamily& family,
                                       PointwiseInequality which, const PointwiseParams& params) {
  require_slack(params.slack);
  const double p = params.p;
  if (which != PointwiseInequality::median_comparison && !(p >= 2.0)) {
    throw DomainError("pointwise inequality: requires p >= 2");
  }
  std::string name = "pointwise." + to_string(which);
  if (which != PointwiseInequality::median_comparison) name += ".p=" + fmt(p);
  const double constant =
      params.constant ? *params.constant : pointwise_constant(which, p, params.c_p);

  Worst worst;
  std::vector<std::string> notes;
  for (const auto& m : family.members()) {
    const Observable& f = m.f;
    if (which == PointwiseInequality::median_comparison) {
      const double med = weighted_median(f);
      const double sd = std::sqrt(variance(f));
      if (!(sd > 1e-12 * std::max(lp_norm(f, 2.0), 1e-300))) {
        notes.push_back("skipped constant member " + m.id);
        continue;
      }
      worst.offer(std::fabs(mean(f) - med) / (std::sqrt(2.0) * sd), m.id + ":mean-median");
      for (double q : {1.0, 1.5, 2.0, 3.0, 4.0, 8.0}) {
        const double n = centered_norm(f, q);
        const double mq = median_centered_norm(f, q);
        worst.offer(mq / (3.0 * n), m.id + ":upper@q=" + fmt(q));
        worst.offer(0.5 * n / mq, m.id + ":lower@q=" + fmt(q));
      }
      continue;
    }
    const Eigen::VectorXd gamma = pointwise_gamma(g, f);
    double lhs = 0.0;
    double integral = 0.0;
    Eigen::VectorXd integrand(f.size());
    if (which == PointwiseInequality::lp_poincare) {
      const Observable h = f - mean(f);
      lhs = lp_norm(h, p);
      lhs = std::pow(lhs, p);
      for (Eigen::Index i = 0; i < f.size(); ++i) {
        integrand[i] = abs_pow(std::max(gamma[i], 0.0), p / 2.0);
      }
    } else {
      const double center =
          which == PointwiseInequality::median_lp ? weighted_median(f) : mean(f);
      const Observable h = f - center;
      lhs = std::pow(lp_norm(h, p), p);
      for (Eigen::Index i = 0; i < f.size(); ++i) {
        integrand[i] = weight_pow(h[i], p - 2.0) * gamma[i];
      }
    }
    integral = weighted_sum(f, integrand);
    const double rhs = constant * integral;
    if (!(rhs > 0.0)) {
      notes.push_back("skipped degenerate member " + m.id);
      continue;
    }
    worst.offer(lhs / rhs, m.id);
  }
  if (worst.ratio == kNegInf) {
    return inapplicable_check(name, "every member was degenerate", params.slack);
  }
  CheckResult r = make_check(name, worst.ratio, worst.witness, params.slack);
  r.notes = std::move(notes);
  return r;
}

double power_jensen_gap(const Observable& g, double p) {
  const double m = mean(g);
  if (!(m > 0.0)) throw PreconditionError("power_jensen_gap: mean must be positive");
  const double mp = std::pow(m, p);
  double total = 0.0;
  const auto& w = g.space()->weights();
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double u = std::max((g[i] - m) / m, -1.0);
    double phi = 0.0;
    if (std::fabs(u) < 0.05) {
      // (1+u)^p - 1 - p u as a binomial series.
      double coef = p * (p - 1.0) / 2.0;
      double power = u * u;
      phi = coef * power;
      for (int j = 3; j < 80; ++j) {
        coef *= (p - j + 1.0) / j;
        power *= u;
        const double term = coef * power;
        phi += term;
        if (std::fabs(term) <= 1e-18 * std::fabs(phi)) break;
      }
    } else {
      phi = std::pow(1.0 + u, p) - 1.0 - p * u;
    }
    total += w[i] * phi;
  }
  return mp * total;
}

CheckResult check_wang(const SpectralDecomposition& s, const TestFunctionFamily& nonnegative,
                       double p, double c_p, std::span<const double> times, double slack) {
  if (!(p > 1.0 && p <= 2.0)) throw DomainError("wang: requires 1 < p <= 2");
  if (!(c_p > 0.0)) throw DomainError("wang: C_P must be positive");
  require_slack(slack);
  for (const auto& m : nonnegative.members()) {
    if (m.f.values().minCoeff() < 0.0) {
      throw PreconditionError("wang: member '" + m.id + "' takes negative values");
    }
  }
  const std::string name = "wang.p=" + fmt(p);
  const double rate = 4.0 * (p - 1.0) / (p * c_p);
  Worst worst;
  std::vector<std::string> notes;
  for (const auto& m : nonnegative.members()) {
    if (!(mean(m.f) > 0.0)) {
      notes.push_back("skipped zero member " + m.id);
      continue;
    }
    const double gap0 = power_jensen_gap(m.f, p);
    if (!(gap0 > 1e-14 * std::pow(mean(m.f), p))) {
      notes.push_back("skipped constant member " + m.id);
      continue;
    }
    const Eigen::MatrixXd values = Orbit(s, m.f).values_at(times);
    for (std::size_t j = 0; j < times.size(); ++j) {
      worst.offer(power_jensen_gap(column(m.f, values, j), p) / (std::exp(-rate * times[j]) * gap0),
                  at_time(m.id, times[j]));
    }
  }
  if (worst.ratio == kNegInf) return inapplicable_check(name, "every member was constant", slack);
  CheckResult r = make_check(name, worst.ratio, worst.witness, slack);
  r.notes = std::move(notes);
  return r;
}

double wang_l2_discrepancy(const SpectralDecomposition& s, const TestFunctionFamily& family,
                           double c_p, std::span<const double> times) {
  double worst = 0.0;
  for (const auto& m : family.members()) {
    if (!(mean(m.f) > 0.0)) continue;
    const double gap0 = power_jensen_gap(m.f, 2.0);
    const double n0 = centered_norm(m.f, 2.0);
    if (!(gap0 > 0.0) || !(n0 > 0.0)) continue;
    const Eigen::MatrixXd values = Orbit(s, m.f).values_at(times);
    for (std::size_t j = 0; j < times.size(); ++j) {
      const double t = times[j];
      const Observable ft = column(m.f, values, j);
      const double wang = power_jensen_gap(ft, 2.0) / (std::exp(-2.0 * t / c_p) * gap0);
      const double l2 = centered_norm(ft, 2.0) / (std::exp(-t / c_p) * n0);
      worst = std::max(worst, std::fabs(wang - l2 * l2));
    }
  }
  return worst;
}

CheckResult GronwallReport::combined(const std::string& name) const {
  const CheckResult parts[] = {recursion, envelope, power_inequality, cauchy_schwarz};
  return combine_checks(name, parts);
}

GronwallReport check_gronwall_recursion(const SpectralDecomposition& s, const TestFunction& f,
                                        double c_p, int k_max, std::span<const double> times,
                                        double slack) {
  if (!(c_p > 0.0)) throw DomainError("gronwall: C_P must be positive");
  if (k_max < 2) throw PreconditionError("gronwall: k_max must be >= 2");
  if (k_max > 6) throw ResourceError("gronwall: k_max above 6 overflows the norms");
  require_slack(slack);
  require_uniform(times);
  require_mean_zero(f.f, f.id);

  const std::size_t nt = times.size();
  const double step = times[1] - times[0];
  const Orbit orbit(s, f.f);
  const double mu = mean(f.f);

  // U[k][j] = N_{2^k}^{2^k}(P_{t_j} f) and its exact third derivative.
  std::vector<std::vector<double>> u(static_cast<std::size_t>(k_max) + 1,
                                     std::vector<double>(nt, 0.0));
  std::vector<std::vector<double>> u3 = u;
  const auto& w = s.space()->weights();
  const Eigen::MatrixXd v0 = orbit.values_at(times, 0);
  const Eigen::MatrixXd v1 = orbit.values_at(times, 1);
  const Eigen::MatrixXd v2 = orbit.values_at(times, 2);
  const Eigen::MatrixXd v3 = orbit.values_at(times, 3);
  for (std::size_t j = 0; j < nt; ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    const Eigen::ArrayXd g = v0.col(col).array() - mu;
    const Eigen::ArrayXd d1 = v1.col(col).array();
    const Eigen::ArrayXd d2 = v2.col(col).array();
    const Eigen::ArrayXd d3 = v3.col(col).array();
    for (int k = 1; k <= k_max; ++k) {
      const int p = 1 << k;
      const double pd = p;
      const Eigen::ArrayXd gp2 = g.pow(p - 2);
      u[static_cast<std::size_t>(k)][j] = w.dot((gp2 * g * g).matrix());
      double third = 3.0 * pd * (pd - 1.0) * w.dot((gp2 * d1 * d2).matrix()) +
                     pd * w.dot((gp2 * g * d3).matrix());
      if (p > 2) third += pd * (pd - 1.0) * (pd - 2.0) * w.dot((g.pow(p - 3) * d1.cube()).matrix());
      u3[static_cast<std::size_t>(k)][j] = third;
    }
  }

  GronwallReport out;
  const double tol = slack;

  // Envelope U_k(t) <= 4^{p-2} exp(-2t/C_P) U_k(0).
  {
    Worst worst;
    for (int k = 1; k <= k_max; ++k) {
      const auto& uk = u[static_cast<std::size_t>(k)];
      const double pre = std::pow(4.0, (1 << k) - 2);
      if (!(uk[0] > 0.0)) continue;
      for (std::size_t j = 0; j < nt; ++j) {
        worst.offer(uk[j] / (pre * std::exp(-2.0 * times[j] / c_p) * uk[0]),
                    f.id + ":k=" + std::to_string(k) + "@t=" + fmt(times[j]));
      }
    }
    const double env_tol = tol + kRoundoffTolerance;
    out.envelope = worst.ratio == kNegInf
                       ? inapplicable_check("gronwall.envelope", f.id + " is zero", env_tol)
                       : make_check("gronwall.envelope", worst.ratio, worst.witness, env_tol);
  }

  // Differential inequality from central differences with an explicit error bound.
  {
    Worst worst;
    bool coarse = false;
    double required = std::numeric_limits<double>::infinity();
    for (int k = 2; k <= k_max; ++k) {
      const auto& uk = u[static_cast<std::size_t>(k)];
      const auto& ukm = u[static_cast<std::size_t>(k - 1)];
      const auto& third = u3[static_cast<std::size_t>(k)];
      const double p = 1 << k;
      for (std::size_t j = 1; j + 1 < nt; ++j) {
        if (!(uk[j] > 1e-12 * uk[0])) break;
        const double fd = (uk[j + 1] - uk[j - 1]) / (2.0 * step);
        const double m3 = 2.0 * std::max({std::fabs(third[j - 1]), std::fabs(third[j]),
                                          std::fabs(third[j + 1])});
        const double truncation = step * step / 6.0 * m3;
        const double roundoff = 4.0 * p * DBL_EPSILON * std::max(uk[j - 1], uk[j + 1]) / step;
        const double err = truncation + roundoff;
        const double rhs = 3.0 / c_p * (ukm[j] * ukm[j] - uk[j]);
        const double scale = std::fabs(rhs);
        if (err > 0.1 * scale) {
          coarse = true;
          if (m3 > 0.0) required = std::min(required, std::sqrt(0.6 * scale / m3));
          continue;
        }
        worst.offer(1.0 + (fd - err - rhs) / scale,
                    f.id + ":k=" + std::to_string(k) + "@t=" + fmt(times[j]));
      }
    }
    if (coarse) {
      out.recursion = inapplicable_check(
          "gronwall.recursion",
          "time step " + fmt(step) + " too coarse for the derivative tolerance; need <= " +
              fmt(required),
          tol);
      if (std::isfinite(required)) out.required_step = required;
    } else if (worst.ratio == kNegInf) {
      out.recursion = inapplicable_check("gronwall.recursion", "no interior points", tol);
    } else {
      out.recursion = make_check("gronwall.recursion", worst.ratio, worst.witness, tol);
    }
    out.recursion.notes.push_back("k = 1 not tested: the recursion needs k >= 2");
  }

  // 4^{2^k-2} >= 1 + 3 * 4^{2^k-4}.
  {
    Worst worst;
    bool all = true;
    for (int k = 2; k <= k_max; ++k) {
      const auto n = static_cast<unsigned>(1u << k);
      const Rational ratio(1 + 3 * (BigInt(1) << (2 * (n - 4))), BigInt(1) << (2 * (n - 2)));
      all = all && gronwall_power_inequality(k);
      worst.offer(to_double(ratio), "k=" + std::to_string(k));
    }
    out.power_inequality = make_check("gronwall.power-inequality", worst.ratio, worst.witness, 0.0);
    out.power_inequality.passed = all && out.power_inequality.passed;
  }

  // U_{k-1}(0)^2 <= U_k(0) on the normalized discrete measure, in exact arithmetic.
  {
    const Eigen::VectorXd g0 = f.f.values().array() - mu;
    std::vector<Rational> wr(static_cast<std::size_t>(g0.size()));
    std::vector<Rational> gr(wr.size());
    Rational total(0);
    for (Eigen::Index i = 0; i < g0.size(); ++i) {
      wr[static_cast<std::size_t>(i)] = to_rational(w[i]);
      gr[static_cast<std::size_t>(i)] = to_rational(g0[i]);
      total += wr[static_cast<std::size_t>(i)];
    }
    Worst worst;
    bool all = true;
    for (int k = 2; k <= k_max; ++k) {
      const int p = 1 << k;
      Rational lower(0);
      Rational upper(0);
      for (std::size_t i = 0; i < wr.size(); ++i) {
        Rational half = 1;
        for (int e = 0; e < p / 2; ++e) half *= gr[i];
        lower += wr[i] * half;
        upper += wr[i] * half * half;
      }
      if (upper == 0) continue;
      const Rational ratio = lower * lower / (total * upper);
      all = all && ratio <= 1;
      worst.offer(to_double(ratio), f.id + ":k=" + std::to_string(k));
    }
    out.cauchy_schwarz =
        worst.ratio == kNegInf
            ? inapplicable_check("gronwall.cauchy-schwarz", f.id + " is zero", 0.0)
            : make_check("gronwall.cauchy-schwarz", worst.ratio, worst.witness, 0.0);
    if (!out.cauchy_schwarz.inapplicable) out.cauchy_schwarz.passed = all;
  }
  return out;
}

CheckResult EntropyReplay::combined(const std::string& name) const {
  const CheckResult parts[] = {functional, envelope};
  return combine_checks(name, parts);
}

EntropyReplay replay_entropy_functional(const SpectralDecomposition& s, const TestFunction& f,
                                        double p, double c_p, std::span<const double> times,
                                        double slack) {
  if (!(p >= 2.0)) throw DomainError("entropy functional: requires p >= 2");
  require_slack(slack);
  if (times.empty()) throw PreconditionError("entropy functional: empty time grid");
  require_mean_zero(f.f, f.id);
  const MedianBound mb = bound_thm_median(p, c_p);
  const Orbit orbit(s, f.f);

  auto terms = [&](double t) {
    const Observable ft = orbit.at(t);
    const double np = std::pow(centered_norm(ft, p), p);
    const double var = variance(ft);
    return std::pair{np, mb.a_p * np + mb.b_p * std::pow(var, p / 2.0)};
  };
  const auto [n0, e0] = terms(0.0);
  EntropyReplay out;
  const std::string suffix = ".p=" + fmt(p);
  if (!(n0 > 0.0)) {
    out.functional = inapplicable_check("entropy.functional" + suffix, f.id + " is zero", slack);
    out.envelope = inapplicable_check("entropy.envelope" + suffix, f.id + " is zero", slack);
    return out;
  }
  Worst functional;
  Worst envelope;
  for (double t : times) {
    const auto [nt, et] = terms(t);
    const double decay = std::exp(-mb.gamma_p * t);
    functional.offer(et / (decay * e0), at_time(f.id, t));
    envelope.offer(nt / (mb.k_pow_p * decay * n0), at_time(f.id, t));
  }
  out.functional = make_check("entropy.functional" + suffix, functional.ratio, functional.witness,
                              slack);
  out.envelope = make_check("entropy.envelope" + suffix, envelope.ratio, envelope.witness, slack);
  return out;
}

std::string to_string(RatioKind kind) {
  switch (kind) {
    case RatioKind::poincare: return "poincare";
    case RatioKind::lp_gradient: return "lp-gradient";
    case RatioKind::median_lp: return "median-lp";
  }
  return "?";
}

std::optional<double> inequality_ratio(const GeneratorRep& g, RatioKind kind, double p,
                                       const Observable& f) {
  if (kind == RatioKind::poincare) {
    const double var = variance(f);
    const double energy = dirichlet_form(g, f);
    if (!(energy > 0.0) || !(var > 0.0)) return std::nullopt;
    return var / energy;
  }
  if (!(p >= 2.0)) throw DomainError("inequality ratio: requires p >= 2");
  const double center = kind == RatioKind::median_lp ? weighted_median(f) : mean(f);
  const Observable h = f - center;
  const double lhs = std::pow(lp_norm(h, p), p);
  const Eigen::VectorXd gamma = pointwise_gamma(g, f);
  Eigen::VectorXd integrand(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) integrand[i] = weight_pow(h[i], p - 2.0) * gamma[i];
  const double rhs = weighted_sum(f, integrand);
  if (!(rhs > 0.0) || !(lhs > 0.0)) return std::nullopt;
  return lhs / rhs;
}

BestConstantEstimate estimate_best_constant(const GeneratorRep& g, const SpectralDecomposition& s,
                                            RatioKind kind, double p,
                                            const TestFunctionFamily& family, int budget) {
  if (budget < 1) throw PreconditionError("best constant: budget must be >= 1");
  std::optional<double> best;
  std::string best_id;
  const Observable* best_f = nullptr;
  for (const auto& m : family.members()) {
    const auto r = inequality_ratio(g, kind, p, m.f);
    if (r && (!best || *r > *best)) {
      best = r;
      best_id = m.id;
      best_f = &m.f;
    }
  }
  if (!best) throw PreconditionError("best constant: every family member is degenerate");

  Eigen::VectorXd c = s.coefficients(*best_f);
  const int modes = std::min(family.max_mode(), 12);
  // Every ratio is invariant under f -> a f + b, so the coefficients are kept at unit norm.
  const auto normalize = [&] {
    const double norm = c.segment(1, modes).norm();
    if (norm > 0.0) c /= norm;
  };
  normalize();
  double step = 0.25;
  double value = *best;
  bool moved = false;
  const auto try_move = [&](int j, double delta) {
    Eigen::VectorXd trial = c;
    trial[j] += delta;
    const auto r = inequality_ratio(g, kind, p, s.synthesize(trial));
    if (r && *r > value * (1.0 + 1e-15)) {
      value = *r;
      c = trial;
      return true;
    }
    return false;
  };
  for (int sweep = 0; sweep < budget; ++sweep) {
    bool improved = false;
    for (int j = 1; j <= modes; ++j) {
      for (double sign : {1.0, -1.0}) {
        double delta = sign * step;
        if (!try_move(j, delta)) continue;
        improved = true;
        for (int grow = 0; grow < 30 && try_move(j, delta *= 2.0);) ++grow;
        break;
      }
    }
    normalize();
    moved = moved || improved;
    if (!improved) step *= 0.5;
  }
  return BestConstantEstimate{value, moved ? best_id + "+ascent" : best_id, s.synthesize(c)};
}

double transport_ratio(const GeneratorRep& g, const Observable& witness, double p) {
  if (!(p >= 2.0)) throw DomainError("transport: requires p >= 2");
  const Observable w0 = witness - weighted_median(witness);
  const auto r2 = inequality_ratio(g, RatioKind::median_lp, 2.0, w0);
  const auto rp = inequality_ratio(g, RatioKind::median_lp, p, signed_power(w0, 2.0 / p));
  if (!r2 || !rp) throw PreconditionError("transport: degenerate witness");
  return *rp / *r2;
}

bool VerificationReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const CheckResult& c) { return c.passed || c.inapplicable; });
}

void VerificationReport::finalize() {
  if (checks.empty()) throw PreconditionError("verification report has no checks");
  std::stable_sort(checks.begin(), checks.end(),
                   [](const CheckResult& a, const CheckResult& b) { return a.name < b.name; });
}

VerificationReport run_verification_suite(const GeneratorRep& g, const SuiteOptions& options,
                                          nlohmann::json backend_descriptor) {
  require_slack(options.slack);
  if (options.count < 3) throw PreconditionError("suite: count must be >= 3");
  if (options.time_points < 3) throw PreconditionError("suite: need at least 3 time points");
  const SpectralDecomposition s = decompose(g);
  const double c_p = poincare_constant(s);
  const double gap = 1.0 / c_p;
  const double slack = options.slack;
  const double t_end = options.t_end > 0.0 ? options.t_end : 10.0 / gap;
  const std::vector<double> times = uniform_time_grid(t_end, options.time_points);
  const auto seed = options.seed;

  const TestFunctionFamily mixtures(s, FamilyKind::eigen_mixtures, seed, options.count);
  const TestFunctionFamily smooth(s, FamilyKind::random_smooth, seed, options.count);
  const TestFunctionFamily balanced(s, FamilyKind::sign_balanced, seed, options.count);
  const TestFunctionFamily polynomial(s, FamilyKind::polynomial, seed, options.count);
  const TestFunctionFamily positive(s, FamilyKind::nonnegative, seed, options.count);
  const TestFunctionFamily centered(s, FamilyKind::random_smooth, seed + 1,
                                    std::min(options.count, 100));

  VerificationReport report;
  report.backend = std::move(backend_descriptor);
  report.c_p = c_p;
  auto add = [&](CheckResult r) { report.checks.push_back(std::move(r)); };

  // L2 decay is exact on every spectral backend.
  {
    CheckResult r = check_envelope(s, make_bound(2.0, gap, 1.0, BoundSource::spectral_exact),
                                   mixtures, times, std::max(slack, 1e-9));
    r.name = "envelope.l2-exact";
    add(std::move(r));
  }
  for (double p : {2.0, 4.0, 8.0, 16.0}) {
    add(check_envelope(s, bound_thm_grand(p, c_p), mixtures, times, slack));
  }
  for (double p : {3.0, 5.0, 6.0}) {
    const DecayBound grand = bound_thm_grand(p, c_p);
    const DecayBound interp = interpolated_grand(p, c_p);
    CheckResult rg = check_envelope(s, grand, mixtures, times, slack);
    CheckResult ri = check_envelope(s, interp, mixtures, times, slack);
    // A bound dominated by a passing one must pass as well.
    CheckResult consistency =
        dominates(interp, grand) && ri.passed
            ? make_check("envelope-domination.p=" + fmt(p), rg.worst_ratio, rg.witness, slack)
            : inapplicable_check("envelope-domination.p=" + fmt(p),
                                 "interpolated bound does not dominate or did not pass", slack);
    add(std::move(rg));
    add(std::move(ri));
    add(std::move(consistency));
  }
  for (double p : {2.0, 4.0}) add(check_envelope(s, bound_thm_median(p, c_p).bound, mixtures, times, slack));
  for (double p : {4.0, 8.0}) add(check_envelope(s, bound_thm_petit(p, c_p).bound, mixtures, times, slack));
  for (double q : {3.0, 4.0}) {
    add(check_envelope(s, dualize(bound_thm_grand(q, c_p)), mixtures, times, slack));
  }
  for (std::size_t i = 0; i < options.extra_bounds.size(); ++i) {
    CheckResult r = check_envelope(s, options.extra_bounds[i], mixtures, times, slack);
    r.name = "envelope.extra-" + std::to_string(i) + "." + to_string(options.extra_bounds[i].source) +
             ".p=" + fmt(options.extra_bounds[i].p);
    add(std::move(r));
  }

  add(check_log_convexity(s, centered, times));

  for (double p : {1.0, 2.0, 4.0}) {
    Worst worst;
    for (const auto& m : smooth.members()) {
      for (double t : times) {
        if (t == 0.0) continue;
        worst.offer(contraction_check(s, m.f, p, t).ratio, at_time(m.id, t));
      }
    }
    add(make_check("contraction.p=" + fmt(p), worst.ratio, worst.witness, kContractionTolerance));
  }

  PointwiseParams params;
  params.c_p = c_p;
  params.slack = slack;
  params.p = 4.0;
  add(check_pointwise_inequality(g, smooth, PointwiseInequality::lp_gradient, params));
  for (double p : {2.0, 4.0}) {
    params.p = p;
    add(check_pointwise_inequality(g, smooth, PointwiseInequality::lp_poincare, params));
    add(check_pointwise_inequality(g, balanced, PointwiseInequality::median_lp, params));
  }
  {
    const CheckResult parts[] = {
        check_pointwise_inequality(g, smooth, PointwiseInequality::median_comparison, params),
        check_pointwise_inequality(g, polynomial, PointwiseInequality::median_comparison, params)};
    add(combine_checks("pointwise.median-comparison", parts));
  }

  for (double p : {1.5, 2.0}) add(check_wang(s, positive, p, c_p, times, slack));
  {
    const double disc = wang_l2_discrepancy(s, positive, c_p, times);
    add(make_check("wang.l2-coincidence", 1.0 + disc, "", 1e-10));
  }

  {
    const TestFunctionFamily low(s, FamilyKind::eigen_mixtures, seed, 6, std::min(3, default_max_mode(s)));
    const std::vector<double> fine = uniform_time_grid(2.0 / gap, 2001);
    std::vector<CheckResult> rec, env, power, cs;
    for (const auto& m : low.members()) {
      const GronwallReport gr = check_gronwall_recursion(s, m, c_p, 3, fine, slack);
      rec.push_back(gr.recursion);
      env.push_back(gr.envelope);
      power.push_back(gr.power_inequality);
      cs.push_back(gr.cauchy_schwarz);
    }
    add(combine_checks("gronwall.recursion", rec));
    add(combine_checks("gronwall.envelope", env));
    add(combine_checks("gronwall.power-inequality", power));
    add(combine_checks("gronwall.cauchy-schwarz", cs));

    for (double p : {2.0, 4.0}) {
      std::vector<CheckResult> parts;
      for (const auto& m : low.members()) {
        parts.push_back(replay_entropy_functional(s, m, p, c_p, times, slack).combined("entropy"));
      }
      add(combine_checks("entropy.p=" + fmt(p), parts));
    }
  }

  {
    const BestConstantEstimate poincare =
        estimate_best_constant(g, s, RatioKind::poincare, 2.0, mixtures, 4);
    add(make_check("best-constant.poincare", c_p * (1.0 - 1e-6) / poincare.value,
                   poincare.witness_id, 0.0));
    const BestConstantEstimate b2 =
        estimate_best_constant(g, s, RatioKind::median_lp, 2.0, balanced, 10);
    const Interval sandwich = b_sandwich(c_p);
    const double lo = sandwich.lo * (1.0 - 0.05);
    CheckResult r = make_check("best-constant.median-l2-sandwich",
                               std::max(lo / b2.value, b2.value / sandwich.hi), b2.witness_id, 0.0);
    r.notes.push_back("B(2) estimate " + format_real(b2.value));
    add(std::move(r));

    const BestConstantEstimate b4 =
        estimate_best_constant(g, s, RatioKind::lp_gradient, 4.0, smooth, 10);
    CheckResult r4 = make_check("best-constant.lp-gradient.p=4",
                                b4.value / pointwise_constant(PointwiseInequality::lp_gradient, 4.0, c_p),
                                b4.witness_id, slack);
    r4.notes.push_back("D(4) estimate " + format_real(b4.value));
    add(std::move(r4));

    if (s.complete()) {
      const double ratio = transport_ratio(g, b2.witness, 4.0);
      CheckResult t = make_check("best-constant.transport.p=4", 4.0 * (1.0 - 0.05) / ratio,
                                 b2.witness_id, 0.0);
      t.notes.push_back("transported ratio " + format_real(ratio) + " against p^2/4 = 4");
      add(std::move(t));
    } else {
      add(inapplicable_check("best-constant.transport.p=4",
                             "transported witness leaves the span of a diagonal backend", 0.0));
    }
  }

  report.finalize();
  return report;
}

std::vector<SweepRow> sweep_grid_resolution(const std::function<double(double)>& potential,
                                            double a, double b, std::span<const int> ns,
                                            std::optional<double> continuum_gap) {
  if (ns.empty()) throw PreconditionError("sweep: empty axis");
  std::vector<SweepRow> rows;
  for (int n : ns) {
    const GeneratorRep g = build_grid_generator(build_grid_space(potential, a, b, n));
    const double gap = spectral_gap(decompose(g));
    SweepRow row;
    row.quantity = "C_P";
    row.axis = n;
    row.p = 2.0;
    row.lambda_observed = gap;
    row.lambda_bound = continuum_gap ? *continuum_gap : std::numeric_limits<double>::quiet_NaN();
    row.k_bound = 1.0;
    row.worst_ratio = continuum_gap ? *continuum_gap / gap : std::numeric_limits<double>::quiet_NaN();
    rows.push_back(row);
  }
  return rows;
}

std::vector<SweepRow> sweep_exponent(const SpectralDecomposition& s,
                                     const TestFunctionFamily& family, std::span<const double> ps,
                                     std::span<const double> times) {
  if (ps.empty()) throw PreconditionError("sweep: empty axis");
  if (times.size() < 2) throw PreconditionError("sweep: empty time grid");
  const double c_p = poincare_constant(s);
  const double t_last = times.back();
  std::vector<SweepRow> rows;
  for (double p : ps) {
    const DecayBound b = bound_thm_grand(p, c_p);
    double observed = std::numeric_limits<double>::infinity();
    for (const auto& m : family.members()) {
      const double n0 = centered_norm(m.f, p);
      if (!(n0 > 1e-12 * std::max(lp_norm(m.f, p), 1e-300))) continue;
      const double nt = centered_norm(evolve(s, m.f, t_last), p);
      observed = std::min(observed, -std::log(nt / n0) / t_last);
    }
    SweepRow row;
    row.quantity = "N_p";
    row.axis = p;
    row.p = p;
    row.lambda_observed = observed;
    row.lambda_bound = b.lambda;
    row.k_bound = b.K;
    row.worst_ratio = check_envelope(s, b, family, times, 0.0).worst_ratio;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace pdecay
