#include "pdecay/semigroup.hpp"

#include "pdecay/errors.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace pdecay {

namespace {

constexpr double kUnderflow = 1e-300;

void require_time(double t) {
  if (!(t >= 0.0)) throw DomainError("semigroup: time must be nonnegative, got " + format_real(t));
}

void require_time_grid(std::span<const double> times) {
  if (times.empty() || times.front() != 0.0) {
    throw PreconditionError("time grid must start at 0");
  }
  for (std::size_t j = 1; j < times.size(); ++j) {
    if (!(times[j] > times[j - 1])) throw PreconditionError("time grid must be increasing");
  }
}

double evaluate_quantity(const Observable& g, CurveQuantity q, double p) {
  switch (q) {
    case CurveQuantity::centered_norm: return centered_norm(g, p);
    case CurveQuantity::median_norm: return median_centered_norm(g, p);
    case CurveQuantity::variance: return variance(g);
    case CurveQuantity::log_l2: {
      const double norm = lp_norm(g, 2.0);
      return norm < kUnderflow ? -std::numeric_limits<double>::infinity() : std::log(norm);
    }
  }
  return 0.0;
}

// exp(-rate t) (-rate)^order, flushed to zero well above the subnormal range.
Eigen::VectorXd decay_factors(const Eigen::VectorXd& rates, double t, int order) {
  Eigen::ArrayXd factor = (-rates.array() * t).exp();
  factor = (factor < kUnderflow).select(0.0, factor);
  for (int k = 0; k < order; ++k) factor *= -rates.array();
  return factor.matrix();
}

}  // namespace

Orbit::Orbit(const SpectralDecomposition& s, const Observable& f)
    : s_(&s), coefficients_(s.coefficients(f)) {}

Observable Orbit::at(double t) const {
  require_time(t);
  return s_->synthesize(coefficients_.cwiseProduct(decay_factors(s_->rates(), t, 0)));
}

Observable Orbit::derivative_at(double t, int order) const {
  require_time(t);
  return s_->synthesize(coefficients_.cwiseProduct(decay_factors(s_->rates(), t, order)));
}

Eigen::MatrixXd Orbit::values_at(std::span<const double> times, int order) const {
  const Eigen::Index n = static_cast<Eigen::Index>(times.size());
  Eigen::MatrixXd c(s_->size(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    require_time(times[static_cast<std::size_t>(j)]);
    c.col(j) = coefficients_.cwiseProduct(
        decay_factors(s_->rates(), times[static_cast<std::size_t>(j)], order));
  }
  return s_->eigenfunctions() * c;
}

Observable evolve(const SpectralDecomposition& s, const Observable& f, double t) {
  require_time(t);
  return Orbit(s, f).at(t);
}

std::string to_string(CurveQuantity q) {
  switch (q) {
    case CurveQuantity::centered_norm: return "N_p";
    case CurveQuantity::median_norm: return "M_p";
    case CurveQuantity::variance: return "Var";
    case CurveQuantity::log_l2: return "log_l2";
  }
  return "?";
}

DecayCurve decay_curve(const SpectralDecomposition& s, const Observable& f, double p,
                       std::span<const double> times, std::string f_id) {
  return quantity_curve(s, f, CurveQuantity::centered_norm, p, times, std::move(f_id));
}

DecayCurve quantity_curve(const SpectralDecomposition& s, const Observable& f,
                          CurveQuantity quantity, double p, std::span<const double> times,
                          std::string f_id) {
  if (!(p >= 1.0)) throw DomainError("decay curve: p must be >= 1");
  require_time_grid(times);
  const Orbit orbit(s, f);
  DecayCurve curve;
  curve.quantity = quantity;
  curve.p = p;
  curve.f_id = std::move(f_id);
  const Eigen::MatrixXd values = orbit.values_at(times);
  for (std::size_t j = 0; j < times.size(); ++j) {
    const double v =
        evaluate_quantity(f.with_values(values.col(static_cast<Eigen::Index>(j))), quantity, p);
    if (!std::isfinite(v)) {
      curve.truncated = true;
      break;
    }
    curve.times.push_back(times[j]);
    curve.values.push_back(v);
  }
  return curve;
}

ContractionResult contraction_check(const SpectralDecomposition& s, const Observable& f, double p,
                                    double t) {
  require_time(t);
  const double before = lp_norm(f, p);
  const double after = lp_norm(evolve(s, f, t), p);
  ContractionResult r;
  r.ratio = before > 0.0 ? after / before : (after > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);
  r.passed = r.ratio <= 1.0 + kContractionTolerance;
  return r;
}

ConvexityProfile log_convexity_profile(const SpectralDecomposition& s, const Observable& f,
                                       std::span<const double> times) {
  require_time_grid(times);
  if (times.size() < 3) throw PreconditionError("log convexity: need at least 3 times");
  const double step = times[1] - times[0];
  for (std::size_t j = 2; j < times.size(); ++j) {
    if (std::fabs((times[j] - times[j - 1]) - step) > 1e-9 * step) {
      throw PreconditionError("log convexity: time grid must be uniform");
    }
  }
  const Observable centered = f - mean(f);
  if (!(centered_norm(centered, 2.0) > 0.0)) {
    throw PreconditionError("log convexity: f is constant");
  }
  const DecayCurve curve = quantity_curve(s, centered, CurveQuantity::log_l2, 2.0, times);
  ConvexityProfile out;
  out.truncated = curve.truncated;
  for (std::size_t j = 1; j + 1 < curve.values.size(); ++j) {
    out.second_differences.push_back(curve.values[j + 1] - 2.0 * curve.values[j] +
                                     curve.values[j - 1]);
  }
  return out;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::passed: return "passed";
    case Verdict::failed: return "failed";
    case Verdict::inapplicable: return "inapplicable";
  }
  return "?";
}

MonotoneCheck bounded_convex_monotone_check(const DecayCurve& log_curve, double beta,
                                            double premise_c, double tolerance) {
  if (log_curve.quantity != CurveQuantity::log_l2) {
    throw PreconditionError("monotone check: curve must track log ||P_t f||_2");
  }
  if (!(beta > 0.0) || !(premise_c > 0.0)) {
    throw DomainError("monotone check: beta and c must be positive");
  }
  if (log_curve.values.empty()) throw PreconditionError("monotone check: empty curve");
  MonotoneCheck out;
  const double g0 = log_curve.values.front();
  for (std::size_t j = 0; j < log_curve.values.size(); ++j) {
    const double t = log_curve.times[j];
    const double g = log_curve.values[j];
    out.premise_ratio = std::max(out.premise_ratio,
                                 std::exp(2.0 * g + 2.0 * beta * t) / premise_c);
    out.worst_ratio = std::max(out.worst_ratio, std::exp(g - g0 + beta * t));
  }
  if (out.premise_ratio > 1.0 + tolerance) {
    out.verdict = Verdict::inapplicable;
  } else {
    out.verdict = out.worst_ratio <= 1.0 + tolerance ? Verdict::passed : Verdict::failed;
  }
  return out;
}

std::vector<double> geometric_time_grid(double gap, int points, double first, double last) {
  if (!(gap > 0.0)) throw DomainError("time grid: gap must be positive");
  if (points < 2) throw DomainError("time grid: need at least 2 points");
  std::vector<double> t{0.0};
  const double t_min = first / gap;
  const double t_max = last / gap;
  if (points == 2) {
    t.push_back(t_max);
    return t;
  }
  const double ratio = std::pow(t_max / t_min, 1.0 / static_cast<double>(points - 2));
  double current = t_min;
  for (int j = 1; j < points; ++j) {
    t.push_back(j == points - 1 ? t_max : current);
    current *= ratio;
  }
  return t;
}

std::vector<double> uniform_time_grid(double t_end, int points) {
  if (!(t_end > 0.0) || points < 2) throw DomainError("uniform time grid: bad arguments");
  std::vector<double> t(static_cast<std::size_t>(points));
  for (int j = 0; j < points; ++j) t[static_cast<std::size_t>(j)] = t_end * j / (points - 1);
  return t;
}

void write_curves_csv(std::ostream& out, std::span<const DecayCurve> curves) {
  out << "t,value,quantity,p,f_id\n";
  for (const auto& c : curves) {
    const std::string q = to_string(c.quantity);
    for (std::size_t j = 0; j < c.times.size(); ++j) {
      out << format_real(c.times[j]) << ',' << format_real(c.values[j]) << ',' << q << ','
          << format_real(c.p) << ',' << c.f_id << '\n';
    }
  }
}

}  // namespace pdecay
