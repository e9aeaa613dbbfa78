#include "pdecay/state_space.hpp"

#include "pdecay/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace pdecay {

namespace {

constexpr double kMassTolerance = 1e-12;

// Normalizes positive raw weights; the sum is accumulated in long double.
Eigen::VectorXd normalize(const std::vector<long double>& raw) {
  long double total = 0.0L;
  for (long double w : raw) total += w;
  Eigen::VectorXd out(static_cast<Eigen::Index>(raw.size()));
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = static_cast<double>(raw[i] / total);
  }
  return out;
}

void require_p(double p, const char* op) {
  if (!(p >= 1.0)) {
    throw DomainError(std::string(op) + ": exponent p must be >= 1, got " + format_real(p));
  }
}

double weighted_sum_abs_pow(const Observable& f, double shift, double p) {
  const auto& w = f.space()->weights();
  const auto& v = f.values();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) acc += w[i] * abs_pow(v[i] - shift, p);
  return acc;
}

}  // namespace

std::string to_string(SpaceKind kind) {
  return kind == SpaceKind::grid ? "grid" : "gauss-hermite";
}

SpaceKind space_kind_from_string(const std::string& name) {
  if (name == "grid") return SpaceKind::grid;
  if (name == "gauss-hermite") return SpaceKind::gauss_hermite;
  throw ConstructionError("unknown space kind '" + name + "'");
}

ProbabilitySpace::ProbabilitySpace(Eigen::VectorXd points, Eigen::VectorXd weights,
                                   SpaceKind kind)
    : points_(std::move(points)), weights_(std::move(weights)), kind_(kind) {
  if (points_.size() != weights_.size() || points_.size() == 0) {
    throw ConstructionError("probability space: points and weights must be non-empty and aligned");
  }
  long double total = 0.0L;
  for (Eigen::Index i = 0; i < weights_.size(); ++i) {
    if (!(weights_[i] > 0.0) || !std::isfinite(weights_[i])) {
      throw ConstructionError("probability space: weight at node " + std::to_string(i) +
                              " is not strictly positive");
    }
    total += weights_[i];
    if (i > 0 && !(points_[i] > points_[i - 1])) {
      throw ConstructionError("probability space: points not strictly increasing at node " +
                              std::to_string(i));
    }
  }
  if (std::fabs(static_cast<double>(total) - 1.0) > kMassTolerance) {
    throw ConstructionError("probability space: weights sum to " +
                            format_real(static_cast<double>(total)) + ", expected 1");
  }
}

double ProbabilitySpace::spacing() const {
  if (size() < 2) return 0.0;
  return (points_[size() - 1] - points_[0]) / static_cast<double>(size() - 1);
}

bool ProbabilitySpace::same_as(const ProbabilitySpace& other) const {
  return this == &other || (kind_ == other.kind_ && points_ == other.points_ &&
                            weights_ == other.weights_);
}

Observable::Observable(SpacePtr space, Eigen::VectorXd values)
    : space_(std::move(space)), values_(std::move(values)) {
  if (!space_) throw PreconditionError("observable: null space");
  if (values_.size() != space_->size()) {
    throw PreconditionError("observable: " + std::to_string(values_.size()) +
                            " values for a space of " + std::to_string(space_->size()) +
                            " points");
  }
}

Observable Observable::with_values(Eigen::VectorXd values) const {
  return Observable(space_, std::move(values));
}

void require_same_space(const Observable& f, const Observable& g) {
  if (!f.space()->same_as(*g.space())) {
    throw PreconditionError("observables live on different spaces");
  }
}

Observable operator+(const Observable& f, const Observable& g) {
  require_same_space(f, g);
  return f.with_values(f.values() + g.values());
}

Observable operator-(const Observable& f, const Observable& g) {
  require_same_space(f, g);
  return f.with_values(f.values() - g.values());
}

Observable operator*(double a, const Observable& f) { return f.with_values(a * f.values()); }

Observable operator-(const Observable& f, double c) {
  return f.with_values(f.values().array() - c);
}

Observable product(const Observable& f, const Observable& g) {
  require_same_space(f, g);
  return f.with_values(f.values().cwiseProduct(g.values()));
}

Observable constant_observable(const SpacePtr& space, double c) {
  return Observable(space, Eigen::VectorXd::Constant(space->size(), c));
}

Observable sample(const SpacePtr& space, const std::function<double(double)>& fn) {
  Eigen::VectorXd v(space->size());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = fn(space->points()[i]);
  return Observable(space, std::move(v));
}

SpacePtr build_grid_space(const std::function<double(double)>& potential, double a, double b,
                          int n) {
  if (n < 3) throw ConstructionError("grid space: need n >= 3, got " + std::to_string(n));
  if (!(b > a)) throw ConstructionError("grid space: empty interval");
  Eigen::VectorXd x(n);
  std::vector<double> v(static_cast<std::size_t>(n));
  const double h = (b - a) / static_cast<double>(n - 1);
  double vmin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    x[i] = (i == n - 1) ? b : a + h * i;
    v[static_cast<std::size_t>(i)] = potential(x[i]);
    if (!std::isfinite(v[static_cast<std::size_t>(i)])) {
      throw ConstructionError("grid space: potential is not finite at node " + std::to_string(i) +
                              " (x = " + format_real(x[i]) + ")");
    }
    vmin = std::min(vmin, v[static_cast<std::size_t>(i)]);
  }
  // Shift by min V so the largest raw weight is exactly 1.
  std::vector<long double> raw(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = std::exp(-(static_cast<long double>(v[i]) - vmin));
  return std::make_shared<const ProbabilitySpace>(std::move(x), normalize(raw), SpaceKind::grid);
}

SpacePtr build_gauss_hermite_space(int nodes) {
  if (nodes < 1) throw ConstructionError("gauss-hermite space: need at least one node");
  const int n = nodes;
  // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite family.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw ConstructionError("gauss-hermite space: eigenvalue solver failed");
  }
  Eigen::VectorXd x = solver.eigenvalues();

  // Orthonormal recurrence h_{k+1} = (x h_k - sqrt(k) h_{k-1}) / sqrt(k+1).
  // Yields h_n, h_{n-1} and the Christoffel sum of h_0^2 .. h_{n-1}^2.
  auto evaluate = [n](double t, double& h_n, double& h_nm1, long double& christoffel) {
    double prev = 0.0;
    double cur = 1.0;
    christoffel = 1.0L;
    for (int k = 0; k < n; ++k) {
      const double next = (t * cur - std::sqrt(static_cast<double>(k)) * prev) /
                          std::sqrt(static_cast<double>(k + 1));
      prev = cur;
      cur = next;
      if (k + 1 < n) christoffel += static_cast<long double>(cur) * cur;
    }
    h_n = cur;
    h_nm1 = prev;
  };

  std::vector<long double> raw(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double h_n = 0.0;
    double h_nm1 = 0.0;
    long double christoffel = 0.0L;
    for (int it = 0; it < 3; ++it) {
      evaluate(x[i], h_n, h_nm1, christoffel);
      // h_n' = sqrt(n) h_{n-1}
      const double step = h_n / (std::sqrt(static_cast<double>(n)) * h_nm1);
      if (!std::isfinite(step)) break;
      x[i] -= step;
    }
    evaluate(x[i], h_n, h_nm1, christoffel);
    raw[static_cast<std::size_t>(i)] = 1.0L / christoffel;
  }
  // Enforce exact reflection symmetry of the rule.
  for (int i = 0; i < n / 2; ++i) {
    const double s = 0.5 * (x[n - 1 - i] - x[i]);
    x[i] = -s;
    x[n - 1 - i] = s;
    const long double w = 0.5L * (raw[static_cast<std::size_t>(i)] + raw[static_cast<std::size_t>(n - 1 - i)]);
    raw[static_cast<std::size_t>(i)] = raw[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  if (n % 2 == 1) x[n / 2] = 0.0;
  return std::make_shared<const ProbabilitySpace>(std::move(x), normalize(raw),
                                                  SpaceKind::gauss_hermite);
}

double abs_pow(double x, double p) {
  const double a = std::fabs(x);
  if (a == 0.0) return 0.0;
  if (p == 1.0) return a;
  if (p == 2.0) return a * a;
  if (p == std::floor(p) && p <= 64.0) return std::pow(a, p);
  return std::exp(p * std::log(a));
}

double mean(const Observable& f) {
  const auto& w = f.space()->weights();
  const double first = w.dot(f.values());
  return first + w.dot((f.values().array() - first).matrix());
}

double variance(const Observable& f) { return weighted_sum_abs_pow(f, mean(f), 2.0); }

double lp_norm(const Observable& f, double p) {
  require_p(p, "lp_norm");
  return std::pow(weighted_sum_abs_pow(f, 0.0, p), 1.0 / p);
}

double centered_norm(const Observable& f, double p) {
  require_p(p, "centered_norm");
  return std::pow(weighted_sum_abs_pow(f, mean(f), p), 1.0 / p);
}

double weighted_median(const Observable& f) {
  const auto& v = f.values();
  const auto& w = f.space()->weights();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(v.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return v[a] < v[b]; });
  // Weights sum to 1 within 1e-12; compare against half of the actual total.
  long double total = 0.0L;
  for (Eigen::Index i = 0; i < w.size(); ++i) total += w[i];
  const long double half = 0.5L * total;
  long double cumulative = 0.0L;
  std::size_t k = 0;
  while (k < order.size()) {
    const double value = v[order[k]];
    while (k < order.size() && v[order[k]] == value) cumulative += w[order[k++]];
    if (cumulative >= half - 1e-15L) return value;
  }
  return v[order.back()];
}

double median_centered_norm(const Observable& f, double p) {
  require_p(p, "median_centered_norm");
  return std::pow(weighted_sum_abs_pow(f, weighted_median(f), p), 1.0 / p);
}

Observable signed_power(const Observable& f, double h) {
  if (!(h > 0.0)) throw DomainError("signed_power: exponent must be positive");
  Eigen::VectorXd g(f.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double x = f[i];
    g[i] = std::copysign(abs_pow(x, h), x);
    if (x == 0.0) g[i] = 0.0;
  }
  return f.with_values(std::move(g));
}

Observable cutoff_phi(const Observable& f, double u) {
  if (!(u > 0.0)) throw DomainError("cutoff_phi: threshold must be positive");
  Eigen::VectorXd g(f.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double s = f[i];
    const double a = std::fabs(s);
    if (a <= u) {
      g[i] = 0.0;
    } else if (a >= 2.0 * u) {
      g[i] = s;
    } else {
      g[i] = std::copysign(2.0 * (a - u), s);
    }
  }
  return f.with_values(std::move(g));
}

Observable truncated_power_map(const Observable& f, double s, double p) {
  if (!(s > 0.0)) throw DomainError("truncated test function: s must be positive");
  if (!(p >= 2.0)) throw DomainError("truncated test function: p must be >= 2");
  const double inner_scale = std::pow(s, (2.0 - p) / p);
  Eigen::VectorXd g(f.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double x = f[i];
    if (std::fabs(x) >= s) {
      g[i] = std::copysign(abs_pow(x, 2.0 / p), x);
    } else {
      g[i] = inner_scale * x;
    }
  }
  return f.with_values(std::move(g));
}

Observable truncated_median_test_function(const Observable& f, double s, double p) {
  const double m = weighted_median(f);
  if (m != 0.0) {
    throw PreconditionError("truncated_median_test_function: median of f is " + format_real(m) +
                            ", expected 0");
  }
  return truncated_power_map(f, s, p);
}

std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_observable_csv(std::ostream& out, const Observable& f) {
  out << "point,weight,value\n";
  const auto& sp = *f.space();
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    out << format_real(sp.points()[i]) << ',' << format_real(sp.weights()[i]) << ','
        << format_real(f[i]) << '\n';
  }
}

Observable read_observable_csv(std::istream& in, SpaceKind kind) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("point,weight,value", 0) != 0) {
    throw ConstructionError("observable csv: missing header 'point,weight,value'");
  }
  std::vector<double> x;
  std::vector<double> w;
  std::vector<double> v;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string a, b, c;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c)) {
      throw ConstructionError("observable csv: malformed row '" + line + "'");
    }
    x.push_back(std::stod(a));
    w.push_back(std::stod(b));
    v.push_back(std::stod(c));
  }
  const auto n = static_cast<Eigen::Index>(x.size());
  auto space = std::make_shared<const ProbabilitySpace>(
      Eigen::Map<Eigen::VectorXd>(x.data(), n), Eigen::Map<Eigen::VectorXd>(w.data(), n), kind);
  return Observable(space, Eigen::Map<Eigen::VectorXd>(v.data(), n));
}

}  // namespace pdecay
