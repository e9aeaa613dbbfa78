#pragma once

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace pdecay {

enum class SpaceKind { grid, gauss_hermite };

std::string to_string(SpaceKind kind);
SpaceKind space_kind_from_string(const std::string& name);

/// Finite probability space: ordered real nodes carrying strictly positive
/// weights that sum to one. Immutable once built.
class ProbabilitySpace {
 public:
  /// Validates the invariants (positive weights, unit mass within 1e-12,
  /// strictly increasing points). Does not renormalize.
  ProbabilitySpace(Eigen::VectorXd points, Eigen::VectorXd weights, SpaceKind kind);

  const Eigen::VectorXd& points() const noexcept { return points_; }
  const Eigen::VectorXd& weights() const noexcept { return weights_; }
  SpaceKind kind() const noexcept { return kind_; }
  Eigen::Index size() const noexcept { return points_.size(); }

  /// Node spacing of a uniform grid; (b - a) / (n - 1).
  double spacing() const;

  bool same_as(const ProbabilitySpace& other) const;

 private:
  Eigen::VectorXd points_;
  Eigen::VectorXd weights_;
  SpaceKind kind_;
};

using SpacePtr = std::shared_ptr<const ProbabilitySpace>;

/// Real function on a ProbabilitySpace.
class Observable {
 public:
  Observable(SpacePtr space, Eigen::VectorXd values);

  const SpacePtr& space() const noexcept { return space_; }
  const Eigen::VectorXd& values() const noexcept { return values_; }
  Eigen::Index size() const noexcept { return values_.size(); }
  double operator[](Eigen::Index i) const { return values_[i]; }

  /// Same space, new values.
  Observable with_values(Eigen::VectorXd values) const;

 private:
  SpacePtr space_;
  Eigen::VectorXd values_;
};

Observable operator+(const Observable& f, const Observable& g);
Observable operator-(const Observable& f, const Observable& g);
Observable operator*(double a, const Observable& f);
Observable operator-(const Observable& f, double c);
/// Pointwise product.
Observable product(const Observable& f, const Observable& g);

void require_same_space(const Observable& f, const Observable& g);

Observable constant_observable(const SpacePtr& space, double c);
Observable sample(const SpacePtr& space, const std::function<double(double)>& fn);

/// Uniform grid of n nodes on [a, b] with weights proportional to exp(-V).
SpacePtr build_grid_space(const std::function<double(double)>& potential, double a, double b,
                          int n);

/// Gauss-Hermite nodes and weights for the standard Gaussian measure.
SpacePtr build_gauss_hermite_space(int nodes);

/// |x|^p with |0|^p = 0 for every p > 0.
double abs_pow(double x, double p);

double mean(const Observable& f);
double variance(const Observable& f);
/// ||f||_p, uncentered.
double lp_norm(const Observable& f, double p);
/// N_p(f) = ||f - mean(f)||_p.
double centered_norm(const Observable& f, double p);
/// Lower weighted median: smallest attained value m with mu(f < m) <= 1/2
/// and mu(f > m) <= 1/2.
double weighted_median(const Observable& f);
/// M_p(f) = ||f - median(f)||_p.
double median_centered_norm(const Observable& f, double p);

/// sign(f) |f|^h pointwise.
Observable signed_power(const Observable& f, double h);
/// The 2-Lipschitz cut-off: 0 on |s| <= u, identity on |s| >= 2u, linear between.
Observable cutoff_phi(const Observable& f, double u);
/// sign(f)|f|^{2/p} on |f| >= s, s^{(2-p)/p} f on |f| < s. No median requirement.
Observable truncated_power_map(const Observable& f, double s, double p);
/// truncated_power_map restricted to median-zero f.
Observable truncated_median_test_function(const Observable& f, double s, double p);

/// CSV with header `point,weight,value`, 17 significant digits.
void write_observable_csv(std::ostream& out, const Observable& f);
/// Reads the CSV written above. Weights must already be normalized.
Observable read_observable_csv(std::istream& in, SpaceKind kind = SpaceKind::grid);

/// Decimal rendering shared by every CSV writer: %.17g.
std::string format_real(double x);

}  // namespace pdecay
