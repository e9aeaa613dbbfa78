#pragma once

#include "pdecay/spectral.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace pdecay {

/// P_t f = sum_k exp(-rate_k t) <f, e_k> e_k.
Observable evolve(const SpectralDecomposition& s, const Observable& f, double t);

/// The trajectory t -> P_t f with the spectral coefficients computed once.
class Orbit {
 public:
  Orbit(const SpectralDecomposition& s, const Observable& f);

  Observable at(double t) const;
  /// t -> (d/dt)^order P_t f = L^order P_t f.
  Observable derivative_at(double t, int order) const;
  /// Values of L^order P_t f at every time, one column per time.
  Eigen::MatrixXd values_at(std::span<const double> times, int order = 0) const;
  const Eigen::VectorXd& coefficients() const noexcept { return coefficients_; }

 private:
  const SpectralDecomposition* s_;
  Eigen::VectorXd coefficients_;
};

enum class CurveQuantity { centered_norm, median_norm, variance, log_l2 };

std::string to_string(CurveQuantity q);

struct DecayCurve {
  std::vector<double> times;
  std::vector<double> values;
  CurveQuantity quantity = CurveQuantity::centered_norm;
  double p = 2.0;
  std::string f_id;
  /// Set when the curve stopped early because the norm underflowed.
  bool truncated = false;
};

/// N_p(P_t f) at every time; times must start at 0 and increase.
DecayCurve decay_curve(const SpectralDecomposition& s, const Observable& f, double p,
                       std::span<const double> times, std::string f_id = "f");

/// Any of the tracked quantities along the orbit. log_l2 uses the
/// uncentered L2 norm and truncates below 1e-300.
DecayCurve quantity_curve(const SpectralDecomposition& s, const Observable& f,
                          CurveQuantity quantity, double p, std::span<const double> times,
                          std::string f_id = "f");

struct ContractionResult {
  bool passed = false;
  double ratio = 0.0;
};

inline constexpr double kContractionTolerance = 1e-9;

/// ||P_t f||_p / ||f||_p (uncentered); passes when <= 1 + 1e-9.
ContractionResult contraction_check(const SpectralDecomposition& s, const Observable& f, double p,
                                    double t);

struct ConvexityProfile {
  /// g(t_{j+1}) - 2 g(t_j) + g(t_{j-1}) with g = log N_2(P_t f).
  std::vector<double> second_differences;
  bool truncated = false;
};

/// f is centered first. Requires a uniform time grid.
ConvexityProfile log_convexity_profile(const SpectralDecomposition& s, const Observable& f,
                                       std::span<const double> times);

enum class Verdict { passed, failed, inapplicable };

std::string to_string(Verdict v);

struct MonotoneCheck {
  Verdict verdict = Verdict::inapplicable;
  /// max_t N_2(P_t f) / (exp(-beta t) N_2(f)).
  double worst_ratio = 0.0;
  /// max_t Var(P_t f) / (c exp(-2 beta t)).
  double premise_ratio = 0.0;
};

/// Replays the convexity argument on a log-L2 curve: if the premise
/// Var(P_t f) <= c exp(-2 beta t) holds on the grid, verifies the conclusion
/// N_2(P_t f) <= exp(-beta t) N_2(f).
MonotoneCheck bounded_convex_monotone_check(const DecayCurve& log_curve, double beta,
                                            double premise_c, double tolerance = 1e-9);

/// {0} followed by points-1 geometric times from 1e-3/gap to 10/gap.
std::vector<double> geometric_time_grid(double gap, int points = 40, double first = 1e-3,
                                        double last = 10.0);
std::vector<double> uniform_time_grid(double t_end, int points);

/// CSV `t,value,quantity,p,f_id`.
void write_curves_csv(std::ostream& out, std::span<const DecayCurve> curves);

}  // namespace pdecay
