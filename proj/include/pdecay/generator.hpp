#pragma once

#include "pdecay/state_space.hpp"

#include "json.hpp"

#include <functional>

namespace pdecay {

enum class GeneratorKind { matrix, diagonal_spectral };

std::string to_string(GeneratorKind kind);

/// A mu-symmetric Markov generator on a finite space.
///
/// Matrix form: Q with nonnegative off-diagonals, zero row sums and
/// detailed balance mu_i Q_ij = mu_j Q_ji.
///
/// Diagonal form: decay rates 0 = r_0 < r_1 <= ... with an L2(mu)-orthonormal
/// basis of observables (one column per rate). The generator acts on the span
/// of that basis only; anything else is rejected with SpanError.
class GeneratorRep {
 public:
  static GeneratorRep from_matrix(SpacePtr space, Eigen::MatrixXd q);
  static GeneratorRep from_spectrum(SpacePtr space, Eigen::VectorXd rates, Eigen::MatrixXd basis);

  GeneratorKind kind() const noexcept { return kind_; }
  const SpacePtr& space() const noexcept { return space_; }
  const Eigen::MatrixXd& matrix() const;
  const Eigen::VectorXd& rates() const;
  const Eigen::MatrixXd& basis() const;

  /// Largest |rate| the generator can produce; used to scale tolerances.
  double rate_scale() const noexcept { return rate_scale_; }

 private:
  GeneratorRep(GeneratorKind kind, SpacePtr space) : kind_(kind), space_(std::move(space)) {}

  GeneratorKind kind_;
  SpacePtr space_;
  Eigen::MatrixXd q_;
  Eigen::VectorXd rates_;
  Eigen::MatrixXd basis_;
  double rate_scale_ = 0.0;
};

/// Basis coefficients of f and the L2(mu) norm of what the basis misses.
struct SpanProjection {
  Eigen::VectorXd coefficients;
  double residual = 0.0;
};

SpanProjection project(const Eigen::MatrixXd& basis, const Observable& f);

/// Relative projection residual above which an observable counts as out of span.
inline constexpr double kSpanTolerance = 1e-8;

/// Coefficients of f in the diagonal basis; throws SpanError when the
/// residual exceeds kSpanTolerance * max(1, ||f||_2).
Eigen::VectorXd span_coefficients(const GeneratorRep& g, const Observable& f,
                                  const char* what = "observable");

/// Finite-volume discretization of Delta - V' d/dx on a grid space with
/// reflecting (zero-flux) ends and edge weights sqrt(mu_i mu_{i+1}).
GeneratorRep build_grid_generator(const SpacePtr& space);

/// Exact Ornstein-Uhlenbeck model: rates 0..m-1 on orthonormal Hermite
/// polynomials sampled at quad_nodes Gauss-Hermite nodes.
GeneratorRep build_ou_hermite(int m, int quad_nodes);

Observable apply_generator(const GeneratorRep& g, const Observable& f);

/// Gamma(f, g) = (L(fg) - f Lg - g Lf) / 2, pointwise.
Observable carre_du_champ(const GeneratorRep& g, const Observable& f, const Observable& h);

/// E(f, f) = -<f, Lf>; cross-checked against the integral of Gamma(f, f).
double dirichlet_form(const GeneratorRep& g, const Observable& f);

/// A C^2 function supplied together with its first two derivatives.
struct SmoothFunction {
  std::function<double(double)> value;
  std::function<double(double)> first;
  std::function<double(double)> second;
};

/// ||L phi(f) - phi'(f) Lf - phi''(f) Gamma(f, f)||_2: how far the backend is
/// from a diffusion along f.
double chain_rule_residual(const GeneratorRep& g, const Observable& f, const SmoothFunction& phi);

/// ||Gamma(fg, h) - f Gamma(g, h) - g Gamma(f, h)||_2.
double derivation_residual(const GeneratorRep& gen, const Observable& f, const Observable& g,
                           const Observable& h);

nlohmann::json to_json(const GeneratorRep& g);
GeneratorRep generator_from_json(const nlohmann::json& doc);

}  // namespace pdecay
