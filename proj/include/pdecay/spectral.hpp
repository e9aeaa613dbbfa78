#pragma once

#include "pdecay/generator.hpp"

#include <iosfwd>

namespace pdecay {

/// Eigenpairs of -L in L2(mu).
///
/// rates[0] = 0 carries the constant function; rates[1] is the spectral gap
/// (the classical "lambda_2" of the L2 decay estimate; stored at index 1).
/// Eigenfunctions are the columns of `eigenfunctions()`, orthonormal in L2(mu).
class SpectralDecomposition {
 public:
  SpectralDecomposition(SpacePtr space, Eigen::VectorXd rates, Eigen::MatrixXd eigenfunctions,
                        bool complete);

  const SpacePtr& space() const noexcept { return space_; }
  const Eigen::VectorXd& rates() const noexcept { return rates_; }
  const Eigen::MatrixXd& eigenfunctions() const noexcept { return vectors_; }
  Eigen::Index size() const noexcept { return rates_.size(); }

  /// True when the eigenfunctions span every observable on the space
  /// (matrix backends). Diagonal backends only span a subspace.
  bool complete() const noexcept { return complete_; }

  Observable eigenfunction(Eigen::Index k) const;

  /// <f, e_k>_mu for every k. Incomplete decompositions reject observables
  /// outside their span with SpanError.
  Eigen::VectorXd coefficients(const Observable& f) const;

  Observable synthesize(const Eigen::VectorXd& coefficients) const;

 private:
  SpacePtr space_;
  Eigen::VectorXd rates_;
  Eigen::MatrixXd vectors_;
  bool complete_;
};

/// Symmetrizes Q as D^{1/2} Q D^{-1/2}, solves the symmetric eigenproblem
/// and maps eigenvectors back to L2(mu). Diagonal generators pass through.
SpectralDecomposition decompose(const GeneratorRep& g);

inline constexpr double kErgodicityThreshold = 1e-12;

/// Smallest nonzero rate.
double spectral_gap(const SpectralDecomposition& s);

/// Smallest gap distinguishable from zero: max(1e-12, 64 eps * largest rate).
double ergodicity_threshold(const SpectralDecomposition& s);

/// C_P = 1 / gap; throws NonErgodicError when gap <= ergodicity_threshold(s).
double poincare_constant(const SpectralDecomposition& s);

/// Var(f) / E(f, f); +infinity when the energy vanishes on a non-constant f.
double rayleigh_quotient(const GeneratorRep& g, const Observable& f);

/// CSV `index,rate`.
void write_rates_csv(std::ostream& out, const SpectralDecomposition& s);

}  // namespace pdecay
