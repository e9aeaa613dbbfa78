#include "pdecay/spectral.hpp"

#include "pdecay/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace pdecay {

namespace {

// Sign convention: <e_k, y^k>_mu > 0 with y the node coordinate rescaled to
// [-1, 1] around the mean; falls back to the largest-magnitude entry.
void fix_signs(const ProbabilitySpace& space, Eigen::MatrixXd& vectors) {
  const auto& x = space.points();
  const auto& mu = space.weights();
  const double center = mu.dot(x);
  const double half = std::max(std::fabs(x.maxCoeff() - center), std::fabs(x.minCoeff() - center));
  const Eigen::VectorXd y = (x.array() - center) / (half > 0.0 ? half : 1.0);
  Eigen::VectorXd y_pow = Eigen::VectorXd::Ones(x.size());
  for (Eigen::Index k = 0; k < vectors.cols(); ++k) {
    const double moment = mu.dot(vectors.col(k).cwiseProduct(y_pow));
    double sign = 0.0;
    if (std::fabs(moment) > 1e-10) {
      sign = moment > 0.0 ? 1.0 : -1.0;
    } else {
      Eigen::Index at = 0;
      vectors.col(k).cwiseAbs().maxCoeff(&at);
      sign = vectors(at, k) >= 0.0 ? 1.0 : -1.0;
    }
    vectors.col(k) *= sign;
    y_pow = y_pow.cwiseProduct(y);
  }
}

}  // namespace

SpectralDecomposition::SpectralDecomposition(SpacePtr space, Eigen::VectorXd rates,
                                             Eigen::MatrixXd eigenfunctions, bool complete)
    : space_(std::move(space)),
      rates_(std::move(rates)),
      vectors_(std::move(eigenfunctions)),
      complete_(complete) {
  if (vectors_.rows() != space_->size() || vectors_.cols() != rates_.size()) {
    throw ConstructionError("spectral decomposition: shape mismatch");
  }
}

Observable SpectralDecomposition::eigenfunction(Eigen::Index k) const {
  if (k < 0 || k >= size()) throw PreconditionError("eigenfunction index out of range");
  return Observable(space_, vectors_.col(k));
}

Eigen::VectorXd SpectralDecomposition::coefficients(const Observable& f) const {
  if (!space_->same_as(*f.space())) {
    throw PreconditionError("observable does not live on the decomposition's space");
  }
  auto proj = project(vectors_, f);
  if (!complete_) {
    const double scale = std::max(1.0, std::sqrt(space_->weights().dot(f.values().cwiseAbs2())));
    if (proj.residual > kSpanTolerance * scale) {
      throw SpanError("observable is outside the spectral span (residual " +
                          format_real(proj.residual) + ")",
                      proj.residual);
    }
  }
  return std::move(proj.coefficients);
}

Observable SpectralDecomposition::synthesize(const Eigen::VectorXd& coefficients) const {
  if (coefficients.size() != size()) throw PreconditionError("coefficient vector length");
  return Observable(space_, vectors_ * coefficients);
}

SpectralDecomposition decompose(const GeneratorRep& g) {
  if (g.kind() == GeneratorKind::diagonal_spectral) {
    return SpectralDecomposition(g.space(), g.rates(), g.basis(), false);
  }
  const auto& q = g.matrix();
  const auto& mu = g.space()->weights();
  const Eigen::Index n = q.rows();
  const Eigen::VectorXd root = mu.cwiseSqrt();
  // Detailed balance makes D^{1/2} Q D^{-1/2} symmetric; average out roundoff.
  Eigen::MatrixXd sym = root.asDiagonal() * q * root.cwiseInverse().asDiagonal();
  const double asym = (sym - sym.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8 * std::max(1.0, sym.cwiseAbs().maxCoeff())) {
    throw ConstructionError("decompose: generator is not mu-symmetric (asymmetry " +
                            format_real(asym) + ")");
  }
  sym = 0.5 * (sym + sym.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) throw ConstructionError("decompose: eigensolver failed");

  // Eigen returns ascending eigenvalues of Q, i.e. descending rates.
  Eigen::VectorXd rates(n);
  Eigen::MatrixXd vectors(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = n - 1 - k;
    rates[k] = -solver.eigenvalues()[src];
    vectors.col(k) = root.cwiseInverse().cwiseProduct(solver.eigenvectors().col(src));
  }
  // The zero mode is exact in theory; clamp roundoff so rates stay nonnegative.
  if (std::fabs(rates[0]) <= 1e-8 * std::max(1.0, g.rate_scale())) rates[0] = 0.0;
  fix_signs(*g.space(), vectors);
  return SpectralDecomposition(g.space(), std::move(rates), std::move(vectors), true);
}

double spectral_gap(const SpectralDecomposition& s) {
  if (s.size() < 2) throw NonErgodicError("spectral gap: only one mode");
  return s.rates()[1];
}

double ergodicity_threshold(const SpectralDecomposition& s) {
  return std::max(kErgodicityThreshold,
                  64.0 * std::numeric_limits<double>::epsilon() * s.rates().cwiseAbs().maxCoeff());
}

double poincare_constant(const SpectralDecomposition& s) {
  const double gap = spectral_gap(s);
  if (!(gap > ergodicity_threshold(s))) {
    throw NonErgodicError("generator is not ergodic: spectral gap " + format_real(gap));
  }
  return 1.0 / gap;
}

double rayleigh_quotient(const GeneratorRep& g, const Observable& f) {
  const double var = variance(f);
  const double scale = g.space()->weights().dot(f.values().cwiseAbs2());
  if (!(var > 1e-28 * std::max(scale, 1e-300))) {
    throw PreconditionError("rayleigh_quotient: f is constant, quotient undefined");
  }
  const double energy = dirichlet_form(g, f);
  if (energy == 0.0) return std::numeric_limits<double>::infinity();
  return var / energy;
}

void write_rates_csv(std::ostream& out, const SpectralDecomposition& s) {
  out << "index,rate\n";
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    out << k << ',' << format_real(s.rates()[k]) << '\n';
  }
}

}  // namespace pdecay
