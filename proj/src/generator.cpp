#include "pdecay/generator.hpp"

#include "pdecay/errors.hpp"

#include <cmath>

namespace pdecay {

namespace {

constexpr double kRowSumTolerance = 1e-10;
constexpr double kBalanceTolerance = 1e-10;
constexpr double kGramTolerance = 1e-10;
constexpr double kDirichletAgreement = 1e-9;

double weighted_l2(const SpacePtr& space, const Eigen::VectorXd& v) {
  return std::sqrt(space->weights().dot(v.cwiseAbs2()));
}

void require_on_space(const GeneratorRep& g, const Observable& f) {
  if (!g.space()->same_as(*f.space())) {
    throw PreconditionError("observable does not live on the generator's space");
  }
}

}  // namespace

std::string to_string(GeneratorKind kind) {
  return kind == GeneratorKind::matrix ? "matrix" : "diagonal-spectral";
}

GeneratorRep GeneratorRep::from_matrix(SpacePtr space, Eigen::MatrixXd q) {
  const Eigen::Index n = space->size();
  if (q.rows() != n || q.cols() != n) {
    throw ConstructionError("generator: matrix is " + std::to_string(q.rows()) + "x" +
                            std::to_string(q.cols()) + ", space has " + std::to_string(n) +
                            " points");
  }
  const auto& mu = space->weights();
  double scale = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double row = 0.0;
    double row_scale = 1.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!std::isfinite(q(i, j))) throw ConstructionError("generator: non-finite entry");
      if (i != j && q(i, j) < 0.0) {
        throw ConstructionError("generator: negative off-diagonal entry at (" +
                                std::to_string(i) + ", " + std::to_string(j) + ")");
      }
      row += q(i, j);
      row_scale = std::max(row_scale, std::fabs(q(i, j)));
      if (j > i) {
        const double a = mu[i] * q(i, j);
        const double b = mu[j] * q(j, i);
        if (std::fabs(a - b) > kBalanceTolerance * std::max(std::fabs(a), std::fabs(b))) {
          throw ConstructionError("generator: detailed balance violated at (" +
                                  std::to_string(i) + ", " + std::to_string(j) + ")");
        }
      }
    }
    if (std::fabs(row) > kRowSumTolerance * row_scale) {
      throw ConstructionError("generator: row " + std::to_string(i) + " sums to " +
                              format_real(row));
    }
    scale = std::max(scale, std::fabs(q(i, i)));
  }
  GeneratorRep g(GeneratorKind::matrix, std::move(space));
  g.q_ = std::move(q);
  // Gershgorin: every rate is at most twice the largest exit rate.
  g.rate_scale_ = 2.0 * scale;
  return g;
}

GeneratorRep GeneratorRep::from_spectrum(SpacePtr space, Eigen::VectorXd rates,
                                         Eigen::MatrixXd basis) {
  const Eigen::Index n = space->size();
  const Eigen::Index m = rates.size();
  if (m == 0 || basis.rows() != n || basis.cols() != m) {
    throw ConstructionError("generator: basis must be " + std::to_string(n) + "x" +
                            std::to_string(m));
  }
  if (rates[0] != 0.0) throw ConstructionError("generator: first rate must be 0");
  for (Eigen::Index k = 1; k < m; ++k) {
    if (!(rates[k] > 0.0) || rates[k] < rates[k - 1]) {
      throw ConstructionError("generator: rates must be positive and nondecreasing after r_0");
    }
  }
  if ((basis.col(0).array() - 1.0).abs().maxCoeff() > kGramTolerance) {
    throw ConstructionError("generator: rate 0 must carry the constant eigenfunction 1");
  }
  const Eigen::MatrixXd gram = basis.transpose() * space->weights().asDiagonal() * basis;
  const double gram_error = (gram - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff();
  if (gram_error > kGramTolerance) {
    throw ConstructionError("generator: basis not orthonormal in L2(mu), error " +
                            format_real(gram_error));
  }
  GeneratorRep g(GeneratorKind::diagonal_spectral, std::move(space));
  g.rate_scale_ = rates[m - 1];
  g.rates_ = std::move(rates);
  g.basis_ = std::move(basis);
  return g;
}

const Eigen::MatrixXd& GeneratorRep::matrix() const {
  if (kind_ != GeneratorKind::matrix) throw PreconditionError("generator has no matrix form");
  return q_;
}

const Eigen::VectorXd& GeneratorRep::rates() const {
  if (kind_ != GeneratorKind::diagonal_spectral) {
    throw PreconditionError("generator has no diagonal form");
  }
  return rates_;
}

const Eigen::MatrixXd& GeneratorRep::basis() const {
  if (kind_ != GeneratorKind::diagonal_spectral) {
    throw PreconditionError("generator has no diagonal form");
  }
  return basis_;
}

SpanProjection project(const Eigen::MatrixXd& basis, const Observable& f) {
  const auto& mu = f.space()->weights();
  SpanProjection out;
  out.coefficients = basis.transpose() * mu.cwiseProduct(f.values());
  out.residual = weighted_l2(f.space(), f.values() - basis * out.coefficients);
  return out;
}

Eigen::VectorXd span_coefficients(const GeneratorRep& g, const Observable& f, const char* what) {
  require_on_space(g, f);
  auto proj = project(g.basis(), f);
  const double scale = std::max(1.0, weighted_l2(f.space(), f.values()));
  if (proj.residual > kSpanTolerance * scale) {
    throw SpanError(std::string(what) + " is outside the generator's span (residual " +
                        format_real(proj.residual) + ")",
                    proj.residual);
  }
  return std::move(proj.coefficients);
}

GeneratorRep build_grid_generator(const SpacePtr& space) {
  if (space->kind() != SpaceKind::grid) {
    throw ConstructionError("grid generator: space is not a grid");
  }
  const Eigen::Index n = space->size();
  if (n < 3) throw ConstructionError("grid generator: need n >= 3");
  const double h2 = space->spacing() * space->spacing();
  const auto& mu = space->weights();
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double w = std::sqrt(mu[i] * mu[i + 1]);
    q(i, i + 1) = w / (mu[i] * h2);
    q(i + 1, i) = w / (mu[i + 1] * h2);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    double off = 0.0;
    if (i > 0) off += q(i, i - 1);
    if (i + 1 < n) off += q(i, i + 1);
    q(i, i) = -off;
  }
  return GeneratorRep::from_matrix(space, std::move(q));
}

GeneratorRep build_ou_hermite(int m, int quad_nodes) {
  if (m < 2) throw PreconditionError("ou generator: need m >= 2");
  if (quad_nodes < 2 * m) {
    throw PreconditionError("ou generator: need quad_nodes >= 2m for exact products, got " +
                            std::to_string(quad_nodes) + " < " + std::to_string(2 * m));
  }
  auto space = build_gauss_hermite_space(quad_nodes);
  const Eigen::Index n = space->size();
  Eigen::MatrixXd basis(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = space->points()[i];
    double prev = 0.0;
    double cur = 1.0;
    basis(i, 0) = 1.0;
    for (int k = 0; k + 1 < m; ++k) {
      const double next = (x * cur - std::sqrt(static_cast<double>(k)) * prev) /
                          std::sqrt(static_cast<double>(k + 1));
      prev = cur;
      cur = next;
      basis(i, k + 1) = cur;
    }
  }
  Eigen::VectorXd rates = Eigen::VectorXd::LinSpaced(m, 0.0, static_cast<double>(m - 1));
  return GeneratorRep::from_spectrum(std::move(space), std::move(rates), std::move(basis));
}

Observable apply_generator(const GeneratorRep& g, const Observable& f) {
  require_on_space(g, f);
  if (g.kind() == GeneratorKind::matrix) return f.with_values(g.matrix() * f.values());
  const Eigen::VectorXd c = span_coefficients(g, f);
  return f.with_values(g.basis() * (-g.rates().cwiseProduct(c)));
}

Observable carre_du_champ(const GeneratorRep& g, const Observable& f, const Observable& h) {
  require_on_space(g, f);
  require_on_space(g, h);
  if (g.kind() == GeneratorKind::matrix) {
    // Zero row sums turn the defining formula into the edge sum
    // (1/2) sum_j Q_ij (f_j - f_i)(h_j - h_i), which keeps Gamma(f, f) >= 0.
    const auto& q = g.matrix();
    const Eigen::Index n = q.rows();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i || q(i, j) == 0.0) continue;
        acc += q(i, j) * (f[j] - f[i]) * (h[j] - h[i]);
      }
      out[i] = 0.5 * acc;
    }
    return f.with_values(std::move(out));
  }
  span_coefficients(g, f, "f");
  span_coefficients(g, h, "g");
  const Observable fh = product(f, h);
  span_coefficients(g, fh, "product fg");
  const Eigen::VectorXd l_fh = apply_generator(g, fh).values();
  const Eigen::VectorXd l_f = apply_generator(g, f).values();
  const Eigen::VectorXd l_h = apply_generator(g, h).values();
  return f.with_values(
      0.5 * (l_fh - f.values().cwiseProduct(l_h) - h.values().cwiseProduct(l_f)));
}

double dirichlet_form(const GeneratorRep& g, const Observable& f) {
  const Observable lf = apply_generator(g, f);
  const auto& mu = g.space()->weights();
  const double energy = -mu.dot(f.values().cwiseProduct(lf.values()));
  const double integrated = mu.dot(carre_du_champ(g, f, f).values());
  const double mass = mu.dot(f.values().cwiseAbs2());
  const double tol = kDirichletAgreement * std::max(std::fabs(energy), std::fabs(integrated)) +
                     1e-13 * g.rate_scale() * mass;
  if (std::fabs(energy - integrated) > tol) {
    throw ConsistencyError("dirichlet_form: -<f, Lf> = " + format_real(energy) +
                           " but integral of Gamma(f, f) = " + format_real(integrated));
  }
  return std::max(energy, 0.0);
}

double chain_rule_residual(const GeneratorRep& g, const Observable& f, const SmoothFunction& phi) {
  const Eigen::Index n = f.size();
  Eigen::VectorXd phi_f(n);
  Eigen::VectorXd d1(n);
  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    phi_f[i] = phi.value(f[i]);
    d1[i] = phi.first(f[i]);
    d2[i] = phi.second(f[i]);
  }
  const Eigen::VectorXd lhs = apply_generator(g, f.with_values(phi_f)).values();
  const Eigen::VectorXd lf = apply_generator(g, f).values();
  const Eigen::VectorXd gamma = carre_du_champ(g, f, f).values();
  const Eigen::VectorXd residual = lhs - d1.cwiseProduct(lf) - d2.cwiseProduct(gamma);
  return weighted_l2(g.space(), residual);
}

double derivation_residual(const GeneratorRep& gen, const Observable& f, const Observable& g,
                           const Observable& h) {
  const Eigen::VectorXd lhs = carre_du_champ(gen, product(f, g), h).values();
  const Eigen::VectorXd gh = carre_du_champ(gen, g, h).values();
  const Eigen::VectorXd fh = carre_du_champ(gen, f, h).values();
  const Eigen::VectorXd residual =
      lhs - f.values().cwiseProduct(gh) - g.values().cwiseProduct(fh);
  return weighted_l2(gen.space(), residual);
}

nlohmann::json to_json(const GeneratorRep& g) {
  const auto& sp = *g.space();
  const Eigen::Index n = sp.size();
  nlohmann::json doc;
  doc["kind"] = to_string(g.kind());
  doc["n"] = n;
  doc["points"] = std::vector<double>(sp.points().data(), sp.points().data() + n);
  doc["weights"] = std::vector<double>(sp.weights().data(), sp.weights().data() + n);
  if (g.kind() == GeneratorKind::matrix) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(n * n));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) flat.push_back(g.matrix()(i, j));
    }
    doc["matrix"] = std::move(flat);
  } else {
    const auto& r = g.rates();
    doc["rates"] = std::vector<double>(r.data(), r.data() + r.size());
    nlohmann::json basis = nlohmann::json::array();
    for (Eigen::Index k = 0; k < g.basis().cols(); ++k) {
      const Eigen::VectorXd col = g.basis().col(k);
      basis.push_back(std::vector<double>(col.data(), col.data() + n));
    }
    doc["basis"] = std::move(basis);
  }
  return doc;
}

GeneratorRep generator_from_json(const nlohmann::json& doc) {
  const std::string kind = doc.at("kind").get<std::string>();
  const auto n = doc.at("n").get<Eigen::Index>();
  auto pts = doc.at("points").get<std::vector<double>>();
  auto wts = doc.at("weights").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(pts.size()) != n || static_cast<Eigen::Index>(wts.size()) != n) {
    throw ConstructionError("generator json: points/weights length differs from n");
  }
  const SpaceKind space_kind = kind == "matrix" ? SpaceKind::grid : SpaceKind::gauss_hermite;
  auto space = std::make_shared<const ProbabilitySpace>(Eigen::Map<Eigen::VectorXd>(pts.data(), n),
                                                        Eigen::Map<Eigen::VectorXd>(wts.data(), n),
                                                        space_kind);
  if (kind == "matrix") {
    auto flat = doc.at("matrix").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(flat.size()) != n * n) {
      throw ConstructionError("generator json: matrix must have n*n entries");
    }
    Eigen::MatrixXd q = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                  Eigen::RowMajor>>(flat.data(), n, n);
    return GeneratorRep::from_matrix(std::move(space), std::move(q));
  }
  if (kind != "diagonal-spectral") throw ConstructionError("generator json: unknown kind " + kind);
  auto rates = doc.at("rates").get<std::vector<double>>();
  const auto cols = doc.at("basis").get<std::vector<std::vector<double>>>();
  const auto m = static_cast<Eigen::Index>(rates.size());
  if (static_cast<Eigen::Index>(cols.size()) != m) {
    throw ConstructionError("generator json: one basis vector per rate required");
  }
  Eigen::MatrixXd basis(n, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    if (static_cast<Eigen::Index>(cols[static_cast<std::size_t>(k)].size()) != n) {
      throw ConstructionError("generator json: basis vector of wrong length");
    }
    for (Eigen::Index i = 0; i < n; ++i) basis(i, k) = cols[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
  }
  return GeneratorRep::from_spectrum(std::move(space), Eigen::Map<Eigen::VectorXd>(rates.data(), m),
                                     std::move(basis));
}

}  // namespace pdecay
