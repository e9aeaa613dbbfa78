#include "pdecay/constants.hpp"

#include "pdecay/errors.hpp"
#include "pdecay/state_space.hpp"

#include <cmath>

namespace pdecay {

namespace {

using boost::multiprecision::denominator;
using boost::multiprecision::msb;
using boost::multiprecision::numerator;

BigInt pow2(unsigned exponent) { return BigInt(1) << exponent; }

Rational pow2_rational(long exponent) {
  if (exponent >= 0) return Rational(pow2(static_cast<unsigned>(exponent)));
  return Rational(BigInt(1), pow2(static_cast<unsigned>(-exponent)));
}

void require_c_p(double c_p) {
  if (!(c_p > 0.0) || !std::isfinite(c_p)) {
    throw DomainError("Poincare constant must be positive and finite");
  }
}

// Exponent j with 2^{j-1} < p <= 2^j, and whether p == 2^j.
int ceil_log2(double p, bool& exact_power) {
  int e = 0;
  const double m = std::frexp(p, &e);
  exact_power = (m == 0.5);
  return exact_power ? e - 1 : e;
}

bool is_power_of_two(double p) {
  bool exact = false;
  ceil_log2(p, exact);
  return exact;
}

}  // namespace

Rational to_rational(double x) {
  if (!std::isfinite(x)) throw DomainError("to_rational: non-finite value");
  if (x == 0.0) return Rational(0);
  int e = 0;
  const double m = std::frexp(x, &e);
  const auto mantissa = static_cast<long long>(std::ldexp(m, 53));
  return Rational(BigInt(mantissa)) * pow2_rational(static_cast<long>(e) - 53);
}

double to_double(const Rational& r) {
  BigInt n = numerator(r);
  const BigInt d = denominator(r);
  if (n == 0) return 0.0;
  const bool negative = n < 0;
  if (negative) n = -n;
  const long shift = 64 - (static_cast<long>(msb(n)) - static_cast<long>(msb(d)));
  const BigInt q = shift >= 0 ? BigInt((n << static_cast<unsigned>(shift)) / d)
                              : BigInt(n / (d << static_cast<unsigned>(-shift)));
  const double v = std::ldexp(q.convert_to<double>(), static_cast<int>(-shift));
  return negative ? -v : v;
}

std::string to_string(const Rational& r) {
  const BigInt n = numerator(r);
  const BigInt d = denominator(r);
  if (d == 1) return n.str();
  return n.str() + "/" + d.str();
}

std::string to_string(BoundSource s) {
  switch (s) {
    case BoundSource::thm_petit: return "thm-petit";
    case BoundSource::thm_grand: return "thm-grand";
    case BoundSource::thm_median: return "thm-median";
    case BoundSource::dual: return "dual";
    case BoundSource::interpolated: return "interpolated";
    case BoundSource::spectral_exact: return "spectral-exact";
    case BoundSource::probe: return "probe";
  }
  return "?";
}

BoundSource bound_source_from_string(const std::string& name) {
  for (auto s : {BoundSource::thm_petit, BoundSource::thm_grand, BoundSource::thm_median,
                 BoundSource::dual, BoundSource::interpolated, BoundSource::spectral_exact,
                 BoundSource::probe}) {
    if (to_string(s) == name) return s;
  }
  throw PreconditionError("unknown bound source '" + name + "'");
}

DecayBound make_bound(double p, double lambda, double K, BoundSource source,
                      std::optional<ExactBound> exact) {
  if (!(p >= 1.0)) throw DomainError("decay bound: p must be >= 1");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw DomainError("decay bound: lambda must be positive, got " + format_real(lambda));
  }
  const double k_floor = source == BoundSource::probe ? 0.0 : 1.0;
  if (!(K >= k_floor) || (source == BoundSource::probe && !(K > 0.0)) || !std::isfinite(K)) {
    throw DomainError("decay bound: prefactor K = " + format_real(K) + " out of range");
  }
  return DecayBound{p, lambda, K, source, std::move(exact)};
}

bool dominates(const DecayBound& a, const DecayBound& b) {
  return a.p == b.p && a.K <= b.K && a.lambda >= b.lambda;
}

const CRecursionTable::Entry& CRecursionTable::entry(int p) const {
  const auto it = entries_.find(p);
  if (it == entries_.end()) {
    throw PreconditionError("C(p) table has no entry for p = " + std::to_string(p));
  }
  return it->second;
}

double CRecursionTable::c(int p) const { return to_double(entry(p).c_multiple) * c_p_; }

double CRecursionTable::d(int p) const { return to_double(entry(p).d_multiple) * c_p_; }

CRecursionTable c_recursion(double c_p, int k_max) {
  require_c_p(c_p);
  if (k_max < 1) throw DomainError("c_recursion: k_max must be >= 1");
  if (k_max > 30) throw ResourceError("c_recursion: p = 2^k_max does not fit the table index");
  // Each doubling adds at most (4p - 4) + 3p + 3 bits to D.
  std::size_t bits = 9;  // D(4) = 324
  for (long p = 4; 2 * p <= (1L << k_max); p *= 2) {
    bits += static_cast<std::size_t>(7 * p + 3);
    if (bits > kRecursionBitBudget) {
      throw ResourceError("c_recursion: k_max = " + std::to_string(k_max) +
                          " exceeds the exact-arithmetic budget of " +
                          std::to_string(kRecursionBitBudget) + " bits");
    }
  }
  std::map<int, CRecursionTable::Entry> entries;
  entries[2] = {Rational(1), Rational(1)};
  if (k_max >= 2) {
    // N_4^4 <= 324 C_P int f^2 Gamma, and D(4) = 3 C(4).
    entries[4] = {Rational(108), Rational(324)};
  }
  for (int k = 2; k < k_max; ++k) {
    const int p = 1 << k;
    const auto up = static_cast<unsigned>(p);
    const BigInt factor = 4 * (pow2(2 * up - 1) + pow2(4 * up - 5)) * (pow2(up) + pow2(3 * up - 1));
    const Rational d_next = Rational(factor) * entries.at(p).d_multiple + Rational(p) * p;
    entries[2 * p] = {d_next / (2 * p - 1), d_next};
  }
  return CRecursionTable(c_p, std::move(entries));
}

PetitBound bound_thm_petit(double p, double c_p) {
  require_c_p(c_p);
  if (!(p > 2.0)) throw DomainError("bound_thm_petit: requires p > 2");
  bool exact_power = false;
  const int j = ceil_log2(p, exact_power);
  const auto table = c_recursion(c_p, j);
  const Rational& c_mult = table.entry(1 << j).c_multiple;

  PetitBound out;
  const Rational rate = Rational(1) / c_mult;
  out.bound = make_bound(p, to_double(rate) / c_p, 1.0, BoundSource::thm_petit,
                         ExactBound{to_rational(p), rate, Rational(0)});
  const int k = j - 1;
  if (k > 1) {
    const long exponent = static_cast<long>(k) + 6 - 7L * (1L << (k + 1));
    out.closed_form_rate_times_cp = pow2_rational(exponent);
    out.closed_form_lambda = std::ldexp(1.0, static_cast<int>(exponent)) / c_p;
    if (rate < *out.closed_form_rate_times_cp) {
      throw ConsistencyError("bound_thm_petit: recursion rate below the closed-form floor");
    }
  }
  return out;
}

DecayBound bound_thm_grand(double p, double c_p) {
  require_c_p(c_p);
  if (!(p >= 2.0)) throw DomainError("bound_thm_grand: requires p >= 2");
  const Rational pr = to_rational(p);
  if (is_power_of_two(p)) {
    const Rational rate = Rational(2) / pr;
    const Rational log2_k = Rational(2) - Rational(4) / pr;
    return make_bound(p, 2.0 / (p * c_p), std::pow(4.0, 1.0 - 2.0 / p), BoundSource::thm_grand,
                      ExactBound{pr, rate, log2_k});
  }
  const Rational rate = Rational(1) / pr;
  const Rational log2_k = Rational(2) - Rational(2) / pr;
  return make_bound(p, 1.0 / (p * c_p), std::pow(4.0, 1.0 - 1.0 / p), BoundSource::thm_grand,
                    ExactBound{pr, rate, log2_k});
}

double delta_fn(double p) {
  if (!(p >= 0.0)) throw DomainError("delta: requires p >= 0");
  return std::max(1.0, std::exp2(p - 1.0));
}

Rational delta_exact(int p) {
  if (p < 0) throw DomainError("delta: requires p >= 0");
  return p <= 1 ? Rational(1) : Rational(pow2(static_cast<unsigned>(p - 1)));
}

MedianBound bound_thm_median(double p, double c_p) {
  require_c_p(c_p);
  if (!(p >= 2.0)) throw DomainError("bound_thm_median: requires p >= 2");
  const double delta = delta_fn(p - 2.0);
  const double two_p = std::exp2(p);
  const double x = 9.0 * c_p * p * p / 4.0;

  MedianBound out;
  out.a_p = 1.0;
  out.gamma_p = p * (p - 1.0) / (x * delta * two_p);
  // Balance: gamma = b (p/2) / (a 2^p X 2^{(p-2)/2} delta + C_P b), solved for b.
  const double denom = p / 2.0 - out.gamma_p * c_p;
  if (!(denom > 0.0)) throw ConsistencyError("bound_thm_median: balance equation has no solution");
  out.b_p = out.gamma_p * out.a_p * two_p * x * std::exp2((p - 2.0) / 2.0) * delta / denom;

  const double lambda_closed = 4.0 * (p - 1.0) / (9.0 * p * p * delta * two_p * c_p);
  const double lambda = out.gamma_p / p;
  if (std::fabs(lambda - lambda_closed) > 1e-12 * lambda_closed) {
    throw ConsistencyError("bound_thm_median: gamma_p / p disagrees with the closed-form rate");
  }
  const double q = 9.0 * p * p / 4.0;
  out.k_pow_p = 1.0 + q * (p - 1.0) * std::exp2((3.0 * p - 2.0) / 2.0) * delta /
                          (q * delta * std::exp2(p - 1.0) - p + 1.0);
  const double from_weights = (out.a_p + out.b_p) / out.a_p;
  if (std::fabs(out.k_pow_p - from_weights) > 1e-10 * out.k_pow_p) {
    throw ConsistencyError("bound_thm_median: (a_p + b_p)/a_p disagrees with the closed-form K_p^p");
  }

  std::optional<ExactBound> exact;
  if (p == std::floor(p) && p <= 512.0) {
    const int ip = static_cast<int>(p);
    const Rational rate = Rational(4 * (ip - 1)) /
                          (Rational(9 * ip * ip) * delta_exact(ip - 2) *
                           Rational(pow2(static_cast<unsigned>(ip))));
    exact = ExactBound{Rational(ip), rate, std::nullopt};
  }
  out.bound = make_bound(p, lambda_closed, std::pow(out.k_pow_p, 1.0 / p), BoundSource::thm_median,
                         std::move(exact));
  return out;
}

DecayBound dualize(const DecayBound& b) {
  const double q = b.p;
  if (!(q > 1.0)) throw DomainError("dualize: requires q > 1");
  std::optional<ExactBound> exact;
  if (b.exact) {
    ExactBound e = *b.exact;
    e.p = e.p / (e.p - 1);
    if (e.log2_K) *e.log2_K += 1;
    exact = std::move(e);
  }
  DecayBound out = b;
  out.p = q / (q - 1.0);
  out.K = 2.0 * b.K;
  out.source = BoundSource::dual;
  out.exact = std::move(exact);
  return out;
}

double interpolation_theta(double p0, double p1, double p) {
  if (!(p0 <= p && p <= p1)) {
    throw DomainError("riesz_thorin: p = " + format_real(p) + " outside [" + format_real(p0) +
                      ", " + format_real(p1) + "]");
  }
  if (p0 == p1) return 0.0;
  return (1.0 / p0 - 1.0 / p) / (1.0 / p0 - 1.0 / p1);
}

DecayBound riesz_thorin_interpolate(const DecayBound& b0, const DecayBound& b1, double p) {
  const double theta = interpolation_theta(b0.p, b1.p, p);
  const double k = std::pow(b0.K, 1.0 - theta) * std::pow(b1.K, theta);
  const double lambda = (1.0 - theta) * b0.lambda + theta * b1.lambda;
  std::optional<ExactBound> exact;
  if (b0.exact && b1.exact) {
    const Rational pr = to_rational(p);
    Rational th(0);
    if (b0.exact->p != b1.exact->p) {
      th = (1 / b0.exact->p - 1 / pr) / (1 / b0.exact->p - 1 / b1.exact->p);
    }
    ExactBound e{pr, (1 - th) * b0.exact->rate_times_cp + th * b1.exact->rate_times_cp,
                 std::nullopt};
    if (b0.exact->log2_K && b1.exact->log2_K) {
      e.log2_K = (1 - th) * *b0.exact->log2_K + th * *b1.exact->log2_K;
    }
    exact = std::move(e);
  }
  DecayBound out{p, lambda, k, BoundSource::interpolated, std::move(exact)};
  if (b0.source == BoundSource::probe || b1.source == BoundSource::probe) {
    out.source = BoundSource::probe;
  }
  return out;
}

DecayBound interpolated_grand(double p, double c_p) {
  if (!(p >= 2.0)) throw DomainError("interpolated_grand: requires p >= 2");
  bool exact_power = false;
  const int j = ceil_log2(p, exact_power);
  const int lo = exact_power ? j : j - 1;
  const double p0 = std::ldexp(1.0, lo);
  const double p1 = std::ldexp(1.0, j);
  return riesz_thorin_interpolate(bound_thm_grand(p0, c_p), bound_thm_grand(p1, c_p), p);
}

double kappa_lp(double p, double c_of_p) {
  if (!(p >= 1.0)) throw DomainError("kappa: requires p >= 1");
  if (!(c_of_p > 0.0)) throw DomainError("kappa: C(p) must be positive");
  return std::pow(c_of_p * (p - 1.0), p / 2.0);
}

double kappa_propagate(double p0, double kappa0, double p) {
  if (!(p0 >= 1.0)) throw DomainError("kappa_propagate: requires p0 >= 1");
  if (!(p >= p0)) throw DomainError("kappa_propagate: requires p >= p0");
  if (!(kappa0 > 0.0)) throw DomainError("kappa_propagate: kappa0 must be positive");
  return std::pow(6.0 * p / p0, p) * std::pow(kappa0, p / p0);
}

double b_relation(double b2, double p) {
  if (!(p >= 2.0)) throw DomainError("b_relation: requires p >= 2");
  if (!(b2 > 0.0)) throw DomainError("b_relation: B(2) must be positive");
  return p * p / 4.0 * b2;
}

Interval b_sandwich(double c_p) {
  require_c_p(c_p);
  return {c_p / 4.0, 9.0 * c_p};
}

std::pair<Rational, Rational> b_sandwich_exact(const Rational& c_p) {
  if (c_p <= 0) throw DomainError("b_sandwich: C_P must be positive");
  return {c_p / 4, 9 * c_p};
}

bool gronwall_power_inequality(int k) {
  if (k < 2) throw DomainError("gronwall_power_inequality: requires k >= 2");
  if (k > 24) throw ResourceError("gronwall_power_inequality: k too large");
  const auto n = static_cast<unsigned>(1u << k);
  const BigInt lhs = pow2(2 * (n - 2));
  const BigInt rhs = 1 + 3 * pow2(2 * (n - 4));
  return lhs >= rhs;
}

std::vector<DecayBound> all_bounds(double p, double c_p) {
  require_c_p(c_p);
  if (!(p > 1.0)) throw DomainError("bounds: p must be > 1, got " + format_real(p));
  std::vector<DecayBound> out;
  if (p < 2.0) {
    double q = p / (p - 1.0);
    if (std::fabs(q - std::round(q)) <= 1e-12 * q) q = std::round(q);
    for (const auto& b : all_bounds(q, c_p)) {
      DecayBound d = dualize(b);
      d.p = p;
      out.push_back(std::move(d));
    }
    return out;
  }
  if (p > 2.0) out.push_back(bound_thm_petit(p, c_p).bound);
  out.push_back(bound_thm_grand(p, c_p));
  out.push_back(bound_thm_median(p, c_p).bound);
  if (p > 2.0 && !is_power_of_two(p)) out.push_back(interpolated_grand(p, c_p));
  return out;
}

nlohmann::json to_json(const DecayBound& b) {
  nlohmann::json j;
  j["p"] = b.p;
  j["lambda"] = b.lambda;
  j["K"] = b.K;
  j["source"] = to_string(b.source);
  if (b.exact) {
    nlohmann::json e;
    e["p"] = to_string(b.exact->p);
    e["lambda_times_C_P"] = to_string(b.exact->rate_times_cp);
    if (b.exact->log2_K) e["log2_K"] = to_string(*b.exact->log2_K);
    j["exact"] = std::move(e);
  }
  return j;
}

nlohmann::json to_json(const CRecursionTable& t) {
  nlohmann::json j;
  j["C_P"] = t.poincare_constant();
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [p, e] : t.entries()) {
    entries.push_back({{"p", p},
                       {"C_over_C_P", to_string(e.c_multiple)},
                       {"D_over_C_P", to_string(e.d_multiple)},
                       {"C", t.c(p)}});
  }
  j["entries"] = std::move(entries);
  return j;
}

}  // namespace pdecay
