#pragma once

// Closed-form predictions of the marginal and concentration theorems, and
// comparison of those predictions against measured values.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "convexlab/concentration.hpp"

namespace convexlab {

class PredictError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Theorem {
  ExtABP,
  Sodin,
  TwoConvex,
  TwoConvexStrong,
  PConvex,
  PConvexStrong,
  Lp,
  LpStrong,
  TwoFourConvex,
  Cor24,
  PConvexVariance
};

inline const char* to_string(Theorem t) {
  switch (t) {
    case Theorem::ExtABP: return "ExtABP";
    case Theorem::Sodin: return "Sodin";
    case Theorem::TwoConvex: return "TwoConvex";
    case Theorem::TwoConvexStrong: return "TwoConvexStrong";
    case Theorem::PConvex: return "PConvex";
    case Theorem::PConvexStrong: return "PConvexStrong";
    case Theorem::Lp: return "Lp";
    case Theorem::LpStrong: return "LpStrong";
    case Theorem::TwoFourConvex: return "TwoFourConvex";
    case Theorem::Cor24: return "Cor24";
    case Theorem::PConvexVariance: return "PConvexVariance";
  }
  return "?";
}

inline Theorem theorem_from_string(const std::string& s) {
  for (Theorem t : {Theorem::ExtABP, Theorem::Sodin, Theorem::TwoConvex, Theorem::TwoConvexStrong, Theorem::PConvex,
                    Theorem::PConvexStrong, Theorem::Lp, Theorem::LpStrong, Theorem::TwoFourConvex, Theorem::Cor24,
                    Theorem::PConvexVariance})
    if (s == to_string(t)) return t;
  throw PredictError("unknown theorem '" + s + "'");
}

enum class GeometryClaim { InscribedRadius2, InscribedRadiusP, Diam2Convex, DiamTypeS, TOpBound, VarQBound };

inline const char* to_string(GeometryClaim g) {
  switch (g) {
    case GeometryClaim::InscribedRadius2: return "InscribedRadius2";
    case GeometryClaim::InscribedRadiusP: return "InscribedRadiusP";
    case GeometryClaim::Diam2Convex: return "Diam2Convex";
    case GeometryClaim::DiamTypeS: return "DiamTypeS";
    case GeometryClaim::TOpBound: return "TOpBound";
    case GeometryClaim::VarQBound: return "VarQBound";
  }
  return "?";
}

inline GeometryClaim geometry_claim_from_string(const std::string& s) {
  for (GeometryClaim g : {GeometryClaim::InscribedRadius2, GeometryClaim::InscribedRadiusP, GeometryClaim::Diam2Convex,
                          GeometryClaim::DiamTypeS, GeometryClaim::TOpBound, GeometryClaim::VarQBound})
    if (s == to_string(g)) return g;
  throw PredictError("unknown geometry claim '" + s + "'");
}

// Exponents of the general-body polynomial rate. Documentation
// only; nothing below reads them.
inline constexpr double kKappa1 = 1.0 / 60, kKappa2 = 1.0 / 15, kKappa3 = 1.0 / 24, kKappa4 = 1.0 / 24;

/// Exact rational with normalized sign and gcd.
class Rational {
 public:
  Rational(std::int64_t num = 0, std::int64_t den = 1) : num_(num), den_(den) {
    if (den_ == 0) throw PredictError("rational with zero denominator");
    if (den_ < 0) {
      num_ = -num_;
      den_ = -den_;
    }
    const std::int64_t g = std::gcd(num_ < 0 ? -num_ : num_, den_);
    if (g > 1) {
      num_ /= g;
      den_ /= g;
    }
  }

  /// Continued-fraction recovery with denominator at most max_den; empty
  /// unless the rational reproduces x to a few ulps.
  static std::optional<Rational> from_double(double x, std::int64_t max_den = 10000) {
    if (!std::isfinite(x) || std::abs(x) > 1e9) return std::nullopt;
    std::int64_t h0 = 0, h1 = 1, k0 = 1, k1 = 0;
    double r = x;
    for (int i = 0; i < 40; ++i) {
      const double a = std::floor(r);
      const auto ai = static_cast<std::int64_t>(a);
      const std::int64_t h2 = ai * h1 + h0, k2 = ai * k1 + k0;
      if (k2 > max_den) break;
      h0 = h1;
      h1 = h2;
      k0 = k1;
      k1 = k2;
      const double approx = static_cast<double>(h1) / static_cast<double>(k1);
      if (std::abs(approx - x) <= 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x)))
        return Rational(h1, k1);
      if (r - a < 1e-300) break;
      r = 1.0 / (r - a);
    }
    return std::nullopt;
  }

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  double value() const { return static_cast<double>(num_) / static_cast<double>(den_); }
  std::string str() const { return den_ == 1 ? std::to_string(num_) : std::to_string(num_) + "/" + std::to_string(den_); }

  friend Rational operator+(Rational a, Rational b) { return {a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_}; }
  friend Rational operator-(Rational a, Rational b) { return {a.num_ * b.den_ - b.num_ * a.den_, a.den_ * b.den_}; }
  friend Rational operator*(Rational a, Rational b) { return {a.num_ * b.num_, a.den_ * b.den_}; }
  friend Rational operator/(Rational a, Rational b) {
    if (b.num_ == 0) throw PredictError("rational division by zero");
    return {a.num_ * b.den_, a.den_ * b.num_};
  }
  friend bool operator<(Rational a, Rational b) { return a.num_ * b.den_ < b.num_ * a.den_; }
  friend bool operator==(Rational a, Rational b) { return a.num_ == b.num_ && a.den_ == b.den_; }

 private:
  std::int64_t num_, den_;
};

/// Exponent value carried exactly when every ingredient is rational.
struct Exponent {
  double value = 0.0;
  std::optional<Rational> exact;

  Exponent(double v) : value(v), exact(Rational::from_double(v)) {}
  Exponent(Rational r) : value(r.value()), exact(r) {}
  Exponent(int v) : Exponent(Rational(v)) {}

  friend Exponent combine(const Exponent& a, const Exponent& b, double v, std::optional<Rational> r) {
    Exponent e(0);
    e.exact = (a.exact && b.exact) ? r : std::nullopt;
    e.value = e.exact ? e.exact->value() : v;
    return e;
  }
  friend Exponent operator+(const Exponent& a, const Exponent& b) {
    return combine(a, b, a.value + b.value, a.exact && b.exact ? std::optional(*a.exact + *b.exact) : std::nullopt);
  }
  friend Exponent operator-(const Exponent& a, const Exponent& b) {
    return combine(a, b, a.value - b.value, a.exact && b.exact ? std::optional(*a.exact - *b.exact) : std::nullopt);
  }
  friend Exponent operator*(const Exponent& a, const Exponent& b) {
    return combine(a, b, a.value * b.value, a.exact && b.exact ? std::optional(*a.exact * *b.exact) : std::nullopt);
  }
  friend Exponent operator/(const Exponent& a, const Exponent& b) {
    return combine(a, b, a.value / b.value, a.exact && b.exact ? std::optional(*a.exact / *b.exact) : std::nullopt);
  }
  friend Exponent max(const Exponent& a, const Exponent& b) { return a.value >= b.value ? a : b; }
  friend Exponent min(const Exponent& a, const Exponent& b) { return a.value <= b.value ? a : b; }
};

/// Reads "9/8", "0.125" or "2".
inline double parse_real(const std::string& s) {
  const auto slash = s.find('/');
  try {
    std::size_t used = 0;
    if (slash == std::string::npos) {
      const double v = std::stod(s, &used);
      if (used != s.size()) throw PredictError("");
      return v;
    }
    const std::string a = s.substr(0, slash), b = s.substr(slash + 1);
    const double num = std::stod(a, &used);
    if (used != a.size()) throw PredictError("");
    const double den = std::stod(b, &used);
    if (used != b.size() || den == 0.0) throw PredictError("");
    return num / den;
  } catch (const std::exception&) {
    throw PredictError("not a real number: '" + s + "'");
  }
}

using Inputs = std::map<std::string, double>;

struct PredictionReport {
  std::string name;  // theorem or geometry claim
  Inputs inputs;     // everything read, including defaulted constants
  std::map<std::string, double> outputs;
  std::map<std::string, std::string> exact;  // rational forms of exponent-like outputs
  std::map<std::string, std::vector<std::string>> not_evaluated;  // output -> missing inputs
  std::optional<RhoConvention> convention;

  double at(const std::string& key) const {
    const auto it = outputs.find(key);
    if (it == outputs.end()) throw PredictError(name + ": no output '" + key + "'");
    return it->second;
  }
  bool has(const std::string& key) const { return outputs.count(key) != 0; }
};

/// Rejects p outside a theorem's hypothesis range.
inline void validate_theorem_p(Theorem t, double p) {
  const std::string name = to_string(t);
  switch (t) {
    case Theorem::PConvex:
    case Theorem::PConvexStrong:
      if (!(p >= 2.0)) throw PredictError(name + ": requires p >= 2");
      break;
    case Theorem::Lp:
    case Theorem::LpStrong:
      if (!(p > 1.0 && std::isfinite(p))) throw PredictError(name + ": requires 1 < p < infinity");
      break;
    case Theorem::TwoFourConvex:
    case Theorem::PConvexVariance:
      if (!(p >= 2.0 && p < 4.0)) throw PredictError(name + ": requires 2 ≤ p < 4 (p-convex body with constant alpha)");
      break;
    case Theorem::Cor24:
      if (!(p > 1.0 && p <= 16.0 / 13.0 + 1e-15)) throw PredictError(name + ": requires 1 < p ≤ 16/13");
      break;
    default:
      break;
  }
}

/// rho convention a theorem's concentration statement is phrased in; none for Sodin.
inline std::optional<RhoConvention> theorem_convention(Theorem t) {
  switch (t) {
    case Theorem::Sodin: return std::nullopt;
    case Theorem::TwoFourConvex:
    case Theorem::Cor24:
    case Theorem::PConvexVariance: return RhoConvention::RootMeanSquare;
    default: return RhoConvention::MeanAbs;
  }
}

namespace detail {

// Input lookup with defaults for universal constants and a list of what is missing.
class PredictContext {
 public:
  PredictContext(const Inputs& in, PredictionReport& rep) : in_(in), rep_(rep) {}

  /// Throws listing every missing symbol.
  void require(std::initializer_list<const char*> names) {
    std::vector<std::string> missing;
    for (const char* k : names)
      if (!in_.count(k)) missing.emplace_back(k);
    if (!missing.empty()) {
      std::string msg = rep_.name + ": missing required input(s):";
      for (const auto& m : missing) msg += " " + m;
      throw PredictError(msg);
    }
    for (const char* k : names) {
      const double v = in_.at(k);
      if (!std::isfinite(v)) throw PredictError(rep_.name + ": input " + std::string(k) + " is not finite");
      rep_.inputs[k] = v;
    }
  }

  /// True when all names are present; otherwise records the output as not evaluated.
  bool available(const std::string& output, std::initializer_list<const char*> names) {
    std::vector<std::string> missing;
    for (const char* k : names)
      if (!in_.count(k)) missing.emplace_back(k);
    if (!missing.empty()) {
      rep_.not_evaluated[output] = missing;
      return false;
    }
    for (const char* k : names) rep_.inputs[k] = in_.at(k);
    return true;
  }

  double get(const char* k) const { return in_.at(k); }
  std::optional<double> optional(const char* k) {
    if (!in_.count(k)) return std::nullopt;
    rep_.inputs[k] = in_.at(k);
    return in_.at(k);
  }
  /// Universal constant, 1 unless overridden.
  double constant(const char* k) {
    const double v = in_.count(k) ? in_.at(k) : 1.0;
    if (!(v > 0.0)) throw PredictError(rep_.name + ": constant " + std::string(k) + " must be positive");
    rep_.inputs[k] = v;
    return v;
  }

  void out(const std::string& k, double v) { rep_.outputs[k] = v; }
  void out(const std::string& k, const Exponent& e) {
    rep_.outputs[k] = e.value;
    if (e.exact) rep_.exact[k] = e.exact->str();
  }

  void check(bool ok, const std::string& what) const {
    if (!ok) throw PredictError(rep_.name + ": " + what);
  }

 private:
  const Inputs& in_;
  PredictionReport& rep_;
};

inline double log_term(double n, double delta, double mu) { return std::log(n) + std::log(1.0 / delta) + mu; }

inline void check_n(PredictContext& c, double n) { c.check(n >= 2.0, "n must be at least 2"); }
inline void check_delta(PredictContext& c, double delta) { c.check(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)"); }
inline void check_alpha(PredictContext& c, double alpha) { c.check(alpha > 0.0, "alpha must be positive"); }

// Tail form and the Linnik threshold with the Sodin log term. branch1 and
// branch2 are the two arguments of the min without the rho factor.
inline void linnik(PredictContext& c, const std::string& suffix, double rho, double branch1, double branch2) {
  c.out("T_branch1" + suffix, rho * branch1);
  c.out("T_branch2" + suffix, rho * branch2);
  c.out("T" + suffix, rho * std::min(branch1, branch2));
}

inline bool sodin_inputs(PredictContext& c) {
  if (!c.available("T", {"n", "delta", "mu", "rho"})) return false;
  check_n(c, c.get("n"));
  check_delta(c, c.get("delta"));
  c.check(c.get("mu") > 0.0, "mu must be positive");
  c.check(c.get("rho") > 0.0, "rho must be positive");
  return true;
}

inline void fraction_bound(PredictContext& c, double raw) {
  c.out("bound_raw", raw);
  c.out("bound", std::clamp(raw, 0.0, 1.0));
}

}  // namespace detail

/// Evaluates a theorem's displayed formulas. Universal constants (c, c1, c2,
/// c3, C, C1, c_branch) default to 1. Outputs whose optional inputs are
/// absent are listed in not_evaluated.
inline PredictionReport predict(Theorem theorem, const Inputs& in) {
  using detail::PredictContext;
  PredictionReport rep;
  rep.name = to_string(theorem);
  PredictContext c(in, rep);
  if (const auto it = in.find("p"); it != in.end()) validate_theorem_p(theorem, it->second);

  switch (theorem) {
    case Theorem::ExtABP: {
      c.require({"n", "delta", "C_iso"});
      const double n = c.get("n"), delta = c.get("delta"), ciso = c.get("C_iso");
      detail::check_n(c, n);
      c.check(delta > 0.0, "delta must be positive");
      c.check(ciso >= 1.0, "C_iso must be at least 1");
      if (auto eps = c.optional("eps")) c.check(*eps < delta, "requires eps < delta");
      const double C1 = c.constant("C1"), c3 = c.constant("c3");
      c.check(delta < c.constant("c2"), "requires delta < c2");
      detail::fraction_bound(c, 1.0 - C1 * ciso * std::sqrt(n) * std::log(n) * std::exp(-c3 * n * delta * delta / (ciso * ciso)));
      rep.convention = RhoConvention::MeanAbs;
      break;
    }
    case Theorem::Sodin: {
      c.require({"n", "delta", "mu", "rho", "C_iso", "nu", "tau"});
      const double n = c.get("n"), delta = c.get("delta"), mu = c.get("mu"), rho = c.get("rho"), ciso = c.get("C_iso");
      const Exponent nu(c.get("nu")), tau(c.get("tau"));
      detail::check_n(c, n);
      detail::check_delta(c, delta);
      c.check(mu > 0.0 && rho > 0.0, "mu and rho must be positive");
      c.check(nu.value > 0.0 && tau.value > 0.0, "nu and tau must be positive");
      c.optional("A");
      c.optional("B");
      const double cc = c.constant("c"), cb = c.constant("c_branch");
      const Exponent gamma = nu / (Exponent(2) * max(tau, Exponent(1)));
      c.out("gamma", gamma);
      const double b1 = std::pow(cc * n * delta * delta * delta * delta / (ciso * ciso * detail::log_term(n, delta, mu)), 1.0 / 6.0);
      const double b2 = std::pow(cb * delta, (gamma / nu).value) * std::pow(n, gamma.value);
      detail::linnik(c, "", rho, b1, b2);
      c.out("fraction_lower_bound", 1.0 - std::exp(-mu));
      break;
    }
    case Theorem::TwoConvex: {
      c.require({"n", "alpha", "lambda"});
      const double n = c.get("n"), alpha = c.get("alpha"), lambda = c.get("lambda");
      detail::check_n(c, n);
      detail::check_alpha(c, alpha);
      c.check(lambda > 0.0 && lambda < 0.5, "lambda must lie in (0, 1/2)");
      const double c1 = c.constant("c1");
      c.out("eps", c1 * std::sqrt(std::log(n)) / std::sqrt(alpha) / lambda * std::pow(n, -lambda));
      c.out("eps_n_exponent", Exponent(-lambda));
      if (c.available("bound", {"delta"})) {
        const double delta = c.get("delta");
        c.check(delta > 0.0 && delta < c.constant("c2"), "delta must lie in (0, c2)");
        const double c3 = c.constant("c3");
        detail::fraction_bound(c, 1.0 - std::exp(-c3 * alpha * lambda * lambda * std::pow(n, 2 * lambda) * delta * delta));
      }
      rep.convention = RhoConvention::MeanAbs;
      break;
    }
    case Theorem::TwoConvexStrong: {
      c.require({"alpha", "lambda"});
      const double alpha = c.get("alpha"), lambda = c.get("lambda");
      detail::check_alpha(c, alpha);
      c.check(lambda > 0.0 && lambda < 0.5, "lambda must lie in (0, 1/2)");
      const double cc = c.constant("c");
      c.out("nu", Exponent(2) * Exponent(lambda));
      c.out("tau", Exponent(2));
      c.out("A", 4.0);
      c.out("B", cc * alpha * lambda * lambda);
      if (detail::sodin_inputs(c)) {
        const double n = c.get("n"), delta = c.get("delta"), mu = c.get("mu");
        const double d4 = std::pow(delta, 4);
        const double b1 = std::pow(cc * alpha * lambda * lambda * d4 / detail::log_term(n, delta, mu), 1.0 / 6.0) * std::pow(n, lambda / 3);
        const double b2 = std::pow(c.constant("c_branch") * delta, 0.25) * std::pow(n, lambda / 2);
        detail::linnik(c, "", c.get("rho"), b1, b2);
        c.out("fraction_lower_bound", 1.0 - std::exp(-mu));
      }
      rep.convention = RhoConvention::MeanAbs;
      break;
    }
    case Theorem::PConvex:
    case Theorem::PConvexStrong: {
      const bool strong = theorem == Theorem::PConvexStrong;
      if (strong) c.require({"p", "alpha", "s", "T_s"});
      else c.require({"n", "p", "alpha", "s", "T_s"});
      const Exponent p(c.get("p")), s(c.get("s"));
      const double alpha = c.get("alpha"), Ts = c.get("T_s");
      detail::check_alpha(c, alpha);
      c.check(Ts >= 1.0, "T_s must be at least 1");
      c.check(s.value > 2 * p.value / (p.value + 2) && s.value <= 2.0, "requires 2p/(p+2) < s <= 2");
      const Exponent one(1), two(2);
      if (!strong) {
        const double n = c.get("n");
        detail::check_n(c, n);
        const Exponent k = Exponent(Rational(1, 2)) + one / p - one / s;
        c.out("eps_n_exponent", Exponent(0) - k);
        c.out("eps", c.constant("c1") * Ts * std::pow(std::log(n), 1 / p.value) * std::pow(alpha, -1 / p.value) * std::pow(n, -k.value));
        if (c.available("bound", {"delta"})) {
          const double delta = c.get("delta");
          c.check(delta > 0.0 && delta < c.constant("c2"), "delta must lie in (0, c2)");
          const Exponent e = one + two / p - two / s;
          c.out("bound_n_exponent", e);
          detail::fraction_bound(c, 1.0 - std::pow(n, 2.5) * std::exp(-c.constant("c3") * std::pow(n, e.value) * delta * delta *
                                                                       std::pow(alpha, 2 / p.value) / (Ts * Ts)));
        }
      } else {
        const double cc = c.constant("c");
        c.out("nu", one + p / two - p / s);
        c.out("tau", p);
        c.out("A", 4.0);
        c.out("B", alpha * std::pow(cc / Ts, p.value));
        if (detail::sodin_inputs(c)) {
          const double n = c.get("n"), delta = c.get("delta"), mu = c.get("mu");
          const Exponent e1 = Exponent(Rational(1, 6)) + one / (Exponent(3) * p) - one / (Exponent(3) * s);
          const Exponent e2 = Exponent(Rational(1, 4)) + one / (two * p) - one / (two * s);
          c.out("T_n_exponent1", e1);
          c.out("T_n_exponent2", e2);
          const double b1 = std::pow(cc * std::pow(alpha, 2 / p.value) / (Ts * Ts) * std::pow(delta, 4) / detail::log_term(n, delta, mu), 1.0 / 6.0) *
                            std::pow(n, e1.value);
          const double b2 = std::pow(c.constant("c_branch") * delta, 1 / (2 * p.value)) * std::pow(n, e2.value);
          detail::linnik(c, "", c.get("rho"), b1, b2);
          c.out("fraction_lower_bound", 1.0 - std::exp(-mu));
        }
      }
      rep.convention = RhoConvention::MeanAbs;
      break;
    }
    case Theorem::Lp:
    case Theorem::LpStrong: {
      const bool strong = theorem == Theorem::LpStrong;
      if (strong) c.require({"p"});
      else c.require({"n", "p"});
      const Exponent p(c.get("p")), one(1), two(2);
      const Exponent q = p / (p - one);
      const Exponent r = max(p, q);
      c.out("q", q);
      c.out("r", r);
      const double rq = r.value * q.value;
      if (!strong) {
        const double n = c.get("n");
        detail::check_n(c, n);
        c.out("eps_n_exponent", Exponent(0) - one / r);
        c.out("eps", c.constant("c1") * std::sqrt(rq) * std::pow(std::log(n), 1 / std::max(p.value, 2.0)) / std::pow(n, 1 / r.value));
        if (c.available("bound", {"delta"})) {
          const double delta = c.get("delta");
          c.check(delta > 0.0 && delta < c.constant("c2"), "delta must lie in (0, c2)");
          c.out("bound_n_exponent", two / r);
          detail::fraction_bound(c, 1.0 - std::pow(n, 2.5) * std::exp(-c.constant("c3") / rq * std::pow(n, 2 / r.value) * delta * delta));
        }
      } else {
        const double cc = c.constant("c");
        c.out("nu", min(two / q, one));
        c.out("tau", max(p, two));
        c.out("A", 4.0);
        c.out("B", std::pow(q.value, -2) * std::pow(cc * p.value, -p.value / 2));
        if (detail::sodin_inputs(c)) {
          const double n = c.get("n"), delta = c.get("delta"), mu = c.get("mu");
          c.out("T_n_exponent1", one / (Exponent(3) * r));
          c.out("T_n_exponent2", one / (two * r));
          const double b1 = std::pow(cc * std::pow(delta, 4) / rq / detail::log_term(n, delta, mu), 1.0 / 6.0) * std::pow(n, 1 / (3 * r.value));
          const double b2 = c.constant("c_branch") * std::pow(delta, 1 / std::max(p.value, 2.0)) * std::pow(n, 1 / (2 * r.value));
          detail::linnik(c, "", c.get("rho"), b1, b2);
          c.out("fraction_lower_bound", 1.0 - std::exp(-mu));
        }
      }
      rep.convention = RhoConvention::MeanAbs;
      break;
    }
    case Theorem::TwoFourConvex:
    case Theorem::Cor24: {
      const bool cor = theorem == Theorem::Cor24;
      c.require({"p"});
      const double pv = c.get("p");
      const Exponent one(1), two(2);
      if (cor) {
        c.out("nu", Exponent(Rational(1, 8)));
        c.out("tau", Exponent(Rational(1, 2)));
        c.out("A", 2.0);
      } else {
        c.require({"alpha"});
        detail::check_alpha(c, c.get("alpha"));
        const Exponent p(pv);
        const Exponent q = p / (p - one);
        c.out("q", q);
        c.out("nu", Exponent(Rational(3, 8)) - one / (two * q));
        c.out("tau", Exponent(Rational(1, 2)));
        c.out("A", 2.0);
      }
      const double cc = c.constant("c");
      // Cor24 is the p = 2 case of TwoFourConvex with alpha = c (p - 1).
      const double alpha = cor ? c.optional("alpha").value_or(cc * (pv - 1.0)) : c.get("alpha");
      const double pe = cor ? 2.0 : pv;  // uniform-convexity exponent
      if (cor) rep.inputs["alpha"] = alpha;
      if (c.available("B", {"n"})) {
        const double n = c.get("n");
        detail::check_n(c, n);
        double clamp = std::log(1.0 + n);
        if (!cor) {
          const double f = c.optional("f").value_or(clamp);
          rep.inputs["f"] = f;
          clamp = std::min(f, clamp);
        }
        c.out("B", cor ? cc * std::pow(pv - 1.0, 0.25) / std::sqrt(clamp) : cc * std::pow(alpha, 1 / (2 * pe)) / std::sqrt(clamp));
        if (detail::sodin_inputs(c)) {
          const double delta = c.get("delta"), mu = c.get("mu");
          const Exponent p(pe);
          const Exponent q = p / (p - one);
          const Exponent e1 = one / (Exponent(6) * p);
          const Exponent e2 = Exponent(Rational(3, 16)) - one / (Exponent(4) * q);
          c.out("T_n_exponent1", e1);
          c.out("T_n_exponent2", e2);
          const double b1 = std::pow(cc * std::pow(alpha, 1 / pe) / clamp * std::pow(delta, 4) / detail::log_term(n, delta, mu), 1.0 / 6.0) *
                            std::pow(n, e1.value);
          const double b2 = std::sqrt(c.constant("c_branch") * delta) * std::pow(n, e2.value);
          detail::linnik(c, "", c.get("rho"), b1, b2);
          c.out("fraction_lower_bound", 1.0 - std::exp(-mu));
        }
      }
      rep.convention = RhoConvention::RootMeanSquare;
      break;
    }
    case Theorem::PConvexVariance: {
      c.require({"n", "p", "alpha", "L_K"});
      const double n = c.get("n"), pv = c.get("p"), alpha = c.get("alpha"), LK = c.get("L_K");
      detail::check_n(c, n);
      detail::check_alpha(c, alpha);
      c.check(LK > 0.0, "L_K must be positive");
      const Exponent p(pv), one(1), two(2);
      const Exponent q = p / (p - one);
      const double f = c.optional("f").value_or(std::log(1.0 + n));
      rep.inputs["f"] = f;
      const double m = std::min(f, std::log(1.0 + n));
      const double C = c.constant("C"), cc = c.constant("c");
      c.out("q", q);
      const Exponent top_e = one / (two * q);
      const Exponent var_e = Exponent(Rational(1, 4)) + one / q;
      c.out("T_op_n_exponent", top_e);
      c.out("varq_n_exponent", var_e);
      c.out("T_op_bound", C * std::pow(n, top_e.value) * std::pow(alpha, -1 / (2 * pv)) / std::sqrt(LK) * std::sqrt(m));
      c.out("varq_bound", C * std::pow(n, var_e.value) * std::pow(alpha, -1 / pv) * LK * m);
      c.out("nu", Exponent(Rational(3, 8)) - one / (two * q));
      c.out("tau", Exponent(Rational(1, 2)));
      c.out("A", 2.0);
      c.out("B", cc * std::sqrt(LK) * std::pow(alpha, 1 / (2 * pv)) / std::sqrt(m));
      rep.convention = RhoConvention::RootMeanSquare;
      break;
    }
  }
  return rep;
}

/// Inscribed-radius, diameter and half-way position bounds.
inline PredictionReport predict_geometry(GeometryClaim claim, const Inputs& in) {
  using detail::PredictContext;
  PredictionReport rep;
  rep.name = to_string(claim);
  PredictContext c(in, rep);
  switch (claim) {
    case GeometryClaim::InscribedRadius2: {
      c.require({"n", "alpha", "L_K"});
      const double n = c.get("n"), alpha = c.get("alpha"), LK = c.get("L_K");
      detail::check_alpha(c, alpha);
      c.out("inscribed_radius", c.constant("c") * std::sqrt(alpha * n) * LK);
      c.out("L_K_bound", c.constant("C") / std::sqrt(alpha));
      break;
    }
    case GeometryClaim::InscribedRadiusP: {
      c.require({"n", "p", "alpha", "L_K"});
      const double n = c.get("n"), alpha = c.get("alpha"), LK = c.get("L_K");
      const Exponent p(c.get("p")), one(1);
      c.check(p.value >= 2.0, "requires p >= 2");
      detail::check_alpha(c, alpha);
      c.out("inscribed_radius", c.constant("c") * std::pow(alpha * n, 1 / p.value) * LK);
      const Exponent e = Exponent(Rational(1, 2)) - one / p;
      c.out("L_K_bound_n_exponent", e);
      c.out("L_K_bound", c.constant("C") * std::pow(n, e.value) * std::pow(alpha, -1 / p.value));
      break;
    }
    case GeometryClaim::Diam2Convex: {
      c.require({"n", "lambda"});
      const double n = c.get("n"), lambda = c.get("lambda");
      c.check(lambda > 0.0 && lambda < 0.5, "lambda must lie in (0, 1/2)");
      c.out("diam_bound", c.constant("C") * std::pow(n, 1 - lambda) / lambda);
      break;
    }
    case GeometryClaim::DiamTypeS: {
      c.require({"n", "s", "T_s"});
      const double n = c.get("n"), Ts = c.get("T_s");
      const Exponent s(c.get("s"));
      c.check(s.value >= 1.0 && s.value <= 2.0, "requires 1 <= s <= 2");
      const Exponent e = Exponent(1) / s;
      c.out("diam_n_exponent", e);
      c.out("diam_bound", c.constant("C") * std::pow(n, e.value) * Ts);
      break;
    }
    case GeometryClaim::TOpBound:
    case GeometryClaim::VarQBound: {
      Inputs copy = in;
      PredictionReport full = predict(Theorem::PConvexVariance, copy);
      full.name = rep.name;
      const char* key = claim == GeometryClaim::TOpBound ? "T_op_bound" : "varq_bound";
      const char* ekey = claim == GeometryClaim::TOpBound ? "T_op_n_exponent" : "varq_n_exponent";
      rep.inputs = full.inputs;
      rep.outputs = {{key, full.at(key)}, {ekey, full.at(ekey)}, {"q", full.at("q")}};
      for (const char* k : {ekey, "q"})
        if (full.exact.count(k)) rep.exact[k] = full.exact.at(k);
      rep.convention = RhoConvention::RootMeanSquare;
      break;
    }
  }
  return rep;
}

/// Tail form A exp(-B n^nu t^tau) at t, from a report that carries it.
inline double predicted_tail(const PredictionReport& r, double n, double t) {
  return r.at("A") * std::exp(-r.at("B") * std::pow(n, r.at("nu")) * std::pow(t, r.at("tau")));
}

enum class ClaimDirection { LowerBound, UpperBound, Estimate };

/// How a measured value relates to each output: fractions and radii are lower
/// bounds, eps, tails, diameters and operator or variance bounds are ceilings.
inline ClaimDirection claim_direction(const std::string& key) {
  if (key == "bound" || key == "fraction_lower_bound" || key == "inscribed_radius") return ClaimDirection::LowerBound;
  if (key == "eps" || key == "diam_bound" || key == "T_op_bound" || key == "varq_bound" || key == "L_K_bound" ||
      key.rfind("tail@", 0) == 0)
    return ClaimDirection::UpperBound;
  return ClaimDirection::Estimate;
}

struct ComparisonRow {
  std::string key;
  double measured = 0.0;
  double predicted = 0.0;
  double ratio = 0.0;  // measured / predicted
  ClaimDirection direction = ClaimDirection::Estimate;
  std::optional<bool> pass;
};

struct Comparison {
  std::string name;
  std::vector<ComparisonRow> rows;
  bool all_pass() const {
    for (const auto& r : rows)
      if (r.pass && !*r.pass) return false;
    return true;
  }
};

/// Measured keys must be outputs of the prediction, or "tail@<t>" when the
/// prediction carries a tail form and n. Pass flags only for bound claims.
inline Comparison compare(const PredictionReport& pred, const std::map<std::string, double>& measured,
                          std::optional<RhoConvention> measured_convention = std::nullopt) {
  if (measured_convention && pred.convention && *measured_convention != *pred.convention)
    throw PredictError(std::string("compare: rho convention mismatch (prediction ") + to_string(*pred.convention) +
                       ", measurement " + to_string(*measured_convention) + ")");
  Comparison out;
  out.name = pred.name;
  for (const auto& [key, value] : measured) {
    ComparisonRow row;
    row.key = key;
    row.measured = value;
    if (key.rfind("tail@", 0) == 0) {
      const auto nit = pred.inputs.find("n");
      if (nit == pred.inputs.end() || !pred.has("A") || !pred.has("B"))
        throw PredictError("compare: '" + key + "' needs a tail form and n in the prediction");
      row.predicted = predicted_tail(pred, nit->second, parse_real(key.substr(5)));
    } else {
      if (!pred.has(key)) throw PredictError("compare: measured key '" + key + "' is not a prediction output");
      row.predicted = pred.at(key);
    }
    row.ratio = row.predicted != 0.0 ? value / row.predicted : std::numeric_limits<double>::infinity();
    row.direction = claim_direction(key);
    if (row.direction == ClaimDirection::LowerBound) row.pass = value >= row.predicted;
    if (row.direction == ClaimDirection::UpperBound) row.pass = value <= row.predicted;
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace convexlab
