#pragma once

// Thin-shell profiles, tail-form fits and empirical checks of concentration
// and functional inequalities on uniform samples.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "convexlab/body.hpp"
#include "convexlab/sampler.hpp"

namespace convexlab {

class ConcentrationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// rho = E|X|/sqrt(n) (MeanAbs) or sqrt(E|X|^2/n) (RootMeanSquare).
enum class RhoConvention { MeanAbs, RootMeanSquare };

inline const char* to_string(RhoConvention c) {
  return c == RhoConvention::MeanAbs ? "MeanAbs" : "RootMeanSquare";
}

inline RhoConvention rho_convention_from_string(const std::string& s) {
  if (s == "MeanAbs") return RhoConvention::MeanAbs;
  if (s == "RootMeanSquare") return RhoConvention::RootMeanSquare;
  throw ConcentrationError("unknown rho convention '" + s + "'");
}

/// Fitted form A exp(-B n^nu t^tau).
struct TailFit {
  double A = 0.0;
  double B = 0.0;
  double nu = 0.0;
  double tau = 0.0;
  double residual = std::numeric_limits<double>::infinity();
  int points = 0;
};

struct ConcentrationProfile {
  int n = 0;
  RhoConvention convention = RhoConvention::MeanAbs;
  double rho = 0.0;
  std::size_t count = 0;
  std::vector<double> t_grid;
  std::vector<double> tail;  // P(| |X|/sqrt(n) - rho | >= t rho)
  double eps_star = std::numeric_limits<double>::quiet_NaN();  // smallest eps with tail(eps) <= eps
  std::optional<TailFit> fit;

  double binomial_sigma(std::size_t k) const {
    const double p = tail[k];
    return std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(count));
  }
};

inline constexpr int kShellGrid = 100;

namespace detail {

// Crossing of tail(t) - t, which is strictly decreasing in t: bisection over
// grid indices, then linear interpolation inside the bracketing cell.
inline double crossing(const std::vector<double>& t, const std::vector<double>& tail) {
  const auto k = t.size();
  if (k == 0 || tail[k - 1] > t[k - 1]) return std::numeric_limits<double>::quiet_NaN();
  if (tail[0] <= t[0]) {
    // Below the first grid point: interpolate from (0, tail(0) = 1).
    const double g0 = 1.0, g1 = tail[0] - t[0];
    return t[0] * g0 / (g0 - g1);
  }
  std::size_t lo = 0, hi = k - 1;  // tail > t at lo, tail <= t at hi
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (tail[mid] <= t[mid]) hi = mid;
    else lo = mid;
  }
  const double g0 = tail[lo] - t[lo], g1 = tail[hi] - t[hi];
  return t[lo] + (t[hi] - t[lo]) * g0 / (g0 - g1);
}

}  // namespace detail

/// Empirical shell tail on t = 0.01, 0.02, ..., 1.
inline ConcentrationProfile thin_shell_profile(const SampleBatch& batch, RhoConvention convention) {
  if (batch.count() < 10000) throw ConcentrationError("thin_shell_profile: need at least 10^4 samples");
  const auto n = batch.dim();
  const double sn = std::sqrt(static_cast<double>(n));
  const Vec r = batch.points.rowwise().norm() / sn;
  ConcentrationProfile p;
  p.n = static_cast<int>(n);
  p.convention = convention;
  p.count = static_cast<std::size_t>(batch.count());
  p.rho = convention == RhoConvention::MeanAbs ? r.mean() : std::sqrt(r.squaredNorm() / static_cast<double>(r.size()));
  std::vector<double> dev(static_cast<std::size_t>(r.size()));
  for (Eigen::Index i = 0; i < r.size(); ++i) dev[static_cast<std::size_t>(i)] = std::abs(r[i] - p.rho) / p.rho;
  std::sort(dev.begin(), dev.end());
  for (int k = 1; k <= kShellGrid; ++k) {
    const double t = static_cast<double>(k) / kShellGrid;
    p.t_grid.push_back(t);
    const auto below = std::lower_bound(dev.begin(), dev.end(), t) - dev.begin();
    p.tail.push_back(static_cast<double>(dev.size() - static_cast<std::size_t>(below)) / static_cast<double>(dev.size()));
  }
  p.eps_star = detail::crossing(p.t_grid, p.tail);
  return p;
}

/// Profile of an exactly known tail, for fits and regression data.
inline ConcentrationProfile synthetic_profile(int n, const std::function<double(double)>& tail, std::size_t count = 0) {
  ConcentrationProfile p;
  p.n = n;
  p.count = count;
  p.rho = 1.0;
  for (int k = 1; k <= kShellGrid; ++k) {
    const double t = static_cast<double>(k) / kShellGrid;
    p.t_grid.push_back(t);
    p.tail.push_back(std::clamp(tail(t), 0.0, 1.0));
  }
  p.eps_star = detail::crossing(p.t_grid, p.tail);
  return p;
}

struct TailFitGrid {
  std::vector<double> nu;
  std::vector<double> tau;
  std::vector<double> A{2.0, 4.0};

  /// nu on multiples of 1/denominator in [0, nu_max], tau likewise in (0, tau_max].
  static TailFitGrid regular(int denominator = 8, double nu_max = 2.0, double tau_max = 4.0) {
    TailFitGrid g;
    for (int k = 0; k <= static_cast<int>(std::lround(nu_max * denominator)); ++k) g.nu.push_back(double(k) / denominator);
    for (int k = 1; k <= static_cast<int>(std::lround(tau_max * denominator)); ++k) g.tau.push_back(double(k) / denominator);
    return g;
  }
};

/// Least squares of log(-log(tail/A)) = log B + nu log n + tau log t over the
/// grid, using points with tail in (1e-4, 0.9). nu is identifiable only when
/// the profiles span at least two dimensions.
inline TailFit fit_tail(const std::vector<ConcentrationProfile>& profiles, const TailFitGrid& grid) {
  struct Pt {
    double logn, logt, tail;
  };
  std::vector<Pt> pts;
  std::set<int> dims;
  for (const auto& p : profiles) {
    for (std::size_t k = 0; k < p.t_grid.size(); ++k) {
      if (p.tail[k] > 1e-4 && p.tail[k] < 0.9) {
        pts.push_back({std::log(static_cast<double>(p.n)), std::log(p.t_grid[k]), p.tail[k]});
        dims.insert(p.n);
      }
    }
  }
  if (pts.size() < 10) throw ConcentrationError("fit_tail: need at least 10 points with tail in (1e-4, 0.9)");
  if (dims.size() < 2 && grid.nu.size() > 1)
    throw ConcentrationError("fit_tail: nu is not identifiable from a single dimension; fix nu or add profiles");
  if (grid.nu.empty() || grid.tau.empty() || grid.A.empty()) throw ConcentrationError("fit_tail: empty grid");
  TailFit best;
  best.points = static_cast<int>(pts.size());
  const double m = static_cast<double>(pts.size());
  for (double A : grid.A) {
    std::vector<double> ly(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) ly[i] = std::log(-std::log(pts[i].tail / A));
    for (double nu : grid.nu) {
      for (double tau : grid.tau) {
        double logB = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) logB += (ly[i] - nu * pts[i].logn - tau * pts[i].logt) / m;
        double res = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
          const double e = ly[i] - logB - nu * pts[i].logn - tau * pts[i].logt;
          res += e * e;
        }
        if (res < best.residual - 1e-15) {
          best.residual = res;
          best.A = A;
          best.B = std::exp(logB);
          best.nu = nu;
          best.tau = tau;
        }
      }
    }
  }
  return best;
}

inline TailFit fit_tail(const ConcentrationProfile& profile, const TailFitGrid& grid) {
  return fit_tail(std::vector<ConcentrationProfile>{profile}, grid);
}

/// min over mid-range t of -log tail(t) / t^p: the empirical constant c in
/// tail(t) <= exp(-c t^p). Also returns the log-log slope of -log tail.
struct TailShape {
  double constant = std::numeric_limits<double>::quiet_NaN();
  double slope = std::numeric_limits<double>::quiet_NaN();
};

inline TailShape tail_shape(const ConcentrationProfile& p, double exponent) {
  std::vector<double> lx, ly;
  TailShape s;
  s.constant = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < p.t_grid.size(); ++k) {
    if (!(p.tail[k] > 1e-4 && p.tail[k] < 0.9)) continue;
    const double y = -std::log(p.tail[k]);
    s.constant = std::min(s.constant, y / std::pow(p.t_grid[k], exponent));
    lx.push_back(std::log(p.t_grid[k]));
    ly.push_back(std::log(y));
  }
  if (lx.size() < 2) return TailShape{};
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= lx.size();
  my /= lx.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  s.slope = sxy / sxx;
  return s;
}

inline void write_profile_csv(const ConcentrationProfile& p, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConcentrationError("cannot write " + path);
  os << "t,tail,fit\n";
  char buf[128];
  for (std::size_t k = 0; k < p.t_grid.size(); ++k) {
    const double t = p.t_grid[k];
    const double f = p.fit ? p.fit->A * std::exp(-p.fit->B * std::pow(double(p.n), p.fit->nu) * std::pow(t, p.fit->tau))
                           : std::numeric_limits<double>::quiet_NaN();
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", t, p.tail[k], f);
    os << buf;
  }
}

// ---------------------------------------------------------------------------
// Gromov-Milman
// ---------------------------------------------------------------------------

struct GromovMilmanResult {
  double lhs = 0.0;       // fraction of points within eps of T (lower bound: certificates are upper bounds on distance)
  double rhs = 0.0;       // 1 - 2 exp(-2 n delta_lower)
  double mc_sigma = 0.0;
  bool pass = false;      // lhs >= rhs - 3 sigma
};

/// Upper bound on the ||.||_K distance from x to T = {y in K : <y, u> <= 0}.
/// Candidates x - s d with d = normalized mix of the support point z* of u and
/// x itself, s the step that reaches <., u> = 0; the mixing weight is found by
/// bisection on membership in K. Weight 1 ends at the origin, so the bound is
/// at most ||x||_K.
inline double halfspace_distance_bound(const BodySpec& body, const Vec& x, const Vec& u, const Vec& zstar,
                                       int steps = 50) {
  const double xu = x.dot(u);
  if (xu <= 0.0) return 0.0;
  const double xn = body.norm(x);
  if (!(xn > 0.0)) return 0.0;
  const Vec xdir = x / xn;
  auto attempt = [&](double beta, double& dist) {
    Vec d = (1.0 - beta) * zstar + beta * xdir;
    const double dn = body.norm(d);
    if (!(dn > 0.0)) return false;
    d /= dn;
    const double du = d.dot(u);
    if (!(du > 0.0)) return false;
    const double s = xu / du;
    const Vec t = x - s * d;
    if (body.norm(t) > 1.0 + 1e-12) return false;
    dist = s;
    return true;
  };
  double best = xn, dist = 0.0;
  if (attempt(0.0, dist)) return dist;  // exact distance to the halfspace
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < steps; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (attempt(mid, dist)) {
      best = std::min(best, dist);
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return best;
}

inline GromovMilmanResult gromov_milman_check(const BodySpec& body, const SampleBatch& batch, const Vec& normal,
                                              double eps, double delta_lower) {
  if (normal.size() != body.dim() || !(normal.norm() > 0.0))
    throw ConcentrationError("gromov_milman_check: half-space normal must be a nonzero vector of the body's dimension");
  if (!(eps > 0.0)) throw ConcentrationError("gromov_milman_check: eps must be positive");
  const Vec u = normal.normalized();
  const Vec zstar = body.support_result(u).point;
  std::size_t inside = 0;
  for (Eigen::Index i = 0; i < batch.count(); ++i) {
    if (eps >= 2.0 || halfspace_distance_bound(body, batch.row(i), u, zstar) <= eps) ++inside;
  }
  GromovMilmanResult r;
  const double N = static_cast<double>(batch.count());
  r.lhs = static_cast<double>(inside) / N;
  r.rhs = 1.0 - 2.0 * std::exp(-2.0 * body.dim() * delta_lower);
  r.mc_sigma = std::sqrt(std::max(r.lhs * (1.0 - r.lhs), 1.0 / N) / N);
  r.pass = r.lhs >= r.rhs - 3.0 * r.mc_sigma;
  return r;
}

// ---------------------------------------------------------------------------
// Functionals
// ---------------------------------------------------------------------------

/// Function on R^n with its gradient. A null gradient is replaced by central
/// differences where a gradient is needed.
struct TestFunction {
  std::string name;
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;

  static TestFunction norm_sq() {
    return {"norm_sq", [](const Vec& x) { return x.squaredNorm(); }, [](const Vec& x) { return Vec(2.0 * x); }};
  }
  static TestFunction linear(const Vec& theta) {
    return {"linear", [theta](const Vec& x) { return x.dot(theta); }, [theta](const Vec&) { return theta; }};
  }
  static TestFunction body_norm(const BodySpec& body) {
    return {"body_norm", [body](const Vec& x) { return body.norm(x); }, nullptr};
  }
  /// exp(lambda |x|^2 / q).
  static TestFunction exp_quadratic(double lambda, double q) {
    return {"exp_quadratic", [=](const Vec& x) { return std::exp(lambda * x.squaredNorm() / q); },
            [=](const Vec& x) { return Vec((2.0 * lambda / q) * std::exp(lambda * x.squaredNorm() / q) * x); }};
  }
  static TestFunction constant(double c) {
    return {"constant", [c](const Vec&) { return c; }, [](const Vec& x) { return Vec(Vec::Zero(x.size())); }};
  }
};

enum class FunctionalKind { Entropy, VarQ, Mean };

struct FunctionalEstimate {
  FunctionalKind kind = FunctionalKind::Mean;
  double q = 1.0;
  double value = 0.0;
  double mc_error = 0.0;  // grouped jackknife, 20 groups
};

namespace detail {

// Estimators written relative to v[0] so constant inputs give exact zeros.
inline double plugin(const std::vector<double>& v, std::size_t skip_begin, std::size_t skip_end, FunctionalKind kind,
                     double q) {
  const double base = v[0];
  const double cnt = static_cast<double>(v.size() - (skip_end - skip_begin));
  double shift = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (i < skip_begin || i >= skip_end) shift += v[i] - base;
  const double mean = base + shift / cnt;
  switch (kind) {
    case FunctionalKind::Mean: return mean;
    case FunctionalKind::VarQ: {
      double acc = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i)
        if (i < skip_begin || i >= skip_end) acc += std::pow(std::abs(v[i] - mean), q);
      return acc / cnt;
    }
    case FunctionalKind::Entropy: {
      auto xlogx = [](double x) { return x > 0.0 ? x * std::log(x) : 0.0; };
      double acc = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i)
        if (i < skip_begin || i >= skip_end) acc += xlogx(v[i]) - xlogx(base);
      return std::max(0.0, acc / cnt + xlogx(base) - xlogx(mean));
    }
  }
  return 0.0;
}

}  // namespace detail

/// Plug-in estimate of E f, E|f - E f|^q or Ent(f) from values at sample points.
inline FunctionalEstimate functional_from_values(const std::vector<double>& values, FunctionalKind kind, double q = 2.0) {
  if (values.size() < 40) throw ConcentrationError("functional: need at least 40 values");
  if (kind == FunctionalKind::Entropy)
    for (double v : values)
      if (v < 0.0) throw ConcentrationError("functional: entropy needs a non-negative function");
  FunctionalEstimate e;
  e.kind = kind;
  e.q = q;
  e.value = detail::plugin(values, 0, 0, kind, q);
  const std::size_t groups = 20, N = values.size();
  std::vector<double> loo(groups);
  double mean_loo = 0.0;
  for (std::size_t g = 0; g < groups; ++g) {
    loo[g] = detail::plugin(values, g * N / groups, (g + 1) * N / groups, kind, q);
    mean_loo += loo[g] / groups;
  }
  double acc = 0.0;
  for (double v : loo) acc += (v - mean_loo) * (v - mean_loo);
  e.mc_error = std::sqrt((groups - 1.0) / groups * acc);
  return e;
}

inline std::vector<double> evaluate(const SampleBatch& batch, const TestFunction& f) {
  std::vector<double> v(static_cast<std::size_t>(batch.count()));
  for (Eigen::Index i = 0; i < batch.count(); ++i) v[static_cast<std::size_t>(i)] = f.value(batch.row(i));
  return v;
}

inline FunctionalEstimate functional(const SampleBatch& batch, const TestFunction& f, FunctionalKind kind,
                                     double q = 2.0) {
  return functional_from_values(evaluate(batch, f), kind, q);
}

// ---------------------------------------------------------------------------
// Bobkov-Ledoux
// ---------------------------------------------------------------------------

struct BobkovLedouxResult {
  double q = 2.0;
  double grad_moment = 0.0;  // E (||grad f||_*)^q
  double lhs_entropy = 0.0;  // Ent(|f|^q)
  double rhs_entropy = 0.0;  // 2^q / Gamma(n/p + 1)^{q/n} (q/alpha)^{q-1} E(||grad f||_*)^q
  double lhs_varq = 0.0;     // E|f - E f|^q
  double rhs_varq = 0.0;     // C / (alpha n)^{q-1} E(||grad f||_*)^q
  double ratio_entropy = std::numeric_limits<double>::quiet_NaN();
  double ratio_varq = std::numeric_limits<double>::quiet_NaN();
  double calibrated_C = std::numeric_limits<double>::quiet_NaN();  // smallest C making the Poincare form hold
  double lhs_varq_error = 0.0;
};

/// Both sides of the entropy and Poincare forms for a p-convex body with
/// constant alpha, q = p/(p-1). The dual norm of the gradient is h_K(grad f).
inline BobkovLedouxResult bobkov_ledoux_check(const BodySpec& body, const SampleBatch& batch, const TestFunction& f,
                                              double p, double alpha, double C = 1.0) {
  if (!(p >= 2.0)) throw ConcentrationError("bobkov_ledoux_check: needs p >= 2 (q <= 2)");
  if (!(alpha > 0.0)) throw ConcentrationError("bobkov_ledoux_check: alpha must be positive");
  const int n = body.dim();
  const double dn = static_cast<double>(n);
  BobkovLedouxResult r;
  r.q = detail::conjugate_exponent(p);
  const double q = r.q;
  const double h = 1e-5 * 2.0 * batch.points.rowwise().norm().maxCoeff();
  auto grad = [&](const Vec& x) -> Vec {
    if (f.gradient) return f.gradient(x);
    Vec g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Vec a = x, b = x;
      a[i] += h;
      b[i] -= h;
      g[i] = (f.value(a) - f.value(b)) / (2.0 * h);
    }
    return g;
  };
  std::vector<double> values(static_cast<std::size_t>(batch.count())), powq(values.size());
  double gm = 0.0;
  for (Eigen::Index i = 0; i < batch.count(); ++i) {
    const Vec x = batch.row(i);
    const double v = f.value(x);
    values[static_cast<std::size_t>(i)] = v;
    powq[static_cast<std::size_t>(i)] = std::pow(std::abs(v), q);
    gm += std::pow(body.support(grad(x)), q);
  }
  r.grad_moment = gm / static_cast<double>(batch.count());
  r.lhs_entropy = functional_from_values(powq, FunctionalKind::Entropy).value;
  const FunctionalEstimate var = functional_from_values(values, FunctionalKind::VarQ, q);
  r.lhs_varq = var.value;
  r.lhs_varq_error = var.mc_error;
  const double log_gamma_term = std::lgamma(dn / p + 1.0) * q / dn;
  r.rhs_entropy = std::pow(2.0, q) * std::exp(-log_gamma_term) * std::pow(q / alpha, q - 1.0) * r.grad_moment;
  const double base = r.grad_moment / std::pow(alpha * dn, q - 1.0);
  r.rhs_varq = C * base;
  if (r.rhs_entropy > 0) r.ratio_entropy = r.lhs_entropy / r.rhs_entropy;
  if (r.rhs_varq > 0) r.ratio_varq = r.lhs_varq / r.rhs_varq;
  if (base > 0) r.calibrated_C = r.lhs_varq / base;
  return r;
}

// ---------------------------------------------------------------------------
// Exponential moment of |x|^2 - n rho^2
// ---------------------------------------------------------------------------

struct PolyExpMoment {
  double value = 1.0;      // E exp(|g|^{1/2} / (C E|g|^{1/2})) at the supplied C
  double smallest_C = std::numeric_limits<double>::quiet_NaN();  // smallest grid C with value <= 2
  double value_at_smallest = std::numeric_limits<double>::quiet_NaN();
};

inline double poly_exp_value(const std::vector<double>& root_abs_g, double mean_root, double C) {
  if (!(mean_root > 0.0)) return 1.0;  // g = 0 almost surely
  double acc = 0.0;
  for (double v : root_abs_g) acc += std::exp(v / (C * mean_root));
  return acc / static_cast<double>(root_abs_g.size());
}

/// g = |x|^2 - n rho^2. The grid is C = 2^{k/16}, k = -64..160.
inline PolyExpMoment poly_exp_moment_check(const SampleBatch& batch, double rho, double C_cal) {
  if (!(C_cal > 0.0)) throw ConcentrationError("poly_exp_moment_check: C must be positive");
  const double nr2 = static_cast<double>(batch.dim()) * rho * rho;
  std::vector<double> root(static_cast<std::size_t>(batch.count()));
  double mean_root = 0.0;
  for (Eigen::Index i = 0; i < batch.count(); ++i) {
    const double sq = batch.points.row(i).squaredNorm();
    double g = sq - nr2;
    if (std::abs(g) <= 64 * std::numeric_limits<double>::epsilon() * std::max(sq, nr2)) g = 0.0;  // rounding
    root[static_cast<std::size_t>(i)] = std::sqrt(std::abs(g));
    mean_root += root[static_cast<std::size_t>(i)];
  }
  mean_root /= static_cast<double>(batch.count());
  PolyExpMoment out;
  out.value = poly_exp_value(root, mean_root, C_cal);
  for (int k = -64; k <= 160; ++k) {
    const double C = std::pow(2.0, k / 16.0);
    const double v = poly_exp_value(root, mean_root, C);
    if (v <= 2.0) {
      out.smallest_C = C;
      out.value_at_smallest = v;
      break;
    }
  }
  return out;
}

}  // namespace convexlab
