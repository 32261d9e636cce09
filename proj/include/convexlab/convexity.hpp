#pragma once

// Modulus of convexity, p-convexity fits, type-constant lower bounds and the
// closed-form constants of l_p / Schatten unit balls.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "convexlab/body.hpp"
#include "convexlab/parallel.hpp"
#include "convexlab/rng.hpp"

namespace convexlab {

class ConvexityError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ModulusOptions {
  int planes = 8;       // first plane is span(e1, e2), the rest are random
  int angle_grid = 400;
  int refine_iterations = 60;
  std::uint64_t seed = 0x30d;
  unsigned jobs = 1;
};

namespace detail {

// Norm on the plane spanned by orthonormal u, v.
struct PlaneNorm {
  const BodySpec& body;
  Vec u, v;
  double operator()(double a, double b) const { return body.norm(a * u + b * v); }
  // Unit-norm point at angle phi.
  std::pair<double, double> boundary(double phi) const {
    const double c = std::cos(phi), s = std::sin(phi);
    const double r = (*this)(c, s);
    return {c / r, s / r};
  }
};

// For x on the unit circle at angle phi, the partner y at angle phi + d with
// ||x - y|| = eps (the distance is nondecreasing in d on [0, pi]); returns
// 1 - ||(x + y)/2||.
inline double pair_depth(const PlaneNorm& pn, double phi, double eps) {
  const auto [x1, x2] = pn.boundary(phi);
  auto dist = [&](double d) {
    const auto [y1, y2] = pn.boundary(phi + d);
    return pn(x1 - y1, x2 - y2);
  };
  double lo = 0.0, hi = std::numbers::pi;
  // dist(pi) = 2 up to round-off; eps = 2 then means the antipodal pair.
  for (int i = 0; i < 100 && hi - lo > 1e-15 && dist(hi) >= eps; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (dist(mid) < eps) lo = mid;
    else hi = mid;
  }
  const auto [y1, y2] = pn.boundary(phi + hi);
  return 1.0 - pn(0.5 * (x1 + y1), 0.5 * (x2 + y2));
}

inline double plane_modulus(const PlaneNorm& pn, double eps, const ModulusOptions& o) {
  const int g = std::max(8, o.angle_grid);
  std::vector<double> val(g);
  for (int i = 0; i < g; ++i) val[i] = pair_depth(pn, 2.0 * std::numbers::pi * i / g, eps);
  const int best = static_cast<int>(std::min_element(val.begin(), val.end()) - val.begin());
  double result = val[best];
  // Golden-section refinement on the neighbouring grid cells.
  const double step = 2.0 * std::numbers::pi / g;
  double a = (best - 1) * step, b = (best + 1) * step;
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = pair_depth(pn, c, eps), fd = pair_depth(pn, d, eps);
  for (int i = 0; i < o.refine_iterations; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = pair_depth(pn, c, eps);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = pair_depth(pn, d, eps);
    }
  }
  result = std::min({result, fc, fd});
  return result;
}

inline std::pair<Vec, Vec> modulus_plane(int n, int index, std::uint64_t seed) {
  Vec u = Vec::Zero(n), v = Vec::Zero(n);
  if (index == 0) {
    u[0] = 1.0;
    v[1] = 1.0;
    return {u, v};
  }
  Rng rng = make_rng(seed, static_cast<std::uint64_t>(index));
  u = random_unit_vector(n, rng);
  v = random_unit_vector(n, rng);
  v -= v.dot(u) * u;
  v.normalize();
  return {u, v};
}

}  // namespace detail

/// Upper bound on delta_K(eps) = inf{1 - ||(x+y)/2|| : ||x||, ||y|| <= 1, ||x - y|| >= eps},
/// the smallest value found over 2-D sections. Plane k depends only on
/// (seed, k), so more planes never increase the result.
inline double modulus_estimate(const BodySpec& body, double eps, const ModulusOptions& o = {}) {
  if (!(eps > 0.0) || eps > 2.0) throw ConvexityError("modulus_estimate: eps must lie in (0, 2]");
  const int n = body.dim();
  if (n < 2) throw ConvexityError("modulus_estimate: needs dimension >= 2");
  const int planes = std::max(1, o.planes);
  std::vector<double> best(static_cast<std::size_t>(planes));
  parallel_for(static_cast<std::size_t>(planes), o.jobs, [&](std::size_t k) {
    const auto [u, v] = detail::modulus_plane(n, static_cast<int>(k), o.seed);
    best[k] = detail::plane_modulus(detail::PlaneNorm{body, u, v}, eps, o);
  });
  const double m = *std::min_element(best.begin(), best.end());
  return std::max(0.0, std::min(1.0, m));
}

/// Modulus on a grid of eps values. Because delta_K is nondecreasing, each
/// value is replaced by the minimum over larger eps, which keeps it an upper bound.
inline std::vector<double> modulus_profile(const BodySpec& body, const std::vector<double>& eps_grid,
                                           const ModulusOptions& o = {}) {
  std::vector<double> out(eps_grid.size());
  for (std::size_t i = 0; i < eps_grid.size(); ++i) out[i] = modulus_estimate(body, eps_grid[i], o);
  std::vector<std::size_t> order(eps_grid.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return eps_grid[a] > eps_grid[b]; });
  double running = std::numeric_limits<double>::infinity();
  for (std::size_t i : order) running = out[i] = std::min(out[i], running);
  return out;
}

struct PConvexFit {
  double p = std::numeric_limits<double>::quiet_NaN();      // least-squares slope of log delta vs log eps
  double alpha = std::numeric_limits<double>::quiet_NaN();  // largest alpha with alpha eps^p <= delta on the grid
  bool flagged = false;  // some delta_hat = 0: not uniformly convex on this scale
};

inline PConvexFit pconvexity_fit(const std::vector<double>& eps, const std::vector<double>& delta) {
  if (eps.size() != delta.size()) throw ConvexityError("pconvexity_fit: grid sizes differ");
  PConvexFit fit;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!(eps[i] > 0.0)) throw ConvexityError("pconvexity_fit: eps must be positive");
    if (delta[i] <= 0.0) {
      fit.flagged = true;
      continue;
    }
    lx.push_back(std::log(eps[i]));
    ly.push_back(std::log(delta[i]));
  }
  if (fit.flagged) return fit;
  if (lx.size() < 4) throw ConvexityError("pconvexity_fit: need at least 4 grid points with positive delta");
  const double k = static_cast<double>(lx.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i] / k;
    my += ly[i] / k;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (!(sxx > 0.0)) throw ConvexityError("pconvexity_fit: eps grid must have distinct values");
  fit.p = sxy / sxx;
  fit.alpha = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < eps.size(); ++i) fit.alpha = std::min(fit.alpha, delta[i] / std::pow(eps[i], fit.p));
  return fit;
}

// ---------------------------------------------------------------------------
// Type constants
// ---------------------------------------------------------------------------

struct TypeOptions {
  int vector_count = 0;  // 0 = dimension
  int trials = 16;
  int local_steps = 200;
  int mc_signs = 4096;   // sign draws when vector_count > 12
  std::uint64_t seed = 0x7e9e;
  unsigned jobs = 1;
};

namespace detail {

// (E ||sum eps_i x_i||^2)^{1/2} over the given sign matrix (rows = sign
// vectors) or, when null, exactly over all 2^{m-1} patterns with eps_1 = +1.
inline double rademacher_l2(const BodySpec& body, const Mat& vectors, const Eigen::MatrixXi* signs) {
  const auto m = vectors.rows();
  double acc = 0.0;
  std::size_t patterns = 0;
  if (!signs) {
    const std::uint64_t total = std::uint64_t{1} << (m - 1);
    for (std::uint64_t mask = 0; mask < total; ++mask) {
      Vec s = vectors.row(0).transpose();
      for (Eigen::Index i = 1; i < m; ++i)
        s += ((mask >> (i - 1)) & 1 ? -1.0 : 1.0) * vectors.row(i).transpose();
      const double v = body.norm(s);
      acc += v * v;
    }
    patterns = total;
  } else {
    for (Eigen::Index r = 0; r < signs->rows(); ++r) {
      const Vec s = vectors.transpose() * signs->row(r).cast<double>().transpose();
      const double v = body.norm(s);
      acc += v * v;
    }
    patterns = static_cast<std::size_t>(signs->rows());
  }
  return std::sqrt(acc / static_cast<double>(patterns));
}

}  // namespace detail

/// (E ||sum eps_i x_i||^2)^{1/2} / (sum ||x_i||^s)^{1/s} for the rows of
/// `vectors`, exact over signs when there are at most 12 rows.
inline double type_ratio(const BodySpec& body, const Mat& vectors, double s, const Eigen::MatrixXi* signs = nullptr) {
  if (vectors.rows() < 1 || vectors.cols() != body.dim()) throw ConvexityError("type_ratio: bad vector family");
  double denom = 0.0;
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) denom += std::pow(body.norm(vectors.row(i).transpose()), s);
  denom = std::pow(denom, 1.0 / s);
  if (!(denom > 0.0)) throw ConvexityError("type_ratio: all vectors are zero");
  const bool exact = vectors.rows() <= 12;
  return detail::rademacher_l2(body, vectors, exact ? nullptr : signs) / denom;
}

struct TypeEstimate {
  double s = 2.0;
  double lower_bound = 0.0;
  Mat best_family;
  bool exact_signs = true;  // false: the sign expectation was sampled
};

/// Best ratio over random families refined by hill climbing. Trial k uses a
/// generator derived from (seed, k), so the result never decreases with trials.
inline TypeEstimate type_estimate(const BodySpec& body, double s, const TypeOptions& o = {}) {
  if (!(s >= 1.0 && s <= 2.0)) throw ConvexityError("type_estimate: s must lie in [1, 2]");
  const int n = body.dim();
  const int m = o.vector_count > 0 ? o.vector_count : n;
  TypeEstimate out;
  out.s = s;
  out.exact_signs = m <= 12;
  Eigen::MatrixXi signs;
  if (!out.exact_signs) {
    Rng rng = make_rng(o.seed, 0xffffffffULL);
    signs.resize(o.mc_signs, m);
    for (int r = 0; r < o.mc_signs; ++r)
      for (int i = 0; i < m; ++i) signs(r, i) = uniform01(rng) < 0.5 ? -1 : 1;
  }
  const Eigen::MatrixXi* sp = out.exact_signs ? nullptr : &signs;
  std::vector<double> best(static_cast<std::size_t>(o.trials), 0.0);
  std::vector<Mat> fams(static_cast<std::size_t>(o.trials));
  parallel_for(static_cast<std::size_t>(o.trials), o.jobs, [&](std::size_t k) {
    Rng rng = make_rng(o.seed, k);
    Mat v(m, n);
    for (int i = 0; i < m; ++i) v.row(i) = gaussian_vector(n, rng).transpose();
    double f = type_ratio(body, v, s, sp);
    double step = 0.5;
    for (int it = 0; it < o.local_steps && step > 1e-6; ++it) {
      const int i = static_cast<int>(uniform01(rng) * m) % m;
      Mat w = v;
      w.row(i) += step * v.row(i).norm() * gaussian_vector(n, rng).transpose();
      const double fw = type_ratio(body, w, s, sp);
      if (fw > f) {
        v = w;
        f = fw;
      } else {
        step *= 0.97;
      }
    }
    best[k] = f;
    fams[k] = v;
  });
  for (std::size_t k = 0; k < best.size(); ++k) {
    if (best[k] > out.lower_bound) {
      out.lower_bound = best[k];
      out.best_family = fams[k];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Catalog
// ---------------------------------------------------------------------------

struct CatalogConstants {
  double p = 2.0;
  double r = 2.0;        // convexity exponent max(p, 2)
  double alpha_p = 0.0;  // C min(p - 1, 1/(p 2^p))
  double s = 2.0;        // type exponent min(p, 2)
  double T_s_bound = 0.0;  // C max(sqrt p, sqrt q)
  double q = 2.0;
};

/// Constants for the unit balls of l_p and Schatten classes.
inline CatalogConstants catalog_constants(double p, double C = 1.0) {
  if (!(p > 1.0) || !std::isfinite(p)) throw ConvexityError("catalog_constants: need 1 < p < infinity");
  CatalogConstants c;
  c.p = p;
  c.q = detail::conjugate_exponent(p);
  c.r = std::max(p, 2.0);
  c.s = std::min(p, 2.0);
  c.alpha_p = C * std::min(p - 1.0, 1.0 / (p * std::pow(2.0, p)));
  c.T_s_bound = C * std::max(std::sqrt(p), std::sqrt(c.q));
  return c;
}

struct ConvexityReport {
  std::vector<double> eps_grid;
  std::vector<double> delta_hat;
  double fitted_p = std::numeric_limits<double>::quiet_NaN();  // max(2, slope)
  double raw_slope = std::numeric_limits<double>::quiet_NaN();
  double fitted_alpha = std::numeric_limits<double>::quiet_NaN();
  bool flagged = false;
  double type_s = 2.0;
  double type_lower_bound = std::numeric_limits<double>::quiet_NaN();
  std::optional<CatalogConstants> catalog;
};

/// Modulus profile, p-convexity fit and type bound in one report; the catalog
/// entry is attached for l_p and Schatten balls with 1 < p < infinity.
inline ConvexityReport convexity_report(const BodySpec& body, const std::vector<double>& eps_grid, double type_s,
                                        const ModulusOptions& mo = {}, const TypeOptions& to = {},
                                        double catalog_C = 1.0) {
  ConvexityReport r;
  r.eps_grid = eps_grid;
  r.delta_hat = modulus_profile(body, eps_grid, mo);
  const PConvexFit fit = pconvexity_fit(eps_grid, r.delta_hat);
  r.flagged = fit.flagged;
  r.raw_slope = fit.p;
  if (!fit.flagged) {
    r.fitted_p = std::max(2.0, fit.p);
    r.fitted_alpha = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < eps_grid.size(); ++i)
      r.fitted_alpha = std::min(r.fitted_alpha, r.delta_hat[i] / std::pow(eps_grid[i], r.fitted_p));
  }
  r.type_s = type_s;
  r.type_lower_bound = type_estimate(body, type_s, to).lower_bound;
  const Family f = body.base_family();
  if ((f == Family::LpBall || f == Family::SchattenBall) && body.p() > 1.0 && std::isfinite(body.p()))
    r.catalog = catalog_constants(body.p(), catalog_C);
  return r;
}

}  // namespace convexlab
