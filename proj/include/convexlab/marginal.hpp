#pragma once

// One-dimensional marginals <X, theta>: even histogram densities, distances to
// Gaussians, and direction sweeps.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "convexlab/body.hpp"
#include "convexlab/parallel.hpp"
#include "convexlab/sampler.hpp"

namespace convexlab {

class MarginalError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Centered Gaussian phi_rho.
struct GaussianRef {
  double rho = 1.0;

  explicit GaussianRef(double r = 1.0) : rho(r) {
    if (!(r > 0.0) || !std::isfinite(r)) throw MarginalError("GaussianRef: rho must be positive");
  }
  double density(double s) const {
    return std::exp(-0.5 * s * s / (rho * rho)) / (std::sqrt(2.0 * std::numbers::pi) * rho);
  }
  /// P(|S| <= t).
  double interval_mass(double t) const { return t <= 0.0 ? 0.0 : std::erf(t / (rho * std::numbers::sqrt2)); }
  double cdf(double s) const { return 0.5 * std::erfc(-s / (rho * std::numbers::sqrt2)); }
};

/// Even piecewise-constant density on [-support, support]. Stored as the
/// histogram of |s| on [0, support] with `half_bins` bins; the density on
/// either side of 0 is half the |s| density. Total mass is exactly 1.
class DensityEstimate {
 public:
  DensityEstimate() = default;

  int half_bins() const { return static_cast<int>(mass_.size()); }
  int bins() const { return 2 * half_bins(); }
  double bin_width() const { return width_; }
  double support() const { return width_ * half_bins(); }
  double variance() const { return variance_; }
  std::size_t count() const { return count_; }

  /// Bin centers on [-support, support], increasing.
  Vec grid() const {
    const int h = half_bins();
    Vec g(2 * h);
    for (int k = 0; k < h; ++k) {
      g[h + k] = (k + 0.5) * width_;
      g[h - 1 - k] = -(k + 0.5) * width_;
    }
    return g;
  }
  /// Density at the bin centers returned by grid().
  Vec values() const {
    const int h = half_bins();
    Vec v(2 * h);
    for (int k = 0; k < h; ++k) v[h + k] = v[h - 1 - k] = bin_density(k);
    return v;
  }

  double density(double s) const {
    const double a = std::abs(s);
    if (a >= support()) return 0.0;
    return bin_density(std::min(half_bins() - 1, static_cast<int>(a / width_)));
  }
  /// P(|S| <= t): piecewise linear between bin edges.
  double interval_mass(double t) const {
    if (t <= 0.0) return 0.0;
    if (t >= support()) return 1.0;
    const int k = std::min(half_bins() - 1, static_cast<int>(t / width_));
    const double below = k == 0 ? 0.0 : cumulative_[k - 1];
    return below + mass_[k] * (t - k * width_) / width_;
  }
  double cdf(double s) const { return s >= 0 ? 0.5 + 0.5 * interval_mass(s) : 0.5 - 0.5 * interval_mass(-s); }
  /// Sum of density times bin width (1 up to round-off).
  double integral() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
  /// Mass of |S| in bin k (edges k w, (k+1) w).
  double bin_mass(int k) const { return mass_[k]; }

  /// Histogram of |samples| with `bins` total bins over [-max|s|, max|s|]
  /// (0 = ceil(2 count^{1/3})).
  static DensityEstimate from_samples(const std::vector<double>& samples, int bins = 0) {
    if (samples.size() < 1000) throw MarginalError("density_estimate: need at least 1000 samples");
    const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
    if (*lo == *hi) throw MarginalError("density_estimate: all samples are equal");
    double m = 0.0, sq = 0.0;
    for (double s : samples) {
      m = std::max(m, std::abs(s));
      sq += s * s;
    }
    const double n = static_cast<double>(samples.size());
    if (bins <= 0) bins = static_cast<int>(std::ceil(2.0 * std::cbrt(n)));
    const int h = std::max(1, (bins + 1) / 2);
    DensityEstimate d;
    d.width_ = m / h;
    d.mass_.assign(h, 0.0);
    for (double s : samples) d.mass_[std::min(h - 1, static_cast<int>(std::abs(s) / d.width_))] += 1.0;
    for (double& v : d.mass_) v /= n;
    // Symmetrization makes the mean exactly 0, so the variance is E s^2.
    d.variance_ = sq / n;
    d.count_ = samples.size();
    d.finish();
    return d;
  }

  /// Discretization of an even density f on [-support, support]; each bin
  /// mass is Simpson's rule on the bin, then the total is normalized to 1.
  static DensityEstimate from_function(const std::function<double(double)>& f, double support, int bins) {
    if (!(support > 0.0) || bins < 2) throw MarginalError("from_function: need support > 0 and bins >= 2");
    const int h = bins / 2;
    DensityEstimate d;
    d.width_ = support / h;
    d.mass_.assign(h, 0.0);
    const int sub = 16;
    double second = 0.0;
    for (int k = 0; k < h; ++k) {
      const double a = k * d.width_, step = d.width_ / sub;
      double acc = 0.0, acc2 = 0.0;
      for (int j = 0; j <= sub; ++j) {
        const double s = a + j * step;
        const double w = (j == 0 || j == sub) ? 1.0 : (j % 2 ? 4.0 : 2.0);
        acc += w * f(s);
        acc2 += w * f(s) * s * s;
      }
      d.mass_[k] = 2.0 * acc * step / 3.0;
      second += 2.0 * acc2 * step / 3.0;
    }
    double total = 0.0;
    for (double v : d.mass_) total += v;
    for (double& v : d.mass_) v /= total;
    d.variance_ = second / total;
    d.count_ = 0;
    d.finish();
    return d;
  }

  /// (1/4, 1/2, 1/4) kernel over neighbouring bins; the bin left of 0 is the
  /// mirror image of bin 0 and mass past the support is folded back.
  DensityEstimate smoothed() const {
    DensityEstimate d = *this;
    const int h = half_bins();
    for (int k = 0; k < h; ++k) {
      const double left = k == 0 ? mass_[0] : mass_[k - 1];
      const double right = k + 1 < h ? mass_[k + 1] : 0.0;
      d.mass_[k] = 0.25 * left + 0.5 * mass_[k] + 0.25 * right;
    }
    d.mass_[h - 1] += 0.25 * mass_[h - 1];
    d.finish();
    return d;
  }

  /// Least log-concave majorant on the occupied bins, renormalized to mass 1.
  /// An upper envelope rather than the log-concave maximum-likelihood fit.
  DensityEstimate log_concave_envelope() const {
    const int h = half_bins();
    std::vector<std::pair<double, double>> pts;  // (center, log density), mirrored
    for (int k = h - 1; k >= 0; --k)
      if (mass_[k] > 0) pts.emplace_back(-(k + 0.5) * width_, std::log(bin_density(k)));
    for (int k = 0; k < h; ++k)
      if (mass_[k] > 0) pts.emplace_back((k + 0.5) * width_, std::log(bin_density(k)));
    std::vector<std::pair<double, double>> hull;
    for (const auto& p : pts) {
      while (hull.size() >= 2) {
        const auto& a = hull[hull.size() - 2];
        const auto& b = hull.back();
        const double cross = (b.first - a.first) * (p.second - a.second) - (b.second - a.second) * (p.first - a.first);
        if (cross >= 0) hull.pop_back();
        else break;
      }
      hull.push_back(p);
    }
    auto envelope = [&](double s) {
      if (s <= hull.front().first) return hull.front().second;
      for (std::size_t i = 1; i < hull.size(); ++i) {
        if (s <= hull[i].first) {
          const double u = (s - hull[i - 1].first) / (hull[i].first - hull[i - 1].first);
          return (1 - u) * hull[i - 1].second + u * hull[i].second;
        }
      }
      return hull.back().second;
    };
    DensityEstimate d = *this;
    double total = 0.0;
    for (int k = 0; k < h; ++k) {
      d.mass_[k] = mass_[k] > 0 ? std::exp(envelope((k + 0.5) * width_)) * width_ * 2.0 : 0.0;
      total += d.mass_[k];
    }
    for (double& v : d.mass_) v /= total;
    d.finish();
    return d;
  }

 private:
  double bin_density(int k) const { return 0.5 * mass_[k] / width_; }
  void finish() {
    cumulative_.resize(mass_.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < mass_.size(); ++k) cumulative_[k] = (acc += mass_[k]);
  }

  double width_ = 1.0;
  std::vector<double> mass_;
  std::vector<double> cumulative_;
  double variance_ = 0.0;
  std::size_t count_ = 0;
};

inline std::vector<double> project(const SampleBatch& batch, const Vec& theta) {
  if (theta.size() != batch.dim()) throw MarginalError("project: dimension mismatch");
  const Vec v = batch.points * theta;
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline DensityEstimate density_estimate(const std::vector<double>& samples, int bins = 0) {
  return DensityEstimate::from_samples(samples, bins);
}

enum class Metric { Kol, TV, Lin };

inline const char* to_string(Metric m) {
  switch (m) {
    case Metric::Kol: return "Kol";
    case Metric::TV: return "TV";
    case Metric::Lin: return "Lin";
  }
  return "?";
}

inline Metric metric_from_string(const std::string& s) {
  if (s == "Kol" || s == "kol") return Metric::Kol;
  if (s == "TV" || s == "tv") return Metric::TV;
  if (s == "Lin" || s == "lin") return Metric::Lin;
  throw MarginalError("unknown metric '" + s + "'");
}

namespace detail {

inline constexpr int kKolGrid = 10000;

inline double reach(const GaussianRef& g) { return 10.0 * g.rho; }
inline double reach(const DensityEstimate& g) { return g.support(); }

inline void add_edges(std::vector<double>& ts, const DensityEstimate& d) {
  for (int k = 1; k <= d.half_bins(); ++k) ts.push_back(k * d.bin_width());
}
inline void add_edges(std::vector<double>&, const GaussianRef&) {}

template <class G>
double kol(const DensityEstimate& f, const G& g) {
  const double top = std::max(reach(f), reach(g));
  std::vector<double> ts;
  ts.reserve(kKolGrid + 2 * f.half_bins() + 2);
  for (int i = 1; i <= kKolGrid; ++i) ts.push_back(top * i / kKolGrid);
  add_edges(ts, f);
  add_edges(ts, g);
  double best = 0.0;
  for (double t : ts) best = std::max(best, std::abs(f.interval_mass(t) - g.interval_mass(t)));
  return best;
}

// TV between a histogram and a Gaussian: Simpson on each bin plus the tail.
inline double tv(const DensityEstimate& f, const GaussianRef& g) {
  const int sub = 32;
  double acc = 0.0;
  for (int k = 0; k < f.half_bins(); ++k) {
    const double a = k * f.bin_width(), step = f.bin_width() / sub;
    const double fv = f.density(a + 0.5 * f.bin_width());
    double s = 0.0;
    for (int j = 0; j <= sub; ++j) {
      const double w = (j == 0 || j == sub) ? 1.0 : (j % 2 ? 4.0 : 2.0);
      s += w * std::abs(fv - g.density(a + j * step));
    }
    acc += s * step / 3.0;
  }
  return 2.0 * acc + (1.0 - g.interval_mass(f.support()));
}

// TV between two histograms: exact over the merged breakpoints.
inline double tv(const DensityEstimate& f, const DensityEstimate& g) {
  std::vector<double> edges{0.0};
  add_edges(edges, f);
  add_edges(edges, g);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  double acc = 0.0;
  for (std::size_t i = 1; i < edges.size(); ++i) {
    const double mid = 0.5 * (edges[i - 1] + edges[i]);
    acc += std::abs(f.density(mid) - g.density(mid)) * (edges[i] - edges[i - 1]);
  }
  return 2.0 * acc;
}

inline const GaussianRef& lin_reference(const GaussianRef& g) { return g; }
inline DensityEstimate lin_reference(const DensityEstimate& g) { return g.smoothed(); }

template <class G0>
double lin(const DensityEstimate& f, const G0& g0, double T) {
  const auto& g = lin_reference(g0);
  if (!(T > 0.0)) throw MarginalError("Lin metric needs T > 0");
  const DensityEstimate fs = f.smoothed();
  const double w = fs.bin_width();
  double best = 0.0;
  const int last = std::max(0, std::min(fs.half_bins() - 1, static_cast<int>(std::floor(T / w - 0.5))));
  for (int k = 0; k <= last; ++k) {
    const double s = (k + 0.5) * w;
    const double gv = g.density(s);
    if (!(gv > 0.0)) throw MarginalError("Lin metric: reference density vanishes on [0, T]");
    best = std::max(best, std::abs(fs.density(s) / gv - 1.0));
  }
  return best;
}

}  // namespace detail

/// d(f, g) for g a GaussianRef or another DensityEstimate. Kol is the sup over
/// t of |P_f(|S| <= t) - P_g(|S| <= t)|; TV is the L1 distance; Lin is the sup of
/// |f/g - 1| on the bin centers in [0, T] after triangular smoothing of f (and
/// of g when it is also an estimate).
template <class G>
double marginal_distance(const DensityEstimate& f, const G& g, Metric metric, double T = 0.0) {
  switch (metric) {
    case Metric::Kol: return detail::kol(f, g);
    case Metric::TV: return detail::tv(f, g);
    case Metric::Lin: return detail::lin(f, g, T);
  }
  return 0.0;
}

/// C_h sqrt(t log(1/t)), the reporting bound for d_TV in terms of d_Kol.
inline double kol_to_tv_bound(double t, double C_h = 1.0) {
  if (!(t > 0.0 && t < 1.0)) throw MarginalError("kol_to_tv_bound: t must lie in (0, 1)");
  return C_h * std::sqrt(t * std::log(1.0 / t));
}

/// Sum of squares of the projections divided by count: rho_theta^2.
inline double projected_second_moment(const std::vector<double>& s) {
  double acc = 0.0;
  for (double v : s) acc += v * v;
  return acc / static_cast<double>(s.size());
}

namespace detail {

// Projections onto directions [begin, end) as a count x (end-begin) block.
inline Mat project_block(const SampleBatch& batch, const DirectionSet& dirs, Eigen::Index begin, Eigen::Index end) {
  return batch.points * dirs.directions.middleRows(begin, end - begin).transpose();
}

inline constexpr Eigen::Index kDirectionBlock = 32;

inline double max_radius(const SampleBatch& batch) { return batch.points.rowwise().norm().maxCoeff(); }

}  // namespace detail

struct AverageDensity {
  DensityEstimate g_avg;
  Vec t_grid;
  Vec G;              // G(t) = P(S <= t) for the pooled marginal
  double sup_diff = 0.0;   // sup_t |G(t) - Phi_rho(t)|
  double bound = 0.0;      // 4 eps + 1/sqrt(n)
  double ratio = 0.0;      // sup_diff / bound
};

/// Pools the projections onto every direction into one histogram. The bin
/// range is [0, max_i |x_i|], which bounds every projection.
inline AverageDensity avg_density(const SampleBatch& batch, const DirectionSet& dirs, const GaussianRef& ref,
                                  double eps, int bins = 0) {
  if (dirs.dim() != batch.dim()) throw MarginalError("avg_density: dimension mismatch");
  const double total = static_cast<double>(batch.count()) * static_cast<double>(dirs.count());
  if (bins <= 0) bins = static_cast<int>(std::ceil(2.0 * std::cbrt(total)));
  const int h = std::max(1, (bins + 1) / 2);
  const double support = detail::max_radius(batch) * (1.0 + 1e-12);
  const double width = support / h;
  std::vector<double> counts(h, 0.0);
  for (Eigen::Index b = 0; b < dirs.count(); b += detail::kDirectionBlock) {
    const Mat block = detail::project_block(batch, dirs, b, std::min(dirs.count(), b + detail::kDirectionBlock));
    for (Eigen::Index i = 0; i < block.size(); ++i) {
      const double s = std::abs(block.data()[i]);
      counts[std::min(h - 1, static_cast<int>(s / width))] += 1.0;
    }
  }
  std::vector<double> dens(h);
  for (int k = 0; k < h; ++k) dens[k] = 0.5 * counts[k] / total / width;
  AverageDensity out;
  out.g_avg = DensityEstimate::from_function(
      [&](double s) { return dens[std::min(h - 1, static_cast<int>(std::abs(s) / width))]; }, support, 2 * h);
  const int grid = detail::kKolGrid;
  out.t_grid.resize(2 * grid + 1);
  out.G.resize(2 * grid + 1);
  for (int i = 0; i <= 2 * grid; ++i) {
    const double t = support * (i - grid) / grid;
    out.t_grid[i] = t;
    out.G[i] = out.g_avg.cdf(t);
    out.sup_diff = std::max(out.sup_diff, std::abs(out.G[i] - ref.cdf(t)));
  }
  out.bound = 4.0 * eps + 1.0 / std::sqrt(static_cast<double>(batch.dim()));
  out.ratio = out.sup_diff / out.bound;
  return out;
}

struct AbpRow {
  double t = 0.0;
  double max_violation = 0.0;  // max relative excess of ||a+b||_t over ||a||_t + ||b||_t
  double budget = 0.0;         // 3 sigma relative error of the three masses
  double a_t = 0.0;
  double b_t = 0.0;
  double ratio = 0.0;  // b_t / a_t
  bool pass = true;
};

/// Checks that ||x||_t = |x| / P(|<X, x/|x|>| <= t) behaves as a norm on random
/// triples, and fits a_t, b_t as the min and max over `dirs` of
/// P(|X_theta| <= t)^{-1} / max(rho_theta / t, 1).
inline std::vector<AbpRow> abp_structure_check(const SampleBatch& batch, const DirectionSet& dirs,
                                               const std::vector<double>& t_values, int triple_count,
                                               std::uint64_t seed, unsigned jobs = 1) {
  const int n = static_cast<int>(batch.dim());
  const double count = static_cast<double>(batch.count());
  const double rmax = detail::max_radius(batch);
  for (double t : t_values)
    if (!(t > 0.0) || t > rmax) throw MarginalError("abp_structure_check: t must lie in (0, max |x|]");

  // Three directions per triple: a, b, a + b.
  Mat tri(3 * triple_count, n);
  Vec lens(3 * triple_count);
  Rng rng = make_rng(seed);
  for (int i = 0; i < triple_count; ++i) {
    const Vec a = gaussian_vector(n, rng), b = gaussian_vector(n, rng);
    const Vec c = a + b;
    const Vec v[3] = {a, b, c};
    for (int j = 0; j < 3; ++j) {
      lens[3 * i + j] = v[j].norm();
      tri.row(3 * i + j) = v[j].transpose() / lens[3 * i + j];
    }
  }
  const std::size_t nt = t_values.size();
  auto masses = [&](const Mat& directions) {
    // masses(k, j): fraction of |<x, dir_j>| <= t_k; also rho_j^2 in the last row.
    Mat out = Mat::Zero(static_cast<Eigen::Index>(nt) + 1, directions.rows());
    const auto blocks = static_cast<std::size_t>((directions.rows() + detail::kDirectionBlock - 1) / detail::kDirectionBlock);
    parallel_for(blocks, jobs, [&](std::size_t bi) {
      const Eigen::Index b = static_cast<Eigen::Index>(bi) * detail::kDirectionBlock;
      const Eigen::Index e = std::min(directions.rows(), b + detail::kDirectionBlock);
      const Mat proj = batch.points * directions.middleRows(b, e - b).transpose();
      for (Eigen::Index j = 0; j < proj.cols(); ++j) {
        for (std::size_t k = 0; k < nt; ++k)
          out(static_cast<Eigen::Index>(k), b + j) = (proj.col(j).array().abs() <= t_values[k]).count() / count;
        out(static_cast<Eigen::Index>(nt), b + j) = proj.col(j).squaredNorm() / count;
      }
    });
    return out;
  };
  const Mat tm = masses(tri);
  const Mat dm = masses(dirs.directions);

  std::vector<AbpRow> rows;
  for (std::size_t k = 0; k < nt; ++k) {
    AbpRow r;
    r.t = t_values[k];
    const auto K = static_cast<Eigen::Index>(k);
    for (int i = 0; i < triple_count; ++i) {
      double norm_t[3], rel[3];
      for (int j = 0; j < 3; ++j) {
        const double m = tm(K, 3 * i + j);
        if (!(m > 0.0)) throw MarginalError("abp_structure_check: no mass within t in some direction");
        norm_t[j] = lens[3 * i + j] / m;
        rel[j] = std::sqrt(std::max(m * (1.0 - m), 1.0 / count) / count) / m;
      }
      const double excess = (norm_t[2] - norm_t[0] - norm_t[1]) / (norm_t[0] + norm_t[1]);
      r.max_violation = std::max(r.max_violation, excess);
      r.budget = std::max(r.budget, 3.0 * (rel[0] + rel[1] + rel[2]));
    }
    r.a_t = std::numeric_limits<double>::infinity();
    r.b_t = 0.0;
    for (Eigen::Index j = 0; j < dirs.count(); ++j) {
      const double m = dm(K, j), rho = std::sqrt(dm(static_cast<Eigen::Index>(nt), j));
      if (!(m > 0.0)) continue;
      const double v = (1.0 / m) / std::max(rho / r.t, 1.0);
      r.a_t = std::min(r.a_t, v);
      r.b_t = std::max(r.b_t, v);
    }
    r.ratio = r.b_t / r.a_t;
    r.pass = r.max_violation <= r.budget;
    rows.push_back(r);
  }
  return rows;
}

struct DirectionRow {
  int theta_index = 0;
  double rho_theta = 0.0;
  double d_kol = 0.0;
  double d_tv = 0.0;
  double d_lin = std::numeric_limits<double>::quiet_NaN();
  double T = std::numeric_limits<double>::quiet_NaN();
  bool delta_pass = false;
};

struct DirectionSweep {
  std::vector<DirectionRow> rows;
  Metric metric = Metric::Kol;
  double delta = 0.0;
  double fraction = 0.0;

  /// Fraction of directions whose chosen metric is <= delta.
  double fraction_at(double d) const {
    if (rows.empty()) return 0.0;
    std::size_t ok = 0;
    for (const auto& r : rows) ok += value(r) <= d;
    return static_cast<double>(ok) / static_cast<double>(rows.size());
  }
  double value(const DirectionRow& r) const {
    switch (metric) {
      case Metric::Kol: return r.d_kol;
      case Metric::TV: return r.d_tv;
      case Metric::Lin: return r.d_lin;
    }
    return r.d_kol;
  }
};

/// Per-direction distances of the estimated marginal to phi_rho. The Lin
/// distance is computed only when T > 0.
inline DirectionSweep good_direction_fraction(const SampleBatch& batch, const DirectionSet& dirs, const GaussianRef& ref,
                                              Metric metric, double T, double delta, unsigned jobs = 1,
                                              int bins = 0) {
  if (dirs.dim() != batch.dim()) throw MarginalError("good_direction_fraction: dimension mismatch");
  if (metric == Metric::Lin && !(T > 0.0)) throw MarginalError("good_direction_fraction: Lin needs T > 0");
  DirectionSweep out;
  out.metric = metric;
  out.delta = delta;
  out.rows.resize(static_cast<std::size_t>(dirs.count()));
  const auto blocks = static_cast<std::size_t>((dirs.count() + detail::kDirectionBlock - 1) / detail::kDirectionBlock);
  parallel_for(blocks, jobs, [&](std::size_t bi) {
    const Eigen::Index b = static_cast<Eigen::Index>(bi) * detail::kDirectionBlock;
    const Eigen::Index e = std::min(dirs.count(), b + detail::kDirectionBlock);
    const Mat proj = detail::project_block(batch, dirs, b, e);
    for (Eigen::Index j = 0; j < proj.cols(); ++j) {
      const std::vector<double> s(proj.col(j).data(), proj.col(j).data() + proj.rows());
      const DensityEstimate d = DensityEstimate::from_samples(s, bins);
      DirectionRow& r = out.rows[static_cast<std::size_t>(b + j)];
      r.theta_index = static_cast<int>(b + j);
      r.rho_theta = std::sqrt(d.variance());
      r.d_kol = marginal_distance(d, ref, Metric::Kol);
      r.d_tv = marginal_distance(d, ref, Metric::TV);
      if (T > 0.0) {
        r.T = T;
        r.d_lin = marginal_distance(d, ref, Metric::Lin, T);
      }
    }
  });
  for (auto& r : out.rows) r.delta_pass = out.value(r) <= delta;
  out.fraction = out.fraction_at(delta);
  return out;
}

/// Default Lin threshold rho n^{1/24}.
inline double default_lin_threshold(double rho, int n) { return rho * std::pow(static_cast<double>(n), 1.0 / 24.0); }

/// Largest positive second difference of log density over bins inside the
/// central `mass` fraction, after smoothing. Zero for log-concave estimates.
inline double log_concavity_violation(const DensityEstimate& d, double mass = 0.9) {
  const DensityEstimate s = d.smoothed();
  const int h = s.half_bins();
  int last = 0;
  double acc = 0.0;
  while (last < h && acc + s.bin_mass(last) <= mass) acc += s.bin_mass(last++);
  std::vector<double> logs;
  for (int k = last - 1; k >= 0; --k) logs.push_back(std::log(s.density((k + 0.5) * s.bin_width())));
  for (int k = 0; k < last; ++k) logs.push_back(std::log(s.density((k + 0.5) * s.bin_width())));
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < logs.size(); ++i) worst = std::max(worst, logs[i - 1] - 2 * logs[i] + logs[i + 1]);
  return worst;
}

inline void write_direction_csv(const DirectionSweep& sweep, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw MarginalError("cannot write " + path);
  os << "theta_index,rho_theta,d_kol,d_tv,d_lin,T,delta_pass\n";
  char buf[256];
  for (const auto& r : sweep.rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", r.theta_index, r.rho_theta, r.d_kol, r.d_tv,
                  r.d_lin, r.T, r.delta_pass ? 1 : 0);
    os << buf;
  }
}

inline void write_density_csv(const DensityEstimate& d, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw MarginalError("cannot write " + path);
  os << "grid,density\n";
  const Vec g = d.grid(), v = d.values();
  char buf[96];
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", g[i], v[i]);
    os << buf;
  }
}

}  // namespace convexlab
