#pragma once

// Positions of a body (isotropic, Löwner, John, minimal mean width, half-way)
// and the geometric functionals reported for each.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "convexlab/body.hpp"
#include "convexlab/parallel.hpp"
#include "convexlab/sampler.hpp"

namespace convexlab {

class PositionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <class F>
Mat spectral_apply(const Mat& sym, F&& f) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (sym + sym.transpose()));
  Vec ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev[i] = f(ev[i]);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

inline Mat sym_sqrt(const Mat& a) {
  return spectral_apply(a, [](double l) { return std::sqrt(std::max(l, 0.0)); });
}
inline Mat sym_inv_sqrt(const Mat& a) {
  return spectral_apply(a, [](double l) { return 1.0 / std::sqrt(l); });
}
inline Mat sym_exp(const Mat& a) {
  return spectral_apply(a, [](double l) { return std::exp(l); });
}

/// a / det(a)^{1/n}; a must have positive determinant.
inline Mat det_normalize(const Mat& a) {
  const double d = a.determinant();
  if (!(d > 0.0)) throw PositionError("det_normalize: determinant must be positive");
  return a / std::pow(d, 1.0 / static_cast<double>(a.rows()));
}

// Fixed sphere sample used for sigma-averages inside reports.
inline constexpr std::uint64_t kReportDirectionSeed = 0xd1ec7105ULL;

}  // namespace detail

// ---------------------------------------------------------------------------
// Second moments
// ---------------------------------------------------------------------------

struct SecondMoment {
  Mat matrix;                 // E x x^T
  std::size_t sample_count = 0;
  double volume = 1.0;        // volume of the sampled body
  double L_est = 0.0;         // det(Cov)^{1/2n} / |K|^{1/n}

  int dim() const { return static_cast<int>(matrix.rows()); }

  /// rho_theta = sqrt(theta^T Cov theta) for unit theta.
  double rho_theta(const Vec& theta) const { return std::sqrt(std::max(0.0, theta.dot(matrix * theta))); }
  double rho_max() const {
    Eigen::SelfAdjointEigenSolver<Mat> es(matrix, Eigen::EigenvaluesOnly);
    return std::sqrt(es.eigenvalues().maxCoeff());
  }
  /// Root of trace/n; equals rho_theta for every theta when Cov is a multiple of I.
  double rho_rms() const { return std::sqrt(matrix.trace() / dim()); }
  /// sigma-average of rho_theta over `count` fixed directions.
  double rho_avg(std::size_t count = 10000) const {
    const DirectionSet d = sample_sphere(dim(), count, detail::kReportDirectionSeed);
    double s = 0.0;
    for (Eigen::Index i = 0; i < d.count(); ++i) s += rho_theta(d[i]);
    return s / static_cast<double>(count);
  }
  double C_iso(std::size_t count = 10000) const { return rho_max() / rho_avg(count); }

  /// Second moment of A(K): A Cov A^T, volume scaled by |det A|.
  SecondMoment mapped(const LinearMap& map) const {
    SecondMoment out;
    out.matrix = map.matrix() * matrix * map.matrix().transpose();
    out.sample_count = sample_count;
    out.volume = volume * std::abs(map.det());
    out.L_est = isotropic_constant(out.matrix, out.volume);
    return out;
  }

  static double isotropic_constant(const Mat& cov, double volume) {
    const double n = static_cast<double>(cov.rows());
    Eigen::SelfAdjointEigenSolver<Mat> es(cov, Eigen::EigenvaluesOnly);
    const double logdet = es.eigenvalues().array().log().sum();
    return std::exp(logdet / (2.0 * n) - std::log(volume) / n);
  }
};

inline SecondMoment second_moment(const SampleBatch& batch, double volume = 1.0) {
  const auto n = batch.dim();
  if (n < 1 || batch.count() < 10 * n) throw PositionError("second_moment: need at least 10 n samples");
  SecondMoment s;
  s.matrix = batch.points.transpose() * batch.points / static_cast<double>(batch.count());
  s.matrix = 0.5 * (s.matrix + s.matrix.transpose());
  s.sample_count = static_cast<std::size_t>(batch.count());
  s.volume = volume;
  Eigen::SelfAdjointEigenSolver<Mat> es(s.matrix, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || lo <= 1e-12 * hi) throw PositionError("second_moment: covariance is rank deficient (degenerate sample)");
  s.L_est = SecondMoment::isotropic_constant(s.matrix, volume);
  return s;
}

// ---------------------------------------------------------------------------
// Functionals
// ---------------------------------------------------------------------------

struct MeanWidth {
  double M_star = 0.0;
  double M_2 = 0.0;
  double M_star_se = 0.0;
  double M_2_se = 0.0;
};

inline MeanWidth mean_width(const BodySpec& body, const DirectionSet& dirs, unsigned jobs = 1) {
  const auto count = static_cast<std::size_t>(dirs.count());
  if (count == 0) throw PositionError("mean_width: empty direction set");
  if (dirs.dim() != body.dim()) throw PositionError("mean_width: direction dimension mismatch");
  std::vector<double> h(count), nsq(count);
  parallel_for(count, jobs, [&](std::size_t i) {
    const Vec t = dirs[static_cast<Eigen::Index>(i)];
    h[i] = body.support(t);
    const double v = body.norm(t);
    nsq[i] = v * v;
  });
  auto stats = [count](const std::vector<double>& v) {
    double m = 0, q = 0;
    for (double x : v) m += x;
    m /= count;
    for (double x : v) q += (x - m) * (x - m);
    const double sd = count > 1 ? std::sqrt(q / (count - 1)) : 0.0;
    return std::pair{m, sd / std::sqrt(static_cast<double>(count))};
  };
  MeanWidth out;
  std::tie(out.M_star, out.M_star_se) = stats(h);
  const auto [m2sq, m2sq_se] = stats(nsq);
  out.M_2 = std::sqrt(m2sq);
  out.M_2_se = m2sq > 0 ? m2sq_se / (2.0 * out.M_2) : 0.0;  // delta method
  return out;
}

/// Lower estimate of diam(K) = 2 max_theta h_K(theta). The best `restarts`
/// directions are refined by theta <- x*(theta)/|x*(theta)|, which never
/// decreases h for symmetric bodies.
inline double diameter(const BodySpec& body, const DirectionSet& dirs, int restarts = 5, int refine_steps = 50,
                       unsigned jobs = 1) {
  const auto count = static_cast<std::size_t>(dirs.count());
  if (count == 0) throw PositionError("diameter: empty direction set");
  std::vector<double> h(count);
  parallel_for(count, jobs, [&](std::size_t i) { h[i] = body.support(dirs[static_cast<Eigen::Index>(i)]); });
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  const std::size_t top = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(0, restarts)));
  std::partial_sort(order.begin(), order.begin() + top, order.end(), [&](auto a, auto b) { return h[a] > h[b]; });
  double best = *std::max_element(h.begin(), h.end());
  for (std::size_t r = 0; r < top; ++r) {
    Vec t = dirs[static_cast<Eigen::Index>(order[r])];
    double val = h[order[r]];
    for (int s = 0; s < refine_steps; ++s) {
      const SupportResult sr = body.support_result(t);
      const double len = sr.point.norm();
      if (!(len > 0.0)) break;
      best = std::max(best, len);  // |x*| is attained by a point of K
      const Vec next = sr.point / len;
      const double nv = body.support(next);
      if (nv <= val * (1.0 + 1e-14)) {
        best = std::max(best, nv);
        break;
      }
      t = next;
      val = nv;
    }
    best = std::max(best, val);
  }
  return 2.0 * best;
}

// ---------------------------------------------------------------------------
// Position reports
// ---------------------------------------------------------------------------

enum class PositionKind { Isotropic, Lowner, John, MinMeanWidth, HalfWay };

inline const char* to_string(PositionKind k) {
  switch (k) {
    case PositionKind::Isotropic: return "Isotropic";
    case PositionKind::Lowner: return "Lowner";
    case PositionKind::John: return "John";
    case PositionKind::MinMeanWidth: return "MinMeanWidth";
    case PositionKind::HalfWay: return "HalfWay";
  }
  return "?";
}

struct PositionDiagnostics {
  int iterations = 0;
  double residual = 0.0;
  bool converged = true;
  std::string message;
  double initial_objective = std::numeric_limits<double>::quiet_NaN();
  double final_objective = std::numeric_limits<double>::quiet_NaN();
  double bound = std::numeric_limits<double>::quiet_NaN();        // theoretical bound with the configured constant
  double bound_ratio = std::numeric_limits<double>::quiet_NaN();  // measured / bound
  double ellipsoid_condition = std::numeric_limits<double>::quiet_NaN();
  Mat auxiliary;  // the min-mean-width map M for half-way reports
};

struct PositionReport {
  LinearMap map;
  PositionKind kind = PositionKind::Isotropic;
  double M_star = 0.0;
  double M_2 = 0.0;
  double diam = 0.0;
  // rho statistics need a second moment; NaN when none was supplied.
  double rho = std::numeric_limits<double>::quiet_NaN();  // sqrt(trace Cov / n)
  double rho_max = std::numeric_limits<double>::quiet_NaN();
  double rho_avg = std::numeric_limits<double>::quiet_NaN();
  double C_iso = std::numeric_limits<double>::quiet_NaN();
  double L_est = std::numeric_limits<double>::quiet_NaN();
  bool rho_sanity_ok = true;  // rho_max <= C sqrt(n) rho_avg
  PositionDiagnostics diagnostics;

  BodySpec image_of(const BodySpec& body) const { return linear_image(body, map); }
};

struct FunctionalOptions {
  std::size_t directions = 2000;
  std::uint64_t seed = detail::kReportDirectionSeed;
  int diam_restarts = 5;
  unsigned jobs = 1;
  double sanity_C = 10.0;
  std::optional<SecondMoment> cov;  // second moment of the input body
};

namespace detail {

inline void fill_functionals(PositionReport& r, const BodySpec& body, const FunctionalOptions& fo) {
  const BodySpec image = r.image_of(body);
  const DirectionSet dirs = sample_sphere(body.dim(), fo.directions, fo.seed, fo.jobs);
  const MeanWidth mw = mean_width(image, dirs, fo.jobs);
  r.M_star = mw.M_star;
  r.M_2 = mw.M_2;
  r.diam = diameter(image, dirs, fo.diam_restarts, 50, fo.jobs);
  if (fo.cov) {
    const SecondMoment c = fo.cov->mapped(r.map);
    r.rho = c.rho_rms();
    r.rho_max = c.rho_max();
    r.rho_avg = c.rho_avg();
    r.C_iso = r.rho_max / r.rho_avg;
    r.L_est = c.L_est;
    r.rho_sanity_ok = r.rho_max <= fo.sanity_C * std::sqrt(static_cast<double>(body.dim())) * r.rho_avg;
  }
}

}  // namespace detail

/// Map to isotropic position: det-normalized Cov^{-1/2}.
inline PositionReport isotropize(const BodySpec& body, const SecondMoment& cov, FunctionalOptions fo = {}) {
  if (cov.dim() != body.dim()) throw PositionError("isotropize: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<Mat> es(cov.matrix, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) throw PositionError("isotropize: covariance is not positive definite");
  if (hi / lo > 1e8) throw PositionError("isotropize: covariance condition number exceeds 1e8");
  PositionReport r;
  r.kind = PositionKind::Isotropic;
  r.map = LinearMap(detail::det_normalize(detail::sym_inv_sqrt(cov.matrix)));
  SecondMoment c = cov;
  c.volume = body.volume();
  c.L_est = SecondMoment::isotropic_constant(c.matrix, c.volume);
  fo.cov = c;
  detail::fill_functionals(r, body, fo);
  return r;
}

// ---------------------------------------------------------------------------
// Minimum-volume enclosing centered ellipsoid
// ---------------------------------------------------------------------------

struct MveeResult {
  Mat shape;  // A with E = {x : x^T A x <= 1}
  int iterations = 0;
  double residual = 0.0;  // max |kappa_i / n - 1| over the active set
  bool converged = false;
  double outside = 0.0;  // max x^T A x - 1 over refined probes at the last check
};

/// Centered MVEE of the rows of `points` by Khachiyan's multiplicative
/// weights with Todd-Yildirim away steps. The returned ellipsoid is scaled to
/// contain every point.
inline MveeResult centered_mvee(const Mat& points, double tol = 1e-6, int max_iterations = 200000) {
  const Eigen::Index N = points.rows(), n = points.cols();
  const double dn = static_cast<double>(n);
  if (N < n) throw PositionError("mvee: fewer points than dimensions");
  Vec u = Vec::Constant(N, 1.0 / static_cast<double>(N));
  Mat Xinv;
  Vec kappa(N);
  auto recompute = [&] {
    const Mat X = points.transpose() * u.asDiagonal() * points;
    Eigen::LLT<Mat> llt(X);
    if (llt.info() != Eigen::Success) throw PositionError("mvee: probe points do not span the space");
    Xinv = llt.solve(Mat::Identity(n, n));
    kappa = (points * Xinv).cwiseProduct(points).rowwise().sum();
  };
  recompute();
  MveeResult res;
  int it = 0;
  for (; it < max_iterations; ++it) {
    Eigen::Index jmax = 0, jmin = -1;
    kappa.maxCoeff(&jmax);
    double kmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < N; ++i) {
      if (u[i] > 0.0 && kappa[i] < kmin) {
        kmin = kappa[i];
        jmin = i;
      }
    }
    const double up = kappa[jmax] / dn - 1.0, down = 1.0 - kmin / dn;
    res.residual = std::max(up, down);
    if (res.residual <= tol) {
      res.converged = true;
      break;
    }
    Eigen::Index j;
    double beta;
    if (up >= down) {
      j = jmax;
      beta = (kappa[j] / dn - 1.0) / (kappa[j] - 1.0);
    } else {
      j = jmin;
      beta = (kappa[j] / dn - 1.0) / (kappa[j] - 1.0);
      beta = std::max(beta, -u[j] / (1.0 - u[j]));
    }
    // Rank-one update of X^{-1} and kappa for X' = (1-beta) X + beta x_j x_j^T.
    const Vec xj = points.row(j).transpose();
    const Vec w = Xinv * xj;
    const double denom = (1.0 - beta) + beta * kappa[j];
    const Vec cross = points * w;
    kappa = (kappa - (beta / denom) * cross.cwiseAbs2()) / (1.0 - beta);
    Xinv = (Xinv - (beta / denom) * w * w.transpose()) / (1.0 - beta);
    u *= (1.0 - beta);
    u[j] += beta;
    if (u[j] < 1e-300) u[j] = 0.0;
    if (it % 1000 == 999) recompute();
  }
  recompute();
  res.iterations = it;
  // E = {x : x^T X^{-1} x <= n}, inflated to cover every point exactly.
  const double cover = std::max(1.0, kappa.maxCoeff() / dn);
  res.shape = Xinv / (dn * cover);
  return res;
}

struct BoundaryProbeOptions {
  int boundary_count = 0;  // default 50 n
  int ascent_steps = 20;
  int rounds = 50;  // cutting-plane rounds; stops once no probe leaves the ellipsoid
  double tolerance = 1e-6;
  std::uint64_t seed = 0xb0a7d;
  unsigned jobs = 1;
};

namespace detail {

// Löwner ellipsoid of a symmetric body given by its norm and support-point
// oracles. Probes start as radial boundary points and are pushed outward in
// the current ellipsoid norm by x <- argmax_{y in K} <A x, y>.
template <class NormFn, class SupportPointFn>
MveeResult lowner_core(int n, NormFn&& norm, SupportPointFn&& support_point, const BoundaryProbeOptions& o) {
  const int count = o.boundary_count > 0 ? o.boundary_count : 50 * n;
  if (count < 10 * n) throw PositionError("lowner: boundary_count must be >= 10 n");
  const DirectionSet dirs = sample_sphere(n, static_cast<std::size_t>(count), o.seed, o.jobs);
  Mat probes(count, n);
  parallel_for(static_cast<std::size_t>(count), o.jobs, [&](std::size_t i) {
    const Vec t = dirs[static_cast<Eigen::Index>(i)];
    probes.row(static_cast<Eigen::Index>(i)) = (t / norm(t)).transpose();
  });
  MveeResult res = centered_mvee(probes, o.tolerance);
  int total = res.iterations;
  // Cutting planes: ascended probes that stick out of the current ellipsoid
  // join the point set. Replacing probes instead makes the fit oscillate.
  std::vector<Vec> pool;
  for (int i = 0; i < count; ++i) pool.push_back(probes.row(i).transpose());
  for (int round = 0; round < o.rounds; ++round) {
    const Mat A = res.shape;
    std::vector<double> q(static_cast<std::size_t>(count));
    parallel_for(static_cast<std::size_t>(count), o.jobs, [&](std::size_t i) {
      Vec x = probes.row(static_cast<Eigen::Index>(i)).transpose();
      double qx = x.dot(A * x);
      for (int s = 0; s < o.ascent_steps; ++s) {
        const Vec y = support_point(Vec(A * x));
        const double qy = y.dot(A * y);
        if (!(qy > qx * (1.0 + 1e-14))) break;
        x = y;
        qx = qy;
      }
      probes.row(static_cast<Eigen::Index>(i)) = x.transpose();
      q[i] = qx;
    });
    int added = 0;
    for (int i = 0; i < count; ++i) {
      if (q[static_cast<std::size_t>(i)] > 1.0 + o.tolerance) {
        pool.push_back(probes.row(i).transpose());
        ++added;
      }
    }
    res.outside = *std::max_element(q.begin(), q.end()) - 1.0;
    if (added == 0) break;
    Mat all(static_cast<Eigen::Index>(pool.size()), n);
    for (std::size_t i = 0; i < pool.size(); ++i) all.row(static_cast<Eigen::Index>(i)) = pool[i].transpose();
    res = centered_mvee(all, o.tolerance);
    total += res.iterations;
  }
  res.iterations = total;
  return res;
}

inline double condition_of(const Mat& spd) {
  Eigen::SelfAdjointEigenSolver<Mat> es(spd, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
}

// Gradient of a 1-homogeneous norm by central differences.
template <class NormFn>
Vec norm_gradient(NormFn&& norm, const Vec& x) {
  const double h = 1e-6 * std::max(1e-12, x.norm());
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (norm(a) - norm(b)) / (2.0 * h);
  }
  return g;
}

}  // namespace detail

/// Löwner (minimal-volume enclosing ellipsoid) position; the map sends the
/// ellipsoid to a multiple of the Euclidean ball.
inline PositionReport lowner_position(const BodySpec& body, const BoundaryProbeOptions& o = {},
                                      const FunctionalOptions& fo = {}) {
  const int n = body.dim();
  const MveeResult e = detail::lowner_core(
      n, [&](const Vec& x) { return body.norm(x); }, [&](const Vec& t) { return body.support_result(t).point; }, o);
  PositionReport r;
  r.kind = PositionKind::Lowner;
  r.map = LinearMap(detail::det_normalize(detail::sym_sqrt(e.shape)));
  r.diagnostics.iterations = e.iterations;
  r.diagnostics.residual = e.residual;
  r.diagnostics.converged = e.converged;
  r.diagnostics.ellipsoid_condition = detail::condition_of(e.shape);
  if (!e.converged) r.diagnostics.message = "MVEE did not converge";
  detail::fill_functionals(r, body, fo);
  return r;
}

/// John (maximal-volume inscribed ellipsoid) position, computed as the Löwner
/// position of the polar body. The polar norm is h_K and its support points
/// are normalized gradients of the norm of K.
inline PositionReport john_position(const BodySpec& body, const BoundaryProbeOptions& o = {},
                                    const FunctionalOptions& fo = {}) {
  const int n = body.dim();
  auto polar_norm = [&](const Vec& y) { return body.support(y); };
  auto polar_support_point = [&](const Vec& t) {
    const Vec g = detail::norm_gradient([&](const Vec& x) { return body.norm(x); }, t);
    return Vec(g / body.support(g));
  };
  const MveeResult e = detail::lowner_core(n, polar_norm, polar_support_point, o);
  PositionReport r;
  r.kind = PositionKind::John;
  // John ellipsoid of K is {x : x^T A^{-1} x <= 1}; A^{-1/2} maps it to the ball.
  r.map = LinearMap(detail::det_normalize(detail::sym_sqrt(e.shape.inverse())));
  r.diagnostics.iterations = e.iterations;
  r.diagnostics.residual = e.residual;
  r.diagnostics.converged = e.converged;
  r.diagnostics.ellipsoid_condition = detail::condition_of(e.shape);
  if (!e.converged) r.diagnostics.message = "MVEE did not converge";
  detail::fill_functionals(r, body, fo);
  return r;
}

/// Sphere sample rescaled so that (n/N) sum theta theta^T = I exactly
/// (alternating whitening and renormalization). Sample averages of quadratic
/// functions of theta then match sigma-averages.
inline DirectionSet balanced_directions(int n, std::size_t count, std::uint64_t seed, unsigned jobs = 1) {
  if (count < static_cast<std::size_t>(n)) throw PositionError("balanced_directions: need at least n directions");
  DirectionSet d = sample_sphere(n, count, seed, jobs);
  const double dn = static_cast<double>(n), dc = static_cast<double>(count);
  for (int it = 0; it < 200; ++it) {
    const Mat C = (dn / dc) * d.directions.transpose() * d.directions;
    if ((C - Mat::Identity(n, n)).norm() < 1e-14) break;
    d.directions = d.directions * detail::sym_inv_sqrt(C);
    d.directions.rowwise().normalize();
  }
  return d;
}

// ---------------------------------------------------------------------------
// Minimal mean width
// ---------------------------------------------------------------------------

struct MeanWidthDescentOptions {
  int step_budget = 200;
  std::size_t directions = 2000;
  std::uint64_t seed = 0x3d7a;
  double gradient_tolerance = 1e-9;
  double C = 1.0;  // constant in M* <= sqrt(n) C log(1+n)
  unsigned jobs = 1;
};

/// Locally minimizes M*(S K) over positive-definite S = exp(H), tr H = 0, with
/// backtracking descent in H. The objective is the average of h_K(S theta)
/// over one fixed balanced direction sample, so every accepted step
/// decreases it and the Euclidean ball is an exact stationary point.
inline PositionReport min_mean_width_position(const BodySpec& body, const MeanWidthDescentOptions& o = {},
                                              const FunctionalOptions& fo = {}) {
  if (o.step_budget < 1) throw PositionError("min_mean_width_position: step_budget must be >= 1");
  const int n = body.dim();
  const DirectionSet dirs = balanced_directions(n, o.directions, o.seed, o.jobs);
  const auto count = static_cast<std::size_t>(dirs.count());

  auto evaluate = [&](const Mat& S, Mat* grad) {
    std::vector<double> h(count);
    std::vector<Mat> partial;
    const std::size_t chunks = std::min<std::size_t>(count, 64);
    if (grad) partial.assign(chunks, Mat::Zero(n, n));
    parallel_for(chunks, o.jobs, [&](std::size_t c) {
      for (std::size_t i = c; i < count; i += chunks) {
        const Vec t = dirs[static_cast<Eigen::Index>(i)];
        if (grad) {
          const SupportResult sr = body.support_result(S * t);
          h[i] = sr.value;
          partial[c] += sr.point * t.transpose();
        } else {
          h[i] = body.support(S * t);
        }
      }
    });
    double m = 0.0;
    for (double v : h) m += v;
    m /= static_cast<double>(count);
    if (grad) {
      Mat G = Mat::Zero(n, n);
      for (const Mat& p : partial) G += p;
      G /= static_cast<double>(count);
      // d/dH along symmetric perturbations of S = exp(H), symmetrized.
      Mat D = 0.5 * (S * G + G * S);
      D = 0.5 * (D + D.transpose());
      D -= (D.trace() / n) * Mat::Identity(n, n);
      *grad = D;
    }
    return m;
  };

  Mat H = Mat::Zero(n, n);
  Mat S = Mat::Identity(n, n);
  Mat G;
  double f = evaluate(S, &G);
  PositionReport r;
  r.kind = PositionKind::MinMeanWidth;
  r.diagnostics.initial_objective = f;
  double eta = 1.0 / std::max(f, 1e-12);
  int it = 0;
  bool stalled = false;
  for (; it < o.step_budget; ++it) {
    const double gn = G.norm();
    if (gn <= o.gradient_tolerance * std::max(1.0, f)) break;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      const Mat Hn = H - eta * G;
      const Mat Sn = detail::sym_exp(Hn);
      Mat Gn;
      const double fn = evaluate(Sn, &Gn);
      if (std::isfinite(fn) && fn < f - 1e-4 * eta * gn * gn) {
        H = Hn;
        S = Sn;
        f = fn;
        G = Gn;
        eta *= 1.5;
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) {
      stalled = true;
      break;
    }
  }
  r.map = LinearMap(detail::det_normalize(S), false);
  r.diagnostics.iterations = it;
  r.diagnostics.residual = G.norm();
  r.diagnostics.final_objective = f;
  r.diagnostics.converged = stalled || G.norm() <= o.gradient_tolerance * std::max(1.0, f);
  if (!std::isfinite(f)) {
    r.diagnostics.converged = false;
    r.diagnostics.message = "descent diverged";
  } else if (!r.diagnostics.converged) {
    r.diagnostics.message = "step budget exhausted";
  }
  const double dn = static_cast<double>(n);
  r.diagnostics.bound = std::sqrt(dn) * o.C * std::log(1.0 + dn);
  r.diagnostics.bound_ratio = f / r.diagnostics.bound;
  detail::fill_functionals(r, body, fo);
  return r;
}

struct HalfwayOptions {
  MeanWidthDescentOptions descent;
  double p = 2.0;      // convexity exponent of the body
  double alpha = 1.0;  // convexity constant
  double L_K = 1.0;    // isotropic constant
  std::optional<double> f;  // min(f, log(1+n)); defaults to log(1+n)
  double C = 1.0;
};

/// For a body in isotropic position: finds M = T^2 with M K in minimal mean-width
/// position and reports T = M^{1/2}, with ||T||_op against
/// C n^{1/(2q)} alpha^{-1/(2p)} L_K^{-1/2} min(f, log(1+n))^{1/2}.
inline PositionReport halfway_position(const BodySpec& body, const HalfwayOptions& o = {},
                                       const FunctionalOptions& fo = {}) {
  const PositionReport mmw = min_mean_width_position(body, o.descent, FunctionalOptions{16, fo.seed, 1, 1, fo.sanity_C, {}});
  const Mat M = mmw.map.matrix();
  const Mat T = detail::sym_sqrt(M);
  PositionReport r;
  r.kind = PositionKind::HalfWay;
  r.map = LinearMap(T);
  r.diagnostics = mmw.diagnostics;
  r.diagnostics.auxiliary = M;
  r.diagnostics.residual = (T * T - M).norm();
  const double dn = static_cast<double>(body.dim());
  const double q = detail::conjugate_exponent(o.p);
  const double logn = std::log(1.0 + dn);
  const double m = o.f ? std::min(*o.f, logn) : logn;
  r.diagnostics.bound = o.C * std::pow(dn, 1.0 / (2.0 * q)) * std::pow(o.alpha, -1.0 / (2.0 * o.p)) /
                        std::sqrt(o.L_K) * std::sqrt(m);
  r.diagnostics.bound_ratio = r.map.op_norm() / r.diagnostics.bound;
  detail::fill_functionals(r, body, fo);
  return r;
}

}  // namespace convexlab
