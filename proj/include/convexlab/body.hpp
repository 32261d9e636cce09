#pragma once

// Centrally-symmetric convex bodies as norm / support-function oracles.
//
// Every body K is stored as scale * K0 where K0 is the unit ball of a
// family norm and scale makes |K| = 1. Linear images carry the map on top of
// an inner (non-image) body; composing images folds the maps together.

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "convexlab/rng.hpp"

namespace convexlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class BodyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Family { LpBall, Cube, CrossPolytope, SchattenBall, LinearImageOf, SectionOf, QuotientOf };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::LpBall: return "LpBall";
    case Family::Cube: return "Cube";
    case Family::CrossPolytope: return "CrossPolytope";
    case Family::SchattenBall: return "SchattenBall";
    case Family::LinearImageOf: return "LinearImageOf";
    case Family::SectionOf: return "SectionOf";
    case Family::QuotientOf: return "QuotientOf";
  }
  return "?";
}

inline Family family_from_string(const std::string& s) {
  for (Family f : {Family::LpBall, Family::Cube, Family::CrossPolytope, Family::SchattenBall,
                   Family::LinearImageOf, Family::SectionOf, Family::QuotientOf}) {
    if (s == to_string(f)) return f;
  }
  throw BodyError("unknown body family '" + s + "'");
}

namespace detail {

inline double lp_norm(const Vec& x, double p) {
  const double m = x.cwiseAbs().maxCoeff();
  if (x.size() == 0 || m == 0.0) return 0.0;
  if (std::isinf(p)) return m;
  if (p == 1.0) return x.cwiseAbs().sum();
  if (p == 2.0) return x.norm();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) acc += std::pow(std::abs(x[i]) / m, p);
  return m * std::pow(acc, 1.0 / p);
}

inline double conjugate_exponent(double p) {
  if (p == 1.0) return std::numeric_limits<double>::infinity();
  if (std::isinf(p)) return 1.0;
  return p / (p - 1.0);
}

// argmax of <x, g> over the unit l_p ball.
inline Vec lp_support_point(const Vec& g, double p) {
  Vec x = Vec::Zero(g.size());
  const double gmax = g.cwiseAbs().maxCoeff();
  if (gmax == 0.0) return x;
  if (p == 1.0) {
    Eigen::Index j = 0;
    g.cwiseAbs().maxCoeff(&j);
    x[j] = g[j] > 0 ? 1.0 : -1.0;
    return x;
  }
  if (std::isinf(p)) {
    for (Eigen::Index i = 0; i < g.size(); ++i) x[i] = g[i] > 0 ? 1.0 : (g[i] < 0 ? -1.0 : 0.0);
    return x;
  }
  const double q = conjugate_exponent(p);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double a = std::abs(g[i]) / gmax;
    x[i] = std::copysign(std::pow(a, q - 1.0), g[i]);
  }
  return x / lp_norm(x, p);
}

// log-volume of the unit l_p ball in R^n.
inline double log_lp_ball_volume(int n, double p) {
  if (std::isinf(p)) return n * std::log(2.0);
  return n * std::log(2.0 * std::tgamma(1.0 + 1.0 / p)) - std::lgamma(1.0 + n / p);
}

inline double log_euclidean_ball_volume(int n) { return log_lp_ball_volume(n, 2.0); }

struct MinNormResult {
  double value = 0.0;
  Vec y;
  bool converged = false;
};

/// min ||y||_r subject to B^T y = v, for B with orthonormal columns and
/// 1 < r < inf. Solved through the smooth dual in the k multipliers by damped
/// Newton: y = psi(B lambda) with psi(z) = sign(z)|z|^(s-1), s = r'.
inline MinNormResult min_norm_affine(const Mat& basis, const Vec& v, double r) {
  MinNormResult out;
  const Eigen::Index k = basis.cols();
  if (v.norm() == 0.0) {
    out.y = Vec::Zero(basis.rows());
    out.converged = true;
    return out;
  }
  const double s = conjugate_exponent(r);
  auto psi = [s](const Vec& z) {
    Vec y(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) y[i] = std::copysign(std::pow(std::abs(z[i]), s - 1.0), z[i]);
    return y;
  };
  auto phi = [s](const Vec& z) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) acc += std::pow(std::abs(z[i]), s);
    return acc / s;
  };
  // Radial warm start: minimize Phi(c v) - c |v|^2 over c > 0.
  const double phi_v = phi(basis * v);
  Vec lambda = v * std::pow(v.squaredNorm() / (s * phi_v), 1.0 / (s - 1.0));
  const double gtol = 1e-13 * v.norm();
  for (int it = 0; it < 200; ++it) {
    const Vec z = basis * lambda;
    const Vec grad = basis.transpose() * psi(z) - v;
    if (grad.norm() <= gtol) {
      out.converged = true;
      break;
    }
    const double zmax = z.cwiseAbs().maxCoeff();
    Vec w(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double a = std::max(std::abs(z[i]), 1e-12 * zmax);
      w[i] = (s - 1.0) * std::pow(a, s - 2.0);
    }
    Mat hess = basis.transpose() * w.asDiagonal() * basis;
    hess.diagonal().array() += 1e-14 * hess.trace() / static_cast<double>(k) + 1e-300;
    Vec step = -hess.ldlt().solve(grad);
    if (!step.allFinite() || step.dot(grad) >= 0.0) step = -grad;
    const double f0 = phi(z) - lambda.dot(v);
    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      const Vec cand = lambda + t * step;
      const double f1 = phi(basis * cand) - cand.dot(v);
      if (f1 <= f0 + 1e-4 * t * step.dot(grad)) {
        lambda = cand;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) {
      out.converged = grad.norm() <= 1e-8 * v.norm();
      break;
    }
  }
  out.y = psi(basis * lambda);
  out.value = lp_norm(out.y, r);
  return out;
}

}  // namespace detail

/// Invertible n x n matrix with cached inverse, determinant and operator norms.
class LinearMap {
 public:
  LinearMap() = default;

  explicit LinearMap(Mat matrix, bool volume_preserving = false)
      : matrix_(std::move(matrix)), volume_preserving_(volume_preserving) {
    if (matrix_.rows() != matrix_.cols() || matrix_.rows() == 0) {
      throw BodyError("LinearMap: matrix must be square and non-empty");
    }
    if (!matrix_.allFinite()) throw BodyError("LinearMap: non-finite entries");
    Eigen::JacobiSVD<Mat> svd(matrix_);
    const auto& sv = svd.singularValues();
    op_norm_ = sv[0];
    const double smin = sv[sv.size() - 1];
    if (!(smin > 1e-14 * op_norm_) || op_norm_ == 0.0) throw BodyError("LinearMap: singular matrix");
    inverse_op_norm_ = 1.0 / smin;
    det_ = matrix_.determinant();
    inverse_ = matrix_.inverse();
    if (volume_preserving_ && std::abs(std::abs(det_) - 1.0) > 1e-8) {
      throw BodyError("LinearMap: flagged volume-preserving but |det| = " + std::to_string(std::abs(det_)));
    }
  }

  static LinearMap identity(int n) { return LinearMap(Mat::Identity(n, n), true); }
  static LinearMap diagonal(const Vec& d) { return LinearMap(Mat(d.asDiagonal())); }

  /// Rescales so that |det| = 1.
  LinearMap unimodular() const {
    const double c = std::pow(std::abs(det_), -1.0 / static_cast<double>(dim()));
    return LinearMap(matrix_ * c, true);
  }

  int dim() const { return static_cast<int>(matrix_.rows()); }
  const Mat& matrix() const { return matrix_; }
  const Mat& inverse() const { return inverse_; }
  double det() const { return det_; }
  double op_norm() const { return op_norm_; }
  double inverse_op_norm() const { return inverse_op_norm_; }
  double condition() const { return op_norm_ * inverse_op_norm_; }
  bool volume_preserving() const { return volume_preserving_; }

  Vec apply(const Vec& x) const { return matrix_ * x; }
  Vec apply_inverse(const Vec& x) const { return inverse_ * x; }

  /// (*this) after `inner`: x -> M (S x).
  LinearMap after(const LinearMap& inner) const {
    return LinearMap(matrix_ * inner.matrix_, volume_preserving_ && inner.volume_preserving_);
  }

 private:
  Mat matrix_;
  Mat inverse_;
  double det_ = 1.0;
  double op_norm_ = 1.0;
  double inverse_op_norm_ = 1.0;
  bool volume_preserving_ = false;
};

struct SupportResult {
  double value = 0.0;
  Vec point;           // a maximizer on the boundary
  bool converged = true;
  double residual = 0.0;
};

struct AscentOptions {
  int iterations = 200;
  int restarts = 8;
  double tolerance = 1e-8;
  std::uint64_t seed = 0x5eed;
};

/// Construction parameters. `inner_family` and `basis` are used by sections
/// and quotients (basis is N x k with orthonormal columns, N the ambient
/// dimension of the inner l_p space).
struct BodyParams {
  Family family = Family::LpBall;
  int n = 0;
  double p = 2.0;
  int m = 0;
  bool symmetric_coords = false;
  Family inner_family = Family::LpBall;
  Mat basis;
};

class BodySpec;
BodySpec make_body(const BodyParams& params);
BodySpec linear_image(const BodySpec& body, const LinearMap& map);

/// Immutable centrally-symmetric convex body.
class BodySpec {
 public:
  Family family() const { return family_; }
  /// Family of the non-image body (equals family() unless this is a linear image).
  Family base_family() const { return inner_ ? inner_->family_ : family_; }
  int dim() const { return n_; }
  double p() const { return p_; }
  int matrix_side() const { return m_; }
  bool symmetric_coords() const { return symmetric_coords_; }
  Family inner_family() const { return inner_ ? inner_->inner_family_ : inner_family_; }
  const Mat& basis() const { return inner_ ? inner_->basis_ : basis_; }
  /// lambda with lambda * K0 of volume 1 (for images: that of the inner body).
  double scale() const { return scale_; }
  /// Volume of this body: 1 up to volume_rel_error() unless a non-unimodular map was applied.
  double volume() const { return volume_; }
  double volume_rel_error() const { return volume_rel_error_; }
  const std::optional<LinearMap>& transform() const { return transform_; }
  const BodySpec* inner() const { return inner_.get(); }

  /// True when norm/support have closed forms (no inner optimization).
  bool closed_form_support() const {
    const BodySpec& b = inner_ ? *inner_ : *this;
    if (b.family_ == Family::SectionOf) return b.inner_family_ == Family::LpBall && b.p_ > 1.0 && !std::isinf(b.p_);
    return true;
  }

  std::string describe() const {
    std::ostringstream os;
    os << to_string(family_) << "(n=" << n_;
    const BodySpec& b = inner_ ? *inner_ : *this;
    if (inner_) os << ", of=" << to_string(b.family_);
    if (b.family_ == Family::LpBall || b.family_ == Family::SchattenBall || b.family_ == Family::SectionOf ||
        b.family_ == Family::QuotientOf) {
      os << ", p=" << b.p_;
    }
    if (b.family_ == Family::SchattenBall) os << ", m=" << b.m_ << (b.symmetric_coords_ ? ", sym" : "");
    if (b.family_ == Family::SectionOf || b.family_ == Family::QuotientOf) {
      os << ", inner=" << to_string(b.inner_family_) << ", N=" << b.basis_.rows();
    }
    os << ")";
    return os.str();
  }

  double norm(const Vec& x) const {
    check_dim(x);
    if (inner_) return inner_->norm(transform_->apply_inverse(x));
    return base_norm(x) / scale_;
  }

  bool contains(const Vec& x, double tol = 0.0) const { return norm(x) <= 1.0 + tol; }

  /// h_K(theta) = sup{<x, theta> : x in K}; theta need not be a unit vector.
  double support(const Vec& theta) const { return support_result(theta).value; }

  SupportResult support_result(const Vec& theta, const AscentOptions& opt = {}) const {
    check_dim(theta);
    if (inner_) {
      SupportResult r = inner_->support_result(transform_->matrix().transpose() * theta, opt);
      r.point = transform_->apply(r.point);
      return r;
    }
    if (theta.norm() == 0.0) return SupportResult{0.0, Vec::Zero(n_), true, 0.0};
    SupportResult r;
    switch (family_) {
      case Family::LpBall:
        r.point = detail::lp_support_point(theta, p_);
        break;
      case Family::Cube:
        r.point = 0.5 * detail::lp_support_point(theta, std::numeric_limits<double>::infinity());
        break;
      case Family::CrossPolytope:
        r.point = detail::lp_support_point(theta, 1.0);
        break;
      case Family::SchattenBall:
        r.point = schatten_support_point(theta);
        break;
      case Family::QuotientOf:
        r.point = basis_.transpose() * detail::lp_support_point(basis_ * theta, p_);
        break;
      case Family::SectionOf:
        if (closed_form_support()) {
          auto mn = detail::min_norm_affine(basis_, theta, detail::conjugate_exponent(p_));
          r.point = basis_.transpose() * detail::lp_support_point(mn.y, p_);
          r.converged = mn.converged;
        } else {
          return support_by_ascent(theta, opt);
        }
        break;
      case Family::LinearImageOf:
        break;
    }
    r.point *= scale_;
    r.value = r.point.dot(theta);
    return r;
  }

  /// Generic support evaluation from the norm oracle alone: derivative-free
  /// pattern ascent of <u, theta>/||u||_K over directions u, with restarts.
  SupportResult support_by_ascent(const Vec& theta, const AscentOptions& opt = {}) const {
    check_dim(theta);
    Rng rng = make_rng(opt.seed);
    auto ratio = [&](const Vec& u) {
      const double nu = norm(u);
      return nu > 0.0 ? u.dot(theta) / nu : -std::numeric_limits<double>::infinity();
    };
    SupportResult best;
    best.value = -std::numeric_limits<double>::infinity();
    best.converged = false;
    for (int r = 0; r < std::max(1, opt.restarts); ++r) {
      Vec u = (r == 0 && theta.norm() > 0) ? Vec(theta.normalized()) : random_unit_vector(n_, rng);
      double fu = ratio(u);
      double step = 0.5;
      int it = 0;
      for (; it < opt.iterations && step > opt.tolerance; ++it) {
        bool improved = false;
        for (int trial = 0; trial < 2 * n_ + 2; ++trial) {
          Vec d;
          if (trial < 2 * n_) {
            d = Vec::Zero(n_);
            d[trial / 2] = (trial % 2 == 0) ? 1.0 : -1.0;
          } else {
            d = random_unit_vector(n_, rng);
          }
          Vec cand = u + step * d;
          const double cn = cand.norm();
          if (cn == 0.0) continue;
          cand /= cn;
          const double fc = ratio(cand);
          if (fc > fu) {
            u = cand;
            fu = fc;
            improved = true;
          }
        }
        if (!improved) step *= 0.5;
      }
      if (fu > best.value) {
        best.value = fu;
        best.point = u / norm(u);
        best.residual = step;
        best.converged = step <= opt.tolerance;
      }
    }
    return best;
  }

  /// Boundary point x/||x||_K for nonzero x.
  Vec radial_point(const Vec& x) const { return x / norm(x); }

 private:
  friend BodySpec make_body(const BodyParams& params);
  friend BodySpec linear_image(const BodySpec& body, const LinearMap& map);

  void check_dim(const Vec& x) const {
    if (x.size() != n_) {
      throw BodyError("dimension mismatch: body has n=" + std::to_string(n_) + ", vector has " +
                      std::to_string(x.size()));
    }
  }

  Mat to_matrix(const Vec& x) const {
    Mat a(m_, m_);
    if (!symmetric_coords_) {
      for (int i = 0; i < m_; ++i)
        for (int j = 0; j < m_; ++j) a(i, j) = x[i * m_ + j];
      return a;
    }
    int k = 0;
    for (int i = 0; i < m_; ++i) a(i, i) = x[k++];
    for (int i = 0; i < m_; ++i)
      for (int j = i + 1; j < m_; ++j) {
        a(i, j) = a(j, i) = x[k++] / std::sqrt(2.0);
      }
    return a;
  }

  Vec from_matrix(const Mat& a) const {
    Vec x(n_);
    if (!symmetric_coords_) {
      for (int i = 0; i < m_; ++i)
        for (int j = 0; j < m_; ++j) x[i * m_ + j] = a(i, j);
      return x;
    }
    int k = 0;
    for (int i = 0; i < m_; ++i) x[k++] = a(i, i);
    for (int i = 0; i < m_; ++i)
      for (int j = i + 1; j < m_; ++j) x[k++] = a(i, j) * std::sqrt(2.0);
    return x;
  }

  Vec singular_values(const Vec& x) const {
    const Mat a = to_matrix(x);
    if (symmetric_coords_) {
      Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
      return es.eigenvalues().cwiseAbs();
    }
    return Eigen::JacobiSVD<Mat>(a).singularValues();
  }

  Vec schatten_support_point(const Vec& theta) const {
    const Mat g = to_matrix(theta);
    if (symmetric_coords_) {
      Eigen::SelfAdjointEigenSolver<Mat> es(g);
      const Vec lam = es.eigenvalues();
      const Vec s = detail::lp_support_point(lam, p_);
      return from_matrix(es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose());
    }
    Eigen::JacobiSVD<Mat> svd(g, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec s = detail::lp_support_point(svd.singularValues(), p_);
    return from_matrix(svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose());
  }

  double base_norm(const Vec& x) const {
    switch (family_) {
      case Family::LpBall: return detail::lp_norm(x, p_);
      case Family::Cube: return 2.0 * x.cwiseAbs().maxCoeff();
      case Family::CrossPolytope: return x.cwiseAbs().sum();
      case Family::SchattenBall: return detail::lp_norm(singular_values(x), p_);
      case Family::SectionOf: {
        const Vec y = basis_ * x;
        switch (inner_family_) {
          case Family::Cube: return 2.0 * y.cwiseAbs().maxCoeff();
          case Family::CrossPolytope: return y.cwiseAbs().sum();
          default: return detail::lp_norm(y, p_);
        }
      }
      case Family::QuotientOf: return detail::min_norm_affine(basis_, x, p_).value;
      case Family::LinearImageOf: break;
    }
    return 0.0;
  }

  Family family_ = Family::LpBall;
  int n_ = 0;
  double p_ = 2.0;
  int m_ = 0;
  bool symmetric_coords_ = false;
  Family inner_family_ = Family::LpBall;
  Mat basis_;
  double scale_ = 1.0;
  double volume_ = 1.0;
  double volume_rel_error_ = 0.0;
  std::optional<LinearMap> transform_;
  std::shared_ptr<const BodySpec> inner_;
};

namespace detail {

/// |K0| by polar integration |K0| = |B_2^n| E_sigma ||theta||^-n, sampled
/// until the relative standard error reaches `rel_target` (fixed internal seed).
template <class NormFn>
inline std::pair<double, double> polar_log_volume(int n, NormFn&& norm0, double rel_target = 0.01,
                                                  std::size_t max_samples = 400000) {
  Rng rng = make_rng(0x766f6c756d65ULL, static_cast<std::uint64_t>(n));
  // Values r^-n can span many orders of magnitude; accumulate relative to the first draw.
  double log_ref = 0.0;
  double sum = 0.0, sum_sq = 0.0;
  std::size_t count = 0;
  bool have_ref = false;
  while (count < max_samples) {
    const Vec theta = random_unit_vector(n, rng);
    const double lr = -n * std::log(norm0(theta));
    if (!have_ref) {
      log_ref = lr;
      have_ref = true;
    }
    const double w = std::exp(lr - log_ref);
    sum += w;
    sum_sq += w * w;
    ++count;
    if (count >= 2000 && count % 1000 == 0) {
      const double mean = sum / count;
      const double var = std::max(0.0, sum_sq / count - mean * mean);
      if (std::sqrt(var / count) <= rel_target * mean) break;
    }
  }
  const double mean = sum / count;
  const double var = std::max(0.0, sum_sq / count - mean * mean);
  return {log_euclidean_ball_volume(n) + log_ref + std::log(mean), std::sqrt(var / count) / mean};
}

}  // namespace detail

inline BodySpec make_body(const BodyParams& params) {
  BodySpec b;
  b.family_ = params.family;
  b.n_ = params.n;
  b.p_ = params.p;
  b.m_ = params.m;
  b.symmetric_coords_ = params.symmetric_coords;
  b.inner_family_ = params.inner_family;
  if (params.n < 1) throw BodyError("dimension n must be >= 1");
  const bool uses_p = params.family == Family::LpBall || params.family == Family::SchattenBall ||
                      params.family == Family::QuotientOf ||
                      (params.family == Family::SectionOf && params.inner_family == Family::LpBall);
  if (uses_p && !(params.p >= 1.0)) throw BodyError("p must be >= 1 (p < 1 is not a norm)");

  double log_v0 = 0.0;
  switch (params.family) {
    case Family::LpBall:
      log_v0 = detail::log_lp_ball_volume(params.n, params.p);
      break;
    case Family::Cube:
      b.p_ = std::numeric_limits<double>::infinity();
      log_v0 = 0.0;
      break;
    case Family::CrossPolytope:
      b.p_ = 1.0;
      log_v0 = params.n * std::log(2.0) - std::lgamma(params.n + 1.0);
      break;
    case Family::SchattenBall: {
      if (std::isinf(params.p)) throw BodyError("Schatten ball requires finite p");
      if (params.m < 1) throw BodyError("Schatten ball requires matrix side m >= 1");
      const int expected = params.symmetric_coords ? params.m * (params.m + 1) / 2 : params.m * params.m;
      if (expected != params.n) {
        throw BodyError("Schatten ball: ambient dimension " + std::to_string(params.n) + " does not match m=" +
                        std::to_string(params.m) + (params.symmetric_coords ? " (m(m+1)/2 = " : " (m^2 = ") +
                        std::to_string(expected) + ")");
      }
      break;
    }
    case Family::SectionOf:
    case Family::QuotientOf: {
      const Mat& B = params.basis;
      if (B.cols() != params.n || B.rows() < params.n) {
        throw BodyError("section/quotient basis must be N x n with N >= n");
      }
      if ((B.transpose() * B - Mat::Identity(params.n, params.n)).norm() > 1e-8) {
        throw BodyError("section/quotient basis is not orthonormal");
      }
      if (params.inner_family == Family::SchattenBall || params.inner_family == Family::LinearImageOf ||
          params.inner_family == Family::SectionOf || params.inner_family == Family::QuotientOf) {
        throw BodyError("sections/quotients are taken of LpBall, Cube or CrossPolytope");
      }
      if (params.inner_family == Family::Cube) b.p_ = std::numeric_limits<double>::infinity();
      if (params.inner_family == Family::CrossPolytope) b.p_ = 1.0;
      if (params.family == Family::QuotientOf && (b.p_ <= 1.0 || std::isinf(b.p_))) {
        throw BodyError("quotients require an inner l_p space with 1 < p < inf");
      }
      b.basis_ = B;
      break;
    }
    case Family::LinearImageOf:
      throw BodyError("use linear_image() to build images");
  }
  if (params.family == Family::SchattenBall || params.family == Family::SectionOf ||
      params.family == Family::QuotientOf) {
    b.scale_ = 1.0;
    auto [lv, err] = detail::polar_log_volume(params.n, [&](const Vec& t) { return b.base_norm(t); });
    log_v0 = lv;
    b.volume_rel_error_ = err;
  }
  b.scale_ = std::exp(-log_v0 / params.n);
  b.volume_ = 1.0;
  return b;
}

inline BodySpec linear_image(const BodySpec& body, const LinearMap& map) {
  if (map.dim() != body.dim()) throw BodyError("linear_image: map dimension does not match body");
  BodySpec out;
  if (body.inner_) {
    out = body;
    out.transform_ = map.after(*body.transform_);
  } else {
    out.inner_ = std::make_shared<const BodySpec>(body);
    out.transform_ = map;
    out.family_ = Family::LinearImageOf;
    out.n_ = body.n_;
    out.p_ = body.p_;
    out.m_ = body.m_;
    out.symmetric_coords_ = body.symmetric_coords_;
    out.scale_ = body.scale_;
    out.volume_rel_error_ = body.volume_rel_error_;
  }
  out.volume_ = out.inner_->volume_ * std::abs(out.transform_->det());
  return out;
}

// Convenience constructors.
inline BodySpec lp_ball(int n, double p) {
  BodyParams bp;
  bp.family = Family::LpBall;
  bp.n = n;
  bp.p = p;
  return make_body(bp);
}
inline BodySpec cube(int n) {
  BodyParams bp;
  bp.family = Family::Cube;
  bp.n = n;
  return make_body(bp);
}
inline BodySpec cross_polytope(int n) {
  BodyParams bp;
  bp.family = Family::CrossPolytope;
  bp.n = n;
  return make_body(bp);
}
inline BodySpec schatten_ball(int m, double p, bool symmetric = false) {
  BodyParams bp;
  bp.family = Family::SchattenBall;
  bp.m = m;
  bp.n = symmetric ? m * (m + 1) / 2 : m * m;
  bp.p = p;
  bp.symmetric_coords = symmetric;
  return make_body(bp);
}
inline BodySpec section_of(Family inner, double p, const Mat& basis) {
  BodyParams bp;
  bp.family = Family::SectionOf;
  bp.inner_family = inner;
  bp.p = p;
  bp.n = static_cast<int>(basis.cols());
  bp.basis = basis;
  return make_body(bp);
}
inline BodySpec quotient_of(double p, const Mat& basis) {
  BodyParams bp;
  bp.family = Family::QuotientOf;
  bp.p = p;
  bp.n = static_cast<int>(basis.cols());
  bp.basis = basis;
  return make_body(bp);
}

/// N x k matrix with orthonormal columns (QR of a Gaussian matrix).
inline Mat random_orthonormal_basis(int ambient, int k, std::uint64_t seed) {
  if (k > ambient || k < 1) throw BodyError("random_orthonormal_basis: need 1 <= k <= N");
  Rng rng = make_rng(seed, 0xba515);
  Mat g(ambient, k);
  std::normal_distribution<double> normal;
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < ambient; ++i) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Mat> qr(g);
  return qr.householderQ() * Mat::Identity(ambient, k);
}

}  // namespace convexlab
