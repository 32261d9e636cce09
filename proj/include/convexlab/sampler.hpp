#pragma once

// Uniform samples in bodies and on the sphere.
//
// Output rows are produced in fixed-size streams, each with its own RNG seeded
// from (root seed, stream index). Streams are concatenated in index order, so
// a batch depends only on its inputs, never on the number of worker threads.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "convexlab/body.hpp"
#include "convexlab/parallel.hpp"
#include "convexlab/rng.hpp"

namespace convexlab {

class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SamplerKind { ExactLp, ExactCube, ExactBall, Rejection, HitAndRun };

inline const char* to_string(SamplerKind k) {
  switch (k) {
    case SamplerKind::ExactLp: return "ExactLp";
    case SamplerKind::ExactCube: return "ExactCube";
    case SamplerKind::ExactBall: return "ExactBall";
    case SamplerKind::Rejection: return "Rejection";
    case SamplerKind::HitAndRun: return "HitAndRun";
  }
  return "?";
}

inline SamplerKind sampler_from_string(const std::string& s) {
  for (SamplerKind k : {SamplerKind::ExactLp, SamplerKind::ExactCube, SamplerKind::ExactBall, SamplerKind::Rejection,
                        SamplerKind::HitAndRun}) {
    if (s == to_string(k)) return k;
  }
  throw SamplerError("unknown sampler '" + s + "'");
}

inline constexpr std::size_t kStreamRows = 4096;

struct DirectionSet {
  Mat directions;  // count x n, unit rows
  std::uint64_t seed = 0;

  Eigen::Index count() const { return directions.rows(); }
  Eigen::Index dim() const { return directions.cols(); }
  Vec operator[](Eigen::Index i) const { return directions.row(i).transpose(); }
};

struct SampleBatch {
  Mat points;  // count x n
  std::string body_id;
  SamplerKind sampler = SamplerKind::ExactLp;
  std::uint64_t seed = 0;
  int burn_in = 0;
  int thinning = 1;
  bool antithetic = false;

  Eigen::Index count() const { return points.rows(); }
  Eigen::Index dim() const { return points.cols(); }
  Vec row(Eigen::Index i) const { return points.row(i).transpose(); }

  /// This batch stacked on its negation.
  SampleBatch with_negation() const {
    SampleBatch out = *this;
    out.points.resize(2 * count(), dim());
    out.points.topRows(count()) = points;
    out.points.bottomRows(count()) = -points;
    return out;
  }
};

struct SamplerOptions {
  unsigned jobs = 1;
  bool antithetic = false;
};

namespace detail {

template <class RowFn>
Mat generate_streams(std::size_t count, Eigen::Index n, std::uint64_t seed, unsigned jobs, RowFn&& fill) {
  Mat out(static_cast<Eigen::Index>(count), n);
  const std::size_t streams = (count + kStreamRows - 1) / kStreamRows;
  parallel_for(streams, jobs, [&](std::size_t s) {
    Rng rng = make_rng(seed, s);
    const std::size_t begin = s * kStreamRows;
    const std::size_t end = std::min(count, begin + kStreamRows);
    fill(out, begin, end, rng);
  });
  return out;
}

}  // namespace detail

/// i.i.d. uniform directions on S^{n-1} (normalized Gaussians).
inline DirectionSet sample_sphere(int n, std::size_t count, std::uint64_t seed, unsigned jobs = 1) {
  if (n < 1 || count < 1) throw SamplerError("sample_sphere: need n >= 1 and count >= 1");
  DirectionSet d;
  d.seed = seed;
  d.directions = detail::generate_streams(count, n, seed, jobs, [n](Mat& out, std::size_t b, std::size_t e, Rng& rng) {
    for (std::size_t i = b; i < e; ++i) out.row(static_cast<Eigen::Index>(i)) = random_unit_vector(n, rng).transpose();
  });
  return d;
}

/// Whether sample_exact supports this body (l_p balls, cubes, cross-polytopes and their linear images).
inline bool has_exact_sampler(const BodySpec& body) {
  const Family f = body.base_family();
  return f == Family::LpBall || f == Family::Cube || f == Family::CrossPolytope;
}

namespace detail {

// Uniform point in the unit l_p ball via generalized Gaussians:
// g_i ~ exp(-|t|^p), W ~ Exp(1), X = g / (||g||_p^p + W)^{1/p}.
inline Vec uniform_lp_ball(int n, double p, Rng& rng) {
  Vec x(n);
  if (std::isinf(p)) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < n; ++i) x[i] = u(rng);
    return x;
  }
  if (p == 2.0) {
    const Vec dir = random_unit_vector(n, rng);
    return dir * std::pow(uniform01(rng), 1.0 / n);
  }
  std::gamma_distribution<double> gamma(1.0 / p, 1.0);
  std::exponential_distribution<double> expo(1.0);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double gp = gamma(rng);  // |g|^p
    sum += gp;
    x[i] = std::pow(gp, 1.0 / p) * (uniform01(rng) < 0.5 ? -1.0 : 1.0);
  }
  const double w = expo(rng);
  return x / std::pow(sum + w, 1.0 / p);
}

}  // namespace detail

/// Exact i.i.d. uniform sampling.
inline SampleBatch sample_exact(const BodySpec& body, std::size_t count, std::uint64_t seed,
                                const SamplerOptions& opt = {}) {
  if (!has_exact_sampler(body)) {
    throw SamplerError(std::string("sample_exact: no exact sampler for ") + body.describe() + "; use hit-and-run");
  }
  if (count < 1) throw SamplerError("sample_exact: count must be >= 1");
  const Family f = body.base_family();
  const int n = body.dim();
  const BodySpec& base = body.inner() ? *body.inner() : body;
  double p = base.p();
  double unit = base.scale();
  SampleBatch batch;
  if (f == Family::Cube) {
    p = std::numeric_limits<double>::infinity();
    unit = 0.5 * base.scale();
    batch.sampler = SamplerKind::ExactCube;
  } else if (f == Family::CrossPolytope) {
    p = 1.0;
    batch.sampler = SamplerKind::ExactLp;
  } else {
    batch.sampler = p == 2.0 ? SamplerKind::ExactBall : SamplerKind::ExactLp;
  }
  const Mat* map = body.transform() ? &body.transform()->matrix() : nullptr;
  const bool anti = opt.antithetic;
  batch.points = detail::generate_streams(count, n, seed, opt.jobs, [&](Mat& out, std::size_t b, std::size_t e, Rng& rng) {
    for (std::size_t i = b; i < e; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      if (anti && (i - b) % 2 == 1) {
        out.row(r) = -out.row(r - 1);
        continue;
      }
      Vec x = detail::uniform_lp_ball(n, p, rng) * unit;
      if (map) x = (*map) * x;
      out.row(r) = x.transpose();
    }
  });
  batch.body_id = body.describe();
  batch.seed = seed;
  batch.antithetic = anti;
  return batch;
}

/// Rejection from the bounding box [-h(e_i), h(e_i)]; practical for small n only.
inline SampleBatch sample_rejection(const BodySpec& body, std::size_t count, std::uint64_t seed,
                                    const SamplerOptions& opt = {}, std::size_t max_attempts_per_point = 100000) {
  const int n = body.dim();
  Vec half(n);
  for (int i = 0; i < n; ++i) {
    Vec e = Vec::Zero(n);
    e[i] = 1.0;
    half[i] = body.support(e) * (1.0 + 1e-9);
  }
  SampleBatch batch;
  batch.points = detail::generate_streams(count, n, seed, opt.jobs, [&](Mat& out, std::size_t b, std::size_t e, Rng& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::size_t i = b; i < e; ++i) {
      std::size_t attempts = 0;
      for (;;) {
        Vec x(n);
        for (int j = 0; j < n; ++j) x[j] = u(rng) * half[j];
        if (body.norm(x) <= 1.0) {
          out.row(static_cast<Eigen::Index>(i)) = x.transpose();
          break;
        }
        if (++attempts > max_attempts_per_point) throw SamplerError("sample_rejection: acceptance rate too low");
      }
    }
  });
  batch.body_id = body.describe();
  batch.sampler = SamplerKind::Rejection;
  batch.seed = seed;
  return batch;
}

/// Largest t > 0 with x + t d in the body, by bisection to relative tolerance `tol`.
inline double chord_extent(const BodySpec& body, const Vec& x, const Vec& d, double tol = 1e-10) {
  const double nd = body.norm(d);
  if (!(nd > 0.0) || !std::isfinite(nd)) throw SamplerError("hit-and-run: chord is unbounded (degenerate body)");
  // ||x + t d|| >= t||d|| - ||x||, so the exit time is at most (1 + ||x||)/||d||.
  double lo = 0.0, hi = (1.0 + body.norm(x)) / nd;
  const double width = hi;
  while (hi - lo > tol * width) {
    const double mid = 0.5 * (lo + hi);
    if (body.norm(x + mid * d) <= 1.0) lo = mid;
    else hi = mid;
  }
  return lo;
}

struct HitAndRunOptions {
  int burn_in = -1;   // default 10 n
  int thinning = -1;  // default max(1, n/2)
  unsigned jobs = 1;
};

/// Hit-and-run chains started at the origin: each step draws a uniform direction
/// and a uniform point on the chord through the current point.
inline SampleBatch sample_hitrun(const BodySpec& body, std::size_t count, std::uint64_t seed,
                                 HitAndRunOptions opt = {}) {
  const int n = body.dim();
  if (opt.burn_in < 0) opt.burn_in = 10 * n;
  if (opt.thinning < 0) opt.thinning = std::max(1, n / 2);
  if (opt.thinning < 1) throw SamplerError("hit-and-run: thinning must be >= 1");
  if (count < 1) throw SamplerError("hit-and-run: count must be >= 1");
  SampleBatch batch;
  batch.points = detail::generate_streams(count, n, seed, opt.jobs, [&](Mat& out, std::size_t b, std::size_t e, Rng& rng) {
    Vec x = Vec::Zero(n);
    auto step = [&] {
      const Vec d = random_unit_vector(n, rng);
      const double fwd = chord_extent(body, x, d);
      const double bwd = chord_extent(body, x, -d);
      x += (uniform01(rng) * (fwd + bwd) - bwd) * d;
    };
    for (int i = 0; i < opt.burn_in; ++i) step();
    for (std::size_t i = b; i < e; ++i) {
      for (int t = 0; t < opt.thinning; ++t) step();
      out.row(static_cast<Eigen::Index>(i)) = x.transpose();
    }
  });
  batch.body_id = body.describe();
  batch.sampler = SamplerKind::HitAndRun;
  batch.seed = seed;
  batch.burn_in = opt.burn_in;
  batch.thinning = opt.thinning;
  return batch;
}

/// Exact sampler when available, otherwise hit-and-run with default settings.
inline SampleBatch sample_uniform(const BodySpec& body, std::size_t count, std::uint64_t seed, unsigned jobs = 1) {
  if (has_exact_sampler(body)) return sample_exact(body, count, seed, {jobs, false});
  HitAndRunOptions h;
  h.jobs = jobs;
  return sample_hitrun(body, count, seed, h);
}

// ---------------------------------------------------------------------------
// Persistence: CSV (header x1..xn) or raw little-endian doubles + text sidecar.
// ---------------------------------------------------------------------------

inline void write_csv(const SampleBatch& batch, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw SamplerError("cannot write " + path);
  for (Eigen::Index j = 0; j < batch.dim(); ++j) os << (j ? "," : "") << "x" << (j + 1);
  os << "\n";
  char buf[40];
  for (Eigen::Index i = 0; i < batch.count(); ++i) {
    for (Eigen::Index j = 0; j < batch.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", batch.points(i, j));
      os << (j ? "," : "") << buf;
    }
    os << "\n";
  }
}

inline Mat read_csv_matrix(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw SamplerError("cannot read " + path);
  std::string line;
  std::getline(is, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size()) throw SamplerError("ragged CSV: " + path);
    rows.push_back(std::move(row));
  }
  Mat m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

inline SampleBatch read_csv(const std::string& path) {
  SampleBatch b;
  b.points = read_csv_matrix(path);
  return b;
}

namespace detail {
inline std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
  return v;
}
}  // namespace detail

inline void write_binary(const SampleBatch& batch, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw SamplerError("cannot write " + path);
  for (Eigen::Index i = 0; i < batch.count(); ++i) {
    for (Eigen::Index j = 0; j < batch.dim(); ++j) {
      const std::uint64_t v = detail::to_little_endian(std::bit_cast<std::uint64_t>(batch.points(i, j)));
      os.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  }
  std::ofstream meta(path + ".meta");
  meta << "n = " << batch.dim() << "\n"
       << "count = " << batch.count() << "\n"
       << "seed = " << batch.seed << "\n"
       << "sampler = " << to_string(batch.sampler) << "\n"
       << "burn_in = " << batch.burn_in << "\n"
       << "thinning = " << batch.thinning << "\n"
       << "antithetic = " << (batch.antithetic ? 1 : 0) << "\n"
       << "body = " << batch.body_id << "\n";
}

inline SampleBatch read_binary(const std::string& path) {
  std::ifstream meta(path + ".meta");
  if (!meta) throw SamplerError("missing sidecar " + path + ".meta");
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  SampleBatch b;
  const long n = std::stol(kv.at("n"));
  const long count = std::stol(kv.at("count"));
  b.seed = std::stoull(kv.at("seed"));
  b.sampler = sampler_from_string(kv.at("sampler"));
  b.burn_in = std::stoi(kv.at("burn_in"));
  b.thinning = std::stoi(kv.at("thinning"));
  b.antithetic = kv.count("antithetic") && kv.at("antithetic") == "1";
  b.body_id = kv.count("body") ? kv.at("body") : "";
  std::ifstream is(path, std::ios::binary);
  if (!is) throw SamplerError("cannot read " + path);
  b.points.resize(count, n);
  for (long i = 0; i < count; ++i) {
    for (long j = 0; j < n; ++j) {
      std::uint64_t v = 0;
      if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw SamplerError("truncated binary batch " + path);
      b.points(i, j) = std::bit_cast<double>(detail::to_little_endian(v));
    }
  }
  return b;
}

}  // namespace convexlab
