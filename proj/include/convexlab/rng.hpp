#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace convexlab {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of stream `index` derived from `root`. Streams are independent of the
/// number of worker threads, so output never depends on --jobs.
inline std::uint64_t stream_seed(std::uint64_t root, std::uint64_t index) {
  return mix64(mix64(root) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t root, std::uint64_t index = 0) {
  return Rng(stream_seed(root, index));
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline Eigen::VectorXd gaussian_vector(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

inline Eigen::VectorXd random_unit_vector(Eigen::Index n, Rng& rng) {
  for (;;) {
    Eigen::VectorXd v = gaussian_vector(n, rng);
    const double r = v.norm();
    if (r > 0.0) return v / r;
  }
}

}  // namespace convexlab
