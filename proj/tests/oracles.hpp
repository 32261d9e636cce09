#pragma once

// Independent reference computations used only by tests.

#include <cmath>
#include <functional>
#include <numbers>

namespace oracle {

/// Area of {(x,y) in [-1,1]^2 : inside(x,y)} by midpoint grid counting.
inline double grid_area(const std::function<bool(double, double)>& inside, int cells) {
  const double h = 2.0 / cells;
  long hits = 0;
  for (int i = 0; i < cells; ++i)
    for (int j = 0; j < cells; ++j)
      if (inside(-1 + (i + 0.5) * h, -1 + (j + 0.5) * h)) ++hits;
  return hits * h * h;
}

/// Golden-section maximization of a unimodal f on [a,b].
inline double golden_max(const std::function<double(double)>& f, double a, double b, int iters = 200) {
  const double g = (std::sqrt(5.0) - 1) / 2;
  double c = b - g * (b - a), d = a + g * (b - a);
  for (int i = 0; i < iters; ++i) {
    if (f(c) > f(d)) b = d; else a = c;
    c = b - g * (b - a);
    d = a + g * (b - a);
  }
  return f((a + b) / 2);
}

/// P(|N(0, rho^2)| <= t).
inline double gaussian_interval_mass(double t, double rho) { return std::erf(t / (rho * std::numbers::sqrt2)); }

/// Two-sided binomial standard error.
inline double binomial_sigma(double p, double count) { return std::sqrt(std::max(p * (1 - p), 0.0) / count); }

}  // namespace oracle

#include <algorithm>
#include <vector>

namespace oracle {

/// sup_t |P(|X| <= t) - P(|Y| <= t)| for two empirical samples (merge of sorted |values|).
inline double symmetric_ks(std::vector<double> a, std::vector<double> b) {
  for (auto& v : a) v = std::abs(v);
  for (auto& v : b) v = std::abs(v);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double best = 0.0;
  while (i < a.size() || j < b.size()) {
    double t;
    if (j >= b.size() || (i < a.size() && a[i] <= b[j])) t = a[i]; else t = b[j];
    while (i < a.size() && a[i] <= t) ++i;
    while (j < b.size() && b[j] <= t) ++j;
    best = std::max(best, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return best;
}

}  // namespace oracle
