#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "convexlab/marginal.hpp"
#include "oracles.hpp"

using namespace convexlab;

namespace {

std::vector<double> gaussian_samples(std::size_t count, double rho, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> g(0.0, rho);
  std::vector<double> s(count);
  for (auto& v : s) v = g(rng);
  return s;
}

std::vector<double> uniform_samples(std::size_t count, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<double> s(count);
  for (auto& v : s) v = u(rng);
  return s;
}

DensityEstimate gaussian_grid(double rho) {
  return DensityEstimate::from_function([rho](double s) { return GaussianRef(rho).density(s); }, 12 * rho, 4000);
}

Vec unit(int n, int i) {
  Vec e = Vec::Zero(n);
  e[i] = 1.0;
  return e;
}

}  // namespace

TEST(Project, CubeAxisIsUniform) {
  const std::size_t count = 100000;
  const BodySpec k = cube(5);
  const SampleBatch b = sample_exact(k, count, 1);
  const std::vector<double> s = project(b, unit(5, 0));
  ASSERT_EQ(s.size(), count);
  EXPECT_NEAR(projected_second_moment(s), 1.0 / 12, 3 * std::sqrt((1.0 / 80 - 1.0 / 144) / count));
  const std::vector<double> neg = project(b, -unit(5, 0));
  for (std::size_t i = 0; i < count; ++i) ASSERT_EQ(neg[i], -s[i]);
  EXPECT_EQ(density_estimate(s).variance(), density_estimate(neg).variance());
  Rng rng = make_rng(2);
  for (int t = 0; t < 20; ++t) {
    const Vec th = random_unit_vector(5, rng);
    const double h = k.support(th);
    for (double v : project(b, th)) ASSERT_LE(std::abs(v), h * (1 + 1e-12));
  }
  EXPECT_THROW(project(b, Vec::Ones(4)), MarginalError);
}

TEST(Density, GaussianSamplesWithinDkw) {
  const std::size_t count = 100000;
  const DensityEstimate d = density_estimate(gaussian_samples(count, 1.0, 3));
  EXPECT_EQ(d.bins() % 2, 0);
  EXPECT_NEAR(d.integral(), 1.0, 1e-12);
  const double dkw = std::sqrt(std::log(2.0 / 0.05) / (2.0 * count));
  EXPECT_LE(marginal_distance(d, GaussianRef(1.0), Metric::Kol), 2 * dkw);
}

TEST(Density, UniformIsFlat) {
  const std::size_t count = 200000;
  const DensityEstimate d = density_estimate(uniform_samples(count, 4));
  // Every bin within 3 binomial sigma, allowing the handful of exceedances
  // expected by chance over ~60 bins; none beyond 4.5 sigma.
  int beyond3 = 0;
  for (int k = 0; k < d.half_bins(); ++k) {
    const double p = d.bin_mass(k);
    const double expected = 2.0 * d.bin_width();  // |S| is uniform on [0, 1/2]
    const double sigma = oracle::binomial_sigma(expected, count);
    beyond3 += std::abs(p - expected) > 3 * sigma;
    EXPECT_NEAR(p, expected, 4.5 * sigma) << "bin " << k;
  }
  EXPECT_LE(beyond3, 2);
  EXPECT_NEAR(d.density(0.1), 1.0, 0.1);
}

TEST(Density, EvenAndSymmetrized) {
  std::vector<double> s = gaussian_samples(5000, 2.0, 5);
  const DensityEstimate a = density_estimate(s);
  for (double& v : s) v = -v;
  const DensityEstimate b = density_estimate(s);
  EXPECT_TRUE(a.values() == b.values());
  const Vec g = a.grid(), v = a.values();
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    EXPECT_EQ(v[i], v[g.size() - 1 - i]);
    EXPECT_EQ(g[i], -g[g.size() - 1 - i]);
    EXPECT_GE(v[i], 0.0);
  }
  double trapezoid_free = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) trapezoid_free += v[i] * a.bin_width();
  EXPECT_NEAR(trapezoid_free, 1.0, 1e-6);
}

TEST(Density, Rejections) {
  EXPECT_THROW(density_estimate(std::vector<double>(999, 0.1)), MarginalError);
  EXPECT_THROW(density_estimate(std::vector<double>(5000, 0.1)), MarginalError);
}

TEST(Distance, IdentityIsZero) {
  const DensityEstimate d = density_estimate(gaussian_samples(20000, 1.0, 6));
  EXPECT_EQ(marginal_distance(d, d, Metric::Kol), 0.0);
  EXPECT_EQ(marginal_distance(d, d, Metric::TV), 0.0);
  EXPECT_EQ(marginal_distance(d, d, Metric::Lin, 1.0), 0.0);
}

TEST(Distance, KolBetweenUnitAndDoubleGaussian) {
  // Oracle: sup_t |erf(t/sqrt2) - erf(t/(2 sqrt2))| by golden-section search.
  const double exact = oracle::golden_max(
      [](double t) { return oracle::gaussian_interval_mass(t, 1.0) - oracle::gaussian_interval_mass(t, 2.0); }, 0.0, 5.0,
      200);
  EXPECT_NEAR(exact, 0.32267456883476864, 1e-9);
  const DensityEstimate f = gaussian_grid(1.0);
  EXPECT_NEAR(marginal_distance(f, GaussianRef(2.0), Metric::Kol), exact, 2e-4);
  EXPECT_NEAR(marginal_distance(f, gaussian_grid(2.0), Metric::Kol), exact, 2e-4);
}

TEST(Distance, CubeAxisIsABadDirection) {
  const double sigma = std::sqrt(1.0 / 12);
  // The gap has two local maxima (inside and at the edge of [-1/2, 1/2]); dense scan.
  double exact = 0;
  for (int i = 1; i <= 200000; ++i) {
    const double t = i * 1e-5;
    exact = std::max(exact, std::abs(std::min(2 * t, 1.0) - oracle::gaussian_interval_mass(t, sigma)));
  }
  const SampleBatch b = sample_exact(cube(8), 100000, 7);
  const DensityEstimate d = density_estimate(project(b, unit(8, 0)));
  const double kol = marginal_distance(d, GaussianRef(sigma), Metric::Kol);
  EXPECT_GE(kol, 0.05);
  EXPECT_NEAR(kol, exact, 0.01);
  EXPECT_LE(kol, marginal_distance(d, GaussianRef(sigma), Metric::TV));
}

TEST(Distance, KolSymmetricAndBelowTv) {
  const DensityEstimate a = density_estimate(gaussian_samples(20000, 1.0, 8));
  const DensityEstimate b = density_estimate(uniform_samples(20000, 9));
  EXPECT_EQ(marginal_distance(a, b, Metric::Kol), marginal_distance(b, a, Metric::Kol));
  EXPECT_LE(marginal_distance(a, b, Metric::Kol), marginal_distance(a, b, Metric::TV));
  for (double rho : {0.3, 1.0, 1.7}) {
    EXPECT_LE(marginal_distance(a, GaussianRef(rho), Metric::Kol), marginal_distance(a, GaussianRef(rho), Metric::TV));
  }
}

TEST(Distance, TvAgainstGaussianGrid) {
  // TV(phi_1, phi_2) = 2 (erf(t*/sqrt2) - erf(t*/(2 sqrt2))) at the crossing t*.
  const double t_star = std::sqrt(8 * std::log(2.0) / 3);
  const double exact = 2 * (std::erf(t_star / std::numbers::sqrt2) - std::erf(t_star / (2 * std::numbers::sqrt2)));
  EXPECT_NEAR(marginal_distance(gaussian_grid(1.0), GaussianRef(2.0), Metric::TV), exact, 1e-3);
}

TEST(Distance, LinearLinnik) {
  const DensityEstimate d = density_estimate(gaussian_samples(400000, 1.0, 10));
  EXPECT_LE(marginal_distance(d, GaussianRef(1.0), Metric::Lin, 1.0), 0.05);
  // phi_1 against phi_2 at s = 0: ratio 2.
  EXPECT_NEAR(marginal_distance(gaussian_grid(1.0), GaussianRef(2.0), Metric::Lin, 0.01), 1.0, 1e-3);
  EXPECT_THROW(marginal_distance(d, GaussianRef(1.0), Metric::Lin, 0.0), MarginalError);
  const DensityEstimate narrow = density_estimate(uniform_samples(5000, 11));
  EXPECT_THROW(marginal_distance(d, narrow, Metric::Lin, 2.0), MarginalError);
}

TEST(KolToTv, Values) {
  EXPECT_NEAR(kol_to_tv_bound(1.0 / std::numbers::e), std::sqrt(1.0 / std::numbers::e), 1e-15);
  EXPECT_NEAR(kol_to_tv_bound(1.0 / std::numbers::e), 0.6065, 1e-4);
  EXPECT_LT(kol_to_tv_bound(1e-12), 1e-5);
  double prev = 0;
  for (int i = 1; i <= 100; ++i) {
    const double v = kol_to_tv_bound(i / 100.0 / std::numbers::e);
    EXPECT_GT(v, prev);
    prev = v;
  }
  EXPECT_THROW(kol_to_tv_bound(0.0), MarginalError);
  EXPECT_THROW(kol_to_tv_bound(1.0), MarginalError);
}

TEST(AvgDensity, BallMatchesEveryDirection) {
  const int n = 6;
  const SampleBatch b = sample_exact(lp_ball(n, 2.0), 50000, 12);
  const DirectionSet dirs = sample_sphere(n, 40, 13);
  const double rho = std::sqrt(projected_second_moment(project(b, unit(n, 0))));
  const AverageDensity avg = avg_density(b, dirs, GaussianRef(rho), 0.1);
  const DensityEstimate one = density_estimate(project(b, unit(n, 1)));
  const double dkw = std::sqrt(std::log(2.0 / 0.05) / (2.0 * 50000));
  EXPECT_LE(marginal_distance(one, avg.g_avg, Metric::Kol), 2 * 2 * dkw);
  for (Eigen::Index i = 1; i < avg.G.size(); ++i) ASSERT_GE(avg.G[i], avg.G[i - 1]);
  EXPECT_DOUBLE_EQ(avg.G[avg.G.size() - 1], 1.0);
  EXPECT_DOUBLE_EQ(avg.G[0], 0.0);
  EXPECT_NEAR(avg.bound, 0.4 + 1 / std::sqrt(6.0), 1e-15);
  EXPECT_GT(avg.ratio, 0.0);
}

TEST(Abp, BallIsRoundAndCubeWithinBudget) {
  const int n = 8;
  const SampleBatch ball = sample_exact(lp_ball(n, 2.0), 100000, 14);
  const double rb = std::sqrt(projected_second_moment(project(ball, unit(n, 0))));
  const DirectionSet dirs = sample_sphere(n, 50, 15);
  for (const AbpRow& r : abp_structure_check(ball, dirs, {rb / 2, rb, 2 * rb}, 300, 16)) {
    EXPECT_TRUE(r.pass) << "t=" << r.t << " violation " << r.max_violation << " budget " << r.budget;
    EXPECT_LE(r.ratio, 1.1);
  }
  const SampleBatch cb = sample_exact(cube(n), 100000, 17);
  const double rc = std::sqrt(1.0 / 12);
  const auto rows = abp_structure_check(cb, dirs, {rc / 2, rc, 2 * rc}, 300, 18);
  for (const AbpRow& r : rows) {
    EXPECT_LE(r.max_violation, 0.05);
    EXPECT_TRUE(r.pass);
    EXPECT_LE(r.budget, 0.05);
  }
  const double lo = std::min({rows[0].ratio, rows[1].ratio, rows[2].ratio});
  const double hi = std::max({rows[0].ratio, rows[1].ratio, rows[2].ratio});
  EXPECT_LE(hi / lo, 3.0);
  EXPECT_THROW(abp_structure_check(cb, dirs, {100.0}, 10, 1), MarginalError);
}

TEST(GoodDirections, BallAllGoodAndMonotone) {
  const int n = 10;
  const SampleBatch b = sample_exact(lp_ball(n, 2.0), 50000, 19);
  const DirectionSet dirs = sample_sphere(n, 30, 20);
  const double rho = std::sqrt(projected_second_moment(project(b, unit(n, 0))));
  const DirectionSweep sweep = good_direction_fraction(b, dirs, GaussianRef(rho), Metric::Kol, 0.0, 0.05);
  EXPECT_EQ(sweep.fraction, 1.0);
  ASSERT_EQ(sweep.rows.size(), 30u);
  double prev = 0;
  for (double d = 0.0; d <= 0.05; d += 0.001) {
    const double f = sweep.fraction_at(d);
    EXPECT_GE(f, prev);
    prev = f;
  }
  for (const auto& r : sweep.rows) EXPECT_TRUE(std::isnan(r.d_lin));
  const DirectionSweep lin = good_direction_fraction(b, dirs, GaussianRef(rho), Metric::Lin,
                                                     default_lin_threshold(rho, n), 0.5);
  for (const auto& r : lin.rows) EXPECT_FALSE(std::isnan(r.d_lin));
}

TEST(GoodDirections, JobsDoNotChangeResults) {
  const SampleBatch b = sample_exact(cube(6), 20000, 21);
  const DirectionSet dirs = sample_sphere(6, 70, 22);
  const auto a = good_direction_fraction(b, dirs, GaussianRef(std::sqrt(1.0 / 12)), Metric::TV, 0.3, 0.1, 1);
  const auto c = good_direction_fraction(b, dirs, GaussianRef(std::sqrt(1.0 / 12)), Metric::TV, 0.3, 0.1, 3);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].d_kol, c.rows[i].d_kol);
    EXPECT_EQ(a.rows[i].d_lin, c.rows[i].d_lin);
  }
}

TEST(LogConcavity, MarginalsOfConvexBodies) {
  const SampleBatch b = sample_exact(cube(4), 200000, 23);
  const Vec th = Vec::Ones(4) / 2.0;
  const DensityEstimate d = density_estimate(project(b, th));
  EXPECT_LE(log_concavity_violation(d), 0.1);
  EXPECT_LE(log_concavity_violation(d.log_concave_envelope()), 1e-9);
  EXPECT_NEAR(d.log_concave_envelope().integral(), 1.0, 1e-12);
}
