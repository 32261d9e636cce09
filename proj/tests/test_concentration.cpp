#include <cmath>

#include <gtest/gtest.h>

#include "convexlab/concentration.hpp"
#include "convexlab/rng.hpp"

using namespace convexlab;

namespace {

// Shell tail of the uniform ball of radius R from its radial law P(|X| <= r) = (r/R)^n.
double ball_tail(int n, double R, double rho, double t) {
  const double s = std::sqrt(double(n));
  const double lo = std::max(0.0, (1 - t) * rho * s / R);
  const double hi = std::min(1.0, (1 + t) * rho * s / R);
  return std::pow(lo, n) + 1 - std::pow(hi, n);
}

SampleBatch sphere_batch(int n, std::size_t count, double radius, std::uint64_t seed) {
  SampleBatch b;
  b.points = sample_sphere(n, count, seed).directions * radius;
  return b;
}

}  // namespace

TEST(ThinShell, BallMatchesRadialLaw) {
  const int n = 16;
  const BodySpec K = lp_ball(n, 2.0);
  const double R = K.support(Vec::Unit(n, 0));
  const auto p = thin_shell_profile(sample_exact(K, 20000, 3), RhoConvention::MeanAbs);
  int beyond3 = 0;
  for (std::size_t k = 0; k < p.t_grid.size(); ++k) {
    const double exact = ball_tail(n, R, p.rho, p.t_grid[k]);
    // Floor at one count so single far-tail points do not dominate.
    const double sigma = std::sqrt(std::max(exact * (1 - exact), 1.0 / p.count) / p.count);
    const double z = std::abs(p.tail[k] - exact) / sigma;
    if (z > 3) ++beyond3;
    EXPECT_LT(z, 5.0) << "t=" << p.t_grid[k];
  }
  EXPECT_LE(beyond3, 3);
  // rho itself: E|X| = R n/(n+1).
  EXPECT_NEAR(p.rho * std::sqrt(double(n)), R * n / (n + 1.0), 2e-3 * R);
}

TEST(ThinShell, PointMassHasNoTail) {
  const auto p = thin_shell_profile(sphere_batch(10, 10000, 2.5, 1), RhoConvention::RootMeanSquare);
  for (double v : p.tail) EXPECT_EQ(v, 0.0);
  EXPECT_NEAR(p.rho, 2.5 / std::sqrt(10.0), 1e-12);
  EXPECT_LT(p.eps_star, 0.01);
}

TEST(ThinShell, RejectsSmallBatches) {
  EXPECT_THROW(thin_shell_profile(sample_exact(cube(3), 9999, 1), RhoConvention::MeanAbs), ConcentrationError);
}

TEST(ThinShell, EpsStarShrinksWithDimension) {
  double prev = 1.0;
  for (int n : {8, 32, 128}) {
    const auto p = thin_shell_profile(sample_exact(lp_ball(n, 2.0), 20000, 5), RhoConvention::RootMeanSquare);
    EXPECT_LT(p.eps_star, prev) << n;
    prev = p.eps_star;
  }
  double prev3 = 1.0;
  for (int n : {8, 32, 128}) {
    const auto p = thin_shell_profile(sample_exact(lp_ball(n, 3.0), 20000, 6), RhoConvention::MeanAbs);
    EXPECT_LT(p.eps_star, prev3) << n;
    prev3 = p.eps_star;
  }
}

TEST(ThinShell, EpsStarIsTheCrossing) {
  const auto p = synthetic_profile(50, [](double t) { return std::exp(-20 * t); });
  // exp(-20 e) = e at e = 0.1117..., solved by Newton as an independent check.
  double e = 0.1;
  for (int i = 0; i < 50; ++i) e -= (std::exp(-20 * e) - e) / (-20 * std::exp(-20 * e) - 1);
  EXPECT_NEAR(p.eps_star, e, 5e-4);
  EXPECT_LE(p.tail[static_cast<std::size_t>(std::ceil(p.eps_star * 100)) - 1], std::ceil(p.eps_star * 100) / 100);
}

TEST(TailFit, RecoversSyntheticForm) {
  std::vector<ConcentrationProfile> ps;
  for (int n : {16, 64, 256}) ps.push_back(synthetic_profile(n, [n](double t) { return 4 * std::exp(-std::sqrt(double(n)) * t * t); }));
  const TailFit f = fit_tail(ps, TailFitGrid::regular(8));
  EXPECT_EQ(f.A, 4.0);
  EXPECT_EQ(f.nu, 0.5);
  EXPECT_EQ(f.tau, 2.0);
  EXPECT_NEAR(f.B, 1.0, 0.1);
  EXPECT_LT(f.residual, 1e-12);
}

TEST(TailFit, SingleDimensionNeedsFixedNu) {
  const auto p = synthetic_profile(64, [](double t) { return 4 * std::exp(-8 * t * t); });
  EXPECT_THROW(fit_tail(p, TailFitGrid::regular(8)), ConcentrationError);
  TailFitGrid g = TailFitGrid::regular(8);
  g.nu = {0.5};
  const TailFit f = fit_tail(p, g);
  EXPECT_EQ(f.tau, 2.0);
  EXPECT_NEAR(f.B, 1.0, 0.1);
}

TEST(TailFit, RefiningGridNeverIncreasesResidual) {
  std::vector<ConcentrationProfile> ps;
  for (int n : {16, 64}) ps.push_back(thin_shell_profile(sample_exact(lp_ball(n, 2.0), 10000, n), RhoConvention::MeanAbs));
  const double coarse = fit_tail(ps, TailFitGrid::regular(2)).residual;
  const double fine = fit_tail(ps, TailFitGrid::regular(8)).residual;
  EXPECT_LE(fine, coarse);
}

TEST(TailFit, RejectsTooFewPoints) {
  const auto p = synthetic_profile(16, [](double t) { return t < 0.05 ? 0.5 : 0.0; });
  TailFitGrid g = TailFitGrid::regular(4);
  g.nu = {0.0};
  EXPECT_THROW(fit_tail(p, g), ConcentrationError);
}

TEST(TailShape, LpBallsHavePositiveConstant) {
  for (double p : {2.0, 3.0, 4.0}) {
    const auto prof = thin_shell_profile(sample_exact(lp_ball(32, p), 20000, 9), RhoConvention::MeanAbs);
    const TailShape s = tail_shape(prof, p);
    EXPECT_GT(s.constant, 0.0) << p;
    EXPECT_GT(s.slope, 0.5) << p;
  }
}

TEST(GromovMilman, EuclideanBallDistanceIsExact) {
  const int n = 16;
  const BodySpec K = lp_ball(n, 2.0);
  const double R = K.support(Vec::Unit(n, 0));
  const SampleBatch b = sample_exact(K, 20000, 11);
  const double eps = 0.3;
  std::size_t direct = 0;
  for (Eigen::Index i = 0; i < b.count(); ++i)
    if (b.points(i, 0) / R <= eps) ++direct;
  const double delta = 1 - std::sqrt(1 - eps * eps / 4);
  const auto r = gromov_milman_check(K, b, Vec::Unit(n, 0), eps, delta);
  EXPECT_DOUBLE_EQ(r.lhs, double(direct) / b.count());
  EXPECT_TRUE(r.pass);
  EXPECT_GE(r.lhs, r.rhs);
}

TEST(GromovMilman, LargeEpsCoversEverything) {
  const BodySpec K = cube(6);
  const auto b = sample_exact(K, 2000, 2);
  EXPECT_EQ(gromov_milman_check(K, b, Vec::Ones(6), 2.0, 0.0).lhs, 1.0);
  EXPECT_EQ(gromov_milman_check(K, b, Vec::Ones(6), 1.0, 0.0).lhs, 1.0);
}

TEST(GromovMilman, MonotoneInEps) {
  const BodySpec K = lp_ball(8, 4.0);
  const auto b = sample_exact(K, 4000, 4);
  Vec u = Vec::Ones(8);
  double prev = 0.0;
  for (double eps : {0.05, 0.1, 0.2, 0.4, 0.8}) {
    const double v = gromov_milman_check(K, b, u, eps, 0.0).lhs;
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(GromovMilman, RejectsBadNormal) {
  const BodySpec K = cube(3);
  const auto b = sample_exact(K, 100, 1);
  EXPECT_THROW(gromov_milman_check(K, b, Vec::Zero(3), 0.1, 0.0), ConcentrationError);
  EXPECT_THROW(gromov_milman_check(K, b, Vec::Ones(4), 0.1, 0.0), ConcentrationError);
}

TEST(Functional, CubeCoordinateVariance) {
  const BodySpec K = cube(8);
  const double half = K.support(Vec::Unit(8, 0));
  const auto b = sample_exact(K, 40000, 7);
  const auto e = functional(b, TestFunction::linear(Vec::Unit(8, 0)), FunctionalKind::VarQ, 2.0);
  const double exact = (2 * half) * (2 * half) / 12.0;
  EXPECT_NEAR(e.value, exact, 3 * e.mc_error + 1e-4);
  EXPECT_GT(e.mc_error, 0.0);
}

TEST(Functional, ConstantsHaveZeroEntropyAndVariance) {
  const auto b = sample_exact(cube(4), 1000, 2);
  EXPECT_EQ(functional(b, TestFunction::constant(0.3), FunctionalKind::Entropy).value, 0.0);
  EXPECT_EQ(functional(b, TestFunction::constant(0.3), FunctionalKind::VarQ, 1.5).value, 0.0);
}

TEST(Functional, EntropyIsHomogeneous) {
  const auto b = sample_exact(lp_ball(6, 3.0), 5000, 3);
  const double e1 = functional(b, TestFunction::norm_sq(), FunctionalKind::Entropy).value;
  auto scaled = TestFunction::norm_sq();
  scaled.value = [](const Vec& x) { return 7.5 * x.squaredNorm(); };
  EXPECT_NEAR(functional(b, scaled, FunctionalKind::Entropy).value, 7.5 * e1, 1e-10 * e1);
}

TEST(Functional, EntropyRejectsNegative) {
  const auto b = sample_exact(cube(3), 1000, 2);
  EXPECT_THROW(functional(b, TestFunction::linear(Vec::Unit(3, 0)), FunctionalKind::Entropy), ConcentrationError);
}

TEST(Functional, EvenFunctionsIgnoreSymmetrization) {
  const auto b = sample_exact(cube(5), 3000, 8);
  for (auto kind : {FunctionalKind::Mean, FunctionalKind::VarQ, FunctionalKind::Entropy}) {
    const double a = functional(b, TestFunction::norm_sq(), kind).value;
    const double s = functional(b.with_negation(), TestFunction::norm_sq(), kind).value;
    EXPECT_NEAR(a, s, 1e-12 * std::max(1.0, std::abs(a)));
  }
}

TEST(BobkovLedoux, CubeLinearFunction) {
  const int n = 8;
  const BodySpec K = cube(n);
  const double half = K.support(Vec::Unit(n, 0));
  const auto b = sample_exact(K, 40000, 12);
  const auto r = bobkov_ledoux_check(K, b, TestFunction::linear(Vec::Unit(n, 0)), 2.0, 0.125);
  EXPECT_DOUBLE_EQ(r.q, 2.0);
  EXPECT_DOUBLE_EQ(r.grad_moment, half * half);
  EXPECT_NEAR(r.lhs_varq, (2 * half) * (2 * half) / 12, 3 * r.lhs_varq_error + 1e-4);
  EXPECT_DOUBLE_EQ(r.rhs_varq, half * half / (0.125 * n));
  EXPECT_NEAR(r.calibrated_C * r.rhs_varq, r.lhs_varq, 1e-12);
}

TEST(BobkovLedoux, NumericalGradientOfEuclideanNorm) {
  const int n = 6;
  const BodySpec K = lp_ball(n, 2.0);
  const auto b = sample_exact(K, 2000, 4);
  // grad ||x||_K = x / (R|x|), and h_K of it is 1.
  const auto r = bobkov_ledoux_check(K, b, TestFunction::body_norm(K), 2.0, 0.125);
  EXPECT_NEAR(r.grad_moment, 1.0, 1e-6);
  const double gamma = std::exp(std::lgamma(n / 2.0 + 1) * 2.0 / n);
  EXPECT_NEAR(r.rhs_entropy, 4.0 / gamma * (2.0 / 0.125), 1e-5);
}

TEST(BobkovLedoux, RejectsSmallP) {
  const BodySpec K = cube(3);
  const auto b = sample_exact(K, 100, 1);
  EXPECT_THROW(bobkov_ledoux_check(K, b, TestFunction::norm_sq(), 1.5, 1.0), ConcentrationError);
}

TEST(PolyExpMoment, ShellPointsGiveOne) {
  const auto b = sphere_batch(9, 500, 3.0, 2);
  const auto r = poly_exp_moment_check(b, 1.0, 1.0);
  EXPECT_EQ(r.value, 1.0);
}

TEST(PolyExpMoment, SmallestPassingConstant) {
  const int n = 16;
  const auto b = sample_exact(lp_ball(n, 2.0), 20000, 5);
  const double rho = std::sqrt(b.points.squaredNorm() / (double(n) * b.count()));
  const auto r = poly_exp_moment_check(b, rho, 2.0);
  EXPECT_GT(r.value_at_smallest, 1.0);
  EXPECT_LE(r.value_at_smallest, 2.0);
  EXPECT_GT(poly_exp_moment_check(b, rho, r.smallest_C / std::pow(2.0, 1.0 / 16)).value, 2.0);
  // Larger C only lowers the moment.
  EXPECT_LE(poly_exp_moment_check(b, rho, 4.0).value, r.value);
}
