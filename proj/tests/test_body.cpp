#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "convexlab/body.hpp"
#include "oracles.hpp"

using namespace convexlab;

TEST(MakeBody, CubeHasUnitScale) {
  const BodySpec k = cube(3);
  EXPECT_DOUBLE_EQ(k.scale(), 1.0);
  EXPECT_DOUBLE_EQ(k.norm(Vec::Constant(3, 0.5)), 1.0);
}

TEST(MakeBody, EuclideanDiscScale) {
  const BodySpec k = lp_ball(2, 2.0);
  EXPECT_NEAR(k.scale(), 1.0 / std::sqrt(std::numbers::pi), 1e-14);
  // Independent check: area of the unit disc by 2-D midpoint integration.
  const double area = oracle::grid_area([](double x, double y) { return x * x + y * y <= 1.0; }, 2000);
  EXPECT_NEAR(std::pow(area, -0.5), k.scale(), 2e-3);
}

TEST(MakeBody, CrossPolytopeAreaTwo) {
  const BodySpec k = lp_ball(2, 1.0);
  EXPECT_NEAR(k.scale(), 1.0 / std::sqrt(2.0), 1e-14);
  const BodySpec c = cross_polytope(2);
  EXPECT_NEAR(c.scale(), k.scale(), 1e-14);
}

TEST(MakeBody, LpVolumeMatchesGridIntegration) {
  const BodySpec k = lp_ball(2, 4.0);
  const double area =
      oracle::grid_area([](double x, double y) { return std::pow(x, 4) + std::pow(y, 4) <= 1.0; }, 2000);
  EXPECT_NEAR(std::pow(area, -0.5), k.scale(), 2e-3);
}

TEST(MakeBody, RejectsBadParameters) {
  EXPECT_THROW(lp_ball(3, 0.5), BodyError);
  EXPECT_THROW(lp_ball(0, 2.0), BodyError);
  BodyParams bp;
  bp.family = Family::SchattenBall;
  bp.m = 2;
  bp.n = 5;
  bp.p = 2.0;
  EXPECT_THROW(make_body(bp), BodyError);
  Mat skew(3, 2);
  skew << 1, 1, 0, 1, 0, 0;
  EXPECT_THROW(section_of(Family::LpBall, 3.0, skew), BodyError);
  EXPECT_THROW(quotient_of(1.0, random_orthonormal_basis(4, 2, 1)), BodyError);
}

TEST(Norm, AxisBoundaryPointAndOrigin) {
  const BodySpec k = lp_ball(3, 2.0);
  Vec x = Vec::Zero(3);
  EXPECT_EQ(k.norm(x), 0.0);
  x[0] = k.scale();
  EXPECT_NEAR(k.norm(x), 1.0, 1e-15);
  EXPECT_THROW(k.norm(Vec::Zero(2)), BodyError);
}

TEST(Norm, SchattenMatchesSvdOracle) {
  const BodySpec s = schatten_ball(2, 3.0);
  Rng rng = make_rng(3);
  for (int t = 0; t < 50; ++t) {
    const Vec x = gaussian_vector(4, rng);
    Eigen::Matrix2d a;
    a << x[0], x[1], x[2], x[3];
    // Closed-form singular values of a 2x2 matrix.
    const double fro2 = a.squaredNorm();
    const double det = std::abs(a.determinant());
    const double disc = std::sqrt(std::max(0.0, fro2 * fro2 - 4 * det * det));
    const double s1 = std::sqrt((fro2 + disc) / 2), s2 = std::sqrt(std::max(0.0, (fro2 - disc) / 2));
    const double expected = std::pow(std::pow(s1, 3) + std::pow(s2, 3), 1.0 / 3.0) / s.scale();
    EXPECT_NEAR(s.norm(x), expected, 1e-12 * expected);
  }
}

TEST(Norm, SchattenTwoIsEuclideanBall) {
  // S_2^m is the Frobenius ball, so the polar Monte Carlo volume is exact.
  const BodySpec s = schatten_ball(3, 2.0);
  const BodySpec b = lp_ball(9, 2.0);
  EXPECT_NEAR(s.scale(), b.scale(), 1e-12);
  const BodySpec sym = schatten_ball(3, 2.0, true);
  EXPECT_EQ(sym.dim(), 6);
  EXPECT_NEAR(sym.scale(), lp_ball(6, 2.0).scale(), 1e-12);
}

TEST(Norm, SchattenMonteCarloVolumeWithinTarget) {
  const BodySpec s = schatten_ball(2, 1.0);
  EXPECT_LE(s.volume_rel_error(), 0.0101);
  // Nuclear-norm ball volume cross-check by rejection in the bounding box [-1,1]^4.
  Rng rng = make_rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int trials = 400000;
  int hits = 0;
  for (int t = 0; t < trials; ++t) {
    Vec x(4);
    for (int i = 0; i < 4; ++i) x[i] = u(rng);
    if (s.norm(x) * s.scale() <= 1.0) ++hits;
  }
  const double v0 = 16.0 * hits / trials;
  EXPECT_NEAR(std::pow(v0, -0.25), s.scale(), 0.01 * s.scale());
}

class NormAxioms : public ::testing::TestWithParam<int> {};

std::vector<BodySpec> catalog() {
  std::vector<BodySpec> out;
  out.push_back(lp_ball(5, 2.0));
  out.push_back(lp_ball(5, 1.5));
  out.push_back(lp_ball(5, 4.0));
  out.push_back(cube(5));
  out.push_back(cross_polytope(5));
  out.push_back(schatten_ball(2, 3.0));
  out.push_back(schatten_ball(3, 1.5, true));
  out.push_back(section_of(Family::LpBall, 3.0, random_orthonormal_basis(7, 4, 2)));
  out.push_back(section_of(Family::Cube, 0, random_orthonormal_basis(7, 4, 3)));
  out.push_back(quotient_of(3.0, random_orthonormal_basis(7, 4, 4)));
  out.push_back(quotient_of(1.25, random_orthonormal_basis(6, 3, 5)));
  Mat a = Mat::Identity(5, 5);
  a(0, 1) = 2.0;
  a(3, 3) = 0.25;
  out.push_back(linear_image(lp_ball(5, 3.0), LinearMap(a)));
  return out;
}

TEST_P(NormAxioms, SymmetryHomogeneityTriangle) {
  const BodySpec k = catalog()[GetParam()];
  const int n = k.dim();
  Rng rng = make_rng(100 + GetParam());
  std::normal_distribution<double> normal;
  for (int t = 0; t < 1000; ++t) {
    const Vec x = gaussian_vector(n, rng), y = gaussian_vector(n, rng);
    const double c = normal(rng);
    const double nx = k.norm(x), ny = k.norm(y);
    const double tol = 1e-9 * (nx + ny);
    EXPECT_NEAR(k.norm(-x), nx, tol);
    EXPECT_NEAR(k.norm(c * x), std::abs(c) * nx, tol * (1 + std::abs(c)));
    EXPECT_LE(k.norm(x + y), nx + ny + tol);
  }
}

TEST_P(NormAxioms, SupportDominatesBoundaryPoints) {
  const BodySpec k = catalog()[GetParam()];
  const int n = k.dim();
  Rng rng = make_rng(200 + GetParam());
  for (int t = 0; t < 30; ++t) {
    const Vec theta = random_unit_vector(n, rng);
    const SupportResult h = k.support_result(theta);
    EXPECT_NEAR(k.norm(h.point), 1.0, 1e-6);
    EXPECT_NEAR(h.point.dot(theta), h.value, 1e-9);
    for (int s = 0; s < 20; ++s) {
      const Vec x = k.radial_point(gaussian_vector(n, rng));
      EXPECT_LE(x.dot(theta), h.value * (1 + 1e-6) + 1e-12);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Catalog, NormAxioms, ::testing::Range(0, 12));

TEST(Support, CubeFaceAndDiagonal) {
  const BodySpec k = cube(6);
  Vec e1 = Vec::Zero(6);
  e1[0] = 1;
  EXPECT_DOUBLE_EQ(k.support(e1), 0.5);
  const Vec diag = Vec::Ones(6) / std::sqrt(6.0);
  EXPECT_NEAR(k.support(diag), std::sqrt(6.0) / 2.0, 1e-14);
}

TEST(Support, BallIsRadius) {
  const BodySpec k = lp_ball(7, 2.0);
  Rng rng = make_rng(5);
  for (int t = 0; t < 10; ++t) EXPECT_NEAR(k.support(random_unit_vector(7, rng)), k.scale(), 1e-14);
}

TEST(Support, AscentAgreesWithClosedForms) {
  // The pattern ascent uses only the norm oracle; closed forms are the reference.
  for (const BodySpec& k : {lp_ball(4, 3.0), cube(4), cross_polytope(4), schatten_ball(2, 1.5),
                            quotient_of(3.0, random_orthonormal_basis(6, 4, 9))}) {
    Rng rng = make_rng(17);
    for (int t = 0; t < 5; ++t) {
      const Vec theta = random_unit_vector(4, rng);
      const double exact = k.support(theta);
      const SupportResult r = k.support_by_ascent(theta);
      EXPECT_NEAR(r.value, exact, 1e-5 * exact) << k.describe();
      EXPECT_LE(r.value, exact * (1 + 1e-9));
    }
  }
}

TEST(Support, SectionSupportMatchesAscent) {
  const BodySpec k = section_of(Family::LpBall, 4.0, random_orthonormal_basis(6, 3, 21));
  Rng rng = make_rng(8);
  for (int t = 0; t < 5; ++t) {
    const Vec theta = random_unit_vector(3, rng);
    EXPECT_NEAR(k.support(theta), k.support_by_ascent(theta).value, 1e-6 * k.support(theta));
  }
}

TEST(Support, QuotientIsDualOfSectionOfDual) {
  // Quotient of l_p onto span(B) has support ||B v||_q / scale-free; its norm
  // is the dual of that support, so norm(x) = sup <x,v>/h(v).
  const Mat basis = random_orthonormal_basis(5, 2, 31);
  const BodySpec k = quotient_of(3.0, basis);
  Rng rng = make_rng(2);
  for (int t = 0; t < 5; ++t) {
    const Vec x = gaussian_vector(2, rng);
    double best = 0.0;
    for (int i = 0; i < 20000; ++i) {
      const double a = 2 * std::numbers::pi * i / 20000.0;
      const Vec v = Eigen::Vector2d(std::cos(a), std::sin(a));
      best = std::max(best, x.dot(v) / k.support(v));
    }
    EXPECT_NEAR(k.norm(x), best, 1e-6 * best);
  }
}

TEST(LinearImage, IdentityAndScaling) {
  const BodySpec k = lp_ball(3, 3.0);
  const BodySpec same = linear_image(k, LinearMap::identity(3));
  Rng rng = make_rng(4);
  for (int t = 0; t < 10; ++t) {
    const Vec x = gaussian_vector(3, rng);
    EXPECT_NEAR(same.norm(x), k.norm(x), 1e-14);
  }
  const BodySpec twice = linear_image(k, LinearMap(2.0 * Mat::Identity(3, 3)));
  EXPECT_NEAR(twice.volume(), 8.0, 1e-12);
  EXPECT_DOUBLE_EQ(twice.scale(), k.scale());
  EXPECT_THROW(LinearMap(Mat::Zero(3, 3)), BodyError);
}

TEST(LinearImage, EllipseMembership) {
  const BodySpec b = lp_ball(2, 2.0);
  const double r = b.scale();
  const BodySpec e = linear_image(b, LinearMap::diagonal(Eigen::Vector2d(2.0, 0.5)));
  EXPECT_TRUE(e.contains(Eigen::Vector2d(1.9 * r, 0.0)));
  EXPECT_FALSE(e.contains(Eigen::Vector2d(0.0, 0.9 * r)));
  // Explicit ellipse equation x^2/(2r)^2 + y^2/(r/2)^2.
  Rng rng = make_rng(6);
  for (int t = 0; t < 20; ++t) {
    const Vec x = gaussian_vector(2, rng) * r;
    const double q = std::sqrt(x[0] * x[0] / (4 * r * r) + x[1] * x[1] * 4 / (r * r));
    EXPECT_NEAR(e.norm(x), q, 1e-13 * q);
  }
}

TEST(LinearImage, ComposesAndTransformsSupport) {
  const BodySpec k = cube(3);
  Rng rng = make_rng(12);
  Mat t = Mat::Random(3, 3) + 2 * Mat::Identity(3, 3);
  Mat s = Mat::Random(3, 3) + 2 * Mat::Identity(3, 3);
  const BodySpec ts = linear_image(linear_image(k, LinearMap(t)), LinearMap(s));
  const BodySpec direct = linear_image(k, LinearMap(s * t));
  for (int i = 0; i < 20; ++i) {
    const Vec x = gaussian_vector(3, rng);
    EXPECT_NEAR(ts.norm(x), direct.norm(x), 1e-12 * direct.norm(x));
    const Vec th = random_unit_vector(3, rng);
    EXPECT_NEAR(ts.support(th), k.support((s * t).transpose() * th), 1e-12);
  }
}

TEST(LinearMapTest, Diagnostics) {
  const LinearMap m = LinearMap::diagonal(Eigen::Vector3d(4.0, 0.25, 1.0));
  EXPECT_NEAR(m.det(), 1.0, 1e-15);
  EXPECT_NEAR(m.op_norm(), 4.0, 1e-14);
  EXPECT_NEAR(m.inverse_op_norm(), 4.0, 1e-14);
  EXPECT_GE(m.op_norm() * m.inverse_op_norm(), 1.0);
  EXPECT_THROW(LinearMap(2.0 * Mat::Identity(2, 2), true), BodyError);
  EXPECT_NEAR(LinearMap(3.0 * Mat::Identity(2, 2)).unimodular().det(), 1.0, 1e-14);
}
