#include <cmath>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "convexlab/predict.hpp"

using namespace convexlab;

namespace {

Inputs full_inputs() {
  return {{"n", 256}, {"delta", 0.1}, {"mu", 2.0}, {"rho", 0.4}, {"C_iso", 1.5}, {"nu", 0.5}, {"tau", 2.0},
          {"alpha", 0.125}, {"lambda", 0.25}, {"s", 1.8}, {"T_s", 2.0}, {"L_K", 0.3}};
}

Inputs with_p(double p) {
  Inputs in = full_inputs();
  in["p"] = p;
  return in;
}

}  // namespace

TEST(Rational, RecoversSimpleFractions) {
  EXPECT_EQ(Rational::from_double(16.0 / 13.0)->str(), "16/13");
  EXPECT_EQ(Rational::from_double(0.125)->str(), "1/8");
  EXPECT_EQ(Rational::from_double(-2.0)->str(), "-2");
  EXPECT_FALSE(Rational::from_double(std::sqrt(2.0)).has_value());
  EXPECT_EQ((Rational(3, 8) - Rational(1, 3)).str(), "1/24");
  EXPECT_DOUBLE_EQ(parse_real("9/8"), 1.125);
  EXPECT_DOUBLE_EQ(parse_real("0.25"), 0.25);
  EXPECT_THROW(parse_real("1/x"), PredictError);
}

TEST(Predict, LpEpsilonAtPTwo) {
  const auto r = predict(Theorem::Lp, {{"n", 100}, {"p", 2}, {"c1", 1}});
  EXPECT_EQ(r.at("eps"), 2 * std::sqrt(std::log(100.0)) / 10);
  EXPECT_NEAR(r.at("eps"), 0.4291932052578694, 1e-15);
  EXPECT_EQ(r.exact.at("q"), "2");
  EXPECT_EQ(r.exact.at("r"), "2");
  EXPECT_EQ(r.exact.at("eps_n_exponent"), "-1/2");
  EXPECT_TRUE(r.not_evaluated.count("bound"));
  EXPECT_EQ(*r.convention, RhoConvention::MeanAbs);
}

TEST(Predict, Cor24ParametersVerbatim) {
  const auto r = predict(Theorem::Cor24, {{"p", 9.0 / 8.0}});
  EXPECT_EQ(r.at("nu"), 0.125);
  EXPECT_EQ(r.at("tau"), 0.5);
  EXPECT_EQ(r.at("A"), 2.0);
  EXPECT_EQ(r.exact.at("nu"), "1/8");
  EXPECT_EQ(r.exact.at("tau"), "1/2");
  EXPECT_EQ(r.not_evaluated.at("B"), std::vector<std::string>{"n"});
  EXPECT_EQ(*r.convention, RhoConvention::RootMeanSquare);
  const auto withn = predict(Theorem::Cor24, {{"p", 9.0 / 8.0}, {"n", 99}});
  EXPECT_DOUBLE_EQ(withn.at("B"), std::pow(0.125, 0.25) / std::sqrt(std::log(100.0)));
}

TEST(Predict, Cor24IsTwoFourConvexAtPTwo) {
  Inputs in = with_p(1.1);
  in.erase("alpha");
  const auto cor = predict(Theorem::Cor24, in);
  Inputs two = with_p(2.0);
  two["alpha"] = 0.1;  // c (p - 1) with c = 1
  const auto tf = predict(Theorem::TwoFourConvex, two);
  EXPECT_EQ(cor.at("nu"), tf.at("nu"));
  EXPECT_DOUBLE_EQ(cor.at("T"), tf.at("T"));
  EXPECT_EQ(cor.exact.at("T_n_exponent1"), "1/12");
  EXPECT_EQ(cor.exact.at("T_n_exponent2"), "1/16");
}

TEST(Predict, RangeErrors) {
  try {
    predict(Theorem::TwoFourConvex, {{"p", 5}, {"alpha", 0.1}});
    FAIL();
  } catch (const PredictError& e) {
    EXPECT_NE(std::string(e.what()).find("2 ≤ p < 4"), std::string::npos);
  }
  EXPECT_THROW(predict(Theorem::Cor24, {{"p", 1.3}}), PredictError);
  EXPECT_THROW(predict(Theorem::Lp, {{"n", 10}, {"p", 1.0}}), PredictError);
  Inputs bad = with_p(4.0);
  bad["s"] = 1.2;
  EXPECT_THROW(predict(Theorem::PConvex, bad), PredictError);
}

TEST(Predict, MissingInputsAreListed) {
  try {
    predict(Theorem::Sodin, {{"n", 10}, {"rho", 1}});
    FAIL();
  } catch (const PredictError& e) {
    const std::string msg = e.what();
    for (const char* k : {"delta", "mu", "C_iso", "nu", "tau"}) EXPECT_NE(msg.find(k), std::string::npos) << k;
    EXPECT_EQ(msg.find(" rho"), std::string::npos);
  }
}

TEST(Predict, SodinThresholdVanishesWithDelta) {
  Inputs in = full_inputs();
  double prev = std::numeric_limits<double>::infinity();
  for (double d : {1e-2, 1e-4, 1e-8, 1e-12}) {
    in["delta"] = d;
    const double T = predict(Theorem::Sodin, in).at("T");
    EXPECT_LT(T, prev);
    prev = T;
  }
  EXPECT_LT(prev, 1e-2);
}

TEST(Predict, SodinGoldenFile) {
  std::ifstream is(std::string(CONVEXLAB_GOLDEN_DIR) + "/sodin_T.csv");
  ASSERT_TRUE(is.good());
  std::string line;
  std::getline(is, line);
  int rows = 0;
  while (std::getline(is, line)) {
    std::stringstream ss(line);
    std::vector<double> v;
    for (std::string cell; std::getline(ss, cell, ',');) v.push_back(std::stod(cell));
    ASSERT_EQ(v.size(), 8u);
    const auto r = predict(Theorem::Sodin, {{"n", v[0]}, {"delta", v[1]}, {"mu", v[2]}, {"nu", v[3]}, {"tau", v[4]},
                                             {"rho", v[5]}, {"C_iso", v[6]}});
    EXPECT_NEAR(r.at("T"), v[7], 1e-12 * v[7]) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 144);
}

TEST(Predict, ExponentsAreExact) {
  Inputs in = with_p(4.0);
  in["s"] = 1.5;
  EXPECT_EQ(predict(Theorem::PConvexStrong, in).exact.at("nu"), "1/3");
  EXPECT_EQ(predict(Theorem::PConvex, in).exact.at("eps_n_exponent"), "-1/12");
  EXPECT_EQ(predict(Theorem::TwoFourConvex, with_p(3.0)).exact.at("nu"), "1/24");
  EXPECT_EQ(predict(Theorem::LpStrong, with_p(1.5)).exact.at("nu"), "2/3");
  EXPECT_EQ(predict(Theorem::PConvexVariance, with_p(2.0)).exact.at("varq_n_exponent"), "3/4");
}

TEST(Predict, OutputsFiniteAndPositive) {
  const std::vector<std::pair<Theorem, double>> cases = {
      {Theorem::ExtABP, 2},        {Theorem::Sodin, 2},         {Theorem::TwoConvex, 2},
      {Theorem::TwoConvexStrong, 2}, {Theorem::PConvex, 2.5},   {Theorem::PConvexStrong, 2.5},
      {Theorem::Lp, 1.5},          {Theorem::LpStrong, 3},      {Theorem::TwoFourConvex, 3},
      {Theorem::Cor24, 1.2},       {Theorem::PConvexVariance, 2}};
  for (const auto& [t, p] : cases) {
    const auto r = predict(t, with_p(p));
    EXPECT_TRUE(r.not_evaluated.empty()) << to_string(t);
    for (const auto& [k, v] : r.outputs) {
      EXPECT_TRUE(std::isfinite(v)) << to_string(t) << " " << k;
      const bool signed_ok = k == "bound_raw" || k.find("exponent") != std::string::npos;
      if (!signed_ok) {
        EXPECT_GE(v, 0.0) << to_string(t) << " " << k;
      }
    }
    if (r.has("q")) {
      EXPECT_DOUBLE_EQ(r.at("q"), p / (p - 1)) << to_string(t);
    }
  }
}

TEST(Predict, LpRIsMaxOfPAndQ) {
  EXPECT_DOUBLE_EQ(predict(Theorem::Lp, with_p(1.5)).at("r"), 3.0);
  EXPECT_DOUBLE_EQ(predict(Theorem::Lp, with_p(4.0)).at("r"), 4.0);
}

TEST(Predict, IsPure) {
  const auto a = predict(Theorem::PConvexStrong, with_p(3.0));
  const auto b = predict(Theorem::PConvexStrong, with_p(3.0));
  EXPECT_EQ(a.outputs, b.outputs);
  EXPECT_EQ(a.inputs, b.inputs);
  EXPECT_EQ(a.exact, b.exact);
}

TEST(Predict, Monotonicities) {
  double prev = std::numeric_limits<double>::infinity();
  for (double n : {10.0, 100.0, 1e4, 1e6}) {
    const double eps = predict(Theorem::Lp, {{"n", n}, {"p", 3}}).at("eps");
    EXPECT_LT(eps, prev);
    prev = eps;
  }
  prev = -std::numeric_limits<double>::infinity();
  for (double d : {0.05, 0.1, 0.2, 0.3}) {
    const double b = predict(Theorem::ExtABP, {{"n", 100}, {"delta", d}, {"C_iso", 1.2}}).at("bound_raw");
    EXPECT_GT(b, prev);
    prev = b;
  }
  prev = 0.0;
  Inputs in = full_inputs();
  for (double n : {16.0, 256.0, 4096.0, 1e6}) {
    in["n"] = n;
    const double T = predict(Theorem::Sodin, in).at("T");
    EXPECT_GT(T, prev);
    prev = T;
  }
}

TEST(Predict, PConvexMatchesLpExponentAtPTwo) {
  Inputs in = with_p(2.0);
  in["s"] = 2.0;
  in["T_s"] = 1.0;
  const auto pc = predict(Theorem::PConvex, in);
  const auto lp = predict(Theorem::Lp, in);
  EXPECT_EQ(pc.exact.at("eps_n_exponent"), lp.exact.at("eps_n_exponent"));
  EXPECT_EQ(pc.exact.at("bound_n_exponent"), lp.exact.at("bound_n_exponent"));
}

TEST(Geometry, InscribedRadiusTwoConvex) {
  const auto r = predict_geometry(GeometryClaim::InscribedRadius2, {{"n", 64}, {"alpha", 0.125}, {"L_K", 0.3}});
  EXPECT_DOUBLE_EQ(r.at("inscribed_radius"), std::sqrt(8.0) * 0.3);
  EXPECT_NEAR(r.at("inscribed_radius"), 0.8485, 1e-4);
  // The p = 2 case of the general lemma agrees.
  const auto g = predict_geometry(GeometryClaim::InscribedRadiusP, {{"n", 64}, {"p", 2}, {"alpha", 0.125}, {"L_K", 0.3}});
  EXPECT_DOUBLE_EQ(g.at("inscribed_radius"), r.at("inscribed_radius"));
}

TEST(Geometry, TypeTwoDiameter) {
  for (double n : {3.0, 50.0, 1000.0})
    EXPECT_DOUBLE_EQ(predict_geometry(GeometryClaim::DiamTypeS, {{"n", n}, {"s", 2}, {"T_s", 1}}).at("diam_bound"), std::sqrt(n));
}

TEST(Geometry, VarianceBoundArithmetic) {
  const double n = 200, alpha = 0.125, LK = 0.28;
  const auto r = predict_geometry(GeometryClaim::VarQBound, {{"n", n}, {"p", 2}, {"alpha", alpha}, {"L_K", LK}});
  EXPECT_DOUBLE_EQ(r.at("varq_bound"), std::pow(n, 0.75) / std::sqrt(alpha) * LK * std::log(1 + n));
  const auto t = predict_geometry(GeometryClaim::TOpBound, {{"n", n}, {"p", 2}, {"alpha", alpha}, {"L_K", LK}, {"f", 1.5}});
  EXPECT_DOUBLE_EQ(t.at("T_op_bound"), std::pow(n, 0.25) * std::pow(alpha, -0.25) / std::sqrt(LK) * std::sqrt(1.5));
}

TEST(Compare, DirectionalPass) {
  const auto pred = predict(Theorem::Sodin, full_inputs());
  PredictionReport fake = pred;
  fake.outputs["fraction_lower_bound"] = 0.9;
  const auto c = compare(fake, {{"fraction_lower_bound", 0.95}});
  ASSERT_EQ(c.rows.size(), 1u);
  EXPECT_TRUE(*c.rows[0].pass);
  EXPECT_TRUE(c.all_pass());
}

TEST(Compare, TailAboveCeilingIsRecorded) {
  const auto pred = predict(Theorem::LpStrong, with_p(3.0));
  const double ceiling = predicted_tail(pred, 256, 0.2);
  const auto c = compare(pred, {{"tail@0.2", ceiling * 1.5}}, RhoConvention::MeanAbs);
  EXPECT_NEAR(c.rows[0].ratio, 1.5, 1e-12);
  EXPECT_FALSE(*c.rows[0].pass);
  EXPECT_FALSE(c.all_pass());
}

TEST(Compare, EmptyAndErrors) {
  const auto pred = predict(Theorem::Cor24, with_p(1.2));
  EXPECT_TRUE(compare(pred, {}).rows.empty());
  EXPECT_THROW(compare(pred, {{"nu", 0.1}}, RhoConvention::MeanAbs), PredictError);
  EXPECT_THROW(compare(pred, {{"not_an_output", 0.1}}), PredictError);
  const auto est = compare(pred, {{"nu", 0.1}});
  EXPECT_FALSE(est.rows[0].pass.has_value());
}
