#pragma once

// JSON views of the report types. Doubles are written in shortest round-trip
// form, NaN as null.

#include <fstream>
#include <string>

#include "json.hpp"

#include "convexlab/concentration.hpp"
#include "convexlab/convexity.hpp"
#include "convexlab/marginal.hpp"
#include "convexlab/position.hpp"
#include "convexlab/predict.hpp"

namespace convexlab {

using Json = nlohmann::ordered_json;

inline Json matrix_json(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline Json to_json(const BodySpec& b) {
  return Json{{"description", b.describe()},
              {"family", to_string(b.family())},
              {"base_family", to_string(b.base_family())},
              {"n", b.dim()},
              {"p", b.p()},
              {"scale", b.scale()},
              {"volume", b.volume()},
              {"volume_rel_error", b.volume_rel_error()},
              {"exact_sampler", has_exact_sampler(b)}};
}

inline Json to_json(const PositionReport& r) {
  Json d{{"iterations", r.diagnostics.iterations},
         {"residual", r.diagnostics.residual},
         {"converged", r.diagnostics.converged},
         {"message", r.diagnostics.message},
         {"initial_objective", r.diagnostics.initial_objective},
         {"final_objective", r.diagnostics.final_objective},
         {"bound", r.diagnostics.bound},
         {"bound_ratio", r.diagnostics.bound_ratio},
         {"ellipsoid_condition", r.diagnostics.ellipsoid_condition}};
  if (r.diagnostics.auxiliary.size() > 0) d["auxiliary"] = matrix_json(r.diagnostics.auxiliary);
  return Json{{"kind", to_string(r.kind)},
              {"map", matrix_json(r.map.matrix())},
              {"det", r.map.det()},
              {"op_norm", r.map.op_norm()},
              {"M_star", r.M_star},
              {"M_2", r.M_2},
              {"diam", r.diam},
              {"rho", r.rho},
              {"rho_max", r.rho_max},
              {"rho_avg", r.rho_avg},
              {"C_iso", r.C_iso},
              {"L_est", r.L_est},
              {"rho_sanity_ok", r.rho_sanity_ok},
              {"diagnostics", d}};
}

inline Json to_json(const TailFit& f) {
  return Json{{"A", f.A}, {"B", f.B}, {"nu", f.nu}, {"tau", f.tau}, {"residual", f.residual}, {"points", f.points}};
}

inline Json to_json(const ConcentrationProfile& p) {
  Json j{{"n", p.n}, {"convention", to_string(p.convention)}, {"rho", p.rho}, {"count", p.count},
         {"eps_star", p.eps_star}, {"t_grid", p.t_grid}, {"tail", p.tail}};
  if (p.fit) j["fit"] = to_json(*p.fit);
  return j;
}

inline Json to_json(const DirectionSweep& s, const std::vector<double>& delta_grid = {}) {
  Json j{{"metric", to_string(s.metric)}, {"delta", s.delta}, {"fraction", s.fraction}, {"directions", s.rows.size()}};
  Json grid = Json::array();
  for (double d : delta_grid) grid.push_back(Json{{"delta", d}, {"fraction", s.fraction_at(d)}});
  j["fraction_curve"] = grid;
  return j;
}

inline Json to_json(const AbpRow& r) {
  return Json{{"t", r.t}, {"max_violation", r.max_violation}, {"budget", r.budget}, {"a_t", r.a_t},
              {"b_t", r.b_t}, {"ratio", r.ratio}, {"pass", r.pass}};
}

inline Json to_json(const GromovMilmanResult& r) {
  return Json{{"lhs", r.lhs}, {"rhs", r.rhs}, {"mc_sigma", r.mc_sigma}, {"pass", r.pass}};
}

inline Json to_json(const BobkovLedouxResult& r) {
  return Json{{"q", r.q},
              {"grad_moment", r.grad_moment},
              {"lhs_entropy", r.lhs_entropy},
              {"rhs_entropy", r.rhs_entropy},
              {"ratio_entropy", r.ratio_entropy},
              {"lhs_varq", r.lhs_varq},
              {"lhs_varq_error", r.lhs_varq_error},
              {"rhs_varq", r.rhs_varq},
              {"ratio_varq", r.ratio_varq},
              {"calibrated_C", r.calibrated_C}};
}

inline Json to_json(const PolyExpMoment& r) {
  return Json{{"value", r.value}, {"smallest_C", r.smallest_C}, {"value_at_smallest", r.value_at_smallest}};
}

inline Json to_json(const ConvexityReport& r) {
  Json j{{"eps_grid", r.eps_grid},     {"delta_hat", r.delta_hat},       {"fitted_p", r.fitted_p},
         {"raw_slope", r.raw_slope},   {"fitted_alpha", r.fitted_alpha}, {"flagged", r.flagged},
         {"type_s", r.type_s},         {"type_lower_bound", r.type_lower_bound}};
  if (r.catalog)
    j["catalog"] = Json{{"p", r.catalog->p},         {"r", r.catalog->r}, {"alpha_p", r.catalog->alpha_p},
                        {"s", r.catalog->s},         {"T_s_bound", r.catalog->T_s_bound}, {"q", r.catalog->q}};
  return j;
}

inline Json to_json(const PredictionReport& r) {
  Json j{{"name", r.name}, {"inputs", r.inputs}, {"outputs", r.outputs}, {"exact", r.exact}};
  j["rho_convention"] = r.convention ? Json(to_string(*r.convention)) : Json(nullptr);
  j["not_evaluated"] = r.not_evaluated;
  return j;
}

inline const char* to_string(ClaimDirection d) {
  switch (d) {
    case ClaimDirection::LowerBound: return "lower_bound";
    case ClaimDirection::UpperBound: return "upper_bound";
    case ClaimDirection::Estimate: return "estimate";
  }
  return "?";
}

inline Json to_json(const Comparison& c) {
  Json rows = Json::array();
  for (const auto& r : c.rows) {
    Json row{{"key", r.key}, {"measured", r.measured}, {"predicted", r.predicted}, {"ratio", r.ratio},
             {"direction", to_string(r.direction)}};
    row["pass"] = r.pass ? Json(*r.pass) : Json(nullptr);
    rows.push_back(row);
  }
  return Json{{"name", c.name}, {"rows", rows}, {"all_pass", c.all_pass()}};
}

inline void write_json(const Json& j, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << j.dump(2) << '\n';
}

inline Json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  return Json::parse(is);
}

}  // namespace convexlab
