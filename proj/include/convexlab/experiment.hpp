#pragma once

// Experiment configs and the body -> sample -> position -> marginal/shell ->
// checks -> predict pipeline behind labcli. Every artifact is named
// <stage>_h<config hash>_s<seed>.<ext>, and stages reuse persisted samples and
// position maps when they exist.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "convexlab/io.hpp"
#include "convexlab/rng.hpp"

namespace convexlab {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error("stage '" + stage + "': " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// section -> key -> raw value; top-level keys live in section "".
using IniData = std::map<std::string, std::map<std::string, std::string>>;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace detail

inline IniData parse_ini(const std::string& text) {
  IniData d;
  std::string section;
  std::istringstream is(text);
  int lineno = 0;
  for (std::string line; std::getline(is, line);) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      d[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (d[section].count(key)) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    d[section][key] = value;
  }
  return d;
}

inline IniData read_ini(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_ini(ss.str());
}

/// Sorted "section.key=value" lines, excluding the output directory.
inline std::string canonical_text(const IniData& d) {
  std::string out;
  for (const auto& [sec, kv] : d)
    for (const auto& [k, v] : kv) {
      if (sec.empty() && k == "out") continue;
      out += sec + "." + k + "=" + v + "\n";
    }
  return out;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex16(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

struct ExperimentConfig {
  IniData raw;
  std::uint64_t seed = 0;
  std::string out = "out";

  // [body]
  Family family = Family::LpBall;
  int n = 8;
  double p = 2.0;
  int m = 0;
  bool symmetric = false;
  Family inner = Family::LpBall;
  int ambient = 0;
  std::uint64_t basis_seed = 1;
  std::vector<double> diag;  // optional diagonal linear image

  // [sampler]
  std::string sampler = "auto";
  std::size_t count = 20000;
  int burn_in = -1;
  int thinning = -1;

  // [position]
  std::string position = "none";
  std::size_t position_directions = 2000;
  double halfway_alpha = 1.0;

  // [marginal]
  bool marginal = true;
  std::size_t directions = 200;
  std::vector<Metric> metrics{Metric::Kol};
  double delta = 0.05;
  std::vector<double> delta_grid;
  double T = 0.0;  // Lin threshold; 0 means rho n^{1/24}
  int bins = 0;

  // [concentration]
  bool shell = true;
  std::optional<RhoConvention> convention;

  // [checks]
  std::optional<double> gm_eps;
  std::optional<double> gm_delta;
  std::optional<double> bl_alpha;
  double bl_p = 2.0;
  std::optional<double> poly_C;

  // [predict]
  std::optional<Theorem> theorem;
  Inputs predict_inputs;

  // [sweep]: "section.key" -> values
  std::map<std::string, std::vector<std::string>> sweep;

  std::string hash() const { return hex16(fnv1a64(canonical_text(raw))); }

  BodySpec make_body() const {
    BodySpec b = [&] {
      switch (family) {
        case Family::LpBall: return lp_ball(n, p);
        case Family::Cube: return cube(n);
        case Family::CrossPolytope: return cross_polytope(n);
        case Family::SchattenBall: return schatten_ball(m, p, symmetric);
        case Family::SectionOf: return section_of(inner, p, random_orthonormal_basis(ambient, n, basis_seed));
        case Family::QuotientOf: return quotient_of(p, random_orthonormal_basis(ambient, n, basis_seed));
        default: throw ConfigError("body.family " + std::string(to_string(family)) + " cannot be built from a config");
      }
    }();
    if (!diag.empty()) {
      Vec d(static_cast<Eigen::Index>(diag.size()));
      for (std::size_t i = 0; i < diag.size(); ++i) d[static_cast<Eigen::Index>(i)] = diag[i];
      b = linear_image(b, LinearMap::diagonal(d));
    }
    return b;
  }

  /// p used for theorem hypotheses: [predict] p if set, else the body's p.
  double theorem_p() const {
    const auto it = predict_inputs.find("p");
    if (it != predict_inputs.end()) return it->second;
    return family == Family::Cube ? std::numeric_limits<double>::infinity() : family == Family::CrossPolytope ? 1.0 : p;
  }

  RhoConvention shell_convention() const {
    if (convention) return *convention;
    if (theorem) return theorem_convention(*theorem).value_or(RhoConvention::MeanAbs);
    return RhoConvention::MeanAbs;
  }
};

namespace detail {

class Reader {
 public:
  Reader(const IniData& d) : d_(d) {}

  void allow(const std::string& section, std::initializer_list<const char*> keys) {
    auto& s = allowed_[section];
    for (const char* k : keys) s.push_back(k);
  }

  void check_unknown() const {
    for (const auto& [sec, kv] : d_) {
      if (sec == "predict" || sec == "sweep") continue;
      const auto it = allowed_.find(sec);
      if (it == allowed_.end()) throw ConfigError("unknown section [" + sec + "]");
      for (const auto& [k, v] : kv)
        if (std::find(it->second.begin(), it->second.end(), k) == it->second.end())
          throw ConfigError("unknown key '" + k + "' in [" + (sec.empty() ? std::string("top level") : sec) + "]");
    }
  }

  std::optional<std::string> str(const std::string& sec, const std::string& key) const {
    const auto s = d_.find(sec);
    if (s == d_.end()) return std::nullopt;
    const auto k = s->second.find(key);
    if (k == s->second.end()) return std::nullopt;
    return k->second;
  }

  template <class T>
  void get(const std::string& sec, const std::string& key, T& out) const {
    const auto v = str(sec, key);
    if (!v) return;
    try {
      if constexpr (std::is_same_v<T, std::string>) {
        out = *v;
      } else if constexpr (std::is_same_v<T, bool>) {
        if (*v == "true" || *v == "1") out = true;
        else if (*v == "false" || *v == "0") out = false;
        else throw std::invalid_argument("");
      } else if constexpr (std::is_floating_point_v<T>) {
        out = parse_real(*v);
      } else {
        std::size_t used = 0;
        if constexpr (std::is_unsigned_v<T>) {
          if (v->find('-') != std::string::npos) throw std::invalid_argument("");
          out = static_cast<T>(std::stoull(*v, &used));
        } else {
          out = static_cast<T>(std::stoll(*v, &used));
        }
        if (used != v->size()) throw std::invalid_argument("");
      }
    } catch (const std::exception&) {
      throw ConfigError("bad value for " + sec + "." + key + ": '" + *v + "'");
    }
  }

  template <class T>
  void get(const std::string& sec, const std::string& key, std::optional<T>& out) const {
    if (!str(sec, key)) return;
    T v{};
    get(sec, key, v);
    out = v;
  }

 private:
  const IniData& d_;
  std::map<std::string, std::vector<std::string>> allowed_;
};

}  // namespace detail

/// Parses and validates. The seed is mandatory unless seed_override is given.
inline ExperimentConfig make_config(const IniData& raw, std::optional<std::uint64_t> seed_override = std::nullopt) {
  ExperimentConfig c;
  c.raw = raw;
  detail::Reader r(raw);
  r.allow("", {"seed", "out"});
  r.allow("body", {"family", "n", "p", "m", "symmetric", "inner", "ambient", "basis_seed", "diag"});
  r.allow("sampler", {"kind", "count", "burn_in", "thinning"});
  r.allow("position", {"kind", "directions", "alpha"});
  r.allow("marginal", {"enabled", "directions", "metrics", "delta", "delta_grid", "T", "bins"});
  r.allow("concentration", {"enabled", "convention"});
  r.allow("checks", {"gm_eps", "gm_delta", "bl_alpha", "bl_p", "poly_C"});
  r.check_unknown();

  std::optional<std::uint64_t> seed;
  r.get("", "seed", seed);
  if (seed_override) seed = seed_override;
  if (!seed) throw ConfigError("seed is mandatory (config 'seed = ...' or --seed)");
  c.seed = *seed;
  c.raw[""]["seed"] = std::to_string(c.seed);
  r.get("", "out", c.out);

  std::string fam = "LpBall", inner = "LpBall";
  r.get("body", "family", fam);
  r.get("body", "inner", inner);
  try {
    c.family = family_from_string(fam);
    c.inner = family_from_string(inner);
  } catch (const BodyError& e) {
    throw ConfigError(std::string("body: ") + e.what());
  }
  r.get("body", "n", c.n);
  r.get("body", "p", c.p);
  r.get("body", "m", c.m);
  r.get("body", "symmetric", c.symmetric);
  r.get("body", "ambient", c.ambient);
  r.get("body", "basis_seed", c.basis_seed);
  if (auto d = r.str("body", "diag"))
    for (const auto& s : detail::split_list(*d)) c.diag.push_back(parse_real(s));
  if (c.family == Family::SchattenBall) c.n = c.symmetric ? c.m * (c.m + 1) / 2 : c.m * c.m;
  if (c.n < 1) throw ConfigError("body.n must be positive");
  if (c.family == Family::SchattenBall && c.m < 1) throw ConfigError("body.m must be positive for SchattenBall");
  if ((c.family == Family::SectionOf || c.family == Family::QuotientOf) && c.ambient < c.n)
    throw ConfigError("body.ambient must be at least body.n");
  if (!c.diag.empty() && static_cast<int>(c.diag.size()) != c.n) throw ConfigError("body.diag needs n entries");

  r.get("sampler", "kind", c.sampler);
  r.get("sampler", "count", c.count);
  r.get("sampler", "burn_in", c.burn_in);
  r.get("sampler", "thinning", c.thinning);
  if (c.sampler != "auto" && c.sampler != "exact" && c.sampler != "rejection" && c.sampler != "hitrun")
    throw ConfigError("sampler.kind must be auto, exact, rejection or hitrun");
  if (c.count < 1) throw ConfigError("sampler.count must be positive");

  r.get("position", "kind", c.position);
  r.get("position", "directions", c.position_directions);
  r.get("position", "alpha", c.halfway_alpha);
  if (c.position != "none" && c.position != "isotropic" && c.position != "lowner" && c.position != "john" &&
      c.position != "min_mean_width" && c.position != "halfway")
    throw ConfigError("position.kind must be none, isotropic, lowner, john, min_mean_width or halfway");
  if (c.position_directions < 1) throw ConfigError("position.directions must be positive");

  r.get("marginal", "enabled", c.marginal);
  r.get("marginal", "directions", c.directions);
  if (auto m = r.str("marginal", "metrics")) {
    c.metrics.clear();
    for (const auto& s : detail::split_list(*m)) {
      try {
        c.metrics.push_back(metric_from_string(s));
      } catch (const std::exception& e) {
        throw ConfigError(std::string("marginal.metrics: ") + e.what());
      }
    }
    if (c.metrics.empty()) throw ConfigError("marginal.metrics is empty");
  }
  r.get("marginal", "delta", c.delta);
  if (auto g = r.str("marginal", "delta_grid"))
    for (const auto& s : detail::split_list(*g)) c.delta_grid.push_back(parse_real(s));
  r.get("marginal", "T", c.T);
  r.get("marginal", "bins", c.bins);
  if (c.directions < 1) throw ConfigError("marginal.directions must be positive");
  if (!(c.delta > 0.0)) throw ConfigError("marginal.delta must be positive");

  r.get("concentration", "enabled", c.shell);
  if (auto conv = r.str("concentration", "convention")) {
    try {
      c.convention = rho_convention_from_string(*conv);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }

  r.get("checks", "gm_eps", c.gm_eps);
  r.get("checks", "gm_delta", c.gm_delta);
  r.get("checks", "bl_alpha", c.bl_alpha);
  r.get("checks", "bl_p", c.bl_p);
  r.get("checks", "poly_C", c.poly_C);

  if (auto it = raw.find("predict"); it != raw.end()) {
    for (const auto& [k, v] : it->second) {
      if (k == "theorem") {
        try {
          c.theorem = theorem_from_string(v);
        } catch (const PredictError& e) {
          throw ConfigError(e.what());
        }
      } else {
        try {
          c.predict_inputs[k] = parse_real(v);
        } catch (const PredictError&) {
          throw ConfigError("predict." + k + ": not a real number '" + v + "'");
        }
      }
    }
  }
  if (c.theorem) {
    try {
      validate_theorem_p(*c.theorem, c.theorem_p());
    } catch (const PredictError& e) {
      throw ConfigError(std::string("predict: ") + e.what());
    }
    const auto want = theorem_convention(*c.theorem);
    if (c.convention && want && *c.convention != *want)
      throw ConfigError(std::string("concentration.convention ") + to_string(*c.convention) + " does not match " +
                        to_string(*c.theorem) + " (" + to_string(*want) + ")");
  }

  if (auto it = raw.find("sweep"); it != raw.end())
    for (const auto& [k, v] : it->second) {
      if (k.find('.') == std::string::npos) throw ConfigError("sweep keys are section.key, got '" + k + "'");
      c.sweep[k] = detail::split_list(v);
      if (c.sweep[k].empty()) throw ConfigError("sweep." + k + " is empty");
    }
  return c;
}

/// Cartesian product of the sweep lists; run i gets seed stream_seed(root, i).
inline std::vector<IniData> expand_sweep(const ExperimentConfig& c) {
  std::vector<IniData> runs;
  IniData base = c.raw;
  base.erase("sweep");
  if (c.sweep.empty()) return {base};
  std::vector<std::pair<std::string, std::vector<std::string>>> axes(c.sweep.begin(), c.sweep.end());
  std::vector<std::size_t> idx(axes.size(), 0);
  for (std::uint64_t run = 0;; ++run) {
    IniData d = base;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const auto dot = axes[a].first.find('.');
      d[axes[a].first.substr(0, dot)][axes[a].first.substr(dot + 1)] = axes[a].second[idx[a]];
    }
    d[""]["seed"] = std::to_string(stream_seed(c.seed, run));
    runs.push_back(std::move(d));
    std::size_t a = 0;
    while (a < axes.size() && ++idx[a] == axes[a].second.size()) idx[a++] = 0;
    if (a == axes.size()) break;
  }
  return runs;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

class Experiment {
 public:
  Experiment(ExperimentConfig cfg, unsigned jobs = 1, std::optional<std::string> out_override = std::nullopt)
      : cfg_(std::move(cfg)), jobs_(jobs) {
    if (out_override) cfg_.out = *out_override;
    std::filesystem::create_directories(cfg_.out);
    summary_["config_hash"] = cfg_.hash();
    summary_["seed"] = cfg_.seed;
    summary_["files"] = Json::object();
  }

  const ExperimentConfig& config() const { return cfg_; }
  const Json& summary() const { return summary_; }

  std::string path(const std::string& stage, const std::string& ext) const {
    return (std::filesystem::path(cfg_.out) / (stage + "_h" + cfg_.hash() + "_s" + std::to_string(cfg_.seed) + "." + ext))
        .string();
  }

  const BodySpec& body() {
    if (!body_) {
      stage("body", [&] {
        body_ = cfg_.make_body();
        const std::string f = path("body", "json");
        write_json(to_json(*body_), f);
        summary_["files"]["body"] = file_name(f);
        summary_["body"] = body_->describe();
      });
    }
    return *body_;
  }

  /// Uniform samples of the configured body, reloaded when already on disk.
  const SampleBatch& samples() {
    if (!samples_) {
      const BodySpec& K = body();
      stage("sample", [&] {
        const std::string f = path("samples", "bin");
        if (std::filesystem::exists(f) && std::filesystem::exists(f + ".meta")) {
          samples_ = read_binary(f);
          if (static_cast<std::size_t>(samples_->count()) != cfg_.count || samples_->dim() != K.dim())
            throw SamplerError("persisted samples do not match the config");
        } else {
          samples_ = draw(K);
          write_binary(*samples_, f);
        }
        summary_["files"]["samples"] = file_name(f);
        summary_["sampler"] = to_string(samples_->sampler);
      });
    }
    return *samples_;
  }

  /// Samples mapped into the configured position.
  const SampleBatch& positioned() {
    if (!positioned_) {
      const SampleBatch& S = samples();
      const BodySpec& K = body();
      stage("position", [&] {
        positioned_ = S;
        const std::string f = path("position", "json");
        if (cfg_.position == "none") {
          const Json j{{"kind", "none"}, {"map", matrix_json(Mat::Identity(K.dim(), K.dim()))}};
          write_json(j, f);
          summary_["files"]["position"] = file_name(f);
          summary_["position"] = j;
          return;
        }
        Mat A;
        if (std::filesystem::exists(f)) {
          const Json j = read_json(f);
          A = matrix_from_json(j.at("map"));
          summary_["position"] = j;
        } else {
          const PositionReport rep = compute_position(K, S);
          A = rep.map.matrix();
          const Json j = to_json(rep);
          write_json(j, f);
          summary_["position"] = j;
        }
        summary_["files"]["position"] = file_name(f);
        positioned_->points = S.points * A.transpose();
        position_map_ = A;
      });
    }
    return *positioned_;
  }

  double rho_rms() {
    const SampleBatch& P = positioned();
    return std::sqrt(P.points.squaredNorm() / (static_cast<double>(P.count()) * static_cast<double>(P.dim())));
  }

  void run_marginal() {
    if (!cfg_.marginal || sweep_) return;
    const SampleBatch& P = positioned();
    stage("marginal", [&] {
      const int n = static_cast<int>(P.dim());
      const DirectionSet dirs = sample_sphere(n, cfg_.directions, stream_seed(cfg_.seed, 0xd1), jobs_);
      const double rho = rho_rms();
      const bool lin = std::find(cfg_.metrics.begin(), cfg_.metrics.end(), Metric::Lin) != cfg_.metrics.end();
      const double T = lin ? (cfg_.T > 0.0 ? cfg_.T : default_lin_threshold(rho, n)) : 0.0;
      sweep_ = good_direction_fraction(P, dirs, GaussianRef(rho), cfg_.metrics.front(), T, cfg_.delta, jobs_, cfg_.bins);
      const std::string f = path("directions", "csv");
      write_direction_csv(*sweep_, f);
      summary_["files"]["directions"] = file_name(f);
      Json m = Json::object();
      for (Metric metric : cfg_.metrics) {
        DirectionSweep view = *sweep_;
        view.metric = metric;
        view.fraction = view.fraction_at(cfg_.delta);
        m[to_string(metric)] = to_json(view, cfg_.delta_grid);
        fractions_[metric] = view.fraction;
      }
      summary_["marginal"] = Json{{"rho", rho}, {"T", T}, {"metrics", m}};
      summary_["fraction"] = sweep_->fraction;
    });
  }

  void run_shell() {
    if (!cfg_.shell || profile_) return;
    const SampleBatch& P = positioned();
    stage("shell", [&] {
      if (P.count() < 10000) {
        summary_["shell"] = Json{{"skipped", "needs at least 10^4 samples"}};
        return;
      }
      profile_ = thin_shell_profile(P, cfg_.shell_convention());
      // One dimension cannot separate B from n^nu: fit with nu = 0, so B absorbs n^nu.
      TailFitGrid g = TailFitGrid::regular(8);
      g.nu = {0.0};
      try {
        profile_->fit = fit_tail(*profile_, g);
      } catch (const ConcentrationError&) {
        // too few informative points; the profile is still written
      }
      const std::string f = path("shell", "csv");
      write_profile_csv(*profile_, f);
      summary_["files"]["shell"] = file_name(f);
      Json j{{"convention", to_string(profile_->convention)}, {"rho", profile_->rho}, {"eps_star", profile_->eps_star}};
      if (profile_->fit) j["fit_nu0"] = to_json(*profile_->fit);
      summary_["shell"] = j;
      summary_["eps_star"] = profile_->eps_star;
    });
  }

  void run_checks() {
    if (!cfg_.gm_eps && !cfg_.bl_alpha && !cfg_.poly_C) return;
    const SampleBatch& P = positioned();
    const BodySpec K = positioned_body();
    stage("check", [&] {
      Json j = Json::object();
      if (cfg_.gm_eps) {
        const double eps = *cfg_.gm_eps;
        const double dl = cfg_.gm_delta.value_or(eps * eps / 8.0);
        Json g = to_json(gromov_milman_check(K, P, Vec::Unit(K.dim(), 0), eps, dl));
        g["eps"] = eps;
        g["delta_lower"] = dl;
        j["gromov_milman"] = g;
      }
      if (cfg_.bl_alpha) {
        Json b = Json::object();
        b["norm_sq"] = to_json(bobkov_ledoux_check(K, P, TestFunction::norm_sq(), cfg_.bl_p, *cfg_.bl_alpha));
        b["linear_e1"] = to_json(bobkov_ledoux_check(K, P, TestFunction::linear(Vec::Unit(K.dim(), 0)), cfg_.bl_p, *cfg_.bl_alpha));
        b["p"] = cfg_.bl_p;
        b["alpha"] = *cfg_.bl_alpha;
        j["bobkov_ledoux"] = b;
      }
      if (cfg_.poly_C) {
        Json pe = to_json(poly_exp_moment_check(P, rho_rms(), *cfg_.poly_C));
        pe["C"] = *cfg_.poly_C;
        j["poly_exp"] = pe;
      }
      const std::string f = path("checks", "json");
      write_json(j, f);
      summary_["files"]["checks"] = file_name(f);
      summary_["checks"] = j;
    });
  }

  /// Theorem prediction with n, p, rho, C_iso and L_K filled from measurements
  /// when the config leaves them out; no sampling unless those are needed.
  PredictionReport run_predict(bool use_measurements) {
    if (!cfg_.theorem) throw StageError("predict", "no [predict] theorem configured");
    Inputs in = cfg_.predict_inputs;
    in.emplace("n", static_cast<double>(body().dim()));
    if (std::isfinite(cfg_.theorem_p())) in.emplace("p", cfg_.theorem_p());
    if (use_measurements) {
      if (profile_) in.emplace("rho", profile_->rho);
      const SecondMoment sm = second_moment(positioned(), 1.0);
      in.emplace("C_iso", sm.C_iso());
      in.emplace("L_K", sm.L_est);
    }
    PredictionReport rep;
    stage("predict", [&] {
      rep = predict(*cfg_.theorem, in);
      const std::string f = path("prediction", "json");
      write_json(to_json(rep), f);
      summary_["files"]["prediction"] = file_name(f);
      summary_["prediction"] = Json{{"theorem", rep.name}, {"outputs", rep.outputs}};
    });
    return rep;
  }

  void run_compare(const PredictionReport& pred) {
    stage("compare", [&] {
      std::map<std::string, double> measured;
      const bool linnik = pred.has("T");
      const Metric m = linnik ? Metric::Lin : Metric::Kol;
      if (fractions_.count(m)) {
        if (pred.has("bound")) measured["bound"] = fractions_.at(m);
        if (pred.has("fraction_lower_bound")) measured["fraction_lower_bound"] = fractions_.at(m);
      }
      std::optional<RhoConvention> conv;
      if (profile_) {
        conv = profile_->convention;
        if (pred.has("eps") && std::isfinite(profile_->eps_star)) measured["eps"] = profile_->eps_star;
        if (pred.has("A") && pred.has("B"))
          for (std::size_t k : {4u, 9u, 19u})  // t = 0.05, 0.1, 0.2
            measured["tail@" + format_t(profile_->t_grid[k])] = profile_->tail[k];
      }
      const Comparison c = compare(pred, measured, conv);
      summary_["comparison"] = to_json(c);
    });
  }

  /// Full pipeline. On a stage failure the summary records it and the error
  /// propagates; files already written stay in place.
  Json run() {
    try {
      body();
      samples();
      positioned();
      run_marginal();
      run_shell();
      run_checks();
      if (cfg_.theorem) run_compare(run_predict(true));
      summary_["status"] = "ok";
    } catch (const StageError& e) {
      summary_["status"] = "failed";
      summary_["failed_stage"] = e.stage();
      summary_["error"] = e.what();
      write_summary();
      throw;
    }
    write_summary();
    return summary_;
  }

  std::string write_summary() {
    const std::string f = path("summary", "json");
    write_json(summary_, f);
    return f;
  }

 private:
  template <class Fn>
  void stage(const std::string& name, Fn&& fn) {
    try {
      fn();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  }

  static std::string file_name(const std::string& p) { return std::filesystem::path(p).filename().string(); }

  static std::string format_t(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", t);
    return buf;
  }

  static Mat matrix_from_json(const Json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    Mat A(rows, rows);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index k = 0; k < rows; ++k) A(i, k) = j.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(k)).get<double>();
    return A;
  }

  SampleBatch draw(const BodySpec& K) const {
    const std::string& kind = cfg_.sampler;
    if (kind == "exact") return sample_exact(K, cfg_.count, cfg_.seed, {jobs_, false});
    if (kind == "rejection") return sample_rejection(K, cfg_.count, cfg_.seed, {jobs_, false});
    if (kind == "hitrun" || !has_exact_sampler(K)) {
      HitAndRunOptions h;
      h.burn_in = cfg_.burn_in;
      h.thinning = cfg_.thinning;
      h.jobs = jobs_;
      return sample_hitrun(K, cfg_.count, cfg_.seed, h);
    }
    return sample_exact(K, cfg_.count, cfg_.seed, {jobs_, false});
  }

  PositionReport compute_position(const BodySpec& K, const SampleBatch& S) const {
    FunctionalOptions fo;
    fo.directions = cfg_.position_directions;
    fo.jobs = jobs_;
    fo.cov = second_moment(S, K.volume());
    BoundaryProbeOptions bo;
    bo.jobs = jobs_;
    bo.seed = stream_seed(cfg_.seed, 0xb0);
    MeanWidthDescentOptions mo;
    mo.directions = cfg_.position_directions;
    mo.seed = stream_seed(cfg_.seed, 0x33);
    mo.jobs = jobs_;
    const std::string& kind = cfg_.position;
    if (kind == "isotropic") return isotropize(K, *fo.cov, fo);
    if (kind == "lowner") return lowner_position(K, bo, fo);
    if (kind == "john") return john_position(K, bo, fo);
    if (kind == "min_mean_width") return min_mean_width_position(K, mo, fo);
    // half-way: isotropize first, then compose with T on the isotropic image
    const PositionReport iso = isotropize(K, *fo.cov, fo);
    const BodySpec Kiso = iso.image_of(K);
    HalfwayOptions ho;
    ho.descent = mo;
    ho.p = std::isfinite(cfg_.p) ? std::max(2.0, cfg_.p) : 2.0;
    ho.alpha = cfg_.halfway_alpha;
    ho.L_K = fo.cov->L_est;
    FunctionalOptions fo2 = fo;
    fo2.cov = fo.cov->mapped(iso.map);
    PositionReport hw = halfway_position(Kiso, ho, fo2);
    hw.map = LinearMap(hw.map.matrix() * iso.map.matrix());
    return hw;
  }

  BodySpec positioned_body() {
    const BodySpec& K = body();
    positioned();
    if (!position_map_) return K;
    return linear_image(K, LinearMap(*position_map_));
  }

  ExperimentConfig cfg_;
  unsigned jobs_ = 1;
  Json summary_;
  std::optional<BodySpec> body_;
  std::optional<SampleBatch> samples_;
  std::optional<SampleBatch> positioned_;
  std::optional<Mat> position_map_;
  std::optional<DirectionSweep> sweep_;
  std::map<Metric, double> fractions_;
  std::optional<ConcentrationProfile> profile_;
};

/// Runs every sweep point and writes sweep_h<hash>_s<seed>.json listing the
/// per-run summaries.
inline Json run_sweep(const ExperimentConfig& cfg, unsigned jobs, std::optional<std::string> out_override) {
  Json list = Json::array();
  for (const IniData& d : expand_sweep(cfg)) {
    Experiment e(make_config(d), jobs, out_override ? out_override : std::optional<std::string>(cfg.out));
    const Json s = e.run();
    list.push_back(Json{{"summary", std::filesystem::path(e.path("summary", "json")).filename().string()},
                        {"config_hash", s.at("config_hash")},
                        {"seed", s.at("seed")}});
  }
  const std::string out = out_override.value_or(cfg.out);
  std::filesystem::create_directories(out);
  const Json j{{"config_hash", cfg.hash()}, {"seed", cfg.seed}, {"runs", list}};
  write_json(j, (std::filesystem::path(out) / ("sweep_h" + cfg.hash() + "_s" + std::to_string(cfg.seed) + ".json")).string());
  return j;
}

/// Flattens every summary_*.json under dir into report.csv and report.json.
inline Json aggregate_reports(const std::string& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("summary_", 0) == 0 && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  Json rows = Json::array();
  auto num = [](const Json& j, const char* k) { return j.contains(k) && j.at(k).is_number() ? j.at(k).get<double>() : std::nan(""); };
  std::ofstream csv((std::filesystem::path(dir) / "report.csv").string());
  if (!csv) throw std::runtime_error("cannot write report.csv in " + dir);
  csv << "summary,body,config_hash,seed,status,fraction,eps_star,comparison_pass\n";
  for (const auto& f : files) {
    const Json s = read_json(f.string());
    const std::string body = s.value("body", "");
    const bool cmp = s.contains("comparison") ? s.at("comparison").at("all_pass").get<bool>() : true;
    Json row{{"summary", f.filename().string()},
             {"body", body},
             {"config_hash", s.value("config_hash", "")},
             {"seed", s.value("seed", std::uint64_t{0})},
             {"status", s.value("status", "")},
             {"fraction", num(s, "fraction")},
             {"eps_star", num(s, "eps_star")},
             {"comparison_pass", cmp}};
    rows.push_back(row);
    char buf[512];
    std::snprintf(buf, sizeof buf, "%s,\"%s\",%s,%" PRIu64 ",%s,%.17g,%.17g,%d\n", f.filename().string().c_str(), body.c_str(),
                  row["config_hash"].get<std::string>().c_str(), row["seed"].get<std::uint64_t>(),
                  row["status"].get<std::string>().c_str(), num(s, "fraction"), num(s, "eps_star"), cmp ? 1 : 0);
    csv << buf;
  }
  const Json out{{"rows", rows}};
  write_json(out, (std::filesystem::path(dir) / "report.json").string());
  return out;
}

}  // namespace convexlab
