#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "convexlab/convexlab.hpp"

using namespace convexlab;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  std::optional<std::string> out;
};

void add_common(CLI::App* sub, Common& c, bool need_config = true) {
  auto* opt = sub->add_option("--config", c.config, "experiment config (INI)");
  if (need_config) opt->required()->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "root seed, overrides the config");
  sub->add_option("--jobs", c.jobs, "worker cap")->check(CLI::PositiveNumber);
  sub->add_option("--out", c.out, "output directory, overrides the config");
}

ExperimentConfig load(const Common& c, bool seed_optional = false) {
  auto seed = c.seed;
  const IniData raw = read_ini(c.config);
  if (seed_optional && !seed && !(raw.count("") && raw.at("").count("seed"))) seed = 0;
  return make_config(raw, seed);
}

void print(const Json& j) { std::cout << j.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"labcli: convex body marginal and concentration experiments"};
  app.require_subcommand(1);
  Common c;

  auto* body = app.add_subcommand("body", "describe and validate the configured body");
  auto* sample = app.add_subcommand("sample", "draw and persist uniform samples");
  auto* position = app.add_subcommand("position", "compute the configured position");
  auto* marginal = app.add_subcommand("marginal", "good-direction sweep");
  auto* shell = app.add_subcommand("shell", "thin-shell profile and tail fit");
  auto* check = app.add_subcommand("check", "Gromov-Milman, Bobkov-Ledoux and polynomial moment checks");
  auto* predict_cmd = app.add_subcommand("predict", "evaluate the configured theorem from config inputs only");
  auto* run = app.add_subcommand("run", "full pipeline, expanding sweeps");
  auto* report = app.add_subcommand("report", "aggregate summary files into report.csv and report.json");
  for (auto* s : {body, sample, position, marginal, shell, check, predict_cmd, run}) add_common(s, c);
  std::string report_dir;
  report->add_option("dir", report_dir, "directory with summary_*.json")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) {
      const Json j = aggregate_reports(report_dir);
      std::cout << "aggregated " << j.at("rows").size() << " runs into " << report_dir << "/report.csv\n";
      return 0;
    }
    const ExperimentConfig cfg = load(c, body->parsed() || predict_cmd->parsed());
    if (run->parsed() && !cfg.sweep.empty()) {
      print(run_sweep(cfg, c.jobs, c.out));
      return 0;
    }
    Experiment e(cfg, c.jobs, c.out);
    if (body->parsed()) {
      e.body();
      print(read_json(e.path("body", "json")));
    } else if (sample->parsed()) {
      const SampleBatch& s = e.samples();
      std::cout << s.count() << " samples of " << e.body().describe() << " -> " << e.path("samples", "bin") << '\n';
    } else if (position->parsed()) {
      e.positioned();
      print(e.summary().value("position", Json()));
    } else if (marginal->parsed()) {
      e.run_marginal();
      print(e.summary().value("marginal", Json()));
    } else if (shell->parsed()) {
      e.run_shell();
      print(e.summary().value("shell", Json()));
    } else if (check->parsed()) {
      e.run_checks();
      print(e.summary().value("checks", Json::object()));
    } else if (predict_cmd->parsed()) {
      print(to_json(e.run_predict(false)));
    } else if (run->parsed()) {
      e.run();
      std::cout << e.path("summary", "json") << '\n';
      return 0;
    }
    e.write_summary();
  } catch (const ConfigError& ex) {
    std::cerr << "config error: " << ex.what() << '\n';
    return 2;
  } catch (const StageError& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 3;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
