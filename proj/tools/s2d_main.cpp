#include <CLI11.hpp>
#include <iostream>

#include "s2d/runner.hpp"
#include "s2d/svg.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Sparse-to-dense reward-transition laboratory"};
  app.require_subcommand(1);

  // run
  auto* run_cmd = app.add_subcommand("run", "Execute every (baseline x seed) run of a config");
  std::string run_config;
  std::string run_out;
  bool run_force = false;
  int run_workers = 0;
  run_cmd->add_option("config", run_config, "experiment config file")->required();
  run_cmd->add_option("--out", run_out, "override output directory");
  run_cmd->add_flag("--force", run_force, "overwrite existing run directories");
  run_cmd->add_option("--workers", run_workers, "worker pool size (default: logical processors)");

  // compare-landscapes
  auto* cmp_cmd = app.add_subcommand("compare-landscapes",
                                     "Paired loss grids for two runs under both reward stages");
  std::string cmp_config, cmp_a, cmp_b, cmp_out;
  std::vector<long> cmp_steps;
  cmp_cmd->add_option("config", cmp_config, "experiment config file (reserved for options)");
  cmp_cmd->add_option("runA", cmp_a, "first run directory")->required();
  cmp_cmd->add_option("runB", cmp_b, "second run directory")->required();
  cmp_cmd->add_option("--steps", cmp_steps, "checkpoint steps to compare")->required();
  cmp_cmd->add_option("--out", cmp_out, "output directory (default <runA>/compare)");

  // analyze
  auto* an_cmd = app.add_subcommand("analyze", "Post-hoc analyses over a completed run");
  std::string an_run, an_traj;
  bool an_actions = false, an_features = false, an_heatmap = false, an_sharp = false;
  int an_eps = 5;
  an_cmd->add_option("run", an_run, "run directory")->required();
  an_cmd->add_flag("--actions", an_actions, "per-checkpoint action frequencies");
  an_cmd->add_flag("--features", an_features, "recurrent feature mean-distance curve");
  an_cmd->add_flag("--heatmap", an_heatmap, "visit-count heatmap");
  an_cmd->add_flag("--sharpness", an_sharp, "end-of-training sharpness");
  an_cmd->add_option("--trajectory", an_traj, "shared trajectory csv for --features");
  an_cmd->add_option("--episodes", an_eps, "episodes per action-frequency estimate");

  // render
  auto* rn_cmd = app.add_subcommand("render", "Render a project CSV as a standalone SVG");
  std::string rn_csv, rn_out, rn_title;
  bool rn_band = false;
  rn_cmd->add_option("csv", rn_csv, "input csv")->required();
  rn_cmd->add_option("--out", rn_out, "output svg path")->required();
  rn_cmd->add_flag("--band", rn_band, "aggregate series into mean +- std band");
  rn_cmd->add_option("--title", rn_title, "figure title");

  // validate-curriculum
  auto* vc_cmd = app.add_subcommand("validate-curriculum",
                                    "Oracle check of the S2D conditions for each baseline");
  std::string vc_config;
  vc_cmd->add_option("config", vc_config, "experiment config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      s2d::ExperimentConfig cfg = s2d::load_experiment_config(run_config);
      std::vector<s2d::RunOutcome> outcomes =
          s2d::run_experiment(cfg, run_out, run_force, run_workers);
      bool all_ok = true;
      for (const s2d::RunOutcome& oc : outcomes) {
        std::cout << (oc.ok ? "ok   " : "FAIL ") << oc.baseline << " seed=" << oc.seed;
        if (!oc.ok) std::cout << "  " << oc.error;
        std::cout << "\n";
        all_ok = all_ok && oc.ok;
      }
      return all_ok ? 0 : 1;
    }
    if (*cmp_cmd) {
      std::filesystem::path out =
          cmp_out.empty() ? std::filesystem::path(cmp_a) / "compare" : std::filesystem::path(cmp_out);
      s2d::compare_landscapes(cmp_a, cmp_b, cmp_steps, out);
      std::cout << "wrote " << cmp_steps.size() * 4 << " grids to " << out << "\n";
      return 0;
    }
    if (*an_cmd) {
      s2d::AnalyzeRequest req;
      req.actions = an_actions;
      req.features = an_features;
      req.heatmap = an_heatmap;
      req.sharpness = an_sharp;
      req.trajectory_csv = an_traj;
      req.action_episodes = an_eps;
      s2d::analyze_run(an_run, req);
      std::cout << "analyses written to " << an_run << "\n";
      return 0;
    }
    if (*rn_cmd) {
      s2d::SvgStyle style;
      style.band = rn_band;
      style.title = rn_title;
      s2d::render_svg(rn_csv, rn_out, style);
      std::cout << "wrote " << rn_out << "\n";
      return 0;
    }
    if (*vc_cmd) {
      s2d::ExperimentConfig cfg = s2d::load_experiment_config(vc_config);
      std::string report;
      bool ok = s2d::validate_curriculum_config(cfg, report);
      std::cout << report;
      return ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
