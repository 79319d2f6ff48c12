// Command-line front end: `simulate` runs the mining simulation per seed,
// `sweep` grids mining parameters, `audit` decomposes recorded pseudo-label
// files against recorded ground truth.

#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ovmine/experiment.hpp"

namespace {

using ovmine::ExperimentConfig;

struct Overrides {
  std::optional<double> lambda, lambda_prime, delta, gamma, burnin_threshold,
      prefilter, nms_iou, fg_iou;
  std::optional<std::size_t> burnin_steps, iterations, stride, threads;
  std::optional<std::string> indicator, out_dir;
  std::vector<std::uint64_t> seeds;
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--lambda", ov.lambda, "Fusion mix (1 = CLIP only)");
  cmd->add_option("--lambda-prime", ov.lambda_prime, "Reweighting mix");
  cmd->add_option("--delta", ov.delta, "Online mining threshold");
  cmd->add_option("--gamma", ov.gamma, "Overall novel loss weight");
  cmd->add_option("--burnin-steps", ov.burnin_steps, "Burn-in iterations");
  cmd->add_option("--burnin-threshold", ov.burnin_threshold,
                  "CLIP threshold during burn-in");
  cmd->add_option("--prefilter", ov.prefilter, "Candidate prefilter threshold");
  cmd->add_option("--nms-iou", ov.nms_iou, "Candidate NMS IoU threshold");
  cmd->add_option("--fg-iou", ov.fg_iou, "Assignment foreground IoU");
  cmd->add_option("--iterations", ov.iterations, "Training iterations");
  cmd->add_option("--stride", ov.stride, "Logging stride");
  cmd->add_option("--indicator", ov.indicator,
                  "Reliability indicator: one_minus_bg, pseudo_conf, "
                  "iou_to_pseudo, novelty");
  cmd->add_option("--seed", ov.seeds, "Seed(s); replaces config seeds");
  cmd->add_option("--threads", ov.threads, "Parallel seeds");
  cmd->add_option("--out", ov.out_dir, "Output directory");
}

// Precedence: flags > OVMINE_OUTPUT_ROOT (output dir only) > config file >
// defaults.
ExperimentConfig resolve_config(const std::string& config_path,
                                const Overrides& ov) {
  ExperimentConfig cfg;
  if (!config_path.empty())
    cfg = ovmine::experiment_from_json(ovmine::load_json_file(config_path));
  if (ov.lambda) cfg.mining.lambda = *ov.lambda;
  if (ov.lambda_prime) cfg.mining.lambda_prime = *ov.lambda_prime;
  if (ov.delta) cfg.mining.delta = *ov.delta;
  if (ov.gamma) cfg.mining.gamma = *ov.gamma;
  if (ov.burnin_steps) cfg.mining.burnin_steps = *ov.burnin_steps;
  if (ov.burnin_threshold) cfg.mining.burnin_threshold = *ov.burnin_threshold;
  if (ov.prefilter) cfg.mining.candidate_prefilter = *ov.prefilter;
  if (ov.nms_iou) cfg.mining.nms_iou = *ov.nms_iou;
  if (ov.fg_iou) cfg.mining.fg_iou = *ov.fg_iou;
  if (ov.iterations) cfg.iterations = *ov.iterations;
  if (ov.stride) cfg.log_stride = *ov.stride;
  if (ov.indicator) cfg.indicator = ovmine::reliability_from_name(*ov.indicator);
  if (!ov.seeds.empty()) cfg.seeds = ov.seeds;
  if (ov.threads) cfg.threads = *ov.threads;
  if (ov.out_dir) {
    cfg.output_dir = *ov.out_dir;
  } else if (const char* root = std::getenv("OVMINE_OUTPUT_ROOT")) {
    cfg.output_dir = root;
  }
  cfg.validate();
  return cfg;
}

ovmine::SweepGrid parse_grid(const std::vector<std::string>& specs) {
  ovmine::SweepGrid grid;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos)
      throw ovmine::ConfigError("--grid expects name=v1,v2,...: " + spec);
    const std::string name = spec.substr(0, eq);
    std::vector<ovmine::json> values;
    std::string rest = spec.substr(eq + 1);
    std::size_t pos = 0;
    while (pos <= rest.size()) {
      const auto comma = rest.find(',', pos);
      const std::string tok =
          rest.substr(pos, comma == std::string::npos ? comma : comma - pos);
      if (tok.empty()) throw ovmine::ConfigError("--grid: empty value in " + spec);
      if (name == "indicator") {
        values.push_back(tok);
      } else {
        try {
          values.push_back(std::stod(tok));
        } catch (const std::exception&) {
          throw ovmine::ConfigError("--grid: non-numeric value '" + tok + "'");
        }
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    grid.axes.emplace_back(name, std::move(values));
  }
  return grid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-label mining simulation for open-vocabulary detection"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;

  auto* simulate = app.add_subcommand("simulate", "Run the mining simulation");
  simulate->add_option("--config", config_path, "Experiment config JSON");
  add_override_flags(simulate, ov);

  std::vector<std::string> grid_specs;
  auto* sweep = app.add_subcommand("sweep", "Grid over mining parameters");
  sweep->add_option("--config", config_path, "Experiment config JSON");
  sweep->add_option("--grid", grid_specs,
                    "Axis as name=v1,v2,... over lambda, lambda_prime, delta, "
                    "burnin_steps, gamma, indicator")
      ->required();
  add_override_flags(sweep, ov);

  std::string candidates_path, gt_path;
  std::vector<double> thresholds;
  std::optional<std::string> audit_out;
  auto* audit = app.add_subcommand("audit", "Decompose recorded pseudo-labels");
  audit->add_option("--candidates", candidates_path, "Candidates JSON file")
      ->required();
  audit->add_option("--ground-truth", gt_path, "Ground-truth scenes JSON file")
      ->required();
  audit->add_option("--thresholds", thresholds, "Selection thresholds")
      ->required();
  audit->add_option("--out", audit_out, "Write report JSON here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      const ExperimentConfig cfg = resolve_config(config_path, ov);
      const ovmine::json summary = ovmine::run_simulate(cfg);
      std::printf("%s\n", summary["aggregate"].dump(2).c_str());
      std::printf("wrote %s/metrics.csv and summary.json\n",
                  cfg.output_dir.c_str());
    } else if (sweep->parsed()) {
      const ExperimentConfig cfg = resolve_config(config_path, ov);
      const ovmine::SweepGrid grid = parse_grid(grid_specs);
      const auto rows = ovmine::run_sweep(cfg, grid);
      const std::string csv = ovmine::sweep_csv(grid, rows);
      std::filesystem::create_directories(cfg.output_dir);
      ovmine::write_text_file(cfg.output_dir + "/sweep.csv", csv);
      std::printf("%s", csv.c_str());
    } else if (audit->parsed()) {
      const auto images =
          ovmine::candidates_from_json(ovmine::load_json_file(candidates_path));
      const auto scenes =
          ovmine::scenes_from_json(ovmine::load_json_file(gt_path));
      const auto rows = ovmine::run_audit(images, scenes, thresholds);
      std::printf("threshold num_selected tp%% misclass%% noise%% precision recall\n");
      for (const auto& r : rows)
        std::printf("%.4g %zu %.2f %.2f %.2f %.4f %.4f\n", r.threshold,
                    r.num_selected, r.decomposition.tp_pct,
                    r.decomposition.misclass_pct, r.decomposition.noise_pct,
                    r.precision, r.recall);
      if (audit_out)
        ovmine::write_text_file(*audit_out,
                                ovmine::audit_to_json(rows).dump(2) + "\n");
    }
  } catch (const ovmine::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return 2;
  }
  return 0;
}
