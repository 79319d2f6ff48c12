#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <future>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ovmine/io.hpp"
#include "ovmine/run.hpp"

namespace ovmine {

/// Everything one reproducible experiment needs: world, mining config,
/// reliability indicator, schedule, seeds, and output location.
struct ExperimentConfig {
  WorldConfig world;
  MiningConfig mining;
  ReliabilityMode indicator = ReliabilityMode::ONE_MINUS_BG;
  std::size_t iterations = 1500;
  std::size_t log_stride = 25;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "runs";
  std::size_t threads = 1;

  void validate() const {
    world.validate();
    mining.validate();
    if (iterations == 0) throw ConfigError("iterations must be > 0");
    if (log_stride == 0) throw ConfigError("log_stride must be > 0");
    if (seeds.empty()) throw ConfigError("seeds must be non-empty");
    if (threads == 0) throw ConfigError("threads must be > 0");
  }
};

// ---- config (de)serialization ----------------------------------------------

namespace detail {

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j[key].get<T>();
}

inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& where) {
  for (const auto& [key, val] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

}  // namespace detail

inline json mining_to_json(const MiningConfig& m) {
  return {{"lambda", m.lambda},
          {"lambda_prime", m.lambda_prime},
          {"delta", m.delta},
          {"burnin_threshold", m.burnin_threshold},
          {"burnin_steps", m.burnin_steps},
          {"candidate_prefilter", m.candidate_prefilter},
          {"gamma", m.gamma},
          {"nms_iou", m.nms_iou},
          {"fg_iou", m.fg_iou}};
}

inline MiningConfig mining_from_json(const json& j) {
  detail::check_keys(j,
                     {"lambda", "lambda_prime", "delta", "burnin_threshold",
                      "burnin_steps", "candidate_prefilter", "gamma", "nms_iou",
                      "fg_iou"},
                     "mining");
  MiningConfig m;
  detail::get_if(j, "lambda", m.lambda);
  detail::get_if(j, "lambda_prime", m.lambda_prime);
  detail::get_if(j, "delta", m.delta);
  detail::get_if(j, "burnin_threshold", m.burnin_threshold);
  detail::get_if(j, "burnin_steps", m.burnin_steps);
  detail::get_if(j, "candidate_prefilter", m.candidate_prefilter);
  detail::get_if(j, "gamma", m.gamma);
  detail::get_if(j, "nms_iou", m.nms_iou);
  detail::get_if(j, "fg_iou", m.fg_iou);
  return m;
}

inline json world_to_json(const WorldConfig& w) {
  return {{"canvas_w", w.canvas_w},
          {"canvas_h", w.canvas_h},
          {"num_base", w.num_base},
          {"num_novel", w.num_novel},
          {"base_count", json::array({w.base_count_min, w.base_count_max})},
          {"novel_count", json::array({w.novel_count_min, w.novel_count_max})},
          {"noise_count", json::array({w.noise_count_min, w.noise_count_max})},
          {"object_size", json::array({w.object_size_min, w.object_size_max})},
          {"proposals_per_novel",
           json::array({w.proposals_per_novel_min, w.proposals_per_novel_max})},
          {"train_jitter_per_object", w.train_jitter_per_object},
          {"train_background_boxes", w.train_background_boxes},
          {"num_scenes", w.num_scenes},
          {"skill_rate", w.skill_rate},
          {"vlm",
           {{"misclass_rate", w.vlm.misclass_rate},
            {"true_score", json::array({w.vlm.true_mu, w.vlm.true_sd})},
            {"wrong_score", json::array({w.vlm.wrong_mu, w.vlm.wrong_sd})},
            {"noise_score", json::array({w.vlm.noise_mu, w.vlm.noise_sd})},
            {"seed", w.vlm.seed}}},
          {"detector",
           {{"logit_scale", w.detector.logit_scale},
            {"embed_noise", w.detector.embed_noise},
            {"strong_extra", w.detector.strong_extra},
            {"seed", w.detector.seed}}}};
}

inline WorldConfig world_from_json(const json& j) {
  detail::check_keys(
      j,
      {"canvas_w", "canvas_h", "num_base", "num_novel", "base_count",
       "novel_count", "noise_count", "object_size", "proposals_per_novel",
       "train_jitter_per_object", "train_background_boxes", "num_scenes",
       "skill_rate", "vlm", "detector"},
      "world");
  WorldConfig w;
  detail::get_if(j, "canvas_w", w.canvas_w);
  detail::get_if(j, "canvas_h", w.canvas_h);
  detail::get_if(j, "num_base", w.num_base);
  detail::get_if(j, "num_novel", w.num_novel);
  auto range = [&](const char* key, auto& lo, auto& hi) {
    if (j.contains(key)) {
      lo = j[key][0];
      hi = j[key][1];
    }
  };
  range("base_count", w.base_count_min, w.base_count_max);
  range("novel_count", w.novel_count_min, w.novel_count_max);
  range("noise_count", w.noise_count_min, w.noise_count_max);
  range("object_size", w.object_size_min, w.object_size_max);
  range("proposals_per_novel", w.proposals_per_novel_min,
        w.proposals_per_novel_max);
  detail::get_if(j, "train_jitter_per_object", w.train_jitter_per_object);
  detail::get_if(j, "train_background_boxes", w.train_background_boxes);
  detail::get_if(j, "num_scenes", w.num_scenes);
  detail::get_if(j, "skill_rate", w.skill_rate);
  if (j.contains("vlm")) {
    const json& v = j["vlm"];
    detail::check_keys(
        v, {"misclass_rate", "true_score", "wrong_score", "noise_score", "seed"},
        "world.vlm");
    detail::get_if(v, "misclass_rate", w.vlm.misclass_rate);
    auto vrange = [&](const char* key, double& mu, double& sd) {
      if (v.contains(key)) {
        mu = v[key][0];
        sd = v[key][1];
      }
    };
    vrange("true_score", w.vlm.true_mu, w.vlm.true_sd);
    vrange("wrong_score", w.vlm.wrong_mu, w.vlm.wrong_sd);
    vrange("noise_score", w.vlm.noise_mu, w.vlm.noise_sd);
    detail::get_if(v, "seed", w.vlm.seed);
  }
  if (j.contains("detector")) {
    const json& d = j["detector"];
    detail::check_keys(d, {"logit_scale", "embed_noise", "strong_extra", "seed"},
                       "world.detector");
    detail::get_if(d, "logit_scale", w.detector.logit_scale);
    detail::get_if(d, "embed_noise", w.detector.embed_noise);
    detail::get_if(d, "strong_extra", w.detector.strong_extra);
    detail::get_if(d, "seed", w.detector.seed);
  }
  return w;
}

inline json experiment_to_json(const ExperimentConfig& c) {
  return {{"schema_version", kSchemaVersion},
          {"world", world_to_json(c.world)},
          {"mining", mining_to_json(c.mining)},
          {"indicator", reliability_name(c.indicator)},
          {"iterations", c.iterations},
          {"log_stride", c.log_stride},
          {"seeds", c.seeds},
          {"output_dir", c.output_dir},
          {"threads", c.threads}};
}

inline ExperimentConfig experiment_from_json(const json& j) {
  detail::check_keys(j,
                     {"schema_version", "world", "mining", "indicator",
                      "iterations", "log_stride", "seeds", "output_dir",
                      "threads"},
                     "config");
  ExperimentConfig c;
  if (j.contains("world")) c.world = world_from_json(j["world"]);
  if (j.contains("mining")) c.mining = mining_from_json(j["mining"]);
  if (j.contains("indicator"))
    c.indicator = reliability_from_name(j["indicator"].get<std::string>());
  detail::get_if(j, "iterations", c.iterations);
  detail::get_if(j, "log_stride", c.log_stride);
  detail::get_if(j, "seeds", c.seeds);
  detail::get_if(j, "output_dir", c.output_dir);
  detail::get_if(j, "threads", c.threads);
  return c;
}

// ---- per-seed execution -----------------------------------------------------

struct SeedOutput {
  std::uint64_t seed = 0;
  RunResult result;
  std::string metrics_csv;  // rows for this seed, no header
};

inline SeedOutput run_one_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  RunParams params;
  params.iterations = cfg.iterations;
  params.log_stride = cfg.log_stride;
  params.seed = seed;
  params.indicator = cfg.indicator;
  SeedOutput out;
  out.seed = seed;
  out.result = run_training_simulation(cfg.world, cfg.mining, params);
  for (const auto& m : out.result.series)
    out.metrics_csv += metrics_csv_row(seed, m);
  return out;
}

/// Runs every seed (optionally in parallel); results come back in seed-list
/// order, so outputs are identical for any thread count.
inline std::vector<SeedOutput> run_all_seeds(const ExperimentConfig& cfg) {
  std::vector<SeedOutput> outs(cfg.seeds.size());
  if (cfg.threads <= 1) {
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
      outs[i] = run_one_seed(cfg, cfg.seeds[i]);
    return outs;
  }
  std::size_t next = 0;
  while (next < cfg.seeds.size()) {
    const std::size_t batch = std::min(cfg.threads, cfg.seeds.size() - next);
    std::vector<std::future<SeedOutput>> futs;
    for (std::size_t k = 0; k < batch; ++k)
      futs.push_back(std::async(std::launch::async, run_one_seed, std::cref(cfg),
                                cfg.seeds[next + k]));
    for (std::size_t k = 0; k < batch; ++k) outs[next + k] = futs[k].get();
    next += batch;
  }
  return outs;
}

inline json summary_json(const ExperimentConfig& cfg,
                         const std::vector<SeedOutput>& outs) {
  json per_seed = json::array();
  double p_sum = 0, p_sq = 0, r_sum = 0, noise_sum = 0, clip_noise_sum = 0;
  for (const auto& so : outs) {
    const FinalSnapshot& f = so.result.final_snapshot;
    const StepMetrics& last = so.result.series.back();
    per_seed.push_back(
        {{"seed", so.seed},
         {"final_precision", f.precision},
         {"final_recall", f.recall},
         {"num_selected", f.num_selected},
         {"tp_pct", f.decomposition.tp_pct},
         {"misclass_pct", f.decomposition.misclass_pct},
         {"noise_pct", f.decomposition.noise_pct},
         {"clip_threshold", f.clip_threshold},
         {"clip_precision", f.clip_precision},
         {"clip_recall", f.clip_recall},
         {"clip_noise_pct", f.clip_noise_pct},
         {"recall_residual", f.recall_residual},
         {"final_skill", so.result.final_skill},
         {"final_weight_rank_correlation",
          last.mean_weight_rank_correlation
              ? json(*last.mean_weight_rank_correlation)
              : json()}});
    p_sum += f.precision;
    p_sq += f.precision * f.precision;
    r_sum += f.recall;
    noise_sum += f.decomposition.noise_pct;
    clip_noise_sum += f.clip_noise_pct;
  }
  const double n = static_cast<double>(outs.size());
  const double p_mean = p_sum / n;
  const double p_var = std::max(0.0, p_sq / n - p_mean * p_mean);
  return {{"schema_version", kSchemaVersion},
          {"config", experiment_to_json(cfg)},
          {"clip_only_baseline", cfg.mining.lambda == 1.0},
          {"per_seed", per_seed},
          {"aggregate",
           {{"mean_final_precision", p_mean},
            {"stddev_final_precision", std::sqrt(p_var)},
            {"mean_final_recall", r_sum / n},
            {"mean_noise_pct", noise_sum / n},
            {"mean_clip_noise_pct", clip_noise_sum / n}}}};
}

/// Re-derives the final-iteration mining state of a finished run and dumps
/// mined labels, ground truth, and the assignment audit file for one seed.
inline void dump_seed_artifacts(const ExperimentConfig& cfg,
                                const SeedOutput& so,
                                const std::string& dir) {
  const CategorySpace cats = make_category_space(cfg.world);
  const auto packs = build_world(cfg.world, cfg.mining, so.seed);
  SimDetector det = cfg.world.detector;
  det.seed ^= substream_seed(so.seed, "det-root");
  det.skill = so.result.final_skill;
  const Phase phase = mining_schedule(cfg.iterations - 1, cfg.mining);

  json mined = json::array();
  json assignments = json::array();
  std::vector<Scene> scenes;
  for (const auto& pack : packs) {
    std::vector<Candidate> work = pack.candidates;
    std::vector<bool> selected(work.size(), false);
    std::vector<Candidate> sel;
    if (phase == Phase::ONLINE) {
      std::vector<BBox> boxes;
      for (const auto& c : work) boxes.push_back(c.box);
      const auto embs = detector_embed(pack.scene, boxes, det, View::WEAK, cats);
      sel = mine_online(work, embs, cats, cfg.mining);
      for (std::size_t i = 0; i < work.size(); ++i)
        selected[i] = *work[i].fused >= cfg.mining.delta;
    } else {
      sel = select_burnin(work, cfg.mining);
      for (auto& c : sel) c.fused = c.clip_score;
      for (std::size_t i = 0; i < work.size(); ++i)
        selected[i] = work[i].clip_score >= cfg.mining.burnin_threshold;
    }
    mined.push_back(
        mined_to_json(pack.scene.image_id, work, selected, cats.novel_names));
    const auto tbs = assign_and_weight(pack, sel, phase, det, cats, cfg.mining,
                                       cfg.indicator);
    assignments.push_back(assignment_to_json(pack.scene.image_id, tbs));
    scenes.push_back(pack.scene);
  }
  const std::string tag = std::to_string(so.seed);
  write_text_file(dir + "/mined_labels_seed" + tag + ".json", mined.dump(2) + "\n");
  write_text_file(dir + "/ground_truth_seed" + tag + ".json",
                  scenes_to_json(scenes).dump(2) + "\n");
  write_text_file(dir + "/assignment_seed" + tag + ".json",
                  assignments.dump(2) + "\n");
}

/// `simulate`: runs every seed, writes metrics.csv, summary.json, and
/// per-seed mined-label and ground-truth dumps.
inline json run_simulate(const ExperimentConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.output_dir);
  const auto outs = run_all_seeds(cfg);
  std::string csv = metrics_csv_header();
  for (const auto& so : outs) csv += so.metrics_csv;
  write_text_file(cfg.output_dir + "/metrics.csv", csv);
  const json summary = summary_json(cfg, outs);
  write_text_file(cfg.output_dir + "/summary.json", summary.dump(2) + "\n");
  for (const auto& so : outs) dump_seed_artifacts(cfg, so, cfg.output_dir);
  return summary;
}

// ---- sweep ------------------------------------------------------------------

/// A grid over any subset of {lambda, lambda_prime, delta, burnin_steps,
/// gamma, indicator}.
struct SweepGrid {
  std::vector<std::pair<std::string, std::vector<json>>> axes;

  void validate() const {
    if (axes.empty()) throw ConfigError("sweep: empty grid");
    for (const auto& [name, values] : axes) {
      if (values.empty()) throw ConfigError("sweep: empty axis '" + name + "'");
      if (name != "lambda" && name != "lambda_prime" && name != "delta" &&
          name != "burnin_steps" && name != "gamma" && name != "indicator")
        throw ConfigError("sweep: unknown parameter '" + name + "'");
    }
  }
};

inline void apply_sweep_value(ExperimentConfig& cfg, const std::string& name,
                              const json& value) {
  if (name == "lambda") cfg.mining.lambda = value.get<double>();
  else if (name == "lambda_prime") cfg.mining.lambda_prime = value.get<double>();
  else if (name == "delta") cfg.mining.delta = value.get<double>();
  else if (name == "burnin_steps") cfg.mining.burnin_steps = value.get<std::size_t>();
  else if (name == "gamma") cfg.mining.gamma = value.get<double>();
  else if (name == "indicator")
    cfg.indicator = reliability_from_name(value.get<std::string>());
}

struct SweepRow {
  std::string row_type;  // "seed", "mean", or "stddev"
  json point;            // axis name -> value
  std::optional<std::uint64_t> seed;
  double final_precision = 0, final_recall = 0, noise_pct = 0;
  std::optional<double> weight_rank_correlation;
};

inline std::string sweep_csv(const SweepGrid& grid,
                             const std::vector<SweepRow>& rows) {
  std::string csv = "schema_version,row_type";
  for (const auto& [name, values] : grid.axes) csv += "," + name;
  csv += ",seed,final_precision,final_recall,noise_pct,weight_rank_correlation\n";
  for (const auto& r : rows) {
    csv += std::to_string(kSchemaVersion) + "," + r.row_type;
    for (const auto& [name, values] : grid.axes) {
      const json& v = r.point[name];
      csv += ",";
      csv += v.is_string() ? v.get<std::string>() : fmt_double(v.get<double>());
    }
    csv += ",";
    if (r.seed) csv += std::to_string(*r.seed);
    csv += "," + fmt_double(r.final_precision) + "," + fmt_double(r.final_recall) +
           "," + fmt_double(r.noise_pct) + ",";
    if (r.weight_rank_correlation) csv += fmt_double(*r.weight_rank_correlation);
    csv += "\n";
  }
  return csv;
}

/// `sweep`: one summary row per grid point per seed plus mean/stddev
/// aggregate rows per grid point.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& base,
                                       const SweepGrid& grid) {
  base.validate();
  grid.validate();
  // Cartesian product of the axes.
  std::vector<json> points{json::object()};
  for (const auto& [name, values] : grid.axes) {
    std::vector<json> next;
    for (const auto& pt : points)
      for (const auto& v : values) {
        json p = pt;
        p[name] = v;
        next.push_back(std::move(p));
      }
    points = std::move(next);
  }

  std::vector<SweepRow> rows;
  for (const auto& pt : points) {
    ExperimentConfig cfg = base;
    for (const auto& [name, v] : pt.items()) apply_sweep_value(cfg, name, v);
    cfg.validate();
    const auto outs = run_all_seeds(cfg);
    double p_sum = 0, p_sq = 0, r_sum = 0, r_sq = 0, n_sum = 0, n_sq = 0;
    double w_sum = 0, w_sq = 0;
    std::size_t w_n = 0;
    for (const auto& so : outs) {
      const FinalSnapshot& f = so.result.final_snapshot;
      SweepRow row;
      row.row_type = "seed";
      row.point = pt;
      row.seed = so.seed;
      row.final_precision = f.precision;
      row.final_recall = f.recall;
      row.noise_pct = f.decomposition.noise_pct;
      row.weight_rank_correlation =
          so.result.series.back().mean_weight_rank_correlation;
      rows.push_back(row);
      p_sum += f.precision;
      p_sq += f.precision * f.precision;
      r_sum += f.recall;
      r_sq += f.recall * f.recall;
      n_sum += f.decomposition.noise_pct;
      n_sq += f.decomposition.noise_pct * f.decomposition.noise_pct;
      if (row.weight_rank_correlation) {
        w_sum += *row.weight_rank_correlation;
        w_sq += *row.weight_rank_correlation * *row.weight_rank_correlation;
        ++w_n;
      }
    }
    const double n = static_cast<double>(outs.size());
    auto mean_std = [n](double sum, double sq) {
      const double m = sum / n;
      return std::pair<double, double>{m, std::sqrt(std::max(0.0, sq / n - m * m))};
    };
    const auto [pm, ps] = mean_std(p_sum, p_sq);
    const auto [rm, rs] = mean_std(r_sum, r_sq);
    const auto [nm, ns] = mean_std(n_sum, n_sq);
    SweepRow mean_row;
    mean_row.row_type = "mean";
    mean_row.point = pt;
    mean_row.final_precision = pm;
    mean_row.final_recall = rm;
    mean_row.noise_pct = nm;
    if (w_n > 0) mean_row.weight_rank_correlation = w_sum / w_n;
    rows.push_back(mean_row);
    SweepRow std_row;
    std_row.row_type = "stddev";
    std_row.point = pt;
    std_row.final_precision = ps;
    std_row.final_recall = rs;
    std_row.noise_pct = ns;
    if (w_n > 0)
      std_row.weight_rank_correlation = std::sqrt(std::max(
          0.0, w_sq / w_n - (w_sum / w_n) * (w_sum / w_n)));
    rows.push_back(std_row);
  }
  return rows;
}

// ---- audit ------------------------------------------------------------------

struct AuditRow {
  double threshold = 0;
  std::size_t num_selected = 0;
  Decomposition decomposition;
  double precision = 1.0;
  double recall = 0.0;
};

/// `audit`: Fig.-style decomposition of a recorded candidate file against a
/// recorded ground-truth file, at each requested threshold. Selection uses
/// the fused score when present, otherwise the top-1 score.
inline std::vector<AuditRow> run_audit(
    const std::vector<ImageCandidates>& images, const std::vector<Scene>& scenes,
    const std::vector<double>& thresholds) {
  std::map<std::uint64_t, const Scene*> by_id;
  for (const auto& s : scenes) by_id[s.image_id] = &s;

  std::vector<AuditRow> rows;
  for (double t : thresholds) {
    AuditRow row;
    row.threshold = t;
    std::vector<LabelVerdict> all;
    std::size_t total_gt = 0;
    for (const auto& img : images) {
      const auto it = by_id.find(img.image_id);
      if (it == by_id.end())
        throw ConfigError("audit: no ground truth for image_id " +
                          std::to_string(img.image_id));
      const std::vector<SceneObject> novel = it->second->novel_gt();
      total_gt += novel.size();

      std::vector<Candidate> sel;
      if (!img.mined.empty()) {
        for (std::size_t i = 0; i < img.mined.size(); ++i) {
          const Candidate& c = img.mined[i];
          const double score = c.fused ? *c.fused : c.clip_score;
          if (score >= t) sel.push_back(c);
        }
      } else {
        for (const auto& rc : img.raw) {
          if (rc.scores.empty())
            throw ConfigError("audit: candidate with empty scores in image " +
                              std::to_string(img.image_id));
          std::size_t best = 0;
          for (std::size_t k = 1; k < rc.scores.size(); ++k)
            if (rc.scores[k].second > rc.scores[best].second) best = k;
          if (rc.scores[best].second >= t) {
            Candidate c;
            c.box = rc.box;
            c.clip_class = rc.scores[best].first;
            c.clip_score = rc.scores[best].second;
            sel.push_back(c);
          }
        }
      }
      const auto v = judge(sel, novel);
      all.insert(all.end(), v.begin(), v.end());
    }
    row.num_selected = all.size();
    row.decomposition = decompose(all);
    const auto [p, r] = precision_recall(all, total_gt);
    row.precision = p;
    row.recall = r;
    rows.push_back(row);
  }
  return rows;
}

inline json audit_to_json(const std::vector<AuditRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"threshold", r.threshold},
                   {"num_selected", r.num_selected},
                   {"tp_pct", r.decomposition.tp_pct},
                   {"misclass_pct", r.decomposition.misclass_pct},
                   {"noise_pct", r.decomposition.noise_pct},
                   {"precision", r.precision},
                   {"recall", r.recall}});
  }
  return {{"schema_version", kSchemaVersion}, {"rows", out}};
}

}  // namespace ovmine
