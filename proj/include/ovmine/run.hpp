#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ovmine/assignment.hpp"
#include "ovmine/evaluation.hpp"
#include "ovmine/mining.hpp"
#include "ovmine/simulator.hpp"

namespace ovmine {

/// Per-logging-step quality record of one simulation run.
struct StepMetrics {
  std::size_t iteration = 0;
  Phase phase = Phase::BURN_IN;
  std::size_t num_selected = 0;
  double precision = 1.0;
  double recall = 0.0;
  std::size_t tp_count = 0, misclass_count = 0, noise_count = 0;
  std::optional<double> mean_weight_rank_correlation;
};

/// Final-iteration snapshot plus the CLIP-only comparison at matched recall.
struct FinalSnapshot {
  std::size_t num_selected = 0;
  double precision = 1.0;
  double recall = 0.0;
  Decomposition decomposition;
  double clip_threshold = 0.0;   // matched-recall CLIP-only threshold
  double clip_precision = 1.0;
  double clip_recall = 0.0;
  double clip_noise_pct = 0.0;
  double recall_residual = 0.0;  // |clip_recall - recall| of the match
};

struct RunResult {
  std::vector<StepMetrics> series;
  FinalSnapshot final_snapshot;
  double final_skill = 0.0;
};

struct RunParams {
  std::size_t iterations = 1500;
  std::size_t log_stride = 25;
  std::uint64_t seed = 1;
  ReliabilityMode indicator = ReliabilityMode::ONE_MINUS_BG;
};

/// Precomputed per-scene state: the scene, its preassigned candidates, and
/// the fixed training proposal set.
struct ScenePack {
  Scene scene;
  std::vector<Candidate> candidates;
  std::vector<SceneObject> novel;
  std::vector<std::pair<BBox, std::string>> base;
  std::vector<BBox> train_props;
};

inline std::vector<ScenePack> build_world(const WorldConfig& world,
                                          const MiningConfig& cfg,
                                          std::uint64_t seed) {
  world.validate();
  cfg.validate();
  const CategorySpace cats = make_category_space(world);
  SimVLM vlm = world.vlm;
  vlm.seed ^= substream_seed(seed, "vlm-root");
  std::vector<ScenePack> packs;
  packs.reserve(world.num_scenes);
  for (std::size_t i = 0; i < world.num_scenes; ++i) {
    ScenePack p;
    p.scene = generate_scene(world, seed, i);
    const auto props = candidate_proposals(p.scene, world, seed);
    p.candidates = assign_candidates(vlm_score(p.scene, props, vlm, cats), cfg);
    p.novel = p.scene.novel_gt();
    p.base = p.scene.base_gt();
    p.train_props = training_proposals(p.scene, world, seed);
    packs.push_back(std::move(p));
  }
  return packs;
}

namespace detail {

/// Current-phase selection for one scene. Burn-in selections get fused set to
/// the clip score so downstream assignment sees a pseudo-label confidence.
inline std::vector<Candidate> select_for_scene(const ScenePack& pack,
                                               Phase phase,
                                               const SimDetector& det,
                                               const CategorySpace& cats,
                                               const MiningConfig& cfg) {
  if (phase == Phase::BURN_IN) {
    std::vector<Candidate> sel = select_burnin(pack.candidates, cfg);
    for (auto& c : sel) c.fused = c.clip_score;
    return sel;
  }
  std::vector<Candidate> work = pack.candidates;
  std::vector<BBox> boxes;
  boxes.reserve(work.size());
  for (const auto& c : work) boxes.push_back(c.box);
  const auto embs = detector_embed(pack.scene, boxes, det, View::WEAK, cats);
  return mine_online(work, embs, cats, cfg);
}

inline double reliability_for(const TrainingBox& tb, const Candidate& matched,
                              ReliabilityMode mode, Phase phase) {
  // NOVELTY is undefined during burn-in (no detector pass); fall back to the
  // pseudo-label confidence there, matching the burn-in selection rule.
  if (phase == Phase::BURN_IN && mode == ReliabilityMode::NOVELTY)
    return tb.pseudo_confidence.value();
  return reliability(tb, mode, matched);
}

}  // namespace detail

/// Assigns training boxes for one scene against the current selection and
/// fills background scores and adaptive weights.
inline std::vector<TrainingBox> assign_and_weight(
    const ScenePack& pack, const std::vector<Candidate>& selected, Phase phase,
    const SimDetector& det, const CategorySpace& cats, const MiningConfig& cfg,
    ReliabilityMode mode) {
  auto tbs = stratified_assign(pack.train_props, pack.base, selected, cfg.fg_iou);
  const auto embs =
      detector_embed(pack.scene, pack.train_props, det, View::WEAK, cats, "train");
  for (std::size_t i = 0; i < tbs.size(); ++i) {
    if (tbs[i].origin != Origin::NOVEL) continue;
    tbs[i].background_score = classify(embs[i], cats).background();
    const Candidate& matched = selected[*tbs[i].target_index];
    const double r = detail::reliability_for(tbs[i], matched, mode, phase);
    tbs[i].weight =
        adaptive_weight(*tbs[i].pseudo_confidence, r, cfg.lambda_prime);
  }
  return tbs;
}

/// Pool-wide evaluation at the current skill.
inline StepMetrics evaluate_pool(const std::vector<ScenePack>& packs,
                                 Phase phase, const SimDetector& det,
                                 const CategorySpace& cats,
                                 const MiningConfig& cfg, ReliabilityMode mode,
                                 std::size_t iteration) {
  StepMetrics m;
  m.iteration = iteration;
  m.phase = phase;
  std::size_t total_gt = 0;
  double wq_sum = 0.0;
  std::size_t wq_n = 0;
  for (const auto& pack : packs) {
    const auto sel = detail::select_for_scene(pack, phase, det, cats, cfg);
    const auto verdicts = judge(sel, pack.novel);
    const VerdictCounts c = count_verdicts(verdicts);
    m.tp_count += c.tp;
    m.misclass_count += c.misclass;
    m.noise_count += c.noise;
    m.num_selected += sel.size();
    total_gt += pack.novel.size();
    const auto tbs = assign_and_weight(pack, sel, phase, det, cats, cfg, mode);
    if (auto wq = weight_quality(tbs, pack.novel)) {
      wq_sum += *wq;
      ++wq_n;
    }
  }
  m.precision = m.num_selected == 0
                    ? 1.0
                    : static_cast<double>(m.tp_count) / m.num_selected;
  m.recall = total_gt == 0 ? 0.0
                           : static_cast<double>(m.tp_count) / total_gt;
  if (wq_n > 0) m.mean_weight_rank_correlation = wq_sum / wq_n;
  return m;
}

/// CLIP-only selection over the pool at a fixed top-1 score threshold.
inline StepMetrics clip_only_pool(const std::vector<ScenePack>& packs,
                                  double threshold) {
  StepMetrics m;
  std::size_t total_gt = 0;
  for (const auto& pack : packs) {
    std::vector<Candidate> sel;
    for (const auto& c : pack.candidates)
      if (c.clip_score >= threshold) sel.push_back(c);
    const auto verdicts = judge(sel, pack.novel);
    const VerdictCounts c = count_verdicts(verdicts);
    m.tp_count += c.tp;
    m.misclass_count += c.misclass;
    m.noise_count += c.noise;
    m.num_selected += sel.size();
    total_gt += pack.novel.size();
  }
  m.precision = m.num_selected == 0
                    ? 1.0
                    : static_cast<double>(m.tp_count) / m.num_selected;
  m.recall = total_gt == 0 ? 0.0
                           : static_cast<double>(m.tp_count) / total_gt;
  return m;
}

/// Sweeps the CLIP-only threshold over all observed scores and returns the
/// one whose recall is nearest to target_recall.
inline double match_clip_recall(const std::vector<ScenePack>& packs,
                                double target_recall) {
  std::set<double> scores;
  for (const auto& pack : packs)
    for (const auto& c : pack.candidates) scores.insert(c.clip_score);
  double best_t = 1.0;
  double best_gap = std::numeric_limits<double>::infinity();
  for (double t : scores) {
    const StepMetrics m = clip_only_pool(packs, t);
    const double gap = std::abs(m.recall - target_recall);
    if (gap < best_gap) {
      best_gap = gap;
      best_t = t;
    }
  }
  return best_t;
}

/// The end-to-end dynamics: per-iteration mining on one scene drives a
/// saturating skill update proportional to the precision-recall product of
/// the current selection; pool metrics are recorded every log_stride steps.
inline RunResult run_training_simulation(const WorldConfig& world,
                                         const MiningConfig& cfg,
                                         const RunParams& params) {
  if (params.iterations == 0)
    throw ConfigError("run_training_simulation: iterations must be > 0");
  if (params.log_stride == 0)
    throw ConfigError("run_training_simulation: log_stride must be > 0");
  const CategorySpace cats = make_category_space(world);
  auto packs = build_world(world, cfg, params.seed);
  SimDetector det = world.detector;
  det.seed ^= substream_seed(params.seed, "det-root");
  det.skill = 0.0;

  RunResult result;
  for (std::size_t it = 0; it < params.iterations; ++it) {
    const Phase phase = mining_schedule(it, cfg);
    const ScenePack& pack = packs[it % packs.size()];
    const auto sel = detail::select_for_scene(pack, phase, det, cats, cfg);
    const auto verdicts = judge(sel, pack.novel);
    const auto [p, r] = precision_recall(verdicts, pack.novel.size());
    const double quality = p * r;
    det.skill += world.skill_rate * quality * (1.0 - det.skill);

    if (it % params.log_stride == 0 || it + 1 == params.iterations) {
      result.series.push_back(evaluate_pool(packs, phase, det, cats, cfg,
                                            params.indicator, it));
    }
  }
  det.skill = std::min(det.skill, 1.0);

  const Phase final_phase = mining_schedule(params.iterations - 1, cfg);
  const StepMetrics fin = result.series.back();
  FinalSnapshot& snap = result.final_snapshot;
  snap.num_selected = fin.num_selected;
  snap.precision = fin.precision;
  snap.recall = fin.recall;
  {
    std::vector<LabelVerdict> all;
    for (const auto& pack : packs) {
      const auto sel = detail::select_for_scene(pack, final_phase, det, cats, cfg);
      const auto v = judge(sel, pack.novel);
      all.insert(all.end(), v.begin(), v.end());
    }
    snap.decomposition = decompose(all);
  }
  snap.clip_threshold = match_clip_recall(packs, snap.recall);
  const StepMetrics clip = clip_only_pool(packs, snap.clip_threshold);
  snap.clip_precision = clip.precision;
  snap.clip_recall = clip.recall;
  snap.clip_noise_pct =
      clip.num_selected == 0 ? 0.0 : 100.0 * clip.noise_count / clip.num_selected;
  snap.recall_residual = std::abs(clip.recall - snap.recall);
  result.final_skill = det.skill;
  return result;
}

/// CLIP-only calibration statistics at the burn-in threshold: the mis-class
/// fraction among GT-overlapping selections and the noise fraction of all
/// selections.
struct CalibrationStats {
  double misclass_frac_gt_overlap = 0.0;
  double noise_frac = 0.0;
  std::size_t num_selected = 0;
};

inline CalibrationStats calibration_run(const WorldConfig& world,
                                        const MiningConfig& cfg,
                                        std::uint64_t seed) {
  const auto packs = build_world(world, cfg, seed);
  std::size_t overlapping = 0, misclass = 0, noise = 0, selected = 0;
  for (const auto& pack : packs) {
    const auto sel = select_burnin(pack.candidates, cfg);
    const auto verdicts = judge(sel, pack.novel);
    for (const auto& v : verdicts) {
      ++selected;
      if (v.iou_to_gt >= 0.5) {
        ++overlapping;
        if (v.verdict == Verdict::MIS_CLASS) ++misclass;
      }
      if (v.verdict == Verdict::NOISE) ++noise;
    }
  }
  CalibrationStats st;
  st.num_selected = selected;
  if (overlapping > 0)
    st.misclass_frac_gt_overlap =
        static_cast<double>(misclass) / static_cast<double>(overlapping);
  if (selected > 0)
    st.noise_frac = static_cast<double>(noise) / static_cast<double>(selected);
  return st;
}

}  // namespace ovmine
