#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ovmine/errors.hpp"
#include "ovmine/geometry.hpp"
#include "ovmine/scoring.hpp"

namespace ovmine {

/// A candidate pseudo-label: proposal box plus the precomputed VLM top-1
/// prediction. novelty (s_det) and fused (s) are filled by online mining.
struct Candidate {
  BBox box;
  double clip_score = 0.0;      // top-1 VLM score
  std::string clip_class;       // top-1 class, always a novel category
  std::optional<double> novelty;
  std::optional<double> fused;
};

/// Thresholds and mixing scalars for mining and training.
struct MiningConfig {
  double lambda = 0.5;            // detector/VLM fusion mix
  double delta = 0.9;             // online mining selection threshold
  double burnin_threshold = 0.8;  // CLIP-score threshold during burn-in
  std::size_t burnin_steps = 500;
  double candidate_prefilter = 0.5;
  double gamma = 2.0;             // overall novel-loss weight
  double lambda_prime = 0.5;      // reweighting mix
  double nms_iou = 0.5;
  double fg_iou = 0.5;

  void validate() const {
    auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in01(lambda) || !in01(delta) || !in01(burnin_threshold) ||
        !in01(candidate_prefilter) || !in01(lambda_prime))
      throw ConfigError("MiningConfig: score-valued fields must lie in [0,1]");
    if (!(nms_iou > 0 && nms_iou <= 1))
      throw ConfigError("MiningConfig: nms_iou must be in (0,1]");
    if (!(fg_iou > 0 && fg_iou < 1))
      throw ConfigError("MiningConfig: fg_iou must be in (0,1)");
    if (!(gamma > 0)) throw ConfigError("MiningConfig: gamma must be positive");
  }
};

enum class Phase { BURN_IN, ONLINE };

inline const char* phase_name(Phase p) {
  return p == Phase::BURN_IN ? "BURN_IN" : "ONLINE";
}

/// A raw proposal with its VLM score distribution over novel categories.
struct RawCandidate {
  BBox box;
  std::vector<std::pair<std::string, double>> scores;  // class -> prob
};

/// Candidate pre-assignment: keep proposals whose top-1 VLM score reaches the
/// prefilter threshold, then NMS the survivors on their top-1 scores. Each
/// kept box becomes a Candidate labeled with its argmax class.
inline std::vector<Candidate> assign_candidates(
    const std::vector<RawCandidate>& raw, const MiningConfig& cfg) {
  std::vector<Candidate> survivors;
  for (const auto& rc : raw) {
    if (rc.scores.empty()) continue;
    std::size_t best = 0;
    for (std::size_t i = 1; i < rc.scores.size(); ++i)
      if (rc.scores[i].second > rc.scores[best].second) best = i;
    if (rc.scores[best].second >= cfg.candidate_prefilter) {
      Candidate c;
      c.box = rc.box;
      c.clip_score = rc.scores[best].second;
      c.clip_class = rc.scores[best].first;
      survivors.push_back(std::move(c));
    }
  }
  std::vector<std::pair<BBox, double>> scored;
  scored.reserve(survivors.size());
  for (const auto& c : survivors) scored.emplace_back(c.box, c.clip_score);
  std::vector<Candidate> out;
  for (std::size_t idx : nms(scored, cfg.nms_iou))
    out.push_back(survivors[idx]);
  return out;
}

/// Burn-in selection: candidates whose CLIP score reaches the fixed burn-in
/// threshold.
inline std::vector<Candidate> select_burnin(
    const std::vector<Candidate>& candidates, const MiningConfig& cfg) {
  std::vector<Candidate> out;
  for (const auto& c : candidates)
    if (c.clip_score >= cfg.burnin_threshold) out.push_back(c);
  return out;
}

/// Online mining over one image: novelty from the detector embeddings,
/// per-image max-norm, fusion with the CLIP score, selection at delta.
/// novelty and fused are populated on every input candidate so rejected ones
/// can still feed precision-recall accounting.
inline std::vector<Candidate> mine_online(
    std::vector<Candidate>& candidates,
    const std::vector<RegionEmbedding>& detector_embeddings,
    const CategorySpace& cats, const MiningConfig& cfg) {
  if (candidates.size() != detector_embeddings.size())
    throw ContractError("mine_online: candidates and embeddings differ in length");
  std::vector<double> z(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    z[i] = novelty_score(detector_embeddings[i], cats);
  const std::vector<double> s_det = max_norm(z);
  std::vector<Candidate> selected;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    candidates[i].novelty = s_det[i];
    candidates[i].fused = fuse(candidates[i].clip_score, s_det[i], cfg.lambda);
    if (*candidates[i].fused >= cfg.delta) selected.push_back(candidates[i]);
  }
  return selected;
}

/// BURN_IN for the first burnin_steps iterations, ONLINE afterwards.
inline Phase mining_schedule(std::size_t iteration, const MiningConfig& cfg) {
  return iteration < cfg.burnin_steps ? Phase::BURN_IN : Phase::ONLINE;
}

}  // namespace ovmine
