#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ovmine/errors.hpp"
#include "ovmine/geometry.hpp"
#include "ovmine/mining.hpp"

namespace ovmine {

enum class Origin { BASE, NOVEL, BACKGROUND };

inline const char* origin_name(Origin o) {
  switch (o) {
    case Origin::BASE: return "BASE";
    case Origin::NOVEL: return "NOVEL";
    default: return "BACKGROUND";
  }
}

/// A proposal after stratified assignment. background_score (b) is the
/// weak-view background posterior supplied by the caller; weight stays 1 for
/// BASE and BACKGROUND boxes.
struct TrainingBox {
  BBox box;
  Origin origin = Origin::BACKGROUND;
  std::optional<std::size_t> target_index;
  double background_score = 0.0;
  std::optional<double> pseudo_confidence;  // s of the matched pseudo-label
  double weight = 1.0;
};

/// Which measurement backs the reliability score r of a novel training box.
enum class ReliabilityMode {
  ONE_MINUS_BG,   // r = 1 - b
  PSEUDO_CONF,    // r = s (degenerates to weighted pseudo-labels)
  IOU_TO_PSEUDO,  // r = iou(box, matched pseudo box)
  NOVELTY,        // r = s_det of the matched candidate
};

inline const char* reliability_name(ReliabilityMode m) {
  switch (m) {
    case ReliabilityMode::ONE_MINUS_BG: return "one_minus_bg";
    case ReliabilityMode::PSEUDO_CONF: return "pseudo_conf";
    case ReliabilityMode::IOU_TO_PSEUDO: return "iou_to_pseudo";
    default: return "novelty";
  }
}

inline ReliabilityMode reliability_from_name(const std::string& s) {
  if (s == "one_minus_bg") return ReliabilityMode::ONE_MINUS_BG;
  if (s == "pseudo_conf") return ReliabilityMode::PSEUDO_CONF;
  if (s == "iou_to_pseudo") return ReliabilityMode::IOU_TO_PSEUDO;
  if (s == "novelty") return ReliabilityMode::NOVELTY;
  throw ConfigError("unknown reliability indicator: " + s);
}

/// Two-stage assignment: proposals are first matched against base
/// annotations; only proposals left as background by stage 1 are matched
/// against the pseudo-labels. Everything else is BACKGROUND.
inline std::vector<TrainingBox> stratified_assign(
    const std::vector<BBox>& proposals,
    const std::vector<std::pair<BBox, std::string>>& base_gt,
    const std::vector<Candidate>& pseudo, double fg_iou) {
  for (const auto& c : pseudo)
    if (!c.fused.has_value())
      throw ContractError("stratified_assign: pseudo-labels must carry fused confidence");

  std::vector<BBox> base_boxes;
  base_boxes.reserve(base_gt.size());
  for (const auto& [b, cls] : base_gt) base_boxes.push_back(b);
  std::vector<BBox> pseudo_boxes;
  pseudo_boxes.reserve(pseudo.size());
  for (const auto& c : pseudo) pseudo_boxes.push_back(c.box);

  const auto base_match = match_targets(proposals, base_boxes, fg_iou);

  // Stage 2 runs only on stage-1 background proposals.
  std::vector<std::size_t> bg_idx;
  std::vector<BBox> bg_proposals;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    if (!base_match[i]) {
      bg_idx.push_back(i);
      bg_proposals.push_back(proposals[i]);
    }
  }
  const auto pseudo_match = match_targets(bg_proposals, pseudo_boxes, fg_iou);

  std::vector<TrainingBox> out(proposals.size());
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    out[i].box = proposals[i];
    if (base_match[i]) {
      out[i].origin = Origin::BASE;
      out[i].target_index = base_match[i];
    }
  }
  for (std::size_t k = 0; k < bg_idx.size(); ++k) {
    if (pseudo_match[k]) {
      TrainingBox& tb = out[bg_idx[k]];
      tb.origin = Origin::NOVEL;
      tb.target_index = pseudo_match[k];
      tb.pseudo_confidence = pseudo[*pseudo_match[k]].fused;
    }
  }
  return out;
}

/// Reliability score of a NOVEL training box under the chosen indicator.
/// `matched` is the pseudo-label the box was assigned to.
inline double reliability(const TrainingBox& tb, ReliabilityMode mode,
                          const Candidate& matched) {
  if (tb.origin != Origin::NOVEL)
    throw ContractError("reliability: only defined for NOVEL training boxes");
  switch (mode) {
    case ReliabilityMode::ONE_MINUS_BG:
      return 1.0 - tb.background_score;
    case ReliabilityMode::PSEUDO_CONF:
      if (!tb.pseudo_confidence)
        throw ContractError("reliability: pseudo_confidence unset");
      return *tb.pseudo_confidence;
    case ReliabilityMode::IOU_TO_PSEUDO:
      return iou(tb.box, matched.box);
    case ReliabilityMode::NOVELTY:
      if (!matched.novelty)
        throw ContractError("reliability: matched candidate has no novelty");
      return *matched.novelty;
  }
  throw ContractError("reliability: unreachable");
}

/// Per-box adaptive weight: w = lambda_prime * s + (1 - lambda_prime) * r.
inline double adaptive_weight(double s, double r, double lambda_prime) {
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in01(s) || !in01(r) || !in01(lambda_prime))
    throw ConfigError("adaptive_weight: all inputs must lie in [0,1]");
  return lambda_prime * s + (1.0 - lambda_prime) * r;
}

/// Weighted loss aggregate over one batch:
/// L = (1/N)(sum of base losses + gamma * sum of w_i * novel losses), where
/// BACKGROUND boxes count inside the base sum with weight 1 and
/// N = n_base + n_novel. Empty input returns 0.
inline double aggregate_loss(const std::vector<TrainingBox>& boxes,
                             const std::vector<double>& per_box_losses,
                             double gamma) {
  if (boxes.size() != per_box_losses.size())
    throw ContractError("aggregate_loss: boxes and losses differ in length");
  if (boxes.empty()) return 0.0;
  double base_sum = 0.0, novel_sum = 0.0;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (per_box_losses[i] < 0)
      throw ContractError("aggregate_loss: losses must be non-negative");
    if (boxes[i].origin == Origin::NOVEL)
      novel_sum += boxes[i].weight * per_box_losses[i];
    else
      base_sum += per_box_losses[i];
  }
  return (base_sum + gamma * novel_sum) / static_cast<double>(boxes.size());
}

}  // namespace ovmine
