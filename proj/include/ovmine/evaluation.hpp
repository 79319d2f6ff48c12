#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ovmine/assignment.hpp"
#include "ovmine/errors.hpp"
#include "ovmine/geometry.hpp"
#include "ovmine/mining.hpp"

namespace ovmine {

/// Ground-truth object in a scene: a box plus its category name.
struct SceneObject {
  BBox box;
  std::string category;
};

enum class Verdict { TP, MIS_CLASS, NOISE };

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::TP: return "TP";
    case Verdict::MIS_CLASS: return "MIS_CLASS";
    default: return "NOISE";
  }
}

struct LabelVerdict {
  Verdict verdict = Verdict::NOISE;
  std::optional<std::size_t> matched_gt;
  double iou_to_gt = 0.0;
};

/// Classifies pseudo-labels against the hidden novel ground truth. Each label
/// is matched to its best-IoU GT object; IoU >= 0.5 with the right class is a
/// TP, with the wrong class a MIS_CLASS, anything else NOISE. A GT object can
/// validate at most one TP: labels are processed in descending fused score
/// (clip score when fused is unset, then input index), and a correct-class
/// duplicate of an already-claimed GT counts as NOISE.
inline std::vector<LabelVerdict> judge(
    const std::vector<Candidate>& pseudo_labels,
    const std::vector<SceneObject>& novel_gt) {
  auto score_of = [](const Candidate& c) {
    return c.fused.has_value() ? *c.fused : c.clip_score;
  };
  std::vector<std::size_t> order(pseudo_labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return score_of(pseudo_labels[a]) > score_of(pseudo_labels[b]);
  });

  std::vector<LabelVerdict> out(pseudo_labels.size());
  std::vector<bool> claimed(novel_gt.size(), false);
  for (std::size_t idx : order) {
    const Candidate& c = pseudo_labels[idx];
    double best = 0.0;
    std::optional<std::size_t> best_gt;
    for (std::size_t g = 0; g < novel_gt.size(); ++g) {
      const double v = iou(c.box, novel_gt[g].box);
      if (v > best) {
        best = v;
        best_gt = g;
      }
    }
    LabelVerdict& lv = out[idx];
    lv.iou_to_gt = best;
    if (best_gt && best >= 0.5) {
      lv.matched_gt = best_gt;
      if (c.clip_class != novel_gt[*best_gt].category) {
        lv.verdict = Verdict::MIS_CLASS;
      } else if (!claimed[*best_gt]) {
        lv.verdict = Verdict::TP;
        claimed[*best_gt] = true;
      } else {
        lv.verdict = Verdict::NOISE;  // duplicate of a claimed GT
      }
    } else {
      lv.verdict = Verdict::NOISE;
      lv.matched_gt.reset();
    }
  }
  return out;
}

struct VerdictCounts {
  std::size_t tp = 0, misclass = 0, noise = 0;
  std::size_t total() const { return tp + misclass + noise; }
};

inline VerdictCounts count_verdicts(const std::vector<LabelVerdict>& verdicts) {
  VerdictCounts c;
  for (const auto& v : verdicts) {
    switch (v.verdict) {
      case Verdict::TP: ++c.tp; break;
      case Verdict::MIS_CLASS: ++c.misclass; break;
      case Verdict::NOISE: ++c.noise; break;
    }
  }
  return c;
}

/// Precision over the selection and recall over the novel GT. An empty
/// selection reports precision 1 (curve-plotting convention) and recall 0.
inline std::pair<double, double> precision_recall(
    const std::vector<LabelVerdict>& verdicts, std::size_t total_novel_gt) {
  const VerdictCounts c = count_verdicts(verdicts);
  const double precision =
      verdicts.empty() ? 1.0
                       : static_cast<double>(c.tp) / static_cast<double>(verdicts.size());
  const double recall =
      total_novel_gt == 0
          ? 0.0
          : static_cast<double>(c.tp) / static_cast<double>(total_novel_gt);
  return {precision, recall};
}

struct Decomposition {
  double tp_pct = 0.0, misclass_pct = 0.0, noise_pct = 0.0;
};

/// Percentage breakdown of a selection into TP / mis-class / noise.
inline Decomposition decompose(const std::vector<LabelVerdict>& verdicts) {
  const VerdictCounts c = count_verdicts(verdicts);
  Decomposition d;
  if (c.total() == 0) return d;
  const double n = static_cast<double>(c.total());
  d.tp_pct = 100.0 * c.tp / n;
  d.misclass_pct = 100.0 * c.misclass / n;
  d.noise_pct = 100.0 * c.noise / n;
  return d;
}

/// Spearman rank correlation with average ranks for ties. Returns nullopt
/// when either side is fully tied.
inline std::optional<double> spearman(const std::vector<double>& a,
                                      const std::vector<double>& b) {
  if (a.size() != b.size())
    throw ContractError("spearman: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) return std::nullopt;
  auto ranks = [](const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> ra = ranks(a), rb = ranks(b);
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double num = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0 || vb == 0) return std::nullopt;
  return num / std::sqrt(va * vb);
}

/// Spearman rank correlation between training-box weights and each box's IoU
/// to its best novel GT object, over NOVEL boxes. Undefined (nullopt) for
/// degenerate inputs so aggregates can exclude them.
inline std::optional<double> weight_quality(
    const std::vector<TrainingBox>& training_boxes,
    const std::vector<SceneObject>& novel_gt) {
  std::vector<double> weights, ious;
  for (const auto& tb : training_boxes) {
    if (tb.origin != Origin::NOVEL) continue;
    double best = 0.0;
    for (const auto& gt : novel_gt) best = std::max(best, iou(tb.box, gt.box));
    weights.push_back(tb.weight);
    ious.push_back(best);
  }
  if (weights.size() < 2) return std::nullopt;
  return spearman(weights, ious);
}

}  // namespace ovmine
