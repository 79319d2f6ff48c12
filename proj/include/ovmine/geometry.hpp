#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "ovmine/errors.hpp"

namespace ovmine {

/// Axis-aligned box with corner representation. Coordinates are real-valued
/// canvas units; x1 < x2 and y1 < y2 are enforced at construction.
struct BBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  BBox() = default;
  BBox(double x1_, double y1_, double x2_, double y2_)
      : x1(x1_), y1(y1_), x2(x2_), y2(y2_) {
    if (!(std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
          std::isfinite(y2)))
      throw ConfigError("BBox: non-finite coordinate");
    if (!(x1 < x2 && y1 < y2))
      throw ConfigError("BBox: requires x1 < x2 and y1 < y2");
  }

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }

  bool operator==(const BBox& o) const {
    return x1 == o.x1 && y1 == o.y1 && x2 == o.x2 && y2 == o.y2;
  }
};

/// Intersection-over-union. Symmetric, in [0,1], 0 for disjoint boxes.
inline double iou(const BBox& a, const BBox& b) {
  const double ix1 = std::max(a.x1, b.x1);
  const double iy1 = std::max(a.y1, b.y1);
  const double ix2 = std::min(a.x2, b.x2);
  const double iy2 = std::min(a.y2, b.y2);
  const double iw = ix2 - ix1;
  const double ih = iy2 - iy1;
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

/// Greedy descending-score NMS. Returns indices of kept boxes, in the order
/// they were kept. A box is suppressed when its IoU with an already-kept box
/// exceeds iou_threshold. Equal scores are ordered by lower input index, so
/// the kept set is deterministic for any input order.
inline std::vector<std::size_t> nms(
    const std::vector<std::pair<BBox, double>>& boxes, double iou_threshold) {
  if (!(iou_threshold > 0 && iou_threshold <= 1))
    throw ConfigError("nms: iou_threshold must be in (0,1]");
  for (const auto& [box, score] : boxes)
    if (!std::isfinite(score)) throw ConfigError("nms: non-finite score");

  std::vector<std::size_t> order(boxes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return boxes[a].second > boxes[b].second;
  });

  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    bool suppressed = false;
    for (std::size_t k : kept) {
      if (iou(boxes[idx].first, boxes[k].first) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(idx);
  }
  return kept;
}

/// Maps each proposal to its maximum-IoU target when that IoU reaches fg_iou,
/// otherwise to nullopt. Ties between targets break toward the lower index.
inline std::vector<std::optional<std::size_t>> match_targets(
    const std::vector<BBox>& proposals, const std::vector<BBox>& targets,
    double fg_iou) {
  if (!(fg_iou > 0 && fg_iou < 1))
    throw ConfigError("match_targets: fg_iou must be in (0,1)");
  std::vector<std::optional<std::size_t>> out(proposals.size());
  for (std::size_t p = 0; p < proposals.size(); ++p) {
    double best = 0.0;
    std::optional<std::size_t> best_t;
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const double v = iou(proposals[p], targets[t]);
      if (v > best) {
        best = v;
        best_t = t;
      }
    }
    if (best_t && best >= fg_iou) out[p] = best_t;
  }
  return out;
}

}  // namespace ovmine
