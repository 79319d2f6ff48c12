#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "ovmine/geometry.hpp"

using namespace ovmine;

namespace {

BBox random_box(std::mt19937_64& rng, double lo = 0.0, double hi = 100.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  double x1 = u(rng), x2 = u(rng), y1 = u(rng), y2 = u(rng);
  if (x1 > x2) std::swap(x1, x2);
  if (y1 > y2) std::swap(y1, y2);
  return BBox(x1, y1, x2 + 1.0, y2 + 1.0);
}

/// Counting oracle: rasterize both boxes on a fine grid and count cells.
double iou_rasterized(const BBox& a, const BBox& b, double cell) {
  const double x_lo = std::min(a.x1, b.x1), x_hi = std::max(a.x2, b.x2);
  const double y_lo = std::min(a.y1, b.y1), y_hi = std::max(a.y2, b.y2);
  long long inter = 0, uni = 0;
  for (double x = x_lo + cell / 2; x < x_hi; x += cell) {
    for (double y = y_lo + cell / 2; y < y_hi; y += cell) {
      const bool in_a = x > a.x1 && x < a.x2 && y > a.y1 && y < a.y2;
      const bool in_b = x > b.x1 && x < b.x2 && y > b.y1 && y < b.y2;
      if (in_a && in_b) ++inter;
      if (in_a || in_b) ++uni;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Naive all-pairs NMS reference: repeatedly take the highest-scoring
/// remaining box and erase everything it overlaps too much.
std::vector<std::size_t> nms_naive(
    const std::vector<std::pair<BBox, double>>& boxes, double thr) {
  std::vector<bool> alive(boxes.size(), true);
  std::vector<std::size_t> kept;
  for (;;) {
    std::size_t best = boxes.size();
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (!alive[i]) continue;
      if (best == boxes.size() || boxes[i].second > boxes[best].second) best = i;
    }
    if (best == boxes.size()) break;
    kept.push_back(best);
    alive[best] = false;
    for (std::size_t i = 0; i < boxes.size(); ++i)
      if (alive[i] && iou(boxes[i].first, boxes[best].first) > thr)
        alive[i] = false;
  }
  return kept;
}

}  // namespace

TEST_CASE("BBox construction validates its corners") {
  CHECK_THROWS_AS(BBox(1, 0, 1, 2), ConfigError);
  CHECK_THROWS_AS(BBox(0, 2, 1, 2), ConfigError);
  CHECK_THROWS_AS(BBox(2, 0, 1, 2), ConfigError);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(BBox(0, 0, inf, 1), ConfigError);
  const BBox b(0, 1, 2, 4);
  CHECK(b.width() == 2.0);
  CHECK(b.height() == 3.0);
  CHECK(b.area() == 6.0);
}

TEST_CASE("iou on identical, disjoint, and partially overlapping boxes") {
  const BBox a(0, 0, 2, 2);
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, BBox(5, 5, 6, 6)) == 0.0);
  CHECK(iou(a, BBox(2, 0, 4, 2)) == 0.0);  // touching edges do not overlap

  // overlap 1, union 4 + 4 - 1 = 7
  const BBox c(1, 1, 3, 3);
  CHECK_THAT(iou(a, c), Catch::Matchers::WithinRel(1.0 / 7.0, 1e-12));
  CHECK_THAT(iou_rasterized(a, c, 0.01),
             Catch::Matchers::WithinAbs(1.0 / 7.0, 0.01));
}

TEST_CASE("iou matches the rasterization oracle on random boxes") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 20; ++t) {
    const BBox a = random_box(rng, 0, 20);
    const BBox b = random_box(rng, 0, 20);
    CHECK_THAT(iou(a, b), Catch::Matchers::WithinAbs(iou_rasterized(a, b, 0.05), 0.02));
    CHECK(iou(a, b) == iou(b, a));
    CHECK(iou(a, b) >= 0.0);
    CHECK(iou(a, b) <= 1.0);
  }
}

TEST_CASE("nms keeps the higher-scoring of two identical boxes") {
  const BBox b(0, 0, 2, 2);
  const auto kept = nms({{b, 0.8}, {b, 0.9}}, 0.5);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0] == 1);
}

TEST_CASE("nms validates its inputs") {
  CHECK_THROWS_AS(nms({{BBox(0, 0, 1, 1), 0.5}}, 0.0), ConfigError);
  CHECK_THROWS_AS(nms({{BBox(0, 0, 1, 1), 0.5}}, 1.5), ConfigError);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(nms({{BBox(0, 0, 1, 1), nan}}, 0.5), ConfigError);
  CHECK(nms({}, 0.5).empty());
}

TEST_CASE("nms equals the naive all-pairs reference on 1000 random boxes") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  std::vector<std::pair<BBox, double>> boxes;
  for (int i = 0; i < 1000; ++i)
    boxes.emplace_back(random_box(rng, 0, 60), score(rng));
  const auto fast = nms(boxes, 0.5);
  const auto slow = nms_naive(boxes, 0.5);
  CHECK(std::set<std::size_t>(fast.begin(), fast.end()) ==
        std::set<std::size_t>(slow.begin(), slow.end()));
}

TEST_CASE("nms kept set is invariant under input permutation") {
  std::mt19937_64 rng(13);
  std::vector<std::pair<BBox, double>> boxes;
  for (int i = 0; i < 60; ++i)
    boxes.emplace_back(random_box(rng, 0, 30), (i + 1) * 0.01);  // distinct scores

  auto kept_boxes = [&](const std::vector<std::pair<BBox, double>>& in) {
    std::multiset<double> out;  // identify boxes by their distinct scores
    for (std::size_t k : nms(in, 0.5)) out.insert(in[k].second);
    return out;
  };
  const auto reference = kept_boxes(boxes);
  for (int t = 0; t < 5; ++t) {
    std::shuffle(boxes.begin(), boxes.end(), rng);
    CHECK(kept_boxes(boxes) == reference);
  }
}

TEST_CASE("match_targets maps proposals to their best target at fg_iou") {
  const std::vector<BBox> targets{BBox(0, 0, 10, 10), BBox(20, 20, 30, 30)};
  const std::vector<BBox> proposals{
      BBox(0, 0, 10, 10),    // exact match of target 0
      BBox(21, 21, 31, 31),  // strong overlap with target 1
      BBox(50, 50, 60, 60),  // background
      BBox(0, 0, 10, 4.9),   // IoU 0.49 with target 0 -> background
  };
  const auto m = match_targets(proposals, targets, 0.5);
  REQUIRE(m.size() == 4);
  CHECK(m[0] == 0);
  CHECK(m[1] == 1);
  CHECK_FALSE(m[2].has_value());
  CHECK_FALSE(m[3].has_value());
  CHECK_THROWS_AS(match_targets(proposals, targets, 0.0), ConfigError);
  CHECK_THROWS_AS(match_targets(proposals, targets, 1.0), ConfigError);
}

TEST_CASE("match_targets equals the exhaustive argmax oracle") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 20; ++t) {
    std::vector<BBox> proposals, targets;
    for (int i = 0; i < 50; ++i) proposals.push_back(random_box(rng, 0, 40));
    for (int i = 0; i < 10; ++i) targets.push_back(random_box(rng, 0, 40));
    const auto got = match_targets(proposals, targets, 0.5);
    for (std::size_t p = 0; p < proposals.size(); ++p) {
      double best = 0.0;
      std::optional<std::size_t> best_t;
      for (std::size_t k = 0; k < targets.size(); ++k) {
        const double v = iou(proposals[p], targets[k]);
        if (v > best) {
          best = v;
          best_t = k;
        }
      }
      if (best >= 0.5) {
        CHECK(got[p] == best_t);
      } else {
        CHECK_FALSE(got[p].has_value());
      }
    }
  }
}
