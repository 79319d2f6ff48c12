#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <vector>

#include "ovmine/evaluation.hpp"

using namespace ovmine;

namespace {

Candidate label(BBox box, std::string cls, double fused) {
  Candidate c;
  c.box = box;
  c.clip_class = std::move(cls);
  c.clip_score = fused;
  c.fused = fused;
  return c;
}

/// Independent reference matcher: same greedy one-TP-per-GT rule written
/// without reusing any library helper.
std::vector<Verdict> judge_oracle(const std::vector<Candidate>& labels,
                                  const std::vector<SceneObject>& gt) {
  auto box_iou = [](const BBox& a, const BBox& b) {
    const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (w <= 0 || h <= 0) return 0.0;
    const double inter = w * h;
    const double ua = (a.x2 - a.x1) * (a.y2 - a.y1);
    const double ub = (b.x2 - b.x1) * (b.y2 - b.y1);
    return inter / (ua + ub - inter);
  };
  std::vector<std::size_t> order(labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return *labels[a].fused > *labels[b].fused;
  });
  std::vector<Verdict> out(labels.size(), Verdict::NOISE);
  std::vector<bool> used(gt.size(), false);
  for (std::size_t idx : order) {
    double best = 0.0;
    std::size_t best_g = gt.size();
    for (std::size_t g = 0; g < gt.size(); ++g) {
      const double v = box_iou(labels[idx].box, gt[g].box);
      if (v > best) {
        best = v;
        best_g = g;
      }
    }
    if (best_g == gt.size() || best < 0.5) continue;
    if (labels[idx].clip_class != gt[best_g].category)
      out[idx] = Verdict::MIS_CLASS;
    else if (!used[best_g]) {
      out[idx] = Verdict::TP;
      used[best_g] = true;
    }
  }
  return out;
}

/// Reference Spearman via Pearson on average ranks, written independently.
double spearman_oracle(std::vector<double> a, std::vector<double> b) {
  auto rank = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0, equal = 0;
      for (double x : v) {
        if (x < v[i]) ++less;
        if (x == v[i]) ++equal;
      }
      r[i] = less + (equal + 1.0) / 2.0;
    }
    return r;
  };
  const auto ra = rank(a), rb = rank(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double num = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  return num / std::sqrt(va * vb);
}

}  // namespace

TEST_CASE("judge classifies the three verdict kinds") {
  const std::vector<SceneObject> gt{{BBox(0, 0, 10, 10), "n0"},
                                    {BBox(30, 30, 40, 40), "n1"}};
  const std::vector<Candidate> labels{
      label(BBox(0, 0, 10, 10), "n0", 0.95),     // TP
      label(BBox(30, 30, 40, 40), "n0", 0.92),   // wrong class
      label(BBox(70, 70, 80, 80), "n0", 0.91),   // no overlap
      label(BBox(0, 0, 10, 4.9), "n0", 0.90),    // IoU 0.49 -> noise
  };
  const auto v = judge(labels, gt);
  REQUIRE(v.size() == 4);
  CHECK(v[0].verdict == Verdict::TP);
  CHECK(v[0].matched_gt == 0);
  CHECK(v[0].iou_to_gt == 1.0);
  CHECK(v[1].verdict == Verdict::MIS_CLASS);
  CHECK(v[1].matched_gt == 1);
  CHECK(v[2].verdict == Verdict::NOISE);
  CHECK_FALSE(v[2].matched_gt.has_value());
  CHECK(v[3].verdict == Verdict::NOISE);
}

TEST_CASE("judge lets the higher-scored duplicate claim the GT") {
  const std::vector<SceneObject> gt{{BBox(0, 0, 10, 10), "n0"}};
  const std::vector<Candidate> labels{
      label(BBox(0, 0, 10, 9), "n0", 0.91),   // lower score, listed first
      label(BBox(0, 0, 10, 10), "n0", 0.96),  // higher score claims the GT
  };
  const auto v = judge(labels, gt);
  CHECK(v[0].verdict == Verdict::NOISE);  // duplicate of a claimed GT
  CHECK(v[1].verdict == Verdict::TP);
}

TEST_CASE("judge falls back to clip_score when fused is unset") {
  const std::vector<SceneObject> gt{{BBox(0, 0, 10, 10), "n0"}};
  Candidate weak = label(BBox(0, 0, 10, 9), "n0", 0.0);
  weak.fused.reset();
  weak.clip_score = 0.8;
  Candidate strong = label(BBox(0, 0, 10, 10), "n0", 0.0);
  strong.fused.reset();
  strong.clip_score = 0.9;
  const auto v = judge({weak, strong}, gt);
  CHECK(v[0].verdict == Verdict::NOISE);
  CHECK(v[1].verdict == Verdict::TP);
}

TEST_CASE("judge matches the reference matcher on random scenes") {
  std::mt19937_64 rng(53);
  std::uniform_real_distribution<double> pos(0.0, 60.0), sz(5.0, 15.0),
      sc(0.5, 1.0);
  std::uniform_int_distribution<int> cls(0, 2);
  for (int t = 0; t < 1000; ++t) {
    std::vector<SceneObject> gt;
    for (int i = 0; i < 5; ++i) {
      const double x = pos(rng), y = pos(rng);
      gt.push_back({BBox(x, y, x + sz(rng), y + sz(rng)),
                    "n" + std::to_string(cls(rng))});
    }
    std::vector<Candidate> labels;
    for (int i = 0; i < 12; ++i) {
      // mix of jittered GT copies and random boxes
      BBox b = gt[i % gt.size()].box;
      if (i % 3 == 0) {
        const double x = pos(rng), y = pos(rng);
        b = BBox(x, y, x + sz(rng), y + sz(rng));
      } else {
        b = BBox(b.x1 + 1, b.y1 + 1, b.x2 + 1, b.y2 + 1);
      }
      labels.push_back(label(b, "n" + std::to_string(cls(rng)), sc(rng)));
    }
    const auto got = judge(labels, gt);
    const auto want = judge_oracle(labels, gt);
    for (std::size_t i = 0; i < labels.size(); ++i)
      CHECK(got[i].verdict == want[i]);

    // partition property: every label receives exactly one verdict
    const VerdictCounts c = count_verdicts(got);
    CHECK(c.total() == labels.size());
    // one-TP-per-GT property
    CHECK(c.tp <= gt.size());
  }
}

TEST_CASE("precision_recall on the counted example") {
  std::vector<LabelVerdict> v(10);
  for (int i = 0; i < 8; ++i) v[i].verdict = Verdict::TP;
  v[8].verdict = Verdict::MIS_CLASS;
  v[9].verdict = Verdict::NOISE;
  const auto [p, r] = precision_recall(v, 20);
  CHECK_THAT(p, Catch::Matchers::WithinRel(0.8, 1e-12));
  CHECK_THAT(r, Catch::Matchers::WithinRel(0.4, 1e-12));
}

TEST_CASE("precision_recall conventions for empty inputs") {
  const auto [p, r] = precision_recall({}, 5);
  CHECK(p == 1.0);
  CHECK(r == 0.0);
  std::vector<LabelVerdict> one(1);
  one[0].verdict = Verdict::TP;
  const auto [p2, r2] = precision_recall(one, 0);
  CHECK(p2 == 1.0);
  CHECK(r2 == 0.0);
}

TEST_CASE("decompose reports percentages") {
  std::vector<LabelVerdict> v(5);
  for (int i = 0; i < 3; ++i) v[i].verdict = Verdict::TP;
  v[3].verdict = Verdict::MIS_CLASS;
  v[4].verdict = Verdict::NOISE;
  const Decomposition d = decompose(v);
  CHECK_THAT(d.tp_pct, Catch::Matchers::WithinRel(60.0, 1e-12));
  CHECK_THAT(d.misclass_pct, Catch::Matchers::WithinRel(20.0, 1e-12));
  CHECK_THAT(d.noise_pct, Catch::Matchers::WithinRel(20.0, 1e-12));
  const Decomposition empty = decompose({});
  CHECK(empty.tp_pct == 0.0);
}

TEST_CASE("spearman endpoints and degenerate inputs") {
  const auto up = spearman({1, 2, 3, 4}, {10, 20, 30, 40});
  REQUIRE(up.has_value());
  CHECK_THAT(*up, Catch::Matchers::WithinRel(1.0, 1e-12));
  const auto down = spearman({1, 2, 3, 4}, {40, 30, 20, 10});
  REQUIRE(down.has_value());
  CHECK_THAT(*down, Catch::Matchers::WithinRel(-1.0, 1e-12));
  CHECK_FALSE(spearman({1, 1, 1}, {1, 2, 3}).has_value());
  CHECK_FALSE(spearman({0.5}, {0.5}).has_value());
  CHECK_THROWS_AS(spearman({1, 2}, {1, 2, 3}), ContractError);
}

TEST_CASE("spearman matches the reference oracle, ties included") {
  std::mt19937_64 rng(59);
  std::uniform_int_distribution<int> val(0, 6);  // small range forces ties
  for (int t = 0; t < 200; ++t) {
    std::vector<double> a(12), b(12);
    for (auto& x : a) x = val(rng);
    for (auto& x : b) x = val(rng);
    const auto got = spearman(a, b);
    if (!got) continue;  // fully tied draw
    CHECK_THAT(*got, Catch::Matchers::WithinAbs(spearman_oracle(a, b), 1e-12));
  }
}

TEST_CASE("weight_quality correlates weights with localization") {
  const std::vector<SceneObject> gt{{BBox(0, 0, 10, 10), "n0"}};
  auto tb = [](BBox box, double w) {
    TrainingBox t;
    t.box = box;
    t.origin = Origin::NOVEL;
    t.weight = w;
    return t;
  };
  // weights ordered exactly like IoU to the GT
  const auto good = weight_quality(
      {tb(BBox(0, 0, 10, 10), 0.9), tb(BBox(0, 0, 10, 7), 0.6),
       tb(BBox(0, 0, 10, 5), 0.3)},
      gt);
  REQUIRE(good.has_value());
  CHECK_THAT(*good, Catch::Matchers::WithinRel(1.0, 1e-12));

  // fewer than two NOVEL boxes is degenerate
  TrainingBox base;
  base.box = BBox(0, 0, 1, 1);
  base.origin = Origin::BASE;
  CHECK_FALSE(weight_quality({base, tb(BBox(0, 0, 10, 10), 0.5)}, gt).has_value());
}
