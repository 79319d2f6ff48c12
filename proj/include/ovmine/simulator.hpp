#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ovmine/assignment.hpp"
#include "ovmine/errors.hpp"
#include "ovmine/evaluation.hpp"
#include "ovmine/geometry.hpp"
#include "ovmine/mining.hpp"
#include "ovmine/rng.hpp"
#include "ovmine/scoring.hpp"

namespace ovmine {

/// Parametric VLM: score distributions for correctly classified novel crops,
/// wrongly classified novel crops, and noise regions. The noise distribution
/// models CLIP's confident predictions on boxes that contain no valid object.
struct SimVLM {
  double misclass_rate = 0.5;  // P(wrong novel class | true novel crop)
  double true_mu = 0.88, true_sd = 0.07;
  double wrong_mu = 0.685, wrong_sd = 0.06;
  double noise_mu = 0.75, noise_sd = 0.06;
  std::uint64_t seed = 0;
};

/// Parametric detector: skill interpolates the region embedding between a
/// flat confusion template and the true-category template. Noise boxes lean
/// toward the background template, which is exactly the signal online mining
/// exploits.
struct SimDetector {
  double skill = 0.0;          // convergence parameter in [0,1]
  double logit_scale = 5.0;    // magnitude of the true-category logit
  double embed_noise = 0.5;    // per-logit noise, weak view
  double strong_extra = 0.75;  // additional noise on the strong view
  std::uint64_t seed = 0;
};

enum class View { WEAK, STRONG };

/// Synthetic world parameters: category counts, per-scene object and noise
/// ranges, proposal jitter, and the skill feedback rate.
struct WorldConfig {
  double canvas_w = 640, canvas_h = 640;
  std::size_t num_base = 8, num_novel = 4;
  std::size_t base_count_min = 2, base_count_max = 5;
  std::size_t novel_count_min = 1, novel_count_max = 3;
  std::size_t noise_count_min = 14, noise_count_max = 21;
  double object_size_min = 60, object_size_max = 160;
  std::size_t proposals_per_novel_min = 1, proposals_per_novel_max = 2;
  std::size_t train_jitter_per_object = 3;
  std::size_t train_background_boxes = 6;
  std::size_t num_scenes = 144;
  double skill_rate = 0.002;
  SimVLM vlm;
  SimDetector detector;

  void validate() const {
    if (num_base == 0 || num_novel == 0)
      throw ConfigError("WorldConfig: need at least one base and one novel category");
    if (canvas_w <= 0 || canvas_h <= 0)
      throw ConfigError("WorldConfig: canvas must have positive size");
    if (base_count_min > base_count_max || novel_count_min > novel_count_max ||
        noise_count_min > noise_count_max ||
        proposals_per_novel_min > proposals_per_novel_max)
      throw ConfigError("WorldConfig: count range min exceeds max");
    if (!(object_size_min > 0 && object_size_min <= object_size_max))
      throw ConfigError("WorldConfig: invalid object size range");
    if (num_scenes == 0) throw ConfigError("WorldConfig: num_scenes must be > 0");
    if (!(vlm.misclass_rate >= 0 && vlm.misclass_rate <= 1))
      throw ConfigError("WorldConfig: misclass_rate must be in [0,1]");
    if (!(skill_rate >= 0)) throw ConfigError("WorldConfig: skill_rate must be >= 0");
  }
};

/// One synthetic image: objects (base objects are the visible annotations,
/// novel objects are withheld) plus noise regions cut from object parts and
/// background context.
struct Scene {
  std::uint64_t image_id = 0;
  double canvas_w = 0, canvas_h = 0;
  std::vector<SceneObject> objects;
  std::vector<std::size_t> base_annotation_idx;  // objects with base category
  std::vector<std::size_t> novel_idx;            // hidden novel objects
  std::vector<BBox> noise_regions;

  std::vector<std::pair<BBox, std::string>> base_gt() const {
    std::vector<std::pair<BBox, std::string>> out;
    out.reserve(base_annotation_idx.size());
    for (std::size_t i : base_annotation_idx)
      out.emplace_back(objects[i].box, objects[i].category);
    return out;
  }
  std::vector<SceneObject> novel_gt() const {
    std::vector<SceneObject> out;
    out.reserve(novel_idx.size());
    for (std::size_t i : novel_idx) out.push_back(objects[i]);
    return out;
  }
};

/// Category space with unit one-hot text embeddings, background on the last
/// axis. Names are base00.., novel00...
inline CategorySpace make_category_space(const WorldConfig& world) {
  const std::size_t nc = world.num_base + world.num_novel;
  std::vector<std::string> base, novel;
  char buf[16];
  for (std::size_t i = 0; i < world.num_base; ++i) {
    std::snprintf(buf, sizeof(buf), "base%02zu", i);
    base.emplace_back(buf);
  }
  for (std::size_t i = 0; i < world.num_novel; ++i) {
    std::snprintf(buf, sizeof(buf), "novel%02zu", i);
    novel.emplace_back(buf);
  }
  std::vector<std::vector<double>> embs(nc, std::vector<double>(nc + 1, 0.0));
  for (std::size_t i = 0; i < nc; ++i) embs[i][i] = 1.0;
  std::vector<double> bg(nc + 1, 0.0);
  bg[nc] = 1.0;
  return CategorySpace(std::move(base), std::move(novel), std::move(embs),
                       std::move(bg));
}

namespace detail {

inline BBox random_object_box(std::mt19937_64& rng, const WorldConfig& w) {
  std::uniform_real_distribution<double> size(w.object_size_min,
                                              w.object_size_max);
  const double bw = size(rng), bh = size(rng);
  std::uniform_real_distribution<double> cx(bw / 2, w.canvas_w - bw / 2);
  std::uniform_real_distribution<double> cy(bh / 2, w.canvas_h - bh / 2);
  const double x = cx(rng), y = cy(rng);
  return BBox(x - bw / 2, y - bh / 2, x + bw / 2, y + bh / 2);
}

inline std::size_t random_count(std::mt19937_64& rng, std::size_t lo,
                                std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// Sub-box of an object box covering 35-60% of each dimension; its IoU with
/// the parent stays below 0.5, so it is noise under the TP rule.
inline BBox part_box(std::mt19937_64& rng, const BBox& obj) {
  std::uniform_real_distribution<double> frac(0.35, 0.6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double fw = frac(rng) * obj.width();
  const double fh = frac(rng) * obj.height();
  const double ox = obj.x1 + unit(rng) * (obj.width() - fw);
  const double oy = obj.y1 + unit(rng) * (obj.height() - fh);
  return BBox(ox, oy, ox + fw, oy + fh);
}

inline double clamp(double v, double lo, double hi) {
  return std::min(hi, std::max(lo, v));
}

inline BBox jitter_box(std::mt19937_64& rng, const BBox& b, double shift,
                       double scale_lo, double scale_hi) {
  std::uniform_real_distribution<double> sh(-shift, shift);
  std::uniform_real_distribution<double> sc(scale_lo, scale_hi);
  const double cx = 0.5 * (b.x1 + b.x2) + sh(rng) * b.width();
  const double cy = 0.5 * (b.y1 + b.y2) + sh(rng) * b.height();
  const double hw = 0.5 * b.width() * sc(rng);
  const double hh = 0.5 * b.height() * sc(rng);
  return BBox(cx - hw, cy - hh, cx + hw, cy + hh);
}

}  // namespace detail

/// Deterministic scene generation: every draw comes from named substreams of
/// (root_seed, image_id).
inline Scene generate_scene(const WorldConfig& world, std::uint64_t root_seed,
                            std::uint64_t image_id) {
  world.validate();
  Scene scene;
  scene.image_id = image_id;
  scene.canvas_w = world.canvas_w;
  scene.canvas_h = world.canvas_h;

  auto rng = make_stream(root_seed, "scene", image_id);
  const std::size_t n_base =
      detail::random_count(rng, world.base_count_min, world.base_count_max);
  const std::size_t n_novel =
      detail::random_count(rng, world.novel_count_min, world.novel_count_max);
  const std::size_t n_noise =
      detail::random_count(rng, world.noise_count_min, world.noise_count_max);

  std::uniform_int_distribution<std::size_t> base_cat(0, world.num_base - 1);
  std::uniform_int_distribution<std::size_t> novel_cat(0, world.num_novel - 1);
  char buf[16];
  for (std::size_t i = 0; i < n_base; ++i) {
    std::snprintf(buf, sizeof(buf), "base%02zu", base_cat(rng));
    scene.base_annotation_idx.push_back(scene.objects.size());
    scene.objects.push_back({detail::random_object_box(rng, world), buf});
  }
  for (std::size_t i = 0; i < n_novel; ++i) {
    std::snprintf(buf, sizeof(buf), "novel%02zu", novel_cat(rng));
    scene.novel_idx.push_back(scene.objects.size());
    scene.objects.push_back({detail::random_object_box(rng, world), buf});
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < n_noise; ++i) {
    BBox nb;
    if (!scene.objects.empty() && unit(rng) < 0.5) {
      // an object part, e.g. a leg or a torso fragment
      std::uniform_int_distribution<std::size_t> pick(0, scene.objects.size() - 1);
      nb = detail::part_box(rng, scene.objects[pick(rng)].box);
    } else {
      // off-object context crop; keep it clear of the hidden novel objects
      for (int attempt = 0; attempt < 32; ++attempt) {
        std::uniform_real_distribution<double> size(30.0, 100.0);
        const double bw = size(rng), bh = size(rng);
        std::uniform_real_distribution<double> ox(0.0, world.canvas_w - bw);
        std::uniform_real_distribution<double> oy(0.0, world.canvas_h - bh);
        const double x = ox(rng), y = oy(rng);
        nb = BBox(x, y, x + bw, y + bh);
        bool clear = true;
        for (std::size_t gi : scene.novel_idx)
          if (iou(nb, scene.objects[gi].box) >= 0.35) {
            clear = false;
            break;
          }
        if (clear) break;
      }
    }
    scene.noise_regions.push_back(nb);
  }
  return scene;
}

/// Candidate proposal boxes for the pseudo-label pipeline: jittered copies of
/// the hidden novel objects plus every noise region. Stands in for the
/// class-agnostic proposal generator.
inline std::vector<BBox> candidate_proposals(const Scene& scene,
                                             const WorldConfig& world,
                                             std::uint64_t root_seed) {
  auto rng = make_stream(root_seed, "cand-prop", scene.image_id);
  std::vector<BBox> out;
  for (std::size_t gi : scene.novel_idx) {
    const BBox& obj = scene.objects[gi].box;
    const std::size_t k = detail::random_count(rng, world.proposals_per_novel_min,
                                               world.proposals_per_novel_max);
    for (std::size_t j = 0; j < k; ++j) {
      // Tight jitter: any two proposals on the same object overlap above the
      // NMS threshold, so pre-assignment keeps at most one of them.
      BBox b = obj;
      for (int attempt = 0; attempt < 16; ++attempt) {
        b = detail::jitter_box(rng, obj, 0.05, 0.94, 1.08);
        if (iou(b, obj) >= 0.75) break;
      }
      out.push_back(b);
    }
  }
  for (const BBox& nb : scene.noise_regions) out.push_back(nb);
  return out;
}

/// Per-proposal VLM score distributions over the novel categories. Proposals
/// that cover a hidden novel object draw high top-1 scores on the true class
/// (or, with misclass_rate, a lower-scored wrong class); noise proposals draw
/// from the noise confusion distribution on a random novel class.
inline std::vector<RawCandidate> vlm_score(const Scene& scene,
                                           const std::vector<BBox>& proposals,
                                           const SimVLM& vlm,
                                           const CategorySpace& cats) {
  const std::size_t nn = cats.num_novel();
  if (nn == 0) throw ConfigError("vlm_score: no novel categories");
  const double floor = std::max(0.3, 1.0 / static_cast<double>(nn) + 0.02);
  std::vector<RawCandidate> out;
  out.reserve(proposals.size());
  for (std::size_t p = 0; p < proposals.size(); ++p) {
    auto rng = make_stream(vlm.seed, "vlm", scene.image_id, p);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    double best = 0.0;
    std::size_t best_gt = 0;
    for (std::size_t gi : scene.novel_idx) {
      const double v = iou(proposals[p], scene.objects[gi].box);
      if (v > best) {
        best = v;
        best_gt = gi;
      }
    }

    std::size_t top_class;
    double mu, sd;
    if (best >= 0.5) {
      const std::string& true_name = scene.objects[best_gt].category;
      std::size_t true_idx = 0;
      for (std::size_t i = 0; i < nn; ++i)
        if (cats.novel_names[i] == true_name) true_idx = i;
      if (unit(rng) < vlm.misclass_rate && nn > 1) {
        std::uniform_int_distribution<std::size_t> other(0, nn - 2);
        std::size_t pick = other(rng);
        top_class = pick >= true_idx ? pick + 1 : pick;
        mu = vlm.wrong_mu;
        sd = vlm.wrong_sd;
      } else {
        top_class = true_idx;
        mu = vlm.true_mu;
        sd = vlm.true_sd;
      }
    } else {
      std::uniform_int_distribution<std::size_t> any(0, nn - 1);
      top_class = any(rng);
      mu = vlm.noise_mu;
      sd = vlm.noise_sd;
    }
    std::normal_distribution<double> score(mu, sd);
    const double s = detail::clamp(score(rng), floor, 0.995);

    RawCandidate rc;
    rc.box = proposals[p];
    const double rest = nn > 1 ? (1.0 - s) / static_cast<double>(nn - 1) : 0.0;
    for (std::size_t i = 0; i < nn; ++i)
      rc.scores.emplace_back(cats.novel_names[i], i == top_class ? s : rest);
    out.push_back(std::move(rc));
  }
  return out;
}

/// Detector forward pass: embedding = (1-skill) * confusion template +
/// skill * true-category template + view noise. A box's true category is its
/// best-IoU object's class when that IoU reaches 0.5, otherwise background.
/// Noise is frozen per (seed, image, tag, box index, view) so repeated
/// evaluations at the same skill are identical.
inline std::vector<RegionEmbedding> detector_embed(
    const Scene& scene, const std::vector<BBox>& boxes, const SimDetector& det,
    View view, const CategorySpace& cats, std::string_view tag = "cand") {
  if (!(det.skill >= 0 && det.skill <= 1))
    throw ConfigError("detector_embed: skill must be in [0,1]");
  const std::size_t nc = cats.num_categories();
  const double sigma =
      det.embed_noise + (view == View::STRONG ? det.strong_extra : 0.0);
  std::vector<RegionEmbedding> out;
  out.reserve(boxes.size());
  for (std::size_t bi = 0; bi < boxes.size(); ++bi) {
    double best = 0.0;
    std::size_t best_obj = 0;
    for (std::size_t oi = 0; oi < scene.objects.size(); ++oi) {
      const double v = iou(boxes[bi], scene.objects[oi].box);
      if (v > best) {
        best = v;
        best_obj = oi;
      }
    }
    std::size_t truth = nc;  // background
    if (best >= 0.5) {
      const std::string& name = scene.objects[best_obj].category;
      for (std::size_t j = 0; j < nc; ++j)
        if (cats.name(j) == name) {
          truth = j;
          break;
        }
    }
    auto rng = make_stream(det.seed ^ fnv1a(tag), "det-embed",
                           scene.image_id * 2 + (view == View::STRONG ? 1 : 0),
                           bi);
    std::normal_distribution<double> noise(0.0, 1.0);
    RegionEmbedding e;
    e.vector.resize(nc + 1);
    for (std::size_t j = 0; j <= nc; ++j) {
      e.vector[j] = (1.0 - det.skill) * 1.0 +
                    det.skill * (j == truth ? det.logit_scale : 0.0) +
                    sigma * noise(rng);
    }
    out.push_back(std::move(e));
  }
  return out;
}

/// Training proposals: jittered copies of every object (the unbalanced
/// overlap population that motivates reweighting) plus random background
/// boxes. Fixed per scene.
inline std::vector<BBox> training_proposals(const Scene& scene,
                                            const WorldConfig& world,
                                            std::uint64_t root_seed) {
  auto rng = make_stream(root_seed, "train-prop", scene.image_id);
  std::vector<BBox> out;
  for (const auto& obj : scene.objects) {
    for (std::size_t j = 0; j < world.train_jitter_per_object; ++j)
      out.push_back(detail::jitter_box(rng, obj.box, 0.25, 0.7, 1.3));
  }
  for (std::size_t j = 0; j < world.train_background_boxes; ++j) {
    std::uniform_real_distribution<double> size(40.0, 120.0);
    const double bw = size(rng), bh = size(rng);
    std::uniform_real_distribution<double> ox(0.0, world.canvas_w - bw);
    std::uniform_real_distribution<double> oy(0.0, world.canvas_h - bh);
    const double x = ox(rng), y = oy(rng);
    out.push_back(BBox(x, y, x + bw, y + bh));
  }
  return out;
}

}  // namespace ovmine
