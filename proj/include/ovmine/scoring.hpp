#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "ovmine/errors.hpp"

namespace ovmine {

/// Base and novel category names plus one embedding vector per category and
/// one background vector. Category order is base names first, then novel
/// names; the background slot is kept separately.
struct CategorySpace {
  std::vector<std::string> base_names;
  std::vector<std::string> novel_names;
  std::vector<std::vector<double>> embeddings;  // base..., novel...
  std::vector<double> bg_embedding;
  std::size_t dim = 0;

  CategorySpace() = default;
  CategorySpace(std::vector<std::string> base, std::vector<std::string> novel,
                std::vector<std::vector<double>> embs, std::vector<double> bg)
      : base_names(std::move(base)),
        novel_names(std::move(novel)),
        embeddings(std::move(embs)),
        bg_embedding(std::move(bg)),
        dim(bg_embedding.size()) {
    std::unordered_set<std::string> seen(base_names.begin(), base_names.end());
    for (const auto& n : novel_names)
      if (seen.count(n))
        throw ConfigError("CategorySpace: base and novel sets must be disjoint");
    if (embeddings.size() != base_names.size() + novel_names.size())
      throw ConfigError("CategorySpace: one embedding required per category");
    auto check = [&](const std::vector<double>& v) {
      if (v.size() != dim)
        throw ConfigError("CategorySpace: embedding dimension mismatch");
      for (double x : v)
        if (!std::isfinite(x))
          throw ConfigError("CategorySpace: non-finite embedding entry");
    };
    check(bg_embedding);
    for (const auto& e : embeddings) check(e);
  }

  std::size_t num_categories() const { return embeddings.size(); }
  std::size_t num_base() const { return base_names.size(); }
  std::size_t num_novel() const { return novel_names.size(); }
  bool is_novel(std::size_t cat_index) const {
    return cat_index >= base_names.size();
  }
  const std::string& name(std::size_t cat_index) const {
    return cat_index < base_names.size()
               ? base_names[cat_index]
               : novel_names[cat_index - base_names.size()];
  }
};

/// Region visual embedding produced by a detector forward pass.
struct RegionEmbedding {
  std::vector<double> vector;
};

/// Softmax posterior over all categories plus background. probs[i] follows
/// CategorySpace order; the last entry is the background score.
struct ClassPosterior {
  std::vector<double> probs;

  double background() const { return probs.back(); }
  double category(std::size_t i) const { return probs[i]; }
};

/// Softmax over dot products of the region embedding against every category
/// embedding and the background embedding. Stabilized by max-logit
/// subtraction, which leaves the values unchanged.
inline ClassPosterior classify(const RegionEmbedding& r,
                               const CategorySpace& cats) {
  if (r.vector.size() != cats.dim)
    throw ConfigError("classify: embedding dimension mismatch");
  const std::size_t n = cats.num_categories();
  std::vector<double> logits(n + 1);
  for (std::size_t j = 0; j < n; ++j)
    logits[j] = std::inner_product(r.vector.begin(), r.vector.end(),
                                   cats.embeddings[j].begin(), 0.0);
  logits[n] = std::inner_product(r.vector.begin(), r.vector.end(),
                                 cats.bg_embedding.begin(), 0.0);
  const double m = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  ClassPosterior out;
  out.probs.resize(n + 1);
  for (std::size_t j = 0; j <= n; ++j) {
    out.probs[j] = std::exp(logits[j] - m);
    denom += out.probs[j];
  }
  for (double& p : out.probs) p /= denom;
  return out;
}

/// Probability mass the posterior places on the novel categories: the sum of
/// novel-category entries over the same denominator as classify.
inline double novelty_score(const RegionEmbedding& r,
                            const CategorySpace& cats) {
  if (cats.num_novel() == 0)
    throw ConfigError("novelty_score: category space has no novel categories");
  const ClassPosterior post = classify(r, cats);
  double z = 0.0;
  for (std::size_t j = cats.num_base(); j < cats.num_categories(); ++j)
    z += post.probs[j];
  return z;
}

/// Per-image max-normalization of novelty scores: each entry divided by the
/// maximum of the batch. The argmax element maps to exactly 1.
inline std::vector<double> max_norm(const std::vector<double>& z) {
  if (z.empty()) return {};
  for (double v : z)
    if (!(v > 0)) throw ContractError("max_norm: all inputs must be positive");
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] / m;
  return out;
}

/// Convex combination of the VLM top-1 score and the normalized novelty:
/// s = lambda * s_clip + (1 - lambda) * s_det.
inline double fuse(double s_clip, double s_det, double lambda) {
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in01(s_clip) || !in01(s_det) || !in01(lambda))
    throw ConfigError("fuse: all inputs must lie in [0,1]");
  return lambda * s_clip + (1.0 - lambda) * s_det;
}

}  // namespace ovmine
