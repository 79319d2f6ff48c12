#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ovmine/assignment.hpp"
#include "ovmine/errors.hpp"
#include "ovmine/mining.hpp"
#include "ovmine/run.hpp"
#include "ovmine/simulator.hpp"

namespace ovmine {

inline constexpr int kSchemaVersion = 1;

using json = nlohmann::json;

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// ---- box helpers ----------------------------------------------------------

inline json box_to_json(const BBox& b) {
  return json::array({b.x1, b.y1, b.x2, b.y2});
}

inline BBox box_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4)
    throw ConfigError(where + ": box must be [x1,y1,x2,y2]");
  try {
    return BBox(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                j[3].get<double>());
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

// ---- candidate files ------------------------------------------------------

/// One image's worth of candidates for file exchange.
struct ImageCandidates {
  std::uint64_t image_id = 0;
  std::vector<RawCandidate> raw;            // full class distributions
  std::vector<Candidate> mined;             // set when reading mined output
  std::vector<bool> selected;               // parallel to mined
};

/// Candidate file: array of {image_id, candidates:[{box, scores}]}.
inline json candidates_to_json(const std::vector<ImageCandidates>& images) {
  json out = json::array();
  for (const auto& img : images) {
    json cands = json::array();
    for (const auto& rc : img.raw) {
      json scores = json::object();
      for (const auto& [cls, p] : rc.scores) scores[cls] = p;
      cands.push_back({{"box", box_to_json(rc.box)}, {"scores", scores}});
    }
    out.push_back({{"image_id", img.image_id}, {"candidates", cands}});
  }
  return out;
}

inline std::vector<ImageCandidates> candidates_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("candidates file: top level must be an array");
  std::vector<ImageCandidates> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& rec = j[i];
    const std::string where = "candidates record " + std::to_string(i);
    if (!rec.contains("image_id") || !rec.contains("candidates"))
      throw ConfigError(where + ": missing image_id or candidates");
    ImageCandidates img;
    img.image_id = rec["image_id"].get<std::uint64_t>();
    for (std::size_t c = 0; c < rec["candidates"].size(); ++c) {
      const json& cj = rec["candidates"][c];
      const std::string cwhere = where + ", candidate " + std::to_string(c);
      if (!cj.contains("box") || !cj.contains("scores"))
        throw ConfigError(cwhere + ": missing box or scores");
      RawCandidate rc;
      rc.box = box_from_json(cj["box"], cwhere);
      for (const auto& [cls, p] : cj["scores"].items())
        rc.scores.emplace_back(cls, p.get<double>());
      if (rc.scores.empty())
        throw ConfigError(cwhere + ": empty scores");

      // mined outputs carry per-candidate mining results
      if (cj.contains("selected")) {
        Candidate cand;
        cand.box = rc.box;
        std::size_t best = 0;
        for (std::size_t k = 1; k < rc.scores.size(); ++k)
          if (rc.scores[k].second > rc.scores[best].second) best = k;
        cand.clip_class = rc.scores[best].first;
        cand.clip_score = rc.scores[best].second;
        if (cj.contains("novelty") && !cj["novelty"].is_null())
          cand.novelty = cj["novelty"].get<double>();
        if (cj.contains("fused") && !cj["fused"].is_null())
          cand.fused = cj["fused"].get<double>();
        img.mined.push_back(std::move(cand));
        img.selected.push_back(cj["selected"].get<bool>());
      }
      img.raw.push_back(std::move(rc));
    }
    out.push_back(std::move(img));
  }
  return out;
}

/// Mined-label output: candidate shape plus {novelty, fused, selected}.
inline json mined_to_json(std::uint64_t image_id,
                          const std::vector<Candidate>& candidates,
                          const std::vector<bool>& selected,
                          const std::vector<std::string>& novel_names) {
  json cands = json::array();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Candidate& c = candidates[i];
    json scores = json::object();
    const double rest = novel_names.size() > 1
                            ? (1.0 - c.clip_score) / (novel_names.size() - 1)
                            : 0.0;
    for (const auto& n : novel_names)
      scores[n] = (n == c.clip_class) ? c.clip_score : rest;
    json rec = {{"box", box_to_json(c.box)},
                {"scores", scores},
                {"novelty", c.novelty ? json(*c.novelty) : json()},
                {"fused", c.fused ? json(*c.fused) : json()},
                {"selected", selected[i]}};
    cands.push_back(std::move(rec));
  }
  return {{"image_id", image_id}, {"candidates", cands}};
}

// ---- ground-truth scene files ---------------------------------------------

inline json scenes_to_json(const std::vector<Scene>& scenes) {
  json out = json::array();
  for (const auto& s : scenes) {
    json objects = json::array();
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      const bool is_novel =
          std::find(s.novel_idx.begin(), s.novel_idx.end(), i) != s.novel_idx.end();
      objects.push_back({{"box", box_to_json(s.objects[i].box)},
                         {"category", s.objects[i].category},
                         {"role", is_novel ? "novel" : "base"}});
    }
    json noise = json::array();
    for (const auto& nb : s.noise_regions) noise.push_back(box_to_json(nb));
    out.push_back({{"image_id", s.image_id},
                   {"canvas", json::array({s.canvas_w, s.canvas_h})},
                   {"objects", objects},
                   {"noise_regions", noise}});
  }
  return out;
}

inline std::vector<Scene> scenes_from_json(const json& j) {
  if (!j.is_array())
    throw ConfigError("ground-truth file: top level must be an array");
  std::vector<Scene> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& rec = j[i];
    const std::string where = "scene record " + std::to_string(i);
    if (!rec.contains("image_id") || !rec.contains("objects"))
      throw ConfigError(where + ": missing image_id or objects");
    Scene s;
    s.image_id = rec["image_id"].get<std::uint64_t>();
    if (rec.contains("canvas")) {
      s.canvas_w = rec["canvas"][0].get<double>();
      s.canvas_h = rec["canvas"][1].get<double>();
    }
    for (std::size_t o = 0; o < rec["objects"].size(); ++o) {
      const json& oj = rec["objects"][o];
      const std::string owhere = where + ", object " + std::to_string(o);
      if (!oj.contains("box") || !oj.contains("category") || !oj.contains("role"))
        throw ConfigError(owhere + ": missing box, category, or role");
      SceneObject obj{box_from_json(oj["box"], owhere),
                      oj["category"].get<std::string>()};
      const std::string role = oj["role"].get<std::string>();
      if (role == "novel")
        s.novel_idx.push_back(s.objects.size());
      else if (role == "base")
        s.base_annotation_idx.push_back(s.objects.size());
      else
        throw ConfigError(owhere + ": role must be base or novel");
      s.objects.push_back(std::move(obj));
    }
    if (rec.contains("noise_regions"))
      for (const auto& nb : rec["noise_regions"])
        s.noise_regions.push_back(box_from_json(nb, where + " noise region"));
    out.push_back(std::move(s));
  }
  return out;
}

// ---- assignment dump ------------------------------------------------------

inline json assignment_to_json(std::uint64_t image_id,
                               const std::vector<TrainingBox>& boxes) {
  json arr = json::array();
  for (const auto& tb : boxes) {
    arr.push_back(
        {{"box", box_to_json(tb.box)},
         {"origin", origin_name(tb.origin)},
         {"target_index",
          tb.target_index ? json(*tb.target_index) : json()},
         {"b", tb.background_score},
         {"s", tb.pseudo_confidence ? json(*tb.pseudo_confidence) : json()},
         {"w", tb.weight}});
  }
  return {{"image_id", image_id}, {"boxes", arr}};
}

// ---- metrics CSV ----------------------------------------------------------

inline std::string metrics_csv_header() {
  return "schema_version,seed,iteration,phase,num_selected,tp_count,"
         "misclass_count,noise_count,precision,recall,"
         "mean_weight_rank_correlation\n";
}

inline std::string metrics_csv_row(std::uint64_t seed, const StepMetrics& m) {
  std::string row;
  row += std::to_string(kSchemaVersion);
  row += ',';
  row += std::to_string(seed);
  row += ',';
  row += std::to_string(m.iteration);
  row += ',';
  row += phase_name(m.phase);
  row += ',';
  row += std::to_string(m.num_selected);
  row += ',';
  row += std::to_string(m.tp_count);
  row += ',';
  row += std::to_string(m.misclass_count);
  row += ',';
  row += std::to_string(m.noise_count);
  row += ',';
  row += fmt_double(m.precision);
  row += ',';
  row += fmt_double(m.recall);
  row += ',';
  if (m.mean_weight_rank_correlation)
    row += fmt_double(*m.mean_weight_rank_correlation);
  row += '\n';
  return row;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << text;
  if (!out) throw ConfigError("write failed: " + path);
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace ovmine
