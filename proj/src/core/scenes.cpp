#include "core/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "core/rng.hpp"

namespace phg {

using nlohmann::json;

namespace {

constexpr double kPairMargin = 0.05;  // spatial predicates need this much daylight
constexpr double kMaxPairIou = 0.05;

struct Palette {
  std::vector<std::string> names;
  std::vector<std::array<uint8_t, 3>> rgb;
};

const Palette& palette() {
  static const Palette p = {
      {"red", "blue", "green", "yellow", "orange", "purple", "white", "black"},
      {{{220, 40, 40}},
       {{40, 60, 220}},
       {{40, 180, 60}},
       {{230, 220, 50}},
       {{240, 150, 40}},
       {{160, 60, 200}},
       {{245, 245, 245}},
       {{15, 15, 15}}},
  };
  return p;
}

const std::vector<ObjShape> kShapes = {ObjShape::square, ObjShape::circle, ObjShape::triangle};

struct Combo {
  int color;
  int shape;
  bool operator==(const Combo& o) const { return color == o.color && shape == o.shape; }
};

enum class Rel { left_of, right_of, above, below };

bool rel_holds(Rel r, const Box& a, const Box& b) {
  switch (r) {
    case Rel::left_of: return a.cx < b.cx;
    case Rel::right_of: return a.cx > b.cx;
    case Rel::above: return a.cy < b.cy;
    case Rel::below: return a.cy > b.cy;
  }
  return false;
}

// Signed margin by which the predicate holds; generation requires |margin|
// >= kPairMargin so strict center comparisons are never borderline.
double rel_margin(Rel r, const Box& a, const Box& b) {
  switch (r) {
    case Rel::left_of: return b.cx - a.cx;
    case Rel::right_of: return a.cx - b.cx;
    case Rel::above: return b.cy - a.cy;
    case Rel::below: return a.cy - b.cy;
  }
  return 0.0;
}

std::vector<std::string> rel_tokens(Rel r) {
  switch (r) {
    case Rel::left_of: return {"left", "of"};
    case Rel::right_of: return {"right", "of"};
    case Rel::above: return {"above"};
    case Rel::below: return {"below"};
  }
  return {};
}

Box corners_of(const Box& b, double& x1, double& y1, double& x2, double& y2) {
  x1 = b.cx - b.w / 2;
  y1 = b.cy - b.h / 2;
  x2 = b.cx + b.w / 2;
  y2 = b.cy + b.h / 2;
  return b;
}

Combo random_combo(Rng& rng) {
  return {rng.uniform_int(0, static_cast<int>(palette().names.size()) - 1),
          rng.uniform_int(0, static_cast<int>(kShapes.size()) - 1)};
}

Combo random_combo_excluding(Rng& rng, const std::vector<Combo>& taken) {
  for (int tries = 0; tries < 64; ++tries) {
    Combo c = random_combo(rng);
    bool clash = false;
    for (const auto& t : taken)
      if (c == t) clash = true;
    if (!clash) return c;
  }
  throw std::runtime_error("generate_scene: could not pick a fresh color-shape combination");
}

Box random_box(Rng& rng) {
  Box b;
  b.w = rng.uniform(0.16, 0.30);
  b.h = rng.uniform(0.16, 0.30);
  b.cx = rng.uniform(b.w / 2 + 0.02, 1.0 - b.w / 2 - 0.02);
  b.cy = rng.uniform(b.h / 2 + 0.02, 1.0 - b.h / 2 - 0.02);
  return b;
}

bool place_objects(Rng& rng, std::vector<SceneObject>& objects) {
  for (auto& obj : objects) {
    bool placed = false;
    for (int tries = 0; tries < 60 && !placed; ++tries) {
      Box b = random_box(rng);
      bool ok = true;
      for (const auto& other : objects) {
        if (&other == &obj) break;
        if (box_iou(b, other.box) >= kMaxPairIou) ok = false;
      }
      if (ok) {
        obj.box = b;
        placed = true;
      }
    }
    if (!placed) return false;
  }
  return true;
}

std::vector<std::string> combo_tokens(const Combo& c) {
  return {palette().names[c.color], shape_name(kShapes[c.shape])};
}

// Exactly one of `candidates` may satisfy rel towards `anchor`, and every
// candidate must clear the margin on whichever side it falls.
int unique_satisfier(Rel rel, const std::vector<int>& candidates,
                     const std::vector<SceneObject>& objects, int anchor) {
  int winner = -1;
  for (int idx : candidates) {
    double m = rel_margin(rel, objects[idx].box, objects[anchor].box);
    if (std::fabs(m) < kPairMargin) return -1;
    if (m > 0) {
      if (winner >= 0) return -1;
      winner = idx;
    }
  }
  return winner;
}

}  // namespace

const char* shape_name(ObjShape s) {
  switch (s) {
    case ObjShape::square: return "square";
    case ObjShape::circle: return "circle";
    case ObjShape::triangle: return "triangle";
  }
  return "?";
}

const std::vector<std::string>& color_names() { return palette().names; }

double box_iou(const Box& a, const Box& b) {
  double ax1, ay1, ax2, ay2, bx1, by1, bx2, by2;
  corners_of(a, ax1, ay1, ax2, ay2);
  corners_of(b, bx1, by1, bx2, by2);
  double iw = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
  double ih = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
  double inter = iw * ih;
  double uni = a.w * a.h + b.w * b.h - inter;
  return uni <= 0.0 ? 0.0 : inter / uni;
}

int scene_depth_for_seed(uint64_t seed, const SceneGenConfig& cfg) {
  Rng rng = Rng(seed).substream("depth");
  double total = cfg.depth_mix[0] + cfg.depth_mix[1] + cfg.depth_mix[2];
  double r = rng.uniform() * total;
  if (r < cfg.depth_mix[0]) return 1;
  if (r < cfg.depth_mix[0] + cfg.depth_mix[1]) return 2;
  return 3;
}

SceneSpec generate_scene(uint64_t seed, const SceneGenConfig& cfg) {
  return generate_scene(seed, scene_depth_for_seed(seed, cfg), cfg);
}

SceneSpec generate_scene(uint64_t seed, int depth, const SceneGenConfig& cfg) {
  if (depth < 1 || depth > 3)
    throw std::invalid_argument("generate_scene: depth must be 1, 2 or 3");
  const int depth_min[4] = {0, 2, 3, 5};
  if (cfg.max_objects < depth_min[depth])
    throw std::invalid_argument("generate_scene: depth " + std::to_string(depth) + " needs >= " +
                                std::to_string(depth_min[depth]) + " objects, config allows " +
                                std::to_string(cfg.max_objects));

  Rng rng = Rng(seed).substream("scene");
  const int attempts = 400;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    int lo = std::max(cfg.min_objects, depth_min[depth]);
    int n = rng.uniform_int(lo, std::max(lo, cfg.max_objects));

    SceneSpec s;
    s.seed = seed;
    s.depth = depth;
    std::vector<std::string> expr;

    if (depth == 1) {
      Combo tc = random_combo(rng);
      s.objects.push_back({kShapes[tc.shape], tc.color, {}});
      for (int i = 1; i < n; ++i) {
        Combo c = random_combo_excluding(rng, {tc});
        s.objects.push_back({kShapes[c.shape], c.color, {}});
      }
      s.target_index = 0;
      expr = combo_tokens(tc);
      if (!place_objects(rng, s.objects)) continue;
    } else if (depth == 2) {
      Combo tc = random_combo(rng);
      Combo ac = random_combo_excluding(rng, {tc});
      int num_cand = std::min(rng.uniform_int(2, 3), n - 1);
      std::vector<int> cands;
      for (int i = 0; i < num_cand; ++i) {
        cands.push_back(static_cast<int>(s.objects.size()));
        s.objects.push_back({kShapes[tc.shape], tc.color, {}});
      }
      int anchor = static_cast<int>(s.objects.size());
      s.objects.push_back({kShapes[ac.shape], ac.color, {}});
      while (static_cast<int>(s.objects.size()) < n) {
        Combo c = random_combo_excluding(rng, {tc, ac});
        s.objects.push_back({kShapes[c.shape], c.color, {}});
      }
      if (!place_objects(rng, s.objects)) continue;
      Rel rel = static_cast<Rel>(rng.uniform_int(0, 3));
      int winner = unique_satisfier(rel, cands, s.objects, anchor);
      if (winner < 0) continue;
      s.target_index = winner;
      expr = combo_tokens(tc);
      for (const auto& t : rel_tokens(rel)) expr.push_back(t);
      for (const auto& t : combo_tokens(ac)) expr.push_back(t);
    } else {
      Combo tc = random_combo(rng);
      Combo a1c = random_combo_excluding(rng, {tc});
      Combo a2c = random_combo_excluding(rng, {tc, a1c});
      int num_cand = std::min(rng.uniform_int(2, 3), n - 3);
      std::vector<int> cands, mids;
      for (int i = 0; i < num_cand; ++i) {
        cands.push_back(static_cast<int>(s.objects.size()));
        s.objects.push_back({kShapes[tc.shape], tc.color, {}});
      }
      for (int i = 0; i < 2; ++i) {
        mids.push_back(static_cast<int>(s.objects.size()));
        s.objects.push_back({kShapes[a1c.shape], a1c.color, {}});
      }
      int anchor2 = static_cast<int>(s.objects.size());
      s.objects.push_back({kShapes[a2c.shape], a2c.color, {}});
      while (static_cast<int>(s.objects.size()) < n) {
        Combo c = random_combo_excluding(rng, {tc, a1c, a2c});
        s.objects.push_back({kShapes[c.shape], c.color, {}});
      }
      if (!place_objects(rng, s.objects)) continue;
      Rel rel2 = static_cast<Rel>(rng.uniform_int(0, 3));
      int anchor1 = unique_satisfier(rel2, mids, s.objects, anchor2);
      if (anchor1 < 0) continue;
      Rel rel1 = static_cast<Rel>(rng.uniform_int(0, 3));
      int winner = unique_satisfier(rel1, cands, s.objects, anchor1);
      if (winner < 0) continue;
      s.target_index = winner;
      expr = combo_tokens(tc);
      for (const auto& t : rel_tokens(rel1)) expr.push_back(t);
      for (const auto& t : combo_tokens(a1c)) expr.push_back(t);
      for (const auto& t : rel_tokens(rel2)) expr.push_back(t);
      for (const auto& t : combo_tokens(a2c)) expr.push_back(t);
    }

    s.expression = expr;
    s.gold = chunk(expr);
    s.b_gt = s.objects[s.target_index].box;

    int check = verify_expression(s);
    if (check != s.target_index)
      throw std::runtime_error("generate_scene: semantics check failed for seed " +
                               std::to_string(seed));
    return s;
  }
  throw std::runtime_error("generate_scene: no feasible layout after " +
                           std::to_string(attempts) + " attempts (seed " + std::to_string(seed) +
                           ", depth " + std::to_string(depth) +
                           "; loosen num_objects or canvas constraints)");
}

int verify_expression(const SceneSpec& scene) {
  const auto& tokens = scene.expression;
  const auto& names = palette().names;

  // parse: NP (REL NP)* with NP = <color> <shape>
  struct Clause {
    Combo combo;
    Rel rel_to_next = Rel::left_of;
    bool has_rel = false;
  };
  std::vector<Clause> clauses;
  size_t i = 0;
  auto parse_np = [&]() -> Combo {
    if (i >= tokens.size())
      throw std::runtime_error("verify_expression: truncated expression");
    auto cit = std::find(names.begin(), names.end(), tokens[i]);
    if (cit == names.end())
      throw std::runtime_error("verify_expression: expected a color, got \"" + tokens[i] + "\"");
    int color = static_cast<int>(cit - names.begin());
    ++i;
    if (i >= tokens.size())
      throw std::runtime_error("verify_expression: expression ends before a shape word");
    int shape = -1;
    for (size_t k = 0; k < kShapes.size(); ++k)
      if (tokens[i] == shape_name(kShapes[k])) shape = static_cast<int>(k);
    if (shape < 0)
      throw std::runtime_error("verify_expression: expected a shape, got \"" + tokens[i] + "\"");
    ++i;
    return {color, shape};
  };

  clauses.push_back({parse_np(), Rel::left_of, false});
  while (i < tokens.size()) {
    Rel r;
    if (tokens[i] == "left" || tokens[i] == "right") {
      r = tokens[i] == "left" ? Rel::left_of : Rel::right_of;
      ++i;
      if (i >= tokens.size() || tokens[i] != "of")
        throw std::runtime_error("verify_expression: expected \"of\" after \"" + tokens[i - 1] +
                                 "\"");
      ++i;
    } else if (tokens[i] == "above" || tokens[i] == "below") {
      r = tokens[i] == "above" ? Rel::above : Rel::below;
      ++i;
    } else {
      throw std::runtime_error("verify_expression: expected a relation, got \"" + tokens[i] +
                               "\"");
    }
    clauses.back().rel_to_next = r;
    clauses.back().has_rel = true;
    clauses.push_back({parse_np(), Rel::left_of, false});
  }

  // resolve from the innermost anchor outwards
  auto matches = [&](const Combo& c) {
    std::vector<int> out;
    for (size_t k = 0; k < scene.objects.size(); ++k)
      if (scene.objects[k].color == c.color &&
          scene.objects[k].shape == kShapes[c.shape])
        out.push_back(static_cast<int>(k));
    return out;
  };

  int resolved = -1;
  for (int ci = static_cast<int>(clauses.size()) - 1; ci >= 0; --ci) {
    std::vector<int> cand = matches(clauses[ci].combo);
    std::vector<int> sat;
    for (int idx : cand) {
      if (!clauses[ci].has_rel) {
        sat.push_back(idx);
      } else if (rel_holds(clauses[ci].rel_to_next, scene.objects[idx].box,
                           scene.objects[resolved].box)) {
        sat.push_back(idx);
      }
    }
    if (sat.size() != 1)
      throw std::runtime_error("verify_expression: clause " + std::to_string(ci) + " has " +
                               std::to_string(sat.size()) + " satisfiers (must be exactly 1)");
    resolved = sat[0];
  }
  return resolved;
}

Raster render_scene(const SceneSpec& scene, int image_size) {
  Raster r;
  r.w = r.h = image_size;
  r.rgb.assign(static_cast<size_t>(image_size) * image_size * 3, 128);
  for (const auto& obj : scene.objects) {
    const auto& col = palette().rgb[obj.color];
    double x1, y1, x2, y2;
    corners_of(obj.box, x1, y1, x2, y2);
    int px1 = std::max(0, static_cast<int>(std::floor(x1 * image_size)));
    int py1 = std::max(0, static_cast<int>(std::floor(y1 * image_size)));
    int px2 = std::min(image_size - 1, static_cast<int>(std::ceil(x2 * image_size)));
    int py2 = std::min(image_size - 1, static_cast<int>(std::ceil(y2 * image_size)));
    for (int py = py1; py <= py2; ++py) {
      for (int px = px1; px <= px2; ++px) {
        double x = (px + 0.5) / image_size;
        double y = (py + 0.5) / image_size;
        bool inside = false;
        switch (obj.shape) {
          case ObjShape::square:
            inside = x >= x1 && x <= x2 && y >= y1 && y <= y2;
            break;
          case ObjShape::circle: {
            double dx = (x - obj.box.cx) / (obj.box.w / 2);
            double dy = (y - obj.box.cy) / (obj.box.h / 2);
            inside = dx * dx + dy * dy <= 1.0;
            break;
          }
          case ObjShape::triangle: {
            if (y >= y1 && y <= y2) {
              double t = (y - y1) / obj.box.h;  // 0 at apex row, 1 at base
              inside = std::fabs(x - obj.box.cx) <= t * obj.box.w / 2;
            }
            break;
          }
        }
        if (inside) {
          size_t o = (static_cast<size_t>(py) * image_size + px) * 3;
          r.rgb[o] = col[0];
          r.rgb[o + 1] = col[1];
          r.rgb[o + 2] = col[2];
        }
      }
    }
  }
  return r;
}

std::string scene_to_json(const SceneSpec& s) {
  json j;
  j["seed"] = s.seed;
  j["depth"] = s.depth;
  j["objects"] = json::array();
  for (const auto& o : s.objects)
    j["objects"].push_back({{"shape", shape_name(o.shape)},
                            {"color", palette().names[o.color]},
                            {"box", {o.box.cx, o.box.cy, o.box.w, o.box.h}}});
  j["target_index"] = s.target_index;
  j["expression"] = s.expression;
  j["decomposition"] = json::array();
  for (const auto& p : s.gold.phrases)
    j["decomposition"].push_back(
        {{"kind", phrase_kind_name(p.kind)}, {"start", p.start}, {"end", p.end}});
  j["b_gt"] = {s.b_gt.cx, s.b_gt.cy, s.b_gt.w, s.b_gt.h};
  return j.dump(2);
}

SceneSpec scene_from_json(const std::string& text) {
  json j = json::parse(text);
  SceneSpec s;
  s.seed = j.at("seed").get<uint64_t>();
  s.depth = j.at("depth").get<int>();
  const auto& names = palette().names;
  for (const auto& jo : j.at("objects")) {
    SceneObject o;
    std::string sh = jo.at("shape").get<std::string>();
    bool found = false;
    for (ObjShape k : kShapes)
      if (sh == shape_name(k)) {
        o.shape = k;
        found = true;
      }
    if (!found) throw std::runtime_error("scene_from_json: unknown shape " + sh);
    std::string col = jo.at("color").get<std::string>();
    auto cit = std::find(names.begin(), names.end(), col);
    if (cit == names.end()) throw std::runtime_error("scene_from_json: unknown color " + col);
    o.color = static_cast<int>(cit - names.begin());
    const auto& b = jo.at("box");
    o.box = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    s.objects.push_back(o);
  }
  s.target_index = j.at("target_index").get<int>();
  s.expression = j.at("expression").get<std::vector<std::string>>();
  std::vector<PhraseSpan> spans;
  for (const auto& jp : j.at("decomposition")) {
    PhraseSpan p;
    std::string kind = jp.at("kind").get<std::string>();
    if (kind == "noun") p.kind = PhraseKind::noun;
    else if (kind == "verb") p.kind = PhraseKind::verb;
    else if (kind == "preposition") p.kind = PhraseKind::preposition;
    else if (kind == "adjective") p.kind = PhraseKind::adjective;
    else throw std::runtime_error("scene_from_json: unknown phrase kind " + kind);
    p.start = jp.at("start").get<int>();
    p.end = jp.at("end").get<int>();
    spans.push_back(p);
  }
  s.gold = decomposition_from_spans(s.expression, spans);
  const auto& g = j.at("b_gt");
  s.b_gt = {g[0].get<double>(), g[1].get<double>(), g[2].get<double>(), g[3].get<double>()};
  return s;
}

void write_scene_dir(const std::string& dir, const std::string& split,
                     const std::vector<SceneSpec>& scenes, int image_size) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  json manifest;
  std::string manifest_path = dir + "/manifest.json";
  if (fs::exists(manifest_path)) {
    std::ifstream f(manifest_path);
    manifest = json::parse(std::string((std::istreambuf_iterator<char>(f)),
                                       std::istreambuf_iterator<char>()));
  } else {
    manifest["splits"] = json::object();
  }

  std::vector<uint64_t> seeds;
  for (const auto& s : scenes) {
    seeds.push_back(s.seed);
    std::string base = dir + "/scene_" + std::to_string(s.seed);
    std::ofstream jf(base + ".json", std::ios::trunc);
    if (!jf) throw std::runtime_error("write_scene_dir: cannot write " + base + ".json");
    jf << scene_to_json(s) << "\n";

    Raster r = render_scene(s, image_size);
    std::ofstream pf(base + ".ppm", std::ios::binary | std::ios::trunc);
    pf << "P6\n" << r.w << " " << r.h << "\n255\n";
    pf.write(reinterpret_cast<const char*>(r.rgb.data()),
             static_cast<std::streamsize>(r.rgb.size()));
  }
  manifest["splits"][split] = seeds;
  manifest["image_size"] = image_size;
  std::ofstream mf(manifest_path, std::ios::trunc);
  mf << manifest.dump(2) << "\n";
}

std::vector<uint64_t> manifest_split_seeds(const std::string& dir, const std::string& split) {
  std::ifstream f(dir + "/manifest.json");
  if (!f) throw std::runtime_error("manifest_split_seeds: no manifest.json in " + dir);
  json manifest = json::parse(std::string((std::istreambuf_iterator<char>(f)),
                                          std::istreambuf_iterator<char>()));
  if (!manifest.contains("splits") || !manifest["splits"].contains(split))
    throw std::runtime_error("manifest_split_seeds: split \"" + split + "\" not in manifest");
  return manifest["splits"][split].get<std::vector<uint64_t>>();
}

SceneSpec load_scene_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_scene_file: cannot open " + path);
  return scene_from_json(std::string((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>()));
}

}  // namespace phg
