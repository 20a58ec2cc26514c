#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/chunker.hpp"
#include "core/config.hpp"

namespace phg {

struct Box {
  double cx = 0, cy = 0, w = 0, h = 0;  // normalized center-size
};

enum class ObjShape { square, circle, triangle };

const char* shape_name(ObjShape s);
const std::vector<std::string>& color_names();  // 8-color palette

struct SceneObject {
  ObjShape shape;
  int color;  // palette index
  Box box;
};

struct SceneSpec {
  uint64_t seed = 0;
  int depth = 1;
  std::vector<SceneObject> objects;
  int target_index = 0;
  std::vector<std::string> expression;
  PhraseDecomposition gold;
  Box b_gt;
};

struct Raster {
  int w = 0, h = 0;
  std::vector<uint8_t> rgb;  // row-major, 3 bytes per pixel
};

// Plain intersection-over-union on center-size boxes (also used to keep
// placed objects apart).
double box_iou(const Box& a, const Box& b);

// Deterministic scene construction: places objects, picks a target and
// builds an expression of the requested depth. Depth >= 2 scenes always
// contain at least one distractor matching the depth-1 phrase, so the
// relational clauses are required to disambiguate.
SceneSpec generate_scene(uint64_t seed, int depth, const SceneGenConfig& cfg);

// Depth drawn per scene seed from the configured mix, independent of splits.
int scene_depth_for_seed(uint64_t seed, const SceneGenConfig& cfg);
SceneSpec generate_scene(uint64_t seed, const SceneGenConfig& cfg);

// Evaluates the expression's formal semantics (attribute filters plus
// spatial predicates on box centers) over all objects and returns the unique
// satisfier; throws if the referent is not unique.
int verify_expression(const SceneSpec& scene);

Raster render_scene(const SceneSpec& scene, int image_size);

std::string scene_to_json(const SceneSpec& scene);
SceneSpec scene_from_json(const std::string& text);

// Directory layout written by gen-data: scene_<seed>.json + scene_<seed>.ppm
// plus manifest.json mapping split names to seed lists.
void write_scene_dir(const std::string& dir, const std::string& split,
                     const std::vector<SceneSpec>& scenes, int image_size);
std::vector<uint64_t> manifest_split_seeds(const std::string& dir, const std::string& split);
SceneSpec load_scene_file(const std::string& path);

}  // namespace phg
