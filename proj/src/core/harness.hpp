#pragma once

#include <string>
#include <vector>

#include "core/trainer.hpp"

namespace phg {

// Ablation ladder rows, cumulative in pipeline order.
enum class AblationRow { baseline, gfcma, cmhm, ppc_wo_hpc, full };
const std::vector<AblationRow>& ablation_rows();
const char* ablation_row_name(AblationRow row);
RunConfig ablation_config(const RunConfig& base, AblationRow row);

struct AblationCell {
  AblationRow row;
  uint64_t seed;
  double test_prec = 0.0;
};

struct AblationTable {
  std::vector<AblationCell> cells;
  double mean(AblationRow row) const;
  double stddev(AblationRow row) const;
  std::string to_csv() const;  // header + exactly five rows of mean/std
};

// Trains and evaluates the five ladder configurations over `seeds` run seeds
// each. Independent runs fan out across worker threads (PHG_THREADS caps the
// pool); each run stays single-threaded so results do not depend on timing.
AblationTable ablate(const RunConfig& base, int seeds, const std::string& out_dir,
                     const LogFn& log = {});

// Worker pool size: PHG_THREADS if set, else the hardware concurrency.
int worker_threads();

// Per-level attention mass that falls inside a box, measured on the
// column-normalized visual attention map of each matching level.
std::vector<double> attention_mass_inside(const Model::ForwardResult& fwd, const Box& area,
                                          int grid_h, int grid_w);

// Writes level_<l>.pgm per matching level, alignment.pgm, overlay.ppm and
// trajectory.json for one scene.
struct VisualizeOutput {
  std::vector<std::string> level_maps;
  std::string alignment_map;
  std::string overlay;
  std::string trajectory;
};
VisualizeOutput visualize(const Model& model, const SceneSpec& scene, const std::string& out_dir);

void generate_dataset(const SceneGenConfig& scene_cfg, uint64_t seed_begin, uint64_t seed_end,
                      const std::string& split, const std::string& out_dir);

}  // namespace phg
