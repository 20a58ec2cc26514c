#pragma once

#include <functional>
#include <string>
#include <vector>

#include "core/model.hpp"

namespace phg {

// One ready-to-feed sample: geometry, raster and tokenized expression.
struct SceneSample {
  SceneSpec spec;
  Raster raster;
  std::vector<int> token_ids;
};

SceneSample prepare_sample(const SceneSpec& spec, int image_size);
std::vector<SceneSample> build_split(const RunConfig& cfg, const std::string& split);
std::vector<SceneSample> load_split_dir(const std::string& dir, const std::string& split,
                                        int image_size);

using LogFn = std::function<void(const std::string&)>;

struct TrainResult {
  std::string best_checkpoint;
  std::string last_checkpoint;
  std::string log_path;
  double best_val_prec = 0.0;
  int epochs_run = 0;
};

// Runs mini-batch optimization of the composite objective, logging per-epoch
// total/L_Q/L_cons plus validation Prec@0.5 as CSV, and keeps the best-val
// checkpoint. Fully reproducible from (config, seed); a non-finite loss
// aborts with the last finished epoch's checkpoint still on disk.
TrainResult train_run(const RunConfig& cfg, const std::string& out_dir, const LogFn& log = {});

struct EvalResult {
  double prec = 0.0;
  double mean_iou = 0.0;
  int count = 0;
  // breakdown by expression depth 1..3
  double prec_by_depth[4] = {0, 0, 0, 0};
  int count_by_depth[4] = {0, 0, 0, 0};
};

EvalResult evaluate_model(const Model& model, const std::vector<SceneSample>& samples);

// Evaluates a checkpoint on a named split. The split is regenerated from the
// embedded config unless `data_dir` points at a gen-data directory. Appends
// one CSV row (run_id, split, prec_at_0.5, mean_iou, per-depth columns) when
// `csv_path` is non-empty.
EvalResult evaluate_checkpoint(const std::string& checkpoint_path, const std::string& split,
                               const std::string& data_dir = "",
                               const std::string& csv_path = "",
                               const std::string& run_id = "");

std::string eval_csv_header();
std::string eval_csv_row(const std::string& run_id, const std::string& split,
                         const EvalResult& r);

}  // namespace phg
