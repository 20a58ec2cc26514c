#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace phg {

enum class MaskMode { masked, literal };
enum class BoxMode { centered, literal };
enum class BoxCarry { reset, carry };

struct SceneGenConfig {
  int min_objects = 3;
  int max_objects = 6;
  int image_size = 64;
  // Sampling weights for expression depth 1/2/3, applied per scene seed.
  std::array<double, 3> depth_mix = {0.25, 0.40, 0.35};
};

struct SeedRange {
  uint64_t begin = 0;
  uint64_t end = 0;  // exclusive
  uint64_t count() const { return end - begin; }
};

struct RunConfig {
  // model dims
  int channels = 64;  // C
  int heads = 4;
  int visual_layers = 2;  // T_v
  int text_layers = 2;    // T_s
  int ff_dim = 128;
  int patch = 8;
  int max_text_len = 40;
  int l_max = 4;

  // module hyperparameters
  double lambda_hm = 2.0;      // modulating factor in hierarchical mask attention
  double lambda_star = 10.0;   // inverse temperature of the alignment softmax
  double lambda1 = 2.0;        // l1 weight in the query loss
  double lambda2 = 5.0;        // giou weight in the query loss
  int iterations = 6;          // N
  MaskMode mask_mode = MaskMode::masked;
  BoxMode box_mode = BoxMode::centered;
  BoxCarry box_carry = BoxCarry::reset;

  // optimizer / schedule
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.01;
  int epochs = 60;
  int batch_size = 32;
  double early_stop_prec = 2.0;  // stop once val Prec@0.5 reaches this; >1 disables

  // dataset
  SceneGenConfig scene;
  SeedRange train_seeds = {1, 2001};
  SeedRange val_seeds = {100001, 100501};
  SeedRange test_seeds = {200001, 200501};

  // ablation switches
  bool disable_gfcma = false;
  bool disable_cmhm = false;
  bool disable_ppc = false;
  bool disable_hpc = false;

  uint64_t run_seed = 7;
  std::string checkpoint_dtype = "f64";  // "f64" | "f32"

  void validate() const;
};

RunConfig config_from_json(const std::string& json_text);
std::string config_to_json(const RunConfig& cfg);

const char* mask_mode_name(MaskMode m);
const char* box_mode_name(BoxMode m);
const char* box_carry_name(BoxCarry m);

}  // namespace phg
