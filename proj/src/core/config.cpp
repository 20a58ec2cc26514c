#include "core/config.hpp"

#include <stdexcept>

#include <json.hpp>

namespace phg {

using nlohmann::json;

const char* mask_mode_name(MaskMode m) { return m == MaskMode::masked ? "masked" : "literal"; }
const char* box_mode_name(BoxMode m) { return m == BoxMode::centered ? "centered" : "literal"; }
const char* box_carry_name(BoxCarry m) { return m == BoxCarry::reset ? "reset" : "carry"; }

namespace {

MaskMode parse_mask_mode(const std::string& s) {
  if (s == "masked") return MaskMode::masked;
  if (s == "literal") return MaskMode::literal;
  throw std::invalid_argument("config: mask_mode must be \"masked\" or \"literal\", got " + s);
}

BoxMode parse_box_mode(const std::string& s) {
  if (s == "centered") return BoxMode::centered;
  if (s == "literal") return BoxMode::literal;
  throw std::invalid_argument("config: box_mode must be \"centered\" or \"literal\", got " + s);
}

BoxCarry parse_box_carry(const std::string& s) {
  if (s == "reset") return BoxCarry::reset;
  if (s == "carry") return BoxCarry::carry;
  throw std::invalid_argument("config: box_carry must be \"reset\" or \"carry\", got " + s);
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_range(const json& j, const char* key, SeedRange& out) {
  if (!j.contains(key)) return;
  const auto& r = j.at(key);
  if (!r.is_array() || r.size() != 2)
    throw std::invalid_argument(std::string("config: ") + key + " must be [begin, end]");
  out.begin = r[0].get<uint64_t>();
  out.end = r[1].get<uint64_t>();
}

bool overlaps(const SeedRange& a, const SeedRange& b) {
  return a.begin < b.end && b.begin < a.end;
}

}  // namespace

void RunConfig::validate() const {
  if (channels < 8 || channels % 8 != 0)
    throw std::invalid_argument("config: channels must be a positive multiple of 8");
  if (heads < 1 || channels % heads != 0)
    throw std::invalid_argument("config: channels must be divisible by heads");
  if (patch < 1 || scene.image_size % patch != 0)
    throw std::invalid_argument("config: image_size must be divisible by patch");
  if (visual_layers < 0 || text_layers < 0)
    throw std::invalid_argument("config: encoder depths must be >= 0");
  if (lambda_hm <= 1.0)
    throw std::invalid_argument("config: lambda_hm is a modulating factor greater than 1");
  if (lambda_star <= 0.0) throw std::invalid_argument("config: lambda_star must be positive");
  if (iterations < 1) throw std::invalid_argument("config: iterations must be >= 1");
  if (l_max < 1) throw std::invalid_argument("config: l_max must be >= 1");
  if (epochs < 1 || batch_size < 1)
    throw std::invalid_argument("config: epochs and batch_size must be >= 1");
  if (max_text_len < 1 || max_text_len > 40)
    throw std::invalid_argument("config: max_text_len must be in [1, 40]");
  if (scene.min_objects < 1 || scene.max_objects < scene.min_objects)
    throw std::invalid_argument("config: bad num_objects range");
  double mix = scene.depth_mix[0] + scene.depth_mix[1] + scene.depth_mix[2];
  if (mix <= 0.0) throw std::invalid_argument("config: depth_mix weights must sum to > 0");
  if (train_seeds.count() == 0 || val_seeds.count() == 0 || test_seeds.count() == 0)
    throw std::invalid_argument("config: every split needs a non-empty seed range");
  if (overlaps(train_seeds, val_seeds) || overlaps(train_seeds, test_seeds) ||
      overlaps(val_seeds, test_seeds))
    throw std::invalid_argument("config: split seed ranges must be disjoint");
  if (checkpoint_dtype != "f64" && checkpoint_dtype != "f32")
    throw std::invalid_argument("config: checkpoint_dtype must be \"f64\" or \"f32\"");
  if (disable_hpc && disable_ppc)
    throw std::invalid_argument("config: disable_hpc only applies when the corrector is enabled");
}

RunConfig config_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  RunConfig c;
  read(j, "channels", c.channels);
  read(j, "heads", c.heads);
  read(j, "visual_layers", c.visual_layers);
  read(j, "text_layers", c.text_layers);
  read(j, "ff_dim", c.ff_dim);
  read(j, "patch", c.patch);
  read(j, "max_text_len", c.max_text_len);
  read(j, "l_max", c.l_max);
  read(j, "lambda_hm", c.lambda_hm);
  read(j, "lambda_star", c.lambda_star);
  read(j, "lambda1", c.lambda1);
  read(j, "lambda2", c.lambda2);
  read(j, "iterations", c.iterations);
  if (j.contains("mask_mode")) c.mask_mode = parse_mask_mode(j.at("mask_mode").get<std::string>());
  if (j.contains("box_mode")) c.box_mode = parse_box_mode(j.at("box_mode").get<std::string>());
  if (j.contains("box_carry")) c.box_carry = parse_box_carry(j.at("box_carry").get<std::string>());
  read(j, "lr", c.lr);
  read(j, "beta1", c.beta1);
  read(j, "beta2", c.beta2);
  read(j, "weight_decay", c.weight_decay);
  read(j, "epochs", c.epochs);
  read(j, "batch_size", c.batch_size);
  read(j, "early_stop_prec", c.early_stop_prec);
  if (j.contains("scene")) {
    const auto& s = j.at("scene");
    read(s, "min_objects", c.scene.min_objects);
    read(s, "max_objects", c.scene.max_objects);
    read(s, "image_size", c.scene.image_size);
    if (s.contains("depth_mix")) {
      const auto& m = s.at("depth_mix");
      if (!m.is_array() || m.size() != 3)
        throw std::invalid_argument("config: scene.depth_mix must have 3 weights");
      for (int i = 0; i < 3; ++i) c.scene.depth_mix[i] = m[i].get<double>();
    }
  }
  read_range(j, "train_seeds", c.train_seeds);
  read_range(j, "val_seeds", c.val_seeds);
  read_range(j, "test_seeds", c.test_seeds);
  read(j, "disable_gfcma", c.disable_gfcma);
  read(j, "disable_cmhm", c.disable_cmhm);
  read(j, "disable_ppc", c.disable_ppc);
  read(j, "disable_hpc", c.disable_hpc);
  read(j, "run_seed", c.run_seed);
  read(j, "checkpoint_dtype", c.checkpoint_dtype);
  c.validate();
  return c;
}

std::string config_to_json(const RunConfig& c) {
  json j;
  j["channels"] = c.channels;
  j["heads"] = c.heads;
  j["visual_layers"] = c.visual_layers;
  j["text_layers"] = c.text_layers;
  j["ff_dim"] = c.ff_dim;
  j["patch"] = c.patch;
  j["max_text_len"] = c.max_text_len;
  j["l_max"] = c.l_max;
  j["lambda_hm"] = c.lambda_hm;
  j["lambda_star"] = c.lambda_star;
  j["lambda1"] = c.lambda1;
  j["lambda2"] = c.lambda2;
  j["iterations"] = c.iterations;
  j["mask_mode"] = mask_mode_name(c.mask_mode);
  j["box_mode"] = box_mode_name(c.box_mode);
  j["box_carry"] = box_carry_name(c.box_carry);
  j["lr"] = c.lr;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["weight_decay"] = c.weight_decay;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["early_stop_prec"] = c.early_stop_prec;
  j["scene"] = {{"min_objects", c.scene.min_objects},
                {"max_objects", c.scene.max_objects},
                {"image_size", c.scene.image_size},
                {"depth_mix", c.scene.depth_mix}};
  j["train_seeds"] = {c.train_seeds.begin, c.train_seeds.end};
  j["val_seeds"] = {c.val_seeds.begin, c.val_seeds.end};
  j["test_seeds"] = {c.test_seeds.begin, c.test_seeds.end};
  j["disable_gfcma"] = c.disable_gfcma;
  j["disable_cmhm"] = c.disable_cmhm;
  j["disable_ppc"] = c.disable_ppc;
  j["disable_hpc"] = c.disable_hpc;
  j["run_seed"] = c.run_seed;
  j["checkpoint_dtype"] = c.checkpoint_dtype;
  return j.dump(2);
}

}  // namespace phg
