#pragma once

#include <map>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace phg {

// Named trainable tensors plus AdamW moment state. Iteration order is the
// lexicographic path order of std::map, which keeps updates deterministic.
struct ParameterSet {
  std::map<std::string, Tensor> params;
  std::map<std::string, std::vector<double>> adam_m;
  std::map<std::string, std::vector<double>> adam_v;
  long step_count = 0;

  // Uniform in +-sqrt(1/fan_in); fan_in <= 0 means zeros (biases, gains).
  Tensor& create(const std::string& path, int rows, int cols, int fan_in, Rng& rng);
  Tensor& create_const(const std::string& path, int rows, int cols, double fill);

  Tensor& at(const std::string& path);
  const Tensor& at(const std::string& path) const;
  bool has(const std::string& path) const { return params.count(path) != 0; }

  void zero_grads();
  size_t scalar_count() const;
};

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Decoupled-weight-decay Adam update. Every parameter must carry a gradient;
// otherwise throws listing the offending paths. Grads are left untouched.
void adamw_step(ParameterSet& ps, const AdamWConfig& cfg);

// ------------------------------------------------------------------ layers

struct Linear {
  Tensor w;  // in x out
  Tensor b;  // 1 x out; undefined for bias-free maps
};

Linear make_linear(ParameterSet& ps, const std::string& path, int in, int out, bool bias,
                   Rng& rng);
Tensor linear(const Linear& l, const Tensor& x);

struct Mha {
  Linear q, k, v, o;
  int heads = 1;
};

Mha make_mha(ParameterSet& ps, const std::string& path, int dim, int heads, Rng& rng);

// Scaled dot-product attention with learned projections, heads concatenated
// then output-projected. `key_mask` (1 x n_k additive, 0 or -1e9) hides keys.
Tensor mha(const Mha& p, const Tensor& q_in, const Tensor& k_in, const Tensor& v_in,
           const Tensor& key_mask = Tensor());

// Variant with the key/value projections precomputed (they are hoisted out of
// per-level loops when the same keys serve many queries).
Tensor mha_projected(const Mha& p, const Tensor& q_in, const Tensor& k_proj,
                     const Tensor& v_proj, const Tensor& key_mask = Tensor());

struct LayerNormParams {
  Tensor gamma, beta;
};

LayerNormParams make_layer_norm(ParameterSet& ps, const std::string& path, int dim);

struct FeedForward {
  Linear fc1, fc2;
};

struct EncoderLayer {
  Mha attn;
  LayerNormParams ln1, ln2;
  FeedForward ff;
};

EncoderLayer make_encoder_layer(ParameterSet& ps, const std::string& path, int dim, int heads,
                                int ff_dim, Rng& rng);
// Pre-norm transformer block: x + Attn(LN(x)), then x + FF(LN(x)).
Tensor encoder_layer(const EncoderLayer& p, const Tensor& x);

const double kMaskNegative = -1e9;

// 1 x n additive mask: 0 where bits are set, -1e9 elsewhere.
Tensor additive_mask_row(const std::vector<uint8_t>& bits);

}  // namespace phg
