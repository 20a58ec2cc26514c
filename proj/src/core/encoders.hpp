#pragma once

#include <vector>

#include "core/nn.hpp"
#include "core/scenes.hpp"

namespace phg {

struct VisualTokens {
  Tensor features;  // N_v x C
  int grid_h = 0, grid_w = 0;
};

struct TextTokens {
  Tensor features;  // N_s x C
  std::vector<int> ids;
};

struct VisualEncoderParams {
  Linear patch_embed;  // (patch*patch*3) x C
  std::vector<EncoderLayer> layers;
  int patch = 8;
  int channels = 64;
};

struct TextEncoderParams {
  Tensor embed;  // vocab x C
  std::vector<EncoderLayer> layers;
  int channels = 64;
  int max_len = 40;
};

VisualEncoderParams make_visual_encoder(ParameterSet& ps, int channels, int heads, int layers,
                                        int ff_dim, int patch, Rng& rng);
TextEncoderParams make_text_encoder(ParameterSet& ps, int channels, int heads, int layers,
                                    int ff_dim, int vocab, int max_len, Rng& rng);

// Constant N_v x (patch*patch*3) matrix of per-patch pixel values in [0, 1].
Tensor patch_matrix(const Raster& image, int patch);

// Constant sinusoidal position tables.
Tensor grid_position_encoding(int grid_h, int grid_w, int channels);  // N_v x C
Tensor sequence_position_encoding(int len, int channels);             // len x C

// Patch tokens before any self-attention: embed(patches) + grid positions.
Tensor patch_tokens(const VisualEncoderParams& p, const Raster& image);

VisualTokens encode_image(const VisualEncoderParams& p, const Raster& image);
TextTokens encode_text(const TextEncoderParams& p, const std::vector<int>& ids);

}  // namespace phg
