#pragma once

#include "core/encoders.hpp"
#include "core/nn.hpp"

namespace phg {

// Global feature cross-modal alignment: a cross-modal attention layer pulls
// sentence context into one row per visual token, then a global alignment
// layer weighs visual tokens by index-wise cosine similarity in a shared
// space and rescales them.

struct GfcmaParams {
  Mha cross_attn;
  Linear map_visual;  // bias-free maps into the shared similarity space
  Linear map_text;
};

struct AlignedVisual {
  Tensor features;  // N_v x C, row i = weights(i) * visual row i
  Tensor weights;   // N_v x 1, softmax of lambda* times cosine
  Tensor cosine;    // N_v x 1, raw similarities in [-1, 1]
};

GfcmaParams make_gfcma(ParameterSet& ps, int channels, int heads, Rng& rng);

// Queries from the visual tokens, keys and values from the text tokens; the
// output keeps one row per visual token.
Tensor cross_modal_attention(const GfcmaParams& p, const Tensor& visual, const Tensor& text);

AlignedVisual global_alignment(const GfcmaParams& p, const Tensor& visual,
                               const Tensor& text_enriched, double lambda_star);

}  // namespace phg
