#pragma once

#include <cstdint>
#include <vector>

#include "core/config.hpp"
#include "core/gfcma.hpp"
#include "core/nn.hpp"

namespace phg {

// Cross-modal hierarchical matching: one shared-weight layer applied once per
// phrase hierarchy. Each layer runs hierarchical mask attention over the text
// (scores on the previous hierarchy's words shrink by 1 - 1/lambda, words
// beyond the current mask are shut out), adds the residual, then re-attends
// over the visual tokens.

using Mask = std::vector<uint8_t>;

struct HmAttnParams {
  Linear q, k, v;  // single-head projections
};

HmAttnParams make_hm_attn(ParameterSet& ps, const std::string& path, int channels, Rng& rng);

// Hoisted key/value projections: the text side is fixed while levels change.
struct HmProjected {
  Tensor k, v;
};
HmProjected project_hm_text(const HmAttnParams& p, const Tensor& text);

struct HmAttnOut {
  Tensor features;  // rows match the query input
  Tensor attn;      // query rows x N_s, rows sum to 1
};

// m_prev may be empty (level 1). In masked mode, words outside m_l get a
// -1e9 additive mask; in literal mode their scores are multiplied by zero and
// still compete in the softmax.
HmAttnOut hm_attn(const HmAttnParams& p, const Tensor& query_input, const Tensor& text,
                  const Mask& m_l, const Mask& m_prev, double lambda, MaskMode mode);
HmAttnOut hm_attn_projected(const HmAttnParams& p, const Tensor& query_input,
                            const HmProjected& kv, const Mask& m_l, const Mask& m_prev,
                            double lambda, MaskMode mode);

struct CmhmParams {
  HmAttnParams hm;
  Mha mh;
};

CmhmParams make_cmhm(ParameterSet& ps, int channels, int heads, Rng& rng);

struct CmhmLayerOut {
  Tensor features;     // N_v x C
  Tensor text_attn;    // N_v x N_s
  Tensor visual_attn;  // N_v x N_v from the follow-on attention (head mean)
};

CmhmLayerOut cmhm_layer(const CmhmParams& p, const Tensor& x_prev, const Tensor& visual,
                        const Tensor& text, const Mask& m_l, const Mask& m_prev, double lambda,
                        MaskMode mode);

struct HierarchyTrace {
  std::vector<Tensor> features;     // F~ per level, index 0 holds the input
  std::vector<Tensor> text_attn;    // per level, N_v x N_s
  std::vector<Tensor> visual_attn;  // per level, N_v x N_v
  const Tensor& final_features() const { return features.back(); }
};

HierarchyTrace cmhm_forward(const CmhmParams& p, const Tensor& f_gv, const Tensor& visual,
                            const Tensor& text, const std::vector<Mask>& masks, double lambda,
                            MaskMode mode);

// Column-wise score vectors used by both mask modes; exposed for tests.
// scale(j) applies multiplicatively to raw scores, bias(j) additively.
void hm_mask_vectors(const Mask& m_l, const Mask& m_prev, double lambda, MaskMode mode,
                     std::vector<double>& scale, std::vector<double>& bias);

}  // namespace phg
