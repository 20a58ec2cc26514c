#pragma once

#include <vector>

#include "core/cmhm.hpp"
#include "core/nn.hpp"

namespace phg {

// Progressive position correction: L shared layers (hierarchical semantic
// aggregation + hierarchical position correction) iterated N times. The
// target query threads through layers and iterations; each layer adds a
// sigmoid box delta and feeds the embedded box back into the query.

struct PpcParams {
  HmAttnParams hm;       // text side of HSA
  Mha mh;                // visual side of HSA
  Linear delta_fc1, delta_fc2;  // box delta MLP, C -> C -> 4
  Linear theta;          // box embedding projection, C -> C
  Linear head_fc1, head_fc2;    // per-iteration box head, C -> C -> 4
  Tensor q0;             // initial target query, 1 x C (trained)
  bool with_hpc = true;  // false drops the box feedback path entirely
};

PpcParams make_ppc(ParameterSet& ps, int channels, int heads, bool with_hpc, Rng& rng);

// Precomputed projections shared by every HSA application in a forward pass.
struct HsaContext {
  HmProjected text_kv;   // from F_s,t
  Tensor visual_k;       // from the final matching output
  Tensor visual_v;       // from F_v,t
};
HsaContext make_hsa_context(const PpcParams& p, const Tensor& text, const Tensor& visual,
                            const Tensor& f_final);

struct HsaOut {
  Tensor query;        // 1 x C
  Tensor visual_attn;  // 1 x N_v (head mean, plain values)
};

HsaOut hsa_projected(const PpcParams& p, const Tensor& q_prev, const HsaContext& ctx,
                     const Mask& m_l, const Mask& m_prev, double lambda, MaskMode mode);
// One-shot form matching the module contract.
HsaOut hsa(const PpcParams& p, const Tensor& q_prev, const Tensor& text, const Mask& m_l,
           const Mask& m_prev, const Tensor& visual, const Tensor& f_final, double lambda,
           MaskMode mode);

// sigma(MLP(Q)) added onto the previous box. Centered mode recenters the
// delta to sigma - 0.5 and clamps the result into the unit box; literal mode
// is the verbatim accumulate-only form.
Tensor correct_box(const PpcParams& p, const Tensor& q, const Tensor& b_prev, BoxMode mode);

// Sinusoid expansion of each coordinate to C/4 channels, concatenated and
// passed through the fully connected embedding.
Tensor embed_box(const PpcParams& p, const Tensor& box);
Tensor fuse_query(const Tensor& q_box, const Tensor& q);

struct GroundingPrediction {
  std::vector<Tensor> boxes;                         // B_n, 1 x 4 in [0,1]
  std::vector<std::vector<Tensor>> layer_boxes;      // b_n^l for l = 1..L
  std::vector<std::vector<Tensor>> hsa_visual_attn;  // per iteration, per layer
};

GroundingPrediction ppc_forward(const PpcParams& p, const Tensor& text,
                                const std::vector<Mask>& masks, const Tensor& visual,
                                const Tensor& f_final, int iterations, double lambda,
                                MaskMode mask_mode, BoxMode box_mode, BoxCarry carry);

}  // namespace phg
