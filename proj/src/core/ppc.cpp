#include "core/ppc.hpp"

#include <cmath>
#include <stdexcept>

namespace phg {

PpcParams make_ppc(ParameterSet& ps, int channels, int heads, bool with_hpc, Rng& rng) {
  PpcParams p;
  p.hm = make_hm_attn(ps, "ppc.hm", channels, rng);
  p.mh = make_mha(ps, "ppc.mh", channels, heads, rng);
  p.head_fc1 = make_linear(ps, "ppc.head1", channels, channels, true, rng);
  p.head_fc2 = make_linear(ps, "ppc.head2", channels, 4, true, rng);
  p.q0 = ps.create("ppc.q0", 1, channels, channels, rng);
  p.with_hpc = with_hpc;
  if (with_hpc) {
    p.delta_fc1 = make_linear(ps, "ppc.delta1", channels, channels, true, rng);
    p.delta_fc2 = make_linear(ps, "ppc.delta2", channels, 4, true, rng);
    p.theta = make_linear(ps, "ppc.theta", channels, channels, true, rng);
  }
  return p;
}

HsaContext make_hsa_context(const PpcParams& p, const Tensor& text, const Tensor& visual,
                            const Tensor& f_final) {
  if (visual.rows() != f_final.rows() || visual.cols() != f_final.cols())
    throw std::invalid_argument("hsa: matching output and visual tokens must both be N_v x C");
  HsaContext ctx;
  ctx.text_kv = project_hm_text(p.hm, text);
  ctx.visual_k = linear(p.mh.k, f_final);
  ctx.visual_v = linear(p.mh.v, visual);
  return ctx;
}

HsaOut hsa_projected(const PpcParams& p, const Tensor& q_prev, const HsaContext& ctx,
                     const Mask& m_l, const Mask& m_prev, double lambda, MaskMode mode) {
  HmAttnOut text_side = hm_attn_projected(p.hm, q_prev, ctx.text_kv, m_l, m_prev, lambda, mode);

  Tensor q = linear(p.mh.q, text_side.features);
  int heads = p.mh.heads;
  int dh = q.cols() / heads;
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> outs;
  std::vector<double> attn_mean(static_cast<size_t>(ctx.visual_k.rows()), 0.0);
  for (int h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(q, h * dh, dh);
    Tensor kh = slice_cols(ctx.visual_k, h * dh, dh);
    Tensor vh = slice_cols(ctx.visual_v, h * dh, dh);
    Tensor attn = softmax_lastdim(scale(matmul(qh, transpose(kh)), inv_sqrt));
    outs.push_back(matmul(attn, vh));
    const auto& av = attn.values();
    for (size_t i = 0; i < attn_mean.size(); ++i) attn_mean[i] += av[i] / heads;
  }
  Tensor aggregated = linear(p.mh.o, heads == 1 ? outs[0] : concat_cols(outs));

  HsaOut out;
  out.query = aggregated;
  out.visual_attn = Tensor::from(1, ctx.visual_k.rows(), std::move(attn_mean));
  return out;
}

HsaOut hsa(const PpcParams& p, const Tensor& q_prev, const Tensor& text, const Mask& m_l,
           const Mask& m_prev, const Tensor& visual, const Tensor& f_final, double lambda,
           MaskMode mode) {
  return hsa_projected(p, q_prev, make_hsa_context(p, text, visual, f_final), m_l, m_prev,
                       lambda, mode);
}

Tensor correct_box(const PpcParams& p, const Tensor& q, const Tensor& b_prev, BoxMode mode) {
  Tensor delta = sigmoid(linear(p.delta_fc2, relu(linear(p.delta_fc1, q))));
  if (mode == BoxMode::literal) return add(b_prev, delta);
  Tensor shifted = add(b_prev, add(delta, Tensor(1, 4, -0.5)));
  Tensor zero(1, 4, 0.0), one(1, 4, 1.0);
  return minimum(maximum(shifted, zero), one);
}

Tensor embed_box(const PpcParams& p, const Tensor& box) {
  if (box.rows() != 1 || box.cols() != 4)
    throw std::invalid_argument("embed_box: box must be 1x4");
  int channels = p.theta.w.rows();
  if (channels % 4 != 0)
    throw std::invalid_argument("embed_box: channels must be divisible by 4");
  int quarter = channels / 4;
  std::vector<Tensor> parts;
  parts.reserve(4);
  for (int c = 0; c < 4; ++c) parts.push_back(sinusoid_embed(slice_cols(box, c, 1), quarter));
  return linear(p.theta, concat_cols(parts));
}

Tensor fuse_query(const Tensor& q_box, const Tensor& q) { return add(q_box, q); }

GroundingPrediction ppc_forward(const PpcParams& p, const Tensor& text,
                                const std::vector<Mask>& masks, const Tensor& visual,
                                const Tensor& f_final, int iterations, double lambda,
                                MaskMode mask_mode, BoxMode box_mode, BoxCarry carry) {
  if (iterations < 1) throw std::invalid_argument("ppc_forward: iterations must be >= 1");
  if (masks.empty()) throw std::invalid_argument("ppc_forward: empty mask sequence");

  HsaContext ctx = make_hsa_context(p, text, visual, f_final);
  GroundingPrediction pred;
  Tensor q_carry = p.q0;
  Tensor box(1, 4, 0.0);  // b^0
  Mask empty;

  for (int n = 0; n < iterations; ++n) {
    if (p.with_hpc && carry == BoxCarry::reset) box = Tensor(1, 4, 0.0);
    std::vector<Tensor> layer_hist;
    std::vector<Tensor> attn_hist;
    for (size_t l = 0; l < masks.size(); ++l) {
      const Mask& prev = l == 0 ? empty : masks[l - 1];
      HsaOut agg = hsa_projected(p, q_carry, ctx, masks[l], prev, lambda, mask_mode);
      attn_hist.push_back(agg.visual_attn);
      if (p.with_hpc) {
        box = correct_box(p, agg.query, box, box_mode);
        layer_hist.push_back(box);
        q_carry = fuse_query(embed_box(p, box), agg.query);
      } else {
        q_carry = agg.query;
      }
    }
    pred.boxes.push_back(sigmoid(linear(p.head_fc2, relu(linear(p.head_fc1, q_carry)))));
    pred.layer_boxes.push_back(std::move(layer_hist));
    pred.hsa_visual_attn.push_back(std::move(attn_hist));
  }
  return pred;
}

}  // namespace phg
