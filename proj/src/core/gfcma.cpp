#include "core/gfcma.hpp"

#include <stdexcept>

namespace phg {

GfcmaParams make_gfcma(ParameterSet& ps, int channels, int heads, Rng& rng) {
  GfcmaParams p;
  p.cross_attn = make_mha(ps, "gfcma.attn", channels, heads, rng);
  p.map_visual = make_linear(ps, "gfcma.map_v", channels, channels, false, rng);
  p.map_text = make_linear(ps, "gfcma.map_t", channels, channels, false, rng);
  return p;
}

Tensor cross_modal_attention(const GfcmaParams& p, const Tensor& visual, const Tensor& text) {
  if (visual.cols() != text.cols())
    throw std::invalid_argument("cross_modal_attention: channel mismatch " +
                                std::to_string(visual.cols()) + " vs " +
                                std::to_string(text.cols()));
  return mha(p.cross_attn, visual, text, text);
}

AlignedVisual global_alignment(const GfcmaParams& p, const Tensor& visual,
                               const Tensor& text_enriched, double lambda_star) {
  if (visual.rows() != text_enriched.rows() || visual.cols() != text_enriched.cols())
    throw std::invalid_argument("global_alignment: inputs must both be N_v x C");
  if (lambda_star <= 0.0)
    throw std::invalid_argument("global_alignment: lambda_star must be positive");

  Tensor vis_mapped = linear(p.map_visual, visual);
  Tensor txt_mapped = linear(p.map_text, text_enriched);
  Tensor cos = row_cosine(vis_mapped, txt_mapped);  // N_v x 1

  // softmax over the visual index with inverse temperature lambda*
  Tensor weights = transpose(softmax_lastdim(scale(transpose(cos), lambda_star)));

  AlignedVisual out;
  out.features = scale_rows(visual, weights);
  out.weights = weights;
  out.cosine = cos;
  return out;
}

}  // namespace phg
