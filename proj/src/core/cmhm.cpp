#include "core/cmhm.hpp"

#include <cmath>
#include <stdexcept>

namespace phg {

namespace {

Tensor tile_const_rows(const std::vector<double>& v, int rows) {
  std::vector<double> data(static_cast<size_t>(rows) * v.size());
  for (int r = 0; r < rows; ++r)
    std::copy(v.begin(), v.end(), data.begin() + static_cast<size_t>(r) * v.size());
  return Tensor::from(rows, static_cast<int>(v.size()), std::move(data));
}

void check_mask(const Mask& m, int n_s, const char* who) {
  if (!m.empty() && static_cast<int>(m.size()) != n_s)
    throw std::invalid_argument(std::string(who) + ": mask length " + std::to_string(m.size()) +
                                " does not match N_s = " + std::to_string(n_s));
}

}  // namespace

void hm_mask_vectors(const Mask& m_l, const Mask& m_prev, double lambda, MaskMode mode,
                     std::vector<double>& scale, std::vector<double>& bias) {
  size_t n = m_l.size();
  scale.assign(n, 1.0);
  bias.assign(n, 0.0);
  for (size_t j = 0; j < n; ++j) {
    double prev = (!m_prev.empty() && m_prev[j]) ? 1.0 : 0.0;
    double cur = m_l[j] ? 1.0 : 0.0;
    if (mode == MaskMode::literal) {
      // verbatim element-wise form: W_l - (1/lambda) W_{l-1}
      scale[j] = cur - prev / lambda;
      bias[j] = 0.0;
    } else {
      scale[j] = 1.0 - prev / lambda;
      bias[j] = m_l[j] ? 0.0 : kMaskNegative;
    }
  }
}

HmAttnParams make_hm_attn(ParameterSet& ps, const std::string& path, int channels, Rng& rng) {
  HmAttnParams p;
  p.q = make_linear(ps, path + ".q", channels, channels, true, rng);
  p.k = make_linear(ps, path + ".k", channels, channels, true, rng);
  p.v = make_linear(ps, path + ".v", channels, channels, true, rng);
  return p;
}

HmProjected project_hm_text(const HmAttnParams& p, const Tensor& text) {
  return {linear(p.k, text), linear(p.v, text)};
}

HmAttnOut hm_attn_projected(const HmAttnParams& p, const Tensor& query_input,
                            const HmProjected& kv, const Mask& m_l, const Mask& m_prev,
                            double lambda, MaskMode mode) {
  int n_s = kv.k.rows();
  check_mask(m_l, n_s, "hm_attn");
  if (m_l.empty()) throw std::invalid_argument("hm_attn: current mask must not be empty");
  check_mask(m_prev, n_s, "hm_attn");
  if (lambda <= 1.0)
    throw std::invalid_argument("hm_attn: lambda is a modulating factor greater than 1");

  Tensor q = linear(p.q, query_input);
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(q.cols()));  // d2 = key dim
  Tensor raw = scale(matmul(q, transpose(kv.k)), inv_sqrt);

  std::vector<double> col_scale, col_bias;
  hm_mask_vectors(m_l, m_prev, lambda, mode, col_scale, col_bias);
  Tensor eff = mul(raw, tile_const_rows(col_scale, raw.rows()));
  bool any_bias = false;
  for (double b : col_bias)
    if (b != 0.0) any_bias = true;
  if (any_bias) eff = add(eff, tile_const_rows(col_bias, raw.rows()));

  HmAttnOut out;
  out.attn = softmax_lastdim(eff);
  out.features = matmul(out.attn, kv.v);
  return out;
}

HmAttnOut hm_attn(const HmAttnParams& p, const Tensor& query_input, const Tensor& text,
                  const Mask& m_l, const Mask& m_prev, double lambda, MaskMode mode) {
  return hm_attn_projected(p, query_input, project_hm_text(p, text), m_l, m_prev, lambda, mode);
}

CmhmParams make_cmhm(ParameterSet& ps, int channels, int heads, Rng& rng) {
  CmhmParams p;
  p.hm = make_hm_attn(ps, "cmhm.hm", channels, rng);
  p.mh = make_mha(ps, "cmhm.mh", channels, heads, rng);
  return p;
}

CmhmLayerOut cmhm_layer(const CmhmParams& p, const Tensor& x_prev, const Tensor& visual,
                        const Tensor& text, const Mask& m_l, const Mask& m_prev, double lambda,
                        MaskMode mode) {
  HmAttnOut hm = hm_attn(p.hm, x_prev, text, m_l, m_prev, lambda, mode);
  Tensor fused = add(hm.features, x_prev);

  // queries and keys from the fused features, values from the visual tokens
  Tensor q = linear(p.mh.q, fused);
  Tensor k = linear(p.mh.k, fused);
  Tensor v = linear(p.mh.v, visual);

  int heads = p.mh.heads;
  int dh = q.cols() / heads;
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> outs;
  std::vector<double> attn_mean(static_cast<size_t>(q.rows()) * k.rows(), 0.0);
  for (int h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(q, h * dh, dh);
    Tensor kh = slice_cols(k, h * dh, dh);
    Tensor vh = slice_cols(v, h * dh, dh);
    Tensor attn = softmax_lastdim(scale(matmul(qh, transpose(kh)), inv_sqrt));
    outs.push_back(matmul(attn, vh));
    const auto& av = attn.values();
    for (size_t i = 0; i < attn_mean.size(); ++i) attn_mean[i] += av[i] / heads;
  }
  Tensor ctx = heads == 1 ? outs[0] : concat_cols(outs);

  CmhmLayerOut out;
  out.features = linear(p.mh.o, ctx);
  out.text_attn = hm.attn;
  out.visual_attn = Tensor::from(q.rows(), k.rows(), std::move(attn_mean));
  return out;
}

HierarchyTrace cmhm_forward(const CmhmParams& p, const Tensor& f_gv, const Tensor& visual,
                            const Tensor& text, const std::vector<Mask>& masks, double lambda,
                            MaskMode mode) {
  if (masks.empty()) throw std::invalid_argument("cmhm_forward: empty mask sequence");
  HierarchyTrace trace;
  trace.features.push_back(f_gv);
  Mask empty;
  for (size_t l = 0; l < masks.size(); ++l) {
    const Mask& prev = l == 0 ? empty : masks[l - 1];
    CmhmLayerOut out =
        cmhm_layer(p, trace.features.back(), visual, text, masks[l], prev, lambda, mode);
    trace.features.push_back(out.features);
    trace.text_attn.push_back(out.text_attn);
    trace.visual_attn.push_back(out.visual_attn);
  }
  return trace;
}

}  // namespace phg
