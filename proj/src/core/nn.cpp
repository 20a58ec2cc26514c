#include "core/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace phg {

Tensor& ParameterSet::create(const std::string& path, int rows, int cols, int fan_in, Rng& rng) {
  if (params.count(path))
    throw std::invalid_argument("ParameterSet: duplicate parameter path " + path);
  Tensor t(rows, cols);
  if (fan_in > 0) {
    double bound = std::sqrt(1.0 / fan_in);
    for (double& v : t.values()) v = rng.uniform(-bound, bound);
  }
  t.set_requires_grad(true);
  auto [it, ok] = params.emplace(path, t);
  (void)ok;
  return it->second;
}

Tensor& ParameterSet::create_const(const std::string& path, int rows, int cols, double fill) {
  if (params.count(path))
    throw std::invalid_argument("ParameterSet: duplicate parameter path " + path);
  Tensor t(rows, cols, fill);
  t.set_requires_grad(true);
  auto [it, ok] = params.emplace(path, t);
  (void)ok;
  return it->second;
}

Tensor& ParameterSet::at(const std::string& path) {
  auto it = params.find(path);
  if (it == params.end()) throw std::invalid_argument("ParameterSet: no parameter " + path);
  return it->second;
}

const Tensor& ParameterSet::at(const std::string& path) const {
  auto it = params.find(path);
  if (it == params.end()) throw std::invalid_argument("ParameterSet: no parameter " + path);
  return it->second;
}

void ParameterSet::zero_grads() {
  for (auto& [path, t] : params) t.zero_grad();
}

size_t ParameterSet::scalar_count() const {
  size_t n = 0;
  for (const auto& [path, t] : params) n += t.size();
  return n;
}

void adamw_step(ParameterSet& ps, const AdamWConfig& cfg) {
  std::string missing;
  for (const auto& [path, t] : ps.params) {
    if (!t.has_grad()) missing += (missing.empty() ? "" : ", ") + path;
  }
  if (!missing.empty())
    throw std::runtime_error("adamw_step: parameters without gradients: " + missing);

  ps.step_count += 1;
  double t = static_cast<double>(ps.step_count);
  double bc1 = 1.0 - std::pow(cfg.beta1, t);
  double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [path, p] : ps.params) {
    auto& m = ps.adam_m[path];
    auto& v = ps.adam_v[path];
    if (m.empty()) m.assign(p.size(), 0.0);
    if (v.empty()) v.assign(p.size(), 0.0);
    const auto& g = p.grad();
    auto& w = p.values();
    for (size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      w[i] -= cfg.lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * w[i]);
    }
  }
}

// ------------------------------------------------------------------ layers

Linear make_linear(ParameterSet& ps, const std::string& path, int in, int out, bool bias,
                   Rng& rng) {
  Linear l;
  l.w = ps.create(path + ".w", in, out, in, rng);
  if (bias) l.b = ps.create(path + ".b", 1, out, 0, rng);
  return l;
}

Tensor linear(const Linear& l, const Tensor& x) {
  Tensor y = matmul(x, l.w);
  if (l.b.defined()) y = add_rowvec(y, l.b);
  return y;
}

Mha make_mha(ParameterSet& ps, const std::string& path, int dim, int heads, Rng& rng) {
  if (heads < 1 || dim % heads != 0)
    throw std::invalid_argument("make_mha: dim " + std::to_string(dim) +
                                " not divisible by heads " + std::to_string(heads));
  Mha m;
  m.q = make_linear(ps, path + ".q", dim, dim, true, rng);
  m.k = make_linear(ps, path + ".k", dim, dim, true, rng);
  m.v = make_linear(ps, path + ".v", dim, dim, true, rng);
  m.o = make_linear(ps, path + ".o", dim, dim, true, rng);
  m.heads = heads;
  return m;
}

namespace {

Tensor tile_rows(const Tensor& rowvec, int rows) {
  std::vector<double> out(static_cast<size_t>(rows) * rowvec.cols());
  for (int r = 0; r < rows; ++r)
    std::copy(rowvec.values().begin(), rowvec.values().end(),
              out.begin() + static_cast<size_t>(r) * rowvec.cols());
  return Tensor::from(rows, rowvec.cols(), std::move(out));
}

Tensor attention_core(const Tensor& q_proj, const Tensor& k_proj, const Tensor& v_proj,
                      int heads, const Tensor& key_mask) {
  int dim = q_proj.cols();
  int dh = dim / heads;
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor mask_full;
  if (key_mask.defined()) mask_full = tile_rows(key_mask, q_proj.rows());
  std::vector<Tensor> head_outs;
  head_outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(q_proj, h * dh, dh);
    Tensor kh = slice_cols(k_proj, h * dh, dh);
    Tensor vh = slice_cols(v_proj, h * dh, dh);
    Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
    Tensor attn = softmax_lastdim(scores, mask_full);
    head_outs.push_back(matmul(attn, vh));
  }
  return heads == 1 ? head_outs[0] : concat_cols(head_outs);
}

}  // namespace

Tensor mha(const Mha& p, const Tensor& q_in, const Tensor& k_in, const Tensor& v_in,
           const Tensor& key_mask) {
  if (q_in.cols() != p.q.w.rows())
    throw std::invalid_argument("mha: query feature dim " + std::to_string(q_in.cols()) +
                                " does not match projection " + std::to_string(p.q.w.rows()));
  if (k_in.rows() != v_in.rows())
    throw std::invalid_argument("mha: key/value length mismatch");
  Tensor qp = linear(p.q, q_in);
  Tensor kp = linear(p.k, k_in);
  Tensor vp = linear(p.v, v_in);
  Tensor ctx = attention_core(qp, kp, vp, p.heads, key_mask);
  return linear(p.o, ctx);
}

Tensor mha_projected(const Mha& p, const Tensor& q_in, const Tensor& k_proj,
                     const Tensor& v_proj, const Tensor& key_mask) {
  Tensor qp = linear(p.q, q_in);
  Tensor ctx = attention_core(qp, k_proj, v_proj, p.heads, key_mask);
  return linear(p.o, ctx);
}

LayerNormParams make_layer_norm(ParameterSet& ps, const std::string& path, int dim) {
  LayerNormParams ln;
  ln.gamma = ps.create_const(path + ".gamma", 1, dim, 1.0);
  ln.beta = ps.create_const(path + ".beta", 1, dim, 0.0);
  return ln;
}

EncoderLayer make_encoder_layer(ParameterSet& ps, const std::string& path, int dim, int heads,
                                int ff_dim, Rng& rng) {
  EncoderLayer l;
  l.attn = make_mha(ps, path + ".attn", dim, heads, rng);
  l.ln1 = make_layer_norm(ps, path + ".ln1", dim);
  l.ln2 = make_layer_norm(ps, path + ".ln2", dim);
  l.ff.fc1 = make_linear(ps, path + ".ff1", dim, ff_dim, true, rng);
  l.ff.fc2 = make_linear(ps, path + ".ff2", ff_dim, dim, true, rng);
  return l;
}

Tensor encoder_layer(const EncoderLayer& p, const Tensor& x) {
  Tensor h = layer_norm(x, p.ln1.gamma, p.ln1.beta);
  Tensor y = add(x, mha(p.attn, h, h, h));
  Tensor h2 = layer_norm(y, p.ln2.gamma, p.ln2.beta);
  return add(y, linear(p.ff.fc2, relu(linear(p.ff.fc1, h2))));
}

Tensor additive_mask_row(const std::vector<uint8_t>& bits) {
  std::vector<double> m(bits.size());
  for (size_t i = 0; i < bits.size(); ++i) m[i] = bits[i] ? 0.0 : kMaskNegative;
  return Tensor::row(std::move(m));
}

}  // namespace phg
