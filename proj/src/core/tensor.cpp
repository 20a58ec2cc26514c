#include "core/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace phg {

namespace {

thread_local bool g_grad_enabled = true;

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<EMat>;
using CMapM = Eigen::Map<const EMat>;

CMapM as_mat(const TensorNode& n) { return CMapM(n.value.data(), n.rows, n.cols); }

std::string shape_str(const TensorNode& n) {
  return std::to_string(n.rows) + "x" + std::to_string(n.cols);
}

void check_defined(const Tensor& t, const char* who) {
  if (!t.defined()) throw std::invalid_argument(std::string(who) + ": undefined tensor");
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* who) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(who) + ": shape mismatch " + shape_str(*a.node()) +
                                " vs " + shape_str(*b.node()));
}

NodePtr make_node(int rows, int cols) {
  auto n = std::make_shared<TensorNode>();
  n->rows = rows;
  n->cols = cols;
  n->value.assign(static_cast<size_t>(rows) * cols, 0.0);
  return n;
}

// Attaches the tape entry when grad flow is live for any input.
void record(const NodePtr& out, std::vector<NodePtr> inputs,
            std::function<void(TensorNode&)> fn) {
  if (!g_grad_enabled) return;
  bool live = false;
  for (const auto& p : inputs)
    if (p->requires_grad) live = true;
  if (!live) return;
  out->requires_grad = true;
  out->parents = std::move(inputs);
  out->backward_fn = std::move(fn);
}

void add_into(std::vector<double>& dst, const std::vector<double>& src) {
  for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tensor::Tensor(int rows, int cols, double fill) {
  if (rows <= 0 || cols <= 0)
    throw std::invalid_argument("Tensor: dimensions must be positive, got " +
                                std::to_string(rows) + "x" + std::to_string(cols));
  node_ = make_node(rows, cols);
  if (fill != 0.0) std::fill(node_->value.begin(), node_->value.end(), fill);
}

Tensor Tensor::from(int rows, int cols, std::vector<double> data) {
  if (static_cast<size_t>(rows) * cols != data.size())
    throw std::invalid_argument("Tensor::from: " + std::to_string(rows) + "x" +
                                std::to_string(cols) + " needs " + std::to_string(rows * cols) +
                                " values, got " + std::to_string(data.size()));
  Tensor t(rows, cols);
  t.node_->value = std::move(data);
  return t;
}

Tensor Tensor::row(std::vector<double> data) {
  int n = static_cast<int>(data.size());
  return from(1, n, std::move(data));
}

Tensor Tensor::scalar(double v) { return from(1, 1, {v}); }

double Tensor::item() const {
  if (size() != 1)
    throw std::invalid_argument("Tensor::item: expected 1x1, got " + shape_str(*node_));
  return node_->value[0];
}

Tensor& Tensor::set_requires_grad(bool b) {
  node_->requires_grad = b;
  return *this;
}

const std::vector<double>& Tensor::grad() const {
  if (!has_grad())
    throw std::runtime_error("Tensor::grad: no gradient recorded for this tensor");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_ && !node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  Tensor t(node_->rows, node_->cols);
  t.node_->value = node_->value;
  return t;
}

// -------------------------------------------------------------- elementwise

namespace {

template <typename Fwd, typename Bwd>
Tensor binary_elementwise(const Tensor& a, const Tensor& b, const char* who, Fwd fwd, Bwd bwd) {
  check_defined(a, who);
  check_defined(b, who);
  check_same_shape(a, b, who);
  auto out = make_node(a.rows(), a.cols());
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  for (size_t i = 0; i < av.size(); ++i) out->value[i] = fwd(av[i], bv[i]);
  NodePtr pa = a.node(), pb = b.node();
  record(out, {pa, pb}, [pa, pb, bwd](TensorNode& self) {
    for (size_t i = 0; i < self.grad.size(); ++i) {
      auto [da, db] = bwd(pa->value[i], pb->value[i], self.value[i]);
      if (pa->requires_grad) {
        pa->ensure_grad();
        pa->grad[i] += self.grad[i] * da;
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        pb->grad[i] += self.grad[i] * db;
      }
    }
  });
  return Tensor(out);
}

template <typename Fwd, typename Bwd>
Tensor unary_elementwise(const Tensor& a, const char* who, Fwd fwd, Bwd bwd) {
  check_defined(a, who);
  auto out = make_node(a.rows(), a.cols());
  const auto& av = a.node()->value;
  for (size_t i = 0; i < av.size(); ++i) out->value[i] = fwd(av[i]);
  NodePtr pa = a.node();
  record(out, {pa}, [pa, bwd](TensorNode& self) {
    pa->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      pa->grad[i] += self.grad[i] * bwd(pa->value[i], self.value[i]);
  });
  return Tensor(out);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double) { return std::pair<double, double>{1.0, 1.0}; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double) { return std::pair<double, double>{1.0, -1.0}; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double x, double y, double) { return std::pair<double, double>{y, x}; });
}

Tensor divide(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      a, b, "divide", [](double x, double y) { return x / y; },
      [](double x, double y, double) {
        return std::pair<double, double>{1.0 / y, -x / (y * y)};
      });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      a, b, "maximum", [](double x, double y) { return x >= y ? x : y; },
      [](double x, double y, double) {
        return x >= y ? std::pair<double, double>{1.0, 0.0} : std::pair<double, double>{0.0, 1.0};
      });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      a, b, "minimum", [](double x, double y) { return x <= y ? x : y; },
      [](double x, double y, double) {
        return x <= y ? std::pair<double, double>{1.0, 0.0} : std::pair<double, double>{0.0, 1.0};
      });
}

Tensor scale(const Tensor& a, double s) {
  return unary_elementwise(
      a, "scale", [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor relu(const Tensor& a) {
  return unary_elementwise(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_elementwise(
      a, "sigmoid",
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor abs_val(const Tensor& a) {
  return unary_elementwise(
      a, "abs_val", [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

// ----------------------------------------------------------- linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_defined(a, "matmul");
  check_defined(b, "matmul");
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: inner dimensions disagree, " + shape_str(*a.node()) +
                                " vs " + shape_str(*b.node()));
  auto out = make_node(a.rows(), b.cols());
  {
    MapM o(out->value.data(), out->rows, out->cols);
    o.noalias() = as_mat(*a.node()) * as_mat(*b.node());
  }
  NodePtr pa = a.node(), pb = b.node();
  record(out, {pa, pb}, [pa, pb](TensorNode& self) {
    CMapM g(self.grad.data(), self.rows, self.cols);
    if (pa->requires_grad) {
      pa->ensure_grad();
      MapM ga(pa->grad.data(), pa->rows, pa->cols);
      ga.noalias() += g * as_mat(*pb).transpose();
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      MapM gb(pb->grad.data(), pb->rows, pb->cols);
      gb.noalias() += as_mat(*pa).transpose() * g;
    }
  });
  return Tensor(out);
}

Tensor transpose(const Tensor& a) {
  check_defined(a, "transpose");
  auto out = make_node(a.cols(), a.rows());
  {
    MapM o(out->value.data(), out->rows, out->cols);
    o = as_mat(*a.node()).transpose();
  }
  NodePtr pa = a.node();
  record(out, {pa}, [pa](TensorNode& self) {
    pa->ensure_grad();
    MapM ga(pa->grad.data(), pa->rows, pa->cols);
    CMapM g(self.grad.data(), self.rows, self.cols);
    ga += g.transpose();
  });
  return Tensor(out);
}

// ------------------------------------------------------ reductions / bcasts

Tensor sum_all(const Tensor& a) {
  check_defined(a, "sum_all");
  auto out = make_node(1, 1);
  double s = 0.0;
  for (double v : a.node()->value) s += v;
  out->value[0] = s;
  NodePtr pa = a.node();
  record(out, {pa}, [pa](TensorNode& self) {
    pa->ensure_grad();
    for (double& g : pa->grad) g += self.grad[0];
  });
  return Tensor(out);
}

Tensor mean_all(const Tensor& a) { return scale(sum_all(a), 1.0 / a.size()); }

Tensor mean_over_rows(const Tensor& a) {
  check_defined(a, "mean_over_rows");
  int m = a.rows(), n = a.cols();
  auto out = make_node(1, n);
  const auto& av = a.node()->value;
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < n; ++c) out->value[c] += av[static_cast<size_t>(r) * n + c];
  for (int c = 0; c < n; ++c) out->value[c] /= m;
  NodePtr pa = a.node();
  record(out, {pa}, [pa, m, n](TensorNode& self) {
    pa->ensure_grad();
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < n; ++c)
        pa->grad[static_cast<size_t>(r) * n + c] += self.grad[c] / m;
  });
  return Tensor(out);
}

Tensor scale_rows(const Tensor& x, const Tensor& s) {
  check_defined(x, "scale_rows");
  check_defined(s, "scale_rows");
  if (s.rows() != x.rows() || s.cols() != 1)
    throw std::invalid_argument("scale_rows: scale must be " + std::to_string(x.rows()) +
                                "x1, got " + shape_str(*s.node()));
  int m = x.rows(), n = x.cols();
  auto out = make_node(m, n);
  const auto& xv = x.node()->value;
  const auto& sv = s.node()->value;
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < n; ++c)
      out->value[static_cast<size_t>(r) * n + c] = xv[static_cast<size_t>(r) * n + c] * sv[r];
  NodePtr px = x.node(), ps = s.node();
  record(out, {px, ps}, [px, ps, m, n](TensorNode& self) {
    if (px->requires_grad) {
      px->ensure_grad();
      for (int r = 0; r < m; ++r)
        for (int c = 0; c < n; ++c)
          px->grad[static_cast<size_t>(r) * n + c] +=
              self.grad[static_cast<size_t>(r) * n + c] * ps->value[r];
    }
    if (ps->requires_grad) {
      ps->ensure_grad();
      for (int r = 0; r < m; ++r) {
        double acc = 0.0;
        for (int c = 0; c < n; ++c)
          acc += self.grad[static_cast<size_t>(r) * n + c] *
                 px->value[static_cast<size_t>(r) * n + c];
        ps->grad[r] += acc;
      }
    }
  });
  return Tensor(out);
}

Tensor add_rowvec(const Tensor& x, const Tensor& b) {
  check_defined(x, "add_rowvec");
  check_defined(b, "add_rowvec");
  if (b.rows() != 1 || b.cols() != x.cols())
    throw std::invalid_argument("add_rowvec: bias must be 1x" + std::to_string(x.cols()) +
                                ", got " + shape_str(*b.node()));
  int m = x.rows(), n = x.cols();
  auto out = make_node(m, n);
  const auto& xv = x.node()->value;
  const auto& bv = b.node()->value;
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < n; ++c)
      out->value[static_cast<size_t>(r) * n + c] = xv[static_cast<size_t>(r) * n + c] + bv[c];
  NodePtr px = x.node(), pb = b.node();
  record(out, {px, pb}, [px, pb, m, n](TensorNode& self) {
    if (px->requires_grad) {
      px->ensure_grad();
      add_into(px->grad, self.grad);
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (int r = 0; r < m; ++r)
        for (int c = 0; c < n; ++c) pb->grad[c] += self.grad[static_cast<size_t>(r) * n + c];
    }
  });
  return Tensor(out);
}

// ------------------------------------------------------------------- shape

Tensor slice_cols(const Tensor& a, int start, int len) {
  check_defined(a, "slice_cols");
  if (start < 0 || len <= 0 || start + len > a.cols())
    throw std::invalid_argument("slice_cols: [" + std::to_string(start) + "," +
                                std::to_string(start + len) + ") out of range for " +
                                shape_str(*a.node()));
  int m = a.rows(), n = a.cols();
  auto out = make_node(m, len);
  const auto& av = a.node()->value;
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < len; ++c)
      out->value[static_cast<size_t>(r) * len + c] = av[static_cast<size_t>(r) * n + start + c];
  NodePtr pa = a.node();
  record(out, {pa}, [pa, start, m, n](TensorNode& self) {
    pa->ensure_grad();
    int len = self.cols;
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < len; ++c)
        pa->grad[static_cast<size_t>(r) * n + start + c] +=
            self.grad[static_cast<size_t>(r) * len + c];
  });
  return Tensor(out);
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
  int m = parts[0].rows();
  int n = 0;
  for (const auto& p : parts) {
    check_defined(p, "concat_cols");
    if (p.rows() != m)
      throw std::invalid_argument("concat_cols: row mismatch " + std::to_string(m) + " vs " +
                                  std::to_string(p.rows()));
    n += p.cols();
  }
  auto out = make_node(m, n);
  int off = 0;
  std::vector<NodePtr> ps;
  std::vector<int> offsets;
  for (const auto& p : parts) {
    const auto& pv = p.node()->value;
    int pc = p.cols();
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < pc; ++c)
        out->value[static_cast<size_t>(r) * n + off + c] = pv[static_cast<size_t>(r) * pc + c];
    ps.push_back(p.node());
    offsets.push_back(off);
    off += pc;
  }
  record(out, ps, [ps, offsets, m, n](TensorNode& self) {
    for (size_t i = 0; i < ps.size(); ++i) {
      if (!ps[i]->requires_grad) continue;
      ps[i]->ensure_grad();
      int pc = ps[i]->cols, off = offsets[i];
      for (int r = 0; r < m; ++r)
        for (int c = 0; c < pc; ++c)
          ps[i]->grad[static_cast<size_t>(r) * pc + c] +=
              self.grad[static_cast<size_t>(r) * n + off + c];
    }
  });
  return Tensor(out);
}

// -------------------------------------------------------------- composites

Tensor softmax_lastdim(const Tensor& x, const Tensor& additive_mask) {
  check_defined(x, "softmax_lastdim");
  if (x.cols() < 1) throw std::invalid_argument("softmax_lastdim: empty last dimension");
  if (additive_mask.defined()) check_same_shape(x, additive_mask, "softmax_lastdim(mask)");
  int m = x.rows(), n = x.cols();
  auto out = make_node(m, n);
  const auto& xv = x.node()->value;
  const double* mv = additive_mask.defined() ? additive_mask.node()->value.data() : nullptr;
  for (int r = 0; r < m; ++r) {
    size_t base = static_cast<size_t>(r) * n;
    double mx = -HUGE_VAL;
    for (int c = 0; c < n; ++c) {
      double z = xv[base + c] + (mv ? mv[base + c] : 0.0);
      if (z > mx) mx = z;
    }
    double sum = 0.0;
    for (int c = 0; c < n; ++c) {
      double z = xv[base + c] + (mv ? mv[base + c] : 0.0);
      double e = std::exp(z - mx);
      out->value[base + c] = e;
      sum += e;
    }
    for (int c = 0; c < n; ++c) out->value[base + c] /= sum;
  }
  NodePtr px = x.node();
  std::vector<NodePtr> ins = {px};
  NodePtr pm;
  if (additive_mask.defined()) {
    pm = additive_mask.node();
    ins.push_back(pm);
  }
  record(out, ins, [px, pm, m, n](TensorNode& self) {
    for (int r = 0; r < m; ++r) {
      size_t base = static_cast<size_t>(r) * n;
      double dot = 0.0;
      for (int c = 0; c < n; ++c) dot += self.grad[base + c] * self.value[base + c];
      for (int c = 0; c < n; ++c) {
        double dz = self.value[base + c] * (self.grad[base + c] - dot);
        if (px->requires_grad) {
          px->ensure_grad();
          px->grad[base + c] += dz;
        }
        if (pm && pm->requires_grad) {
          pm->ensure_grad();
          pm->grad[base + c] += dz;
        }
      }
    }
  });
  return Tensor(out);
}

Tensor row_cosine(const Tensor& a, const Tensor& b) {
  check_defined(a, "row_cosine");
  check_defined(b, "row_cosine");
  check_same_shape(a, b, "row_cosine");
  int m = a.rows(), n = a.cols();
  auto out = make_node(m, 1);
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  std::vector<double> na(m), nb(m);
  for (int r = 0; r < m; ++r) {
    size_t base = static_cast<size_t>(r) * n;
    double dot = 0.0, qa = 0.0, qb = 0.0;
    for (int c = 0; c < n; ++c) {
      dot += av[base + c] * bv[base + c];
      qa += av[base + c] * av[base + c];
      qb += bv[base + c] * bv[base + c];
    }
    na[r] = std::sqrt(qa);
    nb[r] = std::sqrt(qb);
    out->value[r] = (na[r] == 0.0 || nb[r] == 0.0) ? 0.0 : dot / (na[r] * nb[r]);
  }
  NodePtr pa = a.node(), pb = b.node();
  record(out, {pa, pb}, [pa, pb, na, nb, m, n](TensorNode& self) {
    for (int r = 0; r < m; ++r) {
      if (na[r] == 0.0 || nb[r] == 0.0) continue;  // flat zero: no gradient
      size_t base = static_cast<size_t>(r) * n;
      double s = self.value[r], g = self.grad[r];
      double inv = 1.0 / (na[r] * nb[r]);
      for (int c = 0; c < n; ++c) {
        double x = pa->value[base + c], y = pb->value[base + c];
        if (pa->requires_grad) {
          pa->ensure_grad();
          pa->grad[base + c] += g * (y * inv - s * x / (na[r] * na[r]));
        }
        if (pb->requires_grad) {
          pb->ensure_grad();
          pb->grad[base + c] += g * (x * inv - s * y / (nb[r] * nb[r]));
        }
      }
    }
  });
  return Tensor(out);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  check_defined(x, "layer_norm");
  check_defined(gamma, "layer_norm");
  check_defined(beta, "layer_norm");
  int m = x.rows(), n = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != n || beta.rows() != 1 || beta.cols() != n)
    throw std::invalid_argument("layer_norm: gamma/beta must be 1x" + std::to_string(n));
  auto out = make_node(m, n);
  const auto& xv = x.node()->value;
  const auto& gv = gamma.node()->value;
  const auto& betav = beta.node()->value;
  std::vector<double> mean(m), rstd(m);
  for (int r = 0; r < m; ++r) {
    size_t base = static_cast<size_t>(r) * n;
    double mu = 0.0;
    for (int c = 0; c < n; ++c) mu += xv[base + c];
    mu /= n;
    double var = 0.0;
    for (int c = 0; c < n; ++c) {
      double d = xv[base + c] - mu;
      var += d * d;
    }
    var /= n;
    mean[r] = mu;
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (int c = 0; c < n; ++c)
      out->value[base + c] = (xv[base + c] - mu) * rstd[r] * gv[c] + betav[c];
  }
  NodePtr px = x.node(), pg = gamma.node(), pbt = beta.node();
  record(out, {px, pg, pbt}, [px, pg, pbt, mean, rstd, m, n](TensorNode& self) {
    for (int r = 0; r < m; ++r) {
      size_t base = static_cast<size_t>(r) * n;
      // dxhat, plus the two row-level reductions the chain rule needs
      double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
      std::vector<double> dxhat(n), xhat(n);
      for (int c = 0; c < n; ++c) {
        xhat[c] = (px->value[base + c] - mean[r]) * rstd[r];
        dxhat[c] = self.grad[base + c] * pg->value[c];
        sum_dxhat += dxhat[c];
        sum_dxhat_xhat += dxhat[c] * xhat[c];
      }
      if (px->requires_grad) {
        px->ensure_grad();
        for (int c = 0; c < n; ++c)
          px->grad[base + c] +=
              rstd[r] * (dxhat[c] - sum_dxhat / n - xhat[c] * sum_dxhat_xhat / n);
      }
      if (pg->requires_grad) {
        pg->ensure_grad();
        for (int c = 0; c < n; ++c) pg->grad[c] += self.grad[base + c] * xhat[c];
      }
      if (pbt->requires_grad) {
        pbt->ensure_grad();
        for (int c = 0; c < n; ++c) pbt->grad[c] += self.grad[base + c];
      }
    }
  });
  return Tensor(out);
}

Tensor embedding(const Tensor& table, const std::vector<int>& ids) {
  check_defined(table, "embedding");
  if (ids.empty()) throw std::invalid_argument("embedding: empty id sequence");
  int v = table.rows(), n = table.cols();
  for (int id : ids)
    if (id < 0 || id >= v)
      throw std::invalid_argument("embedding: id " + std::to_string(id) +
                                  " out of range for vocabulary of " + std::to_string(v));
  int m = static_cast<int>(ids.size());
  auto out = make_node(m, n);
  const auto& tv = table.node()->value;
  for (int r = 0; r < m; ++r)
    std::copy(tv.begin() + static_cast<size_t>(ids[r]) * n,
              tv.begin() + static_cast<size_t>(ids[r] + 1) * n,
              out->value.begin() + static_cast<size_t>(r) * n);
  NodePtr pt = table.node();
  record(out, {pt}, [pt, ids, n](TensorNode& self) {
    pt->ensure_grad();
    for (size_t r = 0; r < ids.size(); ++r)
      for (int c = 0; c < n; ++c)
        pt->grad[static_cast<size_t>(ids[r]) * n + c] += self.grad[r * n + c];
  });
  return Tensor(out);
}

Tensor sinusoid_embed(const Tensor& v, int dim, double base) {
  check_defined(v, "sinusoid_embed");
  if (v.size() != 1) throw std::invalid_argument("sinusoid_embed: input must be 1x1");
  if (dim < 2) throw std::invalid_argument("sinusoid_embed: dim must be >= 2");
  auto out = make_node(1, dim);
  double x = v.node()->value[0];
  std::vector<double> freq((dim + 1) / 2);
  for (size_t k = 0; k < freq.size(); ++k)
    freq[k] = std::pow(base, -2.0 * static_cast<double>(k) / dim);
  for (int i = 0; i < dim; ++i) {
    double f = freq[i / 2];
    out->value[i] = (i % 2 == 0) ? std::sin(x * f) : std::cos(x * f);
  }
  NodePtr pv = v.node();
  record(out, {pv}, [pv, freq, dim](TensorNode& self) {
    pv->ensure_grad();
    double x = pv->value[0];
    double acc = 0.0;
    for (int i = 0; i < dim; ++i) {
      double f = freq[i / 2];
      double d = (i % 2 == 0) ? std::cos(x * f) * f : -std::sin(x * f) * f;
      acc += self.grad[i] * d;
    }
    pv->grad[0] += acc;
  });
  return Tensor(out);
}

// ---------------------------------------------------------------- backward

void backward(const Tensor& loss) {
  check_defined(loss, "backward");
  if (loss.size() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(*loss.node()));
  NodePtr root = loss.node();
  if (!root->requires_grad) return;  // detached from every parameter

  // Deterministic post-order over the tape (iterative; graphs can be deep).
  std::vector<TensorNode*> order;
  std::vector<std::pair<TensorNode*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  root->visit_mark = 1;
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      TensorNode* p = node->parents[idx].get();
      ++idx;
      if (p->visit_mark == 0 && p->requires_grad && !p->parents.empty()) {
        p->visit_mark = 1;
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* node = *it;
    node->visit_mark = 0;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
  // Release the tape; leaves keep their grads for the optimizer.
  for (TensorNode* node : order) {
    node->parents.clear();
    node->backward_fn = nullptr;
  }
}

}  // namespace phg
