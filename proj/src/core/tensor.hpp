#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace phg {

// Dense row-major matrix of 64-bit floats with an optional reverse-mode tape.
// Vectors are 1xN or Nx1 matrices; scalars are 1x1. The tape for one forward
// pass is held through shared parent links and is released by backward().

struct TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

struct TensorNode {
  int rows = 0;
  int cols = 0;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first touched by backward()
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(TensorNode&)> backward_fn;
  int visit_mark = 0;

  int size() const { return rows * cols; }
  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr n) : node_(std::move(n)) {}
  Tensor(int rows, int cols, double fill = 0.0);

  static Tensor from(int rows, int cols, std::vector<double> data);
  static Tensor row(std::vector<double> data);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  int rows() const { return node_->rows; }
  int cols() const { return node_->cols; }
  int size() const { return node_->size(); }

  double at(int r, int c) const { return node_->value[static_cast<size_t>(r) * node_->cols + c]; }
  double& at(int r, int c) { return node_->value[static_cast<size_t>(r) * node_->cols + c]; }
  double item() const;

  const std::vector<double>& values() const { return node_->value; }
  std::vector<double>& values() { return node_->value; }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool b);
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  const std::vector<double>& grad() const;
  void zero_grad();
  Tensor detach() const;

  NodePtr node() const { return node_; }

 private:
  NodePtr node_;
};

// Thread-local switch: while disabled, no tape is recorded and outputs do not
// require grad. Used for inference and metric evaluation.
bool grad_enabled();
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor abs_val(const Tensor& a);
Tensor maximum(const Tensor& a, const Tensor& b);  // ties take a's side
Tensor minimum(const Tensor& a, const Tensor& b);

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// ---- reductions / broadcasts ----
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor mean_over_rows(const Tensor& a);               // m x n -> 1 x n
Tensor scale_rows(const Tensor& x, const Tensor& s);  // s: m x 1
Tensor add_rowvec(const Tensor& x, const Tensor& b);  // b: 1 x n

// ---- shape ----
Tensor slice_cols(const Tensor& a, int start, int len);
Tensor concat_cols(const std::vector<Tensor>& parts);

// ---- nonlinear composites with bespoke gradients ----
Tensor softmax_lastdim(const Tensor& x, const Tensor& additive_mask = Tensor());
Tensor row_cosine(const Tensor& a, const Tensor& b);  // m x 1; 0 on zero-norm rows
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
Tensor embedding(const Tensor& table, const std::vector<int>& ids);
Tensor sinusoid_embed(const Tensor& v, int dim, double base = 10000.0);  // v: 1x1

// Fills grads of every tensor reachable from `loss` that requires grad.
// Grads accumulate across calls; the tape is released afterwards.
void backward(const Tensor& loss);

}  // namespace phg
