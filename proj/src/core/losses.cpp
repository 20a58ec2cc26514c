#include "core/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace phg {

double l1_box(const Box& a, const Box& b) {
  return std::fabs(a.cx - b.cx) + std::fabs(a.cy - b.cy) + std::fabs(a.w - b.w) +
         std::fabs(a.h - b.h);
}

double iou(const Box& a, const Box& b) { return box_iou(a, b); }

double giou(const Box& a, const Box& b) {
  if (a.w < 0 || a.h < 0 || b.w < 0 || b.h < 0)
    throw std::invalid_argument("giou: box sides must be non-negative");
  double ax1 = a.cx - a.w / 2, ay1 = a.cy - a.h / 2, ax2 = a.cx + a.w / 2, ay2 = a.cy + a.h / 2;
  double bx1 = b.cx - b.w / 2, by1 = b.cy - b.h / 2, bx2 = b.cx + b.w / 2, by2 = b.cy + b.h / 2;
  double iw = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
  double ih = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
  double inter = iw * ih;
  double uni = a.w * a.h + b.w * b.h - inter;
  if (uni <= 0.0) return 0.0;  // both degenerate
  double hull = (std::max(ax2, bx2) - std::min(ax1, bx1)) *
                (std::max(ay2, by2) - std::min(ay1, by1));
  double v = inter / uni;
  if (hull > 0.0) v -= (hull - uni) / hull;
  return v;
}

double prec_at_iou(const std::vector<Box>& predictions, const std::vector<Box>& ground_truth,
                   double threshold) {
  if (predictions.empty()) throw std::invalid_argument("prec_at_iou: empty prediction list");
  if (predictions.size() != ground_truth.size())
    throw std::invalid_argument("prec_at_iou: list lengths differ");
  size_t hits = 0;
  for (size_t i = 0; i < predictions.size(); ++i)
    if (iou(predictions[i], ground_truth[i]) > threshold) ++hits;
  return static_cast<double>(hits) / predictions.size();
}

// ------------------------------------------------------------ tape versions

Tensor l1_box_t(const Tensor& a, const Tensor& b) { return sum_all(abs_val(sub(a, b))); }

namespace {

struct TCorners {
  Tensor x1, y1, x2, y2, area;
};

TCorners corners(const Tensor& box) {
  Tensor cx = slice_cols(box, 0, 1);
  Tensor cy = slice_cols(box, 1, 1);
  Tensor hw = scale(slice_cols(box, 2, 1), 0.5);
  Tensor hh = scale(slice_cols(box, 3, 1), 0.5);
  TCorners c;
  c.x1 = sub(cx, hw);
  c.x2 = add(cx, hw);
  c.y1 = sub(cy, hh);
  c.y2 = add(cy, hh);
  c.area = mul(slice_cols(box, 2, 1), slice_cols(box, 3, 1));
  return c;
}

}  // namespace

Tensor giou_t(const Tensor& a, const Tensor& b) {
  if (a.rows() != 1 || a.cols() != 4 || b.rows() != 1 || b.cols() != 4)
    throw std::invalid_argument("giou_t: boxes must be 1x4");
  TCorners ca = corners(a), cb = corners(b);
  Tensor zero = Tensor::scalar(0.0);
  Tensor iw = maximum(sub(minimum(ca.x2, cb.x2), maximum(ca.x1, cb.x1)), zero);
  Tensor ih = maximum(sub(minimum(ca.y2, cb.y2), maximum(ca.y1, cb.y1)), zero);
  Tensor inter = mul(iw, ih);
  Tensor uni = sub(add(ca.area, cb.area), inter);
  if (uni.item() <= 0.0) return zero;  // both degenerate: defined as 0, flat
  Tensor hull =
      mul(sub(maximum(ca.x2, cb.x2), minimum(ca.x1, cb.x1)),
          sub(maximum(ca.y2, cb.y2), minimum(ca.y1, cb.y1)));
  Tensor v = divide(inter, uni);
  if (hull.item() > 0.0) v = sub(v, divide(sub(hull, uni), hull));
  return v;
}

LossBreakdown total_loss(const GroundingPrediction& pred, const Box& gt, double lambda1,
                         double lambda2) {
  if (pred.boxes.empty()) throw std::invalid_argument("total_loss: prediction has no boxes");
  Tensor gt_t = box_to_tensor(gt);
  LossBreakdown out;
  Tensor acc;
  for (size_t n = 0; n < pred.boxes.size(); ++n) {
    Tensor term_l1 = l1_box_t(gt_t, pred.boxes[n]);
    Tensor term_giou = sub(Tensor::scalar(1.0), giou_t(gt_t, pred.boxes[n]));
    out.per_iter_l1.push_back(term_l1.item());
    out.per_iter_giou.push_back(term_giou.item());
    Tensor term = add(scale(term_l1, lambda1), scale(term_giou, lambda2));
    out.l_q += term.item();
    acc = acc.defined() ? add(acc, term) : term;
    if (n < pred.layer_boxes.size() && !pred.layer_boxes[n].empty()) {
      Tensor cons = l1_box_t(gt_t, pred.layer_boxes[n].back());
      out.per_iter_cons.push_back(cons.item());
      out.l_cons += cons.item();
      acc = add(acc, cons);
    }
  }
  out.total = out.l_q + out.l_cons;
  out.total_t = acc;
  return out;
}

Box tensor_to_box(const Tensor& t) {
  if (t.rows() != 1 || t.cols() != 4)
    throw std::invalid_argument("tensor_to_box: expected 1x4");
  const auto& v = t.values();
  return {v[0], v[1], v[2], v[3]};
}

Tensor box_to_tensor(const Box& b) { return Tensor::row({b.cx, b.cy, b.w, b.h}); }

}  // namespace phg
