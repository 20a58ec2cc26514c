#pragma once

#include <vector>

#include "core/ppc.hpp"
#include "core/scenes.hpp"

namespace phg {

// ---- plain box math (metrics) ----
double l1_box(const Box& a, const Box& b);
double iou(const Box& a, const Box& b);
// Generalized IoU in (-1, 1]; both boxes degenerate gives 0 by definition.
double giou(const Box& a, const Box& b);
// Fraction of pairs whose IoU strictly surpasses the threshold.
double prec_at_iou(const std::vector<Box>& predictions, const std::vector<Box>& ground_truth,
                   double threshold = 0.5);

// ---- tape-connected versions (training) ----
Tensor l1_box_t(const Tensor& a, const Tensor& b);  // 1x1
Tensor giou_t(const Tensor& a, const Tensor& b);    // 1x1

struct LossBreakdown {
  double l_q = 0;
  double l_cons = 0;
  double total = 0;
  std::vector<double> per_iter_l1;
  std::vector<double> per_iter_giou;
  std::vector<double> per_iter_cons;
  Tensor total_t;  // scalar on the tape
};

// L_Q sums lambda1 * l1 + lambda2 * (1 - GIoU) over iterations; L_cons adds
// an l1 pull on each iteration's final corrected box when the corrector ran.
LossBreakdown total_loss(const GroundingPrediction& pred, const Box& gt, double lambda1,
                         double lambda2);

Box tensor_to_box(const Tensor& t);
Tensor box_to_tensor(const Box& b);

}  // namespace phg
