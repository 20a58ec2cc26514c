#pragma once

#include <string>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/config.hpp"
#include "core/encoders.hpp"
#include "core/gfcma.hpp"
#include "core/cmhm.hpp"
#include "core/losses.hpp"
#include "core/ppc.hpp"

namespace phg {

// Full pipeline: encoders -> cross-modal attention (-> global alignment)
// (-> hierarchical matching) (-> progressive correction | pooled box head).
// The disable_* config switches carve out the ablation ladder; parameters
// for disabled stages are never created.
class Model {
 public:
  explicit Model(const RunConfig& cfg);

  struct ForwardResult {
    VisualTokens vis;
    TextTokens txt;
    Tensor cross;           // text-conditioned per-visual-token features
    AlignedVisual aligned;  // only populated when the alignment layer runs
    HierarchyTrace trace;   // features[0] is the matching input
    Tensor f_final;
    GroundingPrediction pred;

    Box final_box() const { return tensor_to_box(pred.boxes.back()); }
  };

  ForwardResult forward(const Raster& image, const std::vector<int>& token_ids,
                        const PhraseDecomposition& decomposition) const;

  LossBreakdown loss(const ForwardResult& fwd, const Box& gt) const;

  void save(const std::string& path) const;

  RunConfig cfg;
  ParameterSet params;

 private:
  VisualEncoderParams venc_;
  TextEncoderParams tenc_;
  GfcmaParams gfcma_;
  CmhmParams cmhm_;
  PpcParams ppc_;
  Linear pooled_fc1_, pooled_fc2_;  // box head when the corrector is disabled
};

// Rebuild a model from a checkpoint; the embedded config decides every shape
// and a mismatching file is rejected rather than reshaped.
Model load_model(const std::string& checkpoint_path);

}  // namespace phg
