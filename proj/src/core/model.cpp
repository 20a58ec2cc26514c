#include "core/model.hpp"

#include <stdexcept>

#include "core/rng.hpp"

namespace phg {

Model::Model(const RunConfig& config) : cfg(config) {
  cfg.validate();
  Rng rng = Rng(cfg.run_seed).substream("init");

  venc_ = make_visual_encoder(params, cfg.channels, cfg.heads, cfg.visual_layers, cfg.ff_dim,
                              cfg.patch, rng);
  tenc_ = make_text_encoder(params, cfg.channels, cfg.heads, cfg.text_layers, cfg.ff_dim,
                            static_cast<int>(vocabulary().size()), cfg.max_text_len, rng);

  gfcma_.cross_attn = make_mha(params, "gfcma.attn", cfg.channels, cfg.heads, rng);
  if (!cfg.disable_gfcma) {
    gfcma_.map_visual = make_linear(params, "gfcma.map_v", cfg.channels, cfg.channels, false, rng);
    gfcma_.map_text = make_linear(params, "gfcma.map_t", cfg.channels, cfg.channels, false, rng);
  }

  if (!cfg.disable_cmhm) cmhm_ = make_cmhm(params, cfg.channels, cfg.heads, rng);

  if (!cfg.disable_ppc) {
    ppc_ = make_ppc(params, cfg.channels, cfg.heads, !cfg.disable_hpc, rng);
  } else {
    pooled_fc1_ = make_linear(params, "pooled.head1", cfg.channels, cfg.channels, true, rng);
    pooled_fc2_ = make_linear(params, "pooled.head2", cfg.channels, 4, true, rng);
  }
}

Model::ForwardResult Model::forward(const Raster& image, const std::vector<int>& token_ids,
                                    const PhraseDecomposition& decomposition) const {
  ForwardResult r;
  r.vis = encode_image(venc_, image);
  r.txt = encode_text(tenc_, token_ids);
  r.cross = cross_modal_attention(gfcma_, r.vis.features, r.txt.features);

  Tensor f_gv;
  if (cfg.disable_gfcma) {
    f_gv = r.cross;  // alignment layer removed: the attention stage feeds through
  } else {
    r.aligned = global_alignment(gfcma_, r.vis.features, r.cross, cfg.lambda_star);
    f_gv = r.aligned.features;
  }

  std::vector<Mask> masks = all_masks(decomposition);
  if (cfg.disable_cmhm) {
    r.trace.features.push_back(f_gv);
  } else {
    r.trace = cmhm_forward(cmhm_, f_gv, r.vis.features, r.txt.features, masks, cfg.lambda_hm,
                           cfg.mask_mode);
  }
  r.f_final = r.trace.final_features();

  if (cfg.disable_ppc) {
    Tensor pooled = mean_over_rows(r.f_final);
    Tensor box = sigmoid(linear(pooled_fc2_, relu(linear(pooled_fc1_, pooled))));
    r.pred.boxes.push_back(box);
  } else {
    r.pred = ppc_forward(ppc_, r.txt.features, masks, r.vis.features, r.f_final, cfg.iterations,
                         cfg.lambda_hm, cfg.mask_mode, cfg.box_mode, cfg.box_carry);
  }
  return r;
}

LossBreakdown Model::loss(const ForwardResult& fwd, const Box& gt) const {
  return total_loss(fwd.pred, gt, cfg.lambda1, cfg.lambda2);
}

void Model::save(const std::string& path) const {
  save_checkpoint(path, params, config_to_json(cfg), cfg.checkpoint_dtype);
}

Model load_model(const std::string& checkpoint_path) {
  Checkpoint ck = load_checkpoint(checkpoint_path);
  Model m(config_from_json(ck.config_json));
  fill_parameters(m.params, ck);
  return m;
}

}  // namespace phg
