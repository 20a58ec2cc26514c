#include "core/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "core/rng.hpp"

namespace phg {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

SceneSample prepare_sample(const SceneSpec& spec, int image_size) {
  SceneSample s;
  s.spec = spec;
  s.raster = render_scene(spec, image_size);
  s.token_ids.reserve(spec.expression.size());
  for (const auto& w : spec.expression) s.token_ids.push_back(token_id(w));
  return s;
}

std::vector<SceneSample> build_split(const RunConfig& cfg, const std::string& split) {
  SeedRange range;
  if (split == "train") range = cfg.train_seeds;
  else if (split == "val") range = cfg.val_seeds;
  else if (split == "test") range = cfg.test_seeds;
  else throw std::invalid_argument("build_split: unknown split \"" + split + "\"");
  std::vector<SceneSample> out;
  out.reserve(range.count());
  for (uint64_t seed = range.begin; seed < range.end; ++seed)
    out.push_back(prepare_sample(generate_scene(seed, cfg.scene), cfg.scene.image_size));
  return out;
}

std::vector<SceneSample> load_split_dir(const std::string& dir, const std::string& split,
                                        int image_size) {
  std::vector<SceneSample> out;
  for (uint64_t seed : manifest_split_seeds(dir, split)) {
    SceneSpec spec = load_scene_file(dir + "/scene_" + std::to_string(seed) + ".json");
    out.push_back(prepare_sample(spec, image_size));
  }
  if (out.empty()) throw std::runtime_error("load_split_dir: split \"" + split + "\" is empty");
  return out;
}

EvalResult evaluate_model(const Model& model, const std::vector<SceneSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("evaluate_model: empty sample list");
  NoGradGuard ng;
  EvalResult r;
  for (const auto& s : samples) {
    auto fwd = model.forward(s.raster, s.token_ids, s.spec.gold);
    Box pred = fwd.final_box();
    double v = iou(pred, s.spec.b_gt);
    bool hit = v > 0.5;
    r.mean_iou += v;
    r.prec += hit ? 1.0 : 0.0;
    r.count += 1;
    int d = std::clamp(s.spec.depth, 1, 3);
    r.prec_by_depth[d] += hit ? 1.0 : 0.0;
    r.count_by_depth[d] += 1;
  }
  r.prec /= r.count;
  r.mean_iou /= r.count;
  for (int d = 1; d <= 3; ++d)
    if (r.count_by_depth[d] > 0) r.prec_by_depth[d] /= r.count_by_depth[d];
  return r;
}

TrainResult train_run(const RunConfig& cfg, const std::string& out_dir, const LogFn& log) {
  cfg.validate();
  fs::create_directories(out_dir);

  auto say = [&](const std::string& line) {
    if (log) log(line);
  };

  say("building splits: train " + std::to_string(cfg.train_seeds.count()) + ", val " +
      std::to_string(cfg.val_seeds.count()));
  std::vector<SceneSample> train = build_split(cfg, "train");
  std::vector<SceneSample> val = build_split(cfg, "val");

  Model model(cfg);
  say("model parameters: " + std::to_string(model.params.scalar_count()));

  {
    std::ofstream cf(out_dir + "/config.json", std::ios::trunc);
    cf << config_to_json(cfg) << "\n";
  }

  TrainResult result;
  result.best_checkpoint = out_dir + "/ckpt_best.hgck";
  result.last_checkpoint = out_dir + "/ckpt_last.hgck";
  result.log_path = out_dir + "/train_log.csv";

  std::ofstream logf(result.log_path, std::ios::trunc);
  logf << "epoch,total,l_q,l_cons,val_prec\n";

  AdamWConfig opt;
  opt.lr = cfg.lr;
  opt.beta1 = cfg.beta1;
  opt.beta2 = cfg.beta2;
  opt.weight_decay = cfg.weight_decay;

  Rng shuffle_rng = Rng(cfg.run_seed).substream("shuffle");
  std::vector<size_t> order(train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  model.save(result.last_checkpoint);
  double best_val = -1.0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // Fisher-Yates over the train order
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(0, static_cast<int>(i) - 1)]);

    double ep_total = 0.0, ep_q = 0.0, ep_cons = 0.0;
    size_t done = 0;
    while (done < order.size()) {
      size_t batch = std::min(static_cast<size_t>(cfg.batch_size), order.size() - done);
      model.params.zero_grads();
      double batch_total = 0.0;
      for (size_t k = 0; k < batch; ++k) {
        const SceneSample& s = train[order[done + k]];
        auto fwd = model.forward(s.raster, s.token_ids, s.spec.gold);
        LossBreakdown lb = model.loss(fwd, s.spec.b_gt);
        batch_total += lb.total;
        ep_total += lb.total;
        ep_q += lb.l_q;
        ep_cons += lb.l_cons;
        backward(scale(lb.total_t, 1.0 / static_cast<double>(batch)));
      }
      if (!std::isfinite(batch_total)) {
        std::ofstream diag(out_dir + "/diagnostic.txt", std::ios::trunc);
        diag << "non-finite loss at epoch " << epoch << " after " << done
             << " samples; last good checkpoint: " << result.last_checkpoint << "\n";
        throw std::runtime_error("train_run: non-finite loss at epoch " +
                                 std::to_string(epoch) + "; aborted, last good checkpoint at " +
                                 result.last_checkpoint);
      }
      adamw_step(model.params, opt);
      done += batch;
    }
    ep_total /= static_cast<double>(train.size());
    ep_q /= static_cast<double>(train.size());
    ep_cons /= static_cast<double>(train.size());

    EvalResult ev = evaluate_model(model, val);
    logf << epoch << "," << fmt(ep_total) << "," << fmt(ep_q) << "," << fmt(ep_cons) << ","
         << fmt(ev.prec) << "\n";
    logf.flush();
    say("epoch " + std::to_string(epoch) + "/" + std::to_string(cfg.epochs) + " total=" +
        fmt6(ep_total) + " l_q=" + fmt6(ep_q) + " l_cons=" + fmt6(ep_cons) +
        " val_prec=" + fmt6(ev.prec));

    model.save(result.last_checkpoint);
    if (ev.prec > best_val) {
      best_val = ev.prec;
      model.save(result.best_checkpoint);
    }
    result.epochs_run = epoch;
    if (ev.prec >= cfg.early_stop_prec) {
      say("early stop: val precision " + fmt6(ev.prec) + " reached the configured bar");
      break;
    }
  }
  result.best_val_prec = best_val;
  return result;
}

std::string eval_csv_header() {
  return "run_id,split,prec_at_0.5,mean_iou,prec_depth1,prec_depth2,prec_depth3,"
         "n,n_depth1,n_depth2,n_depth3";
}

std::string eval_csv_row(const std::string& run_id, const std::string& split,
                         const EvalResult& r) {
  std::string row = run_id + "," + split + "," + fmt(r.prec) + "," + fmt(r.mean_iou);
  for (int d = 1; d <= 3; ++d) row += "," + fmt(r.prec_by_depth[d]);
  row += "," + std::to_string(r.count);
  for (int d = 1; d <= 3; ++d) row += "," + std::to_string(r.count_by_depth[d]);
  return row;
}

EvalResult evaluate_checkpoint(const std::string& checkpoint_path, const std::string& split,
                               const std::string& data_dir, const std::string& csv_path,
                               const std::string& run_id) {
  Model model = load_model(checkpoint_path);
  std::vector<SceneSample> samples =
      data_dir.empty() ? build_split(model.cfg, split)
                       : load_split_dir(data_dir, split, model.cfg.scene.image_size);
  EvalResult r = evaluate_model(model, samples);
  if (!csv_path.empty()) {
    bool fresh = !fs::exists(csv_path);
    std::ofstream f(csv_path, std::ios::app);
    if (!f) throw std::runtime_error("evaluate_checkpoint: cannot write " + csv_path);
    if (fresh) f << eval_csv_header() << "\n";
    std::string id = run_id.empty() ? fs::path(checkpoint_path).stem().string() : run_id;
    f << eval_csv_row(id, split, r) << "\n";
  }
  return r;
}

}  // namespace phg
