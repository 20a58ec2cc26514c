#include "core/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "core/image_io.hpp"

namespace phg {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<AblationRow>& ablation_rows() {
  static const std::vector<AblationRow> rows = {AblationRow::baseline, AblationRow::gfcma,
                                                AblationRow::cmhm, AblationRow::ppc_wo_hpc,
                                                AblationRow::full};
  return rows;
}

const char* ablation_row_name(AblationRow row) {
  switch (row) {
    case AblationRow::baseline: return "baseline";
    case AblationRow::gfcma: return "+gfcma";
    case AblationRow::cmhm: return "+cmhm";
    case AblationRow::ppc_wo_hpc: return "+ppc_wo_hpc";
    case AblationRow::full: return "full";
  }
  return "?";
}

RunConfig ablation_config(const RunConfig& base, AblationRow row) {
  RunConfig c = base;
  c.disable_gfcma = false;
  c.disable_cmhm = false;
  c.disable_ppc = false;
  c.disable_hpc = false;
  switch (row) {
    case AblationRow::baseline:
      c.disable_gfcma = true;
      c.disable_cmhm = true;
      c.disable_ppc = true;
      break;
    case AblationRow::gfcma:
      c.disable_cmhm = true;
      c.disable_ppc = true;
      break;
    case AblationRow::cmhm:
      c.disable_ppc = true;
      break;
    case AblationRow::ppc_wo_hpc:
      c.disable_hpc = true;
      break;
    case AblationRow::full:
      break;
  }
  return c;
}

double AblationTable::mean(AblationRow row) const {
  double acc = 0.0;
  int n = 0;
  for (const auto& c : cells)
    if (c.row == row) {
      acc += c.test_prec;
      ++n;
    }
  return n == 0 ? 0.0 : acc / n;
}

double AblationTable::stddev(AblationRow row) const {
  double mu = mean(row);
  double acc = 0.0;
  int n = 0;
  for (const auto& c : cells)
    if (c.row == row) {
      acc += (c.test_prec - mu) * (c.test_prec - mu);
      ++n;
    }
  return n <= 1 ? 0.0 : std::sqrt(acc / (n - 1));
}

std::string AblationTable::to_csv() const {
  char buf[64];
  std::string out = "config,prec_mean,prec_std\n";
  for (AblationRow row : ablation_rows()) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g\n", ablation_row_name(row), mean(row),
                  stddev(row));
    out += buf;
  }
  return out;
}

int worker_threads() {
  if (const char* env = std::getenv("PHG_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

AblationTable ablate(const RunConfig& base, int seeds, const std::string& out_dir,
                     const LogFn& log) {
  if (seeds < 1) throw std::invalid_argument("ablate: seeds must be >= 1");
  fs::create_directories(out_dir);

  struct Job {
    AblationRow row;
    uint64_t seed;
    RunConfig cfg;
    std::string dir;
  };
  std::vector<Job> jobs;
  for (AblationRow row : ablation_rows()) {
    for (int s = 0; s < seeds; ++s) {
      Job j;
      j.row = row;
      j.seed = base.run_seed + static_cast<uint64_t>(s);
      j.cfg = ablation_config(base, row);
      j.cfg.run_seed = j.seed;
      j.dir = out_dir + "/" + std::string(ablation_row_name(row)) + "_seed" +
              std::to_string(j.seed);
      jobs.push_back(std::move(j));
    }
  }

  AblationTable table;
  table.cells.resize(jobs.size());
  std::mutex log_mutex;
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      const Job& j = jobs[i];
      {
        std::lock_guard<std::mutex> lk(log_mutex);
        if (log) log("ablate: training " + std::string(ablation_row_name(j.row)) + " seed " +
                     std::to_string(j.seed));
      }
      TrainResult tr = train_run(j.cfg, j.dir);
      EvalResult ev = evaluate_checkpoint(tr.best_checkpoint, "test", "",
                                          j.dir + "/metrics.csv");
      table.cells[i] = {j.row, j.seed, ev.prec};
      {
        std::lock_guard<std::mutex> lk(log_mutex);
        if (log) log("ablate: " + std::string(ablation_row_name(j.row)) + " seed " +
                     std::to_string(j.seed) + " test_prec=" + std::to_string(ev.prec));
      }
    }
  };

  int pool = std::min<int>(worker_threads(), static_cast<int>(jobs.size()));
  std::vector<std::thread> threads;
  for (int t = 0; t < pool; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  std::ofstream f(out_dir + "/ablation.csv", std::ios::trunc);
  f << table.to_csv();
  return table;
}

std::vector<double> attention_mass_inside(const Model::ForwardResult& fwd, const Box& area,
                                          int grid_h, int grid_w) {
  std::vector<double> mass;
  double x1 = area.cx - area.w / 2, x2 = area.cx + area.w / 2;
  double y1 = area.cy - area.h / 2, y2 = area.cy + area.h / 2;
  for (const auto& attn : fwd.trace.visual_attn) {
    int n_v = attn.cols();
    // attention received per location: column sums, normalized to 1
    std::vector<double> col(n_v, 0.0);
    double total = 0.0;
    for (int r = 0; r < attn.rows(); ++r)
      for (int c = 0; c < n_v; ++c) {
        col[c] += attn.at(r, c);
        total += attn.at(r, c);
      }
    double inside = 0.0;
    for (int gy = 0; gy < grid_h; ++gy)
      for (int gx = 0; gx < grid_w; ++gx) {
        double cx = (gx + 0.5) / grid_w;
        double cy = (gy + 0.5) / grid_h;
        if (cx >= x1 && cx <= x2 && cy >= y1 && cy <= y2) inside += col[gy * grid_w + gx];
      }
    mass.push_back(total > 0.0 ? inside / total : 0.0);
  }
  return mass;
}

namespace {

std::vector<uint8_t> to_gray(const std::vector<double>& v) {
  double mx = 0.0;
  for (double x : v) mx = std::max(mx, x);
  std::vector<uint8_t> g(v.size(), 0);
  if (mx > 0.0)
    for (size_t i = 0; i < v.size(); ++i)
      g[i] = static_cast<uint8_t>(std::lround(255.0 * std::max(0.0, v[i]) / mx));
  return g;
}

void draw_rect(Raster& r, const Box& b, uint8_t cr, uint8_t cg, uint8_t cb) {
  int x1 = std::clamp(static_cast<int>(std::lround((b.cx - b.w / 2) * r.w)), 0, r.w - 1);
  int x2 = std::clamp(static_cast<int>(std::lround((b.cx + b.w / 2) * r.w)), 0, r.w - 1);
  int y1 = std::clamp(static_cast<int>(std::lround((b.cy - b.h / 2) * r.h)), 0, r.h - 1);
  int y2 = std::clamp(static_cast<int>(std::lround((b.cy + b.h / 2) * r.h)), 0, r.h - 1);
  auto put = [&](int x, int y) {
    size_t o = (static_cast<size_t>(y) * r.w + x) * 3;
    r.rgb[o] = cr;
    r.rgb[o + 1] = cg;
    r.rgb[o + 2] = cb;
  };
  for (int x = x1; x <= x2; ++x) {
    put(x, y1);
    put(x, y2);
  }
  for (int y = y1; y <= y2; ++y) {
    put(x1, y);
    put(x2, y);
  }
}

json box_json(const Box& b) { return json::array({b.cx, b.cy, b.w, b.h}); }

}  // namespace

VisualizeOutput visualize(const Model& model, const SceneSpec& scene,
                          const std::string& out_dir) {
  fs::create_directories(out_dir);
  NoGradGuard ng;

  SceneSample sample = prepare_sample(scene, model.cfg.scene.image_size);
  auto fwd = model.forward(sample.raster, sample.token_ids, sample.spec.gold);
  int gh = fwd.vis.grid_h, gw = fwd.vis.grid_w;

  VisualizeOutput out;

  for (size_t l = 0; l < fwd.trace.visual_attn.size(); ++l) {
    const Tensor& attn = fwd.trace.visual_attn[l];
    std::vector<double> col(attn.cols(), 0.0);
    for (int r = 0; r < attn.rows(); ++r)
      for (int c = 0; c < attn.cols(); ++c) col[c] += attn.at(r, c);
    std::string path = out_dir + "/level_" + std::to_string(l + 1) + ".pgm";
    write_pgm(path, gw, gh, to_gray(col));
    out.level_maps.push_back(path);
  }

  if (fwd.aligned.weights.defined()) {
    out.alignment_map = out_dir + "/alignment.pgm";
    write_pgm(out.alignment_map, gw, gh, to_gray(fwd.aligned.weights.values()));
  }

  json traj;
  traj["expression"] = scene.expression;
  traj["b_gt"] = box_json(scene.b_gt);
  traj["iterations"] = json::array();
  for (size_t n = 0; n < fwd.pred.boxes.size(); ++n) {
    json it;
    it["predicted"] = box_json(tensor_to_box(fwd.pred.boxes[n]));
    it["layers"] = json::array();
    if (n < fwd.pred.layer_boxes.size())
      for (const auto& lb : fwd.pred.layer_boxes[n]) it["layers"].push_back(box_json(tensor_to_box(lb)));
    traj["iterations"].push_back(it);
  }
  traj["final"] = box_json(fwd.final_box());
  out.trajectory = out_dir + "/trajectory.json";
  {
    std::ofstream f(out.trajectory, std::ios::trunc);
    f << traj.dump(2) << "\n";
  }

  Raster overlay = sample.raster;
  if (!fwd.pred.layer_boxes.empty())
    for (const auto& lb : fwd.pred.layer_boxes.back())
      draw_rect(overlay, tensor_to_box(lb), 90, 90, 90);
  draw_rect(overlay, scene.b_gt, 255, 255, 255);
  draw_rect(overlay, fwd.final_box(), 0, 0, 0);
  out.overlay = out_dir + "/overlay.ppm";
  write_ppm(out.overlay, overlay);
  return out;
}

void generate_dataset(const SceneGenConfig& scene_cfg, uint64_t seed_begin, uint64_t seed_end,
                      const std::string& split, const std::string& out_dir) {
  if (seed_end <= seed_begin)
    throw std::invalid_argument("generate_dataset: empty seed range");
  std::vector<SceneSpec> scenes;
  scenes.reserve(seed_end - seed_begin);
  for (uint64_t s = seed_begin; s < seed_end; ++s)
    scenes.push_back(generate_scene(s, scene_cfg));
  write_scene_dir(out_dir, split, scenes, scene_cfg.image_size);
}

}  // namespace phg
