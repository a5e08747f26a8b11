#include "mvmesh/pipeline/evaluate.hpp"

#include "mvmesh/error.hpp"
#include "mvmesh/geomcore/io.hpp"
#include "mvmesh/pipeline/trainer.hpp"
#include "mvmesh/voxelgrid/cubify.hpp"
#include "mvmesh/voxelgrid/io.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

namespace mvmesh {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::string checkpoint_label(const TensorMap& ckpt) {
  auto it = ckpt.find("meta.edge_weight");
  if (it == ckpt.end()) return "model";
  return it->second.item() > 0.0f ? "Pretty" : "Best";
}

namespace {

ScoredMesh score(const std::string& label, const TriangleMesh* mesh, const PointMatrix& gt, const EvalConfig& cfg) {
  ScoredMesh s;
  s.label = label;
  if (!mesh || mesh->empty() || mesh->surface_area() <= 0.0) {
    s.empty = true;
    s.score.chamfer = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  s.score = score_mesh(*mesh, gt, cfg);
  return s;
}

ScoredMesh score_grid(const std::string& label, const OccupancyGrid& grid, double threshold, const PointMatrix& gt,
                      const EvalConfig& cfg) {
  if (grid.count_at_least(threshold) == 0) return score(label, nullptr, gt, cfg);
  const TriangleMesh m = cubify(grid, threshold);
  return score(label, &m, gt, cfg);
}

/// F1 averaged with empty meshes as 0; chamfer over non-empty meshes only.
ScoredMesh mean_of(const std::string& label, const std::vector<const ScoredMesh*>& xs) {
  ScoredMesh m;
  m.label = label;
  int scored = 0;
  for (const auto* x : xs) {
    m.score.f1_tau += x->score.f1_tau;
    m.score.f1_2tau += x->score.f1_2tau;
    if (!x->empty) {
      m.score.chamfer += x->score.chamfer;
      ++scored;
    }
  }
  const double n = static_cast<double>(xs.size());
  m.score.f1_tau /= n;
  m.score.f1_2tau /= n;
  if (scored == 0) {
    m.empty = true;
    m.score.chamfer = std::numeric_limits<double>::quiet_NaN();
  } else {
    m.score.chamfer /= scored;
  }
  return m;
}

Json to_json(const ScoredMesh& s) {
  Json j;
  j["label"] = s.label;
  j["f1_tau"] = s.score.f1_tau;
  j["f1_2tau"] = s.score.f1_2tau;
  if (std::isfinite(s.score.chamfer))
    j["chamfer"] = s.score.chamfer;
  else
    j["chamfer"] = nullptr;
  j["empty"] = s.empty;
  return j;
}

Json to_json(const std::vector<ScoredMesh>& v) {
  Json a = Json::array();
  for (const auto& s : v) a.push_back(to_json(s));
  return a;
}

}  // namespace

EvalReport evaluate_model(const RunConfig& cfg, const Reconstructor<float>& model, ParameterSet<float>& params,
                          const std::vector<SceneSample>& scenes, const std::string& label) {
  if (scenes.empty()) throw ValidationError("eval: no scenes");
  EvalReport r;
  r.label = label;
  r.views = scenes.front().views();
  const double thr = cfg.model.cubify_threshold;
  for (const auto& s : scenes) {
    if (s.views() != r.views) throw ValidationError("eval: scenes must share one view count");
    const PointMatrix gt = sample_points(s.mesh, cfg.eval.gt_samples, cfg.eval.seed + 1);
    const PipelineResult res =
        run_pipeline(model, params, s.images, s.cams, cfg.train.gt_depth ? &s.depths : nullptr, false);
    SceneReport sr;
    sr.name = s.name;
    sr.primitive = s.primitive;
    sr.fallback = res.initial.fallback;
    sr.stages.push_back(score(res.initial.sphere ? "sphere" : "cubified", &res.initial.mesh, gt, cfg.eval));
    for (std::size_t k = 0; k < res.stages.size(); ++k)
      sr.stages.push_back(score("stage" + std::to_string(k + 1), &res.stages[k], gt, cfg.eval));
    sr.merged = score_grid("merged", res.merged, thr, gt, cfg.eval);
    for (int v = 0; v < s.views(); ++v) {
      const OccupancyGrid single = model.merge({res.view_probabilities[static_cast<std::size_t>(v)]},
                                               {s.cams[static_cast<std::size_t>(v)]});
      sr.single_view.push_back(score_grid("view" + std::to_string(v), single, thr, gt, cfg.eval));
    }
    r.scenes.push_back(std::move(sr));
  }

  auto column = [&](auto pick) {
    std::vector<const ScoredMesh*> xs;
    for (const auto& sr : r.scenes) xs.push_back(pick(sr));
    return xs;
  };
  for (std::size_t k = 0; k < r.scenes.front().stages.size(); ++k)
    r.mean_stages.push_back(
        mean_of(r.scenes.front().stages[k].label, column([k](const SceneReport& sr) { return &sr.stages[k]; })));
  r.mean_merged = mean_of("merged", column([](const SceneReport& sr) { return &sr.merged; }));
  for (int v = 0; v < r.views; ++v) {
    r.mean_single_view.push_back(mean_of("view" + std::to_string(v), column([v](const SceneReport& sr) {
                                           return &sr.single_view[static_cast<std::size_t>(v)];
                                         })));
    if (r.mean_single_view.back().score.f1_tau > r.mean_single_view[static_cast<std::size_t>(r.best_single_view)].score.f1_tau)
      r.best_single_view = v;
  }
  return r;
}

EvalReport evaluate_checkpoint(const RunConfig& cfg, const std::string& checkpoint,
                               const std::vector<SceneSample>& scenes) {
  const TensorMap ckpt = load_checkpoint(checkpoint);
  const Reconstructor<float> model(cfg.model);
  ParameterSet<float> params;
  init_parameters(model, params, cfg.seed);
  restore_parameters(params, ckpt, checkpoint);
  return evaluate_model(cfg, model, params, scenes, checkpoint_label(ckpt));
}

void write_report_json(std::ostream& out, const std::vector<EvalReport>& reports) {
  Json all = Json::array();
  for (const auto& r : reports) {
    Json j;
    j["label"] = r.label;
    j["views"] = r.views;
    j["mean"] = {{"stages", to_json(r.mean_stages)},
                 {"merged", to_json(r.mean_merged)},
                 {"single_view", to_json(r.mean_single_view)},
                 {"best_single_view", r.best_single_view}};
    Json scenes = Json::array();
    for (const auto& s : r.scenes)
      scenes.push_back({{"name", s.name},
                        {"primitive", s.primitive},
                        {"fallback", s.fallback},
                        {"stages", to_json(s.stages)},
                        {"merged", to_json(s.merged)},
                        {"single_view", to_json(s.single_view)}});
    j["scenes"] = scenes;
    all.push_back(j);
  }
  out << Json{{"format", "mvmesh-report"}, {"version", 1}, {"reports", all}}.dump(2) << "\n";
}

void write_report_text(std::ostream& out, const std::vector<EvalReport>& reports) {
  std::vector<ReportRow> rows;
  for (const auto& r : reports) {
    const std::string p = r.label + " " + std::to_string(r.views) + "v ";
    for (const auto& s : r.mean_stages) rows.push_back({p + s.label, s.score});
    rows.push_back({p + "merged-voxels", r.mean_merged.score});
    const auto& best = r.mean_single_view[static_cast<std::size_t>(r.best_single_view)];
    rows.push_back({p + "best-single-view (" + best.label + ")", best.score});
  }
  write_report_table(out, rows);
}

void save_reports(const std::string& dir, const std::vector<EvalReport>& reports) {
  fs::create_directories(dir);
  std::ofstream j(fs::path(dir) / "report.json");
  std::ofstream t(fs::path(dir) / "report.txt");
  if (!j || !t) throw std::runtime_error("cannot write reports in " + dir);
  write_report_json(j, reports);
  write_report_text(t, reports);
}

PredictInputs load_predict_inputs(const std::string& scene_dir, int views, bool with_depths) {
  PredictInputs in;
  for (int v = 0;; ++v) {
    if (views > 0 && v >= views) break;
    const fs::path stem = fs::path(scene_dir) / ("view" + std::to_string(v));
    if (!fs::exists(stem.string() + ".ppm")) break;
    in.images.push_back(load_ppm(stem.string() + ".ppm").tensor<float>());
    in.cams.push_back(load_camera(stem.string() + ".cam"));
    if (with_depths) in.gt_depths.push_back(load_dpth(stem.string() + ".dpth"));
  }
  if (in.images.empty()) throw ValidationError(scene_dir + ": no view0.ppm found");
  if (views > 0 && static_cast<int>(in.images.size()) < views)
    throw ValidationError(scene_dir + ": fewer than " + std::to_string(views) + " views");
  return in;
}

void predict(const RunConfig& cfg, const TensorMap& checkpoint, const PredictInputs& inputs,
             const std::string& out_dir) {
  const Reconstructor<float> model(cfg.model);
  for (const auto& img : inputs.images)
    if (img.rank() != 3 || img.dim(1) != cfg.model.image_size || img.dim(2) != cfg.model.image_size)
      throw ValidationError("predict: images must be 3x" + std::to_string(cfg.model.image_size) + "x" +
                            std::to_string(cfg.model.image_size));
  ParameterSet<float> params;
  init_parameters(model, params, cfg.seed);
  restore_parameters(params, checkpoint);
  const PipelineResult r =
      run_pipeline(model, params, inputs.images, inputs.cams, cfg.train.gt_depth ? &inputs.gt_depths : nullptr, true);

  const fs::path out(out_dir);
  fs::create_directories(out);
  save_obj((out / "stage0.obj").string(), r.initial.mesh);
  Json files = Json::array({"stage0.obj"});
  for (std::size_t k = 0; k < r.stages.size(); ++k) {
    const std::string f = "stage" + std::to_string(k + 1) + ".obj";
    save_obj((out / f).string(), r.stages[k]);
    files.push_back(f);
  }
  save_obj((out / "final.obj").string(), r.final_mesh());
  files.push_back("final.obj");
  for (std::size_t v = 0; v < r.depths.size(); ++v) {
    const std::string f = "depth_view" + std::to_string(v) + ".dpth";
    save_dpth((out / f).string(), r.depths[v]);
    files.push_back(f);
  }
  save_voxp((out / "merged.voxp").string(), r.merged);
  files.push_back("merged.voxp");
  for (std::size_t k = 0; k < r.attention.size(); ++k) {
    const std::string f = "attention_stage" + std::to_string(k + 1) + ".txt";
    std::ofstream a(out / f);
    write_attention_table(a, r.attention[k]);
    files.push_back(f);
  }
  Json m;
  m["views"] = inputs.images.size();
  m["initial_mesh"] = r.initial.sphere ? (r.initial.fallback ? "sphere-fallback" : "sphere") : "cubified";
  m["sphere_init"] = cfg.model.sphere_init;
  m["gt_depth"] = cfg.train.gt_depth;
  m["contrastive_mode"] = to_string(cfg.model.contrastive.mode);
  m["pooling"] = to_string(cfg.model.stage.pool.kind);
  m["vertices"] = r.final_mesh().vertex_count();
  m["faces"] = r.final_mesh().face_count();
  m["warnings"] = r.warnings;
  m["files"] = files;
  std::ofstream mf(out / "manifest.json");
  if (!mf) throw std::runtime_error("cannot write manifest in " + out_dir);
  mf << m.dump(2) << "\n";
}

}  // namespace mvmesh
