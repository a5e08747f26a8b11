#pragma once

#include "mvmesh/pipeline/checkpoint.hpp"
#include "mvmesh/pipeline/config.hpp"
#include "mvmesh/pipeline/dataset.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace mvmesh {

struct ScoredMesh {
  std::string label;
  MeshScore score;
  bool empty = false;  // nothing to score; F1 counts as 0, chamfer is undefined
};

struct SceneReport {
  std::string name;
  std::string primitive;
  std::vector<ScoredMesh> stages;       // initial mesh, then stage1..stageN
  ScoredMesh merged;                    // cubified merged grid
  std::vector<ScoredMesh> single_view;  // cubified grid of each view alone
  bool fallback = false;
};

struct EvalReport {
  std::string label;  // "Best" / "Pretty" from the checkpoint's edge weight
  int views = 0;
  std::vector<SceneReport> scenes;
  std::vector<ScoredMesh> mean_stages;
  ScoredMesh mean_merged;
  std::vector<ScoredMesh> mean_single_view;
  int best_single_view = 0;  // view slot with the highest mean F1-tau
};

/// "Pretty" for a checkpoint trained with a nonzero edge weight, else "Best".
std::string checkpoint_label(const TensorMap& ckpt);

/// Scores every scene at the scenes' view count. Parameters are read only.
EvalReport evaluate_model(const RunConfig& cfg, const Reconstructor<float>& model, ParameterSet<float>& params,
                          const std::vector<SceneSample>& scenes, const std::string& label);

/// Loads a checkpoint and evaluates it on `scenes`.
EvalReport evaluate_checkpoint(const RunConfig& cfg, const std::string& checkpoint,
                               const std::vector<SceneSample>& scenes);

void write_report_json(std::ostream& out, const std::vector<EvalReport>& reports);
/// Mean rows: "<label> <mesh>" with F1-tau, F1-2tau, CDx1000.
void write_report_text(std::ostream& out, const std::vector<EvalReport>& reports);

/// Writes report.json and report.txt into `dir`.
void save_reports(const std::string& dir, const std::vector<EvalReport>& reports);

/// One inference pass. Writes stage0.obj (initial mesh), stage<k>.obj,
/// final.obj, depth_view<i>.dpth, merged.voxp, attention_stage<k>.txt and
/// manifest.json into `out_dir`.
struct PredictInputs {
  std::vector<Tensor<float>> images;
  std::vector<CameraView> cams;
  std::vector<DepthMap> gt_depths;  // used when the config asks for GT depth
};

PredictInputs load_predict_inputs(const std::string& scene_dir, int views, bool with_depths);

void predict(const RunConfig& cfg, const TensorMap& checkpoint, const PredictInputs& inputs,
             const std::string& out_dir);

}  // namespace mvmesh
