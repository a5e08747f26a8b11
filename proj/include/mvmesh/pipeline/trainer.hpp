#pragma once

#include "mvmesh/diffmath/adam.hpp"
#include "mvmesh/pipeline/checkpoint.hpp"
#include "mvmesh/pipeline/config.hpp"
#include "mvmesh/pipeline/dataset.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace mvmesh {

/// Unweighted loss components of one step, each summed over stages or
/// averaged over views as in total_loss.
struct StepLog {
  int phase = 0;  // 1 = depth network, 2 = voxel branch and refinement
  long step = 0;  // global step index, both phases
  double total = 0.0;
  double chamfer = 0.0;
  double normal = 0.0;
  double edge = 0.0;
  double contrastive = 0.0;
  double depth = 0.0;
  double voxel = 0.0;
};

void write_log_header(std::ostream& out);
void write_log_row(std::ostream& out, const StepLog& log);

/// Model parameters in one set: voxel.*, mvs.*, contrast.*, stage<k>.*.
void init_parameters(const Reconstructor<float>& model, ParameterSet<float>& params, std::uint64_t seed);

/// Parameters plus the `meta.edge_weight` tag reused for report labels.
TensorMap parameter_checkpoint(const ParameterSet<float>& params, const LossWeights& weights);
/// Copies `param.*` tensors into `params`; names and shapes must match exactly.
void restore_parameters(ParameterSet<float>& params, const TensorMap& ckpt, const std::string& name = "checkpoint");

/// Two-phase schedule: mvs_steps of depth BerHu on the depth network, then
/// `steps` of the total loss with the depth network frozen.
class Trainer {
 public:
  Trainer(RunConfig cfg, std::vector<SceneSample> scenes);

  long total_steps() const;
  long step_index() const { return step_; }
  bool done() const { return step_ >= total_steps(); }
  int phase() const;

  /// Runs one optimisation step. Throws NonFiniteError with the step and
  /// the offending parameter or loss term.
  StepLog step();

  /// Total loss over every scene with fixed surface samples and no update.
  double probe_total_loss();

  /// Model, optimiser and schedule state; restore() continues bit-exactly.
  TensorMap state() const;
  void restore(const TensorMap& state);

  const Reconstructor<float>& model() const { return *model_; }
  ParameterSet<float>& params() { return params_; }
  const ParameterSet<float>& params() const { return params_; }
  const RunConfig& config() const { return cfg_; }

 private:
  StepLog depth_step(const std::vector<int>& batch);
  StepLog refine_step(const std::vector<int>& batch, long local_step);
  StepLog scene_losses(const SceneSample& scene, int index, std::uint64_t pick_seed, bool backward,
                       std::map<std::string, Tensor<float>>* grads);
  void enter_refine_phase();
  std::vector<int> batch_for(long local_step) const;

  RunConfig cfg_;
  std::vector<SceneSample> scenes_;
  std::unique_ptr<Reconstructor<float>> model_;
  ParameterSet<float> params_;
  Adam<float> depth_opt_;
  Adam<float> refine_opt_;
  long step_ = 0;
  bool refine_ready_ = false;
  std::vector<std::vector<Tensor<float>>> cached_depths_;  // per scene, per view
};

struct TrainOptions {
  std::string data_dir;
  std::string out_dir;
  std::string resume;  // checkpoint path, empty for a fresh run
  bool quiet = false;
};

struct TrainSummary {
  double initial_probe = 0.0;  // probe_total_loss when phase 2 starts
  double final_probe = 0.0;
  long steps = 0;
  std::string checkpoint;     // final training-state checkpoint
  std::string model_file;     // parameters only
};

/// Full run: writes train_log.csv, periodic checkpoint_stepN.mvmc, the final
/// state.mvmc and model.mvmc, and summary.json under out_dir.
TrainSummary train(const RunConfig& cfg, const TrainOptions& opts);

}  // namespace mvmesh
