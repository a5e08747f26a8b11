#pragma once

#include "mvmesh/lossmetrics/losses.hpp"
#include "mvmesh/lossmetrics/metrics.hpp"
#include "mvmesh/meshrefine/reconstructor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mvmesh {

struct DataConfig {
  int scenes = 8;
  int views = 3;
  int image_size = 64;
  double focal = 80.0;
  double camera_radius = 1.0;
  double elevation_min_deg = 10.0;
  double elevation_max_deg = 40.0;
  std::vector<std::string> primitives{"box", "icosphere", "cylinder", "two-box"};
  double size_min = 0.25;
  double size_max = 0.4;
  void validate() const;
};

struct TrainConfig {
  int mvs_steps = 120;
  double mvs_lr = 1e-3;
  int steps = 300;
  double lr = 1e-3;
  int batch = 1;
  int sample_points = 600;     // predicted-surface samples per stage and step
  int gt_sample_points = 600;  // GT samples used by the training chamfer
  int checkpoint_every = 100;  // 0 disables periodic checkpoints
  bool average_stages = false;
  bool gt_depth = false;       // feed GT depth maps instead of the depth network
  LossWeights weights;
  void validate() const;
};

struct RunConfig {
  std::uint64_t seed = 7;
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  int eval_views = 0;  // 0 = every view of the scene

  /// Copies shared fields (image size, grid centre) into the model section and validates.
  void finalize();
  void validate() const;
};

/// Parses JSON text. Unknown keys, wrong types and out-of-range values raise
/// ValidationError naming the offending key path. Missing keys keep defaults.
RunConfig parse_config(const std::string& json_text, const std::string& name = "<config>");
RunConfig load_config(const std::string& path);
/// Full JSON including every default; parse_config(dump_config(c)) == c.
std::string dump_config(const RunConfig& cfg);

}  // namespace mvmesh
