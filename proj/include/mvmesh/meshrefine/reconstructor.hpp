#pragma once

#include "mvmesh/depthrender/depth_map.hpp"
#include "mvmesh/featfuse/contrastive.hpp"
#include "mvmesh/meshrefine/gcn.hpp"
#include "mvmesh/mvsdepth/mvs_net.hpp"
#include "mvmesh/voxelgrid/grid.hpp"
#include "mvmesh/voxelgrid/voxel_net.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mvmesh {

struct ModelConfig {
  int image_size = 64;
  VoxelNetConfig voxel;
  double voxel_prior = 0.1;  // initial occupancy probability of the voxel head
  double grid_extent = 0.64;
  double grid_center_depth = 1.0;  // distance from each camera to the object centre
  double cubify_threshold = 0.5;
  bool sphere_init = false;
  int sphere_level = 2;
  double sphere_radius = 0.2;
  MvsConfig mvs;
  DepthHypotheses hypotheses;
  ContrastiveConfig contrastive;
  StageConfig stage;
  int stages = 3;
  void validate() const;
};

/// Initial mesh for refinement: the cubified merged grid, or an icosphere at
/// the grid centre when configured or when the grid is empty.
struct InitialMesh {
  TriangleMesh mesh;
  bool sphere = false;
  bool fallback = false;  // cubify found no occupied voxel
};

template <typename T>
struct RefineResult {
  std::vector<Var<T>> vertices;              // one [V,3] per stage
  std::vector<TriangleMesh> meshes;          // stage outputs, same topology as the initial mesh
  std::vector<std::vector<DepthMap>> renders;  // renders[s][view]; s = 0 is the initial mesh
  std::vector<AttentionWeights> attention;   // per stage, attention pooling only
};

/// Voxel branch, depth network and refinement stages with one parameter
/// set. World coordinates are those of the first camera.
template <typename T>
class Reconstructor {
 public:
  explicit Reconstructor(ModelConfig cfg);

  void init(ParameterSet<T>& params, Rng& rng) const;

  /// Camera-local grid each view predicts, and the world grid views merge into.
  GridGeometry local_geometry() const;
  GridGeometry world_geometry() const;
  int depth_size() const { return cfg_.image_size / 4; }
  CameraView depth_camera(const CameraView& cam) const;

  /// Per-view [D,D,D] occupancy probabilities laid out [z,y,x].
  std::vector<Var<T>> voxel_probabilities(Bound<T>& b, const std::vector<Var<T>>& images) const;
  /// Log-odds fusion of per-view predictions in the world grid.
  OccupancyGrid merge(const std::vector<Tensor<T>>& probabilities, const std::vector<CameraView>& cams) const;
  InitialMesh initial_mesh(const OccupancyGrid& merged) const;

  /// Depth maps at `depth_size()`; needs at least 2 views.
  std::vector<Var<T>> predict_depths(Bound<T>& b, const std::vector<Var<T>>& images,
                                     const std::vector<CameraView>& cams) const;

  /// Runs every stage from `initial`. `depths` are per-view [h,w] maps fed
  /// to the contrastive extractor; renders are constants.
  RefineResult<T> refine(Bound<T>& b, const TriangleMesh& initial, const std::vector<CameraView>& cams,
                         const std::vector<Var<T>>& depths, bool keep_attention = false) const;

  const ModelConfig& config() const { return cfg_; }
  const VoxelNet<T>& voxel_net() const { return voxel_; }
  const MvsNet<T>& mvs_net() const { return mvs_; }

 private:
  ModelConfig cfg_;
  VoxelNet<T> voxel_;
  MvsNet<T> mvs_;
  DepthFeatureExtractor<T> contrast_;
  std::vector<RefineStage<T>> stages_;
};

/// Everything one inference pass produces.
struct PipelineResult {
  std::vector<OccupancyGrid> view_grids;  // camera-local probabilities
  std::vector<Tensor<float>> view_probabilities;  // same values as [D,D,D] tensors
  OccupancyGrid merged;
  InitialMesh initial;
  std::vector<DepthMap> depths;
  std::vector<TriangleMesh> stages;
  std::vector<AttentionWeights> attention;
  std::vector<std::string> warnings;
  const TriangleMesh& final_mesh() const { return stages.empty() ? initial.mesh : stages.back(); }
};

/// Images [3,H,W] in [0,1]. `gt_depths`, when given, replace the depth
/// network's output (one per view, at depth resolution).
PipelineResult run_pipeline(const Reconstructor<float>& model, ParameterSet<float>& params,
                            const std::vector<Tensor<float>>& images, const std::vector<CameraView>& cams,
                            const std::vector<DepthMap>* gt_depths = nullptr, bool keep_attention = false);

extern template class Reconstructor<float>;
extern template class Reconstructor<double>;

}  // namespace mvmesh
