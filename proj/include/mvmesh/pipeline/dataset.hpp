#pragma once

#include "mvmesh/depthrender/depth_map.hpp"
#include "mvmesh/geomcore/camera.hpp"
#include "mvmesh/geomcore/mesh.hpp"
#include "mvmesh/pipeline/config.hpp"
#include "mvmesh/voxelgrid/grid.hpp"

#include <string>
#include <vector>

namespace mvmesh {

/// One synthetic object with its views. The world frame is the first
/// camera's frame, so the object centre sits at (0, 0, camera_radius).
struct SceneSample {
  std::string name;
  std::string primitive;
  TriangleMesh mesh;
  std::vector<CameraView> cams;          // image resolution
  std::vector<Tensor<float>> images;     // [3,H,W], as stored on disk
  std::vector<DepthMap> depths;          // GT, depth-map resolution
  OccupancyGrid occupancy;               // world grid
  std::vector<Tensor<float>> local_occupancy;  // per view, [D,D,D] of 0/1
  Tensor<float> gt_points;               // [M,3] training samples
  Tensor<float> gt_normals;

  int views() const { return static_cast<int>(cams.size()); }
  /// Copy restricted to the first `n` views.
  SceneSample first_views(int n) const;
};

/// Object mesh and cameras of scene `index`, before any rendering.
struct SceneGeometry {
  std::string primitive;
  TriangleMesh mesh;
  std::vector<CameraView> cams;
};

SceneGeometry make_scene_geometry(const RunConfig& cfg, int index);

/// Derived artefacts: renders, GT depth, occupancy targets and samples.
SceneSample build_sample(const RunConfig& cfg, std::string name, SceneGeometry geometry);

/// Writes scene_XXX/{mesh.obj, view<i>.cam, view<i>.ppm, view<i>.dpth,
/// occupancy.voxp} and manifest.json under `dir`.
void generate_dataset(const RunConfig& cfg, const std::string& dir);

/// Loads scenes listed in dir/manifest.json. The images are read back from
/// the PPM files; `views` keeps the first n views (0 = all).
std::vector<SceneSample> load_dataset(const RunConfig& cfg, const std::string& dir, int views = 0);

/// Voxel-centre occupancy of `mesh` (world frame) in the grid each camera predicts.
Tensor<float> local_occupancy_target(const RunConfig& cfg, const TriangleMesh& mesh, const CameraView& cam);

}  // namespace mvmesh
