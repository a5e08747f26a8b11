#include "mvmesh/meshrefine/reconstructor.hpp"

#include "mvmesh/depthrender/rasterize.hpp"
#include "mvmesh/error.hpp"
#include "mvmesh/geomcore/geometry_ops.hpp"
#include "mvmesh/geomcore/primitives.hpp"
#include "mvmesh/voxelgrid/cubify.hpp"

namespace mvmesh {

void ModelConfig::validate() const {
  if (image_size < 8 || image_size % 4 != 0) throw ValidationError("model: image_size must be a multiple of 4, >= 8");
  if (!(grid_extent > 0.0) || !(grid_center_depth > 0.0)) throw ValidationError("model: grid sizes must be positive");
  if (!(voxel_prior > 0.0 && voxel_prior < 1.0)) throw ValidationError("model: voxel_prior must be in (0,1)");
  if (!(cubify_threshold > 0.0 && cubify_threshold < 1.0))
    throw ValidationError("model: cubify_threshold must be in (0,1)");
  if (sphere_level < 0 || sphere_level > 5 || !(sphere_radius > 0.0))
    throw ValidationError("model: sphere level must be in [0,5] and radius positive");
  if (stages < 1) throw ValidationError("model: need at least one refinement stage");
  hypotheses.validate();
  contrastive.validate();
  stage.validate();
}

template <typename T>
Reconstructor<T>::Reconstructor(ModelConfig cfg)
    : cfg_((cfg.validate(), std::move(cfg))),
      voxel_(cfg_.voxel, "voxel"),
      mvs_(cfg_.mvs, "mvs"),
      contrast_(cfg_.contrastive, "contrast") {
  for (int s = 0; s < cfg_.stages; ++s)
    stages_.emplace_back(cfg_.stage, contrast_.feature_dim(), "stage" + std::to_string(s));
}

template <typename T>
void Reconstructor<T>::init(ParameterSet<T>& params, Rng& rng) const {
  voxel_.init(params, rng);
  Tensor<T>& bias = params.at("voxel.head1.b").value;
  for (Index i = 0; i < bias.size(); ++i) bias[i] = static_cast<T>(logit(cfg_.voxel_prior));
  mvs_.init(params, rng);
  contrast_.init(params, rng);
  for (const auto& s : stages_) s.init(params, rng);
}

template <typename T>
GridGeometry Reconstructor<T>::local_geometry() const {
  return local_grid_geometry(cfg_.voxel.grid_resolution, cfg_.grid_extent, cfg_.grid_center_depth);
}

template <typename T>
GridGeometry Reconstructor<T>::world_geometry() const {
  return GridGeometry::centered(cfg_.voxel.grid_resolution, cfg_.grid_extent,
                                Eigen::Vector3d(0.0, 0.0, cfg_.grid_center_depth));
}

template <typename T>
CameraView Reconstructor<T>::depth_camera(const CameraView& cam) const {
  return cam.scaled(static_cast<double>(depth_size()) / static_cast<double>(cam.width()));
}

template <typename T>
std::vector<Var<T>> Reconstructor<T>::voxel_probabilities(Bound<T>& b, const std::vector<Var<T>>& images) const {
  std::vector<Var<T>> out;
  for (const auto& img : images) {
    if (img.dim(1) != cfg_.image_size || img.dim(2) != cfg_.image_size)
      throw ValidationError("model: images must be " + std::to_string(cfg_.image_size) + "x" +
                            std::to_string(cfg_.image_size) + ", got " + shape_str(img.shape()));
    out.push_back(voxel_.voxel_head(b, voxel_.encode(b, img)));
  }
  return out;
}

template <typename T>
OccupancyGrid Reconstructor<T>::merge(const std::vector<Tensor<T>>& probabilities,
                                      const std::vector<CameraView>& cams) const {
  if (probabilities.empty() || probabilities.size() != cams.size())
    throw ValidationError("model: one voxel prediction per camera required");
  std::vector<LogOddsGrid> grids;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const OccupancyGrid local = occupancy_from_tensor(probabilities[i], local_geometry(), GridFrame::CameraLocal);
    grids.push_back(resample_to_world(to_logodds(local), cams[i], world_geometry()));
  }
  return merge_views(grids);
}

template <typename T>
InitialMesh Reconstructor<T>::initial_mesh(const OccupancyGrid& merged) const {
  const Eigen::Vector3d center(0.0, 0.0, cfg_.grid_center_depth);
  if (cfg_.sphere_init) return {icosphere(cfg_.sphere_level, cfg_.sphere_radius, center), true, false};
  if (merged.count_at_least(cfg_.cubify_threshold) == 0)
    return {icosphere(cfg_.sphere_level, cfg_.sphere_radius, center), true, true};
  return {cubify(merged, cfg_.cubify_threshold), false, false};
}

template <typename T>
std::vector<Var<T>> Reconstructor<T>::predict_depths(Bound<T>& b, const std::vector<Var<T>>& images,
                                                     const std::vector<CameraView>& cams) const {
  return mvs_.predict_all_views(b, images, cams, cfg_.hypotheses);
}

template <typename T>
RefineResult<T> Reconstructor<T>::refine(Bound<T>& b, const TriangleMesh& initial, const std::vector<CameraView>& cams,
                                         const std::vector<Var<T>>& depths, bool keep_attention) const {
  if (cams.empty() || cams.size() != depths.size()) throw ValidationError("refine: one depth map per camera required");
  if (initial.empty()) throw ValidationError("refine: initial mesh is empty");
  std::vector<CameraView> dcams;
  for (const auto& c : cams) dcams.push_back(depth_camera(c));
  auto render_all = [&](const TriangleMesh& m) {
    std::vector<DepthMap> r;
    for (const auto& c : dcams) r.push_back(rasterize_depth(m, c));
    return r;
  };

  RefineResult<T> out;
  out.renders.push_back(render_all(initial));
  Var<T> v = b.tape().constant(vertices_tensor<T>(initial.vertices()));
  const MeshTopology& topo = *initial.topology();
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    std::vector<Var<T>> per_view;
    for (std::size_t n = 0; n < cams.size(); ++n) {
      auto pyr = contrast_.extract(b, out.renders[s][n].template tensor<T>(), depths[n]);
      per_view.push_back(vertex_features(v, dcams[n], pyr));
    }
    AttentionWeights w;
    v = stages_[s](b, v, topo, stack(per_view, 0), keep_attention ? &w : nullptr);
    if (keep_attention) out.attention.push_back(std::move(w));
    out.vertices.push_back(v);
    out.meshes.push_back(initial.with_vertices(tensor_vertices(v.value())));
    out.renders.push_back(render_all(out.meshes.back()));
  }
  return out;
}

PipelineResult run_pipeline(const Reconstructor<float>& model, ParameterSet<float>& params,
                            const std::vector<Tensor<float>>& images, const std::vector<CameraView>& cams,
                            const std::vector<DepthMap>* gt_depths, bool keep_attention) {
  if (images.empty() || images.size() != cams.size()) throw ValidationError("pipeline: one camera per image required");
  if (!gt_depths && images.size() < 2) throw ValidationError("pipeline: the depth network needs at least 2 views");
  if (gt_depths && gt_depths->size() != images.size()) throw ValidationError("pipeline: one GT depth map per view required");
  Tape<float> tape;
  Bound<float> b(tape, params);
  std::vector<Var<float>> in;
  for (const auto& img : images) in.push_back(tape.constant(img));

  PipelineResult r;
  std::vector<Tensor<float>>& probs = r.view_probabilities;
  for (const auto& p : model.voxel_probabilities(b, in)) {
    probs.push_back(p.value());
    r.view_grids.push_back(occupancy_from_tensor(p.value(), model.local_geometry(), GridFrame::CameraLocal));
  }
  r.merged = model.merge(probs, cams);
  r.initial = model.initial_mesh(r.merged);
  if (r.initial.fallback) r.warnings.push_back("merged voxel grid is empty; starting from an icosphere");

  std::vector<Var<float>> depths;
  if (gt_depths) {
    for (const auto& d : *gt_depths) depths.push_back(tape.constant(d.tensor<float>()));
  } else {
    depths = model.predict_depths(b, in, cams);
  }
  for (const auto& d : depths) r.depths.push_back(DepthMap::from_tensor(d.value()));

  auto refined = model.refine(b, r.initial.mesh, cams, depths, keep_attention);
  r.stages = std::move(refined.meshes);
  r.attention = std::move(refined.attention);
  return r;
}

template class Reconstructor<float>;
template class Reconstructor<double>;

}  // namespace mvmesh
