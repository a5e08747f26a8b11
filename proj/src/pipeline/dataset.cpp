#include "mvmesh/pipeline/dataset.hpp"

#include "mvmesh/depthrender/rasterize.hpp"
#include "mvmesh/diffmath/init.hpp"
#include "mvmesh/error.hpp"
#include "mvmesh/geomcore/io.hpp"
#include "mvmesh/geomcore/primitives.hpp"
#include "mvmesh/geomcore/sampling.hpp"
#include "mvmesh/voxelgrid/io.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

namespace mvmesh {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

SceneSample SceneSample::first_views(int n) const {
  if (n < 1 || n > views()) throw ValidationError(name + ": cannot keep " + std::to_string(n) + " of " +
                                                  std::to_string(views()) + " views");
  SceneSample s = *this;
  s.cams.resize(static_cast<std::size_t>(n));
  s.images.resize(static_cast<std::size_t>(n));
  s.depths.resize(static_cast<std::size_t>(n));
  s.local_occupancy.resize(static_cast<std::size_t>(n));
  return s;
}

namespace {

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng()); }

Eigen::Isometry3d yaw_pose(double yaw) {
  Eigen::Isometry3d p = Eigen::Isometry3d::Identity();
  p.linear() = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  return p;
}

TriangleMesh make_object(const std::string& kind, Rng& rng, double smin, double smax) {
  const double s = uniform(rng, smin, smax);
  const Eigen::Isometry3d pose = yaw_pose(uniform(rng, 0.0, 2.0 * std::numbers::pi));
  if (kind == "icosphere") return icosphere(2, 0.5 * s);
  if (kind == "box") {
    const Eigen::Vector3d size(0.8 * s, 0.8 * uniform(rng, smin, smax), 0.8 * uniform(rng, smin, smax));
    return box(size, pose);
  }
  if (kind == "cylinder") {
    Eigen::Isometry3d upright = Eigen::Isometry3d::Identity();
    upright.linear() = Eigen::AngleAxisd(0.5 * std::numbers::pi, Eigen::Vector3d::UnitX()).toRotationMatrix();
    return cylinder(0.4 * s, s, 16, pose * upright);
  }
  // two-box: a slab with a smaller block above it, separated by a small gap
  Eigen::Isometry3d low = Eigen::Isometry3d::Identity(), high = Eigen::Isometry3d::Identity();
  low.translation() = Eigen::Vector3d(0.0, 0.0, -0.2 * s);
  high.translation() = Eigen::Vector3d(0.1 * s, 0.0, 0.25 * s);
  return merge_meshes({box(Eigen::Vector3d(s, 0.7 * s, 0.3 * s), pose * low),
                       box(Eigen::Vector3d(0.5 * s, 0.5 * s, 0.5 * s), pose * high)});
}

Eigen::Isometry3d extrinsics_isometry(const CameraView& cam) {
  Eigen::Isometry3d m = Eigen::Isometry3d::Identity();
  m.linear() = cam.rotation();
  m.translation() = cam.translation();
  return m;
}

std::string scene_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%03d", i);
  return buf;
}

std::uint64_t sample_seed(const RunConfig& cfg, const std::string& name) { return derived_rng(cfg.seed, name + ".gt")(); }

}  // namespace

SceneGeometry make_scene_geometry(const RunConfig& cfg, int index) {
  const auto& d = cfg.data;
  Rng rng = derived_rng(cfg.seed, scene_name(index));
  SceneGeometry g;
  g.primitive = d.primitives[static_cast<std::size_t>(index) % d.primitives.size()];
  const TriangleMesh object = make_object(g.primitive, rng, d.size_min, d.size_max);

  // Azimuths spread evenly around the object with jitter; elevation uniform in range.
  const double base = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double sector = 2.0 * std::numbers::pi / d.views;
  std::vector<CameraView> cams;
  for (int v = 0; v < d.views; ++v) {
    const double az = base + v * sector + uniform(rng, -0.15, 0.15) * sector;
    const double el = uniform(rng, d.elevation_min_deg, d.elevation_max_deg) * std::numbers::pi / 180.0;
    const Eigen::Vector3d eye =
        d.camera_radius * Eigen::Vector3d(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    cams.push_back(CameraView::look_at(eye, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ(), d.focal, d.image_size,
                                       d.image_size));
  }
  const Eigen::Isometry3d to_cam0 = extrinsics_isometry(cams.front());
  g.mesh = transformed(object, to_cam0);
  for (const auto& c : cams) g.cams.push_back(c.rebased(to_cam0));
  return g;
}

Tensor<float> local_occupancy_target(const RunConfig& cfg, const TriangleMesh& mesh, const CameraView& cam) {
  const Reconstructor<float> model(cfg.model);
  const OccupancyGrid g =
      voxelize(mesh, model.local_geometry(), GridFrame::CameraLocal, extrinsics_isometry(cam).inverse());
  const int D = cfg.model.voxel.grid_resolution;
  Tensor<float> t({D, D, D});
  for (Index i = 0; i < t.size(); ++i) t[i] = g.values[static_cast<std::size_t>(i)] > 0.5 ? 1.0f : 0.0f;
  return t;
}

SceneSample build_sample(const RunConfig& cfg, std::string name, SceneGeometry geometry) {
  const Reconstructor<float> model(cfg.model);
  SceneSample s;
  s.name = std::move(name);
  s.primitive = std::move(geometry.primitive);
  s.mesh = std::move(geometry.mesh);
  s.cams = std::move(geometry.cams);
  for (const auto& cam : s.cams) {
    s.images.push_back(quantize8(shade_normals(s.mesh, cam, rasterize(s.mesh, cam))).tensor<float>());
    s.depths.push_back(rasterize_depth(s.mesh, model.depth_camera(cam)));
    s.local_occupancy.push_back(local_occupancy_target(cfg, s.mesh, cam));
  }
  s.occupancy = voxelize(s.mesh, model.world_geometry(), GridFrame::World);
  const auto samples = sample_surface(s.mesh, cfg.train.gt_sample_points, sample_seed(cfg, s.name));
  const Index m = static_cast<Index>(samples.size());
  s.gt_points = Tensor<float>({m, 3});
  s.gt_normals = Tensor<float>({m, 3});
  for (Index i = 0; i < m; ++i)
    for (Index k = 0; k < 3; ++k) {
      s.gt_points[3 * i + k] = static_cast<float>(samples[static_cast<std::size_t>(i)].position[k]);
      s.gt_normals[3 * i + k] = static_cast<float>(samples[static_cast<std::size_t>(i)].normal[k]);
    }
  return s;
}

void generate_dataset(const RunConfig& cfg, const std::string& dir) {
  cfg.validate();
  fs::create_directories(dir);
  Json manifest;
  manifest["format"] = "mvmesh-dataset";
  manifest["version"] = 1;
  manifest["seed"] = cfg.seed;
  manifest["image_size"] = cfg.data.image_size;
  manifest["depth_size"] = cfg.data.image_size / 4;
  manifest["grid_resolution"] = cfg.model.voxel.grid_resolution;
  Json scenes = Json::array();
  for (int i = 0; i < cfg.data.scenes; ++i) {
    const std::string name = scene_name(i);
    const SceneSample s = build_sample(cfg, name, make_scene_geometry(cfg, i));
    const fs::path sd = fs::path(dir) / name;
    fs::create_directories(sd);
    save_obj((sd / "mesh.obj").string(), s.mesh);
    for (int v = 0; v < s.views(); ++v) {
      const std::string stem = "view" + std::to_string(v);
      save_camera((sd / (stem + ".cam")).string(), s.cams[static_cast<std::size_t>(v)]);
      Image img(cfg.data.image_size, cfg.data.image_size);
      const auto& t = s.images[static_cast<std::size_t>(v)];
      for (Index k = 0; k < t.size(); ++k) img.data[static_cast<std::size_t>(k)] = t[k];
      save_ppm((sd / (stem + ".ppm")).string(), img);
      save_dpth((sd / (stem + ".dpth")).string(), s.depths[static_cast<std::size_t>(v)]);
    }
    save_voxp((sd / "occupancy.voxp").string(), s.occupancy);
    scenes.push_back({{"name", name},
                      {"primitive", s.primitive},
                      {"views", s.views()},
                      {"vertices", s.mesh.vertex_count()},
                      {"faces", s.mesh.face_count()},
                      {"occupied_voxels", s.occupancy.count_at_least(0.5)}});
  }
  manifest["scenes"] = scenes;
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + dir);
  out << manifest.dump(2) << "\n";
}

std::vector<SceneSample> load_dataset(const RunConfig& cfg, const std::string& dir, int views) {
  const fs::path mpath = fs::path(dir) / "manifest.json";
  std::ifstream in(mpath);
  if (!in) throw ValidationError("no dataset manifest at " + mpath.string());
  Json manifest;
  try {
    manifest = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ValidationError(mpath.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != "mvmesh-dataset" || manifest.value("version", 0) != 1)
    throw ValidationError(mpath.string() + ": not a version 1 mvmesh dataset");
  if (manifest.value("image_size", 0) != cfg.data.image_size)
    throw ValidationError(mpath.string() + ": image size differs from the config");

  std::vector<SceneSample> out;
  for (const auto& entry : manifest.at("scenes")) {
    const std::string name = entry.at("name").get<std::string>();
    const int stored = entry.at("views").get<int>();
    const int keep = views == 0 ? stored : views;
    if (keep > stored) throw ValidationError(name + ": requested " + std::to_string(keep) + " views, dataset has " +
                                             std::to_string(stored));
    const fs::path sd = fs::path(dir) / name;
    SceneGeometry g;
    g.primitive = entry.value("primitive", "");
    g.mesh = load_obj((sd / "mesh.obj").string());
    std::vector<Tensor<float>> images;
    std::vector<DepthMap> depths;
    for (int v = 0; v < keep; ++v) {
      const std::string stem = "view" + std::to_string(v);
      g.cams.push_back(load_camera((sd / (stem + ".cam")).string()));
      images.push_back(load_ppm((sd / (stem + ".ppm")).string()).tensor<float>());
      depths.push_back(load_dpth((sd / (stem + ".dpth")).string()));
    }
    const OccupancyGrid occ = load_voxp((sd / "occupancy.voxp").string());
    SceneSample s = build_sample(cfg, name, std::move(g));
    // Stored files are authoritative for the supervision signals.
    s.images = std::move(images);
    s.depths = std::move(depths);
    s.occupancy = occ;
    out.push_back(std::move(s));
  }
  if (out.empty()) throw ValidationError(mpath.string() + ": dataset has no scenes");
  return out;
}

}  // namespace mvmesh
