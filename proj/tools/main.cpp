#include "mvmesh/depthrender/rasterize.hpp"
#include "mvmesh/error.hpp"
#include "mvmesh/geomcore/io.hpp"
#include "mvmesh/pipeline/evaluate.hpp"
#include "mvmesh/pipeline/gradsuite.hpp"
#include "mvmesh/pipeline/trainer.hpp"
#include "mvmesh/voxelgrid/cubify.hpp"
#include "mvmesh/voxelgrid/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

using namespace mvmesh;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
};

void add_common(CLI::App* app, Common& c, bool out_required = false) {
  app->add_option("--config", c.config, "JSON run configuration (defaults when omitted)");
  app->add_option("--seed", c.seed, "override the config seed");
  auto* o = app->add_option("--out", c.out, "output directory");
  if (out_required) o->required();
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  cfg.finalize();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view mesh reconstruction: data generation, training, evaluation and tools"};
  app.require_subcommand(1);

  Common gen_c, train_c, eval_c, pred_c, render_c, fuse_c, grad_c, dump_c;

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
  add_common(gen, gen_c);

  auto* train_cmd = app.add_subcommand("train", "two-phase training");
  add_common(train_cmd, train_c);
  std::string train_data, resume;
  bool quiet = false;
  train_cmd->add_option("--data", train_data, "dataset directory")->required();
  train_cmd->add_option("--resume", resume, "training-state checkpoint to continue from");
  train_cmd->add_flag("--quiet", quiet, "no progress output");

  auto* eval_cmd = app.add_subcommand("eval", "score checkpoints on a dataset");
  add_common(eval_cmd, eval_c);
  std::string eval_data;
  std::vector<std::string> checkpoints;
  int eval_views = -1;
  eval_cmd->add_option("--data", eval_data, "dataset directory")->required();
  eval_cmd->add_option("--checkpoint", checkpoints, "checkpoint(s); labels come from their edge weight")->required();
  eval_cmd->add_option("--views", eval_views, "views per scene (default: config eval.views)");

  auto* pred = app.add_subcommand("predict", "reconstruct one scene");
  add_common(pred, pred_c);
  std::string pred_ckpt, scene_dir;
  int pred_views = 0;
  pred->add_option("--checkpoint", pred_ckpt, "model checkpoint")->required();
  pred->add_option("--scene", scene_dir, "directory with view<i>.ppm and view<i>.cam")->required();
  pred->add_option("--views", pred_views, "number of views to use (0 = all found)");

  auto* render = app.add_subcommand("render-depth", "rasterize a mesh into a depth map and normal image");
  add_common(render, render_c);
  std::string mesh_path, cam_path;
  double scale = 1.0;
  render->add_option("--mesh", mesh_path, "OBJ mesh")->required();
  render->add_option("--camera", cam_path, "camera file")->required();
  render->add_option("--scale", scale, "image scale factor (0.25 gives the depth-map size)");

  auto* fuse = app.add_subcommand("fuse-voxels", "log-odds fusion of camera-local grids");
  add_common(fuse, fuse_c);
  std::vector<std::string> grids, cams;
  fuse->add_option("--grid", grids, "camera-local .voxp, one per view")->required();
  fuse->add_option("--camera", cams, "camera file, one per grid")->required();

  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  add_common(grad, grad_c);

  auto* dump = app.add_subcommand("dump-config", "print the full configuration with defaults");
  add_common(dump, dump_c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      const RunConfig cfg = resolve(gen_c);
      generate_dataset(cfg, gen_c.out);
      std::cout << "wrote " << cfg.data.scenes << " scenes to " << gen_c.out << "\n";
    } else if (*train_cmd) {
      const RunConfig cfg = resolve(train_c);
      const TrainSummary s = train(cfg, {train_data, train_c.out, resume, quiet});
      std::cout << "trained " << s.steps << " steps; probe loss " << s.initial_probe << " -> " << s.final_probe
                << "\nstate " << s.checkpoint << "\nmodel " << s.model_file << "\n";
    } else if (*eval_cmd) {
      const RunConfig cfg = resolve(eval_c);
      const int views = eval_views >= 0 ? eval_views : cfg.eval_views;
      const auto scenes = load_dataset(cfg, eval_data, views);
      std::vector<EvalReport> reports;
      for (const auto& c : checkpoints) reports.push_back(evaluate_checkpoint(cfg, c, scenes));
      save_reports(eval_c.out, reports);
      write_report_text(std::cout, reports);
    } else if (*pred) {
      const RunConfig cfg = resolve(pred_c);
      predict(cfg, load_checkpoint(pred_ckpt), load_predict_inputs(scene_dir, pred_views, cfg.train.gt_depth),
              pred_c.out);
      std::cout << "wrote " << (fs::path(pred_c.out) / "manifest.json").string() << "\n";
    } else if (*render) {
      resolve(render_c);
      const TriangleMesh mesh = load_obj(mesh_path);
      CameraView cam = load_camera(cam_path);
      if (scale != 1.0) cam = cam.scaled(scale);
      const RasterBuffers rb = rasterize(mesh, cam);
      fs::create_directories(render_c.out);
      save_dpth((fs::path(render_c.out) / "depth.dpth").string(), rb.depth);
      save_ppm((fs::path(render_c.out) / "normals.ppm").string(), shade_normals(mesh, cam, rb));
      std::cout << "covered pixels: " << rb.depth.covered() << "\n";
    } else if (*fuse) {
      const RunConfig cfg = resolve(fuse_c);
      if (grids.size() != cams.size()) throw ValidationError("fuse-voxels: one --camera per --grid required");
      const Reconstructor<float> model(cfg.model);
      std::vector<LogOddsGrid> world;
      for (std::size_t i = 0; i < grids.size(); ++i) {
        const OccupancyGrid g = load_voxp(grids[i]);
        world.push_back(resample_to_world(to_logodds(g), load_camera(cams[i]), model.world_geometry()));
      }
      const OccupancyGrid merged = merge_views(world);
      fs::create_directories(fuse_c.out);
      save_voxp((fs::path(fuse_c.out) / "merged.voxp").string(), merged);
      const int occupied = merged.count_at_least(cfg.model.cubify_threshold);
      if (occupied > 0) save_obj((fs::path(fuse_c.out) / "merged.obj").string(), cubify(merged, cfg.model.cubify_threshold));
      std::cout << "occupied voxels: " << occupied << "\n";
    } else if (*grad) {
      const RunConfig cfg = resolve(grad_c);
      const auto items = run_gradient_suite(cfg.seed);
      write_gradient_suite(std::cout, items);
      fs::create_directories(grad_c.out);
      std::ofstream f(fs::path(grad_c.out) / "gradcheck.txt");
      write_gradient_suite(f, items);
      for (const auto& it : items)
        if (!it.passed()) return 1;
    } else if (*dump) {
      std::cout << dump_config(resolve(dump_c));
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
