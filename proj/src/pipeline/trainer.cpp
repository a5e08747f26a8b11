#include "mvmesh/pipeline/trainer.hpp"

#include "mvmesh/diffmath/init.hpp"
#include "mvmesh/error.hpp"
#include "mvmesh/geomcore/geometry_ops.hpp"
#include "mvmesh/geomcore/io.hpp"
#include "mvmesh/geomcore/sampling.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace mvmesh {

namespace fs = std::filesystem;

void write_log_header(std::ostream& out) {
  out << "phase,step,total,chamfer,normal,edge,contrastive,depth,voxel\n";
}

void write_log_row(std::ostream& out, const StepLog& l) {
  out << l.phase << ',' << l.step;
  for (double v : {l.total, l.chamfer, l.normal, l.edge, l.contrastive, l.depth, l.voxel}) out << ',' << format_double(v);
  out << '\n';
}

void init_parameters(const Reconstructor<float>& model, ParameterSet<float>& params, std::uint64_t seed) {
  Rng rng = derived_rng(seed, "model");
  model.init(params, rng);
}

TensorMap parameter_checkpoint(const ParameterSet<float>& params, const LossWeights& weights) {
  TensorMap out;
  for (const auto& [name, p] : params) out.emplace("param." + name, p.value);
  out.emplace("meta.edge_weight", Tensor<float>::scalar(static_cast<float>(weights.edge)));
  return out;
}

void restore_parameters(ParameterSet<float>& params, const TensorMap& ckpt, const std::string& name) {
  std::size_t seen = 0;
  for (const auto& [key, t] : ckpt) {
    if (key.rfind("param.", 0) != 0) continue;
    const std::string pname = key.substr(6);
    if (!params.contains(pname)) throw ValidationError(name + ": parameter " + pname + " is not part of this model");
    auto& p = params.at(pname);
    if (p.value.shape() != t.shape())
      throw ValidationError(name + ": parameter " + pname + " has shape " + shape_str(t.shape()) + ", model expects " +
                            shape_str(p.value.shape()));
    p.value = t;
    ++seen;
  }
  if (seen != params.size())
    throw ValidationError(name + ": holds " + std::to_string(seen) + " of the model's " +
                          std::to_string(params.size()) + " parameters");
}

namespace {

double item(const Var<float>& v) { return static_cast<double>(v.value().item()); }

std::map<std::string, Tensor<float>> collect_grads(const Tape<float>& tape) {
  std::map<std::string, Tensor<float>> out;
  for (auto& [p, g] : tape.parameter_grads()) out.emplace(p->name, std::move(g));
  return out;
}

void add_grads(std::map<std::string, Tensor<float>>& into, std::map<std::string, Tensor<float>>&& from) {
  for (auto& [name, g] : from) {
    auto [it, inserted] = into.try_emplace(name, std::move(g));
    if (!inserted) it->second.values() += g.values();
  }
}

void check_finite(const StepLog& l) {
  const std::pair<const char*, double> terms[] = {{"chamfer", l.chamfer}, {"normal", l.normal},
                                                  {"edge", l.edge},       {"contrastive", l.contrastive},
                                                  {"depth", l.depth},     {"voxel", l.voxel}};
  for (const auto& [n, v] : terms)
    if (!std::isfinite(v))
      throw NonFiniteError("step " + std::to_string(l.step) + ": non-finite " + n + " loss (" + format_double(v) + ")");
  if (!std::isfinite(l.total)) throw NonFiniteError("step " + std::to_string(l.step) + ": non-finite total loss");
}

void put_moments(TensorMap& out, const std::string& prefix, const Adam<float>& opt) {
  for (const auto& [name, m] : opt.moments()) {
    out.emplace(prefix + ".m." + name, m.m);
    out.emplace(prefix + ".v." + name, m.v);
  }
  out.emplace(prefix + ".steps", Tensor<float>::scalar(static_cast<float>(opt.steps())));
}

void get_moments(const TensorMap& in, const std::string& prefix, Adam<float>& opt) {
  opt.moments().clear();
  const std::string mkey = prefix + ".m.";
  for (const auto& [key, t] : in) {
    if (key.rfind(mkey, 0) != 0) continue;
    const std::string name = key.substr(mkey.size());
    auto vit = in.find(prefix + ".v." + name);
    if (vit == in.end()) throw ValidationError("checkpoint: missing second moment for " + name);
    opt.moments()[name] = {t, vit->second};
  }
  auto sit = in.find(prefix + ".steps");
  if (sit == in.end()) throw ValidationError("checkpoint: missing " + prefix + ".steps");
  opt.set_steps(static_cast<long>(sit->second.item()));
}

}  // namespace

Trainer::Trainer(RunConfig cfg, std::vector<SceneSample> scenes)
    : cfg_(std::move(cfg)),
      scenes_(std::move(scenes)),
      model_(std::make_unique<Reconstructor<float>>(cfg_.model)),
      depth_opt_(Adam<float>::Options{cfg_.train.mvs_lr}),
      refine_opt_(Adam<float>::Options{cfg_.train.lr}) {
  cfg_.validate();
  if (scenes_.empty()) throw ValidationError("train: no scenes");
  for (const auto& s : scenes_)
    if (!cfg_.train.gt_depth && s.views() < 2) throw ValidationError(s.name + ": the depth network needs 2+ views");
  init_parameters(*model_, params_, cfg_.seed);
}

long Trainer::total_steps() const {
  return (cfg_.train.gt_depth ? 0 : cfg_.train.mvs_steps) + cfg_.train.steps;
}

int Trainer::phase() const {
  return step_ < (cfg_.train.gt_depth ? 0 : cfg_.train.mvs_steps) ? 1 : 2;
}

std::vector<int> Trainer::batch_for(long local_step) const {
  std::vector<int> b;
  const long n = static_cast<long>(scenes_.size());
  for (int j = 0; j < cfg_.train.batch; ++j) b.push_back(static_cast<int>((local_step * cfg_.train.batch + j) % n));
  return b;
}

StepLog Trainer::step() {
  if (done()) throw std::logic_error("train: schedule already finished");
  StepLog log;
  if (phase() == 1) {
    log = depth_step(batch_for(step_));
  } else {
    const long local = step_ - (cfg_.train.gt_depth ? 0 : cfg_.train.mvs_steps);
    log = refine_step(batch_for(local), local);
  }
  ++step_;
  return log;
}

StepLog Trainer::depth_step(const std::vector<int>& batch) {
  StepLog log;
  log.phase = 1;
  log.step = step_;
  std::map<std::string, Tensor<float>> grads;
  const float inv = 1.0f / static_cast<float>(batch.size());
  for (int idx : batch) {
    const SceneSample& s = scenes_[static_cast<std::size_t>(idx)];
    Tape<float> tape;
    Bound<float> b(tape, params_);
    std::vector<Var<float>> images;
    for (const auto& img : s.images) images.push_back(tape.constant(img));
    const auto depths = model_->predict_depths(b, images, s.cams);
    Var<float> loss = tape.constant(Tensor<float>::scalar(0.0f));
    for (std::size_t v = 0; v < depths.size(); ++v)
      loss = loss + depth_berhu(depths[v], tape.constant(s.depths[v].tensor<float>()));
    loss = loss * (1.0f / static_cast<float>(depths.size()));
    const double value = item(loss);
    log.depth += value / static_cast<double>(batch.size());
    Var<float> scaled = loss * inv;
    tape.backward(scaled);
    add_grads(grads, collect_grads(tape));
  }
  log.total = cfg_.train.weights.depth * log.depth;
  check_finite(log);
  try {
    depth_opt_.step(params_, grads);
  } catch (const NonFiniteError& e) {
    throw NonFiniteError("step " + std::to_string(step_) + ": " + e.what());
  }
  return log;
}

void Trainer::enter_refine_phase() {
  if (refine_ready_) return;
  params_.set_frozen("mvs.", true);
  cached_depths_.assign(scenes_.size(), {});
  for (std::size_t i = 0; i < scenes_.size(); ++i) {
    const SceneSample& s = scenes_[i];
    if (cfg_.train.gt_depth) {
      for (const auto& d : s.depths) cached_depths_[i].push_back(d.tensor<float>());
      continue;
    }
    Tape<float> tape;
    Bound<float> b(tape, params_);
    std::vector<Var<float>> images;
    for (const auto& img : s.images) images.push_back(tape.constant(img));
    for (const auto& d : model_->predict_depths(b, images, s.cams)) cached_depths_[i].push_back(d.value());
  }
  refine_ready_ = true;
}

StepLog Trainer::scene_losses(const SceneSample& s, int index, std::uint64_t pick_seed, bool backward,
                              std::map<std::string, Tensor<float>>* grads) {
  enter_refine_phase();
  Tape<float> tape;
  Bound<float> b(tape, params_);
  std::vector<Var<float>> images;
  for (const auto& img : s.images) images.push_back(tape.constant(img));

  LossTerms<float> terms;
  const auto probs = model_->voxel_probabilities(b, images);
  std::vector<Tensor<float>> prob_values;
  for (std::size_t v = 0; v < probs.size(); ++v) {
    if (!probs[v].value().values().allFinite())
      throw NonFiniteError("step " + std::to_string(step_) + ": non-finite voxel probabilities for " + s.name +
                           " view " + std::to_string(v));
    terms.voxel.push_back(voxel_bce(probs[v], s.local_occupancy[v]));
    prob_values.push_back(probs[v].value());
  }
  const InitialMesh initial = model_->initial_mesh(model_->merge(prob_values, s.cams));

  std::vector<Var<float>> depths;
  for (std::size_t v = 0; v < s.cams.size(); ++v) {
    depths.push_back(tape.constant(cached_depths_[static_cast<std::size_t>(index)][v]));
    terms.depth.push_back(depth_berhu(depths.back(), tape.constant(s.depths[v].tensor<float>())));
  }

  const auto refined = model_->refine(b, initial.mesh, s.cams, depths);
  Var<float> gt = tape.constant(s.gt_points);
  Var<float> gt_n = tape.constant(s.gt_normals);
  for (std::size_t k = 0; k < refined.vertices.size(); ++k) {
    const TriangleMesh& mesh = refined.meshes[k];
    const Var<float>& verts = refined.vertices[k];
    const auto picks = pick_surface(mesh, cfg_.train.sample_points, pick_seed + k);
    std::vector<int> face_ids;
    face_ids.reserve(picks.size());
    for (const auto& p : picks) face_ids.push_back(p.face);
    Var<float> pts = barycentric_points(verts, mesh.faces(), picks);
    Var<float> nrm = face_normals(verts, mesh.faces(), face_ids);
    const NearestPairs pairs = nearest_pairs(pts, gt);
    terms.chamfer.push_back(chamfer(pts, gt, pairs));
    terms.normal.push_back(normal_loss(nrm, gt_n, pairs));
    terms.edge.push_back(edge_loss(verts, mesh.edges()));

    // Rendered stage depth against the (constant) input depth, views with overlap only.
    std::vector<Var<float>> views;
    for (std::size_t v = 0; v < depths.size(); ++v) {
      Var<float> r = tape.constant(refined.renders[k + 1][v].tensor<float>());
      if (depth_valid_mask(r.value(), depths[v].value()).values().sum() == 0.0f) continue;
      views.push_back(depth_berhu(r, depths[v]));
    }
    Var<float> c = tape.constant(Tensor<float>::scalar(0.0f));
    for (const auto& x : views) c = c + x;
    if (!views.empty()) c = c * (1.0f / static_cast<float>(views.size()));
    terms.contrastive.push_back(c);
  }

  Var<float> total = total_loss(tape, terms, cfg_.train.weights, cfg_.train.average_stages);
  StepLog log;
  log.phase = 2;
  log.step = step_;
  log.total = item(total);
  auto sum = [](const std::vector<Var<float>>& xs) {
    double a = 0.0;
    for (const auto& x : xs) a += item(x);
    return a;
  };
  const double nv = static_cast<double>(s.cams.size());
  log.chamfer = sum(terms.chamfer);
  log.normal = sum(terms.normal);
  log.edge = sum(terms.edge);
  log.contrastive = sum(terms.contrastive);
  log.depth = sum(terms.depth) / nv;
  log.voxel = sum(terms.voxel) / nv;
  check_finite(log);
  if (backward) {
    Var<float> scaled = total * (1.0f / static_cast<float>(cfg_.train.batch));
    tape.backward(scaled);
    add_grads(*grads, collect_grads(tape));
  }
  return log;
}

StepLog Trainer::refine_step(const std::vector<int>& batch, long local_step) {
  std::map<std::string, Tensor<float>> grads;
  StepLog log;
  log.phase = 2;
  log.step = step_;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const int idx = batch[j];
    const std::uint64_t seed =
        derived_rng(cfg_.seed, "picks." + std::to_string(local_step) + "." + std::to_string(j))();
    StepLog l = scene_losses(scenes_[static_cast<std::size_t>(idx)], idx, seed, true, &grads);
    l.step = step_;
    log.total += inv * l.total;
    log.chamfer += inv * l.chamfer;
    log.normal += inv * l.normal;
    log.edge += inv * l.edge;
    log.contrastive += inv * l.contrastive;
    log.depth += inv * l.depth;
    log.voxel += inv * l.voxel;
  }
  try {
    refine_opt_.step(params_, grads);
  } catch (const NonFiniteError& e) {
    throw NonFiniteError("step " + std::to_string(step_) + ": " + e.what());
  }
  return log;
}

double Trainer::probe_total_loss() {
  double total = 0.0;
  for (std::size_t i = 0; i < scenes_.size(); ++i) {
    const std::uint64_t seed = derived_rng(cfg_.seed, "probe." + std::to_string(i))();
    total += scene_losses(scenes_[i], static_cast<int>(i), seed, false, nullptr).total;
  }
  return total / static_cast<double>(scenes_.size());
}

TensorMap Trainer::state() const {
  TensorMap out = parameter_checkpoint(params_, cfg_.train.weights);
  put_moments(out, "adam.depth", depth_opt_);
  put_moments(out, "adam.refine", refine_opt_);
  // Step counts stay exact in f32 up to 2^24.
  out.emplace("meta.step", Tensor<float>::scalar(static_cast<float>(step_)));
  return out;
}

void Trainer::restore(const TensorMap& st) {
  restore_parameters(params_, st);
  get_moments(st, "adam.depth", depth_opt_);
  get_moments(st, "adam.refine", refine_opt_);
  auto it = st.find("meta.step");
  if (it == st.end()) throw ValidationError("checkpoint: missing meta.step; not a training-state checkpoint");
  step_ = static_cast<long>(it->second.item());
  if (step_ < 0 || step_ > total_steps()) throw ValidationError("checkpoint: step outside this schedule");
  refine_ready_ = false;
  params_.set_frozen("mvs.", false);
  if (phase() == 2) enter_refine_phase();
}

TrainSummary train(const RunConfig& cfg, const TrainOptions& opts) {
  fs::create_directories(opts.out_dir);
  Trainer trainer(cfg, load_dataset(cfg, opts.data_dir));
  TrainSummary summary;
  const fs::path out(opts.out_dir);
  const fs::path log_path = out / "train_log.csv";
  std::ofstream log;
  if (!opts.resume.empty()) {
    const TensorMap st = load_checkpoint(opts.resume);
    trainer.restore(st);
    auto it = st.find("meta.initial_probe");
    if (it != st.end()) summary.initial_probe = static_cast<double>(it->second.item());
    const bool fresh = !fs::exists(log_path);
    log.open(log_path, std::ios::app);
    if (fresh) write_log_header(log);
  } else {
    log.open(log_path);
    write_log_header(log);
  }
  if (!log) throw std::runtime_error("cannot write " + log_path.string());

  auto save_state = [&](const fs::path& p) {
    TensorMap st = trainer.state();
    st.emplace("meta.initial_probe", Tensor<float>::scalar(static_cast<float>(summary.initial_probe)));
    save_checkpoint(p.string(), st);
  };

  const long refine_start = cfg.train.gt_depth ? 0 : cfg.train.mvs_steps;
  while (!trainer.done()) {
    if (trainer.step_index() == refine_start && opts.resume.empty()) {
      summary.initial_probe = trainer.probe_total_loss();
      if (!opts.quiet) std::cerr << "phase 2: probe loss " << summary.initial_probe << "\n";
    }
    const StepLog l = trainer.step();
    write_log_row(log, l);
    if (!opts.quiet && (l.step % 25 == 0 || trainer.done()))
      std::cerr << "step " << l.step << " phase " << l.phase << " total " << l.total << "\n";
    const long done = trainer.step_index();
    if (cfg.train.checkpoint_every > 0 && done % cfg.train.checkpoint_every == 0 && !trainer.done())
      save_state(out / ("checkpoint_step" + std::to_string(done) + ".mvmc"));
  }
  log.flush();
  if (cfg.train.steps > 0) summary.final_probe = trainer.probe_total_loss();
  summary.steps = trainer.step_index();
  summary.checkpoint = (out / "state.mvmc").string();
  summary.model_file = (out / "model.mvmc").string();
  save_state(summary.checkpoint);
  save_checkpoint(summary.model_file, parameter_checkpoint(trainer.params(), cfg.train.weights));

  nlohmann::ordered_json j;
  j["steps"] = summary.steps;
  j["initial_probe_loss"] = summary.initial_probe;
  j["final_probe_loss"] = summary.final_probe;
  j["ratio"] = summary.initial_probe > 0.0 ? summary.final_probe / summary.initial_probe : 0.0;
  std::ofstream sj(out / "summary.json");
  sj << j.dump(2) << "\n";
  return summary;
}

}  // namespace mvmesh
