#include "mvmesh/pipeline/config.hpp"

#include "mvmesh/error.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace mvmesh {

using Json = nlohmann::ordered_json;

void DataConfig::validate() const {
  if (scenes < 1) throw ValidationError("data.scenes must be >= 1");
  if (views < 1) throw ValidationError("data.views must be >= 1");
  if (image_size < 8 || image_size % 4 != 0) throw ValidationError("data.image_size must be a multiple of 4, >= 8");
  if (!(focal > 0.0)) throw ValidationError("data.focal must be positive");
  if (!(camera_radius > 0.0)) throw ValidationError("data.camera_radius must be positive");
  if (!(elevation_min_deg <= elevation_max_deg) || elevation_min_deg < -89.0 || elevation_max_deg > 89.0)
    throw ValidationError("data.elevation range must lie in [-89, 89] degrees with min <= max");
  if (primitives.empty()) throw ValidationError("data.primitives must not be empty");
  for (const auto& p : primitives)
    if (p != "box" && p != "icosphere" && p != "cylinder" && p != "two-box")
      throw ValidationError("data.primitives: unknown primitive '" + p + "'");
  if (!(size_min > 0.0) || !(size_min <= size_max)) throw ValidationError("data.size range must satisfy 0 < min <= max");
}

void TrainConfig::validate() const {
  if (mvs_steps < 0 || steps < 0) throw ValidationError("train step counts must be >= 0");
  if (!(lr > 0.0) || !(mvs_lr > 0.0)) throw ValidationError("train learning rates must be positive");
  if (batch < 1) throw ValidationError("train.batch must be >= 1");
  if (sample_points < 1 || gt_sample_points < 1) throw ValidationError("train sample counts must be >= 1");
  if (checkpoint_every < 0) throw ValidationError("train.checkpoint_every must be >= 0");
  weights.validate();
}

void RunConfig::finalize() {
  model.image_size = data.image_size;
  model.grid_center_depth = data.camera_radius;
  validate();
}

void RunConfig::validate() const {
  data.validate();
  model.validate();
  train.validate();
  eval.validate();
  if (model.image_size != data.image_size) throw ValidationError("model.image_size must equal data.image_size");
  if (eval_views < 0 || eval_views > data.views) throw ValidationError("eval.views must lie in [0, data.views]");
  const int used = eval_views == 0 ? data.views : eval_views;
  if (!train.gt_depth && (data.views < 2 || used < 2))
    throw ValidationError("the depth network needs at least 2 views; set train.gt_depth for fewer");
}

namespace {

/// Reads one JSON object, tracking which keys were consumed.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "config root" : path_, "must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    used_.insert(key);
    read(*it, full(key), out);
  }

  Section sub(const char* key) {
    auto it = j_.find(key);
    used_.insert(key);
    if (it == j_.end()) return Section(empty_object(), full(key));
    return Section(*it, full(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) fail(full(it.key()), "unknown key");
  }

 private:
  static const Json& empty_object() {
    static const Json e = Json::object();
    return e;
  }

  std::string full(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw ValidationError("config: " + path + ": " + what);
  }

  static void read(const Json& v, const std::string& p, int& out) {
    if (!v.is_number_integer()) fail(p, "expected an integer");
    const auto x = v.get<std::int64_t>();
    if (x < INT32_MIN || x > INT32_MAX) fail(p, "integer out of range");
    out = static_cast<int>(x);
  }
  static void read(const Json& v, const std::string& p, std::uint64_t& out) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      fail(p, "expected a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  static void read(const Json& v, const std::string& p, double& out) {
    if (!v.is_number()) fail(p, "expected a number");
    out = v.get<double>();
  }
  static void read(const Json& v, const std::string& p, bool& out) {
    if (!v.is_boolean()) fail(p, "expected true or false");
    out = v.get<bool>();
  }
  static void read(const Json& v, const std::string& p, std::string& out) {
    if (!v.is_string()) fail(p, "expected a string");
    out = v.get<std::string>();
  }
  template <typename E>
  static void read(const Json& v, const std::string& p, std::vector<E>& out) {
    if (!v.is_array()) fail(p, "expected an array");
    std::vector<E> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) read(v[i], p + "[" + std::to_string(i) + "]", r[i]);
    out = std::move(r);
  }

  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

template <typename E, typename Parse>
void get_enum(Section& s, const char* key, E& out, Parse parse) {
  std::string text;
  s.get(key, text);
  if (text.empty()) return;
  try {
    out = parse(text);
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("config: ") + key + ": " + e.what());
  }
}

Json to_json(const RunConfig& c) {
  const auto& m = c.model;
  const auto& w = c.train.weights;
  Json j;
  j["seed"] = c.seed;
  j["data"] = {{"scenes", c.data.scenes},
               {"views", c.data.views},
               {"image_size", c.data.image_size},
               {"focal", c.data.focal},
               {"camera_radius", c.data.camera_radius},
               {"elevation_min_deg", c.data.elevation_min_deg},
               {"elevation_max_deg", c.data.elevation_max_deg},
               {"primitives", c.data.primitives},
               {"size_min", c.data.size_min},
               {"size_max", c.data.size_max}};
  Json model;
  model["voxel"] = {{"grid_resolution", m.voxel.grid_resolution},
                    {"encoder_channels", m.voxel.encoder_channels},
                    {"encoder_strides", m.voxel.encoder_strides},
                    {"head_channels", m.voxel.head_channels},
                    {"prior", m.voxel_prior}};
  model["grid"] = {{"extent", m.grid_extent}, {"cubify_threshold", m.cubify_threshold}};
  model["init"] = {{"sphere", m.sphere_init}, {"sphere_level", m.sphere_level}, {"sphere_radius", m.sphere_radius}};
  model["mvs"] = {{"feature_channels", m.mvs.feature_channels},
                  {"feature_strides", m.mvs.feature_strides},
                  {"regularization_channels", m.mvs.regularization_channels},
                  {"regularization_layers", m.mvs.regularization_layers},
                  {"d_min", m.hypotheses.d_min},
                  {"step", m.hypotheses.step},
                  {"hypotheses", m.hypotheses.count}};
  model["contrastive"] = {{"mode", to_string(m.contrastive.mode)},
                          {"channels", m.contrastive.channels},
                          {"strides", m.contrastive.strides},
                          {"hierarchy", m.contrastive.hierarchy}};
  model["pooling"] = {{"kind", to_string(m.stage.pool.kind)},
                      {"heads", m.stage.pool.heads},
                      {"head_dim", m.stage.pool.head_dim},
                      {"pooled_dim", m.stage.pool.pooled_dim},
                      {"scale", to_string(m.stage.pool.scale)}};
  model["gcn"] = {{"stages", m.stages},
                  {"layers", m.stage.gcn_layers},
                  {"hidden", m.stage.gcn_hidden},
                  {"refine_init_scale", m.stage.refine_init_scale}};
  j["model"] = model;
  j["train"] = {{"mvs_steps", c.train.mvs_steps},
                {"mvs_lr", c.train.mvs_lr},
                {"steps", c.train.steps},
                {"lr", c.train.lr},
                {"batch", c.train.batch},
                {"sample_points", c.train.sample_points},
                {"gt_sample_points", c.train.gt_sample_points},
                {"checkpoint_every", c.train.checkpoint_every},
                {"average_stages", c.train.average_stages},
                {"gt_depth", c.train.gt_depth},
                {"weights",
                 {{"chamfer", w.chamfer},
                  {"normal", w.normal},
                  {"edge", w.edge},
                  {"depth", w.depth},
                  {"contrastive", w.contrastive},
                  {"voxel", w.voxel}}}};
  j["eval"] = {{"tau", c.eval.tau},
               {"pred_samples", c.eval.pred_samples},
               {"gt_samples", c.eval.gt_samples},
               {"seed", c.eval.seed},
               {"views", c.eval_views}};
  return j;
}

}  // namespace

RunConfig parse_config(const std::string& json_text, const std::string& name) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw ValidationError(name + ": invalid JSON: " + e.what());
  }
  RunConfig c;
  Section root(j, "");
  root.get("seed", c.seed);

  Section data = root.sub("data");
  data.get("scenes", c.data.scenes);
  data.get("views", c.data.views);
  data.get("image_size", c.data.image_size);
  data.get("focal", c.data.focal);
  data.get("camera_radius", c.data.camera_radius);
  data.get("elevation_min_deg", c.data.elevation_min_deg);
  data.get("elevation_max_deg", c.data.elevation_max_deg);
  data.get("primitives", c.data.primitives);
  data.get("size_min", c.data.size_min);
  data.get("size_max", c.data.size_max);
  data.finish();

  auto& m = c.model;
  Section model = root.sub("model");
  Section voxel = model.sub("voxel");
  voxel.get("grid_resolution", m.voxel.grid_resolution);
  voxel.get("encoder_channels", m.voxel.encoder_channels);
  voxel.get("encoder_strides", m.voxel.encoder_strides);
  voxel.get("head_channels", m.voxel.head_channels);
  voxel.get("prior", m.voxel_prior);
  voxel.finish();
  Section grid = model.sub("grid");
  grid.get("extent", m.grid_extent);
  grid.get("cubify_threshold", m.cubify_threshold);
  grid.finish();
  Section init = model.sub("init");
  init.get("sphere", m.sphere_init);
  init.get("sphere_level", m.sphere_level);
  init.get("sphere_radius", m.sphere_radius);
  init.finish();
  Section mvs = model.sub("mvs");
  mvs.get("feature_channels", m.mvs.feature_channels);
  mvs.get("feature_strides", m.mvs.feature_strides);
  mvs.get("regularization_channels", m.mvs.regularization_channels);
  mvs.get("regularization_layers", m.mvs.regularization_layers);
  mvs.get("d_min", m.hypotheses.d_min);
  mvs.get("step", m.hypotheses.step);
  mvs.get("hypotheses", m.hypotheses.count);
  mvs.finish();
  Section contrast = model.sub("contrastive");
  get_enum(contrast, "mode", m.contrastive.mode, parse_contrastive_mode);
  contrast.get("channels", m.contrastive.channels);
  contrast.get("strides", m.contrastive.strides);
  contrast.get("hierarchy", m.contrastive.hierarchy);
  contrast.finish();
  Section pool = model.sub("pooling");
  get_enum(pool, "kind", m.stage.pool.kind, parse_pool_kind);
  pool.get("heads", m.stage.pool.heads);
  pool.get("head_dim", m.stage.pool.head_dim);
  pool.get("pooled_dim", m.stage.pool.pooled_dim);
  get_enum(pool, "scale", m.stage.pool.scale, parse_attention_scale);
  pool.finish();
  Section gcn = model.sub("gcn");
  gcn.get("stages", m.stages);
  gcn.get("layers", m.stage.gcn_layers);
  gcn.get("hidden", m.stage.gcn_hidden);
  gcn.get("refine_init_scale", m.stage.refine_init_scale);
  gcn.finish();
  model.finish();

  Section train = root.sub("train");
  train.get("mvs_steps", c.train.mvs_steps);
  train.get("mvs_lr", c.train.mvs_lr);
  train.get("steps", c.train.steps);
  train.get("lr", c.train.lr);
  train.get("batch", c.train.batch);
  train.get("sample_points", c.train.sample_points);
  train.get("gt_sample_points", c.train.gt_sample_points);
  train.get("checkpoint_every", c.train.checkpoint_every);
  train.get("average_stages", c.train.average_stages);
  train.get("gt_depth", c.train.gt_depth);
  Section weights = train.sub("weights");
  auto& w = c.train.weights;
  weights.get("chamfer", w.chamfer);
  weights.get("normal", w.normal);
  weights.get("edge", w.edge);
  weights.get("depth", w.depth);
  weights.get("contrastive", w.contrastive);
  weights.get("voxel", w.voxel);
  weights.finish();
  train.finish();

  Section eval = root.sub("eval");
  eval.get("tau", c.eval.tau);
  eval.get("pred_samples", c.eval.pred_samples);
  eval.get("gt_samples", c.eval.gt_samples);
  eval.get("seed", c.eval.seed);
  eval.get("views", c.eval_views);
  eval.finish();
  root.finish();

  c.finalize();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string dump_config(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

}  // namespace mvmesh
