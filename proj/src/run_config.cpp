#include "crosstrack/run_config.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace crosstrack {

using json = nlohmann::ordered_json;

struct RunConfig::Impl {
  json values;
};

namespace {

json default_registry() {
  json j = json::object();
  j["simulator.width"] = 512.0;
  j["simulator.height"] = 512.0;
  j["simulator.min_objects"] = 4;
  j["simulator.max_objects"] = 8;
  j["simulator.spawn_rate"] = 0.05;
  j["simulator.despawn_rate"] = 0.0;
  j["simulator.mean_lifetime"] = 32.0;
  j["simulator.min_speed"] = 1.0;
  j["simulator.max_speed"] = 5.0;
  j["simulator.velocity_noise_std"] = 0.3;
  j["simulator.min_box_size"] = 16.0;
  j["simulator.max_box_size"] = 48.0;
  j["simulator.appearance_dim"] = 16;
  j["simulator.signature_scale"] = 1.0;
  j["simulator.appearance_noise_std"] = 0.05;
  j["simulator.miss_rate"] = 0.05;
  j["simulator.false_positive_rate"] = 0.1;
  j["simulator.box_jitter_std"] = 1.0;
  j["simulator.occlusion_rate"] = 0.02;
  j["simulator.occlusion_min"] = 1;
  j["simulator.occlusion_max"] = 10;
  j["simulator.num_sequences"] = 10;
  j["simulator.num_frames"] = 200;

  j["model.appearance_dim"] = 16;
  j["model.encoder_hidden"] = 64;
  j["model.feature_dim"] = 64;
  j["model.lstm_hidden"] = 64;
  j["model.spatial_scale"] = 512.0;

  j["train.scheme"] = "visual_spatial";  // or "occlusion"
  j["train.norm"] = "min_row_col";       // or "row_only"
  j["train.n_min"] = 4;
  j["train.n_max"] = 16;
  j["train.learning_rate"] = 1e-4;
  j["train.plateau_learning_rate"] = 1e-5;
  j["train.eval_interval"] = 500;
  j["train.plateau_patience"] = 3;
  j["train.max_steps"] = 4000;
  j["train.checkpoint_interval"] = 1000;
  j["train.use_artificial"] = true;
  j["train.use_mask"] = true;
  j["train.artificial_min_distance"] = 80;
  j["train.heldout_tuples"] = 32;
  j["train.occlusion_min_windows"] = 1;
  j["train.occlusion_max_windows"] = 2;
  j["train.occlusion_min_window_len"] = 1;
  j["train.occlusion_max_window_len"] = 3;

  j["infer.mode"] = "fused";  // "fused", "plain", "spatial_only"
  j["infer.accept_threshold"] = 0.2;
  j["infer.visual_samples"] = 5;
  j["infer.t_miss"] = 30;
  j["infer.state_window"] = 8;  // 0 = unbounded recurrent state

  j["eval.iou_threshold"] = 0.5;
  j["eval.baseline_iou_threshold"] = 0.3;

  j["seed"] = 0;
  return j;
}

json parse_typed(const std::string& key, const std::string& text, const json& current) {
  json parsed;
  if (current.is_string()) return json(text);
  try {
    parsed = json::parse(text);
  } catch (const json::exception&) {
    throw std::runtime_error("config key '" + key + "': cannot parse value '" + text + "'");
  }
  return parsed;
}

void check_type(const std::string& key, const json& current, const json& incoming) {
  const bool number_ok = current.is_number() && incoming.is_number();
  if (!number_ok && current.type() != incoming.type()) {
    throw std::runtime_error("config key '" + key + "' expects a " +
                             std::string(current.type_name()) + ", got '" + incoming.dump() +
                             "'");
  }
  // Integer slots reject fractional values.
  if (current.is_number_integer() && incoming.is_number_float()) {
    const double v = incoming.get<double>();
    if (v != static_cast<long long>(v)) {
      throw std::runtime_error("config key '" + key + "' expects an integer, got '" +
                               incoming.dump() + "'");
    }
  }
}

}  // namespace

RunConfig::RunConfig() : impl_(std::make_shared<Impl>()) { impl_->values = default_registry(); }

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw std::runtime_error("config file " + path + " must hold a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!impl_->values.contains(key)) {
      throw std::runtime_error("config file " + path + ": unknown key '" + key + "'");
    }
    check_type(key, impl_->values[key], value);
    impl_->values[key] = value;
  }
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw std::runtime_error("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  if (!impl_->values.contains(key)) {
    throw std::runtime_error("override references unknown config key '" + key + "'");
  }
  json value = parse_typed(key, text, impl_->values[key]);
  check_type(key, impl_->values[key], value);
  impl_->values[key] = value;
}

void RunConfig::apply_overrides(const std::vector<std::string>& assignments) {
  for (const auto& a : assignments) apply_override(a);
}

double RunConfig::get_double(const std::string& key) const {
  if (!impl_->values.contains(key)) throw std::runtime_error("unknown config key '" + key + "'");
  return impl_->values[key].get<double>();
}

int RunConfig::get_int(const std::string& key) const {
  if (!impl_->values.contains(key)) throw std::runtime_error("unknown config key '" + key + "'");
  return impl_->values[key].get<int>();
}

bool RunConfig::get_bool(const std::string& key) const {
  if (!impl_->values.contains(key)) throw std::runtime_error("unknown config key '" + key + "'");
  return impl_->values[key].get<bool>();
}

std::string RunConfig::get_string(const std::string& key) const {
  if (!impl_->values.contains(key)) throw std::runtime_error("unknown config key '" + key + "'");
  return impl_->values[key].get<std::string>();
}

std::string RunConfig::effective_json() const { return impl_->values.dump(2) + "\n"; }

WorldConfig world_config_from(const RunConfig& rc) {
  WorldConfig c;
  c.width = rc.get_double("simulator.width");
  c.height = rc.get_double("simulator.height");
  c.min_objects = rc.get_int("simulator.min_objects");
  c.max_objects = rc.get_int("simulator.max_objects");
  c.spawn_rate = rc.get_double("simulator.spawn_rate");
  c.despawn_rate = rc.get_double("simulator.despawn_rate");
  c.mean_lifetime = rc.get_double("simulator.mean_lifetime");
  c.min_speed = rc.get_double("simulator.min_speed");
  c.max_speed = rc.get_double("simulator.max_speed");
  c.velocity_noise_std = rc.get_double("simulator.velocity_noise_std");
  c.min_box_size = rc.get_double("simulator.min_box_size");
  c.max_box_size = rc.get_double("simulator.max_box_size");
  c.appearance_dim = rc.get_int("simulator.appearance_dim");
  c.signature_scale = rc.get_double("simulator.signature_scale");
  c.appearance_noise_std = rc.get_double("simulator.appearance_noise_std");
  c.miss_rate = rc.get_double("simulator.miss_rate");
  c.false_positive_rate = rc.get_double("simulator.false_positive_rate");
  c.box_jitter_std = rc.get_double("simulator.box_jitter_std");
  c.occlusion_rate = rc.get_double("simulator.occlusion_rate");
  c.occlusion_min = rc.get_int("simulator.occlusion_min");
  c.occlusion_max = rc.get_int("simulator.occlusion_max");
  c.seed = static_cast<unsigned long>(rc.get_int("seed"));
  return c;
}

ModelConfig model_config_from(const RunConfig& rc) {
  ModelConfig c;
  c.appearance_dim = rc.get_int("model.appearance_dim");
  c.encoder_hidden = rc.get_int("model.encoder_hidden");
  c.feature_dim = rc.get_int("model.feature_dim");
  c.lstm_hidden = rc.get_int("model.lstm_hidden");
  c.spatial_scale = rc.get_double("model.spatial_scale");
  return c;
}

TrainConfig train_config_from(const RunConfig& rc) {
  TrainConfig c;
  const std::string scheme = rc.get_string("train.scheme");
  if (scheme == "visual_spatial") {
    c.scheme = Scheme::kVisualSpatial;
  } else if (scheme == "occlusion") {
    c.scheme = Scheme::kOcclusion;
  } else {
    throw std::runtime_error("train.scheme must be 'visual_spatial' or 'occlusion', got '" +
                             scheme + "'");
  }
  const std::string norm = rc.get_string("train.norm");
  if (norm == "min_row_col") {
    c.norm = TransitionNorm::kMinRowCol;
  } else if (norm == "row_only") {
    c.norm = TransitionNorm::kRowOnly;
  } else {
    throw std::runtime_error("train.norm must be 'min_row_col' or 'row_only', got '" + norm +
                             "'");
  }
  c.n_min = rc.get_int("train.n_min");
  c.n_max = rc.get_int("train.n_max");
  c.learning_rate = rc.get_double("train.learning_rate");
  c.plateau_learning_rate = rc.get_double("train.plateau_learning_rate");
  c.eval_interval = rc.get_int("train.eval_interval");
  c.plateau_patience = rc.get_int("train.plateau_patience");
  c.max_steps = rc.get_int("train.max_steps");
  c.checkpoint_interval = rc.get_int("train.checkpoint_interval");
  c.use_artificial = rc.get_bool("train.use_artificial");
  c.use_mask = rc.get_bool("train.use_mask");
  c.artificial_min_distance = rc.get_int("train.artificial_min_distance");
  c.heldout_tuples = rc.get_int("train.heldout_tuples");
  c.occlusion_plan.min_windows = rc.get_int("train.occlusion_min_windows");
  c.occlusion_plan.max_windows = rc.get_int("train.occlusion_max_windows");
  c.occlusion_plan.min_window_len = rc.get_int("train.occlusion_min_window_len");
  c.occlusion_plan.max_window_len = rc.get_int("train.occlusion_max_window_len");
  c.seed = static_cast<unsigned long>(rc.get_int("seed"));
  return c;
}

InferenceConfig inference_config_from(const RunConfig& rc) {
  InferenceConfig c;
  const std::string mode = rc.get_string("infer.mode");
  if (mode == "fused") {
    c.mode = InferenceMode::kFused;
  } else if (mode == "plain") {
    c.mode = InferenceMode::kPlain;
  } else if (mode == "spatial_only") {
    c.mode = InferenceMode::kSpatialOnly;
  } else {
    throw std::runtime_error("infer.mode must be 'fused', 'plain', or 'spatial_only', got '" +
                             mode + "'");
  }
  c.accept_threshold = rc.get_double("infer.accept_threshold");
  c.visual_samples = rc.get_int("infer.visual_samples");
  c.t_miss = rc.get_int("infer.t_miss");
  c.state_window = rc.get_int("infer.state_window");
  c.seed = static_cast<unsigned long>(rc.get_int("seed"));
  return c;
}

int simulate_num_sequences(const RunConfig& rc) { return rc.get_int("simulator.num_sequences"); }
int simulate_num_frames(const RunConfig& rc) { return rc.get_int("simulator.num_frames"); }
double eval_iou_threshold(const RunConfig& rc) { return rc.get_double("eval.iou_threshold"); }
double baseline_iou_threshold(const RunConfig& rc) {
  return rc.get_double("eval.baseline_iou_threshold");
}

}  // namespace crosstrack
