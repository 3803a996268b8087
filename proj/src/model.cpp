#include "crosstrack/model.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace crosstrack {

namespace {

using diff::Value;
using json = nlohmann::json;

Value uniform_init(int rows, int cols, std::mt19937_64& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(cols));
  std::uniform_real_distribution<double> dist(-s, s);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = dist(rng);
  }
  return Value(std::move(m));
}

/// Matcher layer widths including input and output.
std::vector<int> matcher_widths(const ModelConfig& c) {
  std::vector<int> w;
  w.push_back(2 * detection_feature_dim(c));
  for (int h : c.matcher_hidden) w.push_back(h);
  w.push_back(1);
  return w;
}

Value matcher_forward(const ModelParams& p, const Value& x) {
  Value h = x;
  for (std::size_t l = 0; l < p.match_w.size(); ++l) {
    h = diff::add_col_broadcast(diff::matmul(p.match_w[l], h), p.match_b[l]);
    if (l + 1 < p.match_w.size()) h = diff::relu(h);
  }
  return h;
}

}  // namespace

std::vector<diff::Value*> ModelParams::all() {
  std::vector<Value*> out;
  for (auto& v : enc_w) out.push_back(&v);
  for (auto& v : enc_b) out.push_back(&v);
  for (int g = 0; g < 4; ++g) {
    out.push_back(&lstm_w[g]);
    out.push_back(&lstm_u[g]);
    out.push_back(&lstm_b[g]);
  }
  for (auto& v : match_w) out.push_back(&v);
  for (auto& v : match_b) out.push_back(&v);
  out.push_back(&exit_bias);
  return out;
}

std::vector<const diff::Value*> ModelParams::all() const {
  auto mutable_list = const_cast<ModelParams*>(this)->all();
  return {mutable_list.begin(), mutable_list.end()};
}

ModelParams init_params(const ModelConfig& config, unsigned long seed) {
  if (config.appearance_dim < 1 || config.feature_dim < 1 || config.lstm_hidden < 1 ||
      config.encoder_hidden < 1) {
    throw std::invalid_argument("init_params: model dimensions must be >= 1");
  }
  if (config.matcher_hidden.empty()) {
    throw std::invalid_argument("init_params: matcher needs at least one hidden layer");
  }
  std::mt19937_64 rng(seed);
  ModelParams p;
  p.config = config;

  p.enc_w.push_back(uniform_init(config.encoder_hidden, config.appearance_dim, rng));
  p.enc_b.push_back(Value::zeros(config.encoder_hidden, 1));
  p.enc_w.push_back(uniform_init(config.feature_dim, config.encoder_hidden, rng));
  p.enc_b.push_back(Value::zeros(config.feature_dim, 1));

  const int in = detection_feature_dim(config);
  for (int g = 0; g < 4; ++g) {
    p.lstm_w.push_back(uniform_init(config.lstm_hidden, in, rng));
    p.lstm_u.push_back(uniform_init(config.lstm_hidden, config.lstm_hidden, rng));
    p.lstm_b.push_back(Value::zeros(config.lstm_hidden, 1));
  }

  const auto widths = matcher_widths(config);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    p.match_w.push_back(uniform_init(widths[l + 1], widths[l], rng));
    p.match_b.push_back(Value::zeros(widths[l + 1], 1));
  }
  p.exit_bias = Value::zeros(1, 1);
  return p;
}

long parameter_count(const ModelParams& params) {
  long n = 0;
  for (const auto* v : params.all()) n += v->rows() * static_cast<long>(v->cols());
  return n;
}

Eigen::VectorXd flatten(const ModelParams& params) {
  Eigen::VectorXd flat(parameter_count(params));
  long at = 0;
  for (const auto* v : params.all()) {
    const auto& m = v->data();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) flat[at++] = m(i, j);
    }
  }
  return flat;
}

void unflatten(ModelParams& params, const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count(params)) {
    throw std::invalid_argument("unflatten: expected " + std::to_string(parameter_count(params)) +
                                " values, got " + std::to_string(flat.size()));
  }
  long at = 0;
  for (auto* v : params.all()) {
    auto& m = v->mutable_data();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = flat[at++];
    }
  }
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
  json j;
  j["format"] = "crosstrack-checkpoint";
  j["version"] = 1;
  j["config"] = {{"appearance_dim", params.config.appearance_dim},
                 {"encoder_hidden", params.config.encoder_hidden},
                 {"feature_dim", params.config.feature_dim},
                 {"lstm_hidden", params.config.lstm_hidden},
                 {"matcher_hidden", params.config.matcher_hidden},
                 {"spatial_scale", params.config.spatial_scale}};
  json shapes = json::array();
  for (const auto* v : params.all()) shapes.push_back({v->rows(), v->cols()});
  j["shapes"] = std::move(shapes);
  const Eigen::VectorXd flat = flatten(params);
  std::vector<double> values(flat.data(), flat.data() + flat.size());
  j["values"] = std::move(values);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint file " + path);
  out << j.dump() << '\n';
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("checkpoint " + path + " is not valid JSON: " + e.what());
  }
  if (j.value("format", "") != "crosstrack-checkpoint") {
    throw std::runtime_error("checkpoint " + path + " has unknown format tag");
  }
  ModelConfig c;
  const json& jc = j.at("config");
  c.appearance_dim = jc.at("appearance_dim").get<int>();
  c.encoder_hidden = jc.at("encoder_hidden").get<int>();
  c.feature_dim = jc.at("feature_dim").get<int>();
  c.lstm_hidden = jc.at("lstm_hidden").get<int>();
  c.matcher_hidden = jc.at("matcher_hidden").get<std::vector<int>>();
  c.spatial_scale = jc.at("spatial_scale").get<double>();

  ModelParams p = init_params(c, 0);
  const auto ptrs = p.all();
  const json& shapes = j.at("shapes");
  if (shapes.size() != ptrs.size()) {
    throw std::runtime_error("checkpoint " + path + ": shape manifest has " +
                             std::to_string(shapes.size()) + " entries, expected " +
                             std::to_string(ptrs.size()));
  }
  for (std::size_t i = 0; i < ptrs.size(); ++i) {
    const int r = shapes[i][0].get<int>(), cc = shapes[i][1].get<int>();
    if (r != ptrs[i]->rows() || cc != ptrs[i]->cols()) {
      throw std::runtime_error("checkpoint " + path + ": parameter " + std::to_string(i) +
                               " has shape " + std::to_string(r) + "x" + std::to_string(cc) +
                               ", config implies " + std::to_string(ptrs[i]->rows()) + "x" +
                               std::to_string(ptrs[i]->cols()));
    }
  }
  const auto values = j.at("values").get<std::vector<double>>();
  unflatten(p, Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                 static_cast<Eigen::Index>(values.size())));
  return p;
}

diff::Value encode_detections(const ModelParams& params, const std::vector<Detection>& dets,
                              Hide hide) {
  const ModelConfig& c = params.config;
  const int d = static_cast<int>(dets.size());
  Eigen::MatrixXd app = Eigen::MatrixXd::Zero(c.appearance_dim, d);
  Eigen::MatrixXd spatial = Eigen::MatrixXd::Zero(4, d);
  for (int j = 0; j < d; ++j) {
    if (dets[j].appearance.size() != c.appearance_dim) {
      throw std::invalid_argument("encode_detections: appearance dimension " +
                                  std::to_string(dets[j].appearance.size()) +
                                  " does not match model appearance_dim " +
                                  std::to_string(c.appearance_dim));
    }
    if (hide != Hide::kAppearance) app.col(j) = dets[j].appearance;
    if (hide != Hide::kSpatial) {
      spatial(0, j) = dets[j].box.x / c.spatial_scale;
      spatial(1, j) = dets[j].box.y / c.spatial_scale;
      spatial(2, j) = dets[j].box.w / c.spatial_scale;
      spatial(3, j) = dets[j].box.h / c.spatial_scale;
    }
  }
  Value h = Value(std::move(app));
  for (std::size_t l = 0; l < params.enc_w.size(); ++l) {
    h = diff::add_col_broadcast(diff::matmul(params.enc_w[l], h), params.enc_b[l]);
    if (l + 1 < params.enc_w.size()) h = diff::relu(h);
  }
  return diff::concat_rows({h, Value(std::move(spatial))});
}

diff::Value encode_detection(const ModelParams& params, const Detection& det, Hide hide) {
  return encode_detections(params, {det}, hide);
}

TrackState lstm_init(const ModelParams& params) {
  TrackState s;
  s.h = Value::zeros(params.config.lstm_hidden, 1);
  s.c = Value::zeros(params.config.lstm_hidden, 1);
  return s;
}

TrackState lstm_step(const ModelParams& params, const TrackState& state, const diff::Value& x) {
  auto gate = [&](int g) {
    return diff::add(diff::add(diff::matmul(params.lstm_w[g], x),
                               diff::matmul(params.lstm_u[g], state.h)),
                     params.lstm_b[g]);
  };
  Value i = diff::sigmoid(gate(0));
  Value f = diff::sigmoid(gate(1));
  Value g = diff::tanh(gate(2));
  Value o = diff::sigmoid(gate(3));
  TrackState next;
  next.c = diff::add(diff::mul(f, state.c), diff::mul(i, g));
  next.h = diff::mul(o, diff::tanh(next.c));
  next.length = state.length + 1;
  return next;
}

diff::Value encode_track(const ModelParams& params, const std::vector<diff::Value>& features) {
  if (features.empty()) throw std::invalid_argument("encode_track: empty feature sequence");
  TrackState s = lstm_init(params);
  for (const auto& x : features) s = lstm_step(params, s, x);
  return s.h;
}

diff::Value pad_track_features(const ModelParams& params, const diff::Value& h) {
  (void)params;
  return diff::concat_rows({h, Value::zeros(4, h.cols())});
}

diff::Value score_pairs(const ModelParams& params, const diff::Value& left,
                        const diff::Value& right) {
  const int t = left.cols();
  const int d = right.cols();
  if (t == 0 || d == 0) return Value::zeros(t, d);
  Value pairs = diff::pair_columns(left, right);  // (2F) x (T*D)
  Value scores = matcher_forward(params, pairs);  // 1 x (T*D)
  return diff::reshape_rows(scores, t, d);
}

double match_score(const ModelParams& params, const diff::Value& track_feature,
                   const diff::Value& det_feature) {
  Value padded = track_feature.rows() == detection_feature_dim(params.config)
                     ? track_feature
                     : pad_track_features(params, track_feature);
  return score_pairs(params, padded, det_feature).item();
}

diff::Value append_exit_column(const ModelParams& params, const diff::Value& scores) {
  return diff::concat_cols(
      {scores, diff::broadcast_scalar(params.exit_bias, scores.rows(), 1)});
}

diff::Value score_matrix(const ModelParams& params, const diff::Value& track_features,
                         const std::vector<Detection>& dets, Hide hide) {
  const int t = track_features.cols();
  if (dets.empty()) {
    return diff::broadcast_scalar(params.exit_bias, t, 1);
  }
  Value left = pad_track_features(params, track_features);
  Value right = encode_detections(params, dets, hide);
  return append_exit_column(params, score_pairs(params, left, right));
}

}  // namespace crosstrack
