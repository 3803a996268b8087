#pragma once

#include <string>
#include <vector>

#include "crosstrack/inference.hpp"
#include "crosstrack/model.hpp"
#include "crosstrack/simulator.hpp"
#include "crosstrack/trainer.hpp"

namespace crosstrack {

/// Flat namespaced key/value configuration (simulator.*, model.*,
/// train.*, infer.*, eval.*). Every key has a registered default; file
/// loads and --set overrides reject unknown keys and type mismatches.
class RunConfig {
 public:
  RunConfig();

  void load_file(const std::string& path);
  /// "key=value"; value parsed per the registered type.
  void apply_override(const std::string& assignment);
  /// Convenience for repeated --set flags, applied in order.
  void apply_overrides(const std::vector<std::string>& assignments);

  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::string get_string(const std::string& key) const;

  /// Full effective key -> value document, pretty-printed JSON.
  std::string effective_json() const;

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

WorldConfig world_config_from(const RunConfig& rc);
ModelConfig model_config_from(const RunConfig& rc);
TrainConfig train_config_from(const RunConfig& rc);
InferenceConfig inference_config_from(const RunConfig& rc);

/// simulator.num_sequences / simulator.num_frames for the simulate command.
int simulate_num_sequences(const RunConfig& rc);
int simulate_num_frames(const RunConfig& rc);
double eval_iou_threshold(const RunConfig& rc);
double baseline_iou_threshold(const RunConfig& rc);

}  // namespace crosstrack
