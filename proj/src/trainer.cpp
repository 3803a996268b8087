#include "crosstrack/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "crosstrack/simulator.hpp"
#include "crosstrack/transition.hpp"

namespace crosstrack {

void validate(const TrainConfig& c) {
  if (c.n_min < 1 || c.n_max < c.n_min) {
    throw std::invalid_argument("TrainConfig n range invalid: [" + std::to_string(c.n_min) + ", " +
                                std::to_string(c.n_max) + "]");
  }
  if (c.scheme == Scheme::kOcclusion && c.n_min < 2) {
    throw std::invalid_argument("TrainConfig: occlusion scheme needs n_min >= 2");
  }
  if (c.learning_rate <= 0.0 || c.plateau_learning_rate <= 0.0) {
    throw std::invalid_argument("TrainConfig learning rates must be > 0");
  }
  if (c.max_steps < 1) throw std::invalid_argument("TrainConfig.max_steps must be >= 1");
  if (c.eval_interval < 1) throw std::invalid_argument("TrainConfig.eval_interval must be >= 1");
  if (c.plateau_patience < 1) {
    throw std::invalid_argument("TrainConfig.plateau_patience must be >= 1");
  }
  if (c.artificial_min_distance < 0) {
    throw std::invalid_argument("TrainConfig.artificial_min_distance must be >= 0");
  }
}

AdamOptimizer::AdamOptimizer(double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::step(const std::vector<diff::Value*>& params) {
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
      v_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    }
  }
  if (m_.size() != params.size()) {
    throw std::invalid_argument("AdamOptimizer: parameter list size changed between steps");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Eigen::MatrixXd& g = params[i]->grad();
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i].array() + (1.0 - beta2_) * g.array().square();
    const Eigen::ArrayXXd m_hat = m_[i].array() / bc1;
    const Eigen::ArrayXXd v_hat = v_[i].array() / bc2;
    params[i]->mutable_data().array() -= lr_ * m_hat / (v_hat.sqrt() + eps_);
    params[i]->zero_grad();
  }
}

PlateauDetector::PlateauDetector(int patience, double min_delta)
    : patience_(patience), min_delta_(min_delta), best_(std::numeric_limits<double>::infinity()) {}

bool PlateauDetector::record(double value) {
  if (value < best_ - min_delta_) {
    best_ = value;
    stale_ = 0;
    return false;
  }
  ++stale_;
  return stale_ >= patience_;
}

namespace {

/// Sample a window whose first and final frames both hold detections;
/// an empty final frame carries no matching signal.
SequenceSample sample_nonempty_sequence(const std::vector<FrameDetections>& corpus, int n_min,
                                        int n_max, std::mt19937_64& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    SequenceSample s = sample_training_sequence(corpus, n_min, n_max, rng);
    if (!s.frames.back().detections.empty()) return s;
  }
  throw std::invalid_argument("training corpus has no window with non-empty first and last frame");
}

}  // namespace

TrainingTuple sample_training_tuple(const TrainingCorpus& corpus, const TrainConfig& config,
                                    std::mt19937_64& rng) {
  if (corpus.sequences.empty()) throw std::invalid_argument("training corpus is empty");
  std::uniform_int_distribution<std::size_t> pick_seq(0, corpus.sequences.size() - 1);
  const std::size_t seq = pick_seq(rng);

  TrainingTuple t;
  t.sample = sample_nonempty_sequence(corpus.sequences[seq], config.n_min, config.n_max, rng);
  t.plan = sample_hiding_plan(config.scheme, t.sample.n, config.occlusion_plan, rng);

  if (config.use_artificial) {
    // Donors come from another sequence when one exists; otherwise from
    // temporally distant frames of the same one.
    if (corpus.sequences.size() > 1) {
      std::uniform_int_distribution<std::size_t> pick_donor(0, corpus.sequences.size() - 2);
      std::size_t donor = pick_donor(rng);
      if (donor >= seq) ++donor;
      t.sample = add_artificial_detections(t.sample, corpus.sequences[donor], 0, rng).sample;
    } else {
      t.sample = add_artificial_detections(t.sample, corpus.sequences[seq],
                                           config.artificial_min_distance, rng)
                     .sample;
    }
  }
  t.mask = config.use_mask ? floodfill_mask(t.sample) : ones_mask(t.sample);
  return t;
}

diff::Value tuple_loss(const ModelParams& params, const TrainingTuple& tuple,
                       TransitionNorm norm) {
  auto [a, b] = apply_hiding(tuple.sample, tuple.plan);
  diff::Value ma = track_variation(params, a, tuple.plan, norm);
  diff::Value mb = track_variation(params, b, tuple.plan, norm);
  return consistency_loss(ma, mb, tuple.mask);
}

double train_step(ModelParams& params, AdamOptimizer& opt, const TrainingCorpus& corpus,
                  const TrainConfig& config, std::mt19937_64& rng) {
  TrainingTuple tuple = sample_training_tuple(corpus, config, rng);
  diff::Value loss = tuple_loss(params, tuple, config.norm);
  loss.backward();
  opt.step(params.all());
  return loss.item();
}

TrainResult train(ModelParams& params, const TrainingCorpus& corpus, const TrainConfig& config,
                  std::ostream* log, const std::string& checkpoint_path) {
  validate(config);
  if (corpus.sequences.empty()) throw std::invalid_argument("training corpus is empty");

  // Reserve ~10% of sequences (at least one, never all) for held-out
  // loss probes driving plateau detection. With a single sequence the
  // probes come from the training sequence itself.
  TrainingCorpus train_part, heldout_part;
  if (corpus.sequences.size() >= 2) {
    const std::size_t heldout = std::max<std::size_t>(1, corpus.sequences.size() / 10);
    train_part.sequences.assign(corpus.sequences.begin(),
                                corpus.sequences.end() - static_cast<long>(heldout));
    heldout_part.sequences.assign(corpus.sequences.end() - static_cast<long>(heldout),
                                  corpus.sequences.end());
  } else {
    train_part = corpus;
    heldout_part = corpus;
  }

  std::mt19937_64 heldout_rng(config.seed + 0x9e3779b97f4a7c15ULL);
  std::vector<TrainingTuple> probes;
  probes.reserve(config.heldout_tuples);
  for (int i = 0; i < config.heldout_tuples; ++i) {
    probes.push_back(sample_training_tuple(heldout_part, config, heldout_rng));
  }
  auto heldout_loss = [&]() {
    double total = 0.0;
    for (const auto& p : probes) total += tuple_loss(params, p, config.norm).item();
    return total / probes.size();
  };

  std::mt19937_64 rng(config.seed);
  AdamOptimizer opt(config.learning_rate);
  PlateauDetector plateau(config.plateau_patience);
  TrainResult result;

  for (int step = 1; step <= config.max_steps; ++step) {
    const double loss = train_step(params, opt, train_part, config, rng);
    if (log) {
      (*log) << step << ',' << loss << ',' << opt.learning_rate() << '\n';
    }
    if (step % config.eval_interval == 0) {
      const double hl = heldout_loss();
      result.final_heldout_loss = hl;
      if (!result.plateau_decay_applied && plateau.record(hl)) {
        opt.set_learning_rate(config.plateau_learning_rate);
        result.plateau_decay_applied = true;
      }
    }
    if (!checkpoint_path.empty() && config.checkpoint_interval > 0 &&
        step % config.checkpoint_interval == 0) {
      save_checkpoint(params, checkpoint_path);
    }
    result.steps = step;
  }
  if (!checkpoint_path.empty()) save_checkpoint(params, checkpoint_path);
  return result;
}

EvalReport evaluate_checkpoint(const ModelParams& params,
                               const std::vector<std::vector<FrameDetections>>& heldout,
                               const std::vector<GroundTruth>& ground_truths,
                               const InferenceConfig& infer_config) {
  if (heldout.size() != ground_truths.size()) {
    throw std::invalid_argument("evaluate_checkpoint: " + std::to_string(heldout.size()) +
                                " sequences vs " + std::to_string(ground_truths.size()) +
                                " ground truths");
  }
  std::vector<EvalReport> reports;
  reports.reserve(heldout.size());
  for (std::size_t i = 0; i < heldout.size(); ++i) {
    std::vector<Track> tracks = track_sequence(params, heldout[i], infer_config);
    reports.push_back(evaluate(tracks, ground_truths[i]));
  }
  return aggregate(reports);
}

}  // namespace crosstrack
