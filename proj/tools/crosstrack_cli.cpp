#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "crosstrack/inference.hpp"
#include "crosstrack/metrics.hpp"
#include "crosstrack/model.hpp"
#include "crosstrack/plot.hpp"
#include "crosstrack/run_config.hpp"
#include "crosstrack/simulator.hpp"
#include "crosstrack/trainer.hpp"

namespace fs = std::filesystem;
using namespace crosstrack;

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  int seed = -1;  // -1: keep config value
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON config file (flat namespaced keys)");
  cmd->add_option("--set", opts.overrides, "Override as key=value (repeatable)");
  cmd->add_option("--seed", opts.seed, "Override the top-level seed");
}

RunConfig build_config(const CommonOpts& opts) {
  RunConfig rc;
  if (!opts.config_path.empty()) rc.load_file(opts.config_path);
  rc.apply_overrides(opts.overrides);
  if (opts.seed >= 0) rc.apply_override("seed=" + std::to_string(opts.seed));
  return rc;
}

void echo_config(const RunConfig& rc, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream out(dir / "effective_config.json");
  out << rc.effective_json();
}

std::vector<FrameDetections> load_detections(const fs::path& det_file, int appearance_dim) {
  std::ifstream in(det_file);
  if (!in) throw std::runtime_error("cannot open detection file " + det_file.string());
  auto frames = read_mot_detections(in, appearance_dim);
  const fs::path app_file = det_file.parent_path() / "app.txt";
  if (fs::exists(app_file)) {
    std::ifstream app(app_file);
    read_appearances(app, frames);
  }
  return frames;
}

std::vector<fs::path> sequence_dirs(const fs::path& corpus_dir) {
  if (!fs::is_directory(corpus_dir)) {
    throw std::runtime_error("corpus directory " + corpus_dir.string() + " does not exist");
  }
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(corpus_dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "det.txt")) {
      dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) {
    throw std::runtime_error("corpus directory " + corpus_dir.string() +
                             " holds no sequence directories with det.txt");
  }
  return dirs;
}

int cmd_simulate(const CommonOpts& opts, const std::string& out_dir) {
  RunConfig rc = build_config(opts);
  WorldConfig base = world_config_from(rc);
  const int num_sequences = simulate_num_sequences(rc);
  const int num_frames = simulate_num_frames(rc);
  echo_config(rc, out_dir);
  for (int s = 0; s < num_sequences; ++s) {
    WorldConfig wc = base;
    wc.seed = base.seed + static_cast<unsigned long>(s) * 7919;
    auto [frames, gt] = generate(wc, num_frames);
    char name[32];
    std::snprintf(name, sizeof(name), "seq_%03d", s);
    const fs::path dir = fs::path(out_dir) / name;
    fs::create_directories(dir);
    std::ofstream det(dir / "det.txt");
    write_mot_detections(frames, det);
    std::ofstream app(dir / "app.txt");
    write_appearances(frames, app);
    std::ofstream gts(dir / "gt.txt");
    write_mot_ground_truth(gt, gts);
  }
  std::cout << "wrote " << num_sequences << " sequences x " << num_frames << " frames to "
            << out_dir << "\n";
  return 0;
}

int cmd_train(const CommonOpts& opts, const std::string& corpus_dir,
              const std::string& checkpoint_out, const std::string& log_path) {
  RunConfig rc = build_config(opts);
  TrainConfig tc = train_config_from(rc);
  ModelConfig mc = model_config_from(rc);

  TrainingCorpus corpus;
  for (const auto& dir : sequence_dirs(corpus_dir)) {
    corpus.sequences.push_back(load_detections(dir / "det.txt", mc.appearance_dim));
  }

  ModelParams params = init_params(mc, tc.seed);
  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path);
    if (!log) throw std::runtime_error("cannot write training log " + log_path);
    log << "step,loss,lr\n";
  }
  const fs::path ckpt_dir = fs::path(checkpoint_out).parent_path();
  if (!ckpt_dir.empty()) fs::create_directories(ckpt_dir);
  echo_config(rc, ckpt_dir.empty() ? fs::path(".") : ckpt_dir);

  const auto t0 = std::chrono::steady_clock::now();
  TrainResult result = train(params, corpus, tc, log.is_open() ? &log : nullptr, checkpoint_out);
  const auto dt =
      std::chrono::duration_cast<std::chrono::seconds>(std::chrono::steady_clock::now() - t0);
  std::cout << "trained " << result.steps << " steps in " << dt.count()
            << "s, held-out loss " << result.final_heldout_loss << ", checkpoint "
            << checkpoint_out << "\n";
  return 0;
}

int cmd_track(const CommonOpts& opts, const std::string& checkpoint, const std::string& det_file,
              const std::string& result_out, const std::string& baseline) {
  RunConfig rc = build_config(opts);
  std::vector<Track> tracks;
  if (!baseline.empty()) {
    if (baseline != "iou") {
      throw std::runtime_error("unknown baseline '" + baseline + "' (supported: iou)");
    }
    auto frames = load_detections(det_file, model_config_from(rc).appearance_dim);
    tracks = iou_baseline(frames, baseline_iou_threshold(rc));
  } else {
    if (checkpoint.empty()) {
      throw std::runtime_error("track needs --checkpoint (or --baseline iou)");
    }
    ModelParams params = load_checkpoint(checkpoint);
    auto frames = load_detections(det_file, params.config.appearance_dim);
    tracks = track_sequence(params, frames, inference_config_from(rc));
  }
  const fs::path out_path(result_out);
  if (!out_path.parent_path().empty()) fs::create_directories(out_path.parent_path());
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write result file " + result_out);
  write_mot_tracks(tracks, out);
  std::cout << "wrote " << tracks.size() << " tracks to " << result_out << "\n";
  return 0;
}

int cmd_evaluate(const CommonOpts& opts, const std::string& result_file,
                 const std::string& gt_file, const std::string& report_out) {
  RunConfig rc = build_config(opts);
  std::ifstream res(result_file);
  if (!res) throw std::runtime_error("cannot open result file " + result_file);
  std::vector<Track> tracks = read_mot_tracks(res);
  std::ifstream gts(gt_file);
  if (!gts) throw std::runtime_error("cannot open ground-truth file " + gt_file);
  GroundTruth gt = read_mot_ground_truth(gts);

  EvalReport report = evaluate(tracks, gt, eval_iou_threshold(rc));
  std::cout << format_report(report) << "\n";
  if (!report_out.empty()) {
    std::ofstream out(report_out);
    if (!out) throw std::runtime_error("cannot write report file " + report_out);
    out << report_csv_header() << "\n" << report_csv_row(result_file, report) << "\n";
  }
  return 0;
}

int cmd_plot(const std::string& result_file, const std::string& gt_file,
             const std::string& svg_out) {
  std::ifstream res(result_file);
  if (!res) throw std::runtime_error("cannot open result file " + result_file);
  std::vector<Track> tracks = read_mot_tracks(res);
  GroundTruth gt;
  if (!gt_file.empty()) {
    std::ifstream gts(gt_file);
    if (!gts) throw std::runtime_error("cannot open ground-truth file " + gt_file);
    gt = read_mot_ground_truth(gts);
  }
  std::ofstream out(svg_out);
  if (!out) throw std::runtime_error("cannot write SVG file " + svg_out);
  plot_tracks_svg(tracks, gt, out);
  std::cout << "wrote " << svg_out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised multi-object tracker: simulate, train, track, evaluate, plot"};
  app.require_subcommand(1);

  CommonOpts sim_opts;
  std::string sim_out;
  auto* sim = app.add_subcommand("simulate", "Generate synthetic detection sequences");
  add_common(sim, sim_opts);
  sim->add_option("out_dir", sim_out, "Output corpus directory")->required();

  CommonOpts train_opts;
  std::string train_corpus, train_ckpt, train_log;
  auto* tr = app.add_subcommand("train", "Train on a detection corpus");
  add_common(tr, train_opts);
  tr->add_option("corpus_dir", train_corpus, "Corpus directory from simulate")->required();
  tr->add_option("checkpoint_out", train_ckpt, "Checkpoint output path")->required();
  tr->add_option("--log", train_log, "Training log CSV path");

  CommonOpts track_opts;
  std::string track_ckpt, track_dets, track_out, track_baseline;
  auto* trk = app.add_subcommand("track", "Run the tracker on a detection file");
  add_common(trk, track_opts);
  trk->add_option("det_file", track_dets, "MOT detection file (app.txt sidecar auto-loaded)")
      ->required();
  trk->add_option("result_out", track_out, "MOT result output path")->required();
  trk->add_option("--checkpoint", track_ckpt, "Trained checkpoint path");
  trk->add_option("--baseline", track_baseline, "Use a heuristic baseline instead (iou)");

  CommonOpts eval_opts;
  std::string eval_result, eval_gt, eval_report;
  auto* ev = app.add_subcommand("evaluate", "Score a result file against ground truth");
  add_common(ev, eval_opts);
  ev->add_option("result_file", eval_result, "MOT result file")->required();
  ev->add_option("gt_file", eval_gt, "MOT ground-truth file")->required();
  ev->add_option("--out", eval_report, "Report CSV output path");

  std::string plot_result, plot_gt, plot_svg;
  auto* pl = app.add_subcommand("plot", "Render trajectories to SVG");
  pl->add_option("result_file", plot_result, "MOT result file")->required();
  pl->add_option("svg_out", plot_svg, "SVG output path")->required();
  pl->add_option("--gt", plot_gt, "Ground-truth file (drawn dashed)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(sim_opts, sim_out);
    if (tr->parsed()) return cmd_train(train_opts, train_corpus, train_ckpt, train_log);
    if (trk->parsed()) {
      return cmd_track(track_opts, track_ckpt, track_dets, track_out, track_baseline);
    }
    if (ev->parsed()) return cmd_evaluate(eval_opts, eval_result, eval_gt, eval_report);
    if (pl->parsed()) return cmd_plot(plot_result, plot_gt, plot_svg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
