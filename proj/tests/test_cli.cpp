#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Subcommand options must follow the subcommand name and its positionals.
CliResult run_cli(const std::string& args) {
  const fs::path out_file = fs::path("cli_scratch") / "stdout.txt";
  const fs::path err_file = fs::path("cli_scratch") / "stderr.txt";
  fs::create_directories("cli_scratch");
  const std::string command = std::string("\"") + CROSSTRACK_CLI_PATH + "\" " + args + " > " +
                              out_file.string() + " 2> " + err_file.string();
  const int status = std::system(command.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

// Small, fast corpus and model shared by the pipeline tests.
const std::string kSmallWorld =
    " --set simulator.num_sequences=3 --set simulator.num_frames=60"
    " --set simulator.appearance_dim=4 --set simulator.min_objects=2"
    " --set simulator.max_objects=4 --set simulator.mean_lifetime=200";
const std::string kSmallModel =
    " --set model.appearance_dim=4 --set model.encoder_hidden=8"
    " --set model.feature_dim=8 --set model.lstm_hidden=8";

}  // namespace

TEST_CASE("simulate writes a deterministic corpus per seed") {
  fs::remove_all("cli_scratch");
  const std::string opts = kSmallWorld + " --set simulator.num_sequences=2"
                           " --set simulator.num_frames=25";

  CHECK(run_cli("simulate cli_scratch/sim_a --seed 7" + opts).exit_code == 0);
  CliResult again = run_cli("simulate cli_scratch/sim_b --seed 7" + opts);
  CHECK(again.exit_code == 0);
  CHECK(contains(again.out, "wrote 2 sequences x 25 frames"));
  CliResult other = run_cli("simulate cli_scratch/sim_c --seed 8" + opts);
  CHECK(other.exit_code == 0);

  for (const std::string seq : {"seq_000", "seq_001"}) {
    for (const std::string file : {"det.txt", "app.txt", "gt.txt"}) {
      const std::string a = slurp(fs::path("cli_scratch/sim_a") / seq / file);
      REQUIRE_FALSE(a.empty());
      CHECK(a == slurp(fs::path("cli_scratch/sim_b") / seq / file));
    }
  }
  CHECK(slurp("cli_scratch/sim_a/seq_000/det.txt") !=
        slurp(fs::path("cli_scratch/sim_c") / "seq_000" / "det.txt"));

  const std::string echoed = slurp("cli_scratch/sim_a/effective_config.json");
  CHECK(contains(echoed, "\"seed\": 7"));
  CHECK(contains(echoed, "\"simulator.num_frames\": 25"));
}

TEST_CASE("simulate, train, track, evaluate, and plot chain end to end") {
  fs::remove_all("cli_scratch");
  REQUIRE(run_cli("simulate cli_scratch/corpus --seed 3" + kSmallWorld).exit_code == 0);

  const std::string train_opts =
      kSmallModel +
      " --set train.max_steps=30 --set train.eval_interval=10"
      " --set train.heldout_tuples=2 --set train.n_min=3 --set train.n_max=5"
      " --set train.learning_rate=0.001 --set train.artificial_min_distance=20";
  CliResult trained = run_cli("train cli_scratch/corpus cli_scratch/model.json"
                              " --log cli_scratch/log.csv --seed 3" + train_opts);
  CHECK(trained.exit_code == 0);
  CHECK(contains(trained.out, "trained 30 steps"));
  REQUIRE(fs::exists("cli_scratch/model.json"));

  std::ifstream log("cli_scratch/log.csv");
  std::string line;
  REQUIRE(std::getline(log, line));
  CHECK(line == "step,loss,lr");
  int data_lines = 0;
  while (std::getline(log, line)) ++data_lines;
  CHECK(data_lines == 30);

  CliResult tracked = run_cli("track cli_scratch/corpus/seq_000/det.txt cli_scratch/result.txt"
                              " --checkpoint cli_scratch/model.json --seed 3" + kSmallModel);
  CHECK(tracked.exit_code == 0);
  CHECK(contains(tracked.out, "tracks to cli_scratch/result.txt"));
  REQUIRE_FALSE(slurp("cli_scratch/result.txt").empty());

  CliResult evaluated =
      run_cli("evaluate cli_scratch/result.txt cli_scratch/corpus/seq_000/gt.txt"
              " --out cli_scratch/report.csv");
  CHECK(evaluated.exit_code == 0);
  CHECK(contains(evaluated.out, "MOTA"));
  CHECK(contains(evaluated.out, "IDF1"));
  const std::string report = slurp("cli_scratch/report.csv");
  CHECK(contains(report, "label,"));
  CHECK(contains(report, "cli_scratch/result.txt,"));

  CliResult baseline =
      run_cli("track cli_scratch/corpus/seq_000/det.txt cli_scratch/baseline.txt"
              " --baseline iou --set model.appearance_dim=4");
  CHECK(baseline.exit_code == 0);
  REQUIRE_FALSE(slurp("cli_scratch/baseline.txt").empty());

  CliResult plotted =
      run_cli("plot cli_scratch/result.txt cli_scratch/tracks.svg"
              " --gt cli_scratch/corpus/seq_000/gt.txt");
  CHECK(plotted.exit_code == 0);
  const std::string svg = slurp("cli_scratch/tracks.svg");
  CHECK(contains(svg, "<svg"));
  CHECK(contains(svg, "</svg>"));
}

TEST_CASE("failures exit with code 1 and a distinct error line") {
  fs::remove_all("cli_scratch");

  CliResult no_source = run_cli("track missing_dets.txt cli_scratch/out.txt");
  CHECK(no_source.exit_code == 1);
  CHECK(contains(no_source.err, "error: track needs --checkpoint (or --baseline iou)"));

  CliResult bad_baseline =
      run_cli("track missing_dets.txt cli_scratch/out.txt --baseline fancy");
  CHECK(bad_baseline.exit_code == 1);
  CHECK(contains(bad_baseline.err, "error: unknown baseline 'fancy' (supported: iou)"));

  CliResult no_corpus = run_cli("train cli_scratch/nowhere cli_scratch/model.json");
  CHECK(no_corpus.exit_code == 1);
  CHECK(contains(no_corpus.err, "error: corpus directory"));
  CHECK(contains(no_corpus.err, "does not exist"));

  CliResult no_result = run_cli("evaluate cli_scratch/nothing.txt cli_scratch/gt.txt");
  CHECK(no_result.exit_code == 1);
  CHECK(contains(no_result.err, "error: cannot open result file"));

  CliResult bad_key = run_cli("simulate cli_scratch/sim --set bogus.key=1");
  CHECK(bad_key.exit_code == 1);
  CHECK(contains(bad_key.err, "error: override references unknown config key 'bogus.key'"));

  fs::create_directories("cli_scratch");
  std::ofstream("cli_scratch/broken.json") << "{ not json";
  CliResult bad_config = run_cli("simulate cli_scratch/sim --config cli_scratch/broken.json");
  CHECK(bad_config.exit_code == 1);
  CHECK(contains(bad_config.err, "error: config file"));
  CHECK(contains(bad_config.err, "is not valid JSON"));

  CliResult no_subcommand = run_cli("");
  CHECK(no_subcommand.exit_code != 0);

  fs::remove_all("cli_scratch");
}
