#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "ideotrace/evaluation.hpp"
#include "ideotrace/interaction_data.hpp"
#include "ideotrace/model.hpp"
#include "ideotrace/optimizer.hpp"

using namespace ideotrace;
namespace fs = std::filesystem;

namespace {

struct Workspace {
  fs::path root;
  Workspace() {
    root = fs::temp_directory_path() /
           ("ideotrace_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(root);
  }
  ~Workspace() { fs::remove_all(root); }
  fs::path dir(const std::string& name) const {
    fs::path p = root / name;
    fs::create_directories(p);
    return p;
  }
};

int run_cli(const std::string& args, const fs::path& stderr_file = {}) {
  std::string cmd = std::string(IDEOTRACE_CLI_PATH) + " " + args;
  if (!stderr_file.empty()) {
    cmd += " 2>" + stderr_file.string();
  } else {
    cmd += " 2>/dev/null";
  }
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string synth_flags(const fs::path& out, unsigned seed) {
  return "--seed " + std::to_string(seed) + " synth --m 12 --n 20 --t 2 " +
         "--separation 4 --min-shares 2 --intra-edge-prob 0.3 --inter-edge-prob 0.05 " +
         "--out-dir " + out.string();
}

std::string ingest_flags(const fs::path& fixtures, const fs::path& out) {
  const std::int64_t width = 14 * 24 * 3600;
  return "ingest --events " + (fixtures / "events.tsv").string() + " --edges " +
         (fixtures / "edges.tsv").string() + " --labels " +
         (fixtures / "labels.tsv").string() + " --start 0 --end " +
         std::to_string(3 * width) + " --bin-width " + std::to_string(width) +
         " --min-shares 2 --max-websites 12 --out-dir " + out.string();
}

}  // namespace

TEST_CASE("synth emits fixtures; repeat runs are byte-identical") {
  Workspace ws;
  auto out1 = ws.dir("synth1");
  auto out2 = ws.dir("synth2");
  REQUIRE(run_cli(synth_flags(out1, 42)) == 0);
  REQUIRE(run_cli(synth_flags(out2, 42)) == 0);
  for (const char* name :
       {"events.tsv", "edges.tsv", "labels.tsv", "truth_model.ckpt", "truth.tsv",
        "manifest.json"}) {
    CHECK(fs::exists(out1 / name));
    CHECK(slurp(out1 / name) == slurp(out2 / name));
  }

  auto out3 = ws.dir("synth3");
  REQUIRE(run_cli(synth_flags(out3, 43)) == 0);
  CHECK(slurp(out1 / "events.tsv") != slurp(out3 / "events.tsv"));
}

TEST_CASE("synth fixtures ingest losslessly") {
  Workspace ws;
  auto fixtures = ws.dir("fixtures");
  auto ingested = ws.dir("ingested");
  REQUIRE(run_cli(synth_flags(fixtures, 7)) == 0);
  REQUIRE(run_cli(ingest_flags(fixtures, ingested)) == 0);
  for (const char* name : {"observations.tsv", "graph.tsv", "labels.tsv", "manifest.json"}) {
    CHECK(fs::exists(ingested / name));
  }

  // Index maps must match the planted truth checkpoint dimensions and order.
  auto obs = TimeBinnedObservations::load(ingested / "observations.tsv");
  auto truth = ModelState::load(fixtures / "truth_model.ckpt");
  CHECK(obs.num_websites() == truth.num_websites());
  CHECK(obs.num_users() == truth.num_users());
  CHECK(obs.num_bins() == truth.num_bins());
}

TEST_CASE("missing input file exits 2 and names the path") {
  Workspace ws;
  auto out = ws.dir("out");
  auto err = ws.root / "stderr.txt";
  const int code = run_cli("ingest --events /nonexistent/events.tsv --edges x --labels y "
                           "--start 0 --end 2419200 --out-dir " + out.string(), err);
  CHECK(code == 2);
  CHECK(slurp(err).find("/nonexistent/events.tsv") != std::string::npos);
}

TEST_CASE("malformed event line is cited by number") {
  Workspace ws;
  auto out = ws.dir("out");
  std::ofstream events(ws.root / "events.tsv");
  for (int i = 0; i < 6; ++i) events << "u\ta.com\t" << i << "\n";
  events << "u\tbroken-line\n";  // line 7: two fields
  events.close();
  std::ofstream(ws.root / "edges.tsv") << "";
  std::ofstream(ws.root / "labels.tsv") << "";

  auto err = ws.root / "stderr.txt";
  const int code = run_cli("ingest --events " + (ws.root / "events.tsv").string() +
                           " --edges " + (ws.root / "edges.tsv").string() + " --labels " +
                           (ws.root / "labels.tsv").string() +
                           " --start 0 --end 2419200 --min-shares 1 --out-dir " +
                           out.string(), err);
  CHECK(code == 2);
  CHECK(slurp(err).find("line 7") != std::string::npos);
}

TEST_CASE("unknown flags are usage errors") {
  Workspace ws;
  CHECK(run_cli("train --obs x --graph y --no-such-flag") == 1);
  CHECK(run_cli("frobnicate") == 1);
}

TEST_CASE("train is reproducible and honors the epoch budget") {
  Workspace ws;
  auto fixtures = ws.dir("fixtures");
  auto ingested = ws.dir("ingested");
  REQUIRE(run_cli(synth_flags(fixtures, 11)) == 0);
  REQUIRE(run_cli(ingest_flags(fixtures, ingested)) == 0);

  const std::string train_flags =
      "--seed 3 train --obs " + (ingested / "observations.tsv").string() + " --graph " +
      (ingested / "graph.tsv").string() +
      " --beta 2 --gamma 0.01 --lambda 0.01 --tau 0.01 --learning-rate 0.05 "
      "--max-epochs 40 --out-dir ";

  auto run1 = ws.dir("run1");
  auto run2 = ws.dir("run2");
  REQUIRE(run_cli(train_flags + run1.string()) == 0);
  REQUIRE(run_cli(train_flags + run2.string()) == 0);
  CHECK(slurp(run1 / "model.ckpt") == slurp(run2 / "model.ckpt"));
  CHECK(slurp(run1 / "loss_trace.tsv") == slurp(run2 / "loss_trace.tsv"));
  CHECK(slurp(run1 / "manifest.json") == slurp(run2 / "manifest.json"));

  // Zero epochs: the checkpoint is exactly the seeded initialization.
  auto run0 = ws.dir("run0");
  REQUIRE(run_cli("--seed 3 train --obs " + (ingested / "observations.tsv").string() +
                  " --graph " + (ingested / "graph.tsv").string() +
                  " --max-epochs 0 --out-dir " + run0.string()) == 0);
  auto obs = TimeBinnedObservations::load(ingested / "observations.tsv");
  auto ckpt = ModelState::load(run0 / "model.ckpt");
  auto fresh = init_state(obs.num_websites(), obs.num_users(), 2, obs.num_steps(), 3);
  CHECK(ckpt.W == fresh.W);
  CHECK(ckpt.C[0] == fresh.C[0]);
}

TEST_CASE("config file supplies defaults and flags override") {
  Workspace ws;
  auto fixtures = ws.dir("fixtures");
  auto ingested = ws.dir("ingested");
  REQUIRE(run_cli(synth_flags(fixtures, 19)) == 0);
  REQUIRE(run_cli(ingest_flags(fixtures, ingested)) == 0);

  std::ofstream cfg(ws.root / "run.conf");
  cfg << "# training settings\nmax_epochs=0\nbeta=3\nseed=5\n";
  cfg.close();

  auto from_file = ws.dir("from_file");
  REQUIRE(run_cli("train --config " + (ws.root / "run.conf").string() + " --obs " +
                  (ingested / "observations.tsv").string() + " --graph " +
                  (ingested / "graph.tsv").string() + " --out-dir " +
                  from_file.string()) == 0);
  // max_epochs=0 from the file: trace has only the initial entry.
  std::string trace = slurp(from_file / "loss_trace.tsv");
  CHECK(std::count(trace.begin(), trace.end(), '\n') == 1);

  auto overridden = ws.dir("overridden");
  REQUIRE(run_cli("train --config " + (ws.root / "run.conf").string() +
                  " --max-epochs 3 --obs " + (ingested / "observations.tsv").string() +
                  " --graph " + (ingested / "graph.tsv").string() + " --out-dir " +
                  overridden.string()) == 0);
  trace = slurp(overridden / "loss_trace.tsv");
  CHECK(std::count(trace.begin(), trace.end(), '\n') == 4);

  std::ofstream bad(ws.root / "bad.conf");
  bad << "no_such_key=1\n";
  bad.close();
  CHECK(run_cli("train --config " + (ws.root / "bad.conf").string() + " --obs x --graph y") == 1);
}

namespace {

// Hand-built artifacts where recovery is exact: website scores strictly
// follow the ordinal labels and user scores follow their ground truth.
void write_monotone_fixture(const fs::path& dir) {
  const int m = 7, n = 3;
  TimeBinnedObservations obs;
  for (int i = 0; i < m; ++i) obs.website_index.push_back("site" + std::to_string(i) + ".com");
  obs.user_index = {"u0", "u1", "u2"};
  obs.bins.resize(1);
  obs.bins[0].coords = {{0, 0}, {3, 1}, {6, 2}};
  obs.save(dir / "observations.tsv");

  ModelState model;
  model.W.resize(m, 2);
  for (int i = 0; i < m; ++i) {
    model.W(i, 0) = i - 3.0;
    model.W(i, 1) = 0.0;
  }
  Eigen::MatrixXd c(n, 2);
  c << -3, 0, 0, 0, 3, 0;
  model.C = {c};
  model.mu = {Eigen::VectorXd::Zero(m)};
  model.nu = {Eigen::VectorXd::Zero(n)};
  model.save(dir / "model.ckpt");

  LabelSet labels;
  for (int i = 0; i < m; ++i) {
    labels.website_labels["site" + std::to_string(i) + ".com"] = i - 3;
  }
  labels.save(dir / "labels.tsv");
}

}  // namespace

TEST_CASE("evaluate reports perfect correlations on a monotone fixture") {
  Workspace ws;
  auto fixture = ws.dir("fixture");
  write_monotone_fixture(fixture);

  auto out = ws.dir("metrics");
  REQUIRE(run_cli("evaluate --model " + (fixture / "model.ckpt").string() + " --obs " +
                  (fixture / "observations.tsv").string() + " --labels " +
                  (fixture / "labels.tsv").string() + " --out-dir " + out.string()) == 0);
  std::string metrics = slurp(out / "metrics.tsv");
  CHECK(metrics.find("spearman_websites\tpooled\t1\n") != std::string::npos);
  CHECK(metrics.find("pearson_users\t0\t1\n") != std::string::npos);

  // Without labels the website row is absent, user rows remain.
  auto bare = ws.dir("bare");
  REQUIRE(run_cli("evaluate --model " + (fixture / "model.ckpt").string() + " --obs " +
                  (fixture / "observations.tsv").string() + " --out-dir " +
                  bare.string()) == 0);
  metrics = slurp(bare / "metrics.tsv");
  CHECK(metrics.find("spearman_websites") == std::string::npos);
  CHECK(metrics.find("pearson_users") != std::string::npos);

  // Too few labeled websites: the row is marked, exit stays 0.
  LabelSet sparse;
  sparse.website_labels = {{"site0.com", -2}, {"site6.com", 2}};
  sparse.save(ws.root / "sparse_labels.tsv");
  auto marked = ws.dir("marked");
  REQUIRE(run_cli("evaluate --model " + (fixture / "model.ckpt").string() + " --obs " +
                  (fixture / "observations.tsv").string() + " --labels " +
                  (ws.root / "sparse_labels.tsv").string() + " --out-dir " +
                  marked.string()) == 0);
  metrics = slurp(marked / "metrics.tsv");
  CHECK(metrics.find("spearman_websites\tpooled\tinsufficient labels") != std::string::npos);
}

TEST_CASE("trace on a single-bin checkpoint emits only the zero row") {
  Workspace ws;
  auto fixture = ws.dir("fixture");
  // Two separated user clusters, one bin.
  const int m = 4, n = 6;
  TimeBinnedObservations obs;
  for (int i = 0; i < m; ++i) obs.website_index.push_back("s" + std::to_string(i));
  for (int j = 0; j < n; ++j) obs.user_index.push_back("u" + std::to_string(j));
  obs.bins.resize(1);
  for (int j = 0; j < n; ++j) obs.bins[0].coords.emplace_back(j < n / 2 ? 0 : 1, j);
  std::sort(obs.bins[0].coords.begin(), obs.bins[0].coords.end());
  obs.save(fixture / "observations.tsv");

  ModelState model;
  model.W.resize(m, 2);
  model.W << -2, 0, 2, 0, 0, 1, 0, -1;
  Eigen::MatrixXd c(n, 2);
  c << -2, 0, -2.1, 0, -1.9, 0, 2, 0, 2.1, 0, 1.9, 0;
  model.C = {c};
  model.mu = {Eigen::VectorXd::Zero(m)};
  model.nu = {Eigen::VectorXd::Zero(n)};
  model.save(fixture / "model.ckpt");

  auto out = ws.dir("trace");
  REQUIRE(run_cli("--seed 2 trace --model " + (fixture / "model.ckpt").string() +
                  " --obs " + (fixture / "observations.tsv").string() + " --out-dir " +
                  out.string()) == 0);
  std::string dist = slurp(out / "distance_pct.tsv");
  CHECK(dist == "distance_pct\t0\t0\n");
  std::string shift = slurp(out / "shift_pct.tsv");
  CHECK(shift.find("t_test_p_lib") == std::string::npos);  // no second bin
  CHECK(shift.find("lib_shift_pct\t0\t0\n") != std::string::npos);
}

TEST_CASE("divergence exits 3 and saves the last finite checkpoint") {
  Workspace ws;
  auto fixtures = ws.dir("fixtures");
  auto ingested = ws.dir("ingested");
  REQUIRE(run_cli(synth_flags(fixtures, 29)) == 0);
  REQUIRE(run_cli(ingest_flags(fixtures, ingested)) == 0);

  auto out = ws.dir("diverged");
  // An absurd learning rate overflows the logits within a few steps.
  const int code = run_cli("--seed 1 train --obs " +
                           (ingested / "observations.tsv").string() + " --graph " +
                           (ingested / "graph.tsv").string() +
                           " --learning-rate 1e160 --max-epochs 10 --out-dir " +
                           out.string());
  CHECK(code == 3);
  CHECK(fs::exists(out / "model.ckpt.diverged"));
  CHECK_FALSE(fs::exists(out / "model.ckpt"));
  CHECK_NOTHROW(ModelState::load(out / "model.ckpt.diverged"));
}

TEST_CASE("commands never modify their input files") {
  Workspace ws;
  auto fixtures = ws.dir("fixtures");
  auto ingested = ws.dir("ingested");
  REQUIRE(run_cli(synth_flags(fixtures, 31)) == 0);
  const std::string events_before = slurp(fixtures / "events.tsv");
  REQUIRE(run_cli(ingest_flags(fixtures, ingested)) == 0);
  CHECK(slurp(fixtures / "events.tsv") == events_before);

  const std::string obs_before = slurp(ingested / "observations.tsv");
  auto out = ws.dir("train");
  REQUIRE(run_cli("--seed 2 train --obs " + (ingested / "observations.tsv").string() +
                  " --graph " + (ingested / "graph.tsv").string() +
                  " --max-epochs 5 --out-dir " + out.string()) == 0);
  CHECK(slurp(ingested / "observations.tsv") == obs_before);
}

TEST_CASE("evaluate --predict emits the three-model F1 table") {
  Workspace ws;
  auto fixtures = ws.dir("fixtures");
  auto ingested = ws.dir("ingested");
  REQUIRE(run_cli(synth_flags(fixtures, 37)) == 0);
  REQUIRE(run_cli(ingest_flags(fixtures, ingested)) == 0);

  // Split the ingested observations into train/validation halves.
  auto obs = TimeBinnedObservations::load(ingested / "observations.tsv");
  auto graph = SocialGraph::load(ingested / "graph.tsv");
  std::vector<int> train_users, val_users;
  for (int j = 0; j < obs.num_users(); ++j) {
    (j % 2 == 0 ? train_users : val_users).push_back(j);
  }
  subset_users(obs, train_users).save(ws.root / "train_obs.tsv");
  subset_users(obs, val_users).save(ws.root / "val_obs.tsv");
  induced_subgraph(graph, train_users).save(ws.root / "train_graph.tsv");
  induced_subgraph(graph, val_users).save(ws.root / "val_graph.tsv");

  auto trained = ws.dir("model");
  REQUIRE(run_cli("--seed 5 train --obs " + (ws.root / "train_obs.tsv").string() +
                  " --graph " + (ws.root / "train_graph.tsv").string() +
                  " --learning-rate 0.05 --max-epochs 60 --out-dir " +
                  trained.string()) == 0);

  auto out = ws.dir("metrics");
  REQUIRE(run_cli("--seed 5 evaluate --model " + (trained / "model.ckpt").string() +
                  " --obs " + (ws.root / "train_obs.tsv").string() + " --predict" +
                  " --val-obs " + (ws.root / "val_obs.tsv").string() + " --val-graph " +
                  (ws.root / "val_graph.tsv").string() +
                  " --learning-rate 0.05 --max-epochs 60 --out-dir " +
                  out.string()) == 0);
  std::string metrics = slurp(out / "metrics.tsv");
  CHECK(metrics.find("f1_ideotrace\tpooled\t") != std::string::npos);
  CHECK(metrics.find("f1_rasch\tpooled\t") != std::string::npos);
  CHECK(metrics.find("f1_static_mf\tpooled\t") != std::string::npos);
  CHECK(metrics.find("f1_ideotrace\tmean\t") != std::string::npos);
  CHECK(metrics.find("f1_ideotrace\tstd\t") != std::string::npos);
}

TEST_CASE("cross-validation subcommand writes scores and trains the best cell") {
  Workspace ws;
  auto fixtures = ws.dir("fixtures");
  auto ingested = ws.dir("ingested");
  REQUIRE(run_cli(synth_flags(fixtures, 23)) == 0);
  REQUIRE(run_cli(ingest_flags(fixtures, ingested)) == 0);

  std::ofstream grid(ws.root / "grid.tsv");
  grid << "2 0.01 0 0\n2 0.01 0.1 0.01\n";
  grid.close();

  auto out = ws.dir("cv");
  REQUIRE(run_cli("--seed 4 train --cv --grid " + (ws.root / "grid.tsv").string() +
                  " --folds 2 --obs " + (ingested / "observations.tsv").string() +
                  " --graph " + (ingested / "graph.tsv").string() +
                  " --learning-rate 0.05 --max-epochs 30 --out-dir " + out.string()) == 0);
  CHECK(fs::exists(out / "cv_scores.tsv"));
  CHECK(fs::exists(out / "model.ckpt"));
  std::string scores = slurp(out / "cv_scores.tsv");
  CHECK(std::count(scores.begin(), scores.end(), '\n') == 2);
}
