// ideotrace: joint estimation of website and time-varying user ideology from
// share logs, with baselines, evaluation metrics and polarization tracing.
//
// Subcommands: ingest, train, evaluate, trace, synth. Every run writes a
// manifest.json (inputs, digests, resolved config, seed) before any output.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical divergence.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ideotrace/baselines.hpp"
#include "ideotrace/evaluation.hpp"
#include "ideotrace/interaction_data.hpp"
#include "ideotrace/model.hpp"
#include "ideotrace/optimizer.hpp"
#include "ideotrace/stats.hpp"
#include "ideotrace/synthgen.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace ideotrace;

namespace {

constexpr const char* kVersion = "ideotrace 1.0.0";

std::uint64_t fnv1a64(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 0x100000001b3ULL;
    }
  }
  return hash;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct GlobalOptions {
  std::uint64_t seed = 0;
  fs::path out_dir = ".";
  std::string config_file;
};

struct ModelFlags {
  Hyperparameters hp;
  AdamConfig adam;
};

// Flat key=value config file; '#' starts a comment. Keys mirror the
// Hyperparameters and AdamConfig fields. CLI flags override file values.
void apply_config_file(const fs::path& path, ModelFlags& flags, GlobalOptions& global) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\r')) line.pop_back();
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path.string() + ": line " + std::to_string(line_no) +
                                  ": expected key=value");
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    try {
      if (key == "k") flags.hp.latent_dim = std::stoi(value);
      else if (key == "beta") flags.hp.beta = std::stod(value);
      else if (key == "gamma") flags.hp.gamma = std::stod(value);
      else if (key == "lambda") flags.hp.lambda = std::stod(value);
      else if (key == "tau") flags.hp.tau = std::stod(value);
      else if (key == "learning_rate") flags.adam.learning_rate = std::stod(value);
      else if (key == "beta1") flags.adam.beta1 = std::stod(value);
      else if (key == "beta2") flags.adam.beta2 = std::stod(value);
      else if (key == "epsilon") flags.adam.epsilon = std::stod(value);
      else if (key == "max_epochs") flags.adam.max_epochs = std::stoi(value);
      else if (key == "tolerance") flags.adam.tolerance = std::stod(value);
      else if (key == "patience") flags.adam.patience = std::stoi(value);
      else if (key == "seed") global.seed = std::stoull(value);
      else throw std::invalid_argument("unknown config key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception&) {
      throw std::invalid_argument(path.string() + ": bad value for '" + key + "'");
    }
  }
}

json config_json(const ModelFlags& flags) {
  return json{{"k", flags.hp.latent_dim},
              {"beta", flags.hp.beta},
              {"gamma", flags.hp.gamma},
              {"lambda", flags.hp.lambda},
              {"tau", flags.hp.tau},
              {"learning_rate", flags.adam.learning_rate},
              {"beta1", flags.adam.beta1},
              {"beta2", flags.adam.beta2},
              {"epsilon", flags.adam.epsilon},
              {"max_epochs", flags.adam.max_epochs},
              {"tolerance", flags.adam.tolerance},
              {"patience", flags.adam.patience}};
}

// The manifest is written before any other output of the command.
void write_manifest(const GlobalOptions& global, const std::string& command,
                    const std::vector<std::pair<std::string, fs::path>>& inputs,
                    const std::vector<std::string>& outputs, json config) {
  json inputs_json = json::object();
  for (const auto& [name, path] : inputs) {
    inputs_json[name] = {{"path", path.string()}, {"fnv1a64", hex64(fnv1a64(path))}};
  }
  json manifest{{"command", command}, {"version", kVersion},
                {"seed", global.seed},  {"config", std::move(config)},
                {"inputs", inputs_json}, {"outputs", outputs}};
  fs::create_directories(global.out_dir);
  std::ofstream out(global.out_dir / "manifest.json");
  if (!out) throw DataError("cannot write manifest in " + global.out_dir.string());
  out << manifest.dump(2) << '\n';
}

std::ofstream open_output(const GlobalOptions& global, const std::string& name) {
  fs::create_directories(global.out_dir);
  std::ofstream out(global.out_dir / name);
  if (!out) throw DataError("cannot write file: " + (global.out_dir / name).string());
  return out;
}

// ---------------------------------------------------------------------------
// ingest

struct IngestArgs {
  fs::path events, edges, labels;
  BinningConfig binning;
};

int run_ingest(const GlobalOptions& global, const IngestArgs& args) {
  args.binning.validate();
  write_manifest(global, "ingest",
                 {{"events", args.events}, {"edges", args.edges}, {"labels", args.labels}},
                 {"observations.tsv", "graph.tsv", "labels.tsv"},
                 json{{"start", args.binning.start},
                      {"end", args.binning.end},
                      {"bin_width", args.binning.bin_width},
                      {"min_shares_per_bin", args.binning.min_shares_per_bin},
                      {"max_websites", args.binning.max_websites}});

  auto obs = ingest_events(args.events, args.binning);
  auto built = build_graph(args.edges, obs.user_index);
  auto labels = load_labels(args.labels);

  obs.save(global.out_dir / "observations.tsv");
  built.graph.save(global.out_dir / "graph.tsv");
  labels.save(global.out_dir / "labels.tsv");

  std::cerr << "ingest: " << obs.num_websites() << " websites, " << obs.num_users()
            << " users, " << obs.num_bins() << " bins";
  if (built.self_loops_skipped > 0) {
    std::cerr << " (skipped " << built.self_loops_skipped << " self-loop edges)";
  }
  std::cerr << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  fs::path obs_path, graph_path;
  bool cv = false;
  fs::path grid_path;
  int folds = 3;
};

std::vector<Hyperparameters> load_grid(const fs::path& path, int latent_dim) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open grid file: " + path.string());
  std::vector<Hyperparameters> grid;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream row(line);
    double beta, gamma, lambda, tau;
    if (!(row >> beta)) continue;  // blank line
    if (!(row >> gamma >> lambda >> tau)) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) +
                      ": expected 'beta gamma lambda tau'");
    }
    Hyperparameters hp;
    hp.latent_dim = latent_dim;
    hp.beta = beta;
    hp.gamma = gamma;
    hp.lambda = lambda;
    hp.tau = tau;
    grid.push_back(hp);
  }
  if (grid.empty()) throw DataError(path.string() + ": empty grid");
  return grid;
}

void write_loss_trace(const GlobalOptions& global, const std::vector<double>& trace) {
  auto out = open_output(global, "loss_trace.tsv");
  for (std::size_t epoch = 0; epoch < trace.size(); ++epoch) {
    out << epoch << '\t' << fmt17(trace[epoch]) << '\n';
  }
}

int run_train(const GlobalOptions& global, const TrainArgs& args, ModelFlags flags) {
  flags.adam.seed = global.seed;
  std::vector<std::pair<std::string, fs::path>> inputs{{"obs", args.obs_path},
                                                       {"graph", args.graph_path}};
  std::vector<std::string> outputs{"model.ckpt", "loss_trace.tsv"};
  if (args.cv) {
    inputs.emplace_back("grid", args.grid_path);
    outputs.push_back("cv_scores.tsv");
  }
  json config = config_json(flags);
  config["cv"] = args.cv;
  if (args.cv) config["folds"] = args.folds;
  write_manifest(global, "train", inputs, outputs, std::move(config));

  auto obs = TimeBinnedObservations::load(args.obs_path);
  auto graph = SocialGraph::load(args.graph_path);
  if (graph.n_users != obs.num_users()) {
    throw DataError("graph/observations user count mismatch");
  }

  if (args.cv) {
    auto grid = load_grid(args.grid_path, flags.hp.latent_dim);
    auto result = cross_validate(obs, graph, grid, args.folds, global.seed, flags.adam);
    auto out = open_output(global, "cv_scores.tsv");
    for (std::size_t cell = 0; cell < grid.size(); ++cell) {
      out << cell << '\t' << fmt17(grid[cell].beta) << '\t' << fmt17(grid[cell].gamma)
          << '\t' << fmt17(grid[cell].lambda) << '\t' << fmt17(grid[cell].tau) << '\t'
          << fmt17(result.mean_f1[cell]) << '\n';
    }
    flags.hp = result.best;
    std::cerr << "cv: selected beta=" << flags.hp.beta << " gamma=" << flags.hp.gamma
              << " lambda=" << flags.hp.lambda << " tau=" << flags.hp.tau << '\n';
  }

  try {
    auto report = train(obs, graph, flags.hp, flags.adam);
    report.final_state.save(global.out_dir / "model.ckpt");
    write_loss_trace(global, report.loss_trace);
    std::cerr << "train: " << report.epochs_run << " epochs, final loss "
              << report.loss_trace.back()
              << (report.converged ? " (converged)" : " (epoch budget)") << '\n';
  } catch (const TrainDiverged& e) {
    e.last_state.save(global.out_dir / "model.ckpt.diverged");
    std::cerr << "train: diverged (" << e.what() << "); last finite checkpoint at "
              << (global.out_dir / "model.ckpt.diverged").string() << '\n';
    return 3;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  fs::path model_path, obs_path;
  std::string labels_path;  // optional
  bool predict = false;
  fs::path val_obs_path, val_graph_path;
  double threshold = 0.5;
};

void emit_metric(std::ofstream& out, const std::string& metric, const std::string& bin,
                 double value) {
  out << metric << '\t' << bin << '\t' << fmt17(value) << '\n';
}

int run_evaluate(const GlobalOptions& global, const EvaluateArgs& args, ModelFlags flags) {
  flags.adam.seed = global.seed;
  std::vector<std::pair<std::string, fs::path>> inputs{{"model", args.model_path},
                                                       {"obs", args.obs_path}};
  if (!args.labels_path.empty()) inputs.emplace_back("labels", args.labels_path);
  if (args.predict) {
    inputs.emplace_back("val_obs", args.val_obs_path);
    inputs.emplace_back("val_graph", args.val_graph_path);
  }
  json config = config_json(flags);
  config["threshold"] = args.threshold;
  config["predict"] = args.predict;
  write_manifest(global, "evaluate", inputs, {"metrics.tsv"}, std::move(config));

  auto model = ModelState::load(args.model_path);
  auto obs = TimeBinnedObservations::load(args.obs_path);
  if (model.num_websites() != obs.num_websites() ||
      model.num_users() != obs.num_users() || model.num_bins() != obs.num_bins()) {
    throw DataError("model/observations shape mismatch");
  }
  flags.hp.latent_dim = model.latent_dim();

  auto out = open_output(global, "metrics.tsv");
  auto gt = derive_user_ground_truth(model.W, obs);

  // Website ideology vs ordinal labels (Spearman), when labels are given.
  if (!args.labels_path.empty()) {
    auto labels = LabelSet::load_artifact(args.labels_path);
    auto [codes, found] = labels_for_index(labels, obs.website_index);
    std::vector<double> est, ord;
    for (int i = 0; i < obs.num_websites(); ++i) {
      if (std::isfinite(codes[i])) {
        est.push_back(gt.website_scores[i]);
        ord.push_back(codes[i]);
      }
    }
    if (est.size() < 3) {
      out << "spearman_websites\tpooled\tinsufficient labels\n";
    } else {
      try {
        emit_metric(out, "spearman_websites", "pooled", spearman(est, ord));
      } catch (const DataError&) {
        out << "spearman_websites\tpooled\tinsufficient labels\n";
      }
    }
  }

  // User ideology vs self-derived ground truth (Pearson), common 1-D axis.
  Eigen::MatrixXd stacked(static_cast<Eigen::Index>(model.num_bins()) * model.num_users(),
                          model.latent_dim());
  for (int t = 0; t < model.num_bins(); ++t) {
    stacked.middleRows(static_cast<Eigen::Index>(t) * model.num_users(), model.num_users()) =
        model.C[t];
  }
  auto axis = pca_project(stacked);
  std::vector<double> pooled_est, pooled_gt, per_bin_r;
  for (int t = 0; t < model.num_bins(); ++t) {
    std::vector<double> est, truth;
    for (int j = 0; j < model.num_users(); ++j) {
      const double g = gt.per_bin[t][j];
      if (!std::isfinite(g)) continue;
      est.push_back(axis.scores[static_cast<Eigen::Index>(t) * model.num_users() + j]);
      truth.push_back(g);
    }
    pooled_est.insert(pooled_est.end(), est.begin(), est.end());
    pooled_gt.insert(pooled_gt.end(), truth.begin(), truth.end());
    const double r = pearson(est, truth);
    per_bin_r.push_back(r);
    emit_metric(out, "pearson_users", std::to_string(t), r);
  }
  double mean_r = 0;
  for (double r : per_bin_r) mean_r += r;
  emit_metric(out, "pearson_users", "mean", mean_r / per_bin_r.size());
  emit_metric(out, "pearson_users", "pooled", pearson(pooled_est, pooled_gt));

  if (args.predict) {
    auto val_obs = TimeBinnedObservations::load(args.val_obs_path);
    auto val_graph = SocialGraph::load(args.val_graph_path);
    if (val_obs.website_index != obs.website_index) {
      throw DataError("mismatched website index between training and validation sets");
    }
    if (val_graph.n_users != val_obs.num_users()) {
      throw DataError("validation graph/observations user count mismatch");
    }

    auto ideo = predict_unobserved_users(model, val_obs, val_graph, flags.hp, flags.adam,
                                         args.threshold);
    auto rasch_fit = train_rasch(obs, flags.adam);
    auto rasch = predict_unobserved_users_rasch(rasch_fit.final_state, val_obs,
                                                flags.adam, args.threshold);
    Hyperparameters static_hp = flags.hp;
    static_hp.lambda = 0.0;
    auto static_fit = train_static_mf(obs, static_hp, flags.adam);
    auto smf = predict_unobserved_users_static(static_fit.final_state, val_obs, static_hp,
                                               flags.adam, args.threshold);

    auto emit_scores = [&](const std::string& name, const PredictionScores& scores) {
      double mean = 0;
      for (std::size_t t = 0; t < scores.per_bin.size(); ++t) {
        emit_metric(out, name, std::to_string(t), scores.per_bin[t]);
        mean += scores.per_bin[t];
      }
      mean /= scores.per_bin.size();
      double var = 0;
      for (double f : scores.per_bin) var += (f - mean) * (f - mean);
      emit_metric(out, name, "mean", mean);
      emit_metric(out, name, "std", std::sqrt(var / scores.per_bin.size()));
      emit_metric(out, name, "pooled", scores.pooled);
    };
    emit_scores("f1_ideotrace", ideo);
    emit_scores("f1_rasch", rasch);
    emit_scores("f1_static_mf", smf);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// trace

struct TraceArgs {
  fs::path model_path, obs_path;
  std::string labels_path;  // optional, orients the ideology axis
};

int run_trace(const GlobalOptions& global, const TraceArgs& args) {
  std::vector<std::pair<std::string, fs::path>> inputs{{"model", args.model_path},
                                                       {"obs", args.obs_path}};
  if (!args.labels_path.empty()) inputs.emplace_back("labels", args.labels_path);
  write_manifest(global, "trace", inputs, {"distance_pct.tsv", "shift_pct.tsv"},
                 json::object());

  auto model = ModelState::load(args.model_path);
  auto obs = TimeBinnedObservations::load(args.obs_path);
  if (model.num_websites() != obs.num_websites() ||
      model.num_users() != obs.num_users() || model.num_bins() != obs.num_bins()) {
    throw DataError("model/observations shape mismatch");
  }

  auto gt = derive_user_ground_truth(model.W, obs);
  Eigen::VectorXd pooled_gt = gt.pooled;
  if (!args.labels_path.empty()) {
    // Orient ground-truth scores so larger means more conservative.
    auto labels = LabelSet::load_artifact(args.labels_path);
    auto [codes, found] = labels_for_index(labels, obs.website_index);
    std::vector<double> est, ord;
    for (int i = 0; i < obs.num_websites(); ++i) {
      if (std::isfinite(codes[i])) {
        est.push_back(gt.website_scores[i]);
        ord.push_back(codes[i]);
      }
    }
    if (est.size() >= 3) {
      try {
        if (spearman(est, ord) < 0) pooled_gt = -pooled_gt;
      } catch (const DataError&) {
        // constant labels: keep the PCA orientation
      }
    }
  }

  auto clusters = kmeans2(model.C[0], global.seed);
  auto trace = polarization_trace(model.C, clusters.assignment, pooled_gt);

  auto dist_out = open_output(global, "distance_pct.tsv");
  for (std::size_t t = 0; t < trace.distance_pct.size(); ++t) {
    dist_out << "distance_pct\t" << t << '\t' << fmt17(trace.distance_pct[t]) << '\n';
  }
  auto shift_out = open_output(global, "shift_pct.tsv");
  for (std::size_t t = 0; t < trace.lib_shift_pct.size(); ++t) {
    shift_out << "lib_shift_pct\t" << t << '\t' << fmt17(trace.lib_shift_pct[t]) << '\n';
  }
  for (std::size_t t = 0; t < trace.cons_shift_pct.size(); ++t) {
    shift_out << "cons_shift_pct\t" << t << '\t' << fmt17(trace.cons_shift_pct[t]) << '\n';
  }
  const int last = static_cast<int>(trace.distance_pct.size()) - 1;
  if (std::isfinite(trace.t_test_p_lib)) {
    shift_out << "t_stat_lib\t" << last << '\t' << fmt17(trace.t_stat_lib) << '\n';
    shift_out << "t_test_p_lib\t" << last << '\t' << fmt17(trace.t_test_p_lib) << '\n';
  }
  if (std::isfinite(trace.t_test_p_cons)) {
    shift_out << "t_stat_cons\t" << last << '\t' << fmt17(trace.t_stat_cons) << '\n';
    shift_out << "t_test_p_cons\t" << last << '\t' << fmt17(trace.t_test_p_cons) << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------
// synth

int run_synth(const GlobalOptions& global, SynthConfig cfg) {
  cfg.seed = global.seed;
  cfg.validate();
  write_manifest(global, "synth", {},
                 {"events.tsv", "edges.tsv", "labels.tsv", "truth_model.ckpt", "truth.tsv"},
                 json{{"m", cfg.n_websites},
                      {"n", cfg.n_users},
                      {"k", cfg.latent_dim},
                      {"t", cfg.n_steps},
                      {"cluster_fraction", cfg.cluster_fraction},
                      {"separation", cfg.separation},
                      {"drift_per_bin", cfg.drift_per_bin},
                      {"intra_edge_prob", cfg.intra_edge_prob},
                      {"inter_edge_prob", cfg.inter_edge_prob},
                      {"bias_spread", cfg.bias_spread},
                      {"latent_spread", cfg.latent_spread},
                      {"min_shares_per_bin", cfg.min_shares_per_bin},
                      {"bin_width", cfg.bin_width}});

  auto truth = generate(cfg);
  write_fixture_files(truth, global.out_dir / "events.tsv", global.out_dir / "edges.tsv",
                      global.out_dir / "labels.tsv");
  truth.planted.save(global.out_dir / "truth_model.ckpt");

  auto out = open_output(global, "truth.tsv");
  out << "ingest_start\t-\t0\n";
  out << "ingest_end\t-\t" << static_cast<std::int64_t>(cfg.n_steps + 1) * cfg.bin_width
      << '\n';
  out << "ingest_bin_width\t-\t" << cfg.bin_width << '\n';
  out << "ingest_min_shares\t-\t" << cfg.min_shares_per_bin << '\n';
  for (int j = 0; j < cfg.n_users; ++j) {
    out << "user_cluster\t" << j << '\t' << truth.user_cluster[j] << '\n';
  }
  for (int i = 0; i < cfg.n_websites; ++i) {
    out << "website_cluster\t" << i << '\t' << truth.website_cluster[i] << '\n';
  }
  for (std::size_t t = 0; t < truth.planted_distance_pct.size(); ++t) {
    out << "distance_pct\t" << t << '\t' << fmt17(truth.planted_distance_pct[t]) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IdeoTrace: ideology estimation and polarization tracing"};
  app.fallthrough();

  GlobalOptions global;
  ModelFlags flags;
  app.add_option("--seed", global.seed, "random seed");
  app.add_option("--out-dir", global.out_dir, "output directory");
  app.add_option("--config", global.config_file, "key=value config file");

  // Pre-scan for --config so file values act as defaults the flags override.
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    std::string value;
    if (arg == "--config" && i + 1 < argc) value = argv[i + 1];
    else if (arg.rfind("--config=", 0) == 0) value = arg.substr(9);
    if (!value.empty()) {
      try {
        apply_config_file(value, flags, global);
      } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
      } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
      }
      break;
    }
  }

  auto add_model_flags = [&](CLI::App* cmd) {
    cmd->add_option("--k", flags.hp.latent_dim, "latent dimension");
    cmd->add_option("--beta", flags.hp.beta, "positive-label weight (> 1)");
    cmd->add_option("--gamma", flags.hp.gamma, "L2 strength");
    cmd->add_option("--lambda", flags.hp.lambda, "graph penalty strength");
    cmd->add_option("--tau", flags.hp.tau, "temporal penalty strength");
    cmd->add_option("--learning-rate", flags.adam.learning_rate, "Adam learning rate");
    cmd->add_option("--beta1", flags.adam.beta1, "Adam beta1");
    cmd->add_option("--beta2", flags.adam.beta2, "Adam beta2");
    cmd->add_option("--epsilon", flags.adam.epsilon, "Adam epsilon");
    cmd->add_option("--max-epochs", flags.adam.max_epochs, "epoch budget");
    cmd->add_option("--tolerance", flags.adam.tolerance, "relative loss-change threshold");
    cmd->add_option("--patience", flags.adam.patience, "calm epochs before stopping");
  };

  // ingest
  IngestArgs ingest_args;
  auto* ingest_cmd = app.add_subcommand("ingest", "bin events, build graph, load labels");
  ingest_cmd->add_option("--events", ingest_args.events, "share-event TSV")->required();
  ingest_cmd->add_option("--edges", ingest_args.edges, "edge TSV")->required();
  ingest_cmd->add_option("--labels", ingest_args.labels, "website label TSV")->required();
  ingest_cmd->add_option("--start", ingest_args.binning.start, "window start (unix)")
      ->required();
  ingest_cmd->add_option("--end", ingest_args.binning.end, "window end (unix)")->required();
  ingest_cmd->add_option("--bin-width", ingest_args.binning.bin_width, "bin width (s)");
  ingest_cmd->add_option("--min-shares", ingest_args.binning.min_shares_per_bin,
                         "per-bin activity floor");
  ingest_cmd->add_option("--max-websites", ingest_args.binning.max_websites,
                         "popularity cutoff");

  // train
  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "fit the model by Adam");
  train_cmd->add_option("--obs", train_args.obs_path, "observations artifact")->required();
  train_cmd->add_option("--graph", train_args.graph_path, "graph artifact")->required();
  train_cmd->add_flag("--cv", train_args.cv, "cross-validate a hyperparameter grid first");
  train_cmd->add_option("--grid", train_args.grid_path, "grid file (beta gamma lambda tau)");
  train_cmd->add_option("--folds", train_args.folds, "cross-validation folds");
  add_model_flags(train_cmd);

  // evaluate
  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "correlations and prediction F1");
  eval_cmd->add_option("--model", eval_args.model_path, "model checkpoint")->required();
  eval_cmd->add_option("--obs", eval_args.obs_path, "observations artifact")->required();
  eval_cmd->add_option("--labels", eval_args.labels_path, "labels artifact");
  eval_cmd->add_flag("--predict", eval_args.predict, "run the held-out-user protocol");
  eval_cmd->add_option("--val-obs", eval_args.val_obs_path, "validation observations");
  eval_cmd->add_option("--val-graph", eval_args.val_graph_path, "validation graph");
  eval_cmd->add_option("--threshold", eval_args.threshold, "prediction threshold");
  add_model_flags(eval_cmd);

  // trace
  TraceArgs trace_args;
  auto* trace_cmd = app.add_subcommand("trace", "polarization trace from a checkpoint");
  trace_cmd->add_option("--model", trace_args.model_path, "model checkpoint")->required();
  trace_cmd->add_option("--obs", trace_args.obs_path, "observations artifact")->required();
  trace_cmd->add_option("--labels", trace_args.labels_path, "labels artifact");

  // synth
  SynthConfig synth_cfg;
  auto* synth_cmd = app.add_subcommand("synth", "generate planted fixture files");
  synth_cmd->add_option("--m", synth_cfg.n_websites, "websites");
  synth_cmd->add_option("--n", synth_cfg.n_users, "users");
  synth_cmd->add_option("--k", synth_cfg.latent_dim, "latent dimension");
  synth_cmd->add_option("--t", synth_cfg.n_steps, "time steps (bins = t+1)");
  synth_cmd->add_option("--cluster-fraction", synth_cfg.cluster_fraction,
                        "conservative fraction");
  synth_cmd->add_option("--separation", synth_cfg.separation, "planted cluster separation");
  synth_cmd->add_option("--drift", synth_cfg.drift_per_bin, "outward drift per bin");
  synth_cmd->add_option("--intra-edge-prob", synth_cfg.intra_edge_prob, "same-cluster edges");
  synth_cmd->add_option("--inter-edge-prob", synth_cfg.inter_edge_prob, "cross-cluster edges");
  synth_cmd->add_option("--bias-spread", synth_cfg.bias_spread, "std of planted biases");
  synth_cmd->add_option("--latent-spread", synth_cfg.latent_spread, "std of latent offsets");
  synth_cmd->add_option("--min-shares", synth_cfg.min_shares_per_bin, "activity floor");
  synth_cmd->add_option("--bin-width", synth_cfg.bin_width, "emitted bin width (s)");

  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*ingest_cmd) return run_ingest(global, ingest_args);
    if (*train_cmd) return run_train(global, train_args, flags);
    if (*eval_cmd) return run_evaluate(global, eval_args, flags);
    if (*trace_cmd) return run_trace(global, trace_args);
    if (*synth_cmd) return run_synth(global, synth_cfg);
  } catch (const DivergedError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
