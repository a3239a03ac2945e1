#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ideotrace/model.hpp"
#include "ideotrace/rng.hpp"
#include "ideotrace/synthgen.hpp"

using namespace ideotrace;
namespace fs = std::filesystem;

namespace {

SynthConfig base_config(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_websites = 20;
  cfg.n_users = 40;
  cfg.latent_dim = 2;
  cfg.n_steps = 2;
  cfg.separation = 4.0;
  cfg.intra_edge_prob = 0.2;
  cfg.inter_edge_prob = 0.02;
  cfg.bias_spread = 0.3;
  cfg.latent_spread = 0.25;
  cfg.min_shares_per_bin = 1;
  cfg.seed = seed;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("zero drift plants a flat polarization curve") {
  auto cfg = base_config(1);
  cfg.drift_per_bin = 0.0;
  auto truth = generate(cfg);
  for (double v : truth.planted_distance_pct) CHECK(v == 0.0);
}

TEST_CASE("drift plants the documented distance increase") {
  auto cfg = base_config(2);
  cfg.drift_per_bin = 0.02;
  cfg.n_steps = 5;
  auto truth = generate(cfg);
  // Centers move outward 2 * t * drift * separation; d_0 is realized.
  CHECK(truth.planted_distance_pct[0] == 0.0);
  const double nominal = 100.0 * (2 * 5 * 0.02 * 4.0) / 4.0;  // 20% at t=5
  CHECK(truth.planted_distance_pct[5] == doctest::Approx(nominal).epsilon(0.08));
  for (std::size_t t = 1; t < truth.planted_distance_pct.size(); ++t) {
    CHECK(truth.planted_distance_pct[t] > truth.planted_distance_pct[t - 1]);
  }
}

TEST_CASE("large separation saturates aligned share rates") {
  auto cfg = base_config(3);
  cfg.separation = 20.0;
  cfg.latent_spread = 0.1;
  cfg.bias_spread = 0.1;
  auto truth = generate(cfg);

  long aligned_total = 0, aligned_shared = 0;
  for (int t = 0; t < truth.observations.num_bins(); ++t) {
    for (int i = 0; i < cfg.n_websites; ++i) {
      for (int j = 0; j < cfg.n_users; ++j) {
        if (truth.website_cluster[i] != truth.user_cluster[j]) continue;
        ++aligned_total;
        if (truth.observations.bins[t].contains(i, j)) ++aligned_shared;
      }
    }
  }
  CHECK(static_cast<double>(aligned_shared) / aligned_total > 0.95);
}

TEST_CASE("generation is deterministic given the seed") {
  auto truth1 = generate(base_config(4));
  auto truth2 = generate(base_config(4));
  auto dir = fs::temp_directory_path();
  truth1.observations.save(dir / "ideotrace_synth_a.tsv");
  truth2.observations.save(dir / "ideotrace_synth_b.tsv");
  CHECK(slurp(dir / "ideotrace_synth_a.tsv") == slurp(dir / "ideotrace_synth_b.tsv"));
  CHECK(truth1.planted.W == truth2.planted.W);
  CHECK(truth1.graph.edges == truth2.graph.edges);
  fs::remove(dir / "ideotrace_synth_a.tsv");
  fs::remove(dir / "ideotrace_synth_b.tsv");

  auto truth3 = generate(base_config(5));
  CHECK(truth1.planted.W != truth3.planted.W);
}

TEST_CASE("single-cell resampling mean matches the planted probability") {
  auto truth = generate(base_config(6));
  const auto& s = truth.planted;
  const double logit = s.W.row(0).dot(s.C[0].row(0)) + s.mu[0][0] + s.nu[0][0];
  const double p = logistic(logit);

  Rng rng(123);
  const int draws = 10000;
  long hits = 0;
  for (int rep = 0; rep < draws; ++rep) {
    if (rng.bernoulli(p)) ++hits;
  }
  const double mean = static_cast<double>(hits) / draws;
  const double se = std::sqrt(p * (1 - p) / draws);
  CHECK(std::abs(mean - p) < 3 * se);
}

TEST_CASE("generated graphs are homophilous") {
  auto cfg = base_config(7);
  cfg.n_users = 120;
  cfg.intra_edge_prob = 0.1;
  cfg.inter_edge_prob = 0.01;
  auto truth = generate(cfg);

  long intra_edges = 0, inter_edges = 0, intra_pairs = 0, inter_pairs = 0;
  for (int a = 0; a < cfg.n_users; ++a) {
    for (int b = a + 1; b < cfg.n_users; ++b) {
      const bool same = truth.user_cluster[a] == truth.user_cluster[b];
      (same ? intra_pairs : inter_pairs) += 1;
    }
  }
  for (const auto& [a, b] : truth.graph.edges) {
    const bool same = truth.user_cluster[a] == truth.user_cluster[b];
    (same ? intra_edges : inter_edges) += 1;
  }
  const double intra_density = static_cast<double>(intra_edges) / intra_pairs;
  const double inter_density = static_cast<double>(inter_edges) / inter_pairs;
  CHECK(intra_density > inter_density);
}

TEST_CASE("an unsatisfiable activity floor raises the documented error") {
  auto cfg = base_config(8);
  cfg.n_websites = 6;
  cfg.min_shares_per_bin = 6;  // every website every bin, including anti-aligned
  cfg.separation = 8.0;
  cfg.latent_spread = 0.0;
  cfg.bias_spread = 0.0;
  CHECK_THROWS_WITH_AS(generate(cfg), "activity floor infeasible; raise biases",
                       DataError);
}

TEST_CASE("fixture files re-ingest to identical index maps and bins") {
  auto cfg = base_config(9);
  auto truth = generate(cfg);
  auto dir = fs::temp_directory_path() / "ideotrace_synth_rt";
  fs::create_directories(dir);
  write_fixture_files(truth, dir / "events.tsv", dir / "edges.tsv", dir / "labels.tsv");

  BinningConfig bin_cfg;
  bin_cfg.start = 0;
  bin_cfg.end = static_cast<std::int64_t>(cfg.n_steps + 1) * cfg.bin_width;
  bin_cfg.bin_width = cfg.bin_width;
  bin_cfg.min_shares_per_bin = cfg.min_shares_per_bin;
  bin_cfg.max_websites = cfg.n_websites;

  auto obs = ingest_events(dir / "events.tsv", bin_cfg);
  CHECK(obs.user_index == truth.observations.user_index);
  CHECK(obs.website_index == truth.observations.website_index);
  REQUIRE(obs.num_bins() == truth.observations.num_bins());
  for (int t = 0; t < obs.num_bins(); ++t) {
    CHECK(obs.bins[t].coords == truth.observations.bins[t].coords);
  }

  auto built = build_graph(dir / "edges.tsv", obs.user_index);
  CHECK(built.graph.edges == truth.graph.edges);
  CHECK(built.graph.laplacian == truth.graph.laplacian);

  auto labels = load_labels(dir / "labels.tsv");
  for (int i = 0; i < obs.num_websites(); ++i) {
    const int expected = truth.website_cluster[i] == 1 ? 2 : -2;
    CHECK(labels.website_labels.at(obs.website_index[i]) == expected);
  }
  fs::remove_all(dir);
}
