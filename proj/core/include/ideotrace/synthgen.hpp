#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ideotrace/interaction_data.hpp"
#include "ideotrace/model.hpp"

namespace ideotrace {

/// Configuration for planted-truth dataset generation. Users and websites
/// split into a liberal and a conservative cluster along the first latent
/// axis; cluster centers sit at +-separation/2 and move outward by
/// drift_per_bin * separation each bin.
struct SynthConfig {
  int n_websites = 50;   // M
  int n_users = 200;     // N
  int latent_dim = 2;    // K
  int n_steps = 4;       // T; bins = T+1
  double cluster_fraction = 0.5;  // fraction of conservative users/websites
  double separation = 4.0;
  double drift_per_bin = 0.0;     // fraction of separation, per bin
  double intra_edge_prob = 0.05;
  double inter_edge_prob = 0.005;
  double bias_spread = 0.5;    // std of planted mu, nu
  double latent_spread = 0.25; // std of per-entity latent offsets
  int min_shares_per_bin = 4;  // activity floor guaranteed by resampling
  std::uint64_t seed = 0;

  std::int64_t bin_width = 14 * 24 * 3600;  // for emitted event timestamps

  void validate() const;
};

/// Planted parameters plus the data sampled from them. Websites are ordered
/// by realized popularity (ties lexicographic) so the emitted files re-ingest
/// to identical index maps. cluster compares as 0 = liberal, 1 = conservative.
struct SynthTruth {
  SynthConfig config;
  ModelState planted;
  std::vector<int> user_cluster;     // size N
  std::vector<int> website_cluster;  // size M, aligned with website_index
  TimeBinnedObservations observations;
  SocialGraph graph;
  std::vector<double> planted_distance_pct;  // realized, from planted C^t
};

/// Sample a dataset from the planted model, Bernoulli per cell on the
/// logistic of the planted logits. Rows violating the per-bin activity floor
/// are redrawn up to 100 times; failure raises
/// DataError("activity floor infeasible; raise biases"). Deterministic given
/// the seed.
SynthTruth generate(const SynthConfig& config);

/// Write the ingestion-format fixture files (events, edges, labels).
/// Events for bin t carry timestamp t * bin_width; labels code the planted
/// website cluster as -2 (liberal) or +2 (conservative).
void write_fixture_files(const SynthTruth& truth,
                         const std::filesystem::path& events_file,
                         const std::filesystem::path& edges_file,
                         const std::filesystem::path& labels_file);

}  // namespace ideotrace
