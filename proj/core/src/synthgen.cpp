#include "ideotrace/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "ideotrace/model.hpp"
#include "ideotrace/rng.hpp"

namespace ideotrace {

namespace {

std::string website_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "w%05d", i);
  return buf;
}

std::string user_name(int j) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "u%06d", j);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_websites < 2 || n_users < 2 || latent_dim < 1 || n_steps < 0) {
    throw std::invalid_argument("synth: dimensions out of range");
  }
  if (!(cluster_fraction > 0 && cluster_fraction < 1)) {
    throw std::invalid_argument("synth: cluster_fraction must be in (0, 1)");
  }
  if (separation <= 0) throw std::invalid_argument("synth: separation must be > 0");
  if (drift_per_bin < 0) throw std::invalid_argument("synth: drift_per_bin must be >= 0");
  if (intra_edge_prob < 0 || intra_edge_prob > 1 || inter_edge_prob < 0 ||
      inter_edge_prob > 1) {
    throw std::invalid_argument("synth: edge probabilities must be in [0, 1]");
  }
  if (intra_edge_prob < inter_edge_prob) {
    throw std::invalid_argument("synth: intra_edge_prob must be >= inter_edge_prob");
  }
  if (bias_spread < 0 || latent_spread < 0) {
    throw std::invalid_argument("synth: spreads must be >= 0");
  }
  if (min_shares_per_bin < 1) {
    throw std::invalid_argument("synth: min_shares_per_bin must be >= 1");
  }
  if (bin_width <= 0) throw std::invalid_argument("synth: bin_width must be > 0");
}

SynthTruth generate(const SynthConfig& config) {
  config.validate();
  const int m = config.n_websites, n = config.n_users, k = config.latent_dim;
  const int bins = config.n_steps + 1;
  Rng rng(config.seed);

  // Draw order: website latents, user offsets, mu, nu, graph edges, then
  // per-bin observation rows (with per-row rejection for the activity floor).
  const int n_cons = std::clamp(static_cast<int>(std::lround(config.cluster_fraction * n)),
                                1, n - 1);
  const int m_cons = std::clamp(static_cast<int>(std::lround(config.cluster_fraction * m)),
                                1, m - 1);
  std::vector<int> user_side(n), website_side(m);  // +1 conservative, -1 liberal
  for (int j = 0; j < n; ++j) user_side[j] = j < n_cons ? 1 : -1;
  for (int i = 0; i < m; ++i) website_side[i] = i < m_cons ? 1 : -1;

  Eigen::MatrixXd W(m, k);
  for (int i = 0; i < m; ++i) {
    for (int c = 0; c < k; ++c) W(i, c) = rng.normal(0.0, config.latent_spread);
    W(i, 0) += website_side[i] * config.separation / 2.0;
  }
  Eigen::MatrixXd offsets(n, k);
  for (int j = 0; j < n; ++j) {
    for (int c = 0; c < k; ++c) offsets(j, c) = rng.normal(0.0, config.latent_spread);
  }
  Eigen::VectorXd mu(m), nu(n);
  for (int i = 0; i < m; ++i) mu[i] = rng.normal(0.0, config.bias_spread);
  for (int j = 0; j < n; ++j) nu[j] = rng.normal(0.0, config.bias_spread);

  std::vector<Eigen::MatrixXd> C(bins);
  for (int t = 0; t < bins; ++t) {
    const double center = config.separation / 2.0 +
                          t * config.drift_per_bin * config.separation;
    C[t] = offsets;
    for (int j = 0; j < n; ++j) C[t](j, 0) += user_side[j] * center;
  }

  std::vector<std::pair<int, int>> edges;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      const double p = user_side[a] == user_side[b] ? config.intra_edge_prob
                                                    : config.inter_edge_prob;
      if (rng.bernoulli(p)) edges.emplace_back(a, b);
    }
  }

  // Sample Y^t row by row; redraw a user's row until it clears the floor.
  std::vector<std::vector<std::pair<int, int>>> coords(bins);
  for (int t = 0; t < bins; ++t) {
    for (int j = 0; j < n; ++j) {
      std::vector<int> shared;
      bool ok = false;
      for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
        shared.clear();
        for (int i = 0; i < m; ++i) {
          const double logit = W.row(i).dot(C[t].row(j)) + mu[i] + nu[j];
          if (rng.bernoulli(logistic(logit))) shared.push_back(i);
        }
        ok = static_cast<int>(shared.size()) >= config.min_shares_per_bin;
      }
      if (!ok) throw DataError("activity floor infeasible; raise biases");
      for (int i : shared) coords[t].emplace_back(i, j);
    }
  }

  // Order websites by realized popularity (count desc, name lex asc); the
  // names are zero-padded so lex order equals original index order on ties.
  std::vector<long> counts(m, 0);
  for (const auto& bin : coords) {
    for (const auto& [i, j] : bin) ++counts[i];
  }
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (counts[a] != counts[b]) return counts[a] > counts[b];
    return a < b;
  });
  std::vector<int> new_index(m);
  for (int pos = 0; pos < m; ++pos) new_index[order[pos]] = pos;

  SynthTruth truth;
  truth.config = config;
  truth.planted.W.resize(m, k);
  Eigen::VectorXd mu_perm(m);
  truth.website_cluster.resize(m);
  for (int i = 0; i < m; ++i) {
    truth.planted.W.row(new_index[i]) = W.row(i);
    mu_perm[new_index[i]] = mu[i];
    truth.website_cluster[new_index[i]] = website_side[i] > 0 ? 1 : 0;
  }
  truth.planted.C = C;
  truth.planted.mu.assign(bins, mu_perm);
  truth.planted.nu.assign(bins, nu);
  truth.user_cluster.resize(n);
  for (int j = 0; j < n; ++j) truth.user_cluster[j] = user_side[j] > 0 ? 1 : 0;

  truth.observations.website_index.resize(m);
  for (int i = 0; i < m; ++i) {
    truth.observations.website_index[new_index[i]] = website_name(i);
  }
  truth.observations.user_index.resize(n);
  for (int j = 0; j < n; ++j) truth.observations.user_index[j] = user_name(j);
  truth.observations.bins.resize(bins);
  for (int t = 0; t < bins; ++t) {
    auto& bin = truth.observations.bins[t].coords;
    bin.reserve(coords[t].size());
    for (const auto& [i, j] : coords[t]) bin.emplace_back(new_index[i], j);
    std::sort(bin.begin(), bin.end());
  }

  truth.graph = SocialGraph::from_edges(n, std::move(edges));

  // Realized planted polarization, from the planted cluster means.
  std::vector<int> lib, cons;
  for (int j = 0; j < n; ++j) (user_side[j] > 0 ? cons : lib).push_back(j);
  std::vector<double> dist(bins);
  for (int t = 0; t < bins; ++t) {
    Eigen::RowVectorXd mean_lib = Eigen::RowVectorXd::Zero(k);
    Eigen::RowVectorXd mean_cons = Eigen::RowVectorXd::Zero(k);
    for (int j : lib) mean_lib += C[t].row(j);
    for (int j : cons) mean_cons += C[t].row(j);
    mean_lib /= static_cast<double>(lib.size());
    mean_cons /= static_cast<double>(cons.size());
    dist[t] = (mean_lib - mean_cons).norm();
  }
  truth.planted_distance_pct.resize(bins);
  for (int t = 0; t < bins; ++t) {
    truth.planted_distance_pct[t] = 100.0 * (dist[t] - dist[0]) / dist[0];
  }
  return truth;
}

void write_fixture_files(const SynthTruth& truth,
                         const std::filesystem::path& events_file,
                         const std::filesystem::path& edges_file,
                         const std::filesystem::path& labels_file) {
  const auto& obs = truth.observations;
  {
    std::ofstream out(events_file);
    if (!out) throw DataError("cannot write file: " + events_file.string());
    for (int t = 0; t < obs.num_bins(); ++t) {
      const std::int64_t ts = static_cast<std::int64_t>(t) * truth.config.bin_width;
      for (const auto& [i, j] : obs.bins[t].coords) {
        out << obs.user_index[j] << '\t' << obs.website_index[i] << '\t' << ts << '\n';
      }
    }
    if (!out) throw DataError("write failed: " + events_file.string());
  }
  {
    std::ofstream out(edges_file);
    if (!out) throw DataError("cannot write file: " + edges_file.string());
    for (const auto& [a, b] : truth.graph.edges) {
      out << obs.user_index[a] << '\t' << obs.user_index[b] << '\n';
    }
    if (!out) throw DataError("write failed: " + edges_file.string());
  }
  {
    std::ofstream out(labels_file);
    if (!out) throw DataError("cannot write file: " + labels_file.string());
    for (int i = 0; i < obs.num_websites(); ++i) {
      out << obs.website_index[i] << '\t' << (truth.website_cluster[i] == 1 ? 2 : -2)
          << '\n';
    }
    if (!out) throw DataError("write failed: " + labels_file.string());
  }
}

}  // namespace ideotrace
