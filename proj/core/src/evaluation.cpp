#include "ideotrace/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "ideotrace/rng.hpp"

namespace ideotrace {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

PcaProjection pca_project(const Eigen::MatrixXd& X) {
  if (X.rows() < 2) throw std::invalid_argument("pca: need at least 2 rows");
  if (!X.allFinite()) throw std::invalid_argument("pca: non-finite input");

  PcaProjection out;
  out.mean = X.colwise().mean();
  Eigen::MatrixXd centered = X.rowwise() - out.mean;
  Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(X.rows() - 1);
  if (cov.trace() <= 0.0) throw DataError("degenerate spectrum");

  // Power iteration on the K x K covariance; K is small. Start from the
  // largest-norm column, which lies in the range of cov.
  Eigen::Index start = 0;
  cov.colwise().norm().maxCoeff(&start);
  Eigen::VectorXd v = cov.col(start).normalized();
  for (int iter = 0; iter < 200000; ++iter) {
    Eigen::VectorXd next = cov * v;
    const double norm = next.norm();
    if (norm == 0) break;  // v fell into the nullspace; keep current
    next /= norm;
    const double delta = (next - v).norm();
    v = next;
    if (delta < 1e-15) break;
  }
  // Sign convention: largest-magnitude coordinate positive.
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v[arg] < 0) v = -v;

  out.component = v;
  out.eigenvalue = v.dot(cov * v);
  out.scores = centered * v;
  return out;
}

double pca_score(const PcaProjection& pca, const Eigen::RowVectorXd& row) {
  return (row - pca.mean).dot(pca.component.transpose());
}

UserGroundTruth derive_user_ground_truth(const Eigen::MatrixXd& W,
                                         const TimeBinnedObservations& obs) {
  if (W.rows() != obs.num_websites()) {
    throw std::invalid_argument("ground truth: W/obs website mismatch");
  }
  const int n = obs.num_users();
  UserGroundTruth out;
  out.website_scores = pca_project(W).scores;

  auto mean_scores = [&](const SparseBinary& bin) {
    Eigen::VectorXd result = Eigen::VectorXd::Constant(n, kNaN);
    auto sites = bin.by_user(n);
    for (int j = 0; j < n; ++j) {
      if (sites[j].empty()) continue;
      double sum = 0;
      for (int i : sites[j]) sum += out.website_scores[i];
      result[j] = sum / static_cast<double>(sites[j].size());
    }
    return result;
  };

  out.per_bin.reserve(obs.num_bins());
  for (const auto& bin : obs.bins) out.per_bin.push_back(mean_scores(bin));
  out.pooled = mean_scores(obs.pooled());
  return out;
}

void populate_user_ground_truth(LabelSet& labels, const UserGroundTruth& gt,
                                const std::vector<std::string>& user_index) {
  if (gt.pooled.size() != static_cast<Eigen::Index>(user_index.size())) {
    throw std::invalid_argument("ground truth: user index size mismatch");
  }
  for (std::size_t j = 0; j < user_index.size(); ++j) {
    const double score = gt.pooled[static_cast<Eigen::Index>(j)];
    if (std::isfinite(score)) labels.user_ground_truth[user_index[j]] = score;
  }
}

KMeansResult kmeans2(const Eigen::MatrixXd& points, std::uint64_t seed) {
  const int n = static_cast<int>(points.rows());
  if (n < 2) throw std::invalid_argument("kmeans2: need at least 2 points");
  if (!points.allFinite()) throw std::invalid_argument("kmeans2: non-finite input");
  bool all_same = true;
  for (int i = 1; i < n && all_same; ++i) {
    all_same = (points.row(i) - points.row(0)).squaredNorm() == 0.0;
  }
  if (all_same) throw DataError("degenerate clustering");

  constexpr int kRestarts = 20;
  constexpr int kMaxIters = 100;
  Rng rng(seed);

  KMeansResult best;
  best.objective = std::numeric_limits<double>::infinity();
  bool found = false;

  for (int restart = 0; restart < kRestarts; ++restart) {
    Eigen::MatrixXd centroids(2, points.cols());
    centroids.row(0) = points.row(rng.uniform_int(n));
    // Farthest point from the first centroid, ties to the lowest index.
    double best_dist = -1;
    int far = 0;
    for (int i = 0; i < n; ++i) {
      const double d = (points.row(i) - centroids.row(0)).squaredNorm();
      if (d > best_dist) {
        best_dist = d;
        far = i;
      }
    }
    centroids.row(1) = points.row(far);

    std::vector<int> assignment(n, -1);
    std::vector<double> trace;
    bool abandoned = false;
    for (int iter = 0; iter < kMaxIters; ++iter) {
      std::vector<int> next(n);
      double objective = 0;
      long count1 = 0;
      for (int i = 0; i < n; ++i) {
        const double d0 = (points.row(i) - centroids.row(0)).squaredNorm();
        const double d1 = (points.row(i) - centroids.row(1)).squaredNorm();
        next[i] = d1 < d0 ? 1 : 0;
        count1 += next[i];
        objective += std::min(d0, d1);
      }
      if (count1 == 0 || count1 == n) {
        abandoned = true;  // empty cluster: abandon this restart
        break;
      }
      trace.push_back(objective);
      const bool stable = (next == assignment);
      assignment = std::move(next);
      if (stable) break;
      // Update step: means of the new assignment.
      Eigen::RowVectorXd sum0 = Eigen::RowVectorXd::Zero(points.cols());
      Eigen::RowVectorXd sum1 = sum0;
      for (int i = 0; i < n; ++i) {
        if (assignment[i] == 0) sum0 += points.row(i);
        else sum1 += points.row(i);
      }
      centroids.row(0) = sum0 / static_cast<double>(n - count1);
      centroids.row(1) = sum1 / static_cast<double>(count1);
    }
    if (abandoned || trace.empty()) continue;

    const double objective = trace.back();
    if (!found || objective < best.objective) {
      found = true;
      best.assignment = assignment;
      best.centroids = centroids;
      best.objective = objective;
      best.objective_trace = std::move(trace);
    }
  }
  if (!found) throw DataError("degenerate clustering");
  return best;
}

PolarizationTrace polarization_trace(const std::vector<Eigen::MatrixXd>& C_list,
                                     const std::vector<int>& assignment,
                                     const Eigen::VectorXd& user_ground_truth) {
  if (C_list.empty()) throw std::invalid_argument("trace: empty C list");
  const int bins = static_cast<int>(C_list.size());
  const int n = static_cast<int>(C_list[0].rows());
  const Eigen::Index k = C_list[0].cols();
  if (static_cast<int>(assignment.size()) != n || user_ground_truth.size() != n) {
    throw std::invalid_argument("trace: size mismatch");
  }
  for (const auto& c : C_list) {
    if (c.rows() != n || c.cols() != k) throw std::invalid_argument("trace: ragged C list");
  }

  // Resolve cluster naming: lower mean ground truth = liberal.
  double sum[2] = {0, 0};
  long cnt[2] = {0, 0};
  for (int j = 0; j < n; ++j) {
    if (assignment[j] != 0 && assignment[j] != 1) {
      throw std::invalid_argument("trace: assignment must be 0/1");
    }
    if (std::isfinite(user_ground_truth[j])) {
      sum[assignment[j]] += user_ground_truth[j];
      ++cnt[assignment[j]];
    }
  }
  if (cnt[0] == 0 || cnt[1] == 0) throw std::invalid_argument("trace: empty cluster");
  const int lib_label = (sum[0] / cnt[0] <= sum[1] / cnt[1]) ? 0 : 1;

  PolarizationTrace out;
  out.cluster_assignment.resize(n);
  for (int j = 0; j < n; ++j) {
    out.cluster_assignment[j] = assignment[j] == lib_label ? 0 : 1;
  }
  std::vector<int> lib_users, cons_users;
  for (int j = 0; j < n; ++j) {
    (out.cluster_assignment[j] == 0 ? lib_users : cons_users).push_back(j);
  }

  auto cluster_mean = [&](const Eigen::MatrixXd& C, const std::vector<int>& users) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(k);
    for (int j : users) mean += C.row(j);
    return Eigen::RowVectorXd(mean / static_cast<double>(users.size()));
  };

  // K-dimensional inter-cluster distance series.
  std::vector<double> dist(bins);
  for (int t = 0; t < bins; ++t) {
    dist[t] = (cluster_mean(C_list[t], lib_users) - cluster_mean(C_list[t], cons_users)).norm();
  }
  if (dist[0] == 0) throw DataError("coincident clusters at t=0");
  out.distance_pct.resize(bins);
  for (int t = 0; t < bins; ++t) {
    out.distance_pct[t] = 100.0 * (dist[t] - dist[0]) / dist[0];
  }

  // Common 1-D axis from the stacked {C^t}.
  Eigen::MatrixXd stacked(static_cast<Eigen::Index>(bins) * n, k);
  for (int t = 0; t < bins; ++t) stacked.middleRows(static_cast<Eigen::Index>(t) * n, n) = C_list[t];
  PcaProjection axis = pca_project(stacked);

  // Per-user scores per bin are slices of the stacked projection.
  auto score_at = [&](int t, int j) { return axis.scores[static_cast<Eigen::Index>(t) * n + j]; };

  double g0 = 0;
  for (int j = 0; j < n; ++j) g0 += score_at(0, j);
  g0 /= n;

  auto scalar_mean = [&](int t, const std::vector<int>& users) {
    double s = 0;
    for (int j : users) s += score_at(t, j);
    return s / static_cast<double>(users.size());
  };

  const double m_lib0 = scalar_mean(0, lib_users);
  const double m_cons0 = scalar_mean(0, cons_users);
  const double off_lib = m_lib0 - g0;
  const double off_cons = m_cons0 - g0;
  if (off_lib == 0 || off_cons == 0) throw DataError("degenerate cluster offset at t=0");

  auto away_pct = [](double moved, double offset) {
    const double v = 100.0 * moved * (offset > 0 ? 1.0 : -1.0) / std::abs(offset);
    return v == 0.0 ? 0.0 : v;  // normalize -0
  };
  out.lib_shift_pct.resize(bins);
  out.cons_shift_pct.resize(bins);
  for (int t = 0; t < bins; ++t) {
    out.lib_shift_pct[t] = away_pct(scalar_mean(t, lib_users) - m_lib0, off_lib);
    out.cons_shift_pct[t] = away_pct(scalar_mean(t, cons_users) - m_cons0, off_cons);
  }

  // Paired per-user t=0 vs t=T comparison within each cluster.
  out.t_stat_lib = out.t_stat_cons = kNaN;
  out.t_test_p_lib = out.t_test_p_cons = kNaN;
  if (bins > 1) {
    auto run_test = [&](const std::vector<int>& users, double& t_stat, double& p) {
      std::vector<double> before, after;
      before.reserve(users.size());
      after.reserve(users.size());
      for (int j : users) {
        before.push_back(score_at(0, j));
        after.push_back(score_at(bins - 1, j));
      }
      try {
        PairedTTest res = dependent_t_test(before, after);
        t_stat = res.t;
        p = res.p;
      } catch (const DataError&) {
        // degenerate differences: leave NaN
      }
    };
    run_test(lib_users, out.t_stat_lib, out.t_test_p_lib);
    run_test(cons_users, out.t_stat_cons, out.t_test_p_cons);
  }
  return out;
}

TimeBinnedObservations subset_users(const TimeBinnedObservations& obs,
                                    const std::vector<int>& users) {
  const int n = obs.num_users();
  std::vector<int> remap(n, -1);
  TimeBinnedObservations out;
  out.website_index = obs.website_index;
  out.user_index.reserve(users.size());
  for (std::size_t pos = 0; pos < users.size(); ++pos) {
    const int j = users[pos];
    if (j < 0 || j >= n) throw std::invalid_argument("subset_users: index out of range");
    if (remap[j] != -1) throw std::invalid_argument("subset_users: duplicate index");
    remap[j] = static_cast<int>(pos);
    out.user_index.push_back(obs.user_index[j]);
  }
  out.bins.resize(obs.num_bins());
  for (int t = 0; t < obs.num_bins(); ++t) {
    for (const auto& [i, j] : obs.bins[t].coords) {
      if (remap[j] != -1) out.bins[t].coords.emplace_back(i, remap[j]);
    }
    std::sort(out.bins[t].coords.begin(), out.bins[t].coords.end());
  }
  return out;
}

SocialGraph induced_subgraph(const SocialGraph& graph, const std::vector<int>& users) {
  std::vector<int> remap(graph.n_users, -1);
  for (std::size_t pos = 0; pos < users.size(); ++pos) {
    const int j = users[pos];
    if (j < 0 || j >= graph.n_users) {
      throw std::invalid_argument("induced_subgraph: index out of range");
    }
    remap[j] = static_cast<int>(pos);
  }
  std::vector<std::pair<int, int>> edges;
  for (const auto& [a, b] : graph.edges) {
    if (remap[a] != -1 && remap[b] != -1) edges.emplace_back(remap[a], remap[b]);
  }
  return SocialGraph::from_edges(static_cast<int>(users.size()), std::move(edges));
}

namespace {

TimeBinnedObservations first_bins(const TimeBinnedObservations& obs, int count) {
  TimeBinnedObservations out;
  out.user_index = obs.user_index;
  out.website_index = obs.website_index;
  out.bins.assign(obs.bins.begin(), obs.bins.begin() + count);
  return out;
}

void score_bin(const Eigen::MatrixXd& logits, const SparseBinary& actual,
               double threshold, ConfusionCounts& bin_counts) {
  const double logit_threshold = std::log(threshold / (1.0 - threshold));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      const int predicted = logits(i, j) >= logit_threshold ? 1 : 0;
      const int truth =
          actual.contains(static_cast<int>(i), static_cast<int>(j)) ? 1 : 0;
      bin_counts.add(predicted, truth);
    }
  }
}

void check_threshold(double threshold) {
  if (!(threshold > 0 && threshold < 1)) {
    throw std::invalid_argument("threshold must be in (0, 1)");
  }
}

}  // namespace

PredictionScores predict_unobserved_users(const ModelState& trained,
                                          const TimeBinnedObservations& obs_val,
                                          const SocialGraph& graph_val,
                                          const Hyperparameters& hp,
                                          const AdamConfig& adam, double threshold) {
  check_threshold(threshold);
  if (trained.num_websites() != obs_val.num_websites()) {
    throw DataError("mismatched website index");
  }
  if (trained.num_bins() != obs_val.num_bins()) {
    throw DataError("mismatched bin count");
  }
  if (trained.latent_dim() != hp.latent_dim) {
    throw std::invalid_argument("hp latent_dim differs from trained model");
  }
  const int bins = obs_val.num_bins();
  const int n_val = obs_val.num_users();

  std::vector<Eigen::RowVectorXd> c_bar(bins);
  std::vector<double> nu_bar(bins);
  for (int t = 0; t < bins; ++t) {
    c_bar[t] = trained.C[t].colwise().mean();
    nu_bar[t] = trained.nu[t].mean();
  }

  PredictionScores scores;
  ConfusionCounts pooled;
  for (int t_pred = 0; t_pred < bins; ++t_pred) {
    Eigen::MatrixXd C_pred;
    Eigen::VectorXd nu_pred;
    if (t_pred == 0) {
      C_pred = c_bar[0].replicate(n_val, 1);
      nu_pred = Eigen::VectorXd::Constant(n_val, nu_bar[0]);
    } else {
      ModelState init;
      init.W = trained.W;
      for (int t = 0; t < t_pred; ++t) {
        init.C.push_back(c_bar[t].replicate(n_val, 1));
        init.mu.push_back(trained.mu[t]);
        init.nu.push_back(Eigen::VectorXd::Constant(n_val, nu_bar[t]));
      }
      TrainOptions opts;
      opts.freeze_W = true;
      opts.freeze_mu = true;
      opts.initial_state = std::move(init);
      TrainReport fit = train(first_bins(obs_val, t_pred), graph_val, hp, adam, opts);
      C_pred = fit.final_state.C[t_pred - 1];
      nu_pred = fit.final_state.nu[t_pred - 1];
    }
    Eigen::MatrixXd Z = trained.W * C_pred.transpose();
    Z.colwise() += trained.mu[t_pred];
    Z.rowwise() += nu_pred.transpose();

    ConfusionCounts bin_counts;
    score_bin(Z, obs_val.bins[t_pred], threshold, bin_counts);
    scores.per_bin.push_back(bin_counts.f1());
    pooled.tp += bin_counts.tp;
    pooled.fp += bin_counts.fp;
    pooled.fn += bin_counts.fn;
    pooled.tn += bin_counts.tn;
  }
  scores.pooled = pooled.f1();
  return scores;
}

PredictionScores predict_unobserved_users_rasch(const RaschState& trained,
                                                const TimeBinnedObservations& obs_val,
                                                const AdamConfig& adam,
                                                double threshold) {
  check_threshold(threshold);
  if (trained.mu.size() != obs_val.num_websites()) {
    throw DataError("mismatched website index");
  }
  const int bins = obs_val.num_bins();
  const int n_val = obs_val.num_users();
  const double nu_bar = trained.nu.mean();

  PredictionScores scores;
  ConfusionCounts pooled;
  for (int t_pred = 0; t_pred < bins; ++t_pred) {
    Eigen::VectorXd nu_pred;
    if (t_pred == 0) {
      nu_pred = Eigen::VectorXd::Constant(n_val, nu_bar);
    } else {
      RaschOptions opts;
      opts.freeze_alpha = true;
      opts.freeze_mu = true;
      RaschState init;
      init.alpha = trained.alpha;
      init.mu = trained.mu;
      init.nu = Eigen::VectorXd::Constant(n_val, nu_bar);
      opts.initial_state = std::move(init);
      RaschReport fit = train_rasch(first_bins(obs_val, t_pred), adam, opts);
      nu_pred = fit.final_state.nu;
    }
    Eigen::MatrixXd Z(obs_val.num_websites(), n_val);
    for (int i = 0; i < obs_val.num_websites(); ++i) {
      for (int j = 0; j < n_val; ++j) {
        Z(i, j) = trained.alpha * (trained.mu[i] - nu_pred[j]);
      }
    }
    ConfusionCounts bin_counts;
    score_bin(Z, obs_val.bins[t_pred], threshold, bin_counts);
    scores.per_bin.push_back(bin_counts.f1());
    pooled.tp += bin_counts.tp;
    pooled.fp += bin_counts.fp;
    pooled.fn += bin_counts.fn;
    pooled.tn += bin_counts.tn;
  }
  scores.pooled = pooled.f1();
  return scores;
}

PredictionScores predict_unobserved_users_static(const StaticMFState& trained,
                                                 const TimeBinnedObservations& obs_val,
                                                 const Hyperparameters& hp,
                                                 const AdamConfig& adam,
                                                 double threshold) {
  check_threshold(threshold);
  if (trained.W.rows() != obs_val.num_websites()) {
    throw DataError("mismatched website index");
  }
  if (trained.num_bins() != obs_val.num_bins()) {
    throw DataError("mismatched bin count");
  }
  const int bins = obs_val.num_bins();
  const int n_val = obs_val.num_users();
  const Eigen::RowVectorXd c_bar = trained.C.colwise().mean();

  PredictionScores scores;
  ConfusionCounts pooled;
  for (int t_pred = 0; t_pred < bins; ++t_pred) {
    Eigen::MatrixXd C_pred;
    Eigen::VectorXd nu_pred;
    if (t_pred == 0) {
      C_pred = c_bar.replicate(n_val, 1);
      nu_pred = Eigen::VectorXd::Constant(n_val, trained.nu[0].mean());
    } else {
      StaticMFOptions opts;
      opts.freeze_W = true;
      opts.freeze_mu = true;
      StaticMFState init;
      init.W = trained.W;
      init.C = c_bar.replicate(n_val, 1);
      for (int t = 0; t < t_pred; ++t) {
        init.mu.push_back(trained.mu[t]);
        init.nu.push_back(Eigen::VectorXd::Constant(n_val, trained.nu[t].mean()));
      }
      opts.initial_state = std::move(init);
      StaticMFReport fit = train_static_mf(first_bins(obs_val, t_pred), hp, adam, opts);
      C_pred = fit.final_state.C;
      nu_pred = fit.final_state.nu[t_pred - 1];
    }
    Eigen::MatrixXd Z = trained.W * C_pred.transpose();
    Z.colwise() += trained.mu[t_pred];
    Z.rowwise() += nu_pred.transpose();

    ConfusionCounts bin_counts;
    score_bin(Z, obs_val.bins[t_pred], threshold, bin_counts);
    scores.per_bin.push_back(bin_counts.f1());
    pooled.tp += bin_counts.tp;
    pooled.fp += bin_counts.fp;
    pooled.fn += bin_counts.fn;
    pooled.tn += bin_counts.tn;
  }
  scores.pooled = pooled.f1();
  return scores;
}

}  // namespace ideotrace
