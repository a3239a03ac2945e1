#pragma once

#include <cstdint>
#include <vector>

#include "ideotrace/baselines.hpp"
#include "ideotrace/model.hpp"
#include "ideotrace/stats.hpp"

namespace ideotrace {

/// One-dimensional PCA of the rows of X. scores = centered rows projected
/// on the unit top eigenvector of the sample covariance; the component's
/// largest-magnitude coordinate is made positive. Throws
/// DataError("degenerate spectrum") on zero-variance input.
struct PcaProjection {
  Eigen::VectorXd scores;          // one per row of X
  Eigen::VectorXd component;       // unit vector, size K
  double eigenvalue = 0;           // top eigenvalue of the covariance
  Eigen::RowVectorXd mean;         // row mean used for centering
};

PcaProjection pca_project(const Eigen::MatrixXd& X);

/// Project an arbitrary row onto a fitted axis.
double pca_score(const PcaProjection& pca, const Eigen::RowVectorXd& row);

/// Per-user mean of PCA-projected website scores over the websites the user
/// shared: one vector per bin plus the pooled (union across bins) value.
/// Users with no shares in a bin get NaN there.
struct UserGroundTruth {
  std::vector<Eigen::VectorXd> per_bin;  // T+1 vectors of size N
  Eigen::VectorXd pooled;                // size N
  Eigen::VectorXd website_scores;        // size M, the W projection
};

UserGroundTruth derive_user_ground_truth(const Eigen::MatrixXd& W,
                                         const TimeBinnedObservations& obs);

/// Copy the pooled scores into a LabelSet's user map, keyed by user id.
void populate_user_ground_truth(LabelSet& labels, const UserGroundTruth& gt,
                                const std::vector<std::string>& user_index);

/// Two-cluster Lloyd's algorithm with farthest-point seeding, 20 restarts,
/// best within-cluster sum of squares kept. Restarts that empty a cluster
/// are abandoned. Throws DataError("degenerate clustering") when all points
/// coincide.
struct KMeansResult {
  std::vector<int> assignment;        // 0/1 per point
  Eigen::MatrixXd centroids;          // 2 x K
  double objective = 0;               // within-cluster sum of squares
  std::vector<double> objective_trace;  // per Lloyd iteration, winning restart
};

KMeansResult kmeans2(const Eigen::MatrixXd& points, std::uint64_t seed);

/// Polarization summary over time. Cluster 0 is liberal (lower mean
/// ground-truth score), cluster 1 conservative. distance_pct is the
/// percentage increase of the inter-cluster mean distance relative to t=0;
/// the shift arrays measure each cluster's 1-D movement away from the t=0
/// global center as a percentage of its initial offset. The paired t-tests
/// compare per-user projected ideology at t=0 vs t=T within each cluster;
/// p-values are NaN when T=0 or the differences are degenerate.
struct PolarizationTrace {
  std::vector<int> cluster_assignment;  // 0 = liberal, 1 = conservative
  std::vector<double> distance_pct;
  std::vector<double> lib_shift_pct;
  std::vector<double> cons_shift_pct;
  double t_stat_lib = 0, t_stat_cons = 0;
  double t_test_p_lib = 0, t_test_p_cons = 0;
};

/// assignment comes from kmeans2 on C^0; user_ground_truth (index-aligned)
/// resolves which cluster is liberal. Throws
/// DataError("coincident clusters at t=0") when the initial distance is 0.
PolarizationTrace polarization_trace(const std::vector<Eigen::MatrixXd>& C_list,
                                     const std::vector<int>& assignment,
                                     const Eigen::VectorXd& user_ground_truth);

/// Restrict observations to a subset of users (indices into user_index),
/// keeping the website universe.
TimeBinnedObservations subset_users(const TimeBinnedObservations& obs,
                                    const std::vector<int>& users);

/// Induced subgraph on the given users, reindexed to 0..n-1.
SocialGraph induced_subgraph(const SocialGraph& graph,
                             const std::vector<int>& users);

struct PredictionScores {
  std::vector<double> per_bin;  // F1 at each prediction bin
  double pooled = 0;            // micro-averaged over all bins
};

/// Held-out-user prediction protocol. W and {mu^t} stay frozen at the
/// trained values. At t=0 validation users take the training means of C^0
/// and nu^0; for t_pred > 0 their C and nu are fit on bins t < t_pred and
/// bin t_pred is scored by F1 at the threshold.
PredictionScores predict_unobserved_users(const ModelState& trained,
                                          const TimeBinnedObservations& obs_val,
                                          const SocialGraph& graph_val,
                                          const Hyperparameters& hp,
                                          const AdamConfig& adam,
                                          double threshold = 0.5);

/// Rasch analogue: alpha and mu frozen, nu fit on the pooled bins t < t_pred.
PredictionScores predict_unobserved_users_rasch(
    const RaschState& trained, const TimeBinnedObservations& obs_val,
    const AdamConfig& adam, double threshold = 0.5);

/// Static-MF analogue: W and mu frozen, the shared C and per-bin nu fit on
/// bins t < t_pred.
PredictionScores predict_unobserved_users_static(
    const StaticMFState& trained, const TimeBinnedObservations& obs_val,
    const Hyperparameters& hp, const AdamConfig& adam, double threshold = 0.5);

}  // namespace ideotrace
