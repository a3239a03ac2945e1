#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <vector>

#include "ideotrace/errors.hpp"
#include "ideotrace/interaction_data.hpp"

namespace ideotrace {

/// Model hyperparameters. beta is the positive-label weight (> 1); gamma,
/// lambda and tau control the L2, graph and temporal penalties.
struct Hyperparameters {
  int latent_dim = 2;   // K
  double beta = 2.0;    // weight on observed shares
  double gamma = 0.0;   // L2
  double lambda = 0.0;  // graph penalty
  double tau = 0.0;     // temporal penalty

  void validate() const;  // throws std::invalid_argument
};

/// All learned parameters: time-invariant website ideology W, per-bin user
/// ideology C^t, and per-bin popularity/activity biases mu^t, nu^t.
struct ModelState {
  Eigen::MatrixXd W;                  // M x K
  std::vector<Eigen::MatrixXd> C;     // T+1 matrices, N x K
  std::vector<Eigen::VectorXd> mu;    // T+1 vectors, size M
  std::vector<Eigen::VectorXd> nu;    // T+1 vectors, size N

  int num_websites() const { return static_cast<int>(W.rows()); }
  int num_users() const { return C.empty() ? 0 : static_cast<int>(C[0].rows()); }
  int latent_dim() const { return static_cast<int>(W.cols()); }
  int num_bins() const { return static_cast<int>(C.size()); }

  bool all_finite() const;

  /// Text checkpoint, header "IDEOTRACE-MODEL v1", 17 significant digits
  /// (round-trip exact for doubles).
  void save(const std::filesystem::path& path) const;
  static ModelState load(const std::filesystem::path& path);
};

/// Gradients of the loss, same shapes as ModelState.
struct GradientSet {
  Eigen::MatrixXd W;
  std::vector<Eigen::MatrixXd> C;
  std::vector<Eigen::VectorXd> mu;
  std::vector<Eigen::VectorXd> nu;

  bool all_finite() const;
};

/// Diagnostic decomposition of the training loss into its five terms.
struct LossBreakdown {
  double total = 0;
  double nll = 0;
  double l2_w = 0;
  double l2_c = 0;
  double graph = 0;
  double temporal = 0;
};

/// Cells excluded from the NLL (held out for validation), one sorted
/// coordinate list per bin. Penalty terms are unaffected.
struct CellMask {
  std::vector<std::vector<std::pair<int, int>>> cells;

  bool empty() const;
  static CellMask none(int n_bins);
};

/// Numerically stable inverse logit, 1/(1+exp(-x)), sign-split so the
/// small-probability side keeps full relative precision down to x = -700.
double logistic(double x);

/// log(1 + exp(x)) without overflow; -log logistic(x) == softplus(-x).
double softplus(double x);

/// Phi(w_i . c_j^t + mu_i^t + nu_j^t). Throws std::out_of_range on bad
/// indices.
double share_probability(const ModelState& state, int t, int i, int j);

/// Bernoulli likelihood of observing y under the given logit:
/// Phi(logit) when y = 1, Phi(-logit) when y = 0.
double observation_likelihood(int y, double logit);

/// Dense M x N logit matrix for one bin.
Eigen::MatrixXd bin_logits(const ModelState& state, int t);

/// Weighted negative log-likelihood plus the L2, graph and temporal
/// penalties. Positive cells carry weight beta, negative cells weight 1.
/// Throws DivergedError("diverged state") if the state is non-finite.
LossBreakdown loss(const ModelState& state, const TimeBinnedObservations& obs,
                   const SocialGraph& graph, const Hyperparameters& hp,
                   const CellMask* mask = nullptr);

/// Analytic gradients of loss() with respect to every parameter.
GradientSet gradients(const ModelState& state, const TimeBinnedObservations& obs,
                      const SocialGraph& graph, const Hyperparameters& hp,
                      const CellMask* mask = nullptr);

}  // namespace ideotrace
