#pragma once

#include <filesystem>
#include <vector>

#include "ideotrace/optimizer.hpp"

namespace ideotrace {

/// Rasch (1PL item response) model: p(y_ij = 1) = Phi(alpha (mu_i - nu_j)).
struct RaschState {
  double alpha = 1.0;
  Eigen::VectorXd mu;  // size M
  Eigen::VectorXd nu;  // size N

  void save(const std::filesystem::path& path) const;  // IDEOTRACE-RASCH v1
  static RaschState load(const std::filesystem::path& path);
};

struct RaschReport {
  int epochs_run = 0;
  std::vector<double> loss_trace;
  bool converged = false;
  RaschState final_state;
};

class RaschDiverged : public DivergedError {
 public:
  RaschDiverged(const std::string& msg, RaschState last)
      : DivergedError(msg), last_state(std::move(last)) {}
  RaschState last_state;
};

double rasch_probability(const RaschState& state, int i, int j);

struct RaschOptions {
  bool freeze_alpha = false;
  bool freeze_mu = false;
  std::optional<RaschState> initial_state;
};

/// Fit the Rasch model by Adam on the unweighted Bernoulli NLL over the
/// pooled observations (value 1 if shared in any bin). alpha starts at 1,
/// biases at 0. Throws DataError("degenerate all-negative data") when the
/// pooled matrix has no positives.
RaschReport train_rasch(const TimeBinnedObservations& obs, const AdamConfig& adam,
                        const RaschOptions& options = {});

/// Static matrix factorization: the full model with lambda = 0 and a single
/// time-invariant C shared by every bin; biases stay per-bin.
struct StaticMFState {
  Eigen::MatrixXd W;                // M x K
  Eigen::MatrixXd C;                // N x K
  std::vector<Eigen::VectorXd> mu;  // per bin, size M
  std::vector<Eigen::VectorXd> nu;  // per bin, size N

  int num_bins() const { return static_cast<int>(mu.size()); }

  void save(const std::filesystem::path& path) const;  // IDEOTRACE-SMF v1
  static StaticMFState load(const std::filesystem::path& path);
};

struct StaticMFReport {
  int epochs_run = 0;
  std::vector<double> loss_trace;
  bool converged = false;
  StaticMFState final_state;
};

class StaticMFDiverged : public DivergedError {
 public:
  StaticMFDiverged(const std::string& msg, StaticMFState last)
      : DivergedError(msg), last_state(std::move(last)) {}
  StaticMFState last_state;
};

struct StaticMFOptions {
  bool freeze_W = false;
  bool freeze_mu = false;
  std::optional<StaticMFState> initial_state;
};

/// Fit the static factorization with the same convergence contract as
/// train(). Initialization draws W then C from adam.seed, matching the
/// full model's draw order so the T=0, lambda=0 runs coincide.
StaticMFReport train_static_mf(const TimeBinnedObservations& obs,
                               const Hyperparameters& hp, const AdamConfig& adam,
                               const StaticMFOptions& options = {});

}  // namespace ideotrace
