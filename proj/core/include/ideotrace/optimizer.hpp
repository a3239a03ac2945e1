#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ideotrace/model.hpp"

namespace ideotrace {

struct AdamConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int max_epochs = 2000;
  double tolerance = 1e-6;  // relative loss-change stop threshold
  int patience = 10;        // epochs below tolerance before stopping
  std::uint64_t seed = 0;   // initialization seed

  void validate() const;  // throws std::invalid_argument
};

struct TrainReport {
  int epochs_run = 0;
  std::vector<double> loss_trace;  // entry 0 is the initial loss
  bool converged = false;
  ModelState final_state;
};

/// Divergence during training; carries the last finite state.
class TrainDiverged : public DivergedError {
 public:
  TrainDiverged(const std::string& msg, ModelState last)
      : DivergedError(msg), last_state(std::move(last)) {}
  ModelState last_state;
};

/// W and C^t entries i.i.d. normal(0, 0.1^2); mu^t and nu^t zero.
/// Deterministic given the seed. Draw order: W row-major, then each C^t
/// row-major for t = 0..T.
ModelState init_state(int n_websites, int n_users, int latent_dim,
                      int n_steps, std::uint64_t seed);

/// One Adam update with bias correction over a flat coefficient array.
/// step is 1-based. Throws DivergedError("diverged gradient") on a
/// non-finite gradient entry.
void adam_step(double* param, const double* grad, double* m, double* v,
               std::size_t n, long step, const AdamConfig& cfg);

struct TrainOptions {
  const CellMask* mask = nullptr;
  bool freeze_W = false;
  bool freeze_mu = false;
  std::optional<ModelState> initial_state;  // overrides init_state(seed)
};

/// Full-batch Adam on the training loss until the relative loss change
/// stays below tolerance for `patience` consecutive epochs, or max_epochs.
/// Deterministic given identical inputs and seed. Throws TrainDiverged on a
/// non-finite loss or gradient.
TrainReport train(const TimeBinnedObservations& obs, const SocialGraph& graph,
                  const Hyperparameters& hp, const AdamConfig& adam,
                  const TrainOptions& options = {});

struct CrossValidationResult {
  Hyperparameters best;
  std::vector<double> mean_f1;  // one entry per grid cell, grid order
};

/// Grid search by held-out entry masking: positives are split into folds;
/// each fold is masked together with an equal-size sample of negatives,
/// trained without them, and scored by F1 at threshold 0.5 on the mask.
/// Best cell = highest mean F1, ties broken by smallest
/// (gamma, lambda, tau, beta) lexicographically; duplicate cells keep the
/// first occurrence. Throws DataError("fold too sparse") if a fold has no
/// positives.
CrossValidationResult cross_validate(const TimeBinnedObservations& obs,
                                     const SocialGraph& graph,
                                     const std::vector<Hyperparameters>& grid,
                                     int folds, std::uint64_t seed,
                                     const AdamConfig& adam);

}  // namespace ideotrace
