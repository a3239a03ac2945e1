#include "ideotrace/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <tuple>

#include "ideotrace/rng.hpp"
#include "ideotrace/stats.hpp"

namespace ideotrace {

void AdamConfig::validate() const {
  if (learning_rate <= 0) throw std::invalid_argument("adam: learning_rate must be > 0");
  if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1)) {
    throw std::invalid_argument("adam: beta1, beta2 must be in (0, 1)");
  }
  if (epsilon <= 0) throw std::invalid_argument("adam: epsilon must be > 0");
  if (max_epochs < 0) throw std::invalid_argument("adam: max_epochs must be >= 0");
  if (tolerance < 0) throw std::invalid_argument("adam: tolerance must be >= 0");
  if (patience < 1) throw std::invalid_argument("adam: patience must be >= 1");
}

ModelState init_state(int n_websites, int n_users, int latent_dim, int n_steps,
                      std::uint64_t seed) {
  if (n_websites < 1 || n_users < 1 || latent_dim < 1 || n_steps < 0) {
    throw std::invalid_argument("init_state: dimensions must be positive");
  }
  Rng rng(seed);
  constexpr double kInitScale = 0.1;
  ModelState state;
  state.W.resize(n_websites, latent_dim);
  for (int i = 0; i < n_websites; ++i) {
    for (int k = 0; k < latent_dim; ++k) state.W(i, k) = rng.normal(0.0, kInitScale);
  }
  const int bins = n_steps + 1;
  state.C.resize(bins);
  for (int t = 0; t < bins; ++t) {
    state.C[t].resize(n_users, latent_dim);
    for (int j = 0; j < n_users; ++j) {
      for (int k = 0; k < latent_dim; ++k) state.C[t](j, k) = rng.normal(0.0, kInitScale);
    }
  }
  state.mu.assign(bins, Eigen::VectorXd::Zero(n_websites));
  state.nu.assign(bins, Eigen::VectorXd::Zero(n_users));
  return state;
}

void adam_step(double* param, const double* grad, double* m, double* v,
               std::size_t n, long step, const AdamConfig& cfg) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t k = 0; k < n; ++k) {
    const double g = grad[k];
    if (!std::isfinite(g)) throw DivergedError("diverged gradient");
    m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
    v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = m[k] / bc1;
    const double v_hat = v[k] / bc2;
    param[k] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

namespace {

struct Moments {
  Eigen::MatrixXd mW, vW;
  std::vector<Eigen::MatrixXd> mC, vC;
  std::vector<Eigen::VectorXd> m_mu, v_mu, m_nu, v_nu;

  explicit Moments(const ModelState& s) {
    mW = Eigen::MatrixXd::Zero(s.W.rows(), s.W.cols());
    vW = mW;
    for (const auto& c : s.C) {
      mC.push_back(Eigen::MatrixXd::Zero(c.rows(), c.cols()));
      vC.push_back(Eigen::MatrixXd::Zero(c.rows(), c.cols()));
    }
    for (const auto& m : s.mu) {
      m_mu.push_back(Eigen::VectorXd::Zero(m.size()));
      v_mu.push_back(Eigen::VectorXd::Zero(m.size()));
    }
    for (const auto& n : s.nu) {
      m_nu.push_back(Eigen::VectorXd::Zero(n.size()));
      v_nu.push_back(Eigen::VectorXd::Zero(n.size()));
    }
  }
};

void step_tensor(Eigen::MatrixXd& p, const Eigen::MatrixXd& g, Eigen::MatrixXd& m,
                 Eigen::MatrixXd& v, long step, const AdamConfig& cfg) {
  adam_step(p.data(), g.data(), m.data(), v.data(), static_cast<std::size_t>(p.size()),
            step, cfg);
}

void step_tensor(Eigen::VectorXd& p, const Eigen::VectorXd& g, Eigen::VectorXd& m,
                 Eigen::VectorXd& v, long step, const AdamConfig& cfg) {
  adam_step(p.data(), g.data(), m.data(), v.data(), static_cast<std::size_t>(p.size()),
            step, cfg);
}

}  // namespace

TrainReport train(const TimeBinnedObservations& obs, const SocialGraph& graph,
                  const Hyperparameters& hp, const AdamConfig& adam,
                  const TrainOptions& options) {
  hp.validate();
  adam.validate();

  ModelState state = options.initial_state
                         ? *options.initial_state
                         : init_state(obs.num_websites(), obs.num_users(),
                                      hp.latent_dim, obs.num_steps(), adam.seed);
  Moments mo(state);
  const int bins = state.num_bins();

  TrainReport report;
  report.loss_trace.push_back(loss(state, obs, graph, hp, options.mask).total);

  ModelState last_finite = state;
  int calm_epochs = 0;
  for (int epoch = 1; epoch <= adam.max_epochs; ++epoch) {
    try {
      GradientSet g = gradients(state, obs, graph, hp, options.mask);
      if (!options.freeze_W) step_tensor(state.W, g.W, mo.mW, mo.vW, epoch, adam);
      for (int t = 0; t < bins; ++t) {
        step_tensor(state.C[t], g.C[t], mo.mC[t], mo.vC[t], epoch, adam);
      }
      if (!options.freeze_mu) {
        for (int t = 0; t < bins; ++t) {
          step_tensor(state.mu[t], g.mu[t], mo.m_mu[t], mo.v_mu[t], epoch, adam);
        }
      }
      for (int t = 0; t < bins; ++t) {
        step_tensor(state.nu[t], g.nu[t], mo.m_nu[t], mo.v_nu[t], epoch, adam);
      }
    } catch (const DivergedError& e) {
      throw TrainDiverged(e.what(), std::move(last_finite));
    }

    double current = std::numeric_limits<double>::quiet_NaN();
    if (state.all_finite()) current = loss(state, obs, graph, hp, options.mask).total;
    if (!std::isfinite(current)) {
      throw TrainDiverged("diverged loss", std::move(last_finite));
    }
    last_finite = state;

    const double prev = report.loss_trace.back();
    report.loss_trace.push_back(current);
    report.epochs_run = epoch;

    const double rel_change = std::abs(current - prev) / std::max(std::abs(prev), 1e-12);
    calm_epochs = rel_change < adam.tolerance ? calm_epochs + 1 : 0;
    if (calm_epochs >= adam.patience) {
      report.converged = true;
      break;
    }
  }
  report.final_state = std::move(state);
  return report;
}

namespace {

// Deterministic sample of `count` distinct negative (unshared) cells of one
// observation set, avoiding `taken`.
std::vector<std::tuple<int, int, int>> sample_negative_cells(
    const TimeBinnedObservations& obs, std::size_t count, Rng& rng,
    std::set<std::tuple<int, int, int>>& taken) {
  const int bins = obs.num_bins(), m = obs.num_websites(), n = obs.num_users();
  std::vector<std::tuple<int, int, int>> picked;
  picked.reserve(count);
  std::size_t guard = 0;
  const std::size_t guard_limit = 1000 * (count + 1);
  while (picked.size() < count) {
    if (++guard > guard_limit) throw DataError("fold too sparse");
    int t = rng.uniform_int(bins);
    int i = rng.uniform_int(m);
    int j = rng.uniform_int(n);
    if (obs.bins[t].contains(i, j)) continue;
    auto cell = std::make_tuple(t, i, j);
    if (!taken.insert(cell).second) continue;
    picked.push_back(cell);
  }
  return picked;
}

}  // namespace

CrossValidationResult cross_validate(const TimeBinnedObservations& obs,
                                     const SocialGraph& graph,
                                     const std::vector<Hyperparameters>& grid,
                                     int folds, std::uint64_t seed,
                                     const AdamConfig& adam) {
  if (folds < 2) throw std::invalid_argument("cross_validate: folds must be >= 2");
  if (grid.empty()) throw std::invalid_argument("cross_validate: empty grid");
  for (const auto& hp : grid) hp.validate();

  const int bins = obs.num_bins();

  // All positive cells, bin-major, shuffled once.
  std::vector<std::tuple<int, int, int>> positives;
  for (int t = 0; t < bins; ++t) {
    for (const auto& [i, j] : obs.bins[t].coords) positives.emplace_back(t, i, j);
  }
  Rng fold_rng(derive_seed(seed, 0));
  fold_rng.shuffle(positives);

  struct Fold {
    CellMask mask;
    std::vector<std::tuple<int, int, int>> cells;  // (t, i, j)
    std::vector<int> truth;
  };
  std::vector<Fold> fold_sets(folds);
  const std::size_t total = positives.size();
  for (int f = 0; f < folds; ++f) {
    const std::size_t lo = total * f / folds;
    const std::size_t hi = total * (f + 1) / folds;
    if (lo == hi) throw DataError("fold too sparse");
    std::set<std::tuple<int, int, int>> taken(positives.begin() + lo,
                                              positives.begin() + hi);
    Fold& fold = fold_sets[f];
    for (std::size_t k = lo; k < hi; ++k) {
      fold.cells.push_back(positives[k]);
      fold.truth.push_back(1);
    }
    auto negatives = sample_negative_cells(obs, hi - lo, fold_rng, taken);
    for (const auto& cell : negatives) {
      fold.cells.push_back(cell);
      fold.truth.push_back(0);
    }
    fold.mask.cells.resize(bins);
    for (const auto& [t, i, j] : fold.cells) fold.mask.cells[t].emplace_back(i, j);
    for (auto& per_bin : fold.mask.cells) std::sort(per_bin.begin(), per_bin.end());
  }

  CrossValidationResult result;
  result.mean_f1.reserve(grid.size());
  double best_score = -1.0;
  std::size_t best_idx = 0;
  auto tie_key = [](const Hyperparameters& hp) {
    return std::make_tuple(hp.gamma, hp.lambda, hp.tau, hp.beta);
  };

  for (std::size_t cell = 0; cell < grid.size(); ++cell) {
    double f1_sum = 0;
    for (int f = 0; f < folds; ++f) {
      AdamConfig fold_adam = adam;
      fold_adam.seed = derive_seed(seed, static_cast<std::uint64_t>(f) + 1);
      TrainOptions opts;
      opts.mask = &fold_sets[f].mask;
      TrainReport fit = train(obs, graph, grid[cell], fold_adam, opts);

      std::vector<int> predicted;
      predicted.reserve(fold_sets[f].cells.size());
      for (const auto& [t, i, j] : fold_sets[f].cells) {
        predicted.push_back(share_probability(fit.final_state, t, i, j) >= 0.5 ? 1 : 0);
      }
      f1_sum += f1_score(predicted, fold_sets[f].truth);
    }
    const double mean_f1 = f1_sum / folds;
    result.mean_f1.push_back(mean_f1);
    if (mean_f1 > best_score ||
        (mean_f1 == best_score && tie_key(grid[cell]) < tie_key(grid[best_idx]))) {
      best_score = mean_f1;
      best_idx = cell;
    }
  }
  result.best = grid[best_idx];
  return result;
}

}  // namespace ideotrace
