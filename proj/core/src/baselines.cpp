#include "ideotrace/baselines.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "ideotrace/rng.hpp"
#include "serialize_util.hpp"

namespace ideotrace {

double rasch_probability(const RaschState& state, int i, int j) {
  if (i < 0 || i >= state.mu.size()) throw std::out_of_range("website index");
  if (j < 0 || j >= state.nu.size()) throw std::out_of_range("user index");
  return logistic(state.alpha * (state.mu[i] - state.nu[j]));
}

namespace {

double nll_from_logits(const Eigen::MatrixXd& Z, const SparseBinary& positives) {
  double nll = (Z.array().max(0.0) + (-Z.array().abs()).exp().log1p()).sum();
  for (const auto& [i, j] : positives.coords) {
    double z = Z(i, j);
    nll += softplus(-z) - softplus(z);
  }
  return nll;
}

bool rasch_finite(const RaschState& s) {
  return std::isfinite(s.alpha) && s.mu.allFinite() && s.nu.allFinite();
}

}  // namespace

RaschReport train_rasch(const TimeBinnedObservations& obs, const AdamConfig& adam,
                        const RaschOptions& options) {
  adam.validate();
  const int m = obs.num_websites(), n = obs.num_users();
  SparseBinary pooled = obs.pooled();
  if (pooled.nnz() == 0) throw DataError("degenerate all-negative data");

  RaschState state;
  if (options.initial_state) {
    state = *options.initial_state;
  } else {
    state.alpha = 1.0;
    state.mu = Eigen::VectorXd::Zero(m);
    state.nu = Eigen::VectorXd::Zero(n);
  }

  auto logits = [&]() {
    Eigen::MatrixXd Z(m, n);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) Z(i, j) = state.alpha * (state.mu[i] - state.nu[j]);
    }
    return Z;
  };

  RaschReport report;
  report.loss_trace.push_back(nll_from_logits(logits(), pooled));

  double m_alpha = 0, v_alpha = 0;
  Eigen::VectorXd m_mu = Eigen::VectorXd::Zero(m), v_mu = m_mu;
  Eigen::VectorXd m_nu = Eigen::VectorXd::Zero(n), v_nu = m_nu;

  RaschState last_finite = state;
  int calm_epochs = 0;
  for (int epoch = 1; epoch <= adam.max_epochs; ++epoch) {
    Eigen::MatrixXd R = logits();
    R = R.unaryExpr([](double z) { return logistic(z); });
    for (const auto& [i, j] : pooled.coords) R(i, j) -= 1.0;

    double g_alpha = 0;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) g_alpha += R(i, j) * (state.mu[i] - state.nu[j]);
    }
    Eigen::VectorXd g_mu = state.alpha * R.rowwise().sum();
    Eigen::VectorXd g_nu = -state.alpha * R.colwise().sum().transpose();

    try {
      if (!options.freeze_alpha) {
        adam_step(&state.alpha, &g_alpha, &m_alpha, &v_alpha, 1, epoch, adam);
      }
      if (!options.freeze_mu) {
        adam_step(state.mu.data(), g_mu.data(), m_mu.data(), v_mu.data(),
                  static_cast<std::size_t>(m), epoch, adam);
      }
      adam_step(state.nu.data(), g_nu.data(), m_nu.data(), v_nu.data(),
                static_cast<std::size_t>(n), epoch, adam);
    } catch (const DivergedError& e) {
      throw RaschDiverged(e.what(), std::move(last_finite));
    }

    double current = std::numeric_limits<double>::quiet_NaN();
    if (rasch_finite(state)) current = nll_from_logits(logits(), pooled);
    if (!std::isfinite(current)) {
      throw RaschDiverged("diverged loss", std::move(last_finite));
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

struct StaticLoss {
  double total = 0, nll = 0, l2_w = 0, l2_c = 0;
};

StaticLoss static_loss(const StaticMFState& s, const TimeBinnedObservations& obs,
                       const Hyperparameters& hp) {
  StaticLoss out;
  for (int t = 0; t < obs.num_bins(); ++t) {
    Eigen::MatrixXd Z = s.W * s.C.transpose();
    Z.colwise() += s.mu[t];
    Z.rowwise() += s.nu[t].transpose();
    double nll_t = (Z.array().max(0.0) + (-Z.array().abs()).exp().log1p()).sum();
    for (const auto& [i, j] : obs.bins[t].coords) {
      double z = Z(i, j);
      nll_t += hp.beta * softplus(-z) - softplus(z);
    }
    out.nll += nll_t;
    out.l2_c += 0.5 * hp.gamma * s.C.squaredNorm();
  }
  out.l2_w = 0.5 * hp.gamma * s.W.squaredNorm();
  out.total = out.nll + out.l2_w + out.l2_c;
  return out;
}

bool static_finite(const StaticMFState& s) {
  if (!s.W.allFinite() || !s.C.allFinite()) return false;
  for (const auto& v : s.mu)
    if (!v.allFinite()) return false;
  for (const auto& v : s.nu)
    if (!v.allFinite()) return false;
  return true;
}

}  // namespace

StaticMFReport train_static_mf(const TimeBinnedObservations& obs,
                               const Hyperparameters& hp, const AdamConfig& adam,
                               const StaticMFOptions& options) {
  hp.validate();
  adam.validate();
  const int m = obs.num_websites(), n = obs.num_users(), bins = obs.num_bins();

  StaticMFState state;
  if (options.initial_state) {
    state = *options.initial_state;
  } else {
    // Same draw order as init_state with T=0: W row-major, then C row-major.
    ModelState seeded = init_state(m, n, hp.latent_dim, 0, adam.seed);
    state.W = std::move(seeded.W);
    state.C = std::move(seeded.C[0]);
    state.mu.assign(bins, Eigen::VectorXd::Zero(m));
    state.nu.assign(bins, Eigen::VectorXd::Zero(n));
  }

  StaticMFReport report;
  report.loss_trace.push_back(static_loss(state, obs, hp).total);

  Eigen::MatrixXd mW = Eigen::MatrixXd::Zero(m, hp.latent_dim), vW = mW;
  Eigen::MatrixXd mC = Eigen::MatrixXd::Zero(n, hp.latent_dim), vC = mC;
  std::vector<Eigen::VectorXd> m_mu(bins, Eigen::VectorXd::Zero(m)), v_mu = m_mu;
  std::vector<Eigen::VectorXd> m_nu(bins, Eigen::VectorXd::Zero(n)), v_nu = m_nu;

  StaticMFState last_finite = state;
  int calm_epochs = 0;
  for (int epoch = 1; epoch <= adam.max_epochs; ++epoch) {
    Eigen::MatrixXd gW = Eigen::MatrixXd::Zero(m, hp.latent_dim);
    Eigen::MatrixXd gC;
    std::vector<Eigen::VectorXd> g_mu(bins), g_nu(bins);
    for (int t = 0; t < bins; ++t) {
      Eigen::MatrixXd R = state.W * state.C.transpose();
      R.colwise() += state.mu[t];
      R.rowwise() += state.nu[t].transpose();
      R = R.unaryExpr([](double z) { return logistic(z); });
      for (const auto& [i, j] : obs.bins[t].coords) {
        R(i, j) = hp.beta * (R(i, j) - 1.0);
      }
      gW.noalias() += R * state.C;
      if (t == 0) {
        gC = R.transpose() * state.W;
      } else {
        gC.noalias() += R.transpose() * state.W;
      }
      gC.noalias() += hp.gamma * state.C;
      g_mu[t] = R.rowwise().sum();
      g_nu[t] = R.colwise().sum().transpose();
    }
    gW.noalias() += hp.gamma * state.W;

    try {
      if (!options.freeze_W) {
        adam_step(state.W.data(), gW.data(), mW.data(), vW.data(),
                  static_cast<std::size_t>(state.W.size()), epoch, adam);
      }
      adam_step(state.C.data(), gC.data(), mC.data(), vC.data(),
                static_cast<std::size_t>(state.C.size()), epoch, adam);
      if (!options.freeze_mu) {
        for (int t = 0; t < bins; ++t) {
          adam_step(state.mu[t].data(), g_mu[t].data(), m_mu[t].data(),
                    v_mu[t].data(), static_cast<std::size_t>(m), epoch, adam);
        }
      }
      for (int t = 0; t < bins; ++t) {
        adam_step(state.nu[t].data(), g_nu[t].data(), m_nu[t].data(),
                  v_nu[t].data(), static_cast<std::size_t>(n), epoch, adam);
      }
    } catch (const DivergedError& e) {
      throw StaticMFDiverged(e.what(), std::move(last_finite));
    }

    double current = std::numeric_limits<double>::quiet_NaN();
    if (static_finite(state)) current = static_loss(state, obs, hp).total;
    if (!std::isfinite(current)) {
      throw StaticMFDiverged("diverged loss", std::move(last_finite));
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

// ---------------------------------------------------------------------------
// Serialization

void RaschState::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << "IDEOTRACE-RASCH v1\n";
  out << mu.size() << '\t' << nu.size() << '\n';
  detail::write_vector(out, Eigen::VectorXd::Constant(1, alpha));
  detail::write_vector(out, mu);
  detail::write_vector(out, nu);
  if (!out) throw DataError("write failed: " + path.string());
}

RaschState RaschState::load(const std::filesystem::path& path) {
  detail::CheckpointReader r(path);
  if (r.line() != "IDEOTRACE-RASCH v1") {
    throw DataError(path.string() + ": not an IDEOTRACE-RASCH v1 file");
  }
  auto dims = r.row(2);
  const auto m = static_cast<Eigen::Index>(dims[0]);
  const auto n = static_cast<Eigen::Index>(dims[1]);
  if (m <= 0 || n <= 0) throw DataError(path.string() + ": bad dimensions");
  RaschState s;
  s.alpha = r.vector(1)[0];
  s.mu = r.vector(m);
  s.nu = r.vector(n);
  return s;
}

void StaticMFState::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << "IDEOTRACE-SMF v1\n";
  out << W.rows() << '\t' << C.rows() << '\t' << W.cols() << '\t'
      << num_bins() - 1 << '\n';
  detail::write_matrix(out, W);
  detail::write_matrix(out, C);
  for (const auto& v : mu) detail::write_vector(out, v);
  for (const auto& v : nu) detail::write_vector(out, v);
  if (!out) throw DataError("write failed: " + path.string());
}

StaticMFState StaticMFState::load(const std::filesystem::path& path) {
  detail::CheckpointReader r(path);
  if (r.line() != "IDEOTRACE-SMF v1") {
    throw DataError(path.string() + ": not an IDEOTRACE-SMF v1 file");
  }
  auto dims = r.row(4);
  const auto m = static_cast<Eigen::Index>(dims[0]);
  const auto n = static_cast<Eigen::Index>(dims[1]);
  const auto k = static_cast<Eigen::Index>(dims[2]);
  const auto steps = static_cast<Eigen::Index>(dims[3]);
  if (m <= 0 || n <= 0 || k <= 0 || steps < 0) {
    throw DataError(path.string() + ": bad dimensions");
  }
  StaticMFState s;
  s.W = r.matrix(m, k);
  s.C = r.matrix(n, k);
  for (Eigen::Index t = 0; t <= steps; ++t) s.mu.push_back(r.vector(m));
  for (Eigen::Index t = 0; t <= steps; ++t) s.nu.push_back(r.vector(n));
  return s;
}

}  // namespace ideotrace
