#include "ideotrace/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "serialize_util.hpp"

namespace ideotrace {

void Hyperparameters::validate() const {
  if (latent_dim < 1) throw std::invalid_argument("hyperparameters: K must be >= 1");
  if (!(beta > 1.0)) throw std::invalid_argument("hyperparameters: beta must be > 1");
  if (gamma < 0 || lambda < 0 || tau < 0) {
    throw std::invalid_argument("hyperparameters: gamma, lambda, tau must be >= 0");
  }
}

bool ModelState::all_finite() const {
  if (!W.allFinite()) return false;
  for (const auto& c : C)
    if (!c.allFinite()) return false;
  for (const auto& m : mu)
    if (!m.allFinite()) return false;
  for (const auto& n : nu)
    if (!n.allFinite()) return false;
  return true;
}

bool GradientSet::all_finite() const {
  if (!W.allFinite()) return false;
  for (const auto& c : C)
    if (!c.allFinite()) return false;
  for (const auto& m : mu)
    if (!m.allFinite()) return false;
  for (const auto& n : nu)
    if (!n.allFinite()) return false;
  return true;
}

bool CellMask::empty() const {
  return std::all_of(cells.begin(), cells.end(),
                     [](const auto& v) { return v.empty(); });
}

CellMask CellMask::none(int n_bins) {
  CellMask m;
  m.cells.resize(n_bins);
  return m;
}

double logistic(double x) {
  if (x >= 0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  // max(x,0) + log1p(exp(-|x|)); exact in both tails.
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double share_probability(const ModelState& state, int t, int i, int j) {
  if (t < 0 || t >= state.num_bins()) throw std::out_of_range("bin index");
  if (i < 0 || i >= state.num_websites()) throw std::out_of_range("website index");
  if (j < 0 || j >= state.num_users()) throw std::out_of_range("user index");
  double logit = state.W.row(i).dot(state.C[t].row(j)) + state.mu[t][i] + state.nu[t][j];
  return logistic(logit);
}

double observation_likelihood(int y, double logit) {
  return logistic((2 * y - 1) * logit);
}

Eigen::MatrixXd bin_logits(const ModelState& state, int t) {
  Eigen::MatrixXd Z = state.W * state.C[t].transpose();
  Z.colwise() += state.mu[t];
  Z.rowwise() += state.nu[t].transpose();
  return Z;
}

namespace {

void check_shapes(const ModelState& state, const TimeBinnedObservations& obs,
                  const SocialGraph& graph, const CellMask* mask) {
  const int m = obs.num_websites(), n = obs.num_users(), bins = obs.num_bins();
  if (state.W.rows() != m) throw std::invalid_argument("state/obs website mismatch");
  if (state.num_bins() != bins || static_cast<int>(state.mu.size()) != bins ||
      static_cast<int>(state.nu.size()) != bins) {
    throw std::invalid_argument("state/obs bin count mismatch");
  }
  for (int t = 0; t < bins; ++t) {
    if (state.C[t].rows() != n || state.C[t].cols() != state.W.cols() ||
        state.mu[t].size() != m || state.nu[t].size() != n) {
      throw std::invalid_argument("state/obs shape mismatch");
    }
  }
  if (graph.n_users != n) throw std::invalid_argument("graph/obs user mismatch");
  if (mask && static_cast<int>(mask->cells.size()) != bins) {
    throw std::invalid_argument("mask bin count mismatch");
  }
}

}  // namespace

LossBreakdown loss(const ModelState& state, const TimeBinnedObservations& obs,
                   const SocialGraph& graph, const Hyperparameters& hp,
                   const CellMask* mask) {
  check_shapes(state, obs, graph, mask);
  if (!state.all_finite()) throw DivergedError("diverged state");

  const int bins = obs.num_bins();
  LossBreakdown out;

  for (int t = 0; t < bins; ++t) {
    Eigen::MatrixXd Z = bin_logits(state, t);
    // All cells as negatives: -log(1-p) = softplus(z); then correct the
    // positives from the sparse list; masked cells are backed out last.
    double nll_t = (Z.array().max(0.0) + (-Z.array().abs()).exp().log1p()).sum();
    for (const auto& [i, j] : obs.bins[t].coords) {
      double z = Z(i, j);
      nll_t += hp.beta * softplus(-z) - softplus(z);
    }
    if (mask) {
      for (const auto& [i, j] : mask->cells[t]) {
        double z = Z(i, j);
        if (obs.bins[t].contains(i, j)) {
          nll_t -= hp.beta * softplus(-z);
        } else {
          nll_t -= softplus(z);
        }
      }
    }
    out.nll += nll_t;

    out.l2_c += 0.5 * hp.gamma * state.C[t].squaredNorm();
    if (hp.lambda > 0) {
      out.graph += hp.lambda * (graph.laplacian * state.C[t]).cwiseProduct(state.C[t]).sum();
    }
    if (t > 0 && hp.tau > 0) {
      out.temporal += hp.tau * (state.C[t] - state.C[t - 1]).squaredNorm();
    }
  }
  out.l2_w = 0.5 * hp.gamma * state.W.squaredNorm();
  out.total = out.nll + out.l2_w + out.l2_c + out.graph + out.temporal;
  return out;
}

GradientSet gradients(const ModelState& state, const TimeBinnedObservations& obs,
                      const SocialGraph& graph, const Hyperparameters& hp,
                      const CellMask* mask) {
  check_shapes(state, obs, graph, mask);
  if (!state.all_finite()) throw DivergedError("diverged state");

  const int bins = obs.num_bins();
  GradientSet g;
  g.W = Eigen::MatrixXd::Zero(state.W.rows(), state.W.cols());
  g.C.resize(bins);
  g.mu.resize(bins);
  g.nu.resize(bins);

  for (int t = 0; t < bins; ++t) {
    // Residual R = weight * (Phi(z) - y): Phi(z) on negatives,
    // beta*(Phi(z)-1) on positives, 0 on masked cells.
    Eigen::MatrixXd R = bin_logits(state, t);
    R = R.unaryExpr([](double z) { return logistic(z); });
    for (const auto& [i, j] : obs.bins[t].coords) {
      R(i, j) = hp.beta * (R(i, j) - 1.0);
    }
    if (mask) {
      for (const auto& [i, j] : mask->cells[t]) R(i, j) = 0.0;
    }

    g.W.noalias() += R * state.C[t];
    g.C[t] = R.transpose() * state.W;
    g.C[t].noalias() += hp.gamma * state.C[t];
    if (hp.lambda > 0) {
      g.C[t].noalias() += 2.0 * hp.lambda * (graph.laplacian * state.C[t]);
    }
    if (hp.tau > 0) {
      if (t > 0) g.C[t].noalias() += 2.0 * hp.tau * (state.C[t] - state.C[t - 1]);
      if (t + 1 < bins) g.C[t].noalias() += 2.0 * hp.tau * (state.C[t] - state.C[t + 1]);
    }
    g.mu[t] = R.rowwise().sum();
    g.nu[t] = R.colwise().sum().transpose();
  }
  g.W.noalias() += hp.gamma * state.W;
  return g;
}

// ---------------------------------------------------------------------------
// Checkpoint serialization

using detail::CheckpointReader;
using detail::write_matrix;
using detail::write_vector;

void ModelState::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << "IDEOTRACE-MODEL v1\n";
  out << num_websites() << '\t' << num_users() << '\t' << latent_dim() << '\t'
      << num_bins() - 1 << '\n';
  write_matrix(out, W);
  for (const auto& c : C) write_matrix(out, c);
  for (const auto& m : mu) write_vector(out, m);
  for (const auto& n : nu) write_vector(out, n);
  if (!out) throw DataError("write failed: " + path.string());
}

ModelState ModelState::load(const std::filesystem::path& path) {
  CheckpointReader r(path);
  if (r.line() != "IDEOTRACE-MODEL v1") {
    throw DataError(path.string() + ": not an IDEOTRACE-MODEL v1 file");
  }
  auto dims = r.row(4);
  const auto m = static_cast<Eigen::Index>(dims[0]);
  const auto n = static_cast<Eigen::Index>(dims[1]);
  const auto k = static_cast<Eigen::Index>(dims[2]);
  const auto steps = static_cast<Eigen::Index>(dims[3]);
  if (m <= 0 || n <= 0 || k <= 0 || steps < 0) {
    throw DataError(path.string() + ": bad dimensions");
  }
  ModelState state;
  state.W = r.matrix(m, k);
  state.C.reserve(steps + 1);
  for (Eigen::Index t = 0; t <= steps; ++t) state.C.push_back(r.matrix(n, k));
  for (Eigen::Index t = 0; t <= steps; ++t) state.mu.push_back(r.vector(m));
  for (Eigen::Index t = 0; t <= steps; ++t) state.nu.push_back(r.vector(n));
  return state;
}

}  // namespace ideotrace
