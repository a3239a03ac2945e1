#include "ideotrace/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ideotrace {

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("pearson: need at least 2 points");

  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;

  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw DataError("undefined correlation");
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> fractional_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });

  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  if (x.size() < 3) throw std::invalid_argument("spearman: need at least 3 points");
  auto rx = fractional_ranks(x);
  auto ry = fractional_ranks(y);
  return pearson(rx, ry);
}

void ConfusionCounts::add(int predicted, int actual) {
  if (predicted == 1 && actual == 1) ++tp;
  else if (predicted == 1 && actual == 0) ++fp;
  else if (predicted == 0 && actual == 1) ++fn;
  else ++tn;
}

double ConfusionCounts::f1() const {
  if (tp == 0) return (fp == 0 && fn == 0) ? 1.0 : 0.0;
  const double precision = static_cast<double>(tp) / (tp + fp);
  const double recall = static_cast<double>(tp) / (tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

double f1_score(std::span<const int> predicted, std::span<const int> actual) {
  if (predicted.size() != actual.size()) {
    throw std::invalid_argument("f1: length mismatch");
  }
  ConfusionCounts counts;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if ((predicted[i] != 0 && predicted[i] != 1) || (actual[i] != 0 && actual[i] != 1)) {
      throw std::invalid_argument("f1: inputs must be 0/1");
    }
    counts.add(predicted[i], actual[i]);
  }
  return counts.f1();
}

// Continued fraction for the incomplete beta (modified Lentz).
static double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;

  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  return h;  // converged to working precision or close enough
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (a <= 0 || b <= 0) throw std::invalid_argument("ibeta: a, b must be > 0");
  if (x < 0 || x > 1) throw std::invalid_argument("ibeta: x must be in [0, 1]");
  if (x == 0) return 0.0;
  if (x == 1) return 1.0;

  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * betacf(a, b, x) / a;
  }
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double x, double dof) {
  if (dof <= 0) throw std::invalid_argument("student_t_cdf: dof must be > 0");
  if (x == 0) return 0.5;
  const double ib = regularized_incomplete_beta(dof / 2.0, 0.5, dof / (dof + x * x));
  return x > 0 ? 1.0 - 0.5 * ib : 0.5 * ib;
}

PairedTTest dependent_t_test(std::span<const double> before,
                             std::span<const double> after) {
  if (before.size() != after.size()) {
    throw std::invalid_argument("t-test: length mismatch");
  }
  const std::size_t n = before.size();
  if (n < 2) throw std::invalid_argument("t-test: need at least 2 pairs");

  double mean_d = 0;
  for (std::size_t i = 0; i < n; ++i) mean_d += after[i] - before[i];
  mean_d /= n;

  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (after[i] - before[i]) - mean_d;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / (n - 1));
  if (sd == 0) throw DataError("degenerate differences");

  PairedTTest result;
  result.df = static_cast<long>(n) - 1;
  result.t = mean_d / (sd / std::sqrt(static_cast<double>(n)));
  // Two-sided p: I_{df/(df+t^2)}(df/2, 1/2).
  result.p = regularized_incomplete_beta(result.df / 2.0, 0.5,
                                         result.df / (result.df + result.t * result.t));
  return result;
}

}  // namespace ideotrace
