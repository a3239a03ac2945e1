#pragma once

#include <span>
#include <vector>

#include "ideotrace/errors.hpp"

namespace ideotrace {

/// Sample Pearson correlation. Throws DataError("undefined correlation")
/// when either vector is constant.
double pearson(std::span<const double> x, std::span<const double> y);

/// Fractional ranks (1-based) with average ranks for ties.
std::vector<double> fractional_ranks(std::span<const double> x);

/// Spearman rank correlation: Pearson on fractional ranks. Requires
/// length >= 3.
double spearman(std::span<const double> x, std::span<const double> y);

/// F1 over binary vectors. Conventions: TP=0 with any FP or FN gives 0;
/// TP=FP=FN=0 gives 1.
double f1_score(std::span<const int> predicted, std::span<const int> actual);

struct ConfusionCounts {
  long tp = 0, fp = 0, fn = 0, tn = 0;
  void add(int predicted, int actual);
  double f1() const;
};

struct PairedTTest {
  double t = 0;
  double p = 0;  // two-sided
  long df = 0;
};

/// Paired t-test on differences d = after - before:
/// t = mean(d) / (sd(d)/sqrt(n)), df = n-1, p from the Student-t CDF.
/// Throws DataError("degenerate differences") when sd(d) = 0.
PairedTTest dependent_t_test(std::span<const double> before,
                             std::span<const double> after);

/// Regularized incomplete beta I_x(a, b), continued fraction (Lentz).
double regularized_incomplete_beta(double a, double b, double x);

/// Student-t CDF with dof degrees of freedom, via the incomplete beta.
double student_t_cdf(double x, double dof);

}  // namespace ideotrace
