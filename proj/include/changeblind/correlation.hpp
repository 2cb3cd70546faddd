#pragma once

#include <span>
#include <vector>

namespace changeblind::stats {

/// Pearson linear correlation. Requires equal lengths >= 3 and non-zero
/// variance (UndefinedCorrelationError otherwise). Result clamped to [-1, 1].
double plcc(std::span<const double> a, std::span<const double> b);

/// Spearman rank correlation, average ranks for ties.
double srocc(std::span<const double> a, std::span<const double> b);

double rmse(std::span<const double> a, std::span<const double> b);

/// 1-based ranks; tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> v);

/// tanh(mean(atanh(r))). Every |r| must be < 1.
double fisher_z_average(std::span<const double> rs);

/// Two-sided p-value of H0: rho = 0 for a sample correlation r over n points
/// (Student t with n - 2 degrees of freedom).
double correlation_p_value(double r, std::size_t n);

struct WilliamsResult {
  double t = 0.0;
  double p_value = 1.0;
  int dof = 0;
};

/// Williams' test for two dependent correlations sharing variable j:
/// r_jk vs r_jh, with r_kh the correlation between the two predictors.
WilliamsResult williams_test(double r_jk, double r_jh, double r_kh, std::size_t n);

}  // namespace changeblind::stats
