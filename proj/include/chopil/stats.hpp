#pragma once

#include <vector>

namespace chopil {

struct PairedTestResult {
  double mean_diff = 0.0;
  double t_statistic = 0.0;  // +-inf when the differences have zero spread
  double p_value = 1.0;
  int n_pairs = 0;
  bool degenerate = false;
};

// Two-sided paired t-test: t = mean(a-b) / (sd(a-b, n-1 divisor) / sqrt(n)).
// All differences zero -> p = 1, degenerate. Zero spread with nonzero mean ->
// infinite t, p = 0, degenerate.
PairedTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

// Regularized incomplete beta I_x(a,b), continued-fraction evaluation,
// absolute accuracy ~1e-10.
double reg_incomplete_beta(double a, double b, double x);

// two-sided tail probability of Student's t with nu degrees of freedom
double t_two_sided_p(double t, int nu);

}  // namespace chopil
