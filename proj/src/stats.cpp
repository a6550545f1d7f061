#include "chopil/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace chopil {

namespace {

// continued fraction for the incomplete beta (modified Lentz)
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-14;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
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
  throw std::runtime_error("incomplete beta continued fraction did not converge");
}

}  // namespace

double reg_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("beta parameters must be > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("x must be in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_cf(a, b, x) / a;
  }
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double t_two_sided_p(double t, int nu) {
  if (nu < 1) throw std::invalid_argument("degrees of freedom must be >= 1");
  if (std::isinf(t)) return 0.0;
  if (t == 0.0) return 1.0;
  const double v = static_cast<double>(nu);
  return reg_incomplete_beta(v / 2.0, 0.5, v / (v + t * t));
}

PairedTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired samples must have equal size");
  const std::size_t n = a.size();
  if (n < 2) throw std::invalid_argument("need at least 2 pairs");

  PairedTestResult r;
  r.n_pairs = static_cast<int>(n);

  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  r.mean_diff = mean;

  double ss = 0.0;
  bool all_zero = true;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) all_zero = false;
    ss += (d - mean) * (d - mean);
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));

  if (all_zero) {
    r.t_statistic = 0.0;
    r.p_value = 1.0;
    r.degenerate = true;
    return r;
  }
  if (sd == 0.0) {
    r.t_statistic = mean > 0 ? std::numeric_limits<double>::infinity()
                             : -std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
    r.degenerate = true;
    return r;
  }
  r.t_statistic = mean / (sd / std::sqrt(static_cast<double>(n)));
  r.p_value = t_two_sided_p(r.t_statistic, static_cast<int>(n) - 1);
  return r;
}

}  // namespace chopil
