#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <utility>

#include "lic/update_engine.hpp"

namespace lic {

namespace {

// Regularized lower incomplete gamma P(a, x) via the series expansion for
// x < a + 1 and the Lentz continued fraction otherwise.
double gamma_p(double a, double x) {
  if (x <= 0.0) return 0.0;
  const double lg = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < 500; ++n) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - lg);
  }
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  const double q = std::exp(-x + a * std::log(x) - lg) * h;
  return 1.0 - q;
}

double chi2_cdf(int dof, double x) { return gamma_p(0.5 * dof, 0.5 * x); }

double chi2_pdf(int dof, double x) {
  if (x <= 0.0) return 0.0;
  const double k = 0.5 * dof;
  return std::exp((k - 1.0) * std::log(x) - 0.5 * x - k * std::log(2.0) - std::lgamma(k));
}

// Acklam's rational approximation of the standard normal quantile, good to
// ~1e-9 over (0, 1); only used to seed the Newton solve below.
double normal_quantile(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                             1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                             6.680131188771972e+01,  -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                             -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                             3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

double solve_quantile(int dof, double confidence) {
  // Wilson-Hilferty starting point, then Newton with bisection safeguards.
  const double z = normal_quantile(confidence);
  const double k = static_cast<double>(dof);
  double x = k * std::pow(1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k)), 3);
  if (x <= 0.0) x = 0.5 * k;
  double lo = 0.0, hi = std::max(4.0 * x, k + 50.0);
  while (chi2_cdf(dof, hi) < confidence) hi *= 2.0;
  for (int it = 0; it < 100; ++it) {
    const double f = chi2_cdf(dof, x) - confidence;
    if (f > 0)
      hi = x;
    else
      lo = x;
    const double df = chi2_pdf(dof, x);
    double next = df > 0.0 ? x - f / df : 0.5 * (lo + hi);
    if (next <= lo || next >= hi) next = 0.5 * (lo + hi);
    if (std::abs(next - x) < 1e-12 * std::max(1.0, x)) return next;
    x = next;
  }
  return x;
}

}  // namespace

double chi_squared_quantile(int dof, double confidence) {
  if (dof < 1) throw std::invalid_argument("chi_squared_quantile: dof must be >= 1");
  if (confidence <= 0.0 || confidence >= 1.0) {
    throw std::invalid_argument("chi_squared_quantile: confidence must be in (0, 1)");
  }
  if (dof <= 200) {
    static std::map<std::pair<int, double>, double> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find({dof, confidence});
    if (it != cache.end()) return it->second;
    const double value = solve_quantile(dof, confidence);
    cache.emplace(std::make_pair(dof, confidence), value);
    return value;
  }
  return solve_quantile(dof, confidence);
}

}  // namespace lic
