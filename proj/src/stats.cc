#include "polar/stats.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "polar/error.h"
#include "polar/kernels.h"

namespace polar::stats {
namespace {

constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;

// Lentz's method for the continued fraction of I_x(a, b).
double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw Error("incomplete beta continued fraction did not converge");
}

// I_x(a, b) given both x and y = 1 - x, so callers can pass the accurate
// complement.
double ibeta(double a, double b, double x, double y) {
  if (x <= 0.0) return 0.0;
  if (y <= 0.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) -
                           std::lgamma(b) + a * std::log(x) + b * std::log(y);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * beta_continued_fraction(b, a, y) / b;
}

bool all_equal(std::span<const double> x) {
  return std::adjacent_find(x.begin(), x.end(), std::not_equal_to<>()) ==
         x.end();
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw Error("incomplete_beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw Error("incomplete_beta needs x in [0,1]");
  return ibeta(a, b, x, 1.0 - x);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_two_sided_p(double z) {
  return std::erfc(std::fabs(z) / std::sqrt(2.0));
}

double t_two_sided_p(double t, double dof) {
  if (!(dof > 0.0)) throw Error("t distribution needs dof > 0");
  if (std::isinf(t)) return 0.0;
  const double t2 = t * t;
  const double denom = dof + t2;
  return std::clamp(ibeta(dof / 2.0, 0.5, dof / denom, t2 / denom), 0.0, 1.0);
}

double t_cdf(double t, double dof) {
  const double tail = 0.5 * t_two_sided_p(t, dof);
  return t > 0.0 ? 1.0 - tail : tail;
}

double t_quantile(double p, double dof) {
  if (!(p > 0.0 && p < 1.0)) throw Error("t_quantile needs p in (0,1)");
  if (p == 0.5) return 0.0;
  if (p < 0.5) return -t_quantile(1.0 - p, dof);
  // Upper half: find t > 0 with tail(t) = 1 - p by bisection on the tail,
  // which is monotone and avoids cancellation near p = 1.
  const double target = 2.0 * (1.0 - p);
  double lo = 0.0, hi = 1.0;
  while (t_two_sided_p(hi, dof) > target) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) return std::numeric_limits<double>::infinity();
  }
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (t_two_sided_p(mid, dof) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double mean(std::span<const double> x) {
  if (x.empty()) throw Error("mean of an empty sample");
  double sum = 0.0;
  for (double v : x) sum += v;
  return sum / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
  if (x.size() < 2) {
    if (x.empty()) throw Error("variance of an empty sample");
    return 0.0;
  }
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

std::optional<PearsonResult> pearson(std::span<const double> x,
                                     std::span<const double> y) {
  if (x.size() != y.size()) throw Error("pearson: vectors differ in length");
  if (x.size() < 3) throw Error("pearson: need at least 3 points");
  if (all_equal(x) || all_equal(y)) return std::nullopt;
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  PearsonResult out;
  out.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double n2 = static_cast<double>(x.size() - 2);
  if (std::fabs(out.r) == 1.0) {
    out.p = 0.0;
  } else if (n2 > 0.0) {
    const double t = out.r * std::sqrt(n2 / (1.0 - out.r * out.r));
    out.p = t_two_sided_p(t, n2);
  }
  return out;
}

TTestResult two_sample_t(std::span<const double> a, std::span<const double> b,
                         TTestVariant variant, double alpha) {
  if (a.size() < 2 || b.size() < 2) {
    throw Error("two_sample_t: each group needs at least 2 values");
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = mean(a), mb = mean(b);
  const double va = sample_variance(a), vb = sample_variance(b);

  TTestResult out;
  double se2 = 0.0;
  if (variant == TTestVariant::kPooled) {
    out.dof = na + nb - 2.0;
    const double sp2 = ((na - 1.0) * va + (nb - 1.0) * vb) / out.dof;
    se2 = sp2 * (1.0 / na + 1.0 / nb);
  } else {
    const double qa = va / na, qb = vb / nb;
    se2 = qa + qb;
    const double denom = qa * qa / (na - 1.0) + qb * qb / (nb - 1.0);
    out.dof = denom > 0.0 ? se2 * se2 / denom : na + nb - 2.0;
  }

  const bool constant = all_equal(a) && all_equal(b);
  if (constant) {
    if (a.front() == b.front()) return out;  // t = 0, p = 1
    out.degenerate = true;
    out.t = ma > mb ? std::numeric_limits<double>::infinity()
                    : -std::numeric_limits<double>::infinity();
    out.p = 0.0;
  } else {
    out.t = (ma - mb) / std::sqrt(se2);
    out.p = t_two_sided_p(out.t, out.dof);
  }
  out.significant = out.p < alpha;
  if (out.significant) {
    out.higher_group = out.t > 0 ? HigherGroup::kFirst : HigherGroup::kSecond;
  }
  return out;
}

double mann_kendall_variance(std::span<const double> series) {
  const double n = static_cast<double>(series.size());
  double var = n * (n - 1.0) * (2.0 * n + 5.0);
  std::vector<double> sorted(series.begin(), series.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i + 1;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    if (t > 1.0) var -= t * (t - 1.0) * (2.0 * t + 5.0);
    i = j;
  }
  return var / 18.0;
}

TrendResult mann_kendall(std::span<const double> series, double alpha) {
  if (series.size() < kMannKendallMinLength) {
    throw Error("mann_kendall needs at least " +
                std::to_string(kMannKendallMinLength) + " values, got " +
                std::to_string(series.size()));
  }
  for (double v : series) {
    if (std::isnan(v)) throw Error("mann_kendall: series contains NaN");
  }
  TrendResult out;
  out.s = kernels::mann_kendall_s(series);
  out.var_s = mann_kendall_variance(series);
  if (out.var_s <= 0.0) return out;  // constant series
  const double sd = std::sqrt(out.var_s);
  if (out.s > 0) {
    out.z = (static_cast<double>(out.s) - 1.0) / sd;
  } else if (out.s < 0) {
    out.z = (static_cast<double>(out.s) + 1.0) / sd;
  }
  out.p = normal_two_sided_p(out.z);
  if (out.p < alpha && out.s != 0) {
    out.direction =
        out.s > 0 ? TrendDirection::kIncreasing : TrendDirection::kDecreasing;
  }
  return out;
}

}  // namespace polar::stats
