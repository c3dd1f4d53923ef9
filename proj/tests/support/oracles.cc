#include "oracles.h"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <stdexcept>

namespace polar::oracle {

MannKendall mann_kendall(const std::vector<double> &x) {
  MannKendall out;
  const std::int64_t n = static_cast<std::int64_t>(x.size());
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = i + 1; j < n; ++j) {
      if (x[j] > x[i]) ++out.s;
      if (x[j] < x[i]) --out.s;
    }
  }
  // Each value's tie-group size, counted directly; visit each group once via
  // its first member.
  std::int64_t correction = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    bool first = true;
    for (std::int64_t j = 0; j < i; ++j) first = first && x[j] != x[i];
    if (!first) continue;
    std::int64_t t = 0;
    for (std::int64_t j = 0; j < n; ++j) t += x[j] == x[i];
    correction += t * (t - 1) * (2 * t + 5);
  }
  const std::int64_t numerator = n * (n - 1) * (2 * n + 5) - correction;
  out.var_s = static_cast<double>(numerator) / 18.0;
  if (out.var_s > 0.0 && out.s != 0) {
    const double z = (static_cast<double>(out.s) - (out.s > 0 ? 1.0 : -1.0)) /
                     std::sqrt(out.var_s);
    boost::math::normal normal;
    out.p = 2.0 * boost::math::cdf(boost::math::complement(normal, std::fabs(z)));
  }
  return out;
}

namespace {

Eigen::MatrixXd gauss_jordan_inverse(Eigen::MatrixXd a) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd inv = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index pivot = c;
    for (Eigen::Index r = c + 1; r < n; ++r) {
      if (std::fabs(a(r, c)) > std::fabs(a(pivot, c))) pivot = r;
    }
    if (a(pivot, c) == 0.0) throw std::runtime_error("singular");
    a.row(c).swap(a.row(pivot));
    inv.row(c).swap(inv.row(pivot));
    const double d = a(c, c);
    a.row(c) /= d;
    inv.row(c) /= d;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a(r, c);
      a.row(r) -= f * a.row(c);
      inv.row(r) -= f * inv.row(c);
    }
  }
  return inv;
}

}  // namespace

Ols ols(const Eigen::MatrixXd &x, const Eigen::VectorXd &y) {
  const Eigen::Index n = x.rows(), k = x.cols();
  const Eigen::MatrixXd xtx_inv = gauss_jordan_inverse(x.transpose() * x);
  Ols out;
  out.beta = xtx_inv * (x.transpose() * y);
  const Eigen::VectorXd resid = y - x * out.beta;
  out.rss = resid.squaredNorm();
  const double dof = static_cast<double>(n - k);
  const double sigma2 = out.rss / dof;
  out.se.resize(k);
  out.t.resize(k);
  out.p.resize(k);
  boost::math::students_t dist(dof);
  for (Eigen::Index j = 0; j < k; ++j) {
    out.se[j] = std::sqrt(sigma2 * xtx_inv(j, j));
    out.t[j] = out.beta[j] / out.se[j];
    out.p[j] = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(out.t[j])));
  }
  const double mean = y.mean();
  double tss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) tss += (y[i] - mean) * (y[i] - mean);
  out.r_squared = 1.0 - out.rss / tss;
  return out;
}

double binomial_deviance(const Eigen::MatrixXd &x, const std::vector<double> &y,
                         const Eigen::VectorXd &beta) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double eta = beta[0];
    for (Eigen::Index j = 0; j < x.cols(); ++j) eta += x(i, j) * beta[j + 1];
    const double mu = 1.0 / (1.0 + std::exp(-eta));
    const double yi = y[static_cast<std::size_t>(i)];
    if (yi > 0.0) dev += 2.0 * yi * std::log(yi / mu);
    if (yi < 1.0) dev += 2.0 * (1.0 - yi) * std::log((1.0 - yi) / (1.0 - mu));
  }
  return dev;
}

GradientFit gradient_descent(const Eigen::MatrixXd &x, const std::vector<double> &y,
                             double grad_tol, int max_iter) {
  const Eigen::Index n = x.rows(), k = x.cols() + 1;
  GradientFit fit;
  fit.beta = Eigen::VectorXd::Zero(k);
  fit.deviance = binomial_deviance(x, y, fit.beta);
  double step = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      double eta = fit.beta[0];
      for (Eigen::Index j = 0; j < x.cols(); ++j) eta += x(i, j) * fit.beta[j + 1];
      const double r = 1.0 / (1.0 + std::exp(-eta)) - y[static_cast<std::size_t>(i)];
      grad[0] += 2.0 * r;
      for (Eigen::Index j = 0; j < x.cols(); ++j) grad[j + 1] += 2.0 * r * x(i, j);
    }
    fit.iterations = it;
    if (grad.norm() < grad_tol) break;
    step = std::min(step * 2.0, 1.0);
    while (true) {
      const Eigen::VectorXd trial = fit.beta - step * grad;
      const double dev = binomial_deviance(x, y, trial);
      if (dev <= fit.deviance - 0.5 * step * grad.squaredNorm()) {
        fit.beta = trial;
        fit.deviance = dev;
        break;
      }
      step *= 0.5;
      if (step < 1e-20) return fit;
    }
  }
  return fit;
}

std::map<std::string, double> bws_counts(const std::vector<bws::BwsTuple> &tuples,
                                         const std::vector<bws::BwsAnnotation> &annotations,
                                         Dimension dim) {
  std::map<std::string, int> best, worst, seen;
  for (const auto &a : annotations) {
    if (a.dimension != dim) continue;
    const bws::BwsTuple *tuple = nullptr;
    for (const auto &t : tuples) {
      if (t.tuple_id == a.tuple_id) tuple = &t;
    }
    if (!tuple || a.best == a.worst) continue;
    bool has_best = false, has_worst = false;
    for (const auto &item : tuple->item_ids) {
      has_best = has_best || item == a.best;
      has_worst = has_worst || item == a.worst;
    }
    if (!has_best || !has_worst) continue;
    for (const auto &item : tuple->item_ids) {
      ++seen[item];
      if (item == a.best) ++best[item];
      if (item == a.worst) ++worst[item];
    }
  }
  std::map<std::string, double> out;
  for (const auto &[item, n] : seen) {
    out[item] = static_cast<double>(best[item] - worst[item]) / n;
  }
  return out;
}

double pearson(const std::vector<double> &a, const std::vector<double> &b) {
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
  }
  const double ma = sa / n, mb = sb / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace polar::oracle
