#include "polar/kernels.h"

#include <omp.h>

#include "polar/error.h"

namespace polar::kernels {
namespace {

inline int sign(double d) { return (d > 0.0) - (d < 0.0); }

// Row i's contribution to S; shared by both paths so they sum identically.
inline std::int64_t mk_row(std::span<const double> x, std::size_t i) {
  std::int64_t s = 0;
  for (std::size_t j = i + 1; j < x.size(); ++j) s += sign(x[j] - x[i]);
  return s;
}

inline double gram_entry(const Eigen::MatrixXd &x, std::span<const double> w,
                         Eigen::Index a, Eigen::Index b) {
  const double *ca = x.col(a).data();
  const double *cb = x.col(b).data();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) sum += ca[i] * w[i] * cb[i];
  return sum;
}

inline double cross_entry(const Eigen::MatrixXd &x, std::span<const double> w,
                          std::span<const double> z, Eigen::Index a) {
  const double *ca = x.col(a).data();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) sum += ca[i] * w[i] * z[i];
  return sum;
}

inline double row_dot(const Eigen::MatrixXd &x, const Eigen::VectorXd &beta,
                      Eigen::Index i) {
  double sum = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) sum += x(i, j) * beta[j];
  return sum;
}

void check_rows(const Eigen::MatrixXd &x, std::size_t n) {
  if (static_cast<std::size_t>(x.rows()) != n) {
    throw Error("kernel: vector length does not match the matrix rows");
  }
}

}  // namespace

int max_threads() { return omp_get_max_threads(); }

std::int64_t mann_kendall_s(std::span<const double> x) {
  const auto n = static_cast<std::int64_t>(x.size());
  std::int64_t s = 0;
#pragma omp parallel for reduction(+ : s) schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n; ++i) s += mk_row(x, static_cast<std::size_t>(i));
  return s;
}

Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd &x,
                              std::span<const double> w) {
  check_rows(x, w.size());
  const Eigen::Index d = x.cols();
  Eigen::MatrixXd g(d, d);
#pragma omp parallel for schedule(dynamic, 1)
  for (Eigen::Index a = 0; a < d; ++a) {
    for (Eigen::Index b = a; b < d; ++b) {
      const double v = gram_entry(x, w, a, b);
      g(a, b) = v;
      g(b, a) = v;
    }
  }
  return g;
}

Eigen::VectorXd weighted_cross(const Eigen::MatrixXd &x,
                               std::span<const double> w,
                               std::span<const double> z) {
  check_rows(x, w.size());
  check_rows(x, z.size());
  Eigen::VectorXd out(x.cols());
#pragma omp parallel for schedule(static)
  for (Eigen::Index a = 0; a < x.cols(); ++a) out[a] = cross_entry(x, w, z, a);
  return out;
}

Eigen::VectorXd linear_predictor(const Eigen::MatrixXd &x,
                                 const Eigen::VectorXd &beta) {
  if (x.cols() != beta.size()) throw Error("kernel: coefficient length mismatch");
  Eigen::VectorXd out(x.rows());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = row_dot(x, beta, i);
  return out;
}

namespace serial {

std::int64_t mann_kendall_s(std::span<const double> x) {
  std::int64_t s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += mk_row(x, i);
  return s;
}

Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd &x,
                              std::span<const double> w) {
  check_rows(x, w.size());
  const Eigen::Index d = x.cols();
  Eigen::MatrixXd g(d, d);
  for (Eigen::Index a = 0; a < d; ++a) {
    for (Eigen::Index b = a; b < d; ++b) {
      const double v = gram_entry(x, w, a, b);
      g(a, b) = v;
      g(b, a) = v;
    }
  }
  return g;
}

Eigen::VectorXd weighted_cross(const Eigen::MatrixXd &x,
                               std::span<const double> w,
                               std::span<const double> z) {
  check_rows(x, w.size());
  check_rows(x, z.size());
  Eigen::VectorXd out(x.cols());
  for (Eigen::Index a = 0; a < x.cols(); ++a) out[a] = cross_entry(x, w, z, a);
  return out;
}

Eigen::VectorXd linear_predictor(const Eigen::MatrixXd &x,
                                 const Eigen::VectorXd &beta) {
  if (x.cols() != beta.size()) throw Error("kernel: coefficient length mismatch");
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = row_dot(x, beta, i);
  return out;
}

}  // namespace serial
}  // namespace polar::kernels
