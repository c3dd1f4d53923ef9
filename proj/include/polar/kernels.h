#ifndef POLAR_KERNELS_H_
#define POLAR_KERNELS_H_

#include <cstdint>
#include <span>

#include <Eigen/Dense>

// Data-parallel inner loops. Each kernel has an OpenMP version (the default,
// in polar::kernels) and a plain serial reference in polar::kernels::serial.
// Every output element is produced by a single thread with a fixed summation
// order, so the two versions agree bit for bit at any thread count.
namespace polar::kernels {

// Which implementation a batch operation should use.
enum class Execution { kSerial, kParallel };

// S = sum over i < j of sign(x[j] - x[i]).
std::int64_t mann_kendall_s(std::span<const double> x);

// X' diag(w) X, full symmetric matrix.
Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd &x,
                              std::span<const double> w);

// X' diag(w) z.
Eigen::VectorXd weighted_cross(const Eigen::MatrixXd &x,
                               std::span<const double> w,
                               std::span<const double> z);

// X beta, one dot product per row.
Eigen::VectorXd linear_predictor(const Eigen::MatrixXd &x,
                                 const Eigen::VectorXd &beta);

namespace serial {

std::int64_t mann_kendall_s(std::span<const double> x);
Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd &x,
                              std::span<const double> w);
Eigen::VectorXd weighted_cross(const Eigen::MatrixXd &x,
                               std::span<const double> w,
                               std::span<const double> z);
Eigen::VectorXd linear_predictor(const Eigen::MatrixXd &x,
                                 const Eigen::VectorXd &beta);

}  // namespace serial

// Number of OpenMP threads the parallel kernels will use.
int max_threads();

}  // namespace polar::kernels

#endif  // POLAR_KERNELS_H_
