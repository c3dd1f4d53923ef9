#ifndef POLAR_GLM_H_
#define POLAR_GLM_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "polar/vad.h"

namespace polar::glm {

struct FitOptions {
  double ridge = 1e-6;  // L2 penalty on every coefficient but the intercept
  double tol = 1e-8;    // convergence threshold on max |delta beta|
  int max_iter = 100;
};

// Labels are clamped into [kLabelEps, 1 - kLabelEps] before fitting and the
// fitted mean into [kMuEps, 1 - kMuEps] inside the iterations.
inline constexpr double kLabelEps = 1e-6;
inline constexpr double kMuEps = 1e-8;

struct FittedGlm {
  Dimension dimension = Dimension::kValence;
  Eigen::VectorXd coefficients;  // intercept first, then one per feature
  double ridge = 0.0;
  int iterations = 0;
  bool converged = false;
  double deviance = 0.0;  // unpenalized; NaN for models read from disk
  // Penalized deviance after each accepted iteration, starting with the
  // all-zero start point.
  std::vector<double> deviance_trace;

  std::size_t dim() const {
    return coefficients.size() > 0 ? static_cast<std::size_t>(coefficients.size() - 1) : 0;
  }
};

// Binomial-family, logit-link regression of fractional labels y in [0,1] on
// the columns of `x` (an intercept is added), fitted by iteratively
// reweighted least squares with step halving. Throws polar::Error when y
// leaves [0,1], when the weighted normal equations are singular, or when the
// penalized deviance fails to decrease on 3 consecutive iterations.
FittedGlm fit_binomial(const Eigen::MatrixXd &x, std::span<const double> y,
                       Dimension dimension, const FitOptions &options = {});

// Logistic of the linear predictor, clamped into [kMuEps, 1 - kMuEps].
std::vector<double> predict_binomial(const FittedGlm &model,
                                     const Eigen::MatrixXd &x);

double logistic(double eta);

// Binary model file, little-endian:
//   0..3 "VADM", 4..5 version (u16) = 1, 6 dimension letter, 7 reserved,
//   8..11 dim (u32), 12..19 ridge (f64), then dim + 1 coefficients (f64).
void write_model(const FittedGlm &model, const std::filesystem::path &path);
FittedGlm read_model(const std::filesystem::path &path);

// A design matrix with its labels.
struct LabeledMatrix {
  Eigen::MatrixXd x;
  std::vector<double> y;
};

// Fold index in [0, k) for each of n rows: a seeded permutation cut into k
// contiguous runs whose sizes differ by at most one.
std::vector<int> fold_assignment(std::size_t n, int k, std::uint64_t seed);

struct FoldResult {
  std::size_t train_size = 0;
  std::size_t eval_size = 0;
  std::optional<double> r;  // nullopt when predictions or gold are constant
};

struct CrossValResult {
  std::vector<FoldResult> folds;
  std::optional<double> mean_r;  // over folds with a defined r
};

// k-fold Pearson evaluation. `static_train` rows join every training fold and
// are never evaluated.
CrossValResult crossval_pearson(const LabeledMatrix &data, int k,
                                std::uint64_t seed, Dimension dimension,
                                const LabeledMatrix *static_train = nullptr,
                                const FitOptions &options = {});

// One seeded split: `test_fraction` of `data` is held out, the rest (plus
// `static_train`) trains the model.
FoldResult train_test_pearson(const LabeledMatrix &data, double test_fraction,
                              std::uint64_t seed, Dimension dimension,
                              const LabeledMatrix *static_train = nullptr,
                              const FitOptions &options = {});

}  // namespace polar::glm

#endif  // POLAR_GLM_H_
