#ifndef POLAR_OLS_H_
#define POLAR_OLS_H_

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace polar::glm {

// Ordinary least squares with classical inference.
struct OlsFit {
  std::vector<std::string> terms;
  Eigen::VectorXd beta;
  Eigen::VectorXd std_err;
  Eigen::VectorXd t_stat;
  Eigen::VectorXd p_value;  // two-sided
  Eigen::VectorXd ci_low;   // 95%
  Eigen::VectorXd ci_high;
  // Residual degrees of freedom behind each term's inference; all equal to
  // `dof` for a pooled fit.
  std::vector<double> term_dof;
  double r_squared = 0.0;
  double rss = 0.0;
  std::size_t n = 0;
  std::size_t dof = 0;  // n - k
};

// beta = argmin |y - X beta|^2 with SE from RSS / (n - k) * (X'X)^-1, t-based
// p-values and 95% intervals, and centered r^2. Throws when X is rank
// deficient (naming a dependent column) or n <= k.
OlsFit fit_ols(const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
               std::vector<std::string> terms);

// One protocol-level observation for the confound models.
struct DesignRow {
  std::string committee;
  double tp = 0.0;
  double ratio_f = 0.0;
  double ratio_g = 0.0;
  double outcome = 0.0;
};

inline constexpr int kTermsPerCommittee = 4;

// Committee-split design: for each committee c (in sorted order) the columns
// Comm[c], Comm[c]:TP, Comm[c]:RatioF, Comm[c]:RatioG. No global intercept.
struct InteractionDesign {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<std::string> terms;
  std::vector<std::string> committees;
  std::vector<int> row_committee;  // index into committees, per row
};

// Throws when a committee has fewer rows than its 4 parameters.
InteractionDesign build_interaction_design(std::span<const DesignRow> rows);

// The equivalent base-category parameterization: const, TP, RatioF, RatioG
// for the first committee, then Comm[T.c] and its three interactions for each
// other committee. Same column space as the split design.
InteractionDesign build_base_category_design(std::span<const DesignRow> rows);

enum class VarianceMode {
  // One residual variance for the whole model (n - 4C dof).
  kPooled,
  // Each committee block uses its own residual variance and n_c - 4 dof, so
  // the block's inference is exactly that of a separate per-committee fit.
  kPerCommittee,
};

OlsFit fit_interaction(const InteractionDesign &design, VarianceMode mode);

// term, beta_x100, std_err, t, p, ci_low, ci_high (all but beta unscaled).
void write_ols_report(std::ostream &out, const OlsFit &fit);

}  // namespace polar::glm

#endif  // POLAR_OLS_H_
