#include "polar/ols.h"

#include <cmath>
#include <map>
#include <set>

#include "polar/error.h"
#include "polar/stats.h"
#include "polar/tsv.h"

namespace polar::glm {
namespace {

struct Solved {
  Eigen::VectorXd beta;
  Eigen::MatrixXd cov_unscaled;  // (X'X)^-1
  Eigen::VectorXd residuals;
};

Solved solve(const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
             const std::vector<std::string> &terms) {
  const Eigen::Index k = x.cols();
  if (y.size() != x.rows()) throw Error("fit_ols: label count differs from rows");
  if (static_cast<Eigen::Index>(terms.size()) != k) {
    throw Error("fit_ols: term count differs from columns");
  }
  if (x.rows() <= k) {
    throw Error("fit_ols: " + std::to_string(x.rows()) + " rows leave no "
                "residual degrees of freedom for " + std::to_string(k) + " terms");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < k) {
    const auto dependent = qr.colsPermutation().indices()[qr.rank()];
    throw Error("fit_ols: design is rank deficient (rank " +
                std::to_string(qr.rank()) + " of " + std::to_string(k) +
                "); column '" + terms[static_cast<std::size_t>(dependent)] +
                "' is linearly dependent on the others");
  }
  Solved s;
  s.beta = qr.solve(y);
  const Eigen::MatrixXd r =
      qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv = r.triangularView<Eigen::Upper>().solve(
      Eigen::MatrixXd::Identity(k, k));
  const Eigen::MatrixXd inner = r_inv * r_inv.transpose();
  const auto &perm = qr.colsPermutation();
  s.cov_unscaled = perm * inner * perm.transpose();
  s.residuals = y - x * s.beta;
  return s;
}

double centered_r2(const Eigen::VectorXd &y, double rss) {
  const double tss = (y.array() - y.mean()).square().sum();
  if (tss <= 0.0) return rss <= 0.0 ? 1.0 : 0.0;
  return std::clamp(1.0 - rss / tss, 0.0, 1.0);
}

void fill_inference(OlsFit &fit, Eigen::Index j, double sigma2, double dof,
                    const Eigen::MatrixXd &cov_unscaled) {
  const double se = std::sqrt(sigma2 * cov_unscaled(j, j));
  const double b = fit.beta[j];
  fit.std_err[j] = se;
  fit.term_dof[static_cast<std::size_t>(j)] = dof;
  if (se > 0.0) {
    fit.t_stat[j] = b / se;
    fit.p_value[j] = stats::t_two_sided_p(fit.t_stat[j], dof);
  } else {
    fit.t_stat[j] = b == 0.0 ? 0.0 : std::copysign(HUGE_VAL, b);
    fit.p_value[j] = b == 0.0 ? 1.0 : 0.0;
  }
  const double q = stats::t_quantile(0.975, dof);
  fit.ci_low[j] = b - q * se;
  fit.ci_high[j] = b + q * se;
}

OlsFit make_fit(const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
                std::vector<std::string> terms, const Solved &s) {
  const Eigen::Index k = x.cols();
  OlsFit fit;
  fit.terms = std::move(terms);
  fit.beta = s.beta;
  fit.std_err.resize(k);
  fit.t_stat.resize(k);
  fit.p_value.resize(k);
  fit.ci_low.resize(k);
  fit.ci_high.resize(k);
  fit.term_dof.assign(static_cast<std::size_t>(k), 0.0);
  fit.n = static_cast<std::size_t>(x.rows());
  fit.dof = fit.n - static_cast<std::size_t>(k);
  fit.rss = s.residuals.squaredNorm();
  fit.r_squared = centered_r2(y, fit.rss);
  return fit;
}

std::map<std::string, std::vector<const DesignRow *>> by_committee(
    std::span<const DesignRow> rows) {
  std::map<std::string, std::vector<const DesignRow *>> groups;
  for (const auto &r : rows) groups[r.committee].push_back(&r);
  for (const auto &[c, g] : groups) {
    if (g.size() < static_cast<std::size_t>(kTermsPerCommittee)) {
      throw Error("committee '" + c + "' has " + std::to_string(g.size()) +
                  " rows, fewer than its " + std::to_string(kTermsPerCommittee) +
                  " parameters");
    }
  }
  return groups;
}

}  // namespace

OlsFit fit_ols(const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
               std::vector<std::string> terms) {
  const Solved s = solve(x, y, terms);
  OlsFit fit = make_fit(x, y, std::move(terms), s);
  const double sigma2 = fit.rss / static_cast<double>(fit.dof);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    fill_inference(fit, j, sigma2, static_cast<double>(fit.dof), s.cov_unscaled);
  }
  return fit;
}

InteractionDesign build_interaction_design(std::span<const DesignRow> rows) {
  const auto groups = by_committee(rows);
  InteractionDesign design;
  std::map<std::string, int> block;
  for (const auto &[c, g] : groups) {
    block[c] = static_cast<int>(design.committees.size());
    design.committees.push_back(c);
    const std::string name = "Comm[" + c + "]";
    design.terms.push_back(name);
    design.terms.push_back(name + ":TP");
    design.terms.push_back(name + ":RatioF");
    design.terms.push_back(name + ":RatioG");
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  design.x = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(design.terms.size()));
  design.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const DesignRow &r = rows[static_cast<std::size_t>(i)];
    const int b = block[r.committee];
    const Eigen::Index c0 = kTermsPerCommittee * b;
    design.x(i, c0) = 1.0;
    design.x(i, c0 + 1) = r.tp;
    design.x(i, c0 + 2) = r.ratio_f;
    design.x(i, c0 + 3) = r.ratio_g;
    design.y[i] = r.outcome;
    design.row_committee.push_back(b);
  }
  return design;
}

InteractionDesign build_base_category_design(std::span<const DesignRow> rows) {
  const auto groups = by_committee(rows);
  InteractionDesign design;
  std::map<std::string, int> block;
  design.terms = {"const", "TP", "RatioF", "RatioG"};
  for (const auto &[c, g] : groups) {
    const int b = static_cast<int>(design.committees.size());
    block[c] = b;
    design.committees.push_back(c);
    if (b == 0) continue;  // base category
    const std::string name = "Comm[T." + c + "]";
    design.terms.push_back(name);
    design.terms.push_back(name + ":TP");
    design.terms.push_back(name + ":RatioF");
    design.terms.push_back(name + ":RatioG");
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  design.x = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(design.terms.size()));
  design.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const DesignRow &r = rows[static_cast<std::size_t>(i)];
    const int b = block[r.committee];
    const double values[4] = {1.0, r.tp, r.ratio_f, r.ratio_g};
    for (int t = 0; t < 4; ++t) {
      design.x(i, t) = values[t];
      if (b > 0) design.x(i, kTermsPerCommittee * b + t) = values[t];
    }
    design.y[i] = r.outcome;
    design.row_committee.push_back(b);
  }
  return design;
}

OlsFit fit_interaction(const InteractionDesign &design, VarianceMode mode) {
  if (mode == VarianceMode::kPooled) {
    return fit_ols(design.x, design.y, design.terms);
  }
  const Solved s = solve(design.x, design.y, design.terms);
  OlsFit fit = make_fit(design.x, design.y, design.terms, s);
  const std::size_t blocks = design.committees.size();
  std::vector<double> rss(blocks, 0.0);
  std::vector<std::size_t> count(blocks, 0);
  for (Eigen::Index i = 0; i < design.x.rows(); ++i) {
    const auto b = static_cast<std::size_t>(design.row_committee[static_cast<std::size_t>(i)]);
    rss[b] += s.residuals[i] * s.residuals[i];
    ++count[b];
  }
  for (std::size_t b = 0; b < blocks; ++b) {
    if (count[b] <= static_cast<std::size_t>(kTermsPerCommittee)) {
      throw Error("committee '" + design.committees[b] + "' has " +
                  std::to_string(count[b]) +
                  " rows; per-committee inference needs more than " +
                  std::to_string(kTermsPerCommittee));
    }
    const double dof = static_cast<double>(count[b] - kTermsPerCommittee);
    for (int t = 0; t < kTermsPerCommittee; ++t) {
      const auto j = static_cast<Eigen::Index>(kTermsPerCommittee * b + t);
      fill_inference(fit, j, rss[b] / dof, dof, s.cov_unscaled);
    }
  }
  return fit;
}

void write_ols_report(std::ostream &out, const OlsFit &fit) {
  tsv::write_row(out, {"term", "beta_x100", "std_err", "t", "p", "ci_low", "ci_high"});
  for (std::size_t j = 0; j < fit.terms.size(); ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    tsv::write_row(out, {fit.terms[j], tsv::format(fit.beta[i] * 100.0),
                         tsv::format(fit.std_err[i]), tsv::format(fit.t_stat[i]),
                         tsv::format(fit.p_value[i]), tsv::format(fit.ci_low[i]),
                         tsv::format(fit.ci_high[i])});
  }
}

}  // namespace polar::glm
