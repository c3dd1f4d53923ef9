#include "polar/glm.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "polar/error.h"
#include "polar/kernels.h"
#include "polar/rng.h"
#include "polar/stats.h"

namespace polar::glm {
namespace {

constexpr char kModelMagic[4] = {'V', 'A', 'D', 'M'};
constexpr std::uint16_t kModelVersion = 1;
constexpr std::size_t kModelHeader = 20;
constexpr int kMaxHalvings = 30;
constexpr int kMaxIncreases = 3;

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd &x) {
  Eigen::MatrixXd out(x.rows(), x.cols() + 1);
  out.col(0).setOnes();
  out.rightCols(x.cols()) = x;
  return out;
}

double clamp_mu(double mu) { return std::clamp(mu, kMuEps, 1.0 - kMuEps); }

double unit_deviance(double y, double mu) {
  double d = 0.0;
  if (y > 0.0) d += y * std::log(y / mu);
  if (y < 1.0) d += (1.0 - y) * std::log((1.0 - y) / (1.0 - mu));
  return 2.0 * d;
}

struct State {
  Eigen::VectorXd eta;
  std::vector<double> mu;
  double deviance = 0.0;
  double penalized = 0.0;
};

State evaluate(const Eigen::MatrixXd &xi, const std::vector<double> &y,
               const Eigen::VectorXd &beta, double ridge) {
  State s;
  s.eta = kernels::linear_predictor(xi, beta);
  s.mu.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    s.mu[i] = clamp_mu(logistic(s.eta[static_cast<Eigen::Index>(i)]));
    s.deviance += unit_deviance(y[i], s.mu[i]);
  }
  s.penalized = s.deviance + ridge * beta.tail(beta.size() - 1).squaredNorm();
  return s;
}

void put_bytes(std::string &out, const void *p, std::size_t n) {
  out.append(static_cast<const char *>(p), n);
}

static_assert(std::endian::native == std::endian::little,
              "model and embedding files are little-endian");

}  // namespace

double logistic(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

FittedGlm fit_binomial(const Eigen::MatrixXd &x, std::span<const double> y,
                       Dimension dimension, const FitOptions &options) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto d = static_cast<std::size_t>(x.cols());
  if (y.size() != n) throw Error("fit_binomial: label count differs from rows");
  if (n == 0) throw Error("fit_binomial: no training rows");
  if (!(options.ridge >= 0.0)) throw Error("fit_binomial: ridge must be >= 0");
  if (options.max_iter < 1) throw Error("fit_binomial: max_iter must be >= 1");
  if (n < d + 1 && options.ridge == 0.0) {
    throw Error("fit_binomial: " + std::to_string(n) + " rows for " +
                std::to_string(d + 1) + " coefficients; set ridge > 0");
  }
  std::vector<double> yc(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(y[i] >= 0.0 && y[i] <= 1.0)) {
      throw Error("fit_binomial: label " + std::to_string(i) + " outside [0,1]");
    }
    yc[i] = std::clamp(y[i], kLabelEps, 1.0 - kLabelEps);
  }
  if (!x.allFinite()) throw Error("fit_binomial: non-finite feature value");

  const Eigen::MatrixXd xi = with_intercept(x);
  const auto k = static_cast<Eigen::Index>(d + 1);

  FittedGlm model;
  model.dimension = dimension;
  model.ridge = options.ridge;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  State state = evaluate(xi, yc, beta, options.ridge);
  model.deviance_trace.push_back(state.penalized);

  std::vector<double> w(n), z(n);
  int increases = 0;
  for (int iter = 1; iter <= options.max_iter; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      const double mu = state.mu[i];
      w[i] = mu * (1.0 - mu);
      z[i] = state.eta[static_cast<Eigen::Index>(i)] + (yc[i] - mu) / w[i];
    }
    Eigen::MatrixXd gram = kernels::weighted_gram(xi, w);
    gram.diagonal().tail(k - 1).array() += options.ridge;
    const Eigen::VectorXd rhs = kernels::weighted_cross(xi, w, z);

    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14)) {
      if (options.ridge == 0.0) {
        throw Error("fit_binomial: weighted normal equations are singular "
                    "(collinear features?); set ridge > 0");
      }
      throw Error("fit_binomial: weighted normal equations are numerically "
                  "singular; increase ridge");
    }
    Eigen::VectorXd candidate = llt.solve(rhs);
    State next = evaluate(xi, yc, candidate, options.ridge);
    const double slack = 1e-12 * (1.0 + std::fabs(state.penalized));
    for (int h = 0; h < kMaxHalvings && !(next.penalized <= state.penalized + slack);
         ++h) {
      candidate = 0.5 * (beta + candidate);
      next = evaluate(xi, yc, candidate, options.ridge);
    }
    if (!(next.penalized <= state.penalized + slack)) {
      if (++increases >= kMaxIncreases) {
        std::ostringstream msg;
        msg << "fit_binomial diverged: deviance rose on " << increases
            << " consecutive iterations (iteration " << iter
            << ", penalized deviance " << state.penalized << " -> "
            << next.penalized << ")";
        throw Error(msg.str());
      }
      continue;
    }
    increases = 0;
    const double step = (candidate - beta).cwiseAbs().maxCoeff();
    beta = std::move(candidate);
    state = std::move(next);
    model.iterations = iter;
    model.deviance_trace.push_back(state.penalized);
    if (step < options.tol) {
      model.converged = true;
      break;
    }
  }
  if (!beta.allFinite()) throw Error("fit_binomial produced non-finite coefficients");
  model.coefficients = std::move(beta);
  model.deviance = state.deviance;
  return model;
}

std::vector<double> predict_binomial(const FittedGlm &model,
                                     const Eigen::MatrixXd &x) {
  if (static_cast<std::size_t>(x.cols()) != model.dim()) {
    throw Error("predict_binomial: matrix has " + std::to_string(x.cols()) +
                " columns, model expects " + std::to_string(model.dim()));
  }
  const Eigen::VectorXd slope = model.coefficients.tail(x.cols());
  const Eigen::VectorXd eta = kernels::linear_predictor(x, slope);
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = clamp_mu(logistic(model.coefficients[0] +
                               eta[static_cast<Eigen::Index>(i)]));
  }
  return out;
}

void write_model(const FittedGlm &model, const std::filesystem::path &path) {
  std::string bytes;
  bytes.append(kModelMagic, 4);
  put_bytes(bytes, &kModelVersion, 2);
  bytes.push_back(dimension_letter(model.dimension));
  bytes.push_back('\0');
  const auto dim = static_cast<std::uint32_t>(model.dim());
  put_bytes(bytes, &dim, 4);
  put_bytes(bytes, &model.ridge, 8);
  for (Eigen::Index i = 0; i < model.coefficients.size(); ++i) {
    const double c = model.coefficients[i];
    put_bytes(bytes, &c, 8);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("cannot write model " + path.string());
}

FittedGlm read_model(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = std::move(buf).str();
  if (bytes.size() < kModelHeader || std::memcmp(bytes.data(), kModelMagic, 4) != 0) {
    throw Error("not a model file: " + path.string());
  }
  std::uint16_t version;
  std::memcpy(&version, bytes.data() + 4, 2);
  if (version != kModelVersion) {
    throw Error("unsupported model version " + std::to_string(version));
  }
  auto dimension = parse_dimension(std::string_view(bytes.data() + 6, 1));
  if (!dimension || bytes[7] != '\0') throw Error("corrupt model header");
  std::uint32_t dim;
  std::memcpy(&dim, bytes.data() + 8, 4);
  if (bytes.size() != kModelHeader + 8 * (std::size_t{dim} + 1)) {
    throw Error("model file size does not match its header");
  }
  FittedGlm model;
  model.dimension = *dimension;
  std::memcpy(&model.ridge, bytes.data() + 12, 8);
  model.coefficients.resize(dim + 1);
  for (std::uint32_t i = 0; i <= dim; ++i) {
    std::memcpy(&model.coefficients[i], bytes.data() + kModelHeader + 8 * i, 8);
  }
  if (!model.coefficients.allFinite()) throw Error("model has non-finite coefficients");
  model.converged = true;
  model.deviance = std::nan("");
  return model;
}

std::vector<int> fold_assignment(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2) throw Error("cross-validation needs k >= 2");
  if (n < static_cast<std::size_t>(k)) throw Error("fewer rows than folds");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(perm));
  std::vector<int> fold(n);
  for (int f = 0; f < k; ++f) {
    const std::size_t begin = n * f / k, end = n * (f + 1) / k;
    for (std::size_t p = begin; p < end; ++p) fold[perm[p]] = f;
  }
  return fold;
}

namespace {

LabeledMatrix take_rows(const LabeledMatrix &data,
                        const std::vector<std::size_t> &rows,
                        const LabeledMatrix *extra) {
  const Eigen::Index extra_rows = extra ? extra->x.rows() : 0;
  if (extra && extra->x.cols() != data.x.cols()) {
    throw Error("static training rows have a different feature width");
  }
  LabeledMatrix out;
  out.x.resize(static_cast<Eigen::Index>(rows.size()) + extra_rows, data.x.cols());
  out.y.reserve(rows.size() + static_cast<std::size_t>(extra_rows));
  Eigen::Index r = 0;
  for (std::size_t i : rows) {
    out.x.row(r++) = data.x.row(static_cast<Eigen::Index>(i));
    out.y.push_back(data.y[i]);
  }
  if (extra) {
    out.x.bottomRows(extra_rows) = extra->x;
    out.y.insert(out.y.end(), extra->y.begin(), extra->y.end());
  }
  return out;
}

FoldResult evaluate_split(const LabeledMatrix &data,
                          const std::vector<std::size_t> &train,
                          const std::vector<std::size_t> &eval,
                          Dimension dimension, const LabeledMatrix *static_train,
                          const FitOptions &options) {
  const LabeledMatrix train_set = take_rows(data, train, static_train);
  const LabeledMatrix eval_set = take_rows(data, eval, nullptr);
  FoldResult out;
  out.train_size = train_set.y.size();
  out.eval_size = eval_set.y.size();
  const FittedGlm model = fit_binomial(train_set.x, train_set.y, dimension, options);
  const std::vector<double> pred = predict_binomial(model, eval_set.x);
  if (pred.size() >= 3) {
    if (auto p = stats::pearson(pred, eval_set.y)) out.r = p->r;
  }
  return out;
}

}  // namespace

CrossValResult crossval_pearson(const LabeledMatrix &data, int k,
                                std::uint64_t seed, Dimension dimension,
                                const LabeledMatrix *static_train,
                                const FitOptions &options) {
  if (static_cast<std::size_t>(data.x.rows()) != data.y.size()) {
    throw Error("crossval: label count differs from rows");
  }
  const std::vector<int> fold = fold_assignment(data.y.size(), k, seed);
  CrossValResult result;
  double sum = 0.0;
  int defined = 0;
  for (int f = 0; f < k; ++f) {
    std::vector<std::size_t> train, eval;
    for (std::size_t i = 0; i < fold.size(); ++i) {
      (fold[i] == f ? eval : train).push_back(i);
    }
    if (eval.size() < 3) {
      throw Error("crossval: fold " + std::to_string(f) +
                  " has fewer than 3 evaluation rows");
    }
    FoldResult r = evaluate_split(data, train, eval, dimension, static_train, options);
    if (r.r) {
      sum += *r.r;
      ++defined;
    }
    result.folds.push_back(r);
  }
  if (defined > 0) result.mean_r = sum / defined;
  return result;
}

FoldResult train_test_pearson(const LabeledMatrix &data, double test_fraction,
                              std::uint64_t seed, Dimension dimension,
                              const LabeledMatrix *static_train,
                              const FitOptions &options) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error("test fraction must lie in (0,1)");
  }
  const std::size_t n = data.y.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(perm));
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * n));
  if (n_test < 3 || n_test >= n) throw Error("train/test split leaves too few rows");
  std::vector<std::size_t> eval(perm.begin(), perm.begin() + n_test);
  std::vector<std::size_t> train(perm.begin() + n_test, perm.end());
  return evaluate_split(data, train, eval, dimension, static_train, options);
}

}  // namespace polar::glm
