#include "polar/cli.h"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>
#include <omp.h>

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include <openssl/evp.h>
#include <openssl/opensslv.h>
#include <unicode/uversion.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "polar/analysis.h"
#include "polar/bws.h"
#include "polar/corpus.h"
#include "polar/embeddings.h"
#include "polar/error.h"
#include "polar/glm.h"
#include "polar/metrics.h"
#include "polar/ols.h"
#include "polar/stats.h"
#include "polar/text.h"
#include "polar/tsv.h"
#include "polar/vad_lexicon.h"

#ifndef POLAR_VERSION
#define POLAR_VERSION "0.0.0"
#endif

namespace polar::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

struct UsageError : Error {
  using Error::Error;
};

std::string hex(const unsigned char *p, unsigned n) {
  static const char digits[] = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < n; ++i) {
    s.push_back(digits[p[i] >> 4]);
    s.push_back(digits[p[i] & 15]);
  }
  return s;
}

std::string read_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---- Options -------------------------------------------------------------

struct Options {
  std::string out = "out";
  std::string config;
  int threads = 0;

  std::string corpus, alias_map, lexicon, models, metrics, tuples, annotations,
      items, emotion_words, embeddings;
  std::vector<std::string> labeled, annotated;

  double hi = 0.7, lo = 0.3, alpha = 0.05;
  bool extreme_thresholds = false;
  std::size_t min_committee_sentences = 400000;
  std::size_t min_group_n = 10;
  bool mk_only = false;
  std::string ttest = "pooled";
  std::string group = "all";
  bool pooled_variance = false;
  std::string sessions = "15..24";

  double ridge = 1e-6, tol = 1e-8;
  int max_iter = 100;
  std::uint64_t seed = 0;
  std::uint32_t dim = 256;
  std::size_t min_tokens = 10, max_tokens = 30;
  bool no_filter = false;
  int folds = 5;
  double test_fraction = 0.3;

  int n_tuples = 0, tuple_size = 4;
  std::size_t top_k = 20;
};

// Options every subcommand accepts.
void add_common(CLI::App *s, Options &o) {
  s->add_option("--out", o.out, "Output directory");
  s->add_option("--config", o.config, "Configuration file (key = value)");
  s->add_option("--threads", o.threads, "OpenMP threads, 0 for the runtime default")
      ->check(CLI::NonNegativeNumber);
}

void add_thresholds(CLI::App *s, Options &o) {
  s->add_option("--hi", o.hi, "High threshold")->check(CLI::Range(0.0, 1.0));
  s->add_option("--lo", o.lo, "Low threshold")->check(CLI::Range(0.0, 1.0));
  s->add_flag("--extreme-thresholds", o.extreme_thresholds, "Use hi = 0.9, lo = 0.1");
}

void add_alpha(CLI::App *s, Options &o) {
  s->add_option("--alpha", o.alpha, "Significance level")->check(CLI::Range(0.0, 1.0));
}

void add_fit(CLI::App *s, Options &o) {
  s->add_option("--lexicon", o.lexicon, "VAD lexicon")->check(CLI::ExistingFile);
  s->add_option("--labeled", o.labeled, "Static labeled texts (repeatable)")
      ->check(CLI::ExistingFile);
  s->add_option("--annotated", o.annotated, "Annotated corpus texts (repeatable)")
      ->check(CLI::ExistingFile);
  s->add_option("--embeddings", o.embeddings,
                "Embedding base path; the baseline embedder is used when absent");
  s->add_option("--dim", o.dim, "Baseline embedder buckets")->check(CLI::Range(8u, 1u << 20));
  s->add_option("--seed", o.seed, "Random seed");
  s->add_option("--ridge", o.ridge, "L2 penalty")->check(CLI::NonNegativeNumber);
  s->add_option("--tol", o.tol, "Convergence tolerance")->check(CLI::PositiveNumber);
  s->add_option("--max-iter", o.max_iter, "IRLS iteration limit")->check(CLI::PositiveNumber);
  s->add_option("--min-tokens", o.min_tokens, "Labeled-text filter: tokens > this");
  s->add_option("--max-tokens", o.max_tokens, "Labeled-text filter: tokens < this");
  s->add_flag("--no-filter", o.no_filter, "Keep every labeled text");
  add_thresholds(s, o);
}

CLI::App *corpus_input(CLI::App *s, Options &o) {
  s->add_option("--corpus", o.corpus, "Corpus (JSON Lines)")->check(CLI::ExistingFile);
  return s;
}

void build(CLI::App &app, Options &o) {
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  auto *ingest = app.add_subcommand("ingest", "Validate a corpus and select committees");
  corpus_input(ingest, o);
  ingest->add_option("--alias-map", o.alias_map, "Committee alias map")
      ->check(CLI::ExistingFile);
  ingest->add_option("--min-committee-sentences", o.min_committee_sentences,
                     "Keep committees with more sentences than this");

  auto *train = app.add_subcommand("train", "Fit the V, A and D regression models");
  add_fit(train, o);

  auto *score = app.add_subcommand("score", "Annotate a corpus with predicted VAD");
  corpus_input(score, o);
  score->add_option("--models", o.models, "Directory written by train")
      ->check(CLI::ExistingDirectory);
  score->add_option("--lexicon", o.lexicon, "Lexicon used at training time")
      ->check(CLI::ExistingFile);
  score->add_option("--embeddings", o.embeddings, "Corpus embedding base path");

  auto *eval = app.add_subcommand("eval", "Train/test and k-fold Pearson evaluation");
  add_fit(eval, o);
  eval->add_option("--k", o.folds, "Folds")->check(CLI::Range(2, 1000));
  eval->add_option("--test-fraction", o.test_fraction, "Held-out share")
      ->check(CLI::Range(0.0, 1.0));

  auto *tuples = app.add_subcommand("bws-tuples", "Generate best-worst tuples");
  tuples->add_option("--items", o.items, "Item ids, one per line")->check(CLI::ExistingFile);
  tuples->add_option("--n-tuples", o.n_tuples, "Number of tuples")->check(CLI::PositiveNumber);
  tuples->add_option("--tuple-size", o.tuple_size, "Items per tuple")->check(CLI::Range(2, 64));
  tuples->add_option("--seed", o.seed, "Random seed");

  auto *bscore = app.add_subcommand("bws-score", "Score best-worst annotations");
  bscore->add_option("--tuples", o.tuples, "Tuples file")->check(CLI::ExistingFile);
  bscore->add_option("--annotations", o.annotations, "Annotations file")
      ->check(CLI::ExistingFile);

  auto *metrics = app.add_subcommand("metrics", "Per-protocol VAD metrics");
  corpus_input(metrics, o);
  add_thresholds(metrics, o);
  metrics->add_option("--min-group-n", o.min_group_n, "Minimum sentences per group record");
  metrics->add_flag("--mk-only", o.mk_only, "Restrict the all group to MK sentences");

  auto *extremes = app.add_subcommand("extremes", "Highest and lowest scored sentences");
  corpus_input(extremes, o);
  extremes->add_option("--top", o.top_k, "Sentences per end")->check(CLI::PositiveNumber);

  auto *compare = app.add_subcommand("compare", "Government vs opposition t-tests");
  compare->add_option("--metrics", o.metrics, "Metrics table")->check(CLI::ExistingFile);
  add_alpha(compare, o);
  compare->add_option("--ttest", o.ttest, "pooled or welch")
      ->check(CLI::IsMember({"pooled", "welch"}));

  auto *trends = app.add_subcommand("trends", "Mann-Kendall trend grid");
  trends->add_option("--metrics", o.metrics, "Metrics table")->check(CLI::ExistingFile);
  add_alpha(trends, o);
  trends->add_option("--group", o.group, "all, government or opposition")
      ->check(CLI::IsMember({"all", "government", "opposition", "gov", "opp"}));

  auto *ols = app.add_subcommand("ols", "Confound regression per committee");
  ols->add_option("--metrics", o.metrics, "Metrics table")->check(CLI::ExistingFile);
  ols->add_flag("--pooled-variance", o.pooled_variance,
                "One residual variance for all committees");

  auto *sessions = app.add_subcommand("sessions", "Per-session averages");
  corpus_input(sessions, o);
  sessions->add_option("--sessions", o.sessions, "Session range, e.g. 15..24");

  auto *emotions = app.add_subcommand("emotions", "Emotion word ratios and trends");
  corpus_input(emotions, o);
  emotions->add_option("--emotion-words", o.emotion_words, "emotion<TAB>word rows")
      ->check(CLI::ExistingFile);
  emotions->add_flag("--mk-only", o.mk_only, "Count MK sentences only");
  add_alpha(emotions, o);

  for (auto *s : app.get_subcommands({})) add_common(s, o);
}

std::string env_name(const std::string &option) {
  std::string s = "POLAR_";
  for (char c : option) {
    s.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  return s;
}

bool truthy(const std::string &v) {
  std::string s;
  for (char c : v) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off" || s.empty()) return false;
  throw UsageError("not a boolean: '" + v + "'");
}

// Config file values as `--name value` arguments for the chosen subcommand.
std::map<std::string, std::vector<std::string>> config_values(const std::string &path,
                                                              const std::string &sub) {
  std::map<std::string, std::vector<std::string>> values;
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_file(path);
  } catch (const CLI::Error &e) {
    throw UsageError("cannot read config file " + path + ": " + e.what());
  }
  for (const auto &item : items) {
    if (item.name == "++" || item.name == "--") continue;
    if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == sub)) {
      continue;
    }
    std::string name = item.name;
    std::replace(name.begin(), name.end(), '_', '-');
    values[name] = item.inputs;
  }
  return values;
}

// Adds env and config values for every option the command line left unset.
std::vector<std::string> layered_args(const std::vector<std::string> &args,
                                      CLI::App *sub, const std::string &config_path) {
  std::map<std::string, std::vector<std::string>> file;
  if (!config_path.empty()) file = config_values(config_path, sub->get_name());
  std::vector<std::string> out = args;
  std::set<std::string> known;
  for (const CLI::Option *opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    known.insert(name);
    if (name == "help" || name == "config" || opt->count() > 0) continue;
    const bool flag = opt->get_expected_min() == 0;
    std::vector<std::string> values;
    if (const char *env = std::getenv(env_name(name).c_str()); env && *env) {
      values.push_back(env);
    } else if (auto it = file.find(name); it != file.end()) {
      values = it->second;
    }
    if (flag) {
      if (!values.empty() && truthy(values.front())) out.push_back("--" + name);
      continue;
    }
    for (const auto &v : values) {
      out.push_back("--" + name);
      out.push_back(v);
    }
  }
  for (const auto &[name, v] : file) {
    if (!known.count(name)) {
      throw UsageError("config file " + config_path + ": unknown key '" + name +
                       "' for " + sub->get_name());
    }
  }
  return out;
}

void parse(CLI::App &app, std::vector<std::string> args) {
  std::reverse(args.begin(), args.end());
  app.parse(args);
}

// ---- Run context -------------------------------------------------------------

class OutLock {
 public:
  explicit OutLock(const fs::path &dir) {
    const fs::path path = dir / ".polar.lock";
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error("cannot create lock file " + path.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw Error("output directory " + dir.string() + " is in use by another run");
    }
  }
  ~OutLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  OutLock(const OutLock &) = delete;
  OutLock &operator=(const OutLock &) = delete;

 private:
  int fd_ = -1;
};

class Run {
 public:
  Run(std::string subcommand, fs::path out_dir, std::ostream &log)
      : subcommand_(std::move(subcommand)), out_dir_(std::move(out_dir)), log_(log) {}

  std::ostream &log() { return log_; }
  const fs::path &out_dir() const { return out_dir_; }

  // Records an input's digest and returns its path.
  fs::path input(const std::string &path) {
    inputs_.push_back({{"path", path}, {"sha256", sha256_file(path)}});
    return path;
  }

  void write(const std::string &name, const std::string &content) {
    const fs::path path = out_dir_ / name;
    {
      std::ofstream f(path, std::ios::binary | std::ios::trunc);
      if (!f) throw Error("cannot write " + path.string());
      f << content;
      if (!f.flush()) throw Error("write failed: " + path.string());
    }
    produced(name);
  }

  // Registers a file some other writer already put in the output directory.
  void produced(const std::string &name) {
    const fs::path path = out_dir_ / name;
    outputs_.push_back({{"file", name},
                        {"bytes", fs::file_size(path)},
                        {"sha256", sha256_file(path)}});
  }

  ordered_json &extra() { return extra_; }

  void write_manifest(const ordered_json &config, const std::vector<std::string> &command) {
    ordered_json m;
    m["tool"] = "polar";
    m["version"] = POLAR_VERSION;
    m["subcommand"] = subcommand_;
    m["command"] = command;
    m["config"] = config;
    m["inputs"] = inputs_.empty() ? ordered_json::array() : ordered_json(inputs_);
    m["outputs"] = outputs_.empty() ? ordered_json::array() : ordered_json(outputs_);
    if (!extra_.empty()) m["details"] = extra_;
    m["libraries"] = {
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                      std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"icu", U_ICU_VERSION},
        {"openssl", OPENSSL_VERSION_TEXT},
        {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
        {"cli11", CLI11_VERSION}};
    std::ofstream f(out_dir_ / (subcommand_ + ".manifest.json"), std::ios::binary | std::ios::trunc);
    f << m.dump(2) << '\n';
    if (!f.flush()) throw Error("cannot write the manifest");
  }

 private:
  std::string subcommand_;
  fs::path out_dir_;
  std::ostream &log_;
  std::vector<ordered_json> inputs_, outputs_;
  ordered_json extra_ = ordered_json::object();
};

// Effective configuration of a parsed subcommand and the argument list that
// reproduces it.
std::pair<ordered_json, std::vector<std::string>> effective_config(const CLI::App *sub) {
  ordered_json config = ordered_json::object();
  std::vector<std::string> command{"polar", sub->get_name()};
  for (const CLI::Option *opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "config") continue;
    if (opt->get_expected_min() == 0) {
      const bool on = opt->count() > 0;
      config[name] = on;
      if (on) command.push_back("--" + name);
    } else if (opt->get_expected_max() > 1) {
      const auto values = opt->count() > 0 ? opt->results() : std::vector<std::string>{};
      config[name] = values;
      for (const auto &v : values) {
        command.push_back("--" + name);
        command.push_back(v);
      }
    } else {
      const std::string v = opt->count() > 0 ? opt->results().back() : opt->get_default_str();
      config[name] = v;
      if (!v.empty()) {
        command.push_back("--" + name);
        command.push_back(v);
      }
    }
  }
  return {config, command};
}

// ---- Shared helpers ---------------------------------------------------------------

const std::string &require(const std::string &value, const char *flag) {
  if (value.empty()) throw UsageError(std::string("--") + flag + " is required");
  return value;
}

metrics::Thresholds thresholds(const Options &o, const CLI::App *sub) {
  if (o.extreme_thresholds) {
    if (sub->get_option("--hi")->count() || sub->get_option("--lo")->count()) {
      throw UsageError("--extreme-thresholds conflicts with --hi/--lo");
    }
    return metrics::kExtremeThresholds;
  }
  if (!(o.lo < o.hi)) throw UsageError("--lo must be below --hi");
  return {o.hi, o.lo};
}

std::vector<corpus::SentenceRecord> load_corpus(Run &run, const std::string &path) {
  std::ifstream in(run.input(path), std::ios::binary);
  auto parsed = corpus::parse_corpus(in);
  if (!parsed.rejects.empty()) {
    const auto &r = parsed.rejects.front();
    throw Error(path + ": " + std::to_string(parsed.rejects.size()) +
                " malformed lines (line " + std::to_string(r.line_no) + ": " + r.reason +
                "); run ingest for a full rejects report");
  }
  return std::move(parsed.records);
}

std::vector<metrics::ProtocolMetrics> load_metrics(Run &run, const std::string &path) {
  std::ifstream in(run.input(path), std::ios::binary);
  return metrics::read_metrics(in);
}

std::string clean_cell(std::string s) {
  for (char &c : s) {
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

std::string opt_cell(const std::optional<double> &v) {
  return v ? tsv::format(*v) : std::string(analysis::kUnavailable);
}

std::string dim_name(Dimension d) { return std::string(1, dimension_letter(d)); }

// ---- Embedding of training and scoring texts --------------------------------

struct TextItem {
  std::string id;
  std::string text;
};

class Embedder {
 public:
  // Baseline embedder, with lexicon features when a lexicon is given.
  Embedder(embeddings::BaselineOptions options, const lexicon::VadLexicon *lex)
      : options_(options), lexicon_(lex) {}
  // Precomputed rows looked up by id.
  explicit Embedder(embeddings::EmbeddingMatrix matrix)
      : external_(true), matrix_(std::move(matrix)) {}

  Eigen::MatrixXd embed(std::span<const TextItem> items) const {
    if (!external_) {
      std::vector<std::string> ids, texts;
      for (std::size_t i = 0; i < items.size(); ++i) {
        ids.push_back(std::to_string(i));
        texts.push_back(items[i].text);
      }
      return to_eigen(embeddings::embed_batch(ids, texts, options_, lexicon_));
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(items.size()), matrix_.dim());
    for (std::size_t i = 0; i < items.size(); ++i) {
      const auto row = matrix_.find(items[i].id);
      if (row < 0) throw Error("no embedding row for id '" + items[i].id + "'");
      const auto values = matrix_.row(static_cast<std::size_t>(row));
      for (std::uint32_t j = 0; j < matrix_.dim(); ++j) {
        x(static_cast<Eigen::Index>(i), j) = values[j];
      }
    }
    return x;
  }

  std::uint32_t width() const {
    return external_ ? matrix_.dim() : embeddings::baseline_width(options_, lexicon_ != nullptr);
  }

 private:
  static Eigen::MatrixXd to_eigen(const embeddings::EmbeddingMatrix &m) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(m.rows()), m.dim());
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const auto values = m.row(i);
      for (std::uint32_t j = 0; j < m.dim(); ++j) x(static_cast<Eigen::Index>(i), j) = values[j];
    }
    return x;
  }

  bool external_ = false;
  embeddings::BaselineOptions options_;
  const lexicon::VadLexicon *lexicon_ = nullptr;
  embeddings::EmbeddingMatrix matrix_;
};

struct TrainingData {
  lexicon::VadLexicon lexicon;
  std::vector<lexicon::LabeledText> labeled, annotated;
};

TrainingData load_training(Run &run, const Options &o) {
  TrainingData data;
  {
    std::ifstream in(run.input(require(o.lexicon, "lexicon")), std::ios::binary);
    data.lexicon = lexicon::VadLexicon::load(in);
  }
  for (const auto &r : data.lexicon.rejects()) {
    run.log() << "warning: " << o.lexicon << ":" << r.line_no << ": " << r.reason << '\n';
  }
  auto load = [&](const std::vector<std::string> &paths, std::vector<lexicon::LabeledText> &dst) {
    for (const auto &p : paths) {
      std::ifstream in(run.input(p), std::ios::binary);
      auto loaded = lexicon::load_labeled(in);
      for (const auto &r : loaded.rejects) {
        run.log() << "warning: " << p << ":" << r.line_no << ": " << r.reason << '\n';
      }
      dst.insert(dst.end(), loaded.texts.begin(), loaded.texts.end());
    }
  };
  load(o.labeled, data.labeled);
  load(o.annotated, data.annotated);
  return data;
}

std::unique_ptr<Embedder> make_embedder(Run &run, const Options &o,
                                        const lexicon::VadLexicon &lex, ordered_json &info) {
  if (!o.embeddings.empty()) {
    run.input(embeddings::payload_path(o.embeddings).string());
    run.input(embeddings::ids_path(o.embeddings).string());
    auto matrix = embeddings::read_embeddings(o.embeddings);
    info = {{"kind", "external"}, {"dim", matrix.dim()}};
    return std::make_unique<Embedder>(std::move(matrix));
  }
  embeddings::BaselineOptions base{o.dim, o.seed};
  info = {{"kind", "baseline"},
          {"dim", o.dim},
          {"seed", o.seed},
          {"lexicon_features", true},
          {"lexicon_sha256", sha256_file(o.lexicon)}};
  return std::make_unique<Embedder>(base, &lex);
}

// Lexicon forms and the labeled-text filter for one dimension.
struct DimensionData {
  glm::LabeledMatrix static_set;
  glm::LabeledMatrix annotated;
  std::size_t n_lexicon = 0, n_labeled = 0;
};

DimensionData dimension_data(const TrainingData &data, const Embedder &embedder,
                             const Options &o, const metrics::Thresholds &t, Dimension dim) {
  std::vector<TextItem> items;
  std::vector<double> y;
  for (const auto &form : data.lexicon.forms()) {
    items.push_back({"lexicon:" + form, form});
    y.push_back((*data.lexicon.lookup(form))[dim]);
  }
  DimensionData out;
  out.n_lexicon = items.size();
  std::vector<lexicon::LabeledText> labeled;
  if (o.no_filter) {
    for (const auto &t2 : data.labeled) {
      if (t2.score(dim)) labeled.push_back(t2);
    }
  } else {
    if (!(o.min_tokens < o.max_tokens)) throw UsageError("--min-tokens must be below --max-tokens");
    labeled = lexicon::filter_labeled(data.labeled, {dim, t.hi, t.lo, o.min_tokens, o.max_tokens});
  }
  for (const auto &t2 : labeled) {
    items.push_back({t2.text_id, t2.text});
    y.push_back(*t2.score(dim));
  }
  out.n_labeled = labeled.size();
  out.static_set = {embedder.embed(items), y};
  items.clear();
  y.clear();
  for (const auto &t2 : data.annotated) {
    if (!t2.score(dim)) continue;
    items.push_back({t2.text_id, t2.text});
    y.push_back(*t2.score(dim));
  }
  out.annotated = {embedder.embed(items), y};
  return out;
}

glm::FitOptions fit_options(const Options &o) { return {o.ridge, o.tol, o.max_iter}; }

glm::LabeledMatrix stack(const glm::LabeledMatrix &a, const glm::LabeledMatrix &b) {
  if (a.x.rows() == 0) return b;
  if (b.x.rows() == 0) return a;
  glm::LabeledMatrix out;
  out.x.resize(a.x.rows() + b.x.rows(), a.x.cols());
  out.x << a.x, b.x;
  out.y = a.y;
  out.y.insert(out.y.end(), b.y.begin(), b.y.end());
  return out;
}

// ---- Subcommands -----------------------------------------------------------------

void cmd_ingest(Run &run, const Options &o) {
  corpus::AliasMap aliases;
  if (!o.alias_map.empty()) {
    std::ifstream in(run.input(o.alias_map), std::ios::binary);
    aliases = corpus::load_alias_map(in);
  }
  std::ifstream in(run.input(require(o.corpus, "corpus")), std::ios::binary);
  auto parsed = corpus::parse_corpus(in, o.alias_map.empty() ? nullptr : &aliases);
  const auto counts = corpus::committee_counts(parsed.records);
  const auto selected = corpus::select_committees(parsed.records, o.min_committee_sentences);
  std::map<std::string, std::set<std::string>> protocols;
  for (const auto &r : parsed.records) protocols[r.committee].insert(r.protocol_id);
  std::vector<corpus::SentenceRecord> kept;
  for (auto &r : parsed.records) {
    if (selected.count(r.committee)) kept.push_back(std::move(r));
  }
  const auto order = corpus::order_protocols(kept);
  corpus::sort_canonical(kept, corpus::ProtocolIndex(order));

  std::ostringstream report;
  tsv::write_row(report, {"committee", "sentences", "protocols", "selected"});
  for (const auto &[c, n] : counts) {
    tsv::write_row(report, {c, std::to_string(n), std::to_string(protocols[c].size()),
                            selected.count(c) ? "1" : "0"});
  }
  std::ostringstream corpus_out, rejects;
  corpus::write_corpus(corpus_out, kept);
  corpus::write_rejects(rejects, parsed.rejects);
  run.write("corpus.jsonl", corpus_out.str());
  run.write("rejects.tsv", rejects.str());
  run.write("committees.tsv", report.str());
  run.extra() = {{"records", parsed.records.size()},
                 {"rejects", parsed.rejects.size()},
                 {"selected_committees", selected.size()},
                 {"kept_records", kept.size()}};
  run.log() << parsed.records.size() << " records, " << parsed.rejects.size() << " rejects, "
            << selected.size() << " of " << counts.size() << " committees selected\n";
}

void cmd_train(Run &run, const Options &o, const CLI::App *sub) {
  const auto t = thresholds(o, sub);
  const TrainingData data = load_training(run, o);
  ordered_json info;
  const auto embedder = make_embedder(run, o, data.lexicon, info);
  std::ostringstream report;
  tsv::write_row(report, {"dimension", "n_lexicon", "n_labeled", "n_annotated", "iterations",
                          "converged", "deviance", "train_r"});
  for (Dimension dim : kAllDimensions) {
    const DimensionData d = dimension_data(data, *embedder, o, t, dim);
    const glm::LabeledMatrix all = stack(d.static_set, d.annotated);
    if (all.x.rows() == 0) throw Error("no training rows for " + dim_name(dim));
    const glm::FittedGlm model = glm::fit_binomial(all.x, all.y, dim, fit_options(o));
    const std::string name = "model_" + dim_name(dim) + ".vadm";
    glm::write_model(model, run.out_dir() / name);
    run.produced(name);
    std::optional<double> r;
    if (all.y.size() >= 3) {
      if (auto p = stats::pearson(glm::predict_binomial(model, all.x), all.y)) r = p->r;
    }
    tsv::write_row(report, {dim_name(dim), std::to_string(d.n_lexicon),
                            std::to_string(d.n_labeled),
                            std::to_string(d.annotated.y.size()),
                            std::to_string(model.iterations), model.converged ? "1" : "0",
                            tsv::format(model.deviance), opt_cell(r)});
  }
  run.write("train_report.tsv", report.str());
  run.write("embedder.json", info.dump(2) + "\n");
}

void cmd_score(Run &run, const Options &o) {
  const fs::path models = require(o.models, "models");
  std::array<glm::FittedGlm, 3> fitted;
  for (Dimension dim : kAllDimensions) {
    const fs::path p = models / ("model_" + dim_name(dim) + ".vadm");
    run.input(p.string());
    fitted[static_cast<int>(dim)] = glm::read_model(p);
    if (fitted[static_cast<int>(dim)].dimension != dim) {
      throw Error(p.string() + " holds a model for another dimension");
    }
  }
  const fs::path info_path = models / "embedder.json";
  const auto info = ordered_json::parse(read_file(run.input(info_path.string())));
  lexicon::VadLexicon lex;
  std::unique_ptr<Embedder> embedder;
  if (info.at("kind") == "baseline") {
    const std::string &lexicon_path = require(o.lexicon, "lexicon");
    const std::string digest = sha256_file(lexicon_path);
    if (digest != info.at("lexicon_sha256").get<std::string>()) {
      throw Error(lexicon_path + " differs from the lexicon the models were trained with");
    }
    std::ifstream in(run.input(lexicon_path), std::ios::binary);
    lex = lexicon::VadLexicon::load(in);
    embedder = std::make_unique<Embedder>(
        embeddings::BaselineOptions{info.at("dim").get<std::uint32_t>(),
                                    info.at("seed").get<std::uint64_t>()},
        &lex);
  } else {
    const std::string &base = require(o.embeddings, "embeddings");
    run.input(embeddings::payload_path(base).string());
    run.input(embeddings::ids_path(base).string());
    embedder = std::make_unique<Embedder>(embeddings::read_embeddings(base));
  }
  if (embedder->width() != fitted[0].dim()) {
    throw Error("embedding width " + std::to_string(embedder->width()) +
                " differs from the model's " + std::to_string(fitted[0].dim()));
  }
  auto records = load_corpus(run, require(o.corpus, "corpus"));
  constexpr std::size_t kChunk = 4096;
  for (std::size_t begin = 0; begin < records.size(); begin += kChunk) {
    const std::size_t end = std::min(records.size(), begin + kChunk);
    std::vector<TextItem> items;
    for (std::size_t i = begin; i < end; ++i) {
      items.push_back({records[i].sentence_id, records[i].text});
    }
    const Eigen::MatrixXd x = embedder->embed(items);
    std::array<std::vector<double>, 3> pred;
    for (int d = 0; d < 3; ++d) pred[d] = glm::predict_binomial(fitted[d], x);
    for (std::size_t i = begin; i < end; ++i) {
      records[i].vad = Vad{pred[0][i - begin], pred[1][i - begin], pred[2][i - begin]};
    }
  }
  std::ostringstream out;
  corpus::write_corpus(out, records);
  run.write("scored.jsonl", out.str());
}

void cmd_eval(Run &run, const Options &o, const CLI::App *sub) {
  const auto t = thresholds(o, sub);
  const TrainingData data = load_training(run, o);
  if (data.annotated.empty()) throw UsageError("--annotated is required");
  ordered_json info;
  const auto embedder = make_embedder(run, o, data.lexicon, info);
  std::ostringstream table;
  tsv::write_row(table, {"dimension", "split", "fold", "train_n", "eval_n", "r"});
  for (Dimension dim : kAllDimensions) {
    const DimensionData d = dimension_data(data, *embedder, o, t, dim);
    const glm::LabeledMatrix *static_set = d.static_set.x.rows() ? &d.static_set : nullptr;
    const auto one = glm::train_test_pearson(d.annotated, o.test_fraction, o.seed, dim,
                                             static_set, fit_options(o));
    tsv::write_row(table, {dim_name(dim), "train_test", "1", std::to_string(one.train_size),
                           std::to_string(one.eval_size), opt_cell(one.r)});
    const auto cv = glm::crossval_pearson(d.annotated, o.folds, o.seed, dim, static_set,
                                          fit_options(o));
    for (std::size_t f = 0; f < cv.folds.size(); ++f) {
      const auto &fr = cv.folds[f];
      tsv::write_row(table, {dim_name(dim), "kfold", std::to_string(f + 1),
                             std::to_string(fr.train_size), std::to_string(fr.eval_size),
                             opt_cell(fr.r)});
    }
    tsv::write_row(table, {dim_name(dim), "kfold", "mean", "", "", opt_cell(cv.mean_r)});
  }
  run.write("eval.tsv", table.str());
  run.extra() = {{"embedder", info}};
}

void cmd_bws_tuples(Run &run, const Options &o) {
  std::ifstream in(run.input(require(o.items, "items")), std::ios::binary);
  std::vector<std::string> items;
  std::string line;
  while (tsv::read_line(in, line)) {
    const std::string id = text::normalize(std::string(tsv::split(line).front()));
    if (!id.empty() && id[0] != '#') items.push_back(id);
  }
  if (o.n_tuples <= 0) throw UsageError("--n-tuples is required");
  const auto tuples = bws::generate_tuples(items, {o.n_tuples, o.tuple_size, o.seed});
  std::ostringstream out;
  bws::write_tuples(out, tuples);
  run.write("tuples.tsv", out.str());
}

void cmd_bws_score(Run &run, const Options &o) {
  std::vector<bws::BwsTuple> tuples;
  std::vector<bws::BwsAnnotation> annotations;
  {
    std::ifstream in(run.input(require(o.tuples, "tuples")), std::ios::binary);
    tuples = bws::read_tuples(in);
  }
  {
    std::ifstream in(run.input(require(o.annotations, "annotations")), std::ios::binary);
    annotations = bws::read_annotations(in);
  }
  std::ostringstream scores, agreement, rejects;
  tsv::write_row(agreement, {"dimension", "annotator_a", "annotator_b", "n_common", "r"});
  tsv::write_row(rejects, {"dimension", "reason"});
  bool header = true;
  for (Dimension dim : kAllDimensions) {
    std::vector<std::string> skipped;
    const auto per = bws::score_by_annotator(tuples, annotations, dim, &skipped);
    for (const auto &s : skipped) tsv::write_row(rejects, {dim_name(dim), s});
    if (per.empty()) continue;
    bws::write_scores(scores, dim, bws::aggregate_and_normalize(per), header);
    header = false;
    if (per.size() < 2) {
      run.log() << "warning: " << dim_name(dim) << ": one annotator, no agreement\n";
      continue;
    }
    const auto a = bws::pairwise_agreement(per);
    for (const auto &p : a.pairs) {
      tsv::write_row(agreement, {dim_name(dim), p.first, p.second, std::to_string(p.n_common),
                                 opt_cell(p.r)});
    }
    tsv::write_row(agreement, {dim_name(dim), "mean", "", "", opt_cell(a.mean_r)});
    for (const auto &w : a.warnings) run.log() << "warning: " << w << '\n';
  }
  if (header) throw Error("no valid annotations");
  run.write("bws_scores.tsv", scores.str());
  run.write("bws_agreement.tsv", agreement.str());
  run.write("bws_rejects.tsv", rejects.str());
}

void cmd_metrics(Run &run, const Options &o, const CLI::App *sub) {
  const auto t = thresholds(o, sub);
  const auto records = load_corpus(run, require(o.corpus, "corpus"));
  const auto order = corpus::order_protocols(records);
  metrics::MetricsOptions options{t, o.min_group_n, !o.mk_only};
  const auto table = metrics::compute_metrics(records, order, options);
  std::ostringstream m, s;
  metrics::write_metrics(m, table);
  metrics::write_threshold_stats(s, metrics::threshold_stats(records, t));
  run.write("metrics.tsv", m.str());
  run.write("vad_stats.tsv", s.str());
}

void cmd_extremes(Run &run, const Options &o) {
  const auto records = load_corpus(run, require(o.corpus, "corpus"));
  std::map<std::string, std::vector<corpus::SentenceRecord>> by_committee;
  for (const auto &r : records) by_committee[r.committee].push_back(r);
  std::ostringstream out;
  tsv::write_row(out, {"committee", "dimension", "rank", "score", "sentence_id", "text"});
  for (const auto &[c, rows] : by_committee) {
    for (Dimension dim : kAllDimensions) {
      const auto e = metrics::extreme_sentences(rows, dim, o.top_k);
      if (e.short_input) {
        run.log() << "warning: " << c << ": fewer than " << 2 * o.top_k << " scored sentences\n";
      }
      auto emit = [&](const std::vector<metrics::ScoredSentence> &list, int sign) {
        for (std::size_t i = 0; i < list.size(); ++i) {
          tsv::write_row(out, {c, dim_name(dim), std::to_string(sign * static_cast<int>(i + 1)),
                               tsv::format(list[i].score), list[i].sentence_id,
                               clean_cell(list[i].text)});
        }
      };
      emit(e.top, 1);
      emit(e.bottom, -1);
    }
  }
  run.write("extremes.tsv", out.str());
}

void write_grid_pair(Run &run, const std::string &stem, const analysis::Grid &grid) {
  std::ostringstream labels, pvals;
  analysis::write_grid(labels, grid);
  analysis::write_grid_pvalues(pvals, grid);
  run.write(stem + ".tsv", labels.str());
  run.write(stem + ".pvals.tsv", pvals.str());
  for (const auto &[c, cells] : grid.rows) {
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (!cells[k].note.empty()) {
        run.log() << "note: " << c << "/" << grid.metrics[k] << ": " << cells[k].note << '\n';
      }
    }
  }
}

void cmd_compare(Run &run, const Options &o) {
  const auto table = load_metrics(run, require(o.metrics, "metrics"));
  analysis::CompareOptions options{o.alpha, o.ttest == "welch" ? stats::TTestVariant::kWelch
                                                               : stats::TTestVariant::kPooled};
  write_grid_pair(run, "compare", analysis::compare_gov_opp(table, options));
}

void cmd_trends(Run &run, const Options &o) {
  const auto table = load_metrics(run, require(o.metrics, "metrics"));
  const auto group = *metrics::parse_group(o.group);
  const std::string stem =
      group == metrics::Group::kAll ? "trends" : "trends_" + std::string(metrics::to_string(group));
  write_grid_pair(run, stem, analysis::trend_table(table, o.alpha, group));
}

void cmd_ols(Run &run, const Options &o) {
  const auto table = load_metrics(run, require(o.metrics, "metrics"));
  analysis::ConfoundOptions options;
  options.variance = o.pooled_variance ? glm::VarianceMode::kPooled
                                       : glm::VarianceMode::kPerCommittee;
  ordered_json fits = ordered_json::array();
  for (const auto &report : analysis::confound_ols(table, options)) {
    std::ostringstream out;
    glm::write_ols_report(out, report.fit);
    run.write("ols_" + report.outcome + ".tsv", out.str());
    fits.push_back({{"outcome", report.outcome},
                    {"n", report.fit.n},
                    {"dof", report.fit.dof},
                    {"r_squared", tsv::format(report.fit.r_squared)}});
  }
  run.extra() = {{"fits", fits}};
}

std::pair<int, int> session_range(const std::string &spec) {
  const auto dots = spec.find("..");
  auto parse = [&](std::string_view s) {
    auto v = tsv::parse_int(s);
    if (!v) throw UsageError("bad --sessions value '" + spec + "'");
    return static_cast<int>(*v);
  };
  if (dots == std::string::npos) {
    const int s = parse(spec);
    return {s, s};
  }
  return {parse(std::string_view(spec).substr(0, dots)),
          parse(std::string_view(spec).substr(dots + 2))};
}

void cmd_sessions(Run &run, const Options &o) {
  const auto [first, last] = session_range(o.sessions);
  if (first > last) throw UsageError("--sessions range is empty");
  const auto records = load_corpus(run, require(o.corpus, "corpus"));
  std::ostringstream out;
  analysis::write_sessions(out, analysis::session_averages(records, first, last));
  run.write("sessions.tsv", out.str());
}

void cmd_emotions(Run &run, const Options &o) {
  std::map<std::string, std::set<std::string>> words;
  {
    std::ifstream in(run.input(require(o.emotion_words, "emotion-words")), std::ios::binary);
    std::string line;
    std::size_t line_no = 0;
    while (tsv::read_line(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#') continue;
      const auto fields = tsv::split(line);
      if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
        throw Error(o.emotion_words + ":" + std::to_string(line_no) +
                    ": expected emotion<TAB>word");
      }
      words[std::string(fields[0])].insert(text::normalize(std::string(fields[1])));
    }
  }
  if (words.empty()) throw Error(o.emotion_words + " lists no emotion words");
  const auto records = load_corpus(run, require(o.corpus, "corpus"));
  const auto order = corpus::order_protocols(records);
  std::vector<std::string> emotions;
  for (const auto &[e, w] : words) emotions.push_back(e);

  std::ostringstream ratios;
  tsv::write_row(ratios, {"committee", "protocol_id", "time_index", "emotion", "ratio"});
  std::map<std::string, std::map<std::string, std::vector<double>>> series;
  for (const auto &slice : corpus::group_by_protocol(records, order)) {
    std::vector<const corpus::SentenceRecord *> members;
    for (std::size_t i : slice.rows) {
      if (!o.mk_only || records[i].is_mk) members.push_back(&records[i]);
    }
    auto &committee_series = series[slice.key.committee];
    for (const auto &e : emotions) {
      const auto r = metrics::emotion_word_ratio(members, words.at(e));
      committee_series[e];
      if (r) committee_series[e].push_back(*r);
      tsv::write_row(ratios, {slice.key.committee, slice.key.protocol_id,
                              std::to_string(slice.key.time_index), e, opt_cell(r)});
    }
  }
  run.write("emotion_ratios.tsv", ratios.str());
  write_grid_pair(run, "emotion_trends", analysis::trend_grid(series, emotions, o.alpha));
}

void dispatch(Run &run, const Options &o, const CLI::App *sub) {
  const std::string &name = sub->get_name();
  if (name == "ingest") return cmd_ingest(run, o);
  if (name == "train") return cmd_train(run, o, sub);
  if (name == "score") return cmd_score(run, o);
  if (name == "eval") return cmd_eval(run, o, sub);
  if (name == "bws-tuples") return cmd_bws_tuples(run, o);
  if (name == "bws-score") return cmd_bws_score(run, o);
  if (name == "metrics") return cmd_metrics(run, o, sub);
  if (name == "extremes") return cmd_extremes(run, o);
  if (name == "compare") return cmd_compare(run, o);
  if (name == "trends") return cmd_trends(run, o);
  if (name == "ols") return cmd_ols(run, o);
  if (name == "sessions") return cmd_sessions(run, o);
  if (name == "emotions") return cmd_emotions(run, o);
  throw UsageError("unknown subcommand " + name);
}

}  // namespace

std::string sha256_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 unavailable");
  }
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  return hex(md, len);
}

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App probe{"polar: VAD scoring and affective-polarization analysis", "polar"};
  Options probe_options;
  build(probe, probe_options);
  if (args.empty()) {
    err << probe.help();
    return kExitUsage;
  }
  try {
    parse(probe, args);
  } catch (const CLI::ParseError &e) {
    const int code = probe.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  CLI::App *probe_sub = probe.get_subcommands().front();

  CLI::App app{"polar: VAD scoring and affective-polarization analysis", "polar"};
  Options o;
  build(app, o);
  try {
    std::string config = probe_options.config;
    if (config.empty()) {
      if (const char *env = std::getenv("POLAR_CONFIG"); env && *env) config = env;
    }
    parse(app, layered_args(args, probe_sub, config));
    o.config.clear();
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const UsageError &e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  const CLI::App *sub = app.get_subcommands().front();

  try {
    if (o.threads > 0) omp_set_num_threads(o.threads);
    const fs::path out_dir = o.out;
    fs::create_directories(out_dir);
    OutLock lock(out_dir);
    Run ctx(sub->get_name(), out_dir, err);
    dispatch(ctx, o, sub);
    const auto [config, command] = effective_config(sub);
    ctx.write_manifest(config, command);
    return kExitOk;
  } catch (const UsageError &e) {
    err << "error: " << e.what() << '\n' << "Run with --help for usage.\n";
    return kExitUsage;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace polar::cli
