// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.h"
#include "polar/analysis.h"
#include "polar/bws.h"
#include "polar/glm.h"
#include "polar/ols.h"
#include "polar/rng.h"
#include "polar/stats.h"
#include "polar/tsv.h"
#include "synthetic.h"

namespace fs = std::filesystem;
using namespace polar;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double x, int precision = 3) {
  std::ostringstream s;
  s.precision(precision);
  s << x;
  return s.str();
}

bool cli_ok(const std::vector<std::string> &args, std::string *why) {
  std::string err;
  const int code = synth::run_cli(args, &err);
  if (code != 0 && why) *why = args[0] + " exited " + std::to_string(code) + ": " + err;
  return code == 0;
}

analysis::Grid load_grid(const std::string &stem) {
  std::ifstream labels(stem + ".tsv"), pvals(stem + ".pvals.tsv");
  return analysis::read_grid(labels, &pvals);
}

// ---- 1 --------------------------------------------------------------------

Outcome glm_recovery() {
  const int n = 2000, d = 10;
  Rng rng(20240601);
  Eigen::VectorXd beta(d + 1);
  for (int j = 0; j <= d; ++j) beta[j] = rng.uniform() * 2 - 1;
  Eigen::MatrixXd x(n, d);
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) {
    double eta = beta[0];
    for (int j = 0; j < d; ++j) {
      x(i, j) = synth::normal(rng);
      eta += beta[j + 1] * x(i, j);
    }
    y[i] = 1.0 / (1.0 + std::exp(-(eta + 0.01 * synth::normal(rng))));
  }
  const auto t0 = Clock::now();
  const auto fit = glm::fit_binomial(x, y, Dimension::kValence, {0.0, 1e-10, 100});
  const double elapsed = seconds_since(t0);
  const double linf = (fit.coefficients - beta).cwiseAbs().maxCoeff();
  const auto gd = oracle::gradient_descent(x, y);
  const double dev_gap = std::abs(fit.deviance - gd.deviance);
  return {fit.converged && linf <= 0.05 && elapsed < 5.0 && dev_gap <= 1e-6,
          "Linf " + num(linf) + " (<= 0.05), fit " + num(elapsed) + " s (< 5), |deviance - oracle| " +
              num(dev_gap) + " (<= 1e-6), " + std::to_string(gd.iterations) + " oracle steps"};
}

// ---- 2 --------------------------------------------------------------------

Outcome mann_kendall_exact() {
  Rng rng(77);
  int mismatches = 0;
  double worst_p = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(stats::kMannKendallMinLength + rng.below(50 - stats::kMannKendallMinLength + 1));
    const int levels = 2 + static_cast<int>(rng.below(8));
    for (double &v : x) v = static_cast<double>(rng.below(levels));
    const auto got = stats::mann_kendall(x);
    const auto want = oracle::mann_kendall(x);
    if (got.s != want.s || got.var_s != want.var_s) ++mismatches;
    worst_p = std::max(worst_p, std::abs(got.p - want.p));
  }
  std::vector<double> inc(20);
  std::iota(inc.begin(), inc.end(), 1.0);
  const auto up = stats::mann_kendall(inc);
  const bool inc_ok = up.s == 190 && up.direction == stats::TrendDirection::kIncreasing;
  return {mismatches == 0 && worst_p <= 1e-9 && inc_ok,
          std::to_string(mismatches) + " S/Var mismatches in 100 tied series, max |p - oracle| " +
              num(worst_p) + " (<= 1e-9), increasing n=20: S = " + std::to_string(up.s) +
              (inc_ok ? " up" : " wrong direction")};
}

// ---- 3 --------------------------------------------------------------------

Outcome ols_split() {
  double worst = 0, worst_r2 = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    std::vector<glm::DesignRow> rows;
    const int committees = 2 + static_cast<int>(rng.below(5));
    for (int c = 0; c < committees; ++c) {
      const int n = 10 + static_cast<int>(rng.below(60));
      const double sd = 0.005 + 0.02 * rng.uniform();
      for (int t = 1; t <= n; ++t) {
        glm::DesignRow r{synth::committee_name(c), static_cast<double>(t), rng.uniform(),
                         rng.uniform(), 0};
        r.outcome = 0.3 + 0.001 * c * t + 0.02 * r.ratio_f - 0.01 * r.ratio_g + sd * synth::normal(rng);
        rows.push_back(r);
      }
    }
    const auto design = glm::build_interaction_design(rows);
    const auto split = glm::fit_interaction(design, glm::VarianceMode::kPerCommittee);
    for (std::size_t c = 0; c < design.committees.size(); ++c) {
      std::vector<int> idx;
      for (int i = 0; i < static_cast<int>(rows.size()); ++i)
        if (design.row_committee[i] == static_cast<int>(c)) idx.push_back(i);
      Eigen::MatrixXd x(idx.size(), 4);
      Eigen::VectorXd y(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) {
        x.row(i) = design.x.row(idx[i]).segment(4 * c, 4);
        y[i] = design.y[idx[i]];
      }
      const auto sep = oracle::ols(x, y);
      for (int j = 0; j < 4; ++j) {
        const int k = static_cast<int>(4 * c) + j;
        worst = std::max({worst, std::abs(split.beta[k] - sep.beta[j]),
                          std::abs(split.std_err[k] - sep.se[j]),
                          std::abs(split.t_stat[k] - sep.t[j]) / std::max(1.0, std::abs(sep.t[j])),
                          std::abs(split.p_value[k] - sep.p[j])});
      }
    }
    const auto base = glm::build_base_category_design(rows);
    const auto eq1 = glm::fit_ols(base.x, base.y, base.terms);
    worst_r2 = std::max(worst_r2, std::abs(eq1.r_squared - split.r_squared));
  }
  return {worst <= 1e-8 && worst_r2 <= 1e-10,
          "max block deviation from separate fits " + num(worst) + " (<= 1e-8), |r2 base - r2 split| " +
              num(worst_r2) + " (<= 1e-10) over 10 fixtures"};
}

// ---- 4 --------------------------------------------------------------------

Outcome bws_oracle() {
  int mismatched = 0, gold_bad = 0;
  double worst_sum = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    std::vector<std::string> items;
    for (int i = 0; i < 12; ++i) items.push_back("item" + std::to_string(i));
    const auto tuples = bws::generate_tuples(items, {20, 4, seed});
    Rng rng(seed * 31);
    std::vector<bws::BwsAnnotation> ann;
    for (int a = 0; a < 3; ++a) {
      for (const auto &t : tuples) {
        std::size_t b = rng.below(4), w = rng.below(3);
        if (w >= b) ++w;
        // item0 is always chosen best where it appears.
        auto pos = std::find(t.item_ids.begin(), t.item_ids.end(), "item0");
        if (pos != t.item_ids.end()) {
          b = static_cast<std::size_t>(pos - t.item_ids.begin());
          w = (b + 1 + rng.below(3)) % 4;
        }
        ann.push_back({t.tuple_id, "ann" + std::to_string(a), Dimension::kValence, t.item_ids[b],
                       t.item_ids[w]});
      }
    }
    const auto raw = bws::score_bws(tuples, ann, Dimension::kValence).raw;
    if (raw != oracle::bws_counts(tuples, ann, Dimension::kValence)) ++mismatched;
    const auto gold = bws::aggregate_and_normalize(
        bws::score_by_annotator(tuples, ann, Dimension::kValence));
    if (gold.count("item0") && gold.at("item0").gold != 1.0) ++gold_bad;
    std::map<std::string, int> appearances;
    for (const auto &t : tuples)
      for (const auto &i : t.item_ids) appearances[i] += 3;
    double total = 0;
    for (const auto &[item, s] : raw) total += std::round(s * appearances.at(item));
    worst_sum = std::max(worst_sum, std::abs(total));
  }
  return {mismatched == 0 && gold_bad == 0 && worst_sum == 0,
          std::to_string(mismatched) + "/50 fixtures differ from counting, " + std::to_string(gold_bad) +
              " all-best items off gold 1.0, max |sum(best - worst)| " + num(worst_sum)};
}

// ---- 5 --------------------------------------------------------------------

Outcome planted_trend() {
  const auto t0 = Clock::now();
  int passes = 0, control_any = 0;
  std::string why, seeds_failed;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    synth::TempDir dir("accept_trend");
    const auto lex = synth::make_lexicon(1000, 1000 + seed);
    synth::write_file(dir / "lexicon.tsv", lex.tsv());
    synth::TrendSpec spec;
    spec.seed = seed;
    synth::write_corpus_file(dir / "corpus.jsonl", synth::planted_trend_corpus(lex, spec));
    const std::string m = dir / "models", s = dir / "scored";
    if (!cli_ok({"train", "--lexicon", dir / "lexicon.tsv", "--seed", std::to_string(seed), "--out", m}, &why) ||
        !cli_ok({"score", "--corpus", dir / "corpus.jsonl", "--models", m, "--lexicon",
                 dir / "lexicon.tsv", "--out", s},
                &why) ||
        !cli_ok({"metrics", "--corpus", s + "/scored.jsonl", "--out", s}, &why) ||
        !cli_ok({"trends", "--metrics", s + "/metrics.tsv", "--out", s}, &why)) {
      return {false, "seed " + std::to_string(seed) + ": " + why};
    }
    const auto grid = load_grid(s + "/trends");
    const auto &planted = grid.at(synth::committee_name(0), "A_mean");
    bool ok = planted.label == "up" && planted.p && *planted.p < 0.05;
    for (int c = 1; c < spec.committees; ++c) {
      const auto &cell = grid.at(synth::committee_name(c), "A_mean");
      if (cell.label == "up") ok = false;
      if (cell.label != analysis::kNotSignificant) ++control_any;
    }
    if (ok) {
      ++passes;
    } else {
      seeds_failed += " " + std::to_string(seed);
    }
  }
  const double elapsed = seconds_since(t0);
  return {passes >= 19 && elapsed < 120.0,
          std::to_string(passes) + "/20 seeds (>= 19) with planted A_mean up and no control A_mean up" +
              (seeds_failed.empty() ? "" : " (failed:" + seeds_failed + ")") + "; control A_mean cells " +
              "flagged in either direction: " + std::to_string(control_any) + "/40; " + num(elapsed) +
              " s (< 120)"};
}

// ---- 6 --------------------------------------------------------------------

Outcome planted_group_difference() {
  synth::TempDir dir("accept_group");
  synth::write_corpus_file(dir / "corpus.jsonl", synth::group_offset_corpus(100, 15, 0.1, 0.2, 6));
  std::string why;
  const std::string out = dir / "out";
  if (!cli_ok({"metrics", "--corpus", dir / "corpus.jsonl", "--out", out}, &why) ||
      !cli_ok({"compare", "--metrics", out + "/metrics.tsv", "--out", out}, &why)) {
    return {false, why};
  }
  const auto grid = load_grid(out + "/compare");
  const auto &mean = grid.at("Finance", "V_mean");
  const auto &low = grid.at("Finance", "V_low");
  const bool ok = mean.label == "gov" && mean.p && *mean.p < 0.05 && low.label == "opp" && low.p &&
                  *low.p < 0.05;
  return {ok, "V_mean = " + mean.label + " (p " + num(mean.p.value_or(NAN)) + "), V_low = " + low.label +
                  " (p " + num(low.p.value_or(NAN)) + ")"};
}

// ---- 7 --------------------------------------------------------------------

Outcome calibration() {
  Rng rng(7);
  int t_reject = 0, welch_reject = 0, mk_reject = 0;
  const int trials = 1000;
  for (int i = 0; i < trials; ++i) {
    std::vector<double> a(30), b(30);
    for (double &v : a) v = synth::normal(rng);
    for (double &v : b) v = synth::normal(rng);
    t_reject += stats::two_sample_t(a, b).p < 0.05;
    welch_reject += stats::two_sample_t(a, b, stats::TTestVariant::kWelch).p < 0.05;
    std::vector<double> series(50);
    for (double &v : series) v = synth::normal(rng);
    mk_reject += stats::mann_kendall(series).p < 0.05;
  }
  auto in_band = [&](int r) { return r >= 0.02 * trials && r <= 0.08 * trials; };
  return {in_band(t_reject) && in_band(welch_reject) && in_band(mk_reject),
          "type-I error: pooled t " + num(100.0 * t_reject / trials) + "%, Welch t " +
              num(100.0 * welch_reject / trials) + "%, Mann-Kendall " + num(100.0 * mk_reject / trials) +
              "% (each in [2, 8])"};
}

// ---- 8 --------------------------------------------------------------------

Outcome threshold_stats() {
  synth::TempDir dir("accept_thresholds");
  synth::write_corpus_file(dir / "corpus.jsonl", synth::quantile_grid_corpus(100000));
  double worst = 0;
  std::string why;
  for (auto [hi, lo] : {std::pair{0.7, 0.3}, std::pair{0.9, 0.1}}) {
    const std::string out = dir / ("out_" + std::to_string(hi));
    if (!cli_ok({"metrics", "--corpus", dir / "corpus.jsonl", "--out", out, "--hi", tsv::format(hi),
                 "--lo", tsv::format(lo)},
                &why)) {
      return {false, why};
    }
    // Uniform, symmetric triangular and U^2 distributions.
    const double high[3] = {1 - hi, 2 * (1 - hi) * (1 - hi), 1 - std::sqrt(hi)};
    const double low[3] = {lo, 2 * lo * lo, std::sqrt(lo)};
    std::ifstream in(out + "/vad_stats.tsv");
    std::string line;
    std::getline(in, line);
    for (const double *expect : {high, low}) {
      if (!std::getline(in, line)) return {false, "vad_stats.tsv is short"};
      const auto fields = tsv::split(line);
      for (int d = 0; d < 3; ++d) {
        const auto pct = tsv::parse_double(fields.at(1 + d));
        if (!pct) return {false, "bad number in vad_stats.tsv"};
        worst = std::max(worst, std::abs(*pct - 100.0 * expect[d]));
      }
    }
  }
  return {worst <= 0.1, "max |reported - analytic| " + num(worst) +
                            " percentage points (<= 0.1) at (0.7, 0.3) and (0.9, 0.1)"};
}

// ---- 9 --------------------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path &dir) {
  std::map<std::string, std::string> files;
  for (const auto &e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = synth::read_file(e.path());
  }
  return files;
}

Outcome determinism() {
  synth::TempDir dir("accept_determinism");
  const auto lex = synth::make_lexicon(300, 9);
  synth::write_file(dir / "lexicon.tsv", lex.tsv());
  synth::TrendSpec spec;
  spec.protocols = 30;
  spec.sentences = 30;
  spec.seed = 9;
  synth::write_corpus_file(dir / "corpus.jsonl", synth::planted_trend_corpus(lex, spec));

  Rng rng(9);
  std::ostringstream labeled, annotated;
  labeled << "text_id\ttext\tv\ta\td\n";
  annotated << "text_id\ttext\tv\ta\td\n";
  for (int i = 0; i < 120; ++i) {
    std::string text;
    Vad sum{0, 0, 0};
    for (int k = 0; k < 15; ++k) {
      const std::size_t w = rng.below(lex.words.size());
      text += (k ? " " : "") + lex.words[w];
      sum.v += lex.vad[w].v / 15;
      sum.a += lex.vad[w].a / 15;
      sum.d += lex.vad[w].d / 15;
    }
    auto &dst = i % 2 ? annotated : labeled;
    dst << "t" << i << '\t' << text << '\t' << tsv::format(sum.v) << '\t' << tsv::format(sum.a) << '\t'
        << tsv::format(sum.d) << '\n';
  }
  synth::write_file(dir / "labeled.tsv", labeled.str());
  synth::write_file(dir / "annotated.tsv", annotated.str());
  std::string items;
  for (int i = 0; i < 16; ++i) items += "item" + std::to_string(i) + "\n";
  synth::write_file(dir / "items.txt", items);
  synth::write_file(dir / "emotions.tsv", "anger\tw0001\nanger\tw0002\njoy\tw0003\n");

  const std::string o = dir / "out";
  const std::vector<std::vector<std::string>> steps{
      {"ingest", "--corpus", dir / "corpus.jsonl", "--min-committee-sentences", "100"},
      {"train", "--lexicon", dir / "lexicon.tsv", "--labeled", dir / "labeled.tsv", "--annotated",
       dir / "annotated.tsv", "--no-filter", "--dim", "64"},
      {"eval", "--lexicon", dir / "lexicon.tsv", "--labeled", dir / "labeled.tsv", "--annotated",
       dir / "annotated.tsv", "--no-filter", "--dim", "64"},
      {"score", "--corpus", o + "/corpus.jsonl", "--models", o, "--lexicon", dir / "lexicon.tsv"},
      {"bws-tuples", "--items", dir / "items.txt", "--n-tuples", "24", "--seed", "4"},
      {"bws-score", "--tuples", o + "/tuples.tsv", "--annotations", dir / "annotations.tsv"},
      {"metrics", "--corpus", o + "/scored.jsonl", "--min-group-n", "5"},
      {"extremes", "--corpus", o + "/scored.jsonl", "--top", "5"},
      {"compare", "--metrics", o + "/metrics.tsv"},
      {"trends", "--metrics", o + "/metrics.tsv"},
      {"ols", "--metrics", o + "/metrics.tsv"},
      {"sessions", "--corpus", o + "/scored.jsonl"},
      {"emotions", "--corpus", o + "/scored.jsonl", "--emotion-words", dir / "emotions.tsv"},
  };

  auto run_all = [&](std::string *why) {
    for (auto args : steps) {
      if (args[0] == "bws-score") {
        // Annotations follow the generated tuples: first item best, last worst.
        std::ifstream in(o + "/tuples.tsv");
        std::ostringstream ann;
        ann << "tuple_id\tannotator_id\tdimension\tbest_item\tworst_item\n";
        for (const auto &t : bws::read_tuples(in)) {
          for (const char *who : {"a", "b"}) {
            ann << t.tuple_id << '\t' << who << "\tV\t" << t.item_ids.front() << '\t' << t.item_ids.back()
                << '\n';
          }
        }
        synth::write_file(dir / "annotations.tsv", ann.str());
      }
      args.push_back("--out");
      args.push_back(o);
      if (!cli_ok(args, why)) return false;
    }
    return true;
  };

  std::string why;
  if (!run_all(&why)) return {false, "first run: " + why};
  const auto first = snapshot(o);
  fs::remove_all(o);
  if (!run_all(&why)) return {false, "second run: " + why};
  const auto second = snapshot(o);

  int manifests = 0;
  std::vector<std::string> differing;
  for (const auto &[name, bytes] : first) {
    manifests += name.ends_with(".manifest.json");
    auto it = second.find(name);
    if (it == second.end() || it->second != bytes) differing.push_back(name);
  }
  if (second.size() != first.size()) differing.push_back("(file sets differ)");
  std::string detail = std::to_string(first.size()) + " files including " + std::to_string(manifests) +
                       " manifests from " + std::to_string(steps.size()) + " subcommands, ";
  if (differing.empty()) {
    detail += "all byte-identical";
  } else {
    detail += std::to_string(differing.size()) + " differ:";
    for (const auto &d : differing) detail += " " + d;
  }
  return {differing.empty() && manifests == static_cast<int>(steps.size()), detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"GLM coefficient recovery", glm_recovery},
      {"Mann-Kendall exactness", mann_kendall_exact},
      {"OLS split equivalence", ols_split},
      {"BWS oracle equivalence", bws_oracle},
      {"Planted trend end to end", planted_trend},
      {"Planted group difference", planted_group_difference},
      {"Test calibration", calibration},
      {"Threshold statistics", threshold_stats},
      {"Determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception &e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    failed += !out.pass;
    std::printf("criterion %zu %s: %s: %s\n", i + 1, out.pass ? "PASS" : "FAIL",
                criteria[i].first.c_str(), out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu of %zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed ? 1 : 0;
}
