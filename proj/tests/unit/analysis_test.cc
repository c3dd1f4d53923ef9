#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "oracles.h"
#include "polar/analysis.h"
#include "polar/error.h"
#include "polar/rng.h"
#include "synthetic.h"

namespace polar::analysis {
namespace {

using metrics::Group;
using metrics::ProtocolMetrics;

ProtocolMetrics row(const std::string &committee, int t, Group g, double v_mean) {
  ProtocolMetrics m;
  m.key = {committee, "p" + std::to_string(t), {}, t};
  m.group = g;
  m.sentence_count = 10;
  for (auto &d : m.dims) d = {0.5, 0.01, 0.2, 0.2};
  m.dims[0].mean = v_mean;
  return m;
}

std::vector<ProtocolMetrics> metrics_of(const std::vector<corpus::SentenceRecord> &records) {
  return metrics::compute_metrics(records, corpus::order_protocols(records), {});
}

TEST(Compare, DetectsPlantedGovernmentOffset) {
  const auto table = metrics_of(synth::group_offset_corpus(100, 15, 0.1, 0.15, 2));
  const auto grid = compare_gov_opp(table);
  EXPECT_EQ(grid.metrics.size(), 9u);
  EXPECT_EQ(grid.at("Finance", "V_mean").label, "gov");
  EXPECT_EQ(grid.at("Finance", "V_low").label, "opp");
  EXPECT_LT(*grid.at("Finance", "V_mean").p, 1e-6);
}

TEST(Compare, OnlyProtocolsWithBothGroups) {
  std::vector<ProtocolMetrics> t;
  for (int i = 1; i <= 6; ++i) {
    t.push_back(row("C", i, Group::kAll, 0.5));
    t.push_back(row("C", i, Group::kGovernment, 0.6 + 0.01 * i));
    if (i <= 4) t.push_back(row("C", i, Group::kOpposition, 0.4 + 0.01 * i));
  }
  const auto grid = compare_gov_opp(t);
  const std::vector<double> gov{0.61, 0.62, 0.63, 0.64}, opp{0.41, 0.42, 0.43, 0.44};
  const auto expect = stats::two_sample_t(gov, opp);
  EXPECT_NEAR(*grid.at("C", "V_mean").p, expect.p, 1e-15);
  EXPECT_EQ(grid.at("C", "A_mean").label, kNotSignificant);
  EXPECT_EQ(*grid.at("C", "A_mean").p, 1.0);
}

TEST(Compare, TooFewPairedProtocolsIsNA) {
  std::vector<ProtocolMetrics> t{row("C", 1, Group::kGovernment, 0.5),
                                 row("C", 1, Group::kOpposition, 0.5),
                                 row("C", 2, Group::kGovernment, 0.5)};
  const auto grid = compare_gov_opp(t);
  EXPECT_EQ(grid.at("C", "V_mean").label, kUnavailable);
  EXPECT_FALSE(grid.at("C", "V_mean").p);
  EXPECT_FALSE(grid.at("C", "V_mean").note.empty());
}

TEST(Compare, WelchVariant) {
  const auto table = metrics_of(synth::group_offset_corpus(30, 15, 0.05, 0.2, 3));
  const auto pooled = compare_gov_opp(table);
  const auto welch = compare_gov_opp(table, {0.05, stats::TTestVariant::kWelch});
  EXPECT_NE(*pooled.at("Finance", "A_mean").p, *welch.at("Finance", "A_mean").p);
}

TEST(Trends, GridMatchesMannKendallOracle) {
  Rng rng(6);
  std::vector<ProtocolMetrics> t;
  for (int i = 1; i <= 40; ++i) {
    t.push_back(row("Up", i, Group::kAll, 0.3 + 0.01 * i + 0.02 * rng.uniform()));
    t.push_back(row("Flat", 41 - i, Group::kAll, rng.uniform()));
  }
  const auto grid = trend_table(t);
  EXPECT_EQ(grid.metrics.size(), 10u);
  EXPECT_EQ(grid.at("Up", "V_mean").label, "up");
  EXPECT_EQ(grid.at("Up", "A_mean").label, kNotSignificant);

  std::vector<double> flat(40);
  for (const auto &m : t)
    if (m.key.committee == "Flat") flat[m.key.time_index - 1] = m.dims[0].mean;
  EXPECT_NEAR(*grid.at("Flat", "V_mean").p, oracle::mann_kendall(flat).p, 1e-12);
}

TEST(Trends, ShortSeriesIsNAAndDuplicatesThrow) {
  std::vector<ProtocolMetrics> t;
  for (int i = 1; i <= 7; ++i) t.push_back(row("C", i, Group::kAll, 0.1 * i));
  EXPECT_EQ(trend_table(t).at("C", "V_mean").label, kUnavailable);
  t.push_back(row("C", 7, Group::kAll, 0.2));
  EXPECT_THROW(trend_table(t), Error);
}

TEST(Trends, GroupSelectsRecords) {
  std::vector<ProtocolMetrics> t;
  for (int i = 1; i <= 20; ++i) {
    t.push_back(row("C", i, Group::kAll, 0.5));
    t.push_back(row("C", i, Group::kOpposition, 0.01 * i));
  }
  EXPECT_EQ(trend_table(t, 0.05, Group::kOpposition).at("C", "V_mean").label, "up");
  EXPECT_EQ(trend_table(t).at("C", "V_mean").label, kNotSignificant);
}

TEST(Grid, WriteReadRoundTrip) {
  std::vector<ProtocolMetrics> t;
  for (int i = 1; i <= 10; ++i) t.push_back(row("C", i, Group::kAll, 0.1 * i));
  const auto grid = trend_table(t);
  std::stringstream labels, pvals;
  write_grid(labels, grid);
  write_grid_pvalues(pvals, grid);
  const auto back = read_grid(labels, &pvals);
  EXPECT_EQ(back.metrics, grid.metrics);
  for (const auto &name : grid.metrics) {
    EXPECT_EQ(back.at("C", name).label, grid.at("C", name).label);
    EXPECT_EQ(back.at("C", name).p, grid.at("C", name).p);
  }
}

TEST(Confound, DesignRowsAndCommitteeMinimum) {
  std::vector<ProtocolMetrics> t;
  Rng rng(1);
  for (int c = 0; c < 2; ++c) {
    for (int i = 1; i <= 12; ++i) {
      auto m = row(synth::committee_name(c), i, Group::kAll, rng.uniform());
      m.dims[0].var = 0.01 * rng.uniform();
      m.dims[1].mean = 0.4 + 0.005 * i + 0.01 * synth::normal(rng);
      m.ratio_f = rng.uniform();
      m.ratio_g = rng.uniform();
      t.push_back(m);
      t.push_back(row(synth::committee_name(c), i, Group::kGovernment, 0.9));
    }
  }
  const auto rows = design_rows(t, "A_mean");
  ASSERT_EQ(rows.size(), 24u);
  EXPECT_EQ(rows[3].tp, 4.0);
  const auto reports = confound_ols(t);
  ASSERT_EQ(reports.size(), 2u);
  EXPECT_EQ(reports[1].outcome, "A_mean");
  EXPECT_GT(reports[1].fit.beta[1], 0.0);
  EXPECT_EQ(reports[1].fit.term_dof[1], 8.0);
  t.erase(std::remove_if(t.begin(), t.end(),
                         [](const auto &m) { return m.key.committee == "CommitteeB" && m.key.time_index > 4; }),
          t.end());
  EXPECT_THROW(confound_ols(t), Error);
}

TEST(Sessions, SentenceAndProtocolWeights) {
  std::vector<corpus::SentenceRecord> r;
  auto add = [&](const std::string &p, int session, double v, double a) {
    auto x = synth::record(p + std::to_string(r.size()), "C", p, session, Vad{v, a, 0.5});
    x.session = session;
    r.push_back(x);
  };
  add("p", 15, 0.2, 0.1);
  add("p", 15, 0.4, 0.1);
  add("p", 15, 0.6, 0.1);
  add("q", 15, 0.8, 0.9);
  r.push_back(synth::record("u", "C", "z", 16));
  const auto rows = session_averages(r, 15, 17);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].sentences, 4u);
  EXPECT_EQ(rows[0].protocols, 2u);
  EXPECT_NEAR(*rows[0].v_mean, 0.5, 1e-15);
  EXPECT_NEAR(*rows[0].a_mean, 0.3, 1e-15);
  EXPECT_NEAR(*rows[0].mean_protocol_a_mean, 0.5, 1e-15);
  EXPECT_NEAR(*rows[0].mean_protocol_v_var, 0.02, 1e-15);
  EXPECT_FALSE(rows[1].v_mean);

  std::ostringstream out;
  write_sessions(out, rows);
  EXPECT_NE(out.str().find("16\tNA\tNA"), std::string::npos);

  add("p", 16, 0.5, 0.5);
  EXPECT_THROW(session_averages(r, 15, 17), Error);
}

}  // namespace
}  // namespace polar::analysis
