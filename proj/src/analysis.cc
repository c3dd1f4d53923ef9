#include "polar/analysis.h"

#include <algorithm>
#include <exception>
#include <functional>
#include <set>

#include "polar/error.h"
#include "polar/tsv.h"

namespace polar::analysis {

using metrics::Group;
using metrics::ProtocolMetrics;

const std::vector<std::string> &comparison_metrics() {
  static const std::vector<std::string> names{
      "V_mean", "V_high", "V_low", "A_mean", "A_high",
      "A_low",  "D_mean", "D_high", "D_low"};
  return names;
}

const std::vector<std::string> &trend_metrics() {
  static const std::vector<std::string> names{
      "V_mean", "V_var", "V_high", "V_low", "A_mean",
      "A_high", "A_low", "D_mean", "D_high", "D_low"};
  return names;
}

const Cell &Grid::at(const std::string &committee, const std::string &metric) const {
  auto row = rows.find(committee);
  auto col = std::find(metrics.begin(), metrics.end(), metric);
  if (row == rows.end() || col == metrics.end()) {
    throw Error("grid has no cell " + committee + "/" + metric);
  }
  return row->second[static_cast<std::size_t>(col - metrics.begin())];
}

namespace {

// Runs fn(committee_index, metric_index) for every cell, in parallel.
void for_each_cell(std::size_t committees, std::size_t metrics,
                   const std::function<void(std::size_t, std::size_t)> &fn) {
  const auto total = static_cast<std::ptrdiff_t>(committees * metrics);
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t t = 0; t < total; ++t) {
    try {
      fn(static_cast<std::size_t>(t) / metrics, static_cast<std::size_t>(t) % metrics);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

Cell unavailable(std::string note) { return {kUnavailable, std::nullopt, std::move(note)}; }

std::map<std::string, std::vector<const ProtocolMetrics *>> chronological(
    std::span<const ProtocolMetrics> table, Group group) {
  std::map<std::string, std::vector<const ProtocolMetrics *>> out;
  for (const auto &m : table) {
    if (m.group == group) out[m.key.committee].push_back(&m);
  }
  for (auto &[c, rows] : out) {
    std::sort(rows.begin(), rows.end(), [](const auto *a, const auto *b) {
      return a->key.time_index < b->key.time_index;
    });
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i]->key.time_index == rows[i - 1]->key.time_index) {
        throw Error("committee '" + c + "' has two " +
                    std::string(metrics::to_string(group)) +
                    " records at time index " +
                    std::to_string(rows[i]->key.time_index));
      }
    }
  }
  return out;
}

}  // namespace

Grid compare_gov_opp(std::span<const ProtocolMetrics> table,
                     const CompareOptions &options) {
  // committee -> time index -> (gov, opp)
  std::map<std::string, std::map<int, std::pair<const ProtocolMetrics *,
                                                 const ProtocolMetrics *>>> paired;
  std::set<std::string> committees;
  for (const auto &m : table) {
    committees.insert(m.key.committee);
    if (m.group == Group::kGovernment) paired[m.key.committee][m.key.time_index].first = &m;
    if (m.group == Group::kOpposition) paired[m.key.committee][m.key.time_index].second = &m;
  }
  Grid grid;
  grid.metrics = comparison_metrics();
  std::vector<std::string> names(committees.begin(), committees.end());
  std::vector<std::vector<std::pair<const ProtocolMetrics *, const ProtocolMetrics *>>> both(
      names.size());
  for (std::size_t c = 0; c < names.size(); ++c) {
    for (const auto &[tp, pair] : paired[names[c]]) {
      if (pair.first && pair.second) both[c].push_back(pair);
    }
    grid.rows[names[c]].resize(grid.metrics.size());
  }
  for_each_cell(names.size(), grid.metrics.size(), [&](std::size_t c, std::size_t k) {
    Cell &cell = grid.rows.at(names[c])[k];
    if (both[c].size() < 2) {
      cell = unavailable("fewer than 2 protocols with both groups");
      return;
    }
    std::vector<double> gov, opp;
    for (const auto &[g, o] : both[c]) {
      gov.push_back(*metrics::metric_value(*g, grid.metrics[k]));
      opp.push_back(*metrics::metric_value(*o, grid.metrics[k]));
    }
    const auto all_same = [](const std::vector<double> &v) {
      return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
    };
    stats::TTestResult t;
    if (all_same(gov) && all_same(opp) && gov.front() == opp.front()) {
      t = {};  // identical constant series: t = 0, p = 1
    } else {
      t = stats::two_sample_t(gov, opp, options.variant, options.alpha);
    }
    cell.p = t.p;
    cell.label = t.higher_group == stats::HigherGroup::kFirst    ? "gov"
                 : t.higher_group == stats::HigherGroup::kSecond ? "opp"
                                                                 : kNotSignificant;
    if (t.degenerate) cell.note = "zero variance in both groups";
  });
  return grid;
}

Grid trend_grid(const std::map<std::string, std::map<std::string, std::vector<double>>> &series,
                const std::vector<std::string> &names, double alpha) {
  Grid grid;
  grid.metrics = names;
  std::vector<std::string> committees;
  for (const auto &[c, s] : series) {
    committees.push_back(c);
    grid.rows[c].resize(names.size());
  }
  for_each_cell(committees.size(), names.size(), [&](std::size_t c, std::size_t k) {
    Cell &cell = grid.rows.at(committees[c])[k];
    const auto &by_name = series.at(committees[c]);
    auto it = by_name.find(names[k]);
    if (it == by_name.end() || it->second.size() < stats::kMannKendallMinLength) {
      cell = unavailable("series shorter than " +
                         std::to_string(stats::kMannKendallMinLength));
      return;
    }
    const stats::TrendResult r = stats::mann_kendall(it->second, alpha);
    cell.p = r.p;
    cell.label = r.direction == stats::TrendDirection::kIncreasing   ? "up"
                 : r.direction == stats::TrendDirection::kDecreasing ? "down"
                                                                     : kNotSignificant;
  });
  return grid;
}

Grid trend_table(std::span<const ProtocolMetrics> table, double alpha, Group group) {
  std::map<std::string, std::map<std::string, std::vector<double>>> series;
  for (const auto &[committee, rows] : chronological(table, group)) {
    auto &s = series[committee];
    for (const auto &name : trend_metrics()) {
      auto &values = s[name];
      for (const auto *m : rows) values.push_back(*metrics::metric_value(*m, name));
    }
  }
  return trend_grid(series, trend_metrics(), alpha);
}

void write_grid(std::ostream &out, const Grid &grid) {
  std::vector<std::string> header{"committee"};
  header.insert(header.end(), grid.metrics.begin(), grid.metrics.end());
  tsv::write_row(out, header);
  for (const auto &[committee, cells] : grid.rows) {
    std::vector<std::string> row{committee};
    for (const auto &cell : cells) row.push_back(cell.label);
    tsv::write_row(out, row);
  }
}

void write_grid_pvalues(std::ostream &out, const Grid &grid) {
  std::vector<std::string> header{"committee"};
  header.insert(header.end(), grid.metrics.begin(), grid.metrics.end());
  tsv::write_row(out, header);
  for (const auto &[committee, cells] : grid.rows) {
    std::vector<std::string> row{committee};
    for (const auto &cell : cells) row.push_back(cell.p ? tsv::format(*cell.p) : kUnavailable);
    tsv::write_row(out, row);
  }
}

Grid read_grid(std::istream &labels, std::istream *pvalues) {
  Grid grid;
  std::string line;
  if (!tsv::read_line(labels, line)) throw Error("empty grid table");
  auto header = tsv::split(line);
  if (header.empty() || header[0] != "committee") throw Error("grid header must start with committee");
  for (std::size_t i = 1; i < header.size(); ++i) grid.metrics.emplace_back(header[i]);
  while (tsv::read_line(labels, line)) {
    if (line.empty()) continue;
    auto fields = tsv::split(line);
    if (fields.size() != header.size()) throw Error("grid row has the wrong column count");
    auto &cells = grid.rows[std::string(fields[0])];
    for (std::size_t i = 1; i < fields.size(); ++i) cells.push_back({std::string(fields[i]), std::nullopt, {}});
  }
  if (pvalues) {
    if (!tsv::read_line(*pvalues, line) || tsv::split(line).size() != header.size()) {
      throw Error("p-value table header does not match the grid");
    }
    while (tsv::read_line(*pvalues, line)) {
      if (line.empty()) continue;
      auto fields = tsv::split(line);
      auto row = grid.rows.find(std::string(fields[0]));
      if (row == grid.rows.end() || fields.size() != header.size()) {
        throw Error("p-value row does not match the grid");
      }
      for (std::size_t i = 1; i < fields.size(); ++i) {
        if (fields[i] != kUnavailable) row->second[i - 1].p = tsv::parse_double(fields[i]);
      }
    }
  }
  return grid;
}

std::vector<glm::DesignRow> design_rows(std::span<const ProtocolMetrics> table,
                                        const std::string &outcome) {
  std::vector<glm::DesignRow> rows;
  for (const auto &[committee, series] : chronological(table, Group::kAll)) {
    for (const auto *m : series) {
      auto y = metrics::metric_value(*m, outcome);
      if (!y) throw Error("unknown outcome measure '" + outcome + "'");
      rows.push_back({committee, static_cast<double>(m->key.time_index), m->ratio_f,
                      m->ratio_g, *y});
    }
  }
  return rows;
}

std::vector<ConfoundReport> confound_ols(std::span<const ProtocolMetrics> table,
                                         const ConfoundOptions &options) {
  std::vector<ConfoundReport> reports;
  for (const auto &outcome : options.outcomes) {
    const auto rows = design_rows(table, outcome);
    if (rows.empty()) throw Error("no `all` metrics records for the confound model");
    std::map<std::string, std::size_t> counts;
    for (const auto &r : rows) ++counts[r.committee];
    for (const auto &[c, n] : counts) {
      if (n <= static_cast<std::size_t>(glm::kTermsPerCommittee)) {
        throw Error("committee '" + c + "' has " + std::to_string(n) +
                    " protocols; the confound model needs more than " +
                    std::to_string(glm::kTermsPerCommittee));
      }
    }
    const glm::InteractionDesign design = glm::build_interaction_design(rows);
    reports.push_back({outcome, glm::fit_interaction(design, options.variance),
                       design.committees});
  }
  return reports;
}

std::vector<SessionRow> session_averages(std::span<const corpus::SentenceRecord> records,
                                         int first_session, int last_session) {
  if (first_session > last_session) throw Error("session range is empty");
  struct Protocol {
    int session = 0;
    std::vector<double> v, a;
  };
  std::map<std::pair<std::string, std::string>, Protocol> protocols;
  struct Sums {
    std::size_t n = 0;
    double v = 0, a = 0, d = 0;
  };
  std::map<int, Sums> sentences;
  for (const auto &r : records) {
    if (!r.vad) continue;
    auto [it, inserted] = protocols.try_emplace({r.committee, r.protocol_id});
    if (inserted) {
      it->second.session = r.session;
    } else if (it->second.session != r.session) {
      throw Error("protocol '" + r.protocol_id + "' spans sessions " +
                  std::to_string(it->second.session) + " and " +
                  std::to_string(r.session));
    }
    it->second.v.push_back(r.vad->v);
    it->second.a.push_back(r.vad->a);
    Sums &s = sentences[r.session];
    ++s.n;
    s.v += r.vad->v;
    s.a += r.vad->a;
    s.d += r.vad->d;
  }
  std::map<int, std::pair<std::vector<double>, std::vector<double>>> per_session;
  for (const auto &[key, p] : protocols) {
    per_session[p.session].first.push_back(stats::mean(p.a));
    per_session[p.session].second.push_back(stats::sample_variance(p.v));
  }
  std::vector<SessionRow> out;
  for (int s = first_session; s <= last_session; ++s) {
    SessionRow row;
    row.session = s;
    if (auto it = sentences.find(s); it != sentences.end()) {
      const Sums &sum = it->second;
      row.sentences = sum.n;
      row.v_mean = sum.v / sum.n;
      row.a_mean = sum.a / sum.n;
      row.d_mean = sum.d / sum.n;
      const auto &[a_means, v_vars] = per_session.at(s);
      row.protocols = a_means.size();
      row.mean_protocol_a_mean = stats::mean(a_means);
      row.mean_protocol_v_var = stats::mean(v_vars);
    }
    out.push_back(row);
  }
  return out;
}

void write_sessions(std::ostream &out, std::span<const SessionRow> rows) {
  tsv::write_row(out, {"session", "v_mean", "a_mean", "d_mean", "mean_protocol_a_mean",
                       "mean_protocol_v_var"});
  auto cell = [](const std::optional<double> &v) {
    return v ? tsv::format(*v) : std::string(kUnavailable);
  };
  for (const auto &r : rows) {
    tsv::write_row(out, {std::to_string(r.session), cell(r.v_mean), cell(r.a_mean),
                         cell(r.d_mean), cell(r.mean_protocol_a_mean),
                         cell(r.mean_protocol_v_var)});
  }
}

}  // namespace polar::analysis
