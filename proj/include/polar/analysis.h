#ifndef POLAR_ANALYSIS_H_
#define POLAR_ANALYSIS_H_

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "polar/corpus.h"
#include "polar/metrics.h"
#include "polar/ols.h"
#include "polar/stats.h"

namespace polar::analysis {

// Column sets of the two grids.
const std::vector<std::string> &comparison_metrics();  // 9 columns
const std::vector<std::string> &trend_metrics();       // 10 columns, with V_var

// One cell of a committee x metric grid. `label` is the rendered value:
// gov|opp|--- for comparisons, up|down|--- for trends, NA when unavailable.
struct Cell {
  std::string label;
  std::optional<double> p;
  std::string note;  // reason a cell is unavailable
};

struct Grid {
  std::vector<std::string> metrics;
  std::map<std::string, std::vector<Cell>> rows;  // committee -> cells

  const Cell &at(const std::string &committee, const std::string &metric) const;
};

inline constexpr const char *kNotSignificant = "---";
inline constexpr const char *kUnavailable = "NA";

struct CompareOptions {
  double alpha = 0.05;
  stats::TTestVariant variant = stats::TTestVariant::kPooled;
};

// Per committee and metric, a two-sample t-test of the government series
// against the opposition series over the protocols where both groups have a
// metrics record. Committees with fewer than 2 such protocols get NA cells.
Grid compare_gov_opp(std::span<const metrics::ProtocolMetrics> table,
                     const CompareOptions &options = {});

// Mann-Kendall test per committee and metric over the chronological series
// of `group` records. Series shorter than the test minimum get NA cells.
Grid trend_table(std::span<const metrics::ProtocolMetrics> table, double alpha = 0.05,
                 metrics::Group group = metrics::Group::kAll);

// The same test over arbitrary named series: committee -> name -> values in
// time order.
Grid trend_grid(const std::map<std::string, std::map<std::string, std::vector<double>>> &series,
                const std::vector<std::string> &names, double alpha);

// Label table and the companion p-value table.
void write_grid(std::ostream &out, const Grid &grid);
void write_grid_pvalues(std::ostream &out, const Grid &grid);
// Reads a label table and (optionally) its p-value table back.
Grid read_grid(std::istream &labels, std::istream *pvalues = nullptr);

struct ConfoundReport {
  std::string outcome;  // "V_var" or "A_mean"
  glm::OlsFit fit;
  std::vector<std::string> committees;
};

struct ConfoundOptions {
  std::vector<std::string> outcomes{"V_var", "A_mean"};
  glm::VarianceMode variance = glm::VarianceMode::kPerCommittee;
};

// Fits outcome ~ Comm:(1 + TP + RatioF + RatioG) over the `all` records,
// using each protocol's time index as TP. Every committee needs more than 4
// protocols.
std::vector<ConfoundReport> confound_ols(
    std::span<const metrics::ProtocolMetrics> table,
    const ConfoundOptions &options = {});

// Design rows for one outcome, exposed for the property tests.
std::vector<glm::DesignRow> design_rows(std::span<const metrics::ProtocolMetrics> table,
                                        const std::string &outcome);

struct SessionRow {
  int session = 0;
  std::size_t sentences = 0;
  std::size_t protocols = 0;
  // Sentence-weighted means; nullopt for an empty session.
  std::optional<double> v_mean, a_mean, d_mean;
  // Equal-weight means over the session's protocols.
  std::optional<double> mean_protocol_a_mean, mean_protocol_v_var;
};

// One row per session in [first, last]. A protocol belongs to the session of
// its sentences; a protocol whose sentences disagree is an error.
std::vector<SessionRow> session_averages(std::span<const corpus::SentenceRecord> records,
                                         int first_session, int last_session);

void write_sessions(std::ostream &out, std::span<const SessionRow> rows);

}  // namespace polar::analysis

#endif  // POLAR_ANALYSIS_H_
