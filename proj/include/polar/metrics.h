#ifndef POLAR_METRICS_H_
#define POLAR_METRICS_H_

#include <array>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "polar/corpus.h"
#include "polar/kernels.h"
#include "polar/vad.h"

namespace polar::metrics {

struct Thresholds {
  double hi = 0.7;
  double lo = 0.3;
};

inline constexpr Thresholds kDefaultThresholds{0.7, 0.3};
inline constexpr Thresholds kExtremeThresholds{0.9, 0.1};

enum class Group { kAll, kGovernment, kOpposition };
std::string_view to_string(Group g);
std::optional<Group> parse_group(std::string_view s);

struct DimensionStats {
  double mean = 0.0;
  double var = 0.0;  // sample variance, 0 for a single sentence
  double high_ratio = 0.0;
  double low_ratio = 0.0;

  friend bool operator==(const DimensionStats &, const DimensionStats &) = default;
};

struct ProtocolMetrics {
  corpus::ProtocolKey key;
  Group group = Group::kAll;
  std::size_t sentence_count = 0;
  std::array<DimensionStats, 3> dims;  // indexed by Dimension
  double ratio_g = 0.0;  // government share of the protocol's MK sentences
  double ratio_f = 0.0;  // female share of the protocol's MK sentences

  const DimensionStats &operator[](Dimension d) const {
    return dims[static_cast<int>(d)];
  }

  friend bool operator==(const ProtocolMetrics &, const ProtocolMetrics &) = default;
};

struct MetricsOptions {
  Thresholds thresholds;
  std::size_t min_group_n = 10;
  // When false the `all` group keeps only MK sentences.
  bool include_non_mk = true;
};

// Metrics of one protocol: the `all` record plus government and opposition
// records for groups with at least min_group_n MK sentences. Sentences
// without a VAD triple are ignored; no records when none is scored. The
// high/low tests are strict (v > hi, v < lo).
std::vector<ProtocolMetrics> protocol_metrics(
    const corpus::ProtocolKey &key,
    std::span<const corpus::SentenceRecord *const> sentences,
    const MetricsOptions &options);

// Metrics for every protocol, ordered by (committee, time_index, group).
std::vector<ProtocolMetrics> compute_metrics(
    std::span<const corpus::SentenceRecord> records,
    const corpus::ProtocolOrder &order, const MetricsOptions &options,
    kernels::Execution execution = kernels::Execution::kParallel);

// Column order of the metrics table.
std::vector<std::string> metrics_header();
void write_metrics(std::ostream &out, std::span<const ProtocolMetrics> rows);
std::vector<ProtocolMetrics> read_metrics(std::istream &in);

// Named protocol-level measure, e.g. "V_mean", "A_var", "D_low".
std::optional<double> metric_value(const ProtocolMetrics &m, std::string_view name);

// Corpus-wide share of sentences above hi / below lo per dimension, as
// fractions. Unscored sentences are skipped.
struct ThresholdStats {
  std::size_t n = 0;
  std::array<double, 3> high{};
  std::array<double, 3> low{};
};
ThresholdStats threshold_stats(std::span<const corpus::SentenceRecord> records,
                               const Thresholds &thresholds);
// Two rows (High, Low) of percentages with columns V, A, D.
void write_threshold_stats(std::ostream &out, const ThresholdStats &stats);

struct ScoredSentence {
  std::string sentence_id;
  std::string text;
  double score = 0.0;
};

struct Extremes {
  std::vector<ScoredSentence> top;     // descending score, ties by id
  std::vector<ScoredSentence> bottom;  // ascending score, ties by id
  bool short_input = false;            // fewer than 2k scored sentences
};

Extremes extreme_sentences(std::span<const corpus::SentenceRecord> committee_records,
                           Dimension dimension, std::size_t k = 20);

// Share of tokens found in `words` (NFC-normalized forms); nullopt when the
// sentences have no tokens. Throws on an empty word set.
std::optional<double> emotion_word_ratio(
    std::span<const corpus::SentenceRecord *const> sentences,
    const std::set<std::string> &words);

}  // namespace polar::metrics

#endif  // POLAR_METRICS_H_
