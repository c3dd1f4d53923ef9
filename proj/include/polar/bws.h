#ifndef POLAR_BWS_H_
#define POLAR_BWS_H_

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "polar/vad.h"

// Best-worst scaling: tuple generation, counting-based scores and
// inter-annotator agreement.
namespace polar::bws {

struct BwsTuple {
  int tuple_id = 0;
  std::vector<std::string> item_ids;

  friend bool operator==(const BwsTuple &, const BwsTuple &) = default;
};

struct BwsAnnotation {
  int tuple_id = 0;
  std::string annotator_id;
  Dimension dimension = Dimension::kValence;
  std::string best;
  std::string worst;
};

struct TupleOptions {
  int n_tuples = 0;
  int tuple_size = 4;
  std::uint64_t seed = 0;
  // Local-search budget, in proposed swaps per tuple slot.
  int swaps_per_slot = 400;
};

// Builds `n_tuples` tuples of distinct items. Occurrence counts differ by at
// most one across items, and no unordered pair co-occurs more than
// ceil(n_tuples * C(k,2) / C(m,2)) + 1 times. Throws polar::Error naming the
// binding constraint when that cannot be met. Same seed, same tuples.
std::vector<BwsTuple> generate_tuples(std::span<const std::string> item_ids,
                                      const TupleOptions &options);

// Largest pair co-occurrence the generator guarantees.
int pair_cooccurrence_bound(std::size_t n_items, int n_tuples, int tuple_size);

struct ScoreResult {
  std::map<std::string, double> raw;  // item -> score in [-1, 1]
  std::vector<std::string> rejects;   // one message per skipped annotation
};

// (#best - #worst) / #annotated appearances for every item that appears in
// an annotated tuple of `dimension`. Annotations for other dimensions are
// ignored; invalid ones (unknown tuple, best == worst, best or worst not in
// the tuple) are skipped and reported.
ScoreResult score_bws(std::span<const BwsTuple> tuples,
                      std::span<const BwsAnnotation> annotations,
                      Dimension dimension);

// annotator -> item -> raw score.
using AnnotatorScores = std::map<std::string, std::map<std::string, double>>;

AnnotatorScores score_by_annotator(std::span<const BwsTuple> tuples,
                                   std::span<const BwsAnnotation> annotations,
                                   Dimension dimension,
                                   std::vector<std::string> *rejects = nullptr);

struct GoldScore {
  double raw = 0.0;   // mean over the annotators that scored the item
  double gold = 0.0;  // (raw + 1) / 2
};

std::map<std::string, GoldScore> aggregate_and_normalize(
    const AnnotatorScores &scores);

struct PairAgreement {
  std::string first;
  std::string second;
  std::size_t n_common = 0;
  std::optional<double> r;  // nullopt when undefined
};

struct Agreement {
  std::optional<double> mean_r;  // over the defined pairs
  std::vector<PairAgreement> pairs;
  std::vector<std::string> warnings;
};

// Mean pairwise Pearson r over annotator pairs, each pair evaluated on the
// items both annotators scored. Pairs with fewer than 3 common items or zero
// variance are excluded with a warning. Throws with fewer than 2 annotators.
Agreement pairwise_agreement(const AnnotatorScores &scores);

// File formats. Readers accept an optional header row.
std::vector<BwsTuple> read_tuples(std::istream &in);
void write_tuples(std::ostream &out, std::span<const BwsTuple> tuples);
std::vector<BwsAnnotation> read_annotations(std::istream &in);
void write_annotations(std::ostream &out,
                       std::span<const BwsAnnotation> annotations);
void write_scores(std::ostream &out, Dimension dimension,
                  const std::map<std::string, GoldScore> &scores,
                  bool header = true);

}  // namespace polar::bws

#endif  // POLAR_BWS_H_
