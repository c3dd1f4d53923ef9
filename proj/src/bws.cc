#include "polar/bws.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "polar/error.h"
#include "polar/rng.h"
#include "polar/stats.h"
#include "polar/tsv.h"

namespace polar::bws {
namespace {

constexpr std::int64_t kDuplicateWeight = 1'000'000;

// Pair co-occurrence bookkeeping for the local search. A pair (x, x) means
// an item appears twice in one tuple.
class PairCounts {
 public:
  explicit PairCounts(std::size_t max_count) : histogram_(max_count + 2, 0) {}

  static std::uint64_t key(std::uint32_t x, std::uint32_t y) {
    if (x > y) std::swap(x, y);
    return (std::uint64_t{x} << 32) | y;
  }

  // Returns the change in cost.
  std::int64_t add(std::uint32_t x, std::uint32_t y, int delta) {
    int &c = counts_[key(x, y)];
    std::int64_t cost;
    if (x == y) {
      cost = kDuplicateWeight * delta;
      duplicates_ += delta;
    } else {
      cost = delta > 0 ? 2 * c + 1 : -(2 * c - 1);
      bump(c, -1);
      bump(c + delta, +1);
    }
    c += delta;
    return cost;
  }

  int duplicates() const { return duplicates_; }

  int max_count() const {
    for (std::size_t c = histogram_.size(); c-- > 1;) {
      if (histogram_[c] > 0) return static_cast<int>(c);
    }
    return 0;
  }

 private:
  void bump(int c, int by) {
    if (c <= 0) return;
    if (static_cast<std::size_t>(c) >= histogram_.size()) {
      histogram_.resize(c + 1, 0);
    }
    histogram_[c] += by;
  }

  std::unordered_map<std::uint64_t, int> counts_;
  std::vector<std::int64_t> histogram_;
  int duplicates_ = 0;
};

std::int64_t choose2(std::int64_t n) { return n * (n - 1) / 2; }

}  // namespace

int pair_cooccurrence_bound(std::size_t n_items, int n_tuples, int tuple_size) {
  const std::int64_t slots = std::int64_t{n_tuples} * choose2(tuple_size);
  const std::int64_t pairs = choose2(static_cast<std::int64_t>(n_items));
  if (pairs == 0) return 0;
  return static_cast<int>((slots + pairs - 1) / pairs) + 1;
}

std::vector<BwsTuple> generate_tuples(std::span<const std::string> item_ids,
                                      const TupleOptions &options) {
  const int k = options.tuple_size;
  const int n_tuples = options.n_tuples;
  const std::size_t m = item_ids.size();
  if (k < 2) throw Error("tuple_size must be at least 2");
  if (n_tuples < 1) throw Error("n_tuples must be at least 1");
  if (m < static_cast<std::size_t>(k)) {
    throw Error("infeasible: tuple_size " + std::to_string(k) +
                " exceeds the number of items " + std::to_string(m));
  }
  if (std::set<std::string>(item_ids.begin(), item_ids.end()).size() != m) {
    throw Error("item ids must be distinct");
  }

  // Concatenated shuffled passes give every item floor or ceil of the mean
  // occurrence count. Swaps below never change the counts.
  Rng rng(options.seed);
  const std::size_t slots = static_cast<std::size_t>(n_tuples) * k;
  std::vector<std::uint32_t> seq;
  seq.reserve(slots + m);
  std::vector<std::uint32_t> pass(m);
  while (seq.size() < slots) {
    for (std::size_t i = 0; i < m; ++i) pass[i] = static_cast<std::uint32_t>(i);
    rng.shuffle(std::span<std::uint32_t>(pass));
    seq.insert(seq.end(), pass.begin(), pass.end());
  }
  seq.resize(slots);

  const int bound = pair_cooccurrence_bound(m, n_tuples, k);
  const int ideal = bound - 1;
  PairCounts counts(static_cast<std::size_t>(bound) + 1);
  for (int t = 0; t < n_tuples; ++t) {
    for (int i = 0; i < k; ++i) {
      for (int j = i + 1; j < k; ++j) {
        counts.add(seq[t * k + i], seq[t * k + j], +1);
      }
    }
  }

  // Moves the item at `slot` out of its tuple and `item` in.
  auto replace = [&](std::size_t slot, std::uint32_t item) {
    const std::size_t base = slot - slot % k;
    std::int64_t delta = 0;
    for (std::size_t s = base; s < base + k; ++s) {
      if (s == slot) continue;
      delta += counts.add(seq[slot], seq[s], -1);
      delta += counts.add(item, seq[s], +1);
    }
    seq[slot] = item;
    return delta;
  };

  auto satisfied = [&](int cap) {
    return counts.duplicates() == 0 && counts.max_count() <= cap;
  };

  const std::uint64_t budget =
      static_cast<std::uint64_t>(options.swaps_per_slot) * slots;
  for (std::uint64_t step = 0; step < budget && !satisfied(ideal) && n_tuples > 1;
       ++step) {
    const std::size_t s1 = rng.below(slots);
    const std::size_t s2 = rng.below(slots);
    if (s1 / k == s2 / k) continue;
    const std::uint32_t a = seq[s1], b = seq[s2];
    if (a == b) continue;
    std::int64_t delta = replace(s1, b);
    delta += replace(s2, a);
    if (delta > 0) {
      replace(s2, b);
      replace(s1, a);
    }
  }
  if (counts.duplicates() != 0) {
    throw Error("infeasible: could not place every tuple without repeating an "
                "item; increase the number of items or lower n_tuples");
  }
  if (counts.max_count() > bound) {
    throw Error("infeasible: pair co-occurrence " +
                std::to_string(counts.max_count()) + " exceeds bound " +
                std::to_string(bound));
  }

  std::vector<BwsTuple> tuples(n_tuples);
  for (int t = 0; t < n_tuples; ++t) {
    tuples[t].tuple_id = t + 1;
    for (int i = 0; i < k; ++i) tuples[t].item_ids.push_back(item_ids[seq[t * k + i]]);
  }
  return tuples;
}

AnnotatorScores score_by_annotator(std::span<const BwsTuple> tuples,
                                   std::span<const BwsAnnotation> annotations,
                                   Dimension dimension,
                                   std::vector<std::string> *rejects) {
  std::unordered_map<int, const BwsTuple *> by_id;
  for (const auto &t : tuples) by_id[t.tuple_id] = &t;

  struct Tally {
    long best = 0, worst = 0, appearances = 0;
  };
  std::map<std::string, std::map<std::string, Tally>> tallies;
  auto reject = [&](const BwsAnnotation &a, const std::string &why) {
    if (rejects) {
      rejects->push_back("tuple " + std::to_string(a.tuple_id) + ", annotator " +
                         a.annotator_id + ": " + why);
    }
  };
  for (const auto &a : annotations) {
    if (a.dimension != dimension) continue;
    auto it = by_id.find(a.tuple_id);
    if (it == by_id.end()) {
      reject(a, "unknown tuple");
      continue;
    }
    const auto &items = it->second->item_ids;
    if (a.best == a.worst) {
      reject(a, "best and worst are the same item");
      continue;
    }
    if (std::find(items.begin(), items.end(), a.best) == items.end() ||
        std::find(items.begin(), items.end(), a.worst) == items.end()) {
      reject(a, "best or worst item is not in the tuple");
      continue;
    }
    auto &mine = tallies[a.annotator_id];
    for (const auto &item : items) ++mine[item].appearances;
    ++mine[a.best].best;
    ++mine[a.worst].worst;
  }

  AnnotatorScores scores;
  for (const auto &[annotator, items] : tallies) {
    auto &out = scores[annotator];
    for (const auto &[item, t] : items) {
      out[item] = static_cast<double>(t.best - t.worst) /
                  static_cast<double>(t.appearances);
    }
  }
  return scores;
}

ScoreResult score_bws(std::span<const BwsTuple> tuples,
                      std::span<const BwsAnnotation> annotations,
                      Dimension dimension) {
  // Pool every annotator's judgments; appearances count tuple x annotator.
  std::vector<BwsAnnotation> pooled(annotations.begin(), annotations.end());
  for (auto &a : pooled) a.annotator_id.clear();
  ScoreResult result;
  auto per = score_by_annotator(tuples, pooled, dimension, &result.rejects);
  if (!per.empty()) result.raw = std::move(per.begin()->second);
  return result;
}

std::map<std::string, GoldScore> aggregate_and_normalize(
    const AnnotatorScores &scores) {
  if (scores.empty()) throw Error("aggregate_and_normalize needs an annotator");
  std::map<std::string, std::pair<double, int>> sums;
  for (const auto &[annotator, items] : scores) {
    for (const auto &[item, raw] : items) {
      if (!(raw >= -1.0 && raw <= 1.0)) {
        throw Error("raw score of '" + item + "' by '" + annotator +
                    "' outside [-1,1]");
      }
      auto &[sum, n] = sums[item];
      sum += raw;
      ++n;
    }
  }
  std::map<std::string, GoldScore> out;
  for (const auto &[item, s] : sums) {
    const double raw = s.first / s.second;
    out[item] = {raw, std::clamp((raw + 1.0) / 2.0, 0.0, 1.0)};
  }
  return out;
}

Agreement pairwise_agreement(const AnnotatorScores &scores) {
  if (scores.size() < 2) throw Error("agreement needs at least 2 annotators");
  Agreement result;
  double sum = 0.0;
  int defined = 0;
  for (auto a = scores.begin(); a != scores.end(); ++a) {
    for (auto b = std::next(a); b != scores.end(); ++b) {
      PairAgreement pair{a->first, b->first, 0, std::nullopt};
      std::vector<double> x, y;
      for (const auto &[item, score] : a->second) {
        if (auto it = b->second.find(item); it != b->second.end()) {
          x.push_back(score);
          y.push_back(it->second);
        }
      }
      pair.n_common = x.size();
      if (x.size() < 3) {
        result.warnings.push_back(a->first + "/" + b->first +
                                  ": fewer than 3 common items, excluded");
      } else if (auto p = stats::pearson(x, y)) {
        pair.r = p->r;
        sum += p->r;
        ++defined;
      } else {
        result.warnings.push_back(a->first + "/" + b->first +
                                  ": zero variance, correlation undefined");
      }
      result.pairs.push_back(std::move(pair));
    }
  }
  if (defined > 0) result.mean_r = sum / defined;
  return result;
}

std::vector<BwsTuple> read_tuples(std::istream &in) {
  std::vector<BwsTuple> tuples;
  std::string line;
  std::size_t line_no = 0;
  while (tsv::read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = tsv::split(line);
    if (line_no == 1 && fields[0] == "tuple_id") continue;
    auto id = tsv::parse_int(fields[0]);
    if (!id || fields.size() < 3) {
      throw Error("tuples line " + std::to_string(line_no) +
                  ": expected tuple_id followed by item ids");
    }
    BwsTuple t{static_cast<int>(*id), {}};
    for (std::size_t i = 1; i < fields.size(); ++i) t.item_ids.emplace_back(fields[i]);
    if (std::set<std::string>(t.item_ids.begin(), t.item_ids.end()).size() !=
        t.item_ids.size()) {
      throw Error("tuples line " + std::to_string(line_no) + ": repeated item");
    }
    tuples.push_back(std::move(t));
  }
  return tuples;
}

void write_tuples(std::ostream &out, std::span<const BwsTuple> tuples) {
  std::vector<std::string> header{"tuple_id"};
  const std::size_t width = tuples.empty() ? 4 : tuples.front().item_ids.size();
  for (std::size_t i = 1; i <= width; ++i) header.push_back("item" + std::to_string(i));
  tsv::write_row(out, header);
  for (const auto &t : tuples) {
    std::vector<std::string> row{std::to_string(t.tuple_id)};
    row.insert(row.end(), t.item_ids.begin(), t.item_ids.end());
    tsv::write_row(out, row);
  }
}

std::vector<BwsAnnotation> read_annotations(std::istream &in) {
  std::vector<BwsAnnotation> out;
  std::string line;
  std::size_t line_no = 0;
  while (tsv::read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = tsv::split(line);
    if (line_no == 1 && fields[0] == "tuple_id") continue;
    std::optional<std::int64_t> id;
    std::optional<Dimension> dim;
    if (fields.size() == 5) {
      id = tsv::parse_int(fields[0]);
      dim = parse_dimension(fields[2]);
    }
    if (!id || !dim) {
      throw Error("annotations line " + std::to_string(line_no) +
                  ": expected tuple_id, annotator_id, dimension, best, worst");
    }
    out.push_back({static_cast<int>(*id), std::string(fields[1]), *dim,
                   std::string(fields[3]), std::string(fields[4])});
  }
  return out;
}

void write_annotations(std::ostream &out,
                       std::span<const BwsAnnotation> annotations) {
  tsv::write_row(out, {"tuple_id", "annotator_id", "dimension", "best_item",
                       "worst_item"});
  for (const auto &a : annotations) {
    tsv::write_row(out, {std::to_string(a.tuple_id), a.annotator_id,
                         std::string(1, dimension_letter(a.dimension)), a.best,
                         a.worst});
  }
}

void write_scores(std::ostream &out, Dimension dimension,
                  const std::map<std::string, GoldScore> &scores, bool header) {
  if (header) tsv::write_row(out, {"item_id", "dimension", "raw", "gold"});
  const std::string dim(1, dimension_letter(dimension));
  for (const auto &[item, s] : scores) {
    tsv::write_row(out, {item, dim, tsv::format(s.raw), tsv::format(s.gold)});
  }
}

}  // namespace polar::bws
