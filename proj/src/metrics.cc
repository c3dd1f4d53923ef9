#include "polar/metrics.h"

#include <algorithm>
#include <exception>
#include <map>

#include "polar/error.h"
#include "polar/text.h"
#include "polar/tsv.h"

namespace polar::metrics {

using corpus::Affiliation;
using corpus::SentenceRecord;

std::string_view to_string(Group g) {
  switch (g) {
    case Group::kAll: return "all";
    case Group::kGovernment: return "government";
    case Group::kOpposition: return "opposition";
  }
  return "all";
}

std::optional<Group> parse_group(std::string_view s) {
  if (s == "all") return Group::kAll;
  if (s == "government" || s == "gov") return Group::kGovernment;
  if (s == "opposition" || s == "opp") return Group::kOpposition;
  return std::nullopt;
}

namespace {

void check_thresholds(const Thresholds &t) {
  if (!(t.lo >= 0.0 && t.lo < t.hi && t.hi <= 1.0)) {
    throw Error("thresholds must satisfy 0 <= lo < hi <= 1");
  }
}

ProtocolMetrics summarize(const corpus::ProtocolKey &key, Group group,
                          const std::vector<const SentenceRecord *> &members,
                          const Thresholds &t) {
  ProtocolMetrics m;
  m.key = key;
  m.group = group;
  m.sentence_count = members.size();
  const double n = static_cast<double>(members.size());
  for (Dimension dim : kAllDimensions) {
    DimensionStats &s = m.dims[static_cast<int>(dim)];
    double sum = 0.0;
    std::size_t high = 0, low = 0;
    for (const auto *r : members) {
      const double v = (*r->vad)[dim];
      sum += v;
      high += v > t.hi;
      low += v < t.lo;
    }
    s.mean = sum / n;
    double ss = 0.0;
    for (const auto *r : members) {
      const double dv = (*r->vad)[dim] - s.mean;
      ss += dv * dv;
    }
    s.var = members.size() > 1 ? ss / (n - 1.0) : 0.0;
    s.high_ratio = static_cast<double>(high) / n;
    s.low_ratio = static_cast<double>(low) / n;
  }
  return m;
}

}  // namespace

std::vector<ProtocolMetrics> protocol_metrics(
    const corpus::ProtocolKey &key,
    std::span<const SentenceRecord *const> sentences,
    const MetricsOptions &options) {
  check_thresholds(options.thresholds);
  std::vector<const SentenceRecord *> all, gov, opp;
  std::size_t mk = 0, mk_gov = 0, mk_female = 0;
  for (const SentenceRecord *r : sentences) {
    if (r->is_mk) {
      ++mk;
      mk_gov += r->affiliation == Affiliation::kGovernment;
      mk_female += r->gender == corpus::Gender::kFemale;
    }
    if (!r->vad) continue;
    if (options.include_non_mk || r->is_mk) all.push_back(r);
    if (r->is_mk && r->affiliation == Affiliation::kGovernment) gov.push_back(r);
    if (r->is_mk && r->affiliation == Affiliation::kOpposition) opp.push_back(r);
  }
  std::vector<ProtocolMetrics> out;
  if (all.empty()) return out;
  const double ratio_g = mk ? static_cast<double>(mk_gov) / mk : 0.0;
  const double ratio_f = mk ? static_cast<double>(mk_female) / mk : 0.0;
  auto emit = [&](Group g, const std::vector<const SentenceRecord *> &members) {
    ProtocolMetrics m = summarize(key, g, members, options.thresholds);
    m.ratio_g = ratio_g;
    m.ratio_f = ratio_f;
    out.push_back(std::move(m));
  };
  emit(Group::kAll, all);
  const std::size_t min_n = std::max<std::size_t>(options.min_group_n, 1);
  if (gov.size() >= min_n) emit(Group::kGovernment, gov);
  if (opp.size() >= min_n) emit(Group::kOpposition, opp);
  return out;
}

std::vector<ProtocolMetrics> compute_metrics(
    std::span<const SentenceRecord> records, const corpus::ProtocolOrder &order,
    const MetricsOptions &options, kernels::Execution execution) {
  check_thresholds(options.thresholds);
  const auto slices = corpus::group_by_protocol(records, order);
  std::vector<std::vector<ProtocolMetrics>> per(slices.size());
  auto run = [&](std::size_t s) {
    std::vector<const SentenceRecord *> members;
    members.reserve(slices[s].rows.size());
    for (std::size_t i : slices[s].rows) members.push_back(&records[i]);
    per[s] = protocol_metrics(slices[s].key, members, options);
  };
  const auto n = static_cast<std::ptrdiff_t>(slices.size());
  if (execution == kernels::Execution::kParallel) {
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t s = 0; s < n; ++s) {
      try {
        run(static_cast<std::size_t>(s));
      } catch (...) {
#pragma omp critical
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  } else {
    for (std::ptrdiff_t s = 0; s < n; ++s) run(static_cast<std::size_t>(s));
  }
  std::vector<ProtocolMetrics> out;
  for (auto &p : per) {
    for (auto &m : p) out.push_back(std::move(m));
  }
  return out;
}

std::vector<std::string> metrics_header() {
  std::vector<std::string> h{"committee", "protocol_id", "time_index", "group", "n"};
  for (const char *d : {"v", "a", "d"}) {
    for (const char *s : {"mean", "var", "high", "low"}) {
      h.push_back(std::string(d) + "_" + s);
    }
  }
  h.push_back("ratio_g");
  h.push_back("ratio_f");
  return h;
}

void write_metrics(std::ostream &out, std::span<const ProtocolMetrics> rows) {
  tsv::write_row(out, metrics_header());
  for (const auto &m : rows) {
    std::vector<std::string> row{m.key.committee, m.key.protocol_id,
                                 std::to_string(m.key.time_index),
                                 std::string(to_string(m.group)),
                                 std::to_string(m.sentence_count)};
    for (const auto &s : m.dims) {
      row.push_back(tsv::format(s.mean));
      row.push_back(tsv::format(s.var));
      row.push_back(tsv::format(s.high_ratio));
      row.push_back(tsv::format(s.low_ratio));
    }
    row.push_back(tsv::format(m.ratio_g));
    row.push_back(tsv::format(m.ratio_f));
    tsv::write_row(out, row);
  }
}

std::vector<ProtocolMetrics> read_metrics(std::istream &in) {
  const auto header = metrics_header();
  std::vector<ProtocolMetrics> rows;
  std::string line;
  std::size_t line_no = 0;
  while (tsv::read_line(in, line)) {
    ++line_no;
    auto fields = tsv::split(line);
    if (line_no == 1) {
      if (fields.size() != header.size() ||
          !std::equal(fields.begin(), fields.end(), header.begin())) {
        throw Error("metrics table has an unexpected header");
      }
      continue;
    }
    if (line.empty()) continue;
    auto fail = [&](const std::string &why) {
      return Error("metrics line " + std::to_string(line_no) + ": " + why);
    };
    if (fields.size() != header.size()) throw fail("wrong column count");
    ProtocolMetrics m;
    m.key.committee = std::string(fields[0]);
    m.key.protocol_id = std::string(fields[1]);
    auto tp = tsv::parse_int(fields[2]);
    auto group = parse_group(fields[3]);
    auto n = tsv::parse_int(fields[4]);
    if (!tp || *tp < 1 || !group || !n || *n < 0) throw fail("bad key columns");
    m.key.time_index = static_cast<int>(*tp);
    m.group = *group;
    m.sentence_count = static_cast<std::size_t>(*n);
    std::size_t col = 5;
    for (auto &s : m.dims) {
      for (double *target : {&s.mean, &s.var, &s.high_ratio, &s.low_ratio}) {
        auto v = tsv::parse_double(fields[col++]);
        if (!v) throw fail("bad number in column " + header[col - 1]);
        *target = *v;
      }
    }
    auto rg = tsv::parse_double(fields[col++]);
    auto rf = tsv::parse_double(fields[col++]);
    if (!rg || !rf) throw fail("bad ratio column");
    m.ratio_g = *rg;
    m.ratio_f = *rf;
    rows.push_back(std::move(m));
  }
  return rows;
}

std::optional<double> metric_value(const ProtocolMetrics &m, std::string_view name) {
  if (name.size() < 3 || name[1] != '_') return std::nullopt;
  auto dim = parse_dimension(name.substr(0, 1));
  if (!dim) return std::nullopt;
  const DimensionStats &s = m[*dim];
  const std::string_view stat = name.substr(2);
  if (stat == "mean") return s.mean;
  if (stat == "var") return s.var;
  if (stat == "high") return s.high_ratio;
  if (stat == "low") return s.low_ratio;
  return std::nullopt;
}

ThresholdStats threshold_stats(std::span<const SentenceRecord> records,
                               const Thresholds &thresholds) {
  check_thresholds(thresholds);
  ThresholdStats out;
  std::array<std::size_t, 3> high{}, low{};
  for (const auto &r : records) {
    if (!r.vad) continue;
    ++out.n;
    for (Dimension dim : kAllDimensions) {
      const double v = (*r.vad)[dim];
      high[static_cast<int>(dim)] += v > thresholds.hi;
      low[static_cast<int>(dim)] += v < thresholds.lo;
    }
  }
  for (int d = 0; d < 3; ++d) {
    out.high[d] = out.n ? static_cast<double>(high[d]) / out.n : 0.0;
    out.low[d] = out.n ? static_cast<double>(low[d]) / out.n : 0.0;
  }
  return out;
}

void write_threshold_stats(std::ostream &out, const ThresholdStats &stats) {
  tsv::write_row(out, {"statistic", "V", "A", "D"});
  auto pct = [](double f) { return tsv::format_fixed(100.0 * f, 2); };
  tsv::write_row(out, {"High", pct(stats.high[0]), pct(stats.high[1]), pct(stats.high[2])});
  tsv::write_row(out, {"Low", pct(stats.low[0]), pct(stats.low[1]), pct(stats.low[2])});
}

Extremes extreme_sentences(std::span<const SentenceRecord> committee_records,
                           Dimension dimension, std::size_t k) {
  std::vector<ScoredSentence> scored;
  for (const auto &r : committee_records) {
    if (r.vad) scored.push_back({r.sentence_id, r.text, (*r.vad)[dimension]});
  }
  Extremes out;
  out.short_input = scored.size() < 2 * k;
  const std::size_t take = std::min(k, scored.size());
  auto desc = [](const ScoredSentence &a, const ScoredSentence &b) {
    return a.score != b.score ? a.score > b.score : a.sentence_id < b.sentence_id;
  };
  auto asc = [](const ScoredSentence &a, const ScoredSentence &b) {
    return a.score != b.score ? a.score < b.score : a.sentence_id < b.sentence_id;
  };
  out.top = scored;
  std::partial_sort(out.top.begin(), out.top.begin() + take, out.top.end(), desc);
  out.top.resize(take);
  out.bottom = std::move(scored);
  std::partial_sort(out.bottom.begin(), out.bottom.begin() + take, out.bottom.end(), asc);
  out.bottom.resize(take);
  return out;
}

std::optional<double> emotion_word_ratio(
    std::span<const SentenceRecord *const> sentences,
    const std::set<std::string> &words) {
  if (words.empty()) throw Error("emotion word set is empty");
  std::size_t total = 0, hits = 0;
  for (const SentenceRecord *r : sentences) {
    for (const auto &token : text::tokenize(r->text)) {
      ++total;
      hits += words.count(token);
    }
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace polar::metrics
