#include "polar/vad_lexicon.h"

#include <algorithm>
#include <map>
#include <set>

#include "polar/error.h"
#include "polar/text.h"
#include "polar/tsv.h"

namespace polar::lexicon {
namespace {

std::optional<FormKind> parse_kind(std::string_view s) {
  if (s == "translation") return FormKind::kTranslation;
  if (s == "lemma") return FormKind::kLemma;
  if (s == "synonym") return FormKind::kSynonym;
  return std::nullopt;
}

std::optional<double> parse_score(std::string_view field) {
  auto v = tsv::parse_double(field);
  if (!v || !in_unit_interval(*v)) return std::nullopt;
  return v;
}

}  // namespace

VadLexicon VadLexicon::load(std::istream &in) {
  VadLexicon lex;
  std::map<std::string, LexiconEntry> by_term;
  std::set<std::pair<std::string, std::string>> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (tsv::read_line(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    auto reject = [&](std::string reason) {
      lex.rejects_.push_back({line_no, std::move(reason)});
    };
    auto fields = tsv::split(line);
    if (fields.size() != 6) {
      reject("expected 6 tab-separated columns, got " +
             std::to_string(fields.size()));
      continue;
    }
    std::string term = text::normalize(fields[0]);
    std::string form = text::normalize(fields[1]);
    if (term.empty() || form.empty()) {
      reject("empty source term or form");
      continue;
    }
    if (!parse_kind(fields[2])) {
      reject("unknown kind '" + std::string(fields[2]) + "'");
      continue;
    }
    auto v = parse_score(fields[3]), a = parse_score(fields[4]),
         d = parse_score(fields[5]);
    if (!v || !a || !d) {
      reject("score missing or outside [0,1]");
      continue;
    }
    const Vad vad{*v, *a, *d};
    if (!pairs.emplace(term, form).second) {
      reject("duplicate (source_term, form) pair");
      continue;
    }
    auto [it, inserted] = by_term.try_emplace(term);
    LexiconEntry &entry = it->second;
    if (inserted) {
      entry.source_term = term;
      entry.vad = vad;
    } else if (!(entry.vad == vad)) {
      pairs.erase({term, form});
      reject("scores for '" + term + "' disagree with an earlier row");
      continue;
    }
    entry.forms.push_back(std::move(form));
    ++lex.rows_;
  }
  if (in.bad()) throw Error("I/O failure while reading lexicon");

  lex.entries_.reserve(by_term.size());
  for (auto &[term, entry] : by_term) {
    std::sort(entry.forms.begin(), entry.forms.end());
    lex.entries_.push_back(std::move(entry));
  }
  for (std::size_t i = 0; i < lex.entries_.size(); ++i) {
    for (const auto &form : lex.entries_[i].forms) lex.index_[form].push_back(i);
  }
  return lex;
}

std::vector<const LexiconEntry *> VadLexicon::matches(
    std::string_view surface_form) const {
  std::vector<const LexiconEntry *> out;
  auto it = index_.find(text::normalize(surface_form));
  if (it == index_.end()) return out;
  for (std::size_t i : it->second) out.push_back(&entries_[i]);
  return out;
}

std::optional<Vad> VadLexicon::lookup(std::string_view surface_form) const {
  auto it = index_.find(text::normalize(surface_form));
  if (it == index_.end()) return std::nullopt;
  // Entries are sorted by source term, so the summation order is fixed no
  // matter how the file rows were ordered.
  Vad sum{};
  for (std::size_t i : it->second) {
    sum.v += entries_[i].vad.v;
    sum.a += entries_[i].vad.a;
    sum.d += entries_[i].vad.d;
  }
  const double n = static_cast<double>(it->second.size());
  return Vad{std::clamp(sum.v / n, 0.0, 1.0), std::clamp(sum.a / n, 0.0, 1.0),
             std::clamp(sum.d / n, 0.0, 1.0)};
}

std::vector<std::string> VadLexicon::forms() const {
  std::vector<std::string> out;
  out.reserve(index_.size());
  for (const auto &[form, ids] : index_) out.push_back(form);
  std::sort(out.begin(), out.end());
  return out;
}

LabeledLoad load_labeled(std::istream &in) {
  LabeledLoad result;
  std::string line;
  std::size_t line_no = 0;
  while (tsv::read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = tsv::split(line);
    if (line_no == 1 && fields[0] == "text_id") continue;
    if (fields.size() != 5) {
      result.rejects.push_back({line_no, "expected 5 tab-separated columns"});
      continue;
    }
    LabeledText t;
    t.text_id = std::string(fields[0]);
    t.text = std::string(fields[1]);
    t.token_count = text::token_count(t.text);
    bool ok = !t.text_id.empty();
    for (int k = 0; k < 3 && ok; ++k) {
      if (fields[2 + k].empty()) continue;
      auto score = parse_score(fields[2 + k]);
      if (!score) ok = false;
      t.gold[k] = score;
    }
    if (!ok) {
      result.rejects.push_back({line_no, "empty id or score outside [0,1]"});
      continue;
    }
    result.texts.push_back(std::move(t));
  }
  if (in.bad()) throw Error("I/O failure while reading labeled texts");
  return result;
}

void write_labeled(std::ostream &out, std::span<const LabeledText> texts) {
  tsv::write_row(out, {"text_id", "text", "v", "a", "d"});
  for (const auto &t : texts) {
    std::vector<std::string> row{t.text_id, t.text};
    for (const auto &g : t.gold) row.push_back(g ? tsv::format(*g) : "");
    tsv::write_row(out, row);
  }
}

std::vector<LabeledText> filter_labeled(std::span<const LabeledText> dataset,
                                        const FilterSpec &spec) {
  if (!(spec.lo >= 0.0 && spec.lo < spec.hi && spec.hi <= 1.0)) {
    throw Error("filter thresholds must satisfy 0 <= lo < hi <= 1");
  }
  if (spec.min_tokens >= spec.max_tokens) {
    throw Error("filter token bounds must satisfy min_tokens < max_tokens");
  }
  std::vector<LabeledText> out;
  for (const auto &t : dataset) {
    auto score = t.score(spec.dimension);
    if (!score) continue;
    if (!(*score > spec.hi || *score < spec.lo)) continue;
    if (t.token_count <= spec.min_tokens || t.token_count >= spec.max_tokens) {
      continue;
    }
    out.push_back(t);
  }
  return out;
}

}  // namespace polar::lexicon
