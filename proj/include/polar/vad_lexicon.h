#ifndef POLAR_VAD_LEXICON_H_
#define POLAR_VAD_LEXICON_H_

#include <array>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "polar/vad.h"

namespace polar::lexicon {

enum class FormKind { kTranslation, kLemma, kSynonym };

struct LexiconEntry {
  std::string source_term;
  std::vector<std::string> forms;  // NFC, sorted, unique
  Vad vad;
};

struct RowReject {
  std::size_t line_no = 0;
  std::string reason;
};

// Word-level VAD lexicon indexed by target-language surface form. Immutable
// once loaded.
class VadLexicon {
 public:
  VadLexicon() = default;

  // Reads `source_term<TAB>form<TAB>kind<TAB>v<TAB>a<TAB>d` rows. Blank lines
  // and '#' comments are skipped. Bad rows land in rejects(): wrong column
  // count, unknown kind, scores outside [0,1], a repeated (source_term, form)
  // pair, or a source term whose scores disagree with its earlier rows.
  static VadLexicon load(std::istream &in);

  // Mean triple over every entry listing `surface_form` (after NFC and
  // whitespace strip); nullopt when nothing matches.
  std::optional<Vad> lookup(std::string_view surface_form) const;

  // Entries whose forms contain `surface_form`, ordered by source term.
  std::vector<const LexiconEntry *> matches(std::string_view surface_form) const;

  std::span<const LexiconEntry> entries() const { return entries_; }
  std::size_t entry_count() const { return entries_.size(); }
  std::size_t form_count() const { return index_.size(); }
  std::size_t row_count() const { return rows_; }
  std::span<const RowReject> rejects() const { return rejects_; }

  // All distinct surface forms in sorted order.
  std::vector<std::string> forms() const;

 private:
  std::vector<LexiconEntry> entries_;  // sorted by source_term
  std::unordered_map<std::string, std::vector<std::size_t>> index_;
  std::size_t rows_ = 0;
  std::vector<RowReject> rejects_;
};

// A text with gold scores for some subset of the dimensions.
struct LabeledText {
  std::string text_id;
  std::string text;
  std::size_t token_count = 0;
  std::array<std::optional<double>, 3> gold;

  std::optional<double> score(Dimension dim) const {
    return gold[static_cast<int>(dim)];
  }
};

struct LabeledLoad {
  std::vector<LabeledText> texts;
  std::vector<RowReject> rejects;
};

// Reads `text_id<TAB>text<TAB>v<TAB>a<TAB>d` rows, empty cells meaning the
// dimension is unlabeled. A first row starting with "text_id" is a header.
LabeledLoad load_labeled(std::istream &in);

void write_labeled(std::ostream &out, std::span<const LabeledText> texts);

struct FilterSpec {
  Dimension dimension = Dimension::kValence;
  double hi = 0.7;
  double lo = 0.3;
  std::size_t min_tokens = 10;
  std::size_t max_tokens = 30;
};

// Texts whose gold score for the dimension is > hi or < lo and whose token
// count is strictly between min_tokens and max_tokens. Texts unlabeled for
// the dimension are dropped.
std::vector<LabeledText> filter_labeled(std::span<const LabeledText> dataset,
                                        const FilterSpec &spec);

}  // namespace polar::lexicon

#endif  // POLAR_VAD_LEXICON_H_
