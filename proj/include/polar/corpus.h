#ifndef POLAR_CORPUS_H_
#define POLAR_CORPUS_H_

#include <chrono>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "polar/vad.h"

namespace polar::corpus {

enum class Affiliation { kGovernment, kOpposition, kUnknown };
enum class Gender { kFemale, kMale, kUnknown };

std::string_view to_string(Affiliation a);
std::string_view to_string(Gender g);
std::optional<Affiliation> parse_affiliation(std::string_view s);
std::optional<Gender> parse_gender(std::string_view s);

using Date = std::chrono::year_month_day;

// "YYYY-MM-DD"; nullopt unless the string is a valid calendar date.
std::optional<Date> parse_date(std::string_view s);
std::string format_date(const Date &date);

// One utterance of the proceedings.
struct SentenceRecord {
  std::string sentence_id;
  std::string text;
  std::string protocol_id;
  std::string committee;
  int session = 0;
  Date date{};
  std::string speaker_id;
  bool is_mk = false;
  Affiliation affiliation = Affiliation::kUnknown;
  Gender gender = Gender::kUnknown;
  std::optional<Vad> vad;

  friend bool operator==(const SentenceRecord &,
                         const SentenceRecord &) = default;
};

struct Reject {
  std::size_t line_no = 0;  // 1-based
  std::string reason;
};

struct ParseResult {
  std::vector<SentenceRecord> records;
  std::vector<Reject> rejects;
};

// raw committee name -> canonical name.
using AliasMap = std::unordered_map<std::string, std::string>;

// Parses `raw_name<TAB>canonical_name` rows. Blank lines and lines starting
// with '#' are skipped; anything else malformed throws.
AliasMap load_alias_map(std::istream &in);

// Streams JSON Lines. Malformed lines, missing required keys, out-of-range
// scores and duplicate sentence ids are rejected with their line number; all
// other lines become records in input order. Committee names are rewritten
// through `aliases` when given.
ParseResult parse_corpus(std::istream &in, const AliasMap *aliases = nullptr);

// One JSON object, no trailing newline. parse_corpus inverts it exactly.
std::string to_json_line(const SentenceRecord &record);
void write_corpus(std::ostream &out, std::span<const SentenceRecord> records);

// `line_no<TAB>reason`, with header.
void write_rejects(std::ostream &out, std::span<const Reject> rejects);

std::map<std::string, std::size_t> committee_counts(
    std::span<const SentenceRecord> records);

// Committees with strictly more than `min_sentences` sentences.
std::set<std::string> select_committees(std::span<const SentenceRecord> records,
                                        std::size_t min_sentences);

struct ProtocolKey {
  std::string committee;
  std::string protocol_id;
  Date date{};
  int time_index = 0;  // 1..n within the committee

  friend bool operator==(const ProtocolKey &, const ProtocolKey &) = default;
};

using ProtocolOrder = std::map<std::string, std::vector<ProtocolKey>>;

// Sorts each committee's protocols by (date, protocol_id) and numbers them
// from 1. Throws if one protocol is seen with two different dates.
ProtocolOrder order_protocols(std::span<const SentenceRecord> records);

// (committee, protocol_id) -> time index lookups over an order.
class ProtocolIndex {
 public:
  explicit ProtocolIndex(const ProtocolOrder &order);

  // 0 when the protocol is unknown.
  int time_index(std::string_view committee,
                 std::string_view protocol_id) const;
  const ProtocolKey *find(std::string_view committee,
                          std::string_view protocol_id) const;

 private:
  std::map<std::pair<std::string, std::string>, ProtocolKey, std::less<>>
      keys_;
};

// Deterministic merge order: (committee, time_index, sentence_id).
void sort_canonical(std::vector<SentenceRecord> &records,
                    const ProtocolIndex &index);

// Groups record indices by protocol, in (committee, time_index) order.
struct ProtocolSlice {
  ProtocolKey key;
  std::vector<std::size_t> rows;  // into the record span
};
std::vector<ProtocolSlice> group_by_protocol(
    std::span<const SentenceRecord> records, const ProtocolOrder &order);

}  // namespace polar::corpus

#endif  // POLAR_CORPUS_H_
