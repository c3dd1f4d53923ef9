#include "polar/corpus.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <tuple>
#include <unordered_set>

#include "json.hpp"

#include "polar/error.h"
#include "polar/tsv.h"

namespace polar::corpus {

using nlohmann::json;

std::string_view to_string(Affiliation a) {
  switch (a) {
    case Affiliation::kGovernment: return "government";
    case Affiliation::kOpposition: return "opposition";
    case Affiliation::kUnknown: return "unknown";
  }
  return "unknown";
}

std::string_view to_string(Gender g) {
  switch (g) {
    case Gender::kFemale: return "female";
    case Gender::kMale: return "male";
    case Gender::kUnknown: return "unknown";
  }
  return "unknown";
}

std::optional<Affiliation> parse_affiliation(std::string_view s) {
  if (s == "government") return Affiliation::kGovernment;
  if (s == "opposition") return Affiliation::kOpposition;
  if (s == "unknown") return Affiliation::kUnknown;
  return std::nullopt;
}

std::optional<Gender> parse_gender(std::string_view s) {
  if (s == "female") return Gender::kFemale;
  if (s == "male") return Gender::kMale;
  if (s == "unknown") return Gender::kUnknown;
  return std::nullopt;
}

std::optional<Date> parse_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  auto num = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
    int value = 0;
    auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + pos + len,
                                     value);
    if (ec != std::errc() || ptr != s.data() + pos + len) return std::nullopt;
    return value;
  };
  auto y = num(0, 4), m = num(5, 2), d = num(8, 2);
  if (!y || !m || !d) return std::nullopt;
  Date date{std::chrono::year(*y), std::chrono::month(static_cast<unsigned>(*m)),
            std::chrono::day(static_cast<unsigned>(*d))};
  if (!date.ok()) return std::nullopt;
  return date;
}

std::string format_date(const Date &date) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", int(date.year()),
                unsigned(date.month()), unsigned(date.day()));
  return buf;
}

AliasMap load_alias_map(std::istream &in) {
  AliasMap aliases;
  std::string line;
  std::size_t line_no = 0;
  while (tsv::read_line(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    auto fields = tsv::split(line);
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw Error("alias map line " + std::to_string(line_no) +
                  ": expected raw_name<TAB>canonical_name");
    }
    aliases[std::string(fields[0])] = std::string(fields[1]);
  }
  return aliases;
}

namespace {

// Returns an error reason, or empty on success.
std::string decode_record(const json &obj, SentenceRecord &rec) {
  if (!obj.is_object()) return "line is not a JSON object";
  auto str = [&](const char *key, std::string &out) -> std::string {
    auto it = obj.find(key);
    if (it == obj.end()) return std::string("missing required field '") + key + "'";
    if (!it->is_string()) return std::string("field '") + key + "' must be a string";
    out = it->get<std::string>();
    return {};
  };
  std::string err;
  if (!(err = str("sentence_id", rec.sentence_id)).empty()) return err;
  if (rec.sentence_id.empty()) return "empty sentence_id";
  if (!(err = str("text", rec.text)).empty()) return err;
  if (!(err = str("protocol_id", rec.protocol_id)).empty()) return err;
  if (!(err = str("committee", rec.committee)).empty()) return err;
  if (!(err = str("speaker_id", rec.speaker_id)).empty()) return err;

  auto session = obj.find("session");
  if (session == obj.end()) return "missing required field 'session'";
  if (!session->is_number_integer()) return "field 'session' must be an integer";
  rec.session = session->get<int>();

  std::string date_text;
  if (!(err = str("date", date_text)).empty()) return err;
  auto date = parse_date(date_text);
  if (!date) return "field 'date' is not an ISO-8601 calendar date";
  rec.date = *date;

  auto is_mk = obj.find("is_mk");
  if (is_mk == obj.end()) return "missing required field 'is_mk'";
  if (!is_mk->is_boolean()) return "field 'is_mk' must be a boolean";
  rec.is_mk = is_mk->get<bool>();

  std::string text;
  if (!(err = str("affiliation", text)).empty()) return err;
  auto affiliation = parse_affiliation(text);
  if (!affiliation) return "field 'affiliation' has unknown value '" + text + "'";
  rec.affiliation = *affiliation;

  if (!(err = str("gender", text)).empty()) return err;
  auto gender = parse_gender(text);
  if (!gender) return "field 'gender' has unknown value '" + text + "'";
  rec.gender = *gender;

  const char *keys[3] = {"v", "a", "d"};
  double values[3];
  int present = 0;
  for (int i = 0; i < 3; ++i) {
    auto it = obj.find(keys[i]);
    if (it == obj.end() || it->is_null()) continue;
    if (!it->is_number()) return std::string("field '") + keys[i] + "' must be a number";
    values[i] = it->get<double>();
    if (!in_unit_interval(values[i])) {
      return std::string("field '") + keys[i] + "' outside [0,1]";
    }
    ++present;
  }
  if (present == 3) {
    rec.vad = Vad{values[0], values[1], values[2]};
  } else if (present != 0) {
    return "partial VAD triple: v, a and d must appear together";
  }
  return {};
}

}  // namespace

ParseResult parse_corpus(std::istream &in, const AliasMap *aliases) {
  ParseResult result;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (tsv::read_line(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t") == std::string::npos) {
      result.rejects.push_back({line_no, "empty line"});
      continue;
    }
    json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (obj.is_discarded()) {
      result.rejects.push_back({line_no, "malformed JSON"});
      continue;
    }
    SentenceRecord rec;
    if (std::string reason = decode_record(obj, rec); !reason.empty()) {
      result.rejects.push_back({line_no, std::move(reason)});
      continue;
    }
    if (!seen_ids.insert(rec.sentence_id).second) {
      result.rejects.push_back(
          {line_no, "duplicate sentence_id '" + rec.sentence_id + "'"});
      continue;
    }
    if (aliases) {
      if (auto it = aliases->find(rec.committee); it != aliases->end()) {
        rec.committee = it->second;
      }
    }
    result.records.push_back(std::move(rec));
  }
  if (in.bad()) throw Error("I/O failure while reading corpus");
  return result;
}

std::string to_json_line(const SentenceRecord &r) {
  // nlohmann::ordered_json keeps the documented key order stable.
  nlohmann::ordered_json obj;
  obj["sentence_id"] = r.sentence_id;
  obj["text"] = r.text;
  obj["protocol_id"] = r.protocol_id;
  obj["committee"] = r.committee;
  obj["session"] = r.session;
  obj["date"] = format_date(r.date);
  obj["speaker_id"] = r.speaker_id;
  obj["is_mk"] = r.is_mk;
  obj["affiliation"] = std::string(to_string(r.affiliation));
  obj["gender"] = std::string(to_string(r.gender));
  if (r.vad) {
    obj["v"] = r.vad->v;
    obj["a"] = r.vad->a;
    obj["d"] = r.vad->d;
  }
  return obj.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

void write_corpus(std::ostream &out, std::span<const SentenceRecord> records) {
  for (const auto &r : records) out << to_json_line(r) << '\n';
}

void write_rejects(std::ostream &out, std::span<const Reject> rejects) {
  tsv::write_row(out, {"line_no", "reason"});
  for (const auto &r : rejects) {
    tsv::write_row(out, {std::to_string(r.line_no), r.reason});
  }
}

std::map<std::string, std::size_t> committee_counts(
    std::span<const SentenceRecord> records) {
  std::map<std::string, std::size_t> counts;
  for (const auto &r : records) ++counts[r.committee];
  return counts;
}

std::set<std::string> select_committees(std::span<const SentenceRecord> records,
                                        std::size_t min_sentences) {
  std::set<std::string> selected;
  for (const auto &[committee, n] : committee_counts(records)) {
    if (n > min_sentences) selected.insert(committee);
  }
  return selected;
}

ProtocolOrder order_protocols(std::span<const SentenceRecord> records) {
  std::map<std::string, std::map<std::string, Date>> dates;
  for (const auto &r : records) {
    auto [it, inserted] = dates[r.committee].emplace(r.protocol_id, r.date);
    if (!inserted && it->second != r.date) {
      throw Error("protocol '" + r.protocol_id + "' of committee '" +
                  r.committee + "' has conflicting dates " +
                  format_date(it->second) + " and " + format_date(r.date));
    }
  }
  ProtocolOrder order;
  for (const auto &[committee, protocols] : dates) {
    auto &keys = order[committee];
    keys.reserve(protocols.size());
    for (const auto &[id, date] : protocols) {
      keys.push_back({committee, id, date, 0});
    }
    std::sort(keys.begin(), keys.end(), [](const auto &x, const auto &y) {
      return std::tie(x.date, x.protocol_id) < std::tie(y.date, y.protocol_id);
    });
    for (std::size_t i = 0; i < keys.size(); ++i) {
      keys[i].time_index = static_cast<int>(i + 1);
    }
  }
  return order;
}

ProtocolIndex::ProtocolIndex(const ProtocolOrder &order) {
  for (const auto &[committee, keys] : order) {
    for (const auto &key : keys) keys_.emplace(std::pair{committee, key.protocol_id}, key);
  }
}

const ProtocolKey *ProtocolIndex::find(std::string_view committee,
                                       std::string_view protocol_id) const {
  auto it = keys_.find(std::pair{std::string(committee), std::string(protocol_id)});
  return it == keys_.end() ? nullptr : &it->second;
}

int ProtocolIndex::time_index(std::string_view committee,
                              std::string_view protocol_id) const {
  const ProtocolKey *key = find(committee, protocol_id);
  return key ? key->time_index : 0;
}

void sort_canonical(std::vector<SentenceRecord> &records,
                    const ProtocolIndex &index) {
  std::vector<int> tp(records.size());
  std::vector<std::size_t> perm(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    tp[i] = index.time_index(records[i].committee, records[i].protocol_id);
    perm[i] = i;
  }
  std::sort(perm.begin(), perm.end(), [&](std::size_t x, std::size_t y) {
    return std::tie(records[x].committee, tp[x], records[x].sentence_id) <
           std::tie(records[y].committee, tp[y], records[y].sentence_id);
  });
  std::vector<SentenceRecord> sorted;
  sorted.reserve(records.size());
  for (std::size_t i : perm) sorted.push_back(std::move(records[i]));
  records = std::move(sorted);
}

std::vector<ProtocolSlice> group_by_protocol(
    std::span<const SentenceRecord> records, const ProtocolOrder &order) {
  std::vector<ProtocolSlice> slices;
  std::map<std::pair<std::string, std::string>, std::size_t, std::less<>> slot;
  for (const auto &[committee, keys] : order) {
    for (const auto &key : keys) {
      slot.emplace(std::pair{committee, key.protocol_id}, slices.size());
      slices.push_back({key, {}});
    }
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto it = slot.find(std::pair{records[i].committee, records[i].protocol_id});
    if (it == slot.end()) {
      throw Error("record '" + records[i].sentence_id +
                  "' belongs to a protocol missing from the order");
    }
    slices[it->second].rows.push_back(i);
  }
  return slices;
}

}  // namespace polar::corpus
