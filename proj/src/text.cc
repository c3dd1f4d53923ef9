#include "polar/text.h"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf16.h>

#include "polar/error.h"

namespace polar::text {
namespace {

const icu::Normalizer2 &nfc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2 *n = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || n == nullptr) {
    throw Error(std::string("ICU NFC normalizer unavailable: ") +
                u_errorName(status));
  }
  return *n;
}

icu::UnicodeString to_nfc(std::string_view input) {
  icu::UnicodeString raw = icu::UnicodeString::fromUTF8(
      icu::StringPiece(input.data(), static_cast<int32_t>(input.size())));
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString out = nfc().normalize(raw, status);
  if (U_FAILURE(status)) {
    throw Error(std::string("NFC normalization failed: ") +
                u_errorName(status));
  }
  return out;
}

bool is_mark(UChar32 c) {
  const int8_t type = u_charType(c);
  return type == U_NON_SPACING_MARK || type == U_COMBINING_SPACING_MARK ||
         type == U_ENCLOSING_MARK;
}

template <typename Sink>
void for_each_token(std::string_view input, Sink &&sink) {
  const icu::UnicodeString s = to_nfc(input);
  icu::UnicodeString token;
  auto flush = [&] {
    if (!token.isEmpty()) {
      sink(token);
      token.remove();
    }
  };
  for (int32_t i = 0; i < s.length();) {
    const UChar32 c = s.char32At(i);
    i += U16_LENGTH(c);
    if (u_isalnum(c)) {
      token.append(c);
    } else if (is_mark(c)) {
      if (!token.isEmpty()) token.append(c);
    } else if (u_ispunct(c)) {
      // Deleted; the surrounding letters join.
    } else {
      flush();
    }
  }
  flush();
}

}  // namespace

std::string normalize(std::string_view input) {
  const icu::UnicodeString n = to_nfc(input);
  std::string out;
  n.toUTF8String(out);
  const auto first = out.find_first_not_of(" \t\r\n\f\v");
  if (first == std::string::npos) return {};
  const auto last = out.find_last_not_of(" \t\r\n\f\v");
  return out.substr(first, last - first + 1);
}

std::vector<std::string> tokenize(std::string_view input) {
  std::vector<std::string> tokens;
  for_each_token(input, [&](const icu::UnicodeString &t) {
    std::string utf8;
    t.toUTF8String(utf8);
    tokens.push_back(std::move(utf8));
  });
  return tokens;
}

std::size_t token_count(std::string_view input) {
  std::size_t n = 0;
  for_each_token(input, [&](const icu::UnicodeString &) { ++n; });
  return n;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace polar::text
