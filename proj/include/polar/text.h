#ifndef POLAR_TEXT_H_
#define POLAR_TEXT_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace polar::text {

// Unicode NFC normalization with surrounding whitespace stripped. Invalid
// UTF-8 is replaced with U+FFFD by the decoder.
std::string normalize(std::string_view input);

// The corpus-wide tokenizer. The input is NFC-normalized, punctuation code
// points are deleted, and tokens are the maximal runs of letters and digits
// (combining marks attached to a run stay with it) in what remains.
// "don't stop!" -> {"dont", "stop"}.
std::vector<std::string> tokenize(std::string_view input);

// Number of tokens tokenize() would produce.
std::size_t token_count(std::string_view input);

// 64-bit FNV-1a over the raw bytes.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace polar::text

#endif  // POLAR_TEXT_H_
