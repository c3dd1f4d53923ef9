#ifndef POLAR_EMBEDDINGS_H_
#define POLAR_EMBEDDINGS_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "polar/kernels.h"

namespace polar::lexicon {
class VadLexicon;
}

namespace polar::embeddings {

// Dense row-major float matrix with one sentence id per row.
//
// On disk a matrix is a pair of files sharing a base path:
//
//   <base>.f32   little-endian binary
//                  0..3   magic "VADE"
//                  4..5   version (u16) = 1
//                  6..7   reserved (u16) = 0
//                  8..11  n   (u32)
//                  12..15 dim (u32)
//                  16..   n * dim IEEE-754 binary32 values, row-major
//   <base>.ids   UTF-8, one id per line, line i naming row i
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  // Throws unless ids.size() * dim == data.size(), ids are unique and
  // non-empty without newlines, dim > 0, and every value is finite.
  EmbeddingMatrix(std::vector<std::string> ids, std::uint32_t dim,
                  std::vector<float> data);

  std::size_t rows() const { return ids_.size(); }
  std::uint32_t dim() const { return dim_; }
  std::span<const std::string> ids() const { return ids_; }
  std::span<const float> data() const { return data_; }
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(data_).subspan(i * dim_, dim_);
  }

  // Row index for an id; -1 if absent.
  std::ptrdiff_t find(std::string_view id) const;

  friend bool operator==(const EmbeddingMatrix &a, const EmbeddingMatrix &b) {
    return a.dim_ == b.dim_ && a.ids_ == b.ids_ && a.data_ == b.data_;
  }

 private:
  std::vector<std::string> ids_;
  std::uint32_t dim_ = 0;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> row_of_;
};

inline constexpr char kMagic[4] = {'V', 'A', 'D', 'E'};
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 16;

std::filesystem::path payload_path(const std::filesystem::path &base);
std::filesystem::path ids_path(const std::filesystem::path &base);

void write_embeddings(const EmbeddingMatrix &matrix,
                      const std::filesystem::path &base);

// Rejects a bad magic or version, a nonzero reserved field, a payload whose
// size is not exactly n * dim * 4 bytes, an id count different from n, and
// non-finite values. Never returns a partial matrix.
EmbeddingMatrix read_embeddings(const std::filesystem::path &base);

// In-memory forms of the same layout, used by the file functions.
std::string encode_payload(const EmbeddingMatrix &matrix);
EmbeddingMatrix decode(std::string_view payload, std::string_view ids_text);

struct BaselineOptions {
  std::uint32_t dim = 256;
  std::uint64_t seed = 0;
};

// Feature-hashed bag of words: each token goes to bucket
// (fnv1a64(token) ^ seed) % dim, counts are L2-normalized, and with a
// lexicon the mean V, A, D of the tokens it knows is appended (0.5 per
// dimension when no token hits). Empty text gives a zero vector.
std::vector<float> baseline_embed(std::string_view text,
                                  const BaselineOptions &options,
                                  const lexicon::VadLexicon *lexicon = nullptr);

// Output width of baseline_embed.
std::uint32_t baseline_width(const BaselineOptions &options, bool with_lexicon);

// Embeds every text; row i of the result is texts[i].
EmbeddingMatrix embed_batch(std::span<const std::string> ids,
                            std::span<const std::string> texts,
                            const BaselineOptions &options,
                            const lexicon::VadLexicon *lexicon = nullptr,
                            kernels::Execution execution =
                                kernels::Execution::kParallel);

}  // namespace polar::embeddings

#endif  // POLAR_EMBEDDINGS_H_
