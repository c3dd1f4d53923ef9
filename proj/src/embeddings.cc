#include "polar/embeddings.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "polar/error.h"
#include "polar/text.h"
#include "polar/vad_lexicon.h"

namespace polar::embeddings {
namespace {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

void put_u16(std::string &out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= std::uint32_t{static_cast<unsigned char>(in[at + i])} << (8 * i);
  }
  return v;
}

std::uint16_t get_u16(std::string_view in, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(in[at]) |
                                    (static_cast<unsigned char>(in[at + 1]) << 8));
}

std::string slurp(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error("I/O failure reading " + path.string());
  return std::move(buf).str();
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> ids,
                                 std::uint32_t dim, std::vector<float> data)
    : ids_(std::move(ids)), dim_(dim), data_(std::move(data)) {
  if (dim_ == 0) throw Error("embedding dim must be positive");
  if (data_.size() != ids_.size() * dim_) {
    throw Error("embedding data size does not equal rows * dim");
  }
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    const auto &id = ids_[i];
    if (id.empty() || id.find_first_of("\r\n") != std::string::npos) {
      throw Error("embedding row " + std::to_string(i) +
                  ": id must be non-empty and single-line");
    }
    if (!row_of_.emplace(id, i).second) {
      throw Error("embedding row " + std::to_string(i) + ": duplicate id '" +
                  id + "'");
    }
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw Error("embedding row " + std::to_string(i / dim_) +
                  " contains a non-finite value");
    }
  }
}

std::ptrdiff_t EmbeddingMatrix::find(std::string_view id) const {
  auto it = row_of_.find(std::string(id));
  return it == row_of_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

std::filesystem::path payload_path(const std::filesystem::path &base) {
  return std::filesystem::path(base.string() + ".f32");
}

std::filesystem::path ids_path(const std::filesystem::path &base) {
  return std::filesystem::path(base.string() + ".ids");
}

std::string encode_payload(const EmbeddingMatrix &m) {
  if (m.rows() > UINT32_MAX) throw Error("too many embedding rows");
  std::string out;
  out.reserve(kHeaderBytes + m.data().size() * 4);
  out.append(kMagic, 4);
  put_u16(out, kVersion);
  put_u16(out, 0);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, m.dim());
  for (float f : m.data()) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

EmbeddingMatrix decode(std::string_view payload, std::string_view ids_text) {
  if (payload.size() < kHeaderBytes) throw Error("embedding file truncated header");
  if (std::memcmp(payload.data(), kMagic, 4) != 0) {
    throw Error("embedding file has bad magic");
  }
  if (get_u16(payload, 4) != kVersion) {
    throw Error("unsupported embedding file version " +
                std::to_string(get_u16(payload, 4)));
  }
  if (get_u16(payload, 6) != 0) throw Error("embedding file reserved field set");
  const std::uint64_t n = get_u32(payload, 8);
  const std::uint32_t dim = get_u32(payload, 12);
  if (dim == 0) throw Error("embedding file has dim 0");
  const std::uint64_t expected = kHeaderBytes + n * dim * 4;
  if (payload.size() != expected) {
    throw Error("embedding payload is " + std::to_string(payload.size()) +
                " bytes, header implies " + std::to_string(expected));
  }

  std::vector<std::string> ids;
  std::size_t start = 0;
  while (start < ids_text.size()) {
    std::size_t end = ids_text.find('\n', start);
    if (end == std::string_view::npos) end = ids_text.size();
    std::string_view id = ids_text.substr(start, end - start);
    if (!id.empty() && id.back() == '\r') id.remove_suffix(1);
    ids.emplace_back(id);
    start = end + 1;
  }
  if (ids.size() != n) {
    throw Error("ids file lists " + std::to_string(ids.size()) +
                " ids, header says " + std::to_string(n));
  }

  std::vector<float> data(n * dim);
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = std::bit_cast<float>(get_u32(payload, kHeaderBytes + 4 * i));
  }
  return EmbeddingMatrix(std::move(ids), dim, std::move(data));
}

void write_embeddings(const EmbeddingMatrix &matrix,
                      const std::filesystem::path &base) {
  {
    std::ofstream out(payload_path(base), std::ios::binary | std::ios::trunc);
    const std::string bytes = encode_payload(matrix);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("cannot write " + payload_path(base).string());
  }
  std::ofstream ids(ids_path(base), std::ios::binary | std::ios::trunc);
  for (const auto &id : matrix.ids()) ids << id << '\n';
  if (!ids) throw Error("cannot write " + ids_path(base).string());
}

EmbeddingMatrix read_embeddings(const std::filesystem::path &base) {
  return decode(slurp(payload_path(base)), slurp(ids_path(base)));
}

std::uint32_t baseline_width(const BaselineOptions &options,
                             bool with_lexicon) {
  return options.dim + (with_lexicon ? 3u : 0u);
}

std::vector<float> baseline_embed(std::string_view text,
                                  const BaselineOptions &options,
                                  const lexicon::VadLexicon *lexicon) {
  if (options.dim < 8) throw Error("baseline embedding dim must be >= 8");
  std::vector<double> buckets(options.dim, 0.0);
  double hits = 0.0;
  Vad sum{};
  for (const auto &token : text::tokenize(text)) {
    buckets[(text::fnv1a64(token) ^ options.seed) % options.dim] += 1.0;
    if (lexicon) {
      if (auto vad = lexicon->lookup(token)) {
        sum.v += vad->v;
        sum.a += vad->a;
        sum.d += vad->d;
        hits += 1.0;
      }
    }
  }
  double norm2 = 0.0;
  for (double b : buckets) norm2 += b * b;
  const double scale = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;

  std::vector<float> out;
  out.reserve(baseline_width(options, lexicon != nullptr));
  for (double b : buckets) out.push_back(static_cast<float>(b * scale));
  if (lexicon) {
    for (double s : {sum.v, sum.a, sum.d}) {
      out.push_back(static_cast<float>(hits > 0.0 ? s / hits : 0.5));
    }
  }
  return out;
}

EmbeddingMatrix embed_batch(std::span<const std::string> ids,
                            std::span<const std::string> texts,
                            const BaselineOptions &options,
                            const lexicon::VadLexicon *lexicon,
                            kernels::Execution execution) {
  if (ids.size() != texts.size()) throw Error("embed_batch: ids/texts mismatch");
  const std::uint32_t width = baseline_width(options, lexicon != nullptr);
  std::vector<float> data(texts.size() * width);
  auto embed_row = [&](std::size_t i) {
    auto v = baseline_embed(texts[i], options, lexicon);
    std::copy(v.begin(), v.end(), data.begin() + i * width);
  };
  const auto n = static_cast<std::ptrdiff_t>(texts.size());
  if (execution == kernels::Execution::kParallel) {
    // Exceptions cannot leave an OpenMP region; the first one is rethrown.
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 64)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      try {
        embed_row(static_cast<std::size_t>(i));
      } catch (...) {
#pragma omp critical
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) embed_row(static_cast<std::size_t>(i));
  }
  return EmbeddingMatrix(std::vector<std::string>(ids.begin(), ids.end()),
                         width, std::move(data));
}

}  // namespace polar::embeddings
