#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "polar/embeddings.h"
#include "polar/error.h"
#include "polar/rng.h"
#include "polar/text.h"
#include "polar/vad_lexicon.h"
#include "synthetic.h"

namespace polar::embeddings {
namespace {

EmbeddingMatrix random_matrix(std::size_t n, std::uint32_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> ids;
  std::vector<float> data;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back("sent-" + std::to_string(i));
    for (std::uint32_t j = 0; j < dim; ++j) data.push_back(static_cast<float>(rng.uniform() * 2 - 1));
  }
  return EmbeddingMatrix(std::move(ids), dim, std::move(data));
}

std::string ids_text(const EmbeddingMatrix &m) {
  std::string s;
  for (const auto &id : m.ids()) s += id + "\n";
  return s;
}

// Little-endian header written byte by byte, independent of the encoder.
std::string header(const char *magic, std::uint16_t version, std::uint16_t reserved,
                   std::uint32_t n, std::uint32_t dim) {
  std::string h(magic, 4);
  auto put = [&](std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) h.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  put(version, 2);
  put(reserved, 2);
  put(n, 4);
  put(dim, 4);
  return h;
}

TEST(Format, HeaderLayoutAndPayload) {
  const EmbeddingMatrix m({"a", "b"}, 2, {1.0f, -2.0f, 0.5f, 0.0f});
  const std::string bytes = encode_payload(m);
  ASSERT_EQ(bytes.size(), kHeaderBytes + 16);
  EXPECT_EQ(bytes.substr(0, 16), header("VADE", 1, 0, 2, 2));
  float third;
  std::memcpy(&third, bytes.data() + 16 + 8, 4);
  EXPECT_EQ(third, 0.5f);
}

TEST(Format, RoundTripThroughFiles) {
  synth::TempDir dir("emb");
  for (auto [n, dim] : {std::pair<std::size_t, std::uint32_t>{0, 1}, {1, 1}, {37, 768}}) {
    const auto m = n ? random_matrix(n, dim, n) : EmbeddingMatrix({}, dim, {});
    write_embeddings(m, dir.path() / "x");
    EXPECT_EQ(read_embeddings(dir.path() / "x"), m);
    EXPECT_EQ(std::filesystem::file_size(payload_path(dir.path() / "x")),
              kHeaderBytes + 4 * n * dim);
  }
}

TEST(Format, FindById) {
  const auto m = random_matrix(5, 3, 1);
  EXPECT_EQ(m.find("sent-3"), 3);
  EXPECT_EQ(m.find("nope"), -1);
  EXPECT_EQ(m.row(3)[2], m.data()[11]);
}

TEST(Format, CorruptPayloadsRejected) {
  const auto m = random_matrix(3, 4, 9);
  const std::string good = encode_payload(m);
  const std::string ids = ids_text(m);
  const std::string body = good.substr(kHeaderBytes);
  EXPECT_NO_THROW(decode(good, ids));
  EXPECT_THROW(decode(header("VADX", 1, 0, 3, 4) + body, ids), Error);
  EXPECT_THROW(decode(header("VADE", 2, 0, 3, 4) + body, ids), Error);
  EXPECT_THROW(decode(header("VADE", 1, 7, 3, 4) + body, ids), Error);
  EXPECT_THROW(decode(good.substr(0, good.size() - 1), ids), Error);
  EXPECT_THROW(decode(good + "x", ids), Error);
  EXPECT_THROW(decode(good.substr(0, 10), ids), Error);
  EXPECT_THROW(decode(good, "sent-0\nsent-1\n"), Error);
  EXPECT_THROW(decode(good, ids + "extra\n"), Error);
  EXPECT_THROW(decode(good, "a\na\nb\n"), Error);

  std::string nan = good;
  const float q = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan.data() + kHeaderBytes + 4, &q, 4);
  EXPECT_THROW(decode(nan, ids), Error);
}

TEST(Format, ConstructorValidates) {
  EXPECT_THROW(EmbeddingMatrix({"a"}, 2, {1.0f}), Error);
  EXPECT_THROW(EmbeddingMatrix({"a"}, 0, {}), Error);
  EXPECT_THROW(EmbeddingMatrix({"a\nb"}, 1, {1.0f}), Error);
  EXPECT_THROW(EmbeddingMatrix({""}, 1, {1.0f}), Error);
  EXPECT_THROW(EmbeddingMatrix({"a", "a"}, 1, {1.0f, 2.0f}), Error);
}

TEST(Format, MissingIdsFileRejected) {
  synth::TempDir dir("emb_missing");
  write_embeddings(random_matrix(2, 2, 1), dir.path() / "x");
  std::filesystem::remove(ids_path(dir.path() / "x"));
  EXPECT_THROW(read_embeddings(dir.path() / "x"), Error);
}

TEST(Baseline, HashedBagOfWordsIsUnitLength) {
  const BaselineOptions opt{64, 5};
  const auto v = baseline_embed("alpha beta beta", opt);
  ASSERT_EQ(v.size(), 64u);
  std::vector<double> expect(64, 0.0);
  for (const char *tok : {"alpha", "beta", "beta"}) expect[(text::fnv1a64(tok) ^ 5) % 64] += 1;
  double norm = 0;
  for (double e : expect) norm += e * e;
  for (std::size_t i = 0; i < 64; ++i)
    EXPECT_NEAR(v[i], expect[i] / std::sqrt(norm), 1e-6);
  EXPECT_EQ(baseline_width(opt, false), 64u);
  EXPECT_EQ(baseline_width(opt, true), 67u);
}

TEST(Baseline, EmptyTextAndLexiconFeatures) {
  std::istringstream in("x\tjoy\ttranslation\t0.9\t0.8\t0.7\n");
  const auto lex = lexicon::VadLexicon::load(in);
  const BaselineOptions opt{16, 0};
  const auto empty = baseline_embed("", opt, &lex);
  ASSERT_EQ(empty.size(), 19u);
  for (int i = 0; i < 16; ++i) EXPECT_EQ(empty[i], 0.0f);
  EXPECT_EQ(empty[16], 0.5f);
  const auto hit = baseline_embed("joy and more", opt, &lex);
  EXPECT_FLOAT_EQ(hit[16], 0.9f);
  EXPECT_FLOAT_EQ(hit[18], 0.7f);
}

TEST(Baseline, BatchSerialEqualsParallel) {
  std::vector<std::string> ids, texts;
  Rng rng(2);
  for (int i = 0; i < 500; ++i) {
    ids.push_back("s" + std::to_string(i));
    std::string t;
    for (int k = 0; k < 10; ++k) t += "w" + std::to_string(rng.below(50)) + " ";
    texts.push_back(t);
  }
  const BaselineOptions opt{128, 3};
  const auto a = embed_batch(ids, texts, opt, nullptr, kernels::Execution::kSerial);
  const auto b = embed_batch(ids, texts, opt, nullptr, kernels::Execution::kParallel);
  EXPECT_EQ(a, b);
  const auto row = baseline_embed(texts[42], opt);
  EXPECT_TRUE(std::equal(row.begin(), row.end(), a.row(42).begin()));
}

}  // namespace
}  // namespace polar::embeddings
