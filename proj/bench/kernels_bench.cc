// Serial reference vs OpenMP kernels. Run with OMP_NUM_THREADS set to taste.

#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "polar/corpus.h"
#include "polar/embeddings.h"
#include "polar/kernels.h"
#include "polar/metrics.h"

namespace {

using polar::kernels::Execution;

struct Matrix {
  Eigen::MatrixXd x;
  std::vector<double> w;
};

Matrix make_matrix(int n, int d) {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit;
  Matrix m{Eigen::MatrixXd(n, d), std::vector<double>(n)};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) m.x(i, j) = normal(gen);
    m.w[i] = unit(gen);
  }
  return m;
}

void BM_WeightedGramSerial(benchmark::State &state) {
  const auto m = make_matrix(static_cast<int>(state.range(0)), 257);
  for (auto _ : state) benchmark::DoNotOptimize(polar::kernels::serial::weighted_gram(m.x, m.w));
}

void BM_WeightedGramParallel(benchmark::State &state) {
  const auto m = make_matrix(static_cast<int>(state.range(0)), 257);
  for (auto _ : state) benchmark::DoNotOptimize(polar::kernels::weighted_gram(m.x, m.w));
}

std::vector<double> series(std::size_t n) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> unit;
  std::vector<double> out(n);
  for (double &v : out) v = unit(gen);
  return out;
}

void BM_MannKendallSerial(benchmark::State &state) {
  const auto x = series(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(polar::kernels::serial::mann_kendall_s(x));
}

void BM_MannKendallParallel(benchmark::State &state) {
  const auto x = series(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(polar::kernels::mann_kendall_s(x));
}

struct Texts {
  std::vector<std::string> ids, texts;
};

Texts make_texts(std::size_t n) {
  std::mt19937_64 gen(3);
  Texts t;
  for (std::size_t i = 0; i < n; ++i) {
    t.ids.push_back("s" + std::to_string(i));
    std::string text;
    for (int k = 0; k < 20; ++k) text += "w" + std::to_string(gen() % 5000) + " ";
    t.texts.push_back(std::move(text));
  }
  return t;
}

void embed(benchmark::State &state, Execution execution) {
  const auto t = make_texts(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(polar::embeddings::embed_batch(t.ids, t.texts, {256, 0}, nullptr, execution));
  }
}
void BM_EmbedBatchSerial(benchmark::State &state) { embed(state, Execution::kSerial); }
void BM_EmbedBatchParallel(benchmark::State &state) { embed(state, Execution::kParallel); }

std::vector<polar::corpus::SentenceRecord> make_corpus(int protocols) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> unit;
  std::vector<polar::corpus::SentenceRecord> out;
  for (int p = 0; p < protocols; ++p) {
    for (int s = 0; s < 200; ++s) {
      polar::corpus::SentenceRecord r;
      r.sentence_id = std::to_string(p) + "-" + std::to_string(s);
      r.text = "x";
      r.protocol_id = "p" + std::to_string(p);
      r.committee = "C" + std::to_string(p % 8);
      r.session = 20;
      r.date = std::chrono::year_month_day{std::chrono::year{2015}, std::chrono::month{1},
                                           std::chrono::day{1 + static_cast<unsigned>(p % 28)}};
      r.speaker_id = "k";
      r.is_mk = true;
      r.affiliation = s % 2 ? polar::corpus::Affiliation::kGovernment
                            : polar::corpus::Affiliation::kOpposition;
      r.gender = polar::corpus::Gender::kMale;
      r.vad = polar::Vad{unit(gen), unit(gen), unit(gen)};
      out.push_back(std::move(r));
    }
  }
  return out;
}

void metrics(benchmark::State &state, Execution execution) {
  const auto records = make_corpus(static_cast<int>(state.range(0)));
  const auto order = polar::corpus::order_protocols(records);
  for (auto _ : state) {
    benchmark::DoNotOptimize(polar::metrics::compute_metrics(records, order, {}, execution));
  }
}
void BM_ComputeMetricsSerial(benchmark::State &state) { metrics(state, Execution::kSerial); }
void BM_ComputeMetricsParallel(benchmark::State &state) { metrics(state, Execution::kParallel); }

}  // namespace

BENCHMARK(BM_WeightedGramSerial)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_WeightedGramParallel)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MannKendallSerial)->Arg(300)->Arg(5000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MannKendallParallel)->Arg(300)->Arg(5000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_EmbedBatchSerial)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EmbedBatchParallel)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ComputeMetricsSerial)->Arg(800)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ComputeMetricsParallel)->Arg(800)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
