#include <benchmark/benchmark.h>

#include <random>

#include "personasq/corpus.hpp"
#include "personasq/sq_eval.hpp"

namespace {

using namespace personasq;

std::string synthetic_text(std::size_t tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens; ++i) {
    if (i) out += ' ';
    out += "w" + std::to_string(i % 997);
  }
  return out;
}

void BM_ChunkDocument(benchmark::State& state) {
  const Document doc = ingest_document(synthetic_text(static_cast<std::size_t>(state.range(0))), {});
  for (auto _ : state) benchmark::DoNotOptimize(chunk_document(doc));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ChunkDocument)->Arg(2'000)->Arg(10'000)->Arg(100'000);

void BM_PairwiseSimilarity(benchmark::State& state) {
  const auto personas = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<PersonaQuestions> qs(personas);
  for (std::size_t i = 0; i < personas; ++i) {
    qs[i].persona = "p" + std::to_string(i);
    for (int q = 0; q < 5; ++q) {
      std::vector<double> v(384);
      for (auto& x : v) x = u(rng);
      qs[i].embeddings.push_back(std::move(v));
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(document_similarity(pairwise_persona_similarity(qs)));
}
BENCHMARK(BM_PairwiseSimilarity)->Arg(4)->Arg(16)->Arg(64);

void BM_CoverageRatio(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(11);
  const std::vector<std::string> personas = {"A", "B", "C", "D", "E", "F"};
  std::vector<RankedQuestion> questions;
  std::map<std::string, PersonaRanking> rankings;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = "q" + std::to_string(i);
    questions.push_back({id, "d" + std::to_string(i % 50), personas[rng() % personas.size()]});
    std::vector<std::string> order = personas;
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(1 + rng() % order.size());
    rankings[id] = {id, order};
  }
  for (auto _ : state) benchmark::DoNotOptimize(coverage_ratio(questions, rankings, 3));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CoverageRatio)->Arg(1'000)->Arg(20'000);

}  // namespace

BENCHMARK_MAIN();
