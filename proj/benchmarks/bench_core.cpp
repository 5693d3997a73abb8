#include <benchmark/benchmark.h>

#include "pausebench/haystack.hpp"
#include "pausebench/prompts.hpp"

using namespace pausebench;

namespace {

const Tokenizer& vocab() {
  static const Tokenizer tok = load_vocab(PAUSEBENCH_FIXTURES "/test_vocab.ranks");
  return tok;
}

const Corpus& corpus() {
  static const Corpus c = load_corpus(PAUSEBENCH_FIXTURES "/corpus");
  return c;
}

void BM_Encode(benchmark::State& state) {
  const std::string text = corpus().documents.front().text;
  for (auto _ : state) benchmark::DoNotOptimize(vocab().encode(text));
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_Encode);

void BM_BuildHaystack(benchmark::State& state) {
  const auto target = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(build_haystack(corpus(), target, vocab(), 42));
}
BENCHMARK(BM_BuildHaystack)->Arg(1000)->Arg(4000)->Arg(8000)->Unit(benchmark::kMillisecond);

void BM_PlaceNeedle(benchmark::State& state) {
  const Haystack h = build_haystack(corpus(), 8000, vocab(), 42);
  const NeedleSpec needle{"The lighthouse keeper's cat is named Biscuit.", "What is the cat's name?", "Biscuit"};
  for (auto _ : state) benchmark::DoNotOptimize(place_needle(h, needle, 50.0, vocab()));
}
BENCHMARK(BM_PlaceNeedle)->Unit(benchmark::kMillisecond);

void BM_InjectPauses(benchmark::State& state) {
  const std::string text = build_haystack(corpus(), 8000, vocab(), 42).text();
  const auto mode = static_cast<InjectionMode>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(inject_pauses(text, mode));
}
BENCHMARK(BM_InjectPauses)->Arg(static_cast<int>(InjectionMode::standard))->Arg(static_cast<int>(InjectionMode::augmented));

}  // namespace

BENCHMARK_MAIN();
