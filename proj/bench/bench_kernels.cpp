// Serial vs OpenMP kernels on synthetic inputs.
//   bench_kernels --benchmark_filter=bm25

#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>
#include <vector>

#include "storyweaver/kernels.hpp"
#include "storyweaver/random.hpp"

namespace k = storyweaver::kernels;

namespace {

// Zipf-ish term draws over `terms` ids, 8 to 40 tokens per sentence.
k::TermMatrix make_docs(std::size_t rows, std::uint32_t terms) {
    std::mt19937_64 rng(17);
    k::TermMatrix m;
    m.row_offsets.push_back(0);
    double total = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        const auto len = 8 + storyweaver::uniform_index(rng, 33);
        std::vector<std::uint32_t> ids;
        for (std::size_t i = 0; i < len; ++i) {
            const double u = storyweaver::uniform01(rng);
            ids.push_back(static_cast<std::uint32_t>(u * u * terms));
        }
        std::sort(ids.begin(), ids.end());
        for (std::size_t i = 0; i < ids.size();) {
            std::size_t j = i;
            while (j < ids.size() && ids[j] == ids[i]) ++j;
            m.term_ids.push_back(ids[i]);
            m.counts.push_back(static_cast<std::uint32_t>(j - i));
            i = j;
        }
        m.row_offsets.push_back(static_cast<std::uint32_t>(m.term_ids.size()));
        m.row_lengths.push_back(static_cast<double>(len));
        total += static_cast<double>(len);
    }
    m.avg_length = total / static_cast<double>(rows);
    return m;
}

std::vector<k::WeightedTerm> make_query(std::uint32_t terms) {
    std::vector<k::WeightedTerm> q;
    for (std::uint32_t t = 0; t < 6; ++t) q.push_back({t * (terms / 7), 1.0 + 0.25 * t});
    return q;
}

template <auto Kernel>
void bm25(benchmark::State& state) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    const auto docs = make_docs(rows, 5000);
    const auto query = make_query(5000);
    std::vector<double> out(rows);
    for (auto _ : state) {
        Kernel(docs, query, k::Bm25Params{}, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * rows));
}

template <auto Kernel>
void vecmat(benchmark::State& state) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    const std::size_t cols = 2000;
    std::mt19937_64 rng(3);
    std::vector<double> x(rows), m(rows * cols), bias(cols), out(cols);
    for (auto& v : x) v = storyweaver::uniform(rng, -1, 1);
    for (auto& v : m) v = storyweaver::uniform(rng, -1, 1);
    for (auto _ : state) {
        Kernel(x, m, bias, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * rows * cols));
}

}  // namespace

BENCHMARK(bm25<k::serial::bm25_scores>)->Name("bm25/serial")->Arg(1000)->Arg(100000);
BENCHMARK(bm25<k::parallel::bm25_scores>)->Name("bm25/parallel")->Arg(1000)->Arg(100000);
BENCHMARK(vecmat<k::serial::vecmat>)->Name("vecmat/serial")->Arg(32)->Arg(256);
BENCHMARK(vecmat<k::parallel::vecmat>)->Name("vecmat/parallel")->Arg(32)->Arg(256);

BENCHMARK_MAIN();
