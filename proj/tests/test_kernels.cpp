#include "doctest.h"

#include <random>

#include "storyweaver/kernels.hpp"
#include "storyweaver/random.hpp"

using namespace storyweaver;
using namespace storyweaver::kernels;

namespace {

TermMatrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::uint32_t vocab) {
    TermMatrix m;
    m.row_offsets.push_back(0);
    double total = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        double len = 0;
        for (std::uint32_t t = 0; t < vocab; ++t) {
            if (uniform01(rng) < 0.2) {
                const auto c = static_cast<std::uint32_t>(1 + uniform_index(rng, 3));
                m.term_ids.push_back(t);
                m.counts.push_back(c);
                len += c;
            }
        }
        len += 1;  // a token outside the vocabulary keeps lengths positive
        m.row_offsets.push_back(static_cast<std::uint32_t>(m.term_ids.size()));
        m.row_lengths.push_back(len);
        total += len;
    }
    m.avg_length = total / static_cast<double>(rows);
    return m;
}

}  // namespace

TEST_CASE("parallel kernels match the serial reference bit for bit") {
    std::mt19937_64 rng(2024);
    for (std::size_t rows : {1u, 17u, 600u, 3000u}) {
        const auto m = random_matrix(rng, rows, 40);
        std::vector<WeightedTerm> q;
        for (std::uint32_t t = 0; t < 40; t += 3) q.push_back({t, 0.5 + uniform01(rng)});
        std::vector<double> a(rows), b(rows);
        serial::bm25_scores(m, q, {}, a);
        parallel::bm25_scores(m, q, {}, b);
        CHECK(a == b);
    }
    for (auto [rows, cols] : {std::pair{3u, 5u}, {32u, 200u}, {64u, 2000u}}) {
        std::vector<double> x(rows), mat(rows * cols), bias(cols), a(cols), b(cols);
        for (auto& v : x) v = standard_normal(rng);
        for (auto& v : mat) v = standard_normal(rng);
        for (auto& v : bias) v = standard_normal(rng);
        serial::vecmat(x, mat, bias, a);
        parallel::vecmat(x, mat, bias, b);
        CHECK(a == b);
    }
}

TEST_CASE("vecmat computes bias plus x times m") {
    const std::vector<double> x{1, 2};
    const std::vector<double> m{1, 2, 3, 4, 5, 6};  // 2 x 3
    const std::vector<double> bias{0.5, 0, -1};
    std::vector<double> out(3);
    serial::vecmat(x, m, bias, out);
    CHECK(out == std::vector<double>{9.5, 12, 14});
}

TEST_CASE("bm25 kernel on a hand-sized example") {
    // Two rows: {0:2} len 2, {1:1} len 4 -> avg 3.
    TermMatrix m;
    m.row_offsets = {0, 1, 2};
    m.term_ids = {0, 1};
    m.counts = {2, 1};
    m.row_lengths = {2, 4};
    m.avg_length = 3;
    const std::vector<WeightedTerm> q{{0, 1.5}};
    std::vector<double> out(2);
    serial::bm25_scores(m, q, {1.2, 0.75}, out);
    const double expect = 1.5 * 2 * 2.2 / (2 + 1.2 * (0.25 + 0.75 * 2.0 / 3.0));
    CHECK(out[0] == doctest::Approx(expect).epsilon(1e-15));
    CHECK(out[1] == 0.0);
    CHECK(max_threads() >= 1);
}
