#pragma once

// Data-parallel inner loops. Each kernel has a serial reference in
// `kernels::serial` and an OpenMP version in `kernels::parallel`; both
// produce bit-identical results because every output element is reduced
// by a single thread in a fixed order.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace storyweaver::kernels {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Compressed per-sentence term frequencies (CSR layout, term ids sorted per row).
struct TermMatrix {
    std::vector<std::uint32_t> row_offsets;  // size rows + 1
    std::vector<std::uint32_t> term_ids;
    std::vector<std::uint32_t> counts;
    std::vector<double> row_lengths;
    double avg_length = 0.0;

    std::size_t rows() const noexcept { return row_lengths.size(); }
};

struct WeightedTerm {
    std::uint32_t term_id;
    double idf;
};

namespace serial {
void bm25_scores(const TermMatrix& docs, std::span<const WeightedTerm> query, Bm25Params params,
                 std::span<double> out);

/// out[c] = bias[c] + sum_r x[r] * m[r * cols + c]
void vecmat(std::span<const double> x, std::span<const double> m, std::span<const double> bias,
            std::span<double> out);
}  // namespace serial

namespace parallel {
void bm25_scores(const TermMatrix& docs, std::span<const WeightedTerm> query, Bm25Params params,
                 std::span<double> out);
void vecmat(std::span<const double> x, std::span<const double> m, std::span<const double> bias,
            std::span<double> out);
}  // namespace parallel

/// Threads OpenMP will use, or 1 when built without it.
int max_threads() noexcept;

}  // namespace storyweaver::kernels
