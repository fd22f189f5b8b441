#include "storyweaver/kernels.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "storyweaver/error.hpp"

namespace storyweaver::kernels {
namespace {

// Below these sizes thread startup costs more than the loop.
constexpr std::size_t kMinParallelRows = 512;
constexpr std::size_t kMinParallelCells = 1 << 14;

inline double bm25_row(const TermMatrix& docs, std::size_t row,
                       std::span<const WeightedTerm> query, Bm25Params p) {
    const auto begin = docs.term_ids.begin() + docs.row_offsets[row];
    const auto end = docs.term_ids.begin() + docs.row_offsets[row + 1];
    const double norm = p.k1 * (1.0 - p.b + p.b * docs.row_lengths[row] / docs.avg_length);
    double score = 0.0;
    for (const auto& term : query) {
        const auto it = std::lower_bound(begin, end, term.term_id);
        if (it == end || *it != term.term_id) continue;
        const double tf = docs.counts[static_cast<std::size_t>(it - docs.term_ids.begin())];
        score += term.idf * tf * (p.k1 + 1.0) / (tf + norm);
    }
    return score;
}

void check_vecmat(std::span<const double> x, std::span<const double> m,
                  std::span<const double> bias, std::span<double> out) {
    if (bias.size() != out.size() || m.size() != x.size() * out.size())
        throw InvalidArgument("vecmat: shape mismatch");
}

inline double vecmat_cell(std::span<const double> x, std::span<const double> m,
                          std::span<const double> bias, std::size_t cols, std::size_t c) {
    double acc = bias[c];
    for (std::size_t r = 0; r < x.size(); ++r) acc += x[r] * m[r * cols + c];
    return acc;
}

}  // namespace

namespace serial {

void bm25_scores(const TermMatrix& docs, std::span<const WeightedTerm> query, Bm25Params params,
                 std::span<double> out) {
    if (out.size() != docs.rows()) throw InvalidArgument("bm25_scores: output size mismatch");
    for (std::size_t i = 0; i < docs.rows(); ++i) out[i] = bm25_row(docs, i, query, params);
}

void vecmat(std::span<const double> x, std::span<const double> m, std::span<const double> bias,
            std::span<double> out) {
    check_vecmat(x, m, bias, out);
    const std::size_t cols = out.size();
    for (std::size_t c = 0; c < cols; ++c) out[c] = vecmat_cell(x, m, bias, cols, c);
}

}  // namespace serial

namespace parallel {

void bm25_scores(const TermMatrix& docs, std::span<const WeightedTerm> query, Bm25Params params,
                 std::span<double> out) {
    if (out.size() != docs.rows()) throw InvalidArgument("bm25_scores: output size mismatch");
    const auto n = static_cast<std::ptrdiff_t>(docs.rows());
#pragma omp parallel for schedule(static) if (docs.rows() >= kMinParallelRows)
    for (std::ptrdiff_t i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] = bm25_row(docs, static_cast<std::size_t>(i), query, params);
}

void vecmat(std::span<const double> x, std::span<const double> m, std::span<const double> bias,
            std::span<double> out) {
    check_vecmat(x, m, bias, out);
    const std::size_t cols = out.size();
    const auto n = static_cast<std::ptrdiff_t>(cols);
#pragma omp parallel for schedule(static) if (m.size() >= kMinParallelCells)
    for (std::ptrdiff_t c = 0; c < n; ++c)
        out[static_cast<std::size_t>(c)] = vecmat_cell(x, m, bias, cols, static_cast<std::size_t>(c));
}

}  // namespace parallel

int max_threads() noexcept {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace storyweaver::kernels
