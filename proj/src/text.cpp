#include "storyweaver/text.hpp"

#include <cmath>
#include <numeric>

#include "storyweaver/error.hpp"
#include "storyweaver/random.hpp"

namespace storyweaver {
namespace {

// Byte length of a UTF-8 whitespace sequence starting at text[i], or 0.
std::size_t whitespace_at(std::string_view text, std::size_t i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == ' ' || (c >= 0x09 && c <= 0x0d)) return 1;
    auto byte = [&](std::size_t k) {
        return i + k < text.size() ? static_cast<unsigned char>(text[i + k]) : 0u;
    };
    if (c == 0xc2 && (byte(1) == 0x85 || byte(1) == 0xa0)) return 2;
    if (c == 0xe1 && byte(1) == 0x9a && byte(2) == 0x80) return 3;  // U+1680
    if (c == 0xe2 && byte(1) == 0x80) {
        const auto b = byte(2);
        if ((b >= 0x80 && b <= 0x8a) || b == 0xa8 || b == 0xa9 || b == 0xaf) return 3;
    }
    if (c == 0xe2 && byte(1) == 0x81 && byte(2) == 0x9f) return 3;  // U+205F
    if (c == 0xe3 && byte(1) == 0x80 && byte(2) == 0x80) return 3;  // U+3000
    return 0;
}

// Non-ASCII bytes count as word characters so accented letters survive stripping.
bool is_word_byte(unsigned char c) {
    return c >= 0x80 || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

void push_piece(std::string_view piece, std::vector<Token>& out) {
    std::size_t begin = 0;
    std::size_t end = piece.size();
    while (begin < end && !is_word_byte(static_cast<unsigned char>(piece[begin]))) ++begin;
    while (end > begin && !is_word_byte(static_cast<unsigned char>(piece[end - 1]))) --end;
    if (begin == end) return;
    Token token(piece.substr(begin, end - begin));
    for (auto& ch : token) {
        if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
    }
    out.push_back(std::move(token));
}

void normalize(std::vector<double>& values) {
    const double sq = std::inner_product(values.begin(), values.end(), values.begin(), 0.0);
    if (sq == 0.0) return;
    const double inv = 1.0 / std::sqrt(sq);
    for (auto& v : values) v *= inv;
}

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> tokens;
    std::size_t start = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        if (const auto ws = whitespace_at(text, i); ws > 0) {
            push_piece(text.substr(start, i - start), tokens);
            i += ws;
            start = i;
        } else {
            ++i;
        }
    }
    push_piece(text.substr(start), tokens);
    return tokens;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t hash = 14695981039346656037ULL;
    for (const char c : bytes) {
        hash ^= static_cast<unsigned char>(c);
        hash *= 1099511628211ULL;
    }
    return hash;
}

bool SentenceVector::is_zero() const noexcept {
    for (const double v : values_)
        if (v != 0.0) return false;
    return true;
}

double SentenceVector::norm() const noexcept {
    return std::sqrt(std::inner_product(values_.begin(), values_.end(), values_.begin(), 0.0));
}

SentenceVector encode_sentence(std::span<const Token> tokens, std::size_t dim) {
    if (dim == 0) throw InvalidArgument("encoding dimension must be >= 1");
    std::vector<double> values(dim, 0.0);
    auto accumulate = [&](std::string_view feature) {
        const std::uint64_t h = fnv1a64(feature);
        values[h % dim] += (h >> 63) == 0 ? 1.0 : -1.0;
    };
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        accumulate(tokens[i]);
        if (i + 1 < tokens.size()) accumulate(tokens[i] + ' ' + tokens[i + 1]);
    }
    // Signed collisions can cancel to zero even for non-empty input; keep the
    // "zero iff empty" contract by falling back to the first unigram alone.
    normalize(values);
    if (!tokens.empty() && SentenceVector(values).is_zero()) {
        const std::uint64_t h = fnv1a64(tokens.front());
        values[h % dim] = (h >> 63) == 0 ? 1.0 : -1.0;
    }
    return SentenceVector(std::move(values));
}

double cosine(const SentenceVector& a, const SentenceVector& b) {
    if (a.dim() != b.dim()) throw InvalidArgument("cosine: dimension mismatch");
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    const auto av = a.values();
    const auto bv = b.values();
    const double dot = std::inner_product(av.begin(), av.end(), bv.begin(), 0.0);
    return dot / (na * nb);
}

SentenceVector encode_state(const DialogueState& state, std::size_t dim) {
    std::vector<double> sum(dim, 0.0);
    const auto turns = window(state);
    for (const auto& turn : turns) {
        const auto v = encode_sentence(tokenize(turn.text()), dim);
        for (std::size_t i = 0; i < dim; ++i) sum[i] += v[i];
    }
    if (!turns.empty())
        for (auto& s : sum) s /= static_cast<double>(turns.size());
    normalize(sum);
    return SentenceVector(std::move(sum));
}

ProjectionMatrix::ProjectionMatrix(std::uint64_t seed, std::size_t bits, std::size_t dim)
    : seed_(seed), bits_(bits), dim_(dim) {
    if (bits_ == 0 || bits_ > 31) throw InvalidArgument("projection bits must be in [1,31]");
    if (dim_ == 0) throw InvalidArgument("projection dimension must be >= 1");
    std::mt19937_64 rng(seed_);
    rows_.resize(bits_ * dim_);
    for (auto& x : rows_) x = standard_normal(rng);
}

std::span<const double> ProjectionMatrix::row(std::size_t i) const {
    return std::span<const double>(rows_).subspan(i * dim_, dim_);
}

Bucket project_bucket(const SentenceVector& v, const ProjectionMatrix& projection) {
    if (v.dim() != projection.dim()) throw InvalidArgument("project_bucket: dimension mismatch");
    const auto values = v.values();
    Bucket bucket = 0;
    for (std::size_t i = 0; i < projection.bits(); ++i) {
        const auto row = projection.row(i);
        const double dot = std::inner_product(row.begin(), row.end(), values.begin(), 0.0);
        if (dot >= 0.0) bucket |= Bucket{1} << i;
    }
    return bucket;
}

}  // namespace storyweaver
