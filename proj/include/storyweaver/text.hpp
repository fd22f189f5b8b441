#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "storyweaver/dialogue.hpp"

namespace storyweaver {

using Token = std::string;

/// Lowercase, split on whitespace, strip leading/trailing non-alphanumerics,
/// drop empties. Interior punctuation ("massy's") survives.
std::vector<Token> tokenize(std::string_view text);

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

inline constexpr std::size_t kDefaultDim = 64;
inline constexpr std::size_t kDefaultBits = 12;

/// Unit-norm (or all-zero) sentence embedding.
class SentenceVector {
  public:
    SentenceVector() = default;
    explicit SentenceVector(std::vector<double> values) : values_(std::move(values)) {}

    std::size_t dim() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    bool is_zero() const noexcept;
    double norm() const noexcept;

    friend bool operator==(const SentenceVector&, const SentenceVector&) = default;

  private:
    std::vector<double> values_;
};

/// Signed hashed bag of unigrams and adjacent bigrams, L2-normalized.
SentenceVector encode_sentence(std::span<const Token> tokens, std::size_t dim = kDefaultDim);

double cosine(const SentenceVector& a, const SentenceVector& b);

/// Mean of the windowed turns' sentence vectors, renormalized.
SentenceVector encode_state(const DialogueState& state, std::size_t dim = kDefaultDim);

using Bucket = std::uint32_t;

/// k seeded Gaussian hyperplanes in D dimensions. Entries depend only on (seed, k, D).
class ProjectionMatrix {
  public:
    ProjectionMatrix(std::uint64_t seed, std::size_t bits = kDefaultBits,
                     std::size_t dim = kDefaultDim);

    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t bits() const noexcept { return bits_; }
    std::size_t dim() const noexcept { return dim_; }
    std::span<const double> row(std::size_t i) const;
    Bucket bucket_count() const noexcept { return Bucket{1} << bits_; }

  private:
    std::uint64_t seed_;
    std::size_t bits_;
    std::size_t dim_;
    std::vector<double> rows_;
};

/// Bit i set iff dot(row_i, v) >= 0. The zero vector lands in 2^k - 1.
Bucket project_bucket(const SentenceVector& v, const ProjectionMatrix& projection);

}  // namespace storyweaver
