#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "storyweaver/dialogue.hpp"
#include "storyweaver/kernels.hpp"
#include "storyweaver/text.hpp"

namespace storyweaver {

/// Sentence-segmented topic page with BM25 statistics. Immutable once built.
class TopicIndex {
  public:
    /// Splits at '.', '!' or '?' followed by whitespace or end of text and
    /// keeps sentences with at least two tokens. Abbreviations such as "Mr."
    /// are split too. Throws EmptyTopic when nothing survives.
    static TopicIndex build(std::string title, std::string_view raw_text);

    const std::string& title() const noexcept { return title_; }
    const std::vector<std::string>& sentences() const noexcept { return sentences_; }
    const std::map<Token, std::size_t>& doc_freq() const noexcept { return doc_freq_; }
    const std::vector<std::size_t>& sentence_lengths() const noexcept { return lengths_; }
    double avg_length() const noexcept { return terms_.avg_length; }

    double idf(std::string_view token) const;

    /// BM25 score of every sentence against the query (query terms deduplicated).
    std::vector<double> score(std::string_view query) const;
    std::vector<double> score_serial(std::string_view query) const;

    static constexpr kernels::Bm25Params kBm25{1.2, 0.75};

  private:
    std::vector<kernels::WeightedTerm> weighted_query(std::string_view query) const;

    std::string title_;
    std::vector<std::string> sentences_;
    std::map<Token, std::size_t> doc_freq_;
    std::map<Token, std::uint32_t> term_ids_;
    std::vector<std::size_t> lengths_;
    kernels::TermMatrix terms_;
};

/// Best-scoring sentence as a TOPIC proposal with certainty s/(s+1), or
/// nullopt when no query token occurs in the page.
std::optional<Proposal> propose_topic(const TopicIndex& index, std::string_view query);

/// Topic subsystem: answers the latest turn from one indexed page.
class TopicResponder final : public ProposalSource {
  public:
    explicit TopicResponder(TopicIndex index) : index_(std::move(index)) {}
    Source source() const override { return Source::Topic; }
    std::optional<Proposal> propose(const DialogueState& state, std::uint64_t) const override;
    const TopicIndex& index() const noexcept { return index_; }

  private:
    TopicIndex index_;
};

struct FetchOptions {
    std::string base_url;  // request URL is base_url + url_encode(title)
    std::filesystem::path cache_dir;
    bool offline = true;
    int timeout_seconds = 10;
};

std::string url_encode(std::string_view text);

/// Cache-first page fetch. Cache file is <cache_dir>/<url_encode(title)>.txt,
/// written via temp file + rename so concurrent fetches never expose a partial file.
/// Throws OfflineMiss or FetchFailed.
std::string fetch_topic(std::string_view title, const FetchOptions& options);

/// fetch_topic, falling back to <bundled_dir>/<url_encode(title)>.txt when the
/// fetch fails or the cache misses offline.
std::string load_topic_text(std::string_view title, const FetchOptions& options,
                            const std::filesystem::path& bundled_dir);

}  // namespace storyweaver
