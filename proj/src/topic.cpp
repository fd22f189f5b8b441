#include "storyweaver/topic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "storyweaver/error.hpp"

namespace storyweaver {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c != '.' && c != '!' && c != '?') continue;
        if (i + 1 < text.size() && !is_space(text[i + 1])) continue;
        out.emplace_back(trim(text.substr(start, i + 1 - start)));
        start = i + 1;
    }
    if (start < text.size()) out.emplace_back(trim(text.substr(start)));
    return out;
}

}  // namespace

TopicIndex TopicIndex::build(std::string title, std::string_view raw_text) {
    if (trim(raw_text).empty()) throw EmptyTopic("topic '" + title + "' has no text");
    TopicIndex index;
    index.title_ = std::move(title);

    std::vector<std::vector<Token>> tokenized;
    for (auto& sentence : split_sentences(raw_text)) {
        auto tokens = tokenize(sentence);
        if (tokens.size() < 2) continue;
        index.sentences_.push_back(std::move(sentence));
        tokenized.push_back(std::move(tokens));
    }
    if (index.sentences_.empty())
        throw EmptyTopic("topic '" + index.title_ + "' has no sentence with two or more tokens");

    for (const auto& tokens : tokenized) {
        for (const auto& t : std::set<Token>(tokens.begin(), tokens.end())) ++index.doc_freq_[t];
    }
    std::uint32_t next_id = 0;
    for (const auto& [token, df] : index.doc_freq_) index.term_ids_[token] = next_id++;

    auto& terms = index.terms_;
    terms.row_offsets.push_back(0);
    double total = 0.0;
    for (const auto& tokens : tokenized) {
        std::map<std::uint32_t, std::uint32_t> counts;
        for (const auto& t : tokens) ++counts[index.term_ids_.at(t)];
        for (const auto& [id, n] : counts) {
            terms.term_ids.push_back(id);
            terms.counts.push_back(n);
        }
        terms.row_offsets.push_back(static_cast<std::uint32_t>(terms.term_ids.size()));
        terms.row_lengths.push_back(static_cast<double>(tokens.size()));
        index.lengths_.push_back(tokens.size());
        total += static_cast<double>(tokens.size());
    }
    terms.avg_length = total / static_cast<double>(tokenized.size());
    return index;
}

double TopicIndex::idf(std::string_view token) const {
    const auto it = doc_freq_.find(Token(token));
    const double df = it == doc_freq_.end() ? 0.0 : static_cast<double>(it->second);
    const double n = static_cast<double>(sentences_.size());
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

std::vector<kernels::WeightedTerm> TopicIndex::weighted_query(std::string_view query) const {
    std::vector<kernels::WeightedTerm> weighted;
    std::set<Token> seen;
    for (auto& token : tokenize(query)) {
        if (!seen.insert(token).second) continue;
        const auto it = term_ids_.find(token);
        if (it == term_ids_.end()) continue;
        weighted.push_back({it->second, idf(token)});
    }
    return weighted;
}

std::vector<double> TopicIndex::score(std::string_view query) const {
    std::vector<double> out(sentences_.size());
    kernels::parallel::bm25_scores(terms_, weighted_query(query), kBm25, out);
    return out;
}

std::vector<double> TopicIndex::score_serial(std::string_view query) const {
    std::vector<double> out(sentences_.size());
    kernels::serial::bm25_scores(terms_, weighted_query(query), kBm25, out);
    return out;
}

std::optional<Proposal> propose_topic(const TopicIndex& index, std::string_view query) {
    const auto scores = index.score(query);
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;
    const double s = scores[best];
    if (!(s > 0.0)) return std::nullopt;
    return Proposal(Source::Topic, index.sentences()[best], s / (s + 1.0));
}

std::optional<Proposal> TopicResponder::propose(const DialogueState& state, std::uint64_t) const {
    return propose_topic(index_, last_text(state));
}

}  // namespace storyweaver
