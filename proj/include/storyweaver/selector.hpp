#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "storyweaver/corpus.hpp"
#include "storyweaver/dialogue.hpp"
#include "storyweaver/text.hpp"

namespace storyweaver {

/// Sparse (state bucket, action bucket) -> Q. Missing entries read as 0.
class QTable {
  public:
    struct Meta {
        std::uint64_t seed = 0;  // projection seed; rebuilds the bucketing
        std::size_t dim = kDefaultDim;
        std::size_t bits = kDefaultBits;
        double alpha = 0.1;
        double gamma = 0.9;
        std::size_t trained_turns = 0;
        std::uint64_t train_seed = 0;

        friend bool operator==(const Meta&, const Meta&) = default;
    };

    QTable() = default;
    explicit QTable(Meta meta) : meta_(meta) {}

    double get(Bucket state, Bucket action) const;
    void set(Bucket state, Bucket action, double q);
    std::size_t size() const noexcept { return entries_.size(); }
    const std::map<std::pair<Bucket, Bucket>, double>& entries() const noexcept { return entries_; }
    const Meta& meta() const noexcept { return meta_; }
    Meta& meta() noexcept { return meta_; }

    /// {"meta": {...}, "entries": [[s, a, q], ...]} sorted by (s, a).
    std::string to_json() const;
    static QTable from_json(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static QTable load(const std::filesystem::path& path);

    friend bool operator==(const QTable&, const QTable&) = default;

  private:
    Meta meta_;
    std::map<std::pair<Bucket, Bucket>, double> entries_;
};

struct LexicalRule {
    enum class Kind { Block, Boost };

    Kind kind;
    std::vector<Token> pattern;
    std::optional<Source> target;  // Boost only
    double weight = 0.0;           // Boost only

    static LexicalRule block(std::string_view words);
    static LexicalRule boost(Source target, double weight, std::string_view words);
};

/// "block: w1 w2 ..." or "boost: <TOPIC|CONTEXT|POETRY> <weight>: w1 w2 ..."; '#' comments.
std::vector<LexicalRule> parse_rules(std::string_view text);
std::vector<LexicalRule> load_rules(const std::filesystem::path& path);

/// Contiguous-subsequence match.
bool contains_pattern(std::span<const Token> tokens, std::span<const Token> pattern);

/// True if any BLOCK rule matches the text's tokens.
bool is_blocked(std::string_view text, std::span<const LexicalRule> rules);

struct Hyperparams {
    double alpha = 0.1;
    double gamma = 0.9;
    double epsilon_start = 0.2;
    double epsilon_end = 0.01;
    double lambda_conf = 0.3;

    /// Throws ConfigError when a value is out of range.
    void validate() const;
    /// Linear decay from epsilon_start (step 0) to epsilon_end (step total-1).
    double epsilon_at(std::size_t step, std::size_t total) const;
};

/// Cosine similarity of the hashed sentence encodings.
double reward(std::string_view candidate_text, std::string_view next_utterance, std::size_t dim = kDefaultDim);

/// q += alpha * (r + gamma * max_a' Q(s', a') - q); max over no candidates is 0.
double q_update(QTable& table, Bucket state, Bucket action, double r, Bucket next_state,
                std::span<const Bucket> next_actions, const Hyperparams& hp);

struct RuledProposal {
    Proposal proposal;
    double boost = 0.0;
};

/// Drops proposals matching a BLOCK rule; adds BOOST weights whose pattern
/// occurs in the user input to proposals from the rule's target.
std::vector<RuledProposal> apply_rules(std::span<const LexicalRule> rules, std::string_view user_input,
                                       std::span<const Proposal> proposals);

struct CandidateScore {
    Proposal proposal;
    double q = 0.0;
    double boost = 0.0;
    double total = 0.0;
    bool chosen = false;
};

/// Index of the best candidate: highest total, then POETRY > TOPIC > CONTEXT,
/// then shorter text, then lexicographic. Requires a non-empty list.
std::size_t best_candidate(std::span<const CandidateScore> candidates);

struct Selection {
    Proposal chosen;
    std::vector<CandidateScore> candidates;  // exactly one has chosen == true
    bool fallback = false;
};

inline constexpr std::string_view kDefaultFallback = "Let's get back to our story!";

/// Scores each proposal surviving the rules as Q + boost + lambda_conf * certainty.
std::vector<CandidateScore> score_candidates(const DialogueState& state, std::span<const RuledProposal> ruled,
                                             const QTable& table, const Hyperparams& hp,
                                             const ProjectionMatrix& projection);

Selection select(const DialogueState& state, std::span<const Proposal> proposals, const QTable& table,
                 std::span<const LexicalRule> rules, const Hyperparams& hp, const ProjectionMatrix& projection,
                 std::string_view fallback = kDefaultFallback);

/// Uniform pick with probability epsilon, otherwise best_candidate.
std::size_t epsilon_greedy(std::span<const CandidateScore> candidates, double epsilon, std::mt19937_64& rng);

using Subsystems = std::vector<std::shared_ptr<const ProposalSource>>;

struct ProposalBatch {
    std::vector<Proposal> proposals;
    std::vector<Source> failed;
};

/// Asks every subsystem; exceptions are recorded, never propagated.
ProposalBatch gather_proposals(const Subsystems& subsystems, const DialogueState& state, std::uint64_t turn_seed);

struct TrainingProgress {
    std::size_t turn = 0;
    double running_mean = 0.0;  // over all turns so far
    double window_mean = 0.0;   // over the last report interval
};

struct SelectorTrainingOptions {
    std::uint64_t seed = 1;
    std::size_t context_window = kDefaultContextWindow;
    std::size_t report_every = 100;
    std::uint64_t proposal_seed = 0;  // base for per-turn subsystem seeds
};

/// Offline Q-learning over a corpus with teacher-forced transitions.
/// Throws CorpusEmpty or SubsystemUnavailable.
QTable train_selector(const Corpus& corpus, const Subsystems& subsystems, std::span<const LexicalRule> rules,
                      const Hyperparams& hp, const ProjectionMatrix& projection,
                      const SelectorTrainingOptions& options,
                      const std::function<void(const TrainingProgress&)>& on_progress = {});

struct PolicyEvaluation {
    double mean_reward = 0.0;
    std::size_t turns = 0;
    std::vector<Source> choices;  // one per evaluated turn, in corpus order
    std::size_t count(Source source) const;
};

/// Greedy (epsilon = 0) replay of every eligible corpus turn.
PolicyEvaluation evaluate_policy(const Corpus& corpus, const QTable& table, const Subsystems& subsystems,
                                 std::span<const LexicalRule> rules, const Hyperparams& hp,
                                 const ProjectionMatrix& projection,
                                 std::size_t context_window = kDefaultContextWindow,
                                 std::uint64_t proposal_seed = 0);

/// Turn seed used by training, evaluation and the live engine alike.
std::uint64_t turn_seed(std::uint64_t base, std::size_t turn_index);

}  // namespace storyweaver
