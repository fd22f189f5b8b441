#include "storyweaver/selector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"

#include "storyweaver/error.hpp"
#include "storyweaver/random.hpp"

namespace storyweaver {
namespace {

int priority(Source s) {
    switch (s) {
    case Source::Poetry: return 0;
    case Source::Topic: return 1;
    case Source::Context: return 2;
    }
    return 3;
}

// a ranks ahead of b
bool ranks_ahead(const CandidateScore& a, const CandidateScore& b) {
    if (a.total != b.total) return a.total > b.total;
    if (priority(a.proposal.source) != priority(b.proposal.source))
        return priority(a.proposal.source) < priority(b.proposal.source);
    if (a.proposal.text.size() != b.proposal.text.size()) return a.proposal.text.size() < b.proposal.text.size();
    return a.proposal.text < b.proposal.text;
}

}  // namespace

// --- QTable -------------------------------------------------------------------

double QTable::get(Bucket state, Bucket action) const {
    const auto it = entries_.find({state, action});
    return it == entries_.end() ? 0.0 : it->second;
}

void QTable::set(Bucket state, Bucket action, double q) {
    const Bucket limit = Bucket{1} << meta_.bits;
    if (state >= limit || action >= limit) throw InvalidArgument("Q-table bucket out of range");
    entries_[{state, action}] = q;
}

std::string QTable::to_json() const {
    nlohmann::ordered_json meta;
    meta["seed"] = meta_.seed;
    meta["D"] = meta_.dim;
    meta["k"] = meta_.bits;
    meta["alpha"] = meta_.alpha;
    meta["gamma"] = meta_.gamma;
    meta["trained_turns"] = meta_.trained_turns;
    meta["train_seed"] = meta_.train_seed;
    auto entries = nlohmann::ordered_json::array();
    for (const auto& [key, q] : entries_) entries.push_back({key.first, key.second, q});
    nlohmann::ordered_json root;
    root["meta"] = std::move(meta);
    root["entries"] = std::move(entries);
    return root.dump() + "\n";
}

QTable QTable::from_json(std::string_view text) {
    const auto root = nlohmann::json::parse(text.begin(), text.end(), nullptr, false);
    if (root.is_discarded()) throw ConfigError("Q-table: malformed JSON");
    try {
        const auto& m = root.at("meta");
        Meta meta;
        meta.seed = m.at("seed").get<std::uint64_t>();
        meta.dim = m.at("D").get<std::size_t>();
        meta.bits = m.at("k").get<std::size_t>();
        meta.alpha = m.at("alpha").get<double>();
        meta.gamma = m.at("gamma").get<double>();
        meta.trained_turns = m.at("trained_turns").get<std::size_t>();
        meta.train_seed = m.value("train_seed", std::uint64_t{0});
        QTable table(meta);
        for (const auto& e : root.at("entries"))
            table.set(e.at(0).get<Bucket>(), e.at(1).get<Bucket>(), e.at(2).get<double>());
        return table;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("Q-table: ") + e.what());
    }
}

void QTable::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << to_json();
}

QTable QTable::load(const std::filesystem::path& path) { return from_json(read_text_file(path)); }

// --- Rules --------------------------------------------------------------------

LexicalRule LexicalRule::block(std::string_view words) {
    LexicalRule rule{Kind::Block, tokenize(words), std::nullopt, 0.0};
    if (rule.pattern.empty()) throw ConfigError("block rule has an empty pattern");
    return rule;
}

LexicalRule LexicalRule::boost(Source target, double weight, std::string_view words) {
    LexicalRule rule{Kind::Boost, tokenize(words), target, weight};
    if (rule.pattern.empty()) throw ConfigError("boost rule has an empty pattern");
    if (!(weight > 0.0)) throw ConfigError("boost weight must be > 0");
    return rule;
}

std::vector<LexicalRule> parse_rules(std::string_view text) {
    std::vector<LexicalRule> rules;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const auto line = trim(text.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        auto fail = [&](const std::string& why) {
            return ConfigError("rules line " + std::to_string(line_no) + ": " + why);
        };
        if (line.starts_with("block:")) {
            rules.push_back(LexicalRule::block(line.substr(6)));
        } else if (line.starts_with("boost:")) {
            const auto rest = trim(line.substr(6));
            const auto colon = rest.find(':');
            if (colon == std::string_view::npos) throw fail("boost rule needs '<TARGET> <weight>: words'");
            const auto head = tokenize(rest.substr(0, colon));
            if (head.size() != 2) throw fail("boost rule needs '<TARGET> <weight>: words'");
            double weight = 0.0;
            try {
                std::size_t used = 0;
                weight = std::stod(head[1], &used);
                if (used != head[1].size()) throw std::invalid_argument("trailing characters");
            } catch (const std::exception&) {
                throw fail("bad boost weight '" + head[1] + "'");
            }
            try {
                rules.push_back(LexicalRule::boost(parse_source(head[0]), weight, rest.substr(colon + 1)));
            } catch (const InvalidArgument& e) {
                throw fail(e.what());
            }
        } else {
            throw fail("expected 'block:' or 'boost:'");
        }
    }
    return rules;
}

std::vector<LexicalRule> load_rules(const std::filesystem::path& path) { return parse_rules(read_text_file(path)); }

bool contains_pattern(std::span<const Token> tokens, std::span<const Token> pattern) {
    if (pattern.empty()) return false;
    return std::search(tokens.begin(), tokens.end(), pattern.begin(), pattern.end()) != tokens.end();
}

bool is_blocked(std::string_view text, std::span<const LexicalRule> rules) {
    const auto tokens = tokenize(text);
    return std::any_of(rules.begin(), rules.end(), [&](const LexicalRule& r) {
        return r.kind == LexicalRule::Kind::Block && contains_pattern(tokens, r.pattern);
    });
}

// --- Hyperparameters ----------------------------------------------------------

void Hyperparams::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must be in (0,1]");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must be in [0,1)");
    if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0)) throw ConfigError("epsilon_start must be in [0,1]");
    if (!(epsilon_end >= 0.0 && epsilon_end <= 1.0)) throw ConfigError("epsilon_end must be in [0,1]");
    if (!(lambda_conf >= 0.0)) throw ConfigError("lambda_conf must be >= 0");
}

double Hyperparams::epsilon_at(std::size_t step, std::size_t total) const {
    if (total <= 1) return epsilon_start;
    const double frac = std::min(1.0, static_cast<double>(step) / static_cast<double>(total - 1));
    return epsilon_start + (epsilon_end - epsilon_start) * frac;
}

// --- Learning -----------------------------------------------------------------

double reward(std::string_view candidate_text, std::string_view next_utterance, std::size_t dim) {
    return cosine(encode_sentence(tokenize(candidate_text), dim), encode_sentence(tokenize(next_utterance), dim));
}

double q_update(QTable& table, Bucket state, Bucket action, double r, Bucket next_state,
                std::span<const Bucket> next_actions, const Hyperparams& hp) {
    double best_next = 0.0;
    if (!next_actions.empty()) {
        best_next = -std::numeric_limits<double>::infinity();
        for (const auto a : next_actions) best_next = std::max(best_next, table.get(next_state, a));
    }
    const double q = table.get(state, action);
    const double updated = q + hp.alpha * (r + hp.gamma * best_next - q);
    table.set(state, action, updated);
    return updated;
}

// --- Selection ----------------------------------------------------------------

std::vector<RuledProposal> apply_rules(std::span<const LexicalRule> rules, std::string_view user_input,
                                       std::span<const Proposal> proposals) {
    const auto input_tokens = tokenize(user_input);
    std::vector<RuledProposal> out;
    for (const auto& p : proposals) {
        if (is_blocked(p.text, rules)) continue;
        double boost = 0.0;
        for (const auto& r : rules) {
            if (r.kind == LexicalRule::Kind::Boost && r.target == p.source && contains_pattern(input_tokens, r.pattern))
                boost += r.weight;
        }
        out.push_back({p, boost});
    }
    return out;
}

std::size_t best_candidate(std::span<const CandidateScore> candidates) {
    if (candidates.empty()) throw InvalidArgument("best_candidate: no candidates");
    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i)
        if (ranks_ahead(candidates[i], candidates[best])) best = i;
    return best;
}

std::vector<CandidateScore> score_candidates(const DialogueState& state, std::span<const RuledProposal> ruled,
                                             const QTable& table, const Hyperparams& hp,
                                             const ProjectionMatrix& projection) {
    const Bucket s = project_bucket(encode_state(state, projection.dim()), projection);
    std::vector<CandidateScore> scored;
    for (const auto& rp : ruled) {
        const Bucket a = project_bucket(encode_sentence(tokenize(rp.proposal.text), projection.dim()), projection);
        CandidateScore c{rp.proposal, table.get(s, a), rp.boost, 0.0, false};
        c.total = c.q + c.boost + hp.lambda_conf * rp.proposal.certainty;
        scored.push_back(std::move(c));
    }
    return scored;
}

Selection select(const DialogueState& state, std::span<const Proposal> proposals, const QTable& table,
                 std::span<const LexicalRule> rules, const Hyperparams& hp, const ProjectionMatrix& projection,
                 std::string_view fallback) {
    const auto ruled = apply_rules(rules, last_text(state), proposals);
    auto scored = score_candidates(state, ruled, table, hp, projection);
    if (scored.empty()) {
        Proposal synthetic(Source::Poetry, std::string(fallback), 0.0);
        CandidateScore c{synthetic, 0.0, 0.0, 0.0, true};
        return Selection{synthetic, {c}, true};
    }
    const auto best = best_candidate(scored);
    scored[best].chosen = true;
    return Selection{scored[best].proposal, std::move(scored), false};
}

std::size_t epsilon_greedy(std::span<const CandidateScore> candidates, double epsilon, std::mt19937_64& rng) {
    if (candidates.empty()) throw InvalidArgument("epsilon_greedy: no candidates");
    if (uniform01(rng) < epsilon) return uniform_index(rng, candidates.size());
    return best_candidate(candidates);
}

ProposalBatch gather_proposals(const Subsystems& subsystems, const DialogueState& state, std::uint64_t seed) {
    ProposalBatch batch;
    for (const auto& sub : subsystems) {
        try {
            if (auto p = sub->propose(state, seed)) batch.proposals.push_back(std::move(*p));
        } catch (const std::exception&) {
            batch.failed.push_back(sub->source());
        }
    }
    return batch;
}

std::uint64_t turn_seed(std::uint64_t base, std::size_t turn_index) {
    return mix_seed(base ^ mix_seed(static_cast<std::uint64_t>(turn_index)));
}

// --- Training -----------------------------------------------------------------

namespace {

std::vector<RuledProposal> blocked_only(std::span<const LexicalRule> rules, std::span<const Proposal> proposals) {
    std::vector<RuledProposal> out;
    for (const auto& p : proposals)
        if (!is_blocked(p.text, rules)) out.push_back({p, 0.0});
    return out;
}

Bucket action_bucket(const Proposal& p, const ProjectionMatrix& projection) {
    return project_bucket(encode_sentence(tokenize(p.text), projection.dim()), projection);
}

Speaker corpus_speaker(std::size_t t) { return t % 2 == 0 ? Speaker::User : Speaker::System; }

}  // namespace

QTable train_selector(const Corpus& corpus, const Subsystems& subsystems, std::span<const LexicalRule> rules,
                      const Hyperparams& hp, const ProjectionMatrix& projection,
                      const SelectorTrainingOptions& options,
                      const std::function<void(const TrainingProgress&)>& on_progress) {
    hp.validate();
    if (corpus.dialogues.empty()) throw CorpusEmpty("corpus: no dialogues");
    const std::size_t total = corpus.eligible_turns();
    if (total == 0) throw CorpusEmpty("corpus: no dialogue has two or more utterances");

    QTable table(QTable::Meta{projection.seed(), projection.dim(), projection.bits(), hp.alpha, hp.gamma, 0,
                              options.seed});
    std::mt19937_64 rng(options.seed);
    std::map<Source, std::size_t> failures;
    std::size_t calls = 0;
    auto gather = [&](const DialogueState& state, std::size_t t) {
        auto batch = gather_proposals(subsystems, state, turn_seed(options.proposal_seed, t));
        ++calls;
        for (const auto s : batch.failed) ++failures[s];
        return batch.proposals;
    };

    std::size_t step = 0;
    double reward_sum = 0.0;
    double window_sum = 0.0;
    std::size_t window_n = 0;
    for (const auto& dialogue : corpus.dialogues) {
        if (dialogue.size() < 2) continue;
        DialogueState state(options.context_window);
        state.push(corpus_speaker(0), dialogue[0]);
        auto current = gather(state, 0);
        for (std::size_t t = 0; t + 1 < dialogue.size(); ++t) {
            const double epsilon = hp.epsilon_at(step, total);
            auto next_state = state.with_turn(corpus_speaker(t + 1), dialogue[t + 1]);
            // The last utterance has no successor, so its state is terminal.
            const bool terminal = t + 2 >= dialogue.size();
            std::vector<Proposal> next = terminal ? std::vector<Proposal>{} : gather(next_state, t + 1);

            const auto survivors = blocked_only(rules, current);
            if (!survivors.empty()) {
                const auto scored = score_candidates(state, survivors, table, hp, projection);
                const auto& picked = scored[epsilon_greedy(scored, epsilon, rng)].proposal;
                const double r = reward(picked.text, dialogue[t + 1], projection.dim());
                const Bucket s = project_bucket(encode_state(state, projection.dim()), projection);
                const Bucket s_next = project_bucket(encode_state(next_state, projection.dim()), projection);
                std::vector<Bucket> next_actions;
                for (const auto& rp : blocked_only(rules, next)) next_actions.push_back(action_bucket(rp.proposal, projection));
                q_update(table, s, action_bucket(picked, projection), r, s_next, next_actions, hp);
                ++table.meta().trained_turns;
                reward_sum += r;
                window_sum += r;
                ++window_n;
            }
            ++step;
            if (on_progress && options.report_every > 0 && step % options.report_every == 0) {
                on_progress({step, table.meta().trained_turns ? reward_sum / double(table.meta().trained_turns) : 0.0,
                             window_n ? window_sum / double(window_n) : 0.0});
                window_sum = 0.0;
                window_n = 0;
            }
            state = std::move(next_state);
            current = std::move(next);
        }
    }
    for (const auto& [source, n] : failures)
        if (n == calls) throw SubsystemUnavailable("subsystem " + std::string(to_string(source)) + " failed on every turn");
    return table;
}

std::size_t PolicyEvaluation::count(Source source) const {
    return static_cast<std::size_t>(std::count(choices.begin(), choices.end(), source));
}

PolicyEvaluation evaluate_policy(const Corpus& corpus, const QTable& table, const Subsystems& subsystems,
                                 std::span<const LexicalRule> rules, const Hyperparams& hp,
                                 const ProjectionMatrix& projection, std::size_t context_window,
                                 std::uint64_t proposal_seed) {
    if (corpus.eligible_turns() == 0) throw CorpusEmpty("corpus: no eligible turns");
    PolicyEvaluation eval;
    double sum = 0.0;
    for (const auto& dialogue : corpus.dialogues) {
        DialogueState state(context_window);
        for (std::size_t t = 0; t + 1 < dialogue.size(); ++t) {
            state.push(corpus_speaker(t), dialogue[t]);
            const auto batch = gather_proposals(subsystems, state, turn_seed(proposal_seed, t));
            const auto survivors = blocked_only(rules, batch.proposals);
            std::string chosen_text(kDefaultFallback);
            Source chosen_source = Source::Poetry;
            if (!survivors.empty()) {
                const auto scored = score_candidates(state, survivors, table, hp, projection);
                const auto& best = scored[best_candidate(scored)].proposal;
                chosen_text = best.text;
                chosen_source = best.source;
            }
            sum += reward(chosen_text, dialogue[t + 1], projection.dim());
            eval.choices.push_back(chosen_source);
            ++eval.turns;
        }
    }
    eval.mean_reward = sum / static_cast<double>(eval.turns);
    return eval;
}

}  // namespace storyweaver
