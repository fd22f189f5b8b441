#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <vector>

#include "storyweaver/config.hpp"
#include "storyweaver/dialogue.hpp"
#include "storyweaver/selector.hpp"
#include "storyweaver/text.hpp"

namespace storyweaver {

/// Topic, context (when a model is configured) and poetry subsystems, in that order.
Subsystems build_subsystems(const EngineConfig& config);

std::vector<LexicalRule> load_configured_rules(const EngineConfig& config);

/// Configured Q-table, or an empty one carrying the configured encoding.
QTable load_configured_qtable(const EngineConfig& config);

/// Read-only reply machinery shared by every session: subsystems, rules,
/// Q-table and selector settings.
class Pipeline {
  public:
    Pipeline(Subsystems subsystems, std::vector<LexicalRule> rules, QTable table, Hyperparams hp,
             std::string fallback, std::uint64_t seed);

    /// Loads every asset named by the config. A missing context model disables
    /// that subsystem; the topic page falls back to the bundled copy.
    static std::shared_ptr<const Pipeline> from_config(const EngineConfig& config);

    /// `state` must end with the user's turn.
    Selection respond(const DialogueState& state) const;

    const Subsystems& subsystems() const noexcept { return subsystems_; }
    const std::vector<LexicalRule>& rules() const noexcept { return rules_; }
    const QTable& table() const noexcept { return table_; }
    const ProjectionMatrix& projection() const noexcept { return projection_; }
    const Hyperparams& hyperparams() const noexcept { return hp_; }

  private:
    Subsystems subsystems_;
    std::vector<LexicalRule> rules_;
    QTable table_;
    ProjectionMatrix projection_;
    Hyperparams hp_;
    std::string fallback_;
    std::uint64_t seed_;
};

struct Reply {
    std::string reply;
    std::size_t turn_index;
};

struct EngineOptions {
    std::size_t context_window = kDefaultContextWindow;
    std::filesystem::path transcript_dir;  // empty: no log
    std::optional<std::uint64_t> id_seed;
    /// ISO-8601 timestamp source; defaults to the UTC wall clock.
    std::function<std::string()> clock;

    static EngineOptions from_config(const EngineConfig& config);
};

std::string iso8601_utc(std::chrono::system_clock::time_point t);

/// Deterministic clock ticking one second per call from the Unix epoch.
std::function<std::string()> logical_clock();

/// In-memory sessions with an append-only per-session transcript log
/// (<transcript_dir>/<session_id>.jsonl). Messages within one session are
/// serialized; different sessions run concurrently.
class Engine {
  public:
    Engine(std::shared_ptr<const Pipeline> pipeline, EngineOptions options);

    std::string create_session();
    Reply post_message(const std::string& session_id, std::string_view text);
    std::vector<Turn> transcript(const std::string& session_id) const;
    std::vector<CandidateScore> debug(const std::string& session_id) const;
    bool has_session(const std::string& session_id) const;
    std::size_t session_count() const;

    /// Rebuilds sessions from the transcript directory; returns how many were loaded.
    std::size_t restore();

  private:
    struct Session {
        mutable std::mutex mutex;
        std::string id;
        DialogueState state;
        std::chrono::system_clock::time_point created_at;
        std::optional<std::vector<CandidateScore>> last_debug;

        Session(std::string id_, std::size_t window)
            : id(std::move(id_)), state(window), created_at(std::chrono::system_clock::now()) {}
    };

    std::shared_ptr<Session> find(const std::string& session_id) const;
    std::string next_id();
    void log_turn(const Session& session, const Turn& turn);

    std::shared_ptr<const Pipeline> pipeline_;
    EngineOptions options_;
    mutable std::shared_mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::mutex id_mutex_;
    std::mt19937_64 id_rng_;
};

}  // namespace storyweaver
