#include "storyweaver/engine.hpp"

#include <atomic>
#include <ctime>
#include <fstream>

#include "storyweaver/corpus.hpp"
#include "storyweaver/error.hpp"
#include "storyweaver/poetry.hpp"
#include "storyweaver/seq2seq.hpp"
#include "storyweaver/topic.hpp"

namespace storyweaver {
namespace fs = std::filesystem;

Pipeline::Pipeline(Subsystems subsystems, std::vector<LexicalRule> rules, QTable table, Hyperparams hp,
                   std::string fallback, std::uint64_t seed)
    : subsystems_(std::move(subsystems)),
      rules_(std::move(rules)),
      table_(std::move(table)),
      projection_(table_.meta().seed, table_.meta().bits, table_.meta().dim),
      hp_(hp),
      fallback_(std::move(fallback)),
      seed_(seed) {
    hp_.validate();
    if (is_blocked(fallback_, rules_)) throw ConfigError("fallback utterance matches a block rule");
}

Subsystems build_subsystems(const EngineConfig& config) {
    Subsystems subsystems;
    std::string topic_text;
    if (!config.topic.file.empty()) {
        topic_text = read_text_file(config.topic.file);
    } else {
        FetchOptions fetch{config.topic.base_url, config.topic.cache_dir, config.topic.offline, 10};
        topic_text = load_topic_text(config.topic.title, fetch, config.topic.bundled_dir);
    }
    subsystems.push_back(std::make_shared<TopicResponder>(TopicIndex::build(config.topic.title, topic_text)));

    if (!config.context.model.empty()) {
        auto [model, vocab] = load_model(config.context.model);
        subsystems.push_back(std::make_shared<ContextResponder>(std::move(model), std::move(vocab)));
    }
    subsystems.push_back(std::make_shared<PoetryResponder>(load_poetry_assets(
        config.poetry.templates_path, config.poetry.rhymes_path, config.poetry.glossary_path)));
    return subsystems;
}

std::vector<LexicalRule> load_configured_rules(const EngineConfig& config) {
    return config.selector.rules.empty() ? std::vector<LexicalRule>{} : load_rules(config.selector.rules);
}

QTable load_configured_qtable(const EngineConfig& config) {
    if (!config.selector.qtable.empty()) return QTable::load(config.selector.qtable);
    return QTable(QTable::Meta{config.encoding.seed, config.encoding.dim, config.encoding.bits,
                               config.selector.hp.alpha, config.selector.hp.gamma, 0, 0});
}

std::shared_ptr<const Pipeline> Pipeline::from_config(const EngineConfig& config) {
    return std::make_shared<const Pipeline>(build_subsystems(config), load_configured_rules(config),
                                            load_configured_qtable(config), config.selector.hp,
                                            config.selector.fallback, config.seed);
}

Selection Pipeline::respond(const DialogueState& state) const {
    const auto batch = gather_proposals(subsystems_, state, turn_seed(seed_, state.size() - 1));
    return select(state, batch.proposals, table_, rules_, hp_, projection_, fallback_);
}

// --- Clocks -------------------------------------------------------------------

std::string iso8601_utc(std::chrono::system_clock::time_point t) {
    const std::time_t secs = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::function<std::string()> logical_clock() {
    auto ticks = std::make_shared<std::atomic<std::int64_t>>(0);
    return [ticks] { return iso8601_utc(std::chrono::system_clock::time_point(std::chrono::seconds((*ticks)++))); };
}

EngineOptions EngineOptions::from_config(const EngineConfig& config) {
    EngineOptions o;
    o.context_window = config.context_window;
    o.transcript_dir = config.session.transcript_dir;
    o.id_seed = config.session.id_seed;
    if (config.session.clock == "logical") o.clock = logical_clock();
    return o;
}

// --- Engine -------------------------------------------------------------------

Engine::Engine(std::shared_ptr<const Pipeline> pipeline, EngineOptions options)
    : pipeline_(std::move(pipeline)), options_(std::move(options)) {
    if (!options_.clock) options_.clock = [] { return iso8601_utc(std::chrono::system_clock::now()); };
    id_rng_.seed(options_.id_seed ? *options_.id_seed : std::random_device{}() ^ (std::uint64_t{std::random_device{}()} << 32));
    if (!options_.transcript_dir.empty()) fs::create_directories(options_.transcript_dir);
}

std::string Engine::next_id() {
    static constexpr char kHex[] = "0123456789abcdef";
    std::lock_guard lock(id_mutex_);
    std::string id;
    for (int word = 0; word < 2; ++word) {
        std::uint64_t v = id_rng_();
        for (int i = 0; i < 16; ++i, v >>= 4) id.push_back(kHex[v & 0xf]);
    }
    return id;
}

std::string Engine::create_session() {
    std::unique_lock lock(sessions_mutex_);
    std::string id;
    do {
        id = next_id();
    } while (sessions_.contains(id));
    sessions_.emplace(id, std::make_shared<Session>(id, options_.context_window));
    return id;
}

std::shared_ptr<Engine::Session> Engine::find(const std::string& session_id) const {
    std::shared_lock lock(sessions_mutex_);
    const auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw UnknownSession("unknown session: " + session_id);
    return it->second;
}

bool Engine::has_session(const std::string& session_id) const {
    std::shared_lock lock(sessions_mutex_);
    return sessions_.contains(session_id);
}

std::size_t Engine::session_count() const {
    std::shared_lock lock(sessions_mutex_);
    return sessions_.size();
}

void Engine::log_turn(const Session& session, const Turn& turn) {
    if (options_.transcript_dir.empty()) return;
    const auto path = options_.transcript_dir / (session.id + ".jsonl");
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) throw IoError("cannot append to " + path.string());
    out << to_json_line({turn.index(), turn.speaker(), turn.text(), options_.clock()}) << '\n';
}

Reply Engine::post_message(const std::string& session_id, std::string_view text) {
    if (trim(text).empty()) throw EmptyMessage("message text is empty");
    const auto session = find(session_id);
    std::lock_guard lock(session->mutex);
    log_turn(*session, session->state.push(Speaker::User, std::string(text)));
    auto selection = pipeline_->respond(session->state);
    const auto& reply_turn = session->state.push(Speaker::System, selection.chosen.text);
    log_turn(*session, reply_turn);
    session->last_debug = std::move(selection.candidates);
    return {reply_turn.text(), reply_turn.index()};
}

std::vector<Turn> Engine::transcript(const std::string& session_id) const {
    const auto session = find(session_id);
    std::lock_guard lock(session->mutex);
    return session->state.turns();
}

std::vector<CandidateScore> Engine::debug(const std::string& session_id) const {
    const auto session = find(session_id);
    std::lock_guard lock(session->mutex);
    if (!session->last_debug) throw NoTurnsYet("session has no system turn yet");
    return *session->last_debug;
}

std::size_t Engine::restore() {
    if (options_.transcript_dir.empty() || !fs::exists(options_.transcript_dir)) return 0;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(options_.transcript_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    std::size_t loaded = 0;
    std::unique_lock lock(sessions_mutex_);
    for (const auto& file : files) {
        const auto id = file.stem().string();
        if (sessions_.contains(id)) continue;
        std::vector<TranscriptRecord> records;
        std::ifstream in(file);
        for (std::string line; std::getline(in, line);)
            if (!trim(line).empty()) records.push_back(parse_transcript_line(line));
        auto session = std::make_shared<Session>(id, options_.context_window);
        session->state = replay(records, options_.context_window);
        sessions_.emplace(id, std::move(session));
        ++loaded;
    }
    return loaded;
}

}  // namespace storyweaver
