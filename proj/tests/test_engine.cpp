#include "doctest.h"

#include <regex>
#include <thread>

#include "fake_sources.hpp"
#include "storyweaver/config.hpp"
#include "storyweaver/engine.hpp"
#include "storyweaver/error.hpp"
#include "support.hpp"

using namespace storyweaver;
using testsupport::TempDir;

namespace {

// Bundled assets, no trained artifacts: untrained table and no context model.
EngineConfig bundled_config() {
    return EngineConfig::parse(R"({
        "selector": {"rules": "rules/default.rules"},
        "topic": {"title": "Dinosaur", "bundled_dir": "topics", "offline": true, "cache_dir": "no-cache"},
        "poetry": {"templates_path": "poetry/templates.txt", "rhymes_path": "poetry/pronouncing.dict",
                   "glossary_path": "poetry/glossary.tsv"}
    })",
                               STORYWEAVER_DATA_DIR);
}

std::shared_ptr<const Pipeline> bundled_pipeline() {
    static const auto p = Pipeline::from_config(bundled_config());
    return p;
}

std::shared_ptr<const Pipeline> echo_pipeline(std::vector<LexicalRule> rules) {
    Subsystems subs{std::make_shared<FakeSource>(Source::Context, [](const DialogueState& s, std::uint64_t) {
                        return Proposal(Source::Context, "you said " + std::string(last_text(s)), 0.5);
                    }),
                    std::make_shared<FakeSource>(Source::Poetry, [](const DialogueState& s, std::uint64_t) {
                        return Proposal(Source::Poetry, std::string(last_text(s)) + " in a hat", 0.9);
                    })};
    return std::make_shared<const Pipeline>(subs, std::move(rules), QTable{}, Hyperparams{},
                                            std::string(kDefaultFallback), 0);
}

EngineOptions logical(std::filesystem::path dir = {}) {
    EngineOptions o;
    o.transcript_dir = std::move(dir);
    o.id_seed = 1234;
    o.clock = logical_clock();
    return o;
}

}  // namespace

TEST_CASE("config parsing resolves paths and validates values") {
    const auto c = EngineConfig::parse(R"({"seed": 7, "selector": {"qtable": "q.json", "alpha": 0.5},
                                          "poetry": {"rhymes_path": "/abs/dict"}, "server": {"port": 9000},
                                          "session": {"id_seed": 3, "clock": "logical"}})",
                                       "/base/dir");
    CHECK(c.seed == 7);
    CHECK(c.selector.qtable == std::filesystem::path("/base/dir/q.json"));
    CHECK(c.selector.hp.alpha == 0.5);
    CHECK(c.poetry.rhymes_path == std::filesystem::path("/abs/dict"));
    CHECK(c.server.port == 9000);
    CHECK(c.server.bind == "127.0.0.1");
    CHECK(c.session.id_seed == 3u);
    CHECK(c.context_window == 4);
    CHECK(c.topic.offline);

    CHECK_THROWS_AS(EngineConfig::parse("{", "/"), ConfigError);
    CHECK_THROWS_AS(EngineConfig::parse("[]", "/"), ConfigError);
    CHECK_THROWS_AS(EngineConfig::parse(R"({"selector": {"gamma": 1.5}})", "/"), ConfigError);
    CHECK_THROWS_AS(EngineConfig::parse(R"({"context_window": 0})", "/"), ConfigError);
    CHECK_THROWS_AS(EngineConfig::parse(R"({"session": {"clock": "sundial"}})", "/"), ConfigError);
    CHECK_THROWS_AS(EngineConfig::parse(R"({"server": {"port": "eighty"}})", "/"), ConfigError);
    CHECK_THROWS_AS(EngineConfig::parse(R"({"selector": {"fallback": "  "}})", "/"), ConfigError);
    CHECK_THROWS_AS(EngineConfig::load("/nonexistent/config.json"), ConfigError);

    const auto bundled = EngineConfig::load(std::filesystem::path(STORYWEAVER_DATA_DIR) / "../config/default.json");
    CHECK(bundled.selector.rules.filename() == "default.rules");
    CHECK(std::filesystem::exists(bundled.selector.rules));
}

TEST_CASE("pipeline routing follows the bundled rules") {
    const auto p = bundled_pipeline();
    DialogueState joke;
    joke.push(Speaker::User, "Tell me a joke about Dinosaurs");
    CHECK(p->respond(joke).chosen.source == Source::Poetry);
    DialogueState legs;
    legs.push(Speaker::User, "Do all Dinosaurs have legs?");
    const auto sel = p->respond(legs);
    CHECK(sel.chosen.source == Source::Topic);
    CHECK(sel.chosen.text.find("legs") != std::string::npos);
}

TEST_CASE("a blocked fallback is a configuration error") {
    CHECK_THROWS_AS(Pipeline({}, {LexicalRule::block("story")}, QTable{}, Hyperparams{}, "Let's get back to our story!", 0),
                    ConfigError);
}

TEST_CASE("sessions") {
    Engine engine(bundled_pipeline(), logical());
    const auto a = engine.create_session();
    const auto b = engine.create_session();
    CHECK(a != b);
    CHECK(std::regex_match(a, std::regex("[0-9a-f]{32}")));
    CHECK(engine.transcript(a).empty());
    CHECK(engine.session_count() == 2);
    CHECK_THROWS_AS(engine.debug(a), NoTurnsYet);
    CHECK_THROWS_AS(engine.post_message("nope", "hi"), UnknownSession);
    CHECK_THROWS_AS(engine.post_message(a, "   "), EmptyMessage);
    CHECK_THROWS_AS(engine.transcript("nope"), UnknownSession);

    const auto r = engine.post_message(a, "Tell me a joke about Dinosaurs");
    CHECK(r.turn_index == 1);
    CHECK_FALSE(r.reply.empty());
    const auto dbg = engine.debug(a);
    int chosen = 0;
    for (const auto& c : dbg) {
        if (c.chosen) {
            ++chosen;
            CHECK(c.proposal.text == r.reply);
            CHECK(c.proposal.source == Source::Poetry);
        }
    }
    CHECK(chosen == 1);
    const auto t = engine.transcript(a);
    REQUIRE(t.size() == 2);
    CHECK(t[0].speaker() == Speaker::User);
    CHECK(t[0].text() == "Tell me a joke about Dinosaurs");
    CHECK(t[1].speaker() == Speaker::System);
    CHECK(engine.transcript(b).empty());
}

TEST_CASE("seeded ids are reproducible") {
    Engine x(bundled_pipeline(), logical());
    Engine y(bundled_pipeline(), logical());
    CHECK(x.create_session() == y.create_session());
}

TEST_CASE("a message whose echoes are all blocked gets the fallback") {
    Engine engine(echo_pipeline({LexicalRule::block("stupid")}), logical());
    const auto id = engine.create_session();
    CHECK(engine.post_message(id, "you are stupid").reply == kDefaultFallback);
    CHECK(engine.post_message(id, "you are nice").reply == "you are nice in a hat");
}

TEST_CASE("concurrent posts to one session are serialized") {
    Engine engine(echo_pipeline({}), logical());
    const auto id = engine.create_session();
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t)
        threads.emplace_back([&, t] {
            for (int i = 0; i < 25; ++i) engine.post_message(id, "thread " + std::to_string(t) + " msg " + std::to_string(i));
        });
    for (auto& th : threads) th.join();
    const auto turns = engine.transcript(id);
    REQUIRE(turns.size() == 400);
    for (std::size_t i = 0; i < turns.size(); ++i) {
        CHECK(turns[i].index() == i);
        CHECK(turns[i].speaker() == (i % 2 == 0 ? Speaker::User : Speaker::System));
        if (i % 2 == 1) CHECK(turns[i].text() == turns[i - 1].text() + " in a hat");
    }
}

TEST_CASE("transcript log and restart replay") {
    TempDir dir("engine");
    std::vector<std::string> ids;
    std::map<std::string, std::vector<Turn>> before;
    {
        Engine engine(bundled_pipeline(), logical(dir.path()));
        for (int s = 0; s < 3; ++s) {
            const auto id = engine.create_session();
            ids.push_back(id);
            for (const char* msg : {"hello", "Do all Dinosaurs have legs?", "tell me a joke"}) engine.post_message(id, msg);
            before[id] = engine.transcript(id);
        }
    }
    const auto log = testsupport::slurp(dir / (ids[0] + ".jsonl"));
    CHECK(std::count(log.begin(), log.end(), '\n') == 6);
    CHECK(log.rfind(R"({"index":0,"speaker":"user","text":"hello","ts":"1970-01-01T00:00:00Z"})", 0) == 0);

    Engine restarted(bundled_pipeline(), logical(dir.path()));
    CHECK(restarted.restore() == 3);
    for (const auto& id : ids) CHECK(restarted.transcript(id) == before[id]);
    const auto r = restarted.post_message(ids[1], "more please");
    CHECK(r.turn_index == 7);
}

TEST_CASE("clocks") {
    const auto c = logical_clock();
    CHECK(c() == "1970-01-01T00:00:00Z");
    CHECK(c() == "1970-01-01T00:00:01Z");
    CHECK(iso8601_utc(std::chrono::system_clock::time_point(std::chrono::seconds(86400 + 61))) == "1970-01-02T00:01:01Z");
}

TEST_CASE("subsystem failures never fail a request") {
    Subsystems subs{FakeSource::failing(Source::Topic), FakeSource::failing(Source::Context)};
    auto p = std::make_shared<const Pipeline>(subs, std::vector<LexicalRule>{}, QTable{}, Hyperparams{}, "safe words", 0);
    Engine engine(p, logical());
    const auto id = engine.create_session();
    CHECK(engine.post_message(id, "hello").reply == "safe words");
}
