#include "storyweaver/config.hpp"

#include "json.hpp"

#include "storyweaver/corpus.hpp"
#include "storyweaver/error.hpp"

namespace storyweaver {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

template <typename T>
void read(const json& obj, const char* key, T& out) {
    if (!obj.contains(key) || obj.at(key).is_null()) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

void read_path(const json& obj, const char* key, const fs::path& base, fs::path& out) {
    std::string raw;
    read(obj, key, raw);
    if (raw.empty()) return;
    const fs::path p(raw);
    out = p.is_absolute() ? p : (base / p).lexically_normal();
}

const json& section(const json& root, const char* key) {
    static const json empty = json::object();
    if (!root.contains(key)) return empty;
    if (!root.at(key).is_object()) throw ConfigError(std::string("config section '") + key + "' must be an object");
    return root.at(key);
}

}  // namespace

EngineConfig EngineConfig::parse(std::string_view json_text, const fs::path& base) {
    const auto root = json::parse(json_text.begin(), json_text.end(), nullptr, false);
    if (root.is_discarded() || !root.is_object()) throw ConfigError("config: malformed JSON");
    EngineConfig c;
    read(root, "seed", c.seed);
    read(root, "context_window", c.context_window);
    if (c.context_window == 0) throw ConfigError("context_window must be >= 1");

    const auto& enc = section(root, "encoding");
    read(enc, "dim", c.encoding.dim);
    read(enc, "bits", c.encoding.bits);
    read(enc, "seed", c.encoding.seed);

    const auto& sel = section(root, "selector");
    read_path(sel, "qtable", base, c.selector.qtable);
    read_path(sel, "rules", base, c.selector.rules);
    read(sel, "fallback", c.selector.fallback);
    read(sel, "alpha", c.selector.hp.alpha);
    read(sel, "gamma", c.selector.hp.gamma);
    read(sel, "epsilon_start", c.selector.hp.epsilon_start);
    read(sel, "epsilon_end", c.selector.hp.epsilon_end);
    read(sel, "lambda_conf", c.selector.hp.lambda_conf);
    c.selector.hp.validate();
    if (trim(c.selector.fallback).empty()) throw ConfigError("selector.fallback must be non-empty");

    read_path(section(root, "context"), "model", base, c.context.model);

    const auto& topic = section(root, "topic");
    read(topic, "title", c.topic.title);
    read(topic, "base_url", c.topic.base_url);
    read(topic, "offline", c.topic.offline);
    read_path(topic, "file", base, c.topic.file);
    read_path(topic, "cache_dir", base, c.topic.cache_dir);
    read_path(topic, "bundled_dir", base, c.topic.bundled_dir);

    const auto& poetry = section(root, "poetry");
    read_path(poetry, "templates_path", base, c.poetry.templates_path);
    read_path(poetry, "rhymes_path", base, c.poetry.rhymes_path);
    read_path(poetry, "glossary_path", base, c.poetry.glossary_path);

    const auto& server = section(root, "server");
    read(server, "bind", c.server.bind);
    read(server, "port", c.server.port);

    const auto& session = section(root, "session");
    read_path(session, "transcript_dir", base, c.session.transcript_dir);
    if (session.contains("id_seed") && !session.at("id_seed").is_null()) {
        std::uint64_t s = 0;
        read(session, "id_seed", s);
        c.session.id_seed = s;
    }
    read(session, "clock", c.session.clock);
    if (c.session.clock != "system" && c.session.clock != "logical")
        throw ConfigError("session.clock must be 'system' or 'logical'");
    return c;
}

EngineConfig EngineConfig::load(const fs::path& path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    return parse(text, fs::absolute(path).parent_path());
}

}  // namespace storyweaver
