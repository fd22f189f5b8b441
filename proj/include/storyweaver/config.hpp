#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "storyweaver/dialogue.hpp"
#include "storyweaver/selector.hpp"
#include "storyweaver/text.hpp"

namespace storyweaver {

/// Engine configuration loaded from JSON. Relative paths resolve against the
/// directory holding the config file.
struct EngineConfig {
    std::uint64_t seed = 0;  // base for per-turn subsystem seeds
    std::size_t context_window = kDefaultContextWindow;

    struct Encoding {
        std::size_t dim = kDefaultDim;
        std::size_t bits = kDefaultBits;
        std::uint64_t seed = 20240229;
    } encoding;  // used only when no Q-table file is configured

    struct Selector {
        std::filesystem::path qtable;  // empty: untrained table
        std::filesystem::path rules;
        std::string fallback = std::string(kDefaultFallback);
        Hyperparams hp;
    } selector;

    struct Context {
        std::filesystem::path model;  // empty: context subsystem disabled
    } context;

    struct Topic {
        std::string title = "Dinosaur";
        std::filesystem::path file;  // read directly when set, skipping fetch and cache
        std::string base_url;
        bool offline = true;
        std::filesystem::path cache_dir;
        std::filesystem::path bundled_dir;
    } topic;

    struct Poetry {
        std::filesystem::path templates_path;
        std::filesystem::path rhymes_path;
        std::filesystem::path glossary_path;
    } poetry;

    struct Server {
        std::string bind = "127.0.0.1";
        unsigned short port = 8080;
    } server;

    struct Session {
        std::filesystem::path transcript_dir;  // empty: no transcript log
        std::optional<std::uint64_t> id_seed;  // set for reproducible session ids
        std::string clock = "system";          // "system" or "logical"
    } session;

    static EngineConfig parse(std::string_view json_text, const std::filesystem::path& base_dir);
    static EngineConfig load(const std::filesystem::path& path);
};

/// Environment variable consulted when no --config flag is given.
inline constexpr const char* kConfigEnvVar = "STORYWEAVER_CONFIG";

}  // namespace storyweaver
