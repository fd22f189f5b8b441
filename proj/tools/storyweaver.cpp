// storyweaver: train, evaluate, chat with and serve the story engine.

#include <pthread.h>
#include <signal.h>

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "storyweaver/config.hpp"
#include "storyweaver/corpus.hpp"
#include "storyweaver/engine.hpp"
#include "storyweaver/error.hpp"
#include "storyweaver/selector.hpp"
#include "storyweaver/seq2seq.hpp"
#include "storyweaver/server.hpp"

namespace fs = std::filesystem;
using namespace storyweaver;

namespace {

struct AssetFlags {
    std::string config;
    std::string topic_file;
    std::string topic_title;
    std::string rules;
    std::string context_model;
    std::string templates;
    std::string rhymes;
    std::string glossary;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--config", config, "Engine config JSON (default: $STORYWEAVER_CONFIG)");
        cmd.add_option("--topic", topic_file, "Topic page text file");
        cmd.add_option("--topic-title", topic_title, "Topic title");
        cmd.add_option("--rules", rules, "Lexical rules file");
        cmd.add_option("--context-model", context_model, "Seq2seq model file");
        cmd.add_option("--templates", templates, "Poetry template file");
        cmd.add_option("--rhymes", rhymes, "Pronouncing dictionary");
        cmd.add_option("--glossary", glossary, "Glossary file");
    }

    EngineConfig resolve() const {
        EngineConfig c = load_config(config, /*required=*/false);
        if (!topic_file.empty()) c.topic.file = topic_file;
        if (!topic_title.empty()) c.topic.title = topic_title;
        if (!rules.empty()) c.selector.rules = rules;
        if (!context_model.empty()) c.context.model = context_model;
        if (!templates.empty()) c.poetry.templates_path = templates;
        if (!rhymes.empty()) c.poetry.rhymes_path = rhymes;
        if (!glossary.empty()) c.poetry.glossary_path = glossary;
        return c;
    }

    static EngineConfig load_config(const std::string& flag, bool required) {
        std::string path = flag;
        if (path.empty())
            if (const char* env = std::getenv(kConfigEnvVar)) path = env;
        if (path.empty()) {
            if (required) throw ConfigError("no config: pass --config or set STORYWEAVER_CONFIG");
            return EngineConfig{};
        }
        return EngineConfig::load(path);
    }
};

struct HyperFlags {
    std::optional<double> alpha, gamma, epsilon_start, epsilon_end, lambda_conf;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--alpha", alpha, "Q-learning rate");
        cmd.add_option("--gamma", gamma, "Discount factor");
        cmd.add_option("--epsilon-start", epsilon_start, "Initial exploration rate");
        cmd.add_option("--epsilon-end", epsilon_end, "Final exploration rate");
        cmd.add_option("--lambda-conf", lambda_conf, "Weight of subsystem certainty in scoring");
    }

    void apply(Hyperparams& hp) const {
        if (alpha) hp.alpha = *alpha;
        if (gamma) hp.gamma = *gamma;
        if (epsilon_start) hp.epsilon_start = *epsilon_start;
        if (epsilon_end) hp.epsilon_end = *epsilon_end;
        if (lambda_conf) hp.lambda_conf = *lambda_conf;
        hp.validate();
    }
};

Corpus require_corpus(const std::string& path) {
    auto corpus = read_corpus(path);
    if (corpus.dialogues.empty()) throw CorpusEmpty("corpus: no dialogues");
    return corpus;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"storyweaver: interactive story dialogue engine"};
    app.require_subcommand(1);

    // train-context
    auto* train_context = app.add_subcommand("train-context", "Train the seq2seq context responder");
    std::string tc_corpus, tc_out;
    ContextTrainingOptions tc_opts;
    train_context->add_option("--corpus", tc_corpus, "Dialogue corpus")->required();
    train_context->add_option("--out", tc_out, "Model output file")->required();
    train_context->add_option("--epochs", tc_opts.epochs, "Training epochs")->capture_default_str();
    train_context->add_option("--lr", tc_opts.lr, "SGD learning rate")->capture_default_str();
    train_context->add_option("--seed", tc_opts.seed, "Initialization and shuffling seed")->capture_default_str();
    train_context->add_option("--vocab-size", tc_opts.vocab_size, "Maximum vocabulary size")->capture_default_str();
    train_context->add_option("--embed", tc_opts.embed, "Embedding width")->capture_default_str();
    train_context->add_option("--hidden", tc_opts.hidden, "GRU hidden width")->capture_default_str();

    // train-selector
    auto* train_sel = app.add_subcommand("train-selector", "Train the selector Q-table on a corpus");
    std::string ts_corpus, ts_out;
    std::uint64_t ts_seed = 1;
    std::optional<std::uint64_t> ts_proj_seed;
    std::optional<std::size_t> ts_dim, ts_bits;
    AssetFlags ts_assets;
    HyperFlags ts_hyper;
    train_sel->add_option("--corpus", ts_corpus, "Dialogue corpus")->required();
    train_sel->add_option("--out", ts_out, "Q-table output file")->required();
    train_sel->add_option("--seed", ts_seed, "Exploration seed")->capture_default_str();
    train_sel->add_option("--projection-seed", ts_proj_seed, "Bucketing projection seed");
    train_sel->add_option("--dim", ts_dim, "Sentence vector dimension");
    train_sel->add_option("--bits", ts_bits, "Projection bits per bucket");
    ts_assets.add_to(*train_sel);
    ts_hyper.add_to(*train_sel);

    // eval
    auto* eval = app.add_subcommand("eval", "Greedy mean reward of a Q-table on a corpus");
    std::string ev_corpus, ev_qtable;
    AssetFlags ev_assets;
    eval->add_option("--corpus", ev_corpus, "Dialogue corpus")->required();
    eval->add_option("--qtable", ev_qtable, "Q-table file (default: from config)");
    ev_assets.add_to(*eval);

    // chat
    auto* chat = app.add_subcommand("chat", "Line-oriented chat on stdin/stdout");
    std::string chat_config;
    chat->add_option("--config", chat_config, "Engine config JSON (default: $STORYWEAVER_CONFIG)");

    // serve
    auto* serve = app.add_subcommand("serve", "Run the HTTP/WebSocket chat service");
    std::string serve_config;
    std::optional<unsigned short> serve_port;
    serve->add_option("--config", serve_config, "Engine config JSON (default: $STORYWEAVER_CONFIG)");
    serve->add_option("--port", serve_port, "Override server.port (0 = ephemeral)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train_context) {
            const auto corpus = require_corpus(tc_corpus);
            std::cout << std::fixed << std::setprecision(6);
            auto trained = train_context_model(corpus, tc_opts, [](std::size_t epoch, double loss) {
                std::cout << "epoch " << epoch << " loss " << loss << '\n';
            });
            save_model(tc_out, trained.model, trained.vocab);
            return 0;
        }

        if (*train_sel) {
            const auto corpus = require_corpus(ts_corpus);
            auto config = ts_assets.resolve();
            ts_hyper.apply(config.selector.hp);
            const ProjectionMatrix projection(ts_proj_seed.value_or(config.encoding.seed),
                                              ts_bits.value_or(config.encoding.bits), ts_dim.value_or(config.encoding.dim));
            SelectorTrainingOptions opts;
            opts.seed = ts_seed;
            opts.context_window = config.context_window;
            opts.proposal_seed = config.seed;
            std::cout << std::fixed << std::setprecision(6);
            const auto table = train_selector(corpus, build_subsystems(config), load_configured_rules(config),
                                              config.selector.hp, projection, opts, [&](const TrainingProgress& p) {
                                                  std::cout << "turn " << p.turn << " mean_reward " << p.running_mean
                                                            << " window_mean " << p.window_mean << '\n';
                                              });
            table.save(ts_out);
            std::cout << "trained_turns " << table.meta().trained_turns << " entries " << table.size() << '\n';
            return 0;
        }

        if (*eval) {
            const auto corpus = require_corpus(ev_corpus);
            auto config = ev_assets.resolve();
            if (!ev_qtable.empty()) config.selector.qtable = ev_qtable;
            const auto table = load_configured_qtable(config);
            const ProjectionMatrix projection(table.meta().seed, table.meta().bits, table.meta().dim);
            const auto result = evaluate_policy(corpus, table, build_subsystems(config), load_configured_rules(config),
                                                config.selector.hp, projection, config.context_window, config.seed);
            std::cout << std::fixed << std::setprecision(6) << "mean_reward " << result.mean_reward << '\n';
            return 0;
        }

        if (*chat) {
            const auto config = AssetFlags::load_config(chat_config, /*required=*/true);
            Engine engine(Pipeline::from_config(config), EngineOptions::from_config(config));
            const auto session = engine.create_session();
            std::string line;
            for (;;) {
                std::cout << "you> " << std::flush;
                if (!std::getline(std::cin, line)) break;
                if (trim(line).empty()) continue;
                std::cout << "story> " << engine.post_message(session, line).reply << '\n';
            }
            std::cout << '\n';
            return 0;
        }

        if (*serve) {
            auto config = AssetFlags::load_config(serve_config, /*required=*/true);
            if (serve_port) config.server.port = *serve_port;
            auto engine = std::make_shared<Engine>(Pipeline::from_config(config), EngineOptions::from_config(config));
            const auto restored = engine->restore();
            // Block termination signals before any thread starts, then wait for one here.
            sigset_t signals;
            sigemptyset(&signals);
            sigaddset(&signals, SIGINT);
            sigaddset(&signals, SIGTERM);
            pthread_sigmask(SIG_BLOCK, &signals, nullptr);
            ChatServer server(engine, config.server.bind, config.server.port);
            server.start();
            std::cout << "restored " << restored << " sessions\n"
                      << "listening on http://" << config.server.bind << ':' << server.port() << std::endl;
            int received = 0;
            sigwait(&signals, &received);
            server.stop();
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return 1;
    }
    return 0;
}
