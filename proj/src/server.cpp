#include "storyweaver/server.hpp"

#include <sys/socket.h>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <condition_variable>
#include <set>
#include <string_view>
#include <variant>

#include "json.hpp"

#include "storyweaver/error.hpp"

namespace storyweaver {
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace asio = boost::asio;
using tcp = asio::ip::tcp;

using nlohmann::ordered_json;

namespace {

std::string_view to_std(beast::string_view v) { return {v.data(), v.size()}; }

HttpResponse json_response(int status, const ordered_json& body) {
    return {status, "application/json", body.dump()};
}

HttpResponse error_response(int status, std::string_view message) {
    return json_response(status, ordered_json{{"error", message}});
}

// "/api/sessions/{id}/{action}" -> (id, action); action empty for "/api/sessions/{id}"
std::optional<std::pair<std::string, std::string>> session_route(std::string_view target) {
    constexpr std::string_view prefix = "/api/sessions/";
    if (!target.starts_with(prefix)) return std::nullopt;
    auto rest = target.substr(prefix.size());
    const auto slash = rest.find('/');
    if (slash == std::string_view::npos) return std::pair{std::string(rest), std::string()};
    return std::pair{std::string(rest.substr(0, slash)), std::string(rest.substr(slash + 1))};
}

std::string_view strip_query(std::string_view target) {
    const auto q = target.find('?');
    return q == std::string_view::npos ? target : target.substr(0, q);
}

// Parses {"text": "..."}; returns the text or an error message.
std::variant<std::string, std::string> message_text(std::string_view body) {
    const auto j = nlohmann::json::parse(body.begin(), body.end(), nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::variant<std::string, std::string>(std::in_place_index<1>, "body must be a JSON object");
    if (!j.contains("text") || !j.at("text").is_string())
        return std::variant<std::string, std::string>(std::in_place_index<1>, "body needs a string field 'text'");
    return std::variant<std::string, std::string>(std::in_place_index<0>, j.at("text").get<std::string>());
}

ordered_json candidate_json(const CandidateScore& c) {
    return ordered_json{{"source", to_string(c.proposal.source)},
                        {"text", c.proposal.text},
                        {"certainty", c.proposal.certainty},
                        {"q", c.q},
                        {"boost", c.boost},
                        {"total", c.total},
                        {"chosen", c.chosen}};
}

}  // namespace

std::optional<std::string> stream_session(std::string_view target) {
    const auto route = session_route(strip_query(target));
    if (!route || route->second != "stream" || route->first.empty()) return std::nullopt;
    return route->first;
}

HttpResponse handle_http(Engine& engine, std::string_view method, std::string_view raw_target, std::string_view body) {
    const auto target = strip_query(raw_target);
    try {
        if (target == "/healthz") {
            if (method != "GET") return error_response(405, "method not allowed");
            return {200, "text/plain", "ok"};
        }
        if (target == "/api/sessions") {
            if (method != "POST") return error_response(405, "method not allowed");
            return json_response(201, ordered_json{{"session_id", engine.create_session()}});
        }
        const auto route = session_route(target);
        if (!route || route->first.empty()) return error_response(404, "not found");
        const auto& [id, action] = *route;

        if (action == "messages") {
            if (method != "POST") return error_response(405, "method not allowed");
            auto parsed = message_text(body);
            if (parsed.index() == 1) return error_response(400, std::get<1>(parsed));
            const auto reply = engine.post_message(id, std::get<0>(parsed));
            return json_response(200, ordered_json{{"reply", reply.reply}, {"turn_index", reply.turn_index}});
        }
        if (action == "transcript") {
            if (method != "GET") return error_response(405, "method not allowed");
            auto turns = ordered_json::array();
            for (const auto& t : engine.transcript(id))
                turns.push_back(ordered_json{{"index", t.index()}, {"speaker", to_string(t.speaker())}, {"text", t.text()}});
            return json_response(200, ordered_json{{"turns", std::move(turns)}});
        }
        if (action == "debug") {
            if (method != "GET") return error_response(405, "method not allowed");
            auto candidates = ordered_json::array();
            for (const auto& c : engine.debug(id)) candidates.push_back(candidate_json(c));
            return json_response(200, ordered_json{{"candidates", std::move(candidates)}});
        }
        return error_response(404, "not found");
    } catch (const UnknownSession& e) {
        return error_response(404, e.what());
    } catch (const EmptyMessage& e) {
        return error_response(400, e.what());
    } catch (const NoTurnsYet& e) {
        return error_response(409, e.what());
    } catch (const std::exception& e) {
        return error_response(500, e.what());
    }
}

std::string handle_ws_frame(Engine& engine, const std::string& session_id, std::string_view frame) {
    auto parsed = message_text(frame);
    if (parsed.index() == 1) return ordered_json{{"error", std::get<1>(parsed)}}.dump();
    try {
        const auto reply = engine.post_message(session_id, std::get<0>(parsed));
        return ordered_json{{"reply", reply.reply}, {"turn_index", reply.turn_index}}.dump();
    } catch (const std::exception& e) {
        return ordered_json{{"error", e.what()}}.dump();
    }
}

// --- Transport ----------------------------------------------------------------

struct ChatServer::Impl {
    struct Connection {
        std::thread thread;
        std::shared_ptr<std::atomic<bool>> done = std::make_shared<std::atomic<bool>>(false);
    };

    // Drops a connection's fd from the live set before its socket closes, so
    // stop() never shuts down a descriptor number that has been reused.
    struct Release {
        Impl* impl;
        int fd;
        ~Release() {
            std::lock_guard lock(impl->mutex);
            impl->live_fds.erase(fd);
        }
    };

    std::shared_ptr<Engine> engine;
    std::string bind;
    asio::io_context ioc{1};
    tcp::acceptor acceptor{ioc};
    std::thread accept_thread;
    std::mutex mutex;
    std::condition_variable stopped_cv;
    bool stopped = false;
    std::vector<Connection> connections;
    std::set<int> live_fds;

    void accept_loop() {
        for (;;) {
            tcp::socket socket(ioc);
            beast::error_code ec;
            acceptor.accept(socket, ec);
            if (ec) {
                std::lock_guard lock(mutex);
                if (stopped || !acceptor.is_open()) return;
                continue;
            }
            std::lock_guard lock(mutex);
            if (stopped) return;
            prune();
            Connection c;
            live_fds.insert(socket.native_handle());
            auto done = c.done;
            c.thread = std::thread([this, s = std::move(socket), done]() mutable {
                serve(std::move(s));
                done->store(true);
            });
            connections.push_back(std::move(c));
        }
    }

    void prune() {
        std::erase_if(connections, [](Connection& c) {
            if (!c.done->load()) return false;
            c.thread.join();
            return true;
        });
    }

    void serve(tcp::socket socket) {
        const Release release{this, socket.native_handle()};
        beast::flat_buffer buffer;
        beast::error_code ec;
        for (;;) {
            http::request<http::string_body> req;
            http::read(socket, buffer, req, ec);
            if (ec) return;
            if (websocket::is_upgrade(req)) {
                serve_websocket(std::move(socket), std::move(req));
                return;
            }
            const auto result = handle_http(*engine, to_std(req.method_string()), to_std(req.target()), req.body());
            http::response<http::string_body> res{static_cast<http::status>(result.status), req.version()};
            res.set(http::field::server, "storyweaver");
            res.set(http::field::content_type, result.content_type);
            res.keep_alive(req.keep_alive());
            res.body() = result.body;
            res.prepare_payload();
            http::write(socket, res, ec);
            if (ec || !req.keep_alive()) break;
        }
        socket.shutdown(tcp::socket::shutdown_send, ec);
    }

    void serve_websocket(tcp::socket socket, http::request<http::string_body> req) {
        beast::error_code ec;
        const auto id = stream_session(to_std(req.target()));
        if (!id || !engine->has_session(*id)) {
            http::response<http::string_body> res{http::status::not_found, req.version()};
            res.set(http::field::content_type, "application/json");
            res.body() = R"({"error":"unknown session"})";
            res.prepare_payload();
            http::write(socket, res, ec);
            const Release release{this, socket.native_handle()};
            return;
        }
        const int fd = socket.native_handle();
        websocket::stream<tcp::socket> ws(std::move(socket));
        const Release release{this, fd};
        ws.accept(req, ec);
        if (ec) return;
        for (;;) {
            beast::flat_buffer buffer;
            ws.read(buffer, ec);
            if (ec) return;
            const auto frame = beast::buffers_to_string(buffer.data());
            ws.text(true);
            ws.write(asio::buffer(handle_ws_frame(*engine, *id, frame)), ec);
            if (ec) return;
        }
    }
};

ChatServer::ChatServer(std::shared_ptr<Engine> engine, std::string bind, unsigned short port)
    : impl_(std::make_unique<Impl>()), port_(port) {
    impl_->engine = std::move(engine);
    impl_->bind = std::move(bind);
}

ChatServer::~ChatServer() { stop(); }

void ChatServer::start() {
    const tcp::endpoint endpoint(asio::ip::make_address(impl_->bind), port_);
    impl_->acceptor.open(endpoint.protocol());
    impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
    impl_->acceptor.bind(endpoint);
    impl_->acceptor.listen();
    port_ = impl_->acceptor.local_endpoint().port();
    impl_->accept_thread = std::thread([this] { impl_->accept_loop(); });
}

void ChatServer::stop() {
    if (!impl_) return;
    std::vector<Impl::Connection> connections;
    {
        std::lock_guard lock(impl_->mutex);
        if (impl_->stopped) return;
        impl_->stopped = true;
        // shutdown(2) wakes the blocking accept/read calls in the worker threads.
        if (impl_->acceptor.is_open()) ::shutdown(impl_->acceptor.native_handle(), SHUT_RDWR);
        for (const int fd : impl_->live_fds) ::shutdown(fd, SHUT_RDWR);
        connections = std::move(impl_->connections);
    }
    if (impl_->accept_thread.joinable()) impl_->accept_thread.join();
    for (auto& c : connections)
        if (c.thread.joinable()) c.thread.join();
    beast::error_code ec;
    impl_->acceptor.close(ec);
    impl_->stopped_cv.notify_all();
}

void ChatServer::wait() {
    std::unique_lock lock(impl_->mutex);
    impl_->stopped_cv.wait(lock, [this] { return impl_->stopped; });
}

}  // namespace storyweaver
