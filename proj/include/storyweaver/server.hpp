#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "storyweaver/engine.hpp"

namespace storyweaver {

struct HttpResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

/// Routes one HTTP request to the engine. Transport-independent.
HttpResponse handle_http(Engine& engine, std::string_view method, std::string_view target, std::string_view body);

/// Handles one WebSocket text frame for a session; errors come back as {"error": ...}.
std::string handle_ws_frame(Engine& engine, const std::string& session_id, std::string_view frame);

/// Session id if `target` is /api/sessions/{id}/stream.
std::optional<std::string> stream_session(std::string_view target);

/// HTTP + WebSocket chat service on one port; one thread per connection.
class ChatServer {
  public:
    ChatServer(std::shared_ptr<Engine> engine, std::string bind, unsigned short port);
    ~ChatServer();
    ChatServer(const ChatServer&) = delete;
    ChatServer& operator=(const ChatServer&) = delete;

    /// Binds and starts accepting; port 0 picks an ephemeral port.
    void start();
    void stop();
    /// Blocks until stop() is called from another thread or a signal handler.
    void wait();
    unsigned short port() const noexcept { return port_; }

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    unsigned short port_;
};

}  // namespace storyweaver
