#pragma once

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <string>

// Minimal blocking WebSocket client for exercising the chat stream.
class WsClient {
  public:
    WsClient(unsigned short port, const std::string& target) {
        namespace asio = boost::asio;
        asio::ip::tcp::resolver resolver(ioc_);
        asio::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
        ws_.handshake("127.0.0.1:" + std::to_string(port), target);
        ws_.text(true);
    }

    std::string exchange(const std::string& frame) {
        ws_.write(boost::asio::buffer(frame));
        boost::beast::flat_buffer buffer;
        ws_.read(buffer);
        return boost::beast::buffers_to_string(buffer.data());
    }

    void close() { ws_.close(boost::beast::websocket::close_code::normal); }

  private:
    boost::asio::io_context ioc_;
    boost::beast::websocket::stream<boost::asio::ip::tcp::socket> ws_{ioc_};
};
