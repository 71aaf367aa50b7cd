#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "bargein/gateway.hpp"

namespace bargein::gateway {

/// WebSocket transport for SessionHub: one hub per connection, one text
/// frame per protocol line, time taken from the steady clock.
class WebSocketServer {
public:
    /// Binds immediately; port 0 picks a free port.
    WebSocketServer(GatewayOptions options, const std::string& address, std::uint16_t port,
                    unsigned threads = 2);
    ~WebSocketServer();

    std::uint16_t port() const;

    /// Starts the I/O threads and returns.
    void start();
    /// Blocks until stop() is called from another thread or a signal.
    void wait();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace bargein::gateway
