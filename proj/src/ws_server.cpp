#include "bargein/ws_server.hpp"

#include <chrono>
#include <deque>
#include <iostream>
#include <thread>
#include <vector>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

namespace bargein::gateway {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

double steady_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

class Connection : public std::enable_shared_from_this<Connection> {
public:
    Connection(tcp::socket socket, const GatewayOptions& options)
        : ws_(std::move(socket)),
          timer_(ws_.get_executor()),
          hub_(options, [this](const std::string& line) { enqueue(line); }) {}

    void start() {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(beast::bind_front_handler(&Connection::on_accept, shared_from_this()));
    }

private:
    void on_accept(beast::error_code ec) {
        if (ec) return;
        read();
        schedule();
    }

    void read() {
        ws_.async_read(buffer_, beast::bind_front_handler(&Connection::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec) {
            closed_ = true;
            hub_.close_all(steady_seconds());
            timer_.cancel();
            return;
        }
        const std::string line = beast::buffers_to_string(buffer_.data());
        buffer_.consume(buffer_.size());
        hub_.handle_line(line, steady_seconds());
        schedule();
        read();
    }

    // Re-arms the timer for the hub's next scheduled event.
    void schedule() {
        if (closed_) return;
        const double now = steady_seconds();
        const auto wake = hub_.next_wakeup(now);
        const double delay = wake ? std::max(0.0, *wake - now) : 3600.0;
        timer_.expires_after(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(delay)));
        timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
            if (ec == net::error::operation_aborted || self->closed_) return;
            self->hub_.poll(steady_seconds());
            self->schedule();
        });
    }

    void enqueue(const std::string& line) {
        if (closed_) return;
        outbox_.push_back(line);
        if (outbox_.size() == 1) write();
    }

    void write() {
        ws_.text(true);
        ws_.async_write(net::buffer(outbox_.front()),
                        [self = shared_from_this()](beast::error_code ec, std::size_t) {
                            if (ec) {
                                self->closed_ = true;
                                return;
                            }
                            self->outbox_.pop_front();
                            if (!self->outbox_.empty()) self->write();
                        });
    }

    websocket::stream<beast::tcp_stream> ws_;
    net::steady_timer timer_;
    beast::flat_buffer buffer_;
    std::deque<std::string> outbox_;
    bool closed_ = false;
    SessionHub hub_;
};

}  // namespace

struct WebSocketServer::Impl {
    GatewayOptions options;
    unsigned threads;
    net::io_context ioc;
    tcp::acceptor acceptor{net::make_strand(ioc)};
    net::signal_set signals{ioc, SIGINT, SIGTERM};
    std::vector<std::thread> pool;

    void accept() {
        acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket s) {
            if (ec) {
                if (ec != net::error::operation_aborted) accept();
                return;
            }
            std::make_shared<Connection>(std::move(s), options)->start();
            accept();
        });
    }
};

WebSocketServer::WebSocketServer(GatewayOptions options, const std::string& address,
                                 std::uint16_t port, unsigned threads)
    : impl_(std::make_unique<Impl>()) {
    impl_->options = std::move(options);
    impl_->threads = std::max(1u, threads);
    const tcp::endpoint ep{net::ip::make_address(address), port};
    impl_->acceptor.open(ep.protocol());
    impl_->acceptor.set_option(net::socket_base::reuse_address(true));
    impl_->acceptor.bind(ep);
    impl_->acceptor.listen(net::socket_base::max_listen_connections);
}

WebSocketServer::~WebSocketServer() {
    stop();
    wait();
}

std::uint16_t WebSocketServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void WebSocketServer::start() {
    impl_->signals.async_wait([this](beast::error_code, int) { stop(); });
    impl_->accept();
    for (unsigned i = 0; i < impl_->threads; ++i) {
        impl_->pool.emplace_back([this] { impl_->ioc.run(); });
    }
}

void WebSocketServer::wait() {
    for (auto& t : impl_->pool) {
        if (t.joinable()) t.join();
    }
    impl_->pool.clear();
}

void WebSocketServer::stop() { impl_->ioc.stop(); }

}  // namespace bargein::gateway
