#include "hapticguide/ws_server.hpp"

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <fmt/format.h>

#include <sys/socket.h>

#include <list>
#include <mutex>
#include <thread>

namespace hapticguide {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

struct SessionServer::Impl {
  explicit Impl(ServiceOptions o) : options(std::move(o)), acceptor(ioc) {}

  struct Connection {
    std::shared_ptr<tcp::socket> socket;
    std::thread worker;
    std::atomic<bool> done{false};
  };

  void serve(const std::shared_ptr<tcp::socket>& socket, std::string id) {
    std::optional<std::filesystem::path> dir;
    if (options.log_dir) dir = *options.log_dir / id;
    Session session(id, options.setup, dir, options.device_sink);
    try {
      websocket::stream<tcp::socket&> ws(*socket);
      ws.accept();
      ws.text(true);
      auto send = [&](const std::vector<nlohmann::json>& out) {
        for (const nlohmann::json& m : out) ws.write(asio::buffer(m.dump()));
      };
      send(session.open());
      beast::flat_buffer buffer;
      while (!session.closed()) {
        buffer.clear();
        ws.read(buffer);
        send(session.handle(beast::buffers_to_string(buffer.data())));
      }
      ws.close(websocket::close_code::normal);
    } catch (const std::exception&) {
      // Peer went away or the server is stopping.
    }
    session.disconnect();
  }

  void reap() {
    std::lock_guard lock(mutex);
    for (auto it = connections.begin(); it != connections.end();) {
      if (it->done.load()) {
        it->worker.join();
        it = connections.erase(it);
      } else {
        ++it;
      }
    }
  }

  ServiceOptions options;
  asio::io_context ioc;
  tcp::acceptor acceptor;
  std::mutex mutex;
  std::list<Connection> connections;
  std::atomic<bool> stopping{false};
};

SessionServer::SessionServer(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

SessionServer::~SessionServer() { stop(); }

std::uint16_t SessionServer::listen(std::uint16_t port) {
  try {
    const tcp::endpoint ep(asio::ip::make_address(impl_->options.address), port);
    impl_->acceptor.open(ep.protocol());
    impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
    impl_->acceptor.bind(ep);
    impl_->acceptor.listen();
    return impl_->acceptor.local_endpoint().port();
  } catch (const boost::system::system_error& e) {
    throw std::runtime_error(fmt::format("cannot listen on port {}: {}", port, e.what()));
  }
}

void SessionServer::run() {
  while (!impl_->stopping.load()) {
    auto socket = std::make_shared<tcp::socket>(impl_->ioc);
    boost::system::error_code ec;
    impl_->acceptor.accept(*socket, ec);
    if (ec) {
      if (impl_->stopping.load() || !impl_->acceptor.is_open()) break;
      continue;
    }
    const std::size_t n = ++sessions_started_;
    impl_->reap();
    std::lock_guard lock(impl_->mutex);
    Impl::Connection& c = impl_->connections.emplace_back();
    c.socket = socket;
    c.worker = std::thread([impl = impl_.get(), socket, &c, id = fmt::format("s{:04}", n)] {
      impl->serve(socket, id);
      c.done.store(true);
    });
  }
}

void SessionServer::stop() {
  if (impl_->stopping.exchange(true)) return;
  boost::system::error_code ec;
  // shutdown() wakes a thread blocked in accept(); close() alone may not.
  ::shutdown(impl_->acceptor.native_handle(), SHUT_RDWR);
  impl_->acceptor.close(ec);
  std::list<Impl::Connection> pending;
  {
    std::lock_guard lock(impl_->mutex);
    for (auto& c : impl_->connections) c.socket->shutdown(tcp::socket::shutdown_both, ec);
    pending.splice(pending.end(), impl_->connections);
  }
  for (auto& c : pending) c.worker.join();
}

}  // namespace hapticguide
