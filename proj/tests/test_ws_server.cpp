#include "hapticguide/ws_server.hpp"

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <doctest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <thread>

using namespace hapticguide;
namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using nlohmann::json;

namespace {

class Client {
 public:
  explicit Client(std::uint16_t port) : ws_(ioc_) {
    tcp::resolver resolver(ioc_);
    asio::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1", "/");
    ws_.text(true);
  }

  void send(const json& m) { ws_.write(asio::buffer(m.dump())); }

  json receive() {
    beast::flat_buffer buffer;
    ws_.read(buffer);
    return json::parse(beast::buffers_to_string(buffer.data()));
  }

  // Reads until a TrialState with the given phase arrives; returns everything read.
  std::vector<json> until_phase(const std::string& phase) {
    std::vector<json> got;
    for (;;) {
      got.push_back(receive());
      if (got.back()["type"] == "TrialState" && got.back()["phase"] == phase) return got;
    }
  }

  void close() { ws_.close(websocket::close_code::normal); }

 private:
  asio::io_context ioc_;
  websocket::stream<tcp::socket> ws_;
};

struct RunningServer {
  SessionServer server;
  std::uint16_t port;
  std::thread thread;

  explicit RunningServer(ServiceOptions o) : server(std::move(o)), port(server.listen(0)) {
    thread = std::thread([this] { server.run(); });
  }
  ~RunningServer() {
    server.stop();
    thread.join();
  }
};

}  // namespace

TEST_SUITE("ws_server") {

TEST_CASE("interactive trial over a live connection") {
  const auto dir = std::filesystem::temp_directory_path() / "hg_ws_logs";
  std::filesystem::remove_all(dir);
  ServiceOptions opts;
  opts.log_dir = dir;
  {
    RunningServer rs(opts);
    Client c(rs.port);
    const json hello = c.receive();
    CHECK(hello["phase"] == "connected");
    const std::string id = hello["session"];

    c.send({{"type", "Control"}, {"session", id}, {"action", "start"}});
    CHECK(c.receive()["phase"] == "running");
    std::size_t frames = 0, successes = 0;
    for (Micros t = 0; t <= 600000; t += kPosePeriodUs) {
      c.send({{"type", "PoseUpdate"}, {"session", id}, {"t_us", t}, {"tool", {10.0, 0.0, 350.0}}});
    }
    c.send({{"type", "Control"}, {"session", id}, {"action", "finish"}});
    for (const json& m : c.until_phase("completed")) {
      CHECK(m["session"] == id);
      if (m["type"] == "FrameOut") ++frames;
      if (m["type"] == "CueEventOut" && m["cue"] == "Success") ++successes;
    }
    CHECK(frames == 60);
    CHECK(successes == 1);
    c.close();
  }
  CHECK(std::filesystem::exists(dir / "s0001"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("malformed input closes only that session") {
  RunningServer rs(ServiceOptions{});
  Client a(rs.port);
  Client b(rs.port);
  const std::string ida = a.receive()["session"];
  const std::string idb = b.receive()["session"];
  CHECK(ida != idb);

  a.send({{"type", "Control"}, {"session", ida}, {"action", "start"}});
  a.receive();
  a.send({{"type", "PoseUpdate"}, {"session", ida}, {"t_us", 0}});
  const json aborted = a.receive();
  CHECK(aborted["phase"] == "aborted");
  CHECK(aborted.contains("diagnostic"));

  b.send({{"type", "Control"}, {"session", idb}, {"action", "start"}, {"mode", "simulated"}, {"condition", "ar"}});
  const auto streamed = b.until_phase("completed");
  CHECK(streamed.front()["phase"] == "running");
  CHECK(std::count_if(streamed.begin(), streamed.end(), [](const json& m) { return m["type"] == "PoseUpdate"; }) > 0);
  b.close();
  CHECK(rs.server.sessions_started() == 2);
}

TEST_CASE("stop closes open connections") {
  auto rs = std::make_unique<RunningServer>(ServiceOptions{});
  Client c(rs->port);
  c.receive();
  rs.reset();
  CHECK_THROWS(c.receive());
}

TEST_CASE("busy port is reported") {
  RunningServer rs(ServiceOptions{});
  SessionServer other(ServiceOptions{});
  CHECK_THROWS_AS(other.listen(rs.port), std::runtime_error);
}

}
