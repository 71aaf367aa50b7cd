#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "bargein/gateway.hpp"
#include "bargein/ws_server.hpp"
#include "mock_llm.hpp"

using namespace bargein;
using namespace bargein::gateway;
using json = nlohmann::json;

namespace {

const char* kText =
    "We have a flashlight and a map on our list. Next, I suggest a parachute, because it can be "
    "used as a shelter and for signaling. What do you think?";

struct Wire {
    std::vector<json> out;
    SessionHub hub;

    explicit Wire(GatewayOptions opt = {})
        : hub(std::move(opt), [this](const std::string& line) { out.push_back(json::parse(line)); }) {}

    void send(const json& m, double now) { hub.handle_line(m.dump(), now); }

    std::vector<json> of(const std::string& type, const std::string& session = "") const {
        std::vector<json> r;
        for (const auto& m : out) {
            if (m.at("type") == type && (session.empty() || m.value("session", "") == session)) {
                r.push_back(m);
            }
        }
        return r;
    }
};

json start(const std::string& id, const std::string& opening = kText, json config = json::object()) {
    return {{"type", "session.start"},
            {"session", id},
            {"payload", {{"protocol", kProtocolVersion}, {"opening", opening}, {"config", config}}}};
}

json speech(const std::string& id, const std::string& text, bool final = true) {
    return {{"type", "user.speech"}, {"session", id}, {"payload", {{"text", text}, {"final", final}}}};
}

}  // namespace

TEST_CASE("session ids") {
    CHECK(valid_session_id("abc-1.2_x"));
    CHECK_FALSE(valid_session_id(""));
    CHECK_FALSE(valid_session_id("a b"));
    CHECK_FALSE(valid_session_id(std::string(65, 'a')));
    CHECK_FALSE(valid_session_id("../etc"));
}

TEST_CASE("start, speak and end a session") {
    GatewayOptions opt;
    opt.base.auto_respond = true;
    Wire w(opt);
    w.send(start("s1"), 100.0);
    REQUIRE(w.of("session.started").size() == 1);
    CHECK(w.of("session.started")[0]["payload"]["protocol"] == kProtocolVersion);
    CHECK(w.of("session.started")[0]["payload"]["config"]["clock"] == "wall");
    REQUIRE(w.of("robot.plan").size() == 1);
    CHECK(w.of("robot.plan")[0]["payload"]["n_words"] == 30);
    CHECK(w.hub.next_wakeup(100.0).has_value());

    w.hub.poll(101.0);
    CHECK(w.of("robot.word").size() == 3);  // onsets 0, 0.4, 0.8
    w.hub.poll(200.0);
    CHECK(w.of("robot.done").size() == 1);

    w.send(speech("s1", "Is the map useful?"), 201.0);
    const auto us = w.of("user.speech");
    REQUIRE(us.size() == 1);
    CHECK(us[0]["payload"]["overlap"] == false);
    CHECK(w.of("robot.plan").size() == 2);  // the gateway answers ordinary turns

    w.send({{"type", "session.end"}, {"session", "s1"}}, 300.0);
    CHECK(w.of("session.ended").size() == 1);
    CHECK(w.hub.session_count() == 0);
}

TEST_CASE("overlap produces gate, intent and decision in order") {
    Wire w;
    w.send(start("s"), 10.0);
    w.send(speech("s", "What is the parachute for?"), 17.0);
    std::vector<std::string> order;
    for (const auto& m : w.out) {
        const std::string t = m["type"];
        if (t.rfind("engine.", 0) == 0) order.push_back(t);
        CHECK(m.contains("session"));
    }
    REQUIRE(order.size() >= 4);
    CHECK(order[0] == "engine.gate");
    CHECK(order[1] == "engine.classify");
    CHECK(order[2] == "engine.intent");
    CHECK(order[3] == "engine.decision");
    CHECK(w.of("engine.gate")[0]["payload"]["elapsed_s"] == 7.0);
    CHECK(w.of("engine.decision")[0]["payload"]["decision"] == "clarify_and_continue");
}

TEST_CASE("word indices increase and wire order equals trace order") {
    Wire w;
    w.send(start("s"), 0.0);
    for (double t = 0.05; t < 20.0; t += 0.37) w.hub.poll(t);
    long last = -1;
    double last_t = 0.0;
    for (const auto& m : w.of("robot.word")) {
        CHECK(m["payload"]["index"].get<long>() == last + 1);
        last = m["payload"]["index"].get<long>();
        CHECK(m["t"].get<double>() >= last_t);
        last_t = m["t"];
    }
    CHECK(last == 29);
}

TEST_CASE("two sessions stay isolated") {
    Wire w;
    w.send(start("a"), 0.0);
    w.send(start("b", "Short one here."), 0.5);
    w.send(speech("a", "Luna, stop."), 3.0);
    w.hub.poll(30.0);
    for (const auto& m : w.of("robot.yield")) CHECK(m["session"] == "a");
    CHECK(w.of("robot.yield", "a").size() == 1);
    CHECK(w.of("engine.gate", "b").empty());
    CHECK(w.of("robot.done", "b").size() == 1);
    for (const auto& m : w.of("robot.plan", "b")) CHECK(m["payload"]["full_text"] == "Short one here.");
}

TEST_CASE("malformed messages get errors and keep the session") {
    Wire w;
    w.send(start("s"), 0.0);
    const auto code_of_last = [&] { return w.out.back()["payload"]["code"].get<std::string>(); };

    w.hub.handle_line("{not json", 1.0);
    CHECK(code_of_last() == "bad_json");
    w.hub.handle_line("[1,2]", 1.0);
    CHECK(code_of_last() == "bad_message");
    w.send({{"type", "user.speech"}, {"session", "s"}, {"payload", {{"text", 3}}}}, 1.0);
    CHECK(code_of_last() == "bad_message");
    CHECK(w.out.back()["session"] == "s");
    w.send({{"type", "dance"}, {"session", "s"}}, 1.0);
    CHECK(code_of_last() == "unknown_type");
    w.send(speech("nobody", "hi"), 1.0);
    CHECK(code_of_last() == "unknown_session");
    w.send(start("s"), 1.0);
    CHECK(code_of_last() == "session_exists");
    w.send(start("bad id!"), 1.0);
    CHECK(code_of_last() == "bad_message");
    w.send({{"type", "session.start"}, {"session", "v"}, {"payload", {{"protocol", 99}}}}, 1.0);
    CHECK(code_of_last() == "protocol_version");
    w.send(start("c", kText, {{"rate_wpm", "fast"}}), 1.0);
    CHECK(code_of_last() == "bad_config");
    CHECK(w.out.back()["payload"]["message"].get<std::string>().find("/payload/config/rate_wpm") !=
          std::string::npos);
    w.send(start("o", kText, {{"classifier", "oracle"}}), 1.0);
    CHECK(code_of_last() == "bad_config");

    CHECK(w.hub.session_count() == 1);
    w.send(speech("s", "Okay"), 4.4);
    CHECK(w.of("engine.decision", "s").size() == 1);
}

TEST_CASE("traces are flushed on end and on connection loss") {
    const auto dir = std::filesystem::temp_directory_path() / "bargein_gateway_traces";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    GatewayOptions opt;
    opt.trace_dir = dir.string();
    {
        Wire w(opt);
        w.send(start("ended"), 0.0);
        w.send({{"type", "session.end"}, {"session", "ended"}}, 2.0);
        w.send(start("dropped"), 3.0);
        w.hub.poll(4.0);
        w.hub.close_all(5.0);
        CHECK(w.hub.session_count() == 0);
    }
    for (const char* name : {"ended.ndjson", "dropped.ndjson"}) {
        std::ifstream in(dir / name);
        REQUIRE(in.good());
        std::string first;
        std::getline(in, first);
        CHECK(json::parse(first)["kind"] == "robot.plan");
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("hub decisions match the virtual-clock engine") {
    Wire w;
    w.send(start("s"), 50.0);
    w.send(speech("s", "yeah sure thing"), 52.0);
    w.send(speech("s", "that is not right"), 57.5);
    w.hub.poll(200.0);

    SessionConfig cfg;
    cfg.auto_respond = true;
    SessionEngine e(cfg, make_planner(cfg));
    RuleBasedClassifier rb;
    e.start_robot_turn(0.0, kText);
    auto t = e.on_user_speech(2.0, {"yeah sure thing"});
    if (t) e.on_classifier_result(2.0, t->overlap_id, classify(t->request, rb));
    t = e.on_user_speech(7.5, {"that is not right"});
    if (t) e.on_classifier_result(7.5, t->overlap_id, classify(t->request, rb));
    e.tick(150.0);

    std::vector<std::string> wire, local;
    for (const auto& m : w.out) {
        if (m["type"] == "engine.decision") wire.push_back(m["payload"]["decision"]);
    }
    for (const auto& entry : e.trace().entries()) {
        if (entry.kind == "engine.decision") local.push_back(entry.payload.at("decision"));
    }
    CHECK(wire == local);
    CHECK(wire.size() == 2);
}

TEST_CASE("external classifier runs off the loop with a deadline") {
    MockLlm mock;
    json cfg = {{"classifier", "external"},
                {"classifier_timeout_s", 0.5},
                {"llm", {{"endpoint", mock.endpoint()}, {"model", "m"}, {"timeout_s", 1.0}}}};

    SUBCASE("result applied on poll") {
        mock.reply("agreement");
        Wire w;
        w.send(start("x", kText, cfg), 0.0);
        w.send(speech("x", "mm okay yes"), 3.0);
        CHECK(w.of("engine.decision").empty());
        const auto wake = w.hub.next_wakeup(3.0);
        REQUIRE(wake);
        CHECK(*wake <= 3.0 + 0.011);
        for (int i = 0; i < 200 && w.of("engine.decision").empty(); ++i) {
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
            w.hub.poll(3.01);
        }
        REQUIRE(w.of("engine.decision").size() == 1);
        CHECK(w.of("engine.intent")[0]["payload"]["source"] == "external");
        CHECK(w.of("engine.decision")[0]["payload"]["decision"] == "ack_and_continue");
    }
    SUBCASE("timeout falls back to yield") {
        mock.delay(1500);
        Wire w;
        w.send(start("x", kText, cfg), 0.0);
        w.send(speech("x", "mm okay yes"), 3.0);
        w.hub.poll(3.2);
        CHECK(w.of("engine.decision").empty());
        w.hub.poll(3.6);
        REQUIRE(w.of("engine.decision").size() == 1);
        CHECK(w.of("engine.decision")[0]["payload"]["fallback"] == true);
        CHECK(w.of("robot.yield").size() == 1);
    }
}

TEST_CASE("websocket round trip") {
    namespace net = boost::asio;
    namespace beast = boost::beast;
    namespace websocket = beast::websocket;

    GatewayOptions opt;
    opt.base.auto_respond = true;
    WebSocketServer server(opt, "127.0.0.1", 0, 1);
    server.start();

    net::io_context ioc;
    net::ip::tcp::resolver resolver(ioc);
    websocket::stream<net::ip::tcp::socket> ws(ioc);
    net::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(server.port())));
    ws.handshake("127.0.0.1", "/");

    auto write = [&](const json& m) { ws.write(net::buffer(m.dump())); };
    auto read_until = [&](const std::string& type) {
        std::vector<json> seen;
        for (int i = 0; i < 500; ++i) {
            beast::flat_buffer buf;
            ws.read(buf);
            seen.push_back(json::parse(beast::buffers_to_string(buf.data())));
            if (seen.back()["type"] == type) break;
        }
        return seen;
    };

    write(start("ws", "One two three, four five six seven eight nine ten eleven twelve."));
    auto first = read_until("robot.word");
    CHECK(first.front()["type"] == "session.started");
    write(speech("ws", "stop"));
    auto rest = read_until("robot.yield");
    CHECK(rest.back()["type"] == "robot.yield");
    bool gate_seen = false;
    for (const auto& m : rest) {
        if (m["type"] == "engine.gate") {
            gate_seen = true;
            CHECK(m["payload"]["outcome"] == "wakeword_yield");
        }
    }
    CHECK(gate_seen);
    write({{"type", "session.end"}, {"session", "ws"}});
    auto ended = read_until("session.ended");
    CHECK(ended.back()["type"] == "session.ended");
    ws.close(websocket::close_code::normal);
    server.stop();
    server.wait();
}
