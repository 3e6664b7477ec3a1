#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>

#include <httplib.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "snake_story/policy_sim.hpp"
#include "snake_story/service.hpp"

using namespace snake_story;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("snake_story_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string read_all(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct HubRig {
    explicit HubRig(const std::string& name) {
        ServiceConfig c;
        c.log_dir = temp_dir(name);
        c.offline_default = true;
        hub = std::make_unique<SessionHub>(c, clock);
    }
    std::shared_ptr<ManualClock> clock = std::make_shared<ManualClock>();
    std::unique_ptr<SessionHub> hub;

    std::string create(json body) { return hub->create(body)["session_id"].get<std::string>(); }

    std::uint64_t attach(const std::string& id, int* closes = nullptr) {
        Listener l;
        l.notify = [] {};
        l.close = [closes](const std::string&) {
            if (closes) ++*closes;
        };
        return hub->attach(id, l);
    }

    void advance(std::chrono::milliseconds d) { clock->advance(d); }
};

std::vector<wire::Kind> kinds(const std::vector<wire::Message>& ms) {
    std::vector<wire::Kind> out;
    for (const auto& m : ms) out.push_back(m.kind);
    return out;
}

const wire::Message* last_of(const std::vector<wire::Message>& ms, wire::Kind k) {
    const wire::Message* found = nullptr;
    for (const auto& m : ms) {
        if (m.kind == k) found = &m;
    }
    return found;
}

}  // namespace

// ---------------------------------------------------------------------------
// Hub, no sockets

TEST(Hub, CreateValidatesRequests) {
    HubRig rig("create");
    json made = rig.hub->create({{"version", "game"}, {"offline", true}, {"seed", 1}});
    EXPECT_EQ(made["version"], "game");
    EXPECT_EQ(made["seed"], 1);
    EXPECT_NE(rig.create({{"version", "game"}, {"seed", 1}}), made["session_id"].get<std::string>());

    EXPECT_THROW(rig.hub->create({{"version", "arcade"}}), ConfigError);
    EXPECT_THROW(rig.hub->create(json::object()), ConfigError);
    EXPECT_THROW(rig.hub->create({{"version", "game"}, {"config", {{"map_size", 0}}}}), ConfigError);
    EXPECT_THROW(rig.hub->create({{"version", "game"}, {"config", {{"lives", 3}}}}), ConfigError);
    EXPECT_THROW(rig.hub->create({{"version", "game"}, {"seed", -1}}), ConfigError);
    EXPECT_THROW(rig.hub->create({{"version", "game"}, {"colour", "red"}}), ConfigError);
}

TEST(Hub, ConfigOverrides) {
    GameConfig c = config_from_json({{"map_size", 20}, {"temperature_high", 1.2}});
    EXPECT_EQ(c.map_size, 20);
    EXPECT_DOUBLE_EQ(c.temperature_high, 1.2);
    EXPECT_EQ(config_from_json(config_to_json(c)), c);
    EXPECT_THROW(config_from_json({{"map_size", 2.5}}), ConfigError);
}

TEST(Hub, OnlineWithoutKeyIsUnavailable) {
    ServiceConfig c;
    c.log_dir = temp_dir("nokey");
    c.provider.api_key_env = "SNAKE_STORY_TEST_KEY_THAT_IS_NOT_SET";
    SessionHub hub(c, std::make_shared<ManualClock>());
    EXPECT_THROW(hub.create({{"version", "nongame"}}), ProviderUnavailable);
    EXPECT_TRUE(hub.ids().empty());
    EXPECT_NO_THROW(hub.create({{"version", "nongame"}, {"offline", true}}));
}

TEST(Hub, NonGameChoiceBringsNextOptions) {
    HubRig rig("nongame");
    const std::string id = rig.create({{"version", "nongame"}, {"seed", 4}});
    auto gen = rig.attach(id);
    auto first = rig.hub->drain(id, gen).messages;
    EXPECT_EQ(kinds(first), (std::vector{wire::Kind::State, wire::Kind::Options}));

    rig.advance(std::chrono::seconds(12));
    rig.hub->input(id, gen, R"({"choose_slot":0})");
    auto next = rig.hub->drain(id, gen).messages;
    EXPECT_EQ(kinds(next), (std::vector{wire::Kind::State, wire::Kind::Options}));
    EXPECT_GT(next.front().seq, first.back().seq);
    EXPECT_EQ(next.front().payload["story"].size(), 1u);
    EXPECT_NE(next.back().payload, first.back().payload);
}

TEST(Hub, ErrorsKeepTheSessionUsable) {
    HubRig rig("errors");
    const std::string id = rig.create({{"version", "game"}, {"seed", 2}});
    auto gen = rig.attach(id);
    rig.hub->drain(id, gen);

    rig.hub->input(id, gen, R"({"steer":"up"})");
    auto out = rig.hub->drain(id, gen).messages;
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].kind, wire::Kind::Error);
    EXPECT_EQ(out[0].payload["message"], "not moving");

    rig.hub->input(id, gen, "{not json");
    EXPECT_EQ(rig.hub->drain(id, gen).messages.at(0).payload["code"], "bad_input");
    rig.hub->input(id, gen, R"({"choose_slot":0})");
    EXPECT_EQ(rig.hub->drain(id, gen).messages.at(0).payload["code"], "version");

    rig.hub->input(id, gen, R"({"end_pause":true})");
    auto moving = rig.hub->drain(id, gen).messages;
    ASSERT_FALSE(moving.empty());
    EXPECT_EQ(last_of(moving, wire::Kind::State)->payload["game"]["phase"], "moving");
}

TEST(Hub, RejectedInputLeavesTheSessionUntouched) {
    HubRig rig("rejected");
    const std::string id = rig.create({{"version", "game"}, {"seed", 2}});
    auto gen = rig.attach(id);
    const std::string before = snapshot(*rig.hub->session(id).game);
    rig.hub->input(id, gen, R"({"steer":"up"})");
    rig.hub->input(id, gen, R"({"self_text":"too early"})");
    EXPECT_EQ(snapshot(*rig.hub->session(id).game), before);
    EXPECT_EQ(rig.hub->session(id).log.events.size(), 3u);
    rig.advance(std::chrono::seconds(25));
    rig.hub->tick();
    rig.advance(std::chrono::milliseconds(167));
    rig.hub->tick();
    EXPECT_EQ(rig.hub->session(id).game->tick_count, 1);
}

TEST(Hub, TicksDriveTheGameAndCoalesce) {
    HubRig rig("ticks");
    const std::string id = rig.create({{"version", "game"}, {"seed", 2}});
    auto gen = rig.attach(id);
    rig.hub->input(id, gen, R"({"end_pause":true})");
    rig.hub->drain(id, gen);
    const auto before = rig.hub->session(id).game->tick_count;
    for (int i = 0; i < 6; ++i) {
        rig.advance(std::chrono::milliseconds(167));
        rig.hub->tick();
    }
    EXPECT_EQ(rig.hub->session(id).game->tick_count, before + 6);
    auto out = rig.hub->drain(id, gen).messages;
    // Six snapshots were queued without a reader; only the newest survives
    // unless something else was queued between them.
    int states = 0;
    for (const auto& m : out) states += m.kind == wire::Kind::State;
    EXPECT_LT(states, 6);
    EXPECT_GT(rig.hub->coalesced(id), 0u);
    for (std::size_t i = 1; i < out.size(); ++i) EXPECT_GT(out[i].seq, out[i - 1].seq);
    EXPECT_EQ(last_of(out, wire::Kind::State)->payload["game"]["tick"], before + 6);
}

TEST(Hub, TakeoverClosesTheOldConnection) {
    HubRig rig("takeover");
    const std::string id = rig.create({{"version", "nongame"}, {"seed", 4}});
    int closes = 0;
    auto old_gen = rig.attach(id, &closes);
    auto new_gen = rig.attach(id);
    EXPECT_EQ(closes, 1);
    EXPECT_NE(old_gen, new_gen);
    EXPECT_TRUE(rig.hub->drain(id, old_gen).messages.empty());
    rig.hub->input(id, old_gen, R"({"choose_slot":0})");
    EXPECT_TRUE(rig.hub->session(id).story.empty());
    rig.hub->input(id, new_gen, R"({"choose_slot":1})");
    EXPECT_EQ(rig.hub->session(id).story.size(), 1u);
}

TEST(Hub, ReconnectWithinTheWindowResumes) {
    HubRig rig("reconnect");
    const std::string id = rig.create({{"version", "game"}, {"seed", 2}});
    auto gen = rig.attach(id);
    rig.hub->input(id, gen, R"({"end_pause":true})");
    const auto ticks = rig.hub->session(id).game->tick_count;
    rig.hub->detach(id, gen);
    rig.advance(std::chrono::seconds(119));
    rig.hub->tick();
    EXPECT_EQ(rig.hub->session(id).status, SessionStatus::Active);
    EXPECT_EQ(rig.hub->session(id).game->tick_count, ticks);  // paused while away

    gen = rig.attach(id);
    rig.advance(std::chrono::milliseconds(167));
    rig.hub->tick();
    EXPECT_EQ(rig.hub->session(id).game->tick_count, ticks + 1);
}

TEST(Hub, AbandonedAfterTheWindow) {
    HubRig rig("abandon");
    const std::string id = rig.create({{"version", "game"}, {"seed", 2}});
    auto gen = rig.attach(id);
    rig.hub->detach(id, gen);
    rig.advance(std::chrono::seconds(120));
    rig.hub->tick();
    Session s = rig.hub->session(id);
    EXPECT_EQ(s.status, SessionStatus::Ended);
    EXPECT_EQ(s.end_reason, "client disconnected");
    const std::string log = read_all(rig.hub->log_path(id));
    EXPECT_NE(log.find("]Game End\n"), std::string::npos);
    EXPECT_NE(log.find("]Ate[0]\n"), std::string::npos);

    // A client that comes back late still gets the result.
    gen = rig.attach(id);
    auto d = rig.hub->drain(id, gen);
    EXPECT_TRUE(d.close_after);
    EXPECT_EQ(d.messages.back().kind, wire::Kind::Result);
}

TEST(Hub, NeverConnectedSessionsExpire) {
    HubRig rig("never");
    const std::string id = rig.create({{"version", "nongame"}});
    rig.advance(std::chrono::seconds(121));
    rig.hub->tick();
    EXPECT_EQ(rig.hub->session(id).status, SessionStatus::Ended);
}

TEST(Hub, LogOnDiskMatchesTheSession) {
    HubRig rig("persist");
    const std::string id = rig.create({{"version", "nongame"}, {"seed", 8}});
    auto gen = rig.attach(id);
    EXPECT_EQ(rig.hub->log_path(id).filename(), id + ".nongame.log");

    rig.advance(std::chrono::seconds(5));
    rig.hub->input(id, gen, R"({"choose_slot":0})");
    // Active session: the log so far is a valid prefix.
    EXPECT_EQ(read_all(rig.hub->log_path(id)), rig.hub->log_text(id));
    EXPECT_FALSE(is_complete(parse_log(rig.hub->log_text(id))));

    rig.advance(std::chrono::seconds(9));
    rig.hub->input(id, gen, R"({"self_text":"The heron stayed away."})");
    rig.advance(std::chrono::seconds(3));
    rig.hub->input(id, gen, R"({"end_story":true})");
    auto d = rig.hub->drain(id, gen);
    EXPECT_TRUE(d.close_after);
    ASSERT_EQ(d.messages.back().kind, wire::Kind::Result);
    EXPECT_TRUE(
        d.messages.back().payload["full_story"].get<std::string>().starts_with(rig.hub->session(id).story[0].text));

    const std::string text = read_all(rig.hub->log_path(id));
    EXPECT_EQ(text, rig.hub->log_text(id));
    SessionTrace t = parse_log(text);
    EXPECT_TRUE(is_complete(t));
    EXPECT_EQ(write_log(t), text);
    Session back = replay(t);
    EXPECT_EQ(back.story, rig.hub->session(id).story);
}

TEST(Hub, GameSessionLogReplays) {
    HubRig rig("gamelog");
    const std::string id = rig.create({{"version", "game"}, {"seed", 6}});
    auto gen = rig.attach(id);
    rig.hub->input(id, gen, R"({"end_pause":true})");
    for (int i = 0; i < 3000 && rig.hub->session(id).status == SessionStatus::Active; ++i) {
        Session s = rig.hub->session(id);
        if (std::holds_alternative<phase::Paused>(s.game->phase)) {
            rig.hub->input(id, gen, R"({"end_pause":true})");
            continue;
        }
        rig.hub->input(id, gen, json({{"steer", to_string(detail::survival_move(*s.game))}}).dump());
        rig.advance(std::chrono::milliseconds(167));
        rig.hub->tick();
    }
    const std::string text = rig.hub->log_text(id);
    EXPECT_EQ(read_all(rig.hub->log_path(id)), text);
    Session back = replay(parse_log(text));
    EXPECT_EQ(back.story, rig.hub->session(id).story);
    EXPECT_EQ(back.game->eaten_counts, rig.hub->session(id).game->eaten_counts);
}

TEST(Hub, UnknownSession) {
    HubRig rig("unknown");
    EXPECT_THROW(rig.hub->log_text("nope"), UnknownSession);
    EXPECT_THROW(rig.attach("nope"), UnknownSession);
    EXPECT_FALSE(rig.hub->contains("nope"));
}

TEST(Hub, ListShowsStatusAndVersion) {
    HubRig rig("list");
    const std::string a = rig.create({{"version", "game"}});
    const std::string b = rig.create({{"version", "nongame"}});
    auto gen = rig.attach(b);
    rig.hub->input(b, gen, R"({"choose_slot":0})");
    rig.hub->input(b, gen, R"({"end_story":true})");
    json index = rig.hub->list();
    ASSERT_EQ(index.size(), 2u);
    for (const auto& item : index) {
        if (item["session_id"] == a) {
            EXPECT_EQ(item["version"], "game");
            EXPECT_EQ(item["status"], "active");
        } else {
            EXPECT_EQ(item["version"], "nongame");
            EXPECT_EQ(item["status"], "ended");
        }
    }
}

// ---------------------------------------------------------------------------
// Over the network

namespace {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = boost::asio::ip::tcp;

struct ServerRig {
    explicit ServerRig(const std::string& name) {
        ServiceConfig c;
        c.port = 0;
        c.log_dir = temp_dir(name) / "logs";
        c.web_root = temp_dir(name + "_web");
        c.offline_default = true;
        c.threads = 2;
        std::ofstream(c.web_root / "index.html") << "<!doctype html><title>snake story</title>";
        server = std::make_unique<Server>(c);
        server->start();
        http = std::make_unique<httplib::Client>("127.0.0.1", server->port());
    }

    std::string create(const json& body) {
        auto res = http->Post("/sessions", body.dump(), "application/json");
        EXPECT_TRUE(res);
        EXPECT_EQ(res->status, 201);
        return json::parse(res->body)["session_id"].get<std::string>();
    }

    std::unique_ptr<Server> server;
    std::unique_ptr<httplib::Client> http;
};

class WsClient {
public:
    WsClient(unsigned short port, const std::string& id) : ws_(ioc_) {
        tcp::resolver resolver(ioc_);
        boost::asio::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
        ws_.handshake("127.0.0.1", "/sessions/" + id + "/ws");
    }

    json read() {
        beast::flat_buffer buf;
        ws_.read(buf);
        return json::parse(beast::buffers_to_string(buf.data()));
    }

    // Reads until a message of `kind` arrives.
    json read_until(std::string_view kind) {
        for (int i = 0; i < 200; ++i) {
            json m = read();
            if (m["kind"] == kind) return m;
        }
        ADD_FAILURE() << "no " << kind << " message";
        return {};
    }

    void send(const json& j) { ws_.write(boost::asio::buffer(j.dump())); }

    // Reads until the server closes; returns the close code.
    int wait_closed() {
        try {
            for (;;) read();
        } catch (const beast::system_error& e) {
            if (e.code() != websocket::error::closed) return -1;
        }
        return ws_.reason().code;
    }

private:
    boost::asio::io_context ioc_;
    websocket::stream<tcp::socket> ws_;
};

}  // namespace

TEST(Server, HttpEndpoints) {
    ServerRig rig("http");
    auto res = rig.http->Post("/sessions", R"({"version":"game","offline":true,"seed":1})", "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 201);
    json made = json::parse(res->body);
    const std::string id = made["session_id"];
    EXPECT_EQ(made["ws_url"], "ws://127.0.0.1:" + std::to_string(rig.server->port()) + "/sessions/" + id + "/ws");

    EXPECT_EQ(rig.http->Post("/sessions", R"({"version":"game","config":{"map_size":-1}})", "application/json")->status,
              400);
    EXPECT_EQ(rig.http->Post("/sessions", "{oops", "application/json")->status, 400);

    auto index = rig.http->Get("/sessions");
    ASSERT_TRUE(index);
    EXPECT_EQ(json::parse(index->body).at(0)["session_id"], id);

    auto log = rig.http->Get(("/sessions/" + id + "/log").c_str());
    ASSERT_TRUE(log);
    EXPECT_EQ(log->status, 200);
    EXPECT_EQ(log->body, rig.server->hub().log_text(id));
    EXPECT_NO_THROW(parse_log(log->body));

    EXPECT_EQ(rig.http->Get("/sessions/nope/log")->status, 404);
    EXPECT_EQ(rig.http->Get("/")->status, 200);
    EXPECT_NE(rig.http->Get("/")->body.find("snake story"), std::string::npos);
    EXPECT_EQ(rig.http->Get("/missing.js")->status, 404);
    EXPECT_EQ(rig.http->Get("/../etc/passwd")->status != 200, true);
}

TEST(Server, NonGameOverWebSocket) {
    ServerRig rig("ws_nongame");
    const std::string id = rig.create({{"version", "nongame"}, {"seed", 5}});
    WsClient ws(rig.server->port(), id);
    json st = ws.read();
    EXPECT_EQ(st["v"], "wire_v1");
    EXPECT_EQ(st["kind"], "state");
    json opts = ws.read_until("options");
    ASSERT_EQ(opts["payload"]["options"].size(), 2u);

    ws.send({{"steer", "up"}});
    json err = ws.read_until("error");
    EXPECT_EQ(err["payload"]["code"], "version");

    ws.send({{"choose_slot", 0}});
    json next = ws.read_until("options");
    EXPECT_GT(next["seq"].get<int>(), opts["seq"].get<int>());
    EXPECT_NE(next["payload"], opts["payload"]);

    ws.send({{"v", "wire_v1"}, {"kind", "input"}, {"payload", {{"end_story", true}}}});
    json result = ws.read_until("result");
    EXPECT_TRUE(result["payload"]["full_story"].get<std::string>().ends_with(", and the story of the snake ends"));
    EXPECT_EQ(ws.wait_closed(), static_cast<int>(websocket::close_code::normal));
    EXPECT_TRUE(is_complete(parse_log(rig.http->Get(("/sessions/" + id + "/log").c_str())->body)));
}

TEST(Server, GameStreamsTicks) {
    ServerRig rig("ws_game");
    const std::string id = rig.create({{"version", "game"}, {"seed", 3}, {"config", {{"tick_interval_ms", 20}}}});
    WsClient ws(rig.server->port(), id);
    json pause = ws.read_until("pause");
    EXPECT_EQ(pause["payload"]["total_ms"], 25000);
    ws.send({{"steer", "up"}});
    EXPECT_EQ(ws.read_until("error")["payload"]["message"], "not moving");
    ws.send({{"end_pause", true}});
    std::int64_t last_seq = 0;
    int tick = 0;
    for (int i = 0; i < 400 && tick < 3; ++i) {
        json m = ws.read();
        EXPECT_GT(m["seq"].get<std::int64_t>(), last_seq);
        last_seq = m["seq"];
        if (m["kind"] == "state") tick = m["payload"]["game"]["tick"];
    }
    EXPECT_GE(tick, 3);
}

TEST(Server, SecondSocketTakesOver) {
    ServerRig rig("ws_takeover");
    const std::string id = rig.create({{"version", "nongame"}, {"seed", 5}});
    WsClient first(rig.server->port(), id);
    first.read_until("options");
    WsClient second(rig.server->port(), id);
    second.read_until("options");
    EXPECT_EQ(first.wait_closed(), 4000);
    second.send({{"choose_slot", 1}});
    EXPECT_EQ(second.read_until("state")["payload"]["story"].size(), 1u);
}

TEST(Server, UnknownSocketIsRefused) {
    ServerRig rig("ws_unknown");
    EXPECT_THROW(WsClient(rig.server->port(), "nope"), beast::system_error);
}
