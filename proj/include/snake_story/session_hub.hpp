#pragma once

// Transport-independent core of the game service. The hub owns live
// sessions, turns client input into orchestrator calls, queues wire messages
// for whichever connection is attached and appends every log line to disk as
// it happens. The socket server in service.hpp is a thin shell around it.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "snake_story/clock.hpp"
#include "snake_story/errors.hpp"
#include "snake_story/orchestrator.hpp"
#include "snake_story/rng.hpp"
#include "snake_story/session_log.hpp"
#include "snake_story/text_provider.hpp"
#include "snake_story/wire.hpp"

namespace snake_story {

class UnknownSession : public Error {
public:
    explicit UnknownSession(const std::string& id) : Error("unknown session: " + id) {}
};

inline constexpr unsigned short kDefaultPort = 8473;

struct ServiceConfig {
    std::string bind_address = "127.0.0.1";
    unsigned short port = kDefaultPort;
    // Sessions default to the offline generator unless a request asks otherwise.
    bool offline_default = false;
    // When set, every session is offline whatever the request says.
    bool force_offline = false;
    ProviderConfig provider;
    std::filesystem::path log_dir = "logs";
    std::filesystem::path web_root;
    std::chrono::milliseconds reconnect_window{120'000};
    // A game waiting on a failed provider retries at most this often.
    std::chrono::milliseconds provider_retry_interval{5'000};
    std::chrono::milliseconds tick_period{40};
    int threads = 4;
};

using ProviderFactory = std::function<std::shared_ptr<TextProvider>(const ProviderConfig&)>;

inline ProviderFactory default_provider_factory() {
    return [](const ProviderConfig& c) { return std::make_shared<TextProvider>(c); };
}

struct CreateRequest {
    SessionVersion version = SessionVersion::Game;
    std::optional<std::uint64_t> seed;
    GameConfig config;
    std::optional<bool> offline;
};

// Overrides fields of `base` from a JSON object. Unknown keys and wrong types
// are configuration errors, and the result is validated.
inline GameConfig config_from_json(const nlohmann::json& j, GameConfig base = {}) {
    if (!j.is_object()) throw ConfigError("invalid config: expected an object");
    auto take_int = [&](const std::string& key, int& field) {
        const auto& v = j.at(key);
        if (!v.is_number_integer()) throw ConfigError("invalid config: " + key + " must be an integer");
        field = v.get<int>();
    };
    auto take_double = [&](const std::string& key, double& field) {
        const auto& v = j.at(key);
        if (!v.is_number()) throw ConfigError("invalid config: " + key + " must be a number");
        field = v.get<double>();
    };
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (key == "map_size") take_int(key, base.map_size);
        else if (key == "initial_lives") take_int(key, base.initial_lives);
        else if (key == "initial_snake_length") take_int(key, base.initial_snake_length);
        else if (key == "tick_interval_ms") take_int(key, base.tick_interval_ms);
        else if (key == "pause_seconds") take_int(key, base.pause_seconds);
        else if (key == "self_write_pause_seconds") take_int(key, base.self_write_pause_seconds);
        else if (key == "obstacles_per_turn") take_int(key, base.obstacles_per_turn);
        else if (key == "option_word_limit") take_int(key, base.option_word_limit);
        else if (key == "ending_word_limit") take_int(key, base.ending_word_limit);
        else if (key == "temperature_low") take_double(key, base.temperature_low);
        else if (key == "temperature_high") take_double(key, base.temperature_high);
        else throw ConfigError("invalid config: unknown key " + key);
    }
    validate(base);
    return base;
}

inline nlohmann::json config_to_json(const GameConfig& c) {
    return {{"map_size", c.map_size},
            {"initial_lives", c.initial_lives},
            {"initial_snake_length", c.initial_snake_length},
            {"tick_interval_ms", c.tick_interval_ms},
            {"pause_seconds", c.pause_seconds},
            {"self_write_pause_seconds", c.self_write_pause_seconds},
            {"obstacles_per_turn", c.obstacles_per_turn},
            {"option_word_limit", c.option_word_limit},
            {"ending_word_limit", c.ending_word_limit},
            {"temperature_low", c.temperature_low},
            {"temperature_high", c.temperature_high}};
}

inline CreateRequest parse_create_request(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("request body must be a JSON object");
    CreateRequest r;
    for (const auto& [key, value] : j.items()) {
        if (key == "version") {
            auto v = value.is_string() ? parse_version(value.get<std::string>()) : std::nullopt;
            if (!v) throw ConfigError("version must be \"game\" or \"nongame\"");
            r.version = *v;
        } else if (key == "seed") {
            if (!value.is_number_unsigned() && !(value.is_number_integer() && value.get<std::int64_t>() >= 0)) {
                throw ConfigError("seed must be a non-negative integer");
            }
            r.seed = value.get<std::uint64_t>();
        } else if (key == "config") {
            r.config = config_from_json(value);
        } else if (key == "offline") {
            if (!value.is_boolean()) throw ConfigError("offline must be a boolean");
            r.offline = value.get<bool>();
        } else {
            throw ConfigError("unknown field: " + key);
        }
    }
    if (!j.contains("version")) throw ConfigError("version is required");
    return r;
}

// What a connection registers: `notify` is called (possibly from any thread)
// when messages are waiting, `close` when a newer connection takes over.
struct Listener {
    std::function<void()> notify;
    std::function<void(const std::string&)> close;
};

struct Drained {
    std::vector<wire::Message> messages;
    // The session has ended and its result is among the messages.
    bool close_after = false;
};

class SessionHub {
public:
    SessionHub(ServiceConfig config, std::shared_ptr<Clock> clock, ProviderFactory factory = default_provider_factory())
        : config_(std::move(config)), clock_(std::move(clock)), factory_(std::move(factory)),
          id_seed_(std::random_device{}()) {
        std::filesystem::create_directories(config_.log_dir);
    }

    const ServiceConfig& config() const { return config_; }

    // Returns {session_id, version, seed, offline}. ConfigError means a bad
    // request; ProviderUnavailable means an online session could not get its
    // first options.
    nlohmann::json create(const nlohmann::json& body) {
        const CreateRequest req = parse_create_request(body);
        const bool offline = config_.force_offline || req.offline.value_or(config_.offline_default);
        const std::uint64_t seed = req.seed.value_or(std::random_device{}() | (std::uint64_t{std::random_device{}()} << 32));

        ProviderConfig pc = config_.provider;
        pc.offline = offline;
        pc.offline_seed = derive_seed(seed, 0x7e47);
        auto entry = std::make_shared<Entry>(std::make_shared<Orchestrator>(factory_(pc), clock_));
        const std::string id = fresh_id();
        Session s = entry->orch->start_session(req.version, req.config, seed, id);
        if (!offline && s.provider_error && !s.options) {
            throw ProviderUnavailable("text provider unreachable: " + *s.provider_error);
        }
        entry->log_path = config_.log_dir / (id + "." + std::string(to_string(req.version)) + ".log");
        entry->disconnected_at = clock_->now();
        entry->offline = offline;
        entry->session = std::move(s);
        {
            std::lock_guard lock(entry->m);
            persist(*entry);
            publish_snapshot(*entry);
        }
        {
            std::lock_guard lock(map_m_);
            sessions_[id] = entry;
        }
        return {{"session_id", id}, {"version", to_string(req.version)}, {"seed", seed}, {"offline", offline}};
    }

    nlohmann::json list() const {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& [id, e] : snapshot_entries()) {
            std::lock_guard lock(e->m);
            const Session& s = e->session;
            nlohmann::json item = {{"session_id", id},
                                   {"version", to_string(s.version)},
                                   {"status", s.status == SessionStatus::Active ? "active" : "ended"},
                                   {"created_at", format_log_timestamp(s.created_at)},
                                   {"fragments", s.story.size()},
                                   {"connected", e->listener.has_value()},
                                   {"log_file", e->log_path.filename().string()}};
            if (s.end_reason) item["end_reason"] = *s.end_reason;
            out.push_back(std::move(item));
        }
        return out;
    }

    std::vector<std::string> ids() const {
        std::vector<std::string> out;
        for (const auto& [id, e] : snapshot_entries()) out.push_back(id);
        return out;
    }

    bool contains(const std::string& id) const {
        std::lock_guard lock(map_m_);
        return sessions_.count(id) > 0;
    }

    // The log exactly as persisted so far.
    std::string log_text(const std::string& id) const {
        auto e = find(id);
        std::lock_guard lock(e->m);
        return write_log(e->session.log);
    }

    std::filesystem::path log_path(const std::string& id) const { return find(id)->log_path; }

    // Copy of the session for inspection.
    Session session(const std::string& id) const {
        auto e = find(id);
        std::lock_guard lock(e->m);
        return e->session;
    }

    // Attaches a connection, closing any previous one. Undelivered messages
    // for the old connection are dropped and a fresh snapshot is queued.
    std::uint64_t attach(const std::string& id, Listener l) {
        auto e = find(id);
        std::optional<Listener> old;
        std::uint64_t gen = 0;
        {
            std::lock_guard lock(e->m);
            old = std::move(e->listener);
            gen = ++e->generation;
            e->listener = std::move(l);
            if (e->disconnected_at && e->session.status == SessionStatus::Active) {
                // Time spent away does not count against the player.
                e->session.last_advance = clock_->now();
            }
            e->disconnected_at.reset();
            e->outbox.clear();
            publish_snapshot(*e);
            if (e->session.status == SessionStatus::Ended) publish_result(*e);
        }
        if (old && old->close) old->close("taken over by a newer connection");
        notify(*e);
        return gen;
    }

    void detach(const std::string& id, std::uint64_t gen) {
        auto e = find(id);
        std::lock_guard lock(e->m);
        if (e->generation != gen || !e->listener) return;
        e->listener.reset();
        e->disconnected_at = clock_->now();
    }

    Drained drain(const std::string& id, std::uint64_t gen) {
        auto e = find(id);
        std::lock_guard lock(e->m);
        if (e->generation != gen) return {};
        Drained d;
        d.messages = e->outbox.drain();
        d.close_after = e->result_sent;
        return d;
    }

    std::uint64_t coalesced(const std::string& id) const {
        auto e = find(id);
        std::lock_guard lock(e->m);
        return e->outbox.coalesced();
    }

    // Applies one client message. Bad input becomes an error message on the
    // socket; the connection stays open. Input from a replaced connection is
    // ignored.
    void input(const std::string& id, std::uint64_t gen, std::string_view text) {
        auto e = find(id);
        {
            std::lock_guard lock(e->m);
            if (e->generation != gen) return;
            try {
                wire::Input in = wire::parse_input(nlohmann::json::parse(text));
                apply(*e, in);
            } catch (const nlohmann::json::exception&) {
                e->outbox.push(wire::Kind::Error, wire::error("bad_input", "message is not valid JSON"));
            } catch (const Error& err) {
                e->outbox.push(wire::Kind::Error, wire::error(wire::error_code(err), err.what()));
            }
            persist(*e);
        }
        notify(*e);
    }

    // Advances one session to the clock: game ticks, provider retries and the
    // reconnect window. Skips the session if another thread holds it.
    void tick_session(const std::string& id) {
        std::shared_ptr<Entry> e;
        {
            std::lock_guard lock(map_m_);
            auto it = sessions_.find(id);
            if (it == sessions_.end()) return;
            e = it->second;
        }
        std::unique_lock lock(e->m, std::try_to_lock);
        if (!lock.owns_lock()) return;
        if (e->session.status == SessionStatus::Ended) return;
        const TimePoint now = clock_->now();
        if (e->disconnected_at) {
            if (now - *e->disconnected_at >= config_.reconnect_window) {
                e->session = e->orch->abandon(e->session, "client disconnected");
                after_change(*e, {});
                persist(*e);
            }
            return;
        }
        if (e->session.version != SessionVersion::Game) {
            if (e->session.provider_error && !e->session.options && retry_due(*e, now)) {
                e->session = e->orch->retry_generation(e->session);
                after_change(*e, {});
                persist(*e);
            }
        } else {
            const bool waiting = std::holds_alternative<phase::AwaitingTexts>(e->session.game->phase);
            if (waiting && e->session.provider_error && !retry_due(*e, now)) return;
            try {
                auto adv = e->orch->advance_game(e->session, {});
                e->session = std::move(adv.session);
                after_change(*e, adv.events);
            } catch (const Error& err) {
                e->outbox.push(wire::Kind::Error, wire::error(wire::error_code(err), err.what()));
            }
            persist(*e);
        }
        lock.unlock();
        notify(*e);
    }

    void tick() {
        for (const auto& id : ids()) tick_session(id);
    }

private:
    struct Entry {
        explicit Entry(std::shared_ptr<Orchestrator> o) : orch(std::move(o)) {}
        std::mutex m;
        std::shared_ptr<Orchestrator> orch;
        Session session;
        bool offline = false;
        wire::Outbox outbox;
        std::optional<Listener> listener;
        std::uint64_t generation = 0;
        std::optional<TimePoint> disconnected_at;
        std::optional<TimePoint> last_retry;
        std::filesystem::path log_path;
        std::size_t persisted = 0;
        std::size_t options_seen = 0;
        bool was_paused = false;
        bool result_sent = false;
    };

    std::shared_ptr<Entry> find(const std::string& id) const {
        std::lock_guard lock(map_m_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw UnknownSession(id);
        return it->second;
    }

    std::vector<std::pair<std::string, std::shared_ptr<Entry>>> snapshot_entries() const {
        std::lock_guard lock(map_m_);
        return {sessions_.begin(), sessions_.end()};
    }

    std::string fresh_id() {
        std::lock_guard lock(map_m_);
        for (;;) {
            char buf[17];
            std::snprintf(buf, sizeof buf, "%016llx",
                          static_cast<unsigned long long>(derive_seed(id_seed_, ++id_counter_)));
            std::string id(buf, 12);
            if (!sessions_.count(id)) return id;
        }
    }

    bool retry_due(Entry& e, TimePoint now) {
        if (e.last_retry && now - *e.last_retry < config_.provider_retry_interval) return false;
        e.last_retry = now;
        return true;
    }

    static void notify(Entry& e) {
        std::function<void()> n;
        {
            std::lock_guard lock(e.m);
            if (e.listener) n = e.listener->notify;
        }
        if (n) n();
    }

    // Orchestrator calls get a copy of the session so that one rejected input
    // leaves it exactly as it was.
    void apply(Entry& e, const wire::Input& in) {
        Session& s = e.session;
        if (s.status == SessionStatus::Ended) throw TerminalError("session has ended");
        if (s.provider_error && !s.options) {
            s = e.orch->retry_generation(s);
            after_change(e, {});
            if (s.provider_error) throw ProviderUnavailable("text provider unavailable: " + *s.provider_error);
        }
        if (s.version == SessionVersion::NonGame) {
            Choice c = std::visit(
                [](const auto& v) -> Choice {
                    using T = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<T, wire::input::ChooseSlot>) {
                        if (v.slot == 0) return choice::Slot0{};
                        return choice::Slot1{};
                    } else if constexpr (std::is_same_v<T, wire::input::SelfText>) {
                        return choice::SelfText{v.text};
                    } else if constexpr (std::is_same_v<T, wire::input::EndStory>) {
                        return choice::EndStory{};
                    } else {
                        throw VersionError("the non-game version has no snake to steer or pause to end");
                    }
                },
                in);
            s = e.orch->submit_choice(s, c);
            after_change(e, {});
            return;
        }
        TickInputs ti;
        if (const auto* st = std::get_if<wire::input::Steer>(&in)) ti.steer = st->direction;
        else if (const auto* t = std::get_if<wire::input::SelfText>(&in)) ti.self_text = t->text;
        else if (std::holds_alternative<wire::input::EndPause>(in)) ti.end_pause = true;
        else if (std::holds_alternative<wire::input::ChooseSlot>(in))
            throw VersionError("game sessions choose a text by eating its candy");
        else throw VersionError("game sessions end when the last life is lost");
        auto adv = e.orch->advance_game(s, ti);
        s = std::move(adv.session);
        after_change(e, adv.events);
    }

    std::size_t options_marker(const Session& s) const {
        std::size_t n = 0;
        for (const auto& ev : s.log.events) n += std::holds_alternative<log_payload::OptionShown>(ev.payload);
        return n;
    }

    void publish_snapshot(Entry& e) {
        const Session& s = e.session;
        e.outbox.push(wire::Kind::State, wire::state(s));
        if (s.options) e.outbox.push(wire::Kind::Options, wire::options(s));
        if (s.game && std::holds_alternative<phase::Paused>(s.game->phase)) {
            e.outbox.push(wire::Kind::Pause, wire::pause(*s.game));
        }
        e.options_seen = options_marker(s);
        e.was_paused = s.game && std::holds_alternative<phase::Paused>(s.game->phase);
    }

    void publish_result(Entry& e) {
        e.outbox.push(wire::Kind::Result, wire::result(e.session));
        e.result_sent = true;
    }

    void after_change(Entry& e, const std::vector<TurnEvent>& events) {
        const Session& s = e.session;
        for (const auto& ev : events) e.outbox.push(wire::Kind::Event, wire::event(ev));
        e.outbox.push(wire::Kind::State, wire::state(s));
        const std::size_t marker = options_marker(s);
        if (marker != e.options_seen && s.options) e.outbox.push(wire::Kind::Options, wire::options(s));
        e.options_seen = marker;
        const bool paused = s.game && std::holds_alternative<phase::Paused>(s.game->phase);
        if (paused && !e.was_paused) e.outbox.push(wire::Kind::Pause, wire::pause(*s.game));
        e.was_paused = paused;
        if (s.status == SessionStatus::Ended && !e.result_sent) publish_result(e);
    }

    // Appends log lines not yet on disk, laid out exactly as write_log does
    // for a trace the orchestrator built (LF, blank-line separated).
    void persist(Entry& e) {
        const auto& events = e.session.log.events;
        if (e.persisted == events.size()) return;
        std::ofstream out(e.log_path, std::ios::binary | std::ios::app);
        if (!out) throw Error("cannot write " + e.log_path.string());
        for (std::size_t i = e.persisted; i < events.size(); ++i) {
            out << write_event(events[i]) << '\n';
            for (int b = 0; b < events[i].trailing_blank_lines; ++b) out << '\n';
        }
        e.persisted = events.size();
    }

    ServiceConfig config_;
    std::shared_ptr<Clock> clock_;
    ProviderFactory factory_;
    std::uint64_t id_seed_;
    std::uint64_t id_counter_ = 0;
    mutable std::mutex map_m_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

}  // namespace snake_story
