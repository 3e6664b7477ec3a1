#pragma once

// Reader and writer for the plain-text session log:
//
//   [3/6/2023 7:29:47 PM]Game Start
//   [3/6/2023 7:29:48 PM][1][3]Once lived in ...        game option: [slot][kind]text
//   [3/6/2023 7:30:03 PM]Chose[1][3]
//   [3/6/2023 7:49:54 PM][0.6]Once upon a time ...      non-game option: [temperature]text
//   [3/6/2023 7:50:54 PM][Chose][0.6]
//   [3/6/2023 7:50:22 PM][Add Own Text]There once ...
//   [3/6/2023 7:38:29 PM]Game End
//   [3/6/2023 7:38:29 PM]Ate[14]
//
// Texts may span several lines. Blank lines between records are kept so a
// parsed log writes back byte for byte.

#include <charconv>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "snake_story/clock.hpp"
#include "snake_story/errors.hpp"

namespace snake_story {

enum class SessionVersion { NonGame, Game };

inline std::string_view to_string(SessionVersion v) { return v == SessionVersion::Game ? "game" : "nongame"; }

inline std::optional<SessionVersion> parse_version(std::string_view s) {
    if (s == "game") return SessionVersion::Game;
    if (s == "nongame" || s == "non-game") return SessionVersion::NonGame;
    return std::nullopt;
}

// Game-version option code: which slot and which candy kind.
struct SlotKind {
    int slot = 0;
    int kind = 0;
    friend bool operator==(const SlotKind&, const SlotKind&) = default;
};

// Non-game option code. `literal` is the exact text between the brackets.
struct Temperature {
    double value = 0.0;
    std::string literal;

    static Temperature of(double v) {
        char buf[32];
        auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
        return {v, std::string(buf, end)};
    }
    friend bool operator==(const Temperature& a, const Temperature& b) { return a.literal == b.literal; }
};

using OptionCode = std::variant<SlotKind, Temperature>;

namespace log_payload {
struct GameStart {
    friend bool operator==(const GameStart&, const GameStart&) = default;
};
struct GameEnd {
    friend bool operator==(const GameEnd&, const GameEnd&) = default;
};
struct OptionShown {
    OptionCode code;
    std::string text;
    friend bool operator==(const OptionShown&, const OptionShown&) = default;
};
struct Chose {
    OptionCode code;
    friend bool operator==(const Chose&, const Chose&) = default;
};
struct AddOwnText {
    std::string text;
    friend bool operator==(const AddOwnText&, const AddOwnText&) = default;
};
struct Ate {
    int count = 0;
    friend bool operator==(const Ate&, const Ate&) = default;
};
}  // namespace log_payload

using LogPayload = std::variant<log_payload::GameStart, log_payload::GameEnd, log_payload::OptionShown,
                                log_payload::Chose, log_payload::AddOwnText, log_payload::Ate>;

struct LogEvent {
    TimePoint timestamp;
    LogPayload payload;
    // Empty lines written after this record.
    int trailing_blank_lines = 1;

    friend bool operator==(const LogEvent&, const LogEvent&) = default;
};

struct SessionTrace {
    SessionVersion version = SessionVersion::NonGame;
    std::vector<LogEvent> events;
    std::string source_path;
    int leading_blank_lines = 0;
    bool final_newline = true;
    bool crlf = false;
    // Semantic problems that do not stop parsing, e.g. a Chose naming an
    // option that was not shown in its turn.
    std::vector<std::string> warnings;
};

namespace detail {

inline std::string code_text(const OptionCode& code) {
    if (const auto* sk = std::get_if<SlotKind>(&code)) {
        return "[" + std::to_string(sk->slot) + "][" + std::to_string(sk->kind) + "]";
    }
    return "[" + std::get<Temperature>(code).literal + "]";
}

inline std::string payload_text(const LogPayload& p) {
    using namespace log_payload;
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, GameStart>) {
                return "Game Start";
            } else if constexpr (std::is_same_v<T, GameEnd>) {
                return "Game End";
            } else if constexpr (std::is_same_v<T, OptionShown>) {
                return code_text(v.code) + v.text;
            } else if constexpr (std::is_same_v<T, Chose>) {
                if (std::holds_alternative<SlotKind>(v.code)) return "Chose" + code_text(v.code);
                return "[Chose]" + code_text(v.code);
            } else if constexpr (std::is_same_v<T, AddOwnText>) {
                return "[Add Own Text]" + v.text;
            } else {
                return "Ate[" + std::to_string(v.count) + "]";
            }
        },
        p);
}

inline bool read_int_in_brackets(std::string_view& s, int& out) {
    if (!s.starts_with('[')) return false;
    auto close = s.find(']');
    if (close == std::string_view::npos || close == 1) return false;
    auto digits = s.substr(1, close - 1);
    for (char c : digits) {
        if (c < '0' || c > '9') return false;
    }
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), out);
    if (ec != std::errc{}) return false;
    s.remove_prefix(close + 1);
    return true;
}

inline bool read_decimal_in_brackets(std::string_view& s, Temperature& out) {
    if (!s.starts_with('[')) return false;
    auto close = s.find(']');
    if (close == std::string_view::npos || close == 1) return false;
    auto lit = s.substr(1, close - 1);
    bool dot = false;
    for (char c : lit) {
        if (c == '.' && !dot) {
            dot = true;
        } else if (c < '0' || c > '9') {
            return false;
        }
    }
    if (lit.front() == '.' || lit.back() == '.') return false;
    double v = 0;
    auto [ptr, ec] = std::from_chars(lit.data(), lit.data() + lit.size(), v);
    if (ec != std::errc{}) return false;
    out = {v, std::string(lit)};
    s.remove_prefix(close + 1);
    return true;
}

// Splits "[timestamp]rest" and returns the timestamp, or nullopt when the line
// does not open a record.
inline std::optional<TimePoint> record_timestamp(std::string_view line, std::string_view& rest) {
    if (!line.starts_with('[')) return std::nullopt;
    auto close = line.find(']');
    if (close == std::string_view::npos) return std::nullopt;
    auto ts = parse_log_timestamp(line.substr(1, close - 1));
    if (ts) rest = line.substr(close + 1);
    return ts;
}

// Parses the first-line payload. `has_text` tells whether the payload may
// continue on following lines.
inline std::optional<LogPayload> parse_payload(std::string_view s, bool& has_text) {
    using namespace log_payload;
    has_text = false;
    if (s == "Game Start") return GameStart{};
    if (s == "Game End") return GameEnd{};
    std::string_view t = s;
    int a = 0, b = 0;
    if (t.starts_with("Ate")) {
        t.remove_prefix(3);
        if (read_int_in_brackets(t, a) && t.empty()) return Ate{a};
        return std::nullopt;
    }
    if (t.starts_with("Chose")) {
        t.remove_prefix(5);
        if (read_int_in_brackets(t, a) && read_int_in_brackets(t, b) && t.empty()) return Chose{SlotKind{a, b}};
        return std::nullopt;
    }
    if (t.starts_with("[Chose]")) {
        t.remove_prefix(7);
        Temperature temp;
        if (read_decimal_in_brackets(t, temp) && t.empty()) return Chose{std::move(temp)};
        return std::nullopt;
    }
    if (t.starts_with("[Add Own Text]")) {
        has_text = true;
        return AddOwnText{std::string(t.substr(14))};
    }
    t = s;
    if (read_int_in_brackets(t, a)) {
        if (read_int_in_brackets(t, b)) {
            has_text = true;
            return OptionShown{SlotKind{a, b}, std::string(t)};
        }
    }
    t = s;
    Temperature temp;
    if (read_decimal_in_brackets(t, temp)) {
        has_text = true;
        return OptionShown{std::move(temp), std::string(t)};
    }
    return std::nullopt;
}

// 1 = game-coded, 2 = temperature-coded, 0 = neutral.
inline int coding_of(const LogPayload& p) {
    using namespace log_payload;
    if (const auto* o = std::get_if<OptionShown>(&p)) return std::holds_alternative<SlotKind>(o->code) ? 1 : 2;
    if (const auto* c = std::get_if<Chose>(&p)) return std::holds_alternative<SlotKind>(c->code) ? 1 : 2;
    if (std::holds_alternative<Ate>(p)) return 1;
    if (std::holds_alternative<AddOwnText>(p)) return 2;
    return 0;
}

inline void check_choices(SessionTrace& trace) {
    using namespace log_payload;
    std::vector<OptionCode> shown;
    int turn = 1;
    for (const auto& e : trace.events) {
        if (const auto* o = std::get_if<OptionShown>(&e.payload)) {
            shown.push_back(o->code);
        } else if (const auto* c = std::get_if<Chose>(&e.payload)) {
            if (std::find(shown.begin(), shown.end(), c->code) == shown.end()) {
                trace.warnings.push_back("turn " + std::to_string(turn) + ": Chose" + code_text(c->code) +
                                         " refers to an option not shown this turn");
            }
            shown.clear();
            ++turn;
        } else if (std::holds_alternative<AddOwnText>(e.payload)) {
            shown.clear();
            ++turn;
        }
    }
}

}  // namespace detail

inline std::string write_event(const LogEvent& e) {
    return "[" + format_log_timestamp(e.timestamp) + "]" + detail::payload_text(e.payload);
}

inline std::string write_log(const SessionTrace& trace) {
    const std::string nl = trace.crlf ? "\r\n" : "\n";
    std::string out;
    for (int i = 0; i < trace.leading_blank_lines; ++i) out += nl;
    for (const auto& e : trace.events) {
        std::string line = write_event(e);
        if (trace.crlf) {
            for (std::size_t p = line.find('\n'); p != std::string::npos; p = line.find('\n', p + 2)) {
                line.replace(p, 1, "\r\n");
            }
        }
        out += line;
        out += nl;
        for (int i = 0; i < e.trailing_blank_lines; ++i) out += nl;
    }
    if (!trace.final_newline && out.size() >= nl.size()) out.resize(out.size() - nl.size());
    return out;
}

inline SessionTrace parse_log(std::string_view text, std::string source_path = {}) {
    using namespace log_payload;
    SessionTrace trace;
    trace.source_path = std::move(source_path);
    trace.final_newline = text.empty() || text.back() == '\n';

    std::vector<std::string_view> lines;
    for (std::size_t pos = 0; pos < text.size();) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            lines.push_back(text.substr(pos));
            break;
        }
        lines.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    trace.crlf = !lines.empty() && lines.front().ends_with('\r');
    for (auto& l : lines) {
        if (trace.crlf) {
            if (!l.ends_with('\r')) {
                // Only the final unterminated line may lack the carriage return.
                if (&l != &lines.back() || trace.final_newline) {
                    throw ParseError(static_cast<std::size_t>(&l - lines.data()) + 1, "mixed line endings");
                }
            } else {
                l.remove_suffix(1);
            }
        }
    }

    bool current_has_text = false;
    std::size_t pending_blank = 0;
    std::vector<std::size_t> record_lines;
    std::string* current_text = nullptr;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string_view line = lines[i];
        std::string_view rest;
        if (auto ts = detail::record_timestamp(line, rest)) {
            if (trace.events.empty()) {
                trace.leading_blank_lines = static_cast<int>(pending_blank);
            } else {
                trace.events.back().trailing_blank_lines = static_cast<int>(pending_blank);
            }
            pending_blank = 0;
            bool has_text = false;
            auto payload = detail::parse_payload(rest, has_text);
            if (!payload) throw ParseError(i + 1, "unknown payload: " + std::string(rest.substr(0, 40)));
            if (trace.events.empty() && !std::holds_alternative<GameStart>(*payload)) {
                throw ParseError(i + 1, "log must begin with Game Start");
            }
            trace.events.push_back({*ts, std::move(*payload), 0});
            record_lines.push_back(i + 1);
            current_has_text = has_text;
            current_text = nullptr;
            if (has_text) {
                auto& p = trace.events.back().payload;
                if (auto* o = std::get_if<OptionShown>(&p)) current_text = &o->text;
                if (auto* a = std::get_if<AddOwnText>(&p)) current_text = &a->text;
            }
            continue;
        }
        if (line.empty()) {
            ++pending_blank;
            continue;
        }
        if (trace.events.empty()) throw ParseError(i + 1, "text before the first record");
        if (!current_has_text) throw ParseError(i + 1, "unexpected text after a record without a text payload");
        // Blank lines followed by more text belong to the text itself.
        current_text->append(pending_blank + 1, '\n');
        current_text->append(line);
        pending_blank = 0;
    }
    if (trace.events.empty()) {
        trace.leading_blank_lines = static_cast<int>(pending_blank);
    } else {
        trace.events.back().trailing_blank_lines = static_cast<int>(pending_blank);
    }

    int coding = 0;
    for (const auto& e : trace.events) {
        if (std::holds_alternative<Chose>(e.payload)) {
            coding = detail::coding_of(e.payload);
            break;
        }
    }
    for (std::size_t k = 0; k < trace.events.size() && coding == 0; ++k) coding = detail::coding_of(trace.events[k].payload);
    trace.version = coding == 1 ? SessionVersion::Game : SessionVersion::NonGame;
    for (std::size_t k = 0; k < trace.events.size(); ++k) {
        const int c = detail::coding_of(trace.events[k].payload);
        if (c != 0 && c != coding) {
            throw ParseError(record_lines[k], "record mixes game and non-game codes");
        }
    }
    detail::check_choices(trace);
    return trace;
}

// True once the log carries its closing record(s).
inline bool is_complete(const SessionTrace& t) {
    if (t.events.empty()) return false;
    const auto& last = t.events.back().payload;
    return std::holds_alternative<log_payload::GameEnd>(last) || std::holds_alternative<log_payload::Ate>(last);
}

}  // namespace snake_story
