#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "snake_story/session_log.hpp"

using namespace snake_story;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fixture(const char* name) { return read_file(std::string(SNAKE_STORY_FIXTURES) + "/" + name); }

template <typename P>
int count_of(const SessionTrace& t) {
    int n = 0;
    for (const auto& e : t.events) n += std::holds_alternative<P>(e.payload);
    return n;
}

TimePoint at(int h, int m, int s) { return from_civil({2023, 3, 6, h, m, s}); }

}  // namespace

TEST(Timestamp, FormatsWithoutPadding) {
    EXPECT_EQ(format_log_timestamp(at(19, 29, 47)), "3/6/2023 7:29:47 PM");
    EXPECT_EQ(format_log_timestamp(at(0, 0, 5)), "3/6/2023 12:00:05 AM");
    EXPECT_EQ(format_log_timestamp(at(12, 1, 0)), "3/6/2023 12:01:00 PM");
    EXPECT_EQ(format_log_timestamp(from_civil({2024, 11, 23, 9, 5, 9})), "11/23/2024 9:05:09 AM");
}

TEST(Timestamp, ParseRoundTripsAndRejectsPadding) {
    for (auto t : {at(19, 29, 47), at(0, 0, 0), at(12, 59, 59), at(11, 0, 1)}) {
        EXPECT_EQ(parse_log_timestamp(format_log_timestamp(t)), t);
    }
    EXPECT_FALSE(parse_log_timestamp("03/6/2023 7:29:47 PM"));
    EXPECT_FALSE(parse_log_timestamp("3/06/2023 7:29:47 PM"));
    EXPECT_FALSE(parse_log_timestamp("3/6/2023 07:29:47 PM"));
    EXPECT_FALSE(parse_log_timestamp("3/6/2023 7:29:47 pm"));
    EXPECT_FALSE(parse_log_timestamp("2/30/2023 7:29:47 PM"));
    EXPECT_FALSE(parse_log_timestamp("3/6/2023 13:29:47 PM"));
}

TEST(SessionLog, GameFixture) {
    const std::string text = fixture("appendix_game.log");
    SessionTrace t = parse_log(text, "appendix_game.log");
    EXPECT_EQ(t.version, SessionVersion::Game);
    EXPECT_EQ(count_of<log_payload::Chose>(t), 14);
    ASSERT_TRUE(std::holds_alternative<log_payload::Ate>(t.events.back().payload));
    EXPECT_EQ(std::get<log_payload::Ate>(t.events.back().payload).count, 14);
    EXPECT_TRUE(is_complete(t));
    EXPECT_TRUE(t.warnings.empty());
    EXPECT_EQ(write_log(t), text);
}

TEST(SessionLog, NonGameFixture) {
    const std::string text = fixture("appendix_nongame.log");
    SessionTrace t = parse_log(text, "appendix_nongame.log");
    EXPECT_EQ(t.version, SessionVersion::NonGame);
    int low = 0, high = 0;
    for (const auto& e : t.events) {
        if (const auto* c = std::get_if<log_payload::Chose>(&e.payload)) {
            const auto& tp = std::get<Temperature>(c->code);
            (tp.literal == "0.6" ? low : high)++;
            EXPECT_TRUE(tp.literal == "0.6" || tp.literal == "1.4");
        }
    }
    EXPECT_EQ(low, 3);
    EXPECT_EQ(high, 10);
    EXPECT_EQ(count_of<log_payload::AddOwnText>(t), 3);
    EXPECT_TRUE(std::holds_alternative<log_payload::GameEnd>(t.events.back().payload));
    EXPECT_EQ(write_log(t), text);
}

TEST(SessionLog, FirstEventTimestamps) {
    SessionTrace t = parse_log(fixture("appendix_game.log"));
    EXPECT_EQ(t.events.front().timestamp, at(19, 29, 47));
    EXPECT_EQ(t.events[1].timestamp, at(19, 29, 48));
    const auto& first = std::get<log_payload::OptionShown>(t.events[1].payload);
    EXPECT_EQ(std::get<SlotKind>(first.code), (SlotKind{1, 3}));
}

TEST(SessionLog, WriterFormat) {
    SessionTrace t;
    t.version = SessionVersion::Game;
    t.events = {{at(19, 0, 0), log_payload::GameStart{}, 1},
                {at(19, 0, 1), log_payload::OptionShown{SlotKind{0, 2}, "Once"}, 0},
                {at(19, 0, 1), log_payload::OptionShown{SlotKind{1, 4}, "Twice"}, 1},
                {at(19, 0, 9), log_payload::Chose{SlotKind{1, 4}}, 1},
                {at(19, 0, 10), log_payload::GameEnd{}, 0},
                {at(19, 0, 10), log_payload::Ate{1}, 0}};
    EXPECT_EQ(write_log(t),
              "[3/6/2023 7:00:00 PM]Game Start\n\n"
              "[3/6/2023 7:00:01 PM][0][2]Once\n"
              "[3/6/2023 7:00:01 PM][1][4]Twice\n\n"
              "[3/6/2023 7:00:09 PM]Chose[1][4]\n\n"
              "[3/6/2023 7:00:10 PM]Game End\n"
              "[3/6/2023 7:00:10 PM]Ate[1]\n");
}

TEST(SessionLog, NonGameCodes) {
    SessionTrace t;
    t.events = {{at(8, 0, 0), log_payload::GameStart{}, 0},
                {at(8, 0, 1), log_payload::OptionShown{Temperature::of(0.6), "a"}, 0},
                {at(8, 0, 1), log_payload::OptionShown{Temperature::of(1.4), "b"}, 0},
                {at(8, 0, 3), log_payload::Chose{Temperature::of(1.4)}, 0},
                {at(8, 0, 4), log_payload::AddOwnText{"mine"}, 0}};
    const std::string text = write_log(t);
    EXPECT_NE(text.find("[0.6]a\n"), std::string::npos);
    EXPECT_NE(text.find("][Chose][1.4]\n"), std::string::npos);
    EXPECT_NE(text.find("][Add Own Text]mine\n"), std::string::npos);
    EXPECT_EQ(write_log(parse_log(text)), text);
}

TEST(SessionLog, MultilineTextsKeepBlankLines) {
    const std::string text =
        "[3/6/2023 7:00:00 PM]Game Start\n\n"
        "[3/6/2023 7:00:01 PM][0.6]first line\n\n\nthird paragraph\n"
        "[3/6/2023 7:00:01 PM][1.4]\nstarts on the next line\n\n\n"
        "[3/6/2023 7:00:05 PM][Chose][0.6]\n";
    SessionTrace t = parse_log(text);
    EXPECT_EQ(std::get<log_payload::OptionShown>(t.events[1].payload).text, "first line\n\n\nthird paragraph");
    EXPECT_EQ(std::get<log_payload::OptionShown>(t.events[2].payload).text, "\nstarts on the next line");
    EXPECT_EQ(t.events[2].trailing_blank_lines, 2);
    EXPECT_EQ(write_log(t), text);
}

TEST(SessionLog, CrlfAndMissingFinalNewline) {
    const std::string crlf = "[3/6/2023 7:00:00 PM]Game Start\r\n\r\n[3/6/2023 7:00:01 PM][0.6]a\r\nb\r\n";
    SessionTrace t = parse_log(crlf);
    EXPECT_TRUE(t.crlf);
    EXPECT_EQ(std::get<log_payload::OptionShown>(t.events[1].payload).text, "a\nb");
    EXPECT_EQ(write_log(t), crlf);

    const std::string bare = "[3/6/2023 7:00:00 PM]Game Start\n[3/6/2023 7:00:01 PM]Game End";
    SessionTrace u = parse_log(bare);
    EXPECT_FALSE(u.final_newline);
    EXPECT_EQ(write_log(u), bare);
}

TEST(SessionLog, ErrorsCarryLineNumbers) {
    auto line_of = [](const std::string& text) -> std::size_t {
        try {
            (void)parse_log(text);
        } catch (const ParseError& e) {
            return e.line();
        }
        return 0;
    };
    EXPECT_EQ(line_of("[3/6/2023 7:00:00 PM]Chose[0][1]\n"), 1u);
    EXPECT_EQ(line_of("stray text\n[3/6/2023 7:00:00 PM]Game Start\n"), 1u);
    EXPECT_EQ(line_of("[3/6/2023 7:00:00 PM]Game Start\n\n[3/6/2023 7:00:01 PM]Bogus\n"), 3u);
    EXPECT_EQ(line_of("[3/6/2023 7:00:00 PM]Game Start\ncontinuation\n"), 2u);
    EXPECT_EQ(line_of("[3/6/2023 7:00:00 PM]Game Start\n[3/6/2023 7:00:01 PM][0][1]x\n"
                      "[3/6/2023 7:00:02 PM][0.6]y\n"),
              3u);
    EXPECT_EQ(line_of("[03/6/2023 7:00:00 PM]Game Start\n"), 1u);
}

TEST(SessionLog, ChoiceOfUnshownOptionWarns) {
    SessionTrace t = parse_log(
        "[3/6/2023 7:00:00 PM]Game Start\n"
        "[3/6/2023 7:00:01 PM][0][1]x\n"
        "[3/6/2023 7:00:02 PM]Chose[1][3]\n");
    ASSERT_EQ(t.warnings.size(), 1u);
    EXPECT_NE(t.warnings[0].find("turn 1"), std::string::npos);
}

TEST(SessionLog, VersionNames) {
    EXPECT_EQ(to_string(SessionVersion::Game), "game");
    EXPECT_EQ(parse_version("nongame"), SessionVersion::NonGame);
    EXPECT_FALSE(parse_version("arcade"));
}

// Random traces with multi-line texts, varied spacing and both codings.
TEST(SessionLog, RandomTracesRoundTrip) {
    std::mt19937_64 rng(99);
    auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
    auto random_text = [&] {
        static const char* words[] = {"snake", "the", "moon,", "ate", "quietly.", "Slither", "\"yes\"", "it's"};
        std::string s;
        const int lines = 1 + pick(3);
        for (int l = 0; l < lines; ++l) {
            if (l > 0) s.append(static_cast<std::size_t>(1 + pick(3)), '\n');
            const int n = 1 + pick(8);
            for (int w = 0; w < n; ++w) {
                if (w > 0 || pick(4) == 0) s += ' ';
                s += words[pick(8)];
            }
        }
        return s;
    };
    for (int round = 0; round < 300; ++round) {
        SessionTrace t;
        t.version = pick(2) ? SessionVersion::Game : SessionVersion::NonGame;
        t.crlf = pick(5) == 0;
        t.final_newline = pick(6) != 0;
        t.leading_blank_lines = pick(3) == 0 ? 1 : 0;
        TimePoint now = from_civil({2023, 1 + static_cast<unsigned>(pick(12)), 1 + static_cast<unsigned>(pick(28)),
                                    pick(24), pick(60), pick(60)});
        auto push = [&](LogPayload p) {
            now += std::chrono::seconds(pick(90));
            t.events.push_back({now, std::move(p), pick(3)});
        };
        push(log_payload::GameStart{});
        const int turns = pick(6);
        for (int i = 0; i < turns; ++i) {
            if (t.version == SessionVersion::Game) {
                push(log_payload::OptionShown{SlotKind{0, pick(3)}, random_text()});
                push(log_payload::OptionShown{SlotKind{1, pick(2) ? 0 : 3 + pick(2)}, random_text()});
                push(log_payload::Chose{std::get<log_payload::OptionShown>(t.events[t.events.size() - 1 - pick(2)].payload).code});
            } else {
                push(log_payload::OptionShown{Temperature::of(0.6), random_text()});
                push(log_payload::OptionShown{Temperature::of(1.4), random_text()});
                if (pick(4) == 0) {
                    push(log_payload::AddOwnText{random_text()});
                } else {
                    push(log_payload::Chose{Temperature::of(pick(2) ? 0.6 : 1.4)});
                }
            }
        }
        push(log_payload::GameEnd{});
        if (t.version == SessionVersion::Game) push(log_payload::Ate{turns});
        if (!t.final_newline) t.events.back().trailing_blank_lines = 0;

        const std::string text = write_log(t);
        SessionTrace back = parse_log(text);
        ASSERT_EQ(write_log(back), text) << "round " << round;
        ASSERT_EQ(back.events, t.events) << "round " << round;
    }
}
