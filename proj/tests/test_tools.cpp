#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "snake_story/report.hpp"
#include "snake_story/script.hpp"

using namespace snake_story;
using nlohmann::json;

namespace {

std::string fixture(const char* name) {
    std::ifstream in(std::string(SNAKE_STORY_FIXTURES) + "/" + name, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<SessionTrace> appendix() {
    return {parse_log(fixture("appendix_game.log"), "logs/appendix_game.log"),
            parse_log(fixture("appendix_nongame.log"), "logs/appendix_nongame.log")};
}

}  // namespace

// --- report ---------------------------------------------------------------

TEST(Report, ParticipantNames) {
    EXPECT_EQ(participant_of("logs/p07.game.log"), "p07");
    EXPECT_EQ(participant_of("p07_nongame.log"), "p07");
    EXPECT_EQ(participant_of("/x/p07-non-game.log"), "p07");
    EXPECT_EQ(participant_of("ab12cd.game.log"), "ab12cd");
    EXPECT_EQ(participant_of("endgame.log"), "endgame");
    EXPECT_EQ(participant_of("game.log"), "game");
}

TEST(Report, UngroupedMixedVersionsAreRejected) {
    EXPECT_THROW((void)build_report(appendix(), false), UsageError);
}

TEST(Report, GroupedByVersion) {
    const json r = build_report(appendix(), true);
    EXPECT_EQ(r["schema"], "report_v1");
    EXPECT_EQ(r["stopwords"], "stopwords_v1");
    ASSERT_EQ(r["sessions"].size(), 2u);
    ASSERT_EQ(r["groups"].size(), 2u);

    const json& game = r["sessions"][0];
    EXPECT_EQ(game["version"], "game");
    EXPECT_EQ(game["participant"], "appendix");
    EXPECT_EQ(game["total_choices"], 14);
    EXPECT_GT(game["story_word_count"].get<int>(), 0);
    EXPECT_TRUE(game.contains("candies_selected"));

    const json& plain = r["sessions"][1];
    EXPECT_EQ(plain["low_temp_choices"], 3);
    EXPECT_EQ(plain["high_temp_choices"], 10);
    EXPECT_EQ(plain["self_writes"], 3);
    EXPECT_TRUE(plain["mtld"].is_number());
    EXPECT_TRUE(plain["sentence_overlap"].is_number());
    EXPECT_FALSE(plain.contains("candies_selected"));

    // Groups follow version order: nongame first.
    EXPECT_EQ(r["groups"][0]["group"], "nongame");
    EXPECT_EQ(r["groups"][1]["group"], "game");
    EXPECT_TRUE(r["groups"][1].contains("candy_selection_rates"));
    EXPECT_DOUBLE_EQ(r["groups"][0]["low_temp_choices"]["mean"].get<double>(), 3.0);

    // One participant played both versions, so each metric has one pair.
    ASSERT_FALSE(r["comparisons"].empty());
    for (const auto& c : r["comparisons"]) {
        EXPECT_EQ(c["pairs"], 1);
        if (!c.contains("error")) EXPECT_DOUBLE_EQ(c["p_value"].get<double>(), 1.0);
    }
}

TEST(Report, SingleVersionWithoutGrouping) {
    const json r = build_report({appendix()[1]}, false);
    ASSERT_EQ(r["groups"].size(), 1u);
    EXPECT_EQ(r["groups"][0]["group"], "all");
    EXPECT_FALSE(r.contains("comparisons"));
}

TEST(Report, StoryMetricsMatchTheReplayedText) {
    const auto traces = appendix();
    const SessionReport s = analyze_session(traces[1]);
    const std::string story = replay(traces[1]).story_text();
    EXPECT_EQ(s.story_word_count, story_word_count(story));
    EXPECT_DOUBLE_EQ(s.mtld->value, mtld(word_tokens(story)).value);
    EXPECT_DOUBLE_EQ(s.overlap.value, sentence_overlap(story).value);
}

TEST(Report, CsvAndTable) {
    const json r = build_report(appendix(), true);
    const std::string csv = report_csv(r);
    std::istringstream lines(csv);
    std::string header, row;
    std::getline(lines, header);
    EXPECT_TRUE(header.starts_with("source,participant,version,"));
    int rows = 0;
    while (std::getline(lines, row)) ++rows;
    EXPECT_EQ(rows, 2);
    EXPECT_NE(csv.find("logs/appendix_nongame.log,appendix,nongame,16,3,10,3,"), std::string::npos);

    const std::string table = report_table(r);
    EXPECT_NE(table.find("appendix_game.log"), std::string::npos);
    EXPECT_NE(table.find("[game]"), std::string::npos);
    EXPECT_NE(table.find("Wilcoxon"), std::string::npos);
}

TEST(Report, CsvQuotesAwkwardCells) {
    json r = {{"sessions", json::array({json::object()})}};
    for (const auto& col : report_detail::session_columns()) r["sessions"][0][col] = 1;
    r["sessions"][0]["source"] = "a,\"b\".log";
    EXPECT_NE(report_csv(r).find("\"a,\"\"b\"\".log\""), std::string::npos);
}

// --- scripted play ----------------------------------------------------------

TEST(Script, NonGameStory) {
    const auto run = run_script(SessionVersion::NonGame, GameConfig{}, 3,
                                "# comment\nwait 5000\nchoose 0\n\nwait 12000\nchoose 1\nwrite The snake smiled.\nend\n");
    const Session& s = run.session;
    EXPECT_EQ(s.status, SessionStatus::Ended);
    ASSERT_EQ(s.story.size(), 3u);
    EXPECT_EQ(s.story[2].text, "The snake smiled.");
    EXPECT_TRUE(finalize(s).full_story.ends_with(kEndingSuffix));
    const auto u = session_usage(s.log);
    EXPECT_EQ(u.low_temp_choices, 1);
    EXPECT_EQ(u.high_temp_choices, 1);
    EXPECT_EQ(u.self_writes, 1);
    EXPECT_DOUBLE_EQ(u.mean_decision_seconds, (5.0 + 12.0 + 0.0) / 3.0);
}

TEST(Script, GameAutoPlayEatsCandies) {
    const auto run = run_script(SessionVersion::Game, GameConfig{}, 9, "end_pause\nauto 400\nend\n");
    const Session& s = run.session;
    EXPECT_EQ(s.status, SessionStatus::Ended);
    const StoryResult r = finalize(s);
    ASSERT_TRUE(r.snake_length);
    EXPECT_GT(total(*r.candies_eaten), 0);
    EXPECT_EQ(*r.snake_length, 3 + total(*r.candies_eaten));
    EXPECT_EQ(write_log(parse_log(write_log(s.log))), write_log(s.log));
}

TEST(Script, SameScriptSameLog) {
    const char* script = "end_pause\nsteer left\ntick 3\nauto 250\nwait 900\nauto 250\n";
    const auto a = run_script(SessionVersion::Game, GameConfig{}, 4, script);
    const auto b = run_script(SessionVersion::Game, GameConfig{}, 4, script);
    EXPECT_EQ(write_log(a.session.log), write_log(b.session.log));
    const auto c = run_script(SessionVersion::Game, GameConfig{}, 5, script);
    EXPECT_NE(write_log(a.session.log), write_log(c.session.log));
}

TEST(Script, UnfinishedSessionsAreClosed) {
    // An empty non-game story cannot be ended, so it is abandoned.
    const auto empty = run_script(SessionVersion::NonGame, GameConfig{}, 1, "wait 10\n");
    EXPECT_EQ(empty.session.status, SessionStatus::Ended);
    EXPECT_TRUE(empty.session.story.empty());
    const auto game = run_script(SessionVersion::Game, GameConfig{}, 1, "tick 2\n");
    EXPECT_EQ(game.session.end_reason, "script ended");
}

TEST(Script, CommandsAfterTheEndAreCounted) {
    const auto run = run_script(SessionVersion::NonGame, GameConfig{}, 1, "choose 0\nend\nchoose 1\nwait 5\n");
    EXPECT_EQ(run.ignored, 2);
}

TEST(Script, ErrorsNameTheLine) {
    auto message = [](SessionVersion v, const char* script) {
        try {
            (void)run_script(v, GameConfig{}, 1, script);
        } catch (const InputError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    EXPECT_EQ(message(SessionVersion::NonGame, "choose 0\nfly\n"), "line 2: unknown command 'fly'");
    EXPECT_EQ(message(SessionVersion::NonGame, "choose 2\n"), "line 1: choose takes 0 or 1");
    EXPECT_EQ(message(SessionVersion::NonGame, "steer up\n"), "line 1: 'steer' only applies to game sessions");
    EXPECT_EQ(message(SessionVersion::Game, "choose 0\n"), "line 1: game sessions choose by eating a candy");
    EXPECT_EQ(message(SessionVersion::Game, "tick -3\n"), "line 1: expected a non-negative count, got '-3'");
    EXPECT_EQ(message(SessionVersion::Game, "steer north\n"), "line 1: unknown direction 'north'");
    // Engine errors keep their message and gain the line number.
    EXPECT_EQ(message(SessionVersion::Game, "steer up\n"), "line 1: not moving");
    EXPECT_EQ(message(SessionVersion::Game, "write hello\n"), "line 1: self-writing is not offered this turn");
}
