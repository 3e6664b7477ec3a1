#pragma once

// Batch analysis of session logs: the report_v1 JSON document and its CSV
// and table renderings.

#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "snake_story/analysis.hpp"
#include "snake_story/orchestrator.hpp"

namespace snake_story {

inline constexpr std::string_view kReportSchema = "report_v1";

struct SessionReport {
    SessionUsage usage;
    std::string participant;
    std::size_t story_word_count = 0;
    std::optional<MtldResult> mtld;  // empty when the story has no words
    OverlapResult overlap;
    std::vector<std::string> warnings;
};

inline std::string_view to_string(MtldFlag f) {
    switch (f) {
        case MtldFlag::None: return "none";
        case MtldFlag::ShortText: return "short_text";
        case MtldFlag::NoFactors: return "no_factors";
    }
    return "?";
}

// "p07.game.log", "p07_nongame.log" and "p07-game" all name participant
// "p07". A stem without a version token is its own participant.
inline std::string participant_of(std::string_view source) {
    std::string stem = std::filesystem::path(std::string(source)).filename().string();
    if (stem.ends_with(".log")) stem.resize(stem.size() - 4);
    for (std::string_view tag : {"nongame", "non-game", "game"}) {
        if (stem.size() > tag.size() && stem.ends_with(tag)) {
            const char sep = stem[stem.size() - tag.size() - 1];
            if (sep == '.' || sep == '_' || sep == '-') return stem.substr(0, stem.size() - tag.size() - 1);
        }
    }
    return stem;
}

// The story is rebuilt from the log, so the generated ending (never logged)
// is not part of the measured text.
inline SessionReport analyze_session(const SessionTrace& t) {
    SessionReport r;
    r.usage = session_usage(t);
    r.participant = participant_of(t.source_path);
    r.warnings = t.warnings;
    const std::string story = replay(t).story_text();
    r.story_word_count = story_word_count(story);
    const auto tokens = word_tokens(story);
    if (!tokens.empty()) r.mtld = mtld(tokens);
    r.overlap = sentence_overlap(story);
    return r;
}

namespace report_detail {
using nlohmann::json;

inline json counts(const KindCounts& c) {
    json out = json::object();
    for (CandyKind k : kAllCandyKinds) out[std::string(to_string(k))] = c[static_cast<std::size_t>(kind_id(k))];
    return out;
}

inline json mean_sd_json(const MeanSd& m) { return {{"mean", m.mean}, {"sd", m.sd}}; }

inline json stats_of(const std::vector<double>& xs) {
    json out = mean_sd_json(mean_sd(xs));
    out["n"] = xs.size();
    return out;
}

inline json session_json(const SessionReport& r) {
    const auto& u = r.usage;
    json j = {{"source", u.source},
              {"participant", r.participant},
              {"version", to_string(u.version)},
              {"total_choices", u.total_choices},
              {"low_temp_choices", u.low_temp_choices},
              {"high_temp_choices", u.high_temp_choices},
              {"self_writes", u.self_writes},
              {"mean_decision_seconds", u.mean_decision_seconds},
              {"story_word_count", r.story_word_count},
              {"mtld", r.mtld ? json(r.mtld->value) : json(nullptr)},
              {"mtld_flag", r.mtld ? to_string(r.mtld->flag) : "empty"},
              {"sentence_overlap", r.overlap.defined ? json(r.overlap.value) : json(nullptr)},
              {"sentences", r.overlap.sentences},
              {"warnings", r.warnings}};
    if (u.version == SessionVersion::Game) {
        j["candies_generated"] = counts(u.candies_generated);
        j["candies_selected"] = counts(u.candies_selected);
    }
    return j;
}

inline json group_json(std::string_view name, const UsageStats& stats, const std::vector<const SessionReport*>& rs) {
    std::vector<double> words, diversity, overlap;
    for (const auto* r : rs) {
        words.push_back(static_cast<double>(r->story_word_count));
        if (r->mtld) diversity.push_back(r->mtld->value);
        if (r->overlap.defined) overlap.push_back(r->overlap.value);
    }
    json g = {{"group", name},
              {"sessions", rs.size()},
              {"total_choices", mean_sd_json(stats.total_choices)},
              {"low_temp_choices", mean_sd_json(stats.low_temp_choices)},
              {"high_temp_choices", mean_sd_json(stats.high_temp_choices)},
              {"self_writes", mean_sd_json(stats.self_writes)},
              {"mean_decision_seconds", mean_sd_json(stats.mean_decision_seconds)},
              {"story_word_count", stats_of(words)},
              {"mtld", stats_of(diversity)},
              {"sentence_overlap", stats_of(overlap)}};
    if (!rs.empty() && rs.front()->usage.version == SessionVersion::Game) {
        g["candies_generated"] = counts(stats.candies_generated);
        g["candies_selected"] = counts(stats.candies_selected);
        json rates = json::object();
        for (CandyKind k : kAllCandyKinds) {
            const auto i = static_cast<std::size_t>(kind_id(k));
            rates[std::string(to_string(k))] =
                stats.candies_generated[i] ? json(static_cast<double>(stats.candies_selected[i]) /
                                                  stats.candies_generated[i])
                                           : json(nullptr);
        }
        g["candy_selection_rates"] = rates;
    }
    return g;
}

using Metric = std::optional<double> (*)(const SessionReport&);

inline const std::vector<std::pair<std::string, Metric>>& paired_metrics() {
    static const std::vector<std::pair<std::string, Metric>> m = {
        {"low_temp_choices", [](const SessionReport& r) -> std::optional<double> { return r.usage.low_temp_choices; }},
        {"high_temp_choices", [](const SessionReport& r) -> std::optional<double> { return r.usage.high_temp_choices; }},
        {"self_writes", [](const SessionReport& r) -> std::optional<double> { return r.usage.self_writes; }},
        {"total_choices", [](const SessionReport& r) -> std::optional<double> { return r.usage.total_choices; }},
        {"story_word_count",
         [](const SessionReport& r) -> std::optional<double> { return static_cast<double>(r.story_word_count); }},
        {"mtld",
         [](const SessionReport& r) -> std::optional<double> {
             return r.mtld ? std::optional(r.mtld->value) : std::nullopt;
         }},
        {"sentence_overlap",
         [](const SessionReport& r) -> std::optional<double> {
             return r.overlap.defined ? std::optional(r.overlap.value) : std::nullopt;
         }},
    };
    return m;
}

// Participants with exactly one session of each version form a pair;
// differences are non-game minus game.
inline json comparisons(const std::vector<SessionReport>& rs) {
    std::map<std::string, std::map<SessionVersion, std::vector<const SessionReport*>>> by_participant;
    for (const auto& r : rs) by_participant[r.participant][r.usage.version].push_back(&r);
    json out = json::array();
    for (const auto& [name, metric] : paired_metrics()) {
        std::vector<PairedSample> pairs;
        for (const auto& [who, versions] : by_participant) {
            auto ng = versions.find(SessionVersion::NonGame);
            auto g = versions.find(SessionVersion::Game);
            if (ng == versions.end() || g == versions.end() || ng->second.size() != 1 || g->second.size() != 1) continue;
            auto a = metric(*ng->second.front());
            auto b = metric(*g->second.front());
            if (a && b) pairs.push_back({who, *a, *b});
        }
        if (pairs.empty()) continue;
        json c = {{"metric", name}, {"pairs", pairs.size()}, {"a", "nongame"}, {"b", "game"}};
        try {
            const auto w = wilcoxon_signed_rank(pairs, WilcoxonMethod::Auto);
            c["w"] = w.w_statistic;
            c["w_plus"] = w.w_plus;
            c["w_minus"] = w.w_minus;
            c["n_effective"] = w.n_effective;
            c["p_value"] = w.p_value;
            c["method"] = to_string(w.method);
        } catch (const AllZeroError&) {
            c["error"] = "all differences are zero";
        }
        out.push_back(std::move(c));
    }
    return out;
}
}  // namespace report_detail

// Without grouping every trace must share one version (UsageError otherwise).
inline nlohmann::json build_report(const std::vector<SessionTrace>& traces, bool group_by_version) {
    using nlohmann::json;
    std::vector<SessionReport> rs;
    rs.reserve(traces.size());
    for (const auto& t : traces) rs.push_back(analyze_session(t));

    json report = {{"schema", kReportSchema},
                   {"stopwords", kStopwordsVersion},
                   {"mtld_threshold", kMtldThreshold},
                   {"sessions", json::array()},
                   {"groups", json::array()}};
    for (const auto& r : rs) report["sessions"].push_back(report_detail::session_json(r));

    if (group_by_version) {
        for (const auto& [version, stats] : usage_stats_by_version(traces)) {
            std::vector<const SessionReport*> members;
            for (const auto& r : rs) {
                if (r.usage.version == version) members.push_back(&r);
            }
            report["groups"].push_back(report_detail::group_json(to_string(version), stats, members));
        }
        report["comparisons"] = report_detail::comparisons(rs);
    } else {
        std::vector<const SessionReport*> members;
        for (const auto& r : rs) members.push_back(&r);
        report["groups"].push_back(report_detail::group_json("all", usage_stats(traces), members));
    }
    return report;
}

namespace report_detail {
inline std::string cell(const json& v) {
    if (v.is_null()) return "";
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) {
        std::ostringstream os;
        os << std::setprecision(6) << v.get<double>();
        return os.str();
    }
    return v.dump();
}

inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline const std::vector<std::string>& session_columns() {
    static const std::vector<std::string> cols = {
        "source",      "participant",       "version",          "total_choices", "low_temp_choices",
        "high_temp_choices", "self_writes", "mean_decision_seconds", "story_word_count", "mtld",
        "mtld_flag",   "sentence_overlap",  "sentences"};
    return cols;
}
}  // namespace report_detail

// One row per session.
inline std::string report_csv(const nlohmann::json& report) {
    using namespace report_detail;
    std::string out;
    const auto& cols = session_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
    out += '\n';
    for (const auto& s : report.at("sessions")) {
        for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + csv_quote(cell(s.at(cols[i])));
        out += '\n';
    }
    return out;
}

inline std::string report_table(const nlohmann::json& report) {
    using namespace report_detail;
    auto fixed3 = [](const json& v) {
        if (!v.is_number()) return std::string("-");
        std::ostringstream os;
        os << std::fixed << std::setprecision(3) << v.get<double>();
        return os.str();
    };
    std::ostringstream os;
    os << std::left;
    os << std::setw(28) << "session" << std::setw(9) << "version" << std::right << std::setw(6) << "low"
       << std::setw(6) << "high" << std::setw(6) << "self" << std::setw(8) << "words" << std::setw(9) << "mtld"
       << std::setw(9) << "overlap" << '\n'
       << std::left;
    for (const auto& s : report.at("sessions")) {
        std::string name = std::filesystem::path(s.at("source").get<std::string>()).filename().string();
        if (name.size() > 27) name = name.substr(0, 24) + "...";
        os << std::setw(28) << name << std::setw(9) << s.at("version").get<std::string>() << std::right
           << std::setw(6) << cell(s.at("low_temp_choices")) << std::setw(6) << cell(s.at("high_temp_choices"))
           << std::setw(6) << cell(s.at("self_writes")) << std::setw(8) << cell(s.at("story_word_count"))
           << std::setw(9) << fixed3(s.at("mtld")) << std::setw(9) << fixed3(s.at("sentence_overlap")) << '\n'
           << std::left;
    }
    for (const auto& g : report.at("groups")) {
        os << "\n[" << g.at("group").get<std::string>() << "] sessions: " << g.at("sessions") << '\n';
        for (const char* k : {"low_temp_choices", "high_temp_choices", "self_writes", "story_word_count", "mtld",
                              "sentence_overlap"}) {
            os << "  " << std::setw(22) << k << " mean " << cell(g.at(k).at("mean")) << "  sd "
               << cell(g.at(k).at("sd")) << '\n';
        }
        if (g.contains("candy_selection_rates")) {
            os << "  selected/generated:";
            for (const auto& [kind, n] : g.at("candies_generated").items()) {
                os << ' ' << kind << ' ' << g.at("candies_selected").at(kind) << '/' << n;
            }
            os << '\n';
        }
    }
    if (report.contains("comparisons") && !report.at("comparisons").empty()) {
        os << "\nnongame vs game (Wilcoxon signed-rank)\n";
        for (const auto& c : report.at("comparisons")) {
            os << "  " << std::setw(22) << c.at("metric").get<std::string>() << " pairs " << c.at("pairs");
            if (c.contains("error")) os << "  " << c.at("error").get<std::string>() << '\n';
            else os << "  W " << cell(c.at("w")) << "  p " << cell(c.at("p_value")) << '\n';
        }
    }
    return os.str();
}

}  // namespace snake_story
