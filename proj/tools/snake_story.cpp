// snake-story: analyze logs, simulate policies, serve the game, play or
// replay sessions offline.

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "snake_story/policy_sim.hpp"
#include "snake_story/report.hpp"
#include "snake_story/script.hpp"
#include "snake_story/service.hpp"

#ifndef SNAKE_STORY_WEB_ROOT
#define SNAKE_STORY_WEB_ROOT "web"
#endif

using namespace snake_story;
using nlohmann::json;

namespace {

std::string read_text(const std::string& path) {
    if (path == "-") {
        std::ostringstream os;
        os << std::cin.rdbuf();
        return os.str();
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path);
    out << text;
}

GameConfig load_config(const std::string& path) {
    if (path.empty()) return {};
    try {
        return config_from_json(json::parse(read_text(path)));
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

json counts_json(const KindCounts& c) {
    json out = json::object();
    for (CandyKind k : kAllCandyKinds) out[std::string(to_string(k))] = c[static_cast<std::size_t>(kind_id(k))];
    return out;
}

json sim_json(const SimResult& r, bool per_session) {
    json rates = json::object();
    for (CandyKind k : kAllCandyKinds) {
        const auto& v = r.candy_selection_rates[static_cast<std::size_t>(kind_id(k))];
        rates[std::string(to_string(k))] = v ? json(*v) : json(nullptr);
    }
    json j = {{"policy", r.policy},
              {"seed", r.seed},
              {"sessions", r.sessions},
              {"turns_played", r.turns_played},
              {"pool1_selections", r.pool1_selections},
              {"pool2_selections", r.pool2_selections},
              {"pool1_share", r.pool1_share},
              {"candy_selection_rates", rates},
              {"generated", counts_json(r.generated)},
              {"selected", counts_json(r.selected)},
              {"lifespan_turns", r.lifespan_turns},
              {"fallbacks", r.fallbacks}};
    if (per_session) {
        json list = json::array();
        for (const auto& s : r.per_session) {
            list.push_back({{"seed", s.seed},
                            {"turns_played", s.turns_played},
                            {"pool1_selections", s.pool1_selections},
                            {"pool2_selections", s.pool2_selections},
                            {"fallbacks", s.fallbacks},
                            {"end_reason", s.end_reason}});
        }
        j["per_session"] = list;
    }
    return j;
}

std::string sim_table(const SimResult& r) {
    std::ostringstream os;
    os << "policy " << r.policy << "  seed " << r.seed << "  sessions " << r.sessions << '\n'
       << "turns played   " << r.turns_played << '\n'
       << "pool1 share    " << r.pool1_share << "  (" << r.pool1_selections << " / "
       << r.pool1_selections + r.pool2_selections << ")\n"
       << "mean lifespan  " << r.lifespan_turns << " turns\n"
       << "fallbacks      " << r.fallbacks << '\n';
    for (CandyKind k : kAllCandyKinds) {
        const auto i = static_cast<std::size_t>(kind_id(k));
        os << "  " << std::left << std::setw(7) << to_string(k) << std::right << r.selected[i] << '/' << r.generated[i]
           << '\n';
    }
    return os.str();
}

std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop = true; }

std::string story_summary(const Session& s) {
    const StoryResult r = finalize(s);
    std::ostringstream os;
    os << r.full_story << "\n\n" << r.story_word_count << " words";
    if (r.snake_length) os << ", snake length " << *r.snake_length;
    if (s.end_reason) os << ", ended: " << *s.end_reason;
    os << '\n';
    return os.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Snake Story: co-writing a story by playing Snake"};
    app.require_subcommand(1);

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Usage and text statistics over session logs");
    std::vector<std::string> logs;
    std::string group_by;
    std::string format = "json";
    analyze->add_option("logs", logs, "Session log files")->required()->check(CLI::ExistingFile);
    analyze->add_option("--group-by", group_by, "Group sessions (only 'version' is supported)")
        ->check(CLI::IsMember({"version"}));
    analyze->add_option("--format", format, "json, csv or table")->check(CLI::IsMember({"json", "csv", "table"}));

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Run scripted players through offline game sessions");
    std::string policy_name;
    std::string compare_name;
    int sessions = 20;
    std::uint64_t sim_seed = 1;
    int seeds = 100;
    std::string sim_format = "json";
    std::string sim_config;
    bool per_session = false;
    simulate->add_option("--policy", policy_name, "uniform, greedy, ignore-text or tradeoff:<w>")->required();
    simulate->add_option("--sessions", sessions, "Sessions per run (per seed with --compare)")
        ->check(CLI::PositiveNumber);
    simulate->add_option("--seed", sim_seed, "Base seed");
    simulate->add_option("--compare", compare_name, "Second policy: paired test on pool 1 share");
    simulate->add_option("--seeds", seeds, "Seeds for --compare (at least 30)")->check(CLI::PositiveNumber);
    simulate->add_option("--format", sim_format, "json or table")->check(CLI::IsMember({"json", "table"}));
    simulate->add_option("--config", sim_config, "Game config JSON file")->check(CLI::ExistingFile);
    simulate->add_flag("--per-session", per_session, "Include one row per simulated session");

    // serve
    auto* serve = app.add_subcommand("serve", "HTTP and WebSocket game service");
    ServiceConfig svc;
    svc.web_root = SNAKE_STORY_WEB_ROOT;
    std::string web_root = svc.web_root.string();
    std::string log_dir = svc.log_dir.string();
    bool offline = false;
    std::string api_style = "completions";
    serve->add_option("--port", svc.port, "TCP port (0 picks a free one)");
    serve->add_option("--bind", svc.bind_address, "Address to listen on");
    serve->add_flag("--offline", offline, "Use the offline generator for every session");
    serve->add_option("--log-dir", log_dir, "Where session logs are written");
    serve->add_option("--web-root", web_root, "Static files for the browser UI");
    serve->add_option("--threads", svc.threads, "Worker threads")->check(CLI::PositiveNumber);
    serve->add_option("--api-base", svc.provider.base_url, "Completion API base URL");
    serve->add_option("--model", svc.provider.model_name, "Completion model name");
    serve->add_option("--api-key-env", svc.provider.api_key_env, "Environment variable holding the API key");
    serve->add_option("--api-style", api_style, "completions or chat")->check(CLI::IsMember({"completions", "chat"}));

    // play
    auto* play = app.add_subcommand("play", "Play one offline session from a command script");
    std::string version_name = "game";
    std::uint64_t play_seed = 1;
    std::string script_path = "-";
    std::string play_out;
    std::string play_config;
    play->add_option("--version", version_name, "game or nongame")->check(CLI::IsMember({"game", "nongame"}));
    play->add_option("--seed", play_seed, "Session seed");
    play->add_option("--script", script_path, "Command script ('-' reads stdin)");
    play->add_option("--log", play_out, "Write the session log here (default stdout)");
    play->add_option("--config", play_config, "Game config JSON file")->check(CLI::ExistingFile);

    // replay
    auto* replay_cmd = app.add_subcommand("replay", "Rebuild a story from its session log");
    std::string replay_path;
    bool with_ending = false;
    std::uint64_t ending_seed = 0;
    replay_cmd->add_option("log", replay_path, "Session log file")->required()->check(CLI::ExistingFile);
    replay_cmd->add_flag("--ending", with_ending, "Regenerate an ending with the offline generator");
    replay_cmd->add_option("--ending-seed", ending_seed, "Seed for the regenerated ending");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*analyze) {
            std::vector<SessionTrace> traces;
            for (const auto& path : logs) traces.push_back(parse_log(read_text(path), path));
            const json report = build_report(traces, !group_by.empty());
            if (format == "json") std::cout << report.dump(2) << '\n';
            else if (format == "csv") std::cout << report_csv(report);
            else std::cout << report_table(report);
        } else if (*simulate) {
            const GameConfig config = load_config(sim_config);
            const Policy a = parse_policy(policy_name);
            if (compare_name.empty()) {
                const SimResult r = run_policy(a, config, sim_seed, sessions);
                if (sim_format == "json") std::cout << sim_json(r, per_session).dump(2) << '\n';
                else std::cout << sim_table(r);
            } else {
                const Policy b = parse_policy(compare_name);
                std::vector<std::uint64_t> list;
                for (int i = 0; i < seeds; ++i) list.push_back(sim_seed + static_cast<std::uint64_t>(i));
                const PolicyComparison c = compare_policies(a, b, config, list, sessions);
                auto side = [&](const std::vector<SimResult>& rs) {
                    json out = json::array();
                    for (const auto& r : rs) out.push_back(sim_json(r, per_session));
                    return out;
                };
                const json test = {{"w", c.test.w_statistic},       {"w_plus", c.test.w_plus},
                                   {"w_minus", c.test.w_minus},     {"n_effective", c.test.n_effective},
                                   {"p_value", c.test.p_value},     {"method", to_string(c.test.method)}};
                if (sim_format == "json") {
                    std::cout << json({{"policy_a", c.policy_a},
                                       {"policy_b", c.policy_b},
                                       {"seeds", c.seeds},
                                       {"sessions_per_seed", sessions},
                                       {"metric", "pool1_share"},
                                       {"test", test},
                                       {"a", side(c.a)},
                                       {"b", side(c.b)}})
                                     .dump(2)
                              << '\n';
                } else {
                    double ma = 0, mb = 0;
                    for (const auto& r : c.a) ma += r.pool1_share;
                    for (const auto& r : c.b) mb += r.pool1_share;
                    std::cout << c.policy_a << " vs " << c.policy_b << " over " << c.seeds.size() << " seeds\n"
                              << "mean pool1 share  " << ma / c.a.size() << " vs " << mb / c.b.size() << '\n'
                              << "Wilcoxon W " << c.test.w_statistic << "  n " << c.test.n_effective << "  p "
                              << c.test.p_value << " (" << to_string(c.test.method) << ")\n";
                }
            }
        } else if (*serve) {
            svc.web_root = web_root;
            svc.log_dir = log_dir;
            svc.force_offline = offline;
            svc.offline_default = offline;
            svc.provider.api_style = api_style == "chat" ? ApiStyle::Chat : ApiStyle::Completions;
            svc.provider = apply_env_overrides(svc.provider);
            Server server(svc);
            server.start();
            std::cerr << "snake-story listening on http://" << svc.bind_address << ':' << server.port()
                      << (offline ? " (offline)" : "") << '\n';
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
            server.stop();
        } else if (*play) {
            const auto version = *parse_version(version_name);
            const ScriptRun run = run_script(version, load_config(play_config), play_seed, read_text(script_path));
            write_text(play_out, write_log(run.session.log));
            std::cerr << story_summary(run.session);
            if (run.ignored) std::cerr << run.ignored << " commands after the session ended were ignored\n";
        } else if (*replay_cmd) {
            const SessionTrace trace = parse_log(read_text(replay_path), replay_path);
            std::unique_ptr<TextProvider> provider;
            if (with_ending) {
                ProviderConfig pc;
                pc.offline = true;
                pc.offline_seed = ending_seed;
                provider = std::make_unique<TextProvider>(pc);
            }
            const Session s = replay(trace, provider.get());
            for (const auto& w : trace.warnings) std::cerr << "warning: " << w << '\n';
            if (s.status == SessionStatus::Ended) {
                std::cout << story_summary(s);
            } else {
                std::cout << s.story_text() << "\n\n(session did not finish)\n";
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "snake-story: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
