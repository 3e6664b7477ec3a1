#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "snake_story/engine.hpp"
#include "snake_story/errors.hpp"
#include "snake_story/session_log.hpp"
#include "snake_story/text.hpp"

namespace snake_story {

// ---------------------------------------------------------------------------
// Usage statistics

struct SessionUsage {
    std::string source;
    SessionVersion version = SessionVersion::NonGame;
    int total_choices = 0;
    int low_temp_choices = 0;
    int high_temp_choices = 0;
    int self_writes = 0;
    double mean_decision_seconds = 0.0;
    KindCounts candies_generated{};
    KindCounts candies_selected{};
};

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;  // sample standard deviation; 0 for fewer than two values
};

struct UsageStats {
    std::vector<SessionUsage> sessions;
    MeanSd total_choices;
    MeanSd low_temp_choices;
    MeanSd high_temp_choices;
    MeanSd self_writes;
    MeanSd mean_decision_seconds;
    KindCounts candies_generated{};
    KindCounts candies_selected{};
};

inline MeanSd mean_sd(std::span<const double> xs) {
    MeanSd r;
    if (xs.empty()) return r;
    double sum = 0.0;
    for (double x : xs) sum += x;
    r.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - r.mean) * (x - r.mean);
        r.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return r;
}

// Counts come from Chose / Add Own Text records only. Decision time runs
// from the first option line of a turn to the record that closes it.
inline SessionUsage session_usage(const SessionTrace& t) {
    using namespace log_payload;
    SessionUsage u;
    u.source = t.source_path;
    u.version = t.version;

    double lowest_temp = INFINITY;
    for (const auto& e : t.events) {
        if (const auto* o = std::get_if<OptionShown>(&e.payload)) {
            if (const auto* tp = std::get_if<Temperature>(&o->code)) lowest_temp = std::min(lowest_temp, tp->value);
        }
    }

    std::vector<double> decisions;
    std::optional<TimePoint> turn_start;
    std::set<int> slots_this_turn;
    auto close_turn = [&](TimePoint at) {
        decisions.push_back(std::chrono::duration<double>(at - turn_start.value_or(at)).count());
        turn_start.reset();
        slots_this_turn.clear();
    };
    for (const auto& e : t.events) {
        if (const auto* o = std::get_if<OptionShown>(&e.payload)) {
            if (!turn_start) turn_start = e.timestamp;
            if (const auto* sk = std::get_if<SlotKind>(&o->code); sk && slots_this_turn.insert(sk->slot).second) {
                if (auto k = candy_kind_from_id(sk->kind)) ++u.candies_generated[static_cast<std::size_t>(*k)];
            }
        } else if (const auto* c = std::get_if<Chose>(&e.payload)) {
            if (const auto* sk = std::get_if<SlotKind>(&c->code)) {
                if (sk->slot == 0) ++u.low_temp_choices;
                else if (sk->slot == 1) ++u.high_temp_choices;
                else ++u.self_writes;
                if (auto k = candy_kind_from_id(sk->kind)) ++u.candies_selected[static_cast<std::size_t>(*k)];
            } else {
                const auto& tp = std::get<Temperature>(c->code);
                if (tp.value <= lowest_temp) ++u.low_temp_choices;
                else ++u.high_temp_choices;
            }
            close_turn(e.timestamp);
        } else if (std::holds_alternative<AddOwnText>(e.payload)) {
            ++u.self_writes;
            close_turn(e.timestamp);
        }
    }
    u.total_choices = u.low_temp_choices + u.high_temp_choices + u.self_writes;
    if (!decisions.empty()) u.mean_decision_seconds = mean_sd(decisions).mean;
    return u;
}

inline UsageStats usage_stats(std::span<const SessionTrace> traces) {
    UsageStats s;
    for (const auto& t : traces) {
        if (t.version != traces.front().version) {
            throw UsageError("traces mix game and non-game sessions; group them by version first");
        }
        s.sessions.push_back(session_usage(t));
    }
    auto column = [&](auto field) {
        std::vector<double> xs;
        for (const auto& u : s.sessions) xs.push_back(static_cast<double>(field(u)));
        return mean_sd(xs);
    };
    s.total_choices = column([](const SessionUsage& u) { return u.total_choices; });
    s.low_temp_choices = column([](const SessionUsage& u) { return u.low_temp_choices; });
    s.high_temp_choices = column([](const SessionUsage& u) { return u.high_temp_choices; });
    s.self_writes = column([](const SessionUsage& u) { return u.self_writes; });
    s.mean_decision_seconds = column([](const SessionUsage& u) { return u.mean_decision_seconds; });
    for (const auto& u : s.sessions) {
        for (std::size_t k = 0; k < kCandyKindCount; ++k) {
            s.candies_generated[k] += u.candies_generated[k];
            s.candies_selected[k] += u.candies_selected[k];
        }
    }
    return s;
}

inline std::map<SessionVersion, UsageStats> usage_stats_by_version(std::span<const SessionTrace> traces) {
    std::map<SessionVersion, std::vector<SessionTrace>> groups;
    for (const auto& t : traces) groups[t.version].push_back(t);
    std::map<SessionVersion, UsageStats> out;
    for (const auto& [v, ts] : groups) out.emplace(v, usage_stats(ts));
    return out;
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank test

struct PairedSample {
    std::string label;
    double a = 0.0;
    double b = 0.0;
};

enum class WilcoxonMethod { Exact, NormalApprox, Auto };

inline std::string_view to_string(WilcoxonMethod m) {
    switch (m) {
        case WilcoxonMethod::Exact: return "exact";
        case WilcoxonMethod::NormalApprox: return "normal_approx";
        case WilcoxonMethod::Auto: return "auto";
    }
    return "?";
}

struct WilcoxonResult {
    double w_statistic = 0.0;  // min(W+, W-)
    double w_plus = 0.0;
    double w_minus = 0.0;
    int n_effective = 0;
    double p_value = 1.0;  // two-sided
    WilcoxonMethod method = WilcoxonMethod::Exact;
};

inline constexpr int kExactWilcoxonMaxN = 25;

// Average ranks of |d| (1-based), ties sharing the mean of their positions.
inline std::vector<double> average_ranks(std::span<const double> magnitudes) {
    std::vector<std::size_t> order(magnitudes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return magnitudes[x] < magnitudes[y]; });
    std::vector<double> ranks(magnitudes.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && magnitudes[order[j + 1]] == magnitudes[order[i]]) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

// Differences are a - b. Zero differences are dropped before ranking.
// Exact p-values count sign vectors through a subset-sum table over doubled
// ranks (so tied half-ranks stay integral): p = 2 * #{W+ <= W} / 2^n, capped
// at 1. The normal approximation uses a tie-corrected variance and a 0.5
// continuity correction.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const PairedSample> pairs,
                                           WilcoxonMethod mode = WilcoxonMethod::Auto) {
    if (pairs.empty()) throw InputError("the signed-rank test needs at least one pair");
    std::vector<double> mags;
    std::vector<bool> positive;
    for (const auto& p : pairs) {
        if (!std::isfinite(p.a) || !std::isfinite(p.b)) throw InputError("pair " + p.label + " is not finite");
        const double d = p.a - p.b;
        if (d == 0.0) continue;
        mags.push_back(std::fabs(d));
        positive.push_back(d > 0.0);
    }
    if (mags.empty()) throw AllZeroError("all paired differences are zero");

    const auto ranks = average_ranks(mags);
    WilcoxonResult r;
    r.n_effective = static_cast<int>(mags.size());
    for (std::size_t i = 0; i < ranks.size(); ++i) (positive[i] ? r.w_plus : r.w_minus) += ranks[i];
    r.w_statistic = std::min(r.w_plus, r.w_minus);

    r.method = mode == WilcoxonMethod::Auto
                   ? (r.n_effective <= kExactWilcoxonMaxN ? WilcoxonMethod::Exact : WilcoxonMethod::NormalApprox)
                   : mode;

    const double n = r.n_effective;
    if (r.method == WilcoxonMethod::Exact) {
        if (r.n_effective > 62) throw InputError("exact test supports at most 62 non-zero pairs");
        std::vector<int> doubled;
        int total2 = 0;
        for (double rk : ranks) {
            doubled.push_back(static_cast<int>(std::lround(rk * 2.0)));
            total2 += doubled.back();
        }
        std::vector<std::uint64_t> ways(static_cast<std::size_t>(total2) + 1, 0);
        ways[0] = 1;
        for (int r2 : doubled) {
            for (int s = total2; s >= r2; --s) ways[static_cast<std::size_t>(s)] += ways[static_cast<std::size_t>(s - r2)];
        }
        const auto w2 = static_cast<int>(std::lround(r.w_statistic * 2.0));
        std::uint64_t tail = 0;
        for (int s = 0; s <= w2; ++s) tail += ways[static_cast<std::size_t>(s)];
        const double p = 2.0 * static_cast<double>(tail) / std::ldexp(1.0, r.n_effective);
        r.p_value = std::min(1.0, p);
    } else {
        std::map<double, int> tie_sizes;
        for (double m : mags) ++tie_sizes[m];
        double tie_term = 0.0;
        for (const auto& [_, t] : tie_sizes) tie_term += static_cast<double>(t) * t * t - t;
        const double mean = n * (n + 1.0) / 4.0;
        const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
        if (var <= 0.0) {
            r.p_value = 1.0;
        } else {
            const double z = std::max(0.0, std::fabs(r.w_plus - mean) - 0.5) / std::sqrt(var);
            r.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Lexical diversity (MTLD)

enum class MtldFlag { None, ShortText, NoFactors };

struct MtldResult {
    double value = 0.0;
    MtldFlag flag = MtldFlag::None;
    double forward = 0.0;
    double backward = 0.0;
};

inline constexpr double kMtldThreshold = 0.72;
inline constexpr std::size_t kMtldMinTokens = 10;

namespace detail {
// Factor count for one pass: a factor closes whenever the running type-token
// ratio drops below the threshold; the leftover segment contributes
// (1 - TTR) / (1 - threshold).
template <typename It>
double mtld_factors(It first, It last, double threshold) {
    double factors = 0.0;
    std::unordered_set<std::string_view> types;
    std::size_t count = 0;
    for (It it = first; it != last; ++it) {
        ++count;
        types.insert(*it);
        const double ttr = static_cast<double>(types.size()) / static_cast<double>(count);
        if (ttr < threshold) {
            factors += 1.0;
            types.clear();
            count = 0;
        }
    }
    if (count > 0) {
        const double ttr = static_cast<double>(types.size()) / static_cast<double>(count);
        factors += (1.0 - ttr) / (1.0 - threshold);
    }
    return factors;
}
}  // namespace detail

inline MtldResult mtld(std::span<const std::string> tokens, double threshold = kMtldThreshold) {
    if (tokens.empty()) throw InputError("MTLD needs at least one token");
    const auto n = static_cast<double>(tokens.size());
    MtldResult r;
    if (tokens.size() < kMtldMinTokens) {
        r.value = n;
        r.flag = MtldFlag::ShortText;
        return r;
    }
    std::vector<std::string_view> views(tokens.begin(), tokens.end());
    const double f = detail::mtld_factors(views.begin(), views.end(), threshold);
    const double b = detail::mtld_factors(views.rbegin(), views.rend(), threshold);
    if (f == 0.0 && b == 0.0) {
        r.value = n;
        r.flag = MtldFlag::NoFactors;
        return r;
    }
    r.forward = f > 0.0 ? n / f : n;
    r.backward = b > 0.0 ? n / b : n;
    r.value = (r.forward + r.backward) / 2.0;
    return r;
}

// ---------------------------------------------------------------------------
// Sentence overlap

inline constexpr std::string_view kStopwordsVersion = "stopwords_v1";

inline const std::set<std::string, std::less<>>& stopwords() {
    static const std::set<std::string, std::less<>> words = {
        "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are", "as", "at",
        "be", "because", "been", "before", "being", "below", "between", "both", "but", "by", "can", "could",
        "did", "do", "does", "doing", "down", "during", "each", "even", "ever", "every", "few", "for", "from",
        "further", "had", "has", "have", "having", "he", "her", "here", "hers", "herself", "him", "himself",
        "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just", "me", "more", "most", "my",
        "myself", "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours",
        "ourselves", "out", "over", "own", "same", "she", "should", "so", "some", "such", "than", "that", "the",
        "their", "theirs", "them", "themselves", "then", "there", "these", "they", "this", "those", "through",
        "to", "too", "under", "until", "up", "upon", "very", "was", "we", "were", "what", "when", "where",
        "which", "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours", "yourself",
        "yourselves"};
    return words;
}

// Lowercase, then strip possessive and plural endings.
inline std::string normalize_token(std::string_view token) {
    std::string w = to_lower(token);
    for (std::string_view suffix : {"'s", "\xE2\x80\x99s", "s'", "'"}) {
        if (w.size() > suffix.size() && std::string_view(w).ends_with(suffix)) {
            w.resize(w.size() - suffix.size());
            if (suffix == "s'") w.push_back('s');
            break;
        }
    }
    std::string_view v = w;
    if (v.size() > 4 && v.ends_with("ies")) return std::string(v.substr(0, v.size() - 3)) + "y";
    if (v.size() > 4 && (v.ends_with("ches") || v.ends_with("shes") || v.ends_with("sses") || v.ends_with("xes"))) {
        return std::string(v.substr(0, v.size() - 2));
    }
    if (v.size() > 3 && v.ends_with('s') && !v.ends_with("ss") && !v.ends_with("us") && !v.ends_with("is")) {
        return std::string(v.substr(0, v.size() - 1));
    }
    return w;
}

// Splits after . ! ? (plus closing quotes) when followed by whitespace and a
// capital letter or an opening quote, or at the end of the text.
inline std::vector<std::string> split_sentences(std::string_view text) {
    static const std::array<std::string_view, 6> abbreviations = {"Mr.", "Mrs.", "Ms.", "Dr.", "St.", "Jr."};
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c != '.' && c != '!' && c != '?') continue;
        std::size_t end = i + 1;
        while (end < text.size() && (text[end] == '"' || text[end] == '\'' || text[end] == ')')) ++end;
        bool boundary = false;
        if (end >= text.size()) {
            boundary = true;
        } else if (is_space(text[end])) {
            std::size_t k = end;
            while (k < text.size() && is_space(text[k])) ++k;
            if (k >= text.size()) {
                boundary = true;
            } else {
                const auto nc = static_cast<unsigned char>(text[k]);
                boundary = std::isupper(nc) || nc == '"' || nc == 0xE2;
            }
        }
        if (!boundary) continue;
        std::string_view candidate = text.substr(start, end - start);
        bool abbreviation = false;
        for (auto ab : abbreviations) {
            if (candidate.ends_with(ab) &&
                (candidate.size() == ab.size() || is_space(candidate[candidate.size() - ab.size() - 1]))) {
                abbreviation = true;
            }
        }
        if (abbreviation) continue;
        if (auto s = trim(candidate); !s.empty()) out.emplace_back(s);
        start = end;
        i = end - 1;
    }
    if (auto rest = trim(text.substr(std::min(start, text.size()))); !rest.empty()) out.emplace_back(rest);
    return out;
}

inline std::set<std::string> content_tokens(std::string_view sentence) {
    std::set<std::string> out;
    for (const auto& w : word_tokens(sentence)) {
        auto n = normalize_token(w);
        if (!n.empty() && !stopwords().count(n) && !stopwords().count(w)) out.insert(std::move(n));
    }
    return out;
}

struct OverlapResult {
    double value = 0.0;
    bool defined = false;  // false when the text has fewer than two sentences
    std::size_t sentences = 0;
};

// Mean over adjacent sentence pairs of |shared content tokens| divided by the
// later sentence's content-token count. Pairs whose later sentence has no
// content tokens are skipped.
inline OverlapResult sentence_overlap(std::string_view story) {
    const auto sentences = split_sentences(story);
    OverlapResult r;
    r.sentences = sentences.size();
    if (sentences.size() < 2) return r;
    r.defined = true;
    double sum = 0.0;
    std::size_t pairs = 0;
    auto prev = content_tokens(sentences[0]);
    for (std::size_t i = 1; i < sentences.size(); ++i) {
        auto cur = content_tokens(sentences[i]);
        if (!cur.empty()) {
            std::size_t shared = 0;
            for (const auto& t : cur) shared += prev.count(t);
            sum += static_cast<double>(shared) / static_cast<double>(cur.size());
            ++pairs;
        }
        prev = std::move(cur);
    }
    r.value = pairs ? sum / static_cast<double>(pairs) : 0.0;
    return r;
}

}  // namespace snake_story
