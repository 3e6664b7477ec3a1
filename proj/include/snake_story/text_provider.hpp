#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "snake_story/errors.hpp"
#include "snake_story/game_types.hpp"
#include "snake_story/rng.hpp"
#include "snake_story/text.hpp"
#include "snake_story/text_option.hpp"

namespace snake_story {

inline constexpr std::string_view kEndingSuffix = ", and the story of the snake ends";
inline constexpr std::size_t kEndingSuffixWords = 7;

enum class ApiStyle { Completions, Chat };

struct ProviderConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string model_name = "gpt-3.5-turbo-instruct";
    std::string api_key_env = "SNAKE_STORY_API_KEY";
    double timeout_seconds = 30.0;
    int retries = 1;
    bool offline = false;
    std::uint64_t offline_seed = 0;
    ApiStyle api_style = ApiStyle::Completions;
    // Prompt templates. "{story}" and "{limit}" are substituted.
    std::string option_prompt = "writing a story of a snake\n\n{story}";
    std::string ending_prompt =
        "writing a story of a snake\n\n{story}\n\nFinish the story in at most {limit} words, leading into the "
        "closing words \", and the story of the snake ends\".";
    // Requested completion tokens per allowed word.
    double token_headroom = 2.2;
};

inline void validate(const ProviderConfig& c) {
    if (!(c.timeout_seconds > 0)) throw ConfigError("invalid provider config: timeout_seconds must be positive");
    if (c.retries < 0) throw ConfigError("invalid provider config: retries must be non-negative");
}

// SNAKE_STORY_API_BASE and SNAKE_STORY_MODEL override the configured values.
inline ProviderConfig apply_env_overrides(ProviderConfig c) {
    if (const char* base = std::getenv("SNAKE_STORY_API_BASE"); base && *base) c.base_url = base;
    if (const char* model = std::getenv("SNAKE_STORY_MODEL"); model && *model) c.model_name = model;
    return c;
}

inline std::string substitute(std::string tmpl, std::string_view key, std::string_view value) {
    for (auto pos = tmpl.find(key); pos != std::string::npos; pos = tmpl.find(key, pos + value.size())) {
        tmpl.replace(pos, key.size(), value);
    }
    return tmpl;
}

inline std::string build_option_prompt(std::string_view story, const ProviderConfig& c) {
    return substitute(c.option_prompt, "{story}", story);
}

inline std::string build_ending_prompt(std::string_view story, const ProviderConfig& c, int limit) {
    return substitute(substitute(c.ending_prompt, "{story}", story), "{limit}", std::to_string(limit));
}

// Caps an ending at `limit` words and makes it finish with the fixed suffix,
// appending the suffix when the text does not already carry it.
inline std::string enforce_ending(std::string_view text, std::size_t limit) {
    std::string capped = truncate_words(text, limit);
    std::string_view t = trim_right(capped);
    if (t.ends_with(".") && t.substr(0, t.size() - 1).ends_with(kEndingSuffix)) t.remove_suffix(1);
    if (t.ends_with(kEndingSuffix)) return std::string(t);

    std::string body = truncate_words(text, limit > kEndingSuffixWords ? limit - kEndingSuffixWords : 0);
    std::string_view b = trim_right(body);
    while (!b.empty() && std::string_view(".,;:!?").find(b.back()) != std::string_view::npos) {
        b.remove_suffix(1);
        b = trim_right(b);
    }
    return std::string(b) + std::string(kEndingSuffix);
}

namespace detail {

inline constexpr std::string_view kOfflineCorpus = R"(Deep in the reed marsh lived a young grass snake called Pell. Every morning Pell slid down to the water to drink and watch the herons. The herons never noticed the little snake, and Pell liked it that way.
One grey morning the marsh was strangely quiet. Pell raised her head and tasted the air with her tongue. Something new had come to the marsh, something that smelled of smoke and iron.
The snake followed the smell past the old willow and along the muddy bank. There she found a wooden boat tied to a post, and in the boat sat a girl with a lantern.
The girl looked at the snake and the snake looked at the girl. Neither of them moved for a long time.
At last the girl held out a piece of bread. Pell did not eat bread, but she understood that the gift was kind.
From that day the snake and the girl met by the willow each evening. The girl told stories about the city beyond the hills, and the snake listened with her chin on the warm wood.
Winter came early that year. Ice crept across the marsh and the herons flew south. Pell grew slow and sleepy in the cold.
The girl wrapped the snake in a wool scarf and carried her to a barn full of hay. In the barn it was dry and still, and Pell slept through the long dark months.
When spring returned the snake woke hungry and curious. She slipped out of the barn and found the world green again.
The old king snake of the hills had heard about the little grass snake who befriended a human. He came down from the rocks to see her for himself.
He was huge and black, with eyes like drops of amber. The other animals hid when he passed.
Pell was afraid, but she did not run. She told the king snake about the girl, the boat, and the warm barn.
The king snake laughed a dry, rattling laugh. He had never trusted humans, yet he could not deny that the little snake looked healthy and bold.
Together they climbed to the top of the hill and looked down at the village. Smoke rose from the chimneys and children ran between the houses.
The snake wondered whether the girl was down there among them. She wanted to find her, even if the journey was dangerous.
So the snake set off at dusk, gliding through the tall grass toward the lights. An owl circled above her, and a fox watched from the hedge.
The journey took three nights. On the third night the snake reached a garden with a small blue door.
Behind the door she heard a familiar voice singing. The girl opened the door and cried out with joy when she saw the snake.
After that the snake lived in the garden under a flat warm stone. She kept the mice away from the vegetables, and the family left her a bowl of fresh water every day.
Years later the snake was old and her scales had faded to silver. She still went down to the marsh some evenings to watch the herons.
And sometimes, when the wind was right, she could hear the girl, now grown, telling her own children about the brave little snake from the reeds.
A storm once flooded the whole valley and carried the snake far downstream. She clung to a floating branch and waited for the water to calm.
The river left her on a strange shore covered in white stones. Lizards sunned themselves there and stared at the newcomer.
The snake made friends with an old tortoise who knew every path in the valley. He showed her the way home through the forest.
In the forest the trees were so tall that the sun never touched the ground. Mushrooms glowed softly in the dark, and the snake followed their light.
She met a clever crow who offered to guide her in exchange for a secret. The snake told the crow where the farmer hid his seeds.
Curiosity always led the snake into trouble, and courage always led her out again.
)";

struct MarkovModel {
    std::vector<std::string> vocab;
    std::vector<double> unigram;                         // relative frequency
    std::vector<std::map<std::size_t, int>> successors;  // bigram counts
    std::vector<std::size_t> starters;                   // sentence-initial tokens
    std::map<std::string, std::size_t, std::less<>> index;
};

inline const MarkovModel& offline_model() {
    static const MarkovModel model = [] {
        MarkovModel m;
        std::vector<std::size_t> seq;
        std::string_view text = kOfflineCorpus;
        std::size_t i = 0;
        while (i < text.size()) {
            while (i < text.size() && is_space(text[i])) ++i;
            std::size_t j = i;
            while (j < text.size() && !is_space(text[j])) ++j;
            if (j > i) {
                std::string tok(text.substr(i, j - i));
                auto [it, inserted] = m.index.try_emplace(tok, m.vocab.size());
                if (inserted) m.vocab.push_back(tok);
                seq.push_back(it->second);
            }
            i = j;
        }
        m.unigram.assign(m.vocab.size(), 0.0);
        m.successors.resize(m.vocab.size());
        for (std::size_t k = 0; k < seq.size(); ++k) {
            m.unigram[seq[k]] += 1.0;
            if (k + 1 < seq.size()) ++m.successors[seq[k]][seq[k + 1]];
            const std::string& prev = k == 0 ? std::string(".") : m.vocab[seq[k - 1]];
            if (k == 0 || prev.back() == '.' || prev.back() == '!' || prev.back() == '?') {
                if (std::find(m.starters.begin(), m.starters.end(), seq[k]) == m.starters.end()) {
                    m.starters.push_back(seq[k]);
                }
            }
        }
        for (double& u : m.unigram) u /= static_cast<double>(seq.size());
        return m;
    }();
    return model;
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::size_t sample_weighted(Rng& rng, const std::vector<double>& weights) {
    double sum = 0.0;
    for (double w : weights) sum += w;
    double r = draw_unit(rng) * sum;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        r -= weights[k];
        if (r < 0.0) return k;
    }
    return weights.size() - 1;
}

}  // namespace detail

// Deterministic bigram text from the embedded corpus. Each candidate next
// token gets weight (bigram count + 0.5 * unigram frequency)^(1/temperature),
// so higher temperatures flatten the distribution toward unseen pairings.
inline std::string offline_generate(std::uint64_t seed, std::string_view story, double temperature, int limit) {
    if (limit <= 0) throw PreconditionError("offline_generate needs a positive word limit");
    const auto& m = detail::offline_model();
    std::uint64_t temp_bits = 0;
    std::memcpy(&temp_bits, &temperature, sizeof temp_bits);
    Rng rng(derive_seed(derive_seed(seed, detail::fnv1a(story)), temp_bits ^ static_cast<std::uint64_t>(limit)));

    const double exponent = 1.0 / std::max(temperature, 0.05);
    constexpr double kSmoothing = 0.5;

    std::optional<std::size_t> prev;
    if (auto t = trim_right(story); !t.empty()) {
        auto start = t.find_last_of(" \t\r\n");
        std::string_view last = start == std::string_view::npos ? t : t.substr(start + 1);
        if (auto it = m.index.find(last); it != m.index.end()) prev = it->second;
    }

    std::string out;
    if (!story.empty() && !is_space(story.back())) out.push_back(' ');
    std::vector<double> weights(m.vocab.size());
    for (int w = 0; w < limit; ++w) {
        std::size_t next = 0;
        const bool sentence_start = !prev || [&] {
            char c = m.vocab[*prev].back();
            return c == '.' || c == '!' || c == '?';
        }();
        if (sentence_start && w == 0) {
            next = m.starters[draw_below(rng, m.starters.size())];
        } else {
            for (std::size_t k = 0; k < weights.size(); ++k) {
                double count = 0.0;
                if (prev) {
                    auto it = m.successors[*prev].find(k);
                    if (it != m.successors[*prev].end()) count = it->second;
                }
                weights[k] = std::pow(count + kSmoothing * m.unigram[k], exponent);
            }
            next = detail::sample_weighted(rng, weights);
        }
        if (w > 0) out.push_back(' ');
        out += m.vocab[next];
        prev = next;
    }
    return out;
}

struct CompletionRequest {
    std::string prompt;
    std::string story;
    double temperature = 0.0;
    int max_tokens = 0;
    int word_limit = 0;
    // Distinguishes option and ending requests for the offline backend.
    std::uint64_t salt = 0;
};

class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;
    virtual std::string complete(const CompletionRequest& request) = 0;
    virtual TextOrigin origin() const = 0;
};

class OfflineBackend final : public CompletionBackend {
public:
    explicit OfflineBackend(std::uint64_t seed) : seed_(seed) {}

    std::string complete(const CompletionRequest& r) override {
        return offline_generate(derive_seed(seed_, r.salt), r.story, r.temperature, r.word_limit);
    }
    TextOrigin origin() const override { return TextOrigin::OfflineStub; }

private:
    std::uint64_t seed_;
};

// OpenAI-compatible completions over HTTP(S).
class HttpBackend final : public CompletionBackend {
public:
    explicit HttpBackend(ProviderConfig config) : config_(std::move(config)) { split_url(); }

    // Process-wide count of HTTP requests attempted by any HttpBackend.
    static std::uint64_t request_count() { return counter().load(); }

    std::string complete(const CompletionRequest& r) override {
        const char* key = std::getenv(config_.api_key_env.c_str());
        if (!key || !*key) {
            throw ProviderUnavailable("no API key in environment variable " + config_.api_key_env);
        }
        nlohmann::json body = {{"model", config_.model_name},
                               {"temperature", r.temperature},
                               {"max_tokens", r.max_tokens}};
        std::string path = path_prefix_;
        if (config_.api_style == ApiStyle::Chat) {
            body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", r.prompt}}});
            path += "/chat/completions";
        } else {
            body["prompt"] = r.prompt;
            path += "/completions";
        }

        std::string last_error = "no attempt made";
        for (int attempt = 0; attempt <= config_.retries; ++attempt) {
            httplib::Client client(host_);
            const auto secs = static_cast<time_t>(config_.timeout_seconds);
            const auto usecs = static_cast<time_t>((config_.timeout_seconds - static_cast<double>(secs)) * 1e6);
            client.set_connection_timeout(secs, usecs);
            client.set_read_timeout(secs, usecs);
            client.set_write_timeout(secs, usecs);
            httplib::Headers headers = {{"Authorization", std::string("Bearer ") + key}};
            ++counter();
            auto res = client.Post(path, headers, body.dump(), "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 429 || res->status >= 500) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200) {
                throw ProviderUnavailable("HTTP " + std::to_string(res->status) + " from " + config_.base_url);
            }
            return extract_text(res->body);
        }
        throw ProviderUnavailable(last_error);
    }

    TextOrigin origin() const override { return TextOrigin::Model; }

private:
    static std::atomic<std::uint64_t>& counter() {
        static std::atomic<std::uint64_t> n{0};
        return n;
    }

    void split_url() {
        const auto& url = config_.base_url;
        auto scheme_end = url.find("://");
        auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
        auto path_start = url.find('/', host_start);
        host_ = url.substr(0, path_start);
        path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
        while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }

    std::string extract_text(const std::string& raw) const {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(raw);
        } catch (const nlohmann::json::exception& e) {
            throw ProviderProtocol(std::string("response is not JSON: ") + e.what());
        }
        try {
            const auto& choice = j.at("choices").at(0);
            if (config_.api_style == ApiStyle::Chat) return choice.at("message").at("content").get<std::string>();
            return choice.at("text").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ProviderProtocol(std::string("unexpected response shape: ") + e.what());
        }
    }

    ProviderConfig config_;
    std::string host_;
    std::string path_prefix_;
};

// Produces the option pairs and endings for sessions. One instance may be
// shared by many sessions; calls are serialized internally.
class TextProvider {
public:
    explicit TextProvider(ProviderConfig config) : config_(std::move(config)) {
        validate(config_);
        if (config_.offline) {
            backend_ = std::make_shared<OfflineBackend>(config_.offline_seed);
        } else {
            backend_ = std::make_shared<HttpBackend>(config_);
        }
    }

    TextProvider(ProviderConfig config, std::shared_ptr<CompletionBackend> backend)
        : config_(std::move(config)), backend_(std::move(backend)) {
        validate(config_);
    }

    const ProviderConfig& config() const { return config_; }

    // Slot 0 is always the low-temperature option.
    std::pair<TextOption, TextOption> generate_options(std::string_view story, const GameConfig& game) {
        return {option(story, game.temperature_low, game, 0), option(story, game.temperature_high, game, 1)};
    }

    std::string generate_ending(std::string_view story, const GameConfig& game) {
        if (trim(story).empty()) throw PreconditionError("cannot write an ending for an empty story");
        const int body_limit = game.ending_word_limit - static_cast<int>(kEndingSuffixWords);
        CompletionRequest r{build_ending_prompt(story, config_, game.ending_word_limit), std::string(story),
                            game.temperature_low, max_tokens(game.ending_word_limit), body_limit, 2};
        return enforce_ending(call(r), static_cast<std::size_t>(game.ending_word_limit));
    }

private:
    int max_tokens(int words) const { return static_cast<int>(std::ceil(words * config_.token_headroom)); }

    TextOption option(std::string_view story, double temperature, const GameConfig& game, std::uint64_t salt) {
        CompletionRequest r{build_option_prompt(story, config_), std::string(story), temperature,
                            max_tokens(game.option_word_limit), game.option_word_limit, salt};
        // Trailing line breaks cannot survive a log round trip, so they go.
        std::string text(trim_right(truncate_words(call(r), static_cast<std::size_t>(game.option_word_limit))));
        if (trim(text).empty()) throw ProviderProtocol("empty completion");
        const int words = static_cast<int>(story_word_count(text));
        return {std::move(text), temperature, words, backend_->origin()};
    }

    std::string call(const CompletionRequest& r) {
        std::lock_guard lock(mu_);
        return backend_->complete(r);
    }

    ProviderConfig config_;
    std::shared_ptr<CompletionBackend> backend_;
    std::mutex mu_;
};

}  // namespace snake_story
