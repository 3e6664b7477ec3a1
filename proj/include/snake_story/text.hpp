#pragma once

#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace snake_story {

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// Number of whitespace-delimited tokens.
inline std::size_t story_word_count(std::string_view text) {
    std::size_t count = 0;
    bool in_word = false;
    for (char c : text) {
        if (is_space(c)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++count;
        }
    }
    return count;
}

// Keeps the text up to the end of its `limit`-th word, original spacing
// included. Text with at most `limit` words comes back unchanged.
inline std::string truncate_words(std::string_view text, std::size_t limit) {
    std::size_t words = 0;
    bool in_word = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (is_space(text[i])) {
            if (in_word && words == limit) return std::string(text.substr(0, i));
            in_word = false;
        } else if (!in_word) {
            if (words == limit) return std::string(text.substr(0, i));
            in_word = true;
            ++words;
        }
    }
    return std::string(text);
}

inline std::string_view trim_right(std::string_view s) {
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

inline std::string_view trim(std::string_view s) {
    s = trim_right(s);
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    return s;
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// Lowercased word tokens: runs of letters, digits and inner apostrophes.
// Bytes >= 0x80 count as letters so UTF-8 words stay whole.
inline std::vector<std::string> word_tokens(std::string_view text) {
    auto wordish = [](char c) {
        auto u = static_cast<unsigned char>(c);
        return std::isalnum(u) != 0 || u >= 0x80;
    };
    std::vector<std::string> out;
    std::string cur;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (wordish(c)) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (c == '\'' && !cur.empty() && i + 1 < text.size() && wordish(text[i + 1])) {
            cur.push_back(c);
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

}  // namespace snake_story
