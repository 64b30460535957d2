#include "ants/text.hpp"

#include <cctype>

namespace ants::text {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
char fold(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

} // namespace

std::string normalize_label(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(fold(c));
    }
    return out;
}

bool contains_whole_word(std::string_view text, std::string_view word) {
    if (word.empty() || word.size() > text.size()) {
        return false;
    }
    for (std::size_t start = 0; start + word.size() <= text.size(); ++start) {
        if (start > 0 && is_word_char(text[start - 1])) {
            continue;
        }
        const std::size_t end = start + word.size();
        if (end < text.size() && is_word_char(text[end])) {
            continue;
        }
        bool match = true;
        for (std::size_t k = 0; k < word.size(); ++k) {
            if (fold(text[start + k]) != fold(word[k])) {
                match = false;
                break;
            }
        }
        if (match) {
            return true;
        }
    }
    return false;
}

std::size_t word_count(std::string_view s) {
    std::size_t n = 0;
    bool in_word = false;
    for (char c : s) {
        if (is_space(c)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++n;
        }
    }
    return n;
}

std::string truncate_words(std::string_view s, std::size_t max_words) {
    std::string out;
    std::size_t n = 0;
    std::size_t i = 0;
    while (i < s.size() && n < max_words) {
        while (i < s.size() && is_space(s[i])) {
            ++i;
        }
        if (i == s.size()) {
            break;
        }
        const std::size_t begin = i;
        while (i < s.size() && !is_space(s[i])) {
            ++i;
        }
        if (!out.empty()) {
            out.push_back(' ');
        }
        out.append(s.substr(begin, i - begin));
        ++n;
    }
    return out;
}

std::string replace_all(std::string_view tmpl, std::string_view token, std::string_view value) {
    std::string out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t hit = tmpl.find(token, pos);
        if (hit == std::string_view::npos || token.empty()) {
            out.append(tmpl.substr(pos));
            return out;
        }
        out.append(tmpl.substr(pos, hit - pos));
        out.append(value);
        pos = hit + token.size();
    }
}

std::string apply_template(std::string_view tmpl, std::string_view label) {
    if (tmpl.empty()) {
        return std::string(label);
    }
    return replace_all(tmpl, kLabelToken, label);
}

} // namespace ants::text
