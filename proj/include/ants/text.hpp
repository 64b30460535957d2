#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace ants::text {

/// Placeholder substituted by apply_template.
inline constexpr std::string_view kLabelToken = "<label>";

/// Case-folds ASCII letters, trims, and collapses internal whitespace runs to one space.
std::string normalize_label(std::string_view s);

/// Case-insensitive whole-word containment; words are maximal runs of ASCII alphanumerics.
bool contains_whole_word(std::string_view text, std::string_view word);

std::size_t word_count(std::string_view s);

/// Keeps the first `max_words` whitespace-separated words, joined by single spaces.
std::string truncate_words(std::string_view s, std::size_t max_words);

/// Replaces every `<label>` occurrence; an empty template returns the label verbatim.
std::string apply_template(std::string_view tmpl, std::string_view label);

/// Replaces every occurrence of `token` in `tmpl` with `value`.
std::string replace_all(std::string_view tmpl, std::string_view token, std::string_view value);

} // namespace ants::text
