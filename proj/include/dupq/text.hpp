#pragma once

#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace dupq {

using TokenSequence = std::vector<std::string>;

/// The shipped English stopword list (data/stopwords_en.txt).
const std::unordered_set<std::string>& stopwords();

/// Removes `<...>` markup and decodes the common HTML entities. Markup is
/// replaced by a space so adjacent words do not fuse.
std::string strip_markup(std::string_view html);

/// Markup stripped, URLs dropped, ASCII-lowercased, split on whitespace and
/// punctuation, stopwords removed. Idempotent on the space-joined output.
TokenSequence preprocess_text(std::string_view raw);

std::string join_tokens(const TokenSequence& tokens);

}  // namespace dupq
