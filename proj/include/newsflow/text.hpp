#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace newsflow {

inline constexpr std::string_view kNumToken = "__NUM__";
inline constexpr std::string_view kMilToken = "__MIL__";
inline constexpr std::string_view kBilToken = "__BIL__";

/// Porter (1980) stemmer, original rule set. Input must be lowercase ASCII;
/// words of two letters or fewer are returned unchanged.
std::string porter_stem(std::string_view word);

/// Version tag of the compiled-in English stopword list.
std::string_view stopword_list_version();
bool is_stopword(std::string_view lowercase_word);
const std::vector<std::string_view>& stopwords();

/// Bucket token for a numeric magnitude: <1e6 NUM, <1e9 MIL, otherwise BIL.
std::string_view number_bucket(double value);

/// Lowercase, strip non-alphanumerics, drop stopwords, Porter-stem, and
/// replace numerals (with any adjacent "thousand"/"million"/"mln"/"billion"/
/// "bln"/"trillion" multiplier) by their magnitude bucket. Bucket tokens in
/// the input pass through unchanged.
std::vector<std::string> preprocess_text(std::string_view body);

/// Whitespace-delimited words of the raw body (used by the length filter).
std::size_t raw_word_count(std::string_view body);

}  // namespace newsflow
