#include <newsflow/text.hpp>

#include <cctype>
#include <cstdlib>
#include <optional>

namespace newsflow {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alnum(char c) { return is_digit(c) || (c >= 'a' && c <= 'z'); }

std::vector<std::string_view> split_words(std::string_view body) {
    std::vector<std::string_view> words;
    std::size_t i = 0;
    while (i < body.size()) {
        while (i < body.size() && is_space(body[i])) ++i;
        const std::size_t start = i;
        while (i < body.size() && !is_space(body[i])) ++i;
        if (i > start) words.push_back(body.substr(start, i - start));
    }
    return words;
}

std::string lowercase(std::string_view w) {
    std::string out(w);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

std::optional<double> multiplier(std::string_view w) {
    if (w == "thousand" || w == "k") return 1e3;
    if (w == "million" || w == "millions" || w == "mln" || w == "mn" || w == "m") return 1e6;
    if (w == "billion" || w == "billions" || w == "bln" || w == "bn" || w == "b") return 1e9;
    if (w == "trillion" || w == "trillions" || w == "tn") return 1e12;
    return std::nullopt;
}

struct ParsedNumber {
    double value;
    bool consumed_suffix;
};

// Recognises "$1,234.5", "12%", "5.3bn", "(42)". Returns nullopt for
// anything that is not a numeral with optional currency/percent decoration.
std::optional<ParsedNumber> parse_numeral(std::string_view w) {
    std::size_t b = 0;
    std::size_t e = w.size();
    while (b < e && (w[b] == '$' || w[b] == '(' || w[b] == '"' || w[b] == '\'' || w[b] == '+' || w[b] == '-'))
        ++b;
    while (e > b && (w[e - 1] == ')' || w[e - 1] == ',' || w[e - 1] == '.' || w[e - 1] == ';' || w[e - 1] == ':' ||
                     w[e - 1] == '%' || w[e - 1] == '"' || w[e - 1] == '\'' || w[e - 1] == '!' || w[e - 1] == '?'))
        --e;
    if (b >= e || !is_digit(w[b])) return std::nullopt;
    std::string digits;
    bool seen_point = false;
    std::size_t i = b;
    for (; i < e; ++i) {
        const char c = w[i];
        if (is_digit(c)) {
            digits.push_back(c);
        } else if (c == ',' && !seen_point && i + 1 < e && is_digit(w[i + 1])) {
            continue;
        } else if (c == '.' && !seen_point && i + 1 < e && is_digit(w[i + 1])) {
            seen_point = true;
            digits.push_back('.');
        } else {
            break;
        }
    }
    double value = std::strtod(digits.c_str(), nullptr);
    if (i == e) return ParsedNumber{value, false};
    const std::string suffix = lowercase(w.substr(i, e - i));
    if (auto mult = multiplier(suffix)) return ParsedNumber{value * *mult, true};
    return std::nullopt;
}

std::string strip_non_alnum(std::string_view lower) {
    std::string out;
    out.reserve(lower.size());
    for (char c : lower)
        if (is_alnum(c)) out.push_back(c);
    return out;
}

}  // namespace

std::string_view number_bucket(double value) {
    const double v = value < 0 ? -value : value;
    if (v < 1e6) return kNumToken;
    if (v < 1e9) return kMilToken;
    return kBilToken;
}

std::vector<std::string> preprocess_text(std::string_view body) {
    const auto words = split_words(body);
    std::vector<std::string> tokens;
    tokens.reserve(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) {
        const std::string_view w = words[i];
        if (w == kNumToken || w == kMilToken || w == kBilToken) {
            tokens.emplace_back(w);
            continue;
        }
        if (auto num = parse_numeral(w)) {
            double value = num->value;
            if (!num->consumed_suffix && i + 1 < words.size()) {
                const std::string next = strip_non_alnum(lowercase(words[i + 1]));
                if (auto mult = multiplier(next); mult && next.size() > 1) {
                    value *= *mult;
                    ++i;
                }
            }
            tokens.emplace_back(number_bucket(value));
            continue;
        }
        const std::string cleaned = strip_non_alnum(lowercase(w));
        if (cleaned.empty()) continue;
        bool all_digits = true;
        for (char c : cleaned) all_digits = all_digits && is_digit(c);
        if (all_digits) {
            tokens.emplace_back(number_bucket(std::strtod(cleaned.c_str(), nullptr)));
            continue;
        }
        if (is_stopword(cleaned)) continue;
        std::string stem = porter_stem(cleaned);
        if (stem.empty() || is_stopword(stem)) continue;
        tokens.push_back(std::move(stem));
    }
    return tokens;
}

std::size_t raw_word_count(std::string_view body) { return split_words(body).size(); }

}  // namespace newsflow
