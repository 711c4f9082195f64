#include <newsflow/text.hpp>

#include <algorithm>
#include <unordered_set>

namespace newsflow {

namespace {

// English stopword list, version en-1. Changing its contents changes every
// downstream artifact; bump the version tag with any edit.
constexpr std::string_view kVersion = "en-1";

const std::vector<std::string_view>& list() {
    static const std::vector<std::string_view> words = {
        "a", "about", "above", "after", "again", "against", "ain", "all", "am", "an", "and", "any", "are", "aren",
        "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but", "by", "can",
        "couldn", "d", "did", "didn", "do", "does", "doesn", "doing", "don", "down", "during", "each", "few", "for",
        "from", "further", "had", "hadn", "has", "hasn", "have", "haven", "having", "he", "her", "here", "hers",
        "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is", "isn", "it", "its", "itself",
        "just", "ll", "m", "ma", "me", "mightn", "more", "most", "mustn", "my", "myself", "needn", "no", "nor",
        "not", "now", "o", "of", "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out",
        "over", "own", "re", "s", "said", "same", "says", "shan", "she", "should", "shouldn", "so", "some", "such",
        "t", "than", "that", "the", "their", "theirs", "them", "themselves", "then", "there", "these", "they",
        "this", "those", "through", "to", "too", "under", "until", "up", "ve", "very", "was", "wasn", "we", "were",
        "weren", "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with", "won", "would",
        "wouldn", "y", "you", "your", "yours", "yourself", "yourselves",
    };
    return words;
}

const std::unordered_set<std::string_view>& lookup() {
    static const std::unordered_set<std::string_view> set(list().begin(), list().end());
    return set;
}

}  // namespace

std::string_view stopword_list_version() { return kVersion; }

bool is_stopword(std::string_view lowercase_word) { return lookup().count(lowercase_word) > 0; }

const std::vector<std::string_view>& stopwords() { return list(); }

}  // namespace newsflow
