#pragma once

#include <newsflow/calendar.hpp>
#include <newsflow/common.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace newsflow {

struct RawArticle {
    std::string id;
    Instant timestamp;
    std::string body;
    std::vector<std::string> tickers;
};

struct Article {
    std::string id;
    std::vector<int> firm_ids;
    Session session;
    std::vector<std::int32_t> tokens;
    /// Whitespace word count of the raw body.
    int word_count = 0;
};

/// Dense token ids in [0, size()), assigned in lexicographic token order.
class Vocabulary {
public:
    Vocabulary() = default;
    Vocabulary(std::vector<std::string> tokens, std::vector<int> document_frequency, std::vector<int> total_frequency);

    std::size_t size() const { return id_to_token_.size(); }
    const std::string& token(std::int32_t id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }
    std::optional<std::int32_t> id(const std::string& token) const;
    int document_frequency(std::int32_t id) const { return df_.at(static_cast<std::size_t>(id)); }
    int total_frequency(std::int32_t id) const { return tf_.at(static_cast<std::size_t>(id)); }
    const std::vector<std::string>& tokens() const { return id_to_token_; }

    std::vector<std::int32_t> encode(const std::vector<std::string>& tokens) const;

private:
    std::unordered_map<std::string, std::int32_t> token_to_id_;
    std::vector<std::string> id_to_token_;
    std::vector<int> df_;
    std::vector<int> tf_;
};

struct VocabularyOptions {
    int min_total_count = 25;
    int min_document_count = 25;
};

/// Keeps tokens with corpus frequency >= min_total_count AND document
/// frequency >= min_document_count. Throws DataError on an empty corpus.
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& documents,
                            const VocabularyOptions& options = {});

/// Index membership: ticker -> firm over date ranges.
class Membership {
public:
    struct Spell {
        int firm_id;
        std::string ticker;
        Date start;
        Date end;  // inclusive
    };

    Membership() = default;
    explicit Membership(std::vector<Spell> spells);
    /// CSV with header firm_id,ticker,start_date,end_date.
    static Membership read_csv(const std::string& path);

    const std::vector<Spell>& spells() const { return spells_; }
    Date first() const { return first_; }
    Date last() const { return last_; }
    bool covers(Date d) const { return !spells_.empty() && d >= first_ && d <= last_; }

    /// Firm behind a ticker on a date, if that firm is an index member then.
    /// Throws DataError when d lies outside the covered range.
    std::optional<int> member_for_ticker(const std::string& ticker, Date d) const;
    bool in_index(int firm_id, Date d) const;
    std::vector<int> firm_ids() const;

private:
    std::vector<Spell> spells_;
    std::unordered_map<std::string, std::vector<std::size_t>> by_ticker_;
    std::unordered_map<int, std::vector<std::size_t>> by_firm_;
    Date first_{};
    Date last_{};
};

enum class DropReason { None, NoFirms, TooManyFirms, TooShort };
std::string_view to_string(DropReason r);

struct FilterOptions {
    int max_firms = 3;
    int min_words = 25;
};

struct FilterDecision {
    bool keep = false;
    DropReason reason = DropReason::None;
    /// Distinct member firms mentioned, ascending.
    std::vector<int> firm_ids;
};

/// Drops articles mentioning no index member on trading_day, more than
/// max_firms members, or with fewer than min_words raw words.
FilterDecision filter_article(const RawArticle& raw, const Membership& membership, Date trading_day,
                              const FilterOptions& options = {});

struct Corpus {
    std::vector<Article> articles;
    Vocabulary vocabulary;

    std::size_t token_total() const;
};

struct IngestOptions {
    FilterOptions filter;
    VocabularyOptions vocabulary;
    /// When set, only articles whose trading day falls in or before this
    /// year contribute to vocabulary frequencies.
    std::optional<int> vocabulary_cutoff_year;
};

struct IngestReport {
    std::size_t read = 0;
    std::size_t kept = 0;
    std::map<std::string, std::size_t> dropped;  // reason -> count
};

/// classify -> filter -> preprocess -> vocabulary -> encode. Articles keep
/// input order; preprocessing runs in parallel.
Corpus ingest(const std::vector<RawArticle>& raw, const Membership& membership, const TradingCalendar& calendar,
              const TimeZone& tz, const IngestOptions& options, IngestReport* report = nullptr);

/// Newline-delimited JSON: {id, timestamp, tickers, body}.
std::vector<RawArticle> read_articles_jsonl(const std::string& path);
void write_articles_jsonl(const std::string& path, const std::vector<RawArticle>& articles);

inline constexpr int kCorpusFormatVersion = 1;
void write_corpus(const std::string& path, const Corpus& corpus);
Corpus read_corpus(const std::string& path);

}  // namespace newsflow
