#include <newsflow/corpus.hpp>
#include <newsflow/csv.hpp>
#include <newsflow/text.hpp>

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>

namespace newsflow {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::vector<int> document_frequency,
                       std::vector<int> total_frequency)
    : id_to_token_(std::move(tokens)), df_(std::move(document_frequency)), tf_(std::move(total_frequency)) {
    if (df_.size() != id_to_token_.size() || tf_.size() != id_to_token_.size())
        throw DataError("vocabulary frequency arrays do not match token list");
    token_to_id_.reserve(id_to_token_.size());
    for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
        auto [it, inserted] = token_to_id_.emplace(id_to_token_[i], static_cast<std::int32_t>(i));
        if (!inserted) throw DataError("duplicate vocabulary token '" + id_to_token_[i] + "'");
    }
}

std::optional<std::int32_t> Vocabulary::id(const std::string& token) const {
    auto it = token_to_id_.find(token);
    if (it == token_to_id_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::int32_t> Vocabulary::encode(const std::vector<std::string>& tokens) const {
    std::vector<std::int32_t> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens)
        if (auto id = this->id(t)) ids.push_back(*id);
    return ids;
}

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& documents, const VocabularyOptions& options) {
    if (documents.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
    std::map<std::string, std::pair<int, int>> counts;  // token -> (df, tf)
    for (const auto& doc : documents) {
        std::set<std::string_view> seen;
        for (const auto& t : doc) {
            auto& c = counts[t];
            ++c.second;
            if (seen.insert(t).second) ++c.first;
        }
    }
    std::vector<std::string> tokens;
    std::vector<int> df;
    std::vector<int> tf;
    for (const auto& [token, c] : counts) {
        if (c.second >= options.min_total_count && c.first >= options.min_document_count) {
            tokens.push_back(token);
            df.push_back(c.first);
            tf.push_back(c.second);
        }
    }
    return Vocabulary(std::move(tokens), std::move(df), std::move(tf));
}

// ---------------------------------------------------------------------------
// Membership

Membership::Membership(std::vector<Spell> spells) : spells_(std::move(spells)) {
    for (std::size_t i = 0; i < spells_.size(); ++i) {
        const auto& s = spells_[i];
        if (s.end < s.start)
            throw DataError("membership spell for firm " + std::to_string(s.firm_id) + " ends before it starts");
        by_ticker_[s.ticker].push_back(i);
        by_firm_[s.firm_id].push_back(i);
        if (i == 0 || s.start < first_) first_ = s.start;
        if (i == 0 || s.end > last_) last_ = s.end;
    }
}

Membership Membership::read_csv(const std::string& path) {
    const CsvTable t = newsflow::read_csv(path);
    const auto c_firm = t.column("firm_id");
    const auto c_ticker = t.column("ticker");
    const auto c_start = t.column("start_date");
    const auto c_end = t.column("end_date");
    std::vector<Spell> spells;
    for (const auto& row : t.rows) {
        spells.push_back({static_cast<int>(parse_long(row.at(c_firm), "firm_id")), row.at(c_ticker),
                          parse_date(row.at(c_start)), parse_date(row.at(c_end))});
    }
    return Membership(std::move(spells));
}

std::optional<int> Membership::member_for_ticker(const std::string& ticker, Date d) const {
    if (!covers(d))
        throw DataError("membership lookup on " + format_date(d) + " outside covered range " + format_date(first_) +
                        ".." + format_date(last_));
    auto it = by_ticker_.find(ticker);
    if (it == by_ticker_.end()) return std::nullopt;
    for (auto idx : it->second) {
        const auto& s = spells_[idx];
        if (d >= s.start && d <= s.end) return s.firm_id;
    }
    return std::nullopt;
}

bool Membership::in_index(int firm_id, Date d) const {
    auto it = by_firm_.find(firm_id);
    if (it == by_firm_.end()) return false;
    for (auto idx : it->second) {
        const auto& s = spells_[idx];
        if (d >= s.start && d <= s.end) return true;
    }
    return false;
}

std::vector<int> Membership::firm_ids() const {
    std::vector<int> ids;
    ids.reserve(by_firm_.size());
    for (const auto& [id, _] : by_firm_) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

// ---------------------------------------------------------------------------
// Filtering

std::string_view to_string(DropReason r) {
    switch (r) {
        case DropReason::None: return "none";
        case DropReason::NoFirms: return "no_firms";
        case DropReason::TooManyFirms: return "too_many_firms";
        case DropReason::TooShort: return "too_short";
    }
    return "unknown";
}

FilterDecision filter_article(const RawArticle& raw, const Membership& membership, Date trading_day,
                              const FilterOptions& options) {
    FilterDecision d;
    std::set<int> firms;
    for (const auto& ticker : raw.tickers)
        if (auto f = membership.member_for_ticker(ticker, trading_day)) firms.insert(*f);
    d.firm_ids.assign(firms.begin(), firms.end());
    if (firms.empty()) {
        d.reason = DropReason::NoFirms;
    } else if (static_cast<int>(firms.size()) > options.max_firms) {
        d.reason = DropReason::TooManyFirms;
    } else if (static_cast<int>(raw_word_count(raw.body)) < options.min_words) {
        d.reason = DropReason::TooShort;
    } else {
        d.keep = true;
    }
    return d;
}

// ---------------------------------------------------------------------------
// Ingestion

std::size_t Corpus::token_total() const {
    std::size_t n = 0;
    for (const auto& a : articles) n += a.tokens.size();
    return n;
}

Corpus ingest(const std::vector<RawArticle>& raw, const Membership& membership, const TradingCalendar& calendar,
              const TimeZone& tz, const IngestOptions& options, IngestReport* report) {
    IngestReport local;
    IngestReport& rep = report ? *report : local;
    rep = IngestReport{};
    rep.read = raw.size();

    struct Pending {
        std::size_t raw_index;
        Session session;
        std::vector<int> firms;
    };
    std::vector<Pending> pending;
    std::set<std::string> ids;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const RawArticle& a = raw[i];
        if (!ids.insert(a.id).second) throw DataError("duplicate article id '" + a.id + "'");
        if (a.body.empty()) throw DataError("article '" + a.id + "' has an empty body");
        Session s;
        try {
            s = calendar.classify(tz.to_local(a.timestamp));
        } catch (const DataError&) {
            ++rep.dropped["outside_calendar"];
            continue;
        }
        if (!membership.covers(s.trading_day)) {
            ++rep.dropped["outside_membership"];
            continue;
        }
        FilterDecision d = filter_article(a, membership, s.trading_day, options.filter);
        if (!d.keep) {
            ++rep.dropped[std::string(to_string(d.reason))];
            continue;
        }
        pending.push_back({i, s, std::move(d.firm_ids)});
    }

    std::vector<std::vector<std::string>> token_lists(pending.size());
    const auto n = static_cast<long>(pending.size());
#pragma omp parallel for schedule(dynamic, 64)
    for (long i = 0; i < n; ++i) token_lists[i] = preprocess_text(raw[pending[i].raw_index].body);

    std::vector<std::vector<std::string>> vocab_docs;
    if (options.vocabulary_cutoff_year) {
        for (std::size_t i = 0; i < pending.size(); ++i)
            if (year_of(pending[i].session.trading_day) <= *options.vocabulary_cutoff_year)
                vocab_docs.push_back(token_lists[i]);
    } else {
        vocab_docs = token_lists;
    }

    Corpus corpus;
    corpus.vocabulary = build_vocabulary(vocab_docs, options.vocabulary);
    corpus.articles.resize(pending.size());
#pragma omp parallel for schedule(dynamic, 64)
    for (long i = 0; i < n; ++i) {
        const RawArticle& a = raw[pending[i].raw_index];
        Article& out = corpus.articles[i];
        out.id = a.id;
        out.firm_ids = pending[i].firms;
        out.session = pending[i].session;
        out.tokens = corpus.vocabulary.encode(token_lists[i]);
        out.word_count = static_cast<int>(raw_word_count(a.body));
    }
    rep.kept = corpus.articles.size();
    return corpus;
}

// ---------------------------------------------------------------------------
// Serialization

std::vector<RawArticle> read_articles_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::vector<RawArticle> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            RawArticle a;
            a.id = j.at("id").get<std::string>();
            a.timestamp = parse_rfc3339(j.at("timestamp").get<std::string>());
            a.body = j.at("body").get<std::string>();
            a.tickers = j.at("tickers").get<std::vector<std::string>>();
            out.push_back(std::move(a));
        } catch (const json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_articles_jsonl(const std::string& path, const std::vector<RawArticle>& articles) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    for (const auto& a : articles) {
        json j;
        j["id"] = a.id;
        j["timestamp"] = format_rfc3339(a.timestamp);
        j["tickers"] = a.tickers;
        j["body"] = a.body;
        out << j.dump() << '\n';
    }
}

void write_corpus(const std::string& path, const Corpus& corpus) {
    json j;
    j["format"] = "newsflow.corpus";
    j["version"] = kCorpusFormatVersion;
    json vocab = json::array();
    const auto& v = corpus.vocabulary;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto id = static_cast<std::int32_t>(i);
        vocab.push_back({{"token", v.token(id)}, {"df", v.document_frequency(id)}, {"tf", v.total_frequency(id)}});
    }
    j["vocabulary"] = std::move(vocab);
    json arts = json::array();
    for (const auto& a : corpus.articles) {
        arts.push_back({{"id", a.id},
                        {"firms", a.firm_ids},
                        {"day", format_date(a.session.trading_day)},
                        {"period", std::string(to_string(a.session.period))},
                        {"words", a.word_count},
                        {"tokens", a.tokens}});
    }
    j["articles"] = std::move(arts);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << j.dump() << '\n';
}

Corpus read_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
    if (j.value("format", "") != "newsflow.corpus") throw DataError(path + ": not a corpus file");
    if (j.value("version", 0) != kCorpusFormatVersion)
        throw DataError(path + ": unsupported corpus version " + std::to_string(j.value("version", 0)));
    std::vector<std::string> tokens;
    std::vector<int> df;
    std::vector<int> tf;
    for (const auto& e : j.at("vocabulary")) {
        tokens.push_back(e.at("token").get<std::string>());
        df.push_back(e.at("df").get<int>());
        tf.push_back(e.at("tf").get<int>());
    }
    Corpus c;
    c.vocabulary = Vocabulary(std::move(tokens), std::move(df), std::move(tf));
    const auto vsize = static_cast<std::int32_t>(c.vocabulary.size());
    for (const auto& e : j.at("articles")) {
        Article a;
        a.id = e.at("id").get<std::string>();
        a.firm_ids = e.at("firms").get<std::vector<int>>();
        a.session = {parse_date(e.at("day").get<std::string>()), period_from_string(e.at("period").get<std::string>())};
        a.word_count = e.at("words").get<int>();
        a.tokens = e.at("tokens").get<std::vector<std::int32_t>>();
        for (auto t : a.tokens)
            if (t < 0 || t >= vsize) throw DataError(path + ": token id out of range in article " + a.id);
        c.articles.push_back(std::move(a));
    }
    return c;
}

}  // namespace newsflow
