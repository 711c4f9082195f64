#include <newsflow/backtest.hpp>
#include <newsflow/calendar.hpp>
#include <newsflow/corpus.hpp>
#include <newsflow/csv.hpp>
#include <newsflow/econometrics.hpp>
#include <newsflow/exposure.hpp>
#include <newsflow/forecast.hpp>
#include <newsflow/lda.hpp>
#include <newsflow/pipeline.hpp>
#include <newsflow/returns.hpp>
#include <newsflow/synth.hpp>
#include <newsflow/tables.hpp>
#include <newsflow/text.hpp>

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>

namespace newsflow {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Config reading

std::string kind_of(const json& v) {
    if (v.is_boolean()) return "a boolean";
    if (v.is_number_integer()) return "an integer";
    if (v.is_number()) return "a number";
    if (v.is_string()) return "a string";
    if (v.is_array()) return "an array";
    if (v.is_object()) return "an object";
    return "null";
}

class Section {
public:
    Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ConfigError(path_ + ": expected an object, got " + kind_of(obj_));
    }

    std::string at(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* find(const char* key) {
        seen_.insert(key);
        auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    void get(const char* key, int& out) {
        if (auto* v = find(key)) {
            if (!v->is_number_integer()) throw ConfigError(at(key) + ": expected an integer, got " + kind_of(*v));
            out = v->get<int>();
        }
    }
    void get(const char* key, std::uint64_t& out) {
        if (auto* v = find(key)) {
            if (!v->is_number_integer() || v->get<long long>() < 0)
                throw ConfigError(at(key) + ": expected a nonnegative integer, got " + kind_of(*v));
            out = v->get<std::uint64_t>();
        }
    }
    void get(const char* key, double& out) {
        if (auto* v = find(key)) {
            if (!v->is_number()) throw ConfigError(at(key) + ": expected a number, got " + kind_of(*v));
            out = v->get<double>();
        }
    }
    void get(const char* key, bool& out) {
        if (auto* v = find(key)) {
            if (!v->is_boolean()) throw ConfigError(at(key) + ": expected a boolean, got " + kind_of(*v));
            out = v->get<bool>();
        }
    }
    void get(const char* key, std::string& out) {
        if (auto* v = find(key)) {
            if (!v->is_string()) throw ConfigError(at(key) + ": expected a string, got " + kind_of(*v));
            out = v->get<std::string>();
        }
    }
    void get(const char* key, std::vector<int>& out) {
        if (auto* v = find(key)) {
            if (!v->is_array()) throw ConfigError(at(key) + ": expected an array of integers, got " + kind_of(*v));
            out.clear();
            for (std::size_t i = 0; i < v->size(); ++i) {
                if (!(*v)[i].is_number_integer())
                    throw ConfigError(at(key) + "[" + std::to_string(i) + "]: expected an integer");
                out.push_back((*v)[i].get<int>());
            }
        }
    }
    void get(const char* key, Variant& out) {
        std::string s;
        if (find(key)) {
            get(key, s);
            try {
                out = variant_from_string(s);
            } catch (const Error&) {
                throw ConfigError(at(key) + ": expected one of V1, V2, V3, V4, got '" + s + "'");
            }
        }
    }

    void finish() const {
        for (const auto& [key, v] : obj_.items())
            if (!seen_.count(key)) throw ConfigError(at(key.c_str()) + ": unknown field");
    }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

void apply_override(json& root, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "': expected key.path=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::exception&) {
        value = text;
    }
    json* node = &root;
    std::size_t start = 0;
    for (;;) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("override '" + assignment + "': empty path component");
        if (!node->is_object()) throw ConfigError("override '" + key + "': " + key.substr(0, start ? start - 1 : 0) + " is not an object");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

json config_json(const PipelineConfig& c, bool include_output) {
    json paths = {{"articles", c.paths.articles},   {"prices", c.paths.prices},
                  {"dividends", c.paths.dividends}, {"membership", c.paths.membership},
                  {"holidays", c.paths.holidays},   {"fundamentals", c.paths.fundamentals}};
    if (include_output) paths["output"] = c.paths.output;
    return {
        {"paths", paths},
        {"timezone", c.timezone},
        {"seed", c.seed},
        {"parallel", c.parallel},
        {"ingest",
         {{"max_firms", c.max_firms},
          {"min_words", c.min_words},
          {"min_total_count", c.min_total_count},
          {"min_document_count", c.min_document_count}}},
        {"train",
         {{"topics", c.topics},
          {"beta", c.beta},
          {"cutoff_year", c.cutoff_year},
          {"chains", c.branching.chains_per_round},
          {"rounds", c.branching.rounds},
          {"iterations", c.branching.iterations_per_round},
          {"holdout", c.branching.holdout_fraction},
          {"fold_in_burn_in", c.fold_in_burn_in},
          {"fold_in_samples", c.fold_in_samples}}},
        {"forecast",
         {{"window", c.window},
          {"variant", std::string(to_string(c.variant))},
          {"pool_years", c.pool_years},
          {"use_controls", c.use_controls},
          {"folds", c.folds},
          {"portfolio_size", c.portfolio_size},
          {"contribution_count", c.contribution_count}}},
        {"backtest", {{"m", c.m_grid}}},
        {"synth", json::parse(synth_config_to_json(c.synth))},
    };
}

// ---------------------------------------------------------------------------
// Run directory, hashing and manifest

enum : std::uint64_t { kSeedTrain = 2, kSeedForecast = 4, kSeedSplit = 5 };

/// Bumped whenever a stage's output format or semantics change.
constexpr std::string_view kArtifactVersion = "newsflow-artifacts-1";

struct Run {
    const PipelineConfig& cfg;
    fs::path root;

    explicit Run(const PipelineConfig& c) : cfg(c), root(c.paths.output) {}

    std::string path(const std::string& rel) const { return (root / rel).string(); }

    /// Raw input: explicit path, or the synth stage's file.
    std::string input(const std::string& configured, const char* synth_name) const {
        return configured.empty() ? path(std::string("synth/") + synth_name) : configured;
    }
    std::string articles() const { return input(cfg.paths.articles, "articles.jsonl"); }
    std::string prices() const { return input(cfg.paths.prices, "prices.csv"); }
    std::string dividends() const { return input(cfg.paths.dividends, "dividends.csv"); }
    std::string membership() const { return input(cfg.paths.membership, "membership.csv"); }
    std::string holidays() const { return input(cfg.paths.holidays, "holidays.csv"); }
    /// Empty when no fundamentals are configured.
    std::string fundamentals() const {
        if (!cfg.paths.fundamentals.empty()) return cfg.paths.fundamentals;
        return cfg.synthetic_inputs() ? path("synth/fundamentals.csv") : std::string();
    }

    void require_raw(const std::string& file, const char* field) const {
        if (fs::exists(file)) return;
        if (cfg.synthetic_inputs()) throw ConfigError("missing " + file + "; run the 'synth' stage first");
        throw ConfigError(std::string("paths.") + field + ": file not found: " + file);
    }
    /// Run-directory artifact produced by `stage`.
    std::string require(const std::string& rel, Stage stage) const {
        const std::string p = path(rel);
        if (!fs::exists(p))
            throw ConfigError("missing " + rel + " in " + root.string() + "; run the '" + std::string(to_string(stage)) +
                              "' stage first");
        return p;
    }
};

std::string hex(const unsigned char* d, unsigned n) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    for (unsigned i = 0; i < n; ++i) {
        s += digits[d[i] >> 4];
        s += digits[d[i] & 15];
    }
    return s;
}

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) throw Error("SHA-256 initialisation failed");
    }
    ~Sha256() { EVP_MD_CTX_free(ctx_); }
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_, data, n); }
    std::string hex_digest() {
        unsigned char d[EVP_MAX_MD_SIZE];
        unsigned n = 0;
        EVP_DigestFinal_ex(ctx_, d, &n);
        return hex(d, n);
    }

private:
    EVP_MD_CTX* ctx_;
};

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << j.dump(2) << '\n';
}

/// Inputs and config subset a stage reads, plus the key derived from them.
struct StageRecord {
    json config = json::object();
    json inputs = json::object();  // label -> sha256
    std::string key;

    void add_input(const std::string& label, const std::string& file) { inputs[label] = sha256_file(file); }
    void seal(Stage s) {
        key = sha256_text(std::string(kArtifactVersion) + '\n' + std::string(to_string(s)) + '\n' + config.dump() + '\n' +
                          inputs.dump());
    }
};

json read_manifest(const Run& run) {
    const std::string p = run.path("manifest.json");
    if (!fs::exists(p)) return json::object();
    try {
        json m = read_json_file(p);
        return m.is_object() ? m : json::object();
    } catch (const Error&) {
        return json::object();
    }
}

bool cache_valid(const Run& run, Stage stage, const StageRecord& rec) {
    const json m = read_manifest(run);
    const std::string name(to_string(stage));
    if (!m.contains("stages") || !m["stages"].contains(name)) return false;
    const json& s = m["stages"][name];
    if (s.value("key", "") != rec.key || !s.contains("outputs")) return false;
    for (const auto& [rel, hash] : s["outputs"].items()) {
        const std::string p = run.path(rel);
        if (!fs::exists(p) || sha256_file(p) != hash.get<std::string>()) return false;
    }
    return true;
}

std::vector<std::string> cached_outputs(const Run& run, Stage stage) {
    std::vector<std::string> out;
    const json m = read_manifest(run);
    for (const auto& [rel, hash] : m["stages"][std::string(to_string(stage))]["outputs"].items()) out.push_back(rel);
    return out;
}

void record_stage(const Run& run, const std::string& name, const StageRecord& rec, const std::vector<std::string>& outputs) {
    json m = read_manifest(run);
    m["seed"] = run.cfg.seed;
    m["config"] = config_json(run.cfg, false);
    json outs = json::object();
    for (const auto& rel : outputs) outs[rel] = sha256_file(run.path(rel));
    m["stages"][name] = {{"key", rec.key}, {"config", rec.config}, {"inputs", rec.inputs}, {"outputs", outs}};
    write_json_file(run.path("manifest.json"), m);
}

void log(Stage s, const std::string& msg) { std::cerr << "[" << to_string(s) << "] " << msg << '\n'; }

// ---------------------------------------------------------------------------
// Shared loaders

TradingCalendar load_calendar(const Run& run) {
    const json j = read_json_file(run.require("ingest/calendar.json", Stage::Ingest));
    std::set<Date> holidays;
    for (const auto& h : j.at("holidays")) holidays.insert(parse_date(h.get<std::string>()));
    return TradingCalendar(parse_date(j.at("first").get<std::string>()), parse_date(j.at("last").get<std::string>()),
                           std::move(holidays));
}

ReturnPanel load_returns(const Run& run, const TradingCalendar& cal) {
    return read_returns_csv(run.require("ingest/returns.csv", Stage::Ingest), cal);
}

std::optional<Controls> load_controls(const Run& run, const ReturnPanel& panel) {
    if (!run.cfg.use_controls) return std::nullopt;
    const std::string f = run.fundamentals();
    if (f.empty()) return std::nullopt;
    run.require_raw(f, "fundamentals");
    return build_controls(panel, read_fundamentals(f));
}

std::vector<ForecastSet> read_forecasts_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    const auto cy = t.column("year"), cv = t.column("variant"), cf = t.column("firm_id"), ci = t.column("f_intraday"),
               co = t.column("f_overnight");
    std::map<int, ForecastSet> by_year;
    for (const auto& r : t.rows) {
        const int y = static_cast<int>(parse_long(r[cy], "year"));
        ForecastSet& s = by_year[y];
        s.year = y;
        s.variant = variant_from_string(r[cv]);
        s.rows.push_back({static_cast<int>(parse_long(r[cf], "firm_id")), parse_double(r[ci], "f_intraday"),
                          parse_double(r[co], "f_overnight")});
    }
    std::vector<ForecastSet> out;
    for (auto& [y, s] : by_year) out.push_back(std::move(s));
    return out;
}

std::vector<std::tuple<int, Period, ContributionResult>> read_contributions_csv(const std::string& path, int K) {
    const CsvTable t = read_csv(path);
    const auto cy = t.column("year"), cp = t.column("period"), ck = t.column("topic"), cv = t.column("value"),
               cs = t.column("beta_sign"), ct = t.column("top_rank");
    std::map<std::pair<int, int>, ContributionResult> by_key;
    for (const auto& r : t.rows) {
        const int y = static_cast<int>(parse_long(r[cy], "year"));
        const Period p = period_from_string(r[cp]);
        auto& c = by_key[{y, index_of(p)}];
        if (c.phi.size() == 0) c.phi = Eigen::VectorXd::Zero(K);
        const int k = static_cast<int>(parse_long(r[ck], "topic"));
        if (k < 0 || k >= K) throw DataError(path + ": topic out of range");
        const double v = parse_double(r[cv], "value");
        c.phi(k) = v;
        if (!r[ct].empty())
            c.top.push_back({k, v, static_cast<int>(parse_long(r[cs], "beta_sign"))});
    }
    std::vector<std::tuple<int, Period, ContributionResult>> out;
    for (auto& [key, c] : by_key) {
        out.emplace_back(key.first, static_cast<Period>(key.second), std::move(c));
    }
    return out;
}

/// Forecast years t with zbar at t-1, returns at t and a holding year t+1.
std::vector<int> forecast_years(const std::vector<AnnualStats>& annual, const WindowedExposure& zbar) {
    std::set<int> ret_years, z_years;
    for (const auto& a : annual) ret_years.insert(a.year);
    for (const auto& k : zbar.keys) z_years.insert(k.second);
    std::vector<int> out;
    for (int t : ret_years)
        if (z_years.count(t - 1) && z_years.count(t) && ret_years.count(t + 1)) out.push_back(t);
    return out;
}

std::map<int, std::vector<int>> firms_by_year(const std::vector<AnnualStats>& annual) {
    std::map<int, std::vector<int>> out;
    for (const auto& a : annual)
        if (a.days > 0) out[a.year].push_back(a.firm);
    for (auto& [y, v] : out) std::sort(v.begin(), v.end());
    return out;
}

FitOptions fit_options(const PipelineConfig& c, bool have_controls) {
    FitOptions f;
    f.pool_years = c.pool_years;
    f.use_controls = c.use_controls && have_controls;
    f.seed = derive_seed(c.seed, {kSeedForecast});
    f.lasso.folds = c.folds;
    f.lasso.parallel = c.parallel;
    return f;
}

void emit_table(const Run& run, std::vector<std::string>& outputs, const std::string& name, const Table& t) {
    const std::string base = "backtest/tables/" + name;
    write_table_csv(run.path(base + ".csv"), t);
    write_table_text(run.path(base + ".txt"), t);
    outputs.push_back(base + ".csv");
    outputs.push_back(base + ".txt");
}

json cells_json(const std::vector<AverageCell>& cells) {
    json j = json::array();
    for (const auto& c : cells)
        j.push_back({{"name", c.name}, {"mean_bps", c.mean}, {"se", c.se}, {"t", c.t}, {"p", c.p_value}, {"lags", c.lags},
                     {"nobs", c.nobs}});
    return j;
}

// ---------------------------------------------------------------------------
// Stages

StageOutcome stage_synth(const Run& run, bool force) {
    StageRecord rec;
    rec.config = json::parse(synth_config_to_json(run.cfg.synth));
    rec.seal(Stage::Synth);
    if (!force && cache_valid(run, Stage::Synth, rec)) return {Stage::Synth, true, cached_outputs(run, Stage::Synth)};
    const SynthDataset data = generate_dataset(run.cfg.synth);
    std::vector<std::string> outputs;
    for (const auto& f : write_dataset(run.path("synth"), data)) outputs.push_back("synth/" + f);
    log(Stage::Synth, std::to_string(data.corpus.articles.size()) + " articles, " +
                          std::to_string(data.truth.firms.size()) + " firms, " + std::to_string(run.cfg.synth.years) +
                          " years");
    record_stage(run, "synth", rec, outputs);
    return {Stage::Synth, false, outputs};
}

StageOutcome stage_ingest(const Run& run, bool force) {
    const auto& c = run.cfg;
    run.require_raw(run.articles(), "articles");
    run.require_raw(run.prices(), "prices");
    run.require_raw(run.dividends(), "dividends");
    run.require_raw(run.membership(), "membership");
    run.require_raw(run.holidays(), "holidays");
    StageRecord rec;
    rec.config = {{"timezone", c.timezone},
                  {"max_firms", c.max_firms},
                  {"min_words", c.min_words},
                  {"min_total_count", c.min_total_count},
                  {"min_document_count", c.min_document_count},
                  {"cutoff_year", c.cutoff_year}};
    rec.add_input("articles", run.articles());
    rec.add_input("prices", run.prices());
    rec.add_input("dividends", run.dividends());
    rec.add_input("membership", run.membership());
    rec.add_input("holidays", run.holidays());
    rec.seal(Stage::Ingest);
    if (!force && cache_valid(run, Stage::Ingest, rec)) return {Stage::Ingest, true, cached_outputs(run, Stage::Ingest)};

    const Membership membership = Membership::read_csv(run.membership());
    if (membership.spells().empty()) throw DataError(run.membership() + ": no membership spells");
    const std::set<Date> holidays = TradingCalendar::read_holidays(run.holidays());
    const TradingCalendar cal(membership.first(), membership.last(), holidays);
    const TimeZone tz = TimeZone::from_name(c.timezone);

    IngestOptions io;
    io.filter.max_firms = c.max_firms;
    io.filter.min_words = c.min_words;
    io.vocabulary.min_total_count = c.min_total_count;
    io.vocabulary.min_document_count = c.min_document_count;
    if (c.cutoff_year > 0) io.vocabulary_cutoff_year = c.cutoff_year;
    IngestReport report;
    const Corpus corpus = ingest(read_articles_jsonl(run.articles()), membership, cal, tz, io, &report);
    const ReturnPanel panel =
        build_returns(read_prices(run.prices()), read_dividends(run.dividends()), membership, cal);

    fs::create_directories(run.path("ingest"));
    write_corpus(run.path("ingest/corpus.bin"), corpus);
    write_returns_csv(run.path("ingest/returns.csv"), panel);
    json hol = json::array();
    for (Date d : holidays) hol.push_back(format_date(d));
    write_json_file(run.path("ingest/calendar.json"),
                    {{"first", format_date(cal.first())}, {"last", format_date(cal.last())}, {"holidays", hol}});
    write_json_file(run.path("ingest/report.json"), {{"read", report.read},
                                                     {"kept", report.kept},
                                                     {"dropped", report.dropped},
                                                     {"vocabulary", corpus.vocabulary.size()},
                                                     {"tokens", corpus.token_total()},
                                                     {"firms", panel.firms().size()},
                                                     {"trading_days", panel.days().size()}});
    log(Stage::Ingest, "kept " + std::to_string(report.kept) + "/" + std::to_string(report.read) + " articles, vocabulary " +
                           std::to_string(corpus.vocabulary.size()));
    const std::vector<std::string> outputs{"ingest/corpus.bin", "ingest/returns.csv", "ingest/calendar.json",
                                           "ingest/report.json"};
    record_stage(run, "ingest", rec, outputs);
    return {Stage::Ingest, false, outputs};
}

TrainOptions train_options(const PipelineConfig& c) {
    TrainOptions o;
    o.topics = c.resolved_topics();
    o.priors = LdaPriors{50.0 / o.topics, c.beta};
    o.branching = c.branching;
    o.seed = derive_seed(c.seed, {kSeedTrain});
    if (c.cutoff_year > 0) o.cutoff_year = c.cutoff_year;
    o.fold_in.burn_in = c.fold_in_burn_in;
    o.fold_in.samples = c.fold_in_samples;
    o.parallel = c.parallel;
    return o;
}

StageOutcome stage_train(const Run& run, bool force) {
    const auto& c = run.cfg;
    const std::string corpus_file = run.require("ingest/corpus.bin", Stage::Ingest);
    const std::string returns_file = run.require("ingest/returns.csv", Stage::Ingest);
    const std::string cal_file = run.require("ingest/calendar.json", Stage::Ingest);
    StageRecord rec;
    const TrainOptions opts = train_options(c);
    rec.config = {{"topics", opts.topics},
                  {"beta", c.beta},
                  {"cutoff_year", c.cutoff_year},
                  {"chains", c.branching.chains_per_round},
                  {"rounds", c.branching.rounds},
                  {"iterations", c.branching.iterations_per_round},
                  {"holdout", c.branching.holdout_fraction},
                  {"fold_in", {c.fold_in_burn_in, c.fold_in_samples}},
                  {"seed", c.seed}};
    rec.add_input("corpus", corpus_file);
    rec.add_input("returns", returns_file);
    rec.add_input("calendar", cal_file);
    rec.seal(Stage::Train);
    if (!force && cache_valid(run, Stage::Train, rec)) return {Stage::Train, true, cached_outputs(run, Stage::Train)};

    const Corpus corpus = read_corpus(corpus_file);
    const TradingCalendar cal = load_calendar(run);
    const ReturnPanel panel = load_returns(run, cal);
    TrainReport report;
    const TopicModel model = train_model(
        corpus, [&](int firm, Date d, Period p) { return panel.get(firm, d, p); }, opts, &report);

    fs::create_directories(run.path("train"));
    write_model(run.path("train/model.bin"), model);
    write_topics_json(run.path("train/topics.json"), model, corpus.vocabulary);
    json scores = json::array();
    for (const auto& s : report.scores) scores.push_back({{"round", s.round}, {"chain", s.chain}, {"r2", s.r2}});
    write_json_file(run.path("train/report.json"), {{"topics", model.K},
                                                    {"frozen", model.frozen},
                                                    {"cutoff_year", model.cutoff_year},
                                                    {"final_score", report.final_score},
                                                    {"winners", report.winners},
                                                    {"scores", scores},
                                                    {"training_documents", report.training_documents},
                                                    {"inferred_documents", report.inferred_documents},
                                                    {"empty_documents", report.empty_documents}});
    log(Stage::Train, "K=" + std::to_string(model.K) + ", winner OOS R2 " + format_double(report.final_score));
    const std::vector<std::string> outputs{"train/model.bin", "train/topics.json", "train/report.json"};
    record_stage(run, "train", rec, outputs);
    return {Stage::Train, false, outputs};
}

Table persistence_table(const ExposurePanel& annual, std::vector<std::string>& failures) {
    Table t;
    t.title = "Topic persistence regressions";
    t.columns.push_back("");
    std::vector<std::string> rho{"rho"}, se{""}, r2{"Adj. R2"}, n{"N"};
    for (PersistenceSession s : {PersistenceSession::Intraday, PersistenceSession::Overnight, PersistenceSession::All})
        for (FixedEffects f : {FixedEffects::None, FixedEffects::Topic, FixedEffects::Firm, FixedEffects::Both}) {
            t.columns.push_back(std::string(to_string(s)) + "/" + std::string(to_string(f)));
            try {
                const PersistenceResult r = persistence_regression(annual, s, f);
                rho.push_back(coefficient_cell(r.rho, r.p_value, 3));
                se.push_back(se_cell(r.se, 3));
                r2.push_back(format_fixed(r.adj_r2, 3));
                n.push_back(std::to_string(r.nobs));
            } catch (const Error& e) {
                failures.push_back(t.columns.back() + ": " + e.what());
                for (auto* v : {&rho, &se, &r2, &n}) v->push_back("");
            }
        }
    t.rows = {rho, se, r2, n};
    t.notes.push_back("Standard errors clustered by topic and firm.");
    for (const auto& f : failures) t.notes.push_back("not estimable: " + f);
    return t;
}

StageOutcome stage_exposures(const Run& run, bool force) {
    const std::string corpus_file = run.require("ingest/corpus.bin", Stage::Ingest);
    const std::string returns_file = run.require("ingest/returns.csv", Stage::Ingest);
    const std::string cal_file = run.require("ingest/calendar.json", Stage::Ingest);
    const std::string model_file = run.require("train/model.bin", Stage::Train);
    StageRecord rec;
    rec.add_input("corpus", corpus_file);
    rec.add_input("returns", returns_file);
    rec.add_input("calendar", cal_file);
    rec.add_input("model", model_file);
    rec.seal(Stage::Exposures);
    if (!force && cache_valid(run, Stage::Exposures, rec))
        return {Stage::Exposures, true, cached_outputs(run, Stage::Exposures)};

    const Corpus corpus = read_corpus(corpus_file);
    const TopicModel model = read_model(model_file);
    const TradingCalendar cal = load_calendar(run);
    const ReturnPanel panel = load_returns(run, cal);
    ExposureOptions eo;
    eo.granularity = Granularity::Annual;
    eo.firms.insert(panel.firms().begin(), panel.firms().end());
    for (const auto& a : panel.annual())
        if (a.days > 0) eo.universe.emplace_back(a.firm, a.year);
    eo.parallel = run.cfg.parallel;
    const ExposurePanel annual = compute_exposures(corpus, model, eo);

    fs::create_directories(run.path("exposures"));
    write_exposure_binary(run.path("exposures/annual.bin"), annual);
    write_exposure_csv(run.path("exposures/annual.csv"), annual);
    std::vector<std::string> failures;
    const Table t = persistence_table(annual, failures);
    write_table_csv(run.path("exposures/persistence.csv"), t);
    write_table_text(run.path("exposures/persistence.txt"), t);
    log(Stage::Exposures, std::to_string(annual.rows()) + " firm-years");
    const std::vector<std::string> outputs{"exposures/annual.bin", "exposures/annual.csv", "exposures/persistence.csv",
                                           "exposures/persistence.txt"};
    record_stage(run, "exposures", rec, outputs);
    return {Stage::Exposures, false, outputs};
}

StageOutcome stage_forecast(const Run& run, bool force) {
    const auto& c = run.cfg;
    const std::string exp_file = run.require("exposures/annual.bin", Stage::Exposures);
    const std::string returns_file = run.require("ingest/returns.csv", Stage::Ingest);
    const std::string cal_file = run.require("ingest/calendar.json", Stage::Ingest);
    StageRecord rec;
    rec.config = config_json(c, false)["forecast"];
    rec.config["seed"] = c.seed;
    rec.add_input("exposures", exp_file);
    rec.add_input("returns", returns_file);
    rec.add_input("calendar", cal_file);
    if (c.use_controls && !run.fundamentals().empty()) {
        run.require_raw(run.fundamentals(), "fundamentals");
        rec.add_input("fundamentals", run.fundamentals());
    }
    rec.seal(Stage::Forecast);
    if (!force && cache_valid(run, Stage::Forecast, rec))
        return {Stage::Forecast, true, cached_outputs(run, Stage::Forecast)};

    const TradingCalendar cal = load_calendar(run);
    const ReturnPanel panel = load_returns(run, cal);
    const auto annual = panel.annual();
    const ExposurePanel exposures = read_exposure_binary(exp_file);
    const WindowedExposure zbar = window_sum(exposures, c.window);
    const auto controls = load_controls(run, panel);
    const auto years = forecast_years(annual, zbar);
    if (years.empty()) throw DataError("no year has both windowed exposures and a following holding year");
    const auto members = firms_by_year(annual);
    const FitOptions fit = fit_options(c, controls.has_value());

    std::vector<ForecastModel> models;
    std::vector<ForecastSet> sets;
    std::vector<Selection> selections;
    fs::create_directories(run.path("forecast"));
    auto contrib_writer = std::make_unique<CsvWriter>(run.path("forecast/contributions.csv"));
    CsvWriter& contrib = *contrib_writer;
    contrib.row({"year", "period", "topic", "value", "beta_sign", "top_rank"});
    for (int t : years) {
        ForecastModel m = fit_rolling(annual, zbar, controls ? &*controls : nullptr, c.variant, t, fit);
        const ForecastSet fs = forecast(m, zbar, members.at(t + 1));
        Selection sel = select_portfolios(fs, c.portfolio_size);
        std::vector<int> universe;
        for (const auto& r : fs.rows) universe.push_back(r.firm);
        for (Period p : {Period::Overnight, Period::Intraday}) {
            const auto& set = p == Period::Overnight ? sel.ls_o : sel.ss_i;
            const ContributionResult cr = topic_contributions(m, zbar, t, set, universe, p, c.contribution_count);
            for (int k = 0; k < m.K; ++k) {
                std::string rank;
                int sign = 0;
                for (std::size_t i = 0; i < cr.top.size(); ++i)
                    if (cr.top[i].topic == k) {
                        rank = std::to_string(i + 1);
                        sign = cr.top[i].beta_sign;
                    }
                contrib.field(t + 1).field(std::string(to_string(p))).field(k).field(cr.phi(k)).field(sign).field(rank);
                contrib.end_row();
            }
        }
        log(Stage::Forecast, "year " + std::to_string(t) + ": " + std::to_string(m.selected_topic_count) +
                                 " topics selected, lambda " + format_double(m.lambda));
        models.push_back(std::move(m));
        sets.push_back(fs);
        selections.push_back(std::move(sel));
    }
    contrib_writer.reset();
    write_models_json(run.path("forecast/models.json"), models);
    write_forecasts_csv(run.path("forecast/forecasts.csv"), sets);
    write_selections_csv(run.path("forecast/selections.csv"), selections);
    const std::vector<std::string> outputs{"forecast/models.json", "forecast/forecasts.csv", "forecast/selections.csv",
                                           "forecast/contributions.csv"};
    record_stage(run, "forecast", rec, outputs);
    return {Stage::Forecast, false, outputs};
}

Table decomposition_table(const std::vector<int>& ms, const std::vector<DecompositionResult>& im,
                          const std::vector<DecompositionResult>& iim) {
    Table t;
    t.title = "Removing the inventory management effects";
    t.columns.push_back("");
    for (int m : ms) t.columns.push_back("IM m=" + std::to_string(m));
    for (int m : ms) t.columns.push_back("IIM m=" + std::to_string(m));
    const char* labels[4] = {"Both", "Sel-Rank", "Rank-Sel", "Rem"};
    for (int cell = 0; cell < 4; ++cell) {
        std::vector<std::string> coef{labels[cell]}, se{""};
        for (const auto* group : {&im, &iim})
            for (const auto& r : *group) {
                coef.push_back(coefficient_cell(r.coefficient[static_cast<std::size_t>(cell)],
                                                r.p_value[static_cast<std::size_t>(cell)], 2));
                se.push_back(se_cell(r.se[static_cast<std::size_t>(cell)], 2));
            }
        t.rows.push_back(std::move(coef));
        t.rows.push_back(std::move(se));
    }
    std::vector<std::string> n{"N"};
    for (const auto* group : {&im, &iim})
        for (const auto& r : *group) n.push_back(std::to_string(r.regression.nobs));
    t.rows.push_back(std::move(n));
    t.notes.push_back("Coefficients in bps; standard errors clustered by day and firm. IM: LS_o by lowest intraday "
                      "returns, next overnight return; IIM: SS_i by highest overnight returns, same-day intraday return.");
    return t;
}

Table io_table(const IoPanelsResult& io) {
    std::vector<RegressionColumn> cols;
    for (const auto& r : io.regressions) {
        const char* pn = r.p == 0 ? "intra" : "over";
        const char* qn = r.q == 0 ? "intra" : "over";
        cols.push_back({std::string(pn) + "<-" + qn + " " + r.spec, &r.regression});
    }
    Table t = regression_table("News-based components of over-intra correlations", cols,
                               {"r_intra_t", "r_over_t", "f_intra_t", "f_over_t"}, 3);
    t.notes.push_back("Year fixed effects; standard errors clustered by year and firm.");
    return t;
}

StageOutcome stage_backtest(const Run& run, bool force) {
    const auto& c = run.cfg;
    const std::string returns_file = run.require("ingest/returns.csv", Stage::Ingest);
    const std::string cal_file = run.require("ingest/calendar.json", Stage::Ingest);
    const std::string exp_file = run.require("exposures/annual.bin", Stage::Exposures);
    const std::string sel_file = run.require("forecast/selections.csv", Stage::Forecast);
    const std::string models_file = run.require("forecast/models.json", Stage::Forecast);
    const std::string fc_file = run.require("forecast/forecasts.csv", Stage::Forecast);
    const std::string contrib_file = run.require("forecast/contributions.csv", Stage::Forecast);
    StageRecord rec;
    rec.config = config_json(c, false)["backtest"];
    rec.config["forecast"] = config_json(c, false)["forecast"];
    rec.config["cutoff_year"] = c.cutoff_year;
    rec.config["seed"] = c.seed;
    for (const auto& [label, file] : {std::pair<const char*, std::string>{"returns", returns_file},
                                      {"calendar", cal_file},
                                      {"exposures", exp_file},
                                      {"selections", sel_file},
                                      {"models", models_file},
                                      {"forecasts", fc_file},
                                      {"contributions", contrib_file}})
        rec.add_input(label, file);
    if (c.use_controls && !run.fundamentals().empty()) {
        run.require_raw(run.fundamentals(), "fundamentals");
        rec.add_input("fundamentals", run.fundamentals());
    }
    rec.seal(Stage::Backtest);
    if (!force && cache_valid(run, Stage::Backtest, rec))
        return {Stage::Backtest, true, cached_outputs(run, Stage::Backtest)};

    const TradingCalendar cal = load_calendar(run);
    const ReturnPanel panel = load_returns(run, cal);
    const auto annual = panel.annual();
    const auto selections = read_selections_csv(sel_file);
    const auto models = read_models_json(models_file);
    const auto forecasts = read_forecasts_csv(fc_file);
    const ExposurePanel exposures = read_exposure_binary(exp_file);
    const WindowedExposure zbar = window_sum(exposures, c.window);
    const auto controls = load_controls(run, panel);
    const Controls* ctrl = controls ? &*controls : nullptr;
    if (selections.empty()) throw DataError(sel_file + ": no selections");

    fs::create_directories(run.path("backtest/tables"));
    std::vector<std::string> outputs;
    json summary;

    // Average daily returns, full sample and after the model cutoff.
    const DailyPortfolioSeries series = portfolio_series(selections, panel);
    const auto avg = average_return_table(series);
    std::vector<std::vector<AverageCell>> avg_rows{avg};
    std::vector<std::string> avg_labels{std::to_string(selections.front().year) + "-" + std::to_string(selections.back().year)};
    summary["average"] = cells_json(avg);
    if (c.cutoff_year > 0) {
        std::vector<Selection> late;
        for (const auto& s : selections)
            if (s.year > c.cutoff_year) late.push_back(s);
        if (!late.empty()) {
            const auto late_avg = average_return_table(portfolio_series(late, panel));
            avg_rows.push_back(late_avg);
            avg_labels.push_back(std::to_string(late.front().year) + "-" + std::to_string(late.back().year));
            summary["average_after_cutoff"] = cells_json(late_avg);
        }
    }
    emit_table(run, outputs, "average_returns", average_table("Average daily returns", avg_rows, avg_labels));

    // Over-intra correlations of annual returns.
    std::vector<AnnualReturnRow> arows;
    for (const auto& a : annual)
        if (a.days > 0) arows.push_back({a.firm, a.year, a.intraday, a.overnight});
    emit_table(run, outputs, "over_intra_correlations", correlation_table_view(correlation_table(arows)));

    // Characteristics-adjusted returns.
    AdjustedOptions base_opts;
    base_opts.baseline = true;
    base_opts.use_controls = ctrl != nullptr;
    AdjustedOptions main_opts;
    main_opts.use_controls = ctrl != nullptr;
    AdjustedOptions lag_opts = main_opts;
    lag_opts.include_lags = true;
    const AdjustedResult base = characteristics_adjusted(panel, selections, ctrl, base_opts);
    const AdjustedResult adj = characteristics_adjusted(panel, selections, ctrl, main_opts);
    const AdjustedResult lagged = characteristics_adjusted(panel, selections, ctrl, lag_opts);
    {
        const std::vector<RegressionResult> scaled{base.regression, adj.regression, lagged.regression};
        Table t = regression_table("Characteristics-adjusted returns",
                                   {{"Baseline", &scaled[0]}, {"Selections", &scaled[1]}, {"With lags", &scaled[2]}},
                                   {"const", "d_intra", "b0", "b_SNS", "b_LNS", "b_SS", "r_intra_lag1:i",
                                    "r_over_same:i", "r_intra_lag1:o", "r_over_lag1:o"},
                                   2);
        t.notes.push_back("Coefficients in bps; standard errors clustered by day and firm.");
        for (const auto* r : {&adj, &lagged}) {
            const std::string which = r == &adj ? "Selections" : "With lags";
            if (r->sns_vs_lns)
                t.notes.push_back(which + ": p(b_SNS = b_LNS) = " + format_fixed(r->sns_vs_lns->p_value, 3));
            if (r->sns_vs_ss) t.notes.push_back(which + ": p(b_SNS = b_SS) = " + format_fixed(r->sns_vs_ss->p_value, 3));
        }
        emit_table(run, outputs, "characteristics_adjusted", t);
    }

    // IM and IIM decompositions.
    std::vector<DecompositionResult> im, iim;
    for (int m : c.m_grid) {
        DecompositionOptions d;
        d.m = m;
        d.use_controls = ctrl != nullptr;
        im.push_back(im_decomposition(panel, selections, ctrl, d));
        iim.push_back(iim_decomposition(panel, selections, ctrl, d));
    }
    emit_table(run, outputs, "inventory_management", decomposition_table(c.m_grid, im, iim));

    // Split-half robustness.
    {
        std::vector<int> years;
        for (const auto& s : selections) years.push_back(s.year - 1);
        const auto members = firms_by_year(annual);
        const SplitHalfResult sh = split_half_eval(
            annual, zbar, ctrl, years, [&](int t) { return members.count(t + 1) ? members.at(t + 1) : std::vector<int>{}; },
            fit_options(c, ctrl != nullptr), derive_seed(c.seed, {kSeedSplit}), c.portfolio_size);
        const auto cells = average_return_table(portfolio_series(sh.selections, panel));
        summary["split_half"] = cells_json(cells);
        emit_table(run, outputs, "split_half",
                   average_table("Average daily returns, split-half selections", {cells}, {"split half"}));
    }

    // News-based components of the over-intra correlations.
    // Constant forecasts (no topic selected in any year) leave f absorbed by
    // the year effects; the table then records why it is empty.
    try {
        emit_table(run, outputs, "io_panels", io_table(io_panels(annual, forecasts)));
    } catch (const NumericalError& e) {
        Table t;
        t.title = "News-based components of over-intra correlations";
        t.notes.push_back(std::string("Not estimable: ") + e.what());
        log(Stage::Backtest, std::string("io_panels not estimable: ") + e.what());
        emit_table(run, outputs, "io_panels", t);
    }

    // Figure data.
    FigureInputs fi;
    fi.series = &series;
    fi.panel = &panel;
    fi.models = &models;
    fi.annual = &exposures;
    fi.contributions = read_contributions_csv(contrib_file, exposures.K);
    for (const auto& f : emit_figure_data(run.path("backtest/figures"), fi)) outputs.push_back("backtest/figures/" + f);

    write_json_file(run.path("backtest/summary.json"), summary);
    outputs.push_back("backtest/summary.json");
    for (const auto& cell : avg)
        if (cell.name == "LS_o-LNS_o" || cell.name == "SS_i-SNS_i" || cell.name == "LNS_o-SNS_i")
            log(Stage::Backtest, cell.name + " " + format_fixed(cell.mean, 2) + " bps (t = " + format_fixed(cell.t, 2) + ")");
    record_stage(run, "backtest", rec, outputs);
    return {Stage::Backtest, false, outputs};
}

StageOutcome stage_report(const Run& run, bool force) {
    StageRecord rec;
    const std::vector<std::string> tables{"exposures/persistence.txt",
                                          "backtest/tables/over_intra_correlations.txt",
                                          "backtest/tables/average_returns.txt",
                                          "backtest/tables/characteristics_adjusted.txt",
                                          "backtest/tables/inventory_management.txt",
                                          "backtest/tables/split_half.txt",
                                          "backtest/tables/io_panels.txt"};
    for (const auto& t : tables)
        rec.add_input(t, run.require(t, t.rfind("exposures", 0) == 0 ? Stage::Exposures : Stage::Backtest));
    rec.add_input("summary", run.require("backtest/summary.json", Stage::Backtest));
    rec.add_input("train_report", run.require("train/report.json", Stage::Train));
    rec.add_input("ingest_report", run.require("ingest/report.json", Stage::Ingest));
    rec.seal(Stage::Report);
    if (!force && cache_valid(run, Stage::Report, rec)) return {Stage::Report, true, cached_outputs(run, Stage::Report)};

    fs::create_directories(run.path("report"));
    std::ofstream out(run.path("report/report.txt"));
    if (!out) throw ConfigError("cannot write " + run.path("report/report.txt"));
    const json ingest_report = read_json_file(run.path("ingest/report.json"));
    const json train_report = read_json_file(run.path("train/report.json"));
    out << "Articles kept: " << ingest_report.at("kept") << " of " << ingest_report.at("read")
        << "; vocabulary: " << ingest_report.at("vocabulary") << '\n';
    out << "Topics: " << train_report.at("topics") << "; winner held-out R2: "
        << format_fixed(train_report.at("final_score").get<double>(), 4) << "\n\n";
    for (const auto& t : tables) {
        std::ifstream in(run.path(t));
        out << in.rdbuf() << '\n';
    }
    out.close();
    json summary = read_json_file(run.path("backtest/summary.json"));
    summary["ingest"] = ingest_report;
    summary["train"] = {{"topics", train_report.at("topics")}, {"final_score", train_report.at("final_score")}};
    write_json_file(run.path("report/summary.json"), summary);
    const std::vector<std::string> outputs{"report/report.txt", "report/summary.json"};
    record_stage(run, "report", rec, outputs);
    return {Stage::Report, false, outputs};
}

}  // namespace

// ---------------------------------------------------------------------------

void PipelineConfig::validate() const {
    auto need = [](bool ok, const std::string& field, const std::string& what) {
        if (!ok) throw ConfigError(field + ": " + what);
    };
    need(!paths.output.empty(), "paths.output", "must not be empty");
    const bool any = !paths.articles.empty() || !paths.prices.empty() || !paths.dividends.empty() ||
                     !paths.membership.empty() || !paths.holidays.empty();
    const bool all = !paths.articles.empty() && !paths.prices.empty() && !paths.dividends.empty() &&
                     !paths.membership.empty() && !paths.holidays.empty();
    need(!any || all, "paths", "articles, prices, dividends, membership and holidays must be given together");
    need(max_firms >= 1, "ingest.max_firms", "must be at least 1");
    need(min_words >= 0, "ingest.min_words", "must be nonnegative");
    need(min_total_count >= 1 && min_document_count >= 1, "ingest.min_total_count", "counts must be at least 1");
    need(topics >= 0, "train.topics", "must be nonnegative");
    need(beta > 0.0, "train.beta", "must be positive");
    need(cutoff_year >= 0, "train.cutoff_year", "must be 0 or a year");
    need(branching.chains_per_round >= 1, "train.chains", "must be at least 1");
    need(branching.rounds >= 1, "train.rounds", "must be at least 1");
    need(branching.iterations_per_round >= 1, "train.iterations", "must be at least 1");
    need(branching.holdout_fraction > 0.0 && branching.holdout_fraction < 1.0, "train.holdout", "must lie in (0, 1)");
    need(fold_in_burn_in >= 0 && fold_in_samples >= 1, "train.fold_in_samples", "must be at least 1");
    need(window >= 1, "forecast.window", "must be at least 1");
    need(pool_years >= 1, "forecast.pool_years", "must be at least 1");
    need(folds >= 2, "forecast.folds", "must be at least 2");
    need(portfolio_size >= 1, "forecast.portfolio_size", "must be at least 1");
    need(contribution_count >= 1, "forecast.contribution_count", "must be at least 1");
    need(!m_grid.empty(), "backtest.m", "must list at least one value");
    for (std::size_t i = 0; i < m_grid.size(); ++i)
        need(m_grid[i] >= 1, "backtest.m[" + std::to_string(i) + "]", "must be positive");
    try {
        TimeZone::from_name(timezone);
    } catch (const Error& e) {
        throw ConfigError(std::string("timezone: ") + e.what());
    }
    synth.validate();
}

PipelineConfig parse_pipeline_config(const std::string& json_text, const std::vector<std::string>& overrides) {
    json root;
    try {
        root = json_text.empty() ? json::object() : json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config: expected an object, got " + kind_of(root));
    for (const auto& o : overrides) apply_override(root, o);

    PipelineConfig c;
    Section top(root, "");
    auto sub = [&](const char* key, auto&& fn) {
        if (const json* v = top.find(key)) {
            Section s(*v, key);
            fn(s);
            s.finish();
        }
    };
    sub("paths", [&](Section& s) {
        s.get("articles", c.paths.articles);
        s.get("prices", c.paths.prices);
        s.get("dividends", c.paths.dividends);
        s.get("membership", c.paths.membership);
        s.get("holidays", c.paths.holidays);
        s.get("fundamentals", c.paths.fundamentals);
        s.get("output", c.paths.output);
    });
    top.get("timezone", c.timezone);
    top.get("seed", c.seed);
    top.get("parallel", c.parallel);
    sub("ingest", [&](Section& s) {
        s.get("max_firms", c.max_firms);
        s.get("min_words", c.min_words);
        s.get("min_total_count", c.min_total_count);
        s.get("min_document_count", c.min_document_count);
    });
    sub("train", [&](Section& s) {
        s.get("topics", c.topics);
        s.get("beta", c.beta);
        s.get("cutoff_year", c.cutoff_year);
        s.get("chains", c.branching.chains_per_round);
        s.get("rounds", c.branching.rounds);
        s.get("iterations", c.branching.iterations_per_round);
        s.get("holdout", c.branching.holdout_fraction);
        s.get("fold_in_burn_in", c.fold_in_burn_in);
        s.get("fold_in_samples", c.fold_in_samples);
    });
    sub("forecast", [&](Section& s) {
        s.get("window", c.window);
        s.get("variant", c.variant);
        s.get("pool_years", c.pool_years);
        s.get("use_controls", c.use_controls);
        s.get("folds", c.folds);
        s.get("portfolio_size", c.portfolio_size);
        s.get("contribution_count", c.contribution_count);
    });
    sub("backtest", [&](Section& s) {
        s.get("m", c.m_grid);
    });
    if (const json* v = top.find("synth")) {
        if (!v->is_object()) throw ConfigError("synth: expected an object, got " + kind_of(*v));
        c.synth = synth_config_from_json_text(v->dump(), "synth");
        c.synth_seed_set = v->contains("seed");
    }
    top.finish();
    if (!c.synth_seed_set) c.synth.seed = c.seed;
    c.validate();
    return c;
}

PipelineConfig load_pipeline_config(const std::optional<std::string>& file, const std::vector<std::string>& overrides) {
    std::string text;
    if (file) {
        std::ifstream in(*file);
        if (!in) throw ConfigError("cannot open config " + *file);
        std::stringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }
    return parse_pipeline_config(text, overrides);
}

std::string pipeline_config_json(const PipelineConfig& config) { return config_json(config, false).dump(2); }

std::string_view to_string(Stage s) {
    switch (s) {
        case Stage::Synth: return "synth";
        case Stage::Ingest: return "ingest";
        case Stage::Train: return "train";
        case Stage::Exposures: return "exposures";
        case Stage::Forecast: return "forecast";
        case Stage::Backtest: return "backtest";
        case Stage::Report: return "report";
    }
    return "?";
}

Stage stage_from_string(std::string_view s) {
    for (Stage st : {Stage::Synth, Stage::Ingest, Stage::Train, Stage::Exposures, Stage::Forecast, Stage::Backtest,
                     Stage::Report})
        if (to_string(st) == s) return st;
    throw ConfigError("unknown stage '" + std::string(s) + "'");
}

std::vector<Stage> pipeline_stages(const PipelineConfig& config) {
    std::vector<Stage> out;
    if (config.synthetic_inputs()) out.push_back(Stage::Synth);
    for (Stage s : {Stage::Ingest, Stage::Train, Stage::Exposures, Stage::Forecast, Stage::Backtest, Stage::Report})
        out.push_back(s);
    return out;
}

StageOutcome run_stage(Stage stage, const PipelineConfig& config, bool force) {
    const Run run(config);
    fs::create_directories(run.root);
    StageOutcome o;
    switch (stage) {
        case Stage::Synth: o = stage_synth(run, force); break;
        case Stage::Ingest: o = stage_ingest(run, force); break;
        case Stage::Train: o = stage_train(run, force); break;
        case Stage::Exposures: o = stage_exposures(run, force); break;
        case Stage::Forecast: o = stage_forecast(run, force); break;
        case Stage::Backtest: o = stage_backtest(run, force); break;
        case Stage::Report: o = stage_report(run, force); break;
    }
    if (o.cached) log(stage, "up to date");
    return o;
}

std::vector<StageOutcome> run_pipeline(const PipelineConfig& config, bool force) {
    std::vector<StageOutcome> out;
    for (Stage s : pipeline_stages(config)) out.push_back(run_stage(s, config, force));
    return out;
}

double score_model(const PipelineConfig& config) {
    const Run run(config);
    const std::string corpus_file = run.require("ingest/corpus.bin", Stage::Ingest);
    const std::string model_file = run.require("train/model.bin", Stage::Train);
    const Corpus corpus = read_corpus(corpus_file);
    const TopicModel model = read_model(model_file);
    const TradingCalendar cal = load_calendar(run);
    const ReturnPanel panel = load_returns(run, cal);
    if (model.article_ids.size() != corpus.articles.size()) throw DataError("model and corpus disagree on article count");
    std::vector<std::size_t> idx(corpus.articles.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const ScoringSet scoring = build_scoring_set(
        corpus, idx, [&](int f, Date d, Period p) { return panel.get(f, d, p); }, config.branching.holdout_fraction,
        train_options(config).seed);
    const double r2 = score_theta(model.theta, scoring);
    StageRecord rec;
    rec.add_input("corpus", corpus_file);
    rec.add_input("model", model_file);
    rec.config = {{"holdout", config.branching.holdout_fraction}, {"seed", config.seed}};
    rec.seal(Stage::Train);
    write_json_file(run.path("train/score.json"),
                    {{"oos_r2", std::isfinite(r2) ? json(r2) : json(nullptr)},
                     {"train_groups", scoring.train.size()},
                     {"holdout_groups", scoring.holdout.size()}});
    record_stage(run, "score", rec, {"train/score.json"});
    return r2;
}

void infer_articles(const PipelineConfig& config, const std::string& articles_jsonl, const std::string& out) {
    const Run run(config);
    const Corpus corpus = read_corpus(run.require("ingest/corpus.bin", Stage::Ingest));
    const TopicModel model = read_model(run.require("train/model.bin", Stage::Train));
    if (!model.frozen) throw ConfigError("infer needs a frozen model; set train.cutoff_year");
    const auto raw = read_articles_jsonl(articles_jsonl);
    const std::uint64_t seed = train_options(config).seed;
    std::vector<Eigen::VectorXd> theta(raw.size());
    const auto n = static_cast<long>(raw.size());
#pragma omp parallel for schedule(dynamic, 16) if (config.parallel)
    for (long i = 0; i < n; ++i) {
        const auto& a = raw[static_cast<std::size_t>(i)];
        CounterRng rng(derive_seed(seed, {0xf01d, fnv1a(a.id)}));
        FoldInOptions fo{config.fold_in_burn_in, config.fold_in_samples};
        theta[static_cast<std::size_t>(i)] =
            infer_frozen(model, corpus.vocabulary.encode(preprocess_text(a.body)), rng, fo).theta;
    }
    CsvWriter w(out);
    std::vector<std::string> header{"id"};
    for (int k = 0; k < model.K; ++k) header.push_back("topic_" + std::to_string(k));
    w.row(header);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        w.field(raw[i].id);
        for (int k = 0; k < model.K; ++k) w.field(theta[i](k));
        w.end_row();
    }
}

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    Sha256 h;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        h.update(buf, static_cast<std::size_t>(in.gcount()));
    }
    return h.hex_digest();
}

std::string sha256_text(const std::string& text) {
    Sha256 h;
    h.update(text.data(), text.size());
    return h.hex_digest();
}

int exit_code(const std::exception& e) {
    if (dynamic_cast<const DataError*>(&e)) return 2;
    if (dynamic_cast<const NumericalError*>(&e)) return 3;
    return 1;
}

}  // namespace newsflow
