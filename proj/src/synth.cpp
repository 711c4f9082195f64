#include <newsflow/csv.hpp>
#include <newsflow/rng.hpp>
#include <newsflow/synth.hpp>
#include <newsflow/text.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace newsflow {

using nlohmann::json;

namespace {

enum Stream : std::uint64_t { kPhi = 1, kAffinity, kDocs, kAnnual, kDaily, kFundamentals, kDividends, kHome };

template <typename T>
T field_as(const json& v, const std::string& path) {
    try {
        if constexpr (std::is_same_v<T, int>) {
            if (!v.is_number_integer()) throw ConfigError("");
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) throw ConfigError("");
        } else if constexpr (std::is_same_v<T, double>) {
            if (!v.is_number()) throw ConfigError("");
        } else {
            if (!v.is_array()) throw ConfigError("");
            for (const auto& e : v)
                if (!e.is_number()) throw ConfigError("");
        }
        return v.get<T>();
    } catch (const std::exception&) {
        throw ConfigError(path + ": expected " +
                          (std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t> ? std::string("an integer")
                           : std::is_same_v<T, double>                                 ? std::string("a number")
                                                                                       : std::string("an array of numbers")));
    }
}

/// Field table shared by the reader and writer.
template <typename Fn>
void for_each_field(SynthConfig& c, Fn&& fn) {
    fn("topics", c.topics);
    fn("vocabulary", c.vocabulary);
    fn("documents", c.documents);
    fn("firms", c.firms);
    fn("years", c.years);
    fn("start_year", c.start_year);
    fn("doc_length_min", c.doc_length_min);
    fn("doc_length_max", c.doc_length_max);
    fn("own_word_mass", c.own_word_mass);
    fn("theta_concentration", c.theta_concentration);
    fn("overnight_share", c.overnight_share);
    fn("second_firm_probability", c.second_firm_probability);
    fn("persistence_rho", c.persistence_rho);
    fn("affinity_sigma", c.affinity_sigma);
    fn("home_topics", c.home_topics);
    fn("home_weight", c.home_weight);
    fn("other_weight", c.other_weight);
    fn("burn_in_years", c.burn_in_years);
    fn("beta_i", c.beta_i);
    fn("beta_o", c.beta_o);
    fn("alpha", c.alpha);
    fn("alpha_i", c.alpha_i);
    fn("noise_sigma", c.noise_sigma);
    fn("daily_sigma", c.daily_sigma);
    fn("window", c.window);
    fn("im_reversal", c.im_reversal);
    fn("iim_reversal", c.iim_reversal);
    fn("dividend_probability", c.dividend_probability);
    fn("dividend_yield", c.dividend_yield);
    fn("seed", c.seed);
}

double gamma_draw(CounterRng& rng, double shape) { return shape > 0.0 ? rng.gamma(shape) : 0.0; }

/// Index of u in a cumulative table (first entry strictly above u).
int draw_from_cdf(const std::vector<double>& cdf, double u) {
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u * cdf.back());
    return static_cast<int>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
}

std::vector<double> cumulative(const double* p, int n) {
    std::vector<double> c(static_cast<std::size_t>(n));
    double s = 0.0;
    for (int i = 0; i < n; ++i) c[static_cast<std::size_t>(i)] = (s += p[i]);
    return c;
}

}  // namespace

void SynthConfig::validate() const {
    auto need = [](bool ok, const char* field, const char* what) {
        if (!ok) throw ConfigError(std::string("synth.") + field + ": " + what);
    };
    need(topics >= 1, "topics", "must be at least 1");
    need(vocabulary >= topics, "vocabulary", "must be at least the topic count");
    need(documents >= 0, "documents", "must be nonnegative");
    need(firms >= 1, "firms", "must be at least 1");
    need(years >= 1, "years", "must be at least 1");
    need(start_year >= 1971 && start_year + years <= 2200, "start_year", "out of range");
    need(doc_length_min >= 1 && doc_length_max >= doc_length_min, "doc_length_max", "must be >= doc_length_min >= 1");
    need(own_word_mass >= 0.0 && own_word_mass <= 1.0, "own_word_mass", "must lie in [0, 1]");
    need(theta_concentration > 0.0, "theta_concentration", "must be positive");
    need(overnight_share >= 0.0 && overnight_share <= 1.0, "overnight_share", "must lie in [0, 1]");
    need(second_firm_probability >= 0.0 && second_firm_probability <= 1.0, "second_firm_probability", "must lie in [0, 1]");
    need(persistence_rho >= 0.0 && persistence_rho < 1.0, "persistence_rho", "must lie in [0, 1)");
    need(affinity_sigma >= 0.0, "affinity_sigma", "must be nonnegative");
    need(home_topics >= 0 && home_topics <= topics, "home_topics", "must lie in [0, topics]");
    need(home_weight > 0.0 && other_weight > 0.0, "home_weight", "weights must be positive");
    need(burn_in_years >= 0, "burn_in_years", "must be nonnegative");
    need(beta_i.empty() || static_cast<int>(beta_i.size()) == topics, "beta_i", "must be empty or have one entry per topic");
    need(beta_o.empty() || static_cast<int>(beta_o.size()) == topics, "beta_o", "must be empty or have one entry per topic");
    need(noise_sigma >= 0.0, "noise_sigma", "must be nonnegative");
    need(daily_sigma >= 0.0, "daily_sigma", "must be nonnegative");
    need(window >= 1, "window", "must be at least 1");
    need(dividend_probability >= 0.0 && dividend_probability <= 1.0, "dividend_probability", "must lie in [0, 1]");
    need(dividend_yield >= 0.0 && dividend_yield < 0.5, "dividend_yield", "must lie in [0, 0.5)");
}

SynthConfig synth_config_from_json_text(const std::string& text, const std::string& path) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError(path + ": expected an object");
    SynthConfig c;
    std::set<std::string> known;
    for_each_field(c, [&](const char* name, auto& value) {
        known.insert(name);
        if (j.contains(name)) value = field_as<std::decay_t<decltype(value)>>(j.at(name), path + "." + name);
    });
    for (const auto& [key, v] : j.items())
        if (!known.count(key)) throw ConfigError(path + "." + key + ": unknown field");
    c.validate();
    return c;
}

SynthConfig read_synth_config(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open synth config " + file);
    std::stringstream ss;
    ss << in.rdbuf();
    return synth_config_from_json_text(ss.str());
}

std::string synth_config_to_json(const SynthConfig& config) {
    SynthConfig c = config;
    json j = json::object();
    for_each_field(c, [&](const char* name, auto& value) { j[name] = value; });
    return j.dump(2);
}

std::vector<std::string> synthetic_words(int count) {
    static constexpr std::string_view kLetters = "bcdfghjklmnpqrtvwxz";
    const std::uint64_t base = kLetters.size();
    const std::uint64_t space = base * base * base * base;
    std::vector<std::string> out;
    // A stride coprime with the space spreads the words over the alphabet.
    for (std::uint64_t i = 0; static_cast<int>(out.size()) < count; ++i) {
        if (i >= space) throw ConfigError("synthetic vocabulary exhausted");
        std::uint64_t code = (i * 7919) % space;
        std::string w(4, ' ');
        for (int p = 3; p >= 0; --p) {
            w[static_cast<std::size_t>(p)] = kLetters[code % base];
            code /= base;
        }
        const auto pre = preprocess_text(w);
        if (pre.size() != 1 || pre[0] != w) continue;
        out.push_back(std::move(w));
    }
    return out;
}

GroundTruth make_truth(const SynthConfig& config) {
    config.validate();
    GroundTruth t;
    t.K = config.topics;
    t.V = config.vocabulary;
    t.words = synthetic_words(t.V);
    t.start_year = config.start_year;
    t.alpha = config.alpha;
    t.alpha_i = config.alpha_i;
    t.noise_sigma = config.noise_sigma;
    t.persistence_rho = config.persistence_rho;
    t.beta_i = config.beta_i.empty() ? Eigen::VectorXd::Zero(t.K)
                                     : Eigen::Map<const Eigen::VectorXd>(config.beta_i.data(), t.K).eval();
    t.beta_o = config.beta_o.empty() ? Eigen::VectorXd::Zero(t.K)
                                     : Eigen::Map<const Eigen::VectorXd>(config.beta_o.data(), t.K).eval();

    // Topic k owns a random block of the vocabulary.
    CounterRng prng(derive_seed(config.seed, {kPhi}));
    std::vector<int> perm(static_cast<std::size_t>(t.V));
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[prng.below(i + 1)]);
    t.phi = RowMatrix::Constant(t.K, t.V, (1.0 - config.own_word_mass) / t.V);
    for (int k = 0; k < t.K; ++k) {
        const int lo = k * t.V / t.K, hi = (k + 1) * t.V / t.K;
        std::vector<double> w;
        for (int v = lo; v < hi; ++v) w.push_back(0.5 + prng.uniform());
        const double s = std::accumulate(w.begin(), w.end(), 0.0);
        for (int v = lo; v < hi; ++v)
            t.phi(k, perm[static_cast<std::size_t>(v)]) += config.own_word_mass * w[static_cast<std::size_t>(v - lo)] / s;
    }

    const int F = config.firms;
    t.firms.resize(static_cast<std::size_t>(F));
    std::iota(t.firms.begin(), t.firms.end(), 1);
    t.home_topics.resize(static_cast<std::size_t>(F));
    for (int j = 0; j < F; ++j) {
        CounterRng hr(derive_seed(config.seed, {kHome, static_cast<std::uint64_t>(j)}));
        std::vector<int> topics(static_cast<std::size_t>(t.K));
        std::iota(topics.begin(), topics.end(), 0);
        for (int i = 0; i < config.home_topics; ++i)
            std::swap(topics[static_cast<std::size_t>(i)], topics[static_cast<std::size_t>(i) + hr.below(static_cast<std::uint64_t>(t.K - i))]);
        t.home_topics[static_cast<std::size_t>(j)].assign(topics.begin(), topics.begin() + config.home_topics);
        std::sort(t.home_topics[static_cast<std::size_t>(j)].begin(), t.home_topics[static_cast<std::size_t>(j)].end());
    }

    t.affinity.assign(static_cast<std::size_t>(config.years), RowMatrix::Zero(F, t.K));
    constexpr int kLags = 4;
    for (int j = 0; j < F; ++j) {
        const auto& home = t.home_topics[static_cast<std::size_t>(j)];
        for (int k = 0; k < t.K; ++k) {
            const double mu =
                std::find(home.begin(), home.end(), k) != home.end() ? config.home_weight : config.other_weight;
            CounterRng ar(derive_seed(config.seed, {kAffinity, static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(k)}));
            std::vector<double> hist(kLags, mu);
            for (int step = 0; step < config.burn_in_years + config.years; ++step) {
                const double m = std::accumulate(hist.end() - kLags, hist.end(), 0.0) / kLags;
                double a = mu + config.persistence_rho * (m - mu) + config.affinity_sigma * mu * ar.normal();
                a = std::max(a, 1e-6 * mu);
                hist.push_back(a);
                const int y = step - config.burn_in_years;
                if (y >= 0) t.affinity[static_cast<std::size_t>(y)](j, k) = a;
            }
        }
    }
    return t;
}

TradingCalendar synth_calendar(const SynthConfig& config) {
    using namespace std::chrono;
    const Date first = sys_days{year{config.start_year} / January / 1};
    const Date last = sys_days{year{config.start_year + config.years - 1} / December / 31};
    std::set<Date> holidays;
    for (int y = config.start_year; y < config.start_year + config.years; ++y) {
        holidays.insert(sys_days{year{y} / January / 1});
        holidays.insert(sys_days{year{y} / December / 25});
    }
    return TradingCalendar(first, last, std::move(holidays));
}

Membership synth_membership(const SynthConfig& config) {
    const TradingCalendar cal = synth_calendar(config);
    std::vector<Membership::Spell> spells;
    for (int j = 1; j <= config.firms; ++j) spells.push_back({j, "F" + std::to_string(j), cal.first(), cal.last()});
    return Membership(std::move(spells));
}

SynthCorpus generate_corpus(const GroundTruth& truth, const SynthConfig& config, const TradingCalendar& calendar) {
    SynthCorpus out;
    const int K = truth.K;
    const int F = static_cast<int>(truth.firms.size());
    const int D = config.documents;
    out.theta = RowMatrix::Zero(D, K);
    std::vector<std::vector<double>> word_cdf;
    for (int k = 0; k < K; ++k) word_cdf.push_back(cumulative(truth.phi.row(k).data(), truth.V));
    std::map<int, std::vector<Date>> days_by_year;
    for (Date d : calendar.trading_days()) days_by_year[year_of(d)].push_back(d);
    const TimeZone tz = TimeZone::from_name("America/New_York");
    const int width = static_cast<int>(std::to_string(std::max(D, 1)).size());

    for (int i = 0; i < D; ++i) {
        CounterRng rng(derive_seed(config.seed, {kDocs, static_cast<std::uint64_t>(i)}));
        const int yi = static_cast<int>(static_cast<long long>(i) * config.years / std::max(D, 1));
        const int year = config.start_year + yi;
        const RowMatrix& aff = truth.affinity[static_cast<std::size_t>(yi)];
        const int primary = static_cast<int>(rng.below(static_cast<std::uint64_t>(F)));
        const double total = aff.row(primary).sum();
        Eigen::VectorXd theta(K);
        for (int k = 0; k < K; ++k) theta(k) = gamma_draw(rng, config.theta_concentration * aff(primary, k) / total);
        if (!(theta.sum() > 0.0)) theta(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(K)))) = 1.0;
        theta /= theta.sum();
        out.theta.row(i) = theta.transpose();

        std::vector<int> firms{truth.firms[static_cast<std::size_t>(primary)]};
        if (F > 1 && rng.uniform() < config.second_firm_probability) {
            std::vector<double> w(static_cast<std::size_t>(F));
            for (int j = 0; j < F; ++j) w[static_cast<std::size_t>(j)] = j == primary ? 0.0 : aff.row(j).dot(theta.transpose());
            const auto cdf = cumulative(w.data(), F);
            firms.push_back(truth.firms[static_cast<std::size_t>(draw_from_cdf(cdf, rng.uniform()))]);
            std::sort(firms.begin(), firms.end());
        }

        const auto& days = days_by_year.at(year);
        const Date day = days[rng.below(days.size())];
        const bool overnight = rng.uniform() < config.overnight_share;
        const long long open = 9 * 3600 + 30 * 60, close = 16 * 3600;
        const long long secs = overnight ? static_cast<long long>(rng.below(static_cast<std::uint64_t>(open)))
                                         : open + static_cast<long long>(rng.below(static_cast<std::uint64_t>(close - open)));
        const Instant ts = tz.from_local(day, std::chrono::seconds(secs));
        const Session session = calendar.classify(ts, tz);

        const auto theta_cdf = cumulative(theta.data(), K);
        const int len = config.doc_length_min +
                        static_cast<int>(rng.below(static_cast<std::uint64_t>(config.doc_length_max - config.doc_length_min + 1)));
        std::string body;
        for (int n = 0; n < len; ++n) {
            const int k = draw_from_cdf(theta_cdf, rng.uniform());
            const int v = draw_from_cdf(word_cdf[static_cast<std::size_t>(k)], rng.uniform());
            if (n) body += ' ';
            body += truth.words[static_cast<std::size_t>(v)];
        }
        std::string id = std::to_string(i);
        id = "syn-" + std::string(static_cast<std::size_t>(width) - id.size(), '0') + id;
        RawArticle raw{id, ts, std::move(body), {}};
        for (int f : firms) raw.tickers.push_back("F" + std::to_string(f));
        out.articles.push_back(std::move(raw));
        out.sessions.push_back(session);
        out.firms.push_back(std::move(firms));
    }
    return out;
}

ExposurePanel true_exposures(const GroundTruth& truth, const SynthCorpus& corpus) {
    ExposurePanel p;
    p.granularity = Granularity::Annual;
    p.K = truth.K;
    const int years = static_cast<int>(truth.affinity.size());
    for (int f : truth.firms)
        for (int y = 0; y < years; ++y) p.keys.emplace_back(f, truth.start_year + y);
    p.intraday = RowMatrix::Zero(static_cast<Eigen::Index>(p.keys.size()), p.K);
    p.overnight = RowMatrix::Zero(static_cast<Eigen::Index>(p.keys.size()), p.K);
    for (std::size_t i = 0; i < corpus.articles.size(); ++i) {
        const Session& s = corpus.sessions[i];
        RowMatrix& dst = s.period == Period::Intraday ? p.intraday : p.overnight;
        for (int f : corpus.firms[i]) {
            const auto row = p.find(f, year_of(s.trading_day));
            if (!row) continue;
            dst.row(static_cast<Eigen::Index>(*row)) += corpus.theta.row(static_cast<Eigen::Index>(i));
        }
    }
    return p;
}

ExposurePanel affinity_exposures(const GroundTruth& truth, const SynthConfig& config) {
    ExposurePanel p;
    p.granularity = Granularity::Annual;
    p.K = truth.K;
    const int years = static_cast<int>(truth.affinity.size());
    for (int f : truth.firms)
        for (int y = 0; y < years; ++y) p.keys.emplace_back(f, truth.start_year + y);
    p.intraday.resize(static_cast<Eigen::Index>(p.keys.size()), p.K);
    p.overnight.resize(static_cast<Eigen::Index>(p.keys.size()), p.K);
    for (std::size_t r = 0; r < p.keys.size(); ++r) {
        const int j = p.keys[r].first - 1;
        const auto y = static_cast<std::size_t>(p.keys[r].second - truth.start_year);
        const auto a = truth.affinity[y].row(j);
        p.intraday.row(static_cast<Eigen::Index>(r)) = (1.0 - config.overnight_share) * a;
        p.overnight.row(static_cast<Eigen::Index>(r)) = config.overnight_share * a;
    }
    return p;
}

TopicModel truth_model(const SynthCorpus& synth, const Corpus& corpus, int K) {
    std::map<std::string, std::size_t> row;
    for (std::size_t i = 0; i < synth.articles.size(); ++i) row[synth.articles[i].id] = i;
    TopicModel m;
    m.K = K;
    m.V = static_cast<int>(corpus.vocabulary.size());
    m.priors = LdaPriors::defaults(K);
    m.phi = RowMatrix::Constant(K, std::max(m.V, 1), 1.0 / std::max(m.V, 1));
    m.theta.resize(static_cast<Eigen::Index>(corpus.articles.size()), K);
    for (std::size_t i = 0; i < corpus.articles.size(); ++i) {
        auto it = row.find(corpus.articles[i].id);
        if (it == row.end()) throw DataError("article '" + corpus.articles[i].id + "' is not synthetic");
        m.theta.row(static_cast<Eigen::Index>(i)) = synth.theta.row(static_cast<Eigen::Index>(it->second));
        m.article_ids.push_back(corpus.articles[i].id);
    }
    return m;
}

SynthMarket generate_market(const GroundTruth& truth, const SynthConfig& config, const TradingCalendar& calendar,
                            const ExposurePanel& annual_exposures) {
    SynthMarket out;
    const auto& days = calendar.trading_days();
    out.returns = ReturnPanel(days, truth.firms);
    const WindowedExposure zbar = window_sum(annual_exposures, config.window);
    const int D = static_cast<int>(days.size());
    const int F = static_cast<int>(truth.firms.size());
    std::map<int, std::pair<int, int>> year_span;  // year -> [first, last) day index
    for (int d = 0; d < D; ++d) {
        auto& s = year_span.try_emplace(year_of(days[static_cast<std::size_t>(d)]), d, d).first->second;
        s.second = d + 1;
    }

    // Raw daily deviations with the planted reversals, per session.
    Eigen::MatrixXd ei(D, F), eo(D, F);
    for (int j = 0; j < F; ++j) {
        CounterRng rng(derive_seed(config.seed, {kDaily, static_cast<std::uint64_t>(j)}));
        for (int d = 0; d < D; ++d) {
            ei(d, j) = config.daily_sigma * rng.normal();
            eo(d, j) = config.daily_sigma * rng.normal();
        }
    }
    if (config.iim_reversal != 0.0)
        for (int d = 0; d < D; ++d) {
            const double m = eo.row(d).mean();
            for (int j = 0; j < F; ++j) ei(d, j) -= config.iim_reversal * (eo(d, j) - m);
        }
    if (config.im_reversal != 0.0)
        for (int d = 0; d + 1 < D; ++d) {
            const double m = ei.row(d).mean();
            for (int j = 0; j < F; ++j) eo(d + 1, j) -= config.im_reversal * (ei(d, j) - m);
        }

    for (int j = 0; j < F; ++j) {
        const int firm = truth.firms[static_cast<std::size_t>(j)];
        CounterRng rng(derive_seed(config.seed, {kAnnual, static_cast<std::uint64_t>(j)}));
        for (const auto& [year, span] : year_span) {
            double target[2];
            const auto row = zbar.find(firm, year - 1);
            for (int p = 0; p < 2; ++p) {
                const bool intra = p == 0;
                double r = truth.alpha + (intra ? truth.alpha_i : 0.0) + truth.noise_sigma * rng.normal();
                if (row) r += (intra ? truth.beta_i : truth.beta_o).dot(zbar.session(intra ? Period::Intraday : Period::Overnight)
                                                                          .row(static_cast<Eigen::Index>(*row))
                                                                          .transpose());
                target[p] = r;
            }
            const int n = span.second - span.first;
            for (int p = 0; p < 2; ++p) {
                Eigen::MatrixXd& e = p == 0 ? ei : eo;
                const double mean = e.col(j).segment(span.first, n).mean();
                for (int d = span.first; d < span.second; ++d)
                    out.returns.at(p == 0 ? Period::Intraday : Period::Overnight, d, j) = target[p] / n + e(d, j) - mean;
            }
            out.annual_targets.push_back({firm, year, target[0], target[1], 0.0, 0.0, n});
        }
    }
    // The first day has no previous close.
    for (int j = 0; j < F; ++j) out.returns.at(Period::Overnight, 0, j) = std::numeric_limits<double>::quiet_NaN();

    for (int j = 0; j < F; ++j) {
        const int firm = truth.firms[static_cast<std::size_t>(j)];
        CounterRng rng(derive_seed(config.seed, {kDividends, static_cast<std::uint64_t>(j)}));
        double prev_close = 0.0;
        for (int d = 0; d < D; ++d) {
            double open = 50.0;
            if (d > 0) {
                double div = 0.0;
                if (rng.uniform() < config.dividend_probability) {
                    div = config.dividend_yield * prev_close;
                    out.dividends.push_back({firm, days[static_cast<std::size_t>(d)], div});
                }
                open = prev_close * std::exp(out.returns.at(Period::Overnight, d, j)) - div;
            }
            const double close = open * std::exp(out.returns.at(Period::Intraday, d, j));
            out.prices.push_back({firm, days[static_cast<std::size_t>(d)], open, close});
            prev_close = close;
        }
    }

    for (int j = 0; j < F; ++j) {
        const int firm = truth.firms[static_cast<std::size_t>(j)];
        CounterRng rng(derive_seed(config.seed, {kFundamentals, static_cast<std::uint64_t>(j)}));
        const double size0 = 8.0 + rng.normal();
        for (const auto& [year, span] : year_span)
            out.fundamentals.push_back({firm, year, size0 + 0.1 * rng.normal(), std::exp(-0.5 + 0.5 * rng.normal()),
                                        0.05 + 0.1 * rng.normal(), 0.1 + 0.05 * rng.normal()});
    }
    std::sort(out.fundamentals.begin(), out.fundamentals.end(), [](const FundamentalsRow& a, const FundamentalsRow& b) {
        return std::tie(a.firm, a.year) < std::tie(b.firm, b.year);
    });
    return out;
}

SynthDataset generate_dataset(const SynthConfig& config) {
    SynthDataset data;
    data.config = config;
    data.truth = make_truth(config);
    const TradingCalendar cal = synth_calendar(config);
    data.corpus = generate_corpus(data.truth, config, cal);
    data.market = generate_market(data.truth, config, cal, true_exposures(data.truth, data.corpus));
    return data;
}

std::vector<std::string> write_dataset(const std::string& dir, const SynthDataset& data) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto at = [&](const char* name) { return (fs::path(dir) / name).string(); };
    write_articles_jsonl(at("articles.jsonl"), data.corpus.articles);
    write_prices(at("prices.csv"), data.market.prices);
    write_dividends(at("dividends.csv"), data.market.dividends);
    write_fundamentals(at("fundamentals.csv"), data.market.fundamentals);
    const TradingCalendar cal = synth_calendar(data.config);
    {
        CsvWriter w(at("membership.csv"));
        w.row({"firm_id", "ticker", "start_date", "end_date"});
        for (int f : data.truth.firms) {
            w.field(f).field("F" + std::to_string(f)).field(format_date(cal.first())).field(format_date(cal.last()));
            w.end_row();
        }
    }
    {
        CsvWriter w(at("holidays.csv"));
        w.row({"date"});
        for (Date d : cal.holidays()) {
            w.field(format_date(d));
            w.end_row();
        }
    }
    {
        json t;
        t["config"] = json::parse(synth_config_to_json(data.config));
        t["words"] = data.truth.words;
        json phi = json::array();
        for (int k = 0; k < data.truth.K; ++k) {
            std::vector<double> row(data.truth.phi.row(k).data(), data.truth.phi.row(k).data() + data.truth.V);
            phi.push_back(row);
        }
        t["phi"] = phi;
        t["home_topics"] = data.truth.home_topics;
        std::ofstream out(at("truth.json"));
        if (!out) throw ConfigError("cannot write " + at("truth.json"));
        out << t.dump() << '\n';
    }
    return {"articles.jsonl", "prices.csv", "dividends.csv", "fundamentals.csv", "membership.csv", "holidays.csv",
            "truth.json"};
}

std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    if (cost.cols() != n) throw ConfigError("hungarian: cost matrix must be square");
    const double inf = std::numeric_limits<double>::infinity();
    // Potentials formulation with 1-based rows and columns.
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> p(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
        std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = p[static_cast<std::size_t>(j0)];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> out(static_cast<std::size_t>(n));
    for (int j = 1; j <= n; ++j) out[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
    return out;
}

RecoveryResult topic_recovery(const GroundTruth& truth, const RowMatrix& phi_estimated, const Vocabulary& vocabulary) {
    const int K = truth.K;
    if (phi_estimated.rows() != K) throw DataError("topic_recovery: estimated topic count differs from truth");
    if (static_cast<std::size_t>(phi_estimated.cols()) != vocabulary.size())
        throw DataError("topic_recovery: phi width differs from vocabulary size");
    RowMatrix est = RowMatrix::Zero(K, truth.V);
    for (int v = 0; v < truth.V; ++v) {
        const auto id = vocabulary.id(truth.words[static_cast<std::size_t>(v)]);
        if (id) est.col(v) = phi_estimated.col(*id);
    }
    Eigen::MatrixXd tv(K, K);
    for (int a = 0; a < K; ++a)
        for (int b = 0; b < K; ++b) tv(a, b) = 0.5 * (truth.phi.row(a) - est.row(b)).cwiseAbs().sum();
    RecoveryResult r;
    r.matching = hungarian(tv);
    for (int a = 0; a < K; ++a) r.tv.push_back(tv(a, r.matching[static_cast<std::size_t>(a)]));
    r.mean_tv = std::accumulate(r.tv.begin(), r.tv.end(), 0.0) / K;
    return r;
}

}  // namespace newsflow
