#include <newsflow/corpus.hpp>
#include <newsflow/lda.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <tuple>

namespace newsflow {

// ---------------------------------------------------------------------------
// Documents

void DocumentSet::add(const std::vector<std::int32_t>& tokens) {
    words.insert(words.end(), tokens.begin(), tokens.end());
    offsets.push_back(static_cast<std::int64_t>(words.size()));
}

DocumentSet DocumentSet::from_corpus(const Corpus& corpus) {
    std::vector<std::size_t> all(corpus.articles.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return from_corpus(corpus, all);
}

DocumentSet DocumentSet::from_corpus(const Corpus& corpus, const std::vector<std::size_t>& article_indices) {
    DocumentSet docs;
    docs.vocabulary_size = static_cast<int>(corpus.vocabulary.size());
    for (auto i : article_indices) docs.add(corpus.articles.at(i).tokens);
    return docs;
}

// ---------------------------------------------------------------------------
// Sampler

LdaState LdaState::random_init(const DocumentSet& docs, int topics, LdaPriors priors, CounterRng& rng) {
    if (topics < 1) throw ConfigError("topic count must be positive");
    if (docs.vocabulary_size < 1) throw DataError("document set has an empty vocabulary");
    LdaState s;
    s.K = topics;
    s.V = docs.vocabulary_size;
    s.priors = priors;
    const auto K = static_cast<std::size_t>(topics);
    s.z.resize(docs.words.size());
    s.n_dk.assign(docs.size() * K, 0);
    s.n_wk.assign(static_cast<std::size_t>(s.V) * K, 0);
    s.n_k.assign(K, 0);
    for (std::size_t d = 0; d < docs.size(); ++d) {
        for (auto i = docs.offsets[d]; i < docs.offsets[d + 1]; ++i) {
            const auto k = static_cast<std::int32_t>(rng.below(K));
            const auto w = static_cast<std::size_t>(docs.words[i]);
            s.z[i] = k;
            ++s.n_dk[d * K + k];
            ++s.n_wk[w * K + k];
            ++s.n_k[k];
        }
    }
    return s;
}

void LdaState::check_invariants(const DocumentSet& docs) const {
    const auto Ks = static_cast<std::size_t>(K);
    if (z.size() != docs.words.size()) throw NumericalError("assignment count differs from token count");
    std::vector<std::int32_t> dk(docs.size() * Ks, 0);
    std::vector<std::int32_t> wk(static_cast<std::size_t>(V) * Ks, 0);
    std::vector<std::int64_t> k_tot(Ks, 0);
    for (std::size_t d = 0; d < docs.size(); ++d) {
        for (auto i = docs.offsets[d]; i < docs.offsets[d + 1]; ++i) {
            const auto k = z[i];
            if (k < 0 || k >= K) throw NumericalError("topic assignment out of range");
            ++dk[d * Ks + k];
            ++wk[static_cast<std::size_t>(docs.words[i]) * Ks + k];
            ++k_tot[k];
        }
    }
    if (dk != n_dk) throw NumericalError("document-topic counts inconsistent with assignments");
    if (wk != n_wk) throw NumericalError("topic-word counts inconsistent with assignments");
    if (k_tot != n_k) throw NumericalError("topic totals inconsistent with assignments");
    if (std::accumulate(n_k.begin(), n_k.end(), std::int64_t{0}) != docs.token_total())
        throw NumericalError("topic totals do not sum to the token count");
}

void gibbs_sweep(LdaState& s, const DocumentSet& docs, CounterRng& rng) {
    const int K = s.K;
    const auto Ks = static_cast<std::size_t>(K);
    const double a = s.priors.alpha;
    const double b = s.priors.beta;
    const double vb = s.V * b;
    std::vector<double> cum(Ks);
    for (std::size_t d = 0; d < docs.size(); ++d) {
        std::int32_t* ndk = s.n_dk.data() + d * Ks;
        for (auto i = docs.offsets[d]; i < docs.offsets[d + 1]; ++i) {
            std::int32_t* nwk = s.n_wk.data() + static_cast<std::size_t>(docs.words[i]) * Ks;
            const std::int32_t old = s.z[i];
            --ndk[old];
            --nwk[old];
            --s.n_k[old];
            double total = 0.0;
            for (int k = 0; k < K; ++k) {
                total += (ndk[k] + a) * (nwk[k] + b) / (static_cast<double>(s.n_k[k]) + vb);
                cum[k] = total;
            }
            const double u = rng.uniform() * total;
            int k = 0;
            while (k < K - 1 && cum[k] <= u) ++k;
            s.z[i] = k;
            ++ndk[k];
            ++nwk[k];
            ++s.n_k[k];
        }
    }
}

RowMatrix LdaState::theta(const DocumentSet& docs) const {
    const auto D = documents();
    RowMatrix t(static_cast<Eigen::Index>(D), K);
    const double ka = K * priors.alpha;
    for (std::size_t d = 0; d < D; ++d) {
        const double denom = static_cast<double>(docs.length(d)) + ka;
        for (int k = 0; k < K; ++k)
            t(static_cast<Eigen::Index>(d), k) = (n_dk[d * static_cast<std::size_t>(K) + k] + priors.alpha) / denom;
    }
    return t;
}

RowMatrix LdaState::phi() const {
    RowMatrix p(K, V);
    const double vb = V * priors.beta;
    for (int k = 0; k < K; ++k) {
        const double denom = static_cast<double>(n_k[k]) + vb;
        for (int w = 0; w < V; ++w)
            p(k, w) = (n_wk[static_cast<std::size_t>(w) * static_cast<std::size_t>(K) + k] + priors.beta) / denom;
    }
    return p;
}

// ---------------------------------------------------------------------------
// Model

void TopicModel::check() const {
    auto check_rows = [](const RowMatrix& m, const char* what) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            if ((m.row(r).array() < 0.0).any() || !m.row(r).allFinite())
                throw NumericalError(std::string(what) + " row " + std::to_string(r) + " has invalid entries");
            if (std::abs(m.row(r).sum() - 1.0) > 1e-9)
                throw NumericalError(std::string(what) + " row " + std::to_string(r) + " does not sum to 1");
        }
    };
    if (phi.rows() != K || phi.cols() != V) throw NumericalError("phi has wrong shape");
    if (theta.cols() != K || static_cast<std::size_t>(theta.rows()) != article_ids.size())
        throw NumericalError("theta has wrong shape");
    check_rows(phi, "phi");
    check_rows(theta, "theta");
}

namespace {

constexpr char kMagic[4] = {'N', 'F', 'T', 'M'};

template <typename T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw DataError(path + ": truncated model file");
    return v;
}

}  // namespace

void write_model(const std::string& path, const TopicModel& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out.write(kMagic, 4);
    put(out, kModelFormatVersion);
    put(out, static_cast<std::int32_t>(m.K));
    put(out, static_cast<std::int32_t>(m.V));
    put(out, static_cast<std::uint64_t>(m.theta.rows()));
    put(out, m.priors.alpha);
    put(out, m.priors.beta);
    put(out, m.seed);
    put(out, static_cast<std::uint8_t>(m.frozen));
    put(out, static_cast<std::int32_t>(m.cutoff_year));
    out.write(reinterpret_cast<const char*>(m.phi.data()), static_cast<std::streamsize>(m.phi.size() * 8));
    out.write(reinterpret_cast<const char*>(m.theta.data()), static_cast<std::streamsize>(m.theta.size() * 8));
    for (const auto& id : m.article_ids) {
        put(out, static_cast<std::uint32_t>(id.size()));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
    }
    if (!out) throw DataError("failed writing '" + path + "'");
}

TopicModel read_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) throw DataError(path + ": not a topic model file");
    const auto version = get<std::uint32_t>(in, path);
    if (version != kModelFormatVersion)
        throw DataError(path + ": unsupported model version " + std::to_string(version));
    TopicModel m;
    m.K = get<std::int32_t>(in, path);
    m.V = get<std::int32_t>(in, path);
    const auto D = get<std::uint64_t>(in, path);
    m.priors.alpha = get<double>(in, path);
    m.priors.beta = get<double>(in, path);
    m.seed = get<std::uint64_t>(in, path);
    m.frozen = get<std::uint8_t>(in, path) != 0;
    m.cutoff_year = get<std::int32_t>(in, path);
    if (m.K < 1 || m.V < 1) throw DataError(path + ": invalid model dimensions");
    m.phi.resize(m.K, m.V);
    m.theta.resize(static_cast<Eigen::Index>(D), m.K);
    in.read(reinterpret_cast<char*>(m.phi.data()), static_cast<std::streamsize>(m.phi.size() * 8));
    in.read(reinterpret_cast<char*>(m.theta.data()), static_cast<std::streamsize>(m.theta.size() * 8));
    if (!in) throw DataError(path + ": truncated model file");
    m.article_ids.reserve(D);
    for (std::uint64_t d = 0; d < D; ++d) {
        const auto len = get<std::uint32_t>(in, path);
        std::string id(len, '\0');
        in.read(id.data(), len);
        if (!in) throw DataError(path + ": truncated model file");
        m.article_ids.push_back(std::move(id));
    }
    return m;
}

void write_topics_json(const std::string& path, const TopicModel& model, const Vocabulary& vocabulary, int top) {
    if (static_cast<int>(vocabulary.size()) != model.V) throw DataError("vocabulary does not match the model");
    nlohmann::json topics = nlohmann::json::array();
    std::vector<int> order(static_cast<std::size_t>(model.V));
    for (int k = 0; k < model.K; ++k) {
        std::iota(order.begin(), order.end(), 0);
        const int n = std::min(top, model.V);
        std::partial_sort(order.begin(), order.begin() + n, order.end(), [&](int a, int b) {
            const double pa = model.phi(k, a);
            const double pb = model.phi(k, b);
            return pa != pb ? pa > pb : a < b;
        });
        nlohmann::json words = nlohmann::json::array();
        for (int i = 0; i < n; ++i)
            words.push_back({{"token", vocabulary.token(order[i])}, {"prob", model.phi(k, order[i])}});
        topics.push_back({{"topic", k}, {"words", std::move(words)}});
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << nlohmann::json{{"topics", std::move(topics)}}.dump(1) << '\n';
}

// ---------------------------------------------------------------------------
// Scoring

double score_oos_r2(const Eigen::MatrixXd& train_x, const Eigen::VectorXd& train_y, const Eigen::MatrixXd& holdout_x,
                    const Eigen::VectorXd& holdout_y) {
    if (holdout_y.size() == 0) throw NumericalError("empty holdout");
    const double mean = holdout_y.mean();
    const double sst = (holdout_y.array() - mean).square().sum();
    if (!(sst > 0.0)) throw NumericalError("holdout returns have zero variance");
    const Eigen::Index p = train_x.cols() + 1;
    Eigen::MatrixXd X(train_x.rows(), p);
    X.col(0).setOnes();
    X.rightCols(p - 1) = train_x;
    Eigen::MatrixXd xtx = X.transpose() * X;
    xtx.diagonal().array() += 1e-8;
    const Eigen::VectorXd b = xtx.ldlt().solve(X.transpose() * train_y);
    const Eigen::VectorXd pred = (holdout_x * b.tail(p - 1)).array() + b(0);
    const double sse = (holdout_y - pred).squaredNorm();
    return 1.0 - sse / sst;
}

namespace {

bool in_holdout(const std::string& id, double fraction, std::uint64_t seed) {
    const std::uint64_t h = mix64(fnv1a(id) ^ derive_seed(seed, {0x401d}));
    return static_cast<double>(h >> 11) * 0x1.0p-53 < fraction;
}

Eigen::MatrixXd group_exposures(const RowMatrix& theta, const std::vector<ScoringSet::Group>& groups) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(groups.size()), theta.cols());
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (auto d : groups[g].docs) x.row(static_cast<Eigen::Index>(g)) += theta.row(d);
    return x;
}

Eigen::VectorXd group_returns(const std::vector<ScoringSet::Group>& groups) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(groups.size()));
    for (std::size_t g = 0; g < groups.size(); ++g) y(static_cast<Eigen::Index>(g)) = groups[g].ret;
    return y;
}

}  // namespace

ScoringSet build_scoring_set(const Corpus& corpus, const std::vector<std::size_t>& article_indices,
                             const SessionReturnFn& returns, double holdout_fraction, std::uint64_t seed) {
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) throw ConfigError("holdout_fraction must lie in (0,1)");
    using Key = std::tuple<int, Date, int>;
    std::map<Key, std::vector<std::int32_t>> groups[2];
    for (std::size_t i = 0; i < article_indices.size(); ++i) {
        const Article& a = corpus.articles.at(article_indices[i]);
        const int h = in_holdout(a.id, holdout_fraction, seed) ? 1 : 0;
        for (int f : a.firm_ids)
            groups[h][{f, a.session.trading_day, index_of(a.session.period)}].push_back(static_cast<std::int32_t>(i));
    }
    ScoringSet s;
    for (int h = 0; h < 2; ++h) {
        auto& out = h ? s.holdout : s.train;
        for (auto& [key, docs] : groups[h]) {
            const double r = returns(std::get<0>(key), std::get<1>(key), static_cast<Period>(std::get<2>(key)));
            if (std::isfinite(r)) out.push_back({std::move(docs), r});
        }
    }
    return s;
}

double score_theta(const RowMatrix& theta, const ScoringSet& scoring) {
    if (scoring.train.empty() || scoring.holdout.empty()) return std::numeric_limits<double>::quiet_NaN();
    try {
        const double r2 = score_oos_r2(group_exposures(theta, scoring.train), group_returns(scoring.train),
                                       group_exposures(theta, scoring.holdout), group_returns(scoring.holdout));
        return std::isfinite(r2) ? r2 : std::numeric_limits<double>::quiet_NaN();
    } catch (const Error&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

// ---------------------------------------------------------------------------
// Branching

BranchingResult train_branching(const DocumentSet& docs, const ScoringSet& scoring, int topics, LdaPriors priors,
                                const BranchingConfig& config, std::uint64_t seed, bool parallel) {
    if (docs.size() == 0) throw DataError("cannot train on an empty corpus");
    if (config.chains_per_round < 1 || config.rounds < 1 || config.iterations_per_round < 0)
        throw ConfigError("branching needs at least one chain, one round and nonnegative iterations");
    const int C = config.chains_per_round;
    BranchingResult result;
    LdaState winner;
    std::vector<LdaState> chains(static_cast<std::size_t>(C));
    std::vector<double> r2(static_cast<std::size_t>(C));
    for (int r = 0; r < config.rounds; ++r) {
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
        for (int c = 0; c < C; ++c) {
            CounterRng rng(derive_seed(seed, {static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(c)}));
            LdaState& s = chains[c];
            s = r == 0 ? LdaState::random_init(docs, topics, priors, rng) : winner;
            for (int it = 0; it < config.iterations_per_round; ++it) gibbs_sweep(s, docs, rng);
            r2[c] = score_theta(s.theta(docs), scoring);
        }
        int best = -1;
        for (int c = 0; c < C; ++c) {
            result.scores.push_back({r, c, r2[c]});
            if (std::isnan(r2[c])) continue;
            if (best < 0 || r2[c] > r2[best]) best = c;
        }
        if (best < 0) throw NumericalError("every chain in round " + std::to_string(r + 1) + " produced a NaN score");
        result.winners.push_back(best);
        winner = std::move(chains[best]);
        result.final_score = r2[best];
    }
    result.state = std::move(winner);
    return result;
}

// ---------------------------------------------------------------------------
// Fold-in

FoldInResult infer_frozen(const TopicModel& model, const std::vector<std::int32_t>& tokens, CounterRng& rng,
                          const FoldInOptions& options) {
    if (!model.frozen) throw ConfigError("fold-in inference requires a frozen model");
    const int K = model.K;
    FoldInResult out;
    if (tokens.empty()) {
        out.theta = Eigen::VectorXd::Constant(K, 1.0 / K);
        out.empty = true;
        return out;
    }
    const double a = model.priors.alpha;
    std::vector<int> z(tokens.size());
    std::vector<double> ndk(static_cast<std::size_t>(K), 0.0);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] < 0 || tokens[i] >= model.V) throw DataError("token id outside the model vocabulary");
        z[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(K)));
        ndk[z[i]] += 1.0;
    }
    std::vector<double> cum(static_cast<std::size_t>(K));
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(K);
    const double denom = static_cast<double>(tokens.size()) + K * a;
    for (int sweep = 0; sweep < options.burn_in + options.samples; ++sweep) {
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            ndk[z[i]] -= 1.0;
            double total = 0.0;
            for (int k = 0; k < K; ++k) {
                total += (ndk[k] + a) * model.phi(k, tokens[i]);
                cum[k] = total;
            }
            const double u = rng.uniform() * total;
            int k = 0;
            while (k < K - 1 && cum[k] <= u) ++k;
            z[i] = k;
            ndk[k] += 1.0;
        }
        if (sweep >= options.burn_in)
            for (int k = 0; k < K; ++k) acc(k) += (ndk[k] + a) / denom;
    }
    if (options.samples > 0) {
        out.theta = acc / static_cast<double>(options.samples);
    } else {
        out.theta.resize(K);
        for (int k = 0; k < K; ++k) out.theta(k) = (ndk[k] + a) / denom;
    }
    out.theta /= out.theta.sum();
    return out;
}

// ---------------------------------------------------------------------------
// Full training

TopicModel train_model(const Corpus& corpus, const SessionReturnFn& returns, const TrainOptions& options,
                       TrainReport* report) {
    if (corpus.articles.empty()) throw DataError("cannot train on an empty corpus");
    const LdaPriors priors = options.priors.value_or(LdaPriors::defaults(options.topics));
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> later_idx;
    for (std::size_t i = 0; i < corpus.articles.size(); ++i) {
        const int y = year_of(corpus.articles[i].session.trading_day);
        (options.cutoff_year && y > *options.cutoff_year ? later_idx : train_idx).push_back(i);
    }
    if (train_idx.empty()) throw DataError("no articles on or before the model cutoff year");

    const DocumentSet docs = DocumentSet::from_corpus(corpus, train_idx);
    const ScoringSet scoring =
        build_scoring_set(corpus, train_idx, returns, options.branching.holdout_fraction, options.seed);
    BranchingResult br =
        train_branching(docs, scoring, options.topics, priors, options.branching, options.seed, options.parallel);

    TopicModel m;
    m.K = options.topics;
    m.V = docs.vocabulary_size;
    m.priors = priors;
    m.seed = options.seed;
    m.frozen = options.cutoff_year.has_value();
    m.cutoff_year = options.cutoff_year.value_or(0);
    m.phi = br.state.phi();
    m.theta.resize(static_cast<Eigen::Index>(corpus.articles.size()), m.K);
    m.article_ids.reserve(corpus.articles.size());
    for (const auto& a : corpus.articles) m.article_ids.push_back(a.id);
    const RowMatrix train_theta = br.state.theta(docs);
    for (std::size_t i = 0; i < train_idx.size(); ++i)
        m.theta.row(static_cast<Eigen::Index>(train_idx[i])) = train_theta.row(static_cast<Eigen::Index>(i));

    std::size_t empty = 0;
    const auto n_later = static_cast<long>(later_idx.size());
#pragma omp parallel for schedule(dynamic, 16) reduction(+ : empty) if (options.parallel)
    for (long i = 0; i < n_later; ++i) {
        const Article& a = corpus.articles[later_idx[i]];
        CounterRng rng(derive_seed(options.seed, {0xf01d, fnv1a(a.id)}));
        FoldInResult f = infer_frozen(m, a.tokens, rng, options.fold_in);
        if (f.empty) ++empty;
        m.theta.row(static_cast<Eigen::Index>(later_idx[i])) = f.theta.transpose();
    }

    if (report) {
        report->scores = br.scores;
        report->winners = br.winners;
        report->final_score = br.final_score;
        report->training_documents = train_idx.size();
        report->inferred_documents = later_idx.size();
        report->empty_documents = empty;
    }
    m.check();
    return m;
}

}  // namespace newsflow
