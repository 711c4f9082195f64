#pragma once

#include <newsflow/common.hpp>
#include <newsflow/rng.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace newsflow {

struct Corpus;
class Vocabulary;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Token ids of a document collection in compressed row form.
struct DocumentSet {
    std::vector<std::int64_t> offsets{0};
    std::vector<std::int32_t> words;
    int vocabulary_size = 0;

    static DocumentSet from_corpus(const Corpus& corpus);
    static DocumentSet from_corpus(const Corpus& corpus, const std::vector<std::size_t>& article_indices);

    void add(const std::vector<std::int32_t>& tokens);
    std::size_t size() const { return offsets.size() - 1; }
    std::int64_t length(std::size_t d) const { return offsets[d + 1] - offsets[d]; }
    std::int64_t token_total() const { return offsets.back(); }
};

struct LdaPriors {
    double alpha = 0.0;
    double beta = 0.01;

    /// alpha = 50/K, beta = 0.01.
    static LdaPriors defaults(int topics) { return {50.0 / topics, 0.01}; }
};

/// Collapsed Gibbs sampler state. Counts are dense: n_dk is D x K and the
/// topic-word counts are stored word-major (n_wk is V x K) so one token's
/// conditional reads a contiguous row.
struct LdaState {
    int K = 0;
    int V = 0;
    LdaPriors priors;
    std::vector<std::int32_t> z;
    std::vector<std::int32_t> n_dk;
    std::vector<std::int32_t> n_wk;
    std::vector<std::int64_t> n_k;

    std::size_t documents() const { return K ? n_dk.size() / static_cast<std::size_t>(K) : 0; }

    /// Uniform random topic per token.
    static LdaState random_init(const DocumentSet& docs, int topics, LdaPriors priors, CounterRng& rng);

    /// Throws NumericalError when any conservation invariant fails.
    void check_invariants(const DocumentSet& docs) const;

    /// Posterior means (n_dk + alpha) / (n_d + K alpha).
    RowMatrix theta(const DocumentSet& docs) const;
    /// Posterior means (n_wk + beta) / (n_k + V beta), as K x V.
    RowMatrix phi() const;
};

/// One pass over every token, resampling from
/// p(z=k) ∝ (n_dk + a)(n_wk + b)/(n_k + V b) with incremental count updates.
void gibbs_sweep(LdaState& state, const DocumentSet& docs, CounterRng& rng);

struct TopicModel {
    int K = 0;
    int V = 0;
    LdaPriors priors;
    std::uint64_t seed = 0;
    bool frozen = false;
    /// Last year whose articles trained phi; 0 for a full-sample model.
    int cutoff_year = 0;
    RowMatrix phi;    // K x V
    RowMatrix theta;  // D x K, rows aligned with article_ids
    std::vector<std::string> article_ids;

    /// Throws NumericalError unless phi and theta rows are probability vectors.
    void check() const;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;
void write_model(const std::string& path, const TopicModel& model);
TopicModel read_model(const std::string& path);
/// Top words per topic, for inspection.
void write_topics_json(const std::string& path, const TopicModel& model, const Vocabulary& vocabulary, int top = 20);

// ---------------------------------------------------------------------------
// Supervised scoring

/// 1 - SSE/SST on the holdout of an OLS fit (intercept plus the columns of
/// train_x, ridge 1e-8) on the training rows. Throws NumericalError when the
/// holdout returns have zero variance.
double score_oos_r2(const Eigen::MatrixXd& train_x, const Eigen::VectorXd& train_y, const Eigen::MatrixXd& holdout_x,
                    const Eigen::VectorXd& holdout_y);

/// Firm-session observations for chain scoring. Each group sums the theta
/// rows of its documents into one exposure vector, paired with the firm's
/// contemporaneous session return.
struct ScoringSet {
    struct Group {
        std::vector<std::int32_t> docs;  // indices into the DocumentSet
        double ret;
    };
    std::vector<Group> train;
    std::vector<Group> holdout;
};

/// Return of a firm in a session, NaN when unavailable.
using SessionReturnFn = std::function<double(int firm, Date day, Period period)>;

/// Builds the scoring groups for the articles (by corpus index) that make up
/// a DocumentSet, in that order. Articles whose seeded id hash falls below
/// holdout_fraction form the holdout; they stay in the sampler.
ScoringSet build_scoring_set(const Corpus& corpus, const std::vector<std::size_t>& article_indices,
                             const SessionReturnFn& returns, double holdout_fraction, std::uint64_t seed);

/// Scores a theta matrix against a ScoringSet; NaN on any numerical failure.
double score_theta(const RowMatrix& theta, const ScoringSet& scoring);

struct BranchingConfig {
    int chains_per_round = 10;
    int rounds = 5;
    int iterations_per_round = 200;
    double holdout_fraction = 0.1;
};

struct ChainScore {
    int round;
    int chain;
    double r2;
};

struct BranchingResult {
    LdaState state;
    std::vector<ChainScore> scores;
    /// Winning chain index per round.
    std::vector<int> winners;
    double final_score = 0.0;
};

/// Round 1 starts chains_per_round independent random initializations; each
/// later round clones the previous winner with fresh streams. Chains with a
/// NaN score are excluded; ties go to the lower chain index. Chains run
/// concurrently unless parallel is false; results are identical either way.
BranchingResult train_branching(const DocumentSet& docs, const ScoringSet& scoring, int topics, LdaPriors priors,
                                const BranchingConfig& config, std::uint64_t seed, bool parallel = true);

// ---------------------------------------------------------------------------
// Frozen inference

struct FoldInOptions {
    int burn_in = 50;
    int samples = 50;
};

struct FoldInResult {
    Eigen::VectorXd theta;
    /// True when the document had no tokens and theta is uniform.
    bool empty = false;
};

/// Resamples the document's topics against fixed phi for burn_in sweeps, then
/// averages (n_dk + alpha)/(n_d + K alpha) over the next samples sweeps.
/// Throws ConfigError unless model.frozen.
FoldInResult infer_frozen(const TopicModel& model, const std::vector<std::int32_t>& tokens, CounterRng& rng,
                          const FoldInOptions& options = {});

struct TrainOptions {
    int topics = 200;
    std::optional<LdaPriors> priors;
    BranchingConfig branching;
    std::uint64_t seed = 0;
    /// When set, phi is estimated on articles up to this year and frozen;
    /// later articles receive fold-in thetas.
    std::optional<int> cutoff_year;
    FoldInOptions fold_in;
    bool parallel = true;
};

struct TrainReport {
    std::vector<ChainScore> scores;
    std::vector<int> winners;
    double final_score = 0.0;
    std::size_t training_documents = 0;
    std::size_t inferred_documents = 0;
    std::size_t empty_documents = 0;
};

/// Branching training plus (for a cutoff model) fold-in of later articles.
/// theta rows follow corpus article order.
TopicModel train_model(const Corpus& corpus, const SessionReturnFn& returns, const TrainOptions& options,
                       TrainReport* report = nullptr);

}  // namespace newsflow
