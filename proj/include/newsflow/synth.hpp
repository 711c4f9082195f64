#pragma once

#include <newsflow/calendar.hpp>
#include <newsflow/common.hpp>
#include <newsflow/corpus.hpp>
#include <newsflow/exposure.hpp>
#include <newsflow/forecast.hpp>
#include <newsflow/lda.hpp>
#include <newsflow/returns.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace newsflow {

struct SynthConfig {
    int topics = 8;
    int vocabulary = 400;
    int documents = 5000;
    int firms = 60;
    int years = 12;
    int start_year = 2000;
    int doc_length_min = 40;
    int doc_length_max = 120;
    /// Share of each topic's mass on its own block of words.
    double own_word_mass = 0.9;
    /// Dirichlet concentration of a document's theta around its firm's
    /// topic shares.
    double theta_concentration = 2.0;
    double overnight_share = 2.0 / 3.0;
    double second_firm_probability = 0.2;

    /// a_{t+1} = mu + rho (mean(a_{t-3..t}) - mu) + sigma mu eps.
    double persistence_rho = 0.9;
    double affinity_sigma = 0.1;
    int home_topics = 2;
    double home_weight = 50.0;
    double other_weight = 1.0;
    int burn_in_years = 50;

    /// Annual r^p = alpha + I(p=i) alpha_i + beta^p . zbar^p_{t-1} + eps.
    std::vector<double> beta_i;
    std::vector<double> beta_o;
    double alpha = 0.0;
    double alpha_i = 0.0;
    double noise_sigma = 0.05;
    double daily_sigma = 0.01;
    int window = 4;
    /// Daily reversals: overnight into s+1 loads -im_reversal on day s's
    /// intraday deviation; intraday on s loads -iim_reversal on the same
    /// morning's overnight deviation.
    double im_reversal = 0.0;
    double iim_reversal = 0.0;
    double dividend_probability = 1.0 / 63.0;
    double dividend_yield = 0.004;

    std::uint64_t seed = 1;

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// Reads a JSON object whose keys are SynthConfig fields; unknown keys and
/// type mismatches raise ConfigError with the field path under `path`.
SynthConfig synth_config_from_json_text(const std::string& text, const std::string& path = "synth");
SynthConfig read_synth_config(const std::string& file);
std::string synth_config_to_json(const SynthConfig& config);

struct GroundTruth {
    int K = 0;
    int V = 0;
    std::vector<std::string> words;
    RowMatrix phi;  // K x V
    Eigen::VectorXd beta_i;
    Eigen::VectorXd beta_o;
    double alpha = 0.0;
    double alpha_i = 0.0;
    double noise_sigma = 0.0;
    double persistence_rho = 0.0;
    std::vector<int> firms;                    // ids 1..F
    std::vector<std::vector<int>> home_topics;  // per firm
    /// Affinity a_{j,k,t}: one firms x K matrix per year.
    std::vector<RowMatrix> affinity;
    int start_year = 0;

    const RowMatrix& affinity_for(int year) const { return affinity.at(static_cast<std::size_t>(year - start_year)); }
};

/// Consonant-only tokens that pass preprocessing unchanged.
std::vector<std::string> synthetic_words(int count);

GroundTruth make_truth(const SynthConfig& config);

/// Weekdays of the configured years minus January 1 and December 25.
TradingCalendar synth_calendar(const SynthConfig& config);
/// Every firm is an index member over the whole calendar; ticker "F<id>".
Membership synth_membership(const SynthConfig& config);

struct SynthCorpus {
    std::vector<RawArticle> articles;
    RowMatrix theta;  // true document-topic proportions, article order
    std::vector<Session> sessions;
    std::vector<std::vector<int>> firms;  // ascending
};

/// LDA generative process with firm mentions drawn from affinity . theta.
SynthCorpus generate_corpus(const GroundTruth& truth, const SynthConfig& config, const TradingCalendar& calendar);

/// z^p_{j,k,t} from the true thetas, every firm-year present.
ExposurePanel true_exposures(const GroundTruth& truth, const SynthCorpus& corpus);
/// Affinities split across sessions by the overnight share.
ExposurePanel affinity_exposures(const GroundTruth& truth, const SynthConfig& config);
/// TopicModel wrapper of the true thetas aligned with an ingested corpus
/// (matched by article id); phi is uniform over the corpus vocabulary.
TopicModel truth_model(const SynthCorpus& synth, const Corpus& corpus, int K);

struct SynthMarket {
    ReturnPanel returns;  // planted daily session log returns
    std::vector<PriceRow> prices;
    std::vector<DividendRow> dividends;
    std::vector<FundamentalsRow> fundamentals;
    /// Planted annual sums (firm, year, intraday, overnight).
    std::vector<AnnualStats> annual_targets;
};

/// Annual session returns from the planted linear model on n-year windowed
/// exposures, spread into daily series (equal drift plus recentred Gaussian
/// noise) and converted to prices and dividends.
SynthMarket generate_market(const GroundTruth& truth, const SynthConfig& config, const TradingCalendar& calendar,
                            const ExposurePanel& annual_exposures);

struct SynthDataset {
    SynthConfig config;
    GroundTruth truth;
    SynthCorpus corpus;
    SynthMarket market;
};

SynthDataset generate_dataset(const SynthConfig& config);

/// articles.jsonl, prices.csv, dividends.csv, membership.csv, holidays.csv,
/// fundamentals.csv and truth.json under dir. Returns the file names.
std::vector<std::string> write_dataset(const std::string& dir, const SynthDataset& data);

/// Minimum-cost assignment for a square cost matrix: result[row] = column.
std::vector<int> hungarian(const Eigen::MatrixXd& cost);

struct RecoveryResult {
    double mean_tv = 0.0;
    std::vector<double> tv;      // per true topic
    std::vector<int> matching;   // true topic -> estimated topic
};

/// Total-variation distances between true and estimated topic-word
/// distributions after optimal matching; words missing from the estimated
/// vocabulary carry zero estimated mass.
RecoveryResult topic_recovery(const GroundTruth& truth, const RowMatrix& phi_estimated, const Vocabulary& vocabulary);

}  // namespace newsflow
