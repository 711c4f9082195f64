#pragma once

#include <newsflow/common.hpp>
#include <newsflow/forecast.hpp>
#include <newsflow/synth.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace newsflow {

/// Input file locations. Empty entries default to the files the synth stage
/// writes under <output>/synth.
struct PipelinePaths {
    std::string articles;
    std::string prices;
    std::string dividends;
    std::string membership;
    std::string holidays;
    std::string fundamentals;
    std::string output = "run";
};

struct PipelineConfig {
    PipelinePaths paths;
    std::string timezone = "America/New_York";
    std::uint64_t seed = 1;
    bool parallel = true;

    // ingest
    int max_firms = 3;
    int min_words = 25;
    int min_total_count = 25;
    int min_document_count = 25;

    // train; topics = 0 picks synth.topics on synthetic inputs and 200 otherwise
    int topics = 0;
    double beta = 0.01;
    int cutoff_year = 0;  // 0: full-sample model
    BranchingConfig branching;
    int fold_in_burn_in = 50;
    int fold_in_samples = 50;

    // forecast
    int window = 4;
    Variant variant = Variant::V1;
    int pool_years = 1;
    bool use_controls = true;
    int folds = 5;
    int portfolio_size = 25;
    int contribution_count = 10;

    // backtest
    std::vector<int> m_grid{25};

    SynthConfig synth;
    /// True when the synth section set its own seed.
    bool synth_seed_set = false;

    bool synthetic_inputs() const { return paths.articles.empty(); }
    int resolved_topics() const { return topics > 0 ? topics : (synthetic_inputs() ? synth.topics : 200); }

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// Parses a JSON config, then applies "dotted.path=value" overrides (the
/// value is read as JSON, falling back to a plain string). Unknown keys and
/// type errors raise ConfigError with the field path.
PipelineConfig parse_pipeline_config(const std::string& json_text, const std::vector<std::string>& overrides = {});
PipelineConfig load_pipeline_config(const std::optional<std::string>& file, const std::vector<std::string>& overrides = {});
/// Canonical JSON of the reproducibility-relevant settings (no output dir).
std::string pipeline_config_json(const PipelineConfig& config);

enum class Stage { Synth, Ingest, Train, Exposures, Forecast, Backtest, Report };
std::string_view to_string(Stage s);
Stage stage_from_string(std::string_view s);
/// Stages of a full run, in order; synth only for synthetic inputs.
std::vector<Stage> pipeline_stages(const PipelineConfig& config);

struct StageOutcome {
    Stage stage;
    bool cached = false;
    /// Output files relative to the run directory.
    std::vector<std::string> outputs;
};

/// Runs one stage. A stage whose cache key (hash of its inputs and of the
/// config subset it reads) matches its recorded manifest, with every output
/// present and unchanged, is skipped unless force is set. Missing upstream
/// artifacts raise ConfigError naming the stage that produces them.
StageOutcome run_stage(Stage stage, const PipelineConfig& config, bool force = false);
std::vector<StageOutcome> run_pipeline(const PipelineConfig& config, bool force = false);

/// Held-out R2 of the trained model's thetas; writes train/score.json.
double score_model(const PipelineConfig& config);
/// Fold-in thetas for a JSONL article file under the frozen trained model;
/// writes id,topic_0..topic_{K-1} to out.
void infer_articles(const PipelineConfig& config, const std::string& articles_jsonl, const std::string& out);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);
std::string sha256_text(const std::string& text);

/// 1 config, 2 data, 3 numerical, 1 for anything else.
int exit_code(const std::exception& e);

}  // namespace newsflow
