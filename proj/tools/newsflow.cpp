#include <newsflow/pipeline.hpp>

#include <CLI11.hpp>
#include <omp.h>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace newsflow;

namespace {

struct Flags {
    std::string config;
    std::vector<std::string> sets;
    std::string output;
    std::optional<std::uint64_t> seed;
    std::optional<int> topics;
    std::string variant;
    std::optional<int> window;
    std::optional<int> cutoff_year;
    std::optional<int> portfolio_size;
    std::optional<int> threads;
    bool serial = false;
    bool force = false;

    /// --set entries first, then the dedicated flags, so flags win.
    std::vector<std::string> overrides() const {
        std::vector<std::string> o = sets;
        auto json_string = [](const std::string& s) {
            std::string q = "\"";
            for (char c : s) {
                if (c == '"' || c == '\\') q += '\\';
                q += c;
            }
            return q + "\"";
        };
        if (!output.empty()) o.push_back("paths.output=" + json_string(output));
        if (seed) o.push_back("seed=" + std::to_string(*seed));
        if (topics) o.push_back("train.topics=" + std::to_string(*topics));
        if (!variant.empty()) o.push_back("forecast.variant=" + json_string(variant));
        if (window) o.push_back("forecast.window=" + std::to_string(*window));
        if (cutoff_year) o.push_back("train.cutoff_year=" + std::to_string(*cutoff_year));
        if (portfolio_size) o.push_back("forecast.portfolio_size=" + std::to_string(*portfolio_size));
        if (serial) o.push_back("parallel=false");
        return o;
    }

    PipelineConfig load() const {
        if (threads) omp_set_num_threads(*threads);
        return load_pipeline_config(config.empty() ? std::nullopt : std::optional<std::string>(config), overrides());
    }
};

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("-c,--config", f.config, "JSON config file");
    cmd->add_option("--set", f.sets, "Override a config field, e.g. --set train.rounds=3");
    cmd->add_option("-o,--output", f.output, "Run directory");
    cmd->add_option("--seed", f.seed, "Master seed");
    cmd->add_option("--topics", f.topics, "Number of topics K");
    cmd->add_option("--variant", f.variant, "Forecast variant V1-V4");
    cmd->add_option("--window", f.window, "Exposure window n in years");
    cmd->add_option("--cutoff-year", f.cutoff_year, "Freeze the topic model after this year (0: full sample)");
    cmd->add_option("--portfolio-size", f.portfolio_size, "Firms per selection");
    cmd->add_option("--threads", f.threads, "OpenMP thread count");
    cmd->add_flag("--serial", f.serial, "Disable parallel kernels");
    cmd->add_flag("--force", f.force, "Recompute even when cached outputs are current");
}

void print(const StageOutcome& o) {
    std::cout << to_string(o.stage) << (o.cached ? " (cached)" : "") << '\n';
    for (const auto& f : o.outputs) std::cout << "  " << f << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"News-flow topic pipeline: intraday and overnight return forecasts from topic exposures"};
    app.require_subcommand(1);
    Flags flags;
    std::string infer_in, infer_out;

    std::vector<std::pair<CLI::App*, Stage>> stage_cmds;
    for (Stage s : {Stage::Synth, Stage::Ingest, Stage::Train, Stage::Exposures, Stage::Forecast, Stage::Backtest,
                    Stage::Report}) {
        std::string help = "Run the " + std::string(to_string(s)) + " stage";
        auto* cmd = app.add_subcommand(std::string(to_string(s)), help);
        add_common(cmd, flags);
        stage_cmds.emplace_back(cmd, s);
    }
    auto* run_cmd = app.add_subcommand("run", "Run every stage in order");
    add_common(run_cmd, flags);
    auto* score_cmd = app.add_subcommand("score", "Held-out R2 of the trained topic model");
    add_common(score_cmd, flags);
    auto* infer_cmd = app.add_subcommand("infer", "Fold-in topic proportions for new articles");
    add_common(infer_cmd, flags);
    infer_cmd->add_option("--articles", infer_in, "JSONL articles")->required();
    infer_cmd->add_option("--out", infer_out, "Output CSV")->required();
    auto* config_cmd = app.add_subcommand("config", "Print the resolved configuration");
    add_common(config_cmd, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const PipelineConfig cfg = flags.load();
        for (auto& [cmd, stage] : stage_cmds)
            if (cmd->parsed()) print(run_stage(stage, cfg, flags.force));
        if (run_cmd->parsed())
            for (const auto& o : run_pipeline(cfg, flags.force)) print(o);
        if (score_cmd->parsed()) std::cout << "oos_r2 " << score_model(cfg) << '\n';
        if (infer_cmd->parsed()) infer_articles(cfg, infer_in, infer_out);
        if (config_cmd->parsed()) std::cout << pipeline_config_json(cfg) << '\n';
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e);
    }
    return 0;
}
