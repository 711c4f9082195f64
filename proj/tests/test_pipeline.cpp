#include <newsflow/pipeline.hpp>

#include "util.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace newsflow;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> tiny(const std::string& out) {
    return {"paths.output=" + out,
            "synth.topics=3",
            "synth.vocabulary=60",
            "synth.documents=800",
            "synth.firms=40",
            "synth.years=7",
            "synth.burn_in_years=5",
            "synth.doc_length_min=30",
            "synth.doc_length_max=40",
            "train.chains=2",
            "train.rounds=1",
            "train.iterations=20",
            "train.fold_in_burn_in=5",
            "train.fold_in_samples=5",
            "ingest.min_total_count=5",
            "ingest.min_document_count=5",
            "ingest.min_words=10",
            "forecast.portfolio_size=3",
            "forecast.folds=3",
            "backtest.m=[3]"};
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(NEWSFLOW_CLI) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string cli_sets(const std::vector<std::string>& sets) {
    std::string s;
    for (const auto& x : sets) s += " --set '" + x + "'";
    return s;
}

}  // namespace

TEST(PipelineConfig, Defaults) {
    const PipelineConfig c = parse_pipeline_config("{}");
    EXPECT_EQ(c.window, 4);
    EXPECT_EQ(c.resolved_topics(), c.synth.topics);
    EXPECT_TRUE(c.synthetic_inputs());
    const auto stages = pipeline_stages(c);
    ASSERT_EQ(stages.size(), 7u);
    EXPECT_EQ(stages.front(), Stage::Synth);
    EXPECT_EQ(stages.back(), Stage::Report);
}

TEST(PipelineConfig, ErrorsNameTheFieldPath) {
    auto expect_field = [](const std::string& text, const std::vector<std::string>& sets, const std::string& field) {
        try {
            parse_pipeline_config(text, sets);
            ADD_FAILURE() << "no error for " << field;
        } catch (const ConfigError& e) {
            EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
        }
    };
    expect_field(R"({"train": {"topics": "many"}})", {}, "train.topics");
    expect_field(R"({"train": {"tpoics": 4}})", {}, "train.tpoics");
    expect_field("{}", {"forecast.variant=V9"}, "forecast.variant");
    expect_field("{}", {"forecast.window=0"}, "forecast.window");
    expect_field("{}", {"synth.persistence_rho=1.5"}, "synth.persistence_rho");
    expect_field("{}", {"nosuch.key=1"}, "nosuch");
    EXPECT_THROW(parse_pipeline_config("{not json"), ConfigError);
}

TEST(PipelineConfig, OverridesAndCanonicalJson) {
    const PipelineConfig a = parse_pipeline_config(R"({"forecast": {"window": 3}})", {"seed=7", "forecast.variant=V2"});
    EXPECT_EQ(a.window, 3);
    EXPECT_EQ(a.seed, 7u);
    EXPECT_EQ(a.variant, Variant::V2);
    const PipelineConfig b = parse_pipeline_config(pipeline_config_json(a));
    EXPECT_EQ(pipeline_config_json(a), pipeline_config_json(b));
    // Output location is not part of the reproducibility record.
    const PipelineConfig c = parse_pipeline_config(pipeline_config_json(a), {"paths.output=elsewhere"});
    EXPECT_EQ(pipeline_config_json(a), pipeline_config_json(c));
}

TEST(PipelineConfig, ExitCodes) {
    EXPECT_EQ(exit_code(ConfigError("x")), 1);
    EXPECT_EQ(exit_code(DataError("x")), 2);
    EXPECT_EQ(exit_code(NumericalError("x")), 3);
    EXPECT_EQ(exit_code(std::runtime_error("x")), 1);
}

TEST(Pipeline, MissingUpstreamNamesStage) {
    const std::string dir = testutil::temp_dir("pipe_missing");
    const PipelineConfig c = parse_pipeline_config("{}", {"paths.output=" + dir});
    try {
        run_stage(Stage::Train, c);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("ingest"), std::string::npos) << e.what();
    }
}

TEST(Pipeline, RunsCachesAndReproduces) {
    const std::string a = testutil::temp_dir("pipe_a");
    const std::string b = testutil::temp_dir("pipe_b");
    const PipelineConfig ca = parse_pipeline_config("{}", tiny(a));
    const PipelineConfig cb = parse_pipeline_config("{}", tiny(b));

    const auto first = run_pipeline(ca);
    ASSERT_EQ(first.size(), 7u);
    for (const auto& o : first) EXPECT_FALSE(o.cached) << to_string(o.stage);
    const auto second = run_pipeline(ca);
    for (const auto& o : second) EXPECT_TRUE(o.cached) << to_string(o.stage);

    run_pipeline(cb);
    for (const auto& o : first)
        for (const auto& f : o.outputs) {
            if (f.find("report/") == 0 && f.find(".json") != std::string::npos) continue;
            EXPECT_EQ(sha256_file(a + "/" + f), sha256_file(b + "/" + f)) << f;
        }

    // Editing an output reruns its stage; the regenerated bytes match, so
    // later stages stay cached.
    const std::string victim = a + "/forecast/forecasts.csv";
    ASSERT_TRUE(fs::exists(victim));
    { std::ofstream(victim, std::ios::app) << "x\n"; }
    const auto third = run_pipeline(ca);
    for (const auto& o : third) {
        const bool expect_cached = o.stage != Stage::Forecast;
        EXPECT_EQ(o.cached, expect_cached) << to_string(o.stage);
    }
    EXPECT_EQ(sha256_file(victim), sha256_file(b + "/forecast/forecasts.csv"));

    // A changed setting reruns its stage.
    PipelineConfig changed = parse_pipeline_config("{}", tiny(a));
    changed.portfolio_size = 4;
    EXPECT_FALSE(run_stage(Stage::Forecast, changed).cached);
    EXPECT_TRUE(run_stage(Stage::Train, changed).cached);

    // Score and inference on the trained model.
    const double r2 = score_model(ca);
    EXPECT_TRUE(std::isfinite(r2));
    EXPECT_LE(r2, 1.0);
    const std::string out = a + "/infer.csv";
    EXPECT_THROW(infer_articles(ca, a + "/synth/articles.jsonl", out), ConfigError);
    auto frozen_sets = tiny(a);
    frozen_sets.push_back("train.cutoff_year=2003");
    const PipelineConfig frozen = parse_pipeline_config("{}", frozen_sets);
    EXPECT_FALSE(run_stage(Stage::Train, frozen).cached);
    infer_articles(frozen, a + "/synth/articles.jsonl", out);
    const std::string text = testutil::read_file(out);
    EXPECT_EQ(text.rfind("id,topic_0,topic_1,topic_2\n", 0), 0u);
}

TEST(Pipeline, SerialMatchesParallel) {
    const std::string a = testutil::temp_dir("pipe_par");
    const std::string b = testutil::temp_dir("pipe_ser");
    auto sa = tiny(a);
    auto sb = tiny(b);
    sb.push_back("parallel=false");
    run_pipeline(parse_pipeline_config("{}", sa));
    run_pipeline(parse_pipeline_config("{}", sb));
    for (const char* f : {"train/model.bin", "exposures/annual.csv", "forecast/forecasts.csv"})
        EXPECT_EQ(sha256_file(a + "/" + f), sha256_file(b + "/" + f)) << f;
}

TEST(Cli, ExitCodes) {
    const std::string dir = testutil::temp_dir("cli");
    EXPECT_EQ(run_cli("config"), 0);
    EXPECT_EQ(run_cli("config --set train.topics=oops"), 1);
    EXPECT_EQ(run_cli("train -o " + dir), 1);
    EXPECT_EQ(run_cli("--no-such-flag"), 1);
    // Unreadable input file is a data problem.
    const std::string bad = dir + "/bad.jsonl";
    { std::ofstream(bad) << "{\"id\": 1\n"; }
    const std::string sets = cli_sets(tiny(dir + "/run"));
    ASSERT_EQ(run_cli("synth" + sets), 0);
    std::string paths;
    for (const char* f : {"prices", "dividends", "membership", "holidays", "fundamentals"})
        paths += std::string(" --set paths.") + f + "=" + dir + "/run/synth/" + f + ".csv";
    EXPECT_EQ(run_cli("ingest" + sets + paths + " --set paths.articles=" + bad), 2);
}
