#include <newsflow/corpus.hpp>
#include <newsflow/exposure.hpp>
#include <newsflow/lasso.hpp>
#include <newsflow/lda.hpp>
#include <newsflow/synth.hpp>

#include <benchmark/benchmark.h>

using namespace newsflow;

namespace {

struct Fixture {
    SynthDataset data;
    Corpus corpus;
    DocumentSet docs;
    ScoringSet scoring;
    TopicModel truth;

    Fixture() {
        SynthConfig c;
        c.documents = 2000;
        c.firms = 40;
        c.years = 6;
        data = generate_dataset(c);
        const TradingCalendar cal = synth_calendar(c);
        IngestOptions io;
        io.vocabulary.min_total_count = 5;
        io.vocabulary.min_document_count = 5;
        corpus = ingest(data.corpus.articles, synth_membership(c), cal, TimeZone::from_name("America/New_York"), io);
        docs = DocumentSet::from_corpus(corpus);
        std::vector<std::size_t> idx(corpus.articles.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        const ReturnPanel& panel = data.market.returns;
        scoring = build_scoring_set(
            corpus, idx, [&](int f, Date d, Period p) { return panel.get(f, d, p); }, 0.1, 7);
        truth = truth_model(data.corpus, corpus, c.topics);
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

void BM_GibbsSweep(benchmark::State& state) {
    const auto& f = fixture();
    CounterRng rng(1);
    LdaState s = LdaState::random_init(f.docs, 8, LdaPriors::defaults(8), rng);
    for (auto _ : state) gibbs_sweep(s, f.docs, rng);
    state.SetItemsProcessed(state.iterations() * f.docs.token_total());
}
BENCHMARK(BM_GibbsSweep)->Unit(benchmark::kMillisecond);

void BM_Branching(benchmark::State& state) {
    const auto& f = fixture();
    BranchingConfig bc{4, 2, 10, 0.1};
    for (auto _ : state)
        benchmark::DoNotOptimize(train_branching(f.docs, f.scoring, 8, LdaPriors::defaults(8), bc, 3, state.range(0) != 0));
}
BENCHMARK(BM_Branching)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

void BM_FoldIn(benchmark::State& state) {
    const auto& f = fixture();
    TopicModel m = f.truth;
    m.frozen = true;
    m.phi = f.data.truth.phi;  // word ids differ, timing only
    m.phi.conservativeResize(m.K, static_cast<Eigen::Index>(f.corpus.vocabulary.size()));
    for (int k = 0; k < m.K; ++k) m.phi.row(k) /= m.phi.row(k).sum();
    m.V = static_cast<int>(f.corpus.vocabulary.size());
    const auto& tokens = f.corpus.articles.front().tokens;
    CounterRng rng(5);
    for (auto _ : state) benchmark::DoNotOptimize(infer_frozen(m, tokens, rng));
}
BENCHMARK(BM_FoldIn)->Unit(benchmark::kMicrosecond);

void BM_Exposures(benchmark::State& state) {
    const auto& f = fixture();
    ExposureOptions o;
    for (int j : f.data.truth.firms) o.firms.insert(j);
    o.parallel = true;
    for (auto _ : state) {
        if (state.range(0)) benchmark::DoNotOptimize(compute_exposures(f.corpus, f.truth, o));
        else benchmark::DoNotOptimize(compute_exposures_serial(f.corpus, f.truth, o));
    }
}
BENCHMARK(BM_Exposures)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMicrosecond);

void BM_LassoCv(benchmark::State& state) {
    const int n = 600, p = 40;
    CounterRng rng(11);
    Eigen::MatrixXd X(n, p), U = Eigen::MatrixXd::Ones(n, 1);
    Eigen::VectorXd y(n);
    std::vector<int> fold(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) X(i, j) = rng.normal();
        y(i) = X(i, 0) - 0.5 * X(i, 3) + rng.normal();
        fold[static_cast<std::size_t>(i)] = i % 5;
    }
    LassoOptions o;
    o.parallel = state.range(0) != 0;
    for (auto _ : state) benchmark::DoNotOptimize(lasso_cv(y, X, U, fold, o));
}
BENCHMARK(BM_LassoCv)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
