#include <newsflow/lda.hpp>
#include <newsflow/rng.hpp>

#include "reference_lda.hpp"
#include "util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace newsflow;

namespace {

struct Planted {
    DocumentSet docs;
    RowMatrix phi;    // K x V
    RowMatrix theta;  // D x K
};

/// Block topics over V words; each document mixes topics by a Dirichlet draw.
Planted planted_corpus(int K, int V, int D, int len, std::uint64_t seed, double own = 0.95) {
    CounterRng r(seed);
    Planted p;
    p.docs.vocabulary_size = V;
    p.phi = RowMatrix::Constant(K, V, (1.0 - own) / V);
    const int block = V / K;
    for (int k = 0; k < K; ++k)
        for (int w = k * block; w < (k + 1) * block; ++w) p.phi(k, w) += own / block;
    p.theta.resize(D, K);
    for (int d = 0; d < D; ++d) {
        double s = 0;
        for (int k = 0; k < K; ++k) s += p.theta(d, k) = r.gamma(0.3);
        p.theta.row(d) /= s;
        std::vector<std::int32_t> toks;
        for (int n = 0; n < len; ++n) {
            double u = r.uniform();
            int k = 0;
            while (k < K - 1 && (u -= p.theta(d, k)) >= 0) ++k;
            double v = r.uniform();
            int w = 0;
            while (w < V - 1 && (v -= p.phi(k, w)) >= 0) ++w;
            toks.push_back(w);
        }
        p.docs.add(toks);
    }
    return p;
}

TopicModel frozen_model(const RowMatrix& phi, double alpha) {
    TopicModel m;
    m.K = static_cast<int>(phi.rows());
    m.V = static_cast<int>(phi.cols());
    m.priors = {alpha, 0.01};
    m.frozen = true;
    m.phi = phi;
    return m;
}

}  // namespace

TEST(Gibbs, SingleTopicSweepIsNoOp) {
    const Planted p = planted_corpus(2, 20, 10, 15, 1);
    CounterRng r(2);
    LdaState s = LdaState::random_init(p.docs, 1, {1.0, 0.01}, r);
    const LdaState before = s;
    gibbs_sweep(s, p.docs, r);
    EXPECT_EQ(s.z, before.z);
    EXPECT_EQ(s.n_dk, before.n_dk);
    EXPECT_EQ(s.n_wk, before.n_wk);
    EXPECT_EQ(s.n_k, before.n_k);
}

TEST(Gibbs, ToyTrajectoryMatchesReferenceSampler) {
    const Planted p = planted_corpus(3, 12, 8, 10, 3);
    CounterRng init(4);
    LdaState s = LdaState::random_init(p.docs, 3, {0.5, 0.1}, init);
    testutil::ReferenceLda ref(p.docs, s.z, 3, 12, 0.5, 0.1);
    CounterRng a(5), b(5);
    for (int it = 0; it < 50; ++it) {
        gibbs_sweep(s, p.docs, a);
        ref.sweep(b);
        ASSERT_EQ(s.z, ref.flat_z()) << "sweep " << it;
    }
    EXPECT_EQ(a.counter(), b.counter());
}

TEST(Gibbs, CountsConservedAfterEverySweep) {
    const Planted p = planted_corpus(4, 40, 30, 25, 6);
    CounterRng r(7);
    LdaState s = LdaState::random_init(p.docs, 5, LdaPriors::defaults(5), r);
    for (int it = 0; it < 30; ++it) {
        gibbs_sweep(s, p.docs, r);
        ASSERT_NO_THROW(s.check_invariants(p.docs));
        ASSERT_TRUE(testutil::counts_match(s, p.docs));
        for (auto c : s.n_dk) ASSERT_GE(c, 0);
        for (auto c : s.n_wk) ASSERT_GE(c, 0);
        ASSERT_EQ(std::accumulate(s.n_k.begin(), s.n_k.end(), 0LL), p.docs.token_total());
    }
}

TEST(Gibbs, PosteriorMeansAreDistributions) {
    const Planted p = planted_corpus(3, 30, 20, 20, 8);
    CounterRng r(9);
    LdaState s = LdaState::random_init(p.docs, 3, LdaPriors::defaults(3), r);
    for (int it = 0; it < 5; ++it) gibbs_sweep(s, p.docs, r);
    const RowMatrix th = s.theta(p.docs);
    const RowMatrix ph = s.phi();
    for (Eigen::Index d = 0; d < th.rows(); ++d) EXPECT_NEAR(th.row(d).sum(), 1.0, 1e-12);
    for (Eigen::Index k = 0; k < ph.rows(); ++k) EXPECT_NEAR(ph.row(k).sum(), 1.0, 1e-12);
    EXPECT_GT(th.minCoeff(), 0.0);
    EXPECT_GT(ph.minCoeff(), 0.0);
}

TEST(Gibbs, RecoversWellSeparatedTopics) {
    const Planted p = planted_corpus(3, 30, 150, 60, 10);
    CounterRng r(11);
    LdaState s = LdaState::random_init(p.docs, 3, {0.1, 0.01}, r);
    for (int it = 0; it < 200; ++it) gibbs_sweep(s, p.docs, r);
    const RowMatrix ph = s.phi();
    // Each true topic matches some estimated topic within TV 0.1.
    for (int k = 0; k < 3; ++k) {
        double best = 1.0;
        for (int e = 0; e < 3; ++e) best = std::min(best, 0.5 * (p.phi.row(k) - ph.row(e)).cwiseAbs().sum());
        EXPECT_LT(best, 0.1) << "topic " << k;
    }
}

// ---------------------------------------------------------------------------
// score_oos_r2

TEST(Score, PerfectFitIsOne) {
    Eigen::MatrixXd x(6, 1), hx(4, 1);
    x << 0, 1, 2, 3, 4, 5;
    hx << 6, 7, 8, 9;
    const Eigen::VectorXd y = (1.0 + 2.0 * x.array()).matrix();
    const Eigen::VectorXd hy = (1.0 + 2.0 * hx.array()).matrix();
    EXPECT_NEAR(score_oos_r2(x, y, hx, hy), 1.0, 1e-6);
}

TEST(Score, HoldoutMeanPredictorIsZero) {
    // No usable regressor: the fit predicts the training mean, which equals
    // the holdout mean here.
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(4, 1), hx = Eigen::MatrixXd::Zero(4, 1);
    Eigen::VectorXd y(4), hy(4);
    y << 1, 2, 3, 4;
    hy << 0, 5, 2, 3;
    EXPECT_NEAR(score_oos_r2(x, y, hx, hy), 0.0, 1e-9);
    EXPECT_THROW(score_oos_r2(x, y, hx, Eigen::VectorXd::Constant(4, 2.0)), NumericalError);
}

TEST(Score, PlantedThetaScoresHighAndBeatsShuffledPhi) {
    const int K = 4, V = 40, D = 400;
    const Planted p = planted_corpus(K, V, D, 80, 12);
    Eigen::VectorXd b(K);
    b << 1.0, -0.5, 0.25, 0.0;
    CounterRng noise(13);
    ScoringSet sc;
    for (int d = 0; d < D; ++d) {
        const double ret = p.theta.row(d).dot(b) + 0.02 * noise.normal();
        (d % 5 == 0 ? sc.holdout : sc.train).push_back({{d}, ret});
    }
    // Fold-in under the true phi and under a phi with shuffled word columns.
    const TopicModel good = frozen_model(p.phi, 0.1);
    RowMatrix shuffled = p.phi;
    CounterRng perm(14);
    for (int w = V - 1; w > 0; --w) shuffled.col(w).swap(shuffled.col(static_cast<Eigen::Index>(perm.below(w + 1))));
    const TopicModel bad = frozen_model(shuffled, 0.1);
    RowMatrix tg(D, K), tb(D, K);
    for (int d = 0; d < D; ++d) {
        std::vector<std::int32_t> toks(p.docs.words.begin() + p.docs.offsets[d], p.docs.words.begin() + p.docs.offsets[d + 1]);
        CounterRng r1(100 + d), r2(100 + d);
        tg.row(d) = infer_frozen(good, toks, r1).theta.transpose();
        tb.row(d) = infer_frozen(bad, toks, r2).theta.transpose();
    }
    const double s_true = score_theta(p.theta, sc);
    const double s_good = score_theta(tg, sc);
    const double s_bad = score_theta(tb, sc);
    EXPECT_GE(s_true, 0.8);
    EXPECT_LE(s_true, 1.0);
    EXPECT_GE(s_good, 0.8);
    EXPECT_LE(s_good, 1.0);
    EXPECT_GT(s_good, s_bad);
}

// ---------------------------------------------------------------------------
// Branching

namespace {

ScoringSet planted_scoring(const Planted& p, std::uint64_t seed) {
    Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(p.theta.cols(), 1.0, -1.0);
    CounterRng noise(seed);
    ScoringSet sc;
    for (Eigen::Index d = 0; d < p.theta.rows(); ++d)
        (d % 4 == 0 ? sc.holdout : sc.train)
            .push_back({{static_cast<std::int32_t>(d)}, p.theta.row(d).dot(b) + 0.05 * noise.normal()});
    return sc;
}

}  // namespace

TEST(Branching, SingleChainRuns) {
    const Planted p = planted_corpus(3, 30, 40, 30, 15);
    const ScoringSet sc = planted_scoring(p, 16);
    BranchingConfig cfg{1, 2, 5, 0.1};
    const auto res = train_branching(p.docs, sc, 3, LdaPriors::defaults(3), cfg, 17);
    EXPECT_EQ(res.winners, (std::vector<int>{0, 0}));
    EXPECT_EQ(res.scores.size(), 2u);
    EXPECT_NO_THROW(res.state.check_invariants(p.docs));
}

TEST(Branching, DeterministicAndThreadInvariant) {
    const Planted p = planted_corpus(3, 30, 60, 30, 18);
    const ScoringSet sc = planted_scoring(p, 19);
    BranchingConfig cfg{4, 3, 5, 0.1};
#ifdef _OPENMP
    omp_set_num_threads(3);
#endif
    const auto a = train_branching(p.docs, sc, 3, LdaPriors::defaults(3), cfg, 20, true);
    const auto b = train_branching(p.docs, sc, 3, LdaPriors::defaults(3), cfg, 20, false);
    const auto c = train_branching(p.docs, sc, 3, LdaPriors::defaults(3), cfg, 21, true);
    EXPECT_EQ(a.state.z, b.state.z);
    EXPECT_EQ(a.winners, b.winners);
    ASSERT_EQ(a.scores.size(), b.scores.size());
    for (std::size_t i = 0; i < a.scores.size(); ++i) EXPECT_EQ(a.scores[i].r2, b.scores[i].r2);
    EXPECT_NE(a.state.z, c.state.z);
}

TEST(Branching, WinnerAtLeastRoundMedian) {
    const Planted p = planted_corpus(4, 40, 80, 30, 22);
    const ScoringSet sc = planted_scoring(p, 23);
    BranchingConfig cfg{5, 3, 10, 0.1};
    const auto res = train_branching(p.docs, sc, 4, LdaPriors::defaults(4), cfg, 24);
    for (int r = 0; r < cfg.rounds; ++r) {
        std::vector<double> s;
        for (const auto& cs : res.scores)
            if (cs.round == r) s.push_back(cs.r2);
        ASSERT_EQ(s.size(), 5u);
        const double win = s[static_cast<std::size_t>(res.winners[static_cast<std::size_t>(r)])];
        std::vector<double> sorted = s;
        std::sort(sorted.begin(), sorted.end());
        EXPECT_GE(win, sorted[2]);
        EXPECT_EQ(win, sorted.back());
    }
    EXPECT_EQ(res.final_score, res.scores[res.scores.size() - 5 + static_cast<std::size_t>(res.winners.back())].r2);
}

TEST(Branching, RejectsBadConfig) {
    const Planted p = planted_corpus(2, 10, 5, 5, 25);
    EXPECT_THROW(train_branching(p.docs, {}, 2, {1, 0.01}, {0, 1, 1, 0.1}, 1), ConfigError);
    EXPECT_THROW(train_branching(p.docs, {}, 2, {1, 0.01}, {1, 1, 1, 0.1}, 1), NumericalError);
}

// ---------------------------------------------------------------------------
// Fold-in

TEST(FoldIn, EmptyDocumentIsUniform) {
    const TopicModel m = frozen_model(RowMatrix::Constant(4, 10, 0.1), 0.5);
    CounterRng r(1);
    const auto res = infer_frozen(m, {}, r);
    EXPECT_TRUE(res.empty);
    for (int k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(res.theta(k), 0.25);
}

TEST(FoldIn, NearDeltaTopicRecovered) {
    RowMatrix phi = RowMatrix::Constant(3, 9, 1e-4);
    for (int k = 0; k < 3; ++k)
        for (int w = 3 * k; w < 3 * k + 3; ++w) phi(k, w) = (1.0 - 6e-4) / 3;
    const TopicModel m = frozen_model(phi, 0.1);
    const std::vector<std::int32_t> toks{6, 7, 8, 6, 7, 8, 6, 7, 8, 6};
    CounterRng r(2);
    const auto res = infer_frozen(m, toks, r);
    Eigen::Index arg;
    res.theta.maxCoeff(&arg);
    EXPECT_EQ(arg, 2);
    EXPECT_GT(res.theta(2), 0.9);
    EXPECT_NEAR(res.theta.sum(), 1.0, 1e-12);
}

TEST(FoldIn, DeterministicAndModelUntouched) {
    const Planted p = planted_corpus(3, 30, 1, 40, 3);
    TopicModel m = frozen_model(p.phi, 0.2);
    m.theta = RowMatrix::Constant(2, 3, 1.0 / 3);
    const TopicModel before = m;
    const std::vector<std::int32_t> toks(p.docs.words.begin(), p.docs.words.end());
    CounterRng a(9), b(9);
    const auto x = infer_frozen(m, toks, a);
    const auto y = infer_frozen(m, toks, b);
    EXPECT_EQ(x.theta, y.theta);
    EXPECT_EQ(m.phi, before.phi);
    EXPECT_EQ(m.theta, before.theta);
    m.frozen = false;
    CounterRng c(9);
    EXPECT_THROW(infer_frozen(m, toks, c), ConfigError);
}

TEST(Model, BinaryRoundTrip) {
    const Planted p = planted_corpus(3, 12, 4, 10, 5);
    TopicModel m = frozen_model(p.phi, 0.3);
    m.theta = p.theta;
    m.seed = 77;
    m.cutoff_year = 2005;
    m.article_ids = {"a", "b", "c", "d"};
    const std::string dir = testutil::temp_dir("model");
    write_model(dir + "/m.bin", m);
    const TopicModel back = read_model(dir + "/m.bin");
    EXPECT_EQ(back.phi, m.phi);
    EXPECT_EQ(back.theta, m.theta);
    EXPECT_EQ(back.article_ids, m.article_ids);
    EXPECT_EQ(back.cutoff_year, 2005);
    EXPECT_EQ(back.seed, 77u);
    EXPECT_TRUE(back.frozen);
    EXPECT_NO_THROW(back.check());
}
