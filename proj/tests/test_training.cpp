#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bite/gradcheck.hpp"
#include "bite/training.hpp"
#include "test_util.hpp"

using namespace bite;
using bite::testing::random_tensor;

namespace {

// Small, separable SSVEP-style set: 4 channels, half a second at 256 Hz,
// class frequencies 8/12/16/20... Hz (well clear of the 2 Hz resolution).
TrialSet quick_ssvep(Index subjects, Index per_class, Index n_classes, std::uint64_t seed,
                     double snr = 10.0) {
    std::vector<double> freqs;
    for (Index k = 0; k < n_classes; ++k) freqs.push_back(8.0 + 4.0 * static_cast<double>(k));
    return synth_ssvep(subjects, per_class, freqs, 256.0, 128, snr, seed, 4);
}

// Matching compact model: 32-point window over 8-64 Hz (8 bins), 16 output
// steps, one TCN block per direction.
BiteConfig quick_config(Index n_classes, double dropout = 0.0) {
    BiteConfig cfg;
    cfg.channels = 4;
    cfg.samples = 128;
    cfg.fs = 256.0;
    cfg.n_classes = n_classes;
    cfg.f1 = 4;
    cfg.depth_mult = 2;
    cfg.stft_window = 32;
    cfg.f_lo = 8.0;
    cfg.f_hi = 64.0;
    cfg.pool = 8;
    cfg.tcn_blocks = 1;
    cfg.tcn_kernel = 3;
    cfg.dropout = dropout;
    return cfg;
}

TrainConfig quick_train(Index epochs, Index batch, std::uint64_t seed = 2025) {
    TrainConfig tc;
    tc.epochs = epochs;
    tc.batch_size = batch;
    tc.seed = seed;
    return tc;
}

// Hand-built trial set for split tests; signals carry no information.
TrialSet make_set(const std::vector<std::tuple<Index, Index, std::string>>& rows, Index n_classes) {
    TrialSet set;
    set.fs = 100.0;
    set.n_classes = n_classes;
    for (const auto& [subject, label, tag] : rows) {
        Trial t;
        t.subject_id = subject;
        t.label = label;
        t.session_tag = tag;
        t.signal = Tensor::zeros({2, 8});
        for (Index i = 0; i < 16; ++i) t.signal[i] = 0.01 * static_cast<double>(i + subject);
        set.trials.push_back(std::move(t));
    }
    return set;
}

std::vector<Index> labels_of(const TrialSet& set, const std::vector<std::size_t>& idx) {
    std::vector<Index> out;
    for (std::size_t i : idx) out.push_back(set.trials[i].label);
    return out;
}

} // namespace

// ---------------------------------------------------------------------------
// Cross-entropy
// ---------------------------------------------------------------------------

TEST(CrossEntropy, UniformLogitsGiveLogOfClassCount) {
    Tensor t = Tensor::zeros({3, 4});
    t.fill(0.7);
    Graph g;
    Variable loss = cross_entropy(g, Variable::leaf(t), {0, 2, 3});
    EXPECT_NEAR(loss.value()[0], std::log(4.0), 1e-12);
}

TEST(CrossEntropy, SaturatedTrueLogitDrivesLossToZero) {
    Tensor t = Tensor::zeros({1, 3});
    t[1] = 1000.0;
    Graph g;
    Variable loss = cross_entropy(g, Variable::leaf(t), {1});
    EXPECT_GE(loss.value()[0], 0.0);
    EXPECT_LT(loss.value()[0], 1e-6);
}

TEST(CrossEntropy, MatchesNaiveFormulaOnSmallLogits) {
    Rng rng(41);
    const Index B = 5, K = 3;
    Tensor t = random_tensor({B, K}, rng, -2.0, 2.0);
    std::vector<Index> labels;
    for (Index b = 0; b < B; ++b) labels.push_back(static_cast<Index>(rng.below(K)));

    double naive = 0.0;
    for (Index b = 0; b < B; ++b) {
        double sum = 0.0;
        for (Index k = 0; k < K; ++k) sum += std::exp(t[b * K + k]);
        naive += -std::log(std::exp(t[b * K + labels[b]]) / sum);
    }
    naive /= static_cast<double>(B);

    Graph g;
    Variable loss = cross_entropy(g, Variable::leaf(t), labels);
    EXPECT_NEAR(loss.value()[0], naive, 1e-10);
}

TEST(CrossEntropy, GradientIsSoftmaxMinusOneHotOverBatch) {
    Rng rng(42);
    const Index B = 2, K = 3;
    Variable x = Variable::leaf(random_tensor({B, K}, rng, -1.5, 1.5), true);
    const std::vector<Index> labels = {2, 0};

    Graph g;
    Variable loss = cross_entropy(g, x, labels);
    g.backward(loss);

    for (Index b = 0; b < B; ++b) {
        double sum = 0.0;
        for (Index k = 0; k < K; ++k) sum += std::exp(x.value()[b * K + k]);
        for (Index k = 0; k < K; ++k) {
            const double p = std::exp(x.value()[b * K + k]) / sum;
            const double expected = (p - (k == labels[b] ? 1.0 : 0.0)) / static_cast<double>(B);
            EXPECT_NEAR(x.grad()[b * K + k], expected, 1e-12);
        }
    }
}

TEST(CrossEntropy, GradientMatchesFiniteDifference) {
    Rng rng(43);
    Variable x = Variable::leaf(random_tensor({3, 4}, rng, -1.0, 1.0), true);
    const std::vector<Index> labels = {1, 3, 0};
    auto f = [&labels](Graph& g, const Variable& v) { return cross_entropy(g, v, labels); };
    GradCheckReport report = finite_diff_check(f, x);
    EXPECT_TRUE(report.pass) << "max relative error " << report.max_rel_error;
}

TEST(CrossEntropy, RejectsBadLabels) {
    Tensor t = Tensor::zeros({2, 3});
    Graph g;
    EXPECT_THROW(cross_entropy(g, Variable::leaf(t), {0, 3}), ConfigError);
    EXPECT_THROW(cross_entropy(g, Variable::leaf(t), {0, -1}), ConfigError);
    EXPECT_THROW(cross_entropy(g, Variable::leaf(t), {0}), ConfigError);
    EXPECT_THROW(cross_entropy(g, Variable::leaf(Tensor::zeros({4})), {0}), ConfigError);
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
    Rng rng(50);
    Variable w = Variable::leaf(random_tensor({5}, rng, -1.0, 1.0), true);
    Tensor before = w.value();
    Adam opt({w}, 0.1);
    w.zero_grad();
    opt.step();
    for (Index i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(w.value()[i], before[i]);
}

TEST(Adam, FirstStepMovesByAboutTheLearningRate) {
    Variable w = Variable::leaf(Tensor::zeros({2}), true);
    Adam opt({w}, 1e-3);
    w.grad()[0] = 0.5;
    w.grad()[1] = -7.0;
    opt.step();
    // Bias correction makes the first update lr * g / (|g| + eps).
    EXPECT_NEAR(w.value()[0], -1e-3, 1e-10);
    EXPECT_NEAR(w.value()[1], 1e-3, 1e-10);
}

TEST(Adam, ConvergesOnScalarQuadratic) {
    Variable w = Variable::leaf(Tensor::zeros({1}), true);
    Adam opt({w}, 0.05);
    for (int step = 0; step < 2000; ++step) {
        w.zero_grad();
        w.grad()[0] = 2.0 * (w.value()[0] - 3.0);
        opt.step();
        if (std::abs(w.value()[0] - 3.0) < 0.01) break;
    }
    EXPECT_LT(std::abs(w.value()[0] - 3.0), 0.01);
}

TEST(Adam, RejectsParameterShapeChange) {
    Variable w = Variable::leaf(Tensor::zeros({2}), true);
    Adam opt({w}, 0.1);
    opt.step();
    w.value() = Tensor::zeros({3});
    EXPECT_THROW(opt.step(), ConfigError);
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

TEST(Kappa, PerfectDiagonalGivesOne) {
    Confusion c = Confusion::zeros(3);
    c.add(0, 0, 5);
    c.add(1, 1, 7);
    c.add(2, 2, 11);
    EXPECT_DOUBLE_EQ(accuracy(c), 1.0);
    EXPECT_DOUBLE_EQ(kappa(c), 1.0);
}

TEST(Kappa, SingleClassCollapseGivesZero) {
    // Both classes balanced, everything predicted as class 0: p_o = p_e = 0.5.
    Confusion c = Confusion::zeros(2);
    c.add(0, 0, 10);
    c.add(1, 0, 10);
    EXPECT_DOUBLE_EQ(accuracy(c), 0.5);
    EXPECT_DOUBLE_EQ(kappa(c), 0.0);
}

TEST(Kappa, CertainChanceAgreementReturnsZero) {
    // All mass in one cell: p_e == 1 exactly; the closed form would be 0/0.
    Confusion c = Confusion::zeros(2);
    c.add(0, 0, 25);
    EXPECT_DOUBLE_EQ(kappa(c), 0.0);
}

TEST(Kappa, MatchesReferenceAccuracyKappaPair) {
    // Balanced 4-class truth at accuracy 0.8534 with errors spread evenly
    // (cyclically, keeping the column marginals balanced too), so
    // kappa == (0.8534 - 0.25) / 0.75 ~= 0.804.
    Confusion c = Confusion::zeros(4);
    for (Index r = 0; r < 4; ++r) {
        c.add(r, r, 8534);
        c.add(r, (r + 1) % 4, 488);
        c.add(r, (r + 2) % 4, 489);
        c.add(r, (r + 3) % 4, 489);
    }
    EXPECT_EQ(c.total(), 40000);
    EXPECT_NEAR(accuracy(c), 0.8534, 1e-15);
    EXPECT_DOUBLE_EQ(kappa(c), (0.8534 - 0.25) / 0.75);
    EXPECT_NEAR(kappa(c), 0.80, 0.005);
}

TEST(Kappa, BalancedTruthReducesToNormalizedAccuracy) {
    Rng rng(60);
    for (int rep = 0; rep < 30; ++rep) {
        const Index k = 2 + static_cast<Index>(rng.below(4));
        Confusion c = Confusion::zeros(k);
        const Index per_row = 40;
        for (Index r = 0; r < k; ++r) {
            for (Index n = 0; n < per_row; ++n) c.add(r, static_cast<Index>(rng.below(k)));
        }
        const double acc = accuracy(c);
        const double expected = (acc - 1.0 / k) / (1.0 - 1.0 / k);
        EXPECT_NEAR(kappa(c), expected, 1e-12);
    }
}

TEST(Metrics, InvariantUnderLabelPermutation) {
    Rng rng(61);
    Confusion c = Confusion::zeros(4);
    for (int n = 0; n < 200; ++n) {
        c.add(static_cast<Index>(rng.below(4)), static_cast<Index>(rng.below(4)));
    }
    const std::vector<Index> perm = {2, 0, 3, 1};
    Confusion p = Confusion::zeros(4);
    for (Index r = 0; r < 4; ++r) {
        for (Index col = 0; col < 4; ++col) p.add(perm[r], perm[col], c.at(r, col));
    }
    EXPECT_NEAR(accuracy(p), accuracy(c), 1e-15);
    EXPECT_NEAR(kappa(p), kappa(c), 1e-12);
}

TEST(Metrics, EmptyConfusionThrows) {
    Confusion c = Confusion::zeros(3);
    EXPECT_THROW(accuracy(c), DataError);
    EXPECT_THROW(kappa(c), DataError);
    EXPECT_THROW(Confusion::zeros(0), ConfigError);
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

TEST(SplitWithinSubject, SessionTagsPartitionExactly) {
    TrialSet set = make_set({{1, 0, "train"},
                             {1, 1, "train"},
                             {1, 0, "test"},
                             {1, 1, "train"},
                             {1, 1, "test"}},
                            2);
    std::vector<Fold> folds = split_within_subject(set, 0.8, 9);
    ASSERT_EQ(folds.size(), 1u);
    EXPECT_EQ(folds[0].train, (std::vector<std::size_t>{0, 1, 3}));
    EXPECT_EQ(folds[0].test, (std::vector<std::size_t>{2, 4}));
}

TEST(SplitWithinSubject, UnknownSessionTagIsRejected) {
    TrialSet set = make_set({{1, 0, "train"}, {1, 1, "eval"}}, 2);
    try {
        split_within_subject(set, 0.8, 9);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("eval"), std::string::npos);
    }
}

TEST(SplitWithinSubject, StratifiedCountsFollowRatio) {
    std::vector<std::tuple<Index, Index, std::string>> rows;
    for (Index c = 0; c < 4; ++c) {
        for (Index n = 0; n < 25; ++n) rows.push_back({7, c, ""});
    }
    TrialSet set = make_set(rows, 4);
    std::vector<Fold> folds = split_within_subject(set, 0.8, 2025);
    ASSERT_EQ(folds.size(), 1u);
    EXPECT_EQ(folds[0].train.size(), 80u);
    EXPECT_EQ(folds[0].test.size(), 20u);

    std::vector<Index> train_labels = labels_of(set, folds[0].train);
    for (Index c = 0; c < 4; ++c) {
        const auto count = std::count(train_labels.begin(), train_labels.end(), c);
        EXPECT_NEAR(static_cast<double>(count), 20.0, 1.0) << "class " << c;
    }

    // Disjoint and union-complete.
    std::set<std::size_t> all(folds[0].train.begin(), folds[0].train.end());
    for (std::size_t i : folds[0].test) EXPECT_TRUE(all.insert(i).second);
    EXPECT_EQ(all.size(), set.trials.size());
}

TEST(SplitWithinSubject, DeterministicPerSeedAndDifferentAcrossSeeds) {
    std::vector<std::tuple<Index, Index, std::string>> rows;
    for (Index s = 1; s <= 2; ++s) {
        for (Index c = 0; c < 2; ++c) {
            for (Index n = 0; n < 30; ++n) rows.push_back({s, c, ""});
        }
    }
    TrialSet set = make_set(rows, 2);

    std::vector<Fold> a = split_within_subject(set, 0.75, 5);
    std::vector<Fold> b = split_within_subject(set, 0.75, 5);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t f = 0; f < a.size(); ++f) {
        EXPECT_EQ(a[f].train, b[f].train);
        EXPECT_EQ(a[f].test, b[f].test);
    }

    std::vector<Fold> c = split_within_subject(set, 0.75, 6);
    bool any_difference = false;
    for (std::size_t f = 0; f < a.size(); ++f) any_difference |= a[f].train != c[f].train;
    EXPECT_TRUE(any_difference);
}

TEST(SplitWithinSubject, SingleTrialSubjectCannotBeStratified) {
    TrialSet set = make_set({{1, 0, ""}, {1, 1, ""}, {1, 0, ""}, {1, 1, ""}, {2, 0, ""}}, 2);
    try {
        split_within_subject(set, 0.5, 3);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("subject 2"), std::string::npos);
    }
}

TEST(SplitWithinSubject, MissingClassInTrainingIsRejected) {
    // Subject has classes 0 and 1 only, but the set declares 3 classes.
    TrialSet set = make_set({{1, 0, ""}, {1, 0, ""}, {1, 1, ""}, {1, 1, ""}}, 3);
    try {
        split_within_subject(set, 0.5, 3);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("class 2"), std::string::npos);
    }
}

TEST(SplitWithinSubject, RatioOutsideUnitIntervalIsRejected) {
    TrialSet set = make_set({{1, 0, ""}, {1, 1, ""}, {1, 0, ""}, {1, 1, ""}}, 2);
    EXPECT_THROW(split_within_subject(set, 1.0, 3), ConfigError);
    EXPECT_THROW(split_within_subject(set, 0.0, 3), ConfigError);
}

TEST(SplitLoso, OneFoldPerSubjectOrderedById) {
    std::vector<std::tuple<Index, Index, std::string>> rows;
    for (Index n = 0; n < 10; ++n) rows.push_back({3, n % 2, ""});
    for (Index n = 0; n < 20; ++n) rows.push_back({1, n % 2, ""});
    for (Index n = 0; n < 30; ++n) rows.push_back({2, n % 2, ""});
    TrialSet set = make_set(rows, 2);

    std::vector<Fold> folds = split_loso(set);
    ASSERT_EQ(folds.size(), 3u);
    EXPECT_EQ(folds[0].subject, 1);
    EXPECT_EQ(folds[1].subject, 2);
    EXPECT_EQ(folds[2].subject, 3);
    EXPECT_EQ(folds[0].test.size(), 20u);
    EXPECT_EQ(folds[1].test.size(), 30u);
    EXPECT_EQ(folds[2].test.size(), 10u);
    for (const Fold& fold : folds) {
        EXPECT_EQ(fold.train.size() + fold.test.size(), set.trials.size());
        for (std::size_t i : fold.test) EXPECT_EQ(set.trials[i].subject_id, fold.subject);
        for (std::size_t i : fold.train) EXPECT_NE(set.trials[i].subject_id, fold.subject);
    }
}

TEST(SplitLoso, TestSetsTileTheTrialSet) {
    std::vector<std::tuple<Index, Index, std::string>> rows;
    for (Index s = 4; s >= 1; --s) {
        for (Index n = 0; n < 6; ++n) rows.push_back({s, n % 3, ""});
    }
    TrialSet set = make_set(rows, 3);
    std::vector<Fold> folds = split_loso(set);
    std::set<std::size_t> seen;
    for (const Fold& fold : folds) {
        for (std::size_t i : fold.test) EXPECT_TRUE(seen.insert(i).second) << "overlap at " << i;
    }
    EXPECT_EQ(seen.size(), set.trials.size());
}

TEST(SplitLoso, NeedsTwoSubjects) {
    TrialSet set = make_set({{1, 0, ""}, {1, 1, ""}}, 2);
    EXPECT_THROW(split_loso(set), DataError);
}

// ---------------------------------------------------------------------------
// Train-and-eval
// ---------------------------------------------------------------------------

TEST(TrainAndEval, SameSeedGivesBitIdenticalReports) {
    TrialSet set = quick_ssvep(2, 6, 2, 11);
    BiteConfig cfg = quick_config(2);
    TrainConfig tc = quick_train(3, 8);
    TrainOptions opt;
    opt.keep_models = false;

    std::ostringstream log_a, log_b;
    opt.log = &log_a;
    TrainResult a = train_and_eval(cfg, tc, set, opt);
    opt.log = &log_b;
    TrainResult b = train_and_eval(cfg, tc, set, opt);

    EXPECT_EQ(a.report.accuracy_mean, b.report.accuracy_mean);
    EXPECT_EQ(a.report.kappa_mean, b.report.kappa_mean);
    EXPECT_EQ(a.report.accuracy_std, b.report.accuracy_std);
    EXPECT_EQ(a.report.confusion.counts, b.report.confusion.counts);
    ASSERT_EQ(a.report.per_subject.size(), b.report.per_subject.size());
    for (std::size_t i = 0; i < a.report.per_subject.size(); ++i) {
        EXPECT_EQ(a.report.per_subject[i].accuracy, b.report.per_subject[i].accuracy);
        EXPECT_EQ(a.report.per_subject[i].kappa, b.report.per_subject[i].kappa);
        EXPECT_EQ(a.report.per_subject[i].confusion.counts, b.report.per_subject[i].confusion.counts);
    }
    EXPECT_EQ(log_a.str(), log_b.str());
    EXPECT_NE(log_a.str().find("epoch=1 fold=0 loss="), std::string::npos);
}

TEST(TrainAndEval, UntrainedModelSitsNearChance) {
    TrialSet set = quick_ssvep(1, 25, 4, 12);
    BiteConfig cfg = quick_config(4);
    TrainConfig tc = quick_train(1, 16);
    tc.learning_rate = 1e-300; // keeps the initial weights effectively frozen

    TrainResult out = train_and_eval(cfg, tc, set);
    EXPECT_NEAR(out.report.accuracy_mean, 0.25, 0.1);
}

TEST(TrainAndEval, LearnsSyntheticSsvepWithinSubject) {
    TrialSet set = quick_ssvep(1, 25, 4, 3);
    BiteConfig cfg = quick_config(4);
    TrainConfig tc = quick_train(30, 16);

    TrainResult out = train_and_eval(cfg, tc, set);
    EXPECT_GE(out.report.accuracy_mean, 0.95)
        << "final training loss " << out.folds[0].epoch_loss.back();
    EXPECT_EQ(out.report.per_subject.size(), 1u);
    EXPECT_EQ(out.report.per_subject[0].test_trials, 20);
}

TEST(TrainAndEval, TrainingLossTrendsDownOnSeparableSet) {
    TrialSet set = quick_ssvep(1, 15, 2, 21);
    BiteConfig cfg = quick_config(2);
    TrainConfig tc = quick_train(5, 8);

    TrainResult out = train_and_eval(cfg, tc, set);
    const std::vector<double>& loss = out.folds[0].epoch_loss;
    ASSERT_EQ(loss.size(), 5u);
    int violations = 0;
    for (std::size_t e = 1; e < loss.size(); ++e) violations += loss[e] >= loss[e - 1];
    EXPECT_LE(violations, 1) << "losses: " << ::testing::PrintToString(loss);
}

TEST(TrainAndEval, NonFiniteLossAbortsNamingEpochAndBatch) {
    TrialSet set = quick_ssvep(1, 8, 2, 5);
    BiteConfig cfg = quick_config(2);
    TrainConfig tc = quick_train(3, 4);
    tc.learning_rate = 1e308; // first step catapults the weights out of range

    try {
        train_and_eval(cfg, tc, set);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("epoch"), std::string::npos) << msg;
        EXPECT_NE(msg.find("batch"), std::string::npos) << msg;
    }
}

TEST(TrainAndEval, ThreadCountDoesNotChangeResults) {
    TrialSet set = quick_ssvep(3, 4, 2, 8);
    BiteConfig cfg = quick_config(2);
    TrainConfig tc = quick_train(2, 8);
    TrainOptions opt;
    opt.protocol = Protocol::Loso;
    opt.keep_models = false;

    std::ostringstream log_a, log_b;
    opt.threads = 1;
    opt.log = &log_a;
    TrainResult a = train_and_eval(cfg, tc, set, opt);
    opt.threads = 3;
    opt.log = &log_b;
    TrainResult b = train_and_eval(cfg, tc, set, opt);

    EXPECT_EQ(a.report.accuracy_mean, b.report.accuracy_mean);
    EXPECT_EQ(a.report.kappa_mean, b.report.kappa_mean);
    EXPECT_EQ(a.report.confusion.counts, b.report.confusion.counts);
    EXPECT_EQ(log_a.str(), log_b.str());
}

TEST(TrainAndEval, LosoProducesOneFoldPerSubject) {
    TrialSet set = quick_ssvep(3, 5, 2, 9);
    BiteConfig cfg = quick_config(2);
    TrainConfig tc = quick_train(2, 8);
    TrainOptions opt;
    opt.protocol = Protocol::Loso;

    TrainResult out = train_and_eval(cfg, tc, set, opt);
    ASSERT_EQ(out.report.per_subject.size(), 3u);
    for (std::size_t f = 0; f < 3; ++f) {
        EXPECT_EQ(out.report.per_subject[f].fold, static_cast<Index>(f));
        EXPECT_EQ(out.report.per_subject[f].test_trials, 10);
        EXPECT_EQ(out.report.per_subject[f].train_trials, 20);
        // LOSO folds carry no stored whitener: evaluation re-fits per subject.
        EXPECT_FALSE(out.folds[f].alignment.has_value());
        EXPECT_TRUE(out.folds[f].model.has_value());
    }
    EXPECT_EQ(out.report.confusion.total(), 30);
}

TEST(TrainAndEval, WithinSubjectKeepsTheTrainingWhitener) {
    TrialSet set = quick_ssvep(1, 6, 2, 14);
    BiteConfig cfg = quick_config(2);
    TrainConfig tc = quick_train(1, 8);

    TrainResult out = train_and_eval(cfg, tc, set);
    ASSERT_EQ(out.folds.size(), 1u);
    ASSERT_TRUE(out.folds[0].alignment.has_value());
    // Fitted on the 10-trial training partition, not all 12 trials.
    EXPECT_EQ(out.folds[0].alignment->fit_count, 10);
}

TEST(TrainAndEval, RejectsMismatchedModelAndData) {
    TrialSet set = quick_ssvep(1, 4, 2, 4);
    BiteConfig cfg = quick_config(2);
    cfg.channels = 5;
    EXPECT_THROW(train_and_eval(cfg, quick_train(1, 8), set), ConfigError);
}

// ---------------------------------------------------------------------------
// Hyper-parameter sweep
// ---------------------------------------------------------------------------

TEST(HyperSweep, SingleCellMatchesDirectRun) {
    TrialSet set = quick_ssvep(1, 5, 2, 17);
    BiteConfig base = quick_config(2);
    TrainConfig tc = quick_train(2, 8);

    SweepResult sweep = hyper_sweep(base, tc, set, {3}, {0.0});
    BiteConfig direct_cfg = base;
    direct_cfg.tcn_kernel = 3;
    direct_cfg.dropout = 0.0;
    TrainResult direct = train_and_eval(direct_cfg, tc, set);

    ASSERT_EQ(sweep.accuracy.size(), 1u);
    EXPECT_EQ(sweep.accuracy[0], direct.report.accuracy_mean);
    EXPECT_EQ(sweep.kappa[0], direct.report.kappa_mean);
    EXPECT_EQ(sweep.row_average[0], sweep.accuracy[0]);
}

TEST(HyperSweep, RowAveragesAreRowMeans) {
    TrialSet set = quick_ssvep(1, 5, 2, 18);
    BiteConfig base = quick_config(2);
    TrainConfig tc = quick_train(1, 8);

    SweepResult sweep = hyper_sweep(base, tc, set, {2, 3}, {0.0, 0.1, 0.2});
    ASSERT_EQ(sweep.accuracy.size(), 6u);
    ASSERT_EQ(sweep.row_average.size(), 2u);
    for (std::size_t ki = 0; ki < 2; ++ki) {
        const double mean =
            (sweep.cell_accuracy(ki, 0) + sweep.cell_accuracy(ki, 1) + sweep.cell_accuracy(ki, 2)) /
            3.0;
        EXPECT_NEAR(sweep.row_average[ki], mean, 1e-12);
    }
}

TEST(HyperSweep, CellsAreIndependentOfGridOrder) {
    TrialSet set = quick_ssvep(1, 5, 2, 19);
    BiteConfig base = quick_config(2);
    TrainConfig tc = quick_train(1, 8);

    SweepResult fwd = hyper_sweep(base, tc, set, {2, 3}, {0.0, 0.2});
    SweepResult rev = hyper_sweep(base, tc, set, {3, 2}, {0.2, 0.0});
    // Same cell, located at mirrored grid positions.
    EXPECT_EQ(fwd.cell_accuracy(0, 1), rev.cell_accuracy(1, 0)); // kernel 2, dropout 0.2
    EXPECT_EQ(fwd.cell_accuracy(1, 0), rev.cell_accuracy(0, 1)); // kernel 3, dropout 0.0
}

TEST(HyperSweep, EmptyGridIsRejected) {
    TrialSet set = quick_ssvep(1, 4, 2, 20);
    BiteConfig base = quick_config(2);
    EXPECT_THROW(hyper_sweep(base, quick_train(1, 8), set, {}, {0.1}), ConfigError);
    EXPECT_THROW(hyper_sweep(base, quick_train(1, 8), set, {3}, {}), ConfigError);
}
