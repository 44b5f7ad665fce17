#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "nngcd/nngcd.hpp"
#include "support.hpp"

using namespace nngcd;

namespace {

GcdDataset separated(std::uint64_t seed) {
    SynthOptions o;
    o.separation = 10.0;
    o.per_class = 50;
    o.seed = seed;
    return synth_gcd(o);
}

TrainConfig quick(std::uint64_t seed, std::size_t epochs) {
    TrainConfig c;
    c.seed = seed;
    c.epochs = epochs;
    c.eval_restarts = 3;
    return c;
}

}  // namespace

TEST(CosineLr, HandValues) {
    EXPECT_EQ(cosine_lr(0.1, 0, 100), 0.1);
    EXPECT_NEAR(cosine_lr(0.1, 100, 100), 0.0, 1e-18);
    EXPECT_NEAR(cosine_lr(0.1, 50, 100), 0.05, 1e-17);
    EXPECT_THROW(cosine_lr(0.1, 0, 0), ValidationError);
    EXPECT_THROW(cosine_lr(0.1, 101, 100), ValidationError);
}

TEST(TrainConfigJson, RoundTripAndErrors) {
    TrainConfig c;
    c.epochs = 7;
    c.loss.gamma = 0.0;
    c.head_activation = Activation::relu;
    c.contrastive_variant = ContrastiveVariant::spectral;
    c.hidden_dims = {8, 4};
    const auto back = train_config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_THROW(train_config_from_json({{"epoch", 3}}), ValidationError);
    EXPECT_THROW(train_config_from_json({{"epochs", "three"}}), ValidationError);
    EXPECT_THROW(train_config_from_json({{"lr", -1.0}}), ValidationError);
    EXPECT_THROW(train_config_from_json({{"contrastive_variant", "triplet"}}), ValidationError);
    EXPECT_THROW(train_config_from_json(nlohmann::json::array()), ValidationError);
}

TEST(Train, ZeroEpochsKeepsInitialization) {
    const auto d = separated(0);
    auto cfg = quick(4, 0);
    const auto r = train(d, cfg);
    EncoderArchitecture a;
    a.input_dim = d.X.cols();
    a.num_prototypes = d.num_classes();
    EXPECT_EQ(r.params, make_encoder(a, 4));
    EXPECT_TRUE(r.report.loss_history.empty());
    EXPECT_TRUE(r.report.acc_all.empty());
    EXPECT_EQ(r.report.steps, 0u);
}

TEST(Train, HistoriesHaveOneEntryPerEpoch) {
    const auto r = train(separated(1), quick(1, 5));
    EXPECT_EQ(r.report.loss_history.size(), 5u);
    EXPECT_EQ(r.report.acc_all.size(), 5u);
    EXPECT_EQ(r.report.acc_new.size(), 5u);
    EXPECT_EQ(r.report.dead_neuron_fraction.size(), 5u);
    EXPECT_EQ(r.report.insulation_mean.size(), 5u);
    EXPECT_EQ(r.report.steps, 5u * (200u / 128u));
}

TEST(Train, SeparatedDataReachesHighAccuracy) {
    const auto d = separated(2);
    // oracle: k-means on the raw features already separates the classes
    const auto raw = kmeans(d.X, 4, 10, 0);
    ASSERT_GE(acc(d.y, raw.assignment.labels, d.old_mask).acc_all, 0.95);
    TrainConfig cfg;
    cfg.seed = 2;
    const auto r = train(d, cfg);
    EXPECT_GE(r.report.final.acc.acc_all, 0.9);
}

TEST(Train, BitwiseDeterministic) {
    const auto d = separated(3);
    const auto a = train(d, quick(3, 6)), b = train(d, quick(3, 6));
    EXPECT_EQ(to_json(a.report).dump(), to_json(b.report).dump());
    EXPECT_EQ(a.params, b.params);
    const auto c = train(d, quick(4, 6));
    EXPECT_NE(to_json(a.report).dump(), to_json(c.report).dump());
}

TEST(Train, NonFiniteLossAbortsWithStep) {
    auto cfg = quick(0, 3);
    cfg.lr = 1e200;
    try {
        train(separated(0), cfg);
        FAIL() << "expected a numeric failure";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("contrastive="), std::string::npos);
    }
}

TEST(Train, RejectsOversizedBatch) {
    auto cfg = quick(0, 1);
    cfg.batch_size = 1000;
    EXPECT_THROW(train(separated(0), cfg), ValidationError);
}

TEST(Train, HsrShrinksHeadWeights) {
    double with = 0.0, without = 0.0;
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto d = separated(s);
        auto cfg = quick(s, 200);
        with += train(d, cfg).report.mean_head_l1;
        cfg.loss.gamma = 0.0;
        without += train(d, cfg).report.mean_head_l1;
    }
    EXPECT_LT(with / 5, without / 5);
}

TEST(Objective, SmallStepDecreasesLossByGradientNorm) {
    const auto d = separated(5);
    EncoderArchitecture a;
    a.input_dim = d.X.cols();
    a.num_prototypes = 4;
    const auto student = make_encoder(a, 1), teacher = make_encoder(a, 2);
    const auto X = prepare_inputs(d.X);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < 200; i += 10) idx.push_back(i);
    const auto v1 = gather_rows(X, idx);
    auto v2 = v1;
    std::mt19937_64 rng(1);
    for (double& v : v2.values()) v += std::normal_distribution<double>(0, 0.05)(rng);
    std::vector<int> labels(idx.size(), -1);
    for (std::size_t i = 0; i < idx.size(); ++i)
        if (d.labeled_mask[idx[i]]) labels[i] = d.y[idx[i]];

    for (auto variant : {ContrastiveVariant::nmf_nce, ContrastiveVariant::info_nce, ContrastiveVariant::spectral,
                         ContrastiveVariant::ncl}) {
        TrainConfig cfg;
        cfg.contrastive_variant = variant;
        const auto r0 = total_loss_grad(student, teacher, v1, v2, labels, cfg);
        double g2 = 0.0;
        for (const auto& W : r0.grads.weights) g2 += frobenius_norm_sq(W);
        for (const auto& b : r0.grads.biases) g2 += dot(b, b);
        g2 += frobenius_norm_sq(r0.grads.prototypes);
        const double lr = 1e-6;
        auto moved = student;
        sgd_step(moved, r0.grads, lr);
        const double change = total_loss_grad(moved, teacher, v1, v2, labels, cfg).total - r0.total;
        EXPECT_NEAR(change / (lr * g2), -1.0, 1e-3) << to_string(variant);
    }
}

TEST(Evaluate, IdentityEncoderOnClusteredData) {
    const auto d = separated(6);
    EncoderParams p;
    p.layer_weights = {DenseMatrix::identity(d.X.cols()), DenseMatrix(d.X.cols(), 2, 0.1)};
    p.layer_biases = {Vector(d.X.cols(), 0.0), Vector(2, 0.0)};
    p.backbone_layers = 1;
    p.activation = Activation::identity;
    p.validate();
    EXPECT_EQ(evaluate(p, d, 4, 5, 0).acc.acc_all, 1.0);
}

TEST(Evaluate, RandomEncoderBalancedPair) {
    SynthOptions o;
    o.K_old = 1;
    o.K_new = 1;
    o.separation = 0.5;
    o.label_fraction = 0.0;
    for (std::uint64_t s = 0; s < 5; ++s) {
        o.seed = s;
        const auto d = synth_gcd(o);
        EncoderArchitecture a;
        a.input_dim = d.X.cols();
        a.num_prototypes = 2;
        const auto rep = evaluate(make_encoder(a, s), d, 2, 3, s);
        EXPECT_GE(rep.acc.acc_all, 0.5);
    }
}

TEST(Evaluate, TrainingReducesInsulationOnEntangledFeatures) {
    SynthOptions o;
    o.separation = 4.0;
    o.per_class = 64;
    o.shared_offset = 12.0;
    o.seed = 0;
    TrainConfig cfg;
    cfg.seed = 0;
    cfg.eval_restarts = 3;
    const auto r = train(synth_gcd(o), cfg);
    EXPECT_LT(*r.report.final.diagnostics.insulation_mean, *r.report.initial.diagnostics.insulation_mean);
}

TEST(Synth, LabelFractionsAndClasses) {
    SynthOptions o;
    o.K_old = 1;
    o.K_new = 0;
    o.label_fraction = 1.0;
    auto d = synth_gcd(o);
    EXPECT_EQ(d.num_classes(), 1u);
    for (bool l : d.labeled_mask) EXPECT_TRUE(l);

    o = SynthOptions{};
    o.label_fraction = 0.0;
    d = synth_gcd(o);
    for (bool l : d.labeled_mask) EXPECT_FALSE(l);

    o = SynthOptions{};
    d = synth_gcd(o);
    std::size_t labeled = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        labeled += d.labeled_mask[i];
        if (d.labeled_mask[i]) {
            EXPECT_TRUE(d.old_mask[i]);
        }
        EXPECT_EQ(d.old_mask[i], d.y[i] < 2);
    }
    EXPECT_EQ(labeled, 50u);
}

TEST(Synth, SeparatedBlobsAreKmeansSeparable) {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto d = separated(s);
        EXPECT_GE(acc(d.y, kmeans(d.X, 4, 10, s).assignment.labels, d.old_mask).acc_all, 0.95);
    }
}

TEST(Synth, CenterDistancesRespectSeparation) {
    for (std::size_t dim : {2u, 3u, 16u}) {
        SynthOptions o;
        o.dim = dim;
        o.per_class = 400;
        o.separation = 6.0;
        o.shared_offset = dim == 16 ? 5.0 : 0.0;
        const auto d = synth_gcd(o);
        std::vector<Vector> means(4, Vector(dim, 0.0));
        for (std::size_t i = 0; i < d.size(); ++i)
            for (std::size_t j = 0; j < dim; ++j) means[static_cast<std::size_t>(d.y[i])][j] += d.X(i, j) / 400.0;
        for (std::size_t a = 0; a < 4; ++a)
            for (std::size_t b = a + 1; b < 4; ++b) {
                double d2 = 0;
                for (std::size_t j = 0; j < dim; ++j) d2 += (means[a][j] - means[b][j]) * (means[a][j] - means[b][j]);
                EXPECT_GT(std::sqrt(d2), 6.0 - 0.5) << "dim " << dim;
            }
    }
}

TEST(Dataset, SaveLoadRoundTrip) {
    const auto dir = std::filesystem::temp_directory_path() / "nngcd_dataset_roundtrip";
    std::filesystem::create_directories(dir);
    const auto d = separated(7);
    const auto f = (dir / "x.csv").string(), y = (dir / "y.csv").string(), m = (dir / "m.csv").string();
    save_dataset(d, f, y, m);
    const auto back = load_dataset(f, y, m);
    EXPECT_EQ(back.X, d.X);
    EXPECT_EQ(back.y, d.y);
    EXPECT_EQ(back.old_mask, d.old_mask);
    EXPECT_EQ(back.labeled_mask, d.labeled_mask);
    EXPECT_EQ(back.K_old, 2u);
    EXPECT_EQ(back.K_new, 2u);
    std::filesystem::remove_all(dir);
}

TEST(Dataset, ValidationErrors) {
    auto d = separated(0);
    d.labeled_mask[150] = true;  // a novel sample cannot be labeled
    EXPECT_THROW(d.validate(), ValidationError);
    d = separated(0);
    d.y[0] = 9;
    EXPECT_THROW(d.validate(), ValidationError);
    d = separated(0);
    d.old_mask[0] = false;  // class 0 would be both base and novel
    EXPECT_THROW(d.validate(), ValidationError);
    SynthOptions o;
    o.label_fraction = 1.5;
    EXPECT_THROW(synth_gcd(o), ValidationError);
}
