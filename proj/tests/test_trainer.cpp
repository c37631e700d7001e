#include "stonet/error.hpp"
#include "stonet/harness.hpp"
#include "stonet/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace stonet;

namespace {

NetworkSpec spec_of(std::vector<int> widths, std::vector<double> noise, Activation act = Activation::tanh) {
    NetworkSpec s;
    s.widths = std::move(widths);
    s.noise_vars = std::move(noise);
    s.activation = act;
    s.validate();
    return s;
}

TrainingData toy_data(const NetworkSpec& spec, long n, RngStream& r) {
    TrainingData d;
    d.inputs = r.normal_matrix(spec.input_dim(), n);
    d.targets = Targets::regression(r.normal_matrix(spec.output_dim(), n));
    return d;
}

}  // namespace

TEST(Schedule, Examples) {
    const Schedule s = Schedule::decaying(1.0, 1000.0, 0.6);
    EXPECT_NEAR(s.at(1), 1.0 / 1001.0, 1e-18);
    EXPECT_NEAR(s.at(1), 9.990e-4, 1e-7);
    double prev = s.at(1);
    for (long k = 2; k < 100000; k *= 3) {
        EXPECT_LT(s.at(k), prev);
        prev = s.at(k);
    }
    EXPECT_LT(s.at(1'000'000'000'000L), 1e-7);
    EXPECT_DOUBLE_EQ(Schedule::decaying(2.0, 0.0, 1.0).at(4), 0.5);
    EXPECT_DOUBLE_EQ(Schedule::fixed(3e-5, true).at(7, 300), 1e-7);
    EXPECT_THROW(s.at(0), InvalidArgument);
    EXPECT_THROW(Schedule::decaying(1.0, 0.0, 1.5).validate(), InvalidArgument);
}

TEST(Schedule, DefaultsAndPerLayerGammas) {
    TrainConfig cfg;
    EXPECT_EQ(cfg.sdr_stage_epochs, 30);
    EXPECT_EQ(cfg.batch_size, 64);
    EXPECT_EQ(cfg.theta_stage_epochs, 500);
    EXPECT_EQ(cfg.t_hmc, 25);
    EXPECT_DOUBLE_EQ(eps_k(cfg, Stage::theta, 10), 0.001);
    EXPECT_DOUBLE_EQ(gamma_k(cfg, Stage::theta, 2, 10, 1000), 3e-5 / 1000);
    EXPECT_DOUBLE_EQ(gamma_k(cfg, Stage::sdr, 1, 1, 1000), 1.0 / (1.0 / 3e-5 + 1.0) / 1000);
    const NetworkSpec spec = spec_of({3, 2, 1}, {0.1, 0.1});
    cfg.gamma_theta = {Schedule::fixed(1.0), Schedule::fixed(2.0)};
    EXPECT_NO_THROW(cfg.validate(spec));
    EXPECT_DOUBLE_EQ(gamma_k(cfg, Stage::theta, 2, 1, 1), 2.0);
    cfg.gamma_theta.push_back(Schedule::fixed(3.0));
    EXPECT_THROW(cfg.validate(spec), InvalidArgument);
}

TEST(SghmcSweep, NoiselessZeroGradientRecursion) {
    // Huge variances make every gradient vanish; beta = inf removes the noise.
    const NetworkSpec spec = spec_of({2, 3, 2, 1}, {1e300, 1e300, 1e300});
    RngStream r(1);
    const Theta t = init_theta(spec, r);
    const TrainingData d = toy_data(spec, 4, r);
    TrainConfig cfg;
    cfg.beta = std::numeric_limits<double>::infinity();
    cfg.t_hmc = 7;
    cfg.eta = 50.0;
    const double eps = 0.01;
    LatentState s0 = init_latent_state(spec, t, d.inputs);
    for (auto& v : s0.v) v = r.normal_matrix(v.rows(), v.cols());
    RngStream sweep(2);
    const LatentState s = sghmc_sweep(spec, t, d, s0, cfg, eps, sweep, 1);
    const double decay = 1.0 - eps * cfg.eta;
    double partial = 0.0;
    for (int j = 0; j < cfg.t_hmc; ++j) partial += std::pow(decay, j);
    for (std::size_t i = 0; i < s.v.size(); ++i) {
        EXPECT_LT((s.v[i] - std::pow(decay, cfg.t_hmc) * s0.v[i]).norm(), 1e-14);
        EXPECT_LT((s.y[i] - (s0.y[i] + eps * partial * s0.v[i])).norm(), 1e-13);
    }
}

TEST(SghmcSweep, BackwardLayerOrder) {
    const NetworkSpec spec = spec_of({2, 3, 3, 2, 1}, {0.1, 0.1, 0.1, 0.1});
    RngStream r(3);
    const Theta t = init_theta(spec, r);
    const TrainingData d = toy_data(spec, 5, r);
    TrainConfig cfg;
    cfg.t_hmc = 2;
    std::vector<std::pair<int, int>> calls;
    RngStream sweep(4);
    sghmc_sweep(spec, t, d, init_latent_state(spec, t, d.inputs), cfg, 1e-3, sweep, 1,
                [&](int l, int i) { calls.emplace_back(l, i); });
    const std::vector<std::pair<int, int>> expected{{1, 3}, {1, 2}, {1, 1}, {2, 3}, {2, 2}, {2, 1}};
    EXPECT_EQ(calls, expected);
}

TEST(SghmcSweep, DeterministicUnderSeed) {
    const NetworkSpec spec = spec_of({3, 4, 2}, {0.01, 0.1});
    RngStream r(5);
    const Theta t = init_theta(spec, r);
    const TrainingData d = toy_data(spec, 8, r);
    TrainConfig cfg;
    RngStream a(77), b(77);
    const LatentState sa = sghmc_sweep(spec, t, d, init_latent_state(spec, t, d.inputs), cfg, 1e-3, a, 1);
    const LatentState sb = sghmc_sweep(spec, t, d, init_latent_state(spec, t, d.inputs), cfg, 1e-3, b, 1);
    EXPECT_EQ(sa.y[0], sb.y[0]);
    EXPECT_EQ(sa.v[0], sb.v[0]);
}

TEST(SghmcSweep, DivergenceReportsLayer) {
    const NetworkSpec spec = spec_of({3, 4, 1}, {1e-12, 1e-12});
    RngStream r(6);
    const Theta t = init_theta(spec, r);
    const TrainingData d = toy_data(spec, 8, r);
    TrainConfig cfg;
    cfg.t_hmc = 200;
    RngStream s(1);
    try {
        sghmc_sweep(spec, t, d, init_latent_state(spec, t, d.inputs), cfg, 0.5, s, 42);
        FAIL() << "expected divergence";
    } catch (const Divergence& e) {
        EXPECT_EQ(e.iteration(), 42);
        EXPECT_EQ(e.layer(), 1);
    }
}

TEST(ParamUpdate, ZeroGradientKeepsTheta) {
    const NetworkSpec spec = spec_of({3, 4, 2, 2}, {0.1, 0.1, 0.1});
    RngStream r(7);
    const Theta t = init_theta(spec, r);
    TrainingData d;
    d.inputs = r.normal_matrix(3, 6);
    d.targets = Targets::regression(forward_dnn_batch(spec, t, d.inputs).output_mean);
    const LatentState s = init_latent_state(spec, t, d.inputs);
    const std::vector<double> steps{0.1, 0.1, 0.1};
    const ParamUpdate u = param_update(spec, t, d, s, steps, 6);
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_LT((u.theta.layers[j].weights - t.layers[j].weights).norm(), 1e-14);
        EXPECT_LT(u.update_norms[j], 1e-14);
    }
}

TEST(ParamUpdate, SingleObservationUnitStepIsRawGradient) {
    const NetworkSpec spec = spec_of({3, 4, 2}, {0.2, 0.3});
    RngStream r(8);
    const Theta t = init_theta(spec, r);
    const TrainingData d = toy_data(spec, 1, r);
    LatentState s = init_latent_state(spec, t, d.inputs);
    s.y[0] = r.normal_matrix(4, 1);
    const std::vector<double> steps{1.0, 1.0};
    const ParamUpdate u = param_update(spec, t, d, s, steps, 1);
    const LayerGradient g1 = grad_theta_layer(spec.activation, t.layers[0], d.inputs.col(0), s.y[0].col(0), 0.2, true);
    const LayerGradient g2 = grad_theta_output(spec.activation, t.layers[1], s.y[0].col(0), d.targets.at(0), 0.3, spec.task);
    EXPECT_LT((u.theta.layers[0].weights - t.layers[0].weights - g1.weights).norm(), 1e-12);
    EXPECT_LT((u.theta.layers[0].bias - t.layers[0].bias - g1.bias).norm(), 1e-12);
    EXPECT_LT((u.theta.layers[1].weights - t.layers[1].weights - g2.weights).norm(), 1e-12);
}

TEST(ParamUpdate, ConvergesTowardLeastSquares) {
    // Latents frozen at their true values: layer 1 is a linear regression of
    // Y_1 on [x, 1] and the update is gradient ascent on its likelihood.
    const NetworkSpec spec = spec_of({3, 2, 1}, {0.5, 1.0});
    RngStream r(9);
    const long n = 200;
    TrainingData d = toy_data(spec, n, r);
    const Matrix w_true = r.normal_matrix(2, 3);
    LatentState s;
    s.y.push_back(w_true * d.inputs + 0.3 * r.normal_matrix(2, n));
    s.y.front().colwise() += Vector::Constant(2, 0.5);
    s.v.push_back(Matrix::Zero(2, n));

    Matrix design(n, 4);
    design.leftCols(3) = d.inputs.transpose();
    design.col(3).setOnes();
    const Matrix coef = (design.transpose() * design).ldlt().solve(design.transpose() * s.y.front().transpose());
    const Matrix w_ols = coef.topRows(3).transpose();
    const Vector b_ols = coef.row(3).transpose();

    Theta t = init_theta(spec, r);
    auto dist = [&](const Theta& th) {
        return std::sqrt((th.layers[0].weights - w_ols).squaredNorm() + (th.layers[0].bias - b_ols).squaredNorm());
    };
    const std::vector<double> steps{2e-4, 0.0};
    double prev = dist(t);
    const double start = prev;
    for (int it = 0; it < 100; ++it) {
        t = param_update(spec, t, d, s, steps, n).theta;
        const double cur = dist(t);
        EXPECT_LT(cur, prev) << "iteration " << it;
        prev = cur;
    }
    EXPECT_LT(prev, 1e-2 * start);
}

TEST(ThetaStage, ZeroEpochsReturnsInitialTheta) {
    const NetworkSpec spec = spec_of({3, 4, 1}, {0.01, 0.1});
    RngStream r(10);
    const Theta t = init_theta(spec, r);
    const TrainingData d = toy_data(spec, 20, r);
    TrainConfig cfg;
    cfg.theta_stage_epochs = 0;
    RngStream s(1);
    const StageResult out = run_theta_stage(spec, t, d, cfg, s);
    EXPECT_EQ(out.theta.layers[0].weights, t.layers[0].weights);
    EXPECT_TRUE(out.report.records.empty());
}

TEST(ThetaStage, PublishedHyperparametersAccepted) {
    NetworkSpec spec = spec_of({21, 1, 2}, {1e-7, 1e-9});
    spec.task = Task::classification;
    TrainConfig cfg;
    cfg.batch_size = 64;
    cfg.theta_stage_epochs = 500;
    cfg.eps_theta = Schedule::fixed(0.001);
    cfg.gamma_theta = {Schedule::fixed(3e-5, true)};
    EXPECT_NO_THROW(cfg.validate(spec));
    EXPECT_DOUBLE_EQ(gamma_k(cfg, Stage::theta, 1, 1, 3772), 3e-5 / 3772);
    EXPECT_DOUBLE_EQ(eps_k(cfg, Stage::theta, 123), 0.001);
}

TEST(ThetaStage, ReducesM1TrainingLoss) {
    RngStream data_stream(2024);
    const Dataset m1 = gen_m1(100, data_stream);
    const NetworkSpec spec = spec_of({20, 10, 1, 1}, {1e-3, 1e-3, 1e-1});
    TrainConfig cfg;
    cfg.theta_stage_epochs = 200;
    cfg.gamma_theta = {Schedule::fixed(3e-4, true)};
    const TrainingData d = m1.training_data();
    RngStream init(1), s(2);
    const Theta t0 = init_theta(spec, init);
    const double loss0 = dnn_loss(spec, t0, d.inputs, d.targets);
    const StageResult out = run_theta_stage(spec, t0, d, cfg, s);
    std::vector<double> losses;
    for (const auto& rec : out.report.records)
        if (rec.loss) losses.push_back(*rec.loss);
    ASSERT_EQ(losses.size(), 200u);
    double head = 0.0, tail = 0.0;
    for (std::size_t k = 0; k < 5; ++k) head += losses[k] / 5.0;
    for (std::size_t k = losses.size() - 5; k < losses.size(); ++k) tail += losses[k] / 5.0;
    EXPECT_LT(tail, loss0);
    EXPECT_LT(tail, head);
}

TEST(Train, RecordCountAndShapes) {
    const NetworkSpec spec = spec_of({3, 4, 2, 1}, {0.01, 0.01, 0.1});
    RngStream r(11);
    const TrainingData d = toy_data(spec, 70, r);
    TrainConfig cfg;
    cfg.batch_size = 16;
    cfg.theta_stage_epochs = 3;
    cfg.sdr_stage_epochs = 6;
    cfg.sdr_average_sweeps = 4;
    cfg.seed = 5;
    const TrainResult out = train(spec, d, cfg);
    EXPECT_EQ(out.report.records.size(), 3u * 5u + 6u);
    ASSERT_EQ(out.sdr_latents.size(), 4u);
    EXPECT_EQ(out.sdr_latents[0].rows(), 2);
    EXPECT_EQ(out.sdr_latents[0].cols(), 70);
    for (std::size_t k = 0; k < out.report.records.size(); ++k)
        EXPECT_EQ(out.report.records[k].iteration, static_cast<long>(k + 1));
    EXPECT_EQ(out.report.records.back().stage, Stage::sdr);
    EXPECT_EQ(out.report.records.back().stage_iteration, 6);
}

TEST(Train, BitwiseDeterministic) {
    const NetworkSpec spec = spec_of({3, 4, 2, 1}, {0.01, 0.01, 0.1});
    RngStream r(12);
    const TrainingData d = toy_data(spec, 40, r);
    TrainConfig cfg;
    cfg.batch_size = 16;
    cfg.theta_stage_epochs = 4;
    cfg.sdr_stage_epochs = 5;
    cfg.seed = 9;
    const TrainResult a = train(spec, d, cfg);
    const TrainResult b = train(spec, d, cfg);
    for (std::size_t j = 0; j < a.theta.layers.size(); ++j) {
        EXPECT_EQ(a.theta.layers[j].weights, b.theta.layers[j].weights);
        EXPECT_EQ(a.theta.layers[j].bias, b.theta.layers[j].bias);
    }
    for (std::size_t k = 0; k < a.sdr_latents.size(); ++k) EXPECT_EQ(a.sdr_latents[k], b.sdr_latents[k]);
    cfg.seed = 10;
    const TrainResult c = train(spec, d, cfg);
    EXPECT_NE(a.theta.layers[0].weights, c.theta.layers[0].weights);
}

TEST(Train, DivergenceCarriesPartialReport) {
    const NetworkSpec spec = spec_of({3, 4, 1}, {1e-12, 1e-12});
    RngStream r(13);
    const TrainingData d = toy_data(spec, 20, r);
    TrainConfig cfg;
    cfg.batch_size = 10;
    cfg.theta_stage_epochs = 2;
    cfg.eps_theta = Schedule::fixed(0.5);
    try {
        train(spec, d, cfg);
        FAIL() << "expected divergence";
    } catch (const TrainingAborted& e) {
        EXPECT_GE(e.iteration(), 1);
        EXPECT_EQ(static_cast<long>(e.partial_report().records.size()), e.iteration() - 1);
    }
}
