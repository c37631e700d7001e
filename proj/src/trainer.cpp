#include "stonet/trainer.hpp"

#include <chrono>
#include <cmath>

namespace stonet {

Schedule Schedule::fixed(double value, bool per_n) {
    Schedule s;
    s.scale = value;
    s.offset = 0.0;
    s.alpha = 0.0;
    s.constant = true;
    s.per_n = per_n;
    return s;
}

Schedule Schedule::decaying(double scale, double offset, double alpha, bool per_n) {
    Schedule s;
    s.scale = scale;
    s.offset = offset;
    s.alpha = alpha;
    s.per_n = per_n;
    return s;
}

void Schedule::validate() const {
    if (!(scale > 0.0)) throw InvalidArgument("schedule scale must be positive");
    if (constant) return;
    if (!(offset >= 0.0)) throw InvalidArgument("schedule offset must be >= 0");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("schedule alpha must be in (0, 1]");
}

double Schedule::at(long k, long n_total) const {
    if (k < 1) throw InvalidArgument("schedule index must be >= 1");
    double v = constant ? scale : scale / (offset + std::pow(static_cast<double>(k), alpha));
    if (per_n) v /= static_cast<double>(n_total);
    return v;
}

std::string to_string(Stage s) { return s == Stage::theta ? "theta" : "sdr"; }

void TrainConfig::validate(const NetworkSpec& spec) const {
    if (t_hmc < 1) throw InvalidArgument("t_hmc must be >= 1");
    if (!(eta > 0.0)) throw InvalidArgument("friction eta must be positive");
    if (!(beta > 0.0)) throw InvalidArgument("inverse temperature beta must be positive");
    if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
    if (theta_stage_epochs < 0 || sdr_stage_epochs < 0)
        throw InvalidArgument("epoch counts must be non-negative");
    if (sdr_average_sweeps < 1) throw InvalidArgument("sdr_average_sweeps must be >= 1");
    eps_theta.validate();
    eps_sdr.validate();
    const std::size_t layers = spec.widths.size() - 1;
    for (const auto* g : {&gamma_theta, &gamma_sdr}) {
        if (g->size() != 1 && g->size() != layers)
            throw InvalidArgument("gamma schedules: give one shared schedule or one per layer");
        for (const auto& s : *g) s.validate();
    }
}

double eps_k(const TrainConfig& cfg, Stage stage, long k) {
    return (stage == Stage::theta ? cfg.eps_theta : cfg.eps_sdr).at(k);
}

double gamma_k(const TrainConfig& cfg, Stage stage, int layer, long k, long n_total) {
    const auto& g = stage == Stage::theta ? cfg.gamma_theta : cfg.gamma_sdr;
    const auto& s = g.size() == 1 ? g.front() : g.at(static_cast<std::size_t>(layer - 1));
    return s.at(k, n_total);
}

TrainingData TrainingData::subset(const std::vector<std::size_t>& idx) const {
    TrainingData out;
    out.inputs.resize(inputs.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k)
        out.inputs.col(static_cast<Eigen::Index>(k)) = inputs.col(static_cast<Eigen::Index>(idx[k]));
    out.targets = targets.subset(idx);
    return out;
}

void TrainReport::append(const TrainReport& other) {
    records.insert(records.end(), other.records.begin(), other.records.end());
    warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
    theta_stage_seconds += other.theta_stage_seconds;
    sdr_stage_seconds += other.sdr_stage_seconds;
}

LatentState init_latent_state(const NetworkSpec& spec, const Theta& theta, const Matrix& inputs) {
    BatchTrace trace = forward_dnn_batch(spec, theta, inputs);
    LatentState state;
    state.y = std::move(trace.pre_activations);
    state.v.reserve(state.y.size());
    for (const auto& y : state.y) state.v.push_back(Matrix::Zero(y.rows(), y.cols()));
    return state;
}

LatentState sghmc_sweep(const NetworkSpec& spec, const Theta& theta, const TrainingData& batch,
                        LatentState state, const TrainConfig& cfg, double eps, RngStream& stream,
                        long iteration, const SweepObserver& observer) {
    const int h = spec.hidden_layers();
    if (static_cast<int>(state.y.size()) != h || static_cast<int>(state.v.size()) != h)
        throw InvalidArgument("sghmc_sweep: latent state does not match network depth");
    if (!(eps > 0.0)) throw InvalidArgument("sghmc_sweep: eps must be positive");
    const double decay = 1.0 - eps * cfg.eta;
    const double noise = std::sqrt(2.0 * eps * cfg.eta / cfg.beta);
    for (int l = 1; l <= cfg.t_hmc; ++l) {
        for (int i = h; i >= 1; --i) {
            if (observer) observer(l, i);
            const auto idx = static_cast<std::size_t>(i - 1);
            const Matrix grad =
                grad_latent_batch(spec, theta, batch.inputs, state.y, batch.targets, i);
            Matrix& v = state.v[idx];
            Matrix& y = state.y[idx];
            y += eps * v;  // position moves with the pre-update momentum
            v = decay * v + eps * grad + noise * stream.normal_matrix(v.rows(), v.cols());
            if (!y.allFinite() || !v.allFinite())
                throw Divergence("SGHMC produced a non-finite latent", iteration, i);
        }
    }
    return state;
}

ParamUpdate param_update(const NetworkSpec& spec, const Theta& theta, const TrainingData& batch,
                         const LatentState& state, std::span<const double> step_sizes,
                         long n_total, long iteration) {
    const int layers = spec.hidden_layers() + 1;
    if (static_cast<int>(step_sizes.size()) != layers)
        throw InvalidArgument("param_update: need one step size per layer");
    if (batch.size() == 0) throw InvalidArgument("param_update: empty batch");
    const double factor = static_cast<double>(n_total) / static_cast<double>(batch.size());
    ParamUpdate out{theta, {}};
    out.update_norms.reserve(static_cast<std::size_t>(layers));
    // All gradients use the pre-update parameters.
    for (int j = 1; j <= layers; ++j) {
        const auto idx = static_cast<std::size_t>(j - 1);
        const LayerGradient g =
            grad_theta_batch(spec, theta, batch.inputs, state.y, batch.targets, j);
        const double step = step_sizes[idx] * factor;
        Layer& layer = out.theta.layers[idx];
        layer.weights += step * g.weights;
        layer.bias += step * g.bias;
        if (!layer.weights.allFinite() || !layer.bias.allFinite())
            throw Divergence("parameter update produced a non-finite value", iteration, j);
        out.update_norms.push_back(
            step * std::sqrt(g.weights.squaredNorm() + g.bias.squaredNorm()));
    }
    return out;
}

namespace {

constexpr std::uint64_t kPermutationSalt = 0x7065726dULL;
constexpr std::uint64_t kSweepSalt = 0x73776570ULL;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> resolve_gammas(const TrainConfig& cfg, Stage stage, int layers, long k,
                                   long n_total) {
    std::vector<double> g;
    g.reserve(static_cast<std::size_t>(layers));
    for (int j = 1; j <= layers; ++j) g.push_back(gamma_k(cfg, stage, j, k, n_total));
    return g;
}

}  // namespace

StageResult run_theta_stage(const NetworkSpec& spec, Theta theta, const TrainingData& data,
                            const TrainConfig& cfg, RngStream& stream) {
    spec.validate();
    cfg.validate(spec);
    theta.check_shapes(spec);
    const auto t0 = std::chrono::steady_clock::now();
    const long n = data.size();
    const int layers = spec.hidden_layers() + 1;
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    TrainReport report;
    long k = 0;
    try {
        for (int epoch = 0; epoch < cfg.theta_stage_epochs; ++epoch) {
            RngStream perm_stream = stream.substream(kPermutationSalt + static_cast<std::uint64_t>(epoch));
            const auto order = perm_stream.permutation(static_cast<std::size_t>(n));
            for (std::size_t start = 0; start < order.size(); start += batch) {
                ++k;
                const std::vector<std::size_t> idx(
                    order.begin() + static_cast<std::ptrdiff_t>(start),
                    order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + batch)));
                const TrainingData mb = data.subset(idx);
                const double eps = eps_k(cfg, Stage::theta, k);
                RngStream sweep_stream = stream.substream(kSweepSalt + static_cast<std::uint64_t>(k));
                LatentState state = sghmc_sweep(spec, theta, mb, init_latent_state(spec, theta, mb.inputs),
                                                cfg, eps, sweep_stream, k);
                IterationRecord rec;
                rec.iteration = k;
                rec.stage_iteration = k;
                rec.stage = Stage::theta;
                rec.epoch = epoch + 1;
                rec.eps = eps;
                rec.gammas = resolve_gammas(cfg, Stage::theta, layers, k, n);
                ParamUpdate upd = param_update(spec, theta, mb, state, rec.gammas, n, k);
                theta = std::move(upd.theta);
                rec.update_norms = std::move(upd.update_norms);
                const bool epoch_end = start + batch >= order.size();
                if (epoch_end && cfg.loss_every_epochs > 0 && (epoch + 1) % cfg.loss_every_epochs == 0)
                    rec.loss = dnn_loss(spec, theta, data.inputs, data.targets);
                report.records.push_back(std::move(rec));
            }
        }
    } catch (const Divergence& d) {
        report.theta_stage_seconds = seconds_since(t0);
        throw TrainingAborted(d, std::move(report));
    }
    report.theta_stage_seconds = seconds_since(t0);
    return {std::move(theta), std::move(report)};
}

SdrStageResult run_sdr_stage(const NetworkSpec& spec, Theta theta, const TrainingData& data,
                             const TrainConfig& cfg, RngStream& stream, long iteration_offset) {
    spec.validate();
    cfg.validate(spec);
    theta.check_shapes(spec);
    const auto t0 = std::chrono::steady_clock::now();
    const long n = data.size();
    const int layers = spec.hidden_layers() + 1;
    SdrStageResult out;
    try {
        for (int epoch = 0; epoch < cfg.sdr_stage_epochs; ++epoch) {
            const long k = epoch + 1;
            const double eps = eps_k(cfg, Stage::sdr, k);
            RngStream sweep_stream = stream.substream(kSweepSalt + static_cast<std::uint64_t>(k));
            LatentState state = sghmc_sweep(spec, theta, data, init_latent_state(spec, theta, data.inputs),
                                            cfg, eps, sweep_stream, iteration_offset + k);
            if (epoch >= cfg.sdr_stage_epochs - cfg.sdr_average_sweeps)
                out.retained_features.push_back(state.y.back());
            IterationRecord rec;
            rec.iteration = iteration_offset + k;
            rec.stage_iteration = k;
            rec.stage = Stage::sdr;
            rec.epoch = epoch + 1;
            rec.eps = eps;
            rec.gammas = resolve_gammas(cfg, Stage::sdr, layers, k, n);
            ParamUpdate upd = param_update(spec, theta, data, state, rec.gammas, n, iteration_offset + k);
            theta = std::move(upd.theta);
            rec.update_norms = std::move(upd.update_norms);
            if (cfg.loss_every_epochs > 0 && (epoch + 1) % cfg.loss_every_epochs == 0)
                rec.loss = dnn_loss(spec, theta, data.inputs, data.targets);
            out.report.records.push_back(std::move(rec));
        }
    } catch (const Divergence& d) {
        out.report.sdr_stage_seconds = seconds_since(t0);
        throw TrainingAborted(d, std::move(out.report));
    }
    out.report.sdr_stage_seconds = seconds_since(t0);
    out.theta = std::move(theta);
    return out;
}

TrainResult train(const NetworkSpec& spec, const TrainingData& data, const TrainConfig& cfg) {
    spec.validate();
    cfg.validate(spec);
    if (data.size() == 0) throw InvalidArgument("train: empty dataset");
    RngStream root(cfg.seed);
    RngStream init_stream = root.substream(1);
    RngStream theta_stream = root.substream(2);
    RngStream sdr_stream = root.substream(3);

    TrainReport report;
    for (auto& w : validate_noise_schedule(spec).warnings()) report.warnings.push_back(std::move(w));

    Theta theta = init_theta(spec, init_stream);
    try {
        StageResult stage1 = run_theta_stage(spec, std::move(theta), data, cfg, theta_stream);
        report.append(stage1.report);
        const long offset = static_cast<long>(report.records.size());
        SdrStageResult stage2 = run_sdr_stage(spec, std::move(stage1.theta), data, cfg, sdr_stream, offset);
        report.append(stage2.report);
        return {std::move(stage2.theta), std::move(stage2.retained_features), std::move(report)};
    } catch (const TrainingAborted& e) {
        report.append(e.partial_report());
        throw TrainingAborted(e, std::move(report));
    }
}

}  // namespace stonet
