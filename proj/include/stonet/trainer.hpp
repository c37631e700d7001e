#pragma once

#include "stonet/error.hpp"
#include "stonet/likelihood.hpp"
#include "stonet/model.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stonet {

/// Step-size sequence. Decaying form: scale / (offset + k^alpha); constant
/// form: `scale` for all k. With `per_n` the value is further divided by the
/// training-set size, matching step sizes quoted as "c/n".
struct Schedule {
    double scale = 1.0;
    double offset = 0.0;
    double alpha = 1.0;
    bool constant = false;
    bool per_n = false;

    static Schedule fixed(double value, bool per_n = false);
    static Schedule decaying(double scale, double offset, double alpha, bool per_n = false);

    double at(long k, long n_total = 1) const;
    void validate() const;

    bool operator==(const Schedule&) const = default;
};

enum class Stage { theta, sdr };

std::string to_string(Stage s);

struct TrainConfig {
    int t_hmc = 25;
    double eta = 100.0;  // friction
    double beta = 1.0;   // inverse temperature of the injected noise
    Schedule eps_theta = Schedule::fixed(1e-3);
    Schedule eps_sdr = Schedule::decaying(1.0, 1000.0, 0.6);
    // One shared schedule or one per layer (h+1 entries).
    std::vector<Schedule> gamma_theta{Schedule::fixed(3e-5, true)};
    std::vector<Schedule> gamma_sdr{Schedule::decaying(1.0, 1.0 / 3e-5, 0.6, true)};
    int batch_size = 64;
    int theta_stage_epochs = 500;
    int sdr_stage_epochs = 30;
    int sdr_average_sweeps = 5;
    int loss_every_epochs = 1;  // 0 disables loss tracking
    std::uint64_t seed = 0;

    void validate(const NetworkSpec& spec) const;

    bool operator==(const TrainConfig&) const = default;
};

double eps_k(const TrainConfig& cfg, Stage stage, long k);
/// Step size of layer `layer` (1-based, 1..h+1) at iteration k.
double gamma_k(const TrainConfig& cfg, Stage stage, int layer, long k, long n_total);

/// Observations in columns.
struct TrainingData {
    Matrix inputs;  // d_0 x n
    Targets targets;

    Eigen::Index size() const { return inputs.cols(); }
    TrainingData subset(const std::vector<std::size_t>& idx) const;
};

/// Imputed latent values and SGHMC momenta for a batch; y[i] and v[i] are
/// d_{i+1} x B.
struct LatentState {
    std::vector<Matrix> y;
    std::vector<Matrix> v;
};

/// Latents at the deterministic forward trace, momenta zero.
LatentState init_latent_state(const NetworkSpec& spec, const Theta& theta, const Matrix& inputs);

/// Called before each layer update: (inner step l, 1-based layer i).
using SweepObserver = std::function<void(int, int)>;

/// Backward SGHMC imputation at fixed theta. Runs t_hmc inner steps; within
/// each, layers h..1 are updated in turn with
///   v <- (1 - eps eta) v + eps grad + sqrt(2 eps eta / beta) e
///   y <- y + eps v_prev
/// where v_prev is the momentum before this update and grad uses the most
/// recent values of the neighbouring layers.
LatentState sghmc_sweep(const NetworkSpec& spec, const Theta& theta, const TrainingData& batch,
                        LatentState state, const TrainConfig& cfg, double eps, RngStream& stream,
                        long iteration, const SweepObserver& observer = {});

struct ParamUpdate {
    Theta theta;
    std::vector<double> update_norms;  // ||delta theta_i|| per layer
};

/// theta_i += gamma_i (n_total / |batch|) sum_s grad_{theta_i} log pi(Y_i^s | Y_{i-1}^s).
ParamUpdate param_update(const NetworkSpec& spec, const Theta& theta, const TrainingData& batch,
                         const LatentState& state, std::span<const double> step_sizes,
                         long n_total, long iteration = 0);

struct IterationRecord {
    long iteration = 0;        // global, 1-based
    long stage_iteration = 0;  // k used by the schedules
    Stage stage = Stage::theta;
    int epoch = 0;
    double eps = 0.0;
    std::vector<double> gammas;
    std::optional<double> loss;
    std::vector<double> update_norms;
};

struct TrainReport {
    std::vector<IterationRecord> records;
    std::vector<std::string> warnings;
    double theta_stage_seconds = 0.0;
    double sdr_stage_seconds = 0.0;

    void append(const TrainReport& other);
};

/// Divergence that carries everything recorded before the failure.
class TrainingAborted : public Divergence {
public:
    TrainingAborted(const Divergence& cause, TrainReport partial)
        : Divergence(cause), partial_(std::move(partial)) {}
    const TrainReport& partial_report() const noexcept { return partial_; }

private:
    TrainReport partial_;
};

struct StageResult {
    Theta theta;
    TrainReport report;
};

/// Minibatch stage: epochs of random permutations, each batch re-imputed
/// from the forward trace, swept, then used for a parameter update.
StageResult run_theta_stage(const NetworkSpec& spec, Theta theta, const TrainingData& data,
                            const TrainConfig& cfg, RngStream& stream);

struct SdrStageResult {
    Theta theta;
    std::vector<Matrix> retained_features;  // last-layer latents of the final sweeps, d_h x n
    TrainReport report;
};

/// Full-data stage. Keeps the layer-h latents of the last
/// cfg.sdr_average_sweeps sweeps.
SdrStageResult run_sdr_stage(const NetworkSpec& spec, Theta theta, const TrainingData& data,
                             const TrainConfig& cfg, RngStream& stream, long iteration_offset = 0);

struct TrainResult {
    Theta theta;
    std::vector<Matrix> sdr_latents;
    TrainReport report;
};

TrainResult train(const NetworkSpec& spec, const TrainingData& data, const TrainConfig& cfg);

}  // namespace stonet
