#pragma once

#include "stonet/numerics.hpp"

#include <string>
#include <vector>

namespace stonet {

/// `identity` makes the hidden layers linear; it exists for closed-form checks.
enum class Activation { tanh, relu, sigmoid, identity };
enum class Task { regression, classification };

std::string to_string(Activation a);
std::string to_string(Task t);
Activation parse_activation(const std::string& s);
Task parse_task(const std::string& s);

/// Architecture of a StoNet with h hidden layers.
///
/// widths = [d_0, d_1, ..., d_h, d_{h+1}] where d_0 is the input dimension and
/// d_{h+1} the output dimension (number of classes for classification).
/// noise_vars = [sigma^2_1, ..., sigma^2_{h+1}]; for classification the last
/// entry is the softmax temperature.
struct NetworkSpec {
    std::vector<int> widths;
    Activation activation = Activation::tanh;
    Task task = Task::regression;
    std::vector<double> noise_vars;

    int hidden_layers() const { return static_cast<int>(widths.size()) - 2; }
    int input_dim() const { return widths.front(); }
    int output_dim() const { return widths.back(); }
    int feature_dim() const { return widths[widths.size() - 2]; }

    /// Throws InvalidArgument unless h >= 1, widths >= 1 and noise_vars has
    /// h+1 positive entries.
    void validate() const;

    bool operator==(const NetworkSpec&) const = default;
};

struct Layer {
    Matrix weights;  // d_i x d_{i-1}
    Vector bias;     // d_i
};

/// Affine parameters of layers 1..h+1 (index 0 holds layer 1).
struct Theta {
    std::vector<Layer> layers;

    bool all_finite() const;
    /// Throws InvalidArgument if shapes disagree with `spec`.
    void check_shapes(const NetworkSpec& spec) const;
    double squared_norm() const;
};

/// Uniform[-1/sqrt(fan_in), 1/sqrt(fan_in)] weights, zero biases.
Theta init_theta(const NetworkSpec& spec, RngStream& stream);

Vector apply_activation(Activation kind, const Vector& v);
Vector activation_derivative(Activation kind, const Vector& v);
Matrix apply_activation(Activation kind, const Matrix& v);
Matrix activation_derivative(Activation kind, const Matrix& v);

struct ForwardTrace {
    std::vector<Vector> pre_activations;  // Y~_1 .. Y~_h
    Vector output_mean;
};

/// Deterministic network written with separated feed and activation steps:
/// Y~_1 = b_1 + w_1 x, Y~_i = b_i + w_i psi(Y~_{i-1}), output = b + w psi(Y~_h).
ForwardTrace forward_dnn(const NetworkSpec& spec, const Theta& theta, const Vector& x);

/// Batched forward pass. `inputs` is d_0 x B (one observation per column).
struct BatchTrace {
    std::vector<Matrix> pre_activations;  // each d_i x B
    Matrix output_mean;                   // d_{h+1} x B
};
BatchTrace forward_dnn_batch(const NetworkSpec& spec, const Theta& theta, const Matrix& inputs);

struct StoNetDraw {
    std::vector<Vector> latents;  // Y_1 .. Y_h
    Vector output;                // regression response draw
    int label = -1;               // classification draw
};

/// Generative draw Y_i = b_i + w_i psi(Y_{i-1}) + e_i, e_i ~ N(0, sigma^2_i I).
StoNetDraw forward_stonet_sample(const NetworkSpec& spec, const Theta& theta, const Vector& x,
                                 RngStream& stream);

/// Batched latent draw; `noise_scale` multiplies every hidden sigma^2_i.
std::vector<Matrix> sample_latents_batch(const NetworkSpec& spec, const Theta& theta,
                                         const Matrix& inputs, RngStream& stream,
                                         double noise_scale = 1.0);

struct NoiseReport {
    std::vector<double> amplification;  // a_k, k = 1..h
    std::vector<double> calibration;    // s_k = a_k sigma^2_k h
    bool monotone_ok = true;

    bool has_warning() const;
    std::vector<std::string> warnings() const;
};

/// Noise calibration check: layer variances should be non-decreasing and the
/// layer-k noise, amplified by d_{h+1} (prod_{i=k+1}^h d_i^2) d_k, small
/// relative to 1/h.
NoiseReport validate_noise_schedule(const NetworkSpec& spec);

}  // namespace stonet
