#pragma once

#include "stonet/model.hpp"

#include <vector>

namespace stonet {

/// A single response: `value` for regression, `label` (0..C-1) for classification.
struct Response {
    Vector value;
    int label = -1;
};

/// Responses for a batch, one observation per column / entry.
struct Targets {
    Matrix values;            // regression: d_{h+1} x B
    std::vector<int> labels;  // classification: B

    static Targets regression(Matrix values_by_column);
    static Targets classification(std::vector<int> labels);

    bool is_classification() const { return values.size() == 0 && !labels.empty(); }
    Eigen::Index size() const;
    Response at(Eigen::Index s) const;
    Targets subset(const std::vector<std::size_t>& idx) const;
};

/// Per-layer slice of the parameter gradient, shaped like Layer.
struct LayerGradient {
    Matrix weights;
    Vector bias;
};

using ThetaGradient = std::vector<LayerGradient>;

// ---------------------------------------------------------------------------
// Single-observation interface

/// log N(y_i; b_i + w_i psi(y_prev), sigma2_i I). The first hidden layer
/// consumes the raw input, so psi is the identity when `is_first`.
double layer_log_density(Activation act, const Layer& layer, const Vector& y_prev,
                         const Vector& y_i, double sigma2_i, bool is_first);

/// Regression: Gaussian as above. Classification: log softmax of
/// (b + w psi(y_h)) / sigma2_out at the observed label.
double output_log_density(Activation act, const Layer& out, const Vector& y_h, const Response& y,
                          double sigma2_out, Task task);

/// Gradient with respect to Y_i (1-based, 1 <= i <= h) of
/// log pi(Y_i | Y_{i-1}) + log pi(Y_{i+1} | Y_i).
Vector grad_latent(const NetworkSpec& spec, const Theta& theta, const Vector& x,
                   const std::vector<Vector>& latents, const Response& y, int layer_index);

/// Gradient of a Gaussian layer's log-density with respect to (w_i, b_i).
LayerGradient grad_theta_layer(Activation act, const Layer& layer, const Vector& y_prev,
                               const Vector& y_i, double sigma2_i, bool is_first);

/// Gradient of the output layer's log-density (Gaussian or tempered softmax).
LayerGradient grad_theta_output(Activation act, const Layer& out, const Vector& y_h,
                                const Response& y, double sigma2_out, Task task);

/// log pi(Y, Y_mis | X, theta): the sum of every layer term.
double complete_data_loglik(const NetworkSpec& spec, const Theta& theta, const Vector& x,
                            const std::vector<Vector>& latents, const Response& y);

/// -(1/n) sum log pi(Y | X, theta) at the deterministic forward trace.
/// `inputs` is d_0 x n.
double dnn_loss(const NetworkSpec& spec, const Theta& theta, const Matrix& inputs,
                const Targets& targets);

/// Sum over hidden layers of -d_i/2 log(2 pi sigma2_i * noise_scale): the
/// part of the complete-data log-likelihood that does not depend on the data.
double latent_log_normalizer(const NetworkSpec& spec, double noise_scale = 1.0);

// ---------------------------------------------------------------------------
// Batched interface used by the trainer. Latents are d_i x B matrices;
// layer indices are 1-based (1..h+1), matching the layer numbering above.

/// Input to layer j: the raw input for j = 1, psi(Y_{j-1}) otherwise.
Matrix layer_input(const NetworkSpec& spec, const Matrix& inputs,
                   const std::vector<Matrix>& latents, int j);

/// E_j = gradient of log pi(Y_j | m_j) with respect to the layer mean m_j,
/// per column. For hidden/regression layers (Y_j - m_j) / sigma2_j; for the
/// classification head (onehot - softmax(m / sigma2)) / sigma2.
Matrix layer_error(const NetworkSpec& spec, const Theta& theta, const Matrix& inputs,
                   const std::vector<Matrix>& latents, const Targets& targets, int j);

Matrix grad_latent_batch(const NetworkSpec& spec, const Theta& theta, const Matrix& inputs,
                         const std::vector<Matrix>& latents, const Targets& targets, int i);

/// Gradient of sum_s log pi(Y_j^(s) | Y_{j-1}^(s), theta_j) with respect to theta_j.
LayerGradient grad_theta_batch(const NetworkSpec& spec, const Theta& theta, const Matrix& inputs,
                               const std::vector<Matrix>& latents, const Targets& targets, int j);

/// Per-column log pi(Y, Y_mis | X, theta).
Vector complete_data_loglik_batch(const NetworkSpec& spec, const Theta& theta,
                                  const Matrix& inputs, const std::vector<Matrix>& latents,
                                  const Targets& targets);

/// Per-column output-layer log-density at the given last hidden layer values.
Vector output_log_density_batch(const NetworkSpec& spec, const Theta& theta, const Matrix& y_h,
                                const Targets& targets);

}  // namespace stonet
