#include "stonet/likelihood.hpp"

#include "stonet/error.hpp"

#include <cmath>

namespace stonet {

Targets Targets::regression(Matrix values_by_column) {
    Targets t;
    t.values = std::move(values_by_column);
    return t;
}

Targets Targets::classification(std::vector<int> labels) {
    Targets t;
    t.labels = std::move(labels);
    return t;
}

Eigen::Index Targets::size() const {
    return is_classification() ? static_cast<Eigen::Index>(labels.size()) : values.cols();
}

Response Targets::at(Eigen::Index s) const {
    Response r;
    if (is_classification())
        r.label = labels.at(static_cast<std::size_t>(s));
    else
        r.value = values.col(s);
    return r;
}

Targets Targets::subset(const std::vector<std::size_t>& idx) const {
    Targets t;
    if (is_classification()) {
        t.labels.reserve(idx.size());
        for (auto i : idx) t.labels.push_back(labels[i]);
    } else {
        t.values.resize(values.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k)
            t.values.col(static_cast<Eigen::Index>(k)) = values.col(static_cast<Eigen::Index>(idx[k]));
    }
    return t;
}

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)

void require_positive_variance(double sigma2) {
    if (!(sigma2 > 0.0)) throw InvalidArgument("noise variance must be positive");
}

Targets single(const Response& y, Task task) {
    if (task == Task::classification) return Targets::classification({y.label});
    return Targets::regression(Matrix(y.value));
}

/// Column-wise log-softmax of logits.
Matrix log_softmax(const Matrix& logits) {
    Matrix out = logits;
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
        const double m = out.col(c).maxCoeff();
        const double lse = m + std::log((out.col(c).array() - m).exp().sum());
        out.col(c).array() -= lse;
    }
    return out;
}

void check_labels(const Targets& targets, Eigen::Index classes) {
    for (int label : targets.labels)
        if (label < 0 || label >= classes)
            throw InvalidArgument("class label " + std::to_string(label) + " out of range");
}

Matrix layer_mean(const Layer& layer, const Matrix& input) {
    Matrix m = layer.weights * input;
    m.colwise() += layer.bias;
    return m;
}

Matrix output_error(Task task, const Matrix& mean, const Targets& targets, double sigma2) {
    if (task == Task::regression) {
        if (targets.values.rows() != mean.rows() || targets.values.cols() != mean.cols())
            throw InvalidArgument("response shape does not match output layer");
        return (targets.values - mean) / sigma2;
    }
    check_labels(targets, mean.rows());
    if (static_cast<Eigen::Index>(targets.labels.size()) != mean.cols())
        throw InvalidArgument("label count does not match batch size");
    Matrix err = -log_softmax(mean / sigma2).array().exp().matrix();
    for (Eigen::Index s = 0; s < err.cols(); ++s) err(targets.labels[static_cast<std::size_t>(s)], s) += 1.0;
    return err / sigma2;
}

}  // namespace

Matrix layer_input(const NetworkSpec& spec, const Matrix& inputs,
                   const std::vector<Matrix>& latents, int j) {
    if (j == 1) return inputs;
    return apply_activation(spec.activation, latents[static_cast<std::size_t>(j - 2)]);
}

Matrix layer_error(const NetworkSpec& spec, const Theta& theta, const Matrix& inputs,
                   const std::vector<Matrix>& latents, const Targets& targets, int j) {
    const int h = spec.hidden_layers();
    if (j < 1 || j > h + 1) throw InvalidArgument("layer index out of range");
    const double sigma2 = spec.noise_vars[static_cast<std::size_t>(j - 1)];
    require_positive_variance(sigma2);
    const Layer& layer = theta.layers[static_cast<std::size_t>(j - 1)];
    const Matrix mean = layer_mean(layer, layer_input(spec, inputs, latents, j));
    if (j <= h) return (latents[static_cast<std::size_t>(j - 1)] - mean) / sigma2;
    return output_error(spec.task, mean, targets, sigma2);
}

Matrix grad_latent_batch(const NetworkSpec& spec, const Theta& theta, const Matrix& inputs,
                         const std::vector<Matrix>& latents, const Targets& targets, int i) {
    const int h = spec.hidden_layers();
    if (i < 1 || i > h) throw InvalidArgument("grad_latent: layer index must be in [1, h]");
    const Matrix own = layer_error(spec, theta, inputs, latents, targets, i);
    const Matrix above = layer_error(spec, theta, inputs, latents, targets, i + 1);
    const Matrix& y_i = latents[static_cast<std::size_t>(i - 1)];
    return (activation_derivative(spec.activation, y_i).array() *
            (theta.layers[static_cast<std::size_t>(i)].weights.transpose() * above).array())
               .matrix() -
           own;
}

LayerGradient grad_theta_batch(const NetworkSpec& spec, const Theta& theta, const Matrix& inputs,
                               const std::vector<Matrix>& latents, const Targets& targets, int j) {
    const Matrix err = layer_error(spec, theta, inputs, latents, targets, j);
    const Matrix in = layer_input(spec, inputs, latents, j);
    return {err * in.transpose(), err.rowwise().sum()};
}

Vector output_log_density_batch(const NetworkSpec& spec, const Theta& theta, const Matrix& y_h,
                                const Targets& targets) {
    const int h = spec.hidden_layers();
    const double sigma2 = spec.noise_vars[static_cast<std::size_t>(h)];
    require_positive_variance(sigma2);
    const Matrix mean =
        layer_mean(theta.layers[static_cast<std::size_t>(h)], apply_activation(spec.activation, y_h));
    Vector out(mean.cols());
    if (spec.task == Task::regression) {
        if (targets.values.rows() != mean.rows() || targets.values.cols() != mean.cols())
            throw InvalidArgument("response shape does not match output layer");
        const double c = -0.5 * static_cast<double>(mean.rows()) * (kLog2Pi + std::log(sigma2));
        out = (c - (targets.values - mean).colwise().squaredNorm().array() / (2.0 * sigma2)).matrix().transpose();
    } else {
        check_labels(targets, mean.rows());
        if (static_cast<Eigen::Index>(targets.labels.size()) != mean.cols())
            throw InvalidArgument("label count does not match batch size");
        const Matrix lp = log_softmax(mean / sigma2);
        for (Eigen::Index s = 0; s < lp.cols(); ++s) out[s] = lp(targets.labels[static_cast<std::size_t>(s)], s);
    }
    return out;
}

Vector complete_data_loglik_batch(const NetworkSpec& spec, const Theta& theta,
                                  const Matrix& inputs, const std::vector<Matrix>& latents,
                                  const Targets& targets) {
    const int h = spec.hidden_layers();
    if (static_cast<int>(latents.size()) != h)
        throw InvalidArgument("complete_data_loglik: expected one latent block per hidden layer");
    Vector total = output_log_density_batch(spec, theta, latents.back(), targets);
    for (int j = 1; j <= h; ++j) {
        const double sigma2 = spec.noise_vars[static_cast<std::size_t>(j - 1)];
        const Matrix mean = layer_mean(theta.layers[static_cast<std::size_t>(j - 1)],
                                       layer_input(spec, inputs, latents, j));
        const Matrix& y = latents[static_cast<std::size_t>(j - 1)];
        const double c = -0.5 * static_cast<double>(y.rows()) * (kLog2Pi + std::log(sigma2));
        total.array() += c - (y - mean).colwise().squaredNorm().transpose().array() / (2.0 * sigma2);
    }
    return total;
}

double layer_log_density(Activation act, const Layer& layer, const Vector& y_prev,
                         const Vector& y_i, double sigma2_i, bool is_first) {
    require_positive_variance(sigma2_i);
    if (layer.weights.cols() != y_prev.size() || layer.weights.rows() != y_i.size())
        throw InvalidArgument("layer_log_density: shape mismatch");
    const Vector in = is_first ? y_prev : apply_activation(act, y_prev);
    const Vector r = y_i - layer.bias - layer.weights * in;
    return -0.5 * static_cast<double>(y_i.size()) * (kLog2Pi + std::log(sigma2_i)) -
           r.squaredNorm() / (2.0 * sigma2_i);
}

double output_log_density(Activation act, const Layer& out, const Vector& y_h, const Response& y,
                          double sigma2_out, Task task) {
    require_positive_variance(sigma2_out);
    if (out.weights.cols() != y_h.size()) throw InvalidArgument("output_log_density: shape mismatch");
    if (task == Task::regression) return layer_log_density(act, out, y_h, y.value, sigma2_out, false);
    const Vector logits = (out.weights * apply_activation(act, y_h) + out.bias) / sigma2_out;
    if (y.label < 0 || y.label >= logits.size())
        throw InvalidArgument("class label " + std::to_string(y.label) + " out of range");
    return log_softmax(logits)(y.label, 0);
}

Vector grad_latent(const NetworkSpec& spec, const Theta& theta, const Vector& x,
                   const std::vector<Vector>& latents, const Response& y, int layer_index) {
    std::vector<Matrix> cols(latents.begin(), latents.end());
    return grad_latent_batch(spec, theta, x, cols, single(y, spec.task), layer_index).col(0);
}

LayerGradient grad_theta_layer(Activation act, const Layer& layer, const Vector& y_prev,
                               const Vector& y_i, double sigma2_i, bool is_first) {
    require_positive_variance(sigma2_i);
    if (layer.weights.cols() != y_prev.size() || layer.weights.rows() != y_i.size())
        throw InvalidArgument("grad_theta_layer: shape mismatch");
    const Vector in = is_first ? y_prev : apply_activation(act, y_prev);
    const Vector err = (y_i - layer.bias - layer.weights * in) / sigma2_i;
    return {err * in.transpose(), err};
}

LayerGradient grad_theta_output(Activation act, const Layer& out, const Vector& y_h,
                                const Response& y, double sigma2_out, Task task) {
    require_positive_variance(sigma2_out);
    if (out.weights.cols() != y_h.size()) throw InvalidArgument("grad_theta_output: shape mismatch");
    const Vector in = apply_activation(act, y_h);
    const Matrix mean = out.weights * in + out.bias;
    const Vector err = output_error(task, mean, single(y, task), sigma2_out).col(0);
    return {err * in.transpose(), err};
}

double complete_data_loglik(const NetworkSpec& spec, const Theta& theta, const Vector& x,
                            const std::vector<Vector>& latents, const Response& y) {
    std::vector<Matrix> cols(latents.begin(), latents.end());
    return complete_data_loglik_batch(spec, theta, x, cols, single(y, spec.task))[0];
}

double dnn_loss(const NetworkSpec& spec, const Theta& theta, const Matrix& inputs,
                const Targets& targets) {
    if (inputs.cols() == 0 || targets.size() == 0) throw InvalidArgument("dnn_loss: empty dataset");
    if (targets.size() != inputs.cols()) throw InvalidArgument("dnn_loss: inputs and targets differ in size");
    const BatchTrace trace = forward_dnn_batch(spec, theta, inputs);
    return -output_log_density_batch(spec, theta, trace.pre_activations.back(), targets).mean();
}

double latent_log_normalizer(const NetworkSpec& spec, double noise_scale) {
    double c = 0.0;
    for (int i = 1; i <= spec.hidden_layers(); ++i)
        c += -0.5 * spec.widths[static_cast<std::size_t>(i)] *
             (kLog2Pi + std::log(spec.noise_vars[static_cast<std::size_t>(i - 1)] * noise_scale));
    return c;
}

}  // namespace stonet
