#include "stonet/model.hpp"

#include "stonet/error.hpp"

#include <cmath>
#include <sstream>

namespace stonet {

std::string to_string(Activation a) {
    switch (a) {
        case Activation::tanh: return "tanh";
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::identity: return "identity";
    }
    return "unknown";
}

std::string to_string(Task t) {
    return t == Task::regression ? "regression" : "classification";
}

Activation parse_activation(const std::string& s) {
    if (s == "tanh") return Activation::tanh;
    if (s == "relu") return Activation::relu;
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "identity") return Activation::identity;
    throw InvalidArgument("unknown activation '" + s + "'");
}

Task parse_task(const std::string& s) {
    if (s == "regression") return Task::regression;
    if (s == "classification") return Task::classification;
    throw InvalidArgument("unknown task '" + s + "'");
}

void NetworkSpec::validate() const {
    if (widths.size() < 3) throw InvalidArgument("network needs at least one hidden layer");
    for (int w : widths)
        if (w < 1) throw InvalidArgument("network widths must be >= 1");
    if (noise_vars.size() != widths.size() - 1)
        throw InvalidArgument("noise_vars must have one entry per layer (h+1)");
    for (double s : noise_vars)
        if (!(s > 0.0) || !std::isfinite(s))
            throw InvalidArgument("noise variances must be positive and finite");
    if (task == Task::classification && output_dim() < 2)
        throw InvalidArgument("classification needs at least two output classes");
}

bool Theta::all_finite() const {
    for (const auto& l : layers)
        if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
    return true;
}

void Theta::check_shapes(const NetworkSpec& spec) const {
    if (layers.size() != spec.widths.size() - 1)
        throw InvalidArgument("theta layer count does not match network spec");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.weights.rows() != spec.widths[i + 1] || l.weights.cols() != spec.widths[i] ||
            l.bias.size() != spec.widths[i + 1])
            throw InvalidArgument("theta layer " + std::to_string(i + 1) +
                                  " has the wrong shape");
    }
}

double Theta::squared_norm() const {
    double s = 0.0;
    for (const auto& l : layers) s += l.weights.squaredNorm() + l.bias.squaredNorm();
    return s;
}

Theta init_theta(const NetworkSpec& spec, RngStream& stream) {
    spec.validate();
    Theta theta;
    theta.layers.reserve(spec.widths.size() - 1);
    for (std::size_t i = 1; i < spec.widths.size(); ++i) {
        const int fan_in = spec.widths[i - 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Layer layer{Matrix(spec.widths[i], fan_in), Vector::Zero(spec.widths[i])};
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
            for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
                layer.weights(r, c) = bound * (2.0 * stream.uniform() - 1.0);
        theta.layers.push_back(std::move(layer));
    }
    return theta;
}

namespace {

template <typename Derived>
auto activate(Activation kind, const Eigen::MatrixBase<Derived>& v) {
    using Plain = typename Derived::PlainObject;
    Plain out(v.rows(), v.cols());
    switch (kind) {
        case Activation::tanh: out = v.array().tanh().matrix(); break;
        case Activation::relu: out = v.array().max(0.0).matrix(); break;
        case Activation::sigmoid: out = (1.0 / (1.0 + (-v.array()).exp())).matrix(); break;
        case Activation::identity: out = v; break;
    }
    return out;
}

template <typename Derived>
auto derivative(Activation kind, const Eigen::MatrixBase<Derived>& v) {
    using Plain = typename Derived::PlainObject;
    Plain out(v.rows(), v.cols());
    switch (kind) {
        case Activation::tanh: out = (1.0 - v.array().tanh().square()).matrix(); break;
        case Activation::relu:
            // derivative at exactly 0 is 0
            out = (v.array() > 0.0).template cast<double>().matrix();
            break;
        case Activation::sigmoid: {
            const auto s = 1.0 / (1.0 + (-v.array()).exp());
            out = (s * (1.0 - s)).matrix();
            break;
        }
        case Activation::identity: out.setOnes(); break;
    }
    return out;
}

}  // namespace

Vector apply_activation(Activation kind, const Vector& v) { return activate(kind, v); }
Vector activation_derivative(Activation kind, const Vector& v) { return derivative(kind, v); }
Matrix apply_activation(Activation kind, const Matrix& v) { return activate(kind, v); }
Matrix activation_derivative(Activation kind, const Matrix& v) { return derivative(kind, v); }

BatchTrace forward_dnn_batch(const NetworkSpec& spec, const Theta& theta, const Matrix& inputs) {
    theta.check_shapes(spec);
    if (inputs.rows() != spec.input_dim())
        throw InvalidArgument("forward_dnn: input has " + std::to_string(inputs.rows()) +
                              " features, network expects " + std::to_string(spec.input_dim()));
    const int h = spec.hidden_layers();
    BatchTrace trace;
    trace.pre_activations.reserve(h);
    Matrix z = (theta.layers[0].weights * inputs).colwise() + theta.layers[0].bias;
    trace.pre_activations.push_back(z);
    for (int i = 1; i < h; ++i) {
        Matrix next = (theta.layers[i].weights * apply_activation(spec.activation, z)).colwise() +
                      theta.layers[i].bias;
        z = std::move(next);
        trace.pre_activations.push_back(z);
    }
    trace.output_mean = (theta.layers[h].weights * apply_activation(spec.activation, z)).colwise() +
                        theta.layers[h].bias;
    return trace;
}

ForwardTrace forward_dnn(const NetworkSpec& spec, const Theta& theta, const Vector& x) {
    BatchTrace batch = forward_dnn_batch(spec, theta, x);
    ForwardTrace trace;
    for (auto& m : batch.pre_activations) trace.pre_activations.emplace_back(m.col(0));
    trace.output_mean = batch.output_mean.col(0);
    return trace;
}

std::vector<Matrix> sample_latents_batch(const NetworkSpec& spec, const Theta& theta,
                                         const Matrix& inputs, RngStream& stream,
                                         double noise_scale) {
    theta.check_shapes(spec);
    if (inputs.rows() != spec.input_dim()) throw InvalidArgument("sample: input shape mismatch");
    const int h = spec.hidden_layers();
    std::vector<Matrix> latents;
    latents.reserve(h);
    for (int i = 0; i < h; ++i) {
        const Layer& layer = theta.layers[i];
        Matrix mean = i == 0 ? Matrix(layer.weights * inputs)
                             : Matrix(layer.weights * apply_activation(spec.activation, latents.back()));
        mean.colwise() += layer.bias;
        const double sigma = std::sqrt(spec.noise_vars[i] * noise_scale);
        latents.push_back(mean + sigma * stream.normal_matrix(mean.rows(), mean.cols()));
    }
    return latents;
}

StoNetDraw forward_stonet_sample(const NetworkSpec& spec, const Theta& theta, const Vector& x,
                                 RngStream& stream) {
    spec.validate();
    auto latents = sample_latents_batch(spec, theta, x, stream);
    const int h = spec.hidden_layers();
    const Layer& out = theta.layers[h];
    Vector mean = out.weights * apply_activation(spec.activation, Vector(latents.back().col(0))) +
                  out.bias;
    StoNetDraw draw;
    for (auto& m : latents) draw.latents.emplace_back(m.col(0));
    const double s2 = spec.noise_vars[h];
    if (spec.task == Task::regression) {
        draw.output = mean + std::sqrt(s2) * stream.normal_matrix(mean.size(), 1).col(0);
    } else {
        // tempered softmax: logits / sigma^2_{h+1}
        Vector logits = mean / s2;
        logits.array() -= logits.maxCoeff();
        Vector p = logits.array().exp();
        p /= p.sum();
        const double u = stream.uniform();
        double acc = 0.0;
        draw.label = static_cast<int>(p.size()) - 1;
        for (Eigen::Index c = 0; c < p.size(); ++c) {
            acc += p[c];
            if (u < acc) {
                draw.label = static_cast<int>(c);
                break;
            }
        }
        draw.output = p;
    }
    return draw;
}

bool NoiseReport::has_warning() const {
    if (!monotone_ok) return true;
    for (double s : calibration)
        if (s >= 1.0) return true;
    return false;
}

std::vector<std::string> NoiseReport::warnings() const {
    std::vector<std::string> out;
    if (!monotone_ok) out.emplace_back("noise variances are not non-decreasing across layers");
    for (std::size_t k = 0; k < calibration.size(); ++k) {
        if (calibration[k] >= 1.0) {
            std::ostringstream os;
            os << "layer " << k + 1 << " noise calibration score " << calibration[k] << " >= 1";
            out.push_back(os.str());
        }
    }
    return out;
}

NoiseReport validate_noise_schedule(const NetworkSpec& spec) {
    spec.validate();
    const int h = spec.hidden_layers();
    const auto& d = spec.widths;
    NoiseReport report;
    for (int k = 1; k <= h; ++k) {
        double a = static_cast<double>(d[h + 1]) * static_cast<double>(d[k]);
        for (int i = k + 1; i <= h; ++i) a *= static_cast<double>(d[i]) * static_cast<double>(d[i]);
        report.amplification.push_back(a);
        report.calibration.push_back(a * spec.noise_vars[k - 1] * h);
    }
    for (std::size_t i = 1; i < spec.noise_vars.size(); ++i)
        if (spec.noise_vars[i] < spec.noise_vars[i - 1]) report.monotone_ok = false;
    return report;
}

}  // namespace stonet
