// Shared oracles for the unit and acceptance tests.
#pragma once

#include "stonet/likelihood.hpp"
#include "stonet/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace stonet::testing {

/// log pi(Y_i | Y_{i-1}) + log pi(Y_{i+1} | Y_i) assembled from the
/// single-layer densities: the terms of the joint that involve Y_i.
inline double local_log_density(const NetworkSpec& spec, const Theta& theta, const Vector& x,
                                const std::vector<Vector>& latents, const Response& y, int i) {
    const int h = spec.hidden_layers();
    const auto idx = static_cast<std::size_t>(i - 1);
    const Vector& prev = i == 1 ? x : latents[idx - 1];
    double v = layer_log_density(spec.activation, theta.layers[idx], prev, latents[idx],
                                 spec.noise_vars[idx], i == 1);
    if (i < h) {
        v += layer_log_density(spec.activation, theta.layers[idx + 1], latents[idx], latents[idx + 1],
                               spec.noise_vars[idx + 1], false);
    } else {
        v += output_log_density(spec.activation, theta.layers[static_cast<std::size_t>(h)], latents[idx], y,
                                spec.noise_vars[static_cast<std::size_t>(h)], spec.task);
    }
    return v;
}

/// Central difference of f at every coordinate of `point`.
inline Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& point,
                                 double step = 1e-5) {
    Vector g(point.size());
    for (Eigen::Index k = 0; k < point.size(); ++k) {
        Vector a = point, b = point;
        a[k] += step;
        b[k] -= step;
        g[k] = (f(a) - f(b)) / (2.0 * step);
    }
    return g;
}

/// |a - b| <= rel * max(|a|, |b|) or |a - b| <= floor, coordinate-wise.
inline bool close(double a, double b, double rel, double floor) {
    const double d = std::abs(a - b);
    return d <= floor || d <= rel * std::max(std::abs(a), std::abs(b));
}

inline double worst_relative_error(const Vector& a, const Vector& b, double floor) {
    double worst = 0.0;
    for (Eigen::Index k = 0; k < a.size(); ++k) {
        const double d = std::abs(a[k] - b[k]);
        if (d <= floor) continue;
        worst = std::max(worst, d / std::max(std::abs(a[k]), std::abs(b[k])));
    }
    return worst;
}

inline Vector flatten(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

}  // namespace stonet::testing
