#pragma once

#include "stonet/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace stonet {

struct FeatureProvenance {
    std::uint64_t seed = 0;
    std::string spec_hash;
    int sweeps_averaged = 0;
};

/// Sufficient predictors: one row per observation, q = d_h columns.
struct SdrFeatures {
    Matrix values;  // n x q
    FeatureProvenance source;
};

/// Average of the retained last-hidden-layer latents (each d_h x n), returned
/// with observations in rows.
SdrFeatures extract_features(const std::vector<Matrix>& retained_latents, const NetworkSpec& spec,
                             std::uint64_t seed = 0);

/// Deterministic projection Y~_h of new inputs (rows of `x`), used when the
/// response is unavailable.
Matrix project_features(const NetworkSpec& spec, const Theta& theta, const Matrix& x);

/// Biased sample distance correlation between row-aligned samples.
double distance_correlation(const Matrix& a, const Matrix& b);

struct DependenceResult {
    double dcor = 0.0;
    double p_value = 1.0;
    int n_permutations = 0;
};

/// Permutation test of independence: rows of `b` are permuted and
/// p = (1 + #{dcor_perm >= dcor_obs}) / (1 + n_permutations).
DependenceResult permutation_test(const Matrix& a, const Matrix& b, int n_permutations,
                                  RngStream& stream);

}  // namespace stonet
