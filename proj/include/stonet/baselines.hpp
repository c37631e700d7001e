#pragma once

#include "stonet/numerics.hpp"

#include <string>
#include <vector>

namespace stonet {

enum class ReducerMethod { pca, sir };

std::string to_string(ReducerMethod m);
ReducerMethod parse_reducer_method(const std::string& s);

/// Linear dimension reduction x -> B^T (x - center).
struct LinearReducer {
    ReducerMethod method = ReducerMethod::pca;
    Matrix projection;    // p x q, orthonormal columns
    Vector center;        // p
    Matrix whitener;      // p x p covariance^{-1/2} (SIR only)
    bool whitened = false;
    Vector eigenvalues;   // spectrum of the fitted kernel matrix, descending
    double ridge = 0.0;   // jitter added to a singular covariance before whitening
};

/// Top-q eigenvectors of the (population) sample covariance.
LinearReducer pca_fit(const Matrix& x, int q);

enum class SliceMode { quantile, categorical };

/// Sliced inverse regression. Continuous responses are cut into n_slices
/// equal-count slices by rank; categorical responses get one slice per class.
/// The top-q eigenvectors of sum_h p_h m_h m_h^T (slice means of the whitened
/// predictors) are mapped back through the whitener and orthonormalized.
LinearReducer sir_fit(const Matrix& x, const Vector& y, int q, int n_slices = 10,
                      SliceMode mode = SliceMode::quantile);

/// (x - center) * projection. The projection is expressed in the original
/// coordinates for both methods, so no whitening is applied here.
Matrix transform(const LinearReducer& reducer, const Matrix& x);

}  // namespace stonet
