#pragma once

#include "stonet/likelihood.hpp"
#include "stonet/numerics.hpp"

#include <optional>
#include <string>
#include <vector>

namespace stonet {

enum class HeadKind { linear, logistic };

std::string to_string(HeadKind k);
HeadKind parse_head_kind(const std::string& s);

struct FitMeta {
    int iterations = 0;
    double objective = 0.0;
    bool converged = true;
    double ridge = 0.0;                   // jitter used for rank-deficient designs
    std::vector<double> objective_trace;  // logistic only
};

/// Downstream predictor on reduced features. `weights` is (q+1) x outputs
/// with the intercept in the last row. For the logistic head the outputs are
/// the C classes and the last column is pinned at zero.
struct HeadModel {
    HeadKind kind = HeadKind::linear;
    Matrix weights;
    FitMeta meta;
};

/// Least squares of y (n x d) on [z, 1] through a column-pivoted QR; a
/// rank-deficient design falls back to a small ridge.
HeadModel fit_linear(const Matrix& z, const Matrix& y);

struct LogisticOptions {
    int max_iter = 100;
    double tol = 1e-8;
    double l2 = 1e-4;  // on non-intercept weights
};

/// Multinomial logistic regression by damped Newton iterations. The
/// objective is the mean negative log-likelihood plus (l2/2)||W||^2 over
/// non-intercept weights.
HeadModel fit_logistic(const Matrix& z, const std::vector<int>& labels, int classes,
                       const LogisticOptions& options = {});

double logistic_objective(const HeadModel& head, const Matrix& z, const std::vector<int>& labels,
                          double l2);

/// Regression predictions (n x d) or class probabilities (n x C).
Matrix predict(const HeadModel& head, const Matrix& z);
std::vector<int> predict_labels(const HeadModel& head, const Matrix& z);

struct Metrics {
    std::optional<double> misclassification_rate;
    std::optional<double> mse;
    std::optional<double> pearson_r;
    bool pearson_undefined = false;  // constant predictions or responses
};

/// Pearson correlation, or nullopt when either side is constant.
std::optional<double> pearson(const Vector& a, const Vector& b);

/// Targets follow the column-per-observation layout of Targets.
Metrics evaluate(const HeadModel& head, const Matrix& z_test, const Targets& y_test);

}  // namespace stonet
