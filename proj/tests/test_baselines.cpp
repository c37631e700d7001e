#include "stonet/baselines.hpp"
#include "stonet/error.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace stonet;

TEST(Pca, PointsOnALine) {
    Matrix x(5, 2);
    for (int i = 0; i < 5; ++i) x.row(i) << i - 2.0, 2.0 * (i - 2.0);
    const LinearReducer r = pca_fit(x, 1);
    EXPECT_NEAR(r.projection(0, 0), 1.0 / std::sqrt(5.0), 1e-12);
    EXPECT_NEAR(r.projection(1, 0), 2.0 / std::sqrt(5.0), 1e-12);
    EXPECT_NEAR(r.eigenvalues[1], 0.0, 1e-12);
}

TEST(Pca, IsotropicCloudHasFlatSpectrum) {
    RngStream s(1);
    const int p = 5;
    const LinearReducer r = pca_fit(s.normal_matrix(10000, p), 2);
    const double total = r.eigenvalues.sum();
    for (int k = 0; k < p; ++k) EXPECT_NEAR(r.eigenvalues[k] / total, 1.0 / p, 0.02);
}

TEST(Pca, FullRankPreservesDistances) {
    RngStream s(2);
    const Matrix x = s.normal_matrix(30, 4) * 2.0;
    const LinearReducer r = pca_fit(x, 4);
    const Matrix z = transform(r, x);
    const Matrix back = z * r.projection.transpose();
    const Matrix centered = x.rowwise() - r.center.transpose();
    EXPECT_LT((back - centered).norm(), 1e-10);
    for (int i = 0; i < 30; ++i)
        for (int j = i + 1; j < 30; ++j)
            EXPECT_NEAR((z.row(i) - z.row(j)).norm(), (x.row(i) - x.row(j)).norm(), 1e-10);
}

TEST(Pca, ValidatesArguments) {
    RngStream s(3);
    EXPECT_THROW(pca_fit(s.normal_matrix(10, 3), 0), InvalidArgument);
    EXPECT_THROW(pca_fit(s.normal_matrix(10, 3), 4), InvalidArgument);
    EXPECT_THROW(pca_fit(s.normal_matrix(1, 3), 1), InvalidArgument);
    EXPECT_THROW(parse_reducer_method("ica"), InvalidArgument);
}

TEST(Transform, MeanRowMapsToOrigin) {
    RngStream s(4);
    const Matrix x = s.normal_matrix(50, 3);
    const LinearReducer r = pca_fit(x, 2);
    const Matrix mean = x.colwise().mean();
    EXPECT_LT(transform(r, mean).norm(), 1e-13);
    EXPECT_THROW(transform(r, Matrix::Zero(2, 4)), InvalidArgument);
}

TEST(Transform, HandComputedProjection) {
    LinearReducer r;
    r.center = Vector::Zero(2);
    r.center << 1.0, 2.0;
    r.projection = Matrix::Zero(2, 1);
    r.projection << 0.6, 0.8;
    Matrix x(3, 2);
    x << 1, 2, 2, 2, 1, 3;
    const Matrix z = transform(r, x);
    EXPECT_NEAR(z(0, 0), 0.0, 1e-15);
    EXPECT_NEAR(z(1, 0), 0.6, 1e-15);
    EXPECT_NEAR(z(2, 0), 0.8, 1e-15);
}

namespace {

double sir_cosine(std::uint64_t seed) {
    RngStream s(seed);
    const int n = 2000, p = 10;
    const Matrix x = s.normal_matrix(n, p);
    Vector y(n);
    for (int i = 0; i < n; ++i) y[i] = x(i, 0) + 0.5 * std::pow(x(i, 0), 3) + 0.1 * s.normal();
    const LinearReducer r = sir_fit(x, y, 1);
    return std::abs(r.projection(0, 0)) / r.projection.col(0).norm();
}

}  // namespace

TEST(Sir, RecoversSingleIndexDirection) {
    EXPECT_GT(sir_cosine(5), 0.95);
    EXPECT_GT(sir_cosine(6), 0.95);
}

TEST(Sir, NullEigenvalueBelowPermutationPercentile) {
    RngStream s(7);
    const int n = 500, p = 5;
    const Matrix x = s.normal_matrix(n, p);
    Vector y(n);
    for (int i = 0; i < n; ++i) y[i] = 2.0 * x(i, 0) + 0.3 * s.normal();
    const LinearReducer fit = sir_fit(x, y, 1);
    // second eigenvalue against the top eigenvalue under response permutation
    std::vector<double> null_top;
    for (int r = 0; r < 99; ++r) {
        const auto perm = s.permutation(static_cast<std::size_t>(n));
        Vector yp(n);
        for (int i = 0; i < n; ++i) yp[i] = y[static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)])];
        null_top.push_back(sir_fit(x, yp, 1).eigenvalues[0]);
    }
    std::sort(null_top.begin(), null_top.end());
    const double p95 = null_top[94];
    EXPECT_GT(fit.eigenvalues[0], p95);
    EXPECT_LT(fit.eigenvalues[1], p95);
}

TEST(Sir, TwoClassesGiveTheDiscriminantDirection) {
    RngStream s(8);
    const int n = 400, p = 3;
    Matrix x = s.normal_matrix(n, p);
    Vector y(n);
    for (int i = 0; i < n; ++i) {
        y[i] = i % 2;
        if (i % 2) x.row(i) += Eigen::RowVector3d(1.0, -0.5, 0.2);
    }
    x.col(1) += 0.7 * x.col(0);  // correlated predictors
    const LinearReducer r = sir_fit(x, y, 1, 2, SliceMode::categorical);

    // oracle: Sigma^{-1} (mu_1 - mu_0) with the population covariance
    Vector mu0 = Vector::Zero(p), mu1 = Vector::Zero(p);
    for (int i = 0; i < n; ++i) (i % 2 ? mu1 : mu0) += x.row(i).transpose();
    mu0 /= n / 2;
    mu1 /= n / 2;
    const Matrix c = x.rowwise() - x.colwise().mean();
    const Matrix sigma = c.transpose() * c / n;
    Vector dir = sigma.ldlt().solve(mu1 - mu0);
    dir.normalize();
    EXPECT_NEAR(std::abs(dir.dot(r.projection.col(0))), 1.0, 1e-10);

    // quantile slicing with two slices on a 0/1 response cuts at the same place
    const LinearReducer rq = sir_fit(x, y, 1, 2, SliceMode::quantile);
    EXPECT_NEAR(std::abs(rq.projection.col(0).dot(r.projection.col(0))), 1.0, 1e-10);
}

TEST(Sir, SingularCovarianceGetsRidge) {
    RngStream s(9);
    Matrix x = s.normal_matrix(100, 3);
    x.col(2) = x.col(0);
    Vector y = x.col(0) + 0.1 * s.normal_matrix(100, 1).col(0);
    const LinearReducer r = sir_fit(x, y, 1);
    EXPECT_GT(r.ridge, 0.0);
    EXPECT_TRUE(r.projection.allFinite());
    EXPECT_THROW(sir_fit(Matrix::Ones(10, 2), Vector::Zero(10), 1), DegenerateInput);
}
