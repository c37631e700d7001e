#include "stonet/error.hpp"
#include "stonet/sdr.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace stonet;

namespace {

NetworkSpec small_spec() {
    NetworkSpec s;
    s.widths = {3, 4, 2, 1};
    s.noise_vars = {1e-3, 1e-3, 1e-2};
    return s;
}

/// dCor by the textbook formula with explicit row, column and grand means.
double naive_dcor(const Matrix& a, const Matrix& b) {
    const Eigen::Index n = a.rows();
    auto centred = [n](const Matrix& m) {
        Matrix d(n, n);
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index k = 0; k < n; ++k) d(j, k) = (m.row(j) - m.row(k)).norm();
        Matrix out(n, n);
        double grand = 0.0;
        std::vector<double> row(static_cast<std::size_t>(n), 0.0), col(static_cast<std::size_t>(n), 0.0);
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index k = 0; k < n; ++k) {
                row[static_cast<std::size_t>(j)] += d(j, k) / n;
                col[static_cast<std::size_t>(k)] += d(j, k) / n;
                grand += d(j, k) / (n * n);
            }
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index k = 0; k < n; ++k)
                out(j, k) = d(j, k) - row[static_cast<std::size_t>(j)] - col[static_cast<std::size_t>(k)] + grand;
        return out;
    };
    const Matrix ca = centred(a), cb = centred(b);
    double vab = 0, vaa = 0, vbb = 0;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < n; ++k) {
            vab += ca(j, k) * cb(j, k);
            vaa += ca(j, k) * ca(j, k);
            vbb += cb(j, k) * cb(j, k);
        }
    return std::sqrt(std::max(0.0, vab) / std::sqrt(vaa * vbb));
}

}  // namespace

TEST(ExtractFeatures, SingleSweepIsTheSweep) {
    RngStream r(1);
    const Matrix last = r.normal_matrix(2, 7);
    const SdrFeatures f = extract_features({last}, small_spec(), 9);
    EXPECT_EQ(f.values.rows(), 7);
    EXPECT_EQ(f.values.cols(), 2);
    EXPECT_EQ(f.values, Matrix(last.transpose()));
    EXPECT_EQ(f.source.seed, 9u);
    EXPECT_EQ(f.source.sweeps_averaged, 1);
    EXPECT_EQ(f.source.spec_hash.size(), 64u);
}

TEST(ExtractFeatures, AveragesSweeps) {
    RngStream r(2);
    std::vector<Matrix> sweeps;
    Matrix manual = Matrix::Zero(2, 11);
    for (int k = 0; k < 5; ++k) {
        sweeps.push_back(r.normal_matrix(2, 11));
        manual += sweeps.back();
    }
    manual /= 5.0;
    const SdrFeatures f = extract_features(sweeps, small_spec());
    EXPECT_LT((f.values - manual.transpose()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ExtractFeatures, Rejections) {
    EXPECT_THROW(extract_features({}, small_spec()), InvalidState);
    RngStream r(3);
    EXPECT_THROW(extract_features({r.normal_matrix(2, 4), r.normal_matrix(2, 5)}, small_spec()),
                 InvalidState);
    EXPECT_THROW(extract_features({r.normal_matrix(3, 4)}, small_spec()), InvalidState);
}

TEST(ProjectFeatures, MatchesForwardTrace) {
    const NetworkSpec spec = small_spec();
    RngStream r(4);
    const Theta theta = init_theta(spec, r);
    const Matrix x = r.normal_matrix(6, 3);
    const Matrix z = project_features(spec, theta, x);
    ASSERT_EQ(z.rows(), 6);
    ASSERT_EQ(z.cols(), 2);
    for (Eigen::Index i = 0; i < 6; ++i) {
        const ForwardTrace t = forward_dnn(spec, theta, x.row(i).transpose());
        EXPECT_LT((z.row(i).transpose() - t.pre_activations.back()).norm(), 1e-14);
    }
}

TEST(DistanceCorrelation, SelfAndAffineAreOne) {
    RngStream r(5);
    const Matrix a = r.normal_matrix(30, 2);
    EXPECT_NEAR(distance_correlation(a, a), 1.0, 1e-12);
    Matrix b = 2.0 * a;
    b.array() += 3.0;
    EXPECT_NEAR(distance_correlation(a, b), 1.0, 1e-12);
}

TEST(DistanceCorrelation, AgreesWithTextbookFormula) {
    RngStream r(6);
    for (int rep = 0; rep < 5; ++rep) {
        const Matrix a = r.normal_matrix(25, 3);
        Matrix b = r.normal_matrix(25, 1);
        b.col(0) += a.col(0).array().square().matrix();
        EXPECT_NEAR(distance_correlation(a, b), naive_dcor(a, b), 1e-12);
    }
}

TEST(DistanceCorrelation, SymmetricBoundedPermutationInvariant) {
    RngStream r(7);
    const Matrix a = r.normal_matrix(40, 2);
    const Matrix b = r.normal_matrix(40, 3);
    const double d = distance_correlation(a, b);
    EXPECT_NEAR(d, distance_correlation(b, a), 1e-14);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
    const auto perm = r.permutation(40);
    Matrix pa(40, 2), pb(40, 3);
    for (Eigen::Index i = 0; i < 40; ++i) {
        pa.row(i) = a.row(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]));
        pb.row(i) = b.row(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]));
    }
    EXPECT_NEAR(distance_correlation(pa, pb), d, 1e-12);
}

TEST(DistanceCorrelation, DegenerateInputs) {
    RngStream r(8);
    EXPECT_THROW(distance_correlation(r.normal_matrix(3, 1), r.normal_matrix(3, 1)), DegenerateInput);
    EXPECT_THROW(distance_correlation(Matrix::Ones(10, 2), r.normal_matrix(10, 1)), DegenerateInput);
    EXPECT_THROW(distance_correlation(r.normal_matrix(10, 1), r.normal_matrix(9, 1)), InvalidArgument);
}

TEST(PermutationTest, PerfectDependenceHitsTheFloor) {
    RngStream r(9);
    const Matrix a = r.normal_matrix(50, 1);
    RngStream s(10);
    const DependenceResult res = permutation_test(a, a, 199, s);
    EXPECT_DOUBLE_EQ(res.p_value, 1.0 / 200.0);
    EXPECT_NEAR(res.dcor, 1.0, 1e-12);
    EXPECT_EQ(res.n_permutations, 199);
}

TEST(PermutationTest, DeterministicGivenStream) {
    RngStream r(11);
    const Matrix a = r.normal_matrix(30, 2), b = r.normal_matrix(30, 1);
    RngStream s1(12), s2(12);
    const auto x = permutation_test(a, b, 99, s1);
    const auto y = permutation_test(a, b, 99, s2);
    EXPECT_EQ(x.p_value, y.p_value);
    EXPECT_EQ(x.dcor, y.dcor);
    RngStream s3(1);
    EXPECT_THROW(permutation_test(a, b, 50, s3), InvalidArgument);
}

TEST(PermutationTest, SizeIsCalibratedUnderIndependence) {
    const int replicates = 200;
    RngStream data(13), perms(14);
    int rejections = 0;
    for (int rep = 0; rep < replicates; ++rep) {
        const Matrix a = data.normal_matrix(500, 1);
        const Matrix b = data.normal_matrix(500, 1);
        if (permutation_test(a, b, 99, perms).p_value < 0.05) ++rejections;
    }
    const double rate = static_cast<double>(rejections) / replicates;
    EXPECT_GE(rate, 0.02);
    EXPECT_LE(rate, 0.09);
}

TEST(PermutationTest, ShuffledCopyNullIsRoughlyUniform) {
    RngStream data(15), perms(16);
    int low = 0, high = 0;
    const int reps = 200;
    for (int rep = 0; rep < reps; ++rep) {
        const Matrix a = data.normal_matrix(60, 1);
        const auto p = data.permutation(60);
        Matrix b(60, 1);
        for (Eigen::Index i = 0; i < 60; ++i) b(i, 0) = a(static_cast<Eigen::Index>(p[static_cast<std::size_t>(i)]), 0);
        const double pv = permutation_test(a, b, 99, perms).p_value;
        low += pv < 0.5;
        high += pv >= 0.5;
    }
    // each half has expectation 100 with sd about 7
    EXPECT_GT(low, 70);
    EXPECT_GT(high, 70);
}
