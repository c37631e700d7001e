#include "stonet/sdr.hpp"

#include "stonet/error.hpp"
#include "stonet/serialize.hpp"

#include <cmath>
#include <numeric>

namespace stonet {

SdrFeatures extract_features(const std::vector<Matrix>& retained_latents, const NetworkSpec& spec,
                             std::uint64_t seed) {
    if (retained_latents.empty())
        throw InvalidState("extract_features: no retained latents; run the SDR stage first");
    const Eigen::Index q = spec.feature_dim();
    const Eigen::Index n = retained_latents.front().cols();
    Matrix sum = Matrix::Zero(q, n);
    for (const auto& m : retained_latents) {
        if (m.rows() != q || m.cols() != n)
            throw InvalidState("extract_features: retained latents have inconsistent shapes");
        sum += m;
    }
    SdrFeatures out;
    out.values = (sum / static_cast<double>(retained_latents.size())).transpose();
    out.source.seed = seed;
    out.source.spec_hash = spec_fingerprint(spec);
    out.source.sweeps_averaged = static_cast<int>(retained_latents.size());
    return out;
}

Matrix project_features(const NetworkSpec& spec, const Theta& theta, const Matrix& x) {
    return forward_dnn_batch(spec, theta, x.transpose()).pre_activations.back().transpose();
}

namespace {

/// Double-centered Euclidean distance matrix of the rows of `x`.
Matrix centered_distances(const Matrix& x) {
    const Eigen::Index n = x.rows();
    Matrix d(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        d(j, j) = 0.0;
        for (Eigen::Index k = j + 1; k < n; ++k) {
            const double v = (x.row(j) - x.row(k)).norm();
            d(j, k) = v;
            d(k, j) = v;
        }
    }
    const Vector row_mean = d.rowwise().mean();
    const double grand = row_mean.mean();
    d.colwise() -= row_mean;
    d.rowwise() -= row_mean.transpose();
    d.array() += grand;
    return d;
}

struct CenteredPair {
    Matrix a;
    Matrix b;
    double denom;  // sqrt(dVar^2(A) dVar^2(B))
};

CenteredPair prepare(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw InvalidArgument("distance_correlation: row counts differ");
    if (a.rows() < 4) throw DegenerateInput("distance_correlation: need at least 4 observations");
    CenteredPair p{centered_distances(a), centered_distances(b), 0.0};
    const double va = p.a.squaredNorm();
    const double vb = p.b.squaredNorm();
    if (!(va > 0.0) || !(vb > 0.0))
        throw DegenerateInput("distance_correlation: constant input has zero distance variance");
    p.denom = std::sqrt(va * vb);
    return p;
}

/// sum_{j,k} A_jk B_{pi(j) pi(k)}
double permuted_cross(const Matrix& a, const Matrix& b, const std::vector<std::size_t>& perm) {
    const auto n = static_cast<Eigen::Index>(perm.size());
    double s = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto pk = static_cast<Eigen::Index>(perm[static_cast<std::size_t>(k)]);
        const double* acol = a.col(k).data();
        const double* bcol = b.col(pk).data();
        for (Eigen::Index j = 0; j < n; ++j) s += acol[j] * bcol[perm[static_cast<std::size_t>(j)]];
    }
    return s;
}

double to_dcor(double cross, double denom) {
    const double r2 = std::max(0.0, cross) / denom;
    return std::min(1.0, std::sqrt(r2));
}

}  // namespace

double distance_correlation(const Matrix& a, const Matrix& b) {
    const CenteredPair p = prepare(a, b);
    return to_dcor(p.a.cwiseProduct(p.b).sum(), p.denom);
}

DependenceResult permutation_test(const Matrix& a, const Matrix& b, int n_permutations,
                                  RngStream& stream) {
    if (n_permutations < 99) throw InvalidArgument("permutation_test: need at least 99 permutations");
    const CenteredPair p = prepare(a, b);
    std::vector<std::size_t> identity(static_cast<std::size_t>(a.rows()));
    std::iota(identity.begin(), identity.end(), std::size_t{0});
    const double observed = permuted_cross(p.a, p.b, identity);
    int exceed = 0;
    for (int r = 0; r < n_permutations; ++r) {
        const auto perm = stream.permutation(identity.size());
        if (permuted_cross(p.a, p.b, perm) >= observed) ++exceed;
    }
    DependenceResult out;
    out.dcor = to_dcor(observed, p.denom);
    out.p_value = (1.0 + exceed) / (1.0 + n_permutations);
    out.n_permutations = n_permutations;
    return out;
}

}  // namespace stonet
