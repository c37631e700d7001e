#include "stonet/baselines.hpp"

#include "stonet/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace stonet {

std::string to_string(ReducerMethod m) { return m == ReducerMethod::pca ? "pca" : "sir"; }

ReducerMethod parse_reducer_method(const std::string& s) {
    if (s == "pca") return ReducerMethod::pca;
    if (s == "sir") return ReducerMethod::sir;
    throw InvalidArgument("unknown reducer '" + s + "'");
}

namespace {

void check_fit_args(const Matrix& x, int q) {
    if (x.rows() < 2) throw InvalidArgument("reducer fit: need at least 2 observations");
    if (q < 1 || q > x.cols())
        throw InvalidArgument("reducer fit: q must be in [1, p], got " + std::to_string(q));
}

Matrix covariance(const Matrix& centered) {
    const Matrix c = centered.transpose() * centered / static_cast<double>(centered.rows());
    return 0.5 * (c + c.transpose());
}

/// Orthonormal basis of span(m) with a deterministic sign (largest-magnitude
/// entry of each column positive).
Matrix orthonormalize(const Matrix& m) {
    Eigen::HouseholderQR<Matrix> qr(m);
    Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
    for (Eigen::Index c = 0; c < q.cols(); ++c) {
        Eigen::Index arg = 0;
        q.col(c).cwiseAbs().maxCoeff(&arg);
        if (q(arg, c) < 0.0) q.col(c) *= -1.0;
    }
    return q;
}

}  // namespace

LinearReducer pca_fit(const Matrix& x, int q) {
    check_fit_args(x, q);
    LinearReducer r;
    r.method = ReducerMethod::pca;
    r.center = x.colwise().mean().transpose();
    const Matrix centered = x.rowwise() - r.center.transpose();
    const SymEig eig = sym_eig(covariance(centered));
    r.eigenvalues = eig.values;
    r.projection = eig.vectors.leftCols(q);
    for (Eigen::Index c = 0; c < r.projection.cols(); ++c) {
        Eigen::Index arg = 0;
        r.projection.col(c).cwiseAbs().maxCoeff(&arg);
        if (r.projection(arg, c) < 0.0) r.projection.col(c) *= -1.0;
    }
    r.whitener = Matrix::Identity(x.cols(), x.cols());
    return r;
}

LinearReducer sir_fit(const Matrix& x, const Vector& y, int q, int n_slices, SliceMode mode) {
    check_fit_args(x, q);
    if (y.size() != x.rows()) throw InvalidArgument("sir_fit: response length mismatch");
    if (mode == SliceMode::quantile && n_slices < 2)
        throw InvalidArgument("sir_fit: need at least 2 slices");
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();

    LinearReducer r;
    r.method = ReducerMethod::sir;
    r.whitened = true;
    r.center = x.colwise().mean().transpose();
    const Matrix centered = x.rowwise() - r.center.transpose();
    Matrix cov = covariance(centered);
    SymEig eig = sym_eig(cov);
    const double trace = cov.trace();
    if (!(eig.values[p - 1] > 1e-10 * std::max(eig.values[0], 1e-300))) {
        r.ridge = 1e-8 * trace / static_cast<double>(p);
        if (!(r.ridge > 0.0)) throw DegenerateInput("sir_fit: predictors have zero variance");
        cov.diagonal().array() += r.ridge;
        eig = sym_eig(cov);
    }
    r.whitener = eig.vectors * eig.values.cwiseSqrt().cwiseInverse().asDiagonal() *
                 eig.vectors.transpose();
    const Matrix z = centered * r.whitener;

    // slice membership
    std::vector<std::vector<Eigen::Index>> slices;
    if (mode == SliceMode::categorical) {
        std::map<double, std::vector<Eigen::Index>> groups;
        for (Eigen::Index i = 0; i < n; ++i) groups[y[i]].push_back(i);
        for (auto& [_, members] : groups) slices.push_back(std::move(members));
    } else {
        std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](Eigen::Index a, Eigen::Index b) { return y[a] < y[b]; });
        const Eigen::Index h = std::min<Eigen::Index>(n_slices, n);
        for (Eigen::Index s = 0; s < h; ++s) {
            const auto lo = static_cast<std::size_t>(s * n / h);
            const auto hi = static_cast<std::size_t>((s + 1) * n / h);
            slices.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                order.begin() + static_cast<std::ptrdiff_t>(hi));
        }
    }

    Matrix kernel = Matrix::Zero(p, p);
    for (const auto& members : slices) {
        if (members.empty()) continue;
        Vector mean = Vector::Zero(p);
        for (auto i : members) mean += z.row(i).transpose();
        mean /= static_cast<double>(members.size());
        kernel += (static_cast<double>(members.size()) / static_cast<double>(n)) * mean * mean.transpose();
    }
    const SymEig k_eig = sym_eig(0.5 * (kernel + kernel.transpose()));
    r.eigenvalues = k_eig.values;
    r.projection = orthonormalize(r.whitener * k_eig.vectors.leftCols(q));
    return r;
}

Matrix transform(const LinearReducer& reducer, const Matrix& x) {
    if (x.cols() != reducer.center.size())
        throw InvalidArgument("transform: expected " + std::to_string(reducer.center.size()) +
                              " columns, got " + std::to_string(x.cols()));
    return (x.rowwise() - reducer.center.transpose()) * reducer.projection;
}

}  // namespace stonet
