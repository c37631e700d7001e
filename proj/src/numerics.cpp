#include "stonet/numerics.hpp"

#include "stonet/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace stonet {

std::uint64_t mix64(std::uint64_t x) noexcept {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id),
                      static_cast<std::uint32_t>(stream_id >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(make_engine(seed, stream_id)) {}

RngStream RngStream::substream(std::uint64_t child) const {
    return RngStream(seed_, mix64(stream_id_ ^ mix64(child + 0x51ed27ULL)));
}

double RngStream::normal() { return normal_(engine_); }

double RngStream::uniform() { return uniform_(engine_); }

double RngStream::gamma(double shape) {
    std::gamma_distribution<double> dist(shape, 1.0);
    return dist(engine_);
}

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
    std::uniform_int_distribution<std::uint64_t> dist(0, n - 1);
    return dist(engine_);
}

std::vector<std::size_t> RngStream::permutation(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // Explicit Fisher-Yates; std::shuffle's draw pattern is implementation-defined.
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_index(i));
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

Matrix RngStream::normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    double* data = m.data();
    for (Eigen::Index i = 0; i < m.size(); ++i) data[i] = normal_(engine_);
    return m;
}

Vector sample_gaussian_vec(RngStream& stream, Eigen::Index dim, double sigma) {
    if (dim < 1) throw InvalidArgument("sample_gaussian_vec: dim must be >= 1");
    if (!(sigma > 0.0)) throw InvalidArgument("sample_gaussian_vec: sigma must be positive");
    Vector v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = sigma * stream.normal();
    return v;
}

double sample_generalized_gaussian(RngStream& stream, double scale, double shape) {
    if (!(scale > 0.0) || !(shape > 0.0))
        throw InvalidArgument("sample_generalized_gaussian: scale and shape must be positive");
    // |X| / scale = G^(1/shape), G ~ Gamma(1/shape, 1)
    const double g = stream.gamma(1.0 / shape);
    const double magnitude = scale * std::pow(g, 1.0 / shape);
    return stream.uniform() < 0.5 ? -magnitude : magnitude;
}

Matrix StandardizationStats::apply(const Matrix& x) const {
    if (x.cols() != means.size())
        throw InvalidArgument("standardization: column count mismatch");
    return (x.rowwise() - means.transpose()).array().rowwise() / std_devs.transpose().array();
}

Matrix StandardizationStats::invert(const Matrix& z) const {
    if (z.cols() != means.size())
        throw InvalidArgument("standardization: column count mismatch");
    return (z.array().rowwise() * std_devs.transpose().array()).matrix().rowwise() +
           means.transpose();
}

Standardized standardize_columns(const Matrix& x) {
    if (x.rows() < 2) throw InvalidArgument("standardize_columns: need at least 2 rows");
    StandardizationStats stats;
    stats.means = x.colwise().mean().transpose();
    stats.std_devs.resize(x.cols());
    const auto n = static_cast<double>(x.rows());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double var = (x.col(j).array() - stats.means[j]).square().sum() / n;
        const double sd = std::sqrt(var);
        // Tolerate round-off on constant columns.
        const double floor = 1e-12 * std::max(1.0, std::abs(stats.means[j]));
        stats.std_devs[j] = sd > floor ? sd : 1.0;
    }
    Matrix z = stats.apply(x);
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        if (stats.std_devs[j] == 1.0 && (x.col(j).array() == x(0, j)).all()) z.col(j).setZero();
    return {std::move(z), std::move(stats)};
}

SymEig sym_eig(const Matrix& a) {
    if (a.rows() != a.cols()) throw InvalidArgument("sym_eig: matrix must be square");
    if (((a - a.transpose()).cwiseAbs().array() > 1e-10).any())
        throw InvalidArgument("sym_eig: matrix is not symmetric");
    const Matrix sym = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
    if (solver.info() != Eigen::Success) throw InvalidArgument("sym_eig: eigensolver failed");
    // Eigen returns ascending order.
    const Eigen::Index m = a.rows();
    SymEig out{Vector(m), Matrix(m, m)};
    for (Eigen::Index i = 0; i < m; ++i) {
        out.values[i] = solver.eigenvalues()[m - 1 - i];
        out.vectors.col(i) = solver.eigenvectors().col(m - 1 - i);
    }
    return out;
}

}  // namespace stonet
