#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

namespace stonet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Seeded random stream. A stream is identified by (seed, stream_id); two
/// streams with the same identity replay the same sequence, and distinct
/// stream ids give unrelated substreams of one seed.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    /// Child stream whose identity depends only on this stream's identity
    /// and `child`, not on how many draws have been taken here.
    RngStream substream(std::uint64_t child) const;

    double normal();
    double uniform();  // [0, 1)
    double gamma(double shape);
    std::uint64_t uniform_index(std::uint64_t n);  // [0, n)
    std::vector<std::size_t> permutation(std::size_t n);

    /// rows x cols matrix of i.i.d. standard normals, filled column-major.
    Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols);

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

std::uint64_t mix64(std::uint64_t x) noexcept;

Vector sample_gaussian_vec(RngStream& stream, Eigen::Index dim, double sigma);

/// Draw from the density proportional to exp(-(|x| / scale)^shape).
double sample_generalized_gaussian(RngStream& stream, double scale, double shape);

struct StandardizationStats {
    Vector means;
    Vector std_devs;

    Matrix apply(const Matrix& x) const;
    Matrix invert(const Matrix& z) const;
};

struct Standardized {
    Matrix values;
    StandardizationStats stats;
};

/// Column-wise z-scores with the population (divide-by-n) variance. Constant
/// columns map to zero and record a standard deviation of 1.
Standardized standardize_columns(const Matrix& x);

struct SymEig {
    Vector values;   // descending
    Matrix vectors;  // columns orthonormal, aligned with values
};

SymEig sym_eig(const Matrix& a);

}  // namespace stonet
