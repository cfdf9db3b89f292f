#pragma once

// Shared value types and the error hierarchy used throughout the rsc library.

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace rsc {

/// Largest state dimension supported by the fixed-capacity point type.
inline constexpr int kMaxDim = 3;
/// Largest number of regimes supported by the fixed-capacity rate matrix.
inline constexpr int kMaxRegimes = 8;

// Fixed-capacity Eigen types: no heap traffic in the simulation inner loop.
using Point = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using SquareMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;
using RateMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxRegimes, kMaxRegimes>;

using Vector = Eigen::VectorXd;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: bad arguments, broken invariants of supplied data.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A numerical procedure did not reach its target.
class NumericFailure : public Error {
public:
    using Error::Error;
};

class NotIrreducible : public NumericFailure {
public:
    explicit NotIrreducible(std::size_t unreached_row)
        : NumericFailure("operator is not irreducible: row " + std::to_string(unreached_row) +
                         " is not strongly connected to row 0"),
          row(unreached_row) {}
    std::size_t row;
};

class NoConvergence : public NumericFailure {
public:
    NoConvergence(int iterations, double last_residual)
        : NumericFailure("no convergence after " + std::to_string(iterations) +
                         " iterations (last residual " + std::to_string(last_residual) + ")"),
          iterations(iterations),
          residual(last_residual) {}
    int iterations;
    double residual;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw InvalidArgument(message);
}

inline std::vector<double> to_std(const Point& p) {
    return {p.data(), p.data() + p.size()};
}

}  // namespace rsc
