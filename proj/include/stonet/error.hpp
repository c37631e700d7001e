#pragma once

#include <stdexcept>
#include <string>

namespace stonet {

/// Bad shapes, out-of-range hyperparameters and similar caller mistakes.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An operation was called on an object that is not ready for it.
class InvalidState : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Statistic is undefined for the supplied data (constant columns, too few rows).
class DegenerateInput : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A sampler or parameter update produced a non-finite value.
class Divergence : public std::runtime_error {
public:
    Divergence(const std::string& what, long iteration, int layer)
        : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ", layer " +
                             std::to_string(layer) + ")"),
          iteration_(iteration),
          layer_(layer) {}

    long iteration() const noexcept { return iteration_; }
    int layer() const noexcept { return layer_; }

private:
    long iteration_;
    int layer_;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace stonet
