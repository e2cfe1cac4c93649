#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace kbco {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Elementwise std::exp. Eigen's vectorised exp clamps its argument, so
// exp(-inf) comes out as a denormal instead of 0.
template <typename Derived>
Vector exp_exact(const Eigen::ArrayBase<Derived>& a) {
    return a.unaryExpr([](double v) { return std::exp(v); }).matrix();
}
using Rng = std::mt19937_64;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Singular or non-PSD covariance, empty interior, ellipsoid-mode facet requests.
class DegenerateGeometryError : public Error {
public:
    using Error::Error;
};

// No strictly feasible point in a focus region; aborts a run.
class InfeasibleRegionError : public Error {
public:
    using Error::Error;
};

// Kp(x_t) == 0 for a played point.
class EstimatorUndefinedError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace kbco
