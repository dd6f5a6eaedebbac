#pragma once

#include <Eigen/Dense>

namespace saclab {

/// A discretized scalar field (grid-point values, flattened row-major for 2D).
using Field = Eigen::ArrayXd;

/// Spectral coefficients of a field in the model eigenbasis.
using Coeffs = Eigen::ArrayXd;

} // namespace saclab
