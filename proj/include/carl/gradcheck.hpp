#pragma once

#include <functional>
#include <span>
#include <vector>

namespace carl {

/// Central-difference gradient of a scalar function of a flat parameter vector:
/// (f(θ + h·e_i) − f(θ − h·e_i)) / 2h for every coordinate. Only calls `f`;
/// never touches a Tape, so it is independent of every backward rule.
std::vector<double> finite_difference_gradient(const std::function<double(std::span<const double>)>& f,
                                               std::span<const double> theta, double h = 1e-5);

/// ‖a − b‖₂ / max(‖a‖₂, ‖b‖₂, floor).
double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-8);

}  // namespace carl
