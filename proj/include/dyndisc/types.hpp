#pragma once

#include <functional>
#include <vector>

namespace dyndisc {

using State = std::vector<double>;

/// x ↦ f(x); the governing field of an autonomous system.
using VectorField = std::function<State(const State&)>;

/// t ↦ x(t).
using StatePath = std::function<State(double)>;

/// Scalar evaluator u : R^d → R, e.g. one component of an approximant.
using ScalarEvaluator = std::function<double(const State&)>;

}  // namespace dyndisc
