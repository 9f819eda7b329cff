#pragma once

#include <functional>

#include <Eigen/Core>

#include "partod/common.hpp"

namespace partod {

/// Euclidean projection of `v` onto the probability simplex {x >= 0, sum = 1}.
void project_simplex(Eigen::Ref<Eigen::VectorXd> v);

struct ProjectedGradientOptions {
    int max_iterations = 20000;
    double tolerance = 1e-10;   // on the projected-gradient step, relative
    double armijo = 1e-4;
    int max_backtracks = 60;
    // Stop after this many consecutive iterations whose objective decrease
    // is below progress_tolerance * (|f| + 1).
    double progress_tolerance = 1e-13;
    int max_stalled_iterations = 10;
};

struct ProjectedGradientResult {
    Eigen::VectorXd x;
    double objective = 0.0;
    int iterations = 0;
};

/// Monotone projected-gradient minimiser for smooth convex objectives with a
/// cheap projection. Uses Barzilai-Borwein steps guarded by Armijo
/// backtracking, so the objective never increases.
ProjectedGradientResult minimize_projected(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& gradient,
    const std::function<void(Eigen::VectorXd&)>& project,
    Eigen::VectorXd x0, const ProjectedGradientOptions& options = {});

} // namespace partod
