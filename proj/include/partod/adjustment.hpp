#pragma once

#include <string>
#include <vector>

#include "partod/assignment.hpp"
#include "partod/demand.hpp"

namespace partod {

struct AdjustmentConfig {
    int max_iterations = 50;
    double tolerance = 1e-4;   // relative objective decrease per iteration
    int max_halvings = 30;
    double stationarity = 1e-9;  // projected-gradient norm scale for early exit
    double prior_weight = 1.0;
    double flow_weight = 1.0;
    FrankWolfeConfig fw;  // inner user-equilibrium solves (track_usage forced on)
};

struct AdjustmentTracePoint {
    int iteration = 0;
    double objective = 0.0;
    double gradient_norm = 0.0;
    double step = 0.0;
};

struct AdjustmentResult {
    ODMatrix adjusted;
    double objective = 0.0;
    std::vector<AdjustmentTracePoint> trace;  // objective strictly decreasing
    bool converged = false;
    std::string diagnostic;
    int ue_solves = 0;
};

/// Upper-level objective: sum (g - g0)^2 + sum (x_a(g) - observed_a)^2, with
/// x(g) the user-equilibrium flows at the configured gap. The solved
/// equilibrium is returned through `ue` when given.
double evaluate_objective(const ODMatrix& demand, const ODMatrix& prior,
                          const std::vector<double>& observed_flows,
                          const RoadNetwork& network, const AdjustmentConfig& config,
                          EquilibriumSolution* ue = nullptr,
                          const std::vector<double>* warm_start_times = nullptr);

/// Gradient with equilibrium route proportions held fixed:
/// dF/dg_i = 2(g_i - g0_i) + sum_a 2 (x_a - observed_a) * usage_i(a).
std::vector<double> adjustment_gradient(const ODMatrix& demand, const ODMatrix& prior,
                                        const std::vector<double>& observed_flows,
                                        const EquilibriumSolution& ue,
                                        const AdjustmentConfig& config);

/// Projected-gradient descent with backtracking; non-convergence (iteration
/// cap or no descent step) is reported through the converged flag, not as an
/// error.
AdjustmentResult adjust(const ODMatrix& prior, const std::vector<double>& observed_flows,
                        const RoadNetwork& network, const AdjustmentConfig& config);

void write_adjust_trace_csv(const AdjustmentResult& result, const std::string& path);

} // namespace partod
