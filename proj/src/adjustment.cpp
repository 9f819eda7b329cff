#include "partod/adjustment.hpp"

#include <algorithm>
#include <cmath>

#include "partod/csv.hpp"

namespace partod {

double evaluate_objective(const ODMatrix& demand, const ODMatrix& prior,
                          const std::vector<double>& observed_flows,
                          const RoadNetwork& network, const AdjustmentConfig& config,
                          EquilibriumSolution* ue,
                          const std::vector<double>* warm_start_times) {
    require(demand.pairs.pairs == prior.pairs.pairs, ErrorCode::Precondition,
            "demand and prior cover different pair sets");
    require(observed_flows.size() == static_cast<std::size_t>(network.edge_count()),
            ErrorCode::Precondition, "observed flows must cover every edge");

    FrankWolfeConfig fw = config.fw;
    fw.track_usage = true;
    EquilibriumSolution solution = frank_wolfe(network, demand, fw, warm_start_times);

    double value = 0.0;
    for (std::size_t i = 0; i < demand.demand.size(); ++i) {
        const double d = demand.demand[i] - prior.demand[i];
        value += config.prior_weight * d * d;
    }
    for (std::size_t a = 0; a < observed_flows.size(); ++a) {
        const double d = solution.flows[a] - observed_flows[a];
        value += config.flow_weight * d * d;
    }
    require(is_finite(value), ErrorCode::Numerical, "non-finite adjustment objective");
    if (ue) *ue = std::move(solution);
    return value;
}

std::vector<double> adjustment_gradient(const ODMatrix& demand, const ODMatrix& prior,
                                        const std::vector<double>& observed_flows,
                                        const EquilibriumSolution& ue,
                                        const AdjustmentConfig& config) {
    require(ue.usage.size() == demand.pairs.pairs.size(), ErrorCode::Precondition,
            "equilibrium state lacks route-usage tracking");
    std::vector<double> grad(demand.demand.size(), 0.0);
    std::vector<double> residual(observed_flows.size());
    for (std::size_t a = 0; a < observed_flows.size(); ++a)
        residual[a] = ue.flows[a] - observed_flows[a];
    for (std::size_t i = 0; i < grad.size(); ++i) {
        double flow_term = 0.0;
        for (const auto& [a, w] : ue.usage[i].edge_weight)
            flow_term += residual[static_cast<std::size_t>(a)] * w;
        grad[i] = 2.0 * config.prior_weight * (demand.demand[i] - prior.demand[i]) +
                  2.0 * config.flow_weight * flow_term;
    }
    return grad;
}

namespace {

double projected_gradient_norm(const ODMatrix& demand, const std::vector<double>& grad) {
    double sq = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        const double g = (demand.demand[i] <= 0.0 && grad[i] > 0.0) ? 0.0 : grad[i];
        sq += g * g;
    }
    return std::sqrt(sq);
}

double norm(const std::vector<double>& v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    return std::sqrt(sq);
}

} // namespace

AdjustmentResult adjust(const ODMatrix& prior, const std::vector<double>& observed_flows,
                        const RoadNetwork& network, const AdjustmentConfig& config) {
    prior.check();
    AdjustmentResult result;
    result.adjusted = prior;

    EquilibriumSolution ue;
    double objective = evaluate_objective(result.adjusted, prior, observed_flows,
                                          network, config, &ue);
    result.ue_solves = 1;

    std::vector<double> grad =
        adjustment_gradient(result.adjusted, prior, observed_flows, ue, config);
    double pg_norm = projected_gradient_norm(result.adjusted, grad);
    result.trace.push_back({0, objective, pg_norm, 0.0});

    const double prior_norm = norm(prior.demand);
    const double scale = 1.0 + prior_norm + norm(observed_flows);

    if (pg_norm <= config.stationarity * scale) {
        result.objective = objective;
        result.converged = true;
        result.diagnostic = "stationary at the prior";
        return result;
    }

    std::vector<double> prev_g, prev_grad;
    double grown_step = -1.0;  // doubles after each accepted step
    for (int iter = 1; iter <= config.max_iterations; ++iter) {
        const double base_step =
            (prior_norm > 0.0 ? prior_norm : scale) / (norm(grad) + 1e-12);

        // Barzilai-Borwein trial step when curvature information exists;
        // the backtracking below keeps every accepted step a descent step.
        double step = grown_step > 0.0 ? grown_step : base_step;
        if (!prev_g.empty()) {
            double ss = 0.0, sy = 0.0;
            for (std::size_t i = 0; i < prev_g.size(); ++i) {
                const double s = result.adjusted.demand[i] - prev_g[i];
                ss += s * s;
                sy += s * (grad[i] - prev_grad[i]);
            }
            if (sy > 0.0 && ss > 0.0 && std::isfinite(ss / sy)) step = ss / sy;
        }
        prev_g = result.adjusted.demand;
        prev_grad = grad;
        bool accepted = false;
        ODMatrix candidate = result.adjusted;
        EquilibriumSolution candidate_ue;
        double candidate_objective = objective;
        for (int h = 0; h <= config.max_halvings; ++h) {
            bool moved = false;
            for (std::size_t i = 0; i < candidate.demand.size(); ++i) {
                const double v =
                    std::max(result.adjusted.demand[i] - step * grad[i], 0.0);
                if (v != result.adjusted.demand[i]) moved = true;
                candidate.demand[i] = v;
            }
            if (!moved) break;  // fully clamped, no direction left
            candidate_objective =
                evaluate_objective(candidate, prior, observed_flows, network, config,
                                   &candidate_ue, &ue.times);
            ++result.ue_solves;
            if (candidate_objective < objective) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }

        if (!accepted) {
            result.converged = false;
            result.diagnostic = "no descent step found after " +
                                std::to_string(config.max_halvings) + " halvings";
            break;
        }

        const double decrease = objective - candidate_objective;
        grown_step = step * 2.0;
        result.adjusted = std::move(candidate);
        objective = candidate_objective;
        ue = std::move(candidate_ue);
        grad = adjustment_gradient(result.adjusted, prior, observed_flows, ue, config);
        pg_norm = projected_gradient_norm(result.adjusted, grad);
        result.trace.push_back({iter, objective, pg_norm, step});

        if (decrease <= config.tolerance * std::max(objective, 1e-300)) {
            result.converged = true;
            result.diagnostic = "relative decrease below tolerance";
            break;
        }
        if (pg_norm <= config.stationarity * scale) {
            result.converged = true;
            result.diagnostic = "projected gradient vanished";
            break;
        }
        if (iter == config.max_iterations) {
            result.converged = false;
            result.diagnostic = "iteration cap reached";
        }
    }

    result.objective = objective;
    return result;
}

void write_adjust_trace_csv(const AdjustmentResult& result, const std::string& path) {
    csv::Writer w(path);
    w.row({"iter", "F", "grad_norm", "step"});
    for (const auto& point : result.trace)
        w.row({std::to_string(point.iteration), csv::format_double(point.objective),
               csv::format_double(point.gradient_norm),
               csv::format_double(point.step)});
}

} // namespace partod
