#include "partod/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "partod/ingest.hpp"

namespace partod {

RaeResult rae_flow(const std::vector<double>& predicted_flows,
                   const std::vector<double>& observed_flows,
                   const RoadNetwork& network) {
    require(predicted_flows.size() == observed_flows.size() &&
                predicted_flows.size() == static_cast<std::size_t>(network.edge_count()),
            ErrorCode::InvalidInput, "flow vectors must cover every edge");
    RaeResult result;
    for (int a = 0; a < network.edge_count(); ++a) {
        const double obs = observed_flows[static_cast<std::size_t>(a)];
        if (!(obs > 0.0)) {
            result.warnings.push_back("edge '" + network.edge(a).id +
                                      "' excluded: observed flow is zero");
            continue;
        }
        result.values.push_back(
            std::fabs(predicted_flows[static_cast<std::size_t>(a)] - obs) / obs);
        result.edge_indices.push_back(a);
    }
    require(!result.values.empty(), ErrorCode::InvalidInput,
            "every edge excluded from the flow error report");
    return result;
}

RaeResult rae_time(const std::vector<double>& predicted_flows,
                   const RoadNetwork& network,
                   const std::vector<double>& observed_speeds_kmh) {
    require(predicted_flows.size() == observed_speeds_kmh.size() &&
                predicted_flows.size() == static_cast<std::size_t>(network.edge_count()),
            ErrorCode::InvalidInput, "vectors must cover every edge");
    RaeResult result;
    for (int a = 0; a < network.edge_count(); ++a) {
        const SuperEdge& e = network.edge(a);
        const double speed = observed_speeds_kmh[static_cast<std::size_t>(a)];
        if (!(speed > 0.0)) {
            result.warnings.push_back("edge '" + e.id +
                                      "' excluded: observed speed is zero");
            continue;
        }
        const double observed_time = e.length_km / speed;
        const double predicted_time =
            bpr_travel_time(e, predicted_flows[static_cast<std::size_t>(a)]);
        result.values.push_back(std::fabs(predicted_time - observed_time) /
                                observed_time);
        result.edge_indices.push_back(a);
    }
    require(!result.values.empty(), ErrorCode::InvalidInput,
            "every edge excluded from the time error report");
    return result;
}

Quartiles quartiles(std::vector<double> values) {
    require(!values.empty(), ErrorCode::InvalidInput, "quartiles of empty list");
    Quartiles q;
    q.median = median(values);
    std::sort(values.begin(), values.end());
    q.q1 = nearest_rank_percentile(values, 25.0);
    q.q3 = nearest_rank_percentile(values, 75.0);
    return q;
}

} // namespace partod
