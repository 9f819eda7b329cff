#pragma once

#include <string>
#include <vector>

#include "partod/network.hpp"

namespace partod {

/// Per-edge relative absolute errors; edges excluded by the preconditions
/// (zero observed value) are listed with warnings.
struct RaeResult {
    std::vector<double> values;
    std::vector<int> edge_indices;
    std::vector<std::string> warnings;
};

/// |predicted - observed| / observed per edge; zero-observed edges excluded
/// with a warning, an empty result is an error.
RaeResult rae_flow(const std::vector<double>& predicted_flows,
                   const std::vector<double>& observed_flows,
                   const RoadNetwork& network);

/// Travel-time errors: predicted times come from the congestion function at
/// the predicted flows, observed times from length over observed mean speed.
RaeResult rae_time(const std::vector<double>& predicted_flows,
                   const RoadNetwork& network,
                   const std::vector<double>& observed_speeds_kmh);

struct Quartiles {
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
};

/// Nearest-rank quartiles (median uses the mean-of-middles convention).
Quartiles quartiles(std::vector<double> values);

} // namespace partod
