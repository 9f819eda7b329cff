#pragma once

#include <vector>

#include "partod/network.hpp"

namespace partod {

/// Vectorised O-D demand over an ordered pair set, vehicles/hour.
struct ODMatrix {
    ODPairSet pairs;
    std::vector<double> demand;

    double total() const;
    void check() const;  // finite, non-negative, dimension match

    /// Sum of entrywise values; pair sets must be equal.
    static ODMatrix sum(const ODMatrix& a, const ODMatrix& b);

    static ODMatrix zeros(ODPairSet pair_set);
};

} // namespace partod
