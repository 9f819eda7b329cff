#include "partod/demand.hpp"

namespace partod {

double ODMatrix::total() const {
    double t = 0.0;
    for (double v : demand) t += v;
    return t;
}

void ODMatrix::check() const {
    require(demand.size() == pairs.pairs.size(), ErrorCode::InvalidInput,
            "demand vector size does not match pair set");
    for (double v : demand)
        require(is_finite(v) && v >= 0.0, ErrorCode::InvalidInput,
                "demand must be finite and non-negative");
}

ODMatrix ODMatrix::sum(const ODMatrix& a, const ODMatrix& b) {
    require(a.pairs.pairs == b.pairs.pairs, ErrorCode::InvalidInput,
            "pair sets differ");
    ODMatrix out = a;
    for (std::size_t i = 0; i < out.demand.size(); ++i) out.demand[i] += b.demand[i];
    return out;
}

ODMatrix ODMatrix::zeros(ODPairSet pair_set) {
    ODMatrix out;
    out.demand.assign(pair_set.pairs.size(), 0.0);
    out.pairs = std::move(pair_set);
    return out;
}

} // namespace partod
