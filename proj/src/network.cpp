#include "partod/network.hpp"

#include <algorithm>
#include <numeric>

namespace partod {

RoadNetwork::RoadNetwork(std::vector<SuperNode> nodes, std::vector<SuperEdge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    node_by_id_.reserve(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        auto [it, inserted] = node_by_id_.emplace(nodes_[i].id, static_cast<int>(i));
        require(inserted, ErrorCode::InvalidInput, "duplicate node id '" + nodes_[i].id + "'");
    }
    edge_by_id_.reserve(edges_.size());
    out_edges_.assign(nodes_.size(), {});
    for (std::size_t a = 0; a < edges_.size(); ++a) {
        const SuperEdge& e = edges_[a];
        auto [it, inserted] = edge_by_id_.emplace(e.id, static_cast<int>(a));
        require(inserted, ErrorCode::InvalidInput, "duplicate edge id '" + e.id + "'");
        require(e.tail >= 0 && e.tail < node_count() && e.head >= 0 && e.head < node_count(),
                ErrorCode::InvalidInput, "edge '" + e.id + "' references unknown node");
        out_edges_[static_cast<std::size_t>(e.tail)].push_back(static_cast<int>(a));
    }
    // Rank edges by id once; comparators in shortest-path code use the rank.
    std::vector<int> order(edges_.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return edges_[static_cast<std::size_t>(a)].id < edges_[static_cast<std::size_t>(b)].id;
    });
    edge_id_rank_.assign(edges_.size(), 0);
    for (std::size_t r = 0; r < order.size(); ++r)
        edge_id_rank_[static_cast<std::size_t>(order[r])] = static_cast<int>(r);
}

int RoadNetwork::node_index(const std::string& id) const {
    auto it = node_by_id_.find(id);
    return it == node_by_id_.end() ? -1 : it->second;
}

int RoadNetwork::edge_index(const std::string& id) const {
    auto it = edge_by_id_.find(id);
    return it == edge_by_id_.end() ? -1 : it->second;
}

ODPairSet ODPairSet::all_pairs(const RoadNetwork& network) {
    return all_pairs(network.node_count());
}

ODPairSet ODPairSet::all_pairs(int node_count) {
    ODPairSet set;
    set.pairs.reserve(static_cast<std::size_t>(node_count) * (node_count - 1));
    for (int o = 0; o < node_count; ++o)
        for (int d = 0; d < node_count; ++d)
            if (o != d) set.pairs.emplace_back(o, d);
    return set;
}

int ODPairSet::row_major_index(int node_count, int origin, int destination) {
    require(origin != destination && origin >= 0 && destination >= 0 &&
                origin < node_count && destination < node_count,
            ErrorCode::InvalidPair, "bad O-D pair");
    return origin * (node_count - 1) + destination - (destination > origin ? 1 : 0);
}

std::vector<double> FlowSampleSet::mean_flows() const {
    require(!samples.empty(), ErrorCode::InsufficientSamples, "no snapshots in sample set");
    std::vector<double> mean(samples.front().flows.size(), 0.0);
    for (const auto& s : samples)
        for (std::size_t a = 0; a < mean.size(); ++a) mean[a] += s.flows[a];
    for (double& v : mean) v /= static_cast<double>(samples.size());
    return mean;
}

double bpr_travel_time(const SuperEdge& edge, double flow_vph) {
    require(flow_vph >= 0.0, ErrorCode::InvalidInput, "negative flow");
    return edge.t0_hours *
           (1.0 + edge.alpha * std::pow(flow_vph / edge.capacity_vph, edge.beta));
}

double bpr_integral(const SuperEdge& edge, double flow_vph) {
    require(flow_vph >= 0.0, ErrorCode::InvalidInput, "negative flow");
    const double ratio_term = std::pow(flow_vph / edge.capacity_vph, edge.beta);
    return edge.t0_hours * flow_vph *
           (1.0 + edge.alpha * ratio_term / (edge.beta + 1.0));
}

namespace {

int reachable_count(const RoadNetwork& network,
                    const std::vector<std::vector<int>>& adjacency, int start) {
    std::vector<char> seen(static_cast<std::size_t>(network.node_count()), 0);
    std::vector<int> stack{start};
    seen[static_cast<std::size_t>(start)] = 1;
    int count = 0;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        ++count;
        for (int w : adjacency[static_cast<std::size_t>(v)]) {
            if (!seen[static_cast<std::size_t>(w)]) {
                seen[static_cast<std::size_t>(w)] = 1;
                stack.push_back(w);
            }
        }
    }
    return count;
}

} // namespace

bool strongly_connected(const RoadNetwork& network) {
    const int n = network.node_count();
    if (n <= 1) return true;
    std::vector<std::vector<int>> fwd(static_cast<std::size_t>(n)),
        rev(static_cast<std::size_t>(n));
    for (const auto& e : network.edges()) {
        fwd[static_cast<std::size_t>(e.tail)].push_back(e.head);
        rev[static_cast<std::size_t>(e.head)].push_back(e.tail);
    }
    return reachable_count(network, fwd, 0) == n && reachable_count(network, rev, 0) == n;
}

ValidationReport validate(const RoadNetwork& network) {
    ValidationReport report;
    for (const auto& e : network.edges()) {
        if (e.tail == e.head)
            report.fail_check("edge '" + e.id + "': self loop");
        if (!(e.length_km > 0.0))
            report.fail_check("edge '" + e.id + "': non-positive length");
        if (!(e.capacity_vph > 0.0))
            report.fail_check("edge '" + e.id + "': non-positive capacity");
        if (!(e.t0_hours > 0.0))
            report.fail_check("edge '" + e.id + "': non-positive free-flow time");
        if (!(e.alpha >= 0.0))
            report.fail_check("edge '" + e.id + "': negative alpha");
        if (!(e.beta >= 1.0))
            report.fail_check("edge '" + e.id + "': beta below 1");
    }
    if (network.node_count() == 0)
        report.fail_check("network has no nodes");
    else if (!strongly_connected(network))
        report.fail_check("network is not strongly connected");
    return report;
}

Eigen::MatrixXd incidence(const RoadNetwork& network) {
    Eigen::MatrixXd n_mat =
        Eigen::MatrixXd::Zero(network.node_count(), network.edge_count());
    for (int a = 0; a < network.edge_count(); ++a) {
        const SuperEdge& e = network.edge(a);
        n_mat(e.tail, a) = -1.0;
        n_mat(e.head, a) = 1.0;
    }
    return n_mat;
}

void check_snapshot(const RoadNetwork& network, const FlowSnapshot& snapshot) {
    require(static_cast<int>(snapshot.flows.size()) == network.edge_count(),
            ErrorCode::InvalidInput, "snapshot size does not match edge count");
    for (double v : snapshot.flows)
        require(is_finite(v) && v >= 0.0, ErrorCode::InvalidInput,
                "snapshot flow must be finite and non-negative");
}

} // namespace partod
