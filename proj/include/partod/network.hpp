#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "partod/common.hpp"

namespace partod {

/// Aggregated junction of the topographic representation. Coordinates are
/// informational only and may be NaN.
struct SuperNode {
    std::string id;
    std::string label;
    double lat = std::numeric_limits<double>::quiet_NaN();
    double lon = std::numeric_limits<double>::quiet_NaN();
};

/// Aggregated carriageway. `tail`/`head` are node indices into the owning
/// network; units are km, vehicles/hour and hours throughout.
struct SuperEdge {
    std::string id;
    int tail = -1;
    int head = -1;
    double length_km = 0.0;
    double capacity_vph = 0.0;
    double t0_hours = 0.0;
    double alpha = 0.15;
    double beta = 4.0;
};

struct ValidationReport {
    bool ok = true;
    std::vector<std::string> failures;

    void fail_check(std::string message) {
        ok = false;
        failures.push_back(std::move(message));
    }
};

/// Directed road graph. Immutable after construction; node and edge order is
/// the construction (file) order and all matrices index by that order.
class RoadNetwork {
public:
    RoadNetwork() = default;
    RoadNetwork(std::vector<SuperNode> nodes, std::vector<SuperEdge> edges);

    int node_count() const { return static_cast<int>(nodes_.size()); }
    int edge_count() const { return static_cast<int>(edges_.size()); }

    const std::vector<SuperNode>& nodes() const { return nodes_; }
    const std::vector<SuperEdge>& edges() const { return edges_; }
    const SuperNode& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
    const SuperEdge& edge(int a) const { return edges_[static_cast<std::size_t>(a)]; }

    int node_index(const std::string& id) const;   // -1 if unknown
    int edge_index(const std::string& id) const;   // -1 if unknown

    /// Outgoing edge indices per node.
    const std::vector<std::vector<int>>& out_edges() const { return out_edges_; }

    /// Rank of each edge in lexicographic id order; used for deterministic
    /// tie-breaking that is invariant to edge input order.
    const std::vector<int>& edge_id_rank() const { return edge_id_rank_; }

private:
    std::vector<SuperNode> nodes_;
    std::vector<SuperEdge> edges_;
    std::vector<std::vector<int>> out_edges_;
    std::vector<int> edge_id_rank_;
    std::unordered_map<std::string, int> node_by_id_;
    std::unordered_map<std::string, int> edge_by_id_;
};

/// Ordered O-D pair universe. The default universe is all ordered node pairs
/// (origin != destination) in row-major node order.
struct ODPairSet {
    std::vector<std::pair<int, int>> pairs;

    static ODPairSet all_pairs(const RoadNetwork& network);
    static ODPairSet all_pairs(int node_count);

    int size() const { return static_cast<int>(pairs.size()); }

    /// Index of (origin, destination) in the all-pairs row-major order.
    static int row_major_index(int node_count, int origin, int destination);
};

/// One day/time-bin sample of mean hourly flows, aligned to edge order.
struct FlowSnapshot {
    int sample_index = 0;
    std::string day;
    std::string bin;
    std::vector<double> flows;
};

/// All snapshots for one time bin (the sample set indexed by J).
struct FlowSampleSet {
    std::string bin;
    std::vector<FlowSnapshot> samples;

    int sample_count() const { return static_cast<int>(samples.size()); }

    /// Per-edge mean over samples. Errors if empty.
    std::vector<double> mean_flows() const;
};

/// BPR volume-delay: t0 * (1 + alpha * (flow / capacity)^beta). Hours.
double bpr_travel_time(const SuperEdge& edge, double flow_vph);

/// Closed-form integral of the BPR function from 0 to `flow_vph`; its
/// derivative in flow is bpr_travel_time.
double bpr_integral(const SuperEdge& edge, double flow_vph);

/// Checks strong connectivity, incidence-column structure and parameter
/// positivity. Collects failures instead of throwing.
ValidationReport validate(const RoadNetwork& network);

bool strongly_connected(const RoadNetwork& network);

/// Node-edge incidence matrix: -1 at the tail, +1 at the head of each column.
Eigen::MatrixXd incidence(const RoadNetwork& network);

/// Checks a snapshot against a network (size, finiteness, non-negativity).
void check_snapshot(const RoadNetwork& network, const FlowSnapshot& snapshot);

} // namespace partod
