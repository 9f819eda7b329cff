#include "partod/partition.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "partod/rng.hpp"

namespace partod {

namespace {

/// Undirected weighted graph in the modularity conventions: `self_weight`
/// is the A_ii term, `strength` is k_i including the self loop.
struct UGraph {
    std::vector<std::vector<std::pair<int, double>>> adj;
    std::vector<double> self_weight;
    std::vector<double> strength;
    double two_m = 0.0;

    int size() const { return static_cast<int>(adj.size()); }

    void finalize() {
        strength.assign(adj.size(), 0.0);
        for (std::size_t i = 0; i < adj.size(); ++i) {
            strength[i] = self_weight[i];
            for (const auto& [j, w] : adj[i]) strength[i] += w;
        }
        two_m = std::accumulate(strength.begin(), strength.end(), 0.0);
    }
};

UGraph build_undirected(const RoadNetwork& network, std::vector<std::string>* warnings) {
    // Directional weight sums per unordered node pair.
    std::map<std::pair<int, int>, std::pair<double, double>> pair_weights;
    for (const auto& e : network.edges()) {
        require(e.length_km > 0.0, ErrorCode::InvalidInput,
                "edge '" + e.id + "' has non-positive length");
        const double w = 1.0 / e.length_km;
        const int u = std::min(e.tail, e.head);
        const int v = std::max(e.tail, e.head);
        auto& [fwd, rev] = pair_weights[{u, v}];
        (e.tail == u ? fwd : rev) += w;
    }

    UGraph g;
    g.adj.assign(static_cast<std::size_t>(network.node_count()), {});
    g.self_weight.assign(static_cast<std::size_t>(network.node_count()), 0.0);
    for (const auto& [nodes, weights] : pair_weights) {
        const auto& [fwd, rev] = weights;
        double w;
        if (fwd > 0.0 && rev > 0.0) {
            if (std::fabs(fwd - rev) <= 1e-9 * std::max(fwd, rev)) {
                w = fwd;
            } else {
                w = 0.5 * (fwd + rev);
                if (warnings)
                    warnings->push_back("asymmetric carriageway pair between '" +
                                        network.node(nodes.first).id + "' and '" +
                                        network.node(nodes.second).id +
                                        "', using mean weight");
            }
        } else {
            w = fwd + rev;
        }
        g.adj[static_cast<std::size_t>(nodes.first)].emplace_back(nodes.second, w);
        g.adj[static_cast<std::size_t>(nodes.second)].emplace_back(nodes.first, w);
    }
    g.finalize();
    return g;
}

/// Resolution-scaled objective: (1/2m) sum_c [r * Sigma_in(c)
/// - Sigma_tot(c)^2 / 2m]. Shares its maximisers with the null-scaled form.
double scaled_objective(const UGraph& g, const std::vector<int>& comm, double resolution) {
    const int c_max = *std::max_element(comm.begin(), comm.end()) + 1;
    std::vector<double> sigma_in(static_cast<std::size_t>(c_max), 0.0);
    std::vector<double> sigma_tot(static_cast<std::size_t>(c_max), 0.0);
    for (int i = 0; i < g.size(); ++i) {
        const auto c = static_cast<std::size_t>(comm[static_cast<std::size_t>(i)]);
        sigma_tot[c] += g.strength[static_cast<std::size_t>(i)];
        sigma_in[c] += g.self_weight[static_cast<std::size_t>(i)];
        for (const auto& [j, w] : g.adj[static_cast<std::size_t>(i)])
            if (comm[static_cast<std::size_t>(j)] == comm[static_cast<std::size_t>(i)])
                sigma_in[c] += w;
    }
    if (g.two_m <= 0.0) return 0.0;
    double q = 0.0;
    for (std::size_t c = 0; c < sigma_in.size(); ++c)
        q += resolution * sigma_in[c] - sigma_tot[c] * sigma_tot[c] / g.two_m;
    return q / g.two_m;
}

/// One Louvain level: greedy local moves until no node improves the scaled
/// objective. Returns true when at least one node changed community.
bool local_moves(const UGraph& g, double resolution, std::vector<int>& comm, Rng& rng) {
    const int n = g.size();
    std::vector<double> sigma_tot(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i)
        sigma_tot[static_cast<std::size_t>(comm[static_cast<std::size_t>(i)])] +=
            g.strength[static_cast<std::size_t>(i)];

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    bool any_move = false;
    bool improved = true;
    while (improved) {
        improved = false;
        for (int i : order) {
            const int c_old = comm[static_cast<std::size_t>(i)];
            const double k_i = g.strength[static_cast<std::size_t>(i)];
            sigma_tot[static_cast<std::size_t>(c_old)] -= k_i;

            // Link weight from i into each neighbouring community.
            std::vector<std::pair<int, double>> cand;
            double w_old = 0.0;
            for (const auto& [j, w] : g.adj[static_cast<std::size_t>(i)]) {
                const int c = comm[static_cast<std::size_t>(j)];
                if (c == c_old) {
                    w_old += w;
                    continue;
                }
                bool found = false;
                for (auto& [cc, ww] : cand)
                    if (cc == c) {
                        ww += w;
                        found = true;
                        break;
                    }
                if (!found) cand.emplace_back(c, w);
            }
            std::sort(cand.begin(), cand.end());

            int best = c_old;
            double best_gain = resolution * w_old -
                               k_i * sigma_tot[static_cast<std::size_t>(c_old)] / g.two_m;
            for (const auto& [c, w] : cand) {
                const double gain = resolution * w -
                                    k_i * sigma_tot[static_cast<std::size_t>(c)] / g.two_m;
                if (gain > best_gain) {
                    best_gain = gain;
                    best = c;
                }
            }
            sigma_tot[static_cast<std::size_t>(best)] += k_i;
            if (best != c_old) {
                comm[static_cast<std::size_t>(i)] = best;
                improved = true;
                any_move = true;
            }
        }
    }
    return any_move;
}

std::vector<int> relabel_contiguous(const std::vector<int>& comm) {
    std::vector<int> label(comm.size(), -1);
    std::vector<int> out(comm.size());
    int next = 0;
    for (std::size_t i = 0; i < comm.size(); ++i) {
        int& l = label[static_cast<std::size_t>(comm[i])];
        if (l < 0) l = next++;
        out[i] = l;
    }
    return out;
}

UGraph aggregate(const UGraph& g, const std::vector<int>& comm, int c_count) {
    UGraph out;
    out.adj.assign(static_cast<std::size_t>(c_count), {});
    out.self_weight.assign(static_cast<std::size_t>(c_count), 0.0);
    std::map<std::pair<int, int>, double> cross;
    for (int i = 0; i < g.size(); ++i) {
        const int ci = comm[static_cast<std::size_t>(i)];
        out.self_weight[static_cast<std::size_t>(ci)] +=
            g.self_weight[static_cast<std::size_t>(i)];
        for (const auto& [j, w] : g.adj[static_cast<std::size_t>(i)]) {
            const int cj = comm[static_cast<std::size_t>(j)];
            if (ci == cj) {
                // Each undirected internal edge is visited from both ends.
                out.self_weight[static_cast<std::size_t>(ci)] += w;
            } else if (ci < cj) {
                cross[{ci, cj}] += w;
            }
        }
    }
    for (const auto& [pair, w] : cross) {
        out.adj[static_cast<std::size_t>(pair.first)].emplace_back(pair.second, w);
        out.adj[static_cast<std::size_t>(pair.second)].emplace_back(pair.first, w);
    }
    out.finalize();
    return out;
}

} // namespace

double modularity(const RoadNetwork& network, const std::vector<int>& assignment,
                  double resolution) {
    require(assignment.size() == static_cast<std::size_t>(network.node_count()),
            ErrorCode::InvalidAssignment, "assignment does not cover every node");
    for (int c : assignment)
        require(c >= 0, ErrorCode::InvalidAssignment, "node missing from assignment");
    UGraph g = build_undirected(network, nullptr);
    return scaled_objective(g, assignment, resolution);
}

Partitioning louvain(const RoadNetwork& network, double resolution, std::uint64_t seed,
                     std::vector<std::string>* warnings) {
    require(resolution >= 0.0, ErrorCode::InvalidInput, "resolution must be non-negative");
    UGraph g = build_undirected(network, warnings);
    Rng rng(seed);

    std::vector<int> final_comm(static_cast<std::size_t>(network.node_count()));
    std::iota(final_comm.begin(), final_comm.end(), 0);

    Partitioning result;
    result.resolution = resolution;

    UGraph level = std::move(g);
    std::vector<int> level_comm(static_cast<std::size_t>(level.size()));
    std::iota(level_comm.begin(), level_comm.end(), 0);
    result.objective_trace.push_back(scaled_objective(level, level_comm, resolution));

    for (;;) {
        const bool moved = local_moves(level, resolution, level_comm, rng);
        result.objective_trace.push_back(scaled_objective(level, level_comm, resolution));
        if (!moved) break;
        const std::vector<int> packed = relabel_contiguous(level_comm);
        const int c_count = *std::max_element(packed.begin(), packed.end()) + 1;
        for (int& c : final_comm)
            c = packed[static_cast<std::size_t>(c)];
        if (c_count == level.size()) break;
        level = aggregate(level, packed, c_count);
        level_comm.assign(static_cast<std::size_t>(c_count), 0);
        std::iota(level_comm.begin(), level_comm.end(), 0);
    }

    result.community = relabel_contiguous(final_comm);
    result.community_count =
        *std::max_element(result.community.begin(), result.community.end()) + 1;
    result.modularity = modularity(network, result.community, 1.0);
    return result;
}

SweepResult resolution_sweep(const RoadNetwork& network, std::uint64_t seed,
                             const SweepConfig& config) {
    SweepResult result;
    std::map<int, Partitioning> by_count;
    int coarsest_probed = network.node_count() + 1;
    double highest_above_two = 0.0;  // largest resolution still giving > 2
    double lowest_collapsed = std::numeric_limits<double>::infinity();  // first giving 1

    auto probe = [&](double resolution) {
        const std::uint64_t r_seed =
            mix_seed(seed, std::bit_cast<std::uint64_t>(resolution));
        Partitioning p = louvain(network, resolution, r_seed);
        const int count = p.community_count;
        coarsest_probed = std::min(coarsest_probed, count);
        if (count > 2) highest_above_two = std::max(highest_above_two, resolution);
        if (count == 1) lowest_collapsed = std::min(lowest_collapsed, resolution);
        if (count >= 2 && !by_count.count(count)) by_count.emplace(count, std::move(p));
        return count;
    };

    // Unpartitioned end: resolution zero keeps every node separate.
    probe(0.0);

    const double ratio = config.resolution_max / config.resolution_min;
    for (int i = 0; i < config.grid_points; ++i) {
        const double t = config.grid_points == 1
                             ? 0.0
                             : static_cast<double>(i) / (config.grid_points - 1);
        probe(config.resolution_min * std::pow(ratio, t));
    }

    // Coarsen further when even the top of the grid kept > 2 communities.
    double upper = config.resolution_max;
    for (int ext = 0; ext < config.max_extensions && coarsest_probed > 2; ++ext) {
        for (int i = 1; i <= config.points_per_extension; ++i) {
            const double t = static_cast<double>(i) / config.points_per_extension;
            probe(upper * std::pow(10.0, t));
        }
        upper *= 10.0;
    }

    // The grid may step straight from > 2 communities to a single one;
    // bisect the gap looking for a two-community resolution.
    for (int it = 0; it < 48 && !by_count.count(2); ++it) {
        if (!(highest_above_two > 0.0) || !std::isfinite(lowest_collapsed)) break;
        if (lowest_collapsed / highest_above_two < 1.0 + 1e-12) break;
        probe(std::sqrt(highest_above_two * lowest_collapsed));
    }

    result.reached_two = by_count.count(2) > 0;
    if (!result.reached_two) {
        const int coarsest_kept =
            by_count.empty() ? network.node_count() : by_count.begin()->first;
        result.warnings.push_back(
            "sweep did not reach two communities; coarsest found has " +
            std::to_string(coarsest_kept) + " communities");
    }

    for (auto it = by_count.rbegin(); it != by_count.rend(); ++it)
        result.entries.push_back(std::move(it->second));
    return result;
}

CommunityNetwork build_community_network(const RoadNetwork& network,
                                         const Partitioning& partitioning,
                                         const FlowSampleSet& snapshots,
                                         std::vector<std::string>* warnings) {
    require(partitioning.community.size() ==
                static_cast<std::size_t>(network.node_count()),
            ErrorCode::InvalidAssignment, "partitioning does not cover every node");
    const int c_count = partitioning.community_count;
    if (c_count < 2)
        fail(ErrorCode::DegenerateNetwork,
             "community network needs at least two communities");
    require(!snapshots.samples.empty(), ErrorCode::InsufficientSamples,
            "community aggregation needs at least one snapshot");

    const std::vector<double> mean = snapshots.mean_flows();

    // Ordered community pair -> constituent original edges (cross edges only).
    std::map<std::pair<int, int>, std::vector<int>> crossing;
    for (int a = 0; a < network.edge_count(); ++a) {
        const SuperEdge& e = network.edge(a);
        const int cu = partitioning.community[static_cast<std::size_t>(e.tail)];
        const int cv = partitioning.community[static_cast<std::size_t>(e.head)];
        if (cu != cv) crossing[{cu, cv}].push_back(a);
    }
    if (crossing.empty())
        fail(ErrorCode::DegenerateNetwork, "no edges cross community boundaries");

    std::vector<SuperNode> nodes;
    nodes.reserve(static_cast<std::size_t>(c_count));
    for (int c = 0; c < c_count; ++c)
        nodes.push_back({"c" + std::to_string(c), "community " + std::to_string(c)});

    CommunityNetwork out;
    std::vector<SuperEdge> edges;
    for (const auto& [pair, member_edges] : crossing) {
        double total_weight = 0.0;
        for (int a : member_edges) total_weight += mean[static_cast<std::size_t>(a)];
        double length = 0.0, t0 = 0.0, alpha = 0.0, beta = 0.0, capacity = 0.0;
        for (int a : member_edges) {
            const SuperEdge& e = network.edge(a);
            const double w = total_weight > 0.0
                                 ? mean[static_cast<std::size_t>(a)] / total_weight
                                 : 1.0 / static_cast<double>(member_edges.size());
            length += w * e.length_km;
            t0 += w * e.t0_hours;
            alpha += w * e.alpha;
            beta += w * e.beta;
            capacity += e.capacity_vph;
        }
        if (total_weight <= 0.0 && warnings)
            warnings->push_back("community edge c" + std::to_string(pair.first) + "->c" +
                                std::to_string(pair.second) +
                                " has zero mean flow; unweighted mean used");
        SuperEdge ce;
        ce.id = "c" + std::to_string(pair.first) + "_" + std::to_string(pair.second);
        ce.tail = pair.first;
        ce.head = pair.second;
        ce.length_km = length;
        ce.t0_hours = t0;
        ce.capacity_vph = capacity;
        ce.alpha = alpha;
        ce.beta = beta;
        edges.push_back(std::move(ce));
        out.members.push_back(member_edges);
    }

    out.net = RoadNetwork(std::move(nodes), std::move(edges));
    out.node_community = partitioning.community;
    if (!strongly_connected(out.net))
        fail(ErrorCode::DegenerateNetwork, "community network is not strongly connected");
    out.samples = aggregate_sample_set(out, snapshots);
    return out;
}

FlowSampleSet aggregate_sample_set(const CommunityNetwork& community,
                                   const FlowSampleSet& original) {
    FlowSampleSet out;
    out.bin = original.bin;
    for (const FlowSnapshot& snap : original.samples) {
        FlowSnapshot agg;
        agg.sample_index = snap.sample_index;
        agg.day = snap.day;
        agg.bin = snap.bin;
        agg.flows.assign(static_cast<std::size_t>(community.net.edge_count()), 0.0);
        for (int ce = 0; ce < community.net.edge_count(); ++ce)
            for (int a : community.members[static_cast<std::size_t>(ce)])
                agg.flows[static_cast<std::size_t>(ce)] +=
                    snap.flows[static_cast<std::size_t>(a)];
        out.samples.push_back(std::move(agg));
    }
    return out;
}

} // namespace partod
