#pragma once

#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "partod/demand.hpp"
#include "partod/partition.hpp"
#include "partod/routing.hpp"

namespace partod {

/// Regularized sample covariance of the flow snapshots with its
/// factorization. Symmetric positive-definite after the ridge.
class FlowCovariance {
public:
    FlowCovariance(Eigen::MatrixXd s, double ridge);

    const Eigen::MatrixXd& matrix() const { return s_; }
    double ridge() const { return ridge_; }

    Eigen::VectorXd solve(const Eigen::VectorXd& v) const { return ldlt_.solve(v); }

    /// v' S^{-1} v.
    double quadratic(const Eigen::VectorXd& v) const { return v.dot(solve(v)); }

private:
    Eigen::MatrixXd s_;
    double ridge_;
    Eigen::LDLT<Eigen::MatrixXd> ldlt_;
};

/// Unbiased sample covariance plus an adaptive ridge: starting from
/// ridge_base * trace / |A|, the ridge escalates tenfold until the condition
/// number is at most 1e8. Needs at least two snapshots.
FlowCovariance sample_covariance(const FlowSampleSet& snapshots, double ridge_base = 1e-8);

/// Route-choice probabilities aligned with a RouteSet: one row per pair,
/// entries in [0,1] summing to one over the pair's routes.
struct RouteChoiceMatrix {
    std::vector<std::vector<double>> rows;

    /// Dense pairs x total-routes matrix with zeros outside each pair's
    /// route block (test/inspection helper).
    Eigen::MatrixXd to_dense(const RouteSet& routes) const;
};

struct GlsConfig {
    int k_routes = 4;
    double ridge_base = 1e-8;
    double outer_tolerance = 1e-6;
    int max_outer_iterations = 100;
    int max_inner_iterations = 2000;
    double inner_tolerance = 1e-9;
};

struct GlsResult {
    ODMatrix demand;             // over the route set's pairs
    RouteChoiceMatrix choice;
    double objective = 0.0;
    std::vector<double> objective_trace;  // per outer iteration, non-increasing
};

/// Alternating minimisation of the generalized least squares objective:
/// with route probabilities fixed the demand step is a non-negative QP, with
/// demand fixed the probability step is a row-simplex QP. Returns the best
/// feasible iterate.
GlsResult gls_estimate(const RoadNetwork& network, const FlowSampleSet& snapshots,
                       const RouteSet& routes, const GlsConfig& config);

/// Spreads demands over a sub-pair set into the full all-pairs vector.
/// `node_map` translates sub node indices to full-network indices.
ODMatrix scatter_demand(const ODMatrix& sub, const std::vector<int>& node_map,
                        int full_node_count);

/// Node-induced subnetwork; keeps node/edge order and maps back to the
/// original indices.
struct Subnetwork {
    RoadNetwork net;
    std::vector<int> node_map;  // sub node -> original node
    std::vector<int> edge_map;  // sub edge -> original edge
};

Subnetwork induced_subnetwork(const RoadNetwork& network, const std::vector<int>& nodes);

FlowSampleSet restrict_samples(const FlowSampleSet& samples,
                               const std::vector<int>& edge_map);

/// Strategy (i): estimation run entirely on the community network. Returns
/// demand over the community all-pairs universe.
ODMatrix degenerate_prior(const CommunityNetwork& community, const GlsConfig& config);

/// Strategy (ii): per-partition estimation on induced subnetworks, assembled
/// into a block-diagonal full-size prior. Inter-partition and unreachable
/// pairs stay zero.
ODMatrix internal_prior(const RoadNetwork& network, const Partitioning& partitioning,
                        const FlowSampleSet& snapshots, const GlsConfig& config,
                        std::vector<std::string>* warnings = nullptr);

/// Strategy (iii): community demand split equally over the node pairs of
/// each community pair. Intra-community pairs stay zero.
ODMatrix external_prior(const ODMatrix& community_demand, const Partitioning& partitioning,
                        int full_node_count);

/// Strategy (iv): entrywise sum of internal and external priors; their
/// nonzero supports must not overlap.
ODMatrix combined_prior(const ODMatrix& internal, const ODMatrix& external);

} // namespace partod
