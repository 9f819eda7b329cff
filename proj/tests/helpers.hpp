#pragma once

// Shared builders and independent oracles for the test suites. Everything in
// here is deliberately brute-force and kept independent of the library's own
// algorithms.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "partod/network.hpp"

namespace testutil {

struct EdgeSpec {
    std::string id;
    std::string tail;
    std::string head;
    double length = 1.0;
    double capacity = 1000.0;
    double t0 = 1.0;
    double alpha = 0.15;
    double beta = 4.0;
};

inline partod::RoadNetwork make_network(const std::vector<std::string>& node_ids,
                                        const std::vector<EdgeSpec>& edge_specs) {
    std::vector<partod::SuperNode> nodes;
    std::map<std::string, int> index;
    for (const auto& id : node_ids) {
        index[id] = static_cast<int>(nodes.size());
        nodes.push_back({id, id});
    }
    std::vector<partod::SuperEdge> edges;
    for (const auto& spec : edge_specs) {
        partod::SuperEdge e;
        e.id = spec.id;
        e.tail = index.at(spec.tail);
        e.head = index.at(spec.head);
        e.length_km = spec.length;
        e.capacity_vph = spec.capacity;
        e.t0_hours = spec.t0;
        e.alpha = spec.alpha;
        e.beta = spec.beta;
        edges.push_back(std::move(e));
    }
    return partod::RoadNetwork(std::move(nodes), std::move(edges));
}

/// Bidirected edge pair helper for symmetric test graphs.
inline void add_bidirected(std::vector<EdgeSpec>& edges, const std::string& u,
                           const std::string& v, double length) {
    edges.push_back({u + "_" + v, u, v, length});
    edges.push_back({v + "_" + u, v, u, length});
}

/// Adaptive Simpson quadrature, the independent integral oracle.
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      double tol, int depth = 30) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fb = f(b), fm = f(m);
    std::function<double(double, double, double, double, double, double, int)> rec =
        [&](double lo, double hi, double flo, double fhi, double fmid, double eps,
            int d) -> double {
        const double mid = 0.5 * (lo + hi);
        const double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
        const double flm = f(lm), frm = f(rm);
        const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
        const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
        if (d <= 0 || std::fabs(left + right - whole) < 15.0 * eps)
            return left + right + (left + right - whole) / 15.0;
        return rec(lo, mid, flo, fmid, flm, eps / 2.0, d - 1) +
               rec(mid, hi, fmid, fhi, frm, eps / 2.0, d - 1);
    };
    return rec(a, b, fa, fb, fm, tol, depth);
}

/// Exhaustive enumeration of all simple paths between two nodes; each path is
/// the ordered list of edge indices.
inline std::vector<std::vector<int>> all_simple_paths(const partod::RoadNetwork& net,
                                                      int origin, int destination) {
    std::vector<std::vector<int>> out;
    std::vector<int> stack_edges;
    std::vector<char> visited(static_cast<std::size_t>(net.node_count()), 0);
    std::function<void(int)> dfs = [&](int v) {
        if (v == destination) {
            out.push_back(stack_edges);
            return;
        }
        visited[static_cast<std::size_t>(v)] = 1;
        for (int a : net.out_edges()[static_cast<std::size_t>(v)]) {
            const int w = net.edge(a).head;
            if (visited[static_cast<std::size_t>(w)]) continue;
            stack_edges.push_back(a);
            dfs(w);
            stack_edges.pop_back();
        }
        visited[static_cast<std::size_t>(v)] = 0;
    };
    dfs(origin);
    return out;
}

inline double path_length(const partod::RoadNetwork& net, const std::vector<int>& path) {
    double len = 0.0;
    for (int a : path) len += net.edge(a).length_km;
    return len;
}

/// Enumerates every set partition of {0..n-1} (restricted growth strings).
inline void for_each_partition(int n, const std::function<void(const std::vector<int>&)>& fn) {
    std::vector<int> assignment(static_cast<std::size_t>(n), 0);
    std::function<void(int, int)> rec = [&](int i, int max_used) {
        if (i == n) {
            fn(assignment);
            return;
        }
        for (int c = 0; c <= max_used + 1 && c < n; ++c) {
            assignment[static_cast<std::size_t>(i)] = c;
            rec(i + 1, std::max(max_used, c));
        }
    };
    rec(0, -1);
}

/// Classic Lawson-Hanson active-set NNLS: min ||Ax - b|| s.t. x >= 0.
/// Independent oracle for the demand step of the estimator.
inline Eigen::VectorXd nnls_lawson_hanson(const Eigen::MatrixXd& a,
                                          const Eigen::VectorXd& b,
                                          double tol = 1e-12, int max_iter = 1000) {
    const Eigen::Index n = a.cols();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    std::vector<bool> passive(static_cast<std::size_t>(n), false);
    for (int iter = 0; iter < max_iter; ++iter) {
        const Eigen::VectorXd w = a.transpose() * (b - a * x);
        int best = -1;
        double best_w = tol;
        for (Eigen::Index j = 0; j < n; ++j)
            if (!passive[static_cast<std::size_t>(j)] && w[j] > best_w) {
                best_w = w[j];
                best = static_cast<int>(j);
            }
        if (best < 0) break;
        passive[static_cast<std::size_t>(best)] = true;

        for (;;) {
            std::vector<int> p;
            for (Eigen::Index j = 0; j < n; ++j)
                if (passive[static_cast<std::size_t>(j)]) p.push_back(static_cast<int>(j));
            Eigen::MatrixXd ap(a.rows(), static_cast<Eigen::Index>(p.size()));
            for (std::size_t k = 0; k < p.size(); ++k)
                ap.col(static_cast<Eigen::Index>(k)) = a.col(p[k]);
            const Eigen::VectorXd z =
                ap.colPivHouseholderQr().solve(b);
            bool feasible = true;
            for (Eigen::Index k = 0; k < z.size(); ++k)
                if (z[k] <= 0.0) feasible = false;
            if (feasible) {
                x.setZero();
                for (std::size_t k = 0; k < p.size(); ++k)
                    x[p[k]] = z[static_cast<Eigen::Index>(k)];
                break;
            }
            double alpha = 1.0;
            for (std::size_t k = 0; k < p.size(); ++k) {
                const double zk = z[static_cast<Eigen::Index>(k)];
                const double xk = x[p[k]];
                if (zk <= 0.0 && xk - zk > 0.0)
                    alpha = std::min(alpha, xk / (xk - zk));
            }
            for (std::size_t k = 0; k < p.size(); ++k) {
                const double zk = z[static_cast<Eigen::Index>(k)];
                x[p[k]] += alpha * (zk - x[p[k]]);
                if (x[p[k]] <= tol) {
                    x[p[k]] = 0.0;
                    passive[static_cast<std::size_t>(p[k])] = false;
                }
            }
        }
    }
    return x;
}

} // namespace testutil
