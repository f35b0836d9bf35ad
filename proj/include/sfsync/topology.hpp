#pragma once

#include <Eigen/Dense>
#include <vector>

namespace sfsync {

/// Weighted directed communication graph.  adjacency(i, j) > 0 is an edge
/// j -> i; root_set holds the 0-based indices of agents with direct access
/// to their error relative to the exosystem.
struct Topology {
    Eigen::MatrixXd adjacency;
    std::vector<int> root_set;

    int size() const { return static_cast<int>(adjacency.rows()); }
};

struct ExpandedLaplacian {
    Eigen::MatrixXd L;    ///< Laplacian of the graph
    Eigen::MatrixXd Lbar; ///< L + diag(root indicator)
};

/// Laplacian: l_ii = sum_k a_ik, l_ij = -a_ij.  Rejects negative weights
/// and nonzero diagonals.
Eigen::MatrixXd laplacian(const Topology& topology);

/// Lbar = L + diag(iota), iota_i = 1 iff i in root_set.  Rejects an empty
/// root set.
ExpandedLaplacian expanded_laplacian(const Eigen::MatrixXd& L,
                                     const std::vector<int>& root_set);

/// True iff every node is reachable from the root set along directed edges.
bool check_membership(const Topology& topology);

} // namespace sfsync
