#include "sfsync/topology.hpp"

#include <queue>
#include <sstream>
#include <stdexcept>

namespace sfsync {

Eigen::MatrixXd laplacian(const Topology& topology) {
    const int N = topology.size();
    const Eigen::MatrixXd& a = topology.adjacency;
    if (a.cols() != N)
        throw std::invalid_argument("laplacian: adjacency matrix must be square");

    for (int i = 0; i < N; ++i) {
        if (a(i, i) != 0.0)
            throw std::invalid_argument("laplacian: self-loop (nonzero diagonal) at node " +
                                        std::to_string(i + 1));
        for (int j = 0; j < N; ++j) {
            if (a(i, j) < 0.0) {
                std::ostringstream os;
                os << "laplacian: negative weight a(" << i + 1 << "," << j + 1 << ") = " << a(i, j);
                throw std::invalid_argument(os.str());
            }
        }
    }

    Eigen::MatrixXd L = -a;
    for (int i = 0; i < N; ++i) L(i, i) = a.row(i).sum();
    return L;
}

ExpandedLaplacian expanded_laplacian(const Eigen::MatrixXd& L,
                                     const std::vector<int>& root_set) {
    if (root_set.empty())
        throw std::invalid_argument("expanded_laplacian: root set must be nonempty");
    const int N = static_cast<int>(L.rows());
    Eigen::MatrixXd Lbar = L;
    for (int r : root_set) {
        if (r < 0 || r >= N)
            throw std::invalid_argument("expanded_laplacian: root index out of range");
        Lbar(r, r) += 1.0;
    }
    return ExpandedLaplacian{L, Lbar};
}

bool check_membership(const Topology& topology) {
    const int N = topology.size();
    if (topology.root_set.empty()) return false;

    std::vector<char> seen(N, 0);
    std::queue<int> frontier;
    for (int r : topology.root_set) {
        if (r < 0 || r >= N) return false;
        if (!seen[r]) {
            seen[r] = 1;
            frontier.push(r);
        }
    }
    // Edge j -> i exists when adjacency(i, j) > 0.
    while (!frontier.empty()) {
        const int j = frontier.front();
        frontier.pop();
        for (int i = 0; i < N; ++i) {
            if (!seen[i] && topology.adjacency(i, j) > 0.0) {
                seen[i] = 1;
                frontier.push(i);
            }
        }
    }
    for (int i = 0; i < N; ++i)
        if (!seen[i]) return false;
    return true;
}

} // namespace sfsync
