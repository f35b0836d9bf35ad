#pragma once

#include "sfsync/protocol.hpp"
#include "sfsync/topology.hpp"

#include <Eigen/Dense>
#include <vector>

namespace sfsync {

enum class BlockKind { State, ProtocolState, ObserverState, Exosystem };

struct StateBlock {
    BlockKind kind;
    int agent;  ///< 0-based agent index; -1 for the exosystem
    int offset; ///< position of the block in the stacked state vector
    int dim;
};

struct DelayTerm {
    double tau;
    Eigen::MatrixXd Ad;
};

/// Linear multi-delay system z'(t) = A0 z(t) + sum_d Ad z(t - tau_d),
/// assembled in absolute coordinates (x_1..x_N, chi_1..chi_N [, xhat_1..xhat_N], x_r).
struct ClosedLoopSystem {
    int state_dim = 0;
    Eigen::MatrixXd A0;
    std::vector<DelayTerm> delay_terms;
    std::vector<StateBlock> layout;
    double tau_bar = 0.0;

    /// Offset of the block of the given kind for the given agent (-1 for exo).
    int block_offset(BlockKind kind, int agent) const;

    /// A0 + sum of all delay matrices (the delay-free dynamics).
    Eigen::MatrixXd delay_free_matrix() const;
};

/// Assembles the delayed closed loop for either coupling mode.  Delays must
/// lie in [0, params.tau_bar]; agents sharing a delay value share one term.
ClosedLoopSystem build_closed_loop(const AgentModel& model, const Topology& topology,
                                   const ProtocolParams& params,
                                   const std::vector<double>& delays, bool include_exo);

} // namespace sfsync
