#pragma once

#include "sfsync/linear_model.hpp"

#include <Eigen/Dense>

namespace sfsync {

struct CareSolution {
    double epsilon = 0.0;
    Eigen::MatrixXd P;           ///< symmetric positive definite
    double residual_norm = 0.0;  ///< Frobenius norm of the ARE residual
};

/// Stabilizing solution of A'P + PA - PBB'P + eps*I = 0.  Stable invariant
/// subspace of the Hamiltonian, then Newton-Kleinman refinement.
/// epsilon below 1e-12 is clamped to that floor.
CareSolution solve_care(const AgentModel& model, double epsilon);

/// Frobenius norm of A'P + PA - PBB'P + eps*I.
double care_residual(const AgentModel& model, double epsilon, const Eigen::MatrixXd& P);

/// Solves Acl' X + X Acl + Q = 0 for X (dense Kronecker formulation;
/// intended for the small state dimensions this library targets).
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& Acl, const Eigen::MatrixXd& Q);

} // namespace sfsync
