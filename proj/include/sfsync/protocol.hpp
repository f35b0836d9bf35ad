#pragma once

#include "sfsync/linear_model.hpp"
#include "sfsync/riccati.hpp"

#include <Eigen/Dense>
#include <complex>
#include <vector>

namespace sfsync {

enum class CouplingMode { FullState, PartialState };

/// Everything one agent's controller needs.  Computed from the agent model
/// and the delay bound only; no graph knowledge enters.
struct ProtocolParams {
    double rho = 0.0;
    double epsilon = 0.0;
    Eigen::MatrixXd P;       ///< CARE solution at epsilon
    Eigen::MatrixXd K;       ///< observer gain (partial-state only; empty otherwise)
    double tau_bar = 0.0;
    CouplingMode mode = CouplingMode::FullState;
};

/// Gain scaling rho = (1 + margin) * max(1, 1/cos(tau_bar * omega_max)).
/// Throws UnsolvableError when tau_bar * omega_max >= pi/2.
double design_rho(double omega_max, double tau_bar, double margin = 0.01);

struct EpsilonSelection {
    double epsilon = 0.0;
    CareSolution care;
    double mu = 0.0;    ///< high-frequency floor min sigma_min(jwI - A)
    double theta = 0.0; ///< low/high frequency split above omega_max
};

/// Low-gain parameter selection: maximal theta with rho*cos(tau_bar*w) > 1
/// below omega_max + theta, grid estimate of mu above it, then decade
/// shrink of epsilon until ||rho*B*B'*P_eps|| <= mu/2.
/// Throws UnsolvableError when the epsilon floor is reached first.
EpsilonSelection select_epsilon(const AgentModel& model, double rho, double tau_bar,
                                double omega_max);

/// Observer gain K with eig(A - KC) at the desired poles (default -1..-n).
/// Single-output placement is Ackermann; multi-output uses a seeded rank-one
/// output projection with verification and retry.
Eigen::MatrixXd design_observer_gain(
    const AgentModel& model,
    std::vector<std::complex<double>> desired_poles = {});

struct FrequencyMarginReport {
    double min_sigma = 0.0;
    double omega_at_min = 0.0;
    double tau_at_min = 0.0;
    bool pass = false;
    double threshold = 0.0;
    int omega_points = 0;
    int tau_points = 0;
};

/// Certificate sweep of min sigma_min(jwI - A + rho*e^{-jw tau}*B*B'*P) over
/// an (omega, tau) grid, with a local polish around the grid argmin.  This is
/// a numerical report, not a proof.
FrequencyMarginReport verify_frequency_condition(const AgentModel& model,
                                                 const Eigen::MatrixXd& P,
                                                 double rho, double tau_bar,
                                                 int omega_points = 2001,
                                                 int tau_points = 51,
                                                 double threshold = 1e-10,
                                                 bool polish = true);

} // namespace sfsync
