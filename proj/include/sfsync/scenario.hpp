#pragma once

#include "sfsync/closed_loop.hpp"
#include "sfsync/dde.hpp"
#include "sfsync/linear_model.hpp"
#include "sfsync/protocol.hpp"
#include "sfsync/topology.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sfsync {

struct ScenarioOverrides {
    std::optional<double> rho;
    std::optional<double> epsilon;
    std::optional<double> step_size;
    std::optional<Eigen::MatrixXd> K;
    std::optional<std::vector<std::complex<double>>> observer_poles;
};

/// Declarative description of one simulation run (schema_version 1).
struct Scenario {
    AgentModel model;
    Topology topology;
    std::vector<double> delays;
    double tau_bar = 0.0;
    CouplingMode mode = CouplingMode::FullState;
    Eigen::MatrixXd initial_states; ///< N x n agent initial states
    Eigen::VectorXd exo_initial;
    std::optional<double> t_max;
    std::uint64_t seed = 0;
    ScenarioOverrides overrides;
};

Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& json_text, const std::string& origin = "scenario");

struct DesignReport {
    ProtocolParams params;
    std::optional<double> mu;
    std::optional<double> theta;
    FrequencyMarginReport frequency;
    std::vector<std::string> notes;
};

struct ResultSet {
    Trajectory trajectory;
    std::vector<double> sync_error;        ///< max_i ||x_i(t) - x_r(t)||
    std::vector<Eigen::VectorXd> inputs;   ///< stacked u_1..u_N per sample
    DesignReport design;
    bool converged = false;
    double first_crossing = -1.0; ///< first time sync_error drops below tolerance
    double tolerance = 0.0;
    double final_sync_error = 0.0;
};

/// Protocol design for a scenario's model and delay bound (graph-free).
DesignReport design_protocol(const Scenario& scenario, bool run_frequency_sweep = true);

ResultSet run_scenario(const Scenario& scenario);

struct SweepEntry {
    std::string value;
    bool converged = false;
    double final_sync_error = 0.0;
    double wall_seconds = 0.0;
    std::string error; ///< empty on success
};

/// Independent runs along one axis: "N", "delays", "epsilon", or "rho".
std::vector<SweepEntry> sweep(const Scenario& scenario_template, const std::string& axis,
                              const std::vector<std::string>& values);

void export_csv(const ResultSet& result, const std::string& path);

/// Deterministic byte representation of the protocol parameters.
std::string serialize_params(const ProtocolParams& params);

} // namespace sfsync
