#include "sfsync/errors.hpp"
#include "sfsync/scenario.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

constexpr int kExitInvalidScenario = 2;
constexpr int kExitUnsolvable = 3;
constexpr int kExitNumerical = 4;

void print_matrix(const Eigen::MatrixXd& M, const std::string& name) {
    std::cout << name << " =\n";
    for (int r = 0; r < M.rows(); ++r) {
        std::cout << " ";
        for (int c = 0; c < M.cols(); ++c) std::printf(" % .6e", M(r, c));
        std::cout << "\n";
    }
}

void print_design(const sfsync::DesignReport& report) {
    const auto& p = report.params;
    std::cout << "coupling mode : "
              << (p.mode == sfsync::CouplingMode::FullState ? "full-state" : "partial-state")
              << "\n";
    std::cout << "rho           : " << p.rho << "\n";
    std::cout << "epsilon       : " << p.epsilon << "\n";
    std::cout << "tau_bar       : " << p.tau_bar << "\n";
    if (report.theta) std::cout << "theta         : " << *report.theta << "\n";
    if (report.mu) std::cout << "mu            : " << *report.mu << "\n";
    print_matrix(p.P, "P");
    if (p.K.size()) print_matrix(p.K, "K");
    const auto& fq = report.frequency;
    std::cout << "frequency certificate: min sigma_min = " << fq.min_sigma << " at omega = "
              << fq.omega_at_min << ", tau = " << fq.tau_at_min << " ("
              << (fq.pass ? "PASS" : "FAIL") << ", threshold " << fq.threshold << ")\n";
    for (const auto& note : report.notes) std::cout << "note: " << note << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scale-free synchronization protocol designer and delayed-network simulator"};
    app.require_subcommand(1);

    std::string scenario_path, out_path, axis, values_arg;

    auto* design = app.add_subcommand("design", "Design protocol parameters for a scenario's model");
    design->add_option("scenario", scenario_path, "Scenario file")->required();

    auto* verify = app.add_subcommand("verify", "Frequency-domain delay-stability sweep");
    verify->add_option("scenario", scenario_path, "Scenario file")->required();

    auto* simulate = app.add_subcommand("simulate", "Design, assemble and integrate the closed loop");
    simulate->add_option("scenario", scenario_path, "Scenario file")->required();
    simulate->add_option("--out", out_path, "Write the trajectory as CSV");

    auto* sweep_cmd = app.add_subcommand("sweep", "Run a scenario template across an axis");
    sweep_cmd->add_option("template", scenario_path, "Scenario template file")->required();
    sweep_cmd->add_option("--axis", axis, "One of: N, delays, epsilon, rho")->required();
    sweep_cmd->add_option("--values", values_arg,
                          "Comma-separated values (use ';' between delay lists)")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        const sfsync::Scenario scenario = sfsync::load_scenario(scenario_path);

        if (design->parsed()) {
            print_design(sfsync::design_protocol(scenario));
        } else if (verify->parsed()) {
            const auto report = sfsync::design_protocol(scenario);
            const auto& fq = report.frequency;
            std::cout << "min sigma_min = " << fq.min_sigma << "\n"
                      << "argmin omega  = " << fq.omega_at_min << "\n"
                      << "argmin tau    = " << fq.tau_at_min << "\n"
                      << "grid          = " << fq.omega_points << " x " << fq.tau_points << "\n"
                      << "result        = " << (fq.pass ? "PASS" : "FAIL") << " (threshold "
                      << fq.threshold << ")\n";
            if (!fq.pass) return kExitNumerical;
        } else if (simulate->parsed()) {
            const sfsync::ResultSet rs = sfsync::run_scenario(scenario);
            print_design(rs.design);
            std::cout << "samples            : " << rs.trajectory.times.size() << "\n";
            std::cout << "initial sync error : " << rs.sync_error.front() << "\n";
            std::cout << "final sync error   : " << rs.final_sync_error << "\n";
            std::cout << "tolerance          : " << rs.tolerance << "\n";
            std::cout << "converged          : " << (rs.converged ? "yes" : "no") << "\n";
            if (rs.first_crossing >= 0.0)
                std::cout << "first crossing     : " << rs.first_crossing << " s\n";
            if (!out_path.empty()) {
                sfsync::export_csv(rs, out_path);
                std::cout << "trajectory written : " << out_path << "\n";
            }
        } else if (sweep_cmd->parsed()) {
            const char sep = axis == "delays" ? ';' : ',';
            std::vector<std::string> values;
            std::stringstream ss(values_arg);
            std::string tok;
            while (std::getline(ss, tok, sep))
                if (!tok.empty()) values.push_back(tok);
            const auto entries = sfsync::sweep(scenario, axis, values);
            for (const auto& e : entries) {
                std::cout << axis << " = " << e.value << " : ";
                if (!e.error.empty())
                    std::cout << "ERROR (" << e.error << ")";
                else
                    std::cout << (e.converged ? "converged" : "not converged")
                              << ", final sync error " << e.final_sync_error;
                std::cout << ", " << e.wall_seconds << " s\n";
            }
        }
    } catch (const sfsync::ScenarioError& e) {
        std::cerr << "scenario error: " << e.what() << "\n";
        return kExitInvalidScenario;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitInvalidScenario;
    } catch (const sfsync::UnsolvableError& e) {
        std::cerr << "unsolvable design: " << e.what() << "\n";
        return kExitUnsolvable;
    } catch (const sfsync::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return 0;
}
