#include "sfsync/scenario.hpp"

#include "sfsync/errors.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <random>
#include <sstream>

namespace sfsync {

using nlohmann::json;

namespace {

Eigen::MatrixXd parse_matrix(const json& j, const std::string& field) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw ScenarioError(field + ": expected a nested array of numbers");
    const size_t rows = j.size();
    const size_t cols = j[0].size();
    Eigen::MatrixXd M(rows, cols);
    for (size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols)
            throw ScenarioError(field + ": rows must all have the same length");
        for (size_t c = 0; c < cols; ++c) {
            if (!j[r][c].is_number())
                throw ScenarioError(field + ": entries must be numbers");
            M(r, c) = j[r][c].get<double>();
        }
    }
    return M;
}

Eigen::VectorXd parse_vector(const json& j, const std::string& field) {
    if (!j.is_array()) throw ScenarioError(field + ": expected an array of numbers");
    Eigen::VectorXd v(j.size());
    for (size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ScenarioError(field + ": entries must be numbers");
        v(i) = j[i].get<double>();
    }
    return v;
}

Eigen::MatrixXd seeded_initial(int N, int n, std::uint64_t seed, double range) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-range, range);
    Eigen::MatrixXd X(N, n);
    for (int i = 0; i < N; ++i)
        for (int k = 0; k < n; ++k) X(i, k) = dist(rng);
    return X;
}

Eigen::VectorXd seeded_exo(int n, std::uint64_t seed, double range) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::uniform_real_distribution<double> dist(-range, range);
    Eigen::VectorXd v(n);
    for (int k = 0; k < n; ++k) v(k) = dist(rng);
    return v;
}

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

double max_real_eig(const Eigen::MatrixXd& M) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(M, false);
    return es.eigenvalues().real().maxCoeff();
}

} // namespace

Scenario parse_scenario(const std::string& json_text, const std::string& origin) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ScenarioError(origin + ": JSON parse failure: " + e.what());
    }

    if (!j.contains("schema_version") || !j["schema_version"].is_number_integer())
        throw ScenarioError(origin + ": schema_version: missing or not an integer");
    if (j["schema_version"].get<int>() != 1)
        throw ScenarioError(origin + ": schema_version: only version 1 is supported");

    if (!j.contains("model")) throw ScenarioError(origin + ": model: missing");
    const json& jm = j["model"];
    for (const char* key : {"A", "B", "C"})
        if (!jm.contains(key)) throw ScenarioError(origin + ": model." + std::string(key) + ": missing");

    AgentModel model = [&] {
        try {
            return AgentModel::make(parse_matrix(jm["A"], "model.A"), parse_matrix(jm["B"], "model.B"),
                                    parse_matrix(jm["C"], "model.C"));
        } catch (const std::invalid_argument& e) {
            throw ScenarioError(origin + ": model: " + e.what());
        }
    }();
    const ValidationReport vr = validate(model);
    if (!vr.spectrum_in_closed_lhp)
        throw ScenarioError(origin + ": model.A: spectrum not in the closed left half plane");
    if (!vr.stabilizable) throw ScenarioError(origin + ": model: (A,B) not stabilizable");
    if (!vr.detectable) throw ScenarioError(origin + ": model: (C,A) not detectable");

    if (!j.contains("topology")) throw ScenarioError(origin + ": topology: missing");
    const json& jt = j["topology"];
    if (!jt.contains("adjacency")) throw ScenarioError(origin + ": topology.adjacency: missing");
    if (!jt.contains("root_set")) throw ScenarioError(origin + ": topology.root_set: missing");

    Topology topo;
    topo.adjacency = parse_matrix(jt["adjacency"], "topology.adjacency");
    if (topo.adjacency.rows() != topo.adjacency.cols())
        throw ScenarioError(origin + ": topology.adjacency: must be square");
    for (const auto& r : jt["root_set"]) {
        if (!r.is_number_integer())
            throw ScenarioError(origin + ": topology.root_set: entries must be integers (1-based)");
        const int idx = r.get<int>();
        if (idx < 1 || idx > topo.size())
            throw ScenarioError(origin + ": topology.root_set: index " + std::to_string(idx) +
                                " out of range 1.." + std::to_string(topo.size()));
        topo.root_set.push_back(idx - 1);
    }
    if (topo.root_set.empty()) throw ScenarioError(origin + ": topology.root_set: must be nonempty");
    try {
        laplacian(topo);
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(origin + ": topology.adjacency: " + e.what());
    }
    if (!check_membership(topo))
        throw ScenarioError(origin + ": topology: some node is unreachable from the root set");

    Scenario sc{std::move(model), std::move(topo), {}, 0.0};

    if (!j.contains("delays")) throw ScenarioError(origin + ": delays: missing");
    const Eigen::VectorXd d = parse_vector(j["delays"], "delays");
    if (d.size() != sc.topology.size())
        throw ScenarioError(origin + ": delays: need one delay per agent");
    for (int i = 0; i < d.size(); ++i) {
        if (d(i) < 0.0) throw ScenarioError(origin + ": delays: negative delay at agent " +
                                            std::to_string(i + 1));
        sc.delays.push_back(d(i));
    }

    if (!j.contains("tau_bar") || !j["tau_bar"].is_number())
        throw ScenarioError(origin + ": tau_bar: missing or not a number");
    sc.tau_bar = j["tau_bar"].get<double>();
    const double dmax = d.size() ? d.maxCoeff() : 0.0;
    if (dmax > sc.tau_bar)
        throw ScenarioError(origin + ": delays: max delay " + fmt17(dmax) +
                            " exceeds tau_bar " + fmt17(sc.tau_bar));

    // Full-state coupling is enacted exactly when C is the identity.
    const int n = sc.model.n();
    sc.mode = (sc.model.C.rows() == n && sc.model.C == Eigen::MatrixXd::Identity(n, n))
                  ? CouplingMode::FullState
                  : CouplingMode::PartialState;

    const int N = sc.topology.size();
    double range = 5.0;
    sc.seed = 1;
    if (j.contains("initial")) {
        const json& ji = j["initial"];
        if (ji.contains("seed")) sc.seed = ji["seed"].get<std::uint64_t>();
        if (ji.contains("range")) range = ji["range"].get<double>();
        if (ji.contains("agents")) {
            sc.initial_states = parse_matrix(ji["agents"], "initial.agents");
            if (sc.initial_states.rows() != N || sc.initial_states.cols() != n)
                throw ScenarioError(origin + ": initial.agents: expected " + std::to_string(N) +
                                    " rows of " + std::to_string(n) + " numbers");
        }
        if (ji.contains("exosystem")) {
            sc.exo_initial = parse_vector(ji["exosystem"], "initial.exosystem");
            if (sc.exo_initial.size() != n)
                throw ScenarioError(origin + ": initial.exosystem: expected " + std::to_string(n) +
                                    " numbers");
        }
    }
    if (sc.initial_states.size() == 0) sc.initial_states = seeded_initial(N, n, sc.seed, range);
    if (sc.exo_initial.size() == 0) sc.exo_initial = seeded_exo(n, sc.seed, range);

    if (j.contains("t_max")) {
        if (!j["t_max"].is_number() || j["t_max"].get<double>() <= 0.0)
            throw ScenarioError(origin + ": t_max: must be a positive number");
        sc.t_max = j["t_max"].get<double>();
    }

    if (j.contains("overrides")) {
        const json& jo = j["overrides"];
        if (jo.contains("rho")) sc.overrides.rho = jo["rho"].get<double>();
        if (jo.contains("epsilon")) sc.overrides.epsilon = jo["epsilon"].get<double>();
        if (jo.contains("step_size")) sc.overrides.step_size = jo["step_size"].get<double>();
        if (jo.contains("K")) {
            Eigen::MatrixXd K = parse_matrix(jo["K"], "overrides.K");
            if (K.rows() != n || K.cols() != sc.model.q())
                throw ScenarioError(origin + ": overrides.K: expected " + std::to_string(n) + "x" +
                                    std::to_string(sc.model.q()));
            sc.overrides.K = std::move(K);
        }
        if (jo.contains("observer_poles")) {
            std::vector<std::complex<double>> poles;
            for (const auto& p : jo["observer_poles"]) {
                if (p.is_number())
                    poles.emplace_back(p.get<double>(), 0.0);
                else if (p.is_array() && p.size() == 2)
                    poles.emplace_back(p[0].get<double>(), p[1].get<double>());
                else
                    throw ScenarioError(origin +
                                        ": overrides.observer_poles: entries are numbers or [re, im]");
            }
            sc.overrides.observer_poles = std::move(poles);
        }
    }
    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError(path + ": cannot open scenario file");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path);
}

DesignReport design_protocol(const Scenario& scenario, bool run_frequency_sweep) {
    DesignReport report;
    const double wm = omega_max(scenario.model.A);

    // the solvability gate applies regardless of overrides
    const double designed_rho = design_rho(wm, scenario.tau_bar);
    double rho = designed_rho;
    if (scenario.overrides.rho) {
        rho = *scenario.overrides.rho;
        report.notes.push_back("rho overridden to " + fmt17(rho));
        if (rho * std::cos(scenario.tau_bar * wm) <= 1.0)
            report.notes.push_back("override rho does not satisfy rho*cos(tau_bar*omega_max) > 1; "
                                   "convergence rests on the frequency certificate, not the theorem");
    }

    ProtocolParams params;
    params.rho = rho;
    params.tau_bar = scenario.tau_bar;
    params.mode = scenario.mode;

    if (scenario.overrides.epsilon) {
        const double eps = *scenario.overrides.epsilon;
        CareSolution sol = solve_care(scenario.model, eps);
        params.epsilon = sol.epsilon;
        params.P = sol.P;
        report.notes.push_back("epsilon overridden to " + fmt17(eps));
    } else {
        EpsilonSelection sel = select_epsilon(scenario.model, rho, scenario.tau_bar, wm);
        params.epsilon = sel.epsilon;
        params.P = sel.care.P;
        report.mu = sel.mu;
        report.theta = sel.theta;
    }

    if (scenario.mode == CouplingMode::PartialState) {
        if (scenario.overrides.K) {
            params.K = *scenario.overrides.K;
            const double maxre = max_real_eig(scenario.model.A - params.K * scenario.model.C);
            if (maxre >= 0.0)
                throw ScenarioError("overrides.K: A - KC is not Hurwitz (max Re eig = " +
                                    fmt17(maxre) + ")");
        } else {
            params.K = design_observer_gain(
                scenario.model,
                scenario.overrides.observer_poles.value_or(std::vector<std::complex<double>>{}));
        }
    }

    if (run_frequency_sweep)
        report.frequency = verify_frequency_condition(scenario.model, params.P, params.rho,
                                                      params.tau_bar);
    report.params = std::move(params);
    return report;
}

ResultSet run_scenario(const Scenario& scenario) {
    ResultSet result;
    result.design = design_protocol(scenario);
    const ProtocolParams& params = result.design.params;

    const ClosedLoopSystem sys =
        build_closed_loop(scenario.model, scenario.topology, params, scenario.delays, true);

    double min_pos_tau = 0.0;
    for (double tau : scenario.delays)
        if (tau > 0.0 && (min_pos_tau == 0.0 || tau < min_pos_tau)) min_pos_tau = tau;
    const double h = scenario.overrides.step_size.value_or(
        min_pos_tau > 0.0 ? min_pos_tau / 4.0 : 0.01);

    double t_max;
    if (scenario.t_max) {
        t_max = *scenario.t_max;
    } else {
        // horizon from the slowest delay-free closed-loop mode; the error
        // block spectrum is {lambda_A - lambda_Lbar} over all pairs
        const Eigen::MatrixXd G =
            params.rho * scenario.model.B * scenario.model.B.transpose() * params.P;
        double dom = max_real_eig(scenario.model.A - G);
        const Eigen::MatrixXd Lbar =
            expanded_laplacian(laplacian(scenario.topology), scenario.topology.root_set).Lbar;
        Eigen::EigenSolver<Eigen::MatrixXd> esl(Lbar, false);
        dom = std::max(dom, max_real_eig(scenario.model.A) -
                                esl.eigenvalues().real().minCoeff());
        if (scenario.mode == CouplingMode::PartialState)
            dom = std::max(dom, max_real_eig(scenario.model.A - params.K * scenario.model.C));
        t_max = dom < 0.0 ? std::clamp(50.0 / -dom, 10.0, 2000.0) : 2000.0;
    }

    const int n = scenario.model.n();
    const int N = scenario.topology.size();
    Eigen::VectorXd z0 = Eigen::VectorXd::Zero(sys.state_dim);
    for (int i = 0; i < N; ++i)
        z0.segment(sys.block_offset(BlockKind::State, i), n) = scenario.initial_states.row(i);
    z0.segment(sys.block_offset(BlockKind::Exosystem, -1), n) = scenario.exo_initial;

    result.trajectory = integrate(sys, constant_history(z0), h, t_max);

    const Eigen::MatrixXd BtP = params.rho * scenario.model.B.transpose() * params.P;
    const int exo_off = sys.block_offset(BlockKind::Exosystem, -1);
    const size_t samples = result.trajectory.times.size();
    result.sync_error.resize(samples);
    result.inputs.resize(samples);
    for (size_t s = 0; s < samples; ++s) {
        const Eigen::VectorXd& z = result.trajectory.states[s];
        const Eigen::VectorXd xr = z.segment(exo_off, n);
        double err = 0.0;
        Eigen::VectorXd u(N * scenario.model.m());
        for (int i = 0; i < N; ++i) {
            err = std::max(err,
                           (z.segment(sys.block_offset(BlockKind::State, i), n) - xr).norm());
            u.segment(i * scenario.model.m(), scenario.model.m()) =
                -BtP * z.segment(sys.block_offset(BlockKind::ProtocolState, i), n);
        }
        result.sync_error[s] = err;
        result.inputs[s] = std::move(u);
    }

    const double initial_err = result.sync_error.front();
    result.tolerance = initial_err > 0.0 ? 1e-2 * initial_err : 1e-2;
    result.final_sync_error = result.sync_error.back();

    const double window_start = 0.9 * t_max;
    result.converged = true;
    for (size_t s = 0; s < samples; ++s) {
        if (result.first_crossing < 0.0 && result.sync_error[s] < result.tolerance)
            result.first_crossing = result.trajectory.times[s];
        if (result.trajectory.times[s] >= window_start &&
            result.sync_error[s] >= result.tolerance)
            result.converged = false;
    }
    return result;
}

std::vector<SweepEntry> sweep(const Scenario& scenario_template, const std::string& axis,
                              const std::vector<std::string>& values) {
    auto make_run = [&](const std::string& value) -> Scenario {
        Scenario sc = scenario_template;
        if (axis == "N") {
            const int N = std::stoi(value);
            if (N < 1) throw ScenarioError("sweep: N must be >= 1");
            // representative chain graph rooted at agent 1; delays cycle
            // through the template's list
            sc.topology.adjacency = Eigen::MatrixXd::Zero(N, N);
            for (int i = 1; i < N; ++i) sc.topology.adjacency(i, i - 1) = 1.0;
            sc.topology.root_set = {0};
            sc.delays.resize(N);
            for (int i = 0; i < N; ++i)
                sc.delays[i] = scenario_template.delays[i % scenario_template.delays.size()];
            sc.initial_states = seeded_initial(N, sc.model.n(), sc.seed, 5.0);
        } else if (axis == "delays") {
            std::vector<double> d;
            std::stringstream ss(value);
            std::string tok;
            while (std::getline(ss, tok, ',')) d.push_back(std::stod(tok));
            if (static_cast<int>(d.size()) != sc.topology.size())
                throw ScenarioError("sweep: delay list length must match N");
            sc.delays = std::move(d);
        } else if (axis == "epsilon") {
            sc.overrides.epsilon = std::stod(value);
        } else if (axis == "rho") {
            sc.overrides.rho = std::stod(value);
        } else {
            throw ScenarioError("sweep: unknown axis '" + axis + "' (use N, delays, epsilon, rho)");
        }
        return sc;
    };

    std::vector<std::future<SweepEntry>> futures;
    futures.reserve(values.size());
    for (const std::string& value : values) {
        futures.push_back(std::async(std::launch::async, [&, value]() {
            SweepEntry entry;
            entry.value = value;
            const auto start = std::chrono::steady_clock::now();
            try {
                const ResultSet rs = run_scenario(make_run(value));
                entry.converged = rs.converged;
                entry.final_sync_error = rs.final_sync_error;
            } catch (const std::exception& e) {
                entry.error = e.what();
            }
            entry.wall_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            return entry;
        }));
    }
    std::vector<SweepEntry> entries;
    entries.reserve(values.size());
    for (auto& fut : futures) entries.push_back(fut.get());
    return entries;
}

void export_csv(const ResultSet& result, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("export_csv: cannot open " + path + " for writing");

    const auto& layout = result.trajectory.layout;
    int N = 0, n = 0;
    bool partial = false;
    for (const auto& b : layout) {
        if (b.kind == BlockKind::State) {
            N = std::max(N, b.agent + 1);
            n = b.dim;
        }
        if (b.kind == BlockKind::ObserverState) partial = true;
    }
    const int m = result.inputs.empty() ? 0 : static_cast<int>(result.inputs[0].size()) / N;

    out << "t";
    for (int i = 1; i <= N; ++i)
        for (int k = 1; k <= n; ++k) out << ",x" << i << "_" << k;
    for (int i = 1; i <= N; ++i)
        for (int k = 1; k <= n; ++k) out << ",chi" << i << "_" << k;
    if (partial)
        for (int i = 1; i <= N; ++i)
            for (int k = 1; k <= n; ++k) out << ",xhat" << i << "_" << k;
    for (int k = 1; k <= n; ++k) out << ",xr_" << k;
    for (int i = 1; i <= N; ++i)
        for (int k = 1; k <= m; ++k) out << ",u" << i << "_" << k;
    out << ",sync_error\n";

    auto write_block = [&](std::ostream& os, const Eigen::VectorXd& v) {
        for (int k = 0; k < v.size(); ++k) os << "," << fmt17(v(k));
    };

    for (size_t s = 0; s < result.trajectory.times.size(); ++s) {
        const Eigen::VectorXd& z = result.trajectory.states[s];
        out << fmt17(result.trajectory.times[s]);
        for (BlockKind kind :
             {BlockKind::State, BlockKind::ProtocolState, BlockKind::ObserverState}) {
            for (const auto& b : layout)
                if (b.kind == kind) write_block(out, z.segment(b.offset, b.dim));
        }
        for (const auto& b : layout)
            if (b.kind == BlockKind::Exosystem) write_block(out, z.segment(b.offset, b.dim));
        write_block(out, result.inputs[s]);
        out << "," << fmt17(result.sync_error[s]) << "\n";
    }
    if (!out) throw std::runtime_error("export_csv: write failure on " + path);
}

std::string serialize_params(const ProtocolParams& params) {
    std::ostringstream os;
    auto matrix = [&](const Eigen::MatrixXd& M) {
        os << "[";
        for (int r = 0; r < M.rows(); ++r) {
            os << (r ? ",[" : "[");
            for (int c = 0; c < M.cols(); ++c) os << (c ? "," : "") << fmt17(M(r, c));
            os << "]";
        }
        os << "]";
    };
    os << "{\"rho\":" << fmt17(params.rho) << ",\"epsilon\":" << fmt17(params.epsilon)
       << ",\"tau_bar\":" << fmt17(params.tau_bar) << ",\"mode\":\""
       << (params.mode == CouplingMode::FullState ? "full" : "partial") << "\",\"P\":";
    matrix(params.P);
    os << ",\"K\":";
    matrix(params.K);
    os << "}";
    return os.str();
}

} // namespace sfsync
