#include "sfsync/closed_loop.hpp"

#include "sfsync/errors.hpp"

#include <map>
#include <sstream>
#include <stdexcept>

namespace sfsync {

int ClosedLoopSystem::block_offset(BlockKind kind, int agent) const {
    for (const auto& b : layout)
        if (b.kind == kind && b.agent == agent) return b.offset;
    throw std::out_of_range("ClosedLoopSystem: no such block");
}

Eigen::MatrixXd ClosedLoopSystem::delay_free_matrix() const {
    Eigen::MatrixXd M = A0;
    for (const auto& term : delay_terms) M += term.Ad;
    return M;
}

ClosedLoopSystem build_closed_loop(const AgentModel& model, const Topology& topology,
                                   const ProtocolParams& params,
                                   const std::vector<double>& delays, bool include_exo) {
    const int N = topology.size();
    const int n = model.n();
    if (static_cast<int>(delays.size()) != N)
        throw std::invalid_argument("build_closed_loop: need one delay per agent");
    for (int i = 0; i < N; ++i) {
        if (delays[i] < 0.0 || delays[i] > params.tau_bar) {
            std::ostringstream os;
            os << "build_closed_loop: delay tau_" << i + 1 << " = " << delays[i]
               << " outside [0, tau_bar = " << params.tau_bar << "]";
            throw std::invalid_argument(os.str());
        }
    }
    if (!check_membership(topology))
        throw std::invalid_argument("build_closed_loop: topology is not root-reachable");

    const bool partial = params.mode == CouplingMode::PartialState;
    if (partial && params.K.size() == 0)
        throw std::invalid_argument("build_closed_loop: partial-state coupling needs an observer gain K");

    const Eigen::MatrixXd Lbar =
        expanded_laplacian(laplacian(topology), topology.root_set).Lbar;
    std::vector<char> iota(N, 0);
    for (int r : topology.root_set) iota[r] = 1;

    const int blocks_per_agent = partial ? 3 : 2;
    const int dim = N * n * blocks_per_agent + (include_exo ? n : 0);

    ClosedLoopSystem sys;
    sys.state_dim = dim;
    sys.tau_bar = params.tau_bar;
    sys.A0 = Eigen::MatrixXd::Zero(dim, dim);

    const int x_base = 0;
    const int chi_base = N * n;
    const int xhat_base = partial ? 2 * N * n : -1;
    const int exo_base = include_exo ? N * n * blocks_per_agent : -1;

    for (int i = 0; i < N; ++i) {
        sys.layout.push_back({BlockKind::State, i, x_base + i * n, n});
        sys.layout.push_back({BlockKind::ProtocolState, i, chi_base + i * n, n});
        if (partial) sys.layout.push_back({BlockKind::ObserverState, i, xhat_base + i * n, n});
    }
    if (include_exo) sys.layout.push_back({BlockKind::Exosystem, -1, exo_base, n});

    const Eigen::MatrixXd& A = model.A;
    const Eigen::MatrixXd G = params.rho * model.B * model.B.transpose() * params.P;
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);

    for (int i = 0; i < N; ++i) {
        sys.A0.block(x_base + i * n, x_base + i * n, n, n) = A;
        sys.A0.block(chi_base + i * n, chi_base + i * n, n, n) += A;
        if (!partial) {
            // chi' = A*chi - rho BB'P chi(t-tau) + sum_j lbar_ij (x_j - chi_j) - iota_i x_r
            for (int j = 0; j < N; ++j) {
                sys.A0.block(chi_base + i * n, x_base + j * n, n, n) += Lbar(i, j) * I;
                sys.A0.block(chi_base + i * n, chi_base + j * n, n, n) -= Lbar(i, j) * I;
            }
            if (include_exo && iota[i])
                sys.A0.block(chi_base + i * n, exo_base, n, n) -= I;
        } else {
            // chi' = A*chi - sum_j lbar_ij chi_j + xhat_i - rho BB'P chi(t-tau)
            for (int j = 0; j < N; ++j)
                sys.A0.block(chi_base + i * n, chi_base + j * n, n, n) -= Lbar(i, j) * I;
            sys.A0.block(chi_base + i * n, xhat_base + i * n, n, n) += I;

            // xhat' = (A-KC)xhat + sum_j lbar_ij KC x_j - iota_i KC x_r
            //         - rho sum_j lbar_ij BB'P chi_j(t-tau_j)
            const Eigen::MatrixXd KC = params.K * model.C;
            sys.A0.block(xhat_base + i * n, xhat_base + i * n, n, n) += A - KC;
            for (int j = 0; j < N; ++j)
                sys.A0.block(xhat_base + i * n, x_base + j * n, n, n) += Lbar(i, j) * KC;
            if (include_exo && iota[i])
                sys.A0.block(xhat_base + i * n, exo_base, n, n) -= KC;
        }
    }
    if (include_exo) sys.A0.block(exo_base, exo_base, n, n) = A;

    // Delayed couplings enter only through chi_j(t - tau_j); agents sharing a
    // delay value share one term.
    std::map<double, Eigen::MatrixXd> by_delay;
    for (int j = 0; j < N; ++j) {
        auto [it, inserted] = by_delay.try_emplace(delays[j], Eigen::MatrixXd::Zero(dim, dim));
        Eigen::MatrixXd& Ad = it->second;
        Ad.block(x_base + j * n, chi_base + j * n, n, n) -= G;
        Ad.block(chi_base + j * n, chi_base + j * n, n, n) -= G;
        if (partial) {
            for (int i = 0; i < N; ++i)
                Ad.block(xhat_base + i * n, chi_base + j * n, n, n) -= Lbar(i, j) * G;
        }
    }
    for (auto& [tau, Ad] : by_delay) sys.delay_terms.push_back({tau, std::move(Ad)});

    return sys;
}

} // namespace sfsync
