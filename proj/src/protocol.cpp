#include "sfsync/protocol.hpp"

#include "sfsync/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace sfsync {

namespace {

constexpr double kEpsilonFloor = 1e-12;

double sigma_min(const Eigen::MatrixXcd& M) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
    return svd.singularValues()(M.rows() - 1);
}

// sigma_min(jwI - A + rho*e^{-jw tau} BBt*P) with tau clamped to [0, tau_bar].
struct SweepFunction {
    const Eigen::MatrixXcd A;
    const Eigen::MatrixXcd G; // rho * B * B' * P
    double omega_lo, omega_hi, tau_bar;

    double operator()(double omega, double tau) const {
        omega = std::clamp(omega, omega_lo, omega_hi);
        tau = std::clamp(tau, 0.0, tau_bar);
        const std::complex<double> jw(0.0, omega);
        const std::complex<double> rot = std::exp(std::complex<double>(0.0, -omega * tau));
        const int n = static_cast<int>(A.rows());
        Eigen::MatrixXcd M = jw * Eigen::MatrixXcd::Identity(n, n) - A + rot * G;
        return sigma_min(M);
    }
};

// Nelder-Mead on (omega, tau); the surface is conical near a determinant
// zero, so a simplex method beats gradient-based polishing here.
void polish_min(const SweepFunction& f, double& omega, double& tau, double& val,
                double scale_omega, double scale_tau) {
    struct Vertex { double w, t, v; };
    std::array<Vertex, 3> s = {{
        {omega, tau, val},
        {omega + scale_omega, tau, f(omega + scale_omega, tau)},
        {omega, tau + scale_tau, f(omega, tau + scale_tau)},
    }};
    auto order = [&] { std::sort(s.begin(), s.end(), [](auto& a, auto& b) { return a.v < b.v; }); };
    order();
    for (int it = 0; it < 300; ++it) {
        const double cw = (s[0].w + s[1].w) / 2.0;
        const double ct = (s[0].t + s[1].t) / 2.0;
        Vertex r{cw + (cw - s[2].w), ct + (ct - s[2].t), 0.0};
        r.v = f(r.w, r.t);
        if (r.v < s[0].v) {
            Vertex e{cw + 2.0 * (cw - s[2].w), ct + 2.0 * (ct - s[2].t), 0.0};
            e.v = f(e.w, e.t);
            s[2] = e.v < r.v ? e : r;
        } else if (r.v < s[1].v) {
            s[2] = r;
        } else {
            Vertex c{cw + 0.5 * (s[2].w - cw), ct + 0.5 * (s[2].t - ct), 0.0};
            c.v = f(c.w, c.t);
            if (c.v < s[2].v) {
                s[2] = c;
            } else {
                for (int i = 1; i < 3; ++i) {
                    s[i].w = s[0].w + 0.5 * (s[i].w - s[0].w);
                    s[i].t = s[0].t + 0.5 * (s[i].t - s[0].t);
                    s[i].v = f(s[i].w, s[i].t);
                }
            }
        }
        order();
        if (std::abs(s[2].w - s[0].w) + std::abs(s[2].t - s[0].t) < 1e-14) break;
    }
    if (s[0].v < val) {
        omega = std::clamp(s[0].w, f.omega_lo, f.omega_hi);
        tau = std::clamp(s[0].t, 0.0, f.tau_bar);
        val = s[0].v;
    }
}

// Real coefficients (descending powers, monic) of prod (s - p_k).
std::vector<double> real_poly_from_roots(const std::vector<std::complex<double>>& roots) {
    std::vector<std::complex<double>> c{1.0};
    for (const auto& r : roots) {
        std::vector<std::complex<double>> next(c.size() + 1, 0.0);
        for (size_t i = 0; i < c.size(); ++i) {
            next[i] += c[i];
            next[i + 1] -= c[i] * r;
        }
        c = std::move(next);
    }
    std::vector<double> out(c.size());
    for (size_t i = 0; i < c.size(); ++i) {
        if (std::abs(c[i].imag()) > 1e-9 * (1.0 + std::abs(c[i].real())))
            throw std::invalid_argument(
                "design_observer_gain: desired poles must be closed under conjugation");
        out[i] = c[i].real();
    }
    return out;
}

Eigen::MatrixXd poly_of_matrix(const std::vector<double>& coeffs, const Eigen::MatrixXd& A) {
    const int n = static_cast<int>(A.rows());
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    for (double c : coeffs) M = M * A + c * Eigen::MatrixXd::Identity(n, n);
    return M;
}

// Ackermann observer gain for a single-output pair (c, A).
Eigen::VectorXd ackermann_observer(const Eigen::MatrixXd& A, const Eigen::RowVectorXd& c,
                                   const std::vector<double>& coeffs) {
    const int n = static_cast<int>(A.rows());
    Eigen::MatrixXd O(n, n);
    Eigen::RowVectorXd row = c;
    for (int k = 0; k < n; ++k) {
        O.row(k) = row;
        row = row * A;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(O);
    const auto& sv = svd.singularValues();
    if (sv(0) == 0.0 || sv(n - 1) / sv(0) < 1e-10)
        throw NumericalError("design_observer_gain: observability matrix is rank deficient");
    Eigen::VectorXd en = Eigen::VectorXd::Zero(n);
    en(n - 1) = 1.0;
    return poly_of_matrix(coeffs, A) * O.fullPivLu().solve(en);
}

bool poles_match(const Eigen::MatrixXd& M, std::vector<std::complex<double>> want, double tol) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(M, false);
    std::vector<std::complex<double>> got(es.eigenvalues().data(),
                                          es.eigenvalues().data() + es.eigenvalues().size());
    auto cmp = [](const std::complex<double>& a, const std::complex<double>& b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    };
    std::sort(got.begin(), got.end(), cmp);
    std::sort(want.begin(), want.end(), cmp);
    for (size_t i = 0; i < want.size(); ++i)
        if (std::abs(got[i] - want[i]) > tol) return false;
    return true;
}

} // namespace

double design_rho(double omega_max, double tau_bar, double margin) {
    const double product = tau_bar * omega_max;
    if (product >= std::numbers::pi / 2.0) {
        std::ostringstream os;
        os << "design_rho: tau_bar * omega_max = " << product
           << " violates the delay tolerance bound tau_bar * omega_max < pi/2 ("
           << std::numbers::pi / 2.0 << ")";
        throw UnsolvableError(os.str());
    }
    return (1.0 + margin) * std::max(1.0, 1.0 / std::cos(product));
}

EpsilonSelection select_epsilon(const AgentModel& model, double rho, double tau_bar,
                                double omega_max) {
    if (rho <= 1.0)
        throw std::invalid_argument("select_epsilon: rho must exceed 1");

    // (a) theta: maximal with rho*cos(tau_bar*w) > 1 for all |w| < omega_max + theta.
    double theta;
    if (tau_bar <= 0.0) {
        theta = 1.0; // cos term is 1 for every frequency; any split works
    } else {
        double lo = 0.0;
        double hi = std::numbers::pi / (2.0 * tau_bar) - omega_max;
        if (hi <= 0.0)
            throw UnsolvableError("select_epsilon: tau_bar * omega_max at or beyond pi/2");
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (rho * std::cos(tau_bar * (omega_max + mid)) > 1.0)
                lo = mid;
            else
                hi = mid;
        }
        theta = lo;
        if (theta <= 0.0)
            throw UnsolvableError("select_epsilon: no positive theta satisfies rho*cos(tau_bar*w) > 1");
    }

    // (b) mu: grid minimum of sigma_min(jwI - A) on [omega_max+theta, omega_bar];
    // beyond omega_bar the bound sigma_min > |w| - ||A|| > 1 holds analytically.
    const double norm_A = model.A.operatorNorm();
    const double w_lo = omega_max + theta;
    const double w_hi = std::max(norm_A + 1.0, w_lo);
    double mu = 1.0;
    const int grid = 2000;
    const int n = model.n();
    const Eigen::MatrixXcd Ac = model.A.cast<std::complex<double>>();
    for (int k = 0; k <= grid; ++k) {
        const double w = w_lo + (w_hi - w_lo) * k / grid;
        Eigen::MatrixXcd M = std::complex<double>(0.0, w) * Eigen::MatrixXcd::Identity(n, n) - Ac;
        mu = std::min(mu, sigma_min(M));
        if (w_hi == w_lo) break;
    }
    if (mu <= 0.0)
        throw NumericalError("select_epsilon: frequency floor mu collapsed to zero");

    // (c) shrink epsilon by decades until ||rho*B*B'*P_eps|| <= mu/2.
    for (double eps = 1.0; eps >= kEpsilonFloor; eps /= 10.0) {
        CareSolution sol = solve_care(model, eps);
        const double gain = (rho * model.B * model.B.transpose() * sol.P).operatorNorm();
        if (gain <= mu / 2.0)
            return EpsilonSelection{eps, std::move(sol), mu, theta};
    }
    std::ostringstream os;
    os << "select_epsilon: epsilon floor " << kEpsilonFloor
       << " reached without satisfying ||rho*B*B'*P|| <= mu/2 (mu = " << mu
       << ", rho = " << rho << ", tau_bar = " << tau_bar << ")";
    throw UnsolvableError(os.str());
}

Eigen::MatrixXd design_observer_gain(const AgentModel& model,
                                     std::vector<std::complex<double>> desired_poles) {
    const int n = model.n();
    if (desired_poles.empty()) {
        for (int k = 1; k <= n; ++k) desired_poles.emplace_back(-k, 0.0);
    }
    if (static_cast<int>(desired_poles.size()) != n)
        throw std::invalid_argument("design_observer_gain: need exactly n desired poles");
    for (const auto& p : desired_poles)
        if (p.real() >= 0.0)
            throw std::invalid_argument("design_observer_gain: poles must be in the open left half plane");

    const std::vector<double> coeffs = real_poly_from_roots(desired_poles);

    if (model.q() == 1) {
        Eigen::MatrixXd K = ackermann_observer(model.A, model.C.row(0), coeffs);
        if (!poles_match(model.A - K * model.C, desired_poles, 1e-6 * (1.0 + model.A.norm())))
            throw NumericalError("design_observer_gain: placement verification failed");
        return K;
    }

    // Multi-output: project onto a random output direction and place with
    // Ackermann; retry until the placed spectrum verifies.
    std::mt19937_64 rng(0x5f5ca1e5u);
    std::normal_distribution<double> dist;
    for (int attempt = 0; attempt < 64; ++attempt) {
        Eigen::VectorXd fdir(model.q());
        for (int i = 0; i < model.q(); ++i) fdir(i) = dist(rng);
        fdir.normalize();
        const Eigen::RowVectorXd c = fdir.transpose() * model.C;
        try {
            const Eigen::VectorXd k1 = ackermann_observer(model.A, c, coeffs);
            const Eigen::MatrixXd K = k1 * fdir.transpose();
            if (poles_match(model.A - K * model.C, desired_poles, 1e-6 * (1.0 + model.A.norm())))
                return K;
        } catch (const NumericalError&) {
            // projection not observable; retry with a new direction
        }
    }
    throw NumericalError(
        "design_observer_gain: could not place the requested poles (unobservable mode?)");
}

FrequencyMarginReport verify_frequency_condition(const AgentModel& model,
                                                 const Eigen::MatrixXd& P, double rho,
                                                 double tau_bar, int omega_points,
                                                 int tau_points, double threshold,
                                                 bool polish) {
    omega_points = std::max(omega_points, 3);
    tau_points = std::max(tau_points, 2);

    const double norm_A = model.A.operatorNorm();
    const double w_bar = norm_A + 1.0;

    SweepFunction f{model.A.cast<std::complex<double>>(),
                    (rho * model.B * model.B.transpose() * P).cast<std::complex<double>>(),
                    -w_bar, w_bar, tau_bar};

    FrequencyMarginReport report;
    report.threshold = threshold;
    report.omega_points = omega_points;
    report.tau_points = tau_points;
    report.min_sigma = std::numeric_limits<double>::infinity();

    const double dw = 2.0 * w_bar / (omega_points - 1);
    const double dt = tau_bar > 0.0 ? tau_bar / (tau_points - 1) : 0.0;
    for (int i = 0; i < omega_points; ++i) {
        const double w = -w_bar + i * dw;
        for (int k = 0; k < tau_points; ++k) {
            const double tau = tau_bar > 0.0 ? k * dt : 0.0;
            const double s = f(w, tau);
            if (s < report.min_sigma) {
                report.min_sigma = s;
                report.omega_at_min = w;
                report.tau_at_min = tau;
            }
            if (tau_bar <= 0.0) break;
        }
    }

    if (polish) {
        polish_min(f, report.omega_at_min, report.tau_at_min, report.min_sigma,
                   dw, dt > 0.0 ? dt : 0.1);
    }
    report.pass = report.min_sigma > threshold;
    return report;
}

} // namespace sfsync
