#include "sfsync/dde.hpp"

#include "sfsync/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sfsync {

HistoryBuffer::HistoryBuffer(InitialFn phi, double t0, double tau_max, int dim)
    : phi_(std::move(phi)), t0_(t0), tau_max_(tau_max), dim_(dim) {
    if (tau_max_ < 0.0) throw std::invalid_argument("HistoryBuffer: tau_max must be >= 0");
}

double HistoryBuffer::t_front() const { return t0_ - tau_max_; }

double HistoryBuffer::t_back() const { return knots_.empty() ? t0_ : knots_.back().t; }

void HistoryBuffer::push(double t, Eigen::VectorXd z, Eigen::VectorXd dz) {
    if (!knots_.empty() && t <= knots_.back().t)
        throw std::invalid_argument("HistoryBuffer: knot times must be strictly increasing");
    knots_.push_back({t, std::move(z), std::move(dz)});
    prune();
}

void HistoryBuffer::prune() {
    const double keep_from = t_back() - tau_max_;
    while (knots_.size() > 1 && knots_[1].t <= keep_from) knots_.pop_front();
}

Eigen::VectorXd HistoryBuffer::eval(double t) const {
    const double slack = 1e-9 * (1.0 + std::abs(t));
    if (t <= t0_) {
        if (t < t_front() - slack)
            throw std::out_of_range("HistoryBuffer: evaluation before the initial interval");
        return phi_(std::max(t, t_front()));
    }
    if (knots_.empty() || t > t_back() + slack)
        throw std::out_of_range("HistoryBuffer: evaluation past the stored history");
    if (knots_.size() == 1 || t <= knots_.front().t) return knots_.front().z;

    // locate the segment [t_k, t_{k+1}] containing t
    size_t lo = 0, hi = knots_.size() - 1;
    while (hi - lo > 1) {
        const size_t mid = (lo + hi) / 2;
        if (knots_[mid].t <= t)
            lo = mid;
        else
            hi = mid;
    }
    const Knot& a = knots_[lo];
    const Knot& b = knots_[hi];
    const double dt = b.t - a.t;
    const double s = std::clamp((t - a.t) / dt, 0.0, 1.0);
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    const double h10 = s3 - 2.0 * s2 + s;
    const double h01 = -2.0 * s3 + 3.0 * s2;
    const double h11 = s3 - s2;
    return h00 * a.z + (h10 * dt) * a.dz + h01 * b.z + (h11 * dt) * b.dz;
}

HistoryBuffer::InitialFn constant_history(Eigen::VectorXd z0) {
    return [z0 = std::move(z0)](double) { return z0; };
}

Trajectory integrate(const ClosedLoopSystem& system, const HistoryBuffer::InitialFn& initial,
                     double step_size, double t_max) {
    if (step_size <= 0.0) throw std::invalid_argument("integrate: step_size must be positive");
    if (t_max <= 0.0) throw std::invalid_argument("integrate: t_max must be positive");

    double min_pos_tau = 0.0;
    double max_tau = 0.0;
    for (const auto& term : system.delay_terms) {
        if (term.tau < 0.0) throw std::invalid_argument("integrate: negative delay");
        max_tau = std::max(max_tau, term.tau);
        if (term.tau > 0.0 && (min_pos_tau == 0.0 || term.tau < min_pos_tau))
            min_pos_tau = term.tau;
    }
    if (min_pos_tau > 0.0 && step_size > min_pos_tau / 4.0 + 1e-15) {
        std::ostringstream os;
        os << "integrate: step_size " << step_size << " exceeds min positive delay / 4 = "
           << min_pos_tau / 4.0;
        throw std::invalid_argument(os.str());
    }

    // zero-delay terms act on the live state; fold them into A0
    Eigen::MatrixXd Aeff = system.A0;
    std::vector<const DelayTerm*> delayed;
    for (const auto& term : system.delay_terms) {
        if (term.tau == 0.0)
            Aeff += term.Ad;
        else
            delayed.push_back(&term);
    }

    HistoryBuffer hist(initial, 0.0, max_tau, system.state_dim);

    auto f = [&](double t, const Eigen::VectorXd& z) -> Eigen::VectorXd {
        Eigen::VectorXd dz = Aeff * z;
        for (const DelayTerm* term : delayed) dz += term->Ad * hist.eval(t - term->tau);
        return dz;
    };

    Eigen::VectorXd z = initial(0.0);
    if (static_cast<int>(z.size()) != system.state_dim)
        throw std::invalid_argument("integrate: initial function dimension mismatch");
    hist.push(0.0, z, f(0.0, z));

    Trajectory traj;
    traj.layout = system.layout;
    traj.times.push_back(0.0);
    traj.states.push_back(z);

    double t = 0.0;
    long step = 0;
    while (t < t_max - 1e-12 * (1.0 + t_max)) {
        const double h = std::min(step_size, t_max - t);
        const Eigen::VectorXd k1 = f(t, z);
        const Eigen::VectorXd k2 = f(t + h / 2.0, z + (h / 2.0) * k1);
        const Eigen::VectorXd k3 = f(t + h / 2.0, z + (h / 2.0) * k2);
        const Eigen::VectorXd k4 = f(t + h, z + h * k3);
        z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        ++step;
        t = (h == step_size) ? step * step_size : t_max;
        if (!z.allFinite()) {
            std::ostringstream os;
            os << "integrate: non-finite state at t = " << t;
            throw NumericalError(os.str());
        }
        hist.push(t, z, f(t, z));
        traj.times.push_back(t);
        traj.states.push_back(z);
    }
    return traj;
}

} // namespace sfsync
