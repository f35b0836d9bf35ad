#pragma once

#include "sfsync/closed_loop.hpp"

#include <Eigen/Dense>
#include <deque>
#include <functional>
#include <vector>

namespace sfsync {

/// Piecewise cubic Hermite history of an integration run.  Times at or
/// before t0 evaluate the initial function phi; later times interpolate
/// between stored (t, z, z') knots.  Never extrapolates.
class HistoryBuffer {
public:
    using InitialFn = std::function<Eigen::VectorXd(double)>;

    HistoryBuffer(InitialFn phi, double t0, double tau_max, int dim);

    Eigen::VectorXd eval(double t) const;
    void push(double t, Eigen::VectorXd z, Eigen::VectorXd dz);

    double t_front() const;
    double t_back() const;
    int dim() const { return dim_; }

private:
    struct Knot {
        double t;
        Eigen::VectorXd z, dz;
    };

    void prune();

    InitialFn phi_;
    double t0_;
    double tau_max_;
    int dim_;
    std::deque<Knot> knots_;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> states;
    std::vector<StateBlock> layout;

    Eigen::VectorXd block(size_t sample, const StateBlock& b) const {
        return states[sample].segment(b.offset, b.dim);
    }
};

/// Method-of-steps RK4 with cubic Hermite dense output for delayed lookups.
/// step_size must not exceed a quarter of the smallest positive delay so
/// that every delayed evaluation lands in completed history.
Trajectory integrate(const ClosedLoopSystem& system, const HistoryBuffer::InitialFn& initial,
                     double step_size, double t_max);

/// Constant initial function phi(t) = z0.
HistoryBuffer::InitialFn constant_history(Eigen::VectorXd z0);

} // namespace sfsync
