#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace sfsync {

/// Homogeneous agent model x' = Ax + Bu(t - tau), y = Cx.  The exosystem
/// x_r' = A x_r reuses (A, C) and needs no separate type.
struct AgentModel {
    Eigen::MatrixXd A; ///< n x n state dynamics
    Eigen::MatrixXd B; ///< n x m input map
    Eigen::MatrixXd C; ///< q x n output map

    int n() const { return static_cast<int>(A.rows()); }
    int m() const { return static_cast<int>(B.cols()); }
    int q() const { return static_cast<int>(C.rows()); }

    /// Throws std::invalid_argument on dimension mismatch.
    static AgentModel make(Eigen::MatrixXd A, Eigen::MatrixXd B, Eigen::MatrixXd C);
};

struct ValidationReport {
    bool stabilizable = false;       ///< PBH test at every closed-RHP eigenvalue
    bool detectable = false;         ///< dual PBH test
    bool spectrum_in_closed_lhp = false;
    std::vector<std::string> warnings; ///< rank decisions close to the threshold

    bool ok() const { return stabilizable && detectable && spectrum_in_closed_lhp; }
};

/// PBH stabilizability/detectability and closed-left-half-plane spectrum checks.
ValidationReport validate(const AgentModel& model);

/// Largest |Im(lambda)| over imaginary-axis eigenvalues of A, or 0 when A is
/// Hurwitz.  Throws NumericalError if A has an eigenvalue with real part
/// beyond the scale-relative tolerance (closed-LHP assumption violated).
double omega_max(const Eigen::MatrixXd& A);

/// Scale-relative tolerance used to classify eigenvalues as imaginary-axis.
double axis_tolerance(const Eigen::MatrixXd& A);

} // namespace sfsync
