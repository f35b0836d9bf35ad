#include "sfsync/riccati.hpp"

#include "sfsync/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <sstream>

namespace sfsync {

namespace {

constexpr double kEpsilonFloor = 1e-12;

bool is_hurwitz(const Eigen::MatrixXd& M) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(M, /*computeEigenvectors=*/false);
    return es.eigenvalues().real().maxCoeff() < 0.0;
}

} // namespace

double care_residual(const AgentModel& model, double epsilon, const Eigen::MatrixXd& P) {
    const Eigen::MatrixXd& A = model.A;
    const Eigen::MatrixXd BBt = model.B * model.B.transpose();
    const Eigen::MatrixXd R = A.transpose() * P + P * A - P * BBt * P +
                              epsilon * Eigen::MatrixXd::Identity(A.rows(), A.cols());
    return R.norm();
}

Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& Acl, const Eigen::MatrixXd& Q) {
    const int n = static_cast<int>(Acl.rows());
    const Eigen::MatrixXd At = Acl.transpose();
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n * n, n * n);
    // vec(At*X) = (I kron At) vec(X); vec(X*Acl) = (At kron I) vec(X)
    for (int i = 0; i < n; ++i)
        M.block(i * n, i * n, n, n) += At;
    for (int bi = 0; bi < n; ++bi)
        for (int bj = 0; bj < n; ++bj)
            M.block(bi * n, bj * n, n, n) +=
                At(bj, bi) * Eigen::MatrixXd::Identity(n, n);
    const Eigen::VectorXd q = Eigen::Map<const Eigen::VectorXd>(Q.data(), n * n);
    const Eigen::VectorXd x = M.fullPivLu().solve(-q);
    Eigen::MatrixXd X = Eigen::Map<const Eigen::MatrixXd>(x.data(), n, n);
    return 0.5 * (X + X.transpose());
}

CareSolution solve_care(const AgentModel& model, double epsilon) {
    if (epsilon <= 0.0)
        throw std::invalid_argument("solve_care: epsilon must be positive");
    epsilon = std::max(epsilon, kEpsilonFloor);

    const int n = model.n();
    const Eigen::MatrixXd& A = model.A;
    const Eigen::MatrixXd BBt = model.B * model.B.transpose();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);

    Eigen::MatrixXd H(2 * n, 2 * n);
    H << A, -BBt, -epsilon * I, -A.transpose();

    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> ces(H.cast<std::complex<double>>());
    if (ces.info() != Eigen::Success)
        throw NumericalError("solve_care: Hamiltonian eigendecomposition failed");

    Eigen::MatrixXcd U(2 * n, n);
    int picked = 0;
    for (int k = 0; k < 2 * n && picked < n; ++k) {
        if (ces.eigenvalues()(k).real() < 0.0)
            U.col(picked++) = ces.eigenvectors().col(k);
    }
    if (picked != n)
        throw NumericalError("solve_care: Hamiltonian has fewer than n stable eigenvalues");

    const Eigen::MatrixXcd U1 = U.topRows(n);
    const Eigen::MatrixXcd U2 = U.bottomRows(n);

    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(U1);
    const auto& sv = svd.singularValues();
    if (sv(n - 1) <= 0.0 || sv(0) / sv(n - 1) > 1e12) {
        std::ostringstream os;
        os << "solve_care: stable subspace extraction ill-conditioned (cond "
           << (sv(n - 1) > 0.0 ? sv(0) / sv(n - 1) : std::numeric_limits<double>::infinity())
           << ")";
        throw NumericalError(os.str());
    }

    Eigen::MatrixXd P = (U2 * U1.fullPivLu().inverse()).real();
    P = 0.5 * (P + P.transpose());

    // Newton-Kleinman refinement: keep the best-residual iterate.
    double best = care_residual(model, epsilon, P);
    Eigen::MatrixXd Pbest = P;
    for (int pass = 0; pass < 5; ++pass) {
        const Eigen::MatrixXd Acl = A - BBt * P;
        const Eigen::MatrixXd Q = epsilon * I + P * BBt * P;
        Eigen::MatrixXd Pnext = solve_lyapunov(Acl, Q);
        const double res = care_residual(model, epsilon, Pnext);
        if (!Pnext.allFinite() || res >= best) break;
        P = Pnext;
        best = res;
        Pbest = P;
    }
    P = Pbest;

    if (!is_hurwitz(A - BBt * P))
        throw NumericalError("solve_care: computed solution is not stabilizing");

    return CareSolution{epsilon, P, best};
}

} // namespace sfsync
