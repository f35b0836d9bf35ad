#include "sfsync/linear_model.hpp"

#include "sfsync/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <complex>
#include <sstream>

namespace sfsync {

namespace {

constexpr double kRankThreshold = 1e-8;

// Smallest/largest singular value ratio rank decision.  Ratios within a
// factor of 10 of the threshold are flagged as ambiguous.
bool full_rank(const Eigen::MatrixXcd& M, std::vector<std::string>* warnings,
               const std::string& label) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
    const auto& sv = svd.singularValues();
    const double smax = sv(0);
    const double smin = sv(sv.size() - 1);
    if (smax == 0.0) return false;
    const double ratio = smin / smax;
    if (ratio > kRankThreshold / 10.0 && ratio < kRankThreshold * 10.0 && warnings) {
        std::ostringstream os;
        os << label << ": singular value ratio " << ratio
           << " is within a decade of the rank threshold " << kRankThreshold;
        warnings->push_back(os.str());
    }
    return ratio >= kRankThreshold;
}

} // namespace

AgentModel AgentModel::make(Eigen::MatrixXd A, Eigen::MatrixXd B, Eigen::MatrixXd C) {
    if (A.rows() == 0 || A.rows() != A.cols())
        throw std::invalid_argument("AgentModel: A must be square and nonempty");
    if (B.rows() != A.rows())
        throw std::invalid_argument("AgentModel: rows(B) must equal rows(A)");
    if (C.cols() != A.rows())
        throw std::invalid_argument("AgentModel: cols(C) must equal rows(A)");
    if (B.cols() == 0 || C.rows() == 0)
        throw std::invalid_argument("AgentModel: B and C must be nonempty");
    return AgentModel{std::move(A), std::move(B), std::move(C)};
}

double axis_tolerance(const Eigen::MatrixXd& A) {
    // A defective eigenvalue of multiplicity k moves by O(eps^(1/k)) under
    // rounding, so the axis band must widen with the dimension or a
    // transformed nilpotent chain misclassifies.
    const double defect = std::pow(std::numeric_limits<double>::epsilon(),
                                   1.0 / static_cast<double>(A.rows()));
    return std::max(1e-8, defect) * (1.0 + A.operatorNorm());
}

ValidationReport validate(const AgentModel& model) {
    const int n = model.n();
    const double tol = axis_tolerance(model.A);

    Eigen::EigenSolver<Eigen::MatrixXd> es(model.A);
    const Eigen::VectorXcd eigs = es.eigenvalues();

    ValidationReport report;
    report.spectrum_in_closed_lhp = true;
    report.stabilizable = true;
    report.detectable = true;

    const Eigen::MatrixXcd Ac = model.A.cast<std::complex<double>>();
    const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(n, n);

    for (int k = 0; k < eigs.size(); ++k) {
        const std::complex<double> lambda = eigs(k);
        if (lambda.real() > tol) report.spectrum_in_closed_lhp = false;
        if (lambda.real() < -tol) continue; // PBH only needed on closed RHP modes

        Eigen::MatrixXcd Ms(n, n + model.m());
        Ms << Ac - lambda * I, model.B.cast<std::complex<double>>();
        if (!full_rank(Ms, &report.warnings, "PBH stabilizability"))
            report.stabilizable = false;

        Eigen::MatrixXcd Md(n, n + model.q());
        Md << Ac.adjoint() - std::conj(lambda) * I,
              model.C.transpose().cast<std::complex<double>>();
        if (!full_rank(Md, &report.warnings, "PBH detectability"))
            report.detectable = false;
    }
    return report;
}

double omega_max(const Eigen::MatrixXd& A) {
    const double tol = axis_tolerance(A);
    Eigen::EigenSolver<Eigen::MatrixXd> es(A, /*computeEigenvectors=*/false);
    const Eigen::VectorXcd eigs = es.eigenvalues();

    bool hurwitz = true;
    double wmax = 0.0;
    for (int k = 0; k < eigs.size(); ++k) {
        const double re = eigs(k).real();
        if (re > tol) {
            std::ostringstream os;
            os << "omega_max: eigenvalue with real part " << re
               << " exceeds the closed-left-half-plane tolerance " << tol;
            throw NumericalError(os.str());
        }
        if (re >= -tol) {
            hurwitz = false;
            const double im = std::abs(eigs(k).imag());
            if (im > tol) wmax = std::max(wmax, im); // sub-tolerance Im is a rounded zero
        }
    }
    return hurwitz ? 0.0 : wmax;
}

} // namespace sfsync
