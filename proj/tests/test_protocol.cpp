#include "sfsync/errors.hpp"
#include "sfsync/protocol.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

using namespace sfsync;

TEST_CASE("design_rho") {
    SUBCASE("Hurwitz models keep the unit floor") {
        CHECK(design_rho(0.0, 4.0) == doctest::Approx(1.01));
        CHECK(design_rho(0.0, 0.0) == doctest::Approx(1.01));
    }
    SUBCASE("oscillatory bound 1.01 / cos(1.5)") {
        CHECK(design_rho(1.0, 1.5) == doctest::Approx(1.01 / std::cos(1.5)).epsilon(1e-12));
    }
    SUBCASE("margin parameter scales the result") {
        CHECK(design_rho(1.0, 1.0, 0.1) == doctest::Approx(1.1 / std::cos(1.0)).epsilon(1e-12));
    }
    SUBCASE("past the solvability boundary") {
        CHECK_THROWS_AS(design_rho(1.0, 1.6), UnsolvableError);
        CHECK_THROWS_AS(design_rho(2.0, 0.8), UnsolvableError);
    }
    SUBCASE("monotone in the delay bound") {
        double prev = design_rho(1.0, 0.0);
        for (double tb = 0.1; tb < 1.55; tb += 0.1) {
            const double cur = design_rho(1.0, tb);
            CHECK(cur >= prev);
            prev = cur;
        }
    }
}

TEST_CASE("select_epsilon") {
    SUBCASE("Hurwitz scalar accepts a moderate epsilon") {
        const auto model = AgentModel::make((Eigen::MatrixXd(1, 1) << -1).finished(),
                                            (Eigen::MatrixXd(1, 1) << 1).finished(),
                                            (Eigen::MatrixXd(1, 1) << 1).finished());
        const EpsilonSelection sel = select_epsilon(model, 1.01, 2.0, 0.0);
        CHECK(sel.epsilon > 0.0);
        CHECK(sel.mu > 0.0);
        // ||rho B B' P|| must sit at or below half the high-frequency floor
        CHECK(1.01 * sel.care.P(0, 0) <= sel.mu / 2.0 + 1e-12);
        // the selected point must actually solve the CARE
        CHECK(sel.care.residual_norm <= 1e-8 * (1.0 + sel.care.P.squaredNorm()));
    }
    SUBCASE("theta split is positive and respects the gain inequality") {
        Eigen::MatrixXd A(2, 2);
        A << 0, 1, -1, 0;
        const auto model = AgentModel::make(A, (Eigen::MatrixXd(2, 1) << 0, 1).finished(),
                                            Eigen::MatrixXd::Identity(2, 2));
        const double wm = omega_max(A);
        const double rho = design_rho(wm, 0.5);
        const EpsilonSelection sel = select_epsilon(model, rho, 0.5, wm);
        CHECK(sel.theta > 0.0);
        CHECK(rho * std::cos(0.5 * (wm + sel.theta)) >= 1.0 - 1e-6);
        const Eigen::MatrixXd gain = rho * model.B * model.B.transpose() * sel.care.P;
        CHECK(gain.operatorNorm() <= sel.mu / 2.0 + 1e-12);
    }
    SUBCASE("zero delay bound still yields a valid selection") {
        const EpsilonSelection sel = select_epsilon(test::triple_integrator(), 1.01, 0.0, 0.0);
        CHECK(sel.epsilon > 0.0);
        const auto model = test::triple_integrator();
        const Eigen::MatrixXd Acl =
            model.A - 1.01 * model.B * model.B.transpose() * sel.care.P;
        Eigen::EigenSolver<Eigen::MatrixXd> es(Acl, false);
        CHECK(es.eigenvalues().real().maxCoeff() < 0.0);
    }
    SUBCASE("triple integrator at a 4s bound hits the epsilon floor") {
        // The mu/2 cap forces epsilon below the 1e-12 floor here, so the
        // selection must report the design as unsolvable rather than return
        // a gain that violates the inequality.
        CHECK_THROWS_AS(select_epsilon(test::triple_integrator(), 1.01, 4.0, 0.0),
                        UnsolvableError);
    }
}

TEST_CASE("observer gain") {
    SUBCASE("triple integrator with position output, poles -1,-2,-3") {
        const Eigen::MatrixXd K = design_observer_gain(test::triple_integrator(false));
        REQUIRE(K.rows() == 3);
        REQUIRE(K.cols() == 1);
        CHECK(K(0, 0) == doctest::Approx(6.0).epsilon(1e-9));
        CHECK(K(1, 0) == doctest::Approx(11.0).epsilon(1e-9));
        CHECK(K(2, 0) == doctest::Approx(6.0).epsilon(1e-9));
    }
    SUBCASE("scalar: a - k c at -4 gives k = 5") {
        const auto model = AgentModel::make((Eigen::MatrixXd(1, 1) << 1).finished(),
                                            (Eigen::MatrixXd(1, 1) << 1).finished(),
                                            (Eigen::MatrixXd(1, 1) << 1).finished());
        const Eigen::MatrixXd K = design_observer_gain(model, {{-4.0, 0.0}});
        CHECK(K(0, 0) == doctest::Approx(5.0).epsilon(1e-12));
    }
    SUBCASE("placed spectrum matches the request (char-poly oracle)") {
        const std::vector<std::complex<double>> poles = {{-2.0, 0.0}, {-3.0, 0.0}, {-5.0, 0.0}};
        const auto model = test::triple_integrator(false);
        const Eigen::MatrixXd K = design_observer_gain(model, poles);
        const Eigen::MatrixXd Ae = model.A - K * model.C;
        Eigen::EigenSolver<Eigen::MatrixXd> es(Ae, false);
        Eigen::VectorXcd got = es.eigenvalues();
        std::sort(got.data(), got.data() + got.size(),
                  [](auto a, auto b) { return a.real() < b.real(); });
        CHECK(std::abs(got(0) - std::complex<double>(-5, 0)) < 1e-8);
        CHECK(std::abs(got(1) - std::complex<double>(-3, 0)) < 1e-8);
        CHECK(std::abs(got(2) - std::complex<double>(-2, 0)) < 1e-8);
        // independent check: the placed matrix annihilates its target polynomial
        Eigen::MatrixXd p = Eigen::MatrixXd::Identity(3, 3);
        for (const auto& pole : poles) p = (Ae - pole.real() * Eigen::MatrixXd::Identity(3, 3)) * p;
        CHECK(p.norm() <= 1e-8 * std::pow(1.0 + Ae.norm(), 3));
    }
    SUBCASE("multi-output placement lands in the left half plane") {
        Eigen::MatrixXd A(3, 3);
        A << 0, 1, 0, 0, 0, 1, 0, 0, 0;
        Eigen::MatrixXd C(2, 3);
        C << 1, 0, 0, 0, 1, 0;
        const auto model =
            AgentModel::make(A, (Eigen::MatrixXd(3, 1) << 0, 0, 1).finished(), C);
        const Eigen::MatrixXd K = design_observer_gain(model);
        REQUIRE(K.rows() == 3);
        REQUIRE(K.cols() == 2);
        Eigen::EigenSolver<Eigen::MatrixXd> es(model.A - K * model.C, false);
        CHECK(es.eigenvalues().real().maxCoeff() < -1e-6);
    }
    SUBCASE("undetectable pair is rejected") {
        const auto model = AgentModel::make((Eigen::MatrixXd(1, 1) << 1).finished(),
                                            (Eigen::MatrixXd(1, 1) << 1).finished(),
                                            (Eigen::MatrixXd(1, 1) << 0).finished());
        CHECK_THROWS_AS(design_observer_gain(model), NumericalError);
    }
}

TEST_CASE("frequency margin sweep") {
    SUBCASE("triple integrator design has a positive margin at its own bound") {
        const auto model = test::triple_integrator();
        const CareSolution care = solve_care(model, 1e-6);
        const FrequencyMarginReport rep =
            verify_frequency_condition(model, care.P, 1.0, 4.0, 801, 21);
        CHECK(rep.pass);
        CHECK(rep.min_sigma > 1e-10);
        CHECK(rep.omega_points == 801);
        CHECK(rep.tau_points == 21);
    }
    SUBCASE("zero delay bound reduces to a pure imaginary-axis sweep") {
        const auto model = test::triple_integrator();
        const CareSolution care = solve_care(model, 1e-4);
        const FrequencyMarginReport rep =
            verify_frequency_condition(model, care.P, 1.01, 0.0, 801, 5);
        CHECK(rep.pass);
        CHECK(rep.tau_at_min == doctest::Approx(0.0));
        // at tau = 0 the loop is the stabilized matrix; its minimum distance
        // to singularity along the axis must be positive
        CHECK(rep.min_sigma > 0.0);
    }
    SUBCASE("a design past the phase boundary is flagged") {
        // oscillator with rho = 1 at tau_bar = 1.6 > pi/2: the delayed gain
        // flips sign near the resonance and the sweep must find a
        // near-singularity
        Eigen::MatrixXd A(2, 2);
        A << 0, 1, -1, 0;
        const auto model = AgentModel::make(A, (Eigen::MatrixXd(2, 1) << 0, 1).finished(),
                                            Eigen::MatrixXd::Identity(2, 2));
        const CareSolution care = solve_care(model, 1e-4);
        const FrequencyMarginReport rep =
            verify_frequency_condition(model, care.P, 1.0, 1.7, 1201, 41, 1e-6);
        CHECK_FALSE(rep.pass);
        CHECK(rep.min_sigma < 1e-6);
    }
    SUBCASE("polish never reports a larger minimum than the raw grid") {
        const auto model = test::triple_integrator();
        const CareSolution care = solve_care(model, 1e-5);
        const FrequencyMarginReport raw =
            verify_frequency_condition(model, care.P, 1.0, 4.0, 401, 11, 1e-10, false);
        const FrequencyMarginReport polished =
            verify_frequency_condition(model, care.P, 1.0, 4.0, 401, 11, 1e-10, true);
        CHECK(polished.min_sigma <= raw.min_sigma + 1e-15);
    }
}
