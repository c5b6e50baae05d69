/*
 Copyright 2026 The obslab Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace obslab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("saturate is the identity inside the box") {
    const Eigen::Vector2d x(0.5, -0.5);
    const Eigen::Vector2d levels(1.0, 1.0);
    const Eigen::VectorXd y = saturate(x, levels);
    REQUIRE(y[0] == 0.5);
    REQUIRE(y[1] == -0.5);
}

TEST_CASE("saturate clamps to the level with the sign of the input") {
    const Eigen::Vector2d x(12.0, -12.0);
    const Eigen::Vector2d levels(10.0, 10.0);
    const Eigen::VectorXd y = saturate(x, levels);
    REQUIRE(y[0] == 10.0);
    REQUIRE(y[1] == -10.0);
}

TEST_CASE("saturate with zero levels clamps everything to zero") {
    std::mt19937_64 rng(3);
    for (int k = 0; k < 100; ++k) {
        const Eigen::VectorXd x = test::random_vector(rng, 4, -100.0, 100.0);
        REQUIRE(saturate(x, Eigen::VectorXd::Zero(4)).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("saturate rejects negative levels and size mismatches") {
    REQUIRE_THROWS_AS(saturate(Eigen::Vector2d(1, 1), Eigen::Vector2d(1, -1)), InvalidArgument);
    REQUIRE_THROWS_AS(saturate(Eigen::Vector2d(1, 1), Eigen::Vector3d(1, 1, 1)), InvalidArgument);
}

TEST_CASE("saturate is idempotent and 1-Lipschitz per component") {
    std::mt19937_64 rng(5);
    for (int k = 0; k < 20000; ++k) {
        const int n = 1 + static_cast<int>(rng() % 4);
        const Eigen::VectorXd levels = test::random_vector(rng, n, 0.0, 5.0);
        const Eigen::VectorXd x = test::random_vector(rng, n, -12.0, 12.0);
        const Eigen::VectorXd y = test::random_vector(rng, n, -12.0, 12.0);
        const Eigen::VectorXd sx = saturate(x, levels);
        const Eigen::VectorXd sy = saturate(y, levels);
        REQUIRE((saturate(sx, levels) - sx).cwiseAbs().maxCoeff() == 0.0);
        for (int i = 0; i < n; ++i) {
            REQUIRE(std::abs(sx[i] - sy[i]) <= std::abs(x[i] - y[i]));
        }
    }
}

TEST_CASE("observer tracks the plant exactly from the same state") {
    const ManipulatorModel model = pendubot();
    const ObserverParams params = test::paper_params();
    std::mt19937_64 rng(29);
    for (int k = 0; k < 500; ++k) {
        PlantState plant;
        plant.q = test::random_vector(rng, 2, -6.3, 6.3);
        plant.v = test::random_vector(rng, 2, -10.0, 10.0);  // inside the velocity box
        ObserverState obs;
        obs.q_hat = plant.q;
        obs.v_hat = plant.v;
        Eigen::VectorXd u(1);
        u << std::uniform_real_distribution<double>(-3.0, 3.0)(rng);
        const StateDerivative dp = plant_derivative(model, plant, u);
        const StateDerivative dob = observer_derivative(model, params, obs, plant.q, u);
        // bitwise equality: the observer field must reduce to the plant field
        REQUIRE((dp.qdot - dob.qdot).cwiseAbs().maxCoeff() == 0.0);
        REQUIRE((dp.vdot - dob.vdot).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("observer derivative is zero at the zero-gravity rest point") {
    const ManipulatorModel model = pendubot();
    const ObserverParams params = test::paper_params();
    ObserverState obs;
    obs.q_hat = Eigen::Vector2d(-test::kHalfPi, 0.0);
    obs.v_hat = Eigen::Vector2d::Zero();
    const StateDerivative d = observer_derivative(model, params, obs, obs.q_hat,
                                                  Eigen::VectorXd::Zero(1));
    REQUIRE(d.qdot.isZero(0.0));
    REQUIRE(d.vdot.norm() <= 1e-14);
}

TEST_CASE("only the Coriolis arguments are saturated, friction sees the raw estimate") {
    PendubotParams p;
    p.friction1 = 0.13;
    p.friction2 = 0.07;
    const ManipulatorModel model = pendubot(p);
    ObserverParams params = test::paper_params(50.0);

    const Eigen::Vector2d q(0.4, 1.1);
    ObserverState obs;
    obs.q_hat = Eigen::Vector2d(0.5, 1.0);
    obs.v_hat = Eigen::Vector2d(12.0, -15.0);  // outside the box (10, 10)
    Eigen::VectorXd u(1);
    u << 0.7;

    const StateDerivative d = observer_derivative(model, params, obs, q, u);

    const Eigen::Vector2d v_sat(10.0, -10.0);
    const Eigen::Vector2d innovation = obs.q_hat - q;
    const Eigen::Vector2d friction(p.friction1 * obs.v_hat[0], p.friction2 * obs.v_hat[1]);
    const Eigen::Vector2d rhs = test::pendubot_coriolis_matrix(q, v_sat) * v_sat + friction +
                                test::pendubot_gravity(q) - Eigen::Vector2d(u[0], 0.0);
    const Eigen::Vector2d expected_vdot =
        -test::pendubot_inertia(q).inverse() * rhs -
        params.theta * params.theta * params.beta * innovation;
    const Eigen::Vector2d expected_qdot =
        obs.v_hat - params.theta * params.alpha * innovation;

    REQUIRE((d.qdot - expected_qdot).norm() <= 1e-12 * expected_qdot.norm());
    REQUIRE((d.vdot - expected_vdot).norm() <= 1e-10 * expected_vdot.norm());
}

TEST_CASE("error coordinates: definition and round trip") {
    PlantState plant;
    plant.q = Eigen::Vector2d(0.2, -0.4);
    plant.v = Eigen::Vector2d(1.0, 2.0);
    const double theta = 7.0;

    SECTION("zero error maps to zero") {
        ObserverState obs;
        obs.q_hat = plant.q;
        obs.v_hat = plant.v;
        const ErrorCoordinates e = to_error_coordinates(obs, plant, theta);
        REQUIRE(e.xi.isZero(0.0));
        REQUIRE(e.zeta.isZero(0.0));
    }

    SECTION("unit errors in each block") {
        ObserverState obs;
        obs.q_hat = plant.q + Eigen::Vector2d(theta, 0.0);
        obs.v_hat = plant.v + Eigen::Vector2d(0.0, theta * theta);
        const ErrorCoordinates e = to_error_coordinates(obs, plant, theta);
        REQUIRE_THAT(e.xi[0], WithinAbs(1.0, 1e-15));
        REQUIRE_THAT(e.xi[1], WithinAbs(0.0, 1e-15));
        REQUIRE_THAT(e.zeta[0], WithinAbs(0.0, 1e-15));
        REQUIRE_THAT(e.zeta[1], WithinAbs(1.0, 1e-15));
    }

    SECTION("round trip is exact") {
        std::mt19937_64 rng(31);
        for (int k = 0; k < 1000; ++k) {
            ObserverState obs;
            obs.q_hat = test::random_vector(rng, 2, -5.0, 5.0);
            obs.v_hat = test::random_vector(rng, 2, -20.0, 20.0);
            const double th = std::uniform_real_distribution<double>(0.5, 300.0)(rng);
            const ObserverState back =
                from_error_coordinates(to_error_coordinates(obs, plant, th), plant, th);
            REQUIRE((back.q_hat - obs.q_hat).cwiseAbs().maxCoeff() <= 1e-12);
            REQUIRE((back.v_hat - obs.v_hat).cwiseAbs().maxCoeff() <= 1e-9);
        }
    }

    SECTION("nonpositive theta is rejected") {
        ObserverState obs;
        obs.q_hat = plant.q;
        obs.v_hat = plant.v;
        REQUIRE_THROWS_AS(to_error_coordinates(obs, plant, 0.0), InvalidArgument);
        REQUIRE_THROWS_AS(to_error_coordinates(obs, plant, -1.0), InvalidArgument);
    }
}

TEST_CASE("perturbation term vanishes at zero scaled velocity error") {
    const ManipulatorModel model = pendubot();
    const ObserverParams params = test::paper_params();
    std::mt19937_64 rng(37);
    for (int k = 0; k < 200; ++k) {
        const Eigen::VectorXd q = test::random_vector(rng, 2, -6.3, 6.3);
        const Eigen::VectorXd v = test::random_vector(rng, 2, -15.0, 15.0);
        const Eigen::VectorXd f = perturbation_term(model, q, v, Eigen::Vector2d::Zero(),
                                                    200.0, params);
        REQUIRE(f.norm() == 0.0);
    }
}

TEST_CASE("perturbation term obeys the published Lipschitz constant 54.01") {
    const ManipulatorModel model = pendubot();
    const ObserverParams params = test::paper_params();
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> theta_dist(1.0, 400.0);
    double worst = 0.0;
    for (int k = 0; k < 10000; ++k) {
        const Eigen::VectorXd q = test::random_vector(rng, 2, -6.3, 6.3);
        const Eigen::VectorXd v = test::random_vector(rng, 2, -15.0, 15.0);
        const double theta = theta_dist(rng);
        // spread zeta over magnitudes from microscopic to order one
        const double mag = std::pow(10.0, std::uniform_real_distribution<double>(-6.0, 0.0)(rng));
        const Eigen::VectorXd zeta = mag * test::random_vector(rng, 2, -1.0, 1.0);
        if (zeta.norm() == 0.0) continue;
        const Eigen::VectorXd f = perturbation_term(model, q, v, zeta, theta, params);
        worst = std::max(worst, f.norm() / zeta.norm());
    }
    REQUIRE(worst <= 54.01);
}

TEST_CASE("scaled error dynamics: theta G e + (0, f) equals the direct subtraction") {
    const ManipulatorModel model = pendubot();
    std::mt19937_64 rng(43);
    const Eigen::MatrixXd g2 = build_g(1.0, 1.0, 2);
    std::uniform_real_distribution<double> theta_dist(50.0, 400.0);
    double worst = 0.0;
    for (int k = 0; k < 10000; ++k) {
        const double theta = theta_dist(rng);
        ObserverParams params = test::paper_params(theta);
        PlantState plant;
        plant.q = test::random_vector(rng, 2, -6.3, 6.3);
        plant.v = test::random_vector(rng, 2, -10.0, 10.0);  // within the box: sat(v) = v
        ErrorCoordinates e;
        e.xi = test::random_vector(rng, 2, -0.05, 0.05);
        e.zeta = test::random_vector(rng, 2, -0.005, 0.005);
        const ObserverState obs = from_error_coordinates(e, plant, theta);
        Eigen::VectorXd u(1);
        u << std::uniform_real_distribution<double>(-3.0, 3.0)(rng);

        Eigen::VectorXd stacked(4);
        stacked << e.xi, e.zeta;
        Eigen::VectorXd lhs = theta * g2 * stacked;
        lhs.tail(2) += perturbation_term(model, plant.q, plant.v, e.zeta, theta, params);

        const StateDerivative dp = plant_derivative(model, plant, u);
        const StateDerivative dob = observer_derivative(model, params, obs, plant.q, u);
        Eigen::VectorXd rhs(4);
        rhs.head(2) = (dob.qdot - dp.qdot) / theta;
        rhs.tail(2) = (dob.vdot - dp.vdot) / (theta * theta);

        const double scale = std::max(rhs.norm(), 1e-30);
        worst = std::max(worst, (lhs - rhs).norm() / scale);
    }
    REQUIRE(worst <= 1e-10);
}

TEST_CASE("Coriolis Jacobian matches central finite differences") {
    const ManipulatorModel model = pendubot();
    std::mt19937_64 rng(47);
    const double h = 1e-5;
    double worst = 0.0;
    for (int k = 0; k < 2000; ++k) {
        const Eigen::VectorXd q = test::random_vector(rng, 2, -6.3, 6.3);
        const Eigen::VectorXd v = test::random_vector(rng, 2, -10.0, 10.0);
        const Eigen::MatrixXd jac = coriolis_jacobian(model, q, v);
        Eigen::MatrixXd fd(2, 2);
        for (int j = 0; j < 2; ++j) {
            Eigen::VectorXd vp = v;
            Eigen::VectorXd vm = v;
            vp[j] += h;
            vm[j] -= h;
            fd.col(j) = (coriolis_vector(model, q, vp) - coriolis_vector(model, q, vm)) / (2.0 * h);
        }
        const double scale = std::max(1e-12, fd.norm());
        worst = std::max(worst, (jac - fd).norm() / scale);
    }
    REQUIRE(worst <= 1e-6);
}

TEST_CASE("saturated Coriolis difference obeys the sampled bound B") {
    const ManipulatorModel model = pendubot();
    const Eigen::Vector2d v_bounds(10.0, 10.0);
    SamplingPlan plan;
    plan.q_samples = 2000;
    plan.v_random = 20;
    const BoundEstimate est = estimate_bounds(model, v_bounds, plan);

    std::mt19937_64 rng(53);
    double worst = 0.0;
    for (int k = 0; k < 20000; ++k) {
        const Eigen::VectorXd q = test::random_vector(rng, 2, -6.3, 6.3);
        const Eigen::VectorXd v = test::random_vector(rng, 2, -25.0, 25.0);
        const Eigen::VectorXd w = test::random_vector(rng, 2, -25.0, 25.0);
        if (w.norm() == 0.0) continue;
        const Eigen::VectorXd diff = coriolis_vector(model, q, saturate(v + w, v_bounds)) -
                                     coriolis_vector(model, q, saturate(v, v_bounds));
        worst = std::max(worst, diff.norm() / w.norm());
    }
    REQUIRE(worst <= est.b);
}
