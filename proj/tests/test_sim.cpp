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

namespace {

Trajectory synthetic_trajectory(double t_final, double dt,
                                const std::function<double(double)>& magnitude) {
    Trajectory traj;
    for (double t = 0.0; t <= t_final + 0.5 * dt; t += dt) {
        traj.times.push_back(t);
        traj.error_norms.push_back(magnitude(t));
        traj.scaled_error_norms.push_back(magnitude(t));
        traj.plant_states.push_back({Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()});
        traj.observer_states.push_back({Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()});
        traj.inputs.push_back(Eigen::VectorXd::Zero(1));
        traj.domain_violation_flags.push_back(false);
    }
    return traj;
}

}  // namespace

TEST_CASE("step_rk4 on scalar exponential decay") {
    const auto field = [](double, const Eigen::VectorXd& x) { return (-x).eval(); };
    Eigen::VectorXd x(1);
    x << 1.0;
    const Eigen::VectorXd next = step_rk4(field, x, 0.0, 0.1);
    REQUIRE(std::abs(next[0] - std::exp(-0.1)) <= std::pow(0.1, 5));
}

TEST_CASE("step_rk4 with a zero field leaves the state unchanged") {
    const auto field = [](double, const Eigen::VectorXd& x) {
        return Eigen::VectorXd::Zero(x.size()).eval();
    };
    const Eigen::Vector3d x(1.0, -2.0, 3.5);
    const Eigen::VectorXd next = step_rk4(field, x, 0.0, 0.25);
    REQUIRE((next - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("step_rk4 closes a harmonic oscillator period to 1e-10") {
    const auto field = [](double, const Eigen::VectorXd& x) {
        return Eigen::Vector2d(x[1], -x[0]).eval();
    };
    const double period = test::kTwoPi;
    const double dt = period / 1000.0;
    Eigen::VectorXd x(2);
    x << 1.0, 0.0;
    for (int k = 0; k < 1000; ++k) x = step_rk4(field, x, k * dt, dt);
    REQUIRE((x - Eigen::Vector2d(1.0, 0.0)).norm() <= 1e-10);
}

TEST_CASE("step_rk4 rejects nonpositive dt and reports divergence with the time") {
    const auto field = [](double, const Eigen::VectorXd& x) { return x; };
    Eigen::VectorXd x(1);
    x << 1.0;
    REQUIRE_THROWS_AS(step_rk4(field, x, 0.0, 0.0), InvalidArgument);

    const auto blowup = [](double, const Eigen::VectorXd& x) {
        return (x * std::numeric_limits<double>::infinity()).eval();
    };
    try {
        step_rk4(blowup, x, 1.5, 0.5);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        REQUIRE_THAT(e.time, WithinAbs(2.0, 1e-12));
    }
}

TEST_CASE("paper scenario: error collapses by three orders within a second") {
    const ManipulatorModel model = pendubot();
    const ObserverParams params = test::paper_params();
    const SimulationConfig cfg = test::paper_sim_config(5e-5, 1.0, 20);
    const Trajectory traj = simulate(model, params, cfg);

    REQUIRE_THAT(traj.error_norms.front(), WithinRel(std::sqrt(8.0), 1e-12));
    REQUIRE(traj.error_norms.back() < 1e-3 * traj.error_norms.front());
    // after the transient the error must not rebound above its starting level
    const size_t tail_start = traj.size() / 2;
    for (size_t k = tail_start; k < traj.size(); ++k) {
        REQUIRE(traj.error_norms[k] < 1e-3 * traj.error_norms.front());
    }
    // plant stays within the assumed velocity box
    for (const PlantState& s : traj.plant_states) {
        REQUIRE(s.v.cwiseAbs().maxCoeff() <= 10.0);
    }
    REQUIRE_FALSE(traj.domain_violation_flags.front());
}

TEST_CASE("identical initial states track exactly over ten seconds") {
    const ManipulatorModel model = pendubot();
    const ObserverParams params = test::paper_params();
    SimulationConfig cfg = test::paper_sim_config(1e-4, 10.0, 100);
    cfg.observer_initial.q_hat = cfg.plant_initial.q;
    cfg.observer_initial.v_hat = cfg.plant_initial.v;
    const Trajectory traj = simulate(model, params, cfg);
    for (double err : traj.error_norms) REQUIRE(err <= 1e-9);
}

TEST_CASE("theta below theta* still produces a trajectory") {
    const ManipulatorModel model = pendubot();
    const ObserverParams params = test::paper_params(50.0);
    const SimulationConfig cfg = test::paper_sim_config(1e-4, 0.5, 10);
    const Trajectory traj = simulate(model, params, cfg);
    REQUIRE(traj.size() > 10);
    REQUIRE(traj.error_norms.back() < traj.error_norms.front());
}

TEST_CASE("an unstable step size raises DivergenceError with the partial trajectory") {
    const ManipulatorModel model = pendubot();
    const ObserverParams params = test::paper_params();
    // amplification is ~5.8x per step at theta dt = 4; overflow needs a few hundred steps
    const SimulationConfig cfg = test::paper_sim_config(2e-2, 30.0, 1);
    REQUIRE(cfg.stability_margin(params) > 2.8);
    try {
        simulate(model, params, cfg);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        REQUIRE(e.time > 0.0);
        REQUIRE(e.partial.size() >= 1);
        REQUIRE(e.partial.times.front() == 0.0);
        REQUIRE(std::is_sorted(e.partial.times.begin(), e.partial.times.end()));
    }
}

TEST_CASE("record stride keeps first and last samples") {
    const ManipulatorModel model = pendubot();
    const ObserverParams params = test::paper_params();
    SimulationConfig cfg = test::paper_sim_config(1e-3, 0.0997, 7);
    const Trajectory traj = simulate(model, params, cfg);
    // 100 steps, stride 7 -> k = 0, 7, ..., 98, plus the final step 100
    REQUIRE(traj.times.front() == 0.0);
    REQUIRE_THAT(traj.times.back(), WithinRel(0.1, 1e-12));
    REQUIRE(traj.size() == 16);
}

TEST_CASE("simulation config validation") {
    const ManipulatorModel model = pendubot();
    const ObserverParams params = test::paper_params();
    SimulationConfig cfg = test::paper_sim_config();
    cfg.dt = 0.0;
    REQUIRE_THROWS_AS(cfg.validate(model, params), InvalidArgument);
    cfg = test::paper_sim_config();
    cfg.t_final = cfg.dt / 2.0;
    REQUIRE_THROWS_AS(cfg.validate(model, params), InvalidArgument);
    cfg = test::paper_sim_config();
    cfg.record_stride = 0;
    REQUIRE_THROWS_AS(cfg.validate(model, params), InvalidArgument);
    cfg = test::paper_sim_config();
    cfg.input = InputSignal::zero(2);  // wrong channel count
    REQUIRE_THROWS_AS(cfg.validate(model, params), InvalidArgument);

    cfg = test::paper_sim_config(2e-5);
    REQUIRE_THAT(cfg.stability_margin(params), WithinRel(0.004, 1e-12));
}

TEST_CASE("input signal kinds") {
    const InputSignal zero = InputSignal::zero(2);
    REQUIRE(zero.eval(3.0).isZero(0.0));

    const InputSignal constant = InputSignal::make_constant(Eigen::Vector2d(1.0, -2.0));
    REQUIRE(constant.eval(100.0)[1] == -2.0);

    const InputSignal sine = InputSignal::sine(Eigen::VectorXd::Constant(1, 1.5),
                                               Eigen::VectorXd::Constant(1, 100.0));
    REQUIRE_THAT(sine.eval(0.013)[0], WithinRel(1.5 * std::sin(1.3), 1e-14));

    const InputSignal table = InputSignal::table(
        {0.0, 1.0, 2.0},
        {Eigen::VectorXd::Constant(1, 5.0), Eigen::VectorXd::Constant(1, 6.0),
         Eigen::VectorXd::Constant(1, 7.0)});
    REQUIRE(table.eval(-1.0)[0] == 5.0);  // clamped before the first sample
    REQUIRE(table.eval(0.5)[0] == 5.0);
    REQUIRE(table.eval(1.0)[0] == 6.0);
    REQUIRE(table.eval(99.0)[0] == 7.0);

    REQUIRE_THROWS_AS(InputSignal::table({0.0, 0.0}, {Eigen::VectorXd::Constant(1, 1.0),
                                                      Eigen::VectorXd::Constant(1, 2.0)}),
                      InvalidArgument);
}

TEST_CASE("halving dt shrinks the global error fourth-order") {
    const ManipulatorModel model = pendubot();
    const ObserverParams params = test::paper_params();
    const double t_final = 0.05;

    const auto final_state = [&](double dt) {
        SimulationConfig cfg = test::paper_sim_config(dt, t_final, 1 << 20);
        const Trajectory traj = simulate(model, params, cfg);
        const size_t last = traj.size() - 1;
        Eigen::VectorXd x(8);
        x << traj.plant_states[last].q, traj.plant_states[last].v,
            traj.observer_states[last].q_hat, traj.observer_states[last].v_hat;
        return x;
    };

    const Eigen::VectorXd reference = final_state(6.25e-6);
    const double err_a = (final_state(2e-4) - reference).norm();
    const double err_b = (final_state(1e-4) - reference).norm();
    const double err_c = (final_state(5e-5) - reference).norm();
    REQUIRE(err_a / err_b >= 8.0);
    REQUIRE(err_b / err_c >= 8.0);
}

TEST_CASE("fit_envelope recovers an exact exponential") {
    const Trajectory traj =
        synthetic_trajectory(2.0, 0.01, [](double t) { return 2.0 * std::exp(-3.0 * t); });
    const EnvelopeFit fit = fit_envelope(traj, 1e-10);
    REQUIRE_THAT(fit.gamma_hat, WithinAbs(3.0, 1e-6));
    REQUIRE_THAT(fit.k_hat, WithinAbs(1.0, 1e-6));
    REQUIRE(fit.residual <= 1e-9);
    REQUIRE(fit.t_start > 0.0);
    REQUIRE_THAT(fit.t_end, WithinAbs(2.0, 1e-9));
}

TEST_CASE("fit_envelope on a constant error reports rate zero") {
    const Trajectory traj = synthetic_trajectory(1.0, 0.01, [](double) { return 0.5; });
    const EnvelopeFit fit = fit_envelope(traj, 1e-10);
    REQUIRE_THAT(fit.gamma_hat, WithinAbs(0.0, 1e-9));
}

TEST_CASE("fit_envelope needs enough samples above the floor") {
    const Trajectory tiny =
        synthetic_trajectory(1.0, 0.01, [](double) { return 1e-14; });
    REQUIRE_THROWS_AS(fit_envelope(tiny, 1e-10), InsufficientData);

    const Trajectory few =
        synthetic_trajectory(0.05, 0.01, [](double t) { return std::exp(-t); });
    REQUIRE_THROWS_AS(fit_envelope(few, 1e-10), InsufficientData);
}

TEST_CASE("paper scenario: fitted decay rate clears the synthesized target") {
    const ManipulatorModel model = pendubot();
    const ObserverParams params = test::paper_params();
    const SimulationConfig cfg = test::paper_sim_config(2e-5, 1.0, 10);
    const Trajectory traj = simulate(model, params, cfg);
    const EnvelopeFit fit = fit_envelope(traj, 1e-10);
    REQUIRE(fit.gamma_hat >= 1.27);
    REQUIRE(fit.k_hat >= 1.0);
}

TEST_CASE("global convergence from a 1000 rad/s velocity estimate error") {
    const ManipulatorModel model = pendubot();
    const ObserverParams params = test::paper_params();
    SimulationConfig cfg = test::paper_sim_config(2e-5, 2.0, 50);
    const double c = 1000.0 / std::sqrt(2.0);
    cfg.observer_initial.v_hat = Eigen::Vector2d(c, c);
    const Trajectory traj = simulate(model, params, cfg);
    REQUIRE_THAT(traj.error_norms.front(), WithinRel(1000.0, 1e-12));
    REQUIRE(traj.error_norms.back() < 1e-3 * traj.error_norms.front());
}

TEST_CASE("Lyapunov function decreases along the paper scenario") {
    const ManipulatorModel model = pendubot();
    const ObserverParams params = test::paper_params();
    const SimulationConfig cfg = test::paper_sim_config(2e-5, 1.0, 50);
    const Trajectory traj = simulate(model, params, cfg);
    const Eigen::MatrixXd s = solve_lyapunov(build_g(params.alpha, params.beta, 2));

    const auto value = [&](size_t i) {
        const ErrorCoordinates e =
            to_error_coordinates(traj.observer_states[i], traj.plant_states[i], params.theta);
        Eigen::VectorXd stacked(4);
        stacked << e.xi, e.zeta;
        return stacked.dot(s * stacked);
    };
    for (size_t k = 0; k + 1 < traj.size(); ++k) {
        if (traj.scaled_error_norms[k] <= 1e-10 || traj.scaled_error_norms[k + 1] <= 1e-10) {
            continue;
        }
        REQUIRE(value(k + 1) <= value(k) * (1.0 + 1e-8));
    }
}

TEST_CASE("the input cancels exactly from the error dynamics") {
    const ManipulatorModel model = pendubot();
    const ObserverParams params = test::paper_params();
    std::mt19937_64 rng(79);
    for (int k = 0; k < 500; ++k) {
        PlantState plant;
        plant.q = test::random_vector(rng, 2, -6.3, 6.3);
        plant.v = test::random_vector(rng, 2, -10.0, 10.0);
        ObserverState obs;
        obs.q_hat = plant.q + test::random_vector(rng, 2, -0.5, 0.5);
        obs.v_hat = plant.v + test::random_vector(rng, 2, -5.0, 5.0);

        const auto error_field = [&](const Eigen::VectorXd& u) {
            const StateDerivative dp = plant_derivative(model, plant, u);
            const StateDerivative dob = observer_derivative(model, params, obs, plant.q, u);
            Eigen::VectorXd e(4);
            e.head(2) = dob.qdot - dp.qdot;
            e.tail(2) = dob.vdot - dp.vdot;
            return e;
        };

        const Eigen::VectorXd e0 = error_field(Eigen::VectorXd::Zero(1));
        const Eigen::VectorXd e1 = error_field(Eigen::VectorXd::Constant(1, 5.0));
        const double scale = std::max(1.0, e0.norm());
        REQUIRE((e1 - e0).norm() / scale <= 1e-12);
    }
}

TEST_CASE("scaled error norms are nearly input-amplitude independent") {
    // The input cancels from the error field, so two runs differing only in
    // amplitude disagree only through the plant trajectory entering the
    // Coriolis perturbation; at these magnitudes that is a sub-percent effect.
    const ManipulatorModel model = pendubot();
    const ObserverParams params = test::paper_params();

    const auto run = [&](double amplitude) {
        SimulationConfig cfg = test::paper_sim_config(5e-5, 1.0, 20);
        cfg.input = InputSignal::sine(Eigen::VectorXd::Constant(1, amplitude),
                                      Eigen::VectorXd::Constant(1, 100.0));
        return simulate(model, params, cfg);
    };
    const Trajectory a = run(1.5);
    const Trajectory b = run(0.75);
    REQUIRE(a.size() == b.size());
    for (const PlantState& s : a.plant_states) REQUIRE(s.v.cwiseAbs().maxCoeff() <= 10.0);
    for (const PlantState& s : b.plant_states) REQUIRE(s.v.cwiseAbs().maxCoeff() <= 10.0);

    double worst = 0.0;
    for (size_t k = 1; k < a.size(); ++k) {
        if (a.scaled_error_norms[k] <= 1e-9 || b.scaled_error_norms[k] <= 1e-9) continue;
        const double rel = std::abs(a.scaled_error_norms[k] - b.scaled_error_norms[k]) /
                           std::max(a.scaled_error_norms[k], b.scaled_error_norms[k]);
        worst = std::max(worst, rel);
    }
    REQUIRE(worst <= 1e-2);
}

TEST_CASE("campaign: every sampled initial state meets the target rate") {
    const ManipulatorModel model = pendubot();
    const ObserverParams params = test::paper_params();
    const SimulationConfig cfg = test::paper_sim_config(5e-5, 1.5, 20);
    const CampaignReport report =
        initial_state_campaign(model, params, cfg, 0.01, 6, 12345, 1.27);
    REQUIRE(report.trials == 6);
    REQUIRE(report.results.size() == 6);
    REQUIRE(report.fraction_meeting_gamma == 1.0);
    for (const CampaignTrial& trial : report.results) {
        REQUIRE((trial.initial.q_hat - cfg.plant_initial.q).norm() < 0.01);
        REQUIRE((trial.initial.v_hat.cwiseAbs().array() <= 10.0).all());
        REQUIRE(trial.final_error_norm < 1e-6);
    }
}

TEST_CASE("campaign reports are deterministic for a fixed seed") {
    const ManipulatorModel model = pendubot();
    const ObserverParams params = test::paper_params();
    const SimulationConfig cfg = test::paper_sim_config(1e-4, 0.5, 20);
    const CampaignReport a = initial_state_campaign(model, params, cfg, 0.01, 4, 99, 1.27);
    const CampaignReport b = initial_state_campaign(model, params, cfg, 0.01, 4, 99, 1.27);
    REQUIRE(a.results.size() == b.results.size());
    for (size_t i = 0; i < a.results.size(); ++i) {
        REQUIRE((a.results[i].initial.q_hat - b.results[i].initial.q_hat).cwiseAbs().maxCoeff() == 0.0);
        REQUIRE((a.results[i].initial.v_hat - b.results[i].initial.v_hat).cwiseAbs().maxCoeff() == 0.0);
        REQUIRE(a.results[i].final_error_norm == b.results[i].final_error_norm);
        REQUIRE(a.results[i].max_error_norm == b.results[i].max_error_norm);
        if (a.results[i].fit) {
            REQUIRE(b.results[i].fit.has_value());
            REQUIRE(a.results[i].fit->gamma_hat == b.results[i].fit->gamma_hat);
            REQUIRE(a.results[i].fit->k_hat == b.results[i].fit->k_hat);
        }
    }
}

TEST_CASE("campaign flags an exactly tracking trial instead of fitting") {
    const ManipulatorModel model = pendubot();
    ObserverParams params = test::paper_params();
    params.v_bounds = Eigen::Vector2d(0.0, 0.0);  // box collapses to the plant's rest state
    SimulationConfig cfg = test::paper_sim_config(1e-4, 0.5, 10);
    cfg.input = InputSignal::zero(1);
    const CampaignReport report =
        initial_state_campaign(model, params, cfg, 1e-13, 1, 7, 1.27);
    REQUIRE(report.results.size() == 1);
    REQUIRE(report.results[0].exact_tracking);
    REQUIRE_FALSE(report.results[0].fit.has_value());
    REQUIRE(report.fraction_meeting_gamma == 1.0);
}

TEST_CASE("campaign argument validation") {
    const ManipulatorModel model = pendubot();
    const ObserverParams params = test::paper_params();
    const SimulationConfig cfg = test::paper_sim_config(1e-3, 0.1, 10);
    REQUIRE_THROWS_AS(initial_state_campaign(model, params, cfg, 0.0, 1, 1, 1.0),
                      InvalidArgument);
    REQUIRE_THROWS_AS(initial_state_campaign(model, params, cfg, 0.1, 0, 1, 1.0),
                      InvalidArgument);
}
