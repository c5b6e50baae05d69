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

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "obslab/errors.hpp"
#include "obslab/gains.hpp"
#include "obslab/model.hpp"
#include "obslab/observer.hpp"

namespace obslab {

/// Shared input signal u(t) for plant and observer.
struct InputSignal {
    enum class Kind { Zero, Constant, Sine, Table };

    Kind kind = Kind::Zero;
    int channels = 1;
    Eigen::VectorXd constant;
    Eigen::VectorXd amplitude;          ///< per channel
    Eigen::VectorXd angular_frequency;  ///< rad/s, per channel
    std::vector<double> table_times;    ///< strictly increasing
    std::vector<Eigen::VectorXd> table_values;  ///< zero-order hold

    static InputSignal zero(int m) {
        detail::require(m >= 1, "input: channel count must be >= 1");
        InputSignal s;
        s.kind = Kind::Zero;
        s.channels = m;
        return s;
    }
    static InputSignal make_constant(const Eigen::VectorXd& c) {
        detail::require(c.size() >= 1, "input: constant vector must be nonempty");
        InputSignal s;
        s.kind = Kind::Constant;
        s.channels = static_cast<int>(c.size());
        s.constant = c;
        return s;
    }
    static InputSignal sine(const Eigen::VectorXd& amplitude,
                            const Eigen::VectorXd& angular_frequency) {
        detail::require(amplitude.size() >= 1 && amplitude.size() == angular_frequency.size(),
                        "input: sine amplitude/frequency sizes must match");
        InputSignal s;
        s.kind = Kind::Sine;
        s.channels = static_cast<int>(amplitude.size());
        s.amplitude = amplitude;
        s.angular_frequency = angular_frequency;
        return s;
    }
    static InputSignal table(std::vector<double> times, std::vector<Eigen::VectorXd> values) {
        detail::require(!times.empty() && times.size() == values.size(),
                        "input: table must be nonempty with matching sizes");
        for (size_t i = 1; i < times.size(); ++i) {
            detail::require(times[i] > times[i - 1], "input: table times must be strictly increasing");
        }
        InputSignal s;
        s.kind = Kind::Table;
        s.channels = static_cast<int>(values.front().size());
        for (const auto& v : values) {
            detail::require(static_cast<int>(v.size()) == s.channels,
                            "input: table rows must have equal dimension");
        }
        s.table_times = std::move(times);
        s.table_values = std::move(values);
        return s;
    }

    Eigen::VectorXd eval(double t) const {
        switch (kind) {
            case Kind::Zero:
                return Eigen::VectorXd::Zero(channels);
            case Kind::Constant:
                return constant;
            case Kind::Sine: {
                Eigen::VectorXd u(channels);
                for (int i = 0; i < channels; ++i) {
                    u[i] = amplitude[i] * std::sin(angular_frequency[i] * t);
                }
                return u;
            }
            case Kind::Table: {
                auto it = std::upper_bound(table_times.begin(), table_times.end(), t);
                if (it == table_times.begin()) return table_values.front();
                const size_t i = static_cast<size_t>(it - table_times.begin()) - 1;
                return table_values[i];
            }
        }
        return Eigen::VectorXd::Zero(channels);
    }
};

struct SimulationConfig {
    double dt = 1e-4;       ///< fixed step (s)
    double t_final = 1.0;   ///< horizon (s)
    int record_stride = 1;  ///< record every k-th step (first and last always kept)
    PlantState plant_initial;
    ObserverState observer_initial;
    InputSignal input;

    void validate(const ManipulatorModel& model, const ObserverParams& params) const {
        detail::require(dt > 0.0, "simulation: dt must be positive");
        detail::require(t_final >= dt, "simulation: t_final must be >= dt");
        detail::require(record_stride >= 1, "simulation: record_stride must be >= 1");
        detail::require(plant_initial.q.size() == model.joint_count &&
                            plant_initial.v.size() == model.joint_count,
                        "simulation: plant initial state has wrong dimension");
        detail::require(observer_initial.q_hat.size() == model.joint_count &&
                            observer_initial.v_hat.size() == model.joint_count,
                        "simulation: observer initial state has wrong dimension");
        detail::require(plant_initial.q.allFinite() && plant_initial.v.allFinite() &&
                            observer_initial.q_hat.allFinite() &&
                            observer_initial.v_hat.allFinite(),
                        "simulation: initial states must be finite");
        detail::require(input.channels == model.input_count,
                        "simulation: input channel count must equal m");
        params.validate(model.joint_count);
    }

    /// rate * dt for the fastest expected dynamics (observer modes near
    /// theta * rho(G), input frequency). Values above ~0.1 degrade accuracy;
    /// well above ~2.8 the explicit integrator goes unstable.
    double stability_margin(const ObserverParams& params) const {
        const double alpha = params.alpha;
        const double beta = params.beta;
        // spectral radius of [ -alpha 1; -beta 0 ]
        const double disc = alpha * alpha - 4.0 * beta;
        double rho;
        if (disc >= 0.0) {
            rho = 0.5 * (alpha + std::sqrt(disc));
        } else {
            rho = std::sqrt(beta);
        }
        double rate = params.theta * rho;
        if (input.kind == InputSignal::Kind::Sine && input.angular_frequency.size() > 0) {
            rate = std::max(rate, input.angular_frequency.cwiseAbs().maxCoeff());
        }
        return rate * dt;
    }
};

/// Time-indexed record of a plant/observer co-simulation.
struct Trajectory {
    std::vector<double> times;
    std::vector<PlantState> plant_states;
    std::vector<ObserverState> observer_states;
    std::vector<Eigen::VectorXd> inputs;
    std::vector<double> error_norms;         ///< ||(q_hat - q; v_hat - v)||
    std::vector<double> scaled_error_norms;  ///< ||(xi; zeta)||
    std::vector<bool> domain_violation_flags;

    size_t size() const { return times.size(); }
};

/// Integration blew up: non-finite state at time t. Carries whatever part
/// of the trajectory was recorded before the failure.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(double t, Trajectory partial_trajectory = {})
        : std::runtime_error("simulation diverged (non-finite state) at t = " +
                             std::to_string(t)),
          time(t),
          partial(std::move(partial_trajectory)) {}

    double time;
    Trajectory partial;
};

/**
 * One classical 4th-order Runge-Kutta step. `derivative(t, x)` must return
 * dx/dt; the returned state is checked for finiteness.
 */
template <typename Field>
Eigen::VectorXd step_rk4(Field&& derivative, const Eigen::VectorXd& state, double t, double dt) {
    detail::require(dt > 0.0, "step_rk4: dt must be positive");
    const Eigen::VectorXd k1 = derivative(t, state);
    const Eigen::VectorXd k2 = derivative(t + 0.5 * dt, (state + (0.5 * dt) * k1).eval());
    const Eigen::VectorXd k3 = derivative(t + 0.5 * dt, (state + (0.5 * dt) * k2).eval());
    const Eigen::VectorXd k4 = derivative(t + dt, (state + dt * k3).eval());
    Eigen::VectorXd next = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!next.allFinite()) throw DivergenceError(t + dt);
    return next;
}

/**
 * Fixed-step co-simulation of plant and observer under a shared input.
 * Both subsystems are advanced jointly, so every RK4 stage evaluates u(t)
 * once and feeds plant and observer identically. Steps = round(t_final/dt).
 *
 * On divergence the partial trajectory is attached to the thrown
 * DivergenceError.
 */
inline Trajectory simulate(const ManipulatorModel& model, const ObserverParams& params,
                           const SimulationConfig& config) {
    config.validate(model, params);
    const int n = model.joint_count;

    const auto field = [&](double t, const Eigen::VectorXd& x) -> Eigen::VectorXd {
        const PlantState plant{x.segment(0, n), x.segment(n, n)};
        const ObserverState obs{x.segment(2 * n, n), x.segment(3 * n, n)};
        const Eigen::VectorXd u = config.input.eval(t);
        const StateDerivative dp = plant_derivative(model, plant, u);
        const StateDerivative dob = observer_derivative(model, params, obs, plant.q, u);
        Eigen::VectorXd dx(4 * n);
        dx.segment(0, n) = dp.qdot;
        dx.segment(n, n) = dp.vdot;
        dx.segment(2 * n, n) = dob.qdot;
        dx.segment(3 * n, n) = dob.vdot;
        return dx;
    };

    Eigen::VectorXd x(4 * n);
    x.segment(0, n) = config.plant_initial.q;
    x.segment(n, n) = config.plant_initial.v;
    x.segment(2 * n, n) = config.observer_initial.q_hat;
    x.segment(3 * n, n) = config.observer_initial.v_hat;

    const std::int64_t steps = std::llround(config.t_final / config.dt);
    Trajectory traj;
    const size_t reserve =
        static_cast<size_t>(steps / std::max(1, config.record_stride)) + 2;
    traj.times.reserve(reserve);
    traj.plant_states.reserve(reserve);
    traj.observer_states.reserve(reserve);
    traj.inputs.reserve(reserve);
    traj.error_norms.reserve(reserve);
    traj.scaled_error_norms.reserve(reserve);
    traj.domain_violation_flags.reserve(reserve);

    const double theta_sq = params.theta * params.theta;
    const auto record = [&](std::int64_t k) {
        const double t = static_cast<double>(k) * config.dt;
        PlantState plant{x.segment(0, n), x.segment(n, n)};
        ObserverState obs{x.segment(2 * n, n), x.segment(3 * n, n)};
        const Eigen::VectorXd dq = obs.q_hat - plant.q;
        const Eigen::VectorXd dv = obs.v_hat - plant.v;
        traj.times.push_back(t);
        traj.error_norms.push_back(std::sqrt(dq.squaredNorm() + dv.squaredNorm()));
        traj.scaled_error_norms.push_back(
            std::sqrt((dq / params.theta).squaredNorm() + (dv / theta_sq).squaredNorm()));
        traj.domain_violation_flags.push_back(domain_violated(model, plant.q));
        traj.inputs.push_back(config.input.eval(t));
        traj.plant_states.push_back(std::move(plant));
        traj.observer_states.push_back(std::move(obs));
    };

    record(0);
    for (std::int64_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * config.dt;
        try {
            x = step_rk4(field, x, t, config.dt);
        } catch (DivergenceError& e) {
            throw DivergenceError(e.time, std::move(traj));
        }
        if ((k + 1) % config.record_stride == 0 || k + 1 == steps) record(k + 1);
    }
    return traj;
}

/// Exponential envelope fitted to the decay of the scaled error norm.
struct EnvelopeFit {
    double k_hat = 0.0;      ///< minimal prefactor dominating the window
    double gamma_hat = 0.0;  ///< decay rate, 1/s
    double t_start = 0.0;    ///< fit window
    double t_end = 0.0;
    double residual = 0.0;   ///< RMS of log-space fit residuals
    double floor = 0.0;      ///< samples at or below this were excluded
};

/**
 * Least-squares fit of log(scaled error norm) against time over the samples
 * above `floor` (the first sample is excluded as transient). gamma_hat is
 * minus the slope; k_hat is the smallest k with
 * k ||e(0)|| exp(-gamma_hat t) >= samples over the whole window.
 */
inline EnvelopeFit fit_envelope(const Trajectory& traj, double floor = 1e-10) {
    detail::require(floor >= 0.0, "fit_envelope: floor must be nonnegative");
    std::vector<size_t> used;
    for (size_t i = 1; i < traj.size(); ++i) {
        if (traj.scaled_error_norms[i] > floor) used.push_back(i);
    }
    if (used.size() < 10) {
        throw InsufficientData("fit_envelope: fewer than 10 samples above the floor");
    }
    const double e0 = traj.scaled_error_norms[0];
    if (!(e0 > 0.0)) {
        throw InsufficientData("fit_envelope: initial error is zero, nothing to fit");
    }

    double st = 0.0, slog = 0.0, stt = 0.0, stlog = 0.0;
    for (size_t i : used) {
        const double t = traj.times[i];
        const double l = std::log(traj.scaled_error_norms[i]);
        st += t;
        slog += l;
        stt += t * t;
        stlog += t * l;
    }
    const double m = static_cast<double>(used.size());
    const double denom = m * stt - st * st;
    detail::require(denom > 0.0, "fit_envelope: degenerate time samples");
    const double slope = (m * stlog - st * slog) / denom;
    const double intercept = (slog - slope * st) / m;

    EnvelopeFit fit;
    fit.gamma_hat = -slope;
    fit.t_start = traj.times[used.front()];
    fit.t_end = traj.times[used.back()];
    fit.floor = floor;

    double res2 = 0.0;
    double log_k = -std::numeric_limits<double>::infinity();
    for (size_t i : used) {
        const double t = traj.times[i];
        const double l = std::log(traj.scaled_error_norms[i]);
        const double r = l - (intercept + slope * t);
        res2 += r * r;
        log_k = std::max(log_k, l - std::log(e0) + fit.gamma_hat * t);
    }
    fit.residual = std::sqrt(res2 / m);
    fit.k_hat = std::exp(log_k);
    return fit;
}

/// One randomized-initial-state verification run.
struct CampaignTrial {
    int index = 0;
    ObserverState initial;
    std::optional<EnvelopeFit> fit;  ///< absent when the error never rose above the floor
    bool exact_tracking = false;     ///< fit skipped and error at tracking level
    double max_error_norm = 0.0;
    double final_error_norm = 0.0;

    bool satisfies(double gamma_target) const {
        if (exact_tracking) return true;
        return fit && fit->gamma_hat >= gamma_target;
    }
};

struct CampaignReport {
    double epsilon = 0.0;
    int trials = 0;
    std::uint64_t seed = 0;
    double gamma_target = 0.0;
    std::vector<CampaignTrial> results;
    double fraction_meeting_gamma = 0.0;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + (stream + 1) * 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace detail

/**
 * Convergence campaign over the practically relevant initial-state set:
 * q_hat(0) within an epsilon-ball of q(0) and v_hat(0) anywhere in the
 * velocity box Vbar. Trials run in parallel with per-trial seeded RNGs and
 * an index-ordered reduction, so a fixed seed gives identical reports.
 */
inline CampaignReport initial_state_campaign(const ManipulatorModel& model,
                                             const ObserverParams& params,
                                             const SimulationConfig& config_template,
                                             double epsilon, int trials, std::uint64_t seed,
                                             double gamma_target, double floor = 1e-10) {
    detail::require(epsilon > 0.0, "campaign: epsilon must be positive");
    detail::require(trials >= 1, "campaign: trials must be >= 1");
    config_template.validate(model, params);

    CampaignReport report;
    report.epsilon = epsilon;
    report.trials = trials;
    report.seed = seed;
    report.gamma_target = gamma_target;
    report.results.resize(static_cast<size_t>(trials));

    const int n = model.joint_count;
    std::atomic<int> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;

    const auto worker = [&]() {
        for (int i = next.fetch_add(1); i < trials; i = next.fetch_add(1)) {
            try {
                std::mt19937_64 rng(detail::mix_seed(seed, static_cast<std::uint64_t>(i)));
                std::normal_distribution<double> gauss(0.0, 1.0);
                std::uniform_real_distribution<double> unit(0.0, 1.0);

                Eigen::VectorXd dir(n);
                for (int j = 0; j < n; ++j) dir[j] = gauss(rng);
                const double norm = dir.norm();
                if (norm > 0.0) dir /= norm;
                const double radius =
                    epsilon * std::pow(unit(rng), 1.0 / static_cast<double>(n)) * (1.0 - 1e-12);

                ObserverState ic;
                ic.q_hat = config_template.plant_initial.q + radius * dir;
                ic.v_hat.resize(n);
                for (int j = 0; j < n; ++j) {
                    const double bound = params.v_bounds[j];
                    ic.v_hat[j] = std::uniform_real_distribution<double>(-bound, bound)(rng);
                }

                SimulationConfig cfg = config_template;
                cfg.observer_initial = ic;
                const Trajectory traj = simulate(model, params, cfg);

                CampaignTrial trial;
                trial.index = i;
                trial.initial = ic;
                trial.max_error_norm =
                    *std::max_element(traj.error_norms.begin(), traj.error_norms.end());
                trial.final_error_norm = traj.error_norms.back();
                try {
                    trial.fit = fit_envelope(traj, floor);
                } catch (const InsufficientData&) {
                    trial.exact_tracking = trial.max_error_norm <= 1e-9;
                }
                report.results[static_cast<size_t>(i)] = std::move(trial);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned worker_count = std::min<unsigned>(hw, static_cast<unsigned>(trials));
    if (worker_count <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(worker_count);
        for (unsigned w = 0; w < worker_count; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    int meeting = 0;
    for (const CampaignTrial& trial : report.results) {
        if (trial.satisfies(gamma_target)) ++meeting;
    }
    report.fraction_meeting_gamma = static_cast<double>(meeting) / static_cast<double>(trials);
    return report;
}

}  // namespace obslab
