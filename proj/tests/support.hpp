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
#include <cmath>
#include <random>

#include "obslab/obslab.hpp"

namespace obslab::test {

// Identified Pendubot constants, duplicated here so test oracles do not
// depend on the library's model construction.
inline constexpr double kPi1 = 0.0308;
inline constexpr double kPi2 = 0.0106;
inline constexpr double kPi3 = 0.0095;
inline constexpr double kPi4 = 0.2086;
inline constexpr double kPi5 = 0.0630;
inline constexpr double kG0 = 9.81;
inline constexpr double kHalfPi = 1.5707963267948966;
inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Direct evaluation of the published Coriolis matrix C(q, v); the product
/// C(q, v) v is the independent oracle for the quadratic-form representation.
inline Eigen::Matrix2d pendubot_coriolis_matrix(const Eigen::Vector2d& q,
                                                const Eigen::Vector2d& v) {
    const double s2 = std::sin(q[1]);
    Eigen::Matrix2d c;
    c(0, 0) = -kPi3 * s2 * v[1];
    c(0, 1) = -kPi3 * s2 * v[1] - kPi3 * s2 * v[0];
    c(1, 0) = kPi3 * s2 * v[0];
    c(1, 1) = 0.0;
    return c;
}

inline Eigen::Matrix2d pendubot_inertia(const Eigen::Vector2d& q) {
    const double c2 = std::cos(q[1]);
    Eigen::Matrix2d m;
    m(0, 0) = kPi1 + kPi2 + 2.0 * kPi3 * c2;
    m(0, 1) = kPi2 + kPi3 * c2;
    m(1, 0) = m(0, 1);
    m(1, 1) = kPi2;
    return m;
}

inline Eigen::Vector2d pendubot_gravity(const Eigen::Vector2d& q) {
    return Eigen::Vector2d(kPi4 * kG0 * std::cos(q[0]) + kPi5 * kG0 * std::cos(q[0] + q[1]),
                           kPi5 * kG0 * std::cos(q[0] + q[1]));
}

/// Observer parameters for the reproduction scenario (theta = 200).
inline ObserverParams paper_params(double theta = 200.0) {
    ObserverParams p;
    p.alpha = 1.0;
    p.beta = 1.0;
    p.theta = theta;
    p.v_bounds = Eigen::Vector2d(10.0, 10.0);
    return p;
}

/// Co-simulation setup of the reproduction scenario. Horizon and step are
/// parameters so tests can shorten or refine runs.
inline SimulationConfig paper_sim_config(double dt = 2e-5, double t_final = 5.0,
                                         int record_stride = 50) {
    SimulationConfig cfg;
    cfg.dt = dt;
    cfg.t_final = t_final;
    cfg.record_stride = record_stride;
    cfg.plant_initial.q = Eigen::Vector2d(-kHalfPi, 0.0);
    cfg.plant_initial.v = Eigen::Vector2d(0.0, 0.0);
    cfg.observer_initial.q_hat = Eigen::Vector2d(-kHalfPi, 0.0);
    cfg.observer_initial.v_hat = Eigen::Vector2d(2.0, 2.0);
    cfg.input = InputSignal::sine(Eigen::VectorXd::Constant(1, 1.5),
                                  Eigen::VectorXd::Constant(1, 100.0));
    return cfg;
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, int n, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = dist(rng);
    return v;
}

}  // namespace obslab::test
