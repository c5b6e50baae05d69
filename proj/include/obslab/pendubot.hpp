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

#include <cmath>

#include "obslab/model.hpp"

namespace obslab {

/// Physical constants of the Pendubot (actuated shoulder, passive elbow).
/// Defaults are the standard identified values; u is the motor voltage.
struct PendubotParams {
    double pi1 = 0.0308;  ///< V s^2 / rad
    double pi2 = 0.0106;  ///< V s^2 / rad
    double pi3 = 0.0095;  ///< V s^2 / rad
    double pi4 = 0.2086;  ///< V s^2 / m
    double pi5 = 0.0630;  ///< V s^2 / m
    double g0 = 9.81;     ///< m / s^2
    double friction1 = 0.0;
    double friction2 = 0.0;
};

/**
 * Two-joint underactuated Pendubot model.
 *
 *   M(q)  = [ pi1 + pi2 + 2 pi3 cos(q2)   pi2 + pi3 cos(q2) ]
 *           [ pi2 + pi3 cos(q2)           pi2               ]
 *   g(q)  = [ pi4 g0 cos(q1) + pi5 g0 cos(q1+q2) ]
 *           [ pi5 g0 cos(q1+q2)                  ]
 *   H     = [1 0]^T  (scalar voltage input drives the shoulder only)
 *
 * The Coriolis matrix is stored through its symmetric quadratic forms,
 * chosen so that v^T N_i(q) v reproduces the i-th component of C(q,v) v:
 *
 *   N1(q) = -pi3 sin(q2) [0 1; 1 1]
 *   N2(q) =  pi3 sin(q2) [1 0; 0 0]
 *
 * Both joints are revolute with the full circle as configuration domain;
 * all q-dependence enters through cos(q2), sin(q2) and the gravity cosines,
 * so one period covers the domain.
 *
 * m0_bound and ni_bounds are set to the exact suprema: M(q) depends on q2
 * only through c = cos(q2) and is linear in c, so min eig M(c) is concave in
 * c and its minimum over [-1,1] sits at an endpoint; ||N_i|| scales with
 * |sin(q2)| and peaks at |sin(q2)| = 1.
 */
inline ManipulatorModel pendubot(const PendubotParams& params = {}) {
    detail::require(params.pi1 > 0 && params.pi2 > 0 && params.pi3 > 0,
                    "pendubot: inertia constants must be positive");
    detail::require(params.pi1 * params.pi2 > params.pi3 * params.pi3,
                    "pendubot: pi1*pi2 must exceed pi3^2 for a positive definite inertia");
    detail::require(params.friction1 >= 0 && params.friction2 >= 0,
                    "pendubot: friction coefficients must be nonnegative");

    const PendubotParams p = params;

    ManipulatorModel model;
    model.name = "pendubot";
    model.joint_count = 2;
    model.input_count = 1;

    model.inertia = [p](const Eigen::VectorXd& q) {
        const double c2 = std::cos(q[1]);
        Eigen::MatrixXd m(2, 2);
        m(0, 0) = p.pi1 + p.pi2 + 2.0 * p.pi3 * c2;
        m(0, 1) = p.pi2 + p.pi3 * c2;
        m(1, 0) = m(0, 1);
        m(1, 1) = p.pi2;
        return m;
    };

    model.coriolis_forms.push_back([p](const Eigen::VectorXd& q) {
        const double s2 = std::sin(q[1]);
        Eigen::MatrixXd n(2, 2);
        n(0, 0) = 0.0;
        n(0, 1) = -p.pi3 * s2;
        n(1, 0) = -p.pi3 * s2;
        n(1, 1) = -p.pi3 * s2;
        return n;
    });
    model.coriolis_forms.push_back([p](const Eigen::VectorXd& q) {
        const double s2 = std::sin(q[1]);
        Eigen::MatrixXd n(2, 2);
        n(0, 0) = p.pi3 * s2;
        n(0, 1) = 0.0;
        n(1, 0) = 0.0;
        n(1, 1) = 0.0;
        return n;
    });

    model.friction = Eigen::Vector2d(p.friction1, p.friction2);

    model.gravity = [p](const Eigen::VectorXd& q) {
        Eigen::VectorXd g(2);
        g[0] = p.pi4 * p.g0 * std::cos(q[0]) + p.pi5 * p.g0 * std::cos(q[0] + q[1]);
        g[1] = p.pi5 * p.g0 * std::cos(q[0] + q[1]);
        return g;
    };

    model.input_matrix = Eigen::MatrixXd(2, 1);
    model.input_matrix << 1.0, 0.0;

    model.domain = {JointDomain::periodic(), JointDomain::periodic()};

    // ||M^-1|| = 1/lambda_min(M); extreme over cos(q2) in {-1, +1}.
    const auto min_eig_at = [&p](double c2) {
        const double tr = p.pi1 + 2.0 * p.pi2 + 2.0 * p.pi3 * c2;
        const double det = p.pi1 * p.pi2 - p.pi3 * p.pi3 * c2 * c2;
        return 0.5 * (tr - std::sqrt(tr * tr - 4.0 * det));
    };
    model.m0_bound = 1.0 / std::min(min_eig_at(1.0), min_eig_at(-1.0));

    // ||N1|| = pi3 |sin q2| * lambda_max([0 1; 1 1]) = pi3 |sin q2| (1+sqrt5)/2.
    Eigen::VectorXd ni(2);
    ni[0] = p.pi3 * 0.5 * (1.0 + std::sqrt(5.0));
    ni[1] = p.pi3;
    model.ni_bounds = ni;

    return model;
}

}  // namespace obslab
