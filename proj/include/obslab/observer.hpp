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

#include "obslab/errors.hpp"
#include "obslab/model.hpp"

namespace obslab {

/// Design parameters of the saturated high-gain observer.
struct ObserverParams {
    double alpha = 1.0;       ///< position innovation gain factor, > 0
    double beta = 1.0;        ///< velocity innovation gain factor, > 0
    double theta = 1.0;       ///< high-gain parameter, > 0
    Eigen::VectorXd v_bounds; ///< a-priori velocity bounds V, entries >= 0

    void validate(int joint_count) const {
        detail::require(alpha > 0.0, "observer params: alpha must be positive");
        detail::require(beta > 0.0, "observer params: beta must be positive");
        detail::require(theta > 0.0, "observer params: theta must be positive");
        detail::require(v_bounds.size() == joint_count,
                        "observer params: v_bounds must have n entries");
        detail::require((v_bounds.array() >= 0).all(),
                        "observer params: v_bounds must be nonnegative");
    }
};

struct ObserverState {
    Eigen::VectorXd q_hat;
    Eigen::VectorXd v_hat;
};

/// Scaled error coordinates used by the convergence analysis:
/// xi = (q_hat - q)/theta, zeta = (v_hat - v)/theta^2.
struct ErrorCoordinates {
    Eigen::VectorXd xi;
    Eigen::VectorXd zeta;
};

/// Component-wise saturation to the box [-Y_i, Y_i].
inline Eigen::VectorXd saturate(const Eigen::VectorXd& x, const Eigen::VectorXd& levels) {
    detail::require(levels.size() == x.size(), "saturate: level vector has wrong dimension");
    detail::require((levels.array() >= 0).all(), "saturate: levels must be nonnegative");
    return x.cwiseMin(levels).cwiseMax(-levels);
}

/**
 * Observer vector field
 *
 *   dq_hat = v_hat - theta alpha (q_hat - q)
 *   dv_hat = -M^-1(q) (C(q, sat(v_hat)) sat(v_hat) + F v_hat + g(q) - H u)
 *            - theta^2 beta (q_hat - q)
 *
 * M, C and g are evaluated at the measured q; only the Coriolis arguments
 * are saturated, the friction term uses the raw estimate.
 */
inline StateDerivative observer_derivative(const ManipulatorModel& model,
                                           const ObserverParams& params,
                                           const ObserverState& obs,
                                           const Eigen::VectorXd& q_meas,
                                           const Eigen::VectorXd& u) {
    params.validate(model.joint_count);
    detail::require(obs.q_hat.size() == model.joint_count,
                    "observer_derivative: q_hat has wrong dimension");
    detail::require(obs.v_hat.size() == model.joint_count,
                    "observer_derivative: v_hat has wrong dimension");
    detail::require(q_meas.size() == model.joint_count,
                    "observer_derivative: q has wrong dimension");
    detail::require(u.size() == model.input_count, "observer_derivative: u has wrong dimension");

    const Eigen::VectorXd innovation = obs.q_hat - q_meas;
    const Eigen::VectorXd v_sat = saturate(obs.v_hat, params.v_bounds);
    const Eigen::VectorXd rhs = coriolis_vector(model, q_meas, v_sat) +
                                model.friction.cwiseProduct(obs.v_hat) + model.gravity(q_meas) -
                                model.input_matrix * u;
    StateDerivative d;
    d.qdot = obs.v_hat - (params.theta * params.alpha) * innovation;
    d.vdot = -detail::inertia_solve(model.inertia(q_meas), rhs) -
             (params.theta * params.theta * params.beta) * innovation;
    return d;
}

inline ErrorCoordinates to_error_coordinates(const ObserverState& obs, const PlantState& plant,
                                             double theta) {
    detail::require(theta > 0.0, "to_error_coordinates: theta must be positive");
    detail::require(obs.q_hat.size() == plant.q.size() && obs.v_hat.size() == plant.v.size(),
                    "to_error_coordinates: dimension mismatch");
    ErrorCoordinates e;
    e.xi = (obs.q_hat - plant.q) / theta;
    e.zeta = (obs.v_hat - plant.v) / (theta * theta);
    return e;
}

/// Exact inverse of to_error_coordinates.
inline ObserverState from_error_coordinates(const ErrorCoordinates& err, const PlantState& plant,
                                            double theta) {
    detail::require(theta > 0.0, "from_error_coordinates: theta must be positive");
    ObserverState obs;
    obs.q_hat = plant.q + theta * err.xi;
    obs.v_hat = plant.v + (theta * theta) * err.zeta;
    return obs;
}

/**
 * Perturbation entering the scaled error dynamics:
 *
 *   f(q,v,zeta,theta) = -M^-1(q) { [A(q, sat(v + theta^2 zeta)) - A(q, sat(v))] / theta^2
 *                                  + F zeta }
 *
 * with A(q,w) = C(q,w) w. Satisfies ||f|| <= L ||zeta|| with the Lipschitz
 * constant produced by the gain synthesis.
 */
inline Eigen::VectorXd perturbation_term(const ManipulatorModel& model, const Eigen::VectorXd& q,
                                         const Eigen::VectorXd& v, const Eigen::VectorXd& zeta,
                                         double theta, const ObserverParams& params) {
    detail::require(theta > 0.0, "perturbation_term: theta must be positive");
    detail::require(q.size() == model.joint_count && v.size() == model.joint_count &&
                        zeta.size() == model.joint_count,
                    "perturbation_term: dimension mismatch");
    const double theta_sq = theta * theta;
    const Eigen::VectorXd a_shifted =
        coriolis_vector(model, q, saturate(v + theta_sq * zeta, params.v_bounds));
    const Eigen::VectorXd a_base = coriolis_vector(model, q, saturate(v, params.v_bounds));
    const Eigen::VectorXd inner =
        (a_shifted - a_base) / theta_sq + model.friction.cwiseProduct(zeta);
    return -detail::inertia_solve(model.inertia(q), inner);
}

}  // namespace obslab
