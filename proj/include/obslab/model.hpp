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
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "obslab/errors.hpp"

namespace obslab {

/// How one joint coordinate ranges.
enum class JointKind {
    BoundedInterval,   ///< q_i in [lower, upper] (prismatic or limited revolute)
    PeriodicRevolute,  ///< q_i revolute, model 2*pi-periodic in q_i
    Unbounded          ///< q_i unconstrained (treated as periodic for sampling;
                       ///< valid when the model depends on q_i only through
                       ///< trigonometric terms, which must be documented per model)
};

struct JointDomain {
    JointKind kind = JointKind::PeriodicRevolute;
    double lower = 0.0;  ///< used when kind == BoundedInterval
    double upper = 0.0;

    static JointDomain bounded(double lo, double hi) {
        if (!(lo < hi)) throw InvalidArgument("JointDomain: lower must be < upper");
        return JointDomain{JointKind::BoundedInterval, lo, hi};
    }
    static JointDomain periodic() { return JointDomain{JointKind::PeriodicRevolute, 0.0, 0.0}; }
    static JointDomain unbounded() { return JointDomain{JointKind::Unbounded, 0.0, 0.0}; }
};

/**
 * Rigid n-joint manipulator
 *
 *   M(q) qdd + C(q,v) v + F v + g(q) = H u
 *
 * with the Coriolis/centrifugal term stored through its quadratic forms:
 * the i-th component of C(q,v) v equals v^T N_i(q) v with N_i symmetric.
 *
 * The model is an immutable value; all operations on it are pure functions
 * and safe to evaluate concurrently.
 */
struct ManipulatorModel {
    int joint_count = 0;  ///< n
    int input_count = 0;  ///< m

    /// q -> M(q), n x n symmetric positive definite on the domain
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> inertia;

    /// q -> N_i(q); n entries, each n x n symmetric
    std::vector<std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>> coriolis_forms;

    /// diagonal of the viscous friction matrix F (nonnegative entries)
    Eigen::VectorXd friction;

    /// q -> g(q), gravity vector
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gravity;

    /// input matrix H, n x m
    Eigen::MatrixXd input_matrix;

    /// per-joint configuration domain
    std::vector<JointDomain> domain;

    /// optional precomputed bound: ||M^-1(q)|| <= m0_bound on the domain
    std::optional<double> m0_bound;

    /// optional precomputed bounds: ||N_i(q)|| <= ni_bounds[i] on the domain
    std::optional<Eigen::VectorXd> ni_bounds;

    std::string name;
};

struct PlantState {
    Eigen::VectorXd q;  ///< joint positions
    Eigen::VectorXd v;  ///< joint velocities
};

/// Time derivative of a (q, v) pair.
struct StateDerivative {
    Eigen::VectorXd qdot;
    Eigen::VectorXd vdot;
};

namespace detail {

inline void require(bool cond, const char* msg) {
    if (!cond) throw InvalidArgument(msg);
}

inline bool is_symmetric(const Eigen::MatrixXd& a, double rel_tol = 1e-12) {
    if (a.rows() != a.cols()) return false;
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

}  // namespace detail

/// Structural sanity of a model value (sizes and signs). Throws InvalidArgument.
inline void check_model(const ManipulatorModel& model) {
    detail::require(model.joint_count >= 1, "model: joint_count must be >= 1");
    detail::require(model.input_count >= 1, "model: input_count must be >= 1");
    detail::require(static_cast<int>(model.coriolis_forms.size()) == model.joint_count,
                    "model: one Coriolis form per joint required");
    detail::require(model.friction.size() == model.joint_count,
                    "model: friction diagonal must have n entries");
    detail::require((model.friction.array() >= 0).all(),
                    "model: friction coefficients must be nonnegative");
    detail::require(model.input_matrix.rows() == model.joint_count &&
                        model.input_matrix.cols() == model.input_count,
                    "model: input matrix must be n x m");
    detail::require(static_cast<int>(model.domain.size()) == model.joint_count,
                    "model: one domain entry per joint required");
    detail::require(static_cast<bool>(model.inertia), "model: inertia map missing");
    detail::require(static_cast<bool>(model.gravity), "model: gravity map missing");
}

/**
 * Coriolis/centrifugal force vector: component i equals v^T N_i(q) v.
 */
inline Eigen::VectorXd coriolis_vector(const ManipulatorModel& model,
                                       const Eigen::VectorXd& q,
                                       const Eigen::VectorXd& v) {
    detail::require(q.size() == model.joint_count, "coriolis_vector: q has wrong dimension");
    detail::require(v.size() == model.joint_count, "coriolis_vector: v has wrong dimension");
    Eigen::VectorXd out(model.joint_count);
    for (int i = 0; i < model.joint_count; ++i) {
        out[i] = v.dot(model.coriolis_forms[static_cast<size_t>(i)](q) * v);
    }
    return out;
}

/**
 * Jacobian of A(q,v) = C(q,v) v with respect to v: the n x n matrix whose
 * i-th row is 2 v^T N_i(q).
 */
inline Eigen::MatrixXd coriolis_jacobian(const ManipulatorModel& model,
                                         const Eigen::VectorXd& q,
                                         const Eigen::VectorXd& v) {
    detail::require(q.size() == model.joint_count, "coriolis_jacobian: q has wrong dimension");
    detail::require(v.size() == model.joint_count, "coriolis_jacobian: v has wrong dimension");
    Eigen::MatrixXd jac(model.joint_count, model.joint_count);
    for (int i = 0; i < model.joint_count; ++i) {
        jac.row(i) = 2.0 * (model.coriolis_forms[static_cast<size_t>(i)](q) * v).transpose();
    }
    return jac;
}

namespace detail {

/// Solve M x = rhs for symmetric positive definite M with a conditioning
/// guard: indefinite M or reciprocal condition estimate below 1e-12 raises
/// ModelViolation (a P1 failure at this configuration).
inline Eigen::VectorXd inertia_solve(const Eigen::MatrixXd& m, const Eigen::VectorXd& rhs) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
    const Eigen::VectorXd d = ldlt.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    if (ldlt.info() != Eigen::Success || d.minCoeff() <= 0.0 || !(dmax > 0.0) ||
        d.minCoeff() / dmax < 1e-12) {
        throw ModelViolation("inertia matrix singular or indefinite at this configuration");
    }
    return ldlt.solve(rhs);
}

}  // namespace detail

/**
 * Plant vector field of the state-space form
 *
 *   dq = v
 *   dv = -M^-1(q) (C(q,v) v + F v + g(q) - H u)
 */
inline StateDerivative plant_derivative(const ManipulatorModel& model, const PlantState& state,
                                        const Eigen::VectorXd& u) {
    detail::require(state.q.size() == model.joint_count, "plant_derivative: q has wrong dimension");
    detail::require(state.v.size() == model.joint_count, "plant_derivative: v has wrong dimension");
    detail::require(u.size() == model.input_count, "plant_derivative: u has wrong dimension");
    const Eigen::VectorXd rhs = coriolis_vector(model, state.q, state.v) +
                                model.friction.cwiseProduct(state.v) + model.gravity(state.q) -
                                model.input_matrix * u;
    StateDerivative d;
    d.qdot = state.v;
    d.vdot = -detail::inertia_solve(model.inertia(state.q), rhs);
    return d;
}

/// True if q violates a bounded joint interval. Periodic and unbounded
/// joints never violate.
inline bool domain_violated(const ManipulatorModel& model, const Eigen::VectorXd& q) {
    for (int i = 0; i < model.joint_count; ++i) {
        const JointDomain& dom = model.domain[static_cast<size_t>(i)];
        if (dom.kind == JointKind::BoundedInterval && (q[i] < dom.lower || q[i] > dom.upper)) {
            return true;
        }
    }
    return false;
}

/// Uniform random configuration samples: bounded joints on their interval,
/// periodic and unbounded joints on [0, 2*pi).
inline std::vector<Eigen::VectorXd> sample_domain(const ManipulatorModel& model, int count,
                                                  std::mt19937_64& rng) {
    detail::require(count >= 0, "sample_domain: count must be nonnegative");
    std::vector<Eigen::VectorXd> samples;
    samples.reserve(static_cast<size_t>(count));
    constexpr double two_pi = 6.283185307179586476925286766559;
    for (int k = 0; k < count; ++k) {
        Eigen::VectorXd q(model.joint_count);
        for (int i = 0; i < model.joint_count; ++i) {
            const JointDomain& dom = model.domain[static_cast<size_t>(i)];
            if (dom.kind == JointKind::BoundedInterval) {
                q[i] = std::uniform_real_distribution<double>(dom.lower, dom.upper)(rng);
            } else {
                q[i] = std::uniform_real_distribution<double>(0.0, two_pi)(rng);
            }
        }
        samples.push_back(std::move(q));
    }
    return samples;
}

/// Per-sample outcome of the structural property checks P1-P3.
struct PropertySample {
    Eigen::VectorXd q;
    bool inertia_symmetric = false;
    bool inertia_positive_definite = false;
    double inertia_inverse_norm = 0.0;          ///< ||M^-1(q)||
    std::optional<bool> m0_satisfied;           ///< set when the model carries m0_bound
    std::vector<bool> coriolis_symmetric;       ///< per N_i
    std::vector<double> coriolis_norms;         ///< ||N_i(q)||
    std::optional<std::vector<bool>> ni_satisfied;

    bool ok() const {
        if (!inertia_symmetric || !inertia_positive_definite) return false;
        if (m0_satisfied && !*m0_satisfied) return false;
        for (bool s : coriolis_symmetric)
            if (!s) return false;
        if (ni_satisfied)
            for (bool s : *ni_satisfied)
                if (!s) return false;
        return true;
    }
};

struct PropertyReport {
    std::vector<PropertySample> samples;
    bool passed = false;
    std::string first_failure;  ///< empty when passed
};

/**
 * Check the structural properties over a set of configuration samples:
 * M symmetric positive definite (P1), ||M^-1|| against m0_bound when present
 * (P2), each N_i symmetric with ||N_i|| against ni_bounds when present (P3).
 * Violations are report entries, never exceptions.
 */
inline PropertyReport validate_properties(const ManipulatorModel& model,
                                          const std::vector<Eigen::VectorXd>& q_samples) {
    detail::require(!q_samples.empty(), "validate_properties: q_samples must be nonempty");
    // Bounds are suprema; allow a relative epsilon so exact maximizers pass.
    constexpr double bound_slack = 1.0 + 1e-9;
    PropertyReport report;
    report.samples.reserve(q_samples.size());
    report.passed = true;
    for (size_t k = 0; k < q_samples.size(); ++k) {
        const Eigen::VectorXd& q = q_samples[k];
        PropertySample entry;
        entry.q = q;
        const Eigen::MatrixXd m = model.inertia(q);
        entry.inertia_symmetric = detail::is_symmetric(m);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
        const double lambda_min = es.eigenvalues().minCoeff();
        entry.inertia_positive_definite = lambda_min > 0.0;
        entry.inertia_inverse_norm =
            entry.inertia_positive_definite ? 1.0 / lambda_min : std::numeric_limits<double>::infinity();
        if (model.m0_bound) {
            entry.m0_satisfied = entry.inertia_inverse_norm <= *model.m0_bound * bound_slack;
        }
        entry.coriolis_symmetric.resize(static_cast<size_t>(model.joint_count));
        entry.coriolis_norms.resize(static_cast<size_t>(model.joint_count));
        if (model.ni_bounds) entry.ni_satisfied = std::vector<bool>(static_cast<size_t>(model.joint_count));
        for (int i = 0; i < model.joint_count; ++i) {
            const Eigen::MatrixXd ni = model.coriolis_forms[static_cast<size_t>(i)](q);
            entry.coriolis_symmetric[static_cast<size_t>(i)] = detail::is_symmetric(ni);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esi(ni, Eigen::EigenvaluesOnly);
            const double norm = esi.eigenvalues().cwiseAbs().maxCoeff();
            entry.coriolis_norms[static_cast<size_t>(i)] = norm;
            if (model.ni_bounds) {
                (*entry.ni_satisfied)[static_cast<size_t>(i)] =
                    norm <= (*model.ni_bounds)[i] * bound_slack;
            }
        }
        if (!entry.ok() && report.passed) {
            report.passed = false;
            std::ostringstream oss;
            oss << "sample " << k << ": ";
            if (!entry.inertia_symmetric) {
                oss << "inertia matrix not symmetric (P1)";
            } else if (!entry.inertia_positive_definite) {
                oss << "inertia matrix not positive definite (P1)";
            } else if (entry.m0_satisfied && !*entry.m0_satisfied) {
                oss << "||M^-1|| = " << entry.inertia_inverse_norm << " exceeds m0_bound (P2)";
            } else {
                oss << "Coriolis form violates symmetry or norm bound (P3)";
            }
            report.first_failure = oss.str();
        }
        report.samples.push_back(std::move(entry));
    }
    return report;
}

}  // namespace obslab
