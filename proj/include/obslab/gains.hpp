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
#include <cstdint>
#include <optional>
#include <random>

#include "obslab/errors.hpp"
#include "obslab/model.hpp"

namespace obslab {

/**
 * Error-dynamics system matrix
 *
 *   G = [ -alpha I   I ]
 *       [ -beta  I   0 ]
 *
 * Hurwitz for any alpha, beta > 0 (each joint contributes the eigenvalues of
 * lambda^2 + alpha lambda + beta).
 */
inline Eigen::MatrixXd build_g(double alpha, double beta, int n) {
    detail::require(alpha > 0.0, "build_g: alpha must be positive");
    detail::require(beta > 0.0, "build_g: beta must be positive");
    detail::require(n >= 1, "build_g: n must be >= 1");
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    g.topLeftCorner(n, n) = -alpha * Eigen::MatrixXd::Identity(n, n);
    g.topRightCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
    g.bottomLeftCorner(n, n) = -beta * Eigen::MatrixXd::Identity(n, n);
    return g;
}

namespace detail {

/// Largest singular value (computed via the Gram matrix; adequate for the
/// bound sampling, where ~1e-8 relative accuracy is plenty).
inline double operator_norm(const Eigen::MatrixXd& a) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.transpose() * a,
                                                      Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

inline Eigen::MatrixXd kronecker(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd k(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return k;
}

inline bool is_hurwitz(const Eigen::MatrixXd& g) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(g, false);
    return (es.eigenvalues().real().array() < 0.0).all();
}

/// Detect the exact block layout produced by build_g.
inline bool matches_observer_structure(const Eigen::MatrixXd& g, double& alpha, double& beta) {
    const Eigen::Index dim = g.rows();
    if (dim != g.cols() || dim % 2 != 0 || dim < 2) return false;
    const Eigen::Index n = dim / 2;
    alpha = -g(0, 0);
    beta = -g(n, 0);
    if (!(alpha > 0.0) || !(beta > 0.0)) return false;
    const Eigen::MatrixXd pattern = build_g(alpha, beta, static_cast<int>(n));
    return (g.array() == pattern.array()).all();
}

}  // namespace detail

/**
 * Generic dense Lyapunov solve for G^T S + S G = -I via the vectorized
 * linear system (I (x) G^T + G^T (x) I) vec(S) = vec(-I). Kept public as the
 * independent route against which the structured solver is checked.
 */
inline Eigen::MatrixXd solve_lyapunov_dense(const Eigen::MatrixXd& g) {
    detail::require(g.rows() == g.cols() && g.rows() >= 1, "solve_lyapunov: G must be square");
    if (!detail::is_hurwitz(g)) {
        throw NoSolution("solve_lyapunov: G is not Hurwitz, no positive definite solution");
    }
    const Eigen::Index dim = g.rows();
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(dim, dim);
    const Eigen::MatrixXd gt = g.transpose();
    const Eigen::MatrixXd k = detail::kronecker(id, gt) + detail::kronecker(gt, id);
    const Eigen::VectorXd rhs = (-id).reshaped();
    const Eigen::VectorXd vec_s = k.partialPivLu().solve(rhs);
    Eigen::MatrixXd s = vec_s.reshaped(dim, dim);
    s = 0.5 * (s + s.transpose()).eval();
    return s;
}

/**
 * Solution S of G^T S + S G = -I.
 *
 * For the structured G from build_g the equation decouples joint-wise and is
 * solved in closed form: S = [a I, b I; b I, c I] with
 *
 *   a = (1 + beta) / (2 alpha),  b = -1/2,  c = (a + alpha/2) / beta.
 *
 * Arbitrary Hurwitz G falls back to the dense vectorized solve. The result
 * is verified (residual max-entry <= 1e-10, S positive definite) before
 * being returned.
 */
inline Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& g) {
    Eigen::MatrixXd s;
    double alpha = 0.0;
    double beta = 0.0;
    if (detail::matches_observer_structure(g, alpha, beta)) {
        const Eigen::Index n = g.rows() / 2;
        const double a = (1.0 + beta) / (2.0 * alpha);
        const double b = -0.5;
        const double c = (a + 0.5 * alpha) / beta;
        s = Eigen::MatrixXd::Zero(2 * n, 2 * n);
        s.topLeftCorner(n, n) = a * Eigen::MatrixXd::Identity(n, n);
        s.topRightCorner(n, n) = b * Eigen::MatrixXd::Identity(n, n);
        s.bottomLeftCorner(n, n) = b * Eigen::MatrixXd::Identity(n, n);
        s.bottomRightCorner(n, n) = c * Eigen::MatrixXd::Identity(n, n);
    } else {
        s = solve_lyapunov_dense(g);
    }
    const double residual = (g.transpose() * s + s * g +
                             Eigen::MatrixXd::Identity(g.rows(), g.cols()))
                                .cwiseAbs()
                                .maxCoeff();
    if (residual > 1e-10) {
        throw NoSolution("solve_lyapunov: residual exceeds 1e-10");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() > 0.0)) {
        throw NoSolution("solve_lyapunov: solution is not positive definite");
    }
    return s;
}

/// Spectral norm (largest |eigenvalue|) of a symmetric matrix.
inline double spectral_norm(const Eigen::MatrixXd& a) {
    detail::require(a.rows() == a.cols(), "spectral_norm: matrix must be square");
    if (!detail::is_symmetric(a)) {
        throw InvalidArgument("spectral_norm: matrix must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Sampling plan for the numeric bound estimation over Q x Vbar.
struct SamplingPlan {
    int q_samples = 10000;        ///< configuration samples (grid plus random fill)
    int v_random = 100;           ///< random interior velocity samples per q
    bool include_vertices = true; ///< always evaluate the 2^n box vertices
    double safety_factor = 1.05;  ///< multiplies every estimated supremum
    std::uint64_t seed = 0x0b51ab;
    std::int64_t max_evaluations = 1000000;  ///< cap on q * v evaluations

    bool empty() const {
        return q_samples <= 0 || (v_random <= 0 && !include_vertices);
    }
};

/// Sample point at which a bound estimate attained its maximum.
struct BoundArgmax {
    Eigen::VectorXd q;
    Eigen::VectorXd v;
    double value = 0.0;
};

/// Result of the sampling maximization over the configuration domain and
/// the velocity box.
struct BoundEstimate {
    double m0 = 0.0;        ///< sup ||M^-1(q)||, safety factor applied
    double b = 0.0;         ///< sup ||dA/dv(q,v)||, safety factor applied
    double lipschitz = 0.0; ///< sup ||M^-1(q) dA/dv(q,v)|| + sup ||M^-1(q) F||, safety applied
    BoundArgmax m0_argmax;
    BoundArgmax b_argmax;
    BoundArgmax lipschitz_argmax;
    std::int64_t evaluations = 0;
    double safety_factor = 1.0;
};

/**
 * Estimate the bounds entering the gain synthesis by maximizing over
 * sampled (q, v) in Q x Vbar:
 *
 *   m0 >= ||M^-1(q)||
 *   b  >= ||dA/dv(q,v)|| = ||2 [v^T N_i(q)]||
 *
 * and the Lipschitz constant of the perturbation term,
 *
 *   L >= sup ||M^-1(q) dA/dv(q,v)|| + sup ||M^-1(q) F||,
 *
 * which is tighter than the decoupled product m0 (b + ||F||) because the
 * maximizers of ||M^-1|| and ||dA/dv|| sit at different configurations.
 * Both are valid; theta* uses L, the report carries all three.
 *
 * dA/dv is linear in v, so for fixed q its norm is maximized at a vertex of
 * the velocity box; the plan therefore always includes all 2^n vertices,
 * with random interior points as cross-check. Configuration samples use a
 * per-joint grid (one period for revolute joints) plus uniform fill.
 */
inline BoundEstimate estimate_bounds(const ManipulatorModel& model,
                                     const Eigen::VectorXd& v_bounds, const SamplingPlan& plan) {
    detail::require(!plan.empty(), "estimate_bounds: sampling plan is empty");
    detail::require(v_bounds.size() == model.joint_count,
                    "estimate_bounds: v_bounds must have n entries");
    detail::require((v_bounds.array() >= 0).all(),
                    "estimate_bounds: v_bounds must be nonnegative");
    detail::require(plan.safety_factor >= 1.0,
                    "estimate_bounds: safety factor must be >= 1");

    const int n = model.joint_count;
    const std::int64_t vertex_count = plan.include_vertices ? (std::int64_t{1} << n) : 0;
    const std::int64_t per_q = vertex_count + plan.v_random;
    std::int64_t q_count = plan.q_samples;
    if (per_q > 0 && q_count * per_q > plan.max_evaluations) {
        q_count = std::max<std::int64_t>(1, plan.max_evaluations / per_q);
    }

    std::mt19937_64 rng(plan.seed);

    // Per-joint grid covering roughly half the budget, random fill for the rest.
    std::vector<Eigen::VectorXd> q_list;
    q_list.reserve(static_cast<size_t>(q_count));
    const int grid_per_joint =
        std::max(1, static_cast<int>(std::floor(std::pow(static_cast<double>(q_count) / 2.0,
                                                         1.0 / static_cast<double>(n)))));
    constexpr double two_pi = 6.283185307179586476925286766559;
    std::vector<int> idx(static_cast<size_t>(n), 0);
    while (true) {
        Eigen::VectorXd q(n);
        for (int j = 0; j < n; ++j) {
            const JointDomain& dom = model.domain[static_cast<size_t>(j)];
            const int i = idx[static_cast<size_t>(j)];
            if (dom.kind == JointKind::BoundedInterval) {
                q[j] = grid_per_joint == 1
                           ? 0.5 * (dom.lower + dom.upper)
                           : dom.lower + (dom.upper - dom.lower) * i / (grid_per_joint - 1.0);
            } else {
                q[j] = two_pi * i / grid_per_joint;
            }
        }
        q_list.push_back(std::move(q));
        int j = 0;
        while (j < n && ++idx[static_cast<size_t>(j)] == grid_per_joint) {
            idx[static_cast<size_t>(j)] = 0;
            ++j;
        }
        if (j == n) break;
        if (static_cast<std::int64_t>(q_list.size()) >= q_count) break;
    }
    if (static_cast<std::int64_t>(q_list.size()) < q_count) {
        auto fill = sample_domain(model, static_cast<int>(q_count -
                                                          static_cast<std::int64_t>(q_list.size())),
                                  rng);
        for (auto& q : fill) q_list.push_back(std::move(q));
    }

    const bool has_friction = (model.friction.array() != 0.0).any();

    BoundEstimate est;
    est.safety_factor = plan.safety_factor;
    double friction_coupled = 0.0;
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    Eigen::VectorXd v(n);
    for (const Eigen::VectorXd& q : q_list) {
        const Eigen::MatrixXd m = model.inertia(q);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
        const double lambda_min = es.eigenvalues().minCoeff();
        if (!(lambda_min > 0.0)) {
            throw ModelViolation("estimate_bounds: inertia not positive definite at a sample");
        }
        const double m0_cand = 1.0 / lambda_min;
        if (m0_cand > est.m0_argmax.value) {
            est.m0_argmax = {q, Eigen::VectorXd::Zero(n), m0_cand};
        }
        const Eigen::MatrixXd m_inv = es.eigenvectors() *
                                      es.eigenvalues().cwiseInverse().asDiagonal() *
                                      es.eigenvectors().transpose();
        if (has_friction) {
            friction_coupled = std::max(
                friction_coupled, detail::operator_norm(m_inv * model.friction.asDiagonal()));
        }

        const auto eval_velocity = [&](const Eigen::VectorXd& vel) {
            const Eigen::MatrixXd jac = coriolis_jacobian(model, q, vel);
            const double b_cand = detail::operator_norm(jac);
            if (b_cand > est.b_argmax.value) est.b_argmax = {q, vel, b_cand};
            const double l_cand = detail::operator_norm(m_inv * jac);
            if (l_cand > est.lipschitz_argmax.value) est.lipschitz_argmax = {q, vel, l_cand};
            ++est.evaluations;
        };

        if (plan.include_vertices) {
            for (std::int64_t mask = 0; mask < vertex_count; ++mask) {
                for (int j = 0; j < n; ++j) {
                    v[j] = ((mask >> j) & 1) ? v_bounds[j] : -v_bounds[j];
                }
                eval_velocity(v);
            }
        }
        for (int k = 0; k < plan.v_random; ++k) {
            for (int j = 0; j < n; ++j) v[j] = unit(rng) * v_bounds[j];
            eval_velocity(v);
        }
    }

    est.m0 = est.m0_argmax.value * plan.safety_factor;
    est.b = est.b_argmax.value * plan.safety_factor;
    est.lipschitz = (est.lipschitz_argmax.value + friction_coupled) * plan.safety_factor;
    return est;
}

/// Complete output of the constructive gain synthesis.
struct GainSynthesis {
    double alpha = 0.0;
    double beta = 0.0;
    int n = 0;
    Eigen::MatrixXd g;       ///< 2n x 2n error-dynamics matrix
    Eigen::MatrixXd s;       ///< Lyapunov solution, symmetric positive definite
    double s_norm = 0.0;     ///< ||S||
    double m0 = 0.0;         ///< ||M^-1|| bound
    double b_bound = 0.0;    ///< ||dA/dv|| bound over Q x Vbar
    double lipschitz_l = 0.0;///< Lipschitz constant of the perturbation term
    double theta_star = 0.0; ///< minimal gain guaranteeing decay rate gamma
    double gamma = 0.0;      ///< requested decay rate
    BoundEstimate bounds;    ///< sampling detail behind m0 / b_bound / lipschitz_l
};

/// theta* = 2 ||S|| (gamma + L).
inline double theta_star_for(double s_norm, double gamma, double lipschitz_l) {
    return 2.0 * s_norm * (gamma + lipschitz_l);
}

/**
 * Guaranteed exponential decay rate achieved by a gain theta:
 * (theta - 2 ||S|| L) / (2 ||S||). Throws NotGuaranteed (carrying the
 * threshold 2 ||S|| L) when theta is below the guarantee threshold.
 */
inline double achieved_rate(double theta, double s_norm, double lipschitz_l) {
    detail::require(s_norm > 0.0, "achieved_rate: s_norm must be positive");
    const double threshold = 2.0 * s_norm * lipschitz_l;
    if (theta < threshold) {
        throw NotGuaranteed("achieved_rate: theta below 2 ||S|| L, no rate guaranteed",
                            threshold);
    }
    return (theta - threshold) / (2.0 * s_norm);
}

/**
 * Full synthesis pipeline: build G, solve the Lyapunov equation, estimate
 * the bounds, and derive theta* for the requested rate gamma.
 *
 * lipschitz_override replaces the sampled Lipschitz constant (the sampled
 * m0 and b are still reported); pass it to reproduce a synthesis from an
 * externally supplied L.
 */
inline GainSynthesis synthesize(double alpha, double beta, const ManipulatorModel& model,
                                const Eigen::VectorXd& v_bounds, double gamma,
                                const SamplingPlan& plan = {},
                                std::optional<double> lipschitz_override = std::nullopt) {
    detail::require(gamma >= 0.0, "synthesize: gamma must be nonnegative");
    GainSynthesis out;
    out.alpha = alpha;
    out.beta = beta;
    out.n = model.joint_count;
    out.g = build_g(alpha, beta, model.joint_count);
    out.s = solve_lyapunov(out.g);
    out.s_norm = spectral_norm(out.s);
    out.bounds = estimate_bounds(model, v_bounds, plan);
    out.m0 = out.bounds.m0;
    out.b_bound = out.bounds.b;
    out.lipschitz_l = lipschitz_override.value_or(out.bounds.lipschitz);
    out.gamma = gamma;
    out.theta_star = theta_star_for(out.s_norm, gamma, out.lipschitz_l);
    return out;
}

}  // namespace obslab
