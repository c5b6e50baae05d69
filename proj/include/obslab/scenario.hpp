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

#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "obslab/errors.hpp"
#include "obslab/gains.hpp"
#include "obslab/model.hpp"
#include "obslab/observer.hpp"
#include "obslab/pendubot.hpp"
#include "obslab/sim.hpp"

namespace obslab {

/// Model selection for a scenario: a named built-in plus optional parameter
/// overrides. "pendubot" is the full nonlinear two-joint model; "constant"
/// is a diagonal constant-inertia model without Coriolis terms (useful for
/// smoke tests and as a trivial bound-estimation case).
struct ModelSpec {
    std::string name = "pendubot";
    std::optional<PendubotParams> pendubot_params;  // overrides for "pendubot"
    Eigen::VectorXd inertia_diag;                   // "constant" model
    Eigen::VectorXd friction_diag;
    Eigen::VectorXd gravity_const;
};

inline ManipulatorModel build_model(const ModelSpec& spec) {
    if (spec.name == "pendubot") {
        return pendubot(spec.pendubot_params.value_or(PendubotParams{}));
    }
    if (spec.name == "constant") {
        const int n = static_cast<int>(spec.inertia_diag.size());
        detail::require(n >= 1, "model 'constant': inertia_diag must be nonempty");
        detail::require((spec.inertia_diag.array() > 0).all(),
                        "model 'constant': inertia_diag must be positive");
        ManipulatorModel model;
        model.name = "constant";
        model.joint_count = n;
        model.input_count = n;
        const Eigen::VectorXd diag = spec.inertia_diag;
        model.inertia = [diag](const Eigen::VectorXd&) {
            return Eigen::MatrixXd(diag.asDiagonal());
        };
        for (int i = 0; i < n; ++i) {
            model.coriolis_forms.push_back(
                [n](const Eigen::VectorXd&) { return Eigen::MatrixXd::Zero(n, n); });
        }
        model.friction = spec.friction_diag.size() == n
                             ? spec.friction_diag
                             : Eigen::VectorXd(Eigen::VectorXd::Zero(n));
        const Eigen::VectorXd g = spec.gravity_const.size() == n
                                      ? spec.gravity_const
                                      : Eigen::VectorXd(Eigen::VectorXd::Zero(n));
        model.gravity = [g](const Eigen::VectorXd&) { return g; };
        model.input_matrix = Eigen::MatrixXd::Identity(n, n);
        model.domain.assign(static_cast<size_t>(n), JointDomain::periodic());
        model.m0_bound = 1.0 / spec.inertia_diag.minCoeff();
        model.ni_bounds = Eigen::VectorXd::Zero(n);
        return model;
    }
    throw InvalidArgument("model: unknown name '" + spec.name + "' (expected 'pendubot' or 'constant')");
}

/// Declarative description of one synthesis/simulation/verification run.
/// Mirrors the JSON config schema one-to-one.
struct ScenarioConfig {
    ModelSpec model;
    double alpha = 1.0;
    double beta = 1.0;
    std::optional<double> theta;         ///< explicit gain; wins over synthesis
    std::optional<double> gamma_target;  ///< requested rate (theta source when theta absent)
    Eigen::VectorXd v_bounds;
    std::optional<double> lipschitz_override;  ///< replace the sampled L in the synthesis
    PlantState plant_initial;
    ObserverState observer_initial;
    InputSignal input;
    double dt = 1e-4;
    double t_final = 1.0;
    int record_stride = 1;
    std::uint64_t seed = 0;
    double epsilon = 0.01;  ///< campaign: radius of the q_hat(0) ball
    int trials = 20;        ///< campaign size
    double envelope_floor = 1e-10;
    SamplingPlan sampling;
    std::string out_dir;  ///< empty: resolved from --out / OBSLAB_OUT_DIR / cwd
    std::string trajectory_filename = "trajectory.csv";
    std::string report_filename = "report.json";
    std::optional<std::string> gnuplot_filename;
};

namespace detail {

inline const nlohmann::json& member(const nlohmann::json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end()) {
        throw InvalidArgument(std::string("config: missing field '") + key + "'");
    }
    return *it;
}

inline double number(const nlohmann::json& j, const char* key) {
    const nlohmann::json& v = member(j, key);
    if (!v.is_number()) {
        throw InvalidArgument(std::string("config field '") + key + "': expected a number");
    }
    return v.get<double>();
}

inline Eigen::VectorXd vector(const nlohmann::json& j, const char* key) {
    const nlohmann::json& v = member(j, key);
    if (!v.is_array() || v.empty()) {
        throw InvalidArgument(std::string("config field '") + key +
                              "': expected a nonempty array of numbers");
    }
    Eigen::VectorXd out(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) {
            throw InvalidArgument(std::string("config field '") + key +
                                  "': expected a nonempty array of numbers");
        }
        out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
    }
    return out;
}

inline nlohmann::json to_json(const Eigen::VectorXd& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

}  // namespace detail

inline InputSignal input_from_json(const nlohmann::json& j) {
    const std::string kind = detail::member(j, "kind").get<std::string>();
    if (kind == "zero") {
        return InputSignal::zero(j.value("channels", 1));
    }
    if (kind == "constant") {
        return InputSignal::make_constant(detail::vector(j, "value"));
    }
    if (kind == "sine") {
        return InputSignal::sine(detail::vector(j, "amplitude"),
                                 detail::vector(j, "angular_frequency"));
    }
    if (kind == "table") {
        const nlohmann::json& times = detail::member(j, "times");
        const nlohmann::json& values = detail::member(j, "values");
        if (!times.is_array() || !values.is_array() || times.size() != values.size()) {
            throw InvalidArgument("config field 'input': table times/values must be arrays of equal length");
        }
        std::vector<double> t;
        std::vector<Eigen::VectorXd> u;
        for (size_t i = 0; i < times.size(); ++i) {
            t.push_back(times[i].get<double>());
            const nlohmann::json& row = values[i];
            Eigen::VectorXd v(row.size());
            for (size_t k = 0; k < row.size(); ++k) v[static_cast<Eigen::Index>(k)] = row[k].get<double>();
            u.push_back(std::move(v));
        }
        return InputSignal::table(std::move(t), std::move(u));
    }
    throw InvalidArgument("config field 'input.kind': expected zero|constant|sine|table");
}

inline nlohmann::json input_to_json(const InputSignal& input) {
    nlohmann::json j;
    switch (input.kind) {
        case InputSignal::Kind::Zero:
            j["kind"] = "zero";
            j["channels"] = input.channels;
            break;
        case InputSignal::Kind::Constant:
            j["kind"] = "constant";
            j["value"] = detail::to_json(input.constant);
            break;
        case InputSignal::Kind::Sine:
            j["kind"] = "sine";
            j["amplitude"] = detail::to_json(input.amplitude);
            j["angular_frequency"] = detail::to_json(input.angular_frequency);
            break;
        case InputSignal::Kind::Table: {
            j["kind"] = "table";
            j["times"] = input.table_times;
            nlohmann::json rows = nlohmann::json::array();
            for (const auto& v : input.table_values) rows.push_back(detail::to_json(v));
            j["values"] = rows;
            break;
        }
    }
    return j;
}

inline ModelSpec model_from_json(const nlohmann::json& j) {
    ModelSpec spec;
    if (j.is_string()) {
        spec.name = j.get<std::string>();
        return spec;
    }
    if (!j.is_object()) {
        throw InvalidArgument("config field 'model': expected a name or an object");
    }
    spec.name = detail::member(j, "name").get<std::string>();
    if (spec.name == "pendubot") {
        PendubotParams p;
        if (j.contains("pi")) {
            const Eigen::VectorXd pi = detail::vector(j, "pi");
            if (pi.size() != 5) throw InvalidArgument("config field 'model.pi': expected 5 entries");
            p.pi1 = pi[0];
            p.pi2 = pi[1];
            p.pi3 = pi[2];
            p.pi4 = pi[3];
            p.pi5 = pi[4];
        }
        if (j.contains("g0")) p.g0 = detail::number(j, "g0");
        if (j.contains("friction")) {
            const Eigen::VectorXd f = detail::vector(j, "friction");
            if (f.size() != 2) throw InvalidArgument("config field 'model.friction': expected 2 entries");
            p.friction1 = f[0];
            p.friction2 = f[1];
        }
        spec.pendubot_params = p;
    } else if (spec.name == "constant") {
        spec.inertia_diag = detail::vector(j, "inertia_diag");
        if (j.contains("friction")) spec.friction_diag = detail::vector(j, "friction");
        if (j.contains("gravity")) spec.gravity_const = detail::vector(j, "gravity");
    }
    return spec;
}

inline nlohmann::json model_to_json(const ModelSpec& spec) {
    if (spec.name == "pendubot" && !spec.pendubot_params) {
        return nlohmann::json(spec.name);
    }
    nlohmann::json j;
    j["name"] = spec.name;
    if (spec.pendubot_params) {
        const PendubotParams& p = *spec.pendubot_params;
        j["pi"] = {p.pi1, p.pi2, p.pi3, p.pi4, p.pi5};
        j["g0"] = p.g0;
        j["friction"] = {p.friction1, p.friction2};
    }
    if (spec.name == "constant") {
        j["inertia_diag"] = detail::to_json(spec.inertia_diag);
        if (spec.friction_diag.size() > 0) j["friction"] = detail::to_json(spec.friction_diag);
        if (spec.gravity_const.size() > 0) j["gravity"] = detail::to_json(spec.gravity_const);
    }
    return j;
}

inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw InvalidArgument("config: top level must be an object");
    ScenarioConfig cfg;
    cfg.model = model_from_json(detail::member(j, "model"));
    cfg.alpha = detail::number(j, "alpha");
    cfg.beta = detail::number(j, "beta");
    if (j.contains("theta")) cfg.theta = detail::number(j, "theta");
    if (j.contains("gamma_target")) cfg.gamma_target = detail::number(j, "gamma_target");
    cfg.v_bounds = detail::vector(j, "v_bounds");
    if (j.contains("lipschitz_override")) cfg.lipschitz_override = detail::number(j, "lipschitz_override");

    const nlohmann::json& plant = detail::member(j, "plant_initial");
    cfg.plant_initial.q = detail::vector(plant, "q");
    cfg.plant_initial.v = detail::vector(plant, "v");
    const nlohmann::json& obs = detail::member(j, "observer_initial");
    cfg.observer_initial.q_hat = detail::vector(obs, "q");
    cfg.observer_initial.v_hat = detail::vector(obs, "v");

    cfg.input = input_from_json(detail::member(j, "input"));
    cfg.dt = detail::number(j, "dt");
    cfg.t_final = detail::number(j, "t_final");
    if (j.contains("record_stride")) cfg.record_stride = detail::member(j, "record_stride").get<int>();
    if (j.contains("seed")) cfg.seed = detail::member(j, "seed").get<std::uint64_t>();
    if (j.contains("epsilon")) cfg.epsilon = detail::number(j, "epsilon");
    if (j.contains("trials")) cfg.trials = detail::member(j, "trials").get<int>();
    if (j.contains("envelope_floor")) cfg.envelope_floor = detail::number(j, "envelope_floor");

    if (j.contains("sampling")) {
        const nlohmann::json& s = j["sampling"];
        if (s.contains("q_samples")) cfg.sampling.q_samples = s["q_samples"].get<int>();
        if (s.contains("v_random")) cfg.sampling.v_random = s["v_random"].get<int>();
        if (s.contains("include_vertices")) cfg.sampling.include_vertices = s["include_vertices"].get<bool>();
        if (s.contains("safety_factor")) cfg.sampling.safety_factor = s["safety_factor"].get<double>();
        if (s.contains("seed")) cfg.sampling.seed = s["seed"].get<std::uint64_t>();
        if (s.contains("max_evaluations")) cfg.sampling.max_evaluations = s["max_evaluations"].get<std::int64_t>();
    }

    if (j.contains("output")) {
        const nlohmann::json& o = j["output"];
        if (o.contains("dir")) cfg.out_dir = o["dir"].get<std::string>();
        if (o.contains("trajectory")) cfg.trajectory_filename = o["trajectory"].get<std::string>();
        if (o.contains("report")) cfg.report_filename = o["report"].get<std::string>();
        if (o.contains("gnuplot")) cfg.gnuplot_filename = o["gnuplot"].get<std::string>();
    }
    return cfg;
}

inline nlohmann::json scenario_to_json(const ScenarioConfig& cfg) {
    nlohmann::json j;
    j["model"] = model_to_json(cfg.model);
    j["alpha"] = cfg.alpha;
    j["beta"] = cfg.beta;
    if (cfg.theta) j["theta"] = *cfg.theta;
    if (cfg.gamma_target) j["gamma_target"] = *cfg.gamma_target;
    j["v_bounds"] = detail::to_json(cfg.v_bounds);
    if (cfg.lipschitz_override) j["lipschitz_override"] = *cfg.lipschitz_override;
    j["plant_initial"] = {{"q", detail::to_json(cfg.plant_initial.q)},
                          {"v", detail::to_json(cfg.plant_initial.v)}};
    j["observer_initial"] = {{"q", detail::to_json(cfg.observer_initial.q_hat)},
                             {"v", detail::to_json(cfg.observer_initial.v_hat)}};
    j["input"] = input_to_json(cfg.input);
    j["dt"] = cfg.dt;
    j["t_final"] = cfg.t_final;
    j["record_stride"] = cfg.record_stride;
    j["seed"] = cfg.seed;
    j["epsilon"] = cfg.epsilon;
    j["trials"] = cfg.trials;
    j["envelope_floor"] = cfg.envelope_floor;
    j["sampling"] = {{"q_samples", cfg.sampling.q_samples},
                     {"v_random", cfg.sampling.v_random},
                     {"include_vertices", cfg.sampling.include_vertices},
                     {"safety_factor", cfg.sampling.safety_factor},
                     {"seed", cfg.sampling.seed},
                     {"max_evaluations", cfg.sampling.max_evaluations}};
    nlohmann::json out;
    if (!cfg.out_dir.empty()) out["dir"] = cfg.out_dir;
    out["trajectory"] = cfg.trajectory_filename;
    out["report"] = cfg.report_filename;
    if (cfg.gnuplot_filename) out["gnuplot"] = *cfg.gnuplot_filename;
    j["output"] = out;
    return j;
}

/// Cross-field validation. Throws InvalidArgument naming the offending field.
inline void validate_scenario(const ScenarioConfig& cfg) {
    const ManipulatorModel model = build_model(cfg.model);
    const int n = model.joint_count;
    if (!(cfg.alpha > 0.0)) throw InvalidArgument("config field 'alpha': must be positive");
    if (!(cfg.beta > 0.0)) throw InvalidArgument("config field 'beta': must be positive");
    if (cfg.theta && !(*cfg.theta > 0.0)) throw InvalidArgument("config field 'theta': must be positive");
    if (cfg.gamma_target && !(*cfg.gamma_target >= 0.0)) {
        throw InvalidArgument("config field 'gamma_target': must be nonnegative");
    }
    if (!cfg.theta && !cfg.gamma_target) {
        throw InvalidArgument("config: one of 'theta' or 'gamma_target' must be given as the theta source");
    }
    if (cfg.v_bounds.size() != n) {
        throw InvalidArgument("config field 'v_bounds': must have one entry per joint");
    }
    if (!(cfg.v_bounds.array() >= 0).all()) {
        throw InvalidArgument("config field 'v_bounds': entries must be nonnegative");
    }
    if (cfg.lipschitz_override && !(*cfg.lipschitz_override >= 0.0)) {
        throw InvalidArgument("config field 'lipschitz_override': must be nonnegative");
    }
    if (cfg.plant_initial.q.size() != n || cfg.plant_initial.v.size() != n) {
        throw InvalidArgument("config field 'plant_initial': wrong dimension");
    }
    if (cfg.observer_initial.q_hat.size() != n || cfg.observer_initial.v_hat.size() != n) {
        throw InvalidArgument("config field 'observer_initial': wrong dimension");
    }
    if (cfg.input.channels != model.input_count) {
        throw InvalidArgument("config field 'input': channel count must equal the model input count");
    }
    if (!(cfg.dt > 0.0)) throw InvalidArgument("config field 'dt': must be positive");
    if (!(cfg.t_final >= cfg.dt)) throw InvalidArgument("config field 't_final': must be >= dt");
    if (cfg.record_stride < 1) throw InvalidArgument("config field 'record_stride': must be >= 1");
    if (!(cfg.epsilon > 0.0)) throw InvalidArgument("config field 'epsilon': must be positive");
    if (cfg.trials < 1) throw InvalidArgument("config field 'trials': must be >= 1");
    if (!(cfg.envelope_floor >= 0.0)) throw InvalidArgument("config field 'envelope_floor': must be nonnegative");
    if (cfg.sampling.empty()) throw InvalidArgument("config field 'sampling': plan is empty");
    if (!(cfg.sampling.safety_factor >= 1.0)) {
        throw InvalidArgument("config field 'sampling.safety_factor': must be >= 1");
    }
}

/// The shipped Pendubot reproduction scenario: oscillation about the lower
/// equilibrium under u = 1.5 sin(100 t), observer started with a (2, 2)
/// velocity estimate error, theta = 200 against a synthesis target rate of
/// 1.27 with the published Lipschitz constant 54.01.
inline ScenarioConfig pendubot_paper_scenario() {
    ScenarioConfig cfg;
    cfg.model.name = "pendubot";
    cfg.alpha = 1.0;
    cfg.beta = 1.0;
    cfg.theta = 200.0;
    cfg.gamma_target = 1.27;
    cfg.v_bounds = Eigen::Vector2d(10.0, 10.0);
    cfg.lipschitz_override = 54.01;
    const double half_pi = 1.5707963267948966;
    cfg.plant_initial.q = Eigen::Vector2d(-half_pi, 0.0);
    cfg.plant_initial.v = Eigen::Vector2d(0.0, 0.0);
    cfg.observer_initial.q_hat = Eigen::Vector2d(-half_pi, 0.0);
    cfg.observer_initial.v_hat = Eigen::Vector2d(2.0, 2.0);
    cfg.input = InputSignal::sine(Eigen::VectorXd::Constant(1, 1.5),
                                  Eigen::VectorXd::Constant(1, 100.0));
    cfg.dt = 2e-5;
    cfg.t_final = 5.0;
    cfg.record_stride = 50;
    cfg.seed = 42;
    cfg.epsilon = 0.01;
    cfg.trials = 20;
    cfg.envelope_floor = 1e-10;
    cfg.trajectory_filename = "pendubot_trajectory.csv";
    cfg.report_filename = "report.json";
    cfg.gnuplot_filename = "pendubot_trajectory.gp";
    return cfg;
}

inline ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("config: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("config: JSON parse error in '" + path + "': " + e.what());
    }
    return scenario_from_json(j);
}

inline void save_scenario(const ScenarioConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("config: cannot open '" + path + "' for writing");
    out << scenario_to_json(cfg).dump(2) << '\n';
}

}  // namespace obslab
