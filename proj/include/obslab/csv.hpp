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

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "obslab/errors.hpp"
#include "obslab/sim.hpp"

namespace obslab {

/// Shortest decimal representation that round-trips the exact double.
inline std::string format_double(double value) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text) {
    double value = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw InvalidArgument("csv: cannot parse number '" + std::string(text) + "'");
    }
    return value;
}

/// Column header for a trajectory with n joints and m inputs:
/// t,q1..qn,v1..vn,qhat1..qhatn,vhat1..vhatn,u1..um,err_norm,scaled_err_norm,domain_flag
inline std::string trajectory_csv_header(int n, int m) {
    std::ostringstream oss;
    oss << "t";
    const auto cols = [&](const char* prefix, int count) {
        for (int i = 1; i <= count; ++i) oss << ',' << prefix << i;
    };
    cols("q", n);
    cols("v", n);
    cols("qhat", n);
    cols("vhat", n);
    cols("u", m);
    oss << ",err_norm,scaled_err_norm,domain_flag";
    return oss.str();
}

inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj, int n, int m) {
    out << trajectory_csv_header(n, m) << '\n';
    for (size_t k = 0; k < traj.size(); ++k) {
        out << format_double(traj.times[k]);
        const auto emit = [&](const Eigen::VectorXd& v) {
            for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << format_double(v[i]);
        };
        emit(traj.plant_states[k].q);
        emit(traj.plant_states[k].v);
        emit(traj.observer_states[k].q_hat);
        emit(traj.observer_states[k].v_hat);
        emit(traj.inputs[k]);
        out << ',' << format_double(traj.error_norms[k]) << ','
            << format_double(traj.scaled_error_norms[k]) << ','
            << (traj.domain_violation_flags[k] ? '1' : '0') << '\n';
    }
}

inline void write_trajectory_csv(const std::string& path, const Trajectory& traj, int n, int m) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("csv: cannot open '" + path + "' for writing");
    write_trajectory_csv(out, traj, n, m);
}

struct LoadedTrajectory {
    Trajectory trajectory;
    int joint_count = 0;
    int input_count = 0;
};

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> fields;
    size_t start = 0;
    while (true) {
        const size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

}  // namespace detail

inline LoadedTrajectory read_trajectory_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw InvalidArgument("csv: empty trajectory file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split_csv_line(line);

    int n = 0;
    int m = 0;
    for (const auto& name : header) {
        if (name.size() > 1 && name[0] == 'q' && name[1] >= '0' && name[1] <= '9') ++n;
        if (name.size() > 1 && name[0] == 'u' && name[1] >= '0' && name[1] <= '9') ++m;
    }
    if (n < 1 || m < 1 || line != trajectory_csv_header(n, m)) {
        throw InvalidArgument("csv: unrecognized trajectory header");
    }

    LoadedTrajectory loaded;
    loaded.joint_count = n;
    loaded.input_count = m;
    Trajectory& traj = loaded.trajectory;
    const size_t expected = static_cast<size_t>(1 + 4 * n + m + 3);
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != expected) {
            throw InvalidArgument("csv: row has wrong number of fields");
        }
        size_t pos = 0;
        traj.times.push_back(parse_double(fields[pos++]));
        const auto take = [&](int count) {
            Eigen::VectorXd v(count);
            for (int i = 0; i < count; ++i) v[i] = parse_double(fields[pos++]);
            return v;
        };
        PlantState plant;
        plant.q = take(n);
        plant.v = take(n);
        ObserverState obs;
        obs.q_hat = take(n);
        obs.v_hat = take(n);
        traj.inputs.push_back(take(m));
        traj.plant_states.push_back(std::move(plant));
        traj.observer_states.push_back(std::move(obs));
        traj.error_norms.push_back(parse_double(fields[pos++]));
        traj.scaled_error_norms.push_back(parse_double(fields[pos++]));
        traj.domain_violation_flags.push_back(fields[pos++] == "1");
    }
    return loaded;
}

inline LoadedTrajectory read_trajectory_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("csv: cannot open '" + path + "' for reading");
    return read_trajectory_csv(in);
}

/// Minimal gnuplot script plotting joint estimates against plant states.
inline void write_gnuplot_script(const std::string& path, const std::string& csv_name, int n) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("csv: cannot open '" + path + "' for writing");
    out << "set datafile separator ','\n";
    out << "set key autotitle columnhead\n";
    out << "set xlabel 't [s]'\n";
    out << "set multiplot layout 2,1\n";
    out << "set ylabel 'positions'\n";
    out << "plot";
    for (int i = 1; i <= n; ++i) {
        out << (i == 1 ? " " : ", ") << "'" << csv_name << "' using 1:" << (1 + i)
            << " with lines, '" << csv_name << "' using 1:" << (1 + 2 * n + i)
            << " with lines dashtype 2";
    }
    out << "\nset ylabel 'velocities'\nplot";
    for (int i = 1; i <= n; ++i) {
        out << (i == 1 ? " " : ", ") << "'" << csv_name << "' using 1:" << (1 + n + i)
            << " with lines, '" << csv_name << "' using 1:" << (1 + 3 * n + i)
            << " with lines dashtype 2";
    }
    out << "\nunset multiplot\n";
}

}  // namespace obslab
