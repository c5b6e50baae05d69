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

#include <stdexcept>
#include <string>

namespace obslab {

/// Bad user input: wrong dimensions, nonpositive gains, negative saturation
/// levels, malformed configs.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A structural property of the manipulator model failed at runtime,
/// e.g. the inertia matrix is singular or indefinite at some configuration.
class ModelViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The Lyapunov equation has no (positive definite) solution, e.g. because
/// the supplied matrix is not Hurwitz.
class NoSolution : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Not enough usable samples for a statistical fit.
class InsufficientData : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A requested quantity is outside the regime covered by the convergence
/// guarantee. Carries the threshold that was violated.
class NotGuaranteed : public std::runtime_error {
public:
    NotGuaranteed(const std::string& what, double threshold_value)
        : std::runtime_error(what), threshold(threshold_value) {}

    double threshold;
};

}  // namespace obslab
