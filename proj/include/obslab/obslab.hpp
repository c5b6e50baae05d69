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

#include "obslab/csv.hpp"
#include "obslab/errors.hpp"
#include "obslab/gains.hpp"
#include "obslab/model.hpp"
#include "obslab/observer.hpp"
#include "obslab/pendubot.hpp"
#include "obslab/scenario.hpp"
#include "obslab/sim.hpp"
