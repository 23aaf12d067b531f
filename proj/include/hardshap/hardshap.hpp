/*
 * Copyright 2026 The hardshap Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "hardshap/augment.hpp"
#include "hardshap/common.hpp"
#include "hardshap/csv.hpp"
#include "hardshap/dataiq.hpp"
#include "hardshap/dataset.hpp"
#include "hardshap/eval.hpp"
#include "hardshap/perturb.hpp"
#include "hardshap/sim.hpp"
#include "hardshap/valuation.hpp"
