// Copyright 2026 The spanlm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "spanlm/autograd.hpp"

namespace spanlm {

struct GradCheckOptions {
  double eps = 1e-4;
  // Denominator floor for the relative error, so entries whose true
  // gradient is (near) zero are judged on absolute error instead.
  double denominator_floor = 1e-8;
  // Check at most this many entries per parameter (evenly strided); 0 = all.
  std::size_t max_entries_per_param = 0;
  // Central stencil order: 2 uses f(x +- eps); 4 adds f(x +- 2 eps) and
  // cancels the eps^2 truncation term, for deep graphs whose small
  // gradient entries would otherwise be judged on truncation error.
  int order = 2;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t entries_checked = 0;
};

using ScalarGraph = std::function<Var<double>(Tape<double>&)>;

// Central finite differences (f(theta + eps e) - f(theta - eps e)) / 2 eps,
// or the fourth-order stencil, against tape gradients, entry by entry. `f`
// must be deterministic. Throws std::invalid_argument for an order other
// than 2 or 4.
// Throws NumericError if any evaluated loss or gradient is non-finite.
GradCheckResult grad_check(const ScalarGraph& f, const std::vector<ParameterPtr<double>>& params,
                           const GradCheckOptions& options = {});

}  // namespace spanlm
