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

#include "spanlm/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "spanlm/error.hpp"

namespace spanlm {
namespace {

double evaluate(const ScalarGraph& f) {
  Tape<double> tape;
  const double v = f(tape).value().item();
  if (!std::isfinite(v)) throw NumericError(0, "grad_check: non-finite function value");
  return v;
}

}  // namespace

GradCheckResult grad_check(const ScalarGraph& f, const std::vector<ParameterPtr<double>>& params,
                           const GradCheckOptions& options) {
  if (options.order != 2 && options.order != 4) throw std::invalid_argument("grad_check: order must be 2 or 4");
  for (const auto& p : params) p->zero_grad();
  {
    Tape<double> tape;
    Var<double> out = f(tape);
    if (!std::isfinite(out.value().item())) throw NumericError(0, "grad_check: non-finite function value");
    tape.backward(out);
  }

  GradCheckResult result;
  for (const auto& p : params) {
    const std::size_t n = p->value.size();
    std::size_t stride = 1;
    if (options.max_entries_per_param > 0 && n > options.max_entries_per_param) {
      stride = (n + options.max_entries_per_param - 1) / options.max_entries_per_param;
    }
    for (std::size_t i = 0; i < n; i += stride) {
      const double analytic = p->grad[i];
      if (!std::isfinite(analytic)) throw NumericError(0, "grad_check: non-finite gradient in " + p->name);
      const double saved = p->value[i];
      auto at = [&](double offset) {
        p->value[i] = saved + offset;
        const double v = evaluate(f);
        p->value[i] = saved;
        return v;
      };
      const double h = options.eps;
      const double numeric = options.order == 2
                                 ? (at(h) - at(-h)) / (2.0 * h)
                                 : (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
      const double abs_err = std::abs(analytic - numeric);
      const double denom = std::max({std::abs(analytic), std::abs(numeric), options.denominator_floor});
      const double rel_err = abs_err / denom;
      ++result.entries_checked;
      result.max_abs_error = std::max(result.max_abs_error, abs_err);
      if (rel_err > result.max_rel_error) {
        result.max_rel_error = rel_err;
        result.worst_param = p->name;
        result.worst_index = i;
      }
    }
  }
  for (const auto& p : params) p->zero_grad();
  return result;
}

}  // namespace spanlm
