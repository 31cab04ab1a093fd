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

#include <cstdint>
#include <vector>

#include "spanlm/autograd.hpp"

namespace spanlm {

enum class NonFinitePolicy { kAbort, kSkipStep };

struct AdamWConfig {
  double lr = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  NonFinitePolicy non_finite = NonFinitePolicy::kAbort;
};

// AdamW with decoupled weight decay and bias correction:
//   theta <- theta * (1 - lr * wd)
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   theta <- theta - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
template <typename T>
class AdamW {
 public:
  AdamW(AdamWConfig config, std::vector<ParameterPtr<T>> params);

  // Applies one update from the parameters' accumulated gradients and
  // clears them. Returns false when the step was skipped because of a
  // non-finite gradient under NonFinitePolicy::kSkipStep; throws
  // NumericError under kAbort.
  bool step();

  void zero_grad();

  std::int64_t steps() const { return step_; }
  void set_steps(std::int64_t s) { step_ = s; }
  const AdamWConfig& config() const { return config_; }
  AdamWConfig& config() { return config_; }

  const std::vector<ParameterPtr<T>>& params() const { return params_; }
  std::vector<Tensor<T>>& first_moments() { return m_; }
  std::vector<Tensor<T>>& second_moments() { return v_; }
  const std::vector<Tensor<T>>& first_moments() const { return m_; }
  const std::vector<Tensor<T>>& second_moments() const { return v_; }

 private:
  AdamWConfig config_;
  std::vector<ParameterPtr<T>> params_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  std::int64_t step_ = 0;
};

}  // namespace spanlm
