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

#include "spanlm/adamw.hpp"

#include <cmath>

#include "spanlm/error.hpp"

namespace spanlm {

template <typename T>
AdamW<T>::AdamW(AdamWConfig config, std::vector<ParameterPtr<T>> params)
    : config_(config), params_(std::move(params)) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

template <typename T>
void AdamW<T>::zero_grad() {
  for (const auto& p : params_) p->zero_grad();
}

template <typename T>
bool AdamW<T>::step() {
  for (const auto& p : params_) {
    for (T g : p->grad.values()) {
      if (!std::isfinite(g)) {
        if (config_.non_finite == NonFinitePolicy::kSkipStep) {
          zero_grad();
          return false;
        }
        throw NumericError(step_ + 1, "non-finite gradient in parameter " + p->name);
      }
    }
  }
  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double decay = 1.0 - config_.lr * config_.weight_decay;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& theta = params_[k]->value.storage();
    const auto& grad = params_[k]->grad.storage();
    auto& m = m_[k].storage();
    auto& v = v_[k].storage();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = grad[i];
      const double mi = b1 * m[i] + (1.0 - b1) * g;
      const double vi = b2 * v[i] + (1.0 - b2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double mhat = mi / bias1;
      const double vhat = vi / bias2;
      const double updated = static_cast<double>(theta[i]) * decay - config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
      theta[i] = static_cast<T>(updated);
    }
  }
  zero_grad();
  return true;
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace spanlm
