/*
 * Copyright 2026 The accup Authors.
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

#ifndef ACCUP_OPTIM_HPP_
#define ACCUP_OPTIM_HPP_

#include <cstddef>
#include <vector>

#include "accup/tensor.hpp"

namespace accup {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Holds handles to the parameter leaves it
// updates in place; moments are owned here.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Tensor> params, AdamConfig config);

  void ZeroGrad();
  // One update from the gradients currently accumulated on the parameters.
  void Step();

  std::size_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamConfig config_;
  std::size_t steps_ = 0;
};

}  // namespace accup

#endif  // ACCUP_OPTIM_HPP_
