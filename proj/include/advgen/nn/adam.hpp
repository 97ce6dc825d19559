// Copyright 2026 The advgen Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ADVGEN_NN_ADAM_HPP_
#define ADVGEN_NN_ADAM_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "advgen/nn/params.hpp"

namespace advgen::nn {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment optimiser over a ParamSet.
class Adam {
 public:
  Adam(const ParamSet& params, AdamOptions options);

  void step(ParamSet& params, std::span<const Tensor> grads);

  std::int64_t steps_taken() const { return step_; }
  const AdamOptions& options() const { return options_; }

  /// Moment buffers, exposed so training can be checkpointed and resumed.
  ParamSet state() const;
  void restore(const ParamSet& state, std::int64_t steps_taken);

 private:
  AdamOptions options_;
  std::int64_t step_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace advgen::nn

#endif  // ADVGEN_NN_ADAM_HPP_
