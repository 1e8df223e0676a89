// SPDX-License-Identifier: Apache-2.0
// Direct long-double evaluation of the model loss, written independently of
// model.cpp. Serves as the finite-difference oracle for backward().
#pragma once

#include "newsattn/model.hpp"

namespace newsattn::reference {

struct ReferenceOutput {
  long double probs[2];
  long double loss;
};

/// mask == nullptr means no dropout.
ReferenceOutput evaluate(const model::DayMatrices& days, const model::ModelParams& params,
                         const model::ModelConfig& config, const numerics::Vector* mask,
                         int label);

}  // namespace newsattn::reference
