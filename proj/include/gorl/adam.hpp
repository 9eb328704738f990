#pragma once

#include <vector>

#include "gorl/matrix.hpp"

namespace gorl {

// Bias-corrected Adam over an ordered list of parameter tensors.
struct AdamState {
    std::vector<Matrix> first_moment;
    std::vector<Matrix> second_moment;
    long step_count = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

AdamState make_adam(const std::vector<const Matrix*>& params, double lr,
                    double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// Applies one update in place; throws on shape mismatch or non-finite grads.
void adam_step(const std::vector<Matrix*>& params,
               const std::vector<const Matrix*>& grads, AdamState& state);

}  // namespace gorl
