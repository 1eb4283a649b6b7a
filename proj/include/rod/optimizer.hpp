#pragma once

#include <vector>

#include "rod/matrix.hpp"

namespace rod {

/// Adam with bias correction. Moment accumulators are created lazily on the
/// first step; parameter order must stay fixed across steps.
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // classic L2-in-gradient coupling
    long step = 0;
    std::vector<DenseMatrix> m, v;
};

void adam_step(const std::vector<DenseMatrix*>& params,
               const std::vector<const DenseMatrix*>& grads, AdamState& state);

}  // namespace rod
