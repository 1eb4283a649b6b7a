#include "rod/optimizer.hpp"

#include <cmath>
#include <string>

namespace rod {

void adam_step(const std::vector<DenseMatrix*>& params,
               const std::vector<const DenseMatrix*>& grads, AdamState& state) {
    if (params.size() != grads.size())
        throw std::invalid_argument("adam_step: " + std::to_string(params.size()) +
                                    " params vs " + std::to_string(grads.size()) + " grads");
    if (state.m.empty()) {
        for (const DenseMatrix* p : params) {
            state.m.emplace_back(p->rows, p->cols);
            state.v.emplace_back(p->rows, p->cols);
        }
    }
    if (state.m.size() != params.size())
        throw std::invalid_argument("adam_step: parameter count changed between steps");

    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

    for (size_t p = 0; p < params.size(); ++p) {
        DenseMatrix& theta = *params[p];
        const DenseMatrix& grad = *grads[p];
        require_same_shape(theta, grad, "adam_step");
        require_same_shape(theta, state.m[p], "adam_step (moment)");
        for (size_t t = 0; t < theta.size(); ++t) {
            double g = grad.data[t] + state.weight_decay * theta.data[t];
            double& m = state.m[p].data[t];
            double& v = state.v[p].data[t];
            m = state.beta1 * m + (1.0 - state.beta1) * g;
            v = state.beta2 * v + (1.0 - state.beta2) * g * g;
            const double m_hat = m / bc1;
            const double v_hat = v / bc2;
            theta.data[t] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
}

}  // namespace rod
