#include "gorl/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace gorl {

AdamState make_adam(const std::vector<const Matrix*>& params, double lr,
                    double beta1, double beta2, double eps) {
    AdamState s;
    s.lr = lr;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.eps = eps;
    for (const Matrix* p : params) {
        s.first_moment.emplace_back(p->rows(), p->cols());
        s.second_moment.emplace_back(p->rows(), p->cols());
    }
    return s;
}

void adam_step(const std::vector<Matrix*>& params,
               const std::vector<const Matrix*>& grads, AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size())
        throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    for (size_t k = 0; k < params.size(); ++k) {
        Matrix& p = *params[k];
        const Matrix& g = *grads[k];
        Matrix& m = state.first_moment[k];
        Matrix& v = state.second_moment[k];
        if (!p.same_shape(g) || !p.same_shape(m))
            throw std::invalid_argument("adam_step: shape mismatch");
        for (size_t i = 0; i < p.size(); ++i) {
            const double gi = g.data()[i];
            if (!std::isfinite(gi)) throw std::runtime_error("adam_step: non-finite gradient");
            m.data()[i] = state.beta1 * m.data()[i] + (1.0 - state.beta1) * gi;
            v.data()[i] = state.beta2 * v.data()[i] + (1.0 - state.beta2) * gi * gi;
            const double mhat = m.data()[i] / bc1;
            const double vhat = v.data()[i] / bc2;
            p.data()[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

}  // namespace gorl
