#include "gorl/encoder.hpp"

#include <cmath>
#include <numbers>

#include "gorl/errors.hpp"

namespace gorl {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;  // ln(2*pi)
}

double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

double softplus_inverse(double y) { return std::log(std::expm1(y)); }

namespace {

// Pre-scale bias whose softplus rounds to exactly 1.0, so a zeroed scale
// head yields sigma == 1 bit-exactly.
double prescale_for_unit_sigma() {
    static const double bias = [] {
        double x = softplus_inverse(1.0);
        for (int i = 0; i < 4; ++i) x -= (softplus(x) - 1.0) * (1.0 + std::exp(-x));
        for (int k = 0; k <= 8; ++k) {
            for (int sign : {1, -1}) {
                double cand = x;
                for (int s = 0; s < k; ++s)
                    cand = std::nextafter(cand, sign > 0 ? HUGE_VAL : -HUGE_VAL);
                if (softplus(cand) == 1.0) return cand;
            }
        }
        return x;
    }();
    return bias;
}

}  // namespace

GaussianHead make_gaussian_head(int obs_dim, int latent_dim, const std::vector<int>& hidden_widths,
                                RngStream& stream) {
    if (hidden_widths.empty()) throw std::invalid_argument("make_gaussian_head: no hidden widths");
    GaussianHead head;
    head.latent_dim = latent_dim;
    std::vector<int> trunk_dims;
    trunk_dims.push_back(obs_dim);
    for (int w : hidden_widths) trunk_dims.push_back(w);
    head.trunk = make_mlp(trunk_dims, Activation::SiLU, Activation::SiLU);
    head.mean_head = make_mlp({hidden_widths.back(), latent_dim}, Activation::Identity);
    head.scale_head = make_mlp({hidden_widths.back(), latent_dim}, Activation::Identity);
    init_mlp(head.trunk, stream);
    init_mlp(head.mean_head, stream);
    init_mlp(head.scale_head, stream);
    // Start at the prior scale: sigma(0 features) = softplus(bias) = 1.
    head.scale_head.biases[0].fill(prescale_for_unit_sigma());
    return head;
}

HeadEval head_forward(const GaussianHead& head, const Matrix& states) {
    HeadEval eval;
    Matrix features = mlp_forward(head.trunk, states, &eval.trunk_tape);
    eval.mean = mlp_forward(head.mean_head, features, &eval.mean_tape);
    eval.prescale = mlp_forward(head.scale_head, features, &eval.scale_tape);
    if (!all_finite(eval.mean) || !all_finite(eval.prescale))
        throw NumericError("head_forward: non-finite head output");
    eval.sigma = eval.prescale;
    for (size_t i = 0; i < eval.sigma.size(); ++i) {
        double s = softplus(eval.sigma.data()[i]);
        if (s < kScaleFloor) s = kScaleFloor;
        if (s > kScaleCeil) s = kScaleCeil;
        eval.sigma.data()[i] = s;
    }
    return eval;
}

HeadGrads head_backward(const GaussianHead& head, const HeadEval& eval, const Matrix& dmean,
                        const Matrix& dsigma) {
    Matrix dprescale = dsigma;
    for (size_t i = 0; i < dprescale.size(); ++i) {
        const double p = eval.prescale.data()[i];
        const double s = eval.sigma.data()[i];
        const bool clipped = (s <= kScaleFloor || s >= kScaleCeil);
        dprescale.data()[i] = clipped ? 0.0 : dprescale.data()[i] / (1.0 + std::exp(-p));
    }
    HeadGrads grads;
    grads.mean_head = mlp_backward(head.mean_head, eval.mean_tape, dmean);
    grads.scale_head = mlp_backward(head.scale_head, eval.scale_tape, dprescale);
    Matrix dfeatures = add(grads.mean_head.input, grads.scale_head.input);
    grads.trunk = mlp_backward(head.trunk, eval.trunk_tape, dfeatures);
    return grads;
}

void zero_head_grads(const GaussianHead& head, HeadGrads& grads, int batch_rows) {
    grads.trunk = zero_grads_like(head.trunk, batch_rows);
    grads.mean_head = zero_grads_like(head.mean_head, batch_rows);
    grads.scale_head = zero_grads_like(head.scale_head, batch_rows);
}

void accumulate_head_grads(HeadGrads& into, const HeadGrads& from) {
    accumulate_grads(into.trunk, from.trunk);
    accumulate_grads(into.mean_head, from.mean_head);
    accumulate_grads(into.scale_head, from.scale_head);
}

std::vector<Matrix*> head_params(GaussianHead& head) {
    std::vector<Matrix*> p = mlp_params(head.trunk);
    for (Matrix* m : mlp_params(head.mean_head)) p.push_back(m);
    for (Matrix* m : mlp_params(head.scale_head)) p.push_back(m);
    return p;
}

std::vector<const Matrix*> head_param_view(const GaussianHead& head) {
    std::vector<const Matrix*> p = mlp_param_view(head.trunk);
    for (const Matrix* m : mlp_param_view(head.mean_head)) p.push_back(m);
    for (const Matrix* m : mlp_param_view(head.scale_head)) p.push_back(m);
    return p;
}

std::vector<const Matrix*> head_grad_view(const HeadGrads& grads) {
    std::vector<const Matrix*> p = grad_view(grads.trunk);
    for (const Matrix* m : grad_view(grads.mean_head)) p.push_back(m);
    for (const Matrix* m : grad_view(grads.scale_head)) p.push_back(m);
    return p;
}

namespace {

Matrix row_matrix(const std::vector<double>& v) {
    Matrix m(1, static_cast<int>(v.size()));
    for (size_t i = 0; i < v.size(); ++i) m(0, i) = v[i];
    return m;
}

void check_sigma(const double* sigma, int d) {
    for (int i = 0; i < d; ++i) {
        const double s = sigma[i];
        if (!(s >= kScaleFloor && s <= kScaleCeil))
            throw NumericError("gaussian head: scale outside clip range");
    }
}

}  // namespace

double gaussian_log_prob(const double* eps, const double* mean, const double* sigma, int d) {
    double lp = 0.0;
    for (int i = 0; i < d; ++i) {
        const double z = (eps[i] - mean[i]) / sigma[i];
        lp += -0.5 * z * z - std::log(sigma[i]) - 0.5 * kLog2Pi;
    }
    return lp;
}

double gaussian_entropy(const double* sigma, int d) {
    double h = 0.0;
    for (int i = 0; i < d; ++i) h += 0.5 * (kLog2Pi + 1.0) + std::log(sigma[i]);
    return h;
}

double gaussian_kl_to_prior(const double* mean, const double* sigma, int d) {
    double kl = 0.0;
    for (int i = 0; i < d; ++i) {
        const double s2 = sigma[i] * sigma[i];
        kl += 0.5 * (mean[i] * mean[i] + s2 - 1.0) - std::log(sigma[i]);
    }
    return kl;
}

LatentSample sample_latent(const GaussianHead& head, const std::vector<double>& state,
                           RngStream& stream) {
    const HeadEval eval = head_forward(head, row_matrix(state));
    const int d = head.latent_dim;
    LatentSample out;
    out.mean.resize(d);
    out.scale.resize(d);
    out.epsilon.resize(d);
    for (int i = 0; i < d; ++i) {
        out.mean[i] = eval.mean(0, i);
        out.scale[i] = eval.sigma(0, i);
        out.epsilon[i] = out.mean[i] + out.scale[i] * stream.next_normal();
    }
    out.log_prob = gaussian_log_prob(out.epsilon.data(), out.mean.data(), out.scale.data(), d);
    return out;
}

double log_prob(const GaussianHead& head, const std::vector<double>& state,
                const std::vector<double>& epsilon) {
    if (static_cast<int>(epsilon.size()) != head.latent_dim)
        throw std::invalid_argument("log_prob: latent dim mismatch");
    const HeadEval eval = head_forward(head, row_matrix(state));
    check_sigma(eval.sigma.data(), head.latent_dim);
    return gaussian_log_prob(epsilon.data(), eval.mean.data(), eval.sigma.data(), head.latent_dim);
}

double entropy(const GaussianHead& head, const std::vector<double>& state) {
    const HeadEval eval = head_forward(head, row_matrix(state));
    return gaussian_entropy(eval.sigma.data(), head.latent_dim);
}

double kl_to_standard_normal(const GaussianHead& head, const std::vector<double>& state) {
    const HeadEval eval = head_forward(head, row_matrix(state));
    return gaussian_kl_to_prior(eval.mean.data(), eval.sigma.data(), head.latent_dim);
}

void reinit_to_prior(GaussianHead& head, RngStream& stream, bool reinit_trunk) {
    if (reinit_trunk) init_mlp(head.trunk, stream);
    head.mean_head.weights[0].fill(0.0);
    head.mean_head.biases[0].fill(0.0);
    head.scale_head.weights[0].fill(0.0);
    head.scale_head.biases[0].fill(prescale_for_unit_sigma());
}

}  // namespace gorl
