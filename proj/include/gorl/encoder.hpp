#pragma once

#include <vector>

#include "gorl/mlp.hpp"

namespace gorl {

// Diagonal Gaussian latent policy: an MLP trunk with linear mean and
// pre-scale heads. Per-dim scale is softplus(pre-scale) clipped to
// [1e-3, 10].
struct GaussianHead {
    Mlp trunk;       // state -> features (SiLU throughout)
    Mlp mean_head;   // features -> latent mean (linear)
    Mlp scale_head;  // features -> latent pre-scale (linear)
    int latent_dim = 0;
};

constexpr double kScaleFloor = 1e-3;
constexpr double kScaleCeil = 10.0;

struct LatentSample {
    std::vector<double> epsilon;
    double log_prob = 0.0;
    std::vector<double> mean;
    std::vector<double> scale;
};

// Batched head evaluation with the tapes needed for exact backprop.
struct HeadEval {
    Matrix mean;      // n x d
    Matrix prescale;  // n x d, raw head output
    Matrix sigma;     // n x d, clipped softplus(prescale)
    MlpTape trunk_tape;
    MlpTape mean_tape;
    MlpTape scale_tape;
};

struct HeadGrads {
    MlpGrads trunk;
    MlpGrads mean_head;
    MlpGrads scale_head;
};

GaussianHead make_gaussian_head(int obs_dim, int latent_dim, const std::vector<int>& hidden_widths,
                                RngStream& stream);

double softplus(double x);
double softplus_inverse(double y);

HeadEval head_forward(const GaussianHead& head, const Matrix& states);

// Backprop of dL/dmean and dL/dsigma through heads and trunk. Where sigma
// sits on a clip boundary its gradient is zero.
HeadGrads head_backward(const GaussianHead& head, const HeadEval& eval, const Matrix& dmean,
                        const Matrix& dsigma);

void zero_head_grads(const GaussianHead& head, HeadGrads& grads, int batch_rows);
void accumulate_head_grads(HeadGrads& into, const HeadGrads& from);
std::vector<Matrix*> head_params(GaussianHead& head);
std::vector<const Matrix*> head_param_view(const GaussianHead& head);
std::vector<const Matrix*> head_grad_view(const HeadGrads& grads);

LatentSample sample_latent(const GaussianHead& head, const std::vector<double>& state,
                           RngStream& stream);

double log_prob(const GaussianHead& head, const std::vector<double>& state,
                const std::vector<double>& epsilon);
double entropy(const GaussianHead& head, const std::vector<double>& state);
double kl_to_standard_normal(const GaussianHead& head, const std::vector<double>& state);

// Diagonal-Gaussian closed forms on raw vectors (shared by the batched
// update path).
double gaussian_log_prob(const double* eps, const double* mean, const double* sigma, int d);
double gaussian_entropy(const double* sigma, int d);
double gaussian_kl_to_prior(const double* mean, const double* sigma, int d);

// Exact reset to the N(0,I) prior: head final layers are zeroed with biases
// (0, softplus^-1(1)); the trunk is freshly re-initialized when
// reinit_trunk is set.
void reinit_to_prior(GaussianHead& head, RngStream& stream, bool reinit_trunk = true);

}  // namespace gorl
