#pragma once

#include <string>
#include <vector>

#include "gorl/mlp.hpp"
#include "gorl/rollout.hpp"

namespace gorl {

enum class DecoderKind { Identity, FlowMatching, Diffusion };

std::string decoder_kind_name(DecoderKind k);
DecoderKind decoder_kind_from_name(const std::string& name);

// Cosine alpha-bar schedule; strictly decreasing, in (0,1).
struct NoiseSchedule {
    std::vector<double> alpha_bar;  // index t-1 holds alpha_bar_t, t = 1..T
    int steps() const { return static_cast<int>(alpha_bar.size()); }
};

NoiseSchedule cosine_schedule(int steps);

// Transport map from latents to actions. FlowMatching integrates a learned
// velocity field with Euler steps; Diffusion runs the DDPM reverse chain
// seeded at the latent. All variants squash the final output with tanh.
struct Decoder {
    DecoderKind kind = DecoderKind::Identity;
    int obs_dim = 0;
    int action_dim = 0;
    int n_ode_steps = 10;
    Mlp net;  // velocity field or noise predictor; unused for Identity
    NoiseSchedule schedule;
};

// For FlowMatching/Diffusion the net maps (state, x, time features) to an
// action_dim vector; `widths` are its hidden widths.
Decoder make_decoder(DecoderKind kind, int obs_dim, int action_dim,
                     const std::vector<int>& widths, int n_ode_steps, int n_diffusion_steps,
                     RngStream* init_stream);

// Scalar time in [0,1] embedded as [t, sin(2*pi*t), cos(2*pi*t)].
constexpr int kTimeFeatures = 3;

std::vector<double> decode(const Decoder& dec, const std::vector<double>& state,
                           const std::vector<double>& epsilon, RngStream& stream);

// Row-parallel decode; diffusion reverse noise is drawn from `stream` in
// row-major order per reverse step.
Matrix decode_batch(const Decoder& dec, const Matrix& states, const Matrix& epsilons,
                    RngStream& stream);

struct GenLoss {
    double loss = 0.0;
    MlpGrads grads;
};

// Conditional flow-matching regression at the linear interpolation point:
// || v((1-tau) eps + tau a, tau; s) - (a - eps) ||^2, averaged over the batch.
// `targets` are pre-squash actions.
GenLoss fm_loss(const Mlp& velocity_net, const Matrix& states, const Matrix& targets,
                const Matrix& prior_draws, const std::vector<double>& taus);

// Noise-prediction regression || xi - eps_hat(a_t, t, s) ||^2 at the
// forward-corrupted point a_t = sqrt(ab_t) a + sqrt(1-ab_t) xi.
GenLoss diffusion_loss_at(const Mlp& noise_net, const NoiseSchedule& schedule,
                          const Matrix& states, const Matrix& targets, const Matrix& noise,
                          const std::vector<int>& timesteps);

// Convenience form drawing t ~ U{1..T} and xi ~ N(0,I) from the stream.
GenLoss diffusion_loss(const Mlp& noise_net, const NoiseSchedule& schedule, const Matrix& states,
                       const Matrix& targets, RngStream& stream);

// Supervised refinement on buffer (s, a) pairs with fresh prior draws each
// minibatch; the latent policy is never consulted. Pre-squash regression
// targets are atanh(clip(a)). Returns per-epoch mean losses.
// filter_quantile in (0,1) keeps only transitions whose episode return is at
// or above that quantile of the buffer.
std::vector<double> train_decoder(Decoder& dec, const RolloutBuffer& buffer, int epochs,
                                  int batch_size, double lr, RngStream& stream,
                                  double filter_quantile = 0.0);

// Per-transition episode return (training-scale rewards summed between
// terminals; trailing partial episodes keep their partial sum).
std::vector<double> transition_episode_returns(const RolloutBuffer& buffer);

// Filtering score: episode return minus the critic value at the episode
// start, so the quantile cut compares like with like across states.
std::vector<double> transition_filter_scores(const RolloutBuffer& buffer);

double atanh_clipped(double a);

std::vector<Matrix*> decoder_params(Decoder& dec);
std::vector<const Matrix*> decoder_param_view(const Decoder& dec);

}  // namespace gorl
