#pragma once

#include <cstdint>
#include <vector>

#include "gorl/adam.hpp"
#include "gorl/encoder.hpp"
#include "gorl/rollout.hpp"

namespace gorl {

struct PpoConfig {
    double clip = 0.2;
    double gamma = 0.995;
    double lam = 0.95;
    double value_coef = 0.25;
    double entropy_coef = 0.01;
    double kl_beta = 1e-3;
    int epochs = 16;
    int minibatch = 1024;
    double lr = 1e-3;
    int horizon = 30;
    // L2 penalty on (mean, log-scale) instead of the closed-form KL.
    bool kl_l2_form = false;
};

struct AdvantageBatch {
    std::vector<double> advantages;      // batch-normalized
    std::vector<double> raw_advantages;  // pre-normalization GAE values
    std::vector<double> returns;         // raw advantage + value
    std::vector<double> old_log_probs;
    std::vector<double> old_values;
};

// GAE over env-major sequences: row env*horizon + t. `bootstrap_values`
// holds one value per env for the state after the last step;
// it is masked out where the last transition is terminal.
AdvantageBatch compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                           const std::vector<uint8_t>& terminals,
                           const std::vector<double>& bootstrap_values, int n_envs, int horizon,
                           double gamma, double lam);

// Single-sequence convenience form.
AdvantageBatch compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                           const std::vector<uint8_t>& terminals, double bootstrap_value,
                           double gamma, double lam);

AdvantageBatch compute_gae(const RolloutBuffer& buffer, double gamma, double lam);

struct SurrogateStats {
    double loss = 0.0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double kl_to_prior = 0.0;
    double mean_ratio = 0.0;
    double clip_fraction = 0.0;
};

struct SurrogateOut {
    SurrogateStats stats;
    HeadGrads head_grads;
    MlpGrads critic_grads;
};

// Clipped PPO surrogate on latent likelihood ratios plus entropy bonus,
// KL-to-prior regularizer and value regression:
//   loss = -mean(min(r A, clip(r) A)) - c_ent H + beta KL + c_v mse(V, ret)
SurrogateOut ppo_surrogate(const GaussianHead& head, const Mlp& critic, const Matrix& states,
                           const Matrix& latents, const std::vector<double>& advantages,
                           const std::vector<double>& returns,
                           const std::vector<double>& old_log_probs, const PpoConfig& cfg);

struct UpdateStats {
    double mean_ratio = 0.0;
    double first_minibatch_ratio = 0.0;
    double clip_fraction = 0.0;
    double entropy = 0.0;
    double kl_to_prior = 0.0;
    double value_loss = 0.0;
    double policy_loss = 0.0;
};

// One PPO update: cfg.epochs shuffled passes of minibatched surrogate +
// Adam steps. The decoder is not an input by construction; only stored
// latents and rewards are consulted, so phase-1 freezing is structural.
UpdateStats encoder_update(GaussianHead& head, Mlp& critic, AdamState& head_adam,
                           AdamState& critic_adam, const RolloutBuffer& buffer,
                           const PpoConfig& cfg, RngStream& shuffle_stream);

}  // namespace gorl
