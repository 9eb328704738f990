#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "gorl/envs.hpp"
#include "gorl/matrix.hpp"
#include "gorl/rng.hpp"

namespace gorl {

// On-policy transitions grouped by env instance and time; row index is
// env * horizon + t. `states` are the normalized observations the policy
// saw, `states_raw`/`next_states_raw` the underlying env observations.
struct RolloutBuffer {
    int n_envs = 0;
    int horizon = 0;
    int obs_dim = 0;
    int action_dim = 0;

    Matrix states;
    Matrix states_raw;
    Matrix next_states_raw;
    Matrix latents;
    Matrix actions;  // post-squash, as executed
    std::vector<double> rewards;  // training-scaled
    std::vector<double> values;
    std::vector<double> old_log_probs;
    std::vector<uint8_t> terminals;
    std::vector<double> bootstrap_values;  // one per env, value after the last step

    // Raw (unscaled) returns of episodes that finished during collection.
    std::vector<double> episode_returns;

    int size() const { return n_envs * horizon; }
    int index(int env, int t) const { return env * horizon + t; }

    // Concatenates another buffer's transitions (used for the per-stage
    // decoder dataset); episode bookkeeping is merged too.
    void append(const RolloutBuffer& other);
};

struct SampleOut {
    std::vector<double> latent;
    std::vector<double> action;
    double log_prob = 0.0;
    double value = 0.0;
};

// Composite-policy hook: draws a latent, decodes an action and evaluates
// the critic for one normalized observation, using the caller's stream.
using PolicyFn = std::function<SampleOut(const std::vector<double>& norm_obs, RngStream& stream)>;
// Critic-only hook for bootstrap values.
using ValueFn = std::function<double(const std::vector<double>& norm_obs)>;

// Vectorized rollout collection: each env owns its RngStream and state, so
// results are independent of any execution interleaving; the buffer is
// always assembled in env-index order.
class VecEnv {
public:
    VecEnv(const EnvSpec& spec, int n_envs, uint64_t seed, uint64_t stream_base);

    const EnvSpec& spec() const { return spec_; }
    int n_envs() const { return n_envs_; }

    // Steps every env `horizon` times. When update_normalizer is set the
    // normalizer consumes each observation before the policy sees it.
    RolloutBuffer collect(const PolicyFn& policy, const ValueFn& value_fn, int horizon,
                          NormalizerState& normalizer, bool update_normalizer);

    std::vector<uint64_t> stream_counters() const;
    void set_stream_counters(const std::vector<uint64_t>& counters);

private:
    EnvSpec spec_;
    int n_envs_ = 0;
    std::vector<EnvState> states_;
    std::vector<RngStream> streams_;
    std::vector<double> episode_return_;  // raw-reward accumulator per env
};

}  // namespace gorl
