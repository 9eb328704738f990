#pragma once

#include <string>
#include <vector>

#include "gorl/rng.hpp"

namespace gorl {

enum class EnvName { TwoGoalPointMass, PendulumSwingUp, BimodalBandit };

std::string env_name(EnvName name);
EnvName env_from_name(const std::string& name);

struct EnvSpec {
    EnvName name = EnvName::BimodalBandit;
    int obs_dim = 1;
    int action_dim = 1;
    int episode_length = 1;
};

// episode_length_override <= 0 keeps the per-env default (60 / 200 / 1).
EnvSpec make_env_spec(EnvName name, int episode_length_override = 0);

// Internal coordinates plus the step counter of the running episode.
struct EnvState {
    std::vector<double> phys;
    int t = 0;
};

struct StepResult {
    EnvState next;
    double reward = 0.0;
    bool terminal = false;
};

EnvState env_reset(const EnvSpec& spec, RngStream& stream);
std::vector<double> env_observe(const EnvSpec& spec, const EnvState& state);

// Actions are clipped to [-1,1] defensively; rewards are the raw task
// rewards (training-time scaling is applied by the caller).
StepResult env_step(const EnvSpec& spec, const EnvState& state, const std::vector<double>& action);

// Constant training-reward scaling.
double scale_reward(double r);

// Online per-dimension mean/variance (Welford one-pass recursion).
struct NormalizerState {
    double count = 0.0;
    std::vector<double> mean;
    std::vector<double> m2;

    void init(int dim);
    int dim() const { return static_cast<int>(mean.size()); }
    void update(const std::vector<double>& obs);
    double variance(int i) const { return count > 0 ? m2[i] / count : 0.0; }
    // (obs - mean) / sqrt(var + 1e-8) with the current statistics.
    std::vector<double> normalize(const std::vector<double>& obs) const;
};

}  // namespace gorl
