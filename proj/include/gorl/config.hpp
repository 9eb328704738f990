#pragma once

#include <string>
#include <vector>

#include "gorl/decoder.hpp"
#include "gorl/envs.hpp"
#include "gorl/ppo.hpp"

namespace gorl {

// Full run configuration; parsed from flat `key = value` text with
// [a, b, c] arrays. Defaults reproduce the reference training setup.
struct RunConfig {
    std::string env = "BimodalBandit";
    uint64_t seed = 0;
    int n_envs = 16;
    int horizon = 30;
    int episode_length = 0;  // 0 keeps the env default
    int eval_every = 10;     // updates between evaluation runs
    int eval_envs = 16;
    int eval_episodes = 64;  // episodes in the final evaluation
    std::string out_dir = "runs/default";

    double clip = 0.2;
    double gamma = 0.995;
    double lambda = 0.95;
    double value_coef = 0.25;
    double entropy_coef = 0.01;
    double kl_beta = 1e-3;
    int ppo_epochs = 16;
    int minibatch = 1024;
    double lr = 1e-3;
    std::string kl_form = "closed";  // closed | l2

    std::string decoder = "fm";  // identity | fm | diffusion
    int ode_steps = 10;
    int diffusion_steps = 10;
    std::vector<int> decoder_epochs = {50};
    double decoder_lr = 3e-4;
    int decoder_batch = 8192;
    bool decoder_from_scratch = false;
    double filter_quantile = 0.0;  // 0 disables return filtering
    bool cumulative_buffer = false;

    std::vector<long> stage_budgets = {200000, 200000, 100000, 100000};
    std::vector<bool> reinit_encoder = {true, true, true, true};
    bool reinit_trunk = true;
    bool reset_critic = false;

    double bandwidth_factor = 0.8;
    int kde_grid_points = 512;
    double mode_prominence = 0.1;
    double smoothing_sigma = 100.0;
    int analysis_samples = 10000;
    std::string analysis_state;  // comma-separated raw observation, or empty
    long study_budget = 6000;

    bool operator==(const RunConfig&) const = default;

    EnvSpec env_spec() const { return make_env_spec(env_from_name(env), episode_length); }
    DecoderKind decoder_kind() const { return decoder_kind_from_name(decoder); }
    PpoConfig ppo() const;
};

// Parses text, overlaying the defaults; throws ConfigError with the
// offending key and line on unknown keys, bad types or constraint
// violations.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::string& path);

// Canonical emission; parse_config_text(emit_config(c)) == c.
std::string emit_config(const RunConfig& cfg);

void validate_config(const RunConfig& cfg);

// 17-significant-digit formatting used everywhere a float is persisted.
std::string format_double(double v);

}  // namespace gorl
