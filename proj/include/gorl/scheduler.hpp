#pragma once

#include <deque>
#include <functional>

#include "gorl/analysis.hpp"
#include "gorl/config.hpp"
#include "gorl/decoder.hpp"
#include "gorl/encoder.hpp"
#include "gorl/ppo.hpp"
#include "gorl/rollout.hpp"

namespace gorl {

// Stream ids are fixed so every random draw in a run is attributable and
// replayable from (seed, id, counter).
namespace stream_ids {
constexpr uint64_t kEnvBase = 0;          // one per training env
constexpr uint64_t kEncoderInit = 1000;
constexpr uint64_t kCriticInit = 1001;
constexpr uint64_t kDecoderInit = 1002;
constexpr uint64_t kDecoderTrain = 1003;
constexpr uint64_t kShuffle = 1004;
constexpr uint64_t kReinit = 1005;
constexpr uint64_t kAnalysis = 1006;
constexpr uint64_t kEvalBase = 1ull << 20;  // + round * 4096 + env
}  // namespace stream_ids

// Staged alternation schedule: stage m trains the encoder for budgets[m]
// env steps against a frozen decoder, then (except after the last stage)
// refines the decoder for decoder_epochs[m] epochs with the encoder frozen.
struct StagePlan {
    std::vector<long> budgets;
    std::vector<int> decoder_epochs;  // one entry per stage boundary
    std::vector<bool> reinit;         // behavioral warm start per stage
    DecoderKind kind = DecoderKind::Identity;

    int stages() const { return static_cast<int>(budgets.size()); }
};

StagePlan plan_from_config(const RunConfig& cfg);

struct MetricsRow {
    long step = 0;
    double mean_return = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double kl_to_prior = 0.0;
    double clip_frac = 0.0;
    double decoder_loss = 0.0;
    int stage = 0;
};

struct TrainState {
    RunConfig cfg;
    EnvSpec spec;
    GaussianHead encoder;
    Mlp critic;
    Decoder decoder;
    AdamState encoder_adam;
    AdamState critic_adam;
    NormalizerState normalizer;
    VecEnv envs;
    RngStream shuffle_stream;
    RngStream decoder_train_stream;
    RngStream decoder_init_stream;
    RngStream reinit_stream;

    long cumulative_steps = 0;
    int stage = 0;
    long updates = 0;
    double last_decoder_loss = 0.0;
    bool generative_decoder_ready = false;  // swapped in at the first refinement
    std::deque<double> recent_returns;      // raw returns, window of 100
    std::vector<RolloutBuffer> stage_buffers;  // rollouts of the running stage
    int eval_rounds = 0;
    std::vector<std::pair<long, double>> eval_history;

    explicit TrainState(const RunConfig& run_cfg);
};

// Composite-policy hooks: epsilon from the encoder, action from the
// decoder, value from the critic.
PolicyFn make_policy_fn(const GaussianHead& encoder, const Decoder& decoder, const Mlp& critic);
ValueFn make_value_fn(const Mlp& critic);

using MetricsSink = std::function<void(const MetricsRow&)>;
using CheckpointSink = std::function<void(const TrainState&)>;

// Phase 1 (+ boundary Phase 2) of Algorithm-style staged training for
// stage m; sinks may be empty.
void run_stage(TrainState& state, const StagePlan& plan, int stage, const MetricsSink& metrics,
               const CheckpointSink& checkpoints);

struct PolicyAnalysis {
    DensityEstimate density;
    ModeReport modes;
    std::vector<double> state_raw;
    std::string selection_rule;
};

struct RunResult {
    double final_eval_return = 0.0;
    PolicyAnalysis analysis;
};

// Executes all remaining stages, then a final evaluation and the
// action-density analysis at a representative state.
RunResult run_training(TrainState& state, const MetricsSink& metrics,
                       const CheckpointSink& checkpoints);

// Frozen-normalizer evaluation over at least n_episodes episodes on
// dedicated eval streams; returns the mean raw episode return.
double evaluate_policy(const TrainState& state, int n_episodes, int round);

// Fixed-state action-density pipeline: sample latents, decode, project to
// 1-D with PCA, KDE, count modes. state_spec is a comma-separated raw
// observation or empty for the median-return visited state heuristic.
PolicyAnalysis analyze_policy(const TrainState& state, const std::string& state_spec);

}  // namespace gorl
