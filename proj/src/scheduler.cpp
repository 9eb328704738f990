#include "gorl/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gorl/errors.hpp"

namespace gorl {

namespace {

constexpr int kActorWidth = 32;    // 4-layer actor trunk+head, SiLU
constexpr int kCriticWidth = 256;  // 5-layer critic
constexpr int kDecoderWidth = 64;  // 4-layer generative decoder
constexpr size_t kReturnWindow = 100;

std::vector<int> trunk_widths() { return {kActorWidth, kActorWidth, kActorWidth}; }

Mlp make_critic(int obs_dim, RngStream& stream) {
    Mlp critic = make_mlp({obs_dim, kCriticWidth, kCriticWidth, kCriticWidth, kCriticWidth, 1},
                          Activation::SiLU);
    init_mlp(critic, stream);
    return critic;
}

}  // namespace

StagePlan plan_from_config(const RunConfig& cfg) {
    StagePlan plan;
    plan.budgets = cfg.stage_budgets;
    plan.kind = cfg.decoder_kind();
    const int m = plan.stages();

    plan.reinit.assign(m, true);
    if (cfg.reinit_encoder.size() == 1)
        plan.reinit.assign(m, cfg.reinit_encoder[0]);
    else
        for (int i = 0; i < m; ++i) plan.reinit[i] = cfg.reinit_encoder[i];

    const int boundaries = std::max(0, m - 1);
    plan.decoder_epochs.assign(boundaries, cfg.decoder_epochs[0]);
    if (cfg.decoder_epochs.size() > 1)
        for (int i = 0; i < boundaries; ++i)
            plan.decoder_epochs[i] =
                cfg.decoder_epochs[std::min<size_t>(i, cfg.decoder_epochs.size() - 1)];
    return plan;
}

TrainState::TrainState(const RunConfig& run_cfg)
    : cfg(run_cfg),
      spec(run_cfg.env_spec()),
      decoder(make_decoder(DecoderKind::Identity, spec.obs_dim, spec.action_dim, {}, 1, 1,
                           nullptr)),
      envs(spec, run_cfg.n_envs, run_cfg.seed, stream_ids::kEnvBase),
      shuffle_stream(run_cfg.seed, stream_ids::kShuffle),
      decoder_train_stream(run_cfg.seed, stream_ids::kDecoderTrain),
      decoder_init_stream(run_cfg.seed, stream_ids::kDecoderInit),
      reinit_stream(run_cfg.seed, stream_ids::kReinit) {
    validate_config(cfg);
    RngStream encoder_init(cfg.seed, stream_ids::kEncoderInit);
    encoder = make_gaussian_head(spec.obs_dim, spec.action_dim, trunk_widths(), encoder_init);
    RngStream critic_init(cfg.seed, stream_ids::kCriticInit);
    critic = make_critic(spec.obs_dim, critic_init);
    encoder_adam = make_adam(head_param_view(encoder), cfg.lr);
    critic_adam = make_adam(mlp_param_view(critic), cfg.lr);
    normalizer.init(spec.obs_dim);
}

PolicyFn make_policy_fn(const GaussianHead& encoder, const Decoder& decoder, const Mlp& critic) {
    return [&encoder, &decoder, &critic](const std::vector<double>& obs, RngStream& stream) {
        const LatentSample latent = sample_latent(encoder, obs, stream);
        SampleOut out;
        out.latent = latent.epsilon;
        out.log_prob = latent.log_prob;
        out.action = decode(decoder, obs, latent.epsilon, stream);
        Matrix row(1, static_cast<int>(obs.size()));
        for (size_t j = 0; j < obs.size(); ++j) row(0, static_cast<int>(j)) = obs[j];
        out.value = mlp_forward(critic, row)(0, 0);
        return out;
    };
}

ValueFn make_value_fn(const Mlp& critic) {
    return [&critic](const std::vector<double>& obs) {
        Matrix row(1, static_cast<int>(obs.size()));
        for (size_t j = 0; j < obs.size(); ++j) row(0, static_cast<int>(j)) = obs[j];
        return mlp_forward(critic, row)(0, 0);
    };
}

namespace {

RolloutBuffer concat_buffers(const std::vector<RolloutBuffer>& buffers) {
    RolloutBuffer all;
    for (const RolloutBuffer& b : buffers) all.append(b);
    return all;
}

double window_mean(const std::deque<double>& window) {
    if (window.empty()) return 0.0;
    double acc = 0.0;
    for (double r : window) acc += r;
    return acc / static_cast<double>(window.size());
}

}  // namespace

void run_stage(TrainState& state, const StagePlan& plan, int stage, const MetricsSink& metrics,
               const CheckpointSink& checkpoints) {
    if (stage != state.stage)
        throw std::invalid_argument("run_stage: expected stage " + std::to_string(state.stage));

    // Phase 1: latent optimization against the frozen transport map. The
    // decoder object is only read through decode(); encoder_update cannot
    // touch it by construction.
    if (plan.reinit[stage]) {
        reinit_to_prior(state.encoder, state.reinit_stream, state.cfg.reinit_trunk);
        state.encoder_adam = make_adam(head_param_view(state.encoder), state.cfg.lr);
        if (state.cfg.reset_critic) {
            RngStream critic_init(state.cfg.seed, stream_ids::kCriticInit);
            state.critic = make_critic(state.spec.obs_dim, critic_init);
            state.critic_adam = make_adam(mlp_param_view(state.critic), state.cfg.lr);
        }
    }
    if (!state.cfg.cumulative_buffer) state.stage_buffers.clear();

    const PpoConfig ppo_cfg = state.cfg.ppo();
    long stage_steps = 0;
    while (stage_steps < plan.budgets[stage]) {
        const PolicyFn policy = make_policy_fn(state.encoder, state.decoder, state.critic);
        const ValueFn value = make_value_fn(state.critic);
        RolloutBuffer buf =
            state.envs.collect(policy, value, state.cfg.horizon, state.normalizer, true);
        stage_steps += buf.size();
        state.cumulative_steps += buf.size();
        for (double r : buf.episode_returns) {
            state.recent_returns.push_back(r);
            if (state.recent_returns.size() > kReturnWindow) state.recent_returns.pop_front();
        }

        const UpdateStats stats = encoder_update(state.encoder, state.critic, state.encoder_adam,
                                                 state.critic_adam, buf, ppo_cfg,
                                                 state.shuffle_stream);
        if (!std::isfinite(stats.value_loss) || !std::isfinite(stats.kl_to_prior) ||
            !std::isfinite(stats.entropy))
            throw NumericError("run_stage: non-finite update statistics at step " +
                               std::to_string(state.cumulative_steps));
        state.stage_buffers.push_back(std::move(buf));
        state.updates += 1;

        if (metrics) {
            MetricsRow row;
            row.step = state.cumulative_steps;
            row.mean_return = window_mean(state.recent_returns);
            row.value_loss = stats.value_loss;
            row.entropy = stats.entropy;
            row.kl_to_prior = stats.kl_to_prior;
            row.clip_frac = stats.clip_fraction;
            row.decoder_loss = state.last_decoder_loss;
            row.stage = stage;
            metrics(row);
        }
        if (state.updates % 50 == 0 && checkpoints) checkpoints(state);
        if (state.updates % state.cfg.eval_every == 0) {
            const double eval_return =
                evaluate_policy(state, state.cfg.eval_envs, state.eval_rounds++);
            state.eval_history.emplace_back(state.cumulative_steps, eval_return);
        }
    }

    // Snapshot of the stage as trained: encoder after phase 1, decoder as
    // used throughout the stage.
    if (checkpoints) checkpoints(state);

    // Phase 2: decoder refinement from the fixed Gaussian prior on this
    // stage's rollouts; the encoder is not an input anywhere below.
    if (stage + 1 < plan.stages() && plan.kind != DecoderKind::Identity) {
        const int epochs = plan.decoder_epochs[stage];
        if (epochs > 0) {
            if (!state.generative_decoder_ready || state.cfg.decoder_from_scratch) {
                state.decoder = make_decoder(
                    plan.kind, state.spec.obs_dim, state.spec.action_dim,
                    {kDecoderWidth, kDecoderWidth, kDecoderWidth}, state.cfg.ode_steps,
                    state.cfg.diffusion_steps, &state.decoder_init_stream);
                state.generative_decoder_ready = true;
            }
            const RolloutBuffer dataset = concat_buffers(state.stage_buffers);
            const std::vector<double> history =
                train_decoder(state.decoder, dataset, epochs, state.cfg.decoder_batch,
                              state.cfg.decoder_lr, state.decoder_train_stream,
                              state.cfg.filter_quantile);
            if (!history.empty()) state.last_decoder_loss = history.back();
        }
    }
    state.stage = stage + 1;
}

RunResult run_training(TrainState& state, const MetricsSink& metrics,
                       const CheckpointSink& checkpoints) {
    const StagePlan plan = plan_from_config(state.cfg);
    for (int m = state.stage; m < plan.stages(); ++m)
        run_stage(state, plan, m, metrics, checkpoints);
    // stage index stays at the last executed stage for the final snapshot
    state.stage = plan.stages() - 1;
    if (checkpoints) checkpoints(state);

    RunResult result;
    result.final_eval_return = evaluate_policy(state, state.cfg.eval_episodes, 100000);
    result.analysis = analyze_policy(state, state.cfg.analysis_state);
    return result;
}

double evaluate_policy(const TrainState& state, int n_episodes, int round) {
    const int n_envs = std::min(state.cfg.eval_envs, n_episodes);
    const int episodes_per_env = (n_episodes + n_envs - 1) / n_envs;
    const int horizon = episodes_per_env * state.spec.episode_length;

    VecEnv eval_envs(state.spec, n_envs, state.cfg.seed,
                     stream_ids::kEvalBase + static_cast<uint64_t>(round) * 4096);
    NormalizerState frozen = state.normalizer;
    const PolicyFn policy = make_policy_fn(state.encoder, state.decoder, state.critic);
    const ValueFn value = make_value_fn(state.critic);
    const RolloutBuffer buf = eval_envs.collect(policy, value, horizon, frozen, false);
    if (buf.episode_returns.empty()) return 0.0;
    double acc = 0.0;
    for (double r : buf.episode_returns) acc += r;
    return acc / static_cast<double>(buf.episode_returns.size());
}

PolicyAnalysis analyze_policy(const TrainState& state, const std::string& state_spec) {
    PolicyAnalysis out;

    if (!state_spec.empty()) {
        std::stringstream ss(state_spec);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) out.state_raw.push_back(std::stod(item));
        if (static_cast<int>(out.state_raw.size()) != state.spec.obs_dim)
            throw ConfigError("analysis_state: expected " + std::to_string(state.spec.obs_dim) +
                              " comma-separated values");
        out.selection_rule = "explicit";
    } else {
        // Median-return visited state: one frozen eval episode per env,
        // take the mid-episode state of the median-return episode.
        const int n_envs = state.cfg.eval_envs;
        VecEnv probe(state.spec, n_envs, state.cfg.seed,
                     (stream_ids::kEvalBase << 1) + 4096);
        NormalizerState frozen = state.normalizer;
        const PolicyFn policy = make_policy_fn(state.encoder, state.decoder, state.critic);
        const ValueFn value = make_value_fn(state.critic);
        const RolloutBuffer buf =
            probe.collect(policy, value, state.spec.episode_length, frozen, false);
        std::vector<std::pair<double, int>> by_return;
        for (int e = 0; e < n_envs; ++e)
            if (e < static_cast<int>(buf.episode_returns.size()))
                by_return.emplace_back(buf.episode_returns[e], e);
        std::sort(by_return.begin(), by_return.end());
        const int env_pick = by_return[by_return.size() / 2].second;
        const int t_pick = state.spec.episode_length / 2;
        out.state_raw.resize(state.spec.obs_dim);
        for (int j = 0; j < state.spec.obs_dim; ++j)
            out.state_raw[j] = buf.states_raw(buf.index(env_pick, t_pick), j);
        out.selection_rule = "median-return-visited-state";
    }

    const std::vector<double> norm_obs = state.normalizer.normalize(out.state_raw);
    const int n = state.cfg.analysis_samples;

    // latent draws at the fixed state
    Matrix states(n, state.spec.obs_dim);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < state.spec.obs_dim; ++j) states(i, j) = norm_obs[j];
    Matrix row(1, state.spec.obs_dim);
    for (int j = 0; j < state.spec.obs_dim; ++j) row(0, j) = norm_obs[j];
    const HeadEval eval = head_forward(state.encoder, row);
    RngStream stream(state.cfg.seed, stream_ids::kAnalysis);
    Matrix eps(n, state.spec.action_dim);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < state.spec.action_dim; ++j)
            eps(i, j) = eval.mean(0, j) + eval.sigma(0, j) * stream.next_normal();

    const Matrix actions = decode_batch(state.decoder, states, eps, stream);

    const PcaProjection proj = pca_project_1d(actions);
    const std::vector<double> grid =
        default_kde_grid(proj.projection, state.cfg.bandwidth_factor, state.cfg.kde_grid_points);
    out.density = kde_density(proj.projection, grid, state.cfg.bandwidth_factor);
    out.modes = count_modes(out.density, state.cfg.mode_prominence);
    return out;
}

}  // namespace gorl
