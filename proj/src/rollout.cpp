#include "gorl/rollout.hpp"

#include <cmath>
#include <thread>

#include "gorl/errors.hpp"

namespace gorl {

void RolloutBuffer::append(const RolloutBuffer& other) {
    if (size() == 0) {
        *this = other;
        return;
    }
    if (obs_dim != other.obs_dim || action_dim != other.action_dim)
        throw std::invalid_argument("RolloutBuffer::append: dimension mismatch");

    auto cat = [](Matrix& a, const Matrix& b) {
        Matrix out(a.rows() + b.rows(), a.cols());
        for (int i = 0; i < a.rows(); ++i)
            for (int j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
        for (int i = 0; i < b.rows(); ++i)
            for (int j = 0; j < b.cols(); ++j) out(a.rows() + i, j) = b(i, j);
        a = std::move(out);
    };
    cat(states, other.states);
    cat(states_raw, other.states_raw);
    cat(next_states_raw, other.next_states_raw);
    cat(latents, other.latents);
    cat(actions, other.actions);
    rewards.insert(rewards.end(), other.rewards.begin(), other.rewards.end());
    values.insert(values.end(), other.values.begin(), other.values.end());
    old_log_probs.insert(old_log_probs.end(), other.old_log_probs.begin(), other.old_log_probs.end());
    terminals.insert(terminals.end(), other.terminals.begin(), other.terminals.end());
    bootstrap_values.insert(bootstrap_values.end(), other.bootstrap_values.begin(),
                            other.bootstrap_values.end());
    episode_returns.insert(episode_returns.end(), other.episode_returns.begin(),
                           other.episode_returns.end());
    // Treat the result as one flat env of concatenated sequences; GAE still
    // works because episode boundaries are carried by the terminal flags and
    // per-chunk bootstraps are kept separately.
    n_envs = 1;
    horizon = static_cast<int>(rewards.size());
}

VecEnv::VecEnv(const EnvSpec& spec, int n_envs, uint64_t seed, uint64_t stream_base)
    : spec_(spec), n_envs_(n_envs) {
    if (n_envs < 1) throw std::invalid_argument("VecEnv: n_envs must be >= 1");
    streams_.reserve(n_envs);
    for (int e = 0; e < n_envs; ++e) streams_.emplace_back(seed, stream_base + e);
    for (int e = 0; e < n_envs; ++e) states_.push_back(env_reset(spec_, streams_[e]));
    episode_return_.assign(n_envs, 0.0);
}

RolloutBuffer VecEnv::collect(const PolicyFn& policy, const ValueFn& value_fn, int horizon,
                              NormalizerState& normalizer, bool update_normalizer) {
    if (horizon < 1) throw std::invalid_argument("collect: horizon must be >= 1");
    RolloutBuffer buf;
    buf.n_envs = n_envs_;
    buf.horizon = horizon;
    buf.obs_dim = spec_.obs_dim;
    buf.action_dim = spec_.action_dim;
    const int n = n_envs_ * horizon;
    buf.states = Matrix(n, spec_.obs_dim);
    buf.states_raw = Matrix(n, spec_.obs_dim);
    buf.next_states_raw = Matrix(n, spec_.obs_dim);
    buf.latents = Matrix(n, spec_.action_dim);
    buf.actions = Matrix(n, spec_.action_dim);
    buf.rewards.assign(n, 0.0);
    buf.values.assign(n, 0.0);
    buf.old_log_probs.assign(n, 0.0);
    buf.terminals.assign(n, 0);

    std::vector<std::vector<double>> finished(n_envs_);

    for (int t = 0; t < horizon; ++t) {
        std::vector<std::vector<double>> raw(n_envs_);
        for (int e = 0; e < n_envs_; ++e) raw[e] = env_observe(spec_, states_[e]);
        // Normalizer statistics advance once per timestep, in env order, so
        // the result is independent of how the env loop below is scheduled.
        if (update_normalizer)
            for (int e = 0; e < n_envs_; ++e) normalizer.update(raw[e]);

        auto step_env = [&](int e) {
            const std::vector<double> norm_obs = normalizer.normalize(raw[e]);
            SampleOut s = policy(norm_obs, streams_[e]);
            for (double a : s.action)
                if (!std::isfinite(a)) throw NumericError("collect: sampler produced non-finite action");
            StepResult res = env_step(spec_, states_[e], s.action);

            const int row = buf.index(e, t);
            for (int j = 0; j < spec_.obs_dim; ++j) {
                buf.states(row, j) = norm_obs[j];
                buf.states_raw(row, j) = raw[e][j];
            }
            const std::vector<double> next_raw = env_observe(spec_, res.next);
            for (int j = 0; j < spec_.obs_dim; ++j) buf.next_states_raw(row, j) = next_raw[j];
            for (int j = 0; j < spec_.action_dim; ++j) {
                buf.latents(row, j) = s.latent[j];
                buf.actions(row, j) = s.action[j];
            }
            buf.rewards[row] = scale_reward(res.reward);
            buf.values[row] = s.value;
            buf.old_log_probs[row] = s.log_prob;
            buf.terminals[row] = res.terminal ? 1 : 0;

            episode_return_[e] += res.reward;
            if (res.terminal) {
                finished[e].push_back(episode_return_[e]);
                episode_return_[e] = 0.0;
                states_[e] = env_reset(spec_, streams_[e]);
            } else {
                states_[e] = res.next;
            }
        };

        const int threads = std::min(worker_threads(), n_envs_);
        if (threads <= 1) {
            for (int e = 0; e < n_envs_; ++e) step_env(e);
        } else {
            std::vector<std::thread> pool;
            const int chunk = (n_envs_ + threads - 1) / threads;
            for (int w = 0; w < threads; ++w) {
                const int e0 = w * chunk;
                const int e1 = std::min(n_envs_, e0 + chunk);
                if (e0 >= e1) break;
                pool.emplace_back([&, e0, e1] {
                    for (int e = e0; e < e1; ++e) step_env(e);
                });
            }
            for (auto& th : pool) th.join();
        }
    }

    buf.bootstrap_values.assign(n_envs_, 0.0);
    for (int e = 0; e < n_envs_; ++e) {
        // Frozen normalization: the stats move when this obs is consumed as
        // the first observation of the next collect call.
        const std::vector<double> obs = normalizer.normalize(env_observe(spec_, states_[e]));
        buf.bootstrap_values[e] = value_fn(obs);
        for (double r : finished[e]) buf.episode_returns.push_back(r);
    }
    return buf;
}

std::vector<uint64_t> VecEnv::stream_counters() const {
    std::vector<uint64_t> c;
    for (const auto& s : streams_) c.push_back(s.counter());
    return c;
}

void VecEnv::set_stream_counters(const std::vector<uint64_t>& counters) {
    if (counters.size() != streams_.size())
        throw std::invalid_argument("set_stream_counters: count mismatch");
    for (size_t i = 0; i < counters.size(); ++i) streams_[i].set_counter(counters[i]);
}

}  // namespace gorl
