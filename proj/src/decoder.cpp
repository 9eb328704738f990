#include "gorl/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "gorl/adam.hpp"
#include "gorl/errors.hpp"

namespace gorl {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kAtanhClip = 1.0 - 1e-6;
}  // namespace

std::string decoder_kind_name(DecoderKind k) {
    switch (k) {
        case DecoderKind::Identity: return "identity";
        case DecoderKind::FlowMatching: return "fm";
        case DecoderKind::Diffusion: return "diffusion";
    }
    throw std::logic_error("unknown decoder kind");
}

DecoderKind decoder_kind_from_name(const std::string& name) {
    if (name == "identity") return DecoderKind::Identity;
    if (name == "fm") return DecoderKind::FlowMatching;
    if (name == "diffusion") return DecoderKind::Diffusion;
    throw ConfigError("unknown decoder kind: " + name);
}

NoiseSchedule cosine_schedule(int steps) {
    if (steps < 1) throw std::invalid_argument("cosine_schedule: steps must be >= 1");
    const double s = 0.008;
    auto f = [&](double t) {
        const double x = (t / steps + s) / (1.0 + s) * kPi / 2.0;
        const double c = std::cos(x);
        return c * c;
    };
    NoiseSchedule sched;
    const double f0 = f(0.0);
    double ab = 1.0;
    double prev = 1.0;
    for (int t = 1; t <= steps; ++t) {
        const double raw = f(static_cast<double>(t)) / f0;
        double beta = 1.0 - raw / prev;
        beta = std::min(0.999, std::max(1e-8, beta));
        prev = raw;
        ab *= 1.0 - beta;
        sched.alpha_bar.push_back(ab);
    }
    return sched;
}

Decoder make_decoder(DecoderKind kind, int obs_dim, int action_dim,
                     const std::vector<int>& widths, int n_ode_steps, int n_diffusion_steps,
                     RngStream* init_stream) {
    Decoder dec;
    dec.kind = kind;
    dec.obs_dim = obs_dim;
    dec.action_dim = action_dim;
    dec.n_ode_steps = std::max(1, n_ode_steps);
    if (kind == DecoderKind::Identity) return dec;

    std::vector<int> dims;
    dims.push_back(obs_dim + action_dim + kTimeFeatures);
    for (int w : widths) dims.push_back(w);
    dims.push_back(action_dim);
    dec.net = make_mlp(dims, Activation::SiLU);
    if (init_stream) init_mlp(dec.net, *init_stream);
    if (kind == DecoderKind::Diffusion) dec.schedule = cosine_schedule(std::max(1, n_diffusion_steps));
    return dec;
}

namespace {

void put_time_features(double t, double* dst) {
    dst[0] = t;
    dst[1] = std::sin(2.0 * kPi * t);
    dst[2] = std::cos(2.0 * kPi * t);
}

// Builds rows [state, x, time features] for the conditional net.
Matrix net_input(const Matrix& states, const Matrix& x, const std::vector<double>& times) {
    const int n = states.rows();
    const int sd = states.cols();
    const int ad = x.cols();
    Matrix in(n, sd + ad + kTimeFeatures);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < sd; ++j) in(i, j) = states(i, j);
        for (int j = 0; j < ad; ++j) in(i, sd + j) = x(i, j);
        put_time_features(times[i], &in(i, sd + ad));
    }
    return in;
}

void check_finite(const Matrix& m, const char* what) {
    if (!all_finite(m)) throw NumericError(std::string(what) + ": non-finite values");
}

}  // namespace

Matrix decode_batch(const Decoder& dec, const Matrix& states, const Matrix& epsilons,
                    RngStream& stream) {
    if (epsilons.cols() != dec.action_dim)
        throw std::invalid_argument("decode: latent dim != action dim");
    if (states.rows() != epsilons.rows())
        throw std::invalid_argument("decode: row count mismatch");
    const int n = epsilons.rows();
    Matrix x = epsilons;

    if (dec.kind == DecoderKind::FlowMatching) {
        const int steps = dec.n_ode_steps;
        const double h = 1.0 / steps;
        for (int k = 0; k < steps; ++k) {
            const std::vector<double> times(n, static_cast<double>(k) * h);
            const Matrix v = mlp_forward(dec.net, net_input(states, x, times));
            for (size_t i = 0; i < x.size(); ++i) x.data()[i] += h * v.data()[i];
            check_finite(x, "decode(fm)");
        }
    } else if (dec.kind == DecoderKind::Diffusion) {
        const int T = dec.schedule.steps();
        for (int t = T; t >= 1; --t) {
            const double ab = dec.schedule.alpha_bar[t - 1];
            const double ab_prev = t > 1 ? dec.schedule.alpha_bar[t - 2] : 1.0;
            const double beta = 1.0 - ab / ab_prev;
            const double alpha = 1.0 - beta;
            const double noise_coef = beta / std::sqrt(1.0 - ab);
            const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
            const double post_var = t > 1 ? beta * (1.0 - ab_prev) / (1.0 - ab) : 0.0;
            const double post_std = std::sqrt(post_var);

            const std::vector<double> times(n, static_cast<double>(t) / T);
            const Matrix eps_hat = mlp_forward(dec.net, net_input(states, x, times));
            for (size_t i = 0; i < x.size(); ++i) {
                double mean = inv_sqrt_alpha * (x.data()[i] - noise_coef * eps_hat.data()[i]);
                x.data()[i] = t > 1 ? mean + post_std * stream.next_normal() : mean;
            }
            check_finite(x, "decode(diffusion)");
        }
    }

    for (size_t i = 0; i < x.size(); ++i) x.data()[i] = std::tanh(x.data()[i]);
    return x;
}

std::vector<double> decode(const Decoder& dec, const std::vector<double>& state,
                           const std::vector<double>& epsilon, RngStream& stream) {
    Matrix s(1, static_cast<int>(state.size()));
    for (size_t j = 0; j < state.size(); ++j) s(0, j) = state[j];
    Matrix e(1, static_cast<int>(epsilon.size()));
    for (size_t j = 0; j < epsilon.size(); ++j) e(0, j) = epsilon[j];
    const Matrix a = decode_batch(dec, s, e, stream);
    std::vector<double> out(a.cols());
    for (int j = 0; j < a.cols(); ++j) out[j] = a(0, j);
    return out;
}

GenLoss fm_loss(const Mlp& velocity_net, const Matrix& states, const Matrix& targets,
                const Matrix& prior_draws, const std::vector<double>& taus) {
    const int n = states.rows();
    if (n == 0) throw std::invalid_argument("fm_loss: empty batch");
    if (targets.rows() != n || prior_draws.rows() != n || static_cast<int>(taus.size()) != n)
        throw std::invalid_argument("fm_loss: batch size mismatch");

    const int ad = targets.cols();
    Matrix points(n, ad);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < ad; ++j)
            points(i, j) = (1.0 - taus[i]) * prior_draws(i, j) + taus[i] * targets(i, j);

    MlpTape tape;
    const Matrix v = mlp_forward(velocity_net, net_input(states, points, taus), &tape);

    GenLoss out;
    Matrix dv(n, ad);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < ad; ++j) {
            const double resid = v(i, j) - (targets(i, j) - prior_draws(i, j));
            out.loss += resid * resid;
            dv(i, j) = 2.0 * resid / n;
        }
    }
    out.loss /= n;
    out.grads = mlp_backward(velocity_net, tape, dv);
    return out;
}

GenLoss diffusion_loss_at(const Mlp& noise_net, const NoiseSchedule& schedule,
                          const Matrix& states, const Matrix& targets, const Matrix& noise,
                          const std::vector<int>& timesteps) {
    const int n = states.rows();
    if (n == 0) throw std::invalid_argument("diffusion_loss: empty batch");
    if (targets.rows() != n || noise.rows() != n || static_cast<int>(timesteps.size()) != n)
        throw std::invalid_argument("diffusion_loss: batch size mismatch");

    const int ad = targets.cols();
    const int T = schedule.steps();
    Matrix corrupted(n, ad);
    std::vector<double> times(n);
    for (int i = 0; i < n; ++i) {
        const int t = timesteps[i];
        if (t < 1 || t > T) throw std::invalid_argument("diffusion_loss: timestep out of range");
        const double ab = schedule.alpha_bar[t - 1];
        const double c0 = std::sqrt(ab);
        const double c1 = std::sqrt(1.0 - ab);
        for (int j = 0; j < ad; ++j) corrupted(i, j) = c0 * targets(i, j) + c1 * noise(i, j);
        times[i] = static_cast<double>(t) / T;
    }

    MlpTape tape;
    const Matrix eps_hat = mlp_forward(noise_net, net_input(states, corrupted, times), &tape);

    GenLoss out;
    Matrix d(n, ad);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < ad; ++j) {
            const double resid = eps_hat(i, j) - noise(i, j);
            out.loss += resid * resid;
            d(i, j) = 2.0 * resid / n;
        }
    }
    out.loss /= n;
    out.grads = mlp_backward(noise_net, tape, d);
    return out;
}

GenLoss diffusion_loss(const Mlp& noise_net, const NoiseSchedule& schedule, const Matrix& states,
                       const Matrix& targets, RngStream& stream) {
    const int n = states.rows();
    std::vector<int> ts(n);
    for (int i = 0; i < n; ++i)
        ts[i] = 1 + static_cast<int>(stream.next_below(static_cast<uint64_t>(schedule.steps())));
    const Matrix xi = gaussian_draw(stream, n, targets.cols());
    return diffusion_loss_at(noise_net, schedule, states, targets, xi, ts);
}

double atanh_clipped(double a) {
    const double c = std::min(kAtanhClip, std::max(-kAtanhClip, a));
    return std::atanh(c);
}

std::vector<double> transition_episode_returns(const RolloutBuffer& buffer) {
    const int n = static_cast<int>(buffer.rewards.size());
    std::vector<double> out(n, 0.0);
    int start = 0;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        total += buffer.rewards[i];
        const bool env_boundary =
            buffer.horizon > 0 && ((i + 1) % buffer.horizon == 0) && buffer.n_envs > 1;
        if (buffer.terminals[i] || env_boundary || i + 1 == n) {
            for (int k = start; k <= i; ++k) out[k] = total;
            start = i + 1;
            total = 0.0;
        }
    }
    return out;
}

std::vector<double> transition_filter_scores(const RolloutBuffer& buffer) {
    // Episode return relative to the critic's estimate at the episode
    // start. The baseline makes the top-quantile cut comparable across
    // states whose achievable reward differs.
    const std::vector<double> ep_return = transition_episode_returns(buffer);
    const int n = static_cast<int>(buffer.rewards.size());
    std::vector<double> out(n, 0.0);
    int start = 0;
    for (int i = 0; i < n; ++i) {
        const bool env_boundary =
            buffer.horizon > 0 && ((i + 1) % buffer.horizon == 0) && buffer.n_envs > 1;
        if (buffer.terminals[i] || env_boundary || i + 1 == n) {
            const double baseline = buffer.values.empty() ? 0.0 : buffer.values[start];
            for (int k = start; k <= i; ++k) out[k] = ep_return[k] - baseline;
            start = i + 1;
        }
    }
    return out;
}

std::vector<double> train_decoder(Decoder& dec, const RolloutBuffer& buffer, int epochs,
                                  int batch_size, double lr, RngStream& stream,
                                  double filter_quantile) {
    if (dec.kind == DecoderKind::Identity)
        throw std::invalid_argument("train_decoder: identity decoder is not trainable");
    if (buffer.size() == 0) throw std::invalid_argument("train_decoder: empty rollout buffer");
    if (epochs <= 0) return {};
    if (batch_size < 1) throw std::invalid_argument("train_decoder: batch_size must be >= 1");

    // Dataset: normalized states with pre-squash action targets.
    std::vector<int> keep(buffer.size());
    std::iota(keep.begin(), keep.end(), 0);
    if (filter_quantile > 0.0 && filter_quantile < 1.0) {
        const std::vector<double> score = transition_filter_scores(buffer);
        std::vector<double> sorted = score;
        std::sort(sorted.begin(), sorted.end());
        const size_t pos = std::min(sorted.size() - 1,
                                    static_cast<size_t>(filter_quantile * sorted.size()));
        const double cutoff = sorted[pos];
        std::vector<int> filtered;
        for (int i = 0; i < buffer.size(); ++i)
            if (score[i] >= cutoff) filtered.push_back(i);
        if (!filtered.empty()) keep = std::move(filtered);
    }

    const int n = static_cast<int>(keep.size());
    Matrix states(n, buffer.obs_dim);
    Matrix targets(n, buffer.action_dim);
    for (int i = 0; i < n; ++i) {
        const int row = keep[i];
        for (int j = 0; j < buffer.obs_dim; ++j) states(i, j) = buffer.states(row, j);
        for (int j = 0; j < buffer.action_dim; ++j)
            targets(i, j) = atanh_clipped(buffer.actions(row, j));
    }

    AdamState adam = make_adam(mlp_param_view(dec.net), lr);
    std::vector<Matrix*> params = mlp_params(dec.net);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> history;

    // Small datasets are cycled to fill one minibatch; every occurrence of a
    // row still gets its own fresh (prior, time) draws.
    const int steps_per_epoch = n >= batch_size ? (n + batch_size - 1) / batch_size : 1;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        shuffle(order, stream);
        double epoch_loss = 0.0;
        int covered = 0;
        for (int step = 0; step < steps_per_epoch; ++step) {
            const int off = step * batch_size;
            const int b = n >= batch_size ? std::min(batch_size, n - off) : batch_size;
            Matrix s(b, buffer.obs_dim), a(b, buffer.action_dim);
            for (int i = 0; i < b; ++i) {
                const int row = order[(off + i) % n];
                for (int j = 0; j < buffer.obs_dim; ++j) s(i, j) = states(row, j);
                for (int j = 0; j < buffer.action_dim; ++j) a(i, j) = targets(row, j);
            }
            // Fresh prior draws every minibatch: the decoder regresses the
            // transport from N(0,I), never from the current latent policy.
            const Matrix eps = gaussian_draw(stream, b, buffer.action_dim);
            GenLoss gl;
            if (dec.kind == DecoderKind::FlowMatching) {
                std::vector<double> taus(b);
                for (int i = 0; i < b; ++i) taus[i] = stream.next_uniform();
                gl = fm_loss(dec.net, s, a, eps, taus);
            } else {
                gl = diffusion_loss(dec.net, dec.schedule, s, a, stream);
            }
            adam_step(params, grad_view(gl.grads), adam);
            epoch_loss += gl.loss * b;
            covered += b;
        }
        history.push_back(epoch_loss / covered);
    }
    return history;
}

std::vector<Matrix*> decoder_params(Decoder& dec) {
    if (dec.kind == DecoderKind::Identity) return {};
    return mlp_params(dec.net);
}

std::vector<const Matrix*> decoder_param_view(const Decoder& dec) {
    if (dec.kind == DecoderKind::Identity) return {};
    return mlp_param_view(dec.net);
}

}  // namespace gorl
