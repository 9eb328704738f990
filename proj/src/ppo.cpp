#include "gorl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gorl/errors.hpp"

namespace gorl {

AdvantageBatch compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                           const std::vector<uint8_t>& terminals,
                           const std::vector<double>& bootstrap_values, int n_envs, int horizon,
                           double gamma, double lam) {
    const size_t n = rewards.size();
    if (values.size() != n || terminals.size() != n)
        throw std::invalid_argument("compute_gae: array length mismatch");
    if (static_cast<size_t>(n_envs) * horizon != n ||
        bootstrap_values.size() != static_cast<size_t>(n_envs))
        throw std::invalid_argument("compute_gae: layout mismatch");

    AdvantageBatch out;
    out.raw_advantages.assign(n, 0.0);
    out.returns.assign(n, 0.0);
    out.old_values = values;

    for (int e = 0; e < n_envs; ++e) {
        double gae = 0.0;
        for (int t = horizon - 1; t >= 0; --t) {
            const size_t i = static_cast<size_t>(e) * horizon + t;
            const double nonterminal = terminals[i] ? 0.0 : 1.0;
            const double next_value =
                t == horizon - 1 ? bootstrap_values[e] : values[i + 1];
            const double delta = rewards[i] + gamma * next_value * nonterminal - values[i];
            gae = delta + gamma * lam * nonterminal * gae;
            out.raw_advantages[i] = gae;
            out.returns[i] = gae + values[i];
        }
    }

    // Per-batch normalization to zero mean / unit variance.
    double mean = 0.0;
    for (double a : out.raw_advantages) mean += a;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double a : out.raw_advantages) var += (a - mean) * (a - mean);
    var /= static_cast<double>(n);
    const double denom = std::sqrt(var) + 1e-8;
    out.advantages.resize(n);
    for (size_t i = 0; i < n; ++i) out.advantages[i] = (out.raw_advantages[i] - mean) / denom;
    return out;
}

AdvantageBatch compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                           const std::vector<uint8_t>& terminals, double bootstrap_value,
                           double gamma, double lam) {
    return compute_gae(rewards, values, terminals, std::vector<double>{bootstrap_value}, 1,
                       static_cast<int>(rewards.size()), gamma, lam);
}

AdvantageBatch compute_gae(const RolloutBuffer& buffer, double gamma, double lam) {
    AdvantageBatch out = compute_gae(buffer.rewards, buffer.values, buffer.terminals,
                                     buffer.bootstrap_values, buffer.n_envs, buffer.horizon,
                                     gamma, lam);
    out.old_log_probs = buffer.old_log_probs;
    return out;
}

SurrogateOut ppo_surrogate(const GaussianHead& head, const Mlp& critic, const Matrix& states,
                           const Matrix& latents, const std::vector<double>& advantages,
                           const std::vector<double>& returns,
                           const std::vector<double>& old_log_probs, const PpoConfig& cfg) {
    const int n = states.rows();
    const int d = head.latent_dim;
    if (n == 0) throw std::invalid_argument("ppo_surrogate: empty batch");

    const HeadEval eval = head_forward(head, states);
    MlpTape critic_tape;
    const Matrix v = mlp_forward(critic, states, &critic_tape);

    SurrogateOut out;
    Matrix dmean(n, d), dsigma(n, d), dv(n, 1);
    const double inv_n = 1.0 / n;
    double ratio_sum = 0.0;

    for (int i = 0; i < n; ++i) {
        const double* mu = eval.mean.row(i);
        const double* sg = eval.sigma.row(i);
        const double* ep = latents.row(i);

        const double logp = gaussian_log_prob(ep, mu, sg, d);
        const double ratio = std::exp(logp - old_log_probs[i]);
        if (!std::isfinite(ratio)) throw NumericError("ppo_surrogate: non-finite ratio");
        const double adv = advantages[i];

        const double clipped_ratio = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
        const double unclipped = ratio * adv;
        const double clipped = clipped_ratio * adv;
        // min() ties resolve to the unclipped branch, so the gradient at
        // theta == theta_old is the vanilla policy gradient.
        const bool use_unclipped = unclipped <= clipped;
        const double surr = use_unclipped ? unclipped : clipped;

        out.stats.policy_loss += -surr * inv_n;
        ratio_sum += ratio;
        if (std::abs(ratio - 1.0) > cfg.clip) out.stats.clip_fraction += inv_n;

        // d(-surr)/d(logp); the clipped branch is flat in theta.
        const double dlogp = use_unclipped ? -ratio * adv * inv_n : 0.0;

        const double entropy_i = gaussian_entropy(sg, d);
        const double kl_i = gaussian_kl_to_prior(mu, sg, d);
        out.stats.entropy += entropy_i * inv_n;
        out.stats.kl_to_prior += kl_i * inv_n;

        for (int j = 0; j < d; ++j) {
            const double z = (ep[j] - mu[j]) / sg[j];
            // dlogp/dmu = z/sigma, dlogp/dsigma = (z^2 - 1)/sigma
            double dm = dlogp * z / sg[j];
            double ds = dlogp * (z * z - 1.0) / sg[j];
            // entropy bonus: -c_ent * H, dH/dsigma = 1/sigma
            ds += -cfg.entropy_coef * inv_n / sg[j];
            // prior regularizer
            if (cfg.kl_l2_form) {
                dm += cfg.kl_beta * inv_n * mu[j];
                ds += cfg.kl_beta * inv_n * std::log(sg[j]) / sg[j];
            } else {
                dm += cfg.kl_beta * inv_n * mu[j];
                ds += cfg.kl_beta * inv_n * (sg[j] - 1.0 / sg[j]);
            }
            dmean(i, j) = dm;
            dsigma(i, j) = ds;
        }

        const double verr = v(i, 0) - returns[i];
        out.stats.value_loss += verr * verr * inv_n;
        dv(i, 0) = cfg.value_coef * 2.0 * verr * inv_n;
    }
    // Sum-then-divide keeps the ratio stat exactly 1 at theta == theta_old.
    out.stats.mean_ratio = ratio_sum / n;

    if (cfg.kl_l2_form) {
        // Reported regularizer stat stays the closed-form KL either way.
        double l2 = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) {
                const double ls = std::log(eval.sigma(i, j));
                l2 += 0.5 * (eval.mean(i, j) * eval.mean(i, j) + ls * ls);
            }
        out.stats.loss = out.stats.policy_loss - cfg.entropy_coef * out.stats.entropy +
                         cfg.kl_beta * l2 * inv_n + cfg.value_coef * out.stats.value_loss;
    } else {
        out.stats.loss = out.stats.policy_loss - cfg.entropy_coef * out.stats.entropy +
                         cfg.kl_beta * out.stats.kl_to_prior + cfg.value_coef * out.stats.value_loss;
    }

    out.head_grads = head_backward(head, eval, dmean, dsigma);
    out.critic_grads = mlp_backward(critic, critic_tape, dv);
    return out;
}

UpdateStats encoder_update(GaussianHead& head, Mlp& critic, AdamState& head_adam,
                           AdamState& critic_adam, const RolloutBuffer& buffer,
                           const PpoConfig& cfg, RngStream& shuffle_stream) {
    const int n = buffer.size();
    if (n == 0) throw std::invalid_argument("encoder_update: empty rollout buffer");

    const AdvantageBatch adv = compute_gae(buffer, cfg.gamma, cfg.lam);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    const int mb = std::min(cfg.minibatch, n);
    std::vector<Matrix*> hp = head_params(head);
    std::vector<Matrix*> cp = mlp_params(critic);

    UpdateStats stats;
    double weight_total = 0.0;
    bool first = true;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle(order, shuffle_stream);
        for (int off = 0; off < n; off += mb) {
            const int b = std::min(mb, n - off);
            Matrix s(b, buffer.obs_dim), z(b, buffer.action_dim);
            std::vector<double> a(b), ret(b), old_lp(b);
            for (int i = 0; i < b; ++i) {
                const int row = order[off + i];
                for (int j = 0; j < buffer.obs_dim; ++j) s(i, j) = buffer.states(row, j);
                for (int j = 0; j < buffer.action_dim; ++j) z(i, j) = buffer.latents(row, j);
                a[i] = adv.advantages[row];
                ret[i] = adv.returns[row];
                old_lp[i] = buffer.old_log_probs[row];
            }
            SurrogateOut so = ppo_surrogate(head, critic, s, z, a, ret, old_lp, cfg);
            adam_step(hp, head_grad_view(so.head_grads), head_adam);
            adam_step(cp, grad_view(so.critic_grads), critic_adam);

            if (first) {
                stats.first_minibatch_ratio = so.stats.mean_ratio;
                first = false;
            }
            const double w = b;
            stats.mean_ratio += so.stats.mean_ratio * w;
            stats.clip_fraction += so.stats.clip_fraction * w;
            stats.entropy += so.stats.entropy * w;
            stats.kl_to_prior += so.stats.kl_to_prior * w;
            stats.value_loss += so.stats.value_loss * w;
            stats.policy_loss += so.stats.policy_loss * w;
            weight_total += w;
        }
    }
    stats.mean_ratio /= weight_total;
    stats.clip_fraction /= weight_total;
    stats.entropy /= weight_total;
    stats.kl_to_prior /= weight_total;
    stats.value_loss /= weight_total;
    stats.policy_loss /= weight_total;
    return stats;
}

}  // namespace gorl
