#include "doctest.h"

#include <cmath>
#include <numeric>

#include "gorl/decoder.hpp"
#include "gorl/ppo.hpp"
#include "oracles.hpp"

using namespace gorl;

TEST_CASE("gae collapses to one-step TD residuals at lambda = 0") {
    const std::vector<double> r = {1.0, -0.5, 2.0, 0.25};
    const std::vector<double> v = {0.3, 0.1, -0.2, 0.6};
    const std::vector<uint8_t> term = {0, 0, 0, 0};
    const double boot = 0.4, gamma = 0.9;
    const AdvantageBatch adv = compute_gae(r, v, term, boot, gamma, 0.0);
    for (size_t t = 0; t < r.size(); ++t) {
        const double next = t + 1 < r.size() ? v[t + 1] : boot;
        CHECK(adv.raw_advantages[t] == doctest::Approx(r[t] + gamma * next - v[t]).epsilon(1e-15));
    }
}

TEST_CASE("gae with gamma=lambda=1 and zero values is the tail reward sum") {
    const std::vector<double> r = {1.0, 2.0, 3.0};
    const std::vector<double> v = {0.0, 0.0, 0.0};
    const std::vector<uint8_t> term = {0, 0, 1};
    const AdvantageBatch adv = compute_gae(r, v, term, 0.0, 1.0, 1.0);
    CHECK(adv.raw_advantages[0] == 6.0);
    CHECK(adv.raw_advantages[1] == 5.0);
    CHECK(adv.raw_advantages[2] == 3.0);
}

TEST_CASE("gae matches the backward-recursion oracle on the 3-step example") {
    const std::vector<double> r = {1.0, 0.0, 2.0};
    const std::vector<double> v = {0.5, 0.5, 0.5};
    const std::vector<uint8_t> term = {0, 0, 0};
    const double gamma = 0.99, lam = 0.95;
    const AdvantageBatch adv = compute_gae(r, v, term, 0.0, gamma, lam);

    // frozen values from the direct recursion
    CHECK(adv.raw_advantages[2] == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(adv.raw_advantages[1] == doctest::Approx(1.40575).epsilon(1e-12));
    CHECK(adv.raw_advantages[0] == doctest::Approx(2.317107875).epsilon(1e-12));

    // and the oracle run in place
    std::vector<double> expect(3);
    double gae = 0.0;
    for (int t = 2; t >= 0; --t) {
        const double next = t == 2 ? 0.0 : v[t + 1];
        const double delta = r[t] + gamma * next - v[t];
        gae = delta + gamma * lam * gae;
        expect[t] = gae;
    }
    for (int t = 0; t < 3; ++t)
        CHECK(adv.raw_advantages[t] == doctest::Approx(expect[t]).epsilon(1e-12));

    // normalized output is zero-mean unit-variance
    const double m = oracles::mean_of(adv.advantages);
    CHECK(std::abs(m) < 1e-12);
    CHECK(oracles::variance_of(adv.advantages) == doctest::Approx(1.0).epsilon(1e-6));

    CHECK_THROWS_AS(compute_gae(r, {0.1}, term, 0.0, gamma, lam), std::invalid_argument);
}

namespace {

struct PpoFixture {
    GaussianHead head;
    Mlp critic;
    Matrix states, latents;
    std::vector<double> advantages, returns, old_log_probs;

    PpoFixture(int n, uint64_t seed, double adv_scale = 1.0) {
        RngStream stream(seed, 0);
        head = make_gaussian_head(3, 2, {8, 8}, stream);
        critic = make_mlp({3, 8, 1}, Activation::SiLU);
        init_mlp(critic, stream);
        states = gaussian_draw(stream, n, 3);
        latents = gaussian_draw(stream, n, 2);
        const HeadEval ev = head_forward(head, states);
        for (int i = 0; i < n; ++i) {
            advantages.push_back(adv_scale * stream.next_normal());
            returns.push_back(stream.next_normal());
            old_log_probs.push_back(
                gaussian_log_prob(latents.row(i), ev.mean.row(i), ev.sigma.row(i), 2));
        }
    }
};

}  // namespace

TEST_CASE("surrogate at theta_old: unit ratio and -mean(adv) policy term") {
    PpoFixture fx(7, 5);
    PpoConfig cfg;
    const SurrogateOut out = ppo_surrogate(fx.head, fx.critic, fx.states, fx.latents,
                                           fx.advantages, fx.returns, fx.old_log_probs, cfg);
    CHECK(out.stats.mean_ratio == 1.0);
    CHECK(out.stats.clip_fraction == 0.0);
    double mean_adv = 0.0;
    for (double a : fx.advantages) mean_adv += a / 7.0;
    CHECK(out.stats.policy_loss == doctest::Approx(-mean_adv).epsilon(1e-12));
}

TEST_CASE("clipped branch yields zero policy gradient") {
    PpoFixture fx(1, 6);
    PpoConfig cfg;
    cfg.entropy_coef = 0.0;
    cfg.kl_beta = 0.0;
    cfg.value_coef = 0.0;
    fx.advantages[0] = 2.0;
    fx.old_log_probs[0] -= std::log(2.0);  // ratio = 2 > 1 + clip
    const SurrogateOut out = ppo_surrogate(fx.head, fx.critic, fx.states, fx.latents,
                                           fx.advantages, fx.returns, fx.old_log_probs, cfg);
    CHECK(out.stats.clip_fraction == 1.0);
    for (const Matrix* g : head_grad_view(out.head_grads))
        for (size_t i = 0; i < g->size(); ++i) CHECK(g->data()[i] == 0.0);
}

TEST_CASE("surrogate gradient matches finite differences") {
    PpoFixture fx(6, 7, 0.7);
    PpoConfig cfg;
    cfg.clip = 0.5;  // keep every sample away from the clip kink under fd probes

    auto loss_at = [&]() {
        return ppo_surrogate(fx.head, fx.critic, fx.states, fx.latents, fx.advantages,
                             fx.returns, fx.old_log_probs, cfg)
            .stats.loss;
    };
    const SurrogateOut out = ppo_surrogate(fx.head, fx.critic, fx.states, fx.latents,
                                           fx.advantages, fx.returns, fx.old_log_probs, cfg);

    double worst = 0.0;
    const double h = 1e-6;
    auto probe = [&](Matrix* param, const Matrix& analytic) {
        for (size_t i = 0; i < param->size(); ++i) {
            const double saved = param->data()[i];
            param->data()[i] = saved + h;
            const double up = loss_at();
            param->data()[i] = saved - h;
            const double dn = loss_at();
            param->data()[i] = saved;
            const double numeric = (up - dn) / (2 * h);
            const double a = analytic.data()[i];
            worst = std::max(worst,
                             std::abs(numeric - a) / std::max({std::abs(numeric), std::abs(a), 1e-6}));
        }
    };

    std::vector<Matrix*> hp = head_params(fx.head);
    std::vector<const Matrix*> hg = head_grad_view(out.head_grads);
    for (size_t k = 0; k < hp.size(); ++k) probe(hp[k], *hg[k]);
    std::vector<Matrix*> cp = mlp_params(fx.critic);
    std::vector<const Matrix*> cg = grad_view(out.critic_grads);
    for (size_t k = 0; k < cp.size(); ++k) probe(cp[k], *cg[k]);

    CHECK(worst < 1e-4);
}

namespace {

RolloutBuffer collect_identity_rollouts(GaussianHead& head, Mlp& critic, const EnvSpec& spec,
                                        int n_envs, int horizon, uint64_t seed,
                                        NormalizerState& norm) {
    VecEnv env(spec, n_envs, seed, 0);
    auto policy = [&](const std::vector<double>& obs, RngStream& stream) {
        const LatentSample s = sample_latent(head, obs, stream);
        SampleOut o;
        o.latent = s.epsilon;
        o.action.resize(s.epsilon.size());
        for (size_t j = 0; j < s.epsilon.size(); ++j) o.action[j] = std::tanh(s.epsilon[j]);
        o.log_prob = s.log_prob;
        Matrix row(1, spec.obs_dim);
        for (int j = 0; j < spec.obs_dim; ++j) row(0, j) = obs[j];
        o.value = mlp_forward(critic, row)(0, 0);
        return o;
    };
    auto value = [&](const std::vector<double>& obs) {
        Matrix row(1, spec.obs_dim);
        for (int j = 0; j < spec.obs_dim; ++j) row(0, j) = obs[j];
        return mlp_forward(critic, row)(0, 0);
    };
    return env.collect(policy, value, horizon, norm, true);
}

// Plain tanh-Gaussian PPO update, written directly against mathcore: the
// reference the latent machinery must reproduce bit-for-bit when the
// decoder is the identity and beta = 0.
void plain_gaussian_ppo_update(GaussianHead& head, Mlp& critic, AdamState& head_adam,
                               AdamState& critic_adam, const RolloutBuffer& buf,
                               const PpoConfig& cfg, RngStream& shuffle_stream) {
    const int n = buf.size();
    // GAE
    std::vector<double> raw(n), rets(n);
    for (int e = 0; e < buf.n_envs; ++e) {
        double gae = 0.0;
        for (int t = buf.horizon - 1; t >= 0; --t) {
            const int i = e * buf.horizon + t;
            const double nonterm = buf.terminals[i] ? 0.0 : 1.0;
            const double next_v =
                t == buf.horizon - 1 ? buf.bootstrap_values[e] : buf.values[i + 1];
            const double delta = buf.rewards[i] + cfg.gamma * next_v * nonterm - buf.values[i];
            gae = delta + cfg.gamma * cfg.lam * nonterm * gae;
            raw[i] = gae;
            rets[i] = gae + buf.values[i];
        }
    }
    double mean = 0.0;
    for (double a : raw) mean += a;
    mean /= n;
    double var = 0.0;
    for (double a : raw) var += (a - mean) * (a - mean);
    var /= n;
    const double denom = std::sqrt(var) + 1e-8;
    std::vector<double> adv(n);
    for (int i = 0; i < n; ++i) adv[i] = (raw[i] - mean) / denom;

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    const int mb = std::min(cfg.minibatch, n);
    std::vector<Matrix*> hp = head_params(head);
    std::vector<Matrix*> cp = mlp_params(critic);
    const int d = head.latent_dim;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle(order, shuffle_stream);
        for (int off = 0; off < n; off += mb) {
            const int b = std::min(mb, n - off);
            Matrix s(b, buf.obs_dim), z(b, d);
            std::vector<double> a(b), ret(b), old_lp(b);
            for (int i = 0; i < b; ++i) {
                const int row = order[off + i];
                for (int j = 0; j < buf.obs_dim; ++j) s(i, j) = buf.states(row, j);
                for (int j = 0; j < d; ++j) z(i, j) = buf.latents(row, j);
                a[i] = adv[row];
                ret[i] = rets[row];
                old_lp[i] = buf.old_log_probs[row];
            }
            const HeadEval ev = head_forward(head, s);
            MlpTape vtape;
            const Matrix v = mlp_forward(critic, s, &vtape);
            Matrix dmean(b, d), dsigma(b, d), dv(b, 1);
            const double inv_b = 1.0 / b;
            for (int i = 0; i < b; ++i) {
                const double lp = gaussian_log_prob(z.row(i), ev.mean.row(i), ev.sigma.row(i), d);
                const double ratio = std::exp(lp - old_lp[i]);
                const double cl = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
                const bool unclipped = ratio * a[i] <= cl * a[i];
                const double dlogp = unclipped ? -ratio * a[i] * inv_b : 0.0;
                for (int j = 0; j < d; ++j) {
                    const double sg = ev.sigma(i, j);
                    const double zz = (z(i, j) - ev.mean(i, j)) / sg;
                    double dm = dlogp * zz / sg;
                    double ds = dlogp * (zz * zz - 1.0) / sg;
                    ds += -cfg.entropy_coef * inv_b / sg;
                    dm += cfg.kl_beta * inv_b * ev.mean(i, j);
                    ds += cfg.kl_beta * inv_b * (sg - 1.0 / sg);
                    dmean(i, j) = dm;
                    dsigma(i, j) = ds;
                }
                dv(i, 0) = cfg.value_coef * 2.0 * (v(i, 0) - ret[i]) * inv_b;
            }
            const HeadGrads hg = head_backward(head, ev, dmean, dsigma);
            const MlpGrads cg = mlp_backward(critic, vtape, dv);
            adam_step(hp, head_grad_view(hg), head_adam);
            adam_step(cp, grad_view(cg), critic_adam);
        }
    }
}

}  // namespace

TEST_CASE("identity-decoder update equals plain Gaussian PPO bit-for-bit") {
    const EnvSpec spec = make_env_spec(EnvName::TwoGoalPointMass, 10);
    RngStream init(404, 9);
    GaussianHead head_a = make_gaussian_head(spec.obs_dim, spec.action_dim, {16, 16}, init);
    Mlp critic_a = make_mlp({spec.obs_dim, 16, 1}, Activation::SiLU);
    init_mlp(critic_a, init);
    GaussianHead head_b = head_a;
    Mlp critic_b = critic_a;

    NormalizerState norm;
    norm.init(spec.obs_dim);
    const RolloutBuffer buf =
        collect_identity_rollouts(head_a, critic_a, spec, 4, 8, 777, norm);

    PpoConfig cfg;
    cfg.kl_beta = 0.0;
    cfg.epochs = 3;
    cfg.minibatch = 16;

    AdamState ha = make_adam(head_param_view(head_a), cfg.lr);
    AdamState ca = make_adam(mlp_param_view(critic_a), cfg.lr);
    RngStream shuffle_a(31, 12);
    encoder_update(head_a, critic_a, ha, ca, buf, cfg, shuffle_a);

    AdamState hb = make_adam(head_param_view(head_b), cfg.lr);
    AdamState cb = make_adam(mlp_param_view(critic_b), cfg.lr);
    RngStream shuffle_b(31, 12);
    plain_gaussian_ppo_update(head_b, critic_b, hb, cb, buf, cfg, shuffle_b);

    const auto pa = head_param_view(head_a);
    const auto pb = head_param_view(head_b);
    REQUIRE(pa.size() == pb.size());
    for (size_t k = 0; k < pa.size(); ++k) CHECK(*pa[k] == *pb[k]);
    const auto va = mlp_param_view(critic_a);
    const auto vb = mlp_param_view(critic_b);
    for (size_t k = 0; k < va.size(); ++k) CHECK(*va[k] == *vb[k]);
}

TEST_CASE("encoder_update: zero advantages leave the head untouched") {
    RngStream init(11, 0);
    GaussianHead head = make_gaussian_head(1, 1, {8}, init);
    Mlp critic = make_mlp({1, 8, 1}, Activation::SiLU);
    init_mlp(critic, init);

    RolloutBuffer buf;
    buf.n_envs = 1;
    buf.horizon = 6;
    buf.obs_dim = 1;
    buf.action_dim = 1;
    RngStream s(12, 0);
    buf.states = gaussian_draw(s, 6, 1);
    buf.states_raw = buf.states;
    buf.next_states_raw = buf.states;
    buf.latents = gaussian_draw(s, 6, 1);
    buf.actions = buf.latents;
    buf.rewards.assign(6, 0.0);
    buf.values.assign(6, 0.0);
    buf.terminals.assign(6, 1);
    buf.bootstrap_values = {0.0};
    for (int i = 0; i < 6; ++i)
        buf.old_log_probs.push_back(log_prob(head, {buf.states(i, 0)}, {buf.latents(i, 0)}));

    PpoConfig cfg;
    cfg.entropy_coef = 0.0;
    cfg.kl_beta = 0.0;
    cfg.epochs = 2;

    const uint64_t head_before = param_hash(head_param_view(head));
    const uint64_t critic_before = param_hash(mlp_param_view(critic));
    AdamState ha = make_adam(head_param_view(head), cfg.lr);
    AdamState ca = make_adam(mlp_param_view(critic), cfg.lr);
    RngStream shuf(13, 0);
    const UpdateStats st = encoder_update(head, critic, ha, ca, buf, cfg, shuf);

    CHECK(param_hash(head_param_view(head)) == head_before);
    CHECK(param_hash(mlp_param_view(critic)) != critic_before);
    CHECK(st.first_minibatch_ratio == 1.0);
    CHECK(st.clip_fraction >= 0.0);
    CHECK(st.clip_fraction <= 1.0);
}

TEST_CASE("kl regularizer pulls the head toward the prior") {
    // one synthetic buffer, two updates differing only in beta
    RngStream init(21, 0);
    GaussianHead head0 = make_gaussian_head(1, 1, {8}, init);
    head0.mean_head.biases[0](0, 0) = 0.8;  // start away from the prior
    Mlp critic0 = make_mlp({1, 8, 1}, Activation::SiLU);
    init_mlp(critic0, init);

    RolloutBuffer buf;
    buf.n_envs = 1;
    buf.horizon = 32;
    buf.obs_dim = 1;
    buf.action_dim = 1;
    RngStream s(22, 0);
    buf.states = gaussian_draw(s, 32, 1);
    buf.states_raw = buf.states;
    buf.next_states_raw = buf.states;
    buf.latents = Matrix(32, 1);
    buf.actions = Matrix(32, 1);
    buf.rewards.assign(32, 0.0);
    buf.values.assign(32, 0.0);
    buf.terminals.assign(32, 1);
    buf.bootstrap_values = {0.0};
    buf.old_log_probs.resize(32);
    RngStream draw(23, 0);
    for (int i = 0; i < 32; ++i) {
        const LatentSample ls = sample_latent(head0, {buf.states(i, 0)}, draw);
        buf.latents(i, 0) = ls.epsilon[0];
        buf.actions(i, 0) = std::tanh(ls.epsilon[0]);
        buf.old_log_probs[i] = ls.log_prob;
    }

    auto run = [&](double beta) {
        GaussianHead head = head0;
        Mlp critic = critic0;
        PpoConfig cfg;
        cfg.kl_beta = beta;
        cfg.epochs = 40;
        cfg.entropy_coef = 0.0;
        AdamState ha = make_adam(head_param_view(head), cfg.lr);
        AdamState ca = make_adam(mlp_param_view(critic), cfg.lr);
        RngStream shuf(24, 0);
        encoder_update(head, critic, ha, ca, buf, cfg, shuf);
        double kl = 0.0;
        for (int i = 0; i < 32; ++i) kl += kl_to_standard_normal(head, {buf.states(i, 0)}) / 32;
        return kl;
    };

    const double kl_none = run(0.0);
    const double kl_strong = run(5e-2);
    CHECK(kl_strong < kl_none);
}
