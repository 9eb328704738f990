#include "doctest.h"

#include <cmath>

#include "gorl/decoder.hpp"
#include "gorl/encoder.hpp"
#include "oracles.hpp"

using namespace gorl;

namespace {

GaussianHead test_head(int obs_dim = 3, int latent_dim = 2, uint64_t seed = 17) {
    RngStream stream(seed, 100);
    return make_gaussian_head(obs_dim, latent_dim, {32, 32, 32}, stream);
}

// Head pinned to an exact (mu, sigma) at every state.
GaussianHead pinned_head(double mu, double sigma) {
    RngStream stream(3, 0);
    GaussianHead head = make_gaussian_head(1, 1, {8}, stream);
    reinit_to_prior(head, stream, false);
    head.mean_head.biases[0](0, 0) = mu;
    head.scale_head.biases[0](0, 0) = softplus_inverse(sigma);
    return head;
}

}  // namespace

TEST_CASE("sample_latent determinism and tight-scale concentration") {
    GaussianHead head = test_head();
    const std::vector<double> state = {0.1, -0.4, 2.0};

    RngStream a(5, 1), b(5, 1);
    const LatentSample s1 = sample_latent(head, state, a);
    const LatentSample s2 = sample_latent(head, state, b);
    CHECK(s1.epsilon == s2.epsilon);
    CHECK(s1.log_prob == s2.log_prob);

    // scale pinned at the clip floor: samples hug the mean
    GaussianHead tight = test_head();
    tight.scale_head.weights[0].fill(0.0);
    tight.scale_head.biases[0].fill(-100.0);  // softplus -> 0, clipped to 1e-3
    RngStream c(6, 2);
    for (int i = 0; i < 200; ++i) {
        const LatentSample s = sample_latent(tight, state, c);
        CHECK(s.scale[0] == kScaleFloor);
        CHECK(std::abs(s.epsilon[0] - s.mean[0]) < 0.01);
    }
}

TEST_CASE("sampled moments match head outputs") {
    GaussianHead head = test_head(2, 2, 99);
    const std::vector<double> state = {0.5, -1.0};
    RngStream stream(7, 3);
    const LatentSample probe = sample_latent(head, state, stream);
    const int n = 100000;
    std::vector<double> sum(2, 0.0), sumsq(2, 0.0);
    for (int i = 0; i < n; ++i) {
        const LatentSample s = sample_latent(head, state, stream);
        for (int j = 0; j < 2; ++j) {
            sum[j] += s.epsilon[j];
            sumsq[j] += s.epsilon[j] * s.epsilon[j];
        }
    }
    for (int j = 0; j < 2; ++j) {
        const double mean = sum[j] / n;
        const double sd = std::sqrt(sumsq[j] / n - mean * mean);
        CHECK(std::abs(mean - probe.mean[j]) < 0.02);
        CHECK(std::abs(sd - probe.scale[j]) < 0.02);
    }
}

TEST_CASE("log_prob closed form, symmetry and normalization") {
    GaussianHead prior = pinned_head(0.0, 1.0);
    CHECK(log_prob(prior, {0.3}, {0.0}) == doctest::Approx(-0.91893853320467274).epsilon(1e-12));

    GaussianHead head = pinned_head(0.4, 0.7);
    const double d = 0.31;
    CHECK(log_prob(head, {0.0}, {0.4 + d}) == log_prob(head, {0.0}, {0.4 - d}));

    // quadrature oracle: exp(log_prob) integrates to 1
    GaussianHead q = pinned_head(0.3, 0.5);
    const double integral = oracles::simpson(
        [&](double x) { return std::exp(log_prob(q, {0.0}, {x})); }, -5.0, 5.0, 4000);
    CHECK(std::abs(integral - 1.0) < 1e-6);
}

TEST_CASE("entropy closed form and MC oracle") {
    GaussianHead prior = pinned_head(0.0, 1.0);
    CHECK(entropy(prior, {0.0}) == doctest::Approx(1.4189385332046727).epsilon(1e-12));

    GaussianHead wide = pinned_head(0.0, 2.0);
    CHECK(entropy(wide, {0.0}) - entropy(prior, {0.0}) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-9));

    GaussianHead head = pinned_head(-0.2, 0.8);
    RngStream stream(11, 0);
    double acc = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const LatentSample s = sample_latent(head, {0.0}, stream);
        acc += -s.log_prob;
    }
    CHECK(std::abs(acc / n - entropy(head, {0.0})) < 0.01);
}

TEST_CASE("kl_to_standard_normal closed forms") {
    CHECK(kl_to_standard_normal(pinned_head(0.0, 1.0), {0.0}) == 0.0);
    CHECK(kl_to_standard_normal(pinned_head(1.0, 1.0), {0.0}) ==
          doctest::Approx(0.5).epsilon(1e-12));
    CHECK(kl_to_standard_normal(pinned_head(0.0, 2.0), {0.0}) ==
          doctest::Approx(1.5 - std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("reinit_to_prior gives the exact standard normal at every state") {
    GaussianHead head = test_head(3, 2, 31);
    RngStream stream(8, 0);
    reinit_to_prior(head, stream);
    RngStream probe(9, 0);
    for (int i = 0; i < 20; ++i) {
        std::vector<double> state = {probe.next_normal(), probe.next_normal(),
                                     probe.next_normal()};
        Matrix s(1, 3);
        for (int j = 0; j < 3; ++j) s(0, j) = state[j];
        const HeadEval eval = head_forward(head, s);
        CHECK(eval.mean(0, 0) == 0.0);
        CHECK(eval.mean(0, 1) == 0.0);
        CHECK(eval.sigma(0, 0) == 1.0);
        CHECK(eval.sigma(0, 1) == 1.0);
        CHECK(kl_to_standard_normal(head, state) == 0.0);
    }
}

TEST_CASE("after reinit the composite policy equals the prior pushforward") {
    // two-sample KS between (sample_latent -> decode) and (N(0,I) -> decode)
    RngStream init(21, 0);
    Decoder dec = make_decoder(DecoderKind::FlowMatching, 1, 1, {32, 32}, 10, 10, &init);

    GaussianHead head = test_head(1, 1, 77);
    RngStream rs(13, 0);
    reinit_to_prior(head, rs);

    const std::vector<double> state = {0.4};
    RngStream path_a(100, 1), path_b(100, 2), decode_stream(100, 3);
    const int n = 10000;
    std::vector<double> via_head(n), via_prior(n);
    for (int i = 0; i < n; ++i) {
        const LatentSample s = sample_latent(head, state, path_a);
        via_head[i] = decode(dec, state, s.epsilon, decode_stream)[0];
        via_prior[i] = decode(dec, state, {path_b.next_normal()}, decode_stream)[0];
    }
    const double ks = oracles::ks_statistic(via_head, via_prior);
    CHECK(ks < 1.949 * std::sqrt(2.0 / n));  // alpha ~ 0.001
}
