#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gorl/matrix.hpp"
#include "gorl/rng.hpp"

#include "json.hpp"

namespace gorl {

// Finite MDP with a discretized latent space and a tabular decoder
// (latent bin -> action) used to make the latent-policy guarantees
// exactly computable.
struct TabularMdp {
    int n_states = 0;
    int n_actions = 0;
    int n_latent_bins = 0;
    std::vector<std::vector<std::vector<double>>> transitions;  // [s][a][s']
    Matrix rewards;                                             // [s][a]
    std::vector<std::vector<int>> decoder_table;                // [s][bin] -> action
    double gamma = 0.9;
    std::vector<double> initial_dist;
};

TabularMdp random_mdp(int n_states, int n_actions, int n_latent_bins, double gamma,
                      RngStream& stream);

// Row-stochastic latent policy [s][bin].
Matrix random_latent_policy(int n_states, int n_latent_bins, RngStream& stream);

struct ExactEval {
    double J = 0.0;
    std::vector<double> V;
    Matrix Q;                        // [s][a]
    Matrix A;                        // [s][a]
    Matrix action_policy;            // pushforward [s][a]
    std::vector<double> visitation;  // normalized discounted d_pi
};

// Exact policy evaluation of the pushforward action policy via dense
// linear solves; gamma must be < 1.
ExactEval exact_eval(const TabularMdp& mdp, const Matrix& latent_policy);

// One-step Gaussian bandit in one latent dimension with a two-parameter
// head (mean, pre-scale with sigma = softplus).
struct GaussianBandit {
    std::function<double(double)> decode;  // latent -> action
    std::function<double(double)> reward;  // action -> reward
};

struct GradientCheckReport {
    double score_mean = 0.0, score_scale = 0.0;  // score-function estimates
    double fd_mean = 0.0, fd_scale = 0.0;        // paired finite differences of J
    double z_mean = 0.0, z_scale = 0.0;          // paired z-scores
    long n_samples = 0;
};

// Score-function gradient vs central finite differences of the MC return,
// using common random numbers; z-scores are mean(diff)/se(diff).
GradientCheckReport check_unbiased_gradient(const GaussianBandit& bandit, double mean,
                                            double prescale, long n_samples, RngStream& stream,
                                            double fd_step = 1e-3);

struct BoundReport {
    double lhs = 0.0;        // J(theta') - J(theta)
    double surrogate = 0.0;  // (1/(1-gamma)) E_{d_pi} E_{pi'} [A_pi]
    double delta_tv = 0.0;   // E_{d_pi} [TV(pi'_latent, pi_latent)]
    double constant = 0.0;   // 2 gamma / (1-gamma)^2
    double a_max = 0.0;
    double slack = 0.0;      // lhs - surrogate + C * A_max * delta
    double visit_shift = 0.0;      // || d_pi' - d_pi ||_1
    double visit_shift_bound = 0.0;  // (2 gamma/(1-gamma)) E_{d_pi}[TV(pushforwards)]
};

BoundReport check_performance_bound(const TabularMdp& mdp, const Matrix& latent_policy,
                                    const Matrix& latent_policy_prime);

// Total variation before and after pushing two latent distributions
// through a deterministic bin -> action table.
struct TvPair {
    double tv_latent = 0.0;
    double tv_action = 0.0;
};

TvPair check_tv_data_processing(const std::vector<double>& p, const std::vector<double>& q,
                                const std::vector<int>& decoder_table, int n_actions);

double total_variation(const std::vector<double>& p, const std::vector<double>& q);

// Runs every lemma/identity check on seeded instances and returns a
// machine-readable report; `passed` is the conjunction of all checks.
nlohmann::json run_verification_suite(uint64_t seed);

}  // namespace gorl
