#include "gorl/verify.hpp"

#include <algorithm>
#include <cmath>

#include "gorl/encoder.hpp"
#include "gorl/errors.hpp"

namespace gorl {

namespace {

// Dense solve by Gaussian elimination with partial pivoting; systems here
// are tiny (a handful of states).
std::vector<double> solve_linear(Matrix a, std::vector<double> b) {
    const int n = a.rows();
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
        if (std::abs(a(pivot, col)) < 1e-14) throw NumericError("solve_linear: singular system");
        if (pivot != col) {
            for (int j = 0; j < n; ++j) std::swap(a(col, j), a(pivot, j));
            std::swap(b[col], b[pivot]);
        }
        for (int r = col + 1; r < n; ++r) {
            const double f = a(r, col) / a(col, col);
            for (int j = col; j < n; ++j) a(r, j) -= f * a(col, j);
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (int r = n - 1; r >= 0; --r) {
        double acc = b[r];
        for (int j = r + 1; j < n; ++j) acc -= a(r, j) * x[j];
        x[r] = acc / a(r, r);
    }
    return x;
}

std::vector<double> normalized_uniform(int n, RngStream& stream, double floor = 0.05) {
    std::vector<double> v(n);
    double total = 0.0;
    for (double& x : v) {
        x = floor + stream.next_uniform();
        total += x;
    }
    for (double& x : v) x /= total;
    return v;
}

}  // namespace

TabularMdp random_mdp(int n_states, int n_actions, int n_latent_bins, double gamma,
                      RngStream& stream) {
    TabularMdp mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.n_latent_bins = n_latent_bins;
    mdp.gamma = gamma;
    mdp.rewards = Matrix(n_states, n_actions);
    mdp.transitions.assign(n_states, {});
    mdp.decoder_table.assign(n_states, std::vector<int>(n_latent_bins, 0));
    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            mdp.transitions[s].push_back(normalized_uniform(n_states, stream));
            mdp.rewards(s, a) = 2.0 * stream.next_uniform() - 1.0;
        }
        for (int b = 0; b < n_latent_bins; ++b)
            mdp.decoder_table[s][b] = static_cast<int>(stream.next_below(n_actions));
    }
    mdp.initial_dist = normalized_uniform(n_states, stream);
    return mdp;
}

Matrix random_latent_policy(int n_states, int n_latent_bins, RngStream& stream) {
    Matrix pol(n_states, n_latent_bins);
    for (int s = 0; s < n_states; ++s) {
        const std::vector<double> row = normalized_uniform(n_latent_bins, stream);
        for (int b = 0; b < n_latent_bins; ++b) pol(s, b) = row[b];
    }
    return pol;
}

ExactEval exact_eval(const TabularMdp& mdp, const Matrix& latent_policy) {
    const int S = mdp.n_states, A = mdp.n_actions, B = mdp.n_latent_bins;
    if (latent_policy.rows() != S || latent_policy.cols() != B)
        throw std::invalid_argument("exact_eval: latent policy shape mismatch");
    if (!(mdp.gamma < 1.0)) throw NumericError("exact_eval: gamma must be < 1");
    for (int s = 0; s < S; ++s) {
        double total = 0.0;
        for (int b = 0; b < B; ++b) total += latent_policy(s, b);
        if (std::abs(total - 1.0) > 1e-9)
            throw std::invalid_argument("exact_eval: policy rows must sum to 1");
    }

    ExactEval out;
    out.action_policy = Matrix(S, A);
    for (int s = 0; s < S; ++s)
        for (int b = 0; b < B; ++b)
            out.action_policy(s, mdp.decoder_table[s][b]) += latent_policy(s, b);

    // Markov chain and expected reward under the pushforward policy.
    Matrix chain(S, S);
    std::vector<double> r_pi(S, 0.0);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            const double p = out.action_policy(s, a);
            if (p == 0.0) continue;
            r_pi[s] += p * mdp.rewards(s, a);
            for (int s2 = 0; s2 < S; ++s2) chain(s, s2) += p * mdp.transitions[s][a][s2];
        }
    }

    // (I - gamma P) V = r
    Matrix lhs(S, S);
    for (int s = 0; s < S; ++s)
        for (int s2 = 0; s2 < S; ++s2)
            lhs(s, s2) = (s == s2 ? 1.0 : 0.0) - mdp.gamma * chain(s, s2);
    out.V = solve_linear(lhs, r_pi);

    out.Q = Matrix(S, A);
    out.A = Matrix(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            double q = mdp.rewards(s, a);
            for (int s2 = 0; s2 < S; ++s2) q += mdp.gamma * mdp.transitions[s][a][s2] * out.V[s2];
            out.Q(s, a) = q;
            out.A(s, a) = q - out.V[s];
        }

    out.J = 0.0;
    for (int s = 0; s < S; ++s) out.J += mdp.initial_dist[s] * out.V[s];

    // (I - gamma P^T) d = (1-gamma) rho ; d sums to 1
    Matrix lhs_t(S, S);
    for (int s = 0; s < S; ++s)
        for (int s2 = 0; s2 < S; ++s2)
            lhs_t(s, s2) = (s == s2 ? 1.0 : 0.0) - mdp.gamma * chain(s2, s);
    std::vector<double> rho(S);
    for (int s = 0; s < S; ++s) rho[s] = (1.0 - mdp.gamma) * mdp.initial_dist[s];
    out.visitation = solve_linear(lhs_t, rho);
    return out;
}

GradientCheckReport check_unbiased_gradient(const GaussianBandit& bandit, double mean,
                                            double prescale, long n_samples, RngStream& stream,
                                            double fd_step) {
    GradientCheckReport rep;
    rep.n_samples = n_samples;
    const double sigma = softplus(prescale);
    const double dsig = 1.0 / (1.0 + std::exp(-prescale));  // d sigma / d prescale
    const double sig_up = softplus(prescale + fd_step);
    const double sig_dn = softplus(prescale - fd_step);

    double sum_dm = 0.0, sumsq_dm = 0.0;
    double sum_ds = 0.0, sumsq_ds = 0.0;
    double sum_sm = 0.0, sum_ss = 0.0, sum_fm = 0.0, sum_fs = 0.0;

    for (long i = 0; i < n_samples; ++i) {
        const double z = stream.next_normal();
        const double eps = mean + sigma * z;
        const double r = bandit.reward(bandit.decode(eps));

        // score-function terms
        const double score_m = (z / sigma) * r;
        const double score_s = ((z * z - 1.0) / sigma) * dsig * r;

        // common-random-number finite differences of the return
        const double fd_m = (bandit.reward(bandit.decode(mean + fd_step + sigma * z)) -
                             bandit.reward(bandit.decode(mean - fd_step + sigma * z))) /
                            (2.0 * fd_step);
        const double fd_s = (bandit.reward(bandit.decode(mean + sig_up * z)) -
                             bandit.reward(bandit.decode(mean + sig_dn * z))) /
                            (2.0 * fd_step);

        sum_sm += score_m;
        sum_ss += score_s;
        sum_fm += fd_m;
        sum_fs += fd_s;
        const double dm = score_m - fd_m;
        const double ds = score_s - fd_s;
        sum_dm += dm;
        sumsq_dm += dm * dm;
        sum_ds += ds;
        sumsq_ds += ds * ds;
    }

    const double n = static_cast<double>(n_samples);
    rep.score_mean = sum_sm / n;
    rep.score_scale = sum_ss / n;
    rep.fd_mean = sum_fm / n;
    rep.fd_scale = sum_fs / n;

    auto zscore = [&](double sum_d, double sumsq_d) {
        const double md = sum_d / n;
        const double var = std::max(0.0, sumsq_d / n - md * md);
        const double se = std::sqrt(var / n);
        if (se == 0.0) return 0.0;
        return md / se;
    };
    rep.z_mean = zscore(sum_dm, sumsq_dm);
    rep.z_scale = zscore(sum_ds, sumsq_ds);
    return rep;
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
    double acc = 0.0;
    for (size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
    return 0.5 * acc;
}

BoundReport check_performance_bound(const TabularMdp& mdp, const Matrix& latent_policy,
                                    const Matrix& latent_policy_prime) {
    const ExactEval old_eval = exact_eval(mdp, latent_policy);
    const ExactEval new_eval = exact_eval(mdp, latent_policy_prime);
    const int S = mdp.n_states, A = mdp.n_actions, B = mdp.n_latent_bins;

    BoundReport rep;
    rep.lhs = new_eval.J - old_eval.J;
    rep.constant = 2.0 * mdp.gamma / ((1.0 - mdp.gamma) * (1.0 - mdp.gamma));

    rep.a_max = 0.0;
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) rep.a_max = std::max(rep.a_max, std::abs(old_eval.A(s, a)));

    // Surrogate under the *old* visitation: the quantity an update can
    // actually estimate from on-policy data.
    double surrogate = 0.0;
    double delta = 0.0;
    double tv_push_mean = 0.0;
    for (int s = 0; s < S; ++s) {
        double adv_term = 0.0;
        for (int b = 0; b < B; ++b)
            adv_term += latent_policy_prime(s, b) * old_eval.A(s, mdp.decoder_table[s][b]);
        surrogate += old_eval.visitation[s] * adv_term;

        std::vector<double> lp(B), lq(B);
        for (int b = 0; b < B; ++b) {
            lp[b] = latent_policy_prime(s, b);
            lq[b] = latent_policy(s, b);
        }
        delta += old_eval.visitation[s] * total_variation(lp, lq);

        std::vector<double> ap(A), aq(A);
        for (int a = 0; a < A; ++a) {
            ap[a] = new_eval.action_policy(s, a);
            aq[a] = old_eval.action_policy(s, a);
        }
        tv_push_mean += old_eval.visitation[s] * total_variation(ap, aq);
    }
    rep.surrogate = surrogate / (1.0 - mdp.gamma);
    rep.delta_tv = delta;
    rep.slack = rep.lhs - rep.surrogate + rep.constant * rep.a_max * rep.delta_tv;

    rep.visit_shift = 0.0;
    for (int s = 0; s < S; ++s)
        rep.visit_shift += std::abs(new_eval.visitation[s] - old_eval.visitation[s]);
    rep.visit_shift_bound = (2.0 * mdp.gamma / (1.0 - mdp.gamma)) * tv_push_mean;
    return rep;
}

TvPair check_tv_data_processing(const std::vector<double>& p, const std::vector<double>& q,
                                const std::vector<int>& decoder_table, int n_actions) {
    if (p.size() != q.size() || p.size() != decoder_table.size())
        throw std::invalid_argument("check_tv_data_processing: size mismatch");
    TvPair out;
    out.tv_latent = total_variation(p, q);
    std::vector<double> push_p(n_actions, 0.0), push_q(n_actions, 0.0);
    for (size_t b = 0; b < p.size(); ++b) {
        push_p[decoder_table[b]] += p[b];
        push_q[decoder_table[b]] += q[b];
    }
    out.tv_action = total_variation(push_p, push_q);
    return out;
}

namespace {

// Perturbs a row-stochastic policy multiplicatively.
Matrix perturb_policy(const Matrix& pol, double strength, RngStream& stream) {
    Matrix out = pol;
    for (int s = 0; s < pol.rows(); ++s) {
        double total = 0.0;
        for (int b = 0; b < pol.cols(); ++b) {
            out(s, b) = pol(s, b) * std::exp(strength * stream.next_normal());
            total += out(s, b);
        }
        for (int b = 0; b < pol.cols(); ++b) out(s, b) /= total;
    }
    return out;
}

// Monte-Carlo discounted return from the initial distribution.
double mc_return(const TabularMdp& mdp, const Matrix& latent_policy, int episodes,
                 int episode_len, RngStream& stream, double* se_out) {
    const ExactEval ev = exact_eval(mdp, latent_policy);
    double sum = 0.0, sumsq = 0.0;
    for (int ep = 0; ep < episodes; ++ep) {
        double u = stream.next_uniform();
        int s = 0;
        for (; s < mdp.n_states - 1; ++s) {
            if (u < mdp.initial_dist[s]) break;
            u -= mdp.initial_dist[s];
        }
        double g = 0.0, disc = 1.0;
        for (int t = 0; t < episode_len; ++t) {
            double ua = stream.next_uniform();
            int a = 0;
            for (; a < mdp.n_actions - 1; ++a) {
                if (ua < ev.action_policy(s, a)) break;
                ua -= ev.action_policy(s, a);
            }
            g += disc * mdp.rewards(s, a);
            disc *= mdp.gamma;
            double us = stream.next_uniform();
            int s2 = 0;
            for (; s2 < mdp.n_states - 1; ++s2) {
                if (us < mdp.transitions[s][a][s2]) break;
                us -= mdp.transitions[s][a][s2];
            }
            s = s2;
        }
        sum += g;
        sumsq += g * g;
    }
    const double n = episodes;
    const double mean = sum / n;
    const double var = std::max(0.0, sumsq / n - mean * mean);
    if (se_out) *se_out = std::sqrt(var / n);
    return mean;
}

}  // namespace

nlohmann::json run_verification_suite(uint64_t seed) {
    nlohmann::json checks = nlohmann::json::object();
    bool all_passed = true;
    auto record = [&](const std::string& name, bool passed, nlohmann::json values) {
        values["passed"] = passed;
        checks[name] = values;
        all_passed = all_passed && passed;
    };

    // geometric series: single state, reward 1, gamma 0.9
    {
        TabularMdp mdp;
        mdp.n_states = 1;
        mdp.n_actions = 1;
        mdp.n_latent_bins = 1;
        mdp.gamma = 0.9;
        mdp.transitions = {{{1.0}}};
        mdp.rewards = Matrix(1, 1, 1.0);
        mdp.decoder_table = {{0}};
        mdp.initial_dist = {1.0};
        const ExactEval ev = exact_eval(mdp, Matrix(1, 1, 1.0));
        record("exact_eval_geometric_series", std::abs(ev.J - 10.0) < 1e-9, {{"J", ev.J}});
    }

    // symmetric two-state chain: uniform policy has equal values
    {
        TabularMdp mdp;
        mdp.n_states = 2;
        mdp.n_actions = 2;
        mdp.n_latent_bins = 2;
        mdp.gamma = 0.95;
        mdp.transitions = {{{1.0, 0.0}, {0.0, 1.0}}, {{0.0, 1.0}, {1.0, 0.0}}};
        mdp.rewards = Matrix(2, 2);
        mdp.rewards(0, 0) = 0.2;
        mdp.rewards(0, 1) = 0.7;
        mdp.rewards(1, 0) = 0.2;
        mdp.rewards(1, 1) = 0.7;
        mdp.decoder_table = {{0, 1}, {0, 1}};
        mdp.initial_dist = {0.5, 0.5};
        const ExactEval ev = exact_eval(mdp, Matrix(2, 2, 0.5));
        record("exact_eval_symmetric_chain", std::abs(ev.V[0] - ev.V[1]) < 1e-12,
               {{"V0", ev.V[0]}, {"V1", ev.V[1]}});
    }

    // exact J vs Monte-Carlo rollout estimate
    {
        RngStream stream(seed, 301);
        const TabularMdp mdp = random_mdp(4, 3, 5, 0.9, stream);
        const Matrix pol = random_latent_policy(4, 5, stream);
        const double j_exact = exact_eval(mdp, pol).J;
        double se = 0.0;
        RngStream mc(seed, 302);
        const double j_mc = mc_return(mdp, pol, 3000, 300, mc, &se);
        record("exact_eval_mc_consistency", std::abs(j_exact - j_mc) < 3.0 * se,
               {{"J_exact", j_exact}, {"J_mc", j_mc}, {"se", se}});
    }

    // performance-difference identity on random instances
    {
        RngStream stream(seed, 303);
        double worst = 0.0;
        for (int i = 0; i < 20; ++i) {
            const TabularMdp mdp = random_mdp(3 + static_cast<int>(stream.next_below(3)), 3, 4,
                                              0.5 + 0.45 * stream.next_uniform(), stream);
            const Matrix pol = random_latent_policy(mdp.n_states, 4, stream);
            const Matrix pol2 = perturb_policy(pol, 0.5, stream);
            const ExactEval e1 = exact_eval(mdp, pol);
            const ExactEval e2 = exact_eval(mdp, pol2);
            double rhs = 0.0;
            for (int s = 0; s < mdp.n_states; ++s) {
                double adv = 0.0;
                for (int a = 0; a < mdp.n_actions; ++a)
                    adv += e2.action_policy(s, a) * e1.A(s, a);
                rhs += e2.visitation[s] * adv;
            }
            rhs /= (1.0 - mdp.gamma);
            worst = std::max(worst, std::abs((e2.J - e1.J) - rhs));
        }
        record("performance_difference_identity", worst < 1e-10, {{"max_abs_residual", worst}});
    }

    // Lemma 1, trivial case: zero reward means a zero estimator
    {
        GaussianBandit bandit;
        bandit.decode = [](double e) { return e * e * e; };
        bandit.reward = [](double) { return 0.0; };
        RngStream stream(seed, 304);
        const GradientCheckReport rep = check_unbiased_gradient(bandit, 0.3, 0.2, 10000, stream);
        record("lemma1_zero_advantage", rep.score_mean == 0.0 && rep.score_scale == 0.0,
               {{"score_mean", rep.score_mean}, {"score_scale", rep.score_scale}});
    }

    // Lemma 1, identity decoder: term-for-term the classical estimator
    {
        GaussianBandit bandit;
        bandit.decode = [](double e) { return e; };
        bandit.reward = [](double a) { return -a * a; };
        RngStream s1(seed, 305), s2(seed, 305);
        const double mu = 0.2, prescale = 0.1;
        const GradientCheckReport rep = check_unbiased_gradient(bandit, mu, prescale, 2000, s1);
        const double sigma = softplus(prescale);
        const double dsig = 1.0 / (1.0 + std::exp(-prescale));
        double classical_mean = 0.0, classical_scale = 0.0;
        for (int i = 0; i < 2000; ++i) {
            const double z = s2.next_normal();
            const double eps = mu + sigma * z;
            const double r = -eps * eps;
            classical_mean += (z / sigma) * r;
            classical_scale += ((z * z - 1.0) / sigma) * dsig * r;
        }
        classical_mean /= 2000.0;
        classical_scale /= 2000.0;
        record("lemma1_identity_decoder_equivalence",
               rep.score_mean == classical_mean && rep.score_scale == classical_scale,
               {{"score_mean", rep.score_mean}, {"classical_mean", classical_mean}});
    }

    // Lemma 1, cubic decoder bandit with paired z-test
    {
        GaussianBandit bandit;
        bandit.decode = [](double e) { return e * e * e; };
        bandit.reward = [](double a) { return -a * a; };
        RngStream stream(seed, 306);
        const GradientCheckReport rep =
            check_unbiased_gradient(bandit, 0.3, softplus_inverse(1.0), 1000000, stream);
        record("lemma1_cubic_bandit", std::abs(rep.z_mean) < 3.0 && std::abs(rep.z_scale) < 3.0,
               {{"z_mean", rep.z_mean},
                {"z_scale", rep.z_scale},
                {"score_mean", rep.score_mean},
                {"fd_mean", rep.fd_mean}});
    }

    // Lemma 2, trivial identity pair
    {
        RngStream stream(seed, 307);
        const TabularMdp mdp = random_mdp(4, 3, 5, 0.9, stream);
        const Matrix pol = random_latent_policy(4, 5, stream);
        const BoundReport rep = check_performance_bound(mdp, pol, pol);
        record("lemma2_trivial_identity",
               rep.delta_tv == 0.0 && std::abs(rep.lhs) < 1e-12 &&
                   std::abs(rep.surrogate) < 1e-12 && std::abs(rep.slack) < 1e-9,
               {{"lhs", rep.lhs}, {"surrogate", rep.surrogate}, {"delta", rep.delta_tv}});
        record("lemma2_constant_closed_form", std::abs(rep.constant - 180.0) < 1e-9,
               {{"C", rep.constant}});
    }

    // Lemma 2 over random pairs, plus the visitation-shift inequality
    {
        RngStream stream(seed, 308);
        double min_slack = 1e18, worst_shift = -1e18;
        for (int i = 0; i < 200; ++i) {
            const int S = 2 + static_cast<int>(stream.next_below(4));
            const TabularMdp mdp =
                random_mdp(S, 3, 4, 0.5 + 0.45 * stream.next_uniform(), stream);
            const Matrix pol = random_latent_policy(S, 4, stream);
            const Matrix pol2 = perturb_policy(pol, 0.3 + stream.next_uniform(), stream);
            const BoundReport rep = check_performance_bound(mdp, pol, pol2);
            min_slack = std::min(min_slack, rep.slack);
            worst_shift = std::max(worst_shift, rep.visit_shift - rep.visit_shift_bound);
        }
        record("lemma2_random_instances", min_slack >= -1e-9, {{"min_slack", min_slack}});
        record("visitation_shift_bound", worst_shift <= 1e-10, {{"max_violation", worst_shift}});
    }

    // data-processing inequality for total variation
    {
        RngStream stream(seed, 309);
        const std::vector<int> table = {0, 1, 2, 0, 1, 2, 0, 1};
        const std::vector<double> p = normalized_uniform(8, stream);
        TvPair same = check_tv_data_processing(p, p, table, 3);
        record("dpi_trivial_equal", same.tv_latent == 0.0 && same.tv_action == 0.0,
               {{"tv_latent", same.tv_latent}});

        const std::vector<int> constant_table(8, 2);
        const std::vector<double> q = normalized_uniform(8, stream);
        TvPair collapsed = check_tv_data_processing(p, q, constant_table, 3);
        record("dpi_constant_decoder", collapsed.tv_action < 1e-12 && collapsed.tv_latent > 0.0,
               {{"tv_latent", collapsed.tv_latent}, {"tv_action", collapsed.tv_action}});

        double worst = -1e18;
        for (int i = 0; i < 500; ++i) {
            std::vector<int> tbl(8);
            const int n_actions = 2 + static_cast<int>(stream.next_below(5));
            for (int& t : tbl) t = static_cast<int>(stream.next_below(n_actions));
            const std::vector<double> a = normalized_uniform(8, stream);
            const std::vector<double> b = normalized_uniform(8, stream);
            const TvPair tv = check_tv_data_processing(a, b, tbl, n_actions);
            worst = std::max(worst, tv.tv_action - tv.tv_latent);
        }
        record("dpi_random_triples", worst <= 1e-12, {{"max_violation", worst}});
    }

    nlohmann::json report;
    report["seed"] = seed;
    report["checks"] = checks;
    report["num_checks"] = checks.size();
    report["passed"] = all_passed;
    return report;
}

}  // namespace gorl
