#include "gorl/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gorl/errors.hpp"

namespace gorl {

namespace {

constexpr double kPi = std::numbers::pi;

// TwoGoalPointMass constants: both greedy goal choices are reachable
// within the 60-step default episode.
constexpr double kPosStep = 0.05;
constexpr double kVelDecay = 0.9;
constexpr double kVelGain = 0.1;
constexpr double kGoalX = 0.8;
constexpr double kRewardSharpness = 8.0;

// Pendulum constants (undamped, torque-limited).
constexpr double kGravity = 10.0;
constexpr double kMass = 1.0;
constexpr double kLength = 1.0;
constexpr double kDt = 0.05;
constexpr double kMaxTorque = 2.0;
constexpr double kMaxOmega = 8.0;

double clip(double x, double lo, double hi) { return std::min(hi, std::max(lo, x)); }

double angle_normalize(double th) {
    double a = std::fmod(th + kPi, 2.0 * kPi);
    if (a < 0) a += 2.0 * kPi;
    return a - kPi;
}

}  // namespace

std::string env_name(EnvName name) {
    switch (name) {
        case EnvName::TwoGoalPointMass: return "TwoGoalPointMass";
        case EnvName::PendulumSwingUp: return "PendulumSwingUp";
        case EnvName::BimodalBandit: return "BimodalBandit";
    }
    throw std::logic_error("unknown env");
}

EnvName env_from_name(const std::string& name) {
    if (name == "TwoGoalPointMass") return EnvName::TwoGoalPointMass;
    if (name == "PendulumSwingUp") return EnvName::PendulumSwingUp;
    if (name == "BimodalBandit") return EnvName::BimodalBandit;
    throw ConfigError("unknown environment name: " + name);
}

EnvSpec make_env_spec(EnvName name, int episode_length_override) {
    EnvSpec spec;
    spec.name = name;
    switch (name) {
        case EnvName::TwoGoalPointMass:
            spec.obs_dim = 4;
            spec.action_dim = 2;
            spec.episode_length = 60;
            break;
        case EnvName::PendulumSwingUp:
            spec.obs_dim = 3;
            spec.action_dim = 1;
            spec.episode_length = 200;
            break;
        case EnvName::BimodalBandit:
            spec.obs_dim = 1;
            spec.action_dim = 1;
            spec.episode_length = 1;
            break;
    }
    if (episode_length_override > 0) spec.episode_length = episode_length_override;
    return spec;
}

EnvState env_reset(const EnvSpec& spec, RngStream& stream) {
    EnvState s;
    s.t = 0;
    switch (spec.name) {
        case EnvName::TwoGoalPointMass:
            s.phys = {(2.0 * stream.next_uniform() - 1.0) * 0.1,
                      (2.0 * stream.next_uniform() - 1.0) * 0.1, 0.0, 0.0};
            break;
        case EnvName::PendulumSwingUp:
            s.phys = {(2.0 * stream.next_uniform() - 1.0) * kPi, 0.0};
            break;
        case EnvName::BimodalBandit:
            s.phys = {2.0 * stream.next_uniform() - 1.0};
            break;
    }
    return s;
}

std::vector<double> env_observe(const EnvSpec& spec, const EnvState& state) {
    switch (spec.name) {
        case EnvName::TwoGoalPointMass:
        case EnvName::BimodalBandit:
            return state.phys;
        case EnvName::PendulumSwingUp:
            return {std::cos(state.phys[0]), std::sin(state.phys[0]), state.phys[1]};
    }
    throw std::logic_error("unknown env");
}

StepResult env_step(const EnvSpec& spec, const EnvState& state, const std::vector<double>& action) {
    if (static_cast<int>(action.size()) != spec.action_dim)
        throw std::invalid_argument("env_step: action dim mismatch");
    for (double x : state.phys)
        if (!std::isfinite(x)) throw NumericError("env_step: non-finite state");

    StepResult out;
    out.next = state;
    out.next.t = state.t + 1;
    out.terminal = out.next.t >= spec.episode_length;

    switch (spec.name) {
        case EnvName::TwoGoalPointMass: {
            const double ax = clip(action[0], -1.0, 1.0);
            const double ay = clip(action[1], -1.0, 1.0);
            const double px = state.phys[0], py = state.phys[1];
            const double vx = state.phys[2], vy = state.phys[3];
            auto goal_reward = [&](double gx, double gy) {
                const double dx = px - gx, dy = py - gy;
                return std::exp(-kRewardSharpness * (dx * dx + dy * dy));
            };
            out.reward = std::max(goal_reward(kGoalX, 0.0), goal_reward(-kGoalX, 0.0));
            out.next.phys[0] = px + kPosStep * vx;
            out.next.phys[1] = py + kPosStep * vy;
            out.next.phys[2] = kVelDecay * vx + kVelGain * ax;
            out.next.phys[3] = kVelDecay * vy + kVelGain * ay;
            break;
        }
        case EnvName::PendulumSwingUp: {
            const double u = kMaxTorque * clip(action[0], -1.0, 1.0);
            const double th = state.phys[0], om = state.phys[1];
            const double a_norm = angle_normalize(th);
            out.reward = -(a_norm * a_norm + 0.1 * om * om + 0.001 * u * u);
            double om2 = om + (3.0 * kGravity / (2.0 * kLength) * std::sin(th) +
                               3.0 / (kMass * kLength * kLength) * u) *
                                  kDt;
            om2 = clip(om2, -kMaxOmega, kMaxOmega);
            out.next.phys[0] = th + om2 * kDt;
            out.next.phys[1] = om2;
            break;
        }
        case EnvName::BimodalBandit: {
            const double a = clip(action[0], -1.0, 1.0);
            const double c = state.phys[0];
            const double d1 = a - 0.7 * c;
            const double d2 = a + 0.7 * c;
            out.reward = std::exp(-kRewardSharpness * d1 * d1) +
                         std::exp(-kRewardSharpness * d2 * d2);
            break;
        }
    }
    return out;
}

double scale_reward(double r) { return 10.0 * r; }

void NormalizerState::init(int dim) {
    count = 0.0;
    mean.assign(dim, 0.0);
    m2.assign(dim, 0.0);
}

void NormalizerState::update(const std::vector<double>& obs) {
    count += 1.0;
    for (size_t i = 0; i < mean.size(); ++i) {
        const double delta = obs[i] - mean[i];
        mean[i] += delta / count;
        m2[i] += delta * (obs[i] - mean[i]);
    }
}

std::vector<double> NormalizerState::normalize(const std::vector<double>& obs) const {
    std::vector<double> out(obs.size());
    for (size_t i = 0; i < obs.size(); ++i) {
        const double var = count > 0 ? m2[i] / count : 0.0;
        out[i] = (obs[i] - mean[i]) / std::sqrt(var + 1e-8);
    }
    return out;
}

}  // namespace gorl
