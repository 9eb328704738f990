#include "gorl/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "gorl/errors.hpp"

namespace gorl {

PpoConfig RunConfig::ppo() const {
    PpoConfig cfg;
    cfg.clip = clip;
    cfg.gamma = gamma;
    cfg.lam = lambda;
    cfg.value_coef = value_coef;
    cfg.entropy_coef = entropy_coef;
    cfg.kl_beta = kl_beta;
    cfg.epochs = ppo_epochs;
    cfg.minibatch = minibatch;
    cfg.lr = lr;
    cfg.horizon = horizon;
    cfg.kl_l2_form = kl_form == "l2";
    return cfg;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

struct Setter {
    std::function<void(const std::string& value, int line)> apply;
};

[[noreturn]] void fail(const std::string& key, int line, const std::string& why) {
    throw ConfigError("config line " + std::to_string(line) + ": key '" + key + "': " + why);
}

double parse_real(const std::string& key, const std::string& v, int line) {
    try {
        size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) fail(key, line, "expected a real number, got '" + v + "'");
        return x;
    } catch (const ConfigError&) {
        throw;
    } catch (...) {
        fail(key, line, "expected a real number, got '" + v + "'");
    }
}

long parse_int(const std::string& key, const std::string& v, int line) {
    long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        fail(key, line, "expected an integer, got '" + v + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v, int line) {
    if (v == "true") return true;
    if (v == "false") return false;
    fail(key, line, "expected true/false, got '" + v + "'");
}

std::vector<std::string> parse_array_items(const std::string& key, const std::string& v,
                                           int line) {
    if (v.size() < 2 || v.front() != '[' || v.back() != ']')
        fail(key, line, "expected an array like [a, b, c], got '" + v + "'");
    std::vector<std::string> items;
    std::string body = v.substr(1, v.size() - 2);
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) items.push_back(item);
    }
    return items;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::map<std::string, Setter> setters;

    auto real_key = [&](const std::string& name, double* slot) {
        setters[name] = {[name, slot](const std::string& v, int line) {
            *slot = parse_real(name, v, line);
        }};
    };
    auto int_key = [&](const std::string& name, int* slot) {
        setters[name] = {[name, slot](const std::string& v, int line) {
            *slot = static_cast<int>(parse_int(name, v, line));
        }};
    };
    auto long_key = [&](const std::string& name, long* slot) {
        setters[name] = {[name, slot](const std::string& v, int line) {
            *slot = parse_int(name, v, line);
        }};
    };
    auto bool_key = [&](const std::string& name, bool* slot) {
        setters[name] = {[name, slot](const std::string& v, int line) {
            *slot = parse_bool(name, v, line);
        }};
    };
    auto string_key = [&](const std::string& name, std::string* slot) {
        setters[name] = {[name, slot](const std::string& v, int) { *slot = v; }};
    };

    string_key("env", &cfg.env);
    setters["seed"] = {[&cfg](const std::string& v, int line) {
        cfg.seed = static_cast<uint64_t>(parse_int("seed", v, line));
    }};
    int_key("n_envs", &cfg.n_envs);
    int_key("horizon", &cfg.horizon);
    int_key("episode_length", &cfg.episode_length);
    int_key("eval_every", &cfg.eval_every);
    int_key("eval_envs", &cfg.eval_envs);
    int_key("eval_episodes", &cfg.eval_episodes);
    string_key("out_dir", &cfg.out_dir);

    real_key("clip", &cfg.clip);
    real_key("gamma", &cfg.gamma);
    real_key("lambda", &cfg.lambda);
    real_key("value_coef", &cfg.value_coef);
    real_key("entropy_coef", &cfg.entropy_coef);
    real_key("kl_beta", &cfg.kl_beta);
    int_key("ppo_epochs", &cfg.ppo_epochs);
    int_key("minibatch", &cfg.minibatch);
    real_key("lr", &cfg.lr);
    string_key("kl_form", &cfg.kl_form);

    string_key("decoder", &cfg.decoder);
    int_key("ode_steps", &cfg.ode_steps);
    int_key("diffusion_steps", &cfg.diffusion_steps);
    setters["decoder_epochs"] = {[&cfg](const std::string& v, int line) {
        cfg.decoder_epochs.clear();
        for (const std::string& item : parse_array_items("decoder_epochs", v, line))
            cfg.decoder_epochs.push_back(static_cast<int>(parse_int("decoder_epochs", item, line)));
    }};
    real_key("decoder_lr", &cfg.decoder_lr);
    int_key("decoder_batch", &cfg.decoder_batch);
    bool_key("decoder_from_scratch", &cfg.decoder_from_scratch);
    real_key("filter_quantile", &cfg.filter_quantile);
    bool_key("cumulative_buffer", &cfg.cumulative_buffer);

    setters["stage_budgets"] = {[&cfg](const std::string& v, int line) {
        cfg.stage_budgets.clear();
        for (const std::string& item : parse_array_items("stage_budgets", v, line))
            cfg.stage_budgets.push_back(parse_int("stage_budgets", item, line));
    }};
    bool reinit_explicit = false;
    setters["reinit_encoder"] = {[&cfg, &reinit_explicit](const std::string& v, int line) {
        reinit_explicit = true;
        cfg.reinit_encoder.clear();
        for (const std::string& item : parse_array_items("reinit_encoder", v, line))
            cfg.reinit_encoder.push_back(parse_bool("reinit_encoder", item, line));
    }};
    bool_key("reinit_trunk", &cfg.reinit_trunk);
    bool_key("reset_critic", &cfg.reset_critic);

    real_key("bandwidth_factor", &cfg.bandwidth_factor);
    int_key("kde_grid_points", &cfg.kde_grid_points);
    real_key("mode_prominence", &cfg.mode_prominence);
    real_key("smoothing_sigma", &cfg.smoothing_sigma);
    int_key("analysis_samples", &cfg.analysis_samples);
    string_key("analysis_state", &cfg.analysis_state);
    long_key("study_budget", &cfg.study_budget);

    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end())
            throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key +
                              "'");
        it->second.apply(value, lineno);
    }

    // The warm-start default follows the stage count unless set explicitly.
    if (!reinit_explicit) cfg.reinit_encoder.assign(cfg.stage_budgets.size(), true);

    validate_config(cfg);
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

void validate_config(const RunConfig& cfg) {
    auto require = [](bool ok, const std::string& key, const std::string& why) {
        if (!ok) throw ConfigError("config constraint violated for '" + key + "': " + why);
    };
    env_from_name(cfg.env);            // throws on bad names
    decoder_kind_from_name(cfg.decoder);
    require(cfg.n_envs >= 1, "n_envs", "must be >= 1");
    require(cfg.horizon >= 1, "horizon", "must be >= 1");
    require(cfg.episode_length >= 0, "episode_length", "must be >= 0");
    require(cfg.eval_every >= 1, "eval_every", "must be >= 1");
    require(cfg.eval_envs >= 1, "eval_envs", "must be >= 1");
    require(cfg.eval_episodes >= 1, "eval_episodes", "must be >= 1");
    require(cfg.gamma >= 0.0 && cfg.gamma <= 1.0, "gamma", "must lie in [0, 1]");
    require(cfg.lambda >= 0.0 && cfg.lambda <= 1.0, "lambda", "must lie in [0, 1]");
    require(cfg.clip > 0.0, "clip", "must be > 0");
    require(cfg.value_coef >= 0.0, "value_coef", "must be >= 0");
    require(cfg.entropy_coef >= 0.0, "entropy_coef", "must be >= 0");
    require(cfg.kl_beta >= 0.0, "kl_beta", "must be >= 0");
    require(cfg.ppo_epochs >= 1, "ppo_epochs", "must be >= 1");
    require(cfg.minibatch >= 1, "minibatch", "must be >= 1");
    require(cfg.lr > 0.0, "lr", "must be > 0");
    require(cfg.kl_form == "closed" || cfg.kl_form == "l2", "kl_form", "must be closed or l2");
    require(cfg.ode_steps >= 1, "ode_steps", "must be >= 1");
    require(cfg.diffusion_steps >= 1, "diffusion_steps", "must be >= 1");
    require(!cfg.decoder_epochs.empty(), "decoder_epochs", "must not be empty");
    for (int e : cfg.decoder_epochs)
        require(e >= 0, "decoder_epochs", "entries must be >= 0");
    require(cfg.decoder_lr > 0.0, "decoder_lr", "must be > 0");
    require(cfg.decoder_batch >= 1, "decoder_batch", "must be >= 1");
    require(cfg.filter_quantile >= 0.0 && cfg.filter_quantile < 1.0, "filter_quantile",
            "must lie in [0, 1)");
    require(!cfg.stage_budgets.empty(), "stage_budgets", "must not be empty");
    for (long b : cfg.stage_budgets)
        require(b > 0, "stage_budgets", "entries must be positive");
    require(cfg.reinit_encoder.size() == 1 ||
                cfg.reinit_encoder.size() == cfg.stage_budgets.size(),
            "reinit_encoder", "length must be 1 or match stage_budgets");
    require(cfg.decoder_epochs.size() == 1 ||
                cfg.decoder_epochs.size() + 1 == cfg.stage_budgets.size() ||
                cfg.decoder_epochs.size() == cfg.stage_budgets.size(),
            "decoder_epochs", "length must be 1 or match the stage boundaries");
    require(cfg.bandwidth_factor > 0.0, "bandwidth_factor", "must be > 0");
    require(cfg.kde_grid_points >= 8, "kde_grid_points", "must be >= 8");
    require(cfg.mode_prominence >= 0.0 && cfg.mode_prominence <= 1.0, "mode_prominence",
            "must lie in [0, 1]");
    require(cfg.smoothing_sigma >= 0.0, "smoothing_sigma", "must be >= 0");
    require(cfg.analysis_samples >= 2, "analysis_samples", "must be >= 2");
    require(cfg.study_budget >= 1, "study_budget", "must be >= 1");
}

std::string emit_config(const RunConfig& cfg) {
    std::ostringstream out;
    auto emit_int_array = [&](const std::string& key, const auto& values) {
        out << key << " = [";
        for (size_t i = 0; i < values.size(); ++i) out << (i ? ", " : "") << values[i];
        out << "]\n";
    };

    out << "env = " << cfg.env << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "n_envs = " << cfg.n_envs << "\n";
    out << "horizon = " << cfg.horizon << "\n";
    out << "episode_length = " << cfg.episode_length << "\n";
    out << "eval_every = " << cfg.eval_every << "\n";
    out << "eval_envs = " << cfg.eval_envs << "\n";
    out << "eval_episodes = " << cfg.eval_episodes << "\n";
    out << "out_dir = " << cfg.out_dir << "\n";
    out << "clip = " << format_double(cfg.clip) << "\n";
    out << "gamma = " << format_double(cfg.gamma) << "\n";
    out << "lambda = " << format_double(cfg.lambda) << "\n";
    out << "value_coef = " << format_double(cfg.value_coef) << "\n";
    out << "entropy_coef = " << format_double(cfg.entropy_coef) << "\n";
    out << "kl_beta = " << format_double(cfg.kl_beta) << "\n";
    out << "ppo_epochs = " << cfg.ppo_epochs << "\n";
    out << "minibatch = " << cfg.minibatch << "\n";
    out << "lr = " << format_double(cfg.lr) << "\n";
    out << "kl_form = " << cfg.kl_form << "\n";
    out << "decoder = " << cfg.decoder << "\n";
    out << "ode_steps = " << cfg.ode_steps << "\n";
    out << "diffusion_steps = " << cfg.diffusion_steps << "\n";
    emit_int_array("decoder_epochs", cfg.decoder_epochs);
    out << "decoder_lr = " << format_double(cfg.decoder_lr) << "\n";
    out << "decoder_batch = " << cfg.decoder_batch << "\n";
    out << "decoder_from_scratch = " << (cfg.decoder_from_scratch ? "true" : "false") << "\n";
    out << "filter_quantile = " << format_double(cfg.filter_quantile) << "\n";
    out << "cumulative_buffer = " << (cfg.cumulative_buffer ? "true" : "false") << "\n";
    emit_int_array("stage_budgets", cfg.stage_budgets);
    out << "reinit_encoder = [";
    for (size_t i = 0; i < cfg.reinit_encoder.size(); ++i)
        out << (i ? ", " : "") << (cfg.reinit_encoder[i] ? "true" : "false");
    out << "]\n";
    out << "reinit_trunk = " << (cfg.reinit_trunk ? "true" : "false") << "\n";
    out << "reset_critic = " << (cfg.reset_critic ? "true" : "false") << "\n";
    out << "bandwidth_factor = " << format_double(cfg.bandwidth_factor) << "\n";
    out << "kde_grid_points = " << cfg.kde_grid_points << "\n";
    out << "mode_prominence = " << format_double(cfg.mode_prominence) << "\n";
    out << "smoothing_sigma = " << format_double(cfg.smoothing_sigma) << "\n";
    out << "analysis_samples = " << cfg.analysis_samples << "\n";
    out << "analysis_state = " << cfg.analysis_state << "\n";
    out << "study_budget = " << cfg.study_budget << "\n";
    return out.str();
}

}  // namespace gorl
