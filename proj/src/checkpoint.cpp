#include "gorl/checkpoint.hpp"

#include <fstream>

#include "gorl/errors.hpp"

namespace gorl {

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const nlohmann::json& image) {
    const int rows = static_cast<int>(image.size());
    const int cols = rows > 0 ? static_cast<int>(image[0].size()) : 0;
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = image[i][j].get<double>();
    return m;
}

}  // namespace

nlohmann::json mlp_to_json(const Mlp& net) {
    nlohmann::json image;
    image["layer_dims"] = net.layer_dims;
    nlohmann::json acts = nlohmann::json::array();
    for (Activation a : net.activations) acts.push_back(activation_name(a));
    image["activations"] = acts;
    nlohmann::json weights = nlohmann::json::array();
    nlohmann::json biases = nlohmann::json::array();
    for (int k = 0; k < net.num_layers(); ++k) {
        weights.push_back(matrix_to_json(net.weights[k]));
        biases.push_back(matrix_to_json(net.biases[k]));
    }
    image["weights"] = std::move(weights);
    image["biases"] = std::move(biases);
    return image;
}

Mlp mlp_from_json(const nlohmann::json& image) {
    Mlp net;
    net.layer_dims = image.at("layer_dims").get<std::vector<int>>();
    for (const auto& name : image.at("activations"))
        net.activations.push_back(activation_from_name(name.get<std::string>()));
    for (const auto& w : image.at("weights")) net.weights.push_back(matrix_from_json(w));
    for (const auto& b : image.at("biases")) net.biases.push_back(matrix_from_json(b));
    if (net.weights.size() != net.activations.size() ||
        net.weights.size() + 1 != net.layer_dims.size())
        throw IoError("mlp_from_json: inconsistent network image");
    return net;
}

nlohmann::json checkpoint_to_json(const TrainState& state) {
    nlohmann::json image;
    image["version"] = 1;
    image["config"] = emit_config(state.cfg);
    image["cumulative_steps"] = state.cumulative_steps;
    image["stage"] = state.stage;
    image["updates"] = state.updates;
    image["eval_rounds"] = state.eval_rounds;
    image["last_decoder_loss"] = state.last_decoder_loss;

    nlohmann::json encoder;
    encoder["latent_dim"] = state.encoder.latent_dim;
    encoder["trunk"] = mlp_to_json(state.encoder.trunk);
    encoder["mean_head"] = mlp_to_json(state.encoder.mean_head);
    encoder["scale_head"] = mlp_to_json(state.encoder.scale_head);
    image["encoder"] = std::move(encoder);

    image["critic"] = mlp_to_json(state.critic);

    nlohmann::json dec;
    dec["kind"] = decoder_kind_name(state.decoder.kind);
    dec["ode_steps"] = state.decoder.n_ode_steps;
    dec["generative_ready"] = state.generative_decoder_ready;
    if (state.decoder.kind != DecoderKind::Identity) {
        dec["net"] = mlp_to_json(state.decoder.net);
        dec["alpha_bar"] = state.decoder.schedule.alpha_bar;
    }
    image["decoder"] = std::move(dec);

    nlohmann::json norm;
    norm["count"] = state.normalizer.count;
    norm["mean"] = state.normalizer.mean;
    norm["m2"] = state.normalizer.m2;
    image["normalizer"] = std::move(norm);

    nlohmann::json rng;
    rng["seed"] = state.cfg.seed;
    rng["env_counters"] = state.envs.stream_counters();
    rng["shuffle"] = state.shuffle_stream.counter();
    rng["decoder_train"] = state.decoder_train_stream.counter();
    rng["decoder_init"] = state.decoder_init_stream.counter();
    rng["reinit"] = state.reinit_stream.counter();
    image["rng"] = std::move(rng);

    image["recent_returns"] =
        std::vector<double>(state.recent_returns.begin(), state.recent_returns.end());
    return image;
}

TrainState checkpoint_from_json(const nlohmann::json& image) {
    const RunConfig cfg = parse_config_text(image.at("config").get<std::string>());
    TrainState state(cfg);

    state.cumulative_steps = image.at("cumulative_steps").get<long>();
    state.stage = image.at("stage").get<int>();
    state.updates = image.at("updates").get<long>();
    state.eval_rounds = image.at("eval_rounds").get<int>();
    state.last_decoder_loss = image.at("last_decoder_loss").get<double>();

    const nlohmann::json& enc = image.at("encoder");
    state.encoder.latent_dim = enc.at("latent_dim").get<int>();
    state.encoder.trunk = mlp_from_json(enc.at("trunk"));
    state.encoder.mean_head = mlp_from_json(enc.at("mean_head"));
    state.encoder.scale_head = mlp_from_json(enc.at("scale_head"));

    state.critic = mlp_from_json(image.at("critic"));

    const nlohmann::json& dec = image.at("decoder");
    const DecoderKind kind = decoder_kind_from_name(dec.at("kind").get<std::string>());
    state.generative_decoder_ready = dec.at("generative_ready").get<bool>();
    if (kind == DecoderKind::Identity) {
        state.decoder = make_decoder(DecoderKind::Identity, state.spec.obs_dim,
                                     state.spec.action_dim, {}, 1, 1, nullptr);
    } else {
        state.decoder.kind = kind;
        state.decoder.obs_dim = state.spec.obs_dim;
        state.decoder.action_dim = state.spec.action_dim;
        state.decoder.n_ode_steps = dec.at("ode_steps").get<int>();
        state.decoder.net = mlp_from_json(dec.at("net"));
        state.decoder.schedule.alpha_bar = dec.at("alpha_bar").get<std::vector<double>>();
    }

    const nlohmann::json& norm = image.at("normalizer");
    state.normalizer.count = norm.at("count").get<double>();
    state.normalizer.mean = norm.at("mean").get<std::vector<double>>();
    state.normalizer.m2 = norm.at("m2").get<std::vector<double>>();

    const nlohmann::json& rng = image.at("rng");
    state.envs.set_stream_counters(rng.at("env_counters").get<std::vector<uint64_t>>());
    state.shuffle_stream.set_counter(rng.at("shuffle").get<uint64_t>());
    state.decoder_train_stream.set_counter(rng.at("decoder_train").get<uint64_t>());
    state.decoder_init_stream.set_counter(rng.at("decoder_init").get<uint64_t>());
    state.reinit_stream.set_counter(rng.at("reinit").get<uint64_t>());

    // Optimizer moments restart; checkpoints freeze parameters, not the
    // optimizer trajectory.
    state.encoder_adam = make_adam(head_param_view(state.encoder), cfg.lr);
    state.critic_adam = make_adam(mlp_param_view(state.critic), cfg.lr);

    for (double r : image.at("recent_returns").get<std::vector<double>>())
        state.recent_returns.push_back(r);
    return state;
}

void save_checkpoint(const std::string& path, const TrainState& state) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out << checkpoint_to_json(state).dump(1) << "\n";
    if (!out) throw IoError("failed while writing checkpoint: " + path);
}

TrainState load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    nlohmann::json image;
    try {
        in >> image;
    } catch (const std::exception& e) {
        throw IoError("malformed checkpoint " + path + ": " + e.what());
    }
    return checkpoint_from_json(image);
}

}  // namespace gorl
