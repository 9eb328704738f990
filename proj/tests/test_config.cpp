#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gorl/commands.hpp"
#include "gorl/config.hpp"
#include "gorl/errors.hpp"

using namespace gorl;

TEST_CASE("empty config yields the full defaults") {
    const RunConfig cfg = parse_config_text("");
    CHECK(cfg.gamma == 0.995);
    CHECK(cfg.lambda == 0.95);
    CHECK(cfg.entropy_coef == 0.01);
    CHECK(cfg.value_coef == 0.25);
    CHECK(cfg.kl_beta == 1e-3);
    CHECK(cfg.clip == 0.2);
    CHECK(cfg.ppo_epochs == 16);
    CHECK(cfg.minibatch == 1024);
    CHECK(cfg.lr == 1e-3);
    CHECK(cfg.horizon == 30);
    CHECK(cfg.decoder_lr == 3e-4);
    CHECK(cfg.decoder_batch == 8192);
    CHECK(cfg.decoder_epochs == std::vector<int>{50});
    CHECK(cfg.stage_budgets == std::vector<long>{200000, 200000, 100000, 100000});
    CHECK(cfg.bandwidth_factor == 0.8);
    CHECK(cfg.ode_steps == 10);
    CHECK(cfg.diffusion_steps == 10);
}

TEST_CASE("constraint violations name the key") {
    try {
        parse_config_text("gamma = 1.5\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("gamma") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config_text("clip = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("decoder = vae\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("env = CartPole\n"), ConfigError);
}

TEST_CASE("unknown keys and malformed values carry the line number") {
    try {
        parse_config_text("gamma = 0.9\nwat = 1\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 2") != std::string::npos);
        CHECK(msg.find("wat") != std::string::npos);
    }
    try {
        parse_config_text("minibatch = soon\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("minibatch") != std::string::npos);
    }
}

TEST_CASE("arrays, comments and broadcasting defaults") {
    const RunConfig cfg = parse_config_text(
        "# two-stage run\n"
        "stage_budgets = [512, 1024]\n"
        "decoder_epochs = [5]\n"
        "seed = 42   # trailing comment\n");
    CHECK(cfg.stage_budgets == std::vector<long>{512, 1024});
    CHECK(cfg.seed == 42);
    // reinit default follows the stage count
    CHECK(cfg.reinit_encoder == std::vector<bool>{true, true});

    const RunConfig explicit_flags = parse_config_text(
        "stage_budgets = [512, 1024]\n"
        "reinit_encoder = [true, false]\n");
    CHECK(explicit_flags.reinit_encoder == std::vector<bool>{true, false});

    CHECK_THROWS_AS(parse_config_text("stage_budgets = [512]\nreinit_encoder = [true, false]\n"),
                    ConfigError);
}

TEST_CASE("emitted config re-parses to an identical RunConfig") {
    RunConfig cfg = parse_config_text("");
    cfg.seed = 99;
    cfg.env = "TwoGoalPointMass";
    cfg.decoder = "diffusion";
    cfg.kl_beta = 5e-3;
    cfg.lr = 0.00012345678901234567;
    cfg.stage_budgets = {1000, 2000, 500};
    cfg.reinit_encoder = {true, false, true};
    cfg.analysis_state = "0.1,0.2,0,0";
    validate_config(cfg);

    const std::string text = emit_config(cfg);
    const RunConfig round = parse_config_text(text);
    CHECK(round == cfg);
}

TEST_CASE("cli error category mapping") {
    CHECK(run_cli_action([] {}) == 0);
    CHECK(run_cli_action([] { throw ConfigError("x"); }) == 2);
    CHECK(run_cli_action([] { throw NumericError("x"); }) == 3);
    CHECK(run_cli_action([] { throw IoError("x"); }) == 4);
    CHECK(run_cli_action([] { throw std::runtime_error("x"); }) == 1);
}

TEST_CASE("parse_config reads files and reports missing ones") {
    namespace fs = std::filesystem;
    const std::string path = fs::temp_directory_path() / "gorl_cfg_test.cfg";
    std::ofstream(path) << "seed = 7\nhorizon = 12\n";
    const RunConfig cfg = parse_config(path);
    CHECK(cfg.seed == 7);
    CHECK(cfg.horizon == 12);
    fs::remove(path);
    CHECK_THROWS_AS(parse_config(path), IoError);
}

TEST_CASE("train command writes metrics, checkpoints and summary") {
    namespace fs = std::filesystem;
    RunConfig cfg;
    cfg.env = "BimodalBandit";
    cfg.seed = 5;
    cfg.n_envs = 4;
    cfg.horizon = 8;
    cfg.ppo_epochs = 2;
    cfg.minibatch = 32;
    cfg.decoder = "fm";
    cfg.decoder_epochs = {5};
    cfg.decoder_batch = 64;
    cfg.stage_budgets = {64, 64};
    cfg.reinit_encoder = {true, true};
    cfg.eval_every = 2;
    cfg.eval_envs = 4;
    cfg.eval_episodes = 8;
    cfg.analysis_samples = 500;
    cfg.out_dir = (fs::temp_directory_path() / "gorl_cmd_train_test").string();
    fs::remove_all(cfg.out_dir);

    const TrainOutputs out = cmd_train(cfg);
    CHECK(fs::exists(out.metrics_path));
    CHECK(fs::exists(out.summary_path));
    CHECK(fs::exists(cfg.out_dir + "/" + checkpoint_filename(cfg.seed, 0)));
    CHECK(fs::exists(cfg.out_dir + "/" + checkpoint_filename(cfg.seed, 1)));
    CHECK(fs::exists(cfg.out_dir + "/density_final.csv"));
    CHECK(fs::exists(cfg.out_dir + "/curve_return.csv"));

    std::ifstream metrics(out.metrics_path);
    std::string header;
    std::getline(metrics, header);
    CHECK(header == "step,mean_return,value_loss,entropy,kl_to_prior,clip_frac,decoder_loss,stage");
    // rows monotone in step
    long prev = 0;
    std::string line;
    int rows = 0;
    while (std::getline(metrics, line)) {
        const long step = std::stol(line.substr(0, line.find(',')));
        CHECK(step > prev);
        prev = step;
        ++rows;
    }
    CHECK(rows > 0);
    fs::remove_all(cfg.out_dir);
}
