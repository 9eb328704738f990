#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gorl/commands.hpp"
#include "gorl/config.hpp"
#include "gorl/errors.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::string out;
    std::string env;
    std::string decoder;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "config file (flat key = value)");
    cmd->add_option("--seed", flags.seed, "run seed (overrides the config)");
    cmd->add_option("--out", flags.out, "output directory (overrides the config)");
    cmd->add_option("--env", flags.env,
                    "environment: TwoGoalPointMass | PendulumSwingUp | BimodalBandit");
    cmd->add_option("--decoder", flags.decoder, "decoder kind: identity | fm | diffusion");
}

gorl::RunConfig load_config(const CommonFlags& flags) {
    gorl::RunConfig cfg =
        flags.config_path.empty() ? gorl::RunConfig{} : gorl::parse_config(flags.config_path);
    if (flags.seed) cfg.seed = *flags.seed;
    if (!flags.out.empty()) cfg.out_dir = flags.out;
    if (!flags.env.empty()) cfg.env = flags.env;
    if (!flags.decoder.empty()) cfg.decoder = flags.decoder;
    gorl::validate_config(cfg);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gorl: latent-Gaussian policy optimization with generative decoders"};
    app.require_subcommand(1);

    CommonFlags train_flags;
    CLI::App* train = app.add_subcommand("train", "run staged training");
    add_common(train, train_flags);

    CommonFlags ablate_flags;
    std::vector<double> betas = {0.0, 1e-4, 5e-4, 1e-3, 5e-3, 1e-2};
    CLI::App* ablate = app.add_subcommand("ablate-beta", "sweep the KL-to-prior coefficient");
    add_common(ablate, ablate_flags);
    ablate->add_option("--betas", betas, "beta values to sweep");

    CommonFlags study_flags;
    std::string run_dir;
    CLI::App* study = app.add_subcommand(
        "stage-study", "retrain fresh encoders against saved decoder snapshots");
    add_common(study, study_flags);
    study->add_option("--run-dir", run_dir, "directory holding run_<seed>_stage<m>.json")
        ->required();

    uint64_t verify_seed = 12345;
    std::string verify_out = "runs/verify";
    CLI::App* verify = app.add_subcommand("verify", "run the numeric verification suite");
    verify->add_option("--seed", verify_seed, "suite seed");
    verify->add_option("--out", verify_out, "output directory for verify_report.json");

    std::string analyze_checkpoint, analyze_state, analyze_out = "runs/analysis",
                                                   analyze_tag = "policy";
    CLI::App* analyze = app.add_subcommand("analyze", "action-density analysis of a checkpoint");
    analyze->add_option("--checkpoint", analyze_checkpoint, "checkpoint JSON path")->required();
    analyze->add_option("--state", analyze_state,
                        "comma-separated raw observation (default: median-return heuristic)");
    analyze->add_option("--out", analyze_out, "output directory");
    analyze->add_option("--tag", analyze_tag, "output filename tag");

    CLI11_PARSE(app, argc, argv);

    return gorl::run_cli_action([&] {
        if (train->parsed()) {
            const gorl::TrainOutputs out = gorl::cmd_train(load_config(train_flags));
            std::cout << "final_eval_return=" << gorl::format_double(out.final_eval_return)
                      << " mode_count=" << out.mode_count << "\n";
        } else if (ablate->parsed()) {
            gorl::cmd_ablate_beta(load_config(ablate_flags), betas);
        } else if (study->parsed()) {
            gorl::cmd_stage_study(load_config(study_flags), run_dir);
        } else if (verify->parsed()) {
            const nlohmann::json report = gorl::cmd_verify(verify_seed, verify_out);
            if (!report.at("passed").get<bool>())
                throw gorl::NumericError("one or more verification checks failed");
        } else if (analyze->parsed()) {
            gorl::cmd_analyze(analyze_checkpoint, analyze_state, analyze_out, analyze_tag);
        }
    });
}
