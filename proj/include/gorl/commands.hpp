#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gorl/config.hpp"

#include "json.hpp"

namespace gorl {

struct TrainOutputs {
    std::string metrics_path;
    std::string summary_path;
    double final_eval_return = 0.0;
    double final_kl_to_prior = 0.0;
    double final_mean_return = 0.0;
    int mode_count = 0;
};

// Full training run: metrics.csv, per-stage checkpoints, a final density
// CSV, a smoothed learning curve and summary.json under cfg.out_dir.
TrainOutputs cmd_train(const RunConfig& cfg);

// Runs the numeric verification suite and writes verify_report.json.
nlohmann::json cmd_verify(uint64_t seed, const std::string& out_dir);

// One training run per beta at a shared seed; per-beta subdirectories and
// an ablation_summary.json under base.out_dir.
nlohmann::json cmd_ablate_beta(const RunConfig& base, const std::vector<double>& betas);

// Trains a fresh encoder against each stage's frozen decoder snapshot and
// reports final returns (stage_study.json in run_dir).
nlohmann::json cmd_stage_study(const RunConfig& cfg, const std::string& run_dir);

// Action-density analysis of a checkpointed policy at a fixed state.
nlohmann::json cmd_analyze(const std::string& checkpoint_path, const std::string& state_spec,
                           const std::string& out_dir, const std::string& tag);

// Executes an action and maps error categories to exit codes:
// 0 ok, 2 config, 3 numeric, 4 io, 1 anything else.
int run_cli_action(const std::function<void()>& action);

std::string checkpoint_filename(uint64_t seed, int stage);

}  // namespace gorl
