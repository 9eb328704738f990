#include "gorl/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "gorl/checkpoint.hpp"
#include "gorl/errors.hpp"
#include "gorl/scheduler.hpp"
#include "gorl/verify.hpp"

namespace gorl {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    return out;
}

void write_density_csv(const std::string& path, const DensityEstimate& density) {
    std::ofstream out = open_out(path);
    out << "x,density\n";
    for (size_t i = 0; i < density.grid.size(); ++i)
        out << format_double(density.grid[i]) << "," << format_double(density.density[i]) << "\n";
}

void write_curve_csv(const std::string& path, const CurveSeries& curve) {
    std::ofstream out = open_out(path);
    out << "x,raw,smoothed\n";
    for (size_t i = 0; i < curve.steps.size(); ++i)
        out << format_double(curve.steps[i]) << "," << format_double(curve.raw[i]) << ","
            << format_double(curve.smoothed[i]) << "\n";
}

nlohmann::json analysis_to_json(const PolicyAnalysis& analysis) {
    nlohmann::json a;
    a["modes"] = analysis.modes.count;
    a["locations"] = analysis.modes.locations;
    a["bandwidth"] = analysis.density.bandwidth;
    a["samples"] = analysis.density.sample_count;
    a["state"] = analysis.state_raw;
    a["state_selection"] = analysis.selection_rule;
    return a;
}

}  // namespace

std::string checkpoint_filename(uint64_t seed, int stage) {
    return "run_" + std::to_string(seed) + "_stage" + std::to_string(stage) + ".json";
}

TrainOutputs cmd_train(const RunConfig& cfg) {
    ensure_dir(cfg.out_dir);
    open_out(cfg.out_dir + "/effective_config.txt") << emit_config(cfg);

    TrainOutputs outputs;
    outputs.metrics_path = cfg.out_dir + "/metrics.csv";
    outputs.summary_path = cfg.out_dir + "/summary.json";

    std::ofstream metrics = open_out(outputs.metrics_path);
    metrics << "step,mean_return,value_loss,entropy,kl_to_prior,clip_frac,decoder_loss,stage\n";

    std::vector<MetricsRow> rows;
    MetricsSink metrics_sink = [&](const MetricsRow& row) {
        metrics << row.step << "," << format_double(row.mean_return) << ","
                << format_double(row.value_loss) << "," << format_double(row.entropy) << ","
                << format_double(row.kl_to_prior) << "," << format_double(row.clip_frac) << ","
                << format_double(row.decoder_loss) << "," << row.stage << "\n";
        rows.push_back(row);
    };
    CheckpointSink checkpoint_sink = [&](const TrainState& state) {
        save_checkpoint(cfg.out_dir + "/" + checkpoint_filename(cfg.seed, state.stage), state);
    };

    TrainState state(cfg);
    const RunResult result = run_training(state, metrics_sink, checkpoint_sink);
    metrics.close();
    if (!metrics) throw IoError("failed while writing " + outputs.metrics_path);

    write_density_csv(cfg.out_dir + "/density_final.csv", result.analysis.density);

    if (!rows.empty()) {
        std::vector<double> steps, returns;
        for (const MetricsRow& row : rows) {
            steps.push_back(static_cast<double>(row.step));
            returns.push_back(row.mean_return);
        }
        write_curve_csv(cfg.out_dir + "/curve_return.csv",
                        smooth_curve(steps, returns, cfg.smoothing_sigma));
    }

    outputs.final_eval_return = result.final_eval_return;
    outputs.mode_count = result.analysis.modes.count;
    if (!rows.empty()) {
        outputs.final_kl_to_prior = rows.back().kl_to_prior;
        outputs.final_mean_return = rows.back().mean_return;
    }

    nlohmann::json summary;
    summary["env"] = cfg.env;
    summary["seed"] = cfg.seed;
    summary["decoder"] = cfg.decoder;
    summary["cumulative_steps"] = state.cumulative_steps;
    summary["updates"] = state.updates;
    summary["stages"] = static_cast<int>(cfg.stage_budgets.size());
    summary["final_eval_return"] = result.final_eval_return;
    summary["final_kl_to_prior"] = outputs.final_kl_to_prior;
    summary["mode_count"] = result.analysis.modes.count;
    summary["analysis"] = analysis_to_json(result.analysis);
    nlohmann::json eval_points = nlohmann::json::array();
    for (const auto& [step, value] : state.eval_history)
        eval_points.push_back({{"step", step}, {"return", value}});
    summary["eval_history"] = std::move(eval_points);
    open_out(outputs.summary_path) << summary.dump(1) << "\n";
    return outputs;
}

nlohmann::json cmd_verify(uint64_t seed, const std::string& out_dir) {
    const nlohmann::json report = run_verification_suite(seed);
    ensure_dir(out_dir);
    open_out(out_dir + "/verify_report.json") << report.dump(1) << "\n";
    for (const auto& [name, check] : report.at("checks").items())
        std::cout << (check.at("passed").get<bool>() ? "[PASS] " : "[FAIL] ") << name << "\n";
    std::cout << (report.at("passed").get<bool>() ? "verification suite passed"
                                                  : "verification suite FAILED")
              << " (" << report.at("num_checks").get<int>() << " checks)\n";
    return report;
}

nlohmann::json cmd_ablate_beta(const RunConfig& base, const std::vector<double>& betas) {
    if (betas.empty()) throw ConfigError("ablate-beta: the beta list must not be empty");
    ensure_dir(base.out_dir);
    nlohmann::json runs = nlohmann::json::array();
    for (double beta : betas) {
        char tag[32];
        std::snprintf(tag, sizeof(tag), "%g", beta);
        RunConfig cfg = base;
        cfg.kl_beta = beta;
        cfg.out_dir = base.out_dir + "/beta_" + tag;
        const TrainOutputs out = cmd_train(cfg);
        nlohmann::json entry;
        entry["beta"] = beta;
        entry["out_dir"] = cfg.out_dir;
        entry["final_kl_to_prior"] = out.final_kl_to_prior;
        entry["final_eval_return"] = out.final_eval_return;
        runs.push_back(std::move(entry));
        std::cout << "beta=" << tag << " final_kl=" << format_double(out.final_kl_to_prior)
                  << " final_return=" << format_double(out.final_eval_return) << "\n";
    }
    nlohmann::json summary;
    summary["seed"] = base.seed;
    summary["env"] = base.env;
    summary["runs"] = std::move(runs);
    open_out(base.out_dir + "/ablation_summary.json") << summary.dump(1) << "\n";
    return summary;
}

nlohmann::json cmd_stage_study(const RunConfig& cfg, const std::string& run_dir) {
    const int stages = static_cast<int>(cfg.stage_budgets.size());
    nlohmann::json per_stage = nlohmann::json::array();
    for (int m = 0; m < stages; ++m) {
        const std::string path = run_dir + "/" + checkpoint_filename(cfg.seed, m);
        if (!fs::exists(path)) throw IoError("stage checkpoint not found: " + path);
        TrainState snapshot = load_checkpoint(path);

        RunConfig study_cfg = cfg;
        study_cfg.stage_budgets = {cfg.study_budget};
        study_cfg.reinit_encoder = {true};
        TrainState study(study_cfg);
        if (snapshot.decoder.obs_dim != study.spec.obs_dim ||
            snapshot.decoder.action_dim != study.spec.action_dim)
            throw ConfigError("stage-study: checkpoint env does not match the config env");
        // Frozen decoder snapshot + its observation statistics; everything
        // else starts fresh.
        study.decoder = snapshot.decoder;
        study.generative_decoder_ready = snapshot.generative_decoder_ready;
        study.normalizer = snapshot.normalizer;

        StagePlan plan = plan_from_config(study_cfg);
        const uint64_t decoder_hash_before = param_hash(decoder_param_view(study.decoder));
        run_stage(study, plan, 0, {}, {});
        if (param_hash(decoder_param_view(study.decoder)) != decoder_hash_before)
            throw NumericError("stage-study: decoder changed during encoder-only training");

        const double final_return = evaluate_policy(study, cfg.eval_episodes, 50000 + m);
        nlohmann::json entry;
        entry["stage"] = m;
        entry["checkpoint"] = path;
        entry["final_return"] = final_return;
        entry["decoder"] = decoder_kind_name(study.decoder.kind);
        per_stage.push_back(std::move(entry));
        std::cout << "stage " << m << " decoder=" << decoder_kind_name(study.decoder.kind)
                  << " final_return=" << format_double(final_return) << "\n";
    }
    nlohmann::json summary;
    summary["seed"] = cfg.seed;
    summary["study_budget"] = cfg.study_budget;
    summary["stages"] = std::move(per_stage);
    open_out(run_dir + "/stage_study.json") << summary.dump(1) << "\n";
    return summary;
}

nlohmann::json cmd_analyze(const std::string& checkpoint_path, const std::string& state_spec,
                           const std::string& out_dir, const std::string& tag) {
    TrainState state = load_checkpoint(checkpoint_path);
    const PolicyAnalysis analysis =
        analyze_policy(state, state_spec.empty() ? state.cfg.analysis_state : state_spec);
    ensure_dir(out_dir);
    write_density_csv(out_dir + "/density_" + tag + ".csv", analysis.density);
    nlohmann::json report = analysis_to_json(analysis);
    report["checkpoint"] = checkpoint_path;
    open_out(out_dir + "/analysis_" + tag + ".json") << report.dump(1) << "\n";
    std::cout << "modes=" << analysis.modes.count << " bandwidth="
              << format_double(analysis.density.bandwidth) << "\n";
    return report;
}

int run_cli_action(const std::function<void()>& action) {
    try {
        action();
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace gorl
