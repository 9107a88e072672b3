// Experiment harness: collect -> estimate-k -> train -> evaluate / ablate -> report.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hrcplan/hrcplan.hpp"

namespace {

using namespace hrcplan;

/// Applies --safety-k / --threshold-scale overrides used to build mismatched training scenarios.
void override_safety(ScenarioFile& scenario, int safety_k, double threshold_scale) {
    auto& s = scenario.workspace.safety;
    if (safety_k > 0) {
        const double last = s.thresholds.empty() ? 2.0 : s.thresholds.back();
        s = StaircaseSafety::evenly_spaced(safety_k, last).description();
    }
    if (threshold_scale != 1.0)
        for (double& d : s.thresholds) d *= threshold_scale;
    StaircaseSafety check(s);
    (void)check;
}

void print_row(const ResultRow& r) {
    std::printf("%-16s tasks=%zu exec_time=%.3f(%.3f) scaling=%.4f\n", r.policy.c_str(), r.tasks, r.mean_exec_time,
                r.std_exec_time, r.mean_scaling);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hrcplan: learn safety speed scaling and plan robot actions around it"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 1;
    int episodes = 200;
    std::string out_dir;
    std::string policy = "greedy";
    std::string model_path;

    auto common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "scenario config (JSON)")->required()->check(CLI::ExistingFile);
        cmd->add_option("--seed", seed, "master seed");
        cmd->add_option("--out", out_dir, "output directory")->required();
    };

    auto* collect_cmd = app.add_subcommand("collect", "random-policy data collection");
    common(collect_cmd);
    collect_cmd->add_option("--episodes", episodes, "episode count");
    int safety_k = 0;
    double threshold_scale = 1.0;
    collect_cmd->add_option("--safety-k", safety_k, "replace safety with K evenly spaced steps");
    collect_cmd->add_option("--threshold-scale", threshold_scale, "scale all safety thresholds");

    auto* estimate_cmd = app.add_subcommand("estimate-k", "cluster logged scaling values to estimate K");
    std::string data_dir;
    estimate_cmd->add_option("--data", data_dir, "collection directory")->required();
    estimate_cmd->add_option("--out", out_dir, "write k.json here");

    auto* train_cmd = app.add_subcommand("train", "train the scaling predictor");
    train_cmd->add_option("--data", data_dir, "collection directory")->required();
    train_cmd->add_option("--seed", seed, "master seed");
    train_cmd->add_option("--out", out_dir, "output directory")->required();
    int k_flag = 0;
    int hidden_flag = 0;
    bool grid = false;
    train_cmd->add_option("--k", k_flag, "softmax width (default: estimated from data)");
    train_cmd->add_option("--hidden", hidden_flag, "hidden layer count (default: 5 for K<=5, else 6)");
    train_cmd->add_flag("--grid-search", grid, "pick hidden count in {4,5,6,7} by test MSE");

    auto* eval_cmd = app.add_subcommand("evaluate", "run a policy and tabulate execution time and scaling");
    common(eval_cmd);
    eval_cmd->add_option("--episodes", episodes, "episode count");
    eval_cmd->add_option("--policy", policy, "random|round-robin|reactive|greedy|monte-carlo");
    eval_cmd->add_option("--model", model_path, "model.json for learning-based policies");

    auto* ablate_cmd = app.add_subcommand("ablate", "greedy with matched vs mismatched models, plus random");
    common(ablate_cmd);
    ablate_cmd->add_option("--episodes", episodes, "episode count");
    ablate_cmd->add_option("--model", model_path, "model trained on the true safety function")->required();
    std::string model_k3, model_inflated;
    ablate_cmd->add_option("--model-k3", model_k3, "model trained with K=3")->required();
    ablate_cmd->add_option("--model-inflated", model_inflated, "model trained with thresholds x1.2")->required();

    auto* report_cmd = app.add_subcommand("report", "policy table, histograms and density plot");
    std::vector<std::string> result_dirs;
    std::string model_dir;
    report_cmd->add_option("--results", result_dirs, "evaluation directories")->required();
    report_cmd->add_option("--model-dir", model_dir, "training directory with predictions.csv");
    report_cmd->add_option("--out", out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*collect_cmd) {
            auto scenario = load_config(config_path);
            override_safety(scenario, safety_k, threshold_scale);
            const auto files = collect(scenario, episodes, seed, out_dir);
            std::printf("collected %d episodes into %s (%zu files)\n", episodes, out_dir.c_str(), files.size());
        } else if (*estimate_cmd) {
            const auto logs = load_logs(data_dir);
            const auto est = estimate_k_from_logs(logs);
            json j{{"K", est.k}, {"silhouettes", est.silhouettes}, {"plateaus", est.plateaus}, {"samples", logs.size()}};
            if (!out_dir.empty()) {
                ensure_dir(out_dir);
                write_text_file((fs::path(out_dir) / "k.json").string(), j.dump(2) + "\n");
            }
            std::printf("K=%d\n", est.k);
        } else if (*train_cmd) {
            const auto scenario = load_config((fs::path(data_dir) / "config.json").string());
            const auto logs = load_logs(data_dir);
            const int k = k_flag > 0 ? k_flag : estimate_k_from_logs(logs).k;
            TrainOutcome best;
            if (grid) {
                double best_mse = std::numeric_limits<double>::infinity();
                for (int h : {4, 5, 6, 7}) {
                    auto t = train_model(scenario, logs, k, seed, h);
                    std::printf("hidden=%d test_mse=%.6f\n", h, t.model.test_mse);
                    if (t.model.test_mse < best_mse) {
                        best_mse = t.model.test_mse;
                        best = std::move(t);
                    }
                }
            } else {
                best = train_model(scenario, logs, k, seed, hidden_flag);
            }
            write_training(out_dir, scenario, best, seed, k);
            std::printf("K=%d hidden=%d epochs=%zu best_epoch=%d test_mse=%.6f\n", k,
                        best.model.network.hidden_count(), best.history.size(), best.model.best_epoch,
                        best.model.test_mse);
        } else if (*eval_cmd) {
            const auto scenario = load_config(config_path);
            std::shared_ptr<const ModelFile> model;
            std::string model_hash;
            if (needs_model(policy)) {
                if (model_path.empty()) throw Error("policy " + policy + " needs --model");
                model = checked_model(scenario, model_path, false);
                model_hash = content_hash(read_text_file(model_path));
            }
            const auto [row, runs] = evaluate_policy(scenario, policy, policy, episodes, seed, model);
            write_result(out_dir, scenario, row, runs, seed, model_hash);
            print_row(row);
        } else if (*ablate_cmd) {
            const auto scenario = load_config(config_path);
            const auto matched = checked_model(scenario, model_path, false);
            const auto k3 = checked_model(scenario, model_k3, true);
            const auto inflated = checked_model(scenario, model_inflated, true);
            const std::vector<std::pair<std::string, std::shared_ptr<const ModelFile>>> arms{
                {"greedy", matched}, {"greedy-inacc-1", k3}, {"greedy-inacc-2", inflated}, {"random", nullptr}};
            for (const auto& [label, m] : arms) {
                const auto [row, runs] =
                    evaluate_policy(scenario, m ? "greedy" : "random", label, episodes, seed, m);
                write_result(out_dir, scenario, row, runs, seed, content_hash(read_text_file(model_path)));
                print_row(row);
            }
        } else if (*report_cmd) {
            std::vector<fs::path> dirs(result_dirs.begin(), result_dirs.end());
            const auto files = write_report(dirs, model_dir, out_dir);
            std::printf("wrote %zu report files to %s\n", files.size(), out_dir.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
