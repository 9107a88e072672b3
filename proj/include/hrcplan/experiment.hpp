#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hrcplan/config_io.hpp"
#include "hrcplan/kmeans.hpp"
#include "hrcplan/learn.hpp"
#include "hrcplan/plan.hpp"
#include "hrcplan/sim.hpp"

namespace hrcplan {

namespace fs = std::filesystem;

inline constexpr const char* kHashAlgorithm = "fnv1a-64";

// ---------------------------------------------------------------------------
// Model files

struct ModelFile {
    ScalingPredictor network;
    std::string fingerprint;  // workspace_fingerprint of the training scenario
    double horizon = 14.0;
    std::size_t window = 140;
    double test_mse = 0.0;
    int best_epoch = 0;

    double predict(Vec3 x_r, Vec3 x_h, Vec3 g_r, Vec3 g_h_mu) const { return network.predict(x_r, x_h, g_r, g_h_mu); }
};

inline std::string dump_model(const ModelFile& m) {
    json j;
    j["version"] = 1;
    j["workspace_fingerprint"] = m.fingerprint;
    j["horizon"] = m.horizon;
    j["window"] = m.window;
    j["test_mse"] = m.test_mse;
    j["best_epoch"] = m.best_epoch;
    j["network"] = m.network.to_json();
    return j.dump(1) + "\n";
}

inline ModelFile parse_model(const std::string& text) {
    try {
        const json j = json::parse(text);
        ModelFile m;
        m.network = ScalingPredictor::from_json(j.at("network"));
        m.fingerprint = j.at("workspace_fingerprint").get<std::string>();
        m.horizon = j.at("horizon").get<double>();
        m.window = j.at("window").get<std::size_t>();
        m.test_mse = j.value("test_mse", 0.0);
        m.best_epoch = j.value("best_epoch", 0);
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("model: ") + e.what());
    }
}

inline ModelFile load_model(const std::string& path) { return parse_model(read_text_file(path)); }

// ---------------------------------------------------------------------------
// Policies

inline const std::vector<std::string>& policy_names() {
    static const std::vector<std::string> names{"random", "round-robin", "reactive", "greedy", "monte-carlo"};
    return names;
}

inline PlannerContext planner_context(const DecisionContext& d, const WorkspaceConfig& w) {
    return {d.x_r, d.x_h, d.human_goal, d.available, w.place_actions(), d.process, w.human_goals};
}

/// Builds a fresh (stateful) policy for one episode. Learning-based policies need `model`.
inline Policy make_policy(const std::string& name, const WorkspaceConfig& w, std::uint64_t episode_seed,
                          std::shared_ptr<const ModelFile> model = nullptr, const MonteCarloParams& mc = {}) {
    if (name == "random") {
        auto rng = std::make_shared<Rng>(derive_seed(episode_seed, 2));
        return [rng](const DecisionContext& d) {
            PlannerContext ctx{d.x_r, d.x_h, d.human_goal, d.available, {}, d.process, {}};
            return baseline_random(ctx, *rng).id;
        };
    }
    if (name == "round-robin") {
        auto last = std::make_shared<int>(std::numeric_limits<int>::min());
        return [last](const DecisionContext& d) {
            PlannerContext ctx{d.x_r, d.x_h, d.human_goal, d.available, {}, d.process, {}};
            *last = baseline_round_robin(ctx, *last).id;
            return *last;
        };
    }
    if (name == "reactive") {
        return [](const DecisionContext& d) {
            PlannerContext ctx{d.x_r, d.x_h, d.human_goal, d.available, {}, d.process, {}};
            return baseline_reactive(ctx).id;
        };
    }
    if (name == "greedy") {
        if (!model) throw Error("policy greedy needs a model");
        return [model](const DecisionContext& d) {
            PlannerContext ctx{d.x_r, d.x_h, d.human_goal, d.available, {}, d.process, {}};
            return greedy_select(*model, ctx).id;
        };
    }
    if (name == "monte-carlo") {
        if (!model) throw Error("policy monte-carlo needs a model");
        auto counter = std::make_shared<std::uint64_t>(0);
        return [model, w, mc, episode_seed, counter](const DecisionContext& d) {
            const auto ctx = planner_context(d, w);
            return monte_carlo_select(*model, ctx, mc, derive_seed(episode_seed, 1000 + (*counter)++)).action.id;
        };
    }
    throw Error("unknown policy '" + name + "'");
}

// ---------------------------------------------------------------------------
// Episode batches

inline std::uint64_t episode_seed(std::uint64_t seed, int episode) {
    return derive_seed(seed, static_cast<std::uint64_t>(episode));
}

/// Runs episodes [0, count) with per-episode seeds; parallel across episodes,
/// results in episode order.
template <class PolicyFactory>
std::vector<EpisodeResult> run_episodes(const WorkspaceConfig& w, int count, std::uint64_t seed,
                                        const PolicyFactory& factory, int tasks_per_episode, double lead_time = 0.0) {
    std::vector<EpisodeResult> out(static_cast<std::size_t>(count));
    const unsigned threads = std::max(1u, std::min(std::thread::hardware_concurrency(), static_cast<unsigned>(count)));
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back([&, t] {
                try {
                    for (int ep = next++; ep < count; ep = next++) {
                        const auto s = episode_seed(seed, ep);
                        out[static_cast<std::size_t>(ep)] =
                            run_episode(w, s, ep, factory(s), EpisodeLimits{std::nullopt, tasks_per_episode}, lead_time);
                    }
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

// ---------------------------------------------------------------------------
// Result tables

struct ResultRow {
    std::string policy;
    std::size_t tasks = 0;
    double mean_exec_time = 0.0;
    double std_exec_time = 0.0;
    double mean_scaling = 0.0;
    std::map<double, std::size_t> histogram;  // plateau value -> tick count
};

inline ResultRow summarize(const std::string& policy, const std::vector<EpisodeResult>& runs) {
    ResultRow row;
    row.policy = policy;
    std::vector<double> times;
    double s_sum = 0.0;
    std::size_t ticks = 0;
    for (const auto& r : runs) {
        for (const auto& t : r.tasks) times.push_back(t.end_t - t.start_t);
        for (double s : r.trace.s) {
            s_sum += s;
            ++ticks;
            ++row.histogram[s];
        }
    }
    row.tasks = times.size();
    if (!times.empty()) {
        double sum = 0.0;
        for (double t : times) sum += t;
        row.mean_exec_time = sum / static_cast<double>(times.size());
        double var = 0.0;
        for (double t : times) var += (t - row.mean_exec_time) * (t - row.mean_exec_time);
        row.std_exec_time = times.size() > 1 ? std::sqrt(var / static_cast<double>(times.size() - 1)) : 0.0;
    }
    row.mean_scaling = ticks ? s_sum / static_cast<double>(ticks) : 0.0;
    return row;
}

/// Fraction of ticks whose scaling is one of `values`.
inline double histogram_mass(const ResultRow& row, const std::vector<double>& values) {
    std::size_t hit = 0, total = 0;
    for (const auto& [s, n] : row.histogram) {
        total += n;
        for (double v : values)
            if (std::abs(s - v) < 1e-9) hit += n;
    }
    return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

inline json row_to_json(const ResultRow& r) {
    json h = json::array();
    for (const auto& [s, n] : r.histogram) h.push_back({{"s", s}, {"count", n}});
    return {{"policy", r.policy},       {"tasks", r.tasks},           {"mean_exec_time", r.mean_exec_time},
            {"std_exec_time", r.std_exec_time}, {"mean_scaling", r.mean_scaling}, {"histogram", h}};
}

inline ResultRow row_from_json(const json& j) {
    ResultRow r;
    r.policy = j.at("policy").get<std::string>();
    r.tasks = j.at("tasks").get<std::size_t>();
    r.mean_exec_time = j.at("mean_exec_time").get<double>();
    r.std_exec_time = j.at("std_exec_time").get<double>();
    r.mean_scaling = j.at("mean_scaling").get<double>();
    for (const auto& h : j.at("histogram")) r.histogram[h.at("s").get<double>()] = h.at("count").get<std::size_t>();
    return r;
}

inline std::string format_table(const std::vector<ResultRow>& rows) {
    std::string out = "policy,tasks,exec_time_mean,exec_time_std,scaling_mean\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%zu,%.4f,%.4f,%.4f\n", r.policy.c_str(), r.tasks, r.mean_exec_time,
                      r.std_exec_time, r.mean_scaling);
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Manifests

inline json file_entry(const fs::path& dir, const std::string& name) {
    return {{"path", name}, {"hash", content_hash(read_text_file((dir / name).string()))}};
}

inline void write_manifest(const fs::path& dir, const std::string& verb, std::uint64_t seed,
                           const std::string& config_text, const std::vector<std::string>& files,
                           const json& extra = json::object()) {
    json m;
    m["verb"] = verb;
    m["hash_algorithm"] = kHashAlgorithm;
    m["seed"] = seed;
    m["config_hash"] = content_hash(config_text);
    for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
    json list = json::array();
    for (const auto& f : files) list.push_back(file_entry(dir, f));
    m["files"] = list;
    write_text_file((dir / "manifest.json").string(), m.dump(2) + "\n");
}

inline void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw Error("cannot create output directory " + dir.string());
}

// ---------------------------------------------------------------------------
// Phases

/// Random-policy data collection; one log file per episode.
inline std::vector<std::string> collect(const ScenarioFile& scenario, int episodes, std::uint64_t seed,
                                        const fs::path& out) {
    if (episodes <= 0) throw Error("nothing to collect");
    ensure_dir(out / "logs");
    const auto& w = scenario.workspace;
    const auto runs = run_episodes(
        w, episodes, seed, [&](std::uint64_t s) { return make_policy("random", w, s); },
        scenario.learn.episode_tasks);
    const std::string config_text = dump_config(scenario);
    write_text_file((out / "config.json").string(), config_text);
    std::vector<std::string> files{"config.json"};
    std::vector<TaskRecord> tasks;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "logs/episode_%04zu.csv", i);
        write_text_file((out / name).string(), format_log(runs[i].log));
        files.emplace_back(name);
        tasks.insert(tasks.end(), runs[i].tasks.begin(), runs[i].tasks.end());
    }
    write_text_file((out / "metrics.csv").string(), format_metrics(tasks));
    files.emplace_back("metrics.csv");
    write_manifest(out, "collect", seed, config_text, files, {{"episodes", episodes}});
    return files;
}

/// All log records of a collection directory, in episode order.
inline std::vector<LogRecord> load_logs(const fs::path& dir) {
    std::vector<fs::path> files;
    if (!fs::is_directory(dir / "logs")) throw Error("no logs in " + dir.string());
    for (const auto& e : fs::directory_iterator(dir / "logs"))
        if (e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<LogRecord> out;
    for (const auto& f : files) {
        auto part = parse_log(read_text_file(f.string()));
        out.insert(out.end(), part.begin(), part.end());
    }
    if (out.empty()) throw Error("no log records in " + dir.string());
    return out;
}

inline KEstimate estimate_k_from_logs(const std::vector<LogRecord>& logs) {
    std::vector<double> s;
    s.reserve(logs.size());
    for (const auto& r : logs) s.push_back(r.s);
    return estimate_k_detailed(s);
}

struct TrainOutcome {
    ModelFile model;
    std::vector<EpochStats> history;
    std::vector<PredictionPair> test_pairs;
};

inline std::size_t window_samples(const ScenarioFile& scenario) {
    return static_cast<std::size_t>(std::llround(scenario.learn.horizon / scenario.workspace.sample_period));
}

inline TrainOutcome train_model(const ScenarioFile& scenario, const std::vector<LogRecord>& logs, int k,
                                std::uint64_t seed, int hidden_count = 0) {
    const auto& l = scenario.learn;
    const std::size_t n = window_samples(scenario);
    const auto rows = build_training_set(logs, n, static_cast<std::size_t>(std::max(1, l.stride)));
    const Dataset data = split_by_episode(rows, derive_seed(seed, 11));
    if (hidden_count <= 0) hidden_count = l.hidden_count > 0 ? l.hidden_count : default_hidden_count(k);
    auto net = build_network(k, hidden_count, derive_seed(seed, 12));
    TrainSchedule sched;
    sched.epochs = l.epochs;
    sched.batch = l.batch;
    sched.learning_rate = l.learning_rate;
    sched.patience = l.patience;
    sched.seed = derive_seed(seed, 13);
    auto result = train(std::move(net), data, sched);
    TrainOutcome out;
    out.model.network = std::move(result.predictor);
    out.model.fingerprint = workspace_fingerprint(scenario.workspace);
    out.model.horizon = l.horizon;
    out.model.window = n;
    out.model.best_epoch = result.best_epoch;
    out.history = std::move(result.history);
    out.model.test_mse = evaluate_mse(out.model.network, data.test, &out.test_pairs);
    return out;
}

inline void write_training(const fs::path& out, const ScenarioFile& scenario, const TrainOutcome& t,
                           std::uint64_t seed, int k) {
    ensure_dir(out);
    const std::string config_text = dump_config(scenario);
    write_text_file((out / "config.json").string(), config_text);
    write_text_file((out / "model.json").string(), dump_model(t.model));
    std::string hist = "epoch,train_mse,test_mse\n";
    char buf[96];
    for (const auto& e : t.history) {
        std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g\n", e.epoch, e.train_mse, e.test_mse);
        hist += buf;
    }
    write_text_file((out / "history.csv").string(), hist);
    std::string pairs = "actual,predicted\n";
    for (const auto& p : t.test_pairs) {
        std::snprintf(buf, sizeof buf, "%.10g,%.10g\n", p.actual, p.predicted);
        pairs += buf;
    }
    write_text_file((out / "predictions.csv").string(), pairs);
    const std::string model_hash = content_hash(read_text_file((out / "model.json").string()));
    write_manifest(out, "train", seed, config_text, {"config.json", "model.json", "history.csv", "predictions.csv"},
                   {{"K", k}, {"model_hash", model_hash}, {"test_mse", t.model.test_mse}});
}

inline std::shared_ptr<const ModelFile> checked_model(const ScenarioFile& scenario, const std::string& path,
                                                      bool allow_mismatch) {
    auto m = std::make_shared<ModelFile>(load_model(path));
    if (!allow_mismatch && m->fingerprint != workspace_fingerprint(scenario.workspace)) throw Error("stale model");
    return m;
}

inline bool needs_model(const std::string& policy) { return policy == "greedy" || policy == "monte-carlo"; }

/// Runs `policy` for `episodes` episodes; `label` names the result row.
inline std::pair<ResultRow, std::vector<EpisodeResult>> evaluate_policy(
    const ScenarioFile& scenario, const std::string& policy, const std::string& label, int episodes,
    std::uint64_t seed, std::shared_ptr<const ModelFile> model) {
    if (episodes <= 0) throw Error("nothing to evaluate");
    const auto& w = scenario.workspace;
    const double lead = policy == "monte-carlo" ? scenario.mc.lead_time : 0.0;
    auto runs = run_episodes(
        w, episodes, seed, [&](std::uint64_t s) { return make_policy(policy, w, s, model, scenario.mc); },
        scenario.learn.episode_tasks, lead);
    return {summarize(label, runs), std::move(runs)};
}

inline void write_result(const fs::path& out, const ScenarioFile& scenario, const ResultRow& row,
                         const std::vector<EpisodeResult>& runs, std::uint64_t seed, const std::string& model_hash) {
    ensure_dir(out);
    const std::string config_text = dump_config(scenario);
    write_text_file((out / "config.json").string(), config_text);
    std::vector<TaskRecord> tasks;
    for (const auto& r : runs) tasks.insert(tasks.end(), r.tasks.begin(), r.tasks.end());
    const std::string metrics = "metrics_" + row.policy + ".csv";
    const std::string result = "result_" + row.policy + ".json";
    write_text_file((out / metrics).string(), format_metrics(tasks));
    write_text_file((out / result).string(), row_to_json(row).dump(2) + "\n");

    std::vector<ResultRow> rows;
    std::vector<std::string> files{"config.json"};
    std::vector<fs::path> results;
    for (const auto& e : fs::directory_iterator(out))
        if (e.path().filename().string().rfind("result_", 0) == 0) results.push_back(e.path());
    std::sort(results.begin(), results.end());
    for (const auto& p : results) {
        rows.push_back(row_from_json(json::parse(read_text_file(p.string()))));
        files.push_back(p.filename().string());
        files.push_back("metrics_" + rows.back().policy + ".csv");
    }
    write_text_file((out / "table.csv").string(), format_table(rows));
    files.emplace_back("table.csv");
    json extra{{"model_hash", model_hash}};
    write_manifest(out, "evaluate", seed, config_text, files, extra);
}

inline std::vector<ResultRow> load_results(const fs::path& dir) {
    std::vector<fs::path> results;
    if (!fs::is_directory(dir)) throw Error("empty results");
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().filename().string().rfind("result_", 0) == 0) results.push_back(e.path());
    std::sort(results.begin(), results.end());
    std::vector<ResultRow> rows;
    for (const auto& p : results) rows.push_back(row_from_json(json::parse(read_text_file(p.string()))));
    if (rows.empty()) throw Error("empty results");
    return rows;
}

}  // namespace hrcplan
