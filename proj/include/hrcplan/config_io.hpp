#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "hrcplan/core.hpp"
#include "hrcplan/safety.hpp"

namespace hrcplan {

using json = nlohmann::ordered_json;

/// Monte Carlo planner settings (`mc.*` config keys).
struct MonteCarloParams {
    double gamma = 0.9;
    double budget = 1.0;          // seconds of wall time per decision
    int max_len = 6;              // decision steps per sequence, root included
    double lead_time = 0.0;       // plan this many seconds early with the x_h seen then
    std::size_t max_rollouts = 0; // per-action rollout cap; 0 = limited by budget only

    void validate() const {
        if (!(gamma > 0.0 && gamma <= 1.0)) throw Error("mc.gamma must lie in (0,1]");
        if (!(budget > 0.0)) throw Error("mc.budget must be > 0");
        if (max_len < 1) throw Error("mc.max_len must be >= 1");
        if (lead_time < 0.0) throw Error("mc.lead_time must be >= 0");
    }
};

/// Training and episode settings (`train.*`, `episode.*` keys).
struct LearnParams {
    double horizon = 14.0;   // predictive window w in seconds
    int stride = 1;          // keep every stride-th window start
    int hidden_count = 0;    // 0 = default for K
    int epochs = 200;
    int batch = 256;
    double learning_rate = 1e-3;
    int patience = 20;
    int episode_tasks = 10;  // tasks per collected / evaluated episode
};

struct ScenarioFile {
    WorkspaceConfig workspace;
    MonteCarloParams mc;
    LearnParams learn;
};

namespace detail {

inline json vec_to_json(Vec3 v) { return json::array({v.x, v.y, v.z}); }

inline Vec3 vec_from_json(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 3) throw Error(std::string("config: ") + what + " must be [x,y,z]");
    Vec3 v{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
    if (!v.finite()) throw Error(std::string("config: ") + what + " not finite");
    return v;
}

inline const char* variant_name(Variant v) {
    return v == Variant::continuous_flow ? "continuous_flow" : "batch_replacement";
}

inline Variant variant_from(const std::string& s) {
    if (s == "continuous_flow") return Variant::continuous_flow;
    if (s == "batch_replacement") return Variant::batch_replacement;
    throw Error("config: unknown variant '" + s + "'");
}

}  // namespace detail

inline json to_json(const ScenarioFile& file) {
    const auto& w = file.workspace;
    json j;
    json actions = json::array();
    for (const auto& a : w.robot_actions) {
        json ja;
        ja["id"] = a.id;
        ja["goal"] = detail::vec_to_json(a.goal);
        ja["kind"] = a.kind == ActionKind::pick ? "pick" : "place";
        if (a.slot) ja["slot"] = *a.slot;
        actions.push_back(ja);
    }
    j["robot_actions"] = actions;
    json goals = json::array();
    for (const auto& g : w.human_goals)
        goals.push_back({{"id", g.id}, {"mu", detail::vec_to_json(g.mu)}, {"sigma", detail::vec_to_json(g.sigma)}});
    j["human_goals"] = goals;
    j["safety"] = {{"thresholds", w.safety.thresholds}, {"values", w.safety.values}};
    j["robot_nominal_speed"] = w.robot_nominal_speed;
    j["human_speed"] = w.human_speed;
    j["sample_period"] = w.sample_period;
    j["variant"] = detail::variant_name(w.variant);
    j["dwell"] = {{"pick", w.dwell.pick}, {"place", w.dwell.place}, {"human", w.dwell.human}};
    j["rng_seed"] = w.rng_seed;
    j["slot_capacity"] = w.slot_capacity;
    j["human_midpoint_sigma"] = w.human_midpoint_sigma;
    j["mc"] = {{"gamma", file.mc.gamma},
               {"budget", file.mc.budget},
               {"max_len", file.mc.max_len},
               {"lead_time", file.mc.lead_time},
               {"max_rollouts", file.mc.max_rollouts}};
    const auto& l = file.learn;
    j["train"] = {{"horizon", l.horizon},     {"stride", l.stride},
                  {"hidden_count", l.hidden_count}, {"epochs", l.epochs},
                  {"batch", l.batch},         {"learning_rate", l.learning_rate},
                  {"patience", l.patience}};
    j["episode"] = {{"tasks", l.episode_tasks}};
    return j;
}

inline ScenarioFile scenario_from_json(const json& j) {
    ScenarioFile file;
    auto& w = file.workspace;
    try {
        for (const auto& ja : j.at("robot_actions")) {
            RobotAction a;
            a.id = ja.at("id").get<int>();
            a.goal = detail::vec_from_json(ja.at("goal"), "robot_actions[].goal");
            const auto kind = ja.at("kind").get<std::string>();
            if (kind == "pick")
                a.kind = ActionKind::pick;
            else if (kind == "place")
                a.kind = ActionKind::place;
            else
                throw Error("config: unknown action kind '" + kind + "'");
            if (ja.contains("slot") && !ja["slot"].is_null()) a.slot = ja["slot"].get<int>();
            w.robot_actions.push_back(a);
        }
        for (const auto& jg : j.at("human_goals")) {
            GoalDistribution g;
            g.id = jg.at("id").get<int>();
            g.mu = detail::vec_from_json(jg.at("mu"), "human_goals[].mu");
            g.sigma = detail::vec_from_json(jg.at("sigma"), "human_goals[].sigma");
            w.human_goals.push_back(g);
        }
        w.safety.thresholds = j.at("safety").at("thresholds").get<std::vector<double>>();
        w.safety.values = j.at("safety").at("values").get<std::vector<double>>();
        w.robot_nominal_speed = j.at("robot_nominal_speed").get<double>();
        w.human_speed = j.at("human_speed").get<double>();
        w.sample_period = j.at("sample_period").get<double>();
        w.variant = detail::variant_from(j.at("variant").get<std::string>());
        const auto& d = j.at("dwell");
        w.dwell = {d.at("pick").get<double>(), d.at("place").get<double>(), d.at("human").get<double>()};
        w.rng_seed = j.at("rng_seed").get<std::uint64_t>();
        w.slot_capacity = j.value("slot_capacity", w.slot_capacity);
        w.human_midpoint_sigma = j.value("human_midpoint_sigma", w.human_midpoint_sigma);
        if (j.contains("mc")) {
            const auto& m = j["mc"];
            file.mc.gamma = m.value("gamma", file.mc.gamma);
            file.mc.budget = m.value("budget", file.mc.budget);
            file.mc.max_len = m.value("max_len", file.mc.max_len);
            file.mc.lead_time = m.value("lead_time", file.mc.lead_time);
            file.mc.max_rollouts = m.value("max_rollouts", file.mc.max_rollouts);
        }
        if (j.contains("train")) {
            const auto& t = j["train"];
            auto& l = file.learn;
            l.horizon = t.value("horizon", l.horizon);
            l.stride = t.value("stride", l.stride);
            l.hidden_count = t.value("hidden_count", l.hidden_count);
            l.epochs = t.value("epochs", l.epochs);
            l.batch = t.value("batch", l.batch);
            l.learning_rate = t.value("learning_rate", l.learning_rate);
            l.patience = t.value("patience", l.patience);
        }
        if (j.contains("episode")) file.learn.episode_tasks = j["episode"].value("tasks", file.learn.episode_tasks);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("config: ") + e.what());
    }
    w.validate();
    StaircaseSafety{w.safety};  // throws on a malformed staircase
    file.mc.validate();
    return file;
}

inline std::string dump_config(const ScenarioFile& file) { return to_json(file).dump(2) + "\n"; }

inline ScenarioFile parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("config: ") + e.what());
    }
    return scenario_from_json(j);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << text;
    if (!out) throw Error("cannot write " + path);
}

inline ScenarioFile load_config(const std::string& path) { return parse_config(read_text_file(path)); }

/// FNV-1a 64-bit content hash, rendered as 16 hex digits.
inline std::string content_hash(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = hex[h & 0xf];
    return out;
}

/// Hash of the fields that determine what a scaling model learns: geometry,
/// safety, speeds, dwell times and sample period. Seeds and variant are excluded.
inline std::string workspace_fingerprint(const WorkspaceConfig& w) {
    ScenarioFile f;
    f.workspace = w;
    json j = to_json(f);
    json keep;
    for (const char* key : {"robot_actions", "human_goals", "safety", "robot_nominal_speed", "human_speed",
                            "sample_period", "dwell", "human_midpoint_sigma"})
        keep[key] = j[key];
    return content_hash(keep.dump());
}

}  // namespace hrcplan
