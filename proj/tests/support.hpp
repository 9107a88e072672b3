#pragma once

#include <atomic>
#include <cstdlib>
#include <unistd.h>
#include <filesystem>
#include <map>
#include <string>
#include <tuple>

#include "hrcplan/hrcplan.hpp"

namespace testing_support {

namespace fs = std::filesystem;

inline std::string config_path(const std::string& name = "pick_and_place.json") {
    return std::string(HRCPLAN_CONFIG_DIR) + "/" + name;
}

inline hrcplan::ScenarioFile default_scenario() { return hrcplan::load_config(config_path()); }

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("hrcplan_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& p) const { return path_ / p; }

private:
    fs::path path_;
};

/// Predictor that scores an action by a lookup on (robot x, goal x, human goal y).
/// Keys are rounded so exact table positions map cleanly.
struct TabularModel {
    std::map<std::tuple<int, int, int>, double> table;
    double fallback = 0.0;

    static int key(double v) { return static_cast<int>(std::lround(v * 10.0)); }

    void set(double from_x, double to_x, double goal_y, double r) {
        table[{key(from_x), key(to_x), key(goal_y)}] = r;
    }
    double predict(hrcplan::Vec3 x_r, hrcplan::Vec3, hrcplan::Vec3 g_r, hrcplan::Vec3 g_h) const {
        const auto it = table.find({key(x_r.x), key(g_r.x), key(g_h.y)});
        return it == table.end() ? fallback : it->second;
    }
};

/// Model returning fixed scores per action goal x (ignores everything else).
struct FixedModel {
    std::map<int, double> by_goal;
    double predict(hrcplan::Vec3, hrcplan::Vec3, hrcplan::Vec3 g_r, hrcplan::Vec3) const {
        return by_goal.at(TabularModel::key(g_r.x));
    }
};

inline hrcplan::RobotAction place(int id, double x, int slot) {
    return {id, {x, 0.0, 0.0}, hrcplan::ActionKind::place, slot};
}

/// Three boxes on the x axis, two fixed human goals, two decision steps.
/// Going to box 1 first pays a little less now but sets up the best second step.
struct ToyProblem {
    TabularModel model;
    hrcplan::PlannerContext ctx;
    hrcplan::MonteCarloParams params;

    ToyProblem() {
        using namespace hrcplan;
        const GoalDistribution g1{1, {0, 1, 0}, {0, 0, 0}}, g2{2, {0, 2, 0}, {0, 0, 0}};
        const std::vector<RobotAction> boxes{place(1, 1, 1), place(2, 2, 2), place(3, 3, 3)};
        ctx = {{0, 0, 0}, g1.mu, g1, boxes, boxes, ProcessState(Variant::continuous_flow, 3), {g1, g2}};
        for (double gy : {1.0, 2.0}) {
            model.set(0, 1, gy, 0.5);
            model.set(0, 2, gy, 0.6);
            model.set(0, 3, gy, 0.4);
        }
        const double second[3][3][2] = {{{0.9, 0.8}, {1.0, 0.9}, {0.85, 0.95}},
                                         {{0.1, 0.2}, {0.3, 0.0}, {0.2, 0.1}},
                                         {{0.3, 0.6}, {0.5, 0.4}, {0.6, 0.3}}};
        for (int from = 0; from < 3; ++from)
            for (int to = 0; to < 3; ++to)
                for (int g = 0; g < 2; ++g) model.set(from + 1, to + 1, g + 1, second[from][to][g]);
        params.max_len = 2;
        params.gamma = 0.9;
        params.budget = 30.0;
        params.max_rollouts = 40;
    }

    /// Exhaustive enumeration: first action maximizing root reward plus the best
    /// expected second step (expectation over the uniform human goal).
    int optimal_first_action() const {
        int best = -1;
        double best_v = -1e9;
        for (const auto& a : ctx.available) {
            const double root = model.predict(ctx.x_r, ctx.x_h, a.goal, ctx.current_goal.mu);
            double next = -1e9;
            for (const auto& b : ctx.available) {
                double e = 0;
                for (const auto& g : ctx.human_goals) e += model.predict(a.goal, g.mu, b.goal, g.mu);
                next = std::max(next, e / static_cast<double>(ctx.human_goals.size()));
            }
            if (root + next > best_v) {
                best_v = root + next;
                best = a.id;
            }
        }
        return best;
    }
};

}  // namespace testing_support
