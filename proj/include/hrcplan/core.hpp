#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace hrcplan {

/// Library error; `what()` carries the short machine-readable reason.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30u)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27u)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31u);
}

/// Independent stream seed for a (master seed, stream id) pair.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(splitmix64(master) ^ (stream * 0xd1b54a32d192ed03ull + 1));
}

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(double k, Vec3 a) { return {k * a.x, k * a.y, k * a.z}; }
    friend bool operator==(const Vec3&, const Vec3&) = default;

    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline double distance(Vec3 a, Vec3 b) { return (a - b).norm(); }

struct GoalDistribution {
    int id = 0;
    Vec3 mu;
    Vec3 sigma;
};

/// Draws a concrete goal position; axes with zero sigma return the mean exactly.
inline Vec3 sample_goal(const GoalDistribution& dist, Rng& rng) {
    std::normal_distribution<double> unit(0.0, 1.0);
    auto axis = [&](double mean, double sd) { return sd > 0.0 ? mean + sd * unit(rng) : mean; };
    // Fixed evaluation order keeps draws reproducible across compilers.
    const double x = axis(dist.mu.x, dist.sigma.x);
    const double y = axis(dist.mu.y, dist.sigma.y);
    const double z = axis(dist.mu.z, dist.sigma.z);
    return {x, y, z};
}

enum class ActionKind { pick, place };

struct RobotAction {
    int id = 0;
    Vec3 goal;
    ActionKind kind = ActionKind::place;
    std::optional<int> slot;
};

inline Vec3 get_robot_goal(const RobotAction& action) { return action.goal; }

enum class Variant { continuous_flow, batch_replacement };

struct DwellTimes {
    double pick = 1.0;
    double place = 1.0;
    double human = 5.0;
};

struct SafetyDescription {
    std::vector<double> thresholds;
    std::vector<double> values;
    friend bool operator==(const SafetyDescription&, const SafetyDescription&) = default;
};

struct WorkspaceConfig {
    std::vector<RobotAction> robot_actions;
    std::vector<GoalDistribution> human_goals;
    SafetyDescription safety;
    double robot_nominal_speed = 0.25;
    double human_speed = 1.0;
    double sample_period = 0.1;
    Variant variant = Variant::continuous_flow;
    DwellTimes dwell;
    std::uint64_t rng_seed = 0;

    // Scenario extras with defaults; absent keys in a config file keep these.
    int slot_capacity = 3;
    double human_midpoint_sigma = 0.25;

    std::vector<RobotAction> place_actions() const {
        std::vector<RobotAction> out;
        for (const auto& a : robot_actions)
            if (a.kind == ActionKind::place) out.push_back(a);
        return out;
    }

    const RobotAction& pick_action() const {
        for (const auto& a : robot_actions)
            if (a.kind == ActionKind::pick) return a;
        throw Error("config has no pick action");
    }

    const RobotAction& action(int id) const {
        for (const auto& a : robot_actions)
            if (a.id == id) return a;
        throw Error("unknown action id " + std::to_string(id));
    }

    const GoalDistribution& human_goal(int id) const {
        for (const auto& g : human_goals)
            if (g.id == id) return g;
        throw Error("unknown human goal id " + std::to_string(id));
    }

    void validate() const {
        if (place_actions().empty()) throw Error("config needs at least one place action");
        if (human_goals.empty()) throw Error("config needs at least one human goal");
        if (!(sample_period > 0.0)) throw Error("sample_period must be > 0");
        if (!(robot_nominal_speed > 0.0) || !(human_speed > 0.0)) throw Error("speeds must be > 0");
        if (slot_capacity < 1) throw Error("slot_capacity must be >= 1");
        for (const auto& g : human_goals)
            if (g.sigma.x < 0 || g.sigma.y < 0 || g.sigma.z < 0) throw Error("negative goal sigma");
        for (const auto& a : robot_actions)
            if (!a.goal.finite()) throw Error("non-finite action goal");
    }
};

/// Fill levels of the place slots; drives which place actions are legal.
class ProcessState {
public:
    ProcessState() = default;
    ProcessState(Variant variant, int capacity) : variant_(variant), capacity_(capacity) {}

    int fill(int slot) const {
        auto it = std::find_if(fill_.begin(), fill_.end(), [&](auto& p) { return p.first == slot; });
        return it == fill_.end() ? 0 : it->second;
    }

    bool full(int slot) const { return fill(slot) >= capacity_; }

    void set_fill(int slot, int count) {
        for (auto& p : fill_)
            if (p.first == slot) {
                p.second = count;
                return;
            }
        fill_.emplace_back(slot, count);
    }

    /// Records one item placed into `slot`, applying the variant's replacement rule.
    void record_place(int slot, const std::vector<RobotAction>& place_actions) {
        set_fill(slot, fill(slot) + 1);
        if (variant_ == Variant::continuous_flow) {
            if (full(slot)) set_fill(slot, 0);
            return;
        }
        bool all_full = true;
        for (const auto& a : place_actions)
            if (a.slot && !full(*a.slot)) all_full = false;
        if (all_full)
            for (auto& p : fill_) p.second = 0;
    }

    Variant variant() const { return variant_; }
    int capacity() const { return capacity_; }

private:
    Variant variant_ = Variant::continuous_flow;
    int capacity_ = 1;
    std::vector<std::pair<int, int>> fill_;
};

/// Legal place actions for the current fill state, in configuration order.
inline std::vector<RobotAction> available_actions(const std::vector<RobotAction>& place_actions,
                                                  const ProcessState& state) {
    if (state.variant() == Variant::continuous_flow) return place_actions;
    std::vector<RobotAction> open;
    bool all_full = true;
    for (const auto& a : place_actions) {
        if (a.slot && state.full(*a.slot)) continue;
        all_full = false;
        open.push_back(a);
    }
    // Batch replacement: once every box is full they are all swapped at once.
    if (all_full) return place_actions;
    return open;
}

}  // namespace hrcplan
