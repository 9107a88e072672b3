#pragma once

#include <array>
#include <cstdio>
#include <deque>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hrcplan/core.hpp"
#include "hrcplan/safety.hpp"

namespace hrcplan {

struct HumanModel {
    enum class Phase { walking, dwelling };

    Vec3 position;
    GoalDistribution goal;
    std::vector<Vec3> path;  // start, randomized midpoint, randomized goal
    std::size_t next_waypoint = 0;
    double speed = 1.0;
    double dwell_remaining = 0.0;
    Phase phase = Phase::dwelling;
};

struct RobotModel {
    enum class Phase { idle, moving, dwelling };
    /// Where the robot is inside one pick-and-place task.
    enum class Stage { to_place, placing, to_pick, picking };

    Vec3 position;
    Vec3 goal;
    double nominal_speed = 0.25;
    double current_scaling = 1.0;
    Phase phase = Phase::idle;
    Stage stage = Stage::picking;
    double dwell_remaining = 0.0;
    int action_id = -1;
    std::optional<int> slot;
};

struct LogRecord {
    int episode = 0;
    double t = 0.0;
    Vec3 x_r, x_h, g_r, g_h_mu;
    double s = 1.0;
};

/// One shared-workspace simulation. Human and robot randomness use separate
/// streams so the human's behaviour does not depend on the robot's choices.
class World {
public:
    World(const WorkspaceConfig& config, std::uint64_t seed)
        : config_(&config),
          safety_(config.safety),
          human_rng_(derive_seed(seed, 1)),
          process_(config.variant, config.slot_capacity),
          place_actions_(config.place_actions()) {
        config.validate();
        const auto& pick = config.pick_action();
        robot_.position = pick.goal;
        robot_.goal = pick.goal;
        robot_.nominal_speed = config.robot_nominal_speed;
        robot_.phase = RobotModel::Phase::idle;

        human_.speed = config.human_speed;
        std::uniform_int_distribution<std::size_t> pick_goal(0, config.human_goals.size() - 1);
        human_.goal = config.human_goals[pick_goal(human_rng_)];
        human_.position = sample_goal(human_.goal, human_rng_);
        human_.path = {human_.position};
        human_.phase = HumanModel::Phase::dwelling;
        std::uniform_real_distribution<double> frac(0.0, 1.0);
        human_.dwell_remaining = config.dwell.human * frac(human_rng_);
        visits_.push_back(human_.goal.id);
    }

    const WorkspaceConfig& config() const { return *config_; }
    const StaircaseSafety& safety() const { return safety_; }
    const HumanModel& human() const { return human_; }
    HumanModel& human() { return human_; }
    const RobotModel& robot() const { return robot_; }
    RobotModel& robot() { return robot_; }
    const ProcessState& process() const { return process_; }
    ProcessState& process() { return process_; }
    const std::vector<RobotAction>& place_actions() const { return place_actions_; }
    double time() const { return t_; }
    long tick() const { return tick_; }
    /// Human goal ids in the order they were selected.
    const std::vector<int>& goal_visits() const { return visits_; }

    double current_scaling() const { return safety_(robot_.position, human_.position); }

    bool robot_idle() const { return robot_.phase == RobotModel::Phase::idle; }

    std::vector<RobotAction> available() const { return available_actions(place_actions_, process_); }

    /// Starts a place task; the robot then returns to the pick point and picks.
    void dispatch(const RobotAction& action) {
        robot_.action_id = action.id;
        robot_.slot = action.slot;
        robot_.goal = get_robot_goal(action);
        robot_.stage = RobotModel::Stage::to_place;
        robot_.phase = RobotModel::Phase::moving;
    }

    /// Human picks its next operation uniformly and plans a randomized path to it.
    void replan_human() {
        const auto& goals = config_->human_goals;
        std::uniform_int_distribution<std::size_t> pick_goal(0, goals.size() - 1);
        human_.goal = goals[pick_goal(human_rng_)];
        visits_.push_back(human_.goal.id);
        const Vec3 target = sample_goal(human_.goal, human_rng_);
        Vec3 mid = 0.5 * (human_.position + human_.goal.mu);
        const double sd = config_->human_midpoint_sigma;
        if (sd > 0.0) {
            std::normal_distribution<double> unit(0.0, 1.0);
            const double dx = sd * unit(human_rng_);
            const double dy = sd * unit(human_rng_);
            mid.x += dx;
            mid.y += dy;
        }
        human_.path = {human_.position, mid, target};
        human_.next_waypoint = 1;
        human_.phase = HumanModel::Phase::walking;
    }

    /// Advances both agents by dt. Returns the scaling applied to the robot.
    double step(double dt) {
        const double s = current_scaling();
        robot_.current_scaling = s;
        advance_human(dt);
        advance_robot(dt, s);
        t_ += dt;
        ++tick_;
        return s;
    }

private:
    static constexpr double kTimeEps = 1e-9;

    static double move_toward(Vec3& pos, Vec3 target, double travel) {
        const Vec3 delta = target - pos;
        const double remaining = delta.norm();
        if (travel >= remaining) {
            pos = target;
            return travel - remaining;
        }
        pos = pos + (travel / remaining) * delta;
        return 0.0;
    }

    void advance_human(double dt) {
        if (human_.phase == HumanModel::Phase::dwelling) {
            human_.dwell_remaining -= dt;
            if (human_.dwell_remaining <= kTimeEps) replan_human();
            return;
        }
        double travel = human_.speed * dt;
        while (travel > 0.0 && human_.next_waypoint < human_.path.size()) {
            const Vec3 wp = human_.path[human_.next_waypoint];
            const double left = move_toward(human_.position, wp, travel);
            if (human_.position == wp) ++human_.next_waypoint;
            travel = left;
            if (left <= 0.0) break;
        }
        if (human_.next_waypoint >= human_.path.size()) {
            human_.phase = HumanModel::Phase::dwelling;
            human_.dwell_remaining = config_->dwell.human;
        }
    }

    void advance_robot(double dt, double s) {
        using P = RobotModel::Phase;
        using S = RobotModel::Stage;
        if (robot_.phase == P::moving) {
            move_toward(robot_.position, robot_.goal, robot_.nominal_speed * s * dt);
            if (robot_.position == robot_.goal) {
                robot_.phase = P::dwelling;
                robot_.stage = robot_.stage == S::to_place ? S::placing : S::picking;
                robot_.dwell_remaining = robot_.stage == S::placing ? config_->dwell.place : config_->dwell.pick;
                if (robot_.dwell_remaining <= kTimeEps) finish_dwell();
            }
        } else if (robot_.phase == P::dwelling) {
            robot_.dwell_remaining -= dt;
            if (robot_.dwell_remaining <= kTimeEps) finish_dwell();
        }
    }

    void finish_dwell() {
        using P = RobotModel::Phase;
        using S = RobotModel::Stage;
        if (robot_.stage == S::placing) {
            if (robot_.slot) process_.record_place(*robot_.slot, place_actions_);
            robot_.stage = S::to_pick;
            robot_.goal = config_->pick_action().goal;
            robot_.phase = robot_.position == robot_.goal ? P::dwelling : P::moving;
            if (robot_.phase == P::dwelling) {
                robot_.stage = S::picking;
                robot_.dwell_remaining = config_->dwell.pick;
            }
        } else {
            robot_.phase = P::idle;
        }
    }

    const WorkspaceConfig* config_;
    StaircaseSafety safety_;
    Rng human_rng_;
    ProcessState process_;
    std::vector<RobotAction> place_actions_;
    HumanModel human_;
    RobotModel robot_;
    double t_ = 0.0;
    long tick_ = 0;
    std::vector<int> visits_;
};

inline double step_sim(World& world, double dt) {
    if (!(dt > 0.0)) throw Error("step dt must be > 0");
    return world.step(dt);
}

/// What a policy sees at a decision step.
struct DecisionContext {
    Vec3 x_r;
    Vec3 x_h;
    GoalDistribution human_goal;
    std::vector<RobotAction> available;
    ProcessState process;
    double t = 0.0;
};

using Policy = std::function<int(const DecisionContext&)>;

struct TaskRecord {
    int episode = 0;
    int task_index = 0;
    int action_id = 0;
    double start_t = 0.0;
    double end_t = 0.0;
    double mean_scaling = 0.0;
};

struct EpisodeLimits {
    std::optional<double> duration;
    std::optional<int> tasks;
};

struct EpisodeResult {
    ScalingTrace trace;
    std::vector<LogRecord> log;
    std::vector<TaskRecord> tasks;
    std::vector<double> decision_times;  // tau(k)

    double mean_scaling() const {
        if (trace.s.empty()) return 0.0;
        double sum = 0.0;
        for (double s : trace.s) sum += s;
        return sum / static_cast<double>(trace.s.size());
    }
};

/// Runs one episode, querying `policy` whenever the robot becomes idle.
/// With `lead_time` > 0 the policy sees the human as observed that long before the decision.
inline EpisodeResult run_episode(const WorkspaceConfig& config, std::uint64_t seed, int episode, const Policy& policy,
                                 const EpisodeLimits& limits, double lead_time = 0.0) {
    if (!limits.duration && !limits.tasks) throw Error("episode needs a duration or task limit");
    World world(config, seed);
    const double dt = config.sample_period;
    EpisodeResult out;
    out.trace.t0 = 0.0;
    out.trace.period = dt;

    const auto lead_ticks = static_cast<std::size_t>(std::llround(lead_time / dt));
    std::deque<std::pair<Vec3, GoalDistribution>> seen;

    int task_index = 0;
    bool in_task = false;
    TaskRecord current;
    double task_scaling_sum = 0.0;
    long task_ticks = 0;

    auto close_task = [&](double end_t) {
        current.end_t = end_t;
        current.mean_scaling = task_ticks > 0 ? task_scaling_sum / static_cast<double>(task_ticks) : 0.0;
        out.tasks.push_back(current);
        in_task = false;
        ++task_index;
    };

    for (;;) {
        const long k = world.tick();
        const double t = static_cast<double>(k) * dt;
        if (limits.duration && t >= *limits.duration - 1e-9) break;

        seen.emplace_back(world.human().position, world.human().goal);
        if (seen.size() > lead_ticks + 1) seen.pop_front();

        if (world.robot_idle()) {
            if (in_task) close_task(t);
            if (limits.tasks && task_index >= *limits.tasks) break;
            DecisionContext ctx;
            ctx.x_r = world.robot().position;
            ctx.x_h = seen.front().first;
            ctx.human_goal = seen.front().second;
            ctx.available = world.available();
            ctx.process = world.process();
            ctx.t = t;
            if (ctx.available.empty()) break;
            const int chosen = policy(ctx);
            const RobotAction* action = nullptr;
            for (const auto& a : ctx.available)
                if (a.id == chosen) action = &a;
            if (!action) throw Error("illegal action");
            world.dispatch(*action);
            out.decision_times.push_back(t);
            current = TaskRecord{episode, task_index, chosen, t, 0.0, 0.0};
            in_task = true;
            task_scaling_sum = 0.0;
            task_ticks = 0;
        }

        const double s = world.current_scaling();
        LogRecord rec;
        rec.episode = episode;
        rec.t = t;
        rec.x_r = world.robot().position;
        rec.x_h = world.human().position;
        rec.g_r = world.robot().goal;
        rec.g_h_mu = world.human().goal.mu;
        rec.s = s;
        out.log.push_back(rec);
        out.trace.s.push_back(s);
        if (in_task) {
            task_scaling_sum += s;
            ++task_ticks;
        }
        world.step(dt);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Log and metrics files

inline const char* kLogHeader = "episode,t,xr_x,xr_y,xr_z,xh_x,xh_y,xh_z,gr_x,gr_y,gr_z,gh_x,gh_y,gh_z,s";
inline const char* kMetricsHeader = "episode,task_index,action_id,start_t,end_t,mean_scaling";

namespace detail {

inline void append_num(std::string& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    out += buf;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
}

}  // namespace detail

inline std::string format_log(const std::vector<LogRecord>& records) {
    std::string out = std::string(kLogHeader) + "\n";
    for (const auto& r : records) {
        out += std::to_string(r.episode);
        for (double v : {r.t, r.x_r.x, r.x_r.y, r.x_r.z, r.x_h.x, r.x_h.y, r.x_h.z, r.g_r.x, r.g_r.y, r.g_r.z,
                         r.g_h_mu.x, r.g_h_mu.y, r.g_h_mu.z, r.s}) {
            out += ',';
            detail::append_num(out, v);
        }
        out += '\n';
    }
    return out;
}

inline std::vector<LogRecord> parse_log(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kLogHeader) throw Error("log: bad header");
    std::vector<LogRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c = detail::split_csv(line);
        if (c.size() != 15) throw Error("log: expected 15 columns");
        std::array<double, 14> v{};
        for (std::size_t i = 0; i < 14; ++i) v[i] = std::stod(c[i + 1]);
        LogRecord r;
        r.episode = std::stoi(c[0]);
        r.t = v[0];
        r.x_r = {v[1], v[2], v[3]};
        r.x_h = {v[4], v[5], v[6]};
        r.g_r = {v[7], v[8], v[9]};
        r.g_h_mu = {v[10], v[11], v[12]};
        r.s = v[13];
        out.push_back(r);
    }
    return out;
}

inline std::string format_metrics(const std::vector<TaskRecord>& tasks) {
    std::string out = std::string(kMetricsHeader) + "\n";
    for (const auto& t : tasks) {
        out += std::to_string(t.episode) + ',' + std::to_string(t.task_index) + ',' + std::to_string(t.action_id);
        for (double v : {t.start_t, t.end_t, t.mean_scaling}) {
            out += ',';
            detail::append_num(out, v);
        }
        out += '\n';
    }
    return out;
}

inline std::vector<TaskRecord> parse_metrics(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader) throw Error("metrics: bad header");
    std::vector<TaskRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c = detail::split_csv(line);
        if (c.size() != 6) throw Error("metrics: expected 6 columns");
        out.push_back({std::stoi(c[0]), std::stoi(c[1]), std::stoi(c[2]), std::stod(c[3]), std::stod(c[4]),
                       std::stod(c[5])});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Training windows

inline constexpr std::size_t kFeatureCount = 12;
using Features = std::array<double, kFeatureCount>;

inline Features make_features(Vec3 x_r, Vec3 x_h, Vec3 g_r, Vec3 g_h_mu) {
    return {x_r.x, x_r.y, x_r.z, x_h.x, x_h.y, x_h.z, g_r.x, g_r.y, g_r.z, g_h_mu.x, g_h_mu.y, g_h_mu.z};
}

struct Sample {
    Features x{};
    double y = 0.0;
    int episode = 0;
};

/// One (features, windowed-average target) row per record that has `n` later
/// samples in the same episode. Windows never cross episode boundaries.
inline std::vector<Sample> build_training_set(const std::vector<LogRecord>& logs, std::size_t n,
                                              std::size_t stride = 1) {
    if (n < 1) throw Error("window length must be >= 1");
    if (stride < 1) stride = 1;
    std::vector<Sample> out;
    std::size_t begin = 0;
    while (begin < logs.size()) {
        std::size_t end = begin;
        while (end < logs.size() && logs[end].episode == logs[begin].episode) ++end;
        ScalingTrace trace;
        trace.t0 = logs[begin].t;
        trace.period = end - begin > 1 ? logs[begin + 1].t - logs[begin].t : 1.0;
        for (std::size_t i = begin; i < end; ++i) trace.s.push_back(logs[i].s);
        for (std::size_t i = begin; i + n < end; i += stride) {
            const auto& r = logs[i];
            Sample smp;
            smp.x = make_features(r.x_r, r.x_h, r.g_r, r.g_h_mu);
            smp.y = window_average(trace, r.t, n);
            smp.episode = r.episode;
            out.push_back(smp);
        }
        begin = end;
    }
    if (out.empty()) throw Error("no trainable windows");
    return out;
}

}  // namespace hrcplan
