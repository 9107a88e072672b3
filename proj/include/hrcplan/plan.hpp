#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <concepts>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "hrcplan/config_io.hpp"
#include "hrcplan/core.hpp"

namespace hrcplan {

/// Anything that predicts the average scaling over the next window.
template <class M>
concept ScalingModel = requires(const M& m, Vec3 v) {
    { m.predict(v, v, v, v) } -> std::convertible_to<double>;
};

/// Observed state at a decision step plus what the planners need to look ahead.
struct PlannerContext {
    Vec3 x_r;
    Vec3 x_h;
    GoalDistribution current_goal;
    std::vector<RobotAction> available;
    // Look-ahead model: full place-action set, slot fill state, human goal set.
    std::vector<RobotAction> place_actions;
    ProcessState process;
    std::vector<GoalDistribution> human_goals;
};

namespace detail {

inline void require_actions(const std::vector<RobotAction>& actions) {
    if (actions.empty()) throw Error("no actions");
}

inline const RobotAction& lowest_id_best(const std::vector<RobotAction>& actions, const std::vector<double>& score) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < actions.size(); ++i) {
        if (score[i] > score[best] || (score[i] == score[best] && actions[i].id < actions[best].id)) best = i;
    }
    return actions[best];
}

}  // namespace detail

/// Per-action predictions used by greedy selection, in `ctx.available` order.
template <ScalingModel M>
std::vector<double> greedy_scores(const M& model, const PlannerContext& ctx) {
    std::vector<double> scores;
    scores.reserve(ctx.available.size());
    for (const auto& a : ctx.available)
        scores.push_back(model.predict(ctx.x_r, ctx.x_h, get_robot_goal(a), ctx.current_goal.mu));
    return scores;
}

/// Action with the highest predicted average scaling; ties go to the lowest id.
template <ScalingModel M>
RobotAction greedy_select(const M& model, const PlannerContext& ctx) {
    detail::require_actions(ctx.available);
    return detail::lowest_id_best(ctx.available, greedy_scores(model, ctx));
}

/// Look-ahead state inside Monte Carlo planning.
struct PlanState {
    Vec3 x_r;
    ProcessState process;
    int depth = 0;  // decision steps taken so far, root included
};

struct Propagation {
    Vec3 x_r;
    double reward = 0.0;
};

/// One decision step of the look-ahead model: the robot ends at the action's
/// goal and the reward is the predicted scaling with a human drawn from `goal`
/// (or at `observed_x_h` when the human position is known).
template <ScalingModel M>
Propagation propagate(const M& model, Vec3 x_r, const GoalDistribution& goal, const RobotAction& action, Rng& rng,
                      const Vec3* observed_x_h = nullptr) {
    const Vec3 g_r = get_robot_goal(action);
    const Vec3 x_h = observed_x_h ? *observed_x_h : sample_goal(goal, rng);
    return {g_r, model.predict(x_r, x_h, g_r, goal.mu)};
}

inline bool is_terminal(const PlanState& s, const PlannerContext& ctx, int max_len) {
    return s.depth >= max_len || available_actions(ctx.place_actions, s.process).empty();
}

inline void apply_action(PlanState& s, const RobotAction& action, const std::vector<RobotAction>& place_actions) {
    s.x_r = get_robot_goal(action);
    if (action.slot) s.process.record_place(*action.slot, place_actions);
    ++s.depth;
}

/// Random continuation to a terminal state: uniform action, uniform human goal,
/// undiscounted sum of propagated rewards.
template <ScalingModel M>
double perform_rollout(const M& model, PlanState state, const PlannerContext& ctx, int max_len, Rng& rng,
                       int* propagations = nullptr) {
    double total = 0.0;
    while (!is_terminal(state, ctx, max_len)) {
        const auto actions = available_actions(ctx.place_actions, state.process);
        std::uniform_int_distribution<std::size_t> pick_action(0, actions.size() - 1);
        const RobotAction& action = actions[pick_action(rng)];
        std::uniform_int_distribution<std::size_t> pick_goal(0, ctx.human_goals.size() - 1);
        const GoalDistribution& goal = ctx.human_goals[pick_goal(rng)];
        const auto step = propagate(model, state.x_r, goal, action, rng);
        total += step.reward;
        apply_action(state, action, ctx.place_actions);
        state.x_r = step.x_r;
        if (propagations) ++*propagations;
    }
    return total;
}

struct ActionEvaluation {
    int action_id = 0;
    double root_reward = 0.0;
    double total_reward = 0.0;   // root reward + discounted rollout rewards
    std::size_t iterations = 0;  // completed rollouts
    double score = 0.0;          // total_reward / iterations
    bool terminal = false;       // child state had nothing to roll out
    std::vector<double> rollout_rewards;
};

struct MonteCarloResult {
    RobotAction action;
    std::vector<ActionEvaluation> evaluations;  // in ctx.available order
    std::vector<std::string> warnings;
};

/// Scores one candidate: propagate from the observed state, then discounted
/// random rollouts until the time budget or rollout cap is exhausted.
template <ScalingModel M>
ActionEvaluation evaluate_action(const M& model, const PlannerContext& ctx, const RobotAction& action,
                                 const MonteCarloParams& params, std::uint64_t seed,
                                 std::chrono::steady_clock::time_point deadline) {
    Rng rng(seed);
    ActionEvaluation ev;
    ev.action_id = action.id;
    const auto root = propagate(model, ctx.x_r, ctx.current_goal, action, rng, &ctx.x_h);
    ev.root_reward = root.reward;
    ev.total_reward = root.reward;
    PlanState state{ctx.x_r, ctx.process, 0};
    apply_action(state, action, ctx.place_actions);
    state.x_r = root.x_r;
    // A terminal child has nothing to roll out; its value is the root reward.
    if (is_terminal(state, ctx, params.max_len)) {
        ev.terminal = true;
        ev.score = ev.total_reward;
        return ev;
    }
    double discount = 1.0;
    while (std::chrono::steady_clock::now() < deadline) {
        if (params.max_rollouts > 0 && ev.iterations >= params.max_rollouts) break;
        const double reward = perform_rollout(model, state, ctx, params.max_len, rng);
        ev.rollout_rewards.push_back(reward);
        ev.total_reward += discount * reward;
        discount *= params.gamma;
        ++ev.iterations;
    }
    ev.score = ev.iterations > 0 ? ev.total_reward / static_cast<double>(ev.iterations) : ev.total_reward;
    return ev;
}

/// Parallel Monte Carlo selection: one worker thread per available action,
/// each with its own RNG stream derived from (seed, action id).
template <ScalingModel M>
MonteCarloResult monte_carlo_select(const M& model, const PlannerContext& ctx, const MonteCarloParams& params,
                                    std::uint64_t seed) {
    detail::require_actions(ctx.available);
    params.validate();
    MonteCarloResult result;
    if (ctx.available.size() == 1) {
        result.action = ctx.available.front();
        return result;
    }
    const auto deadline =
        std::chrono::steady_clock::now() +
        std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(params.budget));
    result.evaluations.resize(ctx.available.size());
    {
        std::vector<std::jthread> workers;
        workers.reserve(ctx.available.size());
        for (std::size_t i = 0; i < ctx.available.size(); ++i) {
            workers.emplace_back([&, i] {
                const auto& action = ctx.available[i];
                result.evaluations[i] = evaluate_action(
                    model, ctx, action, params, derive_seed(seed, static_cast<std::uint64_t>(action.id)), deadline);
            });
        }
    }
    std::vector<double> scores;
    for (const auto& ev : result.evaluations) {
        scores.push_back(ev.score);
        if (ev.iterations == 0 && !ev.terminal)
            result.warnings.push_back("action " + std::to_string(ev.action_id) +
                                      ": no rollout finished within budget; scored by propagate reward");
    }
    result.action = detail::lowest_id_best(ctx.available, scores);
    return result;
}

// ---------------------------------------------------------------------------
// Baselines

inline RobotAction baseline_random(const PlannerContext& ctx, Rng& rng) {
    detail::require_actions(ctx.available);
    std::uniform_int_distribution<std::size_t> pick(0, ctx.available.size() - 1);
    return ctx.available[pick(rng)];
}

/// Next action id after `last_id` in cyclic id order, skipping unavailable ones.
inline RobotAction baseline_round_robin(const PlannerContext& ctx, int last_id) {
    detail::require_actions(ctx.available);
    std::vector<RobotAction> sorted = ctx.available;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (const auto& a : sorted)
        if (a.id > last_id) return a;
    return sorted.front();
}

/// Available action whose goal is furthest from the current human position.
inline RobotAction baseline_reactive(const PlannerContext& ctx) {
    detail::require_actions(ctx.available);
    std::vector<double> d;
    for (const auto& a : ctx.available) d.push_back(distance(get_robot_goal(a), ctx.x_h));
    return detail::lowest_id_best(ctx.available, d);
}

}  // namespace hrcplan
