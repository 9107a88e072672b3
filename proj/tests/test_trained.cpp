// Checks that need a network trained on simulator data. One model is trained
// once for the whole suite.

#include <gtest/gtest.h>

#include "support.hpp"

using namespace hrcplan;

namespace {

struct Trained {
    ScenarioFile scenario;
    Dataset data;
    ModelFile model;
};

const Trained& trained() {
    static const Trained t = [] {
        Trained out;
        out.scenario = testing_support::default_scenario();
        const auto runs = run_episodes(
            out.scenario.workspace, 100, 7, [](std::uint64_t s) { return make_policy("random", {}, s); }, 10);
        std::vector<LogRecord> logs;
        for (const auto& r : runs) logs.insert(logs.end(), r.log.begin(), r.log.end());
        const auto rows = build_training_set(logs, window_samples(out.scenario), 5);
        out.data = split_by_episode(rows, 1);
        TrainSchedule sched;
        sched.seed = 3;
        const auto r = train(build_network(5, 0, 2), out.data, sched);
        out.model.network = r.predictor;
        out.model.test_mse = r.best_test_mse;
        return out;
    }();
    return t;
}

}  // namespace

TEST(Trained, TestErrorIsSmall) { EXPECT_LE(trained().model.test_mse, 1.5e-2); }

TEST(Trained, ExtremeDecilesAreCalibrated) {
    // Bin held-out rows by prediction: the top and bottom deciles must sit where
    // the model says and be well apart.
    const auto& t = trained();
    std::vector<std::pair<double, double>> rows;  // (predicted, actual)
    for (const auto& s : t.data.test) rows.emplace_back(t.model.network.predict_raw(s.x), s.y);
    std::sort(rows.begin(), rows.end());
    const std::size_t tenth = rows.size() / 10;
    ASSERT_GT(tenth, 50u);
    auto means = [&](std::size_t from) {
        double p = 0, y = 0;
        for (std::size_t i = from; i < from + tenth; ++i) {
            p += rows[i].first;
            y += rows[i].second;
        }
        return std::pair{p / tenth, y / tenth};
    };
    const auto [p_lo, y_lo] = means(0);
    const auto [p_hi, y_hi] = means(rows.size() - tenth);
    EXPECT_NEAR(p_lo, y_lo, 0.05);
    EXPECT_NEAR(p_hi, y_hi, 0.05);
    EXPECT_GT(y_hi - y_lo, 0.2);
}

TEST(Trained, GreedyAvoidsBoxesNextToTheHuman) {
    const auto& t = trained();
    const auto& w = t.scenario.workspace;
    // Human goal 1 sits beside boxes 1 and 2 (left side); boxes 3 and 4 are on the far side.
    const auto& goal = w.human_goal(1);
    ASSERT_LT(goal.mu.x, 0.0);
    Rng rng(4);
    for (int i = 0; i < 50; ++i) {
        PlannerContext ctx;
        ctx.x_r = w.pick_action().goal;
        ctx.x_h = sample_goal(goal, rng);
        ctx.current_goal = goal;
        ctx.available = w.place_actions();
        const auto scores = greedy_scores(t.model, ctx);
        ASSERT_EQ(scores.size(), 4u);
        EXPECT_LT(scores[0], std::max(scores[2], scores[3]));
        EXPECT_LT(scores[1], std::max(scores[2], scores[3]));
        EXPECT_NE(greedy_select(t.model, ctx).id, 1);
    }
}
