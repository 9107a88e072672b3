#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <vector>

#include "hrcplan/network.hpp"
#include "hrcplan/sim.hpp"

namespace hrcplan {

struct Dataset {
    std::vector<Sample> train;
    std::vector<Sample> test;
};

/// Seeded 80/20 split by episode; no episode contributes rows to both sides.
inline Dataset split_by_episode(const std::vector<Sample>& rows, std::uint64_t seed, double train_fraction = 0.8) {
    std::vector<int> episodes;
    {
        std::set<int> ids;
        for (const auto& r : rows) ids.insert(r.episode);
        episodes.assign(ids.begin(), ids.end());
    }
    Rng rng(seed);
    std::shuffle(episodes.begin(), episodes.end(), rng);
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(episodes.size())));
    if (episodes.size() >= 2) n_train = std::clamp<std::size_t>(n_train, 1, episodes.size() - 1);
    const std::set<int> train_ids(episodes.begin(), episodes.begin() + static_cast<std::ptrdiff_t>(n_train));
    Dataset d;
    for (const auto& r : rows) (train_ids.count(r.episode) ? d.train : d.test).push_back(r);
    return d;
}

inline Matrix feature_matrix(const std::vector<Sample>& rows) {
    Matrix m(ScalingPredictor::kInputs, static_cast<Eigen::Index>(rows.size()));
    for (std::size_t c = 0; c < rows.size(); ++c)
        for (int r = 0; r < ScalingPredictor::kInputs; ++r)
            m(r, static_cast<Eigen::Index>(c)) = rows[c].x[static_cast<std::size_t>(r)];
    return m;
}

inline Eigen::RowVectorXd target_vector(const std::vector<Sample>& rows) {
    Eigen::RowVectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) y(static_cast<Eigen::Index>(i)) = rows[i].y;
    return y;
}

/// Sets the input standardization from the given (training) rows.
inline void fit_normalization(ScalingPredictor& p, const std::vector<Sample>& rows) {
    if (rows.empty()) throw Error("empty split");
    const Matrix x = feature_matrix(rows);
    const Vector mean = x.rowwise().mean();
    Vector sd = ((x.colwise() - mean).array().square().rowwise().sum() / static_cast<double>(rows.size())).sqrt();
    for (Eigen::Index i = 0; i < sd.size(); ++i)
        if (sd(i) < 1e-9) sd(i) = 1.0;  // constant feature
    p.feature_mean() = mean;
    p.feature_std() = sd;
}

struct PredictionPair {
    double actual = 0.0;
    double predicted = 0.0;
};

/// Evaluation-mode MSE over rows, with the (actual, predicted) pairs.
inline double evaluate_mse(const ScalingPredictor& p, const std::vector<Sample>& rows,
                           std::vector<PredictionPair>* pairs = nullptr) {
    if (rows.empty()) throw Error("empty split");
    double sse = 0.0;
    constexpr std::size_t chunk = 4096;
    if (pairs) pairs->clear();
    for (std::size_t start = 0; start < rows.size(); start += chunk) {
        const std::size_t end = std::min(rows.size(), start + chunk);
        const std::vector<Sample> part(rows.begin() + static_cast<std::ptrdiff_t>(start),
                                       rows.begin() + static_cast<std::ptrdiff_t>(end));
        const Eigen::RowVectorXd out = p.forward(feature_matrix(part), false);
        for (std::size_t i = 0; i < part.size(); ++i) {
            const double pred = out(static_cast<Eigen::Index>(i));
            sse += (pred - part[i].y) * (pred - part[i].y);
            if (pairs) pairs->push_back({part[i].y, pred});
        }
    }
    return sse / static_cast<double>(rows.size());
}

struct TrainSchedule {
    int epochs = 200;
    int batch = 256;
    double learning_rate = 1e-3;
    int patience = 20;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
};

struct EpochStats {
    int epoch = 0;
    double train_mse = 0.0;
    double test_mse = 0.0;
};

struct TrainResult {
    ScalingPredictor predictor;
    std::vector<EpochStats> history;
    int best_epoch = 0;
    double best_test_mse = 0.0;
};

/// Thrown when the loss turns non-finite; carries the last finished-epoch weights.
class TrainingDiverged : public Error {
public:
    TrainingDiverged(ScalingPredictor checkpoint, int epoch)
        : Error("training diverged"), checkpoint_(std::move(checkpoint)), epoch_(epoch) {}
    const ScalingPredictor& checkpoint() const { return checkpoint_; }
    int epoch() const { return epoch_; }

private:
    ScalingPredictor checkpoint_;
    int epoch_;
};

/// Mini-batch Adam on the MSE loss. Input standardization is fitted on the
/// training split. Stops early once the test MSE has not improved for
/// `patience` epochs and returns the best-epoch weights.
inline TrainResult train(ScalingPredictor predictor, const Dataset& data, const TrainSchedule& schedule,
                         const std::function<void(const EpochStats&)>& on_epoch = {}) {
    if (data.train.empty() || data.test.empty()) throw Error("empty split");
    fit_normalization(predictor, data.train);
    const Matrix x_all = feature_matrix(data.train);
    const Eigen::RowVectorXd y_all = target_vector(data.train);

    const std::size_t n_params = predictor.size();
    std::vector<double> m(n_params, 0.0), v(n_params, 0.0), grad;
    Rng rng(schedule.seed);
    std::vector<Eigen::Index> order(data.train.size());
    std::iota(order.begin(), order.end(), Eigen::Index{0});

    TrainResult result{predictor, {}, 0, std::numeric_limits<double>::infinity()};
    ScalingPredictor stable = predictor;
    long step = 0;
    int since_best = 0;
    const auto batch = static_cast<std::size_t>(std::max(2, schedule.batch));

    for (int epoch = 1; epoch <= schedule.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            if (end - start < 2) break;  // batch norm needs two samples
            const auto b = static_cast<Eigen::Index>(end - start);
            Matrix xb(ScalingPredictor::kInputs, b);
            Eigen::RowVectorXd yb(b);
            for (Eigen::Index i = 0; i < b; ++i) {
                const auto src = order[start + static_cast<std::size_t>(i)];
                xb.col(i) = x_all.col(src);
                yb(i) = y_all(src);
            }
            ScalingPredictor::Cache cache;
            const double loss = predictor.loss_and_gradient(xb, yb, &grad, &cache);
            if (!std::isfinite(loss)) throw TrainingDiverged(stable, epoch);
            predictor.update_running_stats(cache);
            ++step;
            const double c1 = 1.0 - std::pow(schedule.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(schedule.beta2, static_cast<double>(step));
            auto& p = predictor.params();
            for (std::size_t i = 0; i < n_params; ++i) {
                m[i] = schedule.beta1 * m[i] + (1.0 - schedule.beta1) * grad[i];
                v[i] = schedule.beta2 * v[i] + (1.0 - schedule.beta2) * grad[i] * grad[i];
                p[i] -= schedule.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + schedule.adam_eps);
            }
            loss_sum += loss * static_cast<double>(b);
            seen += static_cast<std::size_t>(b);
        }
        EpochStats stats{epoch, seen ? loss_sum / static_cast<double>(seen) : 0.0, evaluate_mse(predictor, data.test)};
        if (!std::isfinite(stats.test_mse)) throw TrainingDiverged(stable, epoch);
        stable = predictor;
        result.history.push_back(stats);
        if (on_epoch) on_epoch(stats);
        if (stats.test_mse < result.best_test_mse) {
            result.best_test_mse = stats.test_mse;
            result.best_epoch = epoch;
            result.predictor = predictor;
            since_best = 0;
        } else if (++since_best >= schedule.patience) {
            break;
        }
    }
    return result;
}

}  // namespace hrcplan
