#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hrcplan/core.hpp"
#include "hrcplan/sim.hpp"

namespace hrcplan {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;
using VectorMap = Eigen::Map<Vector>;
using ConstVectorMap = Eigen::Map<const Vector>;

/// Hidden-layer count used for a given step count K.
inline int default_hidden_count(int k) { return k <= 5 ? 5 : 6; }

/// Feed-forward scaling regressor.
///
///   standardize(12) -> [Linear(64, no bias) -> BatchNorm -> ReLU] x hidden_count
///                   -> Linear(K) -> Softmax -> Linear(1)
///
/// The output is beta0 + sum_i beta_i p_i with p on the probability simplex, so
/// the head mixes K learned plateau levels. All trainable parameters live in one
/// flat vector; the accessors below are views into it.
class ScalingPredictor {
public:
    static constexpr int kInputs = static_cast<int>(kFeatureCount);
    static constexpr double kBnEps = 1e-5;
    static constexpr double kBnMomentum = 0.9;

    ScalingPredictor() = default;

    ScalingPredictor(int k, int hidden_count, int width = 64) : k_(k), hidden_count_(hidden_count), width_(width) {
        if (k < 1) throw Error("network: K must be >= 1");
        if (hidden_count < 1) throw Error("network: hidden_count must be >= 1");
        if (width < 1) throw Error("network: width must be >= 1");
        layout();
        params_.assign(total_, 0.0);
        running_mean_.assign(static_cast<std::size_t>(hidden_count_), Vector::Zero(width_));
        running_var_.assign(static_cast<std::size_t>(hidden_count_), Vector::Ones(width_));
        feat_mean_ = Vector::Zero(kInputs);
        feat_std_ = Vector::Ones(kInputs);
    }

    /// Closed-form trainable parameter count.
    static std::size_t parameter_count(int k, int hidden_count, int width = 64) {
        const auto w = static_cast<std::size_t>(width);
        std::size_t n = w * kInputs + 2 * w;
        n += static_cast<std::size_t>(hidden_count - 1) * (w * w + 2 * w);
        n += static_cast<std::size_t>(k) * w + static_cast<std::size_t>(k);
        n += static_cast<std::size_t>(k) + 1;
        return n;
    }

    int k() const { return k_; }
    int hidden_count() const { return hidden_count_; }
    int width() const { return width_; }
    std::size_t size() const { return total_; }

    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    // Parameter views ------------------------------------------------------
    MatrixMap hidden_weight(int l) { return {params_.data() + w_off_[l], width_, in_dim(l)}; }
    ConstMatrixMap hidden_weight(int l) const { return {params_.data() + w_off_[l], width_, in_dim(l)}; }
    VectorMap bn_gamma(int l) { return {params_.data() + g_off_[l], width_}; }
    ConstVectorMap bn_gamma(int l) const { return {params_.data() + g_off_[l], width_}; }
    VectorMap bn_beta(int l) { return {params_.data() + b_off_[l], width_}; }
    ConstVectorMap bn_beta(int l) const { return {params_.data() + b_off_[l], width_}; }
    MatrixMap softmax_weight() { return {params_.data() + sw_off_, k_, width_}; }
    ConstMatrixMap softmax_weight() const { return {params_.data() + sw_off_, k_, width_}; }
    VectorMap softmax_bias() { return {params_.data() + sb_off_, k_}; }
    ConstVectorMap softmax_bias() const { return {params_.data() + sb_off_, k_}; }
    VectorMap output_weight() { return {params_.data() + ow_off_, k_}; }
    ConstVectorMap output_weight() const { return {params_.data() + ow_off_, k_}; }
    double& output_bias() { return params_[ob_off_]; }
    double output_bias() const { return params_[ob_off_]; }

    Vector& running_mean(int l) { return running_mean_[static_cast<std::size_t>(l)]; }
    const Vector& running_mean(int l) const { return running_mean_[static_cast<std::size_t>(l)]; }
    Vector& running_var(int l) { return running_var_[static_cast<std::size_t>(l)]; }
    const Vector& running_var(int l) const { return running_var_[static_cast<std::size_t>(l)]; }
    Vector& feature_mean() { return feat_mean_; }
    const Vector& feature_mean() const { return feat_mean_; }
    Vector& feature_std() { return feat_std_; }
    const Vector& feature_std() const { return feat_std_; }

    /// He-normal hidden weights, Glorot softmax weights, unit BN scale.
    void initialize(std::uint64_t seed) {
        Rng rng(seed);
        std::normal_distribution<double> unit(0.0, 1.0);
        std::fill(params_.begin(), params_.end(), 0.0);
        for (int l = 0; l < hidden_count_; ++l) {
            auto w = hidden_weight(l);
            const double sd = std::sqrt(2.0 / in_dim(l));
            for (Eigen::Index c = 0; c < w.cols(); ++c)
                for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = sd * unit(rng);
            bn_gamma(l).setOnes();
            bn_beta(l).setZero();
            running_mean(l).setZero();
            running_var(l).setOnes();
        }
        auto sw = softmax_weight();
        const double sd = std::sqrt(2.0 / (width_ + k_));
        for (Eigen::Index c = 0; c < sw.cols(); ++c)
            for (Eigen::Index r = 0; r < sw.rows(); ++r) sw(r, c) = sd * unit(rng);
        auto ow = output_weight();
        for (Eigen::Index i = 0; i < ow.size(); ++i) ow(i) = std::sqrt(1.0 / k_) * unit(rng);
        output_bias() = 0.0;
    }

    // Forward passes ---------------------------------------------------------

    /// Training-mode activations kept for backprop.
    struct Cache {
        std::vector<Matrix> input;   // layer inputs (first is the standardized batch)
        std::vector<Matrix> xhat;    // normalized pre-activations
        std::vector<Vector> inv_std;
        std::vector<Vector> batch_mean;
        std::vector<Vector> batch_var;
        std::vector<Matrix> pre_relu;
        Matrix last_hidden;
        Matrix probs;                // K x B softmax outputs
        Eigen::RowVectorXd output;
    };

    Matrix standardize(const Matrix& raw) const {
        return (raw.colwise() - feat_mean_).array().colwise() / feat_std_.array();
    }

    static Matrix softmax_columns(const Matrix& z) {
        Matrix p = z.rowwise() - z.colwise().maxCoeff();
        p = p.array().exp();
        const Eigen::RowVectorXd sums = p.colwise().sum();
        return p.array().rowwise() / sums.array();
    }

    /// Forward pass over a batch (features in columns). Training mode uses batch
    /// statistics in batch norm; evaluation mode uses the running averages.
    Eigen::RowVectorXd forward(const Matrix& raw, bool training, Cache* cache = nullptr) const {
        Matrix a = standardize(raw);
        const auto b = static_cast<double>(raw.cols());
        if (cache) *cache = Cache{};
        for (int l = 0; l < hidden_count_; ++l) {
            Matrix z = hidden_weight(l) * a;
            Vector mean, var;
            if (training) {
                mean = z.rowwise().mean();
                var = (z.colwise() - mean).array().square().rowwise().sum() / b;
            } else {
                mean = running_mean(l);
                var = running_var(l);
            }
            const Vector inv_std = (var.array() + kBnEps).rsqrt();
            Matrix xhat = (z.colwise() - mean).array().colwise() * inv_std.array();
            Matrix y = (xhat.array().colwise() * bn_gamma(l).array()).colwise() + bn_beta(l).array();
            if (cache) {
                cache->input.push_back(a);
                cache->xhat.push_back(xhat);
                cache->inv_std.push_back(inv_std);
                cache->batch_mean.push_back(mean);
                cache->batch_var.push_back(var);
                cache->pre_relu.push_back(y);
            }
            a = y.cwiseMax(0.0);
        }
        const Matrix logits = (softmax_weight() * a).colwise() + softmax_bias();
        const Matrix probs = softmax_columns(logits);
        Eigen::RowVectorXd out = (output_weight().transpose() * probs).array() + output_bias();
        if (cache) {
            cache->last_hidden = a;
            cache->probs = probs;
            cache->output = out;
        }
        return out;
    }

    /// Softmax-layer activations for one input (evaluation mode).
    Vector penultimate(const Features& f) const {
        Cache c;
        forward(column(f), false, &c);
        return c.probs.col(0);
    }

    double predict_raw(const Features& f) const {
        for (double v : f)
            if (!std::isfinite(v)) throw Error("invalid feature");
        return forward(column(f), false)(0);
    }

    double predict_raw(Vec3 x_r, Vec3 x_h, Vec3 g_r, Vec3 g_h_mu) const {
        return predict_raw(make_features(x_r, x_h, g_r, g_h_mu));
    }

    /// Predicted average scaling clamped to [0,1] for planners.
    double predict(Vec3 x_r, Vec3 x_h, Vec3 g_r, Vec3 g_h_mu) const {
        return std::clamp(predict_raw(x_r, x_h, g_r, g_h_mu), 0.0, 1.0);
    }

    // Loss and gradients -------------------------------------------------------

    /// Mean squared error over the batch in training mode; fills `grad` (same
    /// layout as params()) when given.
    double loss_and_gradient(const Matrix& raw, const Eigen::RowVectorXd& target, std::vector<double>* grad,
                             Cache* cache_out = nullptr) const {
        Cache cache;
        const Eigen::RowVectorXd out = forward(raw, true, &cache);
        const Eigen::RowVectorXd err = out - target;
        const auto b = static_cast<double>(raw.cols());
        const double loss = err.squaredNorm() / b;
        if (grad) {
            grad->assign(total_, 0.0);
            backward(cache, (2.0 / b) * err, *grad);
        }
        if (cache_out) *cache_out = std::move(cache);
        return loss;
    }

    /// Blends batch statistics from a training step into the running averages.
    void update_running_stats(const Cache& cache) {
        for (int l = 0; l < hidden_count_; ++l) {
            const auto i = static_cast<std::size_t>(l);
            const double n = static_cast<double>(cache.input[i].cols());
            const Vector unbiased = n > 1 ? Vector(cache.batch_var[i] * (n / (n - 1))) : cache.batch_var[i];
            running_mean(l) = kBnMomentum * running_mean(l) + (1.0 - kBnMomentum) * cache.batch_mean[i];
            running_var(l) = kBnMomentum * running_var(l) + (1.0 - kBnMomentum) * unbiased;
        }
    }

    // Serialization ----------------------------------------------------------

    nlohmann::ordered_json to_json() const {
        using nlohmann::ordered_json;
        auto mat = [](const auto& m) {
            ordered_json rows = ordered_json::array();
            for (Eigen::Index r = 0; r < m.rows(); ++r) {
                ordered_json row = ordered_json::array();
                for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
                rows.push_back(row);
            }
            return rows;
        };
        auto vec = [](const auto& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
        ordered_json j;
        j["version"] = 1;
        j["K"] = k_;
        j["hidden_count"] = hidden_count_;
        j["width"] = width_;
        j["feature_norm"] = {{"mean", vec(feat_mean_)}, {"std", vec(feat_std_)}};
        ordered_json layers = ordered_json::array();
        for (int l = 0; l < hidden_count_; ++l)
            layers.push_back({{"weight", mat(hidden_weight(l))},
                              {"bn_gamma", vec(bn_gamma(l))},
                              {"bn_beta", vec(bn_beta(l))},
                              {"running_mean", vec(running_mean(l))},
                              {"running_var", vec(running_var(l))}});
        j["hidden"] = layers;
        j["softmax"] = {{"weight", mat(softmax_weight())}, {"bias", vec(softmax_bias())}};
        j["output"] = {{"weight", vec(output_weight())}, {"bias", output_bias()}};
        return j;
    }

    static ScalingPredictor from_json(const nlohmann::ordered_json& j) {
        try {
            if (j.at("version").get<int>() != 1) throw Error("model: unsupported version");
            ScalingPredictor p(j.at("K").get<int>(), j.at("hidden_count").get<int>(), j.value("width", 64));
            auto read_vec = [](const auto& src, auto&& dst, const char* what) {
                const auto v = src.template get<std::vector<double>>();
                if (static_cast<Eigen::Index>(v.size()) != dst.size()) throw Error(std::string("model: bad size for ") + what);
                for (std::size_t i = 0; i < v.size(); ++i) dst(static_cast<Eigen::Index>(i)) = v[i];
            };
            auto read_mat = [](const auto& src, auto&& dst, const char* what) {
                if (static_cast<Eigen::Index>(src.size()) != dst.rows()) throw Error(std::string("model: bad rows for ") + what);
                for (Eigen::Index r = 0; r < dst.rows(); ++r) {
                    const auto row = src[static_cast<std::size_t>(r)].template get<std::vector<double>>();
                    if (static_cast<Eigen::Index>(row.size()) != dst.cols()) throw Error(std::string("model: bad cols for ") + what);
                    for (Eigen::Index c = 0; c < dst.cols(); ++c) dst(r, c) = row[static_cast<std::size_t>(c)];
                }
            };
            read_vec(j.at("feature_norm").at("mean"), p.feature_mean(), "feature mean");
            read_vec(j.at("feature_norm").at("std"), p.feature_std(), "feature std");
            const auto& layers = j.at("hidden");
            if (static_cast<int>(layers.size()) != p.hidden_count()) throw Error("model: layer count mismatch");
            for (int l = 0; l < p.hidden_count(); ++l) {
                const auto& jl = layers[static_cast<std::size_t>(l)];
                read_mat(jl.at("weight"), p.hidden_weight(l), "hidden weight");
                read_vec(jl.at("bn_gamma"), p.bn_gamma(l), "bn_gamma");
                read_vec(jl.at("bn_beta"), p.bn_beta(l), "bn_beta");
                read_vec(jl.at("running_mean"), p.running_mean(l), "running_mean");
                read_vec(jl.at("running_var"), p.running_var(l), "running_var");
            }
            read_mat(j.at("softmax").at("weight"), p.softmax_weight(), "softmax weight");
            read_vec(j.at("softmax").at("bias"), p.softmax_bias(), "softmax bias");
            read_vec(j.at("output").at("weight"), p.output_weight(), "output weight");
            p.output_bias() = j.at("output").at("bias").get<double>();
            return p;
        } catch (const nlohmann::json::exception& e) {
            throw Error(std::string("model: ") + e.what());
        }
    }

    static Matrix column(const Features& f) {
        Matrix m(kInputs, 1);
        for (int i = 0; i < kInputs; ++i) m(i, 0) = f[static_cast<std::size_t>(i)];
        return m;
    }

private:
    int in_dim(int l) const { return l == 0 ? kInputs : width_; }

    void layout() {
        std::size_t off = 0;
        for (int l = 0; l < hidden_count_; ++l) {
            w_off_.push_back(off);
            off += static_cast<std::size_t>(width_ * in_dim(l));
            g_off_.push_back(off);
            off += static_cast<std::size_t>(width_);
            b_off_.push_back(off);
            off += static_cast<std::size_t>(width_);
        }
        sw_off_ = off;
        off += static_cast<std::size_t>(k_ * width_);
        sb_off_ = off;
        off += static_cast<std::size_t>(k_);
        ow_off_ = off;
        off += static_cast<std::size_t>(k_);
        ob_off_ = off;
        total_ = off + 1;
    }

    void backward(const Cache& c, const Eigen::RowVectorXd& d_out, std::vector<double>& grad) const {
        const auto b = static_cast<double>(d_out.size());
        VectorMap(grad.data() + ow_off_, k_) = c.probs * d_out.transpose();
        grad[ob_off_] = d_out.sum();
        const Matrix d_probs = output_weight() * d_out;
        const Eigen::RowVectorXd dot = (c.probs.array() * d_probs.array()).colwise().sum();
        const Matrix d_logits = c.probs.array() * (d_probs.rowwise() - dot).array();
        MatrixMap(grad.data() + sw_off_, k_, width_) = d_logits * c.last_hidden.transpose();
        VectorMap(grad.data() + sb_off_, k_) = d_logits.rowwise().sum();
        Matrix d_a = softmax_weight().transpose() * d_logits;
        for (int l = hidden_count_ - 1; l >= 0; --l) {
            const auto i = static_cast<std::size_t>(l);
            const Matrix d_y = (c.pre_relu[i].array() > 0.0).select(d_a, 0.0);
            VectorMap(grad.data() + g_off_[i], width_) = (d_y.array() * c.xhat[i].array()).rowwise().sum();
            VectorMap(grad.data() + b_off_[i], width_) = d_y.rowwise().sum();
            const Matrix d_xhat = d_y.array().colwise() * bn_gamma(l).array();
            const Vector sum_dx = d_xhat.rowwise().sum();
            const Vector sum_dx_xhat = (d_xhat.array() * c.xhat[i].array()).rowwise().sum();
            const Matrix d_z = ((b * d_xhat.array()).colwise() - sum_dx.array() -
                                c.xhat[i].array().colwise() * sum_dx_xhat.array())
                                   .colwise() *
                               (c.inv_std[i].array() / b);
            MatrixMap(grad.data() + w_off_[i], width_, in_dim(l)) = d_z * c.input[i].transpose();
            if (l > 0) d_a = hidden_weight(l).transpose() * d_z;
        }
    }

    int k_ = 1;
    int hidden_count_ = 1;
    int width_ = 64;
    std::size_t total_ = 0;
    std::vector<std::size_t> w_off_, g_off_, b_off_;
    std::size_t sw_off_ = 0, sb_off_ = 0, ow_off_ = 0, ob_off_ = 0;
    std::vector<double> params_;
    std::vector<Vector> running_mean_, running_var_;
    Vector feat_mean_, feat_std_;
};

/// Untrained predictor with the default hidden-layer count for K unless one is given.
inline ScalingPredictor build_network(int k, int hidden_count, std::uint64_t seed, int width = 64) {
    if (hidden_count <= 0) hidden_count = default_hidden_count(k);
    ScalingPredictor p(k, hidden_count, width);
    p.initialize(seed);
    return p;
}

/// Largest relative gap between analytic and central finite-difference
/// gradients of the batch MSE (batch norm in training mode).
///
/// Relative error is |a - n| / max(|a| + |n|, floor); the floor keeps
/// parameters with vanishing gradient from dominating through round-off.
inline double gradient_check(const ScalingPredictor& predictor, const Matrix& raw, const Eigen::RowVectorXd& target,
                             double step = 1e-5, double floor = 1e-6) {
    std::vector<double> analytic;
    predictor.loss_and_gradient(raw, target, &analytic);
    ScalingPredictor probe = predictor;
    double worst = 0.0;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double orig = probe.params()[i];
        probe.params()[i] = orig + step;
        const double up = probe.loss_and_gradient(raw, target, nullptr);
        probe.params()[i] = orig - step;
        const double down = probe.loss_and_gradient(raw, target, nullptr);
        probe.params()[i] = orig;
        const double numeric = (up - down) / (2.0 * step);
        const double rel = std::abs(analytic[i] - numeric) / std::max(std::abs(analytic[i]) + std::abs(numeric), floor);
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace hrcplan
