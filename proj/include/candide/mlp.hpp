/*
 * candidefit - deformable 3D face model fitting and emotion features.
 *
 * File: include/candide/mlp.hpp
 *
 * Copyright 2026 The candidefit authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "candide/rng.hpp"

namespace candide {
namespace classify {

enum class MlpArch
{
    au8_net, ///< dense 8->8 then dense 8->4, no inner activation
    fp68_net ///< dense 136->16, batch norm, rectifier, dropout 0.8, dense 16->4
};

inline const char* arch_name(MlpArch arch)
{
    return arch == MlpArch::au8_net ? "au8_net" : "fp68_net";
}

inline MlpArch arch_from_name(const std::string& name)
{
    if (name == "au8_net")
        return MlpArch::au8_net;
    if (name == "fp68_net")
        return MlpArch::fp68_net;
    throw std::invalid_argument("unknown architecture: " + name);
}

inline int arch_input_dim(MlpArch arch)
{
    return arch == MlpArch::au8_net ? 8 : 136;
}

inline int arch_hidden_dim(MlpArch arch)
{
    return arch == MlpArch::au8_net ? 8 : 16;
}

constexpr int mlp_output_dim = 4;

/**
 * The two small feed-forward classifiers. Samples are columns; the batch-norm
 * block and dropout exist only in the fp68 variant. Dropout is inverted
 * (train-time scaling by 1/keep), so evaluation runs the plain layers on the
 * running statistics.
 */
struct MlpModel
{
    MlpArch arch = MlpArch::au8_net;
    std::vector<std::string> classes;

    Eigen::MatrixXd w1, w2;
    Eigen::VectorXd b1, b2;

    // batch-norm state (fp68 only)
    Eigen::VectorXd bn_gamma, bn_beta, bn_running_mean, bn_running_var;
    double bn_momentum = 0.9;
    double bn_epsilon = 1e-5;
    double dropout_rate = 0.8;

    bool has_batch_norm() const { return arch == MlpArch::fp68_net; }
    int input_dim() const { return arch_input_dim(arch); }
    int hidden_dim() const { return arch_hidden_dim(arch); }
};

inline MlpModel mlp_zero_model(MlpArch arch)
{
    MlpModel model;
    model.arch = arch;
    const int in = arch_input_dim(arch);
    const int hidden = arch_hidden_dim(arch);
    model.w1 = Eigen::MatrixXd::Zero(hidden, in);
    model.b1 = Eigen::VectorXd::Zero(hidden);
    model.w2 = Eigen::MatrixXd::Zero(mlp_output_dim, hidden);
    model.b2 = Eigen::VectorXd::Zero(mlp_output_dim);
    model.bn_gamma = Eigen::VectorXd::Ones(hidden);
    model.bn_beta = Eigen::VectorXd::Zero(hidden);
    model.bn_running_mean = Eigen::VectorXd::Zero(hidden);
    model.bn_running_var = Eigen::VectorXd::Ones(hidden);
    return model;
}

/// He-uniform initialization with a deterministic fill order.
inline MlpModel mlp_init_model(MlpArch arch, Rng& rng)
{
    MlpModel model = mlp_zero_model(arch);
    auto fill = [&rng](Eigen::MatrixXd& w) {
        const double limit = std::sqrt(6.0 / static_cast<double>(w.cols()));
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c)
                w(r, c) = rng.uniform(-limit, limit);
    };
    fill(model.w1);
    fill(model.w2);
    return model;
}

/// Numerically stable column-wise softmax.
inline Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits)
{
    Eigen::MatrixXd probabilities(logits.rows(), logits.cols());
    for (Eigen::Index c = 0; c < logits.cols(); ++c)
    {
        const Eigen::VectorXd shifted =
            (logits.col(c).array() - logits.col(c).maxCoeff()).exp();
        probabilities.col(c) = shifted / shifted.sum();
    }
    return probabilities;
}

/// Evaluation-mode forward pass: batch norm on the running statistics, no
/// dropout. Returns class probabilities, one column per sample.
inline Eigen::MatrixXd mlp_forward_eval(const MlpModel& model, const Eigen::MatrixXd& samples)
{
    if (samples.rows() != model.input_dim())
        throw std::invalid_argument("mlp_forward: input dimension mismatch");
    Eigen::MatrixXd hidden = (model.w1 * samples).colwise() + model.b1;
    if (model.has_batch_norm())
    {
        const Eigen::ArrayXd scale =
            model.bn_gamma.array() / (model.bn_running_var.array() + model.bn_epsilon).sqrt();
        Eigen::ArrayXXd normalized = (hidden.colwise() - model.bn_running_mean).array();
        normalized.colwise() *= scale;
        normalized.colwise() += model.bn_beta.array();
        hidden = normalized.cwiseMax(0.0).matrix();
    }
    const Eigen::MatrixXd logits = (model.w2 * hidden).colwise() + model.b2;
    return softmax_columns(logits);
}

/**
 * Train-mode forward pass: batch statistics in the batch-norm block and a
 * fresh inverted-dropout mask from `rng`. Running statistics stay untouched.
 * Returns class probabilities, one column per sample.
 */
inline Eigen::MatrixXd mlp_forward_train(const MlpModel& model, const Eigen::MatrixXd& samples,
                                         Rng& rng)
{
    if (samples.rows() != model.input_dim())
        throw std::invalid_argument("mlp_forward: input dimension mismatch");
    Eigen::MatrixXd hidden = (model.w1 * samples).colwise() + model.b1;
    if (model.has_batch_norm())
    {
        const Eigen::ArrayXd mean = hidden.rowwise().mean().array();
        const Eigen::ArrayXd variance =
            (hidden.colwise() - mean.matrix()).array().square().rowwise().mean();
        Eigen::ArrayXXd normalized = (hidden.colwise() - mean.matrix()).array();
        normalized.colwise() *= (variance + model.bn_epsilon).sqrt().inverse();
        normalized.colwise() *= model.bn_gamma.array();
        normalized.colwise() += model.bn_beta.array();
        hidden = normalized.cwiseMax(0.0).matrix();
        const double keep_rate = 1.0 - model.dropout_rate;
        for (Eigen::Index r = 0; r < hidden.rows(); ++r)
            for (Eigen::Index c = 0; c < hidden.cols(); ++c)
                hidden(r, c) = rng.bernoulli(keep_rate) ? hidden(r, c) / keep_rate : 0.0;
    }
    return softmax_columns((model.w2 * hidden).colwise() + model.b2);
}

/// Gradients of the mean cross-entropy over a batch, one slot per parameter.
struct MlpGradients
{
    Eigen::MatrixXd w1, w2;
    Eigen::VectorXd b1, b2, bn_gamma, bn_beta;
};

/**
 * Train-mode forward and backward over one batch: batch statistics in the
 * batch-norm block, the supplied dropout keep mask (entries 0 or 1), softmax
 * cross-entropy averaged over the batch. Updates the running statistics when
 * `update_running` is set. Returns the loss.
 */
inline double mlp_loss_and_gradients(MlpModel& model, const Eigen::MatrixXd& samples,
                                     const std::vector<int>& labels,
                                     const Eigen::MatrixXd& dropout_keep, MlpGradients& grads,
                                     bool update_running = false)
{
    const Eigen::Index batch = samples.cols();
    if (static_cast<Eigen::Index>(labels.size()) != batch)
        throw std::invalid_argument("mlp_loss_and_gradients: label count mismatch");
    const double keep_rate = 1.0 - model.dropout_rate;

    // forward
    const Eigen::MatrixXd z1 = (model.w1 * samples).colwise() + model.b1;
    Eigen::MatrixXd hidden = z1;

    Eigen::ArrayXd batch_mean, batch_var, inv_std;
    Eigen::MatrixXd normalized;
    Eigen::MatrixXd relu_input;
    if (model.has_batch_norm())
    {
        batch_mean = z1.rowwise().mean().array();
        batch_var = (z1.colwise() - batch_mean.matrix()).array().square().rowwise().mean();
        inv_std = (batch_var + model.bn_epsilon).sqrt().inverse();
        {
            Eigen::ArrayXXd centered = (z1.colwise() - batch_mean.matrix()).array();
            centered.colwise() *= inv_std;
            normalized = centered.matrix();
            centered.colwise() *= model.bn_gamma.array();
            centered.colwise() += model.bn_beta.array();
            relu_input = centered.matrix();
        }
        hidden = relu_input.cwiseMax(0.0);
        hidden = hidden.cwiseProduct(dropout_keep) / keep_rate;
        if (update_running)
        {
            model.bn_running_mean = model.bn_momentum * model.bn_running_mean +
                                    (1.0 - model.bn_momentum) * batch_mean.matrix();
            model.bn_running_var = model.bn_momentum * model.bn_running_var +
                                   (1.0 - model.bn_momentum) * batch_var.matrix();
        }
    }

    const Eigen::MatrixXd logits = (model.w2 * hidden).colwise() + model.b2;
    const Eigen::MatrixXd probabilities = softmax_columns(logits);

    double loss = 0.0;
    Eigen::MatrixXd dlogits = probabilities;
    for (Eigen::Index c = 0; c < batch; ++c)
    {
        const int y = labels[static_cast<std::size_t>(c)];
        loss -= std::log(std::max(probabilities(y, c), 1e-300));
        dlogits(y, c) -= 1.0;
    }
    loss /= static_cast<double>(batch);
    dlogits /= static_cast<double>(batch);

    // backward
    grads.w2 = dlogits * hidden.transpose();
    grads.b2 = dlogits.rowwise().sum();
    Eigen::MatrixXd dhidden = model.w2.transpose() * dlogits;

    if (model.has_batch_norm())
    {
        dhidden = dhidden.cwiseProduct(dropout_keep) / keep_rate;
        dhidden = dhidden.cwiseProduct((relu_input.array() > 0.0).cast<double>().matrix());

        grads.bn_gamma = dhidden.cwiseProduct(normalized).rowwise().sum();
        grads.bn_beta = dhidden.rowwise().sum();

        // full batch-norm backward through the batch statistics
        const double inv_batch = 1.0 / static_cast<double>(batch);
        Eigen::ArrayXXd dnorm = dhidden.array();
        dnorm.colwise() *= model.bn_gamma.array();
        const Eigen::ArrayXd sum_dnorm = dnorm.rowwise().sum();
        const Eigen::ArrayXd sum_dnorm_norm = (dnorm * normalized.array()).rowwise().sum();
        Eigen::ArrayXXd dz1 = dnorm;
        dz1 -= normalized.array().colwise() * (sum_dnorm_norm * inv_batch);
        dz1.colwise() -= sum_dnorm * inv_batch;
        dz1.colwise() *= inv_std;
        grads.w1 = dz1.matrix() * samples.transpose();
        grads.b1 = dz1.matrix().rowwise().sum();
    }
    else
    {
        grads.bn_gamma = Eigen::VectorXd::Zero(model.hidden_dim());
        grads.bn_beta = Eigen::VectorXd::Zero(model.hidden_dim());
        grads.w1 = dhidden * samples.transpose();
        grads.b1 = dhidden.rowwise().sum();
    }
    return loss;
}

struct TrainConfig
{
    double learning_rate = 1e-3;
    double lr_factor = 0.5;       ///< halving on a validation plateau
    int plateau_patience = 10;    ///< epochs without improvement before halving
    double plateau_min_delta = 1e-6; ///< smallest loss decrease that counts
    double min_learning_rate = 1e-5;
    int batch_size = 32;
    int max_epochs = 500;
    std::uint64_t seed = 1;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;

    void validate() const
    {
        if (learning_rate <= 0.0 || lr_factor <= 0.0 || plateau_patience < 1 ||
            min_learning_rate <= 0.0 || batch_size < 1 || max_epochs < 1)
            throw std::invalid_argument("training configuration values must be positive");
    }
};

struct MlpTrainResult
{
    MlpModel model; ///< weights of the best validation epoch
    std::string log;
    std::vector<double> validation_accuracy;
    int best_epoch = 0;
    double best_accuracy = 0.0;
    double final_train_accuracy = 0.0;
};

inline int mlp_predict_index(const MlpModel& model, const Eigen::VectorXd& x)
{
    const Eigen::MatrixXd probabilities = mlp_forward_eval(model, x);
    const int limit = model.classes.empty() ? mlp_output_dim
                                            : std::min<int>(mlp_output_dim,
                                                            static_cast<int>(model.classes.size()));
    int best = 0;
    for (int k = 1; k < limit; ++k)
    {
        if (probabilities(k, 0) > probabilities(best, 0))
            best = k;
    }
    return best;
}

inline double mlp_accuracy(const MlpModel& model, const Eigen::MatrixXd& samples,
                           const std::vector<int>& labels)
{
    int correct = 0;
    for (Eigen::Index c = 0; c < samples.cols(); ++c)
    {
        if (mlp_predict_index(model, samples.col(c)) == labels[static_cast<std::size_t>(c)])
            ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(samples.cols());
}

/// Mean cross-entropy in evaluation mode.
inline double mlp_eval_loss(const MlpModel& model, const Eigen::MatrixXd& samples,
                            const std::vector<int>& labels)
{
    const Eigen::MatrixXd probabilities = mlp_forward_eval(model, samples);
    double loss = 0.0;
    for (Eigen::Index c = 0; c < samples.cols(); ++c)
        loss -= std::log(std::max(probabilities(labels[static_cast<std::size_t>(c)], c), 1e-300));
    return loss / static_cast<double>(samples.cols());
}

namespace detail {

struct AdamState
{
    Eigen::MatrixXd m, v;
    void init(Eigen::Index rows, Eigen::Index cols)
    {
        m = Eigen::MatrixXd::Zero(rows, cols);
        v = Eigen::MatrixXd::Zero(rows, cols);
    }
};

inline void adam_step(Eigen::Ref<Eigen::MatrixXd> parameter, const Eigen::MatrixXd& gradient,
                      AdamState& state, const TrainConfig& config, double lr, long step)
{
    state.m = config.adam_beta1 * state.m + (1.0 - config.adam_beta1) * gradient;
    state.v = config.adam_beta2 * state.v + (1.0 - config.adam_beta2) * gradient.cwiseAbs2();
    const double m_scale = 1.0 / (1.0 - std::pow(config.adam_beta1, static_cast<double>(step)));
    const double v_scale = 1.0 / (1.0 - std::pow(config.adam_beta2, static_cast<double>(step)));
    parameter.array() -= lr * (m_scale * state.m.array()) /
                         ((v_scale * state.v.array()).sqrt() + config.adam_epsilon);
}

inline std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

/**
 * Adam training with softmax cross-entropy, per-epoch Fisher-Yates shuffling,
 * inverted dropout, and learning-rate halving when the validation loss fails
 * to improve for `plateau_patience` epochs. Returns the weights of the best
 * validation epoch (highest accuracy, ties to the lower loss) and a per-epoch
 * log that is bitwise reproducible for a fixed seed.
 */
inline MlpTrainResult mlp_train(MlpArch arch, const Eigen::MatrixXd& train_x,
                                const std::vector<int>& train_y, const Eigen::MatrixXd& val_x,
                                const std::vector<int>& val_y,
                                const std::vector<std::string>& classes,
                                const TrainConfig& config = {})
{
    config.validate();
    if (train_x.cols() == 0 || val_x.cols() == 0)
        throw std::invalid_argument("mlp_train: empty split");
    if (train_x.rows() != arch_input_dim(arch))
        throw std::invalid_argument("mlp_train: input dimension mismatch");

    Rng rng(config.seed);
    MlpModel model = mlp_init_model(arch, rng);
    model.classes = classes;

    detail::AdamState adam_w1, adam_b1, adam_w2, adam_b2, adam_gamma, adam_beta;
    adam_w1.init(model.w1.rows(), model.w1.cols());
    adam_b1.init(model.b1.size(), 1);
    adam_w2.init(model.w2.rows(), model.w2.cols());
    adam_b2.init(model.b2.size(), 1);
    adam_gamma.init(model.bn_gamma.size(), 1);
    adam_beta.init(model.bn_beta.size(), 1);

    std::vector<Eigen::Index> order(static_cast<std::size_t>(train_x.cols()));
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = static_cast<Eigen::Index>(i);

    MlpTrainResult result;
    std::ostringstream log;
    double lr = config.learning_rate;
    MlpModel best_model = model;
    double best_accuracy = -1.0;
    double best_loss = std::numeric_limits<double>::infinity();
    double lr_best_loss = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    int stale_epochs = 0;
    long adam_t = 0;
    MlpGradients grads;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch)
    {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size))
        {
            const std::size_t size =
                std::min<std::size_t>(static_cast<std::size_t>(config.batch_size),
                                      order.size() - start);
            Eigen::MatrixXd batch_x(train_x.rows(), static_cast<Eigen::Index>(size));
            std::vector<int> batch_y(size);
            for (std::size_t k = 0; k < size; ++k)
            {
                batch_x.col(static_cast<Eigen::Index>(k)) = train_x.col(order[start + k]);
                batch_y[k] = train_y[static_cast<std::size_t>(order[start + k])];
            }
            Eigen::MatrixXd keep =
                Eigen::MatrixXd::Ones(model.hidden_dim(), static_cast<Eigen::Index>(size));
            if (model.has_batch_norm())
            {
                for (Eigen::Index r = 0; r < keep.rows(); ++r)
                    for (Eigen::Index c = 0; c < keep.cols(); ++c)
                        keep(r, c) = rng.bernoulli(1.0 - model.dropout_rate) ? 1.0 : 0.0;
            }
            epoch_loss +=
                mlp_loss_and_gradients(model, batch_x, batch_y, keep, grads, true);
            ++batches;
            ++adam_t;
            detail::adam_step(model.w1, grads.w1, adam_w1, config, lr, adam_t);
            detail::adam_step(model.b1, grads.b1, adam_b1, config, lr, adam_t);
            detail::adam_step(model.w2, grads.w2, adam_w2, config, lr, adam_t);
            detail::adam_step(model.b2, grads.b2, adam_b2, config, lr, adam_t);
            if (model.has_batch_norm())
            {
                detail::adam_step(model.bn_gamma, grads.bn_gamma, adam_gamma, config, lr, adam_t);
                detail::adam_step(model.bn_beta, grads.bn_beta, adam_beta, config, lr, adam_t);
            }
        }
        epoch_loss /= static_cast<double>(batches);

        const double val_accuracy = mlp_accuracy(model, val_x, val_y);
        const double val_loss = mlp_eval_loss(model, val_x, val_y);
        result.validation_accuracy.push_back(val_accuracy);
        log << "epoch " << epoch << " lr " << detail::format_double(lr) << " loss "
            << detail::format_double(epoch_loss) << " val_acc "
            << detail::format_double(val_accuracy) << " val_loss "
            << detail::format_double(val_loss) << '\n';

        // checkpoint on validation accuracy; exact ties resolved by the
        // lower validation loss so a plateauing metric still tracks progress
        if (val_accuracy > best_accuracy ||
            (val_accuracy == best_accuracy && val_loss < best_loss))
        {
            best_accuracy = val_accuracy;
            best_loss = val_loss;
            best_model = model;
            best_epoch = epoch;
        }

        // the learning-rate schedule watches the validation loss; accuracy
        // plateaus are step-shaped on small splits and would collapse the
        // rate long before the loss converges
        if (val_loss < lr_best_loss - config.plateau_min_delta)
        {
            lr_best_loss = val_loss;
            stale_epochs = 0;
        }
        else
        {
            ++stale_epochs;
            if (stale_epochs >= config.plateau_patience)
            {
                lr = std::max(lr * config.lr_factor, config.min_learning_rate);
                stale_epochs = 0;
            }
        }
    }

    result.model = best_model;
    result.best_epoch = best_epoch;
    result.best_accuracy = best_accuracy;
    result.final_train_accuracy = mlp_accuracy(best_model, train_x, train_y);
    log << "best epoch " << best_epoch << " val_acc " << detail::format_double(best_accuracy)
        << '\n';
    result.log = log.str();
    return result;
}

/// Deterministic stratified split: per class, a seeded shuffle sends
/// round(fraction * count) samples (at least one) to the second part.
inline std::pair<std::vector<int>, std::vector<int>>
stratified_split(const std::vector<int>& labels, int class_count, double fraction,
                 std::uint64_t seed)
{
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(class_count));
    for (std::size_t i = 0; i < labels.size(); ++i)
        by_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));
    Rng rng(seed);
    std::vector<int> first, second;
    for (auto& group : by_class)
    {
        rng.shuffle(group);
        if (group.empty())
            continue;
        const std::size_t take = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::lround(fraction * static_cast<double>(group.size()))));
        for (std::size_t k = 0; k < group.size(); ++k)
        {
            if (k < take)
                second.push_back(group[k]);
            else
                first.push_back(group[k]);
        }
    }
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
    return {first, second};
}

inline nlohmann::json mlp_to_json(const MlpModel& model)
{
    auto matrix_json = [](const Eigen::MatrixXd& m) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index r = 0; r < m.rows(); ++r)
        {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index c = 0; c < m.cols(); ++c)
                row.push_back(m(r, c));
            rows.push_back(row);
        }
        return rows;
    };
    auto vector_json = [](const Eigen::VectorXd& v) {
        nlohmann::json out = nlohmann::json::array();
        for (Eigen::Index i = 0; i < v.size(); ++i)
            out.push_back(v[i]);
        return out;
    };
    return nlohmann::json{{"arch", arch_name(model.arch)},
                          {"classes", model.classes},
                          {"w1", matrix_json(model.w1)},
                          {"b1", vector_json(model.b1)},
                          {"w2", matrix_json(model.w2)},
                          {"b2", vector_json(model.b2)},
                          {"bn_gamma", vector_json(model.bn_gamma)},
                          {"bn_beta", vector_json(model.bn_beta)},
                          {"bn_running_mean", vector_json(model.bn_running_mean)},
                          {"bn_running_var", vector_json(model.bn_running_var)},
                          {"bn_momentum", model.bn_momentum},
                          {"bn_epsilon", model.bn_epsilon},
                          {"dropout_rate", model.dropout_rate}};
}

inline MlpModel mlp_from_json(const nlohmann::json& j)
{
    MlpModel model = mlp_zero_model(arch_from_name(j.at("arch").get<std::string>()));
    model.classes = j.at("classes").get<std::vector<std::string>>();
    auto read_matrix = [&j](const char* key, Eigen::MatrixXd& m) {
        const auto& rows = j.at(key);
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c)
                m(r, c) = rows.at(static_cast<std::size_t>(r))
                              .at(static_cast<std::size_t>(c))
                              .get<double>();
    };
    auto read_vector = [&j](const char* key, Eigen::VectorXd& v) {
        const auto& values = j.at(key);
        for (Eigen::Index i = 0; i < v.size(); ++i)
            v[i] = values.at(static_cast<std::size_t>(i)).get<double>();
    };
    read_matrix("w1", model.w1);
    read_matrix("w2", model.w2);
    read_vector("b1", model.b1);
    read_vector("b2", model.b2);
    read_vector("bn_gamma", model.bn_gamma);
    read_vector("bn_beta", model.bn_beta);
    read_vector("bn_running_mean", model.bn_running_mean);
    read_vector("bn_running_var", model.bn_running_var);
    model.bn_momentum = j.at("bn_momentum").get<double>();
    model.bn_epsilon = j.at("bn_epsilon").get<double>();
    model.dropout_rate = j.at("dropout_rate").get<double>();
    return model;
}

} // namespace classify
} // namespace candide
