/*
 * candidefit - deformable 3D face model fitting and emotion features.
 *
 * File: include/candide/svm.hpp
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
#include <cstdint>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace candide {
namespace classify {

/// Polynomial kernel K(u, v) = (gamma u.v + coef0)^degree.
struct KernelParams
{
    int degree = 3;
    double gamma = 0.0; ///< 0 resolves to 1/dim at training time
    double coef0 = 1.0;
};

inline double kernel_value(const KernelParams& k, const Eigen::VectorXd& u,
                           const Eigen::VectorXd& v)
{
    const double base = k.gamma * u.dot(v) + k.coef0;
    double value = 1.0;
    for (int i = 0; i < k.degree; ++i)
        value *= base;
    return value;
}

/// Dual solution of one soft-margin binary problem.
struct SmoResult
{
    Eigen::VectorXd alpha;
    double bias = 0.0;
    int steps = 0;
};

/**
 * Sequential minimal optimization for the soft-margin dual
 *   min 1/2 a^T Q a - e^T a,  0 <= a_i <= C,  sum_i a_i y_i = 0,
 * with Q_ij = y_i y_j K_ij. Working pairs are chosen by maximal KKT
 * violation and the loop stops when the violation gap falls under `tol`.
 * Fully deterministic: no randomness. Exact ties in the violation values are
 * broken through `tie_samples` (lexicographic feature order, then label), so
 * the optimization path does not depend on the order samples arrive in; with
 * no tie key the lowest index wins.
 */
inline SmoResult smo_solve(const Eigen::MatrixXd& kernel, const Eigen::VectorXi& labels, double c,
                           double tol = 1e-3, long max_steps = 10000000,
                           const Eigen::MatrixXd* tie_samples = nullptr)
{
    const Eigen::Index n = kernel.rows();
    if (kernel.cols() != n || labels.size() != n)
        throw std::invalid_argument("smo_solve: inconsistent problem dimensions");

    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd gradient = Eigen::VectorXd::Constant(n, -1.0);

    auto in_up = [&](Eigen::Index t) {
        return labels[t] > 0 ? alpha[t] < c : alpha[t] > 0.0;
    };
    auto in_low = [&](Eigen::Index t) {
        return labels[t] > 0 ? alpha[t] > 0.0 : alpha[t] < c;
    };
    auto sample_precedes = [&](Eigen::Index a, Eigen::Index b) {
        if (tie_samples != nullptr)
        {
            for (Eigen::Index r = 0; r < tie_samples->rows(); ++r)
            {
                if ((*tie_samples)(r, a) != (*tie_samples)(r, b))
                    return (*tie_samples)(r, a) < (*tie_samples)(r, b);
            }
            if (labels[a] != labels[b])
                return labels[a] < labels[b];
        }
        return a < b;
    };

    SmoResult result;
    long step = 0;
    for (; step < max_steps; ++step)
    {
        // maximal violating pair
        Eigen::Index i = -1, j = -1;
        double up_max = -std::numeric_limits<double>::infinity();
        double low_min = std::numeric_limits<double>::infinity();
        for (Eigen::Index t = 0; t < n; ++t)
        {
            const double value = -labels[t] * gradient[t];
            if (in_up(t) && (value > up_max || (value == up_max && sample_precedes(t, i))))
            {
                up_max = value;
                i = t;
            }
            if (in_low(t) && (value < low_min || (value == low_min && sample_precedes(t, j))))
            {
                low_min = value;
                j = t;
            }
        }
        if (i < 0 || j < 0 || up_max - low_min <= tol)
            break;

        const double yi = labels[i], yj = labels[j];
        double eta = kernel(i, i) + kernel(j, j) - 2.0 * kernel(i, j);
        if (eta <= 0.0)
            eta = 1e-12;

        // analytic two-variable step with box clipping; E_i - E_j = y_i g_i - y_j g_j
        const double s = yi * yj;
        const double ai_old = alpha[i], aj_old = alpha[j];
        double low, high;
        if (s < 0.0)
        {
            low = std::max(0.0, aj_old - ai_old);
            high = std::min(c, c + aj_old - ai_old);
        }
        else
        {
            low = std::max(0.0, ai_old + aj_old - c);
            high = std::min(c, ai_old + aj_old);
        }
        // snap to the exact bounds so roundoff residue cannot keep a point
        // nominally free and stall the pair selection
        auto snap = [c](double a) {
            if (a < 1e-12 * c)
                return 0.0;
            if (a > c * (1.0 - 1e-12))
                return c;
            return a;
        };
        double aj_new = aj_old + yj * (yi * gradient[i] - yj * gradient[j]) / eta;
        aj_new = snap(std::min(high, std::max(low, aj_new)));
        const double ai_new = snap(ai_old + s * (aj_old - aj_new));
        const double delta_i = ai_new - ai_old;
        const double delta_j = aj_new - aj_old;
        if (delta_i == 0.0 && delta_j == 0.0)
            break; // clipped into a corner, no progress possible on this pair
        alpha[i] = ai_new;
        alpha[j] = aj_new;
        for (Eigen::Index t = 0; t < n; ++t)
            gradient[t] += labels[t] * (yi * kernel(t, i) * delta_i + yj * kernel(t, j) * delta_j);
    }

    // bias from the free support vectors, falling back to the gap midpoint
    double free_sum = 0.0;
    int free_count = 0;
    double up_max = -std::numeric_limits<double>::infinity();
    double low_min = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t)
    {
        const double value = -labels[t] * gradient[t];
        if (alpha[t] > 0.0 && alpha[t] < c)
        {
            free_sum += value;
            ++free_count;
        }
        if (in_up(t))
            up_max = std::max(up_max, value);
        if (in_low(t))
            low_min = std::min(low_min, value);
    }
    result.bias = free_count > 0 ? free_sum / free_count : 0.5 * (up_max + low_min);
    result.alpha = alpha;
    result.steps = static_cast<int>(step);
    return result;
}

/// One trained pairwise machine of the one-against-one scheme.
struct BinarySvm
{
    int class_a = 0; ///< positive side
    int class_b = 0; ///< negative side
    Eigen::MatrixXd support_vectors; ///< one column per support vector
    Eigen::VectorXd coefficients;    ///< alpha_i y_i per support vector
    double bias = 0.0;

    // full dual kept for diagnostics; not serialized
    Eigen::VectorXd alpha;
    Eigen::VectorXi labels_pm;
};

struct SvmModel
{
    std::vector<std::string> classes;
    KernelParams kernel;
    double c = 1.0;
    std::vector<BinarySvm> machines; ///< one per unordered class pair, (a, b) with a < b
};

struct SvmTrainOptions
{
    double c = 1.0;
    KernelParams kernel;
    double tol = 1e-3;
    long max_steps = 10000000;
};

/**
 * One-against-one training: one soft-margin binary machine per unordered
 * class pair, K(K-1)/2 in total, each solved by SMO on the pair's subset.
 * `labels` must index into `classes`. Features are expected normalized.
 */
inline SvmModel svm_train(const Eigen::MatrixXd& samples, const std::vector<int>& labels,
                          const std::vector<std::string>& classes,
                          const SvmTrainOptions& options = {})
{
    const Eigen::Index n = samples.cols();
    if (static_cast<Eigen::Index>(labels.size()) != n)
        throw std::invalid_argument("svm_train: label count mismatch");
    std::set<int> present(labels.begin(), labels.end());
    if (present.size() < 2)
        throw std::invalid_argument("svm_train: need at least two classes present");

    SvmModel model;
    model.classes = classes;
    model.c = options.c;
    model.kernel = options.kernel;
    if (model.kernel.gamma == 0.0)
        model.kernel.gamma = 1.0 / static_cast<double>(samples.rows());

    const int class_count = static_cast<int>(classes.size());
    for (int a = 0; a < class_count; ++a)
    {
        for (int b = a + 1; b < class_count; ++b)
        {
            std::vector<Eigen::Index> subset;
            int count_a = 0, count_b = 0;
            for (Eigen::Index t = 0; t < n; ++t)
            {
                const int label = labels[static_cast<std::size_t>(t)];
                if (label == a || label == b)
                {
                    subset.push_back(t);
                    (label == a ? count_a : count_b) += 1;
                }
            }
            if (count_a == 0 || count_b == 0)
                continue; // nothing to discriminate for this pair
            const Eigen::Index m = static_cast<Eigen::Index>(subset.size());
            Eigen::MatrixXd x(samples.rows(), m);
            Eigen::VectorXi y(m);
            for (Eigen::Index k = 0; k < m; ++k)
            {
                x.col(k) = samples.col(subset[static_cast<std::size_t>(k)]);
                y[k] = labels[static_cast<std::size_t>(subset[static_cast<std::size_t>(k)])] == a
                           ? 1
                           : -1;
            }
            Eigen::MatrixXd kernel_matrix(m, m);
            for (Eigen::Index p = 0; p < m; ++p)
                for (Eigen::Index q = 0; q <= p; ++q)
                    kernel_matrix(p, q) = kernel_matrix(q, p) =
                        kernel_value(model.kernel, x.col(p), x.col(q));

            const SmoResult solution =
                smo_solve(kernel_matrix, y, options.c, options.tol, options.max_steps, &x);

            BinarySvm machine;
            machine.class_a = a;
            machine.class_b = b;
            machine.alpha = solution.alpha;
            machine.labels_pm = y;
            machine.bias = solution.bias;
            std::vector<Eigen::Index> sv;
            for (Eigen::Index k = 0; k < m; ++k)
            {
                if (solution.alpha[k] > 0.0)
                    sv.push_back(k);
            }
            machine.support_vectors.resize(samples.rows(), static_cast<Eigen::Index>(sv.size()));
            machine.coefficients.resize(static_cast<Eigen::Index>(sv.size()));
            for (std::size_t k = 0; k < sv.size(); ++k)
            {
                machine.support_vectors.col(static_cast<Eigen::Index>(k)) = x.col(sv[k]);
                machine.coefficients[static_cast<Eigen::Index>(k)] =
                    solution.alpha[sv[k]] * y[sv[k]];
            }
            model.machines.push_back(std::move(machine));
        }
    }
    return model;
}

/// Signed decision value of one pairwise machine; positive favors class_a.
inline double svm_decision(const SvmModel& model, const BinarySvm& machine,
                           const Eigen::VectorXd& x)
{
    if (machine.support_vectors.cols() > 0 && machine.support_vectors.rows() != x.size())
        throw std::invalid_argument("svm_decision: dimension mismatch");
    double value = machine.bias;
    for (Eigen::Index k = 0; k < machine.support_vectors.cols(); ++k)
        value += machine.coefficients[k] *
                 kernel_value(model.kernel, machine.support_vectors.col(k), x);
    return value;
}

/// All pairwise decision values, in machine order.
inline std::vector<double> svm_decision_values(const SvmModel& model, const Eigen::VectorXd& x)
{
    std::vector<double> values;
    values.reserve(model.machines.size());
    for (const auto& machine : model.machines)
        values.push_back(svm_decision(model, machine, x));
    return values;
}

/**
 * One-against-one vote. Ties in vote count are broken by the summed
 * magnitudes of the winning decision values, then by lowest class index.
 */
inline int svm_predict_index(const SvmModel& model, const Eigen::VectorXd& x)
{
    const int class_count = static_cast<int>(model.classes.size());
    std::vector<int> votes(static_cast<std::size_t>(class_count), 0);
    std::vector<double> magnitude(static_cast<std::size_t>(class_count), 0.0);
    for (const auto& machine : model.machines)
    {
        const double value = svm_decision(model, machine, x);
        const int winner = value >= 0.0 ? machine.class_a : machine.class_b;
        votes[static_cast<std::size_t>(winner)] += 1;
        magnitude[static_cast<std::size_t>(winner)] += std::abs(value);
    }
    int best = 0;
    for (int k = 1; k < class_count; ++k)
    {
        const auto kk = static_cast<std::size_t>(k);
        const auto bb = static_cast<std::size_t>(best);
        if (votes[kk] > votes[bb] ||
            (votes[kk] == votes[bb] && magnitude[kk] > magnitude[bb]))
            best = k;
    }
    return best;
}

inline std::string svm_predict(const SvmModel& model, const Eigen::VectorXd& x)
{
    return model.classes[static_cast<std::size_t>(svm_predict_index(model, x))];
}

inline nlohmann::json svm_to_json(const SvmModel& model)
{
    nlohmann::json machines = nlohmann::json::array();
    for (const auto& machine : model.machines)
    {
        nlohmann::json sv = nlohmann::json::array();
        for (Eigen::Index k = 0; k < machine.support_vectors.cols(); ++k)
        {
            nlohmann::json column = nlohmann::json::array();
            for (Eigen::Index r = 0; r < machine.support_vectors.rows(); ++r)
                column.push_back(machine.support_vectors(r, k));
            sv.push_back(column);
        }
        nlohmann::json coefficients = nlohmann::json::array();
        for (Eigen::Index k = 0; k < machine.coefficients.size(); ++k)
            coefficients.push_back(machine.coefficients[k]);
        machines.push_back({{"class_a", machine.class_a},
                            {"class_b", machine.class_b},
                            {"support_vectors", sv},
                            {"coefficients", coefficients},
                            {"bias", machine.bias}});
    }
    return nlohmann::json{{"classes", model.classes},
                          {"kernel",
                           {{"degree", model.kernel.degree},
                            {"gamma", model.kernel.gamma},
                            {"coef0", model.kernel.coef0}}},
                          {"c", model.c},
                          {"machines", machines}};
}

inline SvmModel svm_from_json(const nlohmann::json& j)
{
    SvmModel model;
    model.classes = j.at("classes").get<std::vector<std::string>>();
    model.kernel.degree = j.at("kernel").at("degree").get<int>();
    model.kernel.gamma = j.at("kernel").at("gamma").get<double>();
    model.kernel.coef0 = j.at("kernel").at("coef0").get<double>();
    model.c = j.at("c").get<double>();
    for (const auto& machine_json : j.at("machines"))
    {
        BinarySvm machine;
        machine.class_a = machine_json.at("class_a").get<int>();
        machine.class_b = machine_json.at("class_b").get<int>();
        machine.bias = machine_json.at("bias").get<double>();
        const auto& sv = machine_json.at("support_vectors");
        const auto& coefficients = machine_json.at("coefficients");
        const Eigen::Index count = static_cast<Eigen::Index>(sv.size());
        const Eigen::Index dim =
            count > 0 ? static_cast<Eigen::Index>(sv.at(0).size()) : Eigen::Index(0);
        machine.support_vectors.resize(dim, count);
        machine.coefficients.resize(count);
        for (Eigen::Index k = 0; k < count; ++k)
        {
            for (Eigen::Index r = 0; r < dim; ++r)
                machine.support_vectors(r, k) =
                    sv.at(static_cast<std::size_t>(k)).at(static_cast<std::size_t>(r)).get<double>();
            machine.coefficients[k] = coefficients.at(static_cast<std::size_t>(k)).get<double>();
        }
        model.machines.push_back(std::move(machine));
    }
    return model;
}

} // namespace classify
} // namespace candide
