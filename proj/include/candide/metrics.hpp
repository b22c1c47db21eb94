/*
 * candidefit - deformable 3D face model fitting and emotion features.
 *
 * File: include/candide/metrics.hpp
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

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace candide {
namespace metrics {

/**
 * K x K count matrix with C(i, j) = number of samples of true class i
 * predicted as class j.
 */
class ConfusionMatrix
{
public:
    explicit ConfusionMatrix(int class_count)
        : class_count_(class_count),
          counts_(static_cast<std::size_t>(class_count) * static_cast<std::size_t>(class_count), 0)
    {
        if (class_count < 1)
            throw std::invalid_argument("confusion matrix needs at least one class");
    }

    static ConfusionMatrix from_pairs(const std::vector<std::pair<int, int>>& pairs,
                                      int class_count)
    {
        ConfusionMatrix m(class_count);
        for (const auto& [truth, predicted] : pairs)
            m.add(truth, predicted);
        return m;
    }

    /// Adds `count` (possibly negative) to one cell; entries stay >= 0.
    void add(int truth, int predicted, std::int64_t count = 1)
    {
        if (truth < 0 || truth >= class_count_ || predicted < 0 || predicted >= class_count_)
            throw std::out_of_range("confusion matrix index out of range");
        std::int64_t& cell = counts_[index(truth, predicted)];
        if (cell + count < 0)
            throw std::invalid_argument("confusion matrix counts are non-negative");
        cell += count;
    }

    std::int64_t operator()(int truth, int predicted) const
    {
        return counts_[index(truth, predicted)];
    }

    int class_count() const { return class_count_; }

    std::int64_t total() const
    {
        std::int64_t n = 0;
        for (const auto c : counts_)
            n += c;
        return n;
    }

    std::int64_t trace() const
    {
        std::int64_t t = 0;
        for (int k = 0; k < class_count_; ++k)
            t += counts_[index(k, k)];
        return t;
    }

    std::int64_t row_sum(int i) const
    {
        std::int64_t s = 0;
        for (int j = 0; j < class_count_; ++j)
            s += counts_[index(i, j)];
        return s;
    }

    std::int64_t col_sum(int j) const
    {
        std::int64_t s = 0;
        for (int i = 0; i < class_count_; ++i)
            s += counts_[index(i, j)];
        return s;
    }

private:
    std::size_t index(int i, int j) const
    {
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(class_count_) +
               static_cast<std::size_t>(j);
    }

    int class_count_;
    std::vector<std::int64_t> counts_;
};

/// Fraction of correct predictions: trace / N.
inline double accuracy(const ConfusionMatrix& m)
{
    const std::int64_t n = m.total();
    if (n == 0)
        throw std::invalid_argument("accuracy: empty confusion matrix");
    return static_cast<double>(m.trace()) / static_cast<double>(n);
}

/**
 * Chance-corrected agreement kappa = (p_o - p_e) / (1 - p_e), with the
 * observed agreement p_o = trace / N and the chance agreement p_e the inner
 * product of the row and column marginal distributions.
 */
inline double cohens_kappa(const ConfusionMatrix& m)
{
    const std::int64_t total = m.total();
    if (total == 0)
        throw std::invalid_argument("cohens_kappa: empty confusion matrix");
    const double n = static_cast<double>(total);
    const double p_o = static_cast<double>(m.trace()) / n;
    double p_e = 0.0;
    for (int k = 0; k < m.class_count(); ++k)
        p_e += (static_cast<double>(m.row_sum(k)) / n) * (static_cast<double>(m.col_sum(k)) / n);
    if (p_e == 1.0)
        throw std::invalid_argument("cohens_kappa: degenerate marginals");
    return (p_o - p_e) / (1.0 - p_e);
}

/// F_beta = (1 + beta^2) / (1/precision + beta^2/recall); beta = 1 gives the
/// harmonic mean of precision and recall.
inline double f_beta(double precision, double recall, double beta)
{
    if (precision <= 0.0 && recall <= 0.0)
        throw std::invalid_argument("f_beta: precision and recall are both zero");
    if (beta == 0.0)
        return precision;
    return (1.0 + beta * beta) / (1.0 / precision + (beta * beta) / recall);
}

struct PerClassStats
{
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t support = 0;
};

/// Per-class precision, recall and F1. Zero denominators yield zeros rather
/// than dividing; absent classes report all-zero rows.
inline std::vector<PerClassStats> per_class_stats(const ConfusionMatrix& m)
{
    std::vector<PerClassStats> stats(static_cast<std::size_t>(m.class_count()));
    for (int k = 0; k < m.class_count(); ++k)
    {
        PerClassStats& s = stats[static_cast<std::size_t>(k)];
        const double tp = static_cast<double>(m(k, k));
        const double predicted = static_cast<double>(m.col_sum(k));
        const double actual = static_cast<double>(m.row_sum(k));
        s.support = m.row_sum(k);
        s.precision = predicted > 0.0 ? tp / predicted : 0.0;
        s.recall = actual > 0.0 ? tp / actual : 0.0;
        s.f1 = (s.precision + s.recall) > 0.0
                   ? 2.0 * (s.precision * s.recall) / (s.precision + s.recall)
                   : 0.0;
    }
    return stats;
}

/// Support-weighted mean of the per-class F1 scores.
inline double weighted_f1(const ConfusionMatrix& m)
{
    const std::int64_t total = m.total();
    if (total == 0)
        throw std::invalid_argument("weighted_f1: empty confusion matrix");
    const double n = static_cast<double>(total);
    double weighted = 0.0;
    for (int k = 0; k < m.class_count(); ++k)
    {
        const double support = static_cast<double>(m.row_sum(k));
        if (support == 0.0)
            continue;
        const double tp = static_cast<double>(m(k, k));
        const double predicted = static_cast<double>(m.col_sum(k));
        const double precision = predicted > 0.0 ? tp / predicted : 0.0;
        const double recall = tp / support;
        const double f1 =
            (precision + recall) > 0.0 ? 2.0 * (precision * recall) / (precision + recall) : 0.0;
        weighted += (support / n) * f1;
    }
    return weighted;
}

/// Unweighted mean of the per-class F1 scores.
inline double macro_f1(const ConfusionMatrix& m)
{
    const auto stats = per_class_stats(m);
    double sum = 0.0;
    for (const auto& s : stats)
        sum += s.f1;
    return sum / static_cast<double>(stats.size());
}

/// Full evaluation report in the file format the CLI emits.
inline nlohmann::json report_json(const ConfusionMatrix& m,
                                  const std::vector<std::string>& class_names)
{
    if (static_cast<int>(class_names.size()) != m.class_count())
        throw std::invalid_argument("report_json: class name count mismatch");
    nlohmann::json confusion = nlohmann::json::array();
    for (int i = 0; i < m.class_count(); ++i)
    {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < m.class_count(); ++j)
            row.push_back(m(i, j));
        confusion.push_back(row);
    }
    nlohmann::json per_class;
    const auto stats = per_class_stats(m);
    for (int k = 0; k < m.class_count(); ++k)
    {
        const auto& s = stats[static_cast<std::size_t>(k)];
        per_class[class_names[static_cast<std::size_t>(k)]] = {{"precision", s.precision},
                                                               {"recall", s.recall},
                                                               {"f1", s.f1},
                                                               {"support", s.support}};
    }
    return nlohmann::json{{"classes", class_names},
                          {"confusion", confusion},
                          {"accuracy", accuracy(m)},
                          {"kappa", cohens_kappa(m)},
                          {"weighted_f1", weighted_f1(m)},
                          {"macro_f1", macro_f1(m)},
                          {"per_class", per_class}};
}

} // namespace metrics
} // namespace candide
