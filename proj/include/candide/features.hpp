/*
 * candidefit - deformable 3D face model fitting and emotion features.
 *
 * File: include/candide/features.hpp
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

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "candide/fitting.hpp"

namespace candide {
namespace features {

enum class FeatureKind
{
    au8,
    fp68
};

inline int dimension_of(FeatureKind kind)
{
    return kind == FeatureKind::au8 ? 8 : 136;
}

inline const char* name_of(FeatureKind kind)
{
    return kind == FeatureKind::au8 ? "au8" : "fp68";
}

inline FeatureKind kind_from_name(const std::string& name)
{
    if (name == "au8")
        return FeatureKind::au8;
    if (name == "fp68")
        return FeatureKind::fp68;
    throw std::invalid_argument("unknown feature kind: " + name + " (expected au8 or fp68)");
}

/// One classifier input with an optional class label.
struct FeatureVector
{
    FeatureKind kind = FeatureKind::au8;
    Eigen::VectorXd values;
    std::string label; ///< empty when unlabeled

    bool valid() const { return values.size() == dimension_of(kind) && values.allFinite(); }
};

/// Per-dimension z-score statistics, fitted on the training split only.
struct NormStats
{
    Eigen::VectorXd mu;
    Eigen::VectorXd sigma;
    double epsilon = 1e-8; ///< divisor floor for constant dimensions
};

/// Flattens a landmark frame to the interleaved (x0, y0, x1, y1, ...) layout.
inline FeatureVector fp68_vector(const fitting::LandmarkFrame& frame)
{
    if (frame.points.cols() != model::landmark_count)
        throw std::invalid_argument("fp68_vector: frame must hold 68 points");
    FeatureVector out;
    out.kind = FeatureKind::fp68;
    out.values.resize(2 * model::landmark_count);
    for (int i = 0; i < model::landmark_count; ++i)
    {
        out.values[2 * i] = frame.points(0, i);
        out.values[2 * i + 1] = frame.points(1, i);
    }
    return out;
}

/**
 * Per-dimension sample mean and population (divide-by-n) standard deviation
 * of a training set. Needs at least two samples.
 */
inline NormStats fit_norm(const std::vector<FeatureVector>& train)
{
    if (train.size() < 2)
        throw std::invalid_argument("fit_norm: need at least 2 samples");
    const Eigen::Index dim = train.front().values.size();
    NormStats stats;
    stats.mu = Eigen::VectorXd::Zero(dim);
    stats.sigma = Eigen::VectorXd::Zero(dim);
    for (const auto& sample : train)
    {
        if (sample.values.size() != dim)
            throw std::invalid_argument("fit_norm: inconsistent dimensions");
        stats.mu += sample.values;
    }
    stats.mu /= static_cast<double>(train.size());
    for (const auto& sample : train)
        stats.sigma += (sample.values - stats.mu).cwiseAbs2();
    stats.sigma = (stats.sigma / static_cast<double>(train.size())).cwiseSqrt();
    return stats;
}

/// (x - mu) / max(sigma, epsilon), elementwise.
inline FeatureVector apply_norm(const FeatureVector& x, const NormStats& stats)
{
    if (x.values.size() != stats.mu.size())
        throw std::invalid_argument("apply_norm: dimension mismatch");
    FeatureVector out = x;
    out.values = (x.values - stats.mu).cwiseQuotient(stats.sigma.cwiseMax(stats.epsilon));
    return out;
}

/// Inverse of apply_norm; exact for sigma above the epsilon floor.
inline FeatureVector denormalize(const FeatureVector& x, const NormStats& stats)
{
    if (x.values.size() != stats.mu.size())
        throw std::invalid_argument("denormalize: dimension mismatch");
    FeatureVector out = x;
    out.values = x.values.cwiseProduct(stats.sigma.cwiseMax(stats.epsilon)) + stats.mu;
    return out;
}

namespace detail {

inline std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ','))
        fields.push_back(field);
    return fields;
}

} // namespace detail

/// Writes `label,v0,v1,...` rows under a matching header.
inline void write_feature_csv(const std::string& path, const std::vector<FeatureVector>& samples)
{
    if (samples.empty())
        throw std::invalid_argument("write_feature_csv: no samples");
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write feature csv: " + path);
    const Eigen::Index dim = samples.front().values.size();
    out << "label";
    for (Eigen::Index i = 0; i < dim; ++i)
        out << ",v" << i;
    out << '\n';
    for (const auto& sample : samples)
    {
        out << sample.label;
        for (Eigen::Index i = 0; i < dim; ++i)
            out << ',' << detail::format_double(sample.values[i]);
        out << '\n';
    }
}

inline std::vector<FeatureVector> read_feature_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open feature csv: " + path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error(path + ": empty feature csv");
    const auto header = detail::split_csv_line(line);
    if (header.size() < 2 || header[0] != "label")
        throw std::runtime_error(path + ": expected header 'label,v0,...'");
    const std::size_t dim = header.size() - 1;

    std::vector<FeatureVector> samples;
    int line_no = 1;
    while (std::getline(in, line))
    {
        ++line_no;
        if (line.empty())
            continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != dim + 1)
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": wrong field count");
        FeatureVector sample;
        sample.label = fields[0];
        sample.kind = dim == 8 ? FeatureKind::au8 : FeatureKind::fp68;
        sample.values.resize(static_cast<Eigen::Index>(dim));
        for (std::size_t i = 0; i < dim; ++i)
            sample.values[static_cast<Eigen::Index>(i)] = std::stod(fields[i + 1]);
        samples.push_back(std::move(sample));
    }
    if (samples.empty())
        throw std::runtime_error(path + ": no samples");
    return samples;
}

} // namespace features
} // namespace candide
