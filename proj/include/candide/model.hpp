/*
 * candidefit - deformable 3D face model fitting and emotion features.
 *
 * File: include/candide/model.hpp
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

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace candide {
namespace model {

/// Number of landmarks in the 68-point facial layout.
constexpr int landmark_count = 68;

/// Number of active landmark/vertex pairs used for fitting.
constexpr int active_pair_count = 37;

/**
 * One named deformation: a set of vertices and the displacement each of them
 * receives per unit of the deformation coefficient, in model units.
 */
struct DeformationUnit
{
    std::string name;
    std::vector<int> vertex_indices; ///< no index repeated within a unit
    Eigen::Matrix3Xd displacements;  ///< one column per entry of vertex_indices
};

/**
 * Static head geometry plus its deformation units. Vertices live in the cube
 * [-1,+1]^3; shape units personalize the identity, action units animate
 * expressions. Immutable after load and safe to share across threads.
 */
struct CandideModel
{
    Eigen::Matrix3Xd vertices; ///< one column per 3D point
    std::vector<std::array<int, 3>> triangles;
    std::vector<DeformationUnit> shape_units;  ///< count D
    std::vector<DeformationUnit> action_units; ///< count F

    int vertex_count() const { return static_cast<int>(vertices.cols()); }
    int shape_unit_count() const { return static_cast<int>(shape_units.size()); }
    int action_unit_count() const { return static_cast<int>(action_units.size()); }
};

/// Fixed barycentric rule placing one synthesized landmark from model vertices.
struct InterpRule
{
    int fp68_index = -1;
    std::vector<std::pair<int, double>> terms; ///< (vertex index, weight), weights sum to 1
};

/**
 * The 37-pair landmark-to-vertex correspondence and the index sets derived
 * from it. `fp68_indices[k]` pairs with `vertex_indices[k]`; interp rules
 * cover the remaining landmarks and are used only when synthesizing frames.
 */
struct Correspondence
{
    Eigen::VectorXi fp68_indices;   ///< active 2D landmark ids, J_s2
    Eigen::VectorXi vertex_indices; ///< active model vertices, J_s3
    std::vector<int> core_points;          ///< J: vertices referenced by the pairs
    std::vector<int> global_points;        ///< J_g: vertices used for global estimation
    std::vector<int> global_and_deform;    ///< J_gd: J_g joined with shape-unit targets
    std::vector<InterpRule> interp_rules;

    int active_count() const { return static_cast<int>(fp68_indices.size()); } ///< N_s
};

namespace detail {

[[noreturn]] inline void fail(const std::string& path, int line, const std::string& message)
{
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + message);
}

inline std::string strip(const std::string& s)
{
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos)
        return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

inline std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

inline void validate_model(const CandideModel& m, const std::string& context = "model")
{
    const int n = m.vertex_count();
    for (int i = 0; i < n; ++i)
    {
        for (int c = 0; c < 3; ++c)
        {
            const double v = m.vertices(c, i);
            if (!std::isfinite(v) || v < -1.0 || v > 1.0)
                throw std::runtime_error(context + ": vertex " + std::to_string(i) +
                                         " outside the [-1,+1] cube");
        }
    }
    for (std::size_t t = 0; t < m.triangles.size(); ++t)
    {
        for (int idx : m.triangles[t])
        {
            if (idx < 0 || idx >= n)
                throw std::runtime_error(context + ": triangle " + std::to_string(t) +
                                         ": index out of range (" + std::to_string(idx) + " of " +
                                         std::to_string(n) + " vertices)");
        }
    }
    auto check_units = [&](const std::vector<DeformationUnit>& units, const char* what) {
        for (const auto& u : units)
        {
            if (u.vertex_indices.empty())
                throw std::runtime_error(context + ": " + what + " unit '" + u.name +
                                         "' has no targets");
            if (static_cast<int>(u.vertex_indices.size()) != u.displacements.cols())
                throw std::runtime_error(context + ": " + what + " unit '" + u.name +
                                         "' has inconsistent target data");
            std::set<int> seen;
            for (int idx : u.vertex_indices)
            {
                if (idx < 0 || idx >= n)
                    throw std::runtime_error(context + ": " + what + " unit '" + u.name +
                                             "': index out of range (" + std::to_string(idx) +
                                             " of " + std::to_string(n) + " vertices)");
                if (!seen.insert(idx).second)
                    throw std::runtime_error(context + ": " + what + " unit '" + u.name +
                                             "': vertex " + std::to_string(idx) + " repeated");
            }
        }
    };
    check_units(m.shape_units, "shape");
    check_units(m.action_units, "action");
}

/**
 * Parses a model file. The format is line oriented UTF-8 text: `#` comment
 * lines are ignored, section headers VERTICES / TRIANGLES / SHAPE_UNITS /
 * ACTION_UNITS stand on their own line, vertices are `x y z`, triangles
 * `i j k` (0-based), and units are a `unit <name>` line followed by
 * `target <vertex_index> <dx> <dy> <dz>` lines.
 *
 * Throws std::runtime_error with the offending line number on parse errors
 * and names the violated invariant on validation errors.
 */
inline CandideModel load_model(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open model file: " + path);

    CandideModel m;
    std::vector<Eigen::Vector3d> vertices;
    enum class Section
    {
        none,
        vertices,
        triangles,
        shape_units,
        action_units
    };
    Section section = Section::none;
    std::vector<DeformationUnit>* unit_sink = nullptr;
    DeformationUnit current;
    std::vector<Eigen::Vector3d> current_displacements;
    bool unit_open = false;

    auto flush_unit = [&](int line) {
        if (!unit_open)
            return;
        if (current.vertex_indices.empty())
            detail::fail(path, line, "unit '" + current.name + "' has no targets");
        current.displacements.resize(3, static_cast<Eigen::Index>(current_displacements.size()));
        for (std::size_t i = 0; i < current_displacements.size(); ++i)
            current.displacements.col(static_cast<Eigen::Index>(i)) = current_displacements[i];
        unit_sink->push_back(std::move(current));
        current = DeformationUnit{};
        current_displacements.clear();
        unit_open = false;
    };

    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw))
    {
        ++line_no;
        const std::string line = detail::strip(raw);
        if (line.empty() || line[0] == '#')
            continue;
        if (line == "VERTICES" || line == "TRIANGLES" || line == "SHAPE_UNITS" ||
            line == "ACTION_UNITS")
        {
            flush_unit(line_no);
            if (line == "VERTICES")
                section = Section::vertices;
            else if (line == "TRIANGLES")
                section = Section::triangles;
            else if (line == "SHAPE_UNITS")
            {
                section = Section::shape_units;
                unit_sink = &m.shape_units;
            }
            else
            {
                section = Section::action_units;
                unit_sink = &m.action_units;
            }
            continue;
        }
        std::istringstream ss(line);
        switch (section)
        {
        case Section::none:
            detail::fail(path, line_no, "content before any section header");
        case Section::vertices:
        {
            Eigen::Vector3d v;
            if (!(ss >> v.x() >> v.y() >> v.z()))
                detail::fail(path, line_no, "expected 'x y z'");
            vertices.push_back(v);
            break;
        }
        case Section::triangles:
        {
            std::array<int, 3> t{};
            if (!(ss >> t[0] >> t[1] >> t[2]))
                detail::fail(path, line_no, "expected 'i j k'");
            m.triangles.push_back(t);
            break;
        }
        case Section::shape_units:
        case Section::action_units:
        {
            std::string keyword;
            ss >> keyword;
            if (keyword == "unit")
            {
                flush_unit(line_no);
                std::string name;
                std::getline(ss, name);
                name = detail::strip(name);
                if (name.empty())
                    detail::fail(path, line_no, "unit with empty name");
                current.name = name;
                unit_open = true;
            }
            else if (keyword == "target")
            {
                if (!unit_open)
                    detail::fail(path, line_no, "target before any 'unit' line");
                int idx;
                Eigen::Vector3d d;
                if (!(ss >> idx >> d.x() >> d.y() >> d.z()))
                    detail::fail(path, line_no, "expected 'target <index> <dx> <dy> <dz>'");
                current.vertex_indices.push_back(idx);
                current_displacements.push_back(d);
            }
            else
            {
                detail::fail(path, line_no, "expected 'unit' or 'target', got '" + keyword + "'");
            }
            break;
        }
        }
    }
    flush_unit(line_no);

    m.vertices.resize(3, static_cast<Eigen::Index>(vertices.size()));
    for (std::size_t i = 0; i < vertices.size(); ++i)
        m.vertices.col(static_cast<Eigen::Index>(i)) = vertices[i];

    validate_model(m, path);
    return m;
}

/// Writes a model in the same format load_model reads; loading the result
/// reproduces the model exactly.
inline void save_model(const CandideModel& m, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write model file: " + path);
    out << "VERTICES\n";
    for (int i = 0; i < m.vertex_count(); ++i)
        out << detail::format_double(m.vertices(0, i)) << ' '
            << detail::format_double(m.vertices(1, i)) << ' '
            << detail::format_double(m.vertices(2, i)) << '\n';
    out << "TRIANGLES\n";
    for (const auto& t : m.triangles)
        out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    auto write_units = [&](const std::vector<DeformationUnit>& units, const char* header) {
        out << header << '\n';
        for (const auto& u : units)
        {
            out << "unit " << u.name << '\n';
            for (std::size_t k = 0; k < u.vertex_indices.size(); ++k)
            {
                const auto col = u.displacements.col(static_cast<Eigen::Index>(k));
                out << "target " << u.vertex_indices[k] << ' ' << detail::format_double(col.x())
                    << ' ' << detail::format_double(col.y()) << ' '
                    << detail::format_double(col.z()) << '\n';
            }
        }
    };
    write_units(m.shape_units, "SHAPE_UNITS");
    write_units(m.action_units, "ACTION_UNITS");
}

/**
 * Parses a correspondence file against a loaded model. Bare `<fp68> <vertex>`
 * lines declare the 37 active pairs; `interp` lines declare barycentric rules
 * for synthesized landmarks. Derives the index sets and validates uniqueness,
 * ranges and the pair count.
 */
inline Correspondence load_correspondence(const std::string& path, const CandideModel& m)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open correspondence file: " + path);

    std::vector<std::pair<int, int>> pairs;
    std::vector<InterpRule> rules;
    std::set<int> seen_fp;
    std::set<int> seen_vertex;

    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw))
    {
        ++line_no;
        const std::string line = detail::strip(raw);
        if (line.empty() || line[0] == '#')
            continue;
        std::istringstream ss(line);
        if (line.rfind("interp", 0) == 0)
        {
            std::string keyword;
            ss >> keyword;
            InterpRule rule;
            if (!(ss >> rule.fp68_index))
                detail::fail(path, line_no, "expected 'interp <fp68> <vertex> <weight> ...'");
            if (rule.fp68_index < 0 || rule.fp68_index >= landmark_count)
                detail::fail(path, line_no, "landmark index out of range");
            int vertex;
            double weight;
            double weight_sum = 0.0;
            while (ss >> vertex >> weight)
            {
                if (vertex < 0 || vertex >= m.vertex_count())
                    detail::fail(path, line_no, "vertex index out of range");
                rule.terms.emplace_back(vertex, weight);
                weight_sum += weight;
            }
            if (rule.terms.empty())
                detail::fail(path, line_no, "interp rule with no terms");
            if (std::abs(weight_sum - 1.0) > 1e-9)
                detail::fail(path, line_no, "interp weights must sum to 1");
            rules.push_back(std::move(rule));
        }
        else
        {
            int fp, vertex;
            if (!(ss >> fp >> vertex))
                detail::fail(path, line_no, "expected '<fp68_index> <vertex_index>'");
            if (fp < 0 || fp >= landmark_count)
                detail::fail(path, line_no, "landmark index out of range (" + std::to_string(fp) +
                                                " of " + std::to_string(landmark_count) + ")");
            if (vertex < 0 || vertex >= m.vertex_count())
                detail::fail(path, line_no, "vertex index not in model (" + std::to_string(vertex) +
                                                " of " + std::to_string(m.vertex_count()) + ")");
            if (!seen_fp.insert(fp).second)
                detail::fail(path, line_no, "duplicate landmark index " + std::to_string(fp));
            if (!seen_vertex.insert(vertex).second)
                detail::fail(path, line_no, "duplicate vertex index " + std::to_string(vertex));
            pairs.emplace_back(fp, vertex);
        }
    }

    if (static_cast<int>(pairs.size()) != active_pair_count)
        throw std::runtime_error(path + ": expected " + std::to_string(active_pair_count) +
                                 " pairs, got " + std::to_string(pairs.size()));

    Correspondence corr;
    corr.fp68_indices.resize(active_pair_count);
    corr.vertex_indices.resize(active_pair_count);
    for (int k = 0; k < active_pair_count; ++k)
    {
        corr.fp68_indices[k] = pairs[static_cast<std::size_t>(k)].first;
        corr.vertex_indices[k] = pairs[static_cast<std::size_t>(k)].second;
    }
    corr.interp_rules = std::move(rules);

    corr.core_points.assign(seen_vertex.begin(), seen_vertex.end());
    corr.global_points = corr.core_points;
    std::set<int> gd(seen_vertex.begin(), seen_vertex.end());
    for (const auto& u : m.shape_units)
        gd.insert(u.vertex_indices.begin(), u.vertex_indices.end());
    corr.global_and_deform.assign(gd.begin(), gd.end());
    return corr;
}

} // namespace model
} // namespace candide
