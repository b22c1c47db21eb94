/*
 * candidefit - deformable 3D face model fitting and emotion features.
 *
 * File: tests/test_helpers.hpp
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

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "candide/model.hpp"

namespace testutil {

inline std::filesystem::path data_dir()
{
    return std::filesystem::path(CANDIDE_DATA_DIR);
}

inline std::filesystem::path model_path()
{
    return data_dir() / "face_model.txt";
}

inline std::filesystem::path correspondence_path()
{
    return data_dir() / "landmark_correspondence.txt";
}

/// Unique scratch directory, removed on destruction.
class TempDir
{
public:
    explicit TempDir(const std::string& tag)
    {
        static std::mt19937_64 gen(std::random_device{}());
        path_ = std::filesystem::temp_directory_path() /
                ("candide_" + tag + "_" + std::to_string(gen()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path file(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& content)
{
    std::ofstream out(path);
    out << content;
}

inline std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Three-vertex model with one shape unit and one action unit. All values are
/// dyadic so forward-model arithmetic stays exact in binary floating point.
inline candide::model::CandideModel toy_model()
{
    candide::model::CandideModel m;
    m.vertices.resize(3, 3);
    m.vertices.col(0) << 0.0, 0.0, 0.0;
    m.vertices.col(1) << 0.5, 0.25, 0.125;
    m.vertices.col(2) << -0.5, 0.5, 0.25;
    m.triangles.push_back({0, 1, 2});

    candide::model::DeformationUnit su;
    su.name = "toy shape unit";
    su.vertex_indices = {1};
    su.displacements.resize(3, 1);
    su.displacements.col(0) << 0.25, 0.0, 0.0;
    m.shape_units.push_back(su);

    candide::model::DeformationUnit au;
    au.name = "toy action unit";
    au.vertex_indices = {2};
    au.displacements.resize(3, 1);
    au.displacements.col(0) << 0.0, 0.25, 0.0;
    m.action_units.push_back(au);
    return m;
}

} // namespace testutil
