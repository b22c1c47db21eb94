/*
 * candidefit - deformable 3D face model fitting and emotion features.
 *
 * File: include/candide/manifest.hpp
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
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "candide/version.hpp"

namespace candide {
namespace cli {

/// FNV-1a over a byte string, hex encoded.
inline std::string fnv1a_hex(const std::string& data)
{
    std::uint64_t hash = 1469598103934665603ULL;
    for (const unsigned char c : data)
    {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

/// Deterministic hash of a flag map: sorted `key=value` lines.
inline std::string config_hash(const std::map<std::string, std::string>& config)
{
    std::string canonical;
    for (const auto& [key, value] : config)
    {
        canonical += key;
        canonical += '=';
        canonical += value;
        canonical += '\n';
    }
    return fnv1a_hex(canonical);
}

/**
 * Provenance record every command writes next to its outputs. The config
 * hash covers the canonicalized flag map, so a rerun with the recorded
 * configuration and seed reproduces the data outputs byte for byte;
 * wall_time_ms is the only field that varies between such runs.
 */
struct RunManifest
{
    std::string command;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> config;
    double wall_time_ms = 0.0;

    nlohmann::json to_json() const
    {
        return nlohmann::json{{"command", command},
                              {"inputs", inputs},
                              {"outputs", outputs},
                              {"seed", seed},
                              {"config", config},
                              {"config_hash", config_hash(config)},
                              {"tool_version", CANDIDE_VERSION},
                              {"wall_time_ms", wall_time_ms}};
    }
};

inline void write_manifest(const std::string& directory, const RunManifest& manifest)
{
    const std::string path = directory + "/manifest.json";
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write manifest: " + path);
    out << manifest.to_json().dump(2) << '\n';
}

} // namespace cli
} // namespace candide
