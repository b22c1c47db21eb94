/*
 * candidefit - deformable 3D face model fitting and emotion features.
 *
 * File: include/candide/synth.hpp
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
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "candide/fitting.hpp"
#include "candide/geometry.hpp"
#include "candide/model.hpp"
#include "candide/rng.hpp"

namespace candide {
namespace synth {

using fitting::LandmarkFrame;

/// The four emotion classes, in canonical generation order.
inline const std::vector<std::string>& emotion_classes()
{
    static const std::vector<std::string> classes{"neutral", "smile", "angry", "surprised"};
    return classes;
}

struct RecipeComponent
{
    int facs_id = 0;
    double lo = 0.4;
    double hi = 1.0;
};

/// An emotion as a combination of FACS action units with intensity ranges.
struct EmotionRecipe
{
    std::string label;
    std::vector<RecipeComponent> components;
};

/**
 * The default expression recipes: smile 1+4+12+20+10+27+25,
 * anger 16+4+9+27+10, surprise 5+7+1+2+4+26+27+25+10, neutral empty. Every
 * component uses the same intensity range.
 */
inline std::vector<EmotionRecipe> default_recipes(double lo = 0.4, double hi = 1.0)
{
    auto build = [lo, hi](const std::string& label, std::initializer_list<int> ids) {
        EmotionRecipe recipe;
        recipe.label = label;
        for (int id : ids)
            recipe.components.push_back({id, lo, hi});
        return recipe;
    };
    return {build("neutral", {}), build("smile", {1, 4, 12, 20, 10, 27, 25}),
            build("angry", {16, 4, 9, 27, 10}),
            build("surprised", {5, 7, 1, 2, 4, 26, 27, 25, 10})};
}

inline const EmotionRecipe& recipe_for(const std::string& label,
                                       const std::vector<EmotionRecipe>& recipes)
{
    for (const auto& recipe : recipes)
    {
        if (recipe.label == label)
            return recipe;
    }
    throw std::invalid_argument("unknown class: " + label);
}

/**
 * FACS ids claimed by each action-unit slot, parsed from unit names of the
 * form "... (AU 26/27)". Slots without such a tag claim no ids. This keeps
 * the recipe-to-slot mapping in the model data file rather than in code.
 */
inline std::vector<std::vector<int>> action_slot_facs_ids(const model::CandideModel& m)
{
    std::vector<std::vector<int>> slots;
    for (const auto& unit : m.action_units)
    {
        std::vector<int> ids;
        const auto at = unit.name.find("AU ");
        if (at != std::string::npos)
        {
            std::string digits;
            for (std::size_t k = at + 3; k < unit.name.size(); ++k)
            {
                const char ch = unit.name[k];
                if (std::isdigit(static_cast<unsigned char>(ch)))
                {
                    digits += ch;
                }
                else
                {
                    if (!digits.empty())
                        ids.push_back(std::stoi(digits));
                    digits.clear();
                    if (ch != '/')
                        break;
                }
            }
            if (!digits.empty())
                ids.push_back(std::stoi(digits));
        }
        slots.push_back(std::move(ids));
    }
    return slots;
}

/**
 * Draws one action-unit coefficient vector for a recipe: each component gets
 * a uniform intensity from its range and lands on every slot whose FACS id
 * set contains it; a slot hit by several components keeps the largest draw.
 * Components without a matching slot are dropped (the model cannot move
 * them); neutral maps to the zero vector.
 */
inline Eigen::VectorXd sample_recipe(const EmotionRecipe& recipe,
                                     const std::vector<std::vector<int>>& slot_facs_ids, Rng& rng)
{
    Eigen::VectorXd coefficients =
        Eigen::VectorXd::Zero(static_cast<Eigen::Index>(slot_facs_ids.size()));
    for (const auto& component : recipe.components)
    {
        const double intensity = rng.uniform(component.lo, component.hi);
        for (std::size_t slot = 0; slot < slot_facs_ids.size(); ++slot)
        {
            const auto& ids = slot_facs_ids[slot];
            if (std::find(ids.begin(), ids.end(), component.facs_id) != ids.end())
                coefficients[static_cast<Eigen::Index>(slot)] =
                    std::max(coefficients[static_cast<Eigen::Index>(slot)], intensity);
        }
    }
    return coefficients;
}

/// Left-right index permutation of the 68-landmark layout under a horizontal
/// flip.
inline const std::array<int, model::landmark_count>& horizontal_flip_permutation()
{
    static const std::array<int, model::landmark_count> permutation = [] {
        std::array<int, model::landmark_count> p{};
        for (int i = 0; i <= 16; ++i)
            p[static_cast<std::size_t>(i)] = 16 - i; // contour
        const std::pair<int, int> swaps[] = {
            {17, 26}, {18, 25}, {19, 24}, {20, 23}, {21, 22}, // brows
            {31, 35}, {32, 34},                               // nose base
            {36, 45}, {37, 44}, {38, 43}, {39, 42}, {40, 47}, {41, 46}, // eyes
            {48, 54}, {49, 53}, {50, 52}, {55, 59}, {56, 58},           // outer mouth
            {60, 64}, {61, 63}, {65, 67},                               // inner mouth
        };
        for (int i = 27; i <= 30; ++i)
            p[static_cast<std::size_t>(i)] = i; // nose bridge
        for (int i : {33, 51, 57, 62, 66})
            p[static_cast<std::size_t>(i)] = i;
        for (const auto& [a, b] : swaps)
        {
            p[static_cast<std::size_t>(a)] = b;
            p[static_cast<std::size_t>(b)] = a;
        }
        return p;
    }();
    return permutation;
}

struct RenderPose
{
    double scale = 80.0;
    double yaw = 0.0; ///< radians about the vertical axis
    Eigen::Vector2d center = Eigen::Vector2d(128.0, 128.0);
};

/// Exact generation parameters of one synthesized frame.
struct TruthRecord
{
    int tau = 0;
    std::string split;
    std::string label;
    double scale = 0.0;
    double yaw = 0.0;
    Eigen::Vector3d rotation = Eigen::Vector3d::Zero();
    Eigen::Vector2d translation = Eigen::Vector2d::Zero();
    Eigen::VectorXd shape_coeffs;
    Eigen::VectorXd action_coeffs;
};

/**
 * Renders one 68-point frame: the forward chain positions all model
 * vertices, the 37 active landmarks copy their vertices' xy projection, the
 * other 31 come from the correspondence file's barycentric rules, and i.i.d.
 * Gaussian noise lands on every coordinate.
 */
inline std::pair<LandmarkFrame, TruthRecord>
render_frame(const model::CandideModel& m, const model::Correspondence& corr,
             const RenderPose& pose, const Eigen::VectorXd& shape_coeffs,
             const Eigen::VectorXd& action_coeffs, double noise_sigma, Rng& rng, int tau = 0)
{
    geometry::PoseParams params;
    params.scale = pose.scale;
    params.rotation = Eigen::Vector3d(0.0, pose.yaw, 0.0);
    params.translation = pose.center;
    params.shape_coeffs = shape_coeffs;
    params.action_coeffs = action_coeffs;
    const Eigen::Matrix3Xd points = geometry::transform_points(m, params);

    LandmarkFrame frame;
    frame.tau = tau;
    frame.points = Eigen::Matrix2Xd::Zero(2, model::landmark_count);
    for (int k = 0; k < corr.active_count(); ++k)
        frame.points.col(corr.fp68_indices[k]) = points.col(corr.vertex_indices[k]).head<2>();
    for (const auto& rule : corr.interp_rules)
    {
        Eigen::Vector2d value = Eigen::Vector2d::Zero();
        for (const auto& [vertex, weight] : rule.terms)
            value += weight * points.col(vertex).head<2>();
        frame.points.col(rule.fp68_index) = value;
    }
    if (noise_sigma > 0.0)
    {
        for (Eigen::Index c = 0; c < frame.points.cols(); ++c)
        {
            frame.points(0, c) += rng.normal(0.0, noise_sigma);
            frame.points(1, c) += rng.normal(0.0, noise_sigma);
        }
    }

    TruthRecord truth;
    truth.tau = tau;
    truth.scale = pose.scale;
    truth.yaw = pose.yaw;
    truth.rotation = params.rotation;
    truth.translation = pose.center;
    truth.shape_coeffs = shape_coeffs;
    truth.action_coeffs = action_coeffs;
    return {frame, truth};
}

/// Landmark-domain counterparts of the affine augmentation items.
struct AugmentParams
{
    bool enabled = true;
    double flip_prob = 0.5;
    double scale_lo = 0.9;
    double scale_hi = 1.1;
    double translate_frac = 0.1; ///< of the nominal resolution, per axis
    double rotate_lo_deg = -25.0;
    double rotate_hi_deg = 25.0;
    double shear_lo_deg = -8.0;
    double shear_hi_deg = 8.0;
    double noise_sigma = 0.5; ///< coordinate stand-in for pixel-domain noise
};

/**
 * Random-order composition of flip (probability 1/2, with the left-right
 * index permutation), isotropic scale, per-axis translation, rotation and
 * shear, each about the landmark centroid, followed by additive coordinate
 * noise. Disabled augmentation returns the frame unchanged.
 */
inline LandmarkFrame augment_landmarks(const LandmarkFrame& frame, const AugmentParams& params,
                                       double resolution, Rng& rng)
{
    if (!params.enabled)
        return frame;

    // all draws happen up front in a fixed order
    const bool flip = rng.bernoulli(params.flip_prob);
    const double scale = rng.uniform(params.scale_lo, params.scale_hi);
    const double translate_range = resolution * params.translate_frac;
    const Eigen::Vector2d translation(rng.uniform(-translate_range, translate_range),
                                      rng.uniform(-translate_range, translate_range));
    const double deg = std::numbers::pi / 180.0;
    const double angle = rng.uniform(params.rotate_lo_deg * deg, params.rotate_hi_deg * deg);
    const double shear = rng.uniform(params.shear_lo_deg * deg, params.shear_hi_deg * deg);
    std::vector<int> order{0, 1, 2, 3, 4};
    rng.shuffle(order);

    LandmarkFrame out = frame;
    auto centroid = [&out]() -> Eigen::Vector2d { return out.points.rowwise().mean(); };
    for (int op : order)
    {
        switch (op)
        {
        case 0: // horizontal flip about the image center line
            if (flip)
            {
                Eigen::Matrix2Xd flipped(2, model::landmark_count);
                const auto& permutation = horizontal_flip_permutation();
                for (int i = 0; i < model::landmark_count; ++i)
                {
                    const int source = permutation[static_cast<std::size_t>(i)];
                    flipped(0, i) = resolution - out.points(0, source);
                    flipped(1, i) = out.points(1, source);
                }
                out.points = flipped;
            }
            break;
        case 1: // isotropic scale about the centroid
        {
            const Eigen::Vector2d c = centroid();
            out.points = (scale * (out.points.colwise() - c)).colwise() + c;
            break;
        }
        case 2:
            out.points.colwise() += translation;
            break;
        case 3: // rotation about the centroid
        {
            const Eigen::Vector2d c = centroid();
            Eigen::Matrix2d rot;
            rot << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
            out.points = (rot * (out.points.colwise() - c)).colwise() + c;
            break;
        }
        case 4: // shear parallel to the x axis about the centroid
        {
            const Eigen::Vector2d c = centroid();
            Eigen::Matrix2d shear_matrix;
            shear_matrix << 1.0, std::tan(shear), 0.0, 1.0;
            out.points = (shear_matrix * (out.points.colwise() - c)).colwise() + c;
            break;
        }
        }
    }
    if (params.noise_sigma > 0.0)
    {
        for (Eigen::Index c = 0; c < out.points.cols(); ++c)
        {
            out.points(0, c) += rng.normal(0.0, params.noise_sigma);
            out.points(1, c) += rng.normal(0.0, params.noise_sigma);
        }
    }
    return out;
}

/// Generation plan: frontal training split, yawed test split, synthetic
/// identity via shape-unit draws, class-balanced by construction.
struct SynthSpec
{
    int n_per_class = 10;
    double train_yaw = 0.0;
    std::vector<double> test_yaws{-std::numbers::pi / 4, std::numbers::pi / 4};
    double noise_sigma = 0.5; ///< pixels, on every rendered coordinate
    std::uint64_t seed = 1;
    AugmentParams augment;

    double resolution = 256.0;
    double scale_lo = 18.0;
    double scale_hi = 26.0;
    double center_jitter = 12.0;
    double shape_base_sigma = 0.5;   ///< per-dataset identity draw
    double shape_jitter_sigma = 0.45; ///< per-frame identity jitter
    double intensity_lo = 0.4;
    double intensity_hi = 1.0;

    void validate() const
    {
        if (n_per_class <= 0)
            throw std::invalid_argument("n_per_class must be positive");
        auto check_yaw = [](double yaw) {
            if (!(yaw > -std::numbers::pi / 2 && yaw < std::numbers::pi / 2))
                throw std::invalid_argument("yaw must lie in (-pi/2, pi/2)");
        };
        check_yaw(train_yaw);
        for (double yaw : test_yaws)
            check_yaw(yaw);
        if (test_yaws.empty())
            throw std::invalid_argument("need at least one test yaw");
        if (noise_sigma < 0.0)
            throw std::invalid_argument("noise sigma must be non-negative");
    }
};

struct Dataset
{
    std::vector<LandmarkFrame> train_frames;
    std::vector<std::string> train_labels;
    std::vector<LandmarkFrame> test_frames;
    std::vector<std::string> test_labels;
    std::vector<TruthRecord> truth; ///< train records first, then test
};

/**
 * Synthesizes the frontal-train / yawed-test dataset. Per frame an
 * independent child stream derived from (seed, tau) drives every draw, so
 * generation is reproducible and frames could render in parallel. The
 * training split is augmented when enabled; the test split never is. One
 * identity (shape-unit base vector) is drawn per dataset and jittered per
 * frame.
 */
inline Dataset generate_dataset(const SynthSpec& spec, const model::CandideModel& m,
                                const model::Correspondence& corr)
{
    spec.validate();
    const Rng base(spec.seed);
    const auto recipes = default_recipes(spec.intensity_lo, spec.intensity_hi);
    const auto slots = action_slot_facs_ids(m);

    Rng identity_rng = base.derive(0x1d000000ULL);
    Eigen::VectorXd shape_base(m.shape_unit_count());
    for (Eigen::Index d = 0; d < shape_base.size(); ++d)
        shape_base[d] = identity_rng.normal(0.0, spec.shape_base_sigma);

    Dataset dataset;
    int tau = 0;
    auto synthesize = [&](const std::string& label, double yaw, bool is_train) {
        Rng rng = base.derive(static_cast<std::uint64_t>(tau));
        RenderPose pose;
        pose.scale = rng.uniform(spec.scale_lo, spec.scale_hi);
        pose.yaw = yaw;
        pose.center =
            Eigen::Vector2d(spec.resolution / 2 + rng.uniform(-spec.center_jitter, spec.center_jitter),
                            spec.resolution / 2 + rng.uniform(-spec.center_jitter, spec.center_jitter));
        Eigen::VectorXd shape = shape_base;
        for (Eigen::Index d = 0; d < shape.size(); ++d)
            shape[d] += rng.normal(0.0, spec.shape_jitter_sigma);
        const Eigen::VectorXd action = sample_recipe(recipe_for(label, recipes), slots, rng);

        auto [frame, truth] = render_frame(m, corr, pose, shape, action, spec.noise_sigma, rng, tau);
        truth.label = label;
        truth.split = is_train ? "train" : "test";
        if (is_train && spec.augment.enabled)
            frame = augment_landmarks(frame, spec.augment, spec.resolution, rng);

        if (is_train)
        {
            dataset.train_frames.push_back(std::move(frame));
            dataset.train_labels.push_back(label);
        }
        else
        {
            dataset.test_frames.push_back(std::move(frame));
            dataset.test_labels.push_back(label);
        }
        dataset.truth.push_back(std::move(truth));
        ++tau;
    };

    for (const auto& label : emotion_classes())
        for (int i = 0; i < spec.n_per_class; ++i)
            synthesize(label, spec.train_yaw, true);
    for (double yaw : spec.test_yaws)
        for (const auto& label : emotion_classes())
            for (int i = 0; i < spec.n_per_class; ++i)
                synthesize(label, yaw, false);
    return dataset;
}

namespace detail {

inline std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

/// `label,tau,x0,y0,...,x67,y67` rows.
inline void write_landmark_csv(const std::string& path, const std::vector<LandmarkFrame>& frames,
                               const std::vector<std::string>& labels)
{
    if (frames.size() != labels.size())
        throw std::invalid_argument("write_landmark_csv: frame/label count mismatch");
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write landmark csv: " + path);
    out << "label,tau";
    for (int i = 0; i < model::landmark_count; ++i)
        out << ",x" << i << ",y" << i;
    out << '\n';
    for (std::size_t k = 0; k < frames.size(); ++k)
    {
        out << labels[k] << ',' << frames[k].tau;
        for (int i = 0; i < model::landmark_count; ++i)
            out << ',' << detail::format_double(frames[k].points(0, i)) << ','
                << detail::format_double(frames[k].points(1, i));
        out << '\n';
    }
}

struct LabeledFrames
{
    std::vector<LandmarkFrame> frames;
    std::vector<std::string> labels;
};

inline LabeledFrames read_landmark_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open landmark csv: " + path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error(path + ": empty landmark csv");

    LabeledFrames out;
    int line_no = 1;
    while (std::getline(in, line))
    {
        ++line_no;
        if (line.empty())
            continue;
        std::istringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ','))
            fields.push_back(field);
        if (fields.size() != 2 + 2 * model::landmark_count)
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": wrong field count");
        LandmarkFrame frame;
        frame.tau = std::stoi(fields[1]);
        frame.points.resize(2, model::landmark_count);
        for (int i = 0; i < model::landmark_count; ++i)
        {
            frame.points(0, i) = std::stod(fields[static_cast<std::size_t>(2 + 2 * i)]);
            frame.points(1, i) = std::stod(fields[static_cast<std::size_t>(3 + 2 * i)]);
        }
        out.labels.push_back(fields[0]);
        out.frames.push_back(std::move(frame));
    }
    return out;
}

inline nlohmann::json truth_to_json(const TruthRecord& truth)
{
    auto vector_json = [](const Eigen::VectorXd& v) {
        nlohmann::json out = nlohmann::json::array();
        for (Eigen::Index i = 0; i < v.size(); ++i)
            out.push_back(v[i]);
        return out;
    };
    return nlohmann::json{{"tau", truth.tau},
                          {"split", truth.split},
                          {"label", truth.label},
                          {"s", truth.scale},
                          {"yaw", truth.yaw},
                          {"w", {truth.rotation.x(), truth.rotation.y(), truth.rotation.z()}},
                          {"t", {truth.translation.x(), truth.translation.y()}},
                          {"su", vector_json(truth.shape_coeffs)},
                          {"au", vector_json(truth.action_coeffs)}};
}

/// train.csv, test.csv and truth.jsonl under `directory`.
inline void write_dataset(const std::string& directory, const Dataset& dataset)
{
    write_landmark_csv(directory + "/train.csv", dataset.train_frames, dataset.train_labels);
    write_landmark_csv(directory + "/test.csv", dataset.test_frames, dataset.test_labels);
    std::ofstream truth(directory + "/truth.jsonl");
    if (!truth)
        throw std::runtime_error("cannot write truth records: " + directory + "/truth.jsonl");
    for (const auto& record : dataset.truth)
        truth << truth_to_json(record).dump() << '\n';
}

} // namespace synth
} // namespace candide
