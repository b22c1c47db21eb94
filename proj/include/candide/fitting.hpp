/*
 * candidefit - deformable 3D face model fitting and emotion features.
 *
 * File: include/candide/fitting.hpp
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
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "candide/geometry.hpp"
#include "candide/model.hpp"

namespace candide {
namespace fitting {

using geometry::PoseParams;

/// One 68-point 2D observation in observer units.
struct LandmarkFrame
{
    int tau = 0;               ///< frame index
    Eigen::Matrix2Xd points;   ///< one column per landmark, 68 columns

    bool valid() const
    {
        return points.cols() == model::landmark_count && points.allFinite();
    }
};

/// Thrown when a fit produces non-finite residuals.
struct DivergedError : std::runtime_error
{
    DivergedError() : std::runtime_error("diverged: non-finite residual") {}
};

/// Selects which parameter blocks the optimizer may move.
struct ParamMask
{
    bool scale = true;
    bool rotation = true;
    bool translation = true;
    bool shape = false;
    bool action = false;

    static ParamMask rigid() { return {true, true, true, false, false}; }
    static ParamMask rigid_and_shape() { return {true, true, true, true, false}; }
    static ParamMask rigid_and_action() { return {true, true, true, false, true}; }

    int free_count(int shape_count, int action_count) const
    {
        int n = 0;
        if (scale)
            n += 1;
        if (rotation)
            n += 3;
        if (translation)
            n += 2;
        if (shape)
            n += shape_count;
        if (action)
            n += action_count;
        return n;
    }
};

/**
 * Binds a model, a correspondence, and a free-parameter mask into the
 * residual system the optimizer works on. The residual vector stacks the
 * (x, y) differences of the projected active model points against their
 * landmarks, so it has length 2 N_s. Scale is optimized as log s, which
 * keeps s positive without constraints.
 */
struct ResidualSystem
{
    const model::CandideModel* face = nullptr;
    const model::Correspondence* corr = nullptr;
    ParamMask mask;

    ResidualSystem(const model::CandideModel& m, const model::Correspondence& c, ParamMask f)
        : face(&m), corr(&c), mask(f)
    {
        if (mask.free_count(m.shape_unit_count(), m.action_unit_count()) == 0)
            throw std::invalid_argument("at least one parameter block must be free");
    }

    int residual_size() const { return 2 * corr->active_count(); }

    int free_size() const
    {
        return mask.free_count(face->shape_unit_count(), face->action_unit_count());
    }

    Eigen::VectorXd pack(const PoseParams& p) const
    {
        if (!(p.scale > 0.0))
            throw std::invalid_argument("scale must be positive");
        Eigen::VectorXd x(free_size());
        int at = 0;
        if (mask.scale)
            x[at++] = std::log(p.scale);
        if (mask.rotation)
        {
            x.segment<3>(at) = p.rotation;
            at += 3;
        }
        if (mask.translation)
        {
            x.segment<2>(at) = p.translation;
            at += 2;
        }
        if (mask.shape)
        {
            x.segment(at, p.shape_coeffs.size()) = p.shape_coeffs;
            at += static_cast<int>(p.shape_coeffs.size());
        }
        if (mask.action)
        {
            x.segment(at, p.action_coeffs.size()) = p.action_coeffs;
            at += static_cast<int>(p.action_coeffs.size());
        }
        return x;
    }

    PoseParams unpack(const Eigen::VectorXd& x, const PoseParams& frozen) const
    {
        PoseParams p = frozen;
        int at = 0;
        if (mask.scale)
            p.scale = std::exp(x[at++]);
        if (mask.rotation)
        {
            p.rotation = x.segment<3>(at);
            at += 3;
        }
        if (mask.translation)
        {
            p.translation = x.segment<2>(at);
            at += 2;
        }
        if (mask.shape)
        {
            p.shape_coeffs = x.segment(at, p.shape_coeffs.size());
            at += static_cast<int>(p.shape_coeffs.size());
        }
        if (mask.action)
        {
            p.action_coeffs = x.segment(at, p.action_coeffs.size());
            at += static_cast<int>(p.action_coeffs.size());
        }
        return p;
    }
};

/**
 * Residual vector at the given pose: for each active pair, the projected
 * model point minus the observed landmark, stacked as (x, y) per pair.
 */
inline Eigen::VectorXd residuals(const PoseParams& pose, const LandmarkFrame& frame,
                                 const model::CandideModel& m, const model::Correspondence& corr)
{
    const Eigen::Matrix3Xd points = geometry::transform_points(m, pose);
    const int n = corr.active_count();
    Eigen::VectorXd r(2 * n);
    for (int k = 0; k < n; ++k)
    {
        const Eigen::Vector2d diff =
            points.col(corr.vertex_indices[k]).head<2>() - frame.points.col(corr.fp68_indices[k]);
        r[2 * k] = diff.x();
        r[2 * k + 1] = diff.y();
    }
    return r;
}

/// E = 1/2 ||r||^2, the summed squared reprojection error up to the
/// conventional 1/2 factor.
inline double reprojection_error(const PoseParams& pose, const LandmarkFrame& frame,
                                 const model::CandideModel& m, const model::Correspondence& corr)
{
    return 0.5 * residuals(pose, frame, m, corr).squaredNorm();
}

/// Root-mean-square point distance over the active pairs.
inline double reprojection_rmse(const PoseParams& pose, const LandmarkFrame& frame,
                                const model::CandideModel& m, const model::Correspondence& corr)
{
    const Eigen::VectorXd r = residuals(pose, frame, m, corr);
    return std::sqrt(r.squaredNorm() / corr.active_count());
}

/**
 * Residuals together with the analytic Jacobian with respect to the free
 * parameters. With q_i the deformed model point so that
 * P_i = s R q_i + (t, 0), the blocks are
 *   d/d log s = s R q_i,  d/dw_k = s (dR/dw_k) q_i,  d/dt = I2,
 *   d/d alpha = s R a_i  for the displacement a_i the unit gives vertex i,
 * each projected onto xy.
 */
inline void residuals_and_jacobian(const PoseParams& pose, const LandmarkFrame& frame,
                                   const ResidualSystem& system, Eigen::VectorXd& r_out,
                                   Eigen::MatrixXd& jacobian_out)
{
    const model::CandideModel& m = *system.face;
    const model::Correspondence& corr = *system.corr;
    const int n = corr.active_count();

    const Eigen::Matrix3d R = geometry::rodrigues(pose.rotation);
    const auto dR = geometry::rodrigues_derivatives(pose.rotation);
    const Eigen::Matrix3Xd q = geometry::deformed_shape(m, pose.shape_coeffs, pose.action_coeffs);

    r_out.resize(2 * n);
    jacobian_out.setZero(2 * n, system.free_size());

    // Column offsets of the free blocks.
    int at = 0;
    const int col_scale = system.mask.scale ? at : -1;
    at += system.mask.scale ? 1 : 0;
    const int col_rot = system.mask.rotation ? at : -1;
    at += system.mask.rotation ? 3 : 0;
    const int col_trans = system.mask.translation ? at : -1;
    at += system.mask.translation ? 2 : 0;
    const int col_shape = system.mask.shape ? at : -1;
    at += system.mask.shape ? m.shape_unit_count() : 0;
    const int col_action = system.mask.action ? at : -1;

    auto displacement_at = [](const model::DeformationUnit& unit, int vertex) -> Eigen::Vector3d {
        for (std::size_t k = 0; k < unit.vertex_indices.size(); ++k)
        {
            if (unit.vertex_indices[k] == vertex)
                return unit.displacements.col(static_cast<Eigen::Index>(k));
        }
        return Eigen::Vector3d::Zero();
    };

    for (int k = 0; k < n; ++k)
    {
        const int vertex = corr.vertex_indices[k];
        const Eigen::Vector3d qi = q.col(vertex);
        const Eigen::Vector3d rotated = R * qi;
        Eigen::Vector3d point = pose.scale * rotated;
        point.x() += pose.translation.x();
        point.y() += pose.translation.y();

        r_out[2 * k] = point.x() - frame.points(0, corr.fp68_indices[k]);
        r_out[2 * k + 1] = point.y() - frame.points(1, corr.fp68_indices[k]);

        if (col_scale >= 0)
        {
            jacobian_out(2 * k, col_scale) = pose.scale * rotated.x();
            jacobian_out(2 * k + 1, col_scale) = pose.scale * rotated.y();
        }
        if (col_rot >= 0)
        {
            for (int j = 0; j < 3; ++j)
            {
                const Eigen::Vector3d d = pose.scale * (dR[static_cast<std::size_t>(j)] * qi);
                jacobian_out(2 * k, col_rot + j) = d.x();
                jacobian_out(2 * k + 1, col_rot + j) = d.y();
            }
        }
        if (col_trans >= 0)
        {
            jacobian_out(2 * k, col_trans) = 1.0;
            jacobian_out(2 * k + 1, col_trans + 1) = 1.0;
        }
        if (col_shape >= 0)
        {
            for (int d = 0; d < m.shape_unit_count(); ++d)
            {
                const Eigen::Vector3d a =
                    displacement_at(m.shape_units[static_cast<std::size_t>(d)], vertex);
                if (a.isZero(0.0))
                    continue;
                const Eigen::Vector3d g = pose.scale * (R * a);
                jacobian_out(2 * k, col_shape + d) = g.x();
                jacobian_out(2 * k + 1, col_shape + d) = g.y();
            }
        }
        if (col_action >= 0)
        {
            for (int f = 0; f < m.action_unit_count(); ++f)
            {
                const Eigen::Vector3d a =
                    displacement_at(m.action_units[static_cast<std::size_t>(f)], vertex);
                if (a.isZero(0.0))
                    continue;
                const Eigen::Vector3d g = pose.scale * (R * a);
                jacobian_out(2 * k, col_action + f) = g.x();
                jacobian_out(2 * k + 1, col_action + f) = g.y();
            }
        }
    }
}

struct LmOptions
{
    double lambda_init = 1e-3;
    double lambda_up = 10.0;   ///< applied on a rejected step
    double lambda_down = 0.1;  ///< applied on an accepted step
    double lambda_max = 1e14;
    double tol_gradient = 1e-10;
    double tol_step = 1e-12;
    int max_iterations = 200;
};

struct FitResult
{
    PoseParams params;
    double error = 0.0; ///< E = 1/2 ||r||^2 at the solution
    int iterations = 0;
    std::vector<double> error_history; ///< accepted-step errors, non-increasing
};

/**
 * Levenberg-Marquardt minimization of the reprojection error over the free
 * parameters of `system`, starting from `init`. Damped normal equations
 * (J^T J + lambda I) delta = -J^T r with the damping raised on rejected and
 * lowered on accepted steps. Stops on a small gradient, a small step, or the
 * iteration cap. Throws DivergedError if the residual turns non-finite.
 */
inline FitResult lm_minimize(const ResidualSystem& system, const PoseParams& init,
                             const LandmarkFrame& frame, const LmOptions& opts = {})
{
    if (!frame.valid())
        throw std::invalid_argument("landmark frame must hold 68 finite points");

    Eigen::VectorXd x = system.pack(init);
    PoseParams pose = system.unpack(x, init);

    Eigen::VectorXd r;
    Eigen::MatrixXd jacobian;
    residuals_and_jacobian(pose, frame, system, r, jacobian);
    if (!r.allFinite())
        throw DivergedError{};
    double error = 0.5 * r.squaredNorm();

    FitResult result;
    result.error_history.push_back(error);

    double lambda = opts.lambda_init;
    int iteration = 0;
    while (iteration < opts.max_iterations)
    {
        ++iteration;
        const Eigen::VectorXd gradient = jacobian.transpose() * r;
        if (gradient.lpNorm<Eigen::Infinity>() <= opts.tol_gradient)
            break;
        const Eigen::MatrixXd hessian = jacobian.transpose() * jacobian;

        bool accepted = false;
        bool small_step = false;
        while (!accepted)
        {
            Eigen::MatrixXd damped = hessian;
            damped.diagonal().array() += lambda;
            const Eigen::VectorXd delta = damped.ldlt().solve(-gradient);
            const Eigen::VectorXd x_trial = x + delta;
            const PoseParams pose_trial = system.unpack(x_trial, init);
            const Eigen::VectorXd r_trial = residuals(pose_trial, frame, *system.face, *system.corr);
            if (!r_trial.allFinite())
                throw DivergedError{};
            const double error_trial = 0.5 * r_trial.squaredNorm();
            if (error_trial < error)
            {
                accepted = true;
                x = x_trial;
                pose = pose_trial;
                error = error_trial;
                lambda = std::max(lambda * opts.lambda_down, 1e-12);
                result.error_history.push_back(error);
                small_step = delta.norm() <= opts.tol_step * (x.norm() + opts.tol_step);
            }
            else
            {
                lambda *= opts.lambda_up;
                if (lambda > opts.lambda_max)
                    break; // cannot improve further at this conditioning
            }
        }
        if (!accepted || small_step)
            break;
        residuals_and_jacobian(pose, frame, system, r, jacobian);
    }

    result.params = pose;
    result.error = error;
    result.iterations = iteration;
    return result;
}

/// Standard normal CDF.
inline double normal_cdf(double x)
{
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

/**
 * Distrust of a coefficient with statistics (mu, sigma): the probability mass
 * of its Gaussian lying closer to zero than to mu, which reduces to
 * Phi(-|mu| / (2 sigma)) for both signs of mu. sigma = 0 degenerates to 0 for
 * mu != 0 and to 0.5 for mu = 0. Ranges over [0, 0.5]; lower is more trusted.
 */
inline double distrust(double mu, double sigma)
{
    if (sigma < 0.0 || !std::isfinite(mu) || !std::isfinite(sigma))
        throw std::invalid_argument("distrust: sigma must be finite and non-negative");
    if (sigma == 0.0)
        return mu == 0.0 ? 0.5 : 0.0;
    return normal_cdf(-std::abs(mu) / (2.0 * sigma));
}

struct DistrustRecord
{
    std::string unit_name;
    double mean = 0.0;
    double variance = 0.0;
    double sigma = 0.0;
    double distrust = 0.5;
};

struct PersonalizeResult
{
    Eigen::VectorXd shape_coeffs;        ///< trusted units keep their mean, others 0
    std::vector<DistrustRecord> records; ///< all shape units, ascending by distrust
    std::vector<int> diverged_frames;    ///< indices of frames dropped from the statistics
};

/**
 * Personalization from neutral frames: fits (s, w, t, shape) per frame,
 * collects per-unit second-order statistics of the fitted shape coefficients,
 * and keeps the mean of every unit whose distrust falls below `threshold`.
 * Frames whose fit diverges are dropped and reported, not imputed.
 */
inline PersonalizeResult personalize(const std::vector<LandmarkFrame>& neutral_frames,
                                     const model::CandideModel& m,
                                     const model::Correspondence& corr, double threshold = 0.25,
                                     const LmOptions& opts = {})
{
    if (neutral_frames.size() < 2)
        throw std::runtime_error("insufficient frames for statistics (need at least 2)");

    const ResidualSystem system(m, corr, ParamMask::rigid_and_shape());
    std::vector<Eigen::VectorXd> samples;
    PersonalizeResult result;
    for (std::size_t i = 0; i < neutral_frames.size(); ++i)
    {
        try
        {
            const PoseParams init = geometry::init_pose(neutral_frames[i].points, m, corr);
            const FitResult fit = lm_minimize(system, init, neutral_frames[i], opts);
            samples.push_back(fit.params.shape_coeffs);
        }
        catch (const DivergedError&)
        {
            result.diverged_frames.push_back(static_cast<int>(i));
        }
    }
    if (samples.size() < 2)
        throw std::runtime_error("insufficient frames for statistics (after dropping diverged)");

    const int unit_count = m.shape_unit_count();
    const double n = static_cast<double>(samples.size());
    result.shape_coeffs = Eigen::VectorXd::Zero(unit_count);
    for (int d = 0; d < unit_count; ++d)
    {
        double mean = 0.0;
        for (const auto& s : samples)
            mean += s[d];
        mean /= n;
        double variance = 0.0;
        for (const auto& s : samples)
            variance += (s[d] - mean) * (s[d] - mean);
        variance /= n;
        DistrustRecord record;
        record.unit_name = m.shape_units[static_cast<std::size_t>(d)].name;
        record.mean = mean;
        record.variance = variance;
        record.sigma = std::sqrt(variance);
        record.distrust = distrust(mean, record.sigma);
        if (record.distrust < threshold)
            result.shape_coeffs[d] = mean;
        result.records.push_back(std::move(record));
    }
    std::stable_sort(result.records.begin(), result.records.end(),
                     [](const DistrustRecord& a, const DistrustRecord& b) {
                         return a.distrust < b.distrust;
                     });
    return result;
}

/// Per-frame result of an action-unit identification pass.
struct FrameFit
{
    int tau = 0;
    PoseParams params;
    double rmse = 0.0;
    int iterations = 0;
    bool diverged = false;
};

/**
 * Identifies action units per frame: with shape coefficients frozen at the
 * personalized values, jointly refits (s, w, t, action) by LM from the affine
 * initialization. Frames are independent; `threads` > 1 fans them out with
 * results ordered by input position either way.
 */
inline std::vector<FrameFit> extract_action_units(const std::vector<LandmarkFrame>& frames,
                                                  const Eigen::VectorXd& personalized_shape,
                                                  const model::CandideModel& m,
                                                  const model::Correspondence& corr,
                                                  const LmOptions& opts = {}, int threads = 1)
{
    if (personalized_shape.size() != m.shape_unit_count())
        throw std::invalid_argument("personalized shape coefficient count mismatch");

    const ResidualSystem system(m, corr, ParamMask::rigid_and_action());
    std::vector<FrameFit> results(frames.size());

    auto fit_one = [&](std::size_t i) {
        FrameFit& out = results[i];
        out.tau = frames[i].tau;
        try
        {
            PoseParams init = geometry::init_pose(frames[i].points, m, corr);
            init.shape_coeffs = personalized_shape;
            const FitResult fit = lm_minimize(system, init, frames[i], opts);
            out.params = fit.params;
            out.iterations = fit.iterations;
            out.rmse = reprojection_rmse(fit.params, frames[i], m, corr);
        }
        catch (const DivergedError&)
        {
            out.diverged = true;
        }
    };

    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(frames.size())));
    if (workers == 1)
    {
        for (std::size_t i = 0; i < frames.size(); ++i)
            fit_one(i);
    }
    else
    {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int t = 0; t < workers; ++t)
        {
            pool.emplace_back([&, t]() {
                for (std::size_t i = static_cast<std::size_t>(t); i < frames.size();
                     i += static_cast<std::size_t>(workers))
                    fit_one(i);
            });
        }
        for (auto& th : pool)
            th.join();
    }
    return results;
}

} // namespace fitting
} // namespace candide
