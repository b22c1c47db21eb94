/*
 * candidefit - deformable 3D face model fitting and emotion features.
 *
 * File: include/candide/geometry.hpp
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
#include <numbers>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/LU>

#include "candide/model.hpp"

namespace candide {
namespace geometry {

/**
 * The per-frame transformation state: global scale s > 0, rotation vector w
 * (angle in radians times unit axis), xy translation t in observer units, and
 * the deformation coefficients for shape and action units.
 */
struct PoseParams
{
    double scale = 1.0;
    Eigen::Vector3d rotation = Eigen::Vector3d::Zero();
    Eigen::Vector2d translation = Eigen::Vector2d::Zero();
    Eigen::VectorXd shape_coeffs;  ///< size D
    Eigen::VectorXd action_coeffs; ///< size F

    static PoseParams neutral(const model::CandideModel& m)
    {
        PoseParams p;
        p.shape_coeffs = Eigen::VectorXd::Zero(m.shape_unit_count());
        p.action_coeffs = Eigen::VectorXd::Zero(m.action_unit_count());
        return p;
    }
};

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 3, 3> cross_matrix(const Eigen::MatrixBase<Derived>& u_in)
{
    using T = typename Derived::Scalar;
    const Eigen::Matrix<T, 3, 1> u = u_in;
    Eigen::Matrix<T, 3, 3> m;
    m << T(0), -u.z(), u.y(), u.z(), T(0), -u.x(), -u.y(), u.x(), T(0);
    return m;
}

/**
 * Rotation matrix for the rotation vector w with angle ||w|| about the axis
 * w/||w||: R = cos(a) I + (1 - cos(a)) u u^T + sin(a) [u]_x. Evaluated in the
 * equivalent form I + A [w]_x + B [w]_x^2 with A = sin(a)/a and
 * B = (1 - cos(a))/a^2, whose small-angle series keeps the map smooth at
 * a = 0.
 */
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 3, 3> rodrigues(const Eigen::MatrixBase<Derived>& w_in)
{
    using T = typename Derived::Scalar;
    const Eigen::Matrix<T, 3, 1> w = w_in;
    const T a2 = w.squaredNorm();
    const T a = std::sqrt(a2);
    T big_a, big_b;
    if (a < T(1e-7))
    {
        big_a = T(1) - a2 / T(6) + a2 * a2 / T(120);
        big_b = T(0.5) - a2 / T(24) + a2 * a2 / T(720);
    }
    else
    {
        big_a = std::sin(a) / a;
        big_b = (T(1) - std::cos(a)) / a2;
    }
    const Eigen::Matrix<T, 3, 3> wx = cross_matrix(w);
    return Eigen::Matrix<T, 3, 3>::Identity() + big_a * wx + big_b * wx * wx;
}

/// Fails when R is not a rotation matrix within `tol`.
inline void require_rotation(const Eigen::Matrix3d& R, double tol = 1e-9)
{
    const double ortho = (R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (!(ortho <= tol) || !(std::abs(R.determinant() - 1.0) <= tol))
        throw std::invalid_argument("not a rotation matrix");
}

/**
 * Recovers the rotation vector from a rotation matrix, the inverse of
 * rodrigues(). The angle comes from tr R = 2 cos(a) + 1 together with the
 * antisymmetric part R - R^T = 2 sin(a) [u]_x; near a = pi, where sin(a)
 * degenerates, the axis is recovered from the diagonal of (R + I)/2 instead.
 * The result is canonical: angle in [0, pi].
 */
inline Eigen::Vector3d inverse_rodrigues(const Eigen::Matrix3d& R)
{
    require_rotation(R);

    const Eigen::Vector3d v(0.5 * (R(2, 1) - R(1, 2)), 0.5 * (R(0, 2) - R(2, 0)),
                            0.5 * (R(1, 0) - R(0, 1))); // = sin(a) * u
    const double sin_a = v.norm();
    const double cos_a = 0.5 * (R.trace() - 1.0);
    const double angle = std::atan2(sin_a, cos_a); // in [0, pi]

    if (angle < 1e-7)
    {
        // sin(a)/a correction keeps w = a*u exact through the series range.
        return v * (1.0 + angle * angle / 6.0);
    }
    if (angle < std::numbers::pi - 1e-4)
        return (angle / sin_a) * v;

    // Near pi the antisymmetric part vanishes; (R + I)/2 approaches u u^T, so
    // the axis comes out of its dominant diagonal entry.
    const double one_minus_cos = 1.0 - cos_a;
    int k = 0;
    R.diagonal().maxCoeff(&k);
    Eigen::Vector3d u;
    u[k] = std::sqrt(std::max(0.0, (R(k, k) - cos_a) / one_minus_cos));
    for (int j = 0; j < 3; ++j)
    {
        if (j != k)
            u[j] = (R(j, k) + R(k, j)) / (2.0 * one_minus_cos * u[k]);
    }
    u.normalize();
    if (u.dot(v) < 0.0)
        u = -u; // keep sin(a) >= 0 so the angle stays in [0, pi]
    else if (sin_a == 0.0)
    {
        // a == pi exactly: u and -u describe the same rotation; pick the
        // lexicographically positive one for determinism.
        for (int j = 0; j < 3; ++j)
        {
            if (u[j] != 0.0)
            {
                if (u[j] < 0.0)
                    u = -u;
                break;
            }
        }
    }
    return angle * u;
}

/// Maps w to the equivalent rotation vector with angle in [0, pi].
inline Eigen::Vector3d canonicalize_rotation(const Eigen::Vector3d& w)
{
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double angle = w.norm();
    if (angle < 1e-12)
        return w;
    const Eigen::Vector3d u = w / angle;
    angle = std::fmod(angle, two_pi);
    if (angle < 0.0)
        angle += two_pi;
    if (angle > std::numbers::pi)
        return (angle - two_pi) * u; // flips axis, angle becomes 2*pi - a
    return angle * u;
}

/**
 * Partial derivatives dR/dw_k of the Rodrigues map at w, for k = 0, 1, 2.
 * Differentiates R = I + A [w]_x + B [w]_x^2 through A(a), B(a) and a(w),
 * with series fallbacks for the removable singularity at a = 0.
 */
inline std::array<Eigen::Matrix3d, 3> rodrigues_derivatives(const Eigen::Vector3d& w)
{
    const double a2 = w.squaredNorm();
    const double a = std::sqrt(a2);
    double big_a, big_b, da_over_a, db_over_a; // (dA/da)/a and (dB/da)/a
    if (a < 1e-4)
    {
        big_a = 1.0 - a2 / 6.0 + a2 * a2 / 120.0;
        big_b = 0.5 - a2 / 24.0 + a2 * a2 / 720.0;
        da_over_a = -1.0 / 3.0 + a2 / 30.0;
        db_over_a = -1.0 / 12.0 + a2 / 180.0;
    }
    else
    {
        big_a = std::sin(a) / a;
        big_b = (1.0 - std::cos(a)) / a2;
        da_over_a = (std::cos(a) - big_a) / a2;
        db_over_a = (big_a - 2.0 * big_b) / a2;
    }
    const Eigen::Matrix3d wx = cross_matrix(w);
    const Eigen::Matrix3d wx2 = wx * wx;
    std::array<Eigen::Matrix3d, 3> d;
    for (int k = 0; k < 3; ++k)
    {
        const Eigen::Matrix3d ek = cross_matrix(Eigen::Vector3d(Eigen::Vector3d::Unit(k)));
        d[k] = da_over_a * w[k] * wx + big_a * ek + db_over_a * w[k] * wx2 +
               big_b * (ek * wx + wx * ek);
    }
    return d;
}

/// Model-frame shape after applying deformation units: P^c_i plus the sum of
/// coefficient-scaled displacements that target vertex i.
inline Eigen::Matrix3Xd deformed_shape(const model::CandideModel& m,
                                       const Eigen::VectorXd& shape_coeffs,
                                       const Eigen::VectorXd& action_coeffs)
{
    if (shape_coeffs.size() != m.shape_unit_count())
        throw std::invalid_argument("shape coefficient count mismatch");
    if (action_coeffs.size() != m.action_unit_count())
        throw std::invalid_argument("action coefficient count mismatch");
    Eigen::Matrix3Xd points = m.vertices;
    auto apply = [&points](const std::vector<model::DeformationUnit>& units,
                           const Eigen::VectorXd& coeffs) {
        for (Eigen::Index d = 0; d < coeffs.size(); ++d)
        {
            if (coeffs[d] == 0.0)
                continue;
            const auto& unit = units[static_cast<std::size_t>(d)];
            for (std::size_t k = 0; k < unit.vertex_indices.size(); ++k)
                points.col(unit.vertex_indices[k]) +=
                    coeffs[d] * unit.displacements.col(static_cast<Eigen::Index>(k));
        }
    };
    apply(m.shape_units, shape_coeffs);
    apply(m.action_units, action_coeffs);
    return points;
}

/**
 * Global motion applied to all model vertices:
 * P^g_i = s R (P^c_i + sum_d alpha_d a^d_i) + t, with t acting in the xy
 * plane only (z stays untranslated).
 */
inline Eigen::Matrix3Xd forward_global(const model::CandideModel& m, double scale,
                                       const Eigen::Vector3d& rotation,
                                       const Eigen::Vector2d& translation,
                                       const Eigen::VectorXd& shape_coeffs)
{
    const Eigen::Matrix3d R = rodrigues(rotation);
    Eigen::Matrix3Xd points =
        deformed_shape(m, shape_coeffs, Eigen::VectorXd::Zero(m.action_unit_count()));
    points = scale * (R * points);
    points.row(0).array() += translation.x();
    points.row(1).array() += translation.y();
    return points;
}

/**
 * Action-unit motion on top of globally moved points:
 * P_i = P^g_i + s R sum_f alpha_f a^f_i, with the same scale and rotation as
 * the global stage. `global_points` must hold one column per model vertex.
 */
inline Eigen::Matrix3Xd forward_action(const model::CandideModel& m,
                                       const Eigen::Matrix3Xd& global_points, double scale,
                                       const Eigen::Vector3d& rotation,
                                       const Eigen::VectorXd& action_coeffs)
{
    if (action_coeffs.size() != m.action_unit_count())
        throw std::invalid_argument("action coefficient count mismatch");
    if (global_points.cols() != m.vertices.cols())
        throw std::invalid_argument("global point count mismatch");
    const Eigen::Matrix3d R = rodrigues(rotation);
    Eigen::Matrix3Xd points = global_points;
    for (Eigen::Index f = 0; f < action_coeffs.size(); ++f)
    {
        if (action_coeffs[f] == 0.0)
            continue;
        const auto& unit = m.action_units[static_cast<std::size_t>(f)];
        for (std::size_t k = 0; k < unit.vertex_indices.size(); ++k)
            points.col(unit.vertex_indices[k]) +=
                scale * (R * (action_coeffs[f] * unit.displacements.col(static_cast<Eigen::Index>(k))));
    }
    return points;
}

/// Full forward chain for all vertices at the given pose.
inline Eigen::Matrix3Xd transform_points(const model::CandideModel& m, const PoseParams& pose)
{
    const Eigen::Matrix3Xd global =
        forward_global(m, pose.scale, pose.rotation, pose.translation, pose.shape_coeffs);
    return forward_action(m, global, pose.scale, pose.rotation, pose.action_coeffs);
}

/// Orthographic projection onto the xy plane: drops the z coordinate.
inline Eigen::Matrix2Xd project_xy(const Eigen::Matrix3Xd& points)
{
    return points.topRows<2>();
}

struct AffineInit
{
    double scale = 1.0;                                  ///< alpha
    Eigen::Vector2d offset = Eigen::Vector2d::Zero();    ///< gamma
};

/**
 * Closed-form least-squares fit of an isotropic scale and 2D offset mapping
 * `source` onto `target`: after centering both shapes,
 * alpha = (x_a'.x_b' + y_a'.y_b') / (||x_a'||^2 + ||y_a'||^2) and
 * gamma = mean(target) - alpha * mean(source). One alpha couples both axes.
 */
inline AffineInit affine_init(const Eigen::Matrix2Xd& source, const Eigen::Matrix2Xd& target)
{
    const Eigen::Index n = source.cols();
    if (n < 2)
        throw std::invalid_argument("affine_init: need at least 2 points");
    if (target.cols() != n)
        throw std::invalid_argument("affine_init: point count mismatch");

    const Eigen::Vector2d mean_a = source.rowwise().mean();
    const Eigen::Vector2d mean_b = target.rowwise().mean();
    const Eigen::Matrix2Xd a = source.colwise() - mean_a;
    const Eigen::Matrix2Xd b = target.colwise() - mean_b;

    const double denom = a.squaredNorm();
    if (denom <= 0.0)
        throw std::invalid_argument("affine_init: zero centered norm");

    AffineInit result;
    result.scale = a.cwiseProduct(b).sum() / denom;
    result.offset = mean_b - result.scale * mean_a;
    return result;
}

/**
 * Initial pose for a landmark frame: zero deformations, identity rotation,
 * and (s, t) from the closed-form affine fit of the frontal model shape to
 * the active landmarks.
 */
inline PoseParams init_pose(const Eigen::Matrix2Xd& landmarks, const model::CandideModel& m,
                            const model::Correspondence& corr)
{
    const int n = corr.active_count();
    Eigen::Matrix2Xd model_xy(2, n);
    Eigen::Matrix2Xd target_xy(2, n);
    for (int k = 0; k < n; ++k)
    {
        model_xy.col(k) = m.vertices.col(corr.vertex_indices[k]).head<2>();
        target_xy.col(k) = landmarks.col(corr.fp68_indices[k]);
    }
    const AffineInit fit = affine_init(model_xy, target_xy);
    PoseParams pose = PoseParams::neutral(m);
    pose.scale = fit.scale;
    pose.translation = fit.offset;
    return pose;
}

} // namespace geometry
} // namespace candide
