#pragma once

#include "rummage/geometry.hpp"
#include "rummage/semantics.hpp"

#include <span>
#include <vector>

namespace rummage {

struct DiscrepancyParams {
    double sigma_f = 10.0;
    double epsilon = 0.0;  // m
};

/// Cost of observing semantics `s` at object-frame position `x_obj`.
double point_cost(const DiscrepancyParams& params, const SignedDistance& shape, const Vec3& x_obj, Semantics s);
/// Same, from a precomputed sdf value.
double point_cost_from_sdf(const DiscrepancyParams& params, double sdf_value, Semantics s);

/// Descent direction of point_cost w.r.t. x_obj, built on the normalized sdf
/// gradient. Moving x_obj against it reduces the cost; it is not the exact
/// gradient because the sdf gradient is normalized.
Vec3 point_cost_descent(const DiscrepancyParams& params, const SignedDistance& shape, const Vec3& x_obj,
                        Semantics s);

/// Sum of point costs in cloud insertion order, with x_obj = T x.
double total_discrepancy(const DiscrepancyParams& params, const SignedDistance& shape, const SemanticCloud& cloud,
                         const Pose& T);

/// total_discrepancy for every pose, evaluated concurrently.
std::vector<double> discrepancies(const DiscrepancyParams& params, const SignedDistance& shape,
                                  const SemanticCloud& cloud, std::span<const Pose> poses);

struct DescentParams {
    double step_translation = 1e-2;  // m, trust region of one step
    double step_rotation = 1e-1;     // rad
    double decay = 0.9;              // per iteration
    bool planar = true;              // update only yaw and x, y
};

/// One descent step on total_discrepancy over the pose. The update is a small
/// object-frame motion D applied as T <- D * T. Translation and rotation steps
/// are Gauss-Newton scaled and clipped to the given trust region.
Pose pose_descent_step(const DiscrepancyParams& params, const SignedDistance& shape, const SemanticCloud& cloud,
                       const Pose& T, double step_translation, double step_rotation, bool planar);

/// `iterations` descent steps with decaying trust region; returns the lowest-cost iterate.
Pose refine_pose(const DiscrepancyParams& params, const SignedDistance& shape, const SemanticCloud& cloud,
                 const Pose& T, int iterations, const DescentParams& descent);

}  // namespace rummage
