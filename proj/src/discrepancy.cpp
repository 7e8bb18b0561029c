#include "rummage/discrepancy.hpp"

#include "rummage/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace rummage {

double point_cost_from_sdf(const DiscrepancyParams& params, double v, Semantics s)
{
    switch (s) {
    case Semantics::Free: return params.sigma_f * std::max(0.0, params.epsilon - v);
    case Semantics::Occupied: return params.sigma_f * std::max(0.0, params.epsilon + v);
    case Semantics::Surface: return std::abs(v);
    }
    return 0.0;
}

double point_cost(const DiscrepancyParams& params, const SignedDistance& shape, const Vec3& x_obj, Semantics s)
{
    return point_cost_from_sdf(params, shape.sdf(x_obj), s);
}

namespace {

// Descent direction from a known sdf value; the gradient is only evaluated
// when the point is active.
Vec3 descent_from_sdf(const DiscrepancyParams& params, const SignedDistance& shape, const Vec3& x_obj, double v,
                      Semantics s)
{
    switch (s) {
    case Semantics::Free: {
        double h = std::max(0.0, params.epsilon - v);
        if (h == 0.0)
            return Vec3::Zero();
        return -params.sigma_f * h * shape.gradient(x_obj);
    }
    case Semantics::Occupied: {
        double h = std::max(0.0, params.epsilon + v);
        if (h == 0.0)
            return Vec3::Zero();
        return params.sigma_f * h * shape.gradient(x_obj);
    }
    case Semantics::Surface:
        if (v == 0.0)
            return Vec3::Zero();
        return v * shape.gradient(x_obj);
    }
    return Vec3::Zero();
}

}  // namespace

Vec3 point_cost_descent(const DiscrepancyParams& params, const SignedDistance& shape, const Vec3& x_obj,
                        Semantics s)
{
    return descent_from_sdf(params, shape, x_obj, shape.sdf(x_obj), s);
}

double total_discrepancy(const DiscrepancyParams& params, const SignedDistance& shape, const SemanticCloud& cloud,
                         const Pose& T)
{
    double total = 0.0;
    for (const auto& p : cloud.points())
        total += point_cost(params, shape, T.apply(p.position), p.semantics);
    return total;
}

std::vector<double> discrepancies(const DiscrepancyParams& params, const SignedDistance& shape,
                                  const SemanticCloud& cloud, std::span<const Pose> poses)
{
    std::vector<double> out(poses.size());
    parallel_for(poses.size(), [&](std::size_t i) { out[i] = total_discrepancy(params, shape, cloud, poses[i]); });
    return out;
}

Pose pose_descent_step(const DiscrepancyParams& params, const SignedDistance& shape, const SemanticCloud& cloud,
                       const Pose& T, double step_translation, double step_rotation, bool planar)
{
    Vec3 g_sum = Vec3::Zero();
    Vec3 torque = Vec3::Zero();
    double w_sum = 0.0;
    double inertia = 0.0;
    for (const auto& p : cloud.points()) {
        Vec3 x = T.apply(p.position);
        double v = shape.sdf(x);
        if (point_cost_from_sdf(params, v, p.semantics) == 0.0)
            continue;
        Vec3 g = descent_from_sdf(params, shape, x, v, p.semantics);
        double w = p.semantics == Semantics::Surface ? 1.0 : params.sigma_f;
        if (planar) {
            g.z() = 0.0;
            x.z() = 0.0;
        }
        g_sum += g;
        torque += x.cross(g);
        w_sum += w;
        inertia += w * x.squaredNorm();
    }
    if (w_sum == 0.0)
        return T;

    Vec3 dt = -g_sum / w_sum;
    Vec3 omega = inertia > 1e-12 ? Vec3(-torque / inertia) : Vec3::Zero();
    if (planar) {
        dt.z() = 0.0;
        omega.x() = omega.y() = 0.0;
    }
    double nt = dt.norm();
    if (nt > step_translation)
        dt *= step_translation / nt;
    double nr = omega.norm();
    if (nr > step_rotation)
        omega *= step_rotation / nr;

    Pose delta;
    if (planar)
        delta = Pose::from_yaw(omega.z(), dt);
    else
        delta = nr > 0.0 ? Pose::from_axis_angle(omega.normalized(), omega.norm(), dt) : Pose::from_translation(dt);
    Pose out = delta * T;
    out.orthonormalize();
    return out;
}

Pose refine_pose(const DiscrepancyParams& params, const SignedDistance& shape, const SemanticCloud& cloud,
                 const Pose& T, int iterations, const DescentParams& descent)
{
    Pose best = T;
    double best_cost = total_discrepancy(params, shape, cloud, T);
    Pose cur = T;
    double st = descent.step_translation, sr = descent.step_rotation;
    for (int it = 0; it < iterations && best_cost > 0.0; ++it) {
        cur = pose_descent_step(params, shape, cloud, cur, st, sr, descent.planar);
        double c = total_discrepancy(params, shape, cloud, cur);
        if (c < best_cost) {
            best_cost = c;
            best = cur;
        }
        st *= descent.decay;
        sr *= descent.decay;
    }
    return best;
}

}  // namespace rummage
