#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <iosfwd>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace rummage {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Rigid transform mapping world coordinates to object-frame coordinates:
/// x_obj = rotation * x_world + translation.
class Pose {
public:
    Pose() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
    Pose(const Mat3& rotation, const Vec3& translation) : rotation_(rotation), translation_(translation) {}

    static Pose identity() { return {}; }
    static Pose from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }
    static Pose from_yaw(double yaw, const Vec3& t = Vec3::Zero());
    static Pose from_axis_angle(const Vec3& axis, double angle, const Vec3& t = Vec3::Zero());
    static Pose from_quaternion(const Eigen::Quaterniond& q, const Vec3& t);

    const Mat3& rotation() const { return rotation_; }
    const Vec3& translation() const { return translation_; }

    Vec3 apply(const Vec3& x) const { return rotation_ * x + translation_; }
    /// Rotation only (for directions such as normals).
    Vec3 apply_direction(const Vec3& v) const { return rotation_ * v; }

    /// (a * b).apply(x) == a.apply(b.apply(x))
    Pose operator*(const Pose& other) const
    {
        return {rotation_ * other.rotation_, rotation_ * other.translation_ + translation_};
    }
    Pose inverse() const
    {
        Mat3 rt = rotation_.transpose();
        return {rt, -(rt * translation_)};
    }

    /// Yaw of the rotation about z (exact for planar poses).
    double yaw() const;
    /// Geodesic rotation angle in [0, pi].
    double rotation_angle() const;
    Eigen::Quaterniond quaternion() const { return Eigen::Quaterniond(rotation_); }

    /// Re-project the rotation onto SO(3) (polar decomposition via SVD).
    void orthonormalize();

    /// True when translation norm <= tol_t and rotation angle <= tol_r.
    bool is_identity(double tol_t = 1e-6, double tol_r = 1e-6) const;

private:
    Mat3 rotation_;
    Vec3 translation_;
};

inline Vec3 transform_point(const Pose& pose, const Vec3& x) { return pose.apply(x); }

struct Aabb {
    Vec3 min = Vec3::Zero();
    Vec3 max = Vec3::Zero();

    Vec3 center() const { return 0.5 * (min + max); }
    Vec3 extent() const { return max - min; }
    double diagonal() const { return extent().norm(); }
    bool contains(const Vec3& p) const
    {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }
    Aabb merged(const Aabb& o) const { return {min.cwiseMin(o.min), max.cwiseMax(o.max)}; }
    Aabb inflated(double r) const { return {min.array() - r, max.array() + r}; }
};

/// Object-frame signed distance: negative inside, positive outside.
class SignedDistance {
public:
    virtual ~SignedDistance() = default;
    virtual double sdf(const Vec3& p) const = 0;
    /// Unit-norm direction of increasing sdf.
    virtual Vec3 gradient(const Vec3& p) const = 0;
    virtual Aabb bounds() const = 0;
    /// Bounding-box diagonal.
    double characteristic_length() const { return bounds().diagonal(); }
};

/// 2D cross-section used by extruded shapes (profile lies in the xy-plane).
struct Profile2D {
    enum class Kind { Circle, Annulus, Rectangle };
    Kind kind = Kind::Circle;
    double outer_radius = 0.0;  // circle / annulus
    double inner_radius = 0.0;  // annulus
    Eigen::Vector2d half_extents = Eigen::Vector2d::Zero();  // rectangle

    static Profile2D circle(double r) { return {Kind::Circle, r, 0.0, {}}; }
    static Profile2D annulus(double outer, double inner) { return {Kind::Annulus, outer, inner, {}}; }
    static Profile2D rectangle(double hx, double hy) { return {Kind::Rectangle, 0.0, 0.0, {hx, hy}}; }
};

/// Analytic CSG shape. Unions/intersections combine child distances by min/max,
/// which is sign-exact but only a bound on the true distance off the surface.
class Shape final : public SignedDistance {
public:
    enum class Kind { Sphere, Box, Extruded, Union, Intersection, Complement };

    static Shape sphere(double radius, const Vec3& center = Vec3::Zero());
    static Shape box(const Vec3& half_extents, const Vec3& center = Vec3::Zero());
    /// Cylinder with axis along z.
    static Shape cylinder(double radius, double half_height, const Vec3& center = Vec3::Zero());
    /// Profile in xy extruded along z over [-half_height, half_height] (+ center).
    static Shape extruded(const Profile2D& profile, double half_height, const Vec3& center = Vec3::Zero());
    static Shape unite(const Shape& a, const Shape& b);
    static Shape intersect(const Shape& a, const Shape& b);
    static Shape complement(const Shape& a);

    /// Open tube with a solid handle block on +x.
    static Shape mug(double outer_radius = 0.05, double inner_radius = 0.042, double height = 0.08,
                     const Vec3& handle_size = Vec3(0.02, 0.015, 0.05));

    Kind kind() const;
    double sdf(const Vec3& p) const override;
    Vec3 gradient(const Vec3& p) const override;
    Aabb bounds() const override;

private:
    struct Node;
    explicit Shape(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
    std::shared_ptr<const Node> node_;
};

/// Axis-aligned grid of samples with multilinear interpolation. Axes with a
/// single node are treated as a planar slice and ignore that coordinate.
class ScalarField {
public:
    ScalarField() = default;
    ScalarField(const Vec3& origin, double resolution, const std::array<int, 3>& dims, double outside_value,
                std::vector<double> values = {});

    const Vec3& origin() const { return origin_; }
    double resolution() const { return resolution_; }
    const std::array<int, 3>& dims() const { return dims_; }
    double outside_value() const { return outside_value_; }
    std::size_t size() const { return values_.size(); }
    bool planar() const { return dims_[2] == 1; }

    std::size_t index(int i, int j, int k) const
    {
        return (static_cast<std::size_t>(i) * dims_[1] + j) * dims_[2] + k;
    }
    Vec3 node_position(int i, int j, int k) const
    {
        return origin_ + resolution_ * Vec3(i, j, k);
    }
    Vec3 node_position(std::size_t flat) const;

    double& at(int i, int j, int k) { return values_[index(i, j, k)]; }
    double at(int i, int j, int k) const { return values_[index(i, j, k)]; }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    double query(const Vec3& x) const;
    bool inside(const Vec3& x) const;

    /// Rows of x,y,z,value in node order.
    void write_csv(std::ostream& os) const;
    /// Heat map of the k-th z layer. Nodes below the given value percentile
    /// (0-100) are drawn as background.
    void write_svg(std::ostream& os, int layer, double percentile = 0.0) const;

private:
    Vec3 origin_ = Vec3::Zero();
    double resolution_ = 1.0;
    std::array<int, 3> dims_{1, 1, 1};
    double outside_value_ = 0.0;
    std::vector<double> values_;
};

inline double field_query(const ScalarField& f, const Vec3& x) { return f.query(x); }

/// Axis-aligned box enumerated as a regular grid.
struct Workspace {
    Vec3 min = Vec3::Zero();
    Vec3 max = Vec3::Zero();
    double resolution = 0.01;

    std::array<int, 3> dims() const;
    std::size_t count() const;
    /// Row-major (x slowest, z fastest) grid positions; includes both boundary planes.
    std::vector<Vec3> enumerate() const;
    ScalarField make_field(double outside_value, double fill = 0.0) const;
};

inline std::vector<Vec3> enumerate_workspace(const Workspace& w) { return w.enumerate(); }

/// Shape baked onto a voxel grid; gradient by central differences with
/// step of half the voxel resolution.
class VoxelSdf final : public SignedDistance {
public:
    VoxelSdf(const SignedDistance& source, double resolution, double padding);

    double sdf(const Vec3& p) const override;
    Vec3 gradient(const Vec3& p) const override;
    Aabb bounds() const override { return bounds_; }
    const ScalarField& field() const { return field_; }

private:
    ScalarField field_;
    Aabb bounds_;
};

/// Normalizes a finite-difference gradient estimate of `sdf`, falling back to the
/// first axis of maximal one-sided increase when the central estimate vanishes.
template <typename F>
Vec3 finite_difference_gradient(const F& sdf, const Vec3& p, double h)
{
    Vec3 g;
    for (int a = 0; a < 3; ++a) {
        Vec3 e = Vec3::Zero();
        e[a] = h;
        g[a] = (sdf(p + e) - sdf(p - e)) / (2.0 * h);
    }
    double n = g.norm();
    if (n > 1e-12)
        return g / n;
    double f0 = sdf(p);
    double best = -std::numeric_limits<double>::infinity();
    Vec3 out = Vec3::UnitX();
    for (int a = 0; a < 3; ++a) {
        for (double s : {1.0, -1.0}) {
            Vec3 e = Vec3::Zero();
            e[a] = s * h;
            double d = sdf(p + e) - f0;
            if (d > best) {
                best = d;
                out = Vec3::Zero();
                out[a] = s;
            }
        }
    }
    return out;
}

}  // namespace rummage
