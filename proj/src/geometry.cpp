#include "rummage/geometry.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <variant>

namespace rummage {

// ---------------------------------------------------------------------------
// Pose

Pose Pose::from_yaw(double yaw, const Vec3& t)
{
    return {Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix(), t};
}

Pose Pose::from_axis_angle(const Vec3& axis, double angle, const Vec3& t)
{
    double n = axis.norm();
    if (n == 0.0 || angle == 0.0)
        return from_translation(t);
    return {Eigen::AngleAxisd(angle, axis / n).toRotationMatrix(), t};
}

Pose Pose::from_quaternion(const Eigen::Quaterniond& q, const Vec3& t)
{
    return {q.normalized().toRotationMatrix(), t};
}

double Pose::yaw() const { return std::atan2(rotation_(1, 0), rotation_(0, 0)); }

double Pose::rotation_angle() const
{
    double c = std::clamp((rotation_.trace() - 1.0) * 0.5, -1.0, 1.0);
    return std::acos(c);
}

void Pose::orthonormalize()
{
    Eigen::JacobiSVD<Mat3> svd(rotation_, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0.0) {
        Mat3 u = svd.matrixU();
        u.col(2) *= -1.0;
        r = u * svd.matrixV().transpose();
    }
    rotation_ = r;
}

bool Pose::is_identity(double tol_t, double tol_r) const
{
    return translation_.norm() <= tol_t && rotation_angle() <= tol_r;
}

// ---------------------------------------------------------------------------
// Shape

namespace {

constexpr double kFallbackStep = 1e-6;

struct Sphere {
    double radius;
    Vec3 center;
};
struct Box {
    Vec3 half;
    Vec3 center;
};
struct Extruded {
    Profile2D profile;
    double half_height;
    Vec3 center;
};

double sign_nonneg(double v) { return v < 0.0 ? -1.0 : 1.0; }

// 2D signed distance with its (possibly zero) gradient.
double profile_sdf(const Profile2D& pr, const Eigen::Vector2d& p, Eigen::Vector2d* grad)
{
    switch (pr.kind) {
    case Profile2D::Kind::Circle: {
        double r = p.norm();
        if (grad)
            *grad = r > 0.0 ? Eigen::Vector2d(p / r) : Eigen::Vector2d::Zero();
        return r - pr.outer_radius;
    }
    case Profile2D::Kind::Annulus: {
        double r = p.norm();
        double mid = 0.5 * (pr.outer_radius + pr.inner_radius);
        double half_width = 0.5 * (pr.outer_radius - pr.inner_radius);
        double s = sign_nonneg(r - mid);
        if (grad)
            *grad = r > 0.0 ? Eigen::Vector2d(s * p / r) : Eigen::Vector2d::Zero();
        return std::abs(r - mid) - half_width;
    }
    case Profile2D::Kind::Rectangle: {
        Eigen::Vector2d q = p.cwiseAbs() - pr.half_extents;
        Eigen::Vector2d outside = q.cwiseMax(0.0);
        double inside = std::min(std::max(q.x(), q.y()), 0.0);
        if (grad) {
            if (outside.squaredNorm() > 0.0) {
                Eigen::Vector2d g(outside.x() * sign_nonneg(p.x()), outside.y() * sign_nonneg(p.y()));
                *grad = g.normalized();
            } else {
                int a = q.x() >= q.y() ? 0 : 1;
                Eigen::Vector2d g = Eigen::Vector2d::Zero();
                g[a] = sign_nonneg(p[a]);
                *grad = g;
            }
        }
        return outside.norm() + inside;
    }
    }
    return 0.0;
}

}  // namespace

struct Shape::Node {
    Kind kind;
    std::variant<std::monostate, Sphere, Box, Extruded> primitive;
    std::shared_ptr<const Node> a;
    std::shared_ptr<const Node> b;
    Aabb bounds;

    // Returns sdf; writes the unnormalized analytic gradient (may be zero).
    double eval(const Vec3& p, Vec3* grad) const
    {
        switch (kind) {
        case Kind::Sphere: {
            const auto& s = std::get<Sphere>(primitive);
            Vec3 d = p - s.center;
            double n = d.norm();
            if (grad)
                *grad = n > 0.0 ? Vec3(d / n) : Vec3::Zero();
            return n - s.radius;
        }
        case Kind::Box: {
            const auto& bx = std::get<Box>(primitive);
            Vec3 d = p - bx.center;
            Vec3 q = d.cwiseAbs() - bx.half;
            Vec3 outside = q.cwiseMax(0.0);
            int axis = 0;
            double qmax = q.maxCoeff(&axis);
            if (grad) {
                if (outside.squaredNorm() > 0.0) {
                    *grad = Vec3(outside.x() * sign_nonneg(d.x()), outside.y() * sign_nonneg(d.y()),
                                 outside.z() * sign_nonneg(d.z()));
                } else {
                    *grad = Vec3::Zero();
                    (*grad)[axis] = sign_nonneg(d[axis]);
                }
            }
            return outside.norm() + std::min(qmax, 0.0);
        }
        case Kind::Extruded: {
            const auto& e = std::get<Extruded>(primitive);
            Vec3 d = p - e.center;
            Eigen::Vector2d g2;
            double w0 = profile_sdf(e.profile, d.head<2>(), grad ? &g2 : nullptr);
            double w1 = std::abs(d.z()) - e.half_height;
            double o0 = std::max(w0, 0.0);
            double o1 = std::max(w1, 0.0);
            if (grad) {
                Vec3 gp(g2.x(), g2.y(), 0.0);
                Vec3 gz(0.0, 0.0, sign_nonneg(d.z()));
                if (o0 > 0.0 || o1 > 0.0)
                    *grad = o0 * gp + o1 * gz;
                else
                    *grad = w0 >= w1 ? gp : gz;
            }
            return std::min(std::max(w0, w1), 0.0) + std::hypot(o0, o1);
        }
        case Kind::Union: {
            Vec3 ga, gb;
            double da = a->eval(p, grad ? &ga : nullptr);
            double db = b->eval(p, grad ? &gb : nullptr);
            if (da <= db) {
                if (grad)
                    *grad = ga;
                return da;
            }
            if (grad)
                *grad = gb;
            return db;
        }
        case Kind::Intersection: {
            Vec3 ga, gb;
            double da = a->eval(p, grad ? &ga : nullptr);
            double db = b->eval(p, grad ? &gb : nullptr);
            if (da >= db) {
                if (grad)
                    *grad = ga;
                return da;
            }
            if (grad)
                *grad = gb;
            return db;
        }
        case Kind::Complement: {
            double d = a->eval(p, grad);
            if (grad)
                *grad = -*grad;
            return -d;
        }
        }
        return 0.0;
    }
};

Shape Shape::sphere(double radius, const Vec3& center)
{
    if (!(radius > 0.0))
        throw std::invalid_argument("sphere radius must be positive");
    auto n = std::make_shared<Node>();
    n->kind = Kind::Sphere;
    n->primitive = Sphere{radius, center};
    n->bounds = {center.array() - radius, center.array() + radius};
    return Shape(n);
}

Shape Shape::box(const Vec3& half_extents, const Vec3& center)
{
    if (!(half_extents.array() > 0.0).all())
        throw std::invalid_argument("box half extents must be positive");
    auto n = std::make_shared<Node>();
    n->kind = Kind::Box;
    n->primitive = Box{half_extents, center};
    n->bounds = {center - half_extents, center + half_extents};
    return Shape(n);
}

Shape Shape::cylinder(double radius, double half_height, const Vec3& center)
{
    return extruded(Profile2D::circle(radius), half_height, center);
}

Shape Shape::extruded(const Profile2D& profile, double half_height, const Vec3& center)
{
    if (!(half_height > 0.0))
        throw std::invalid_argument("extrusion half height must be positive");
    double r = 0.0;
    Eigen::Vector2d half;
    switch (profile.kind) {
    case Profile2D::Kind::Circle:
        if (!(profile.outer_radius > 0.0))
            throw std::invalid_argument("circle radius must be positive");
        r = profile.outer_radius;
        half = {r, r};
        break;
    case Profile2D::Kind::Annulus:
        if (!(profile.outer_radius > profile.inner_radius && profile.inner_radius >= 0.0))
            throw std::invalid_argument("annulus requires outer > inner >= 0");
        r = profile.outer_radius;
        half = {r, r};
        break;
    case Profile2D::Kind::Rectangle:
        if (!(profile.half_extents.array() > 0.0).all())
            throw std::invalid_argument("rectangle half extents must be positive");
        half = profile.half_extents;
        break;
    }
    auto n = std::make_shared<Node>();
    n->kind = Kind::Extruded;
    n->primitive = Extruded{profile, half_height, center};
    Vec3 h(half.x(), half.y(), half_height);
    n->bounds = {center - h, center + h};
    return Shape(n);
}

Shape Shape::unite(const Shape& a, const Shape& b)
{
    auto n = std::make_shared<Node>();
    n->kind = Kind::Union;
    n->a = a.node_;
    n->b = b.node_;
    n->bounds = a.node_->bounds.merged(b.node_->bounds);
    return Shape(n);
}

Shape Shape::intersect(const Shape& a, const Shape& b)
{
    auto n = std::make_shared<Node>();
    n->kind = Kind::Intersection;
    n->a = a.node_;
    n->b = b.node_;
    Aabb ab = a.node_->bounds;
    Aabb bb = b.node_->bounds;
    n->bounds = {ab.min.cwiseMax(bb.min), ab.max.cwiseMin(bb.max)};
    return Shape(n);
}

Shape Shape::complement(const Shape& a)
{
    auto n = std::make_shared<Node>();
    n->kind = Kind::Complement;
    n->a = a.node_;
    // Unbounded in principle; keep the child's box as the region of interest.
    n->bounds = a.node_->bounds;
    return Shape(n);
}

Shape Shape::mug(double outer_radius, double inner_radius, double height, const Vec3& handle_size)
{
    Shape tube = extruded(Profile2D::annulus(outer_radius, inner_radius), 0.5 * height);
    // Handle overlaps the wall by 2 mm so the union is connected.
    Vec3 handle_center(outer_radius + 0.5 * handle_size.x() - 0.002, 0.0, 0.0);
    Shape handle = box(0.5 * handle_size, handle_center);
    return unite(tube, handle);
}

Shape::Kind Shape::kind() const { return node_->kind; }

double Shape::sdf(const Vec3& p) const { return node_->eval(p, nullptr); }

Vec3 Shape::gradient(const Vec3& p) const
{
    Vec3 g;
    node_->eval(p, &g);
    double n = g.norm();
    if (n > 1e-12)
        return g / n;
    return finite_difference_gradient([this](const Vec3& x) { return sdf(x); }, p, kFallbackStep);
}

Aabb Shape::bounds() const { return node_->bounds; }

// ---------------------------------------------------------------------------
// ScalarField

ScalarField::ScalarField(const Vec3& origin, double resolution, const std::array<int, 3>& dims,
                         double outside_value, std::vector<double> values)
    : origin_(origin), resolution_(resolution), dims_(dims), outside_value_(outside_value), values_(std::move(values))
{
    if (!(resolution > 0.0))
        throw std::invalid_argument("field resolution must be positive");
    for (int d : dims)
        if (d < 1)
            throw std::invalid_argument("field dims must be >= 1");
    std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    if (values_.empty())
        values_.assign(n, 0.0);
    if (values_.size() != n)
        throw std::invalid_argument("field value count does not match dims");
}

Vec3 ScalarField::node_position(std::size_t flat) const
{
    int k = static_cast<int>(flat % dims_[2]);
    std::size_t rest = flat / dims_[2];
    int j = static_cast<int>(rest % dims_[1]);
    int i = static_cast<int>(rest / dims_[1]);
    return node_position(i, j, k);
}

namespace {

// Cell coordinate along one axis; false when outside. Snaps near-integers so
// queries at nodes return stored values exactly.
inline bool axis_coord(double x, double o, double res, int n, int& i0, double& f)
{
    if (n == 1) {
        i0 = 0;
        f = 0.0;
        return true;
    }
    double u = (x - o) / res;
    constexpr double eps = 1e-9;
    if (u < -eps || u > (n - 1) + eps)
        return false;
    double r = std::round(u);
    if (std::abs(u - r) < eps)
        u = r;
    u = std::clamp(u, 0.0, static_cast<double>(n - 1));
    i0 = std::min(static_cast<int>(u), n - 2);
    f = u - i0;
    return true;
}

}  // namespace

bool ScalarField::inside(const Vec3& x) const
{
    int i;
    double f;
    for (int a = 0; a < 3; ++a)
        if (!axis_coord(x[a], origin_[a], resolution_, dims_[a], i, f))
            return false;
    return true;
}

double ScalarField::query(const Vec3& x) const
{
    int i0, j0, k0;
    double fx, fy, fz;
    if (!axis_coord(x.x(), origin_.x(), resolution_, dims_[0], i0, fx) ||
        !axis_coord(x.y(), origin_.y(), resolution_, dims_[1], j0, fy) ||
        !axis_coord(x.z(), origin_.z(), resolution_, dims_[2], k0, fz))
        return outside_value_;

    const int di = dims_[0] > 1 ? 1 : 0;
    const int dj = dims_[1] > 1 ? 1 : 0;
    const int dk = dims_[2] > 1 ? 1 : 0;
    if (dk == 0) {
        double v00 = at(i0, j0, k0);
        double v10 = at(i0 + di, j0, k0);
        double v01 = at(i0, j0 + dj, k0);
        double v11 = at(i0 + di, j0 + dj, k0);
        double a = v00 + fx * (v10 - v00);
        double b = v01 + fx * (v11 - v01);
        return a + fy * (b - a);
    }
    double out = 0.0;
    for (int c = 0; c < 8; ++c) {
        int ci = c & 1, cj = (c >> 1) & 1, ck = (c >> 2) & 1;
        double w = (ci ? fx : 1.0 - fx) * (cj ? fy : 1.0 - fy) * (ck ? fz : 1.0 - fz);
        if (w == 0.0)
            continue;
        out += w * at(i0 + ci * di, j0 + cj * dj, k0 + ck * dk);
    }
    return out;
}

void ScalarField::write_csv(std::ostream& os) const
{
    os << "x,y,z,value\n";
    os << std::setprecision(10);
    for (std::size_t n = 0; n < values_.size(); ++n) {
        Vec3 p = node_position(n);
        os << p.x() << ',' << p.y() << ',' << p.z() << ',' << values_[n] << '\n';
    }
}

namespace {

// Piecewise-linear approximation of the viridis colormap.
std::string heat_color(double t)
{
    static const double stops[5][3] = {
        {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
    t = std::clamp(t, 0.0, 1.0) * 4.0;
    int i = std::min(static_cast<int>(t), 3);
    double f = t - i;
    char buf[8];
    int rgb[3];
    for (int c = 0; c < 3; ++c)
        rgb[c] = static_cast<int>(std::lround(stops[i][c] + f * (stops[i + 1][c] - stops[i][c])));
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
    return buf;
}

}  // namespace

void ScalarField::write_svg(std::ostream& os, int layer, double percentile) const
{
    if (layer < 0 || layer >= dims_[2])
        throw std::out_of_range("svg layer outside field");
    const int nx = dims_[0], ny = dims_[1];
    const int cell = 8;
    std::vector<double> slice;
    slice.reserve(static_cast<std::size_t>(nx) * ny);
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j)
            slice.push_back(at(i, j, layer));
    std::vector<double> sorted = slice;
    std::sort(sorted.begin(), sorted.end());
    double lo = sorted.front(), hi = sorted.back();
    double cutoff = lo;
    if (percentile > 0.0) {
        auto idx = static_cast<std::size_t>(std::clamp(percentile, 0.0, 100.0) / 100.0 * (sorted.size() - 1));
        cutoff = sorted[idx];
    }
    double span = hi > lo ? hi - lo : 1.0;

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << nx * cell << "\" height=\"" << ny * cell
       << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"#f0f0f0\"/>\n";
    for (int i = 0; i < nx; ++i) {
        for (int j = 0; j < ny; ++j) {
            double v = slice[static_cast<std::size_t>(i) * ny + j];
            if (!(v > lo) || (percentile > 0.0 && v < cutoff))
                continue;
            // y grows upward in the world, downward in SVG.
            os << "<rect x=\"" << i * cell << "\" y=\"" << (ny - 1 - j) * cell << "\" width=\"" << cell
               << "\" height=\"" << cell << "\" fill=\"" << heat_color((v - lo) / span) << "\"/>\n";
        }
    }
    os << "</svg>\n";
}

// ---------------------------------------------------------------------------
// Workspace

std::array<int, 3> Workspace::dims() const
{
    if (!(resolution > 0.0))
        throw std::invalid_argument("workspace resolution must be positive");
    std::array<int, 3> d{};
    for (int a = 0; a < 3; ++a) {
        double extent = max[a] - min[a];
        if (extent < 0.0)
            throw std::invalid_argument("workspace max must be >= min");
        d[a] = static_cast<int>(std::floor(extent / resolution + 1e-9)) + 1;
    }
    return d;
}

std::size_t Workspace::count() const
{
    auto d = dims();
    return static_cast<std::size_t>(d[0]) * d[1] * d[2];
}

std::vector<Vec3> Workspace::enumerate() const
{
    auto d = dims();
    std::vector<Vec3> out;
    out.reserve(count());
    for (int i = 0; i < d[0]; ++i)
        for (int j = 0; j < d[1]; ++j)
            for (int k = 0; k < d[2]; ++k)
                out.push_back(min + resolution * Vec3(i, j, k));
    return out;
}

ScalarField Workspace::make_field(double outside_value, double fill) const
{
    auto d = dims();
    return ScalarField(min, resolution, d, outside_value,
                       std::vector<double>(static_cast<std::size_t>(d[0]) * d[1] * d[2], fill));
}

// ---------------------------------------------------------------------------
// VoxelSdf

VoxelSdf::VoxelSdf(const SignedDistance& source, double resolution, double padding)
{
    Aabb box = source.bounds().inflated(padding);
    Workspace grid{box.min, box.max, resolution};
    field_ = grid.make_field(0.0);
    auto pts = grid.enumerate();
    for (std::size_t n = 0; n < pts.size(); ++n)
        field_.values()[n] = source.sdf(pts[n]);
    auto d = grid.dims();
    bounds_ = {box.min, box.min + resolution * Vec3(d[0] - 1, d[1] - 1, d[2] - 1)};
}

double VoxelSdf::sdf(const Vec3& p) const
{
    Vec3 c = p.cwiseMax(bounds_.min).cwiseMin(bounds_.max);
    double v = field_.query(c);
    return v + (p - c).norm();
}

Vec3 VoxelSdf::gradient(const Vec3& p) const
{
    return finite_difference_gradient([this](const Vec3& x) { return sdf(x); }, p, 0.5 * field_.resolution());
}

}  // namespace rummage
