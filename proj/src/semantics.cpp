#include "rummage/semantics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>

namespace rummage {

std::string_view to_string(Semantics s)
{
    switch (s) {
    case Semantics::Free: return "FREE";
    case Semantics::Occupied: return "OCCUPIED";
    case Semantics::Surface: return "SURFACE";
    }
    return "FREE";
}

Semantics parse_semantics(std::string_view s)
{
    if (s == "FREE")
        return Semantics::Free;
    if (s == "OCCUPIED")
        return Semantics::Occupied;
    if (s == "SURFACE")
        return Semantics::Surface;
    throw std::invalid_argument("unknown semantics: " + std::string(s));
}

SemanticCloud::SemanticCloud(std::span<const SemanticPoint> points)
{
    points_.reserve(points.size());
    for (const auto& p : points)
        add(p);
}

void SemanticCloud::add(const Vec3& position, Semantics s)
{
    std::size_t idx = points_.size();
    points_.push_back({position, s});
    switch (s) {
    case Semantics::Free: free_.push_back(idx); break;
    case Semantics::Occupied: occupied_.push_back(idx); break;
    case Semantics::Surface: surface_.push_back(idx); break;
    }
}

void SemanticCloud::append(const SemanticCloud& other)
{
    for (const auto& p : other.points_)
        add(p);
}

const std::vector<std::size_t>& SemanticCloud::partition(Semantics s) const
{
    switch (s) {
    case Semantics::Free: return free_;
    case Semantics::Occupied: return occupied_;
    case Semantics::Surface: return surface_;
    }
    return free_;
}

std::vector<Vec3> SemanticCloud::positions(Semantics s) const
{
    std::vector<Vec3> out;
    const auto& idx = partition(s);
    out.reserve(idx.size());
    for (auto i : idx)
        out.push_back(points_[i].position);
    return out;
}

void SemanticCloud::write_csv(std::ostream& os) const
{
    os << "x,y,z,semantics\n" << std::setprecision(17);
    for (const auto& p : points_)
        os << p.position.x() << ',' << p.position.y() << ',' << p.position.z() << ',' << to_string(p.semantics)
           << '\n';
}

SemanticCloud SemanticCloud::read_csv(std::istream& is)
{
    SemanticCloud cloud;
    std::string line;
    bool header = true;
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        if (header) {
            header = false;
            if (line.rfind("x,", 0) == 0)
                continue;
        }
        std::stringstream ss(line);
        std::string cell[4];
        for (auto& c : cell)
            if (!std::getline(ss, c, ','))
                throw std::runtime_error("malformed cloud row: " + line);
        cloud.add(Vec3(std::stod(cell[0]), std::stod(cell[1]), std::stod(cell[2])), parse_semantics(cell[3]));
    }
    return cloud;
}

ClassProbabilities SensorModel::probabilities(double v) const
{
    double s = v > 0.0 ? 1.0 : -1.0;
    double vt = s * std::max(0.0, std::abs(v) - zeta);
    ClassProbabilities p;
    p.surface = std::exp(-alpha * std::abs(vt));
    // Only one of free/occupied is nonzero; writing it as 1 - surface keeps the
    // three classes summing to one up to a single rounding.
    if (vt > 0.0)
        p.free = std::max(0.0, 1.0 - std::exp(-alpha * vt));
    else if (vt < 0.0)
        p.occupied = std::max(0.0, 1.0 - std::exp(alpha * vt));
    return p;
}

std::vector<Vec3> voxel_downsample(std::span<const Vec3> points, double resolution)
{
    if (!(resolution > 0.0))
        throw std::invalid_argument("downsample resolution must be positive");
    if (points.empty())
        return {};
    Vec3 lo = points[0];
    for (const auto& p : points)
        lo = lo.cwiseMin(p);
    using Key = std::tuple<long, long, long>;
    std::vector<Key> keys;
    keys.reserve(points.size());
    for (const auto& p : points) {
        Vec3 u = (p - lo) / resolution;
        keys.emplace_back(std::lround(u.x()), std::lround(u.y()), std::lround(u.z()));
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    std::vector<Vec3> out;
    out.reserve(keys.size());
    for (const auto& [i, j, k] : keys)
        out.push_back(lo + resolution * Vec3(static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)));
    return out;
}

std::vector<SemanticPoint> voxel_downsample(std::span<const SemanticPoint> points, double resolution)
{
    std::vector<SemanticPoint> out;
    for (Semantics s : {Semantics::Free, Semantics::Occupied, Semantics::Surface}) {
        std::vector<Vec3> cls;
        for (const auto& p : points)
            if (p.semantics == s)
                cls.push_back(p.position);
        for (const auto& c : voxel_downsample(std::span<const Vec3>(cls), resolution))
            out.push_back({c, s});
    }
    return out;
}

SemanticCloud merge_observations(const SemanticCloud& previous, const SemanticCloud& observed,
                                 std::span<const Pose> particles, const SignedDistance& shape,
                                 const Pose& object_motion, const MergeParams& params)
{
    std::vector<Vec3> free_pts, occ_pts, surf_pts;
    for (const auto& p : previous.points()) {
        switch (p.semantics) {
        case Semantics::Free: {
            bool consistent = true;
            for (const auto& pose : particles) {
                if (!(shape.sdf(pose.apply(p.position)) > 0.0)) {
                    consistent = false;
                    break;
                }
            }
            if (consistent)
                free_pts.push_back(p.position);
            break;
        }
        case Semantics::Occupied: occ_pts.push_back(object_motion.apply(p.position)); break;
        case Semantics::Surface: surf_pts.push_back(object_motion.apply(p.position)); break;
        }
    }
    for (const auto& p : observed.points()) {
        switch (p.semantics) {
        case Semantics::Free: free_pts.push_back(p.position); break;
        case Semantics::Occupied: occ_pts.push_back(p.position); break;
        case Semantics::Surface: surf_pts.push_back(p.position); break;
        }
    }
    SemanticCloud out;
    for (const auto& c : voxel_downsample(std::span<const Vec3>(free_pts), params.free_resolution))
        out.add(c, Semantics::Free);
    for (const auto& c : voxel_downsample(std::span<const Vec3>(occ_pts), params.surface_resolution))
        out.add(c, Semantics::Occupied);
    for (const auto& c : voxel_downsample(std::span<const Vec3>(surf_pts), params.surface_resolution))
        out.add(c, Semantics::Surface);
    return out;
}

}  // namespace rummage
