#pragma once

#include "rummage/geometry.hpp"

#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace rummage {

enum class Semantics { Free, Occupied, Surface };

std::string_view to_string(Semantics s);
/// Parses FREE|OCCUPIED|SURFACE; throws std::invalid_argument otherwise.
Semantics parse_semantics(std::string_view s);

struct SemanticPoint {
    Vec3 position = Vec3::Zero();
    Semantics semantics = Semantics::Free;
};

/// Observed semantic points. Points keep their insertion order (which fixes the
/// summation order of costs over the cloud) and are also indexed per class.
class SemanticCloud {
public:
    SemanticCloud() = default;
    explicit SemanticCloud(std::span<const SemanticPoint> points);

    void add(const Vec3& position, Semantics s);
    void add(const SemanticPoint& p) { add(p.position, p.semantics); }
    void append(const SemanticCloud& other);

    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }
    const std::vector<SemanticPoint>& points() const { return points_; }
    const SemanticPoint& operator[](std::size_t i) const { return points_[i]; }

    std::size_t count(Semantics s) const { return partition(s).size(); }
    /// Indices into points() of the given class, in insertion order.
    const std::vector<std::size_t>& partition(Semantics s) const;
    std::vector<Vec3> positions(Semantics s) const;

    void write_csv(std::ostream& os) const;
    static SemanticCloud read_csv(std::istream& is);

private:
    std::vector<SemanticPoint> points_;
    std::vector<std::size_t> free_, occupied_, surface_;
};

/// Probabilities of observing each class at a point with the given sdf.
struct ClassProbabilities {
    double free = 0.0;
    double occupied = 0.0;
    double surface = 0.0;

    double of(Semantics s) const
    {
        switch (s) {
        case Semantics::Free: return free;
        case Semantics::Occupied: return occupied;
        case Semantics::Surface: return surface;
        }
        return 0.0;
    }
};

/// Tactile sensor model: sdf values within `zeta` of the surface read as contact,
/// beyond that the surface probability decays exponentially with rate `alpha`.
struct SensorModel {
    double alpha = 100.0;  // 1/m
    double zeta = 0.003;   // m

    ClassProbabilities probabilities(double sdf_value) const;
};

inline ClassProbabilities sensor_probabilities(const SensorModel& m, double v) { return m.probabilities(v); }

/// Per-class voxel downsampling. Each class gets its own lattice of cell centers
/// anchored at the class's minimum corner; output is in lattice scan order.
std::vector<SemanticPoint> voxel_downsample(std::span<const SemanticPoint> points, double resolution);
/// Same as above for a single class of positions.
std::vector<Vec3> voxel_downsample(std::span<const Vec3> points, double resolution);

struct MergeParams {
    double free_resolution = 0.010;
    double surface_resolution = 0.002;
};

/// Combine the accumulated cloud with a new observation after the object moved
/// by the world-frame rigid motion `object_motion`. Object-attached points move
/// with it; previous free points survive only if every particle keeps them
/// outside the object.
SemanticCloud merge_observations(const SemanticCloud& previous, const SemanticCloud& observed,
                                 std::span<const Pose> particles, const SignedDistance& shape,
                                 const Pose& object_motion, const MergeParams& params = {});

}  // namespace rummage
