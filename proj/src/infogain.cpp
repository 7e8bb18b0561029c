#include "rummage/infogain.hpp"

#include "rummage/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace rummage {

ClassProbabilities semantics_probability(const ParticleSet& particles, const SignedDistance& shape, const Vec3& x,
                                         const SensorModel& sensor)
{
    ClassProbabilities out;
    for (std::size_t i = 0; i < particles.size(); ++i) {
        double w = particles.weights[i];
        auto p = sensor.probabilities(shape.sdf(particles.poses[i].apply(x)));
        out.free += w * p.free;
        out.occupied += w * p.occupied;
        out.surface += w * p.surface;
    }
    return out;
}

namespace {

struct NodeValue {
    ClassProbabilities p;
    double info = 0.0;
};

NodeValue evaluate_node(const ParticleSet& particles, const SignedDistance& shape, const Vec3& x, double gamma,
                        const SensorModel& sensor, const DiscrepancyParams& discrepancy)
{
    NodeValue out;
    double c_free = 0.0, c_occ = 0.0, c_surf = 0.0;
    for (std::size_t i = 0; i < particles.size(); ++i) {
        double w = particles.weights[i];
        double v = shape.sdf(particles.poses[i].apply(x));
        auto p = sensor.probabilities(v);
        out.p.free += w * p.free;
        out.p.occupied += w * p.occupied;
        out.p.surface += w * p.surface;
        c_free += w * point_cost_from_sdf(discrepancy, v, Semantics::Free);
        c_occ += w * point_cost_from_sdf(discrepancy, v, Semantics::Occupied);
        c_surf += w * point_cost_from_sdf(discrepancy, v, Semantics::Surface);
    }
    out.info = gamma * (out.p.free * c_free + out.p.occupied * c_occ + out.p.surface * c_surf);
    return out;
}

}  // namespace

double info_gain(const ParticleSet& particles, const SignedDistance& shape, const Vec3& x, double gamma,
                 const SensorModel& sensor, const DiscrepancyParams& discrepancy)
{
    return evaluate_node(particles, shape, x, gamma, sensor, discrepancy).info;
}

InfoFields build_info_fields(const ParticleSet& particles, const SignedDistance& shape, const Workspace& workspace,
                             double gamma, const SensorModel& sensor, const DiscrepancyParams& discrepancy)
{
    InfoFields f{workspace.make_field(0.0), workspace.make_field(1.0), workspace.make_field(0.0),
                 workspace.make_field(0.0)};
    auto nodes = workspace.enumerate();
    parallel_for(
        nodes.size(),
        [&](std::size_t n) {
            auto v = evaluate_node(particles, shape, nodes[n], gamma, sensor, discrepancy);
            f.info.values()[n] = v.info;
            f.p_free.values()[n] = v.p.free;
            f.p_occ.values()[n] = v.p.occupied;
            f.p_surf.values()[n] = v.p.surface;
        },
        64);
    return f;
}

double ReachModel::error(const Vec3& x) const
{
    return std::max(0.0, std::abs((x - base).norm() - r_mid) - r_half) * slope;
}

double ReachModel::value(const Vec3& x) const { return std::max(0.0, psi - error(x)) / psi; }

ScalarField build_reachability(const Workspace& workspace, const ReachModel& model)
{
    ScalarField f = workspace.make_field(0.0);
    auto nodes = workspace.enumerate();
    for (std::size_t n = 0; n < nodes.size(); ++n)
        f.values()[n] = model.value(nodes[n]);
    return f;
}

}  // namespace rummage
