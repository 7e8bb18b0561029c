#pragma once

#include "rummage/belief.hpp"
#include "rummage/discrepancy.hpp"
#include "rummage/geometry.hpp"
#include "rummage/semantics.hpp"

namespace rummage {

/// Mixture of per-particle sensor outputs at world position x.
ClassProbabilities semantics_probability(const ParticleSet& particles, const SignedDistance& shape, const Vec3& x,
                                         const SensorModel& sensor = {});

/// Expected discrepancy contributed by observing x: gamma times the sum over
/// classes of p(class) times the weighted mean point cost of that class.
double info_gain(const ParticleSet& particles, const SignedDistance& shape, const Vec3& x, double gamma,
                 const SensorModel& sensor = {}, const DiscrepancyParams& discrepancy = {});

struct InfoFields {
    ScalarField info;    // outside 0
    ScalarField p_free;  // outside 1
    ScalarField p_occ;   // outside 0
    ScalarField p_surf;  // outside 0

    ClassProbabilities probabilities(const Vec3& x) const
    {
        return {p_free.query(x), p_occ.query(x), p_surf.query(x)};
    }
};

InfoFields build_info_fields(const ParticleSet& particles, const SignedDistance& shape, const Workspace& workspace,
                             double gamma, const SensorModel& sensor = {}, const DiscrepancyParams& discrepancy = {});

/// Annular reachability around a fixed base: points within r_half of the
/// r_mid circle are fully reachable, falling linearly to 0 once the scaled
/// radial error reaches psi.
struct ReachModel {
    Vec3 base = Vec3::Zero();
    double r_mid = 0.45;
    double r_half = 0.15;
    double slope = 4.0;
    double psi = 0.4;

    double error(const Vec3& x) const;
    double value(const Vec3& x) const;
    /// Largest distance from the base with nonzero reachability.
    double support_radius() const { return r_mid + r_half + psi / slope; }
    double inner_support_radius() const { return std::max(0.0, r_mid - r_half - psi / slope); }
};

ScalarField build_reachability(const Workspace& workspace, const ReachModel& model);

}  // namespace rummage
