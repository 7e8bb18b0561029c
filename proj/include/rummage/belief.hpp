#pragma once

#include "rummage/discrepancy.hpp"
#include "rummage/geometry.hpp"
#include "rummage/random.hpp"
#include "rummage/semantics.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace rummage {

struct ParticleSet {
    std::vector<Pose> poses;
    std::vector<double> weights;

    ParticleSet() = default;
    /// Uniform weights.
    explicit ParticleSet(std::vector<Pose> p);
    ParticleSet(std::vector<Pose> p, std::vector<double> w) : poses(std::move(p)), weights(std::move(w)) {}

    std::size_t size() const { return poses.size(); }
    void normalize();

    /// Rows of x,y,z,qw,qx,qy,qz,weight (translation then rotation quaternion).
    void write_csv(std::ostream& os) const;
    static ParticleSet read_csv(std::istream& is);
};

struct BeliefParams {
    int n_particles = 100;
    double gamma = 2.0;
    double eta = 5.0;
    double sigma_t = 0.010;  // m
    double sigma_r = 0.0;    // rad
    int k_opt = 10;
    bool planar = true;
    /// Resample when this percentile of the discrepancies exceeds eta; 100 is the max.
    double resample_percentile = 100.0;
    int yaw_bins = 36;
    DiscrepancyParams discrepancy;
    DescentParams descent;
    MergeParams merge;
};

/// Boltzmann weights from discrepancies, shifted by their minimum.
std::vector<double> boltzmann_weights(std::span<const double> d, double gamma);

ParticleSet weigh(const ParticleSet& particles, const SemanticCloud& cloud, const SignedDistance& shape,
                  const BeliefParams& params);

/// Random delta transform; planar mode keeps translation in xy and rotates about z.
Pose perturb(Rng& rng, double sigma_t, double sigma_r, bool planar);

/// Systematic resampling indices for normalized weights.
std::vector<std::size_t> systematic_resample(std::span<const double> weights, Rng& rng);

/// SIR, perturbation of every copy, then k_opt descent iterations on the cloud.
/// Output weights are uniform.
ParticleSet resample(const ParticleSet& particles, const SemanticCloud& cloud, const SignedDistance& shape,
                     const BeliefParams& params, Rng& rng);

struct Movement {
    Pose dT;    // object-frame change: T_new = dT * T for the representative particle
    Pose dT_w;  // world-frame motion of the object: x_new = dT_w * x_old
};

/// Object motion consistent with the new observation under a sticking-contact
/// prior. `robot_motion` is the world-frame end-effector motion during contact.
Movement estimate_movement(const SemanticCloud& previous, const SemanticCloud& observed,
                           const ParticleSet& particles, const SignedDistance& shape, const Pose& robot_motion,
                           const BeliefParams& params);

/// Movement pair for a known world-frame object motion.
Movement movement_from_world(const Pose& world_motion, const Pose& representative);

struct BeliefState {
    ParticleSet particles;
    SemanticCloud cloud;
};

struct UpdateReport {
    bool moved = false;
    bool resampled = false;
    std::vector<double> discrepancies;
};

/// One posterior update given the object's movement.
BeliefState update_step(const BeliefState& state, const SemanticCloud& observed, const Movement& movement,
                        const SignedDistance& shape, const BeliefParams& params, Rng& rng,
                        UpdateReport* report = nullptr);

/// Same, estimating the movement from the end-effector motion first.
BeliefState update_step(const BeliefState& state, const SemanticCloud& observed, const Pose& robot_motion,
                        const SignedDistance& shape, const BeliefParams& params, Rng& rng,
                        UpdateReport* report = nullptr);

/// QD-lite initialization: refine each prior, keep the best pose per yaw bin
/// (bins above eta are dropped unless none survive), fill N particles by
/// stratified sampling over the kept bins, then weigh.
ParticleSet initialize_particles(std::span<const Pose> priors, const SemanticCloud& cloud,
                                 const SignedDistance& shape, const BeliefParams& params, Rng& rng);

/// Planar object-center estimate for an object of unknown yaw: grid search
/// around `guess` for the center whose best yaw (of `yaw_samples`) has the
/// lowest discrepancy. Only points within `radius` + the shape extent of the
/// guess take part.
Vec3 estimate_planar_center(const SemanticCloud& cloud, const SignedDistance& shape, const Vec3& guess,
                            const DiscrepancyParams& params = {}, double radius = 0.06, double step = 0.005,
                            int yaw_samples = 12);

}  // namespace rummage
