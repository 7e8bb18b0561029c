#pragma once

#include "rummage/belief.hpp"
#include "rummage/geometry.hpp"
#include "rummage/infogain.hpp"
#include "rummage/planner.hpp"
#include "rummage/random.hpp"
#include "rummage/semantics.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rummage {

/// Pinhole depth camera: a rows x rays grid of rays spread over fov
/// (horizontal, about heading) and vfov (vertical, about pitch).
struct Camera {
    Vec3 origin = Vec3(0.1, 0.0, 0.0);
    double heading = 0.0;  // rad, yaw of the optical axis
    double pitch = 0.0;    // rad, elevation of the optical axis (negative looks down)
    double fov = 0.7;      // rad, full horizontal angle
    double vfov = 0.0;     // rad, full vertical angle
    int rays = 81;         // columns
    int rows = 1;
    double range = 1.0;         // m
    double free_spacing = 0.01; // m between FREE samples along a ray
    double depth_fraction = 0.95;
    double hit_tolerance = 1e-5;
    std::vector<Aabb> occluders;
};

struct WorldParams {
    double max_substep = 0.002;  // m of travel of any robot point
    double beta_push = 0.7853981633974483;
    double yaw_gain = 0.5;  // object yaw per unit of normalized lever-arm torque
    double contact_tolerance = 0.003;  // m, tactile surface shell
    // Tactile pads span several heights: every body point is also sensed at
    // z offsets (k - (layers-1)/2) * tactile_layer_spacing.
    int tactile_layers = 1;
    double tactile_layer_spacing = 0.01;
    Aabb bounds{Vec3(0.0, -0.4, -1.0), Vec3(0.8, 0.4, 1.0)};  // allowed object centers
};

struct World {
    std::shared_ptr<const SignedDistance> shape;
    Pose true_pose;  // world -> object
    Config q;
    RobotModel robot;
    Camera camera;
    WorldParams params;

    /// World position of the object-frame origin.
    Vec3 object_center() const { return true_pose.inverse().translation(); }
    double true_sdf(const Vec3& x) const { return shape->sdf(true_pose.apply(x)); }
};

SemanticCloud camera_observe(const World& world);
SemanticCloud tactile_observe(const World& world, const Config& q);

struct StepOutcome {
    Pose object_motion;  // world frame, x_new = M x_old
    bool contact = false;
    Config q_before;
    Config q_after;
};

/// Quasi-static pushing: robot motion is split into substeps; penetrating
/// contact inside the push cone moves the object out of the way, other
/// contact truncates the robot motion.
StepOutcome world_step(World& world, const Action& u);

/// Surface points in the object frame: rejection sampling in a thin shell
/// followed by projection onto the zero level set.
std::vector<Vec3> sample_surface(const SignedDistance& shape, std::size_t count, Rng& rng,
                                 double shell = 0.001);

double nll(const ParticleSet& particles, const SignedDistance& shape, const Pose& true_pose,
           std::span<const Vec3> surface_samples, const SensorModel& sensor = {});

/// Mean |sdf| of every particle's surface samples seen through every other particle.
double pairwise_chamfer(const ParticleSet& particles, const SignedDistance& shape,
                        std::span<const Vec3> surface_samples);

struct SlideState {
    const ParticleSet* particles = nullptr;
    const SignedDistance* shape = nullptr;
    Config q;
    bool in_contact = false;
    Vec3 contact_point = Vec3::Zero();
    bool counterclockwise = true;
    double translation_scale = 0.08;
    double rotation_scale = 0.5;
};

/// Slides along the estimated surface when touching, otherwise heads for the
/// weighted mean object center.
Action slide_policy(const SlideState& state);

enum class Method { Rumi, InfoOnly, ReachOnly, Slide };
std::string to_string(Method m);
Method parse_method(const std::string& s);

enum class PriorKind { CenterYaw, Gaussian };

struct Scenario {
    std::string name = "mug";
    std::shared_ptr<const SignedDistance> shape;
    Pose true_pose;
    Config q0;
    RobotModel robot = RobotModel::gripper();
    Camera camera;
    WorldParams world;
    Workspace workspace{Vec3(0.0, -0.4, 0.0), Vec3(0.8, 0.4, 0.0), 0.01};
    ReachModel reach;
    BeliefParams belief;
    PlannerParams planner;
    SensorModel sensor;
    int n_steps = 40;
    double tau = 0.03;
    int surface_samples = 500;
    int prior_multiplier = 4;
    PriorKind prior = PriorKind::CenterYaw;
    double prior_sigma = 0.05;
    Vec3 prior_mean = Vec3::Zero();  // Gaussian priors only
    /// Feed the true object motion to the filter; otherwise estimate it from
    /// the end-effector motion during contact.
    bool observe_object_motion = true;
    double threshold_translation = 0.005;  // m
    double threshold_yaw = 0.0872664626;   // rad (5 deg)
};

/// World-to-object pose of an object whose frame origin sits at `center` with
/// its +x axis pointing along `heading` (rad).
Pose placed_pose(const Vec3& center, double heading);

/// Built-in desk-scale mug scene.
Scenario mug_scenario();

/// NLL of a single particle at the true pose perturbed by the threshold offsets.
double success_threshold(const Scenario& scenario, std::span<const Vec3> surface_samples);

struct StepMetrics {
    int step = 0;
    double nll = 0.0;
    double chamfer = 0.0;
    bool contact = false;
    Action u;
    Config q;  // end effector after the step
    std::size_t touched = 0;  // SURFACE points observed this step
    Vec3 object_center = Vec3::Zero();
    double object_yaw = 0.0;
    double object_reach = 0.0;
};

struct EpisodeResult {
    std::vector<StepMetrics> steps;
    double threshold = 0.0;
    bool success = false;
    bool pushed_out = false;
    bool converged = false;
    std::string failure;
};

struct EpisodeHooks {
    /// Called after every step with the current belief and fields (fields may be null).
    std::function<void(int step, const BeliefState&, const InfoFields*)> on_step;
};

EpisodeResult run_episode(const Scenario& scenario, Method method, std::uint64_t seed, int n_steps,
                          const EpisodeHooks& hooks = {});

struct Correlation {
    double r = 0.0;
    bool defined = false;  // false for fewer than two pairs or a constant series
    std::size_t n = 0;
};

Correlation pearson(std::span<const double> x, std::span<const double> y);

/// step,nll,chamfer,contact,touched,u0,u1,u2,q_x,q_y,q_yaw,obj_x,obj_y,obj_yaw,obj_reach
void write_metrics_csv(std::ostream& os, const EpisodeResult& result);

}  // namespace rummage
