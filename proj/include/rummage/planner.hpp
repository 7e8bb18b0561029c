#pragma once

#include "rummage/belief.hpp"
#include "rummage/geometry.hpp"
#include "rummage/infogain.hpp"
#include "rummage/random.hpp"

#include <Eigen/Core>

#include <functional>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

namespace rummage {

/// Actions are rows of [-1, 1] values: (dx, dy, dyaw) planar or (dx, dy, dz, dyaw).
using Action = Eigen::VectorXd;
using ActionSequence = Eigen::MatrixXd;  // H x action_dim

enum class KernelType { Rbf, BSpline };

double kernel_value(KernelType type, double a, double b, double scale);

/// H x H_c matrix mapping control points to the full horizon. Control times
/// are spread evenly over [0, H-1].
Eigen::MatrixXd interpolation_matrix(int horizon, int control_points, KernelType type = KernelType::Rbf,
                                     double scale = 2.0);

/// theta is H_c x action_dim.
ActionSequence kernel_interpolate(const Eigen::MatrixXd& theta, int horizon, KernelType type = KernelType::Rbf,
                                  double scale = 2.0);

/// End-effector configuration: position and yaw about z.
struct Config {
    Vec3 position = Vec3::Zero();
    double yaw = 0.0;
};

/// Rigid end effector described by body-frame points. The first n_info points
/// are the contact-sensing subset.
struct RobotModel {
    std::vector<Vec3> body_points;
    std::size_t n_info = 0;
    int action_dim = 3;
    double translation_scale = 0.08;  // m per unit action
    double rotation_scale = 0.5;      // rad per unit action
    /// When set, free-space motion keeps the end effector inside this ring
    /// around the base (radial clamp).
    std::optional<ReachModel> reach_limit;

    /// Gripper with a sensing front row and a solid body behind it, facing +x.
    static RobotModel gripper();

    std::vector<Vec3> interior(const Config& q) const;
    std::vector<Vec3> info_points(const Config& q) const;
    Vec3 point(const Config& q, std::size_t i) const;
    /// Free-space dynamics for `fraction` of action u.
    Config free_dynamics(const Config& q, const Action& u, double fraction = 1.0) const;
    Config clamp_to_reach(Config q) const;
};

struct PlannerParams {
    int horizon = 15;
    int control_points = 8;
    KernelType kernel = KernelType::Rbf;
    double kernel_scale = 2.0;
    int samples = 500;
    int rollouts = 5;
    int mini_steps = 4;
    int replan_interval = 3;
    double lambda = 0.01;
    double noise_variance = 1.5;
    double beta_push = 0.7853981633974483;  // 45 deg
    double c_info = 1.0;
    double c_reach = 200.0;
    int warm_start_iterations = 5;
    double downsample_resolution = 0.01;  // m
};

/// Rolled-out state: configuration and predicted object displacement.
struct RolloutState {
    Config q;
    Vec3 d = Vec3::Zero();
};

struct DynamicsContext {
    const ParticleSet* particles = nullptr;
    const SignedDistance* shape = nullptr;
    const InfoFields* fields = nullptr;
    const RobotModel* robot = nullptr;
    double beta_push = 0.7853981633974483;
    int mini_steps = 4;
};

/// One action of the approximate contact dynamics, split into mini-steps.
/// Configurations after every mini-step are appended to `trace` when given.
RolloutState dynamics_step(const RolloutState& state, const Action& u, const DynamicsContext& ctx, SplitMix64& rng,
                           std::vector<RolloutState>* trace = nullptr);

/// Negative info summed over the downsampled union of sensing points expressed
/// in the displaced object frame.
double info_cost(std::span<const RolloutState> trajectory, const ScalarField& info, const RobotModel& robot,
                 double downsample_resolution);

/// Reachable share of the horizon-averaged displaced info, in [-1, 0].
double reach_cost(std::span<const Vec3> displacements, const Workspace& workspace, const ScalarField& info,
                  const ScalarField& reach);

/// Same quantity as reach_cost for planar fields, computed from cached
/// per-shift correlations of the info and reach grids.
class ReachCostEvaluator {
public:
    ReachCostEvaluator(const ScalarField& info, const ScalarField& reach);
    double operator()(std::span<const Vec3> displacements) const;
    double total_info() const { return total_info_; }

private:
    using Terms = std::array<double, 9>;
    const Terms& terms(int a, int b) const;
    double shifted_sum(const Vec3& d) const;

    const ScalarField* info_;
    const ScalarField* reach_;
    double total_info_ = 0.0;
    mutable std::mutex mutex_;
    mutable std::map<std::pair<int, int>, Terms> cache_;
};

double total_cost(double info_cost_value, double reach_cost_value, const PlannerParams& params);

/// Generic kernel-interpolated MPPI iteration loop over control points.
struct KmppiResult {
    Eigen::MatrixXd theta;    // combined control points, H_c x dim
    ActionSequence actions;   // interpolated and clamped, H x dim
    std::vector<std::vector<double>> sample_costs;  // per iteration
};

using RolloutCost = std::function<double(const ActionSequence&, SplitMix64&)>;

KmppiResult kmppi(const Eigen::MatrixXd& nominal_theta, const PlannerParams& params, const RolloutCost& cost,
                  std::uint64_t seed, int iterations);

/// Control points whose interpolation best matches [u_2..H, 0].
Eigen::MatrixXd shift_nominal(const Eigen::MatrixXd& theta, const PlannerParams& params);

struct PlanProblem {
    const ParticleSet* particles = nullptr;
    const SignedDistance* shape = nullptr;
    const InfoFields* fields = nullptr;
    const ScalarField* reach = nullptr;
    const RobotModel* robot = nullptr;
    const ReachCostEvaluator* reach_evaluator = nullptr;
};

struct PlanResult {
    Action u;
    Eigen::MatrixXd nominal_theta;  // shifted for the next call
    ActionSequence actions;
    std::vector<std::vector<double>> sample_costs;
};

/// Mean total cost of `rollouts` stochastic rollouts of an action sequence.
double rollout_cost(const Config& q0, const ActionSequence& actions, const PlanProblem& problem,
                    const PlannerParams& params, SplitMix64& rng);

PlanResult plan(const Config& q0, const PlanProblem& problem, const Eigen::MatrixXd& nominal_theta,
                const PlannerParams& params, Rng& rng, int iterations = 1);

/// iteration,sample,cost rows followed by the chosen action.
void write_plan_trace(std::ostream& os, const PlanResult& result);

}  // namespace rummage
