#include "rummage/planner.hpp"

#include "rummage/parallel.hpp"
#include "rummage/semantics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace rummage {

double kernel_value(KernelType type, double a, double b, double scale)
{
    double r = (a - b) / scale;
    if (type == KernelType::Rbf)
        return std::exp(-0.5 * r * r);
    double x = std::abs(r);
    if (x < 1.0)
        return 2.0 / 3.0 - x * x + 0.5 * x * x * x;
    if (x < 2.0)
        return (2.0 - x) * (2.0 - x) * (2.0 - x) / 6.0;
    return 0.0;
}

Eigen::MatrixXd interpolation_matrix(int horizon, int control_points, KernelType type, double scale)
{
    if (horizon < 1 || control_points < 1 || control_points > horizon)
        throw std::invalid_argument("need 1 <= control points <= horizon");
    if (control_points == horizon)
        return Eigen::MatrixXd::Identity(horizon, horizon);
    std::vector<double> tc(static_cast<std::size_t>(control_points));
    for (int j = 0; j < control_points; ++j)
        tc[static_cast<std::size_t>(j)] =
            control_points == 1 ? 0.0 : j * static_cast<double>(horizon - 1) / (control_points - 1);
    Eigen::MatrixXd kcc(control_points, control_points), ktc(horizon, control_points);
    for (int i = 0; i < control_points; ++i)
        for (int j = 0; j < control_points; ++j)
            kcc(i, j) = kernel_value(type, tc[static_cast<std::size_t>(i)], tc[static_cast<std::size_t>(j)], scale);
    for (int i = 0; i < horizon; ++i)
        for (int j = 0; j < control_points; ++j)
            ktc(i, j) = kernel_value(type, i, tc[static_cast<std::size_t>(j)], scale);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kcc);
    if (!lu.isInvertible()) {
        kcc.diagonal().array() += 1e-9;
        lu.compute(kcc);
        if (!lu.isInvertible())
            throw std::runtime_error("singular kernel Gram matrix");
    }
    return ktc * lu.inverse();
}

ActionSequence kernel_interpolate(const Eigen::MatrixXd& theta, int horizon, KernelType type, double scale)
{
    return interpolation_matrix(horizon, static_cast<int>(theta.rows()), type, scale) * theta;
}

RobotModel RobotModel::gripper()
{
    RobotModel m;
    for (int j = -4; j <= 4; ++j)
        m.body_points.emplace_back(0.0, 0.005 * j, 0.0);
    m.n_info = m.body_points.size();
    for (int i = 1; i <= 5; ++i)
        for (int j = -2; j <= 2; ++j)
            m.body_points.emplace_back(-0.01 * i, 0.01 * j, 0.0);
    return m;
}

Vec3 RobotModel::point(const Config& q, std::size_t i) const
{
    double c = std::cos(q.yaw), s = std::sin(q.yaw);
    const Vec3& b = body_points[i];
    return q.position + Vec3(c * b.x() - s * b.y(), s * b.x() + c * b.y(), b.z());
}

std::vector<Vec3> RobotModel::interior(const Config& q) const
{
    std::vector<Vec3> out(body_points.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = point(q, i);
    return out;
}

std::vector<Vec3> RobotModel::info_points(const Config& q) const
{
    std::vector<Vec3> out(n_info);
    for (std::size_t i = 0; i < n_info; ++i)
        out[i] = point(q, i);
    return out;
}

Config RobotModel::clamp_to_reach(Config q) const
{
    if (!reach_limit)
        return q;
    Vec3 r = q.position - reach_limit->base;
    r.z() = 0.0;
    double n = r.norm();
    double hi = reach_limit->support_radius(), lo = reach_limit->inner_support_radius();
    if (n > hi)
        q.position -= r * (1.0 - hi / n);
    else if (n < lo && n > 0.0)
        q.position += r * (lo / n - 1.0);
    return q;
}

Config RobotModel::free_dynamics(const Config& q, const Action& u, double fraction) const
{
    Config out = q;
    if (action_dim == 3) {
        out.position.x() += translation_scale * fraction * u[0];
        out.position.y() += translation_scale * fraction * u[1];
        out.yaw += rotation_scale * fraction * u[2];
    } else {
        out.position += translation_scale * fraction * Vec3(u[0], u[1], u[2]);
        out.yaw += rotation_scale * fraction * u[3];
    }
    return clamp_to_reach(out);
}

RolloutState dynamics_step(const RolloutState& state, const Action& u, const DynamicsContext& ctx, SplitMix64& rng,
                           std::vector<RolloutState>* trace)
{
    const RobotModel& robot = *ctx.robot;
    const InfoFields& fields = *ctx.fields;
    const ParticleSet& particles = *ctx.particles;
    double cos_beta = std::cos(ctx.beta_push);
    RolloutState s = state;
    double fraction = 1.0 / std::max(1, ctx.mini_steps);
    for (int m = 0; m < ctx.mini_steps; ++m) {
        Config qc = robot.free_dynamics(s.q, u, fraction);
        std::size_t best = 0;
        double best_free = std::numeric_limits<double>::infinity();
        Vec3 x_best = Vec3::Zero();
        for (std::size_t i = 0; i < robot.body_points.size(); ++i) {
            Vec3 x = robot.point(qc, i) - s.d;
            double pf = fields.p_free.query(x);
            if (pf < best_free) {
                best_free = pf;
                best = i;
                x_best = x;
            }
        }
        // Sample the semantics of the most likely contact point.
        double r = rng.uniform();
        bool free = r < best_free;
        if (free) {
            s.q = qc;
        } else {
            Vec3 push = robot.point(qc, best) - robot.point(s.q, best);
            Vec3 n = Vec3::Zero();
            for (std::size_t j = 0; j < particles.size(); ++j) {
                const Pose& T = particles.poses[j];
                n += particles.weights[j] * T.rotation().transpose() * ctx.shape->gradient(T.apply(x_best));
            }
            double pn = push.norm(), nn = n.norm();
            if (pn == 0.0) {
                s.q = qc;
            } else if (nn > 0.0 && n.dot(-push) > cos_beta * nn * pn) {
                s.q = qc;
                s.d += push;
            }
        }
        if (trace)
            trace->push_back(s);
    }
    return s;
}

double info_cost(std::span<const RolloutState> trajectory, const ScalarField& info, const RobotModel& robot,
                 double downsample_resolution)
{
    std::vector<Vec3> pts;
    pts.reserve(trajectory.size() * robot.n_info);
    for (const auto& s : trajectory)
        for (std::size_t i = 0; i < robot.n_info; ++i)
            pts.push_back(robot.point(s.q, i) - s.d);
    double c = 0.0;
    for (const auto& x : voxel_downsample(std::span<const Vec3>(pts), downsample_resolution))
        c -= info.query(x);
    return c;
}

double reach_cost(std::span<const Vec3> displacements, const Workspace& workspace, const ScalarField& info,
                  const ScalarField& reach)
{
    auto nodes = workspace.enumerate();
    double total = 0.0;
    for (const auto& x : nodes)
        total += info.query(x);
    if (!(total > 0.0) || displacements.empty())
        return 0.0;
    double reachable = 0.0;
    double h = static_cast<double>(displacements.size());
    for (const auto& x : nodes) {
        double avg = 0.0;
        for (const auto& d : displacements)
            avg += info.query(x - d);
        reachable += avg / h * reach.query(x);
    }
    return -reachable / total;
}

ReachCostEvaluator::ReachCostEvaluator(const ScalarField& info, const ScalarField& reach)
    : info_(&info), reach_(&reach)
{
    if (info.dims() != reach.dims() || (info.origin() - reach.origin()).norm() > 1e-12 ||
        info.resolution() != reach.resolution())
        throw std::invalid_argument("info and reach fields must share a grid");
    if (!info.planar())
        throw std::invalid_argument("fast reach cost needs planar fields");
    for (double v : info.values())
        total_info_ += v;
}

// For a shift of (a + fx, b + fy) cells, the query at node n lands between
// nodes m - 1 and m per axis (m = n - a). Terms are indexed by axis variant:
// 0 = exact node (range m >= 0), 1 = upper corner, 2 = lower corner (both m >= 1).
const ReachCostEvaluator::Terms& ReachCostEvaluator::terms(int a, int b) const
{
    std::lock_guard lock(mutex_);
    auto it = cache_.find({a, b});
    if (it != cache_.end())
        return it->second;
    Terms t{};
    int nx = info_->dims()[0], ny = info_->dims()[1];
    const auto& I = info_->values();
    const auto& R = reach_->values();
    auto at = [&](const std::vector<double>& v, int i, int j) { return v[static_cast<std::size_t>(i) * ny + j]; };
    for (int mx = std::max(0, -a); mx < nx && mx + a < nx; ++mx) {
        for (int my = std::max(0, -b); my < ny && my + b < ny; ++my) {
            double r = at(R, mx + a, my + b);
            if (r == 0.0)
                continue;
            for (int vx = 0; vx < 3; ++vx) {
                for (int vy = 0; vy < 3; ++vy) {
                    int cx = vx == 2 ? 1 : 0, cy = vy == 2 ? 1 : 0;
                    bool okx = vx == 0 || mx >= 1, oky = vy == 0 || my >= 1;
                    if (!okx || !oky)
                        continue;
                    t[static_cast<std::size_t>(vx * 3 + vy)] += r * at(I, mx - cx, my - cy);
                }
            }
        }
    }
    return cache_.emplace(std::pair{a, b}, t).first->second;
}

double ReachCostEvaluator::shifted_sum(const Vec3& d) const
{
    double res = info_->resolution();
    auto split = [](double s, int& a, double& f) {
        a = static_cast<int>(std::floor(s));
        f = s - a;
        if (f < 1e-9) {
            f = 0.0;
        } else if (f > 1.0 - 1e-9) {
            a += 1;
            f = 0.0;
        }
    };
    int a, b;
    double fx, fy;
    split(d.x() / res, a, fx);
    split(d.y() / res, b, fy);
    const Terms& t = terms(a, b);
    // Axis variants with weights: exact node, or upper (1 - f) and lower (f) corners.
    double wx[3] = {0, 0, 0}, wy[3] = {0, 0, 0};
    if (fx == 0.0)
        wx[0] = 1.0;
    else
        wx[1] = 1.0 - fx, wx[2] = fx;
    if (fy == 0.0)
        wy[0] = 1.0;
    else
        wy[1] = 1.0 - fy, wy[2] = fy;
    double s = 0.0;
    for (int vx = 0; vx < 3; ++vx)
        for (int vy = 0; vy < 3; ++vy)
            if (wx[vx] != 0.0 && wy[vy] != 0.0)
                s += wx[vx] * wy[vy] * t[static_cast<std::size_t>(vx * 3 + vy)];
    return s;
}

double ReachCostEvaluator::operator()(std::span<const Vec3> displacements) const
{
    if (!(total_info_ > 0.0) || displacements.empty())
        return 0.0;
    double reachable = 0.0;
    for (const auto& d : displacements)
        reachable += shifted_sum(d);
    return -reachable / static_cast<double>(displacements.size()) / total_info_;
}

double total_cost(double info_cost_value, double reach_cost_value, const PlannerParams& params)
{
    return params.c_info * info_cost_value + params.c_reach * reach_cost_value;
}

KmppiResult kmppi(const Eigen::MatrixXd& nominal_theta, const PlannerParams& params, const RolloutCost& cost,
                  std::uint64_t seed, int iterations)
{
    Eigen::MatrixXd W = interpolation_matrix(params.horizon, params.control_points, params.kernel,
                                             params.kernel_scale);
    const auto rows = nominal_theta.rows(), cols = nominal_theta.cols();
    const std::size_t k = static_cast<std::size_t>(params.samples);
    double sd = std::sqrt(params.noise_variance);
    KmppiResult out;
    out.theta = nominal_theta;
    for (int it = 0; it < std::max(1, iterations); ++it) {
        std::vector<Eigen::MatrixXd> thetas(k);
        std::vector<double> costs(k);
        parallel_for(k, [&](std::size_t s) {
            SplitMix64 rng(seed, static_cast<std::uint64_t>(it), s);
            std::normal_distribution<double> n01(0.0, 1.0);
            Eigen::MatrixXd th(rows, cols);
            for (Eigen::Index i = 0; i < rows; ++i)
                for (Eigen::Index j = 0; j < cols; ++j)
                    th(i, j) = std::clamp(out.theta(i, j) + sd * n01(rng), -1.0, 1.0);
            ActionSequence u = (W * th).cwiseMax(-1.0).cwiseMin(1.0);
            costs[s] = cost(u, rng);
            thetas[s] = std::move(th);
        });
        double lo = *std::min_element(costs.begin(), costs.end());
        std::vector<double> w(k);
        double wsum = 0.0;
        for (std::size_t s = 0; s < k; ++s) {
            w[s] = std::exp(-(costs[s] - lo) / params.lambda);
            wsum += w[s];
        }
        Eigen::MatrixXd combined = Eigen::MatrixXd::Zero(rows, cols);
        for (std::size_t s = 0; s < k; ++s)
            combined += (w[s] / wsum) * thetas[s];
        out.theta = combined;
        out.sample_costs.push_back(std::move(costs));
    }
    out.actions = (W * out.theta).cwiseMax(-1.0).cwiseMin(1.0);
    return out;
}

Eigen::MatrixXd shift_nominal(const Eigen::MatrixXd& theta, const PlannerParams& params)
{
    Eigen::MatrixXd W = interpolation_matrix(params.horizon, params.control_points, params.kernel,
                                             params.kernel_scale);
    Eigen::MatrixXd u = W * theta;
    Eigen::MatrixXd shifted = Eigen::MatrixXd::Zero(u.rows(), u.cols());
    if (u.rows() > 1)
        shifted.topRows(u.rows() - 1) = u.bottomRows(u.rows() - 1);
    return W.completeOrthogonalDecomposition().solve(shifted);
}

double rollout_cost(const Config& q0, const ActionSequence& actions, const PlanProblem& problem,
                    const PlannerParams& params, SplitMix64& rng)
{
    DynamicsContext ctx{problem.particles, problem.shape, problem.fields, problem.robot, params.beta_push,
                        params.mini_steps};
    std::vector<RolloutState> trace;
    std::vector<Vec3> displacements;
    double sum = 0.0;
    int n = std::max(1, params.rollouts);
    for (int r = 0; r < n; ++r) {
        trace.clear();
        displacements.clear();
        RolloutState s{q0, Vec3::Zero()};
        for (Eigen::Index t = 0; t < actions.rows(); ++t) {
            s = dynamics_step(s, actions.row(t).transpose(), ctx, rng, &trace);
            displacements.push_back(s.d);
        }
        double ci = params.c_info != 0.0
                        ? info_cost(trace, problem.fields->info, *problem.robot, params.downsample_resolution)
                        : 0.0;
        double cr = 0.0;
        if (params.c_reach != 0.0) {
            if (problem.reach_evaluator)
                cr = (*problem.reach_evaluator)(displacements);
            else
                throw std::invalid_argument("reach cost needs an evaluator");
        }
        sum += total_cost(ci, cr, params);
    }
    return sum / n;
}

PlanResult plan(const Config& q0, const PlanProblem& problem, const Eigen::MatrixXd& nominal_theta,
                const PlannerParams& params, Rng& rng, int iterations)
{
    std::uint64_t seed = rng();
    auto cost = [&](const ActionSequence& u, SplitMix64& r) { return rollout_cost(q0, u, problem, params, r); };
    KmppiResult k = kmppi(nominal_theta, params, cost, seed, iterations);
    PlanResult out;
    out.u = k.actions.row(0).transpose();
    out.actions = k.actions;
    out.nominal_theta = shift_nominal(k.theta, params);
    out.sample_costs = std::move(k.sample_costs);
    return out;
}

void write_plan_trace(std::ostream& os, const PlanResult& result)
{
    os << "iteration,sample,cost\n" << std::setprecision(17);
    for (std::size_t i = 0; i < result.sample_costs.size(); ++i)
        for (std::size_t s = 0; s < result.sample_costs[i].size(); ++s)
            os << i << ',' << s << ',' << result.sample_costs[i][s] << '\n';
    os << "action";
    for (Eigen::Index j = 0; j < result.u.size(); ++j)
        os << ',' << result.u[j];
    os << '\n';
}

}  // namespace rummage
