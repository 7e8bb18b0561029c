#include "rummage/sim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace rummage {

namespace {

double box_sdf(const Aabb& box, const Vec3& p)
{
    Vec3 q = (p - box.center()).cwiseAbs() - 0.5 * box.extent();
    return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

void add_free_along(SemanticCloud& cloud, const Vec3& origin, const Vec3& dir, double length, double spacing)
{
    for (int k = 1; k * spacing <= length; ++k)
        cloud.add(origin + (k * spacing) * dir, Semantics::Free);
}

double wrap_angle(double a)
{
    a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
    if (a < 0.0)
        a += 2.0 * std::numbers::pi;
    return a - std::numbers::pi;
}

}  // namespace

namespace {

double layer_offset(int k, int layers, double spacing)
{
    return (k - 0.5 * (layers - 1)) * spacing;
}

}  // namespace

SemanticCloud camera_observe(const World& world)
{
    const Camera& cam = world.camera;
    SemanticCloud cloud;
    auto spread = [](int i, int n, double angle) { return n == 1 ? 0.0 : angle * (static_cast<double>(i) / (n - 1) - 0.5); };
    for (int row = 0; row < cam.rows; ++row) {
        double e = cam.pitch + spread(row, cam.rows, cam.vfov);
        for (int r = 0; r < cam.rays; ++r) {
            double a = cam.heading + spread(r, cam.rays, cam.fov);
            Vec3 dir(std::cos(e) * std::cos(a), std::cos(e) * std::sin(a), std::sin(e));
            double t = 0.0;
            bool hit = false, hit_object = false;
            for (int it = 0; it < 2000 && t < cam.range; ++it) {
                Vec3 x = cam.origin + t * dir;
                double v_obj = world.true_sdf(x);
                double v = v_obj;
                for (const auto& box : cam.occluders)
                    v = std::min(v, box_sdf(box, x));
                if (v < cam.hit_tolerance) {
                    hit = true;
                    hit_object = v_obj <= v;
                    break;
                }
                t += std::max(v, 1e-5);
            }
            if (!hit) {
                add_free_along(cloud, cam.origin, dir, cam.range, cam.free_spacing);
                continue;
            }
            add_free_along(cloud, cam.origin, dir, cam.depth_fraction * t, cam.free_spacing);
            if (hit_object)
                cloud.add(cam.origin + t * dir, Semantics::Surface);
        }
    }
    return cloud;
}

SemanticCloud tactile_observe(const World& world, const Config& q)
{
    SemanticCloud cloud;
    double tol = world.params.contact_tolerance;
    int layers = std::max(1, world.params.tactile_layers);
    for (int layer = 0; layer < layers; ++layer) {
        Vec3 dz(0.0, 0.0, layer_offset(layer, layers, world.params.tactile_layer_spacing));
        for (std::size_t i = 0; i < world.robot.body_points.size(); ++i) {
            Vec3 x = world.robot.point(q, i) + dz;
            double v = world.true_sdf(x);
            if (i < world.robot.n_info && std::abs(v) < tol)
                cloud.add(x, Semantics::Surface);
            else if (v > tol)
                cloud.add(x, Semantics::Free);
        }
    }
    return cloud;
}

namespace {

// Object motion for a push of length s along unit direction m; the object
// also turns about its center in proportion to the normalized torque.
Pose push_motion(const Vec3& center, const Vec3& m, double s, double yaw_rate)
{
    Pose rot = Pose::from_yaw(yaw_rate * s);
    Vec3 t = center + s * m - rot.rotation() * center;
    return {rot.rotation(), t};
}

double min_robot_sdf(const SignedDistance& shape, const Pose& pose, const RobotModel& robot, const Config& q,
                     std::size_t* argmin = nullptr)
{
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < robot.body_points.size(); ++i) {
        double v = shape.sdf(pose.apply(robot.point(q, i)));
        if (v < lo) {
            lo = v;
            if (argmin)
                *argmin = i;
        }
    }
    return lo;
}

Config lerp(const Config& a, const Config& b, double f)
{
    return {a.position + f * (b.position - a.position), a.yaw + f * (b.yaw - a.yaw)};
}

double xy_radius(const SignedDistance& shape)
{
    Aabb b = shape.bounds();
    Vec3 lo = b.min.cwiseAbs(), hi = b.max.cwiseAbs();
    double rx = std::max(lo.x(), hi.x()), ry = std::max(lo.y(), hi.y());
    return std::hypot(rx, ry);
}

}  // namespace

StepOutcome world_step(World& world, const Action& u)
{
    StepOutcome out;
    out.q_before = world.q;
    const RobotModel& robot = world.robot;
    const WorldParams& wp = world.params;

    double reach_r = 0.0;
    for (const auto& b : robot.body_points)
        reach_r = std::max(reach_r, std::hypot(b.x(), b.y()));
    double travel = robot.translation_scale * std::hypot(u[0], u[1]);
    if (robot.action_dim == 4)
        travel = robot.translation_scale * std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
    double turn = robot.rotation_scale * std::abs(u[robot.action_dim - 1]) * reach_r;
    int n = std::max(1, static_cast<int>(std::ceil(std::max(travel, turn) / wp.max_substep)));

    double rho = xy_radius(*world.shape);
    double cos_beta = std::cos(wp.beta_push);
    for (int k = 0; k < n; ++k) {
        Config qc = robot.free_dynamics(world.q, u, 1.0 / n);
        std::size_t idx = 0;
        if (min_robot_sdf(*world.shape, world.true_pose, robot, qc, &idx) >= 0.0) {
            world.q = qc;
            continue;
        }
        out.contact = true;
        Vec3 p_new = robot.point(qc, idx);
        Vec3 m = p_new - robot.point(world.q, idx);
        Vec3 normal = world.true_pose.rotation().transpose() *
                      world.shape->gradient(world.true_pose.apply(p_new));
        double mn = m.norm();
        bool pushed = false;
        if (mn > 0.0 && normal.dot(-m) > cos_beta * normal.norm() * mn) {
            Vec3 dir = m / mn;
            dir.z() = 0.0;
            Vec3 c = world.object_center();
            Vec3 lever = p_new - c;
            double yaw_rate = wp.yaw_gain * (lever.x() * dir.y() - lever.y() * dir.x()) / (rho * rho);
            auto clear = [&](double s) {
                Pose motion = push_motion(c, dir, s, yaw_rate);
                Pose moved = world.true_pose * motion.inverse();
                Vec3 center = motion.apply(c);
                if (!world.params.bounds.contains(center))
                    return false;
                return min_robot_sdf(*world.shape, moved, robot, qc) >= 0.0;
            };
            double hi = 2.0 * mn + 0.005;
            if (clear(hi)) {
                double lo = 0.0;
                for (int it = 0; it < 40; ++it) {
                    double mid = 0.5 * (lo + hi);
                    (clear(mid) ? hi : lo) = mid;
                }
                Pose motion = push_motion(c, dir, hi, yaw_rate);
                world.true_pose = world.true_pose * motion.inverse();
                out.object_motion = motion * out.object_motion;
                world.q = qc;
                pushed = true;
            }
        }
        if (!pushed) {
            // Truncate the robot at first contact and drop the rest of the action.
            double lo = 0.0, hi = 1.0;
            for (int it = 0; it < 40; ++it) {
                double mid = 0.5 * (lo + hi);
                (min_robot_sdf(*world.shape, world.true_pose, robot, lerp(world.q, qc, mid)) >= 0.0 ? lo : hi) = mid;
            }
            world.q = lerp(world.q, qc, lo);
            break;
        }
    }
    out.q_after = world.q;
    return out;
}

std::vector<Vec3> sample_surface(const SignedDistance& shape, std::size_t count, Rng& rng, double shell)
{
    Aabb box = shape.bounds().inflated(shell);
    std::uniform_real_distribution<double> ux(box.min.x(), box.max.x()), uy(box.min.y(), box.max.y()),
        uz(box.min.z(), box.max.z());
    std::vector<Vec3> out;
    out.reserve(count);
    std::size_t attempts = 0;
    while (out.size() < count) {
        if (++attempts > 1000000000ULL)
            throw std::runtime_error("surface sampling failed");
        Vec3 x(ux(rng), uy(rng), uz(rng));
        if (std::abs(shape.sdf(x)) >= shell)
            continue;
        for (int it = 0; it < 8; ++it) {
            double v = shape.sdf(x);
            if (std::abs(v) < 1e-12)
                break;
            x -= v * shape.gradient(x);
        }
        if (std::abs(shape.sdf(x)) < 1e-9)
            out.push_back(x);
    }
    return out;
}

double nll(const ParticleSet& particles, const SignedDistance& shape, const Pose& true_pose,
           std::span<const Vec3> surface_samples, const SensorModel& sensor)
{
    Pose to_world = true_pose.inverse();
    double total = 0.0;
    for (const auto& p : surface_samples) {
        Vec3 x = to_world.apply(p);
        double ps = 0.0;
        for (std::size_t i = 0; i < particles.size(); ++i)
            ps += particles.weights[i] * sensor.probabilities(shape.sdf(particles.poses[i].apply(x))).surface;
        total -= std::log(std::max(ps, 1e-12));
    }
    return total;
}

double pairwise_chamfer(const ParticleSet& particles, const SignedDistance& shape,
                        std::span<const Vec3> surface_samples)
{
    std::size_t n = particles.size();
    if (n == 0 || surface_samples.empty())
        return 0.0;
    // Surface point p of particle j sits at T_j^-1 p in the world.
    std::vector<std::vector<Vec3>> world(n);
    for (std::size_t j = 0; j < n; ++j) {
        Pose inv = particles.poses[j].inverse();
        world[j].reserve(surface_samples.size());
        for (const auto& p : surface_samples)
            world[j].push_back(inv.apply(p));
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (const auto& x : world[j])
                total += std::abs(shape.sdf(particles.poses[i].apply(x)));
    return total / (static_cast<double>(n) * static_cast<double>(n) * static_cast<double>(surface_samples.size()));
}

Correlation pearson(std::span<const double> x, std::span<const double> y)
{
    Correlation c;
    c.n = std::min(x.size(), y.size());
    if (c.n < 2)
        return c;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < c.n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(c.n);
    my /= static_cast<double>(c.n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < c.n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0)
        return c;
    c.r = sxy / std::sqrt(sxx * syy);
    c.defined = true;
    return c;
}

Action slide_policy(const SlideState& state)
{
    Action u = Action::Zero(3);
    const ParticleSet& particles = *state.particles;
    if (state.in_contact) {
        Vec3 n = Vec3::Zero();
        for (std::size_t j = 0; j < particles.size(); ++j) {
            const Pose& T = particles.poses[j];
            n += particles.weights[j] * T.rotation().transpose() * state.shape->gradient(T.apply(state.contact_point));
        }
        n.z() = 0.0;
        if (n.norm() == 0.0)
            return u;
        n.normalize();
        Vec3 t = Vec3::UnitZ().cross(n);
        if (!state.counterclockwise)
            t = -t;
        u[0] = t.x();
        u[1] = t.y();
        double face = std::atan2(-n.y(), -n.x());
        u[2] = std::clamp(wrap_angle(face - state.q.yaw) / state.rotation_scale, -1.0, 1.0);
        return u;
    }
    Vec3 c = Vec3::Zero();
    for (std::size_t j = 0; j < particles.size(); ++j)
        c += particles.weights[j] * particles.poses[j].inverse().translation();
    Vec3 d = c - state.q.position;
    d.z() = 0.0;
    if (d.norm() == 0.0)
        return u;
    Vec3 v = d / state.translation_scale;
    double m = v.cwiseAbs().maxCoeff();
    if (m > 1.0)
        v /= m;
    u[0] = v.x();
    u[1] = v.y();
    u[2] = std::clamp(wrap_angle(std::atan2(d.y(), d.x()) - state.q.yaw) / state.rotation_scale, -1.0, 1.0);
    return u;
}

std::string to_string(Method m)
{
    switch (m) {
    case Method::Rumi: return "rumi";
    case Method::InfoOnly: return "info-only";
    case Method::ReachOnly: return "reach-only";
    case Method::Slide: return "slide";
    }
    return "rumi";
}

Method parse_method(const std::string& s)
{
    if (s == "rumi")
        return Method::Rumi;
    if (s == "info-only")
        return Method::InfoOnly;
    if (s == "reach-only")
        return Method::ReachOnly;
    if (s == "slide")
        return Method::Slide;
    throw std::invalid_argument("unknown method: " + s);
}

Pose placed_pose(const Vec3& center, double heading) { return Pose::from_yaw(heading, center).inverse(); }

Scenario mug_scenario()
{
    Scenario s;
    s.shape = std::make_shared<Shape>(Shape::mug());
    s.true_pose = placed_pose(Vec3(0.56, 0.0, 0.0), 0.7);
    s.q0 = Config{Vec3(0.3, 0.0, 0.0), 0.0};
    // The mug starts inside the fully reachable band rather than on its edge;
    // on the edge the planner keeps trying to push it towards the base and stalls.
    s.reach = ReachModel{};
    s.reach.r_mid = 0.5;
    s.robot.reach_limit = s.reach;
    // Steps of a little more than the mug radius; 8 cm per unit action skips
    // past the handle too often.
    s.robot.translation_scale = 0.06;
    // Elevated camera looking down at the mug: it sees the front wall, the rim
    // and the inside of the back wall, but not the handle behind the mug.
    s.camera.origin = Vec3(0.3, 0.0, 0.12);
    s.camera.heading = 0.0;
    s.camera.pitch = -0.43;
    s.camera.fov = 0.5;
    s.camera.vfov = 0.35;
    s.camera.rays = 61;
    s.camera.rows = 41;
    s.camera.occluders.push_back(Aabb{Vec3(-1.0, -1.0, -0.2), Vec3(2.0, 1.0, -0.04)});  // table
    s.world.tactile_layers = 21;
    s.world.tactile_layer_spacing = 0.002;
    // Descent recovers a perturbed pose only within half the 8 mm wall
    // thickness, so process noise is scaled down with the object.
    s.belief.sigma_t = 0.002;
    // Until the handle is touched every yaw explains the data equally well;
    // a little yaw noise keeps resampling from thinning out the yaw hypotheses.
    s.belief.sigma_r = 0.05;
    // The mug is rotationally symmetric apart from its handle, so a belief
    // spread over every yaw already has a small pairwise Chamfer value.
    s.tau = 0.002;
    return s;
}

double success_threshold(const Scenario& scenario, std::span<const Vec3> surface_samples)
{
    Pose offset = Pose::from_yaw(scenario.threshold_yaw, Vec3(scenario.threshold_translation, 0.0, 0.0));
    ParticleSet single(std::vector<Pose>{offset * scenario.true_pose});
    return nll(single, *scenario.shape, scenario.true_pose, surface_samples, scenario.sensor);
}

namespace {

std::vector<Pose> make_priors(const Scenario& sc, const SemanticCloud& cloud, Rng& rng)
{
    std::size_t count = static_cast<std::size_t>(sc.belief.n_particles * std::max(1, sc.prior_multiplier));
    std::uniform_real_distribution<double> yaw(-std::numbers::pi, std::numbers::pi);
    std::normal_distribution<double> n01(0.0, 1.0);
    Vec3 center = sc.prior_mean;
    bool gaussian = sc.prior == PriorKind::Gaussian;
    if (!gaussian) {
        auto surf = cloud.positions(Semantics::Surface);
        if (surf.empty()) {
            gaussian = true;
        } else {
            center = Vec3::Zero();
            for (const auto& p : surf)
                center += p;
            center /= static_cast<double>(surf.size());
            // The object rests on the table; only its planar position is unknown.
            center.z() = sc.prior_mean.z();
            center = estimate_planar_center(cloud, *sc.shape, center, sc.belief.discrepancy);
        }
    }
    std::vector<Pose> priors;
    priors.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Vec3 c = center;
        if (gaussian)
            c += sc.prior_sigma * Vec3(n01(rng), n01(rng), 0.0);
        priors.push_back(placed_pose(c, yaw(rng)));
    }
    return priors;
}

Vec3 centroid(const std::vector<Vec3>& pts)
{
    Vec3 c = Vec3::Zero();
    for (const auto& p : pts)
        c += p;
    return pts.empty() ? c : Vec3(c / static_cast<double>(pts.size()));
}

}  // namespace

EpisodeResult run_episode(const Scenario& sc, Method method, std::uint64_t seed, int n_steps,
                          const EpisodeHooks& hooks)
{
    if (!sc.shape)
        throw std::invalid_argument("scenario has no shape");
    EpisodeResult result;
    Rng rng(seed);
    const SignedDistance& shape = *sc.shape;

    Rng sample_rng(seed ^ 0x5eedULL);
    auto samples = sample_surface(shape, static_cast<std::size_t>(sc.surface_samples), sample_rng);
    result.threshold = success_threshold(sc, samples);
    double chamfer_limit = sc.tau * shape.characteristic_length();

    World world{sc.shape, sc.true_pose, sc.q0, sc.robot, sc.camera, sc.world};
    world.params.beta_push = sc.planner.beta_push;

    SemanticCloud first = camera_observe(world);
    first.append(tactile_observe(world, world.q));
    BeliefState state;
    state.cloud = merge_observations({}, first, {}, shape, Pose{}, sc.belief.merge);
    state.particles = initialize_particles(make_priors(sc, state.cloud, rng), state.cloud, shape, sc.belief, rng);

    ScalarField reach = build_reachability(sc.workspace, sc.reach);
    PlannerParams pp = sc.planner;
    if (method == Method::InfoOnly)
        pp.c_reach = 0.0;
    if (method == Method::ReachOnly)
        pp.c_info = 0.0;
    int dim = sc.robot.action_dim;
    Eigen::MatrixXd nominal(pp.control_points, dim);
    {
        std::normal_distribution<double> n01(0.0, 1.0);
        double sd = std::sqrt(pp.noise_variance);
        for (Eigen::Index i = 0; i < nominal.rows(); ++i)
            for (Eigen::Index j = 0; j < nominal.cols(); ++j)
                nominal(i, j) = std::clamp(sd * n01(rng), -1.0, 1.0);
    }
    bool counterclockwise = std::uniform_int_distribution<int>(0, 1)(rng) == 1;

    auto record = [&](int step, bool contact, const Action& u, std::size_t touched) {
        StepMetrics m;
        m.step = step;
        m.nll = nll(state.particles, shape, world.true_pose, samples, sc.sensor);
        m.chamfer = pairwise_chamfer(state.particles, shape, samples);
        m.contact = contact;
        m.u = u;
        m.q = world.q;
        m.touched = touched;
        m.object_center = world.object_center();
        Mat3 to_world = world.true_pose.rotation().transpose();
        m.object_yaw = std::atan2(to_world(1, 0), to_world(0, 0));
        m.object_reach = sc.reach.value(m.object_center);
        if (m.object_reach <= 0.0)
            result.pushed_out = true;
        result.steps.push_back(m);
        return m;
    };

    StepMetrics last = record(0, false, Action::Zero(dim), first.count(Semantics::Surface));
    if (hooks.on_step)
        hooks.on_step(0, state, nullptr);
    bool in_contact = false;
    SemanticCloud last_touch;
    int since_plan = pp.replan_interval;
    bool warm = false;
    InfoFields fields;
    try {
        for (int step = 1; step <= n_steps; ++step) {
            if (last.chamfer < chamfer_limit) {
                result.converged = true;
                break;
            }
            Action u;
            bool built = false;
            if (method == Method::Slide) {
                SlideState ss{&state.particles, &shape, world.q, in_contact,
                              centroid(last_touch.positions(Semantics::Surface)), counterclockwise,
                              sc.robot.translation_scale, sc.robot.rotation_scale};
                u = slide_policy(ss);
            } else if (since_plan >= pp.replan_interval || in_contact) {
                fields = build_info_fields(state.particles, shape, sc.workspace, sc.belief.gamma, sc.sensor,
                                           sc.belief.discrepancy);
                built = true;
                ReachCostEvaluator evaluator(fields.info, reach);
                PlanProblem problem{&state.particles, &shape, &fields, &reach, &world.robot, &evaluator};
                int iterations = warm ? 1 : std::max(1, pp.warm_start_iterations);
                PlanResult pr = plan(world.q, problem, nominal, pp, rng, iterations);
                warm = true;
                u = pr.u;
                nominal = pr.nominal_theta;
                since_plan = 1;
            } else {
                Eigen::MatrixXd W =
                    interpolation_matrix(pp.horizon, pp.control_points, pp.kernel, pp.kernel_scale);
                u = (W * nominal).row(0).transpose().cwiseMax(-1.0).cwiseMin(1.0);
                nominal = shift_nominal(nominal, pp);
                ++since_plan;
            }

            StepOutcome outcome = world_step(world, u);
            SemanticCloud touch = tactile_observe(world, world.q);
            in_contact = outcome.contact || touch.count(Semantics::Surface) > 0;
            if (method == Method::Slide)
                in_contact = touch.count(Semantics::Surface) > 0;
            last_touch = touch;

            if (sc.observe_object_motion) {
                Movement mv = movement_from_world(outcome.object_motion, state.particles.poses.front());
                state = update_step(state, touch, mv, shape, sc.belief, rng);
            } else {
                Pose robot_motion;
                if (outcome.contact) {
                    Pose before = Pose::from_yaw(outcome.q_before.yaw, outcome.q_before.position);
                    Pose after = Pose::from_yaw(outcome.q_after.yaw, outcome.q_after.position);
                    robot_motion = after * before.inverse();
                }
                state = update_step(state, touch, robot_motion, shape, sc.belief, rng);
            }
            last = record(step, outcome.contact, u, touch.count(Semantics::Surface));
            if (hooks.on_step)
                hooks.on_step(step, state, built ? &fields : nullptr);
        }
    } catch (const std::exception& e) {
        result.failure = e.what();
    }
    result.success = result.failure.empty() && result.steps.back().nll < result.threshold;
    return result;
}

void write_metrics_csv(std::ostream& os, const EpisodeResult& result)
{
    os << "step,nll,chamfer,contact,touched,u0,u1,u2,q_x,q_y,q_yaw,obj_x,obj_y,obj_yaw,obj_reach\n" << std::setprecision(10);
    for (const auto& m : result.steps) {
        os << m.step << ',' << m.nll << ',' << m.chamfer << ',' << (m.contact ? 1 : 0) << ',' << m.touched;
        for (int j = 0; j < 3; ++j)
            os << ',' << (j < m.u.size() ? m.u[j] : 0.0);
        os << ',' << m.q.position.x() << ',' << m.q.position.y() << ',' << m.q.yaw;
        os << ',' << m.object_center.x() << ',' << m.object_center.y() << ',' << m.object_yaw << ',' << m.object_reach << '\n';
    }
}

}  // namespace rummage
