#include "rummage/parallel.hpp"
#include "rummage/sim.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace rummage;

namespace {

World bare_world(const Vec3& center, double heading)
{
    Scenario sc = mug_scenario();
    RobotModel robot = RobotModel::gripper();
    return World{sc.shape, placed_pose(center, heading), Config{}, robot, sc.camera, sc.world};
}

Scenario small_scenario()
{
    Scenario sc = mug_scenario();
    sc.camera.rays = 21;
    sc.camera.rows = 11;
    sc.belief.n_particles = 20;
    sc.planner.samples = 40;
    sc.planner.rollouts = 2;
    sc.planner.warm_start_iterations = 1;
    sc.workspace = Workspace{Vec3(0.2, -0.3, 0.0), Vec3(0.8, 0.3, 0.0), 0.02};
    sc.surface_samples = 100;
    return sc;
}

}  // namespace

TEST_CASE("placed pose puts the object frame origin at the center")
{
    Pose T = placed_pose(Vec3(0.5, 0.1, 0.0), 0.7);
    CHECK(T.apply(Vec3(0.5, 0.1, 0.0)).norm() < 1e-12);
    CHECK(T.inverse().yaw() == doctest::Approx(0.7));
}

TEST_CASE("camera sees the front of the object and free space before it")
{
    Scenario sc = mug_scenario();
    World w{sc.shape, sc.true_pose, sc.q0, sc.robot, sc.camera, sc.world};
    SemanticCloud c = camera_observe(w);
    REQUIRE(c.count(Semantics::Surface) > 100);
    for (auto i : c.partition(Semantics::Surface))
        CHECK(std::abs(w.true_sdf(c[i].position)) < 1e-4);
    for (auto i : c.partition(Semantics::Free))
        CHECK(w.true_sdf(c[i].position) > 0.0);
    // Nothing is seen behind the object.
    Vec3 center = w.object_center();
    for (auto i : c.partition(Semantics::Surface))
        CHECK(c[i].position.x() < center.x() + 0.05);
}

TEST_CASE("tactile sensing labels contact and free points")
{
    World w = bare_world(Vec3(0.4, 0.0, 0.0), 0.0);
    // Front row just touching the -x side of the cup wall.
    Config touching{Vec3(0.4 - 0.0505, 0.0, 0.0), 0.0};
    SemanticCloud t = tactile_observe(w, touching);
    CHECK(t.count(Semantics::Surface) > 0);
    for (auto i : t.partition(Semantics::Surface))
        CHECK(std::abs(w.true_sdf(t[i].position)) < w.params.contact_tolerance);
    Config away{Vec3(0.1, 0.0, 0.0), 0.0};
    SemanticCloud f = tactile_observe(w, away);
    CHECK(f.count(Semantics::Surface) == 0);
    CHECK(f.count(Semantics::Free) == w.robot.body_points.size() * static_cast<std::size_t>(w.params.tactile_layers));
}

TEST_CASE("world step: head-on push moves the object")
{
    World w = bare_world(Vec3(0.4, 0.0, 0.0), 0.0);
    w.q = Config{Vec3(0.34, 0.0, 0.0), 0.0};
    Action u(3);
    u << 0.25, 0.0, 0.0;  // 20 mm
    Vec3 before = w.object_center();
    StepOutcome out = world_step(w, u);
    CHECK(out.contact);
    Vec3 moved = w.object_center() - before;
    CHECK(moved.x() > 0.005);
    CHECK(moved.x() < 0.015);
    CHECK(std::abs(moved.y()) < 1e-6);
    CHECK(w.q.position.x() == doctest::Approx(0.36));
    CHECK(w.true_pose.apply(before).norm() > 0.0);
    CHECK(out.object_motion.translation().x() == doctest::Approx(moved.x()).epsilon(1e-9));
    // The robot never ends inside the object.
    for (const auto& p : w.robot.interior(w.q))
        CHECK(w.true_sdf(p) >= -1e-9);
}

TEST_CASE("world step: grazing contact blocks the robot")
{
    World w = bare_world(Vec3(0.4, 0.0, 0.0), 0.0);
    w.q = Config{Vec3(0.4 - 0.0515, -0.05, 0.0), 0.0};
    Action u(3);
    u << 0.05, 1.0, 0.0;
    Vec3 before = w.object_center();
    StepOutcome out = world_step(w, u);
    CHECK(out.contact);
    CHECK((w.object_center() - before).norm() < 1e-12);
    CHECK(w.q.position.y() < -0.05 + 0.08);
    for (const auto& p : w.robot.interior(w.q))
        CHECK(w.true_sdf(p) >= -1e-9);
}

TEST_CASE("surface samples lie on the zero level set")
{
    Shape m = Shape::mug();
    Rng rng(3);
    auto s = sample_surface(m, 200, rng);
    REQUIRE(s.size() == 200);
    for (const auto& p : s)
        CHECK(std::abs(m.sdf(p)) < 1e-9);
}

TEST_CASE("NLL prefers the true pose")
{
    Shape m = Shape::mug();
    Rng rng(1);
    auto s = sample_surface(m, 300, rng);
    Pose truth = placed_pose(Vec3(0.5, 0.0, 0.0), 0.3);
    ParticleSet exact(std::vector<Pose>{truth});
    ParticleSet off(std::vector<Pose>{Pose::from_yaw(0.2, Vec3(0.01, 0.0, 0.0)) * truth});
    CHECK(nll(exact, m, truth, s) == doctest::Approx(0.0).scale(1.0));
    CHECK(nll(off, m, truth, s) > nll(exact, m, truth, s));
    ParticleSet mix(std::vector<Pose>{truth, off.poses[0]}, {0.5, 0.5});
    CHECK(nll(mix, m, truth, s) <= s.size() * std::log(2.0) + 1e-9);
}

TEST_CASE("pairwise Chamfer equals the literal triple sum")
{
    Shape m = Shape::mug();
    Rng rng(2);
    auto s = sample_surface(m, 100, rng);
    std::vector<Pose> poses;
    for (int i = 0; i < 10; ++i)
        poses.push_back(perturb(rng, 0.01, 0.5, true));
    ParticleSet set(poses);
    double oracle = 0.0;
    for (std::size_t i = 0; i < poses.size(); ++i)
        for (std::size_t j = 0; j < poses.size(); ++j)
            for (const auto& p : s)
                oracle += std::abs(m.sdf(poses[i].apply(poses[j].inverse().apply(p))));
    oracle /= 10.0 * 10.0 * 100.0;
    CHECK(pairwise_chamfer(set, m, s) == oracle);

    ParticleSet same(std::vector<Pose>(4, poses[0]));
    CHECK(pairwise_chamfer(same, m, s) < 1e-9);
}

TEST_CASE("slide policy")
{
    Shape ball = Shape::sphere(0.05);
    ParticleSet one(std::vector<Pose>{placed_pose(Vec3(0.5, 0.0, 0.0), 0.0)});
    SlideState approach{&one, &ball, Config{Vec3(0.3, 0.0, 0.0), 0.0}};
    Action u = slide_policy(approach);
    CHECK(u[0] == doctest::Approx(1.0));
    CHECK(u[1] == doctest::Approx(0.0));

    SlideState touching = approach;
    touching.q.position = Vec3(0.45, 0.0, 0.0);
    touching.in_contact = true;
    touching.contact_point = Vec3(0.45, 0.0, 0.0);
    Action t = slide_policy(touching);
    CHECK(std::abs(t[0]) < 1e-9);
    CHECK(std::abs(std::abs(t[1]) - 1.0) < 1e-9);
}

TEST_CASE("method names round-trip")
{
    for (Method m : {Method::Rumi, Method::InfoOnly, Method::ReachOnly, Method::Slide})
        CHECK(parse_method(to_string(m)) == m);
    CHECK_THROWS(parse_method("random"));
}

TEST_CASE("success threshold is the NLL of the offset pose")
{
    Scenario sc = mug_scenario();
    Rng rng(0);
    auto s = sample_surface(*sc.shape, 200, rng);
    double th = success_threshold(sc, s);
    CHECK(th > 0.0);
    sc.threshold_translation *= 2.0;
    CHECK(success_threshold(sc, s) > th);
}

TEST_CASE("seeded episodes are reproducible across thread counts")
{
    Scenario sc = small_scenario();
    auto csv = [&](Method m) {
        std::ostringstream os;
        write_metrics_csv(os, run_episode(sc, m, 3, 2));
        return os.str();
    };
    unsigned saved = thread_count();
    set_thread_count(1);
    std::string a = csv(Method::Rumi), s1 = csv(Method::Slide);
    set_thread_count(3);
    std::string b = csv(Method::Rumi), s2 = csv(Method::Slide);
    set_thread_count(saved);
    CHECK(a == b);
    CHECK(s1 == s2);
    CHECK(a.rfind("step,nll,chamfer,contact,touched,u0,u1,u2,", 0) == 0);
}

TEST_CASE("pearson correlation")
{
    std::vector<double> x{1.0, 2.0, 3.0, 4.0}, y{2.0, 4.0, 6.0, 8.0}, z{4.0, 3.0, 2.0, 1.0}, c(4, 1.0);
    CHECK(pearson(x, y).r == doctest::Approx(1.0));
    CHECK(pearson(x, z).r == doctest::Approx(-1.0));
    CHECK_FALSE(pearson(x, c).defined);
    CHECK_FALSE(pearson(std::vector<double>{1.0}, std::vector<double>{2.0}).defined);
}
