#include "rummage/scenario.hpp"

#include <doctest.h>

#include <cmath>

using namespace rummage;

TEST_CASE("empty scenario is the built-in mug")
{
    Scenario a = parse_scenario("{}");
    Scenario b = mug_scenario();
    CHECK(a.name == b.name);
    CHECK(a.tau == b.tau);
    CHECK(a.true_pose.translation().isApprox(b.true_pose.translation()));
}

TEST_CASE("scenario keys override defaults")
{
    Scenario s = parse_scenario(R"({
        "name": "box",
        "shape": {"type": "box", "half_extents": [0.03, 0.02, 0.04]},
        "object": {"center": [0.5, 0.1], "heading_deg": 90},
        "belief": {"sigma_t": 0.005, "n_particles": 50},
        "planner": {"kernel": "bspline", "samples": 100},
        "camera": {"rows": 3, "pitch_deg": -10},
        "n_steps": 12
    })");
    CHECK(s.name == "box");
    CHECK(s.shape->sdf(Vec3::Zero()) == doctest::Approx(-0.02));
    CHECK(s.true_pose.inverse().translation().isApprox(Vec3(0.5, 0.1, 0.0)));
    CHECK(s.true_pose.inverse().yaw() == doctest::Approx(std::acos(-1.0) / 2.0));
    CHECK(s.belief.sigma_t == 0.005);
    CHECK(s.belief.n_particles == 50);
    CHECK(s.planner.kernel == KernelType::BSpline);
    CHECK(s.camera.rows == 3);
    CHECK(s.camera.pitch == doctest::Approx(-10.0 * std::acos(-1.0) / 180.0));
    CHECK(s.n_steps == 12);
}

TEST_CASE("bad scenarios are configuration errors")
{
    CHECK_THROWS_AS(parse_scenario("{"), ConfigError);
    CHECK_THROWS_AS(parse_scenario(R"({"bogus": 1})"), ConfigError);
    CHECK_THROWS_AS(parse_scenario(R"({"shape": {"type": "torus"}})"), ConfigError);
    CHECK_THROWS_AS(parse_scenario(R"({"belief": {"gamma": -1}})"), ConfigError);
    CHECK_THROWS_AS(parse_scenario(R"({"planner": {"control_points": 20}})"), ConfigError);
    CHECK_THROWS_AS(parse_scenario(R"({"n_steps": "many"})"), ConfigError);
    CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), ConfigError);
}

TEST_CASE("angles are accepted in degrees or radians")
{
    Scenario d = parse_scenario(R"({"camera": {"fov_deg": 30}})");
    Scenario r = parse_scenario(R"({"camera": {"fov": 0.5235987755982988}})");
    CHECK(d.camera.fov == doctest::Approx(r.camera.fov));
}

TEST_CASE("listed occluders replace the built-in ones")
{
    Scenario s = parse_scenario(R"({"camera": {"occluders": [{"min": [0, 0, 0], "max": [1, 1, 1]}]}})");
    REQUIRE(s.camera.occluders.size() == 1);
    CHECK(s.camera.occluders[0].max.x() == 1.0);
}
