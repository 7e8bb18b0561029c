#include "rummage/infogain.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace rummage;

TEST_CASE("semantics probability is the weighted sensor mixture")
{
    Shape s = Shape::sphere(0.05);
    SensorModel m;
    Vec3 x(0.05, 0.0, 0.0);
    ParticleSet one(std::vector<Pose>{Pose::from_translation(Vec3(0.004, 0.0, 0.0))});
    auto p1 = semantics_probability(one, s, x);
    auto ref = m.probabilities(s.sdf(one.poses[0].apply(x)));
    CHECK(p1.surface == ref.surface);
    CHECK(p1.free == ref.free);

    ParticleSet two(std::vector<Pose>{Pose{}, Pose::from_translation(Vec3(0.1, 0.0, 0.0))});
    CHECK(semantics_probability(two, s, x).surface == doctest::Approx(0.5).epsilon(1e-3));

    ParticleSet far(std::vector<Pose>{Pose{}});
    auto pf = semantics_probability(far, s, Vec3(0.2, 0.0, 0.0));
    CHECK(pf.free > 0.9999);
    CHECK(pf.occupied == 0.0);
}

TEST_CASE("info gain reference values")
{
    Shape s = Shape::sphere(0.05);
    Vec3 x(0.05, 0.0, 0.0);
    ParticleSet two(std::vector<Pose>{Pose{}, Pose::from_translation(Vec3(0.1, 0.0, 0.0))});
    CHECK(info_gain(two, s, x, 2.0) == doctest::Approx(0.05).epsilon(2e-3));

    ParticleSet one(std::vector<Pose>{Pose{}});
    CHECK(info_gain(one, s, Vec3(0.5, 0.0, 0.0), 2.0) < 1e-3);

    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    std::vector<Pose> copies(5, Pose::from_yaw(0.3, Vec3(0.01, 0.0, 0.0)));
    ParticleSet same(copies);
    for (int i = 0; i < 200; ++i) {
        Vec3 p(u(rng), u(rng), u(rng));
        if (std::abs(s.sdf(same.poses[0].apply(p))) < 0.004)
            continue;
        CHECK(info_gain(same, s, p, 2.0) < 0.01);
    }
}

TEST_CASE("disagreement raises info")
{
    Shape s = Shape::sphere(0.05);
    Vec3 x(0.06, 0.0, 0.0);
    ParticleSet agree(std::vector<Pose>{Pose{}, Pose{}});
    ParticleSet disagree(std::vector<Pose>{Pose{}, Pose::from_translation(Vec3(0.03, 0.0, 0.0))});
    CHECK(info_gain(disagree, s, x, 2.0) >= info_gain(agree, s, x, 2.0));
}

TEST_CASE("info fields are normalized, nonnegative and deterministic")
{
    Shape m = Shape::mug();
    std::vector<Pose> poses;
    for (int i = 0; i < 12; ++i)
        poses.push_back(Pose::from_yaw(0.5 * i));
    ParticleSet set(poses);
    Workspace w{Vec3(-0.1, -0.1, 0.0), Vec3(0.1, 0.1, 0.0), 0.01};
    InfoFields f = build_info_fields(set, m, w, 2.0);
    InfoFields g = build_info_fields(set, m, w, 2.0);
    for (std::size_t n = 0; n < f.info.size(); ++n) {
        CHECK(f.info.values()[n] >= 0.0);
        CHECK(f.p_free.values()[n] + f.p_occ.values()[n] + f.p_surf.values()[n] == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(f.info.values()[n] == g.info.values()[n]);
    }
    CHECK(f.info.query(Vec3(5.0, 0.0, 0.0)) == 0.0);
    CHECK(f.p_free.query(Vec3(5.0, 0.0, 0.0)) == 1.0);
}

TEST_CASE("reachability ring")
{
    ReachModel r;
    CHECK(r.value(Vec3(r.r_mid, 0.0, 0.0)) == 1.0);
    double e_half = r.psi / 2.0;
    Vec3 half(r.r_mid + r.r_half + e_half / r.slope, 0.0, 0.0);
    CHECK(r.value(half) == doctest::Approx(0.5));
    CHECK(r.value(Vec3(r.support_radius() + 0.01, 0.0, 0.0)) == 0.0);
    Workspace w{Vec3(0.0, -0.5, 0.0), Vec3(1.0, 0.5, 0.0), 0.05};
    ScalarField f = build_reachability(w, r);
    for (double v : f.values()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}
