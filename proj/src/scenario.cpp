#include "rummage/scenario.hpp"

#include <json.hpp>

#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace rummage {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed)
{
    if (!j.is_object())
        throw ConfigError(where + " must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!ok.count(it.key()))
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void read(const json& j, const char* key, T& out)
{
    if (j.contains(key))
        out = j.at(key).get<T>();
}

Vec3 vec3(const json& j)
{
    if (!j.is_array() || j.size() < 2 || j.size() > 3)
        throw ConfigError("expected a 2- or 3-element array");
    return {j[0].get<double>(), j[1].get<double>(), j.size() == 3 ? j[2].get<double>() : 0.0};
}

double degrees(const json& j, const char* deg_key, const char* rad_key, double fallback)
{
    if (j.contains(deg_key))
        return j.at(deg_key).get<double>() * std::numbers::pi / 180.0;
    if (j.contains(rad_key))
        return j.at(rad_key).get<double>();
    return fallback;
}

Shape parse_shape(const json& j)
{
    check_keys(j, "shape", {"type", "radius", "inner_radius", "half_extents", "half_height", "height", "center",
                            "handle_size", "children", "child", "profile"});
    std::string type = j.at("type").get<std::string>();
    Vec3 center = j.contains("center") ? vec3(j.at("center")) : Vec3::Zero();
    if (type == "mug") {
        double outer = j.value("radius", 0.05), inner = j.value("inner_radius", 0.042), h = j.value("height", 0.08);
        Vec3 handle = j.contains("handle_size") ? vec3(j.at("handle_size")) : Vec3(0.02, 0.015, 0.05);
        return Shape::mug(outer, inner, h, handle);
    }
    if (type == "sphere")
        return Shape::sphere(j.at("radius").get<double>(), center);
    if (type == "box")
        return Shape::box(vec3(j.at("half_extents")), center);
    if (type == "cylinder")
        return Shape::cylinder(j.at("radius").get<double>(), j.at("half_height").get<double>(), center);
    if (type == "annulus")
        return Shape::extruded(Profile2D::annulus(j.at("radius").get<double>(), j.at("inner_radius").get<double>()),
                               j.at("half_height").get<double>(), center);
    if (type == "union" || type == "intersection") {
        const json& c = j.at("children");
        if (!c.is_array() || c.empty())
            throw ConfigError(type + " needs children");
        Shape s = parse_shape(c[0]);
        for (std::size_t i = 1; i < c.size(); ++i)
            s = type == "union" ? Shape::unite(s, parse_shape(c[i])) : Shape::intersect(s, parse_shape(c[i]));
        return s;
    }
    if (type == "complement")
        return Shape::complement(parse_shape(j.at("child")));
    throw ConfigError("unknown shape type: " + type);
}

}  // namespace

Scenario parse_scenario(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
    }
    Scenario s = mug_scenario();
    try {
        check_keys(j, "scenario",
                   {"name", "shape", "object", "robot", "camera", "world", "workspace", "reach", "belief", "planner",
                    "sensor", "n_steps", "tau", "surface_samples", "prior", "observe_object_motion", "threshold"});
        read(j, "name", s.name);
        if (j.contains("shape"))
            s.shape = std::make_shared<Shape>(parse_shape(j.at("shape")));
        if (j.contains("object")) {
            const json& o = j.at("object");
            check_keys(o, "object", {"center", "heading_deg", "heading"});
            Vec3 c = o.contains("center") ? vec3(o.at("center")) : s.true_pose.inverse().translation();
            double h = degrees(o, "heading_deg", "heading", s.true_pose.inverse().yaw());
            s.true_pose = placed_pose(c, h);
        }
        if (j.contains("workspace")) {
            const json& w = j.at("workspace");
            check_keys(w, "workspace", {"min", "max", "resolution"});
            if (w.contains("min"))
                s.workspace.min = vec3(w.at("min"));
            if (w.contains("max"))
                s.workspace.max = vec3(w.at("max"));
            read(w, "resolution", s.workspace.resolution);
            if (!(s.workspace.resolution > 0.0))
                throw ConfigError("workspace resolution must be positive");
        }
        if (j.contains("reach")) {
            const json& r = j.at("reach");
            check_keys(r, "reach", {"base", "r_mid", "r_half", "slope", "psi"});
            if (r.contains("base"))
                s.reach.base = vec3(r.at("base"));
            read(r, "r_mid", s.reach.r_mid);
            read(r, "r_half", s.reach.r_half);
            read(r, "slope", s.reach.slope);
            read(r, "psi", s.reach.psi);
        }
        bool clamp = true;
        if (j.contains("robot")) {
            const json& r = j.at("robot");
            check_keys(r, "robot", {"q0", "yaw0_deg", "yaw0", "translation_scale", "rotation_scale", "clamp_to_reach"});
            if (r.contains("q0"))
                s.q0.position = vec3(r.at("q0"));
            s.q0.yaw = degrees(r, "yaw0_deg", "yaw0", s.q0.yaw);
            read(r, "translation_scale", s.robot.translation_scale);
            read(r, "rotation_scale", s.robot.rotation_scale);
            read(r, "clamp_to_reach", clamp);
        }
        s.robot.reach_limit = clamp ? std::optional<ReachModel>(s.reach) : std::nullopt;
        if (j.contains("camera")) {
            const json& c = j.at("camera");
            check_keys(c, "camera", {"origin", "heading_deg", "heading", "fov_deg", "fov", "rays", "range",
                                     "free_spacing", "depth_fraction", "pitch_deg", "pitch", "vfov_deg", "vfov",
                                     "rows", "occluders"});
            if (c.contains("origin"))
                s.camera.origin = vec3(c.at("origin"));
            s.camera.heading = degrees(c, "heading_deg", "heading", s.camera.heading);
            s.camera.fov = degrees(c, "fov_deg", "fov", s.camera.fov);
            read(c, "rays", s.camera.rays);
            read(c, "range", s.camera.range);
            read(c, "free_spacing", s.camera.free_spacing);
            read(c, "depth_fraction", s.camera.depth_fraction);
            s.camera.pitch = degrees(c, "pitch_deg", "pitch", s.camera.pitch);
            s.camera.vfov = degrees(c, "vfov_deg", "vfov", s.camera.vfov);
            read(c, "rows", s.camera.rows);
            if (c.contains("occluders")) {
                s.camera.occluders.clear();
                for (const auto& o : c.at("occluders"))
                    s.camera.occluders.push_back({vec3(o.at("min")), vec3(o.at("max"))});
            }
        }
        if (j.contains("world")) {
            const json& w = j.at("world");
            check_keys(w, "world", {"max_substep", "yaw_gain", "contact_tolerance", "tactile_layers",
                                    "tactile_layer_spacing", "bounds_min", "bounds_max"});
            read(w, "max_substep", s.world.max_substep);
            read(w, "yaw_gain", s.world.yaw_gain);
            read(w, "contact_tolerance", s.world.contact_tolerance);
            read(w, "tactile_layers", s.world.tactile_layers);
            read(w, "tactile_layer_spacing", s.world.tactile_layer_spacing);
            if (w.contains("bounds_min"))
                s.world.bounds.min = vec3(w.at("bounds_min"));
            if (w.contains("bounds_max"))
                s.world.bounds.max = vec3(w.at("bounds_max"));
        }
        if (j.contains("belief")) {
            const json& b = j.at("belief");
            check_keys(b, "belief", {"n_particles", "gamma", "eta", "sigma_t", "sigma_r", "k_opt", "planar",
                                     "resample_percentile", "yaw_bins", "sigma_f", "epsilon", "r_free", "r_surf",
                                     "step_translation", "step_rotation", "step_decay"});
            auto& p = s.belief;
            read(b, "n_particles", p.n_particles);
            read(b, "gamma", p.gamma);
            read(b, "eta", p.eta);
            read(b, "sigma_t", p.sigma_t);
            read(b, "sigma_r", p.sigma_r);
            read(b, "k_opt", p.k_opt);
            read(b, "planar", p.planar);
            read(b, "resample_percentile", p.resample_percentile);
            read(b, "yaw_bins", p.yaw_bins);
            read(b, "sigma_f", p.discrepancy.sigma_f);
            read(b, "epsilon", p.discrepancy.epsilon);
            read(b, "r_free", p.merge.free_resolution);
            read(b, "r_surf", p.merge.surface_resolution);
            read(b, "step_translation", p.descent.step_translation);
            read(b, "step_rotation", p.descent.step_rotation);
            read(b, "step_decay", p.descent.decay);
            if (p.n_particles < 1 || !(p.gamma > 0.0) || !(p.eta > 0.0) || p.sigma_t < 0.0 || p.sigma_r < 0.0)
                throw ConfigError("invalid belief parameters");
        }
        if (j.contains("planner")) {
            const json& pl = j.at("planner");
            check_keys(pl, "planner", {"horizon", "control_points", "kernel", "kernel_scale", "samples", "rollouts",
                                       "mini_steps", "replan_interval", "lambda", "noise_variance", "beta_push_deg",
                                       "beta_push", "c_info", "c_reach", "warm_start_iterations",
                                       "downsample_resolution"});
            auto& p = s.planner;
            read(pl, "horizon", p.horizon);
            read(pl, "control_points", p.control_points);
            if (pl.contains("kernel")) {
                std::string k = pl.at("kernel").get<std::string>();
                if (k == "rbf")
                    p.kernel = KernelType::Rbf;
                else if (k == "bspline")
                    p.kernel = KernelType::BSpline;
                else
                    throw ConfigError("unknown kernel: " + k);
            }
            read(pl, "kernel_scale", p.kernel_scale);
            read(pl, "samples", p.samples);
            read(pl, "rollouts", p.rollouts);
            read(pl, "mini_steps", p.mini_steps);
            read(pl, "replan_interval", p.replan_interval);
            read(pl, "lambda", p.lambda);
            read(pl, "noise_variance", p.noise_variance);
            p.beta_push = degrees(pl, "beta_push_deg", "beta_push", p.beta_push);
            read(pl, "c_info", p.c_info);
            read(pl, "c_reach", p.c_reach);
            read(pl, "warm_start_iterations", p.warm_start_iterations);
            read(pl, "downsample_resolution", p.downsample_resolution);
            if (p.control_points < 1 || p.control_points > p.horizon || p.samples < 1 || p.rollouts < 1 ||
                p.mini_steps < 1 || !(p.lambda > 0.0))
                throw ConfigError("invalid planner parameters");
        }
        if (j.contains("sensor")) {
            const json& se = j.at("sensor");
            check_keys(se, "sensor", {"alpha", "zeta"});
            read(se, "alpha", s.sensor.alpha);
            read(se, "zeta", s.sensor.zeta);
        }
        if (j.contains("prior")) {
            const json& p = j.at("prior");
            check_keys(p, "prior", {"kind", "multiplier", "sigma", "mean"});
            if (p.contains("kind")) {
                std::string k = p.at("kind").get<std::string>();
                if (k == "center_yaw")
                    s.prior = PriorKind::CenterYaw;
                else if (k == "gaussian")
                    s.prior = PriorKind::Gaussian;
                else
                    throw ConfigError("unknown prior kind: " + k);
            }
            read(p, "multiplier", s.prior_multiplier);
            read(p, "sigma", s.prior_sigma);
            if (p.contains("mean"))
                s.prior_mean = vec3(p.at("mean"));
        }
        if (j.contains("threshold")) {
            const json& t = j.at("threshold");
            check_keys(t, "threshold", {"translation", "yaw_deg", "yaw"});
            read(t, "translation", s.threshold_translation);
            s.threshold_yaw = degrees(t, "yaw_deg", "yaw", s.threshold_yaw);
        }
        read(j, "n_steps", s.n_steps);
        read(j, "tau", s.tau);
        read(j, "surface_samples", s.surface_samples);
        read(j, "observe_object_motion", s.observe_object_motion);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad scenario value: ") + e.what());
    }
    return s;
}

Scenario load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open scenario: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

}  // namespace rummage
