#include "rummage/belief.hpp"

#include "rummage/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace rummage {

ParticleSet::ParticleSet(std::vector<Pose> p) : poses(std::move(p))
{
    weights.assign(poses.size(), poses.empty() ? 0.0 : 1.0 / static_cast<double>(poses.size()));
}

void ParticleSet::normalize()
{
    double s = 0.0;
    for (double w : weights)
        s += w;
    if (!(s > 0.0) || !std::isfinite(s)) {
        std::fill(weights.begin(), weights.end(), 1.0 / static_cast<double>(weights.size()));
        return;
    }
    for (double& w : weights)
        w /= s;
}

void ParticleSet::write_csv(std::ostream& os) const
{
    os << "x,y,z,qw,qx,qy,qz,weight\n" << std::setprecision(17);
    for (std::size_t i = 0; i < poses.size(); ++i) {
        const Vec3& t = poses[i].translation();
        Eigen::Quaterniond q = poses[i].quaternion();
        os << t.x() << ',' << t.y() << ',' << t.z() << ',' << q.w() << ',' << q.x() << ',' << q.y() << ',' << q.z()
           << ',' << weights[i] << '\n';
    }
}

ParticleSet ParticleSet::read_csv(std::istream& is)
{
    ParticleSet out;
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        if (first) {
            first = false;
            if (line.rfind("x,", 0) == 0)
                continue;
        }
        std::stringstream ss(line);
        std::string cell;
        double v[8];
        for (double& x : v) {
            if (!std::getline(ss, cell, ','))
                throw std::runtime_error("malformed particle row: " + line);
            x = std::stod(cell);
        }
        Eigen::Quaterniond q(v[3], v[4], v[5], v[6]);
        out.poses.push_back(Pose::from_quaternion(q.normalized(), Vec3(v[0], v[1], v[2])));
        out.weights.push_back(v[7]);
    }
    return out;
}

std::vector<double> boltzmann_weights(std::span<const double> d, double gamma)
{
    std::vector<double> w(d.size(), 0.0);
    if (d.empty())
        return w;
    double lo = *std::min_element(d.begin(), d.end());
    for (std::size_t i = 0; i < d.size(); ++i)
        w[i] = std::exp(-gamma * (d[i] - lo));
    double s = std::accumulate(w.begin(), w.end(), 0.0);
    if (!(s > 0.0) || !std::isfinite(s)) {
        std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
        return w;
    }
    for (double& x : w)
        x /= s;
    return w;
}

ParticleSet weigh(const ParticleSet& particles, const SemanticCloud& cloud, const SignedDistance& shape,
                  const BeliefParams& params)
{
    auto d = discrepancies(params.discrepancy, shape, cloud, particles.poses);
    return {particles.poses, boltzmann_weights(d, params.gamma)};
}

Pose perturb(Rng& rng, double sigma_t, double sigma_r, bool planar)
{
    std::normal_distribution<double> n01(0.0, 1.0);
    Vec3 t(n01(rng), n01(rng), planar ? 0.0 : n01(rng));
    t *= sigma_t;
    double angle = sigma_r * n01(rng);
    if (planar)
        return Pose::from_yaw(angle, t);
    Vec3 axis(n01(rng), n01(rng), n01(rng));
    double n = axis.norm();
    axis = n > 0.0 ? Vec3(axis / n) : Vec3::UnitZ();
    return Pose::from_axis_angle(axis, angle, t);
}

std::vector<std::size_t> systematic_resample(std::span<const double> weights, Rng& rng)
{
    std::size_t n = weights.size();
    std::vector<std::size_t> idx(n);
    if (n == 0)
        return idx;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    double u0 = u01(rng) / static_cast<double>(n);
    double cum = weights[0];
    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double u = u0 + static_cast<double>(i) / static_cast<double>(n);
        while (u > cum && j + 1 < n)
            cum += weights[++j];
        idx[i] = j;
    }
    return idx;
}

ParticleSet resample(const ParticleSet& particles, const SemanticCloud& cloud, const SignedDistance& shape,
                     const BeliefParams& params, Rng& rng)
{
    auto idx = systematic_resample(particles.weights, rng);
    std::vector<Pose> poses(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
        poses[i] = perturb(rng, params.sigma_t, params.sigma_r, params.planar) * particles.poses[idx[i]];
    if (params.k_opt > 0 && !cloud.empty()) {
        DescentParams descent = params.descent;
        descent.planar = params.planar;
        parallel_for(poses.size(), [&](std::size_t i) {
            poses[i] = refine_pose(params.discrepancy, shape, cloud, poses[i], params.k_opt, descent);
        });
    }
    return ParticleSet(std::move(poses));
}

Movement movement_from_world(const Pose& world_motion, const Pose& representative)
{
    // The representative moves as T' = T * M^-1, so dT = T * M^-1 * T^-1.
    return {representative * world_motion.inverse() * representative.inverse(), world_motion};
}

Movement estimate_movement(const SemanticCloud& previous, const SemanticCloud& observed,
                           const ParticleSet& particles, const SignedDistance& shape, const Pose& robot_motion,
                           const BeliefParams& params)
{
    if (observed.count(Semantics::Surface) == 0 || particles.size() == 0)
        return {};
    auto d = discrepancies(params.discrepancy, shape, previous, particles.poses);
    std::size_t i = static_cast<std::size_t>(std::min_element(d.begin(), d.end()) - d.begin());
    const Pose& Ti = particles.poses[i];
    Movement prior = movement_from_world(robot_motion, Ti);
    DescentParams descent = params.descent;
    descent.planar = params.planar;
    Pose moved = refine_pose(params.discrepancy, shape, observed, prior.dT * Ti, params.k_opt, descent);
    Pose dT = moved * Ti.inverse();
    dT.orthonormalize();
    return {dT, Ti.inverse() * dT.inverse() * Ti};
}

namespace {

double percentile(std::vector<double> v, double p)
{
    if (v.empty())
        return 0.0;
    std::sort(v.begin(), v.end());
    double r = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(v.size() - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(r));
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (r - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

BeliefState update_step(const BeliefState& state, const SemanticCloud& observed, const Movement& movement,
                        const SignedDistance& shape, const BeliefParams& params, Rng& rng, UpdateReport* report)
{
    BeliefState next;
    next.particles = state.particles;
    bool moved = !movement.dT.is_identity() || !movement.dT_w.is_identity();
    if (moved) {
        Pose inv = movement.dT_w.inverse();
        for (auto& T : next.particles.poses)
            T = perturb(rng, params.sigma_t, params.sigma_r, params.planar) * T * inv;
    }
    next.cloud = merge_observations(state.cloud, observed, next.particles.poses, shape, movement.dT_w, params.merge);
    auto d = discrepancies(params.discrepancy, shape, next.cloud, next.particles.poses);
    next.particles.weights = boltzmann_weights(d, params.gamma);
    bool do_resample = percentile(d, params.resample_percentile) > params.eta;
    if (do_resample)
        next.particles = resample(next.particles, next.cloud, shape, params, rng);
    if (report) {
        report->moved = moved;
        report->resampled = do_resample;
        report->discrepancies = std::move(d);
    }
    return next;
}

BeliefState update_step(const BeliefState& state, const SemanticCloud& observed, const Pose& robot_motion,
                        const SignedDistance& shape, const BeliefParams& params, Rng& rng, UpdateReport* report)
{
    Movement m = estimate_movement(state.cloud, observed, state.particles, shape, robot_motion, params);
    return update_step(state, observed, m, shape, params, rng, report);
}

ParticleSet initialize_particles(std::span<const Pose> priors, const SemanticCloud& cloud,
                                 const SignedDistance& shape, const BeliefParams& params, Rng& rng)
{
    std::size_t n = static_cast<std::size_t>(params.n_particles);
    if (priors.size() < n)
        throw std::invalid_argument("initialize_particles needs at least N prior poses");
    if (cloud.empty())
        return ParticleSet(std::vector<Pose>(priors.begin(), priors.begin() + static_cast<std::ptrdiff_t>(n)));

    DescentParams descent = params.descent;
    descent.planar = params.planar;
    std::vector<Pose> refined(priors.size());
    std::vector<double> cost(priors.size());
    parallel_for(priors.size(), [&](std::size_t i) {
        refined[i] = refine_pose(params.discrepancy, shape, cloud, priors[i], params.k_opt, descent);
        cost[i] = total_discrepancy(params.discrepancy, shape, cloud, refined[i]);
    });

    int bins = std::max(1, params.yaw_bins);
    std::vector<long> elite(static_cast<std::size_t>(bins), -1);
    for (std::size_t i = 0; i < refined.size(); ++i) {
        double yaw = refined[i].yaw();
        double u = (yaw + std::numbers::pi) / (2.0 * std::numbers::pi);
        int b = std::clamp(static_cast<int>(std::floor(u * bins)), 0, bins - 1);
        long& e = elite[static_cast<std::size_t>(b)];
        if (e < 0 || cost[i] < cost[static_cast<std::size_t>(e)])
            e = static_cast<long>(i);
    }
    std::vector<std::size_t> kept, all;
    for (long e : elite) {
        if (e < 0)
            continue;
        all.push_back(static_cast<std::size_t>(e));
        if (cost[static_cast<std::size_t>(e)] < params.eta)
            kept.push_back(static_cast<std::size_t>(e));
    }
    if (kept.empty())
        kept = all;

    std::vector<Pose> poses;
    poses.reserve(n);
    std::size_t per = n / kept.size();
    for (std::size_t k : kept)
        for (std::size_t c = 0; c < per; ++c)
            poses.push_back(refined[k]);
    std::vector<std::size_t> order(kept.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t c = 0; poses.size() < n; ++c)
        poses.push_back(refined[kept[order[c]]]);
    return weigh(ParticleSet(std::move(poses)), cloud, shape, params);
}

Vec3 estimate_planar_center(const SemanticCloud& cloud, const SignedDistance& shape, const Vec3& guess,
                            const DiscrepancyParams& params, double radius, double step, int yaw_samples)
{
    if (!(step > 0.0) || radius < 0.0 || yaw_samples < 1)
        throw std::invalid_argument("bad center search parameters");
    double reach = radius + 0.5 * shape.bounds().diagonal();
    SemanticCloud local;
    for (const auto& p : cloud.points())
        if ((p.position - guess).head<2>().norm() <= reach)
            local.add(p);
    int n = static_cast<int>(std::floor(radius / step + 1e-9));
    int side = 2 * n + 1;
    std::vector<double> best(static_cast<std::size_t>(side * side));
    parallel_for(best.size(), [&](std::size_t k) {
        int i = static_cast<int>(k) / side - n, j = static_cast<int>(k) % side - n;
        Vec3 c = guess + step * Vec3(i, j, 0.0);
        double b = std::numeric_limits<double>::infinity();
        for (int y = 0; y < yaw_samples; ++y) {
            double yaw = 2.0 * std::numbers::pi * y / yaw_samples;
            Pose T = Pose::from_yaw(yaw, c).inverse();
            b = std::min(b, total_discrepancy(params, shape, local, T));
        }
        best[k] = b;
    });
    // Ties keep the candidate closest to the guess.
    std::size_t arg = 0;
    double arg_dist = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < best.size(); ++k) {
        int i = static_cast<int>(k) / side - n, j = static_cast<int>(k) % side - n;
        double dist = i * i + j * j;
        if (best[k] < best[arg] || (best[k] == best[arg] && dist < arg_dist)) {
            arg = k;
            arg_dist = dist;
        }
    }
    int i = static_cast<int>(arg) / side - n, j = static_cast<int>(arg) % side - n;
    return guess + step * Vec3(i, j, 0.0);
}

}  // namespace rummage
