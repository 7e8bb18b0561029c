#include "rummage/parallel.hpp"
#include "rummage/scenario.hpp"
#include "rummage/sim.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace rummage;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

// "0-9", "1,4,7" or a mix of both.
std::vector<std::uint64_t> parse_seeds(const std::string& text)
{
    std::vector<std::uint64_t> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (part.empty())
            continue;
        auto dash = part.find('-');
        if (dash == std::string::npos) {
            out.push_back(std::stoull(part));
        } else {
            auto lo = std::stoull(part.substr(0, dash)), hi = std::stoull(part.substr(dash + 1));
            if (hi < lo)
                throw ConfigError("bad seed range: " + part);
            for (auto s = lo; s <= hi; ++s)
                out.push_back(s);
        }
    }
    if (out.empty())
        throw ConfigError("no seeds given");
    return out;
}

double quantile(std::vector<double> v, double q)
{
    std::sort(v.begin(), v.end());
    double r = q * static_cast<double>(v.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(r));
    auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (r - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct RunOptions {
    std::string scenario;
    std::string method = "rumi";
    std::string seeds = "0";
    int steps = -1;
    std::string out = "out";
    unsigned threads = 0;
    bool export_particles = false;
    bool export_fields = false;
};

int cmd_run(const RunOptions& opt)
{
    Scenario sc;
    Method method;
    std::vector<std::uint64_t> seeds;
    try {
        sc = opt.scenario.empty() ? mug_scenario() : load_scenario(opt.scenario);
        method = parse_method(opt.method);
        seeds = parse_seeds(opt.seeds);
        fs::create_directories(opt.out);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    }
    int steps = opt.steps >= 0 ? opt.steps : sc.n_steps;
    set_thread_count(opt.threads);
    std::string tag = to_string(method);

    std::vector<EpisodeResult> results;
    for (auto seed : seeds) {
        EpisodeHooks hooks;
        fs::path snap = fs::path(opt.out) / (tag + "_seed" + std::to_string(seed));
        if (opt.export_particles || opt.export_fields)
            fs::create_directories(snap);
        hooks.on_step = [&](int step, const BeliefState& state, const InfoFields* fields) {
            if (opt.export_particles) {
                std::ofstream f(snap / ("particles_" + std::to_string(step) + ".csv"));
                state.particles.write_csv(f);
                std::ofstream c(snap / ("cloud_" + std::to_string(step) + ".csv"));
                state.cloud.write_csv(c);
            }
            if (opt.export_fields && fields) {
                std::ofstream f(snap / ("info_" + std::to_string(step) + ".csv"));
                fields->info.write_csv(f);
            }
        };
        EpisodeResult r = run_episode(sc, method, seed, steps, hooks);
        if (!r.failure.empty())
            std::cerr << "seed " << seed << " failed: " << r.failure << '\n';
        std::ofstream f(fs::path(opt.out) / (tag + "_seed" + std::to_string(seed) + ".csv"));
        write_metrics_csv(f, r);
        std::cout << tag << " seed " << seed << ": steps " << r.steps.size() - 1 << ", nll "
                  << r.steps.front().nll << " -> " << r.steps.back().nll << " (threshold " << r.threshold << "), "
                  << (r.success ? "success" : "fail") << (r.pushed_out ? ", pushed out" : "") << '\n';
        results.push_back(std::move(r));
    }

    // Episodes that converged early keep their final estimate for later steps.
    std::size_t rows = 0;
    for (const auto& r : results)
        rows = std::max(rows, r.steps.size());
    std::ofstream sum(fs::path(opt.out) / (tag + "_summary.csv"));
    sum << "step,nll_median,nll_p25,nll_p75,chamfer_median,chamfer_p25,chamfer_p75\n" << std::setprecision(10);
    for (std::size_t s = 0; s < rows; ++s) {
        std::vector<double> nl, ch;
        for (const auto& r : results) {
            const auto& m = r.steps[std::min(s, r.steps.size() - 1)];
            nl.push_back(m.nll);
            ch.push_back(m.chamfer);
        }
        sum << s << ',' << quantile(nl, 0.5) << ',' << quantile(nl, 0.25) << ',' << quantile(nl, 0.75) << ','
            << quantile(ch, 0.5) << ',' << quantile(ch, 0.25) << ',' << quantile(ch, 0.75) << '\n';
    }
    int successes = 0, pushed = 0, failures = 0;
    std::ofstream ep(fs::path(opt.out) / (tag + "_episodes.csv"));
    ep << "seed,success,pushed_out,converged,steps,initial_nll,final_nll,threshold,failure\n"
       << std::setprecision(10);
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        successes += r.success;
        pushed += r.pushed_out;
        failures += !r.failure.empty();
        ep << seeds[i] << ',' << r.success << ',' << r.pushed_out << ',' << r.converged << ','
           << r.steps.size() - 1 << ',' << r.steps.front().nll << ',' << r.steps.back().nll << ',' << r.threshold
           << ',' << '"' << r.failure << '"' << '\n';
    }
    std::cout << tag << ": " << successes << "/" << results.size() << " successes, " << pushed << " pushed out\n";
    return failures == 0 ? kOk : kRuntimeError;
}

struct ExportOptions {
    std::string scenario;
    std::string snapshot;
    std::string field = "info";
    double slice_z = std::nan("");
    double percentile = 0.0;
    std::string out = "field";
};

int cmd_export_field(const ExportOptions& opt)
{
    Scenario sc;
    ParticleSet particles;
    try {
        sc = opt.scenario.empty() ? mug_scenario() : load_scenario(opt.scenario);
        if (opt.field != "reach") {
            std::ifstream in(opt.snapshot);
            if (!in)
                throw ConfigError("cannot open snapshot: " + opt.snapshot);
            particles = ParticleSet::read_csv(in);
            if (particles.size() == 0)
                throw ConfigError("snapshot has no particles");
            particles.normalize();
        }
        if (opt.field != "info" && opt.field != "p_free" && opt.field != "reach")
            throw ConfigError("unknown field: " + opt.field);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    }
    Workspace ws = sc.workspace;
    bool volumetric = ws.dims()[2] > 1;
    if (volumetric && std::isnan(opt.slice_z)) {
        std::cerr << "config error: 3D workspace needs --slice-z\n";
        return kConfigError;
    }
    if (volumetric) {
        ws.min.z() = ws.max.z() = opt.slice_z;
    }
    try {
        ScalarField f;
        if (opt.field == "reach") {
            f = build_reachability(ws, sc.reach);
        } else {
            InfoFields fields = build_info_fields(particles, *sc.shape, ws, sc.belief.gamma, sc.sensor,
                                                  sc.belief.discrepancy);
            f = opt.field == "info" ? fields.info : fields.p_free;
        }
        fs::path out(opt.out);
        if (out.has_parent_path())
            fs::create_directories(out.parent_path());
        std::ofstream csv(out.string() + ".csv");
        f.write_csv(csv);
        std::ofstream svg(out.string() + ".svg");
        f.write_svg(svg, 0, opt.percentile);
        std::cout << "wrote " << out.string() << ".csv and .svg\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kOk;
}

std::string format(const Correlation& p)
{
    if (!p.defined)
        return "undefined";
    std::ostringstream ss;
    ss << std::setprecision(6) << p.r;
    return ss.str();
}

int cmd_correlate(const std::vector<std::string>& inputs)
{
    std::vector<double> all_nll, all_ch;
    std::vector<std::pair<std::string, Correlation>> rows;
    try {
        for (const auto& path : inputs) {
            std::ifstream in(path);
            if (!in)
                throw ConfigError("cannot open " + path);
            std::string line;
            std::getline(in, line);
            std::vector<std::string> header;
            {
                std::stringstream ss(line);
                std::string c;
                while (std::getline(ss, c, ','))
                    header.push_back(c);
            }
            auto col = [&](const std::string& name) {
                auto it = std::find(header.begin(), header.end(), name);
                if (it == header.end())
                    throw ConfigError(path + " has no column " + name);
                return static_cast<std::size_t>(it - header.begin());
            };
            std::size_t ci = col("nll"), cc = col("chamfer");
            std::vector<double> nl, ch;
            while (std::getline(in, line)) {
                if (line.empty())
                    continue;
                std::vector<std::string> cells;
                std::stringstream ss(line);
                std::string c;
                while (std::getline(ss, c, ','))
                    cells.push_back(c);
                nl.push_back(std::stod(cells.at(ci)));
                ch.push_back(std::stod(cells.at(cc)));
            }
            rows.emplace_back(path, pearson(nl, ch));
            all_nll.insert(all_nll.end(), nl.begin(), nl.end());
            all_ch.insert(all_ch.end(), ch.begin(), ch.end());
        }
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    }
    Correlation pooled = pearson(all_nll, all_ch);
    if (pooled.n < 2) {
        std::cerr << "config error: need at least 2 paired observations\n";
        return kConfigError;
    }
    std::cout << "input,n,pearson_r\n";
    for (const auto& [path, p] : rows)
        std::cout << path << ',' << p.n << ',' << format(p) << '\n';
    std::cout << "pooled," << pooled.n << ',' << format(pooled) << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Active pose estimation of a movable object by rummaging"};
    app.require_subcommand(1);

    RunOptions run;
    auto* run_cmd = app.add_subcommand("run", "Run seeded episodes and write metrics");
    run_cmd->add_option("--scenario", run.scenario, "Scenario JSON (default: built-in mug)");
    run_cmd->add_option("--method", run.method, "rumi | info-only | reach-only | slide");
    run_cmd->add_option("--seeds", run.seeds, "Seeds, e.g. 0-9 or 1,3,5");
    run_cmd->add_option("--steps", run.steps, "Steps per episode (default: scenario)");
    run_cmd->add_option("--out", run.out, "Output directory");
    run_cmd->add_option("--threads", run.threads, "Worker threads (0 = all cores)");
    run_cmd->add_flag("--export-particles", run.export_particles, "Write particle and cloud snapshots");
    run_cmd->add_flag("--export-fields", run.export_fields, "Write info fields when replanning");

    ExportOptions ex;
    auto* ex_cmd = app.add_subcommand("export-field", "Render a field as CSV and SVG heat map");
    ex_cmd->add_option("--scenario", ex.scenario, "Scenario JSON (default: built-in mug)");
    ex_cmd->add_option("--snapshot", ex.snapshot, "Particle snapshot CSV");
    ex_cmd->add_option("--field", ex.field, "info | p_free | reach");
    ex_cmd->add_option("--slice-z", ex.slice_z, "z of the slice for 3D workspaces");
    ex_cmd->add_option("--percentile", ex.percentile, "Hide nodes below this value percentile");
    ex_cmd->add_option("--out", ex.out, "Output path prefix");

    std::vector<std::string> inputs;
    auto* co_cmd = app.add_subcommand("correlate", "Pearson correlation of NLL and Chamfer");
    co_cmd->add_option("--inputs", inputs, "Metric CSV files")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }
    if (*run_cmd)
        return cmd_run(run);
    if (*ex_cmd)
        return cmd_export_field(ex);
    return cmd_correlate(inputs);
}
