// Acceptance run: one PASS/FAIL line per criterion, with measured values.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "haven/haven.hpp"
#include "projection_oracle.hpp"

using namespace haven;
using std::numbers::pi;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

int failures = 0;
std::vector<int> selected;

bool wanted(int id) { return selected.empty() || std::find(selected.begin(), selected.end(), id) != selected.end(); }

void report(int id, const char* name, const std::function<Outcome()>& body) {
    if (!wanted(id)) {
        return;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += o.pass ? 0 : 1;
    std::printf("%s %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
    std::fflush(stdout);
}

// ---- geometry oracles ------------------------------------------------------

bool winding_inside(Point2 p, const Polygon& poly) {
    const auto& v = poly.vertices();
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const Vec2 a = v[i] - p;
        const Vec2 b = v[(i + 1) % v.size()] - p;
        total += std::atan2(a.cross(b), a.dot(b));
    }
    return std::abs(total) > pi;
}

bool winding_in_any(Point2 p, std::span<const Polygon> obs) {
    return std::any_of(obs.begin(), obs.end(), [&](const Polygon& o) { return winding_inside(p, o); });
}

/// Samples the open segment every `step` metres; true when a sample lands inside an obstacle.
bool march_blocked(Point2 a, Point2 b, std::span<const Polygon> obs, double step) {
    const auto n = static_cast<long>(std::ceil(distance(a, b) / step));
    for (long s = 1; s < n; ++s) {
        if (winding_in_any(a + (b - a) * (static_cast<double>(s) / static_cast<double>(n)), obs)) {
            return true;
        }
    }
    return false;
}

std::vector<Polygon> random_scene(Rng& rng, int n) {
    std::vector<Polygon> out;
    for (int i = 0; i < n; ++i) {
        const Point2 c{rng.uniform(1.0, 19.0), rng.uniform(1.0, 19.0)};
        out.push_back(random_convex_polygon(c, rng.uniform(0.5, 2.0), static_cast<int>(rng.uniform_int(3, 5)), rng));
    }
    return out;
}

// A coarse march that disagrees is re-run at finer steps; a remaining
// disagreement after the finest step counts.
struct MarchTally {
    int coarse = 0;
    int remaining = 0;
};

void check_blocked(bool claimed_blocked, Point2 a, Point2 b, std::span<const Polygon> obs, MarchTally& t) {
    if (march_blocked(a, b, obs, 1e-3) == claimed_blocked) {
        return;
    }
    ++t.coarse;
    for (double step : {1e-5, 1e-7}) {
        if (march_blocked(a, b, obs, step) == claimed_blocked) {
            return;
        }
    }
    ++t.remaining;
}

Outcome geometry_oracles() {
    Rng rng(20240);
    const int n = 10000;
    int pip_bad = 0;
    for (int i = 0; i < n; ++i) {
        const Polygon p = random_convex_polygon({rng.uniform(-3, 3), rng.uniform(-3, 3)}, rng.uniform(0.2, 3.0),
                                                static_cast<int>(rng.uniform_int(3, 8)), rng);
        const Point2 q{rng.uniform(-6, 6), rng.uniform(-6, 6)};
        pip_bad += point_in_polygon(q, p) == winding_inside(q, p) ? 0 : 1;
    }

    MarchTally seg;
    for (int i = 0; i < n; ++i) {
        const auto obs = random_scene(rng, 3);
        const Point2 a{rng.uniform(0, 20), rng.uniform(0, 20)};
        const Point2 b = a + unit_from_angle(rng.uniform(0, 2 * pi)) * rng.uniform(0.1, 4.0);
        check_blocked(!segment_clear(a, b, obs), a, b, obs, seg);
    }

    MarchTally vis;
    int foot_bad = 0;
    for (int i = 0; i < n; ++i) {
        const auto obs = random_scene(rng, 3);
        const Point2 apex{rng.uniform(0, 20), rng.uniform(0, 20)};
        if (winding_in_any(apex, obs)) {
            --i;
            continue;
        }
        const FovSector s{apex, rng.uniform(-pi, pi), rng.uniform(0.2, 2 * pi), rng.uniform(2.0, 8.0), 0.0};
        FovSector sensor = s;
        sensor.ring_range = rng.uniform(0.1, s.range);
        const Point2 t = apex + unit_from_angle(rng.uniform(0, 2 * pi)) * rng.uniform(0.0, 9.0);
        const Vec2 d = t - apex;
        const double dist = d.norm();
        bool in_foot = dist <= sensor.ring_range;
        if (!in_foot && dist <= sensor.range) {
            const double cosang = std::clamp(d.dot(unit_from_angle(sensor.heading)) / dist, -1.0, 1.0);
            in_foot = std::acos(cosang) <= 0.5 * sensor.aperture;
        }
        const bool claimed = is_visible(t, sensor, obs);
        if (!in_foot) {
            foot_bad += claimed ? 1 : 0;
            continue;
        }
        // In the footprint: visible exactly when the sight line is clear.
        check_blocked(!claimed, apex, t, obs, vis);
    }
    const bool pass = pip_bad == 0 && seg.remaining == 0 && vis.remaining == 0 && foot_bad == 0;
    return {pass, fmt("point_in_polygon %d/%d disagreements; segment_clear %d/%d (1e-3 march misses %d, all resolved "
                      "at finer step: %s); is_visible %d/%d (footprint %d, march misses %d)",
                      pip_bad, n, seg.remaining, n, seg.coarse, seg.remaining == 0 ? "yes" : "no",
                      vis.remaining + foot_bad, n, foot_bad, vis.coarse)};
}

// ---- network -----------------------------------------------------------------

Outcome gradient_fidelity() {
    Rng rng(10);
    const NetworkShape s{};
    NetworkParams p = NetworkParams::initialized(s, 5);
    for (const auto& t : p.layout().tensors) {
        for (auto& v : p.tensor(t)) {
            if (t.name.ends_with("gain")) {
                v = rng.uniform(0.5, 1.5);
            } else if (t.name.ends_with("bias")) {
                v = rng.uniform(-0.3, 0.3);
            }
        }
    }
    ObservationSequence X(s.k);
    for (auto& v : X.data()) {
        v = rng.uniform(-2.0, 2.0);
    }
    const auto grad = backward(p, forward(p, X), 1.0);
    int checked = 0, bad = 0, tensors = 0;
    double worst = 0.0;
    const double h = 1e-5;
    for (const auto& t : p.layout().tensors) {
        ++tensors;
        const std::size_t n = std::min<std::size_t>(t.size(), 12);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t idx =
                t.offset + static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(t.size()) - 1));
            const double keep = p.data()[idx];
            p.data()[idx] = keep + h;
            const double up = q_value(p, X);
            p.data()[idx] = keep - h;
            const double down = q_value(p, X);
            p.data()[idx] = keep;
            const double fd = (up - down) / (2.0 * h);
            const double an = grad.data()[idx];
            const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
            worst = std::max(worst, rel);
            bad += rel < 1e-4 ? 0 : 1;
            ++checked;
        }
    }
    return {checked >= 200 && bad == 0,
            fmt("%d parameters over %d tensors, worst relative error %.3g, %d above 1e-4", checked, tensors, worst, bad)};
}

Outcome td_targets() {
    struct Case {
        std::vector<double> r;
        double gamma;
        bool terminal;
        std::optional<double> next;
        int steps;
        double expected;
    };
    const std::vector<Case> cases = {
        {{1, 0, 0}, 0.99, true, std::nullopt, 3, 1.0},
        {{1, 0, 0}, 0.99, false, 2.0, 3, 1.0 + 0.99 * 0.99 * 0.99 * 2.0},
        {{}, 0.99, false, 1.75, 0, 1.75},
        {{}, 0.99, true, std::nullopt, 0, 0.0},
        {{0.5, -0.25, 2.0}, 0.5, true, std::nullopt, 3, 0.875},
        {{0.5, -0.25, 2.0}, 0.5, false, 8.0, 3, 1.875},
        {{1.0, 1.0}, 0.5, false, 4.0, 2, 2.5},
        {{1.0, 1.0}, 1.0, false, -3.0, 2, -1.0},
        {{1.0, 1.0}, 0.0, false, 100.0, 2, 1.0},
        {{-0.01}, 0.99, false, 10.0, 1, -0.01 + 0.99 * 10.0},
        {{-0.01}, 0.99, true, std::nullopt, 1, -0.01},
        {{2.0, 4.0, 8.0}, 0.5, false, 16.0, 3, 8.0},
        {{0.25}, 0.5, true, std::nullopt, 1, 0.25},
    };
    int bad = 0;
    for (const auto& c : cases) {
        bad += td_target(c.r, c.gamma, c.terminal, c.next, c.steps) == c.expected ? 0 : 1;
    }
    return {bad == 0, fmt("%d/%zu curated cases exact", static_cast<int>(cases.size()) - bad, cases.size())};
}

// ---- determinism ---------------------------------------------------------------

std::string eval_fingerprint(const std::vector<EpisodeRecord>& recs) {
    std::string s = episode_csv_rows(recs);
    for (const auto& r : recs) {
        s += record_to_json(r).dump();
    }
    return s;
}

Outcome determinism() {
    HavenConfig cfg;
    cfg.train.episodes = 10;
    const fs::path root = fs::temp_directory_path() / "haven_acceptance_det";
    fs::remove_all(root);
    const auto a = train(cfg, root / "a");
    const auto b = train(cfg, root / "b");
    const bool csv_same = read_text(root / "a" / "train.csv") == read_text(root / "b" / "train.csv") &&
                          train_csv(a.rows) == train_csv(b.rows) && a.rows.size() == 10;

    HavenConfig k1 = cfg;
    k1.network.k = 1;
    const auto m = train(k1);
    const auto net3 = std::make_shared<const NetworkParams>(a.params);
    const auto net1 = std::make_shared<const NetworkParams>(m.params);

    HavenConfig ev = cfg;
    ev.eval.envs = 3;
    ev.eval.episodes = 2;
    int same = 0;
    std::string diverging;
    for (PlannerId id : kAllPlanners) {
        const HavenConfig& c = id == PlannerId::haven_memoryless ? k1 : ev;
        HavenConfig run = c;
        run.eval = ev.eval;
        const auto params = id == PlannerId::haven_memoryless ? net1 : net3;
        const auto first = evaluate(run, id, params, {true, 5});
        const auto second = evaluate(run, id, params, {true, 5});
        run.eval.workers = 3;
        const auto threaded = evaluate(run, id, params, {true, 5});
        const std::string f = eval_fingerprint(first);
        if (f == eval_fingerprint(second) && f == eval_fingerprint(threaded)) {
            ++same;
        } else {
            diverging += std::string(" ") + std::string(to_string(id));
        }
    }
    fs::remove_all(root);
    const bool pass = csv_same && same == static_cast<int>(kAllPlanners.size());
    return {pass, fmt("10-episode train.csv identical: %s; %d/%zu planners with identical trajectories across reruns "
                      "and 1 vs 3 workers%s",
                      csv_same ? "yes" : "no", same, kAllPlanners.size(), diverging.c_str())};
}

// ---- masking -----------------------------------------------------------------

World decision_world(std::uint64_t i) {
    const HavenConfig cfg;
    World w = episode_world(cfg.world, cfg.train.scenario, 555, i, 0);
    Rng rng(i + 9000);
    for (int k = 0; k < 100; ++k) {
        const Point2 p{rng.uniform(-5, 15), rng.uniform(-5, 15)};
        if (clearance(p, w.obstacles) > 0.3) {
            w.agent.position = p;
            break;
        }
    }
    for (auto& e : w.enemies) {
        e.heading = rng.uniform(-pi, pi);
        e.sensor = make_sensor(w.config, e.position, e.heading);
    }
    return w;
}

Outcome masking_safety() {
    const HavenConfig cfg;
    const NetworkShape shape = NetworkShape::from(cfg.network);
    std::vector<NetworkParams> nets;
    for (std::uint64_t s = 0; s < 4; ++s) {
        nets.push_back(NetworkParams::initialized(shape, 100 + s));
    }
    int decisions = 0, masked_picks = 0, goal_lost = 0, worlds = 0, with_masked = 0;
    Rng rng(77);
    for (double eps : {0.0, 0.5, 1.0}) {
        for (int i = 0; i < 1000; ++i) {
            const World w = decision_world(static_cast<std::uint64_t>(i));
            TacticsConfig t = cfg.tactics;
            t.free_space_filter = i % 2 == 1;
            if (!t.free_space_filter) {
                ++worlds;
                const auto plain = generate_candidates(w, t);
                goal_lost += std::any_of(plain.begin(), plain.end(),
                                         [](const Candidate& c) { return c.source == CandidateSource::goal && !c.masked; })
                                 ? 0
                                 : 1;
            }
            auto cands = candidate_set(w, t);
            with_masked += std::any_of(cands.begin(), cands.end(), [](const Candidate& c) { return c.masked; }) ? 1 : 0;
            std::vector<FeatureVector16> history;
            for (int h = 0; h < static_cast<int>(rng.uniform_int(0, 3)); ++h) {
                history.push_back(cands[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(cands.size()) - 1))].features);
            }
            const std::size_t pick =
                select_subgoal(nets[static_cast<std::size_t>(i) % nets.size()], cands, history, t.sequence_mode, eps, rng);
            masked_picks += cands[pick].masked ? 1 : 0;
            ++decisions;
        }
    }
    return {masked_picks == 0 && goal_lost == 0,
            fmt("%d decisions (eps 0/0.5/1, %d with masked candidates present), %d masked selections; goal masked in "
                "%d/%d worlds",
                decisions, with_masked, masked_picks, goal_lost, worlds)};
}

// ---- controller ----------------------------------------------------------------

Outcome controller_contracts() {
    Rng rng(42);
    ControllerWeights w;
    int over = 0;
    double fastest = 0.0;
    for (int i = 0; i < 10000; ++i) {
        w.beta = rng.uniform(0, 1);
        const Vec2 f = unit_from_angle(rng.uniform(0, 2 * pi)) * std::pow(10.0, rng.uniform(-3, 6));
        const Vec2 v = unit_from_angle(rng.uniform(0, 2 * pi)) * rng.uniform(0, w.v_max);
        const double speed = smooth_and_saturate(v, force_to_velocity(f, w), w).norm();
        fastest = std::max(fastest, speed);
        over += speed <= w.v_max * (1 + 1e-12) ? 0 : 1;
    }
    int cases = 0, bad = 0;
    auto check = [&](bool ok) {
        ++cases;
        bad += ok ? 0 : 1;
    };
    ControllerWeights c;
    c.v_max = 10.0;
    c.beta = 0.0;
    const Vec2 f{0.3, -0.4};
    const Vec2 b0 = smooth_and_saturate({7, 7}, f, c);
    check(b0.x == 0.3 && b0.y == -0.4);
    c.beta = 1.0;
    const Vec2 b1 = smooth_and_saturate({0.1, 0.2}, {100, -100}, c);
    check(b1.x == 0.1 && b1.y == 0.2);
    c.beta = 0.5;
    const Vec2 half = smooth_and_saturate({1, 0}, {0, 1}, c);
    check(half.x == 0.5 && half.y == 0.5);
    c.v_max = 2.5;
    const Vec2 capped = smooth_and_saturate({0, 0}, {12, 16}, c);
    check(capped.x == 1.5 && capped.y == 2.0);

    const auto aligned = unicycle_command({0.3, 0.0}, 0.0, 0.1, 1.0);
    check(aligned.v == 0.3 && aligned.omega == 0.0);
    const auto quarter = unicycle_command({0.0, 2.0}, 0.0, 1.0, 5.0);
    check(quarter.v == 2.0 && quarter.omega == pi / 2);
    const auto behind = unicycle_command({-1.0, 0.0}, 0.0, 1.0, 10.0);
    check(behind.omega == pi);
    // Across the +-pi seam the turn takes the short way round.
    const auto seam = unicycle_command(unit_from_angle(-3.0), 3.0, 1.0, 10.0);
    check(std::abs(seam.omega - (2 * pi - 6.0)) < 1e-12);
    const auto seam2 = unicycle_command(unit_from_angle(3.0), -3.0, 1.0, 10.0);
    check(std::abs(seam2.omega + (2 * pi - 6.0)) < 1e-12);
    const auto clamped = unicycle_command({0.0, -1.0}, 0.0, 0.1, 1.0);
    check(clamped.omega == -1.0);
    return {over == 0 && bad == 0, fmt("10000 random inputs, max speed %.6f (v_max %.2f), %d over; %d/%d formula cases "
                                       "exact",
                                       fastest, w.v_max, over, cases - bad, cases)};
}

// ---- projection ----------------------------------------------------------------

std::vector<PointCloud> scan_frames(const World& w, const ProjectionConfig& pc, int n, std::uint64_t seed) {
    Rng rng = Rng::stream(seed, "lidar");
    const auto views = default_viewpoints(w.config.bounds, w.obstacles);
    std::vector<PointCloud> frames;
    for (int f = 0; f < n; ++f) {
        frames.push_back(
            synthetic_lidar_frame(w.obstacles, views, pc, rng, static_cast<std::uint64_t>(f), w.config.bounds));
    }
    return frames;
}

std::vector<Polygon> extract(const PointCloud& f, const ProjectionConfig& pc) {
    return polygonize(project_to_plane(f, pc.z_min, pc.z_max), pc.cluster_eps, pc.min_cluster, pc.area_floor);
}

Outcome projection_soundness() {
    const HavenConfig cfg;
    const ProjectionConfig pc = cfg.projection;
    int checked = 0, far = 0;
    double worst = 0.0;
    for (std::uint64_t env = 0; env < 20; ++env) {
        const World w = episode_world(cfg.world, cfg.eval.scenario, 1000, env, 0);
        const auto frames = scan_frames(w, pc, 1, env);
        for (double e : oracle::recovery_errors(w.obstacles, extract(frames[0], pc), pc.cluster_eps, 0.1)) {
            worst = std::max(worst, e);
            far += e <= 0.3 ? 0 : 1;
            ++checked;
        }
    }

    ProjectionConfig noisy = pc;
    noisy.clutter_blobs = 4;
    int violations = 0, frames_checked = 0;
    for (std::uint64_t env = 0; env < 5; ++env) {
        const World w = episode_world(cfg.world, cfg.eval.scenario, 9, env, 0);
        const auto frames = scan_frames(w, noisy, 12, 9 + env);
        std::vector<std::vector<Polygon>> extracted;
        for (const auto& f : frames) {
            extracted.push_back(extract(f, noisy));
        }
        std::vector<std::size_t> prev(frames.size(), std::numeric_limits<std::size_t>::max());
        for (int tp = 1; tp <= 5; ++tp) {
            PersistenceTracker t(noisy.cell_size, noisy.window, tp);
            for (std::size_t f = 0; f < frames.size(); ++f) {
                const std::size_t n = persistence_filter(t, extracted[f]).size();
                violations += n <= prev[f] ? 0 : 1;
                prev[f] = n;
                ++frames_checked;
            }
        }
    }
    return {far == 0 && violations == 0 && checked > 0,
            fmt("%d obstacles on 20 scenes, worst centroid error %.3f m, %d beyond 0.3 m; persistence T=1..5 over %d "
                "frame checks, %d monotonicity violations",
                checked, worst, far, frames_checked, violations)};
}

// ---- benchmark -----------------------------------------------------------------

struct Bench {
    bool ready = false;
    std::string error;
    std::vector<BenchmarkReport> reports;
    bool paired = false;
    double train_s = 0.0;
    int episodes = 0;

    [[nodiscard]] const BenchmarkReport& of(PlannerId id) const {
        return *std::find_if(reports.begin(), reports.end(), [&](const BenchmarkReport& r) { return r.planner == id; });
    }
};

Bench run_benchmark() {
    Bench b;
    HavenConfig cfg;
    // Success keeps climbing past the 5000-episode default; see the README.
    cfg.train.episodes = 15000;
    HavenConfig k1 = cfg;
    k1.network.k = 1;
    b.episodes = cfg.train.episodes;
    const auto t0 = std::chrono::steady_clock::now();
    const auto full = train(cfg);
    const auto mem = train(k1);
    b.train_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (full.diverged || mem.diverged) {
        b.error = "training diverged: " + full.message + mem.message;
        return b;
    }
    const auto net3 = std::make_shared<const NetworkParams>(full.params);
    const auto net1 = std::make_shared<const NetworkParams>(mem.params);
    std::vector<std::uint64_t> seeds;
    b.paired = true;
    for (PlannerId id : kAllPlanners) {
        const bool memoryless = id == PlannerId::haven_memoryless;
        const HavenConfig& c = memoryless ? k1 : cfg;
        const auto recs = evaluate(c, id, memoryless ? net1 : net3, {false, 0});
        std::vector<std::uint64_t> s;
        for (const auto& r : recs) {
            s.push_back(r.seed);
        }
        if (seeds.empty()) {
            seeds = s;
        }
        b.paired = b.paired && s == seeds;
        b.reports.push_back(aggregate(id, recs, c));
    }
    b.ready = true;
    return b;
}

std::string table(const Bench& b) {
    std::string s;
    for (const auto& r : b.reports) {
        s += fmt("%s=(succ %.3f, coll %.3f, expo %.2f) ", std::string(to_string(r.planner)).c_str(), r.success.mean,
                 r.collision.mean, r.exposure.mean);
    }
    return s;
}

Outcome smoke_map() {
    HavenConfig cfg;
    cfg.world.n_obstacles = 1;
    cfg.world.n_enemies = 1;
    cfg.world.seed = 3;
    cfg.train.scenario.fixed_layout = true;
    cfg.eval.scenario.fixed_layout = true;
    cfg.train.episodes = 2000;
    cfg.eval.envs = 1;
    cfg.eval.episodes = 50;
    const auto res = train(cfg);
    if (res.diverged) {
        return {false, "training diverged: " + res.message};
    }
    const auto net = std::make_shared<const NetworkParams>(res.params);
    const auto rep = aggregate(PlannerId::haven, evaluate(cfg, PlannerId::haven, net, {false, 0}), cfg);
    return {rep.success.mean >= 0.9, fmt("2000 training episodes, 50 greedy episodes: success %.3f (need >= 0.9), "
                                         "collision %.3f, exposure %.2f",
                                         rep.success.mean, rep.collision.mean, rep.exposure.mean)};
}

}  // namespace

// Optional arguments pick a subset of criteria by number.
int main(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        selected.push_back(std::atoi(argv[i]));
    }
    report(1, "gradient fidelity", gradient_fidelity);
    report(2, "geometry oracles", geometry_oracles);
    report(3, "td targets", td_targets);
    report(4, "determinism", determinism);
    report(5, "masking safety", masking_safety);
    report(6, "controller contracts", controller_contracts);
    report(7, "projection soundness", projection_soundness);

    const auto t0 = std::chrono::steady_clock::now();
    Bench b;
    const bool bench_wanted = wanted(8) || wanted(9) || wanted(10) || wanted(11);
    try {
        if (bench_wanted) {
            b = run_benchmark();
        }
    } catch (const std::exception& e) {
        b.error = e.what();
    }
    const double bench_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (bench_wanted) {
        std::printf("benchmark: %d training episodes per network (k=3 and k=1, %.0f s), 20 envs x 10 episodes, paired "
                "seeds %s, total %.0f s\n",
                b.episodes, b.train_s, b.paired ? "yes" : "no", bench_s);
    if (b.ready) {
        std::printf("benchmark: %s\n", table(b).c_str());
    }
    }
    auto need = [&](auto f) {
        return [&b, f]() -> Outcome {
            if (!b.ready) {
                return {false, "benchmark unavailable: " + b.error};
            }
            return f();
        };
    };
    const auto H = PlannerId::haven, M = PlannerId::haven_memoryless;
    report(8, "success", need([&] {
               const double h = b.of(H).success.mean;
               double best_other = 0.0;
               std::string worst_name = "none";
               for (const auto& r : b.reports) {
                   if (r.planner != H && r.planner != M && r.success.mean > best_other) {
                       best_other = r.success.mean;
                       worst_name = std::string(to_string(r.planner));
                   }
               }
               return Outcome{b.paired && h >= 0.9 && h >= best_other,
                              fmt("haven %.3f (need >= 0.90), best baseline %s %.3f", h, worst_name.c_str(),
                                  best_other)};
           }));
    report(9, "exposure ordering", need([&] {
               const double h = b.of(H).exposure.mean, m = b.of(M).exposure.mean,
                            d = b.of(PlannerId::dwa).exposure.mean;
               return Outcome{h < m && m < d, fmt("haven %.3f < memoryless %.3f < dwa %.3f", h, m, d)};
           }));
    report(10, "collision ordering", need([&] {
               const double h = b.of(H).collision.mean, v = b.of(PlannerId::vfh).collision.mean,
                            d = b.of(PlannerId::dwa).collision.mean, p = b.of(PlannerId::reactive_pf).collision.mean;
               return Outcome{h < v && h < d, fmt("haven %.3f < vfh %.3f and < dwa %.3f; reactive_pf %.3f <= haven: %s "
                                                  "(tie allowed, informational)",
                                                  h, v, d, p, p <= h ? "yes" : "no")};
           }));
    report(11, "memory ablation", need([&] {
               const auto& h = b.of(H);
               const auto& m = b.of(M);
               return Outcome{m.collision.mean > h.collision.mean && m.exposure.mean > h.exposure.mean,
                              fmt("collision memoryless %.3f vs haven %.3f (strictly higher: %s); exposure %.3f vs %.3f "
                                  "(strictly higher: %s)",
                                  m.collision.mean, h.collision.mean, m.collision.mean > h.collision.mean ? "yes" : "no",
                                  m.exposure.mean, h.exposure.mean, m.exposure.mean > h.exposure.mean ? "yes" : "no")};
           }));
    report(12, "training smoke test", smoke_map);
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
