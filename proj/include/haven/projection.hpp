#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "haven/baselines.hpp"
#include "haven/config.hpp"
#include "haven/controller.hpp"
#include "haven/episode.hpp"
#include "haven/geometry.hpp"
#include "haven/rng.hpp"
#include "haven/tactics.hpp"
#include "haven/world.hpp"

namespace haven {

struct Point3 {
    double x = 0.0, y = 0.0, z = 0.0;
    bool operator==(const Point3&) const = default;
};

struct PointCloud {
    std::vector<Point3> points;
    std::uint64_t frame_id = 0;

    void validate() const {
        for (const auto& p : points) {
            if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
                throw std::invalid_argument("point cloud: non-finite coordinate in frame " + std::to_string(frame_id));
            }
        }
    }
    bool operator==(const PointCloud&) const = default;
};

/// (x, y) of every point with z_min <= z <= z_max.
[[nodiscard]] inline std::vector<Point2> project_to_plane(const PointCloud& cloud, double z_min, double z_max) {
    if (!(z_min < z_max)) {
        throw std::invalid_argument("project_to_plane: z band must satisfy min < max");
    }
    std::vector<Point2> out;
    out.reserve(cloud.points.size());
    for (const auto& p : cloud.points) {
        if (p.z >= z_min && p.z <= z_max) {
            out.push_back({p.x, p.y});
        }
    }
    return out;
}

namespace detail {

struct CellKey {
    std::int64_t ix, iy;
    bool operator==(const CellKey&) const = default;
};

struct CellKeyHash {
    std::size_t operator()(const CellKey& k) const noexcept {
        return static_cast<std::size_t>(mix64(static_cast<std::uint64_t>(k.ix) * 0x9e3779b97f4a7c15ULL ^
                                              static_cast<std::uint64_t>(k.iy)));
    }
};

inline CellKey cell_of(Point2 p, double size) {
    return {static_cast<std::int64_t>(std::floor(p.x / size)), static_cast<std::int64_t>(std::floor(p.y / size))};
}

}  // namespace detail

/// DBSCAN: clusters as index lists in discovery order; noise is dropped.
/// A point is core when at least `min_pts` points (itself included) lie within `eps`.
[[nodiscard]] inline std::vector<std::vector<std::size_t>> dbscan(std::span<const Point2> pts, double eps,
                                                                  int min_pts) {
    if (!(eps > 0.0)) {
        throw std::invalid_argument("dbscan: eps must be positive");
    }
    std::unordered_map<detail::CellKey, std::vector<std::size_t>, detail::CellKeyHash> grid;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        grid[detail::cell_of(pts[i], eps)].push_back(i);
    }
    const double eps2 = eps * eps;
    auto neighbours = [&](std::size_t i) {
        std::vector<std::size_t> out;
        const auto c = detail::cell_of(pts[i], eps);
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
            for (std::int64_t dy = -1; dy <= 1; ++dy) {
                auto it = grid.find({c.ix + dx, c.iy + dy});
                if (it == grid.end()) {
                    continue;
                }
                for (std::size_t j : it->second) {
                    const Vec2 d = pts[j] - pts[i];
                    if (d.dot(d) <= eps2) {
                        out.push_back(j);
                    }
                }
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    };

    constexpr int kUnvisited = -2;
    constexpr int kNoise = -1;
    std::vector<int> label(pts.size(), kUnvisited);
    std::vector<std::vector<std::size_t>> clusters;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (label[i] != kUnvisited) {
            continue;
        }
        auto nb = neighbours(i);
        if (static_cast<int>(nb.size()) < min_pts) {
            label[i] = kNoise;
            continue;
        }
        const int id = static_cast<int>(clusters.size());
        clusters.emplace_back();
        label[i] = id;
        clusters.back().push_back(i);
        std::vector<std::size_t> frontier(nb.begin(), nb.end());
        for (std::size_t f = 0; f < frontier.size(); ++f) {
            const std::size_t j = frontier[f];
            if (label[j] == kNoise) {
                label[j] = id;
                clusters.back().push_back(j);
            }
            if (label[j] != kUnvisited) {
                continue;
            }
            label[j] = id;
            clusters.back().push_back(j);
            auto nb2 = neighbours(j);
            if (static_cast<int>(nb2.size()) >= min_pts) {
                frontier.insert(frontier.end(), nb2.begin(), nb2.end());
            }
        }
    }
    return clusters;
}

/// Density clusters turned into convex hull polygons; hulls under `area_floor` are dropped.
[[nodiscard]] inline std::vector<Polygon> polygonize(std::span<const Point2> points, double cluster_eps,
                                                     int min_cluster, double area_floor = 0.05) {
    std::vector<Polygon> out;
    for (const auto& cluster : dbscan(points, cluster_eps, min_cluster)) {
        std::vector<Point2> members;
        members.reserve(cluster.size());
        for (std::size_t i : cluster) {
            members.push_back(points[i]);
        }
        auto hull = convex_hull(std::move(members));
        if (hull.size() < 3) {
            continue;
        }
        try {
            Polygon poly(std::move(hull));
            if (poly.area() >= area_floor) {
                out.push_back(std::move(poly));
            }
        } catch (const std::invalid_argument&) {
            // numerically degenerate sliver
        }
    }
    return out;
}

/// Per-cell observation history over the last `window` frames, one bit per frame.
class PersistenceTracker {
public:
    PersistenceTracker(double cell_size, int window, int t_pers) : cell_(cell_size), window_(window), t_pers_(t_pers) {
        if (!(cell_size > 0.0)) {
            throw std::invalid_argument("persistence: cell size must be positive");
        }
        if (window < 1 || window > 32) {
            throw std::invalid_argument("persistence: window must be in [1, 32]");
        }
        if (t_pers < 1 || t_pers > window) {
            throw std::invalid_argument("persistence: threshold must be in [1, window]");
        }
    }

    [[nodiscard]] static PersistenceTracker from(const ProjectionConfig& c) {
        return PersistenceTracker(c.cell_size, c.window, c.t_pers);
    }

    /// Ages the history by one frame, marks every cell the polygons cover
    /// (cell centres inside, plus each centroid cell), and returns the
    /// polygons whose centroid cell was seen in at least t_pers frames.
    std::vector<Polygon> update(std::span<const Polygon> polygons) {
        const std::uint32_t keep = window_ == 32 ? 0xffffffffu : ((1u << window_) - 1u);
        for (auto it = bits_.begin(); it != bits_.end();) {
            it->second = (it->second << 1) & keep;
            it = it->second == 0 ? bits_.erase(it) : std::next(it);
        }
        for (const auto& poly : polygons) {
            mark(detail::cell_of(poly.centroid(), cell_));
            double x0 = std::numeric_limits<double>::infinity(), y0 = x0, x1 = -x0, y1 = -x0;
            for (Point2 v : poly.vertices()) {
                x0 = std::min(x0, v.x);
                y0 = std::min(y0, v.y);
                x1 = std::max(x1, v.x);
                y1 = std::max(y1, v.y);
            }
            const auto lo = detail::cell_of({x0, y0}, cell_);
            const auto hi = detail::cell_of({x1, y1}, cell_);
            for (std::int64_t ix = lo.ix; ix <= hi.ix; ++ix) {
                for (std::int64_t iy = lo.iy; iy <= hi.iy; ++iy) {
                    const Point2 centre{(static_cast<double>(ix) + 0.5) * cell_, (static_cast<double>(iy) + 0.5) * cell_};
                    if (point_in_polygon(centre, poly)) {
                        mark({ix, iy});
                    }
                }
            }
        }
        std::vector<Polygon> out;
        for (const auto& poly : polygons) {
            if (count_at(poly.centroid()) >= t_pers_) {
                out.push_back(poly);
            }
        }
        return out;
    }

    [[nodiscard]] int count_at(Point2 p) const {
        auto it = bits_.find(detail::cell_of(p, cell_));
        return it == bits_.end() ? 0 : std::popcount(it->second);
    }
    [[nodiscard]] int window() const { return window_; }
    [[nodiscard]] int threshold() const { return t_pers_; }

private:
    void mark(detail::CellKey k) { bits_[k] |= 1u; }

    double cell_;
    int window_;
    int t_pers_;
    std::unordered_map<detail::CellKey, std::uint32_t, detail::CellKeyHash> bits_;
};

inline std::vector<Polygon> persistence_filter(PersistenceTracker& tracker, std::span<const Polygon> polygons) {
    return tracker.update(polygons);
}

// ---------------------------------------------------------------------------
// Synthetic LiDAR
// ---------------------------------------------------------------------------

/// Nearest hit distance along the ray within `max_range`.
[[nodiscard]] inline std::optional<double> ray_cast(Point2 origin, Vec2 dir, std::span<const Polygon> obstacles,
                                                    double max_range) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& poly : obstacles) {
        const auto& v = poly.vertices();
        for (std::size_t i = 0; i < v.size(); ++i) {
            const Point2 a = v[i];
            const Vec2 e = v[(i + 1) % v.size()] - a;
            const double denom = dir.cross(e);
            if (std::abs(denom) < 1e-15) {
                continue;
            }
            const Vec2 ao = a - origin;
            const double t = ao.cross(e) / denom;
            const double s = ao.cross(dir) / denom;
            if (t >= 0.0 && s >= 0.0 && s <= 1.0) {
                best = std::min(best, t);
            }
        }
    }
    if (best <= max_range) {
        return best;
    }
    return std::nullopt;
}

inline constexpr std::array<double, 3> kScanHeights = {0.3, 1.0, 1.7};

/// One frame of range returns from every viewpoint: obstacle hits at three
/// heights with range noise and dropout, ground returns at z = 0, a few
/// ceiling returns above the band, and optional transient clutter blobs.
[[nodiscard]] inline PointCloud synthetic_lidar_frame(std::span<const Polygon> obstacles,
                                                      std::span<const Point2> viewpoints, const ProjectionConfig& cfg,
                                                      Rng& rng, std::uint64_t frame_id, const Bounds& bounds) {
    PointCloud cloud;
    cloud.frame_id = frame_id;
    const int n = std::max(1, cfg.lidar_rays);
    for (Point2 o : viewpoints) {
        for (int i = 0; i < n; ++i) {
            const Vec2 u = unit_from_angle(2.0 * std::numbers::pi * i / n);
            const auto hit = ray_cast(o, u, obstacles, cfg.lidar_range);
            const double reach = hit.value_or(cfg.lidar_range);
            if (i % 4 == 0) {
                const Point2 g = o + u * (0.5 * reach);
                cloud.points.push_back({g.x, g.y, 0.0});
            }
            if (i % 36 == 0) {
                const Point2 c = o + u * (0.3 * reach);
                cloud.points.push_back({c.x, c.y, 2.6});
            }
            if (!hit) {
                continue;
            }
            for (double z : kScanHeights) {
                if (rng.bernoulli(cfg.lidar_dropout)) {
                    continue;
                }
                const double r = *hit + cfg.lidar_noise * rng.normal();
                const Point2 q = o + u * r;
                cloud.points.push_back({q.x, q.y, z});
            }
        }
    }
    for (int b = 0; b < cfg.clutter_blobs; ++b) {
        const Point2 c{rng.uniform(bounds.x_min, bounds.x_max), rng.uniform(bounds.y_min, bounds.y_max)};
        for (int k = 0; k < 12; ++k) {
            const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const double r = 0.3 * std::sqrt(rng.uniform());
            const Point2 q = c + unit_from_angle(a) * r;
            cloud.points.push_back({q.x, q.y, 1.0});
        }
    }
    return cloud;
}

/// Sensor poses on a per_side x per_side grid over the bounds grown by
/// `margin`, skipping poses closer than `min_clearance` to an obstacle.
/// The outer ring sees the far side of obstacles that stick out of the workspace.
[[nodiscard]] inline std::vector<Point2> default_viewpoints(const Bounds& b, std::span<const Polygon> obstacles,
                                                            int per_side = 7, double margin = 3.0,
                                                            double min_clearance = 0.3) {
    const double x0 = b.x_min - margin;
    const double y0 = b.y_min - margin;
    const double sx = (b.x_max - b.x_min + 2.0 * margin) / per_side;
    const double sy = (b.y_max - b.y_min + 2.0 * margin) / per_side;
    std::vector<Point2> out;
    for (int i = 0; i < per_side; ++i) {
        for (int j = 0; j < per_side; ++j) {
            const Point2 p{x0 + (i + 0.5) * sx, y0 + (j + 0.5) * sy};
            if (clearance(p, obstacles) > min_clearance) {
                out.push_back(p);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Frame text format: "x y z" per line, blank line between frames, '#' comments.
// ---------------------------------------------------------------------------

[[nodiscard]] inline std::vector<PointCloud> read_frames(std::istream& in) {
    std::vector<PointCloud> frames;
    PointCloud current;
    bool open = false;
    std::string line;
    std::size_t line_no = 0;
    auto flush = [&] {
        if (open) {
            current.frame_id = frames.size();
            frames.push_back(std::move(current));
            current = {};
            open = false;
        }
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) {
            flush();
            continue;
        }
        if (line[first] == '#') {
            continue;
        }
        std::istringstream ss(line);
        Point3 p;
        std::string extra;
        if (!(ss >> p.x >> p.y >> p.z) || (ss >> extra)) {
            throw std::runtime_error("frames: malformed point on line " + std::to_string(line_no));
        }
        current.points.push_back(p);
        open = true;
    }
    flush();
    for (const auto& f : frames) {
        f.validate();
    }
    return frames;
}

inline void write_frames(std::ostream& out, std::span<const PointCloud> frames) {
    out.precision(17);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (i > 0) {
            out << '\n';
        }
        out << "# frame " << frames[i].frame_id << '\n';
        for (const auto& p : frames[i].points) {
            out << p.x << ' ' << p.y << ' ' << p.z << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// Projected pipeline
// ---------------------------------------------------------------------------

struct ProjectedFrame {
    std::vector<Polygon> extracted;
    std::vector<Polygon> kept;
    std::vector<Candidate> candidates;
    Point2 position;
    double heading = 0.0;
    UnicycleCommand command;
    StepFlags flags;
};

struct ProjectedRun {
    EpisodeRecord record;
    std::vector<ProjectedFrame> frames;
};

struct UnicyclePose {
    Point2 position;
    double heading = 0.0;
};

/// Per frame: project, polygonize, persist; the kept polygons and that
/// frame's enemy states form the world the usual candidate, network, and
/// controller stack sees. The controller's velocity is turned into a
/// unicycle command and integrated (one frame per step, speed in m/step).
[[nodiscard]] inline ProjectedRun run_projected_pipeline(std::span<const PointCloud> frames,
                                                         std::span<const std::vector<Enemy>> enemy_states,
                                                         const HavenConfig& cfg,
                                                         std::shared_ptr<const NetworkParams> params,
                                                         std::optional<UnicyclePose> start = std::nullopt) {
    if (frames.size() != enemy_states.size()) {
        throw std::invalid_argument("projected pipeline: need one enemy state list per frame");
    }
    const auto& pc = cfg.projection;
    HavenPlanner planner(std::move(params), cfg.tactics, cfg.controller, 0.0);
    PersistenceTracker tracker = PersistenceTracker::from(pc);

    UnicyclePose pose;
    if (start) {
        pose = *start;
    } else {
        pose.position = cfg.world.agent_start;
        const Vec2 g = cfg.world.goal - cfg.world.agent_start;
        pose.heading = std::atan2(g.y, g.x);
    }

    World world;
    world.config = cfg.world;
    world.agent.position = pose.position;
    planner.reset(world);

    ProjectedRun run;
    run.record.planner = planner.id();
    run.record.seed = cfg.world.seed;
    run.record.trajectory.push_back({pose.position, {}});
    MetricsRow& m = run.record.metrics;
    m.safety_margin = cfg.world.bounds.diagonal();
    std::optional<Point2> last_subgoal;
    Vec2 held;

    for (std::size_t f = 0; f < frames.size(); ++f) {
        frames[f].validate();
        ProjectedFrame log;
        const auto planar = project_to_plane(frames[f], pc.z_min, pc.z_max);
        log.extracted = polygonize(planar, pc.cluster_eps, pc.min_cluster, pc.area_floor);
        log.kept = persistence_filter(tracker, log.extracted);

        world.obstacles = log.kept;
        world.enemies = enemy_states[f];
        for (auto& e : world.enemies) {
            e.sync_sensor();
        }
        world.step_count = static_cast<int>(f);
        log.candidates = candidate_set(world, cfg.tactics);

        if (f % static_cast<std::size_t>(std::max(1, pc.action_hold)) == 0) {
            held = planner.act(SensingFacade(world));
        }
        const auto sub = planner.current_subgoal();
        if (sub && (!last_subgoal || !(*sub == *last_subgoal))) {
            run.record.subgoals.push_back({static_cast<int>(f), *sub});
        }
        last_subgoal = sub;

        log.command = unicycle_command(held, pose.heading, pc.dt, pc.omega_max);
        pose.heading = wrap_angle(pose.heading + log.command.omega * pc.dt);
        const Vec2 vel = unit_from_angle(pose.heading) * std::min(log.command.v, cfg.world.agent_max_speed);
        const Point2 before = pose.position;
        pose.position = pose.position + vel;
        world.agent.position = pose.position;
        world.agent.velocity = vel;

        log.flags = evaluate_flags(world, pose.position);
        const Point2 target = sub.value_or(cfg.world.goal);
        log.flags.reached_subgoal = distance(pose.position, target) <= cfg.world.subgoal_radius;
        planner.observe(SensingFacade(world), log.flags);
        run.record.rewards.push_back(
            reward(distance(before, target), distance(pose.position, target), log.flags, cfg.reward));
        run.record.trajectory.push_back({pose.position, log.flags});

        m.path_length += distance(before, pose.position);
        ++m.steps;
        m.exposure += log.flags.exposed ? 1 : 0;
        if (!world.obstacles.empty()) {
            m.safety_margin = std::min(m.safety_margin, clearance(pose.position, world.obstacles));
        }
        m.collision = m.collision || log.flags.collided;
        m.success = m.success || log.flags.reached_goal;
        m.time_to_goal = m.steps;

        log.position = pose.position;
        log.heading = pose.heading;
        run.frames.push_back(std::move(log));
        if (run.frames.back().flags.terminal()) {
            break;
        }
    }
    return run;
}

/// Enemy states for `n_frames` frames under the world's own enemy dynamics
/// (enemies do not react to the agent, so this is agent-independent).
[[nodiscard]] inline std::vector<std::vector<Enemy>> simulate_enemy_states(World world, int n_frames) {
    std::vector<std::vector<Enemy>> out;
    out.reserve(static_cast<std::size_t>(std::max(0, n_frames)));
    for (int f = 0; f < n_frames; ++f) {
        out.push_back(world.enemies);
        for (auto& e : world.enemies) {
            e = step_enemy(e, world.config, world.obstacles, world.rng);
        }
    }
    return out;
}

}  // namespace haven
