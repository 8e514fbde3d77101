#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "haven/config.hpp"
#include "haven/geometry.hpp"
#include "haven/rng.hpp"

namespace haven {

inline constexpr int kSceneSchemaVersion = 1;

struct Enemy {
    Point2 position;
    double heading = 0.0;
    double speed = 0.0;
    FovSector sensor;

    /// Rebuilds the sensor so apex and heading follow the pose.
    void sync_sensor() {
        sensor.apex = position;
        sensor.heading = heading;
    }
};

struct AgentState {
    Point2 position;
    Vec2 velocity;
};

struct StepFlags {
    bool exposed = false;
    bool collided = false;
    bool reached_subgoal = false;
    bool reached_goal = false;

    [[nodiscard]] bool terminal() const { return collided || reached_goal; }
    bool operator==(const StepFlags&) const = default;
};

struct World {
    WorldConfig config;
    std::vector<Polygon> obstacles;
    std::vector<Enemy> enemies;
    AgentState agent;
    int step_count = 0;
    /// Drives enemy heading noise.
    Rng rng;
    bool terminal = false;

    [[nodiscard]] bool truncated() const { return !terminal && step_count >= config.max_episode_steps; }
    [[nodiscard]] bool done() const { return terminal || step_count >= config.max_episode_steps; }
};

[[nodiscard]] inline FovSector make_sensor(const WorldConfig& cfg, Point2 position, double heading) {
    return FovSector{position, heading, cfg.fov_aperture, cfg.fov_range, cfg.ring_range};
}

/// Enemy motion stream is re-seeded per episode so one layout can host many episodes.
inline void reseed_dynamics(World& world, std::uint64_t seed) { world.rng = Rng::stream(seed, "enemy_motion"); }

/// Obstacles, enemies, and agent from `config.seed`, each from its own sub-stream.
[[nodiscard]] inline World generate_world(const WorldConfig& config) {
    config.validate();
    World world;
    world.config = config;
    Rng obstacle_rng = Rng::stream(config.seed, "obstacles");
    Rng enemy_rng = Rng::stream(config.seed, "enemies");
    reseed_dynamics(world, config.seed);

    const Bounds& b = config.bounds;
    constexpr int kAttempts = 500;
    for (int i = 0; i < config.n_obstacles; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < kAttempts && !placed; ++attempt) {
            const Point2 center{obstacle_rng.uniform(b.x_min, b.x_max), obstacle_rng.uniform(b.y_min, b.y_max)};
            const double radius = obstacle_rng.uniform(config.obstacle_radius_min, config.obstacle_radius_max);
            const auto n_vertices =
                static_cast<int>(obstacle_rng.uniform_int(config.obstacle_vertices_min, config.obstacle_vertices_max));
            Polygon poly = random_convex_polygon(center, radius, n_vertices, obstacle_rng);
            if (distance_to_polygon(config.agent_start, poly) < config.spawn_clearance ||
                distance_to_polygon(config.goal, poly) < config.spawn_clearance) {
                continue;
            }
            world.obstacles.push_back(std::move(poly));
            placed = true;
        }
        if (!placed) {
            throw std::runtime_error("generate_world: could not place obstacle " + std::to_string(i) +
                                     " (overcrowded configuration)");
        }
    }

    constexpr double kEnemyMargin = 0.5;
    for (int i = 0; i < config.n_enemies; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < kAttempts && !placed; ++attempt) {
            const Point2 p{enemy_rng.uniform(b.x_min + kEnemyMargin, b.x_max - kEnemyMargin),
                           enemy_rng.uniform(b.y_min + kEnemyMargin, b.y_max - kEnemyMargin)};
            const double heading = wrap_angle(enemy_rng.uniform(-std::numbers::pi, std::numbers::pi));
            if (clearance(p, world.obstacles) < 0.3 || distance(p, config.agent_start) < config.enemy_spawn_clearance) {
                continue;
            }
            Enemy e;
            e.position = p;
            e.heading = heading;
            e.speed = config.enemy_speed;
            e.sensor = make_sensor(config, p, heading);
            world.enemies.push_back(e);
            placed = true;
        }
        if (!placed) {
            throw std::runtime_error("generate_world: could not place enemy " + std::to_string(i));
        }
    }

    world.agent = AgentState{config.agent_start, {}};
    return world;
}

/// Heading noise, short-range obstacle repulsion, advance, and boundary
/// reflection. A step that would enter an obstacle is refused and the enemy
/// turns around in place.
[[nodiscard]] inline Enemy step_enemy(const Enemy& enemy, const WorldConfig& cfg, std::span<const Polygon> obstacles,
                                      Rng& rng) {
    Enemy next = enemy;
    double heading = enemy.heading + rng.uniform(-cfg.enemy_heading_noise, cfg.enemy_heading_noise);
    Vec2 dir = unit_from_angle(heading);
    const double rho = cfg.enemy_repulsion_radius;
    for (const auto& o : obstacles) {
        const auto near = closest_boundary_point(enemy.position, o);
        if (near.distance < rho && near.distance > kGeomEps) {
            dir += (enemy.position - near.point) / near.distance * (1.0 / near.distance - 1.0 / rho);
        }
    }
    if (dir.norm_sq() > 1e-18) {
        heading = std::atan2(dir.y, dir.x);
    }
    Point2 p = enemy.position + unit_from_angle(heading) * enemy.speed;

    const Bounds& b = cfg.bounds;
    if (p.x < b.x_min) {
        p.x = 2.0 * b.x_min - p.x;
        heading = std::numbers::pi - heading;
    } else if (p.x > b.x_max) {
        p.x = 2.0 * b.x_max - p.x;
        heading = std::numbers::pi - heading;
    }
    if (p.y < b.y_min) {
        p.y = 2.0 * b.y_min - p.y;
        heading = -heading;
    } else if (p.y > b.y_max) {
        p.y = 2.0 * b.y_max - p.y;
        heading = -heading;
    }
    p.x = std::clamp(p.x, b.x_min, b.x_max);
    p.y = std::clamp(p.y, b.y_min, b.y_max);
    heading = wrap_angle(heading);

    if (point_in_any(p, obstacles)) {
        p = enemy.position;
        heading = wrap_angle(heading + std::numbers::pi);
    }
    next.position = p;
    next.heading = heading;
    next.sync_sensor();
    return next;
}

[[nodiscard]] inline bool agent_exposed(Point2 p, std::span<const Enemy> enemies, std::span<const Polygon> obstacles) {
    return std::any_of(enemies.begin(), enemies.end(),
                       [&](const Enemy& e) { return is_visible(p, e.sensor, obstacles); });
}

[[nodiscard]] inline int count_observers(Point2 p, std::span<const Enemy> enemies, std::span<const Polygon> obstacles) {
    return static_cast<int>(std::count_if(enemies.begin(), enemies.end(),
                                          [&](const Enemy& e) { return is_visible(p, e.sensor, obstacles); }));
}

/// Flags for the agent at `p` against the current world state.
[[nodiscard]] inline StepFlags evaluate_flags(const World& world, Point2 p) {
    StepFlags f;
    const auto& cfg = world.config;
    f.collided = !cfg.bounds.contains(p) || clearance(p, world.obstacles) < cfg.collision_radius;
    f.exposed = agent_exposed(p, world.enemies, world.obstacles);
    f.reached_goal = !f.collided && distance(p, cfg.goal) <= cfg.goal_radius;
    return f;
}

/// Integrates one agent step, advances every enemy, and evaluates flags.
/// Throws on a terminal world, an exhausted step budget, or an unsaturated command.
inline StepFlags step_agent(World& world, Vec2 command) {
    if (world.terminal) {
        throw std::logic_error("step_agent: episode already terminated");
    }
    if (world.step_count >= world.config.max_episode_steps) {
        throw std::logic_error("step_agent: step budget exhausted");
    }
    if (!command.finite() || command.norm() > world.config.agent_max_speed * (1.0 + 1e-9)) {
        throw std::invalid_argument("step_agent: command exceeds v_max");
    }
    world.agent.position += command;
    world.agent.velocity = command;
    for (auto& e : world.enemies) {
        e = step_enemy(e, world.config, world.obstacles, world.rng);
    }
    ++world.step_count;
    const StepFlags flags = evaluate_flags(world, world.agent.position);
    world.terminal = flags.terminal();
    return flags;
}

[[nodiscard]] inline double reward(double prev_subgoal_dist, double new_subgoal_dist, const StepFlags& flags,
                                   const RewardWeights& w) {
    double r = w.w_progress * (prev_subgoal_dist - new_subgoal_dist);
    if (flags.exposed) {
        r -= w.w_exposure;
    }
    if (flags.collided) {
        r -= w.w_collision;
    }
    r -= w.w_time;
    if (flags.reached_subgoal) {
        r += w.b_subgoal;
    }
    if (flags.reached_goal) {
        r += w.b_goal;
    }
    return r;
}

// ---- metrics ----

struct TrajectoryStep {
    Point2 position;
    StepFlags flags;
};

struct MetricsRow {
    bool success = false;
    bool collision = false;
    int time_to_goal = 0;
    double path_length = 0.0;
    double safety_margin = 0.0;
    int exposure = 0;
    int steps = 0;
    bool operator==(const MetricsRow&) const = default;
};

/// Online accumulation of episode metrics, one `add` per executed step.
class MetricsAccumulator {
public:
    MetricsAccumulator(Point2 start, std::span<const Polygon> obstacles, double empty_margin)
        : obstacles_(obstacles), last_(start) {
        row_.safety_margin = obstacles.empty() ? empty_margin : clearance(start, obstacles);
    }

    void add(Point2 p, const StepFlags& f) {
        row_.path_length += distance(last_, p);
        last_ = p;
        ++row_.steps;
        if (f.exposed) {
            ++row_.exposure;
        }
        if (!obstacles_.empty()) {
            row_.safety_margin = std::min(row_.safety_margin, clearance(p, obstacles_));
        }
        row_.collision = row_.collision || f.collided;
        row_.success = row_.success || f.reached_goal;
        row_.time_to_goal = row_.steps;
    }

    [[nodiscard]] const MetricsRow& row() const { return row_; }

private:
    std::span<const Polygon> obstacles_;
    Point2 last_;
    MetricsRow row_;
};

/// Metrics of a stored trajectory; `trajectory[0]` is the start pose and its flags are ignored.
/// `empty_margin` is reported as the safety margin of an obstacle-free map.
[[nodiscard]] inline MetricsRow metrics(std::span<const TrajectoryStep> trajectory, std::span<const Polygon> obstacles,
                                        double empty_margin) {
    if (trajectory.empty()) {
        throw std::invalid_argument("metrics: empty trajectory");
    }
    MetricsAccumulator acc(trajectory.front().position, obstacles, empty_margin);
    for (std::size_t i = 1; i < trajectory.size(); ++i) {
        acc.add(trajectory[i].position, trajectory[i].flags);
    }
    return acc.row();
}

// ---- scene files ----

inline json enemy_to_json(const Enemy& e) {
    return json{{"position", e.position}, {"heading", e.heading}, {"speed", e.speed},
                {"aperture", e.sensor.aperture}, {"range", e.sensor.range}, {"ring_range", e.sensor.ring_range}};
}

inline Enemy enemy_from_json(const json& j) {
    Enemy e;
    e.position = j.at("position").get<Point2>();
    e.heading = j.at("heading").get<double>();
    e.speed = j.at("speed").get<double>();
    e.sensor = FovSector{e.position, e.heading, j.at("aperture").get<double>(), j.at("range").get<double>(),
                         j.at("ring_range").get<double>()};
    return e;
}

inline json polygon_to_json(const Polygon& p) { return json(p.vertices()); }

inline json world_to_scene(const World& w) {
    json obstacles = json::array();
    for (const auto& o : w.obstacles) {
        obstacles.push_back(polygon_to_json(o));
    }
    json enemies = json::array();
    for (const auto& e : w.enemies) {
        enemies.push_back(enemy_to_json(e));
    }
    return json{{"schema", kSceneSchemaVersion},
                {"config", w.config},
                {"obstacles", obstacles},
                {"enemies", enemies},
                {"agent", {{"position", w.agent.position}, {"velocity", w.agent.velocity}}},
                {"step_count", w.step_count},
                {"terminal", w.terminal},
                {"rng", w.rng.serialize()}};
}

[[nodiscard]] inline World world_from_scene(const json& j) {
    if (!j.contains("schema") || j.at("schema").get<int>() != kSceneSchemaVersion) {
        throw std::runtime_error("scene file: unsupported schema version");
    }
    World w;
    w.config = j.at("config").get<WorldConfig>();
    for (const auto& o : j.at("obstacles")) {
        w.obstacles.emplace_back(o.get<std::vector<Point2>>());
    }
    for (const auto& e : j.at("enemies")) {
        w.enemies.push_back(enemy_from_json(e));
    }
    w.agent.position = j.at("agent").at("position").get<Point2>();
    w.agent.velocity = j.at("agent").at("velocity").get<Vec2>();
    w.step_count = j.at("step_count").get<int>();
    w.terminal = j.at("terminal").get<bool>();
    w.rng = Rng::deserialize(j.at("rng").get<std::string>());
    return w;
}

}  // namespace haven
