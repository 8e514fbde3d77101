#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

#include "haven/geometry.hpp"
#include "json.hpp"

namespace haven {

using json = nlohmann::json;

inline void to_json(json& j, const Vec2& v) { j = json::array({v.x, v.y}); }
inline void from_json(const json& j, Vec2& v) {
    v.x = j.at(0).get<double>();
    v.y = j.at(1).get<double>();
}

struct Bounds {
    double x_min = -5.0;
    double y_min = -5.0;
    double x_max = 15.0;
    double y_max = 15.0;

    [[nodiscard]] bool contains(Point2 p) const {
        return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
    }
    [[nodiscard]] double diagonal() const { return std::hypot(x_max - x_min, y_max - y_min); }
    bool operator==(const Bounds&) const = default;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Bounds, x_min, y_min, x_max, y_max)

inline double degrees(double deg) { return deg * std::numbers::pi / 180.0; }

struct WorldConfig {
    Bounds bounds;
    int n_obstacles = 8;
    double obstacle_radius_min = 0.5;
    double obstacle_radius_max = 2.0;
    int obstacle_vertices_min = 3;
    int obstacle_vertices_max = 5;
    /// Obstacles are resampled if closer than this to the start or goal.
    double spawn_clearance = 1.0;
    int n_enemies = 3;
    double enemy_speed = 0.15;
    double enemy_heading_noise = 0.15;
    double enemy_repulsion_radius = 1.0;
    /// Enemies never spawn closer than this to the agent start.
    double enemy_spawn_clearance = 4.0;
    double fov_aperture = degrees(100.0);
    double fov_range = 6.0;
    double ring_range = 1.5;
    double agent_max_speed = 0.5;
    Point2 goal{14.0, 14.0};
    Point2 agent_start{-4.0, -4.0};
    int max_episode_steps = 400;
    double collision_radius = 0.15;
    double subgoal_radius = 0.5;
    double goal_radius = 0.5;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(bounds.x_min < bounds.x_max && bounds.y_min < bounds.y_max)) {
            throw std::invalid_argument("world bounds are empty");
        }
        if (n_obstacles < 0 || n_enemies < 0) {
            throw std::invalid_argument("obstacle and enemy counts must be non-negative");
        }
        if (!(obstacle_radius_min > 0.0 && obstacle_radius_min <= obstacle_radius_max)) {
            throw std::invalid_argument("obstacle radius range invalid");
        }
        if (obstacle_vertices_min < 3 || obstacle_vertices_max < obstacle_vertices_min) {
            throw std::invalid_argument("obstacle vertex range invalid");
        }
        if (!(enemy_speed > 0.0 && agent_max_speed > 0.0 && collision_radius > 0.0 && subgoal_radius > 0.0 &&
              goal_radius > 0.0 && fov_range > 0.0 && ring_range > 0.0 && enemy_repulsion_radius > 0.0)) {
            throw std::invalid_argument("radii and speeds must be positive");
        }
        if (!bounds.contains(goal) || !bounds.contains(agent_start)) {
            throw std::invalid_argument("goal and start must be inside bounds");
        }
        if (max_episode_steps <= 0) {
            throw std::invalid_argument("max_episode_steps must be positive");
        }
        FovSector{{}, 0.0, fov_aperture, fov_range, ring_range}.validate();
    }
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(WorldConfig, bounds, n_obstacles, obstacle_radius_min,
                                                obstacle_radius_max, obstacle_vertices_min, obstacle_vertices_max,
                                                spawn_clearance, n_enemies, enemy_speed, enemy_heading_noise,
                                                enemy_repulsion_radius, enemy_spawn_clearance, fov_aperture,
                                                fov_range, ring_range, agent_max_speed, goal, agent_start,
                                                max_episode_steps, collision_radius, subgoal_radius, goal_radius, seed)

struct RewardWeights {
    double w_progress = 1.0;
    double w_exposure = 0.5;
    double w_collision = 5.0;
    double w_time = 0.01;
    double b_subgoal = 1.0;
    double b_goal = 50.0;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RewardWeights, w_progress, w_exposure, w_collision, w_time, b_subgoal,
                                                b_goal)

struct ControllerWeights {
    double w_d = 1.0;
    double w_o = 1.5;
    double w_e = 1.2;
    double w_a = 1.5;
    double w_s = 0.3;
    double beta = 0.6;
    double v_max = 0.5;
    /// Speed (m/step) per unit of dimensionless force before smoothing.
    double force_scale = 1.0;
    double obstacle_rho = 1.5;
    double enemy_rho = 3.0;
    int horizon = 10;
    /// Enemy steps ahead at which fields of view are predicted.
    int anticipation_steps = 1;
    /// Distance outside a predicted field of view at which repulsion starts.
    double anticipation_margin = 1.0;
    double escape_search_radius = 4.0;
    int escape_directions = 32;
    double escape_radial_step = 0.25;
    /// Probe length used to verify an escape direction does not add observers.
    double escape_probe_step = 0.05;
    /// Shrink commands whose next position would breach the collision radius plus this margin.
    bool step_guard = true;
    double safety_margin = 0.05;

    void validate() const {
        if (w_d < 0 || w_o < 0 || w_e < 0 || w_a < 0 || w_s < 0) {
            throw std::invalid_argument("controller weights must be non-negative");
        }
        if (!(beta >= 0.0 && beta <= 1.0)) {
            throw std::invalid_argument("controller beta must be in [0, 1]");
        }
        if (horizon < 1) {
            throw std::invalid_argument("controller horizon must be >= 1");
        }
        if (!(v_max > 0.0 && force_scale > 0.0 && obstacle_rho > 0.0 && enemy_rho > 0.0)) {
            throw std::invalid_argument("controller speeds and radii must be positive");
        }
    }
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ControllerWeights, w_d, w_o, w_e, w_a, w_s, beta, v_max, force_scale, obstacle_rho,
                                                enemy_rho, horizon, anticipation_steps, anticipation_margin,
                                                escape_search_radius, escape_directions, escape_radial_step,
                                                escape_probe_step, step_guard, safety_margin)

enum class SequenceMode { tile, history };
NLOHMANN_JSON_SERIALIZE_ENUM(SequenceMode, {{SequenceMode::tile, "tile"}, {SequenceMode::history, "history"}})

struct TacticsConfig {
    double dedup_radius = 0.5;
    bool free_space_filter = false;
    SequenceMode sequence_mode = SequenceMode::history;
    /// Divide position-scale feature slots by the bounds diagonal.
    bool normalize_features = false;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TacticsConfig, dedup_radius, free_space_filter, sequence_mode,
                                                normalize_features)

struct NetworkConfig {
    int d_model = 64;
    int heads = 2;
    int layers = 2;
    int d_ff = 128;
    int k = 3;
    std::uint64_t init_seed = 7;
    bool operator==(const NetworkConfig&) const = default;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(NetworkConfig, d_model, heads, layers, d_ff, k, init_seed)

/// Per-environment randomization of map clutter.
struct ScenarioConfig {
    int n_obstacles_min = 6;
    int n_obstacles_max = 12;
    int n_enemies_min = 3;
    int n_enemies_max = 5;
    /// Reuse one layout (env index 0) for every episode.
    bool fixed_layout = false;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ScenarioConfig, n_obstacles_min, n_obstacles_max, n_enemies_min,
                                                n_enemies_max, fixed_layout)

struct TrainConfig {
    int episodes = 5000;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double gamma = 0.98;
    double epsilon = 0.1;
    int checkpoint_every = 500;
    /// Frozen bootstrap network refreshed every N updates; 0 disables.
    int target_sync_every = 0;
    std::uint64_t seed = 1;
    ScenarioConfig scenario;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, episodes, lr, beta1, beta2, adam_eps, gamma, epsilon,
                                                checkpoint_every, target_sync_every, seed, scenario)

struct EvalConfig {
    int envs = 20;
    int episodes = 10;
    std::uint64_t seed = 1000;
    int workers = 1;
    ScenarioConfig scenario;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EvalConfig, envs, episodes, seed, workers, scenario)

struct BaselineConfig {
    int vfh_bins = 72;
    double vfh_lookahead = 2.0;
    double vfh_probe_distance = 1.0;
    double vfh_exposure_penalty = 1.0;
    double vfh_goal_weight = 1.0;
    int greedy_headings = 36;
    double greedy_safety_distance = 0.5;
    double greedy_clearance_penalty = 10.0;
    double greedy_exposure_penalty = 2.0;
    int dwa_speed_samples = 5;
    int dwa_rate_samples = 11;
    double dwa_max_rate = std::numbers::pi / 4.0;
    int dwa_rollout_steps = 8;
    double dwa_goal_weight = 1.0;
    double dwa_obstacle_weight = 0.2;
    double dwa_exposure_weight = 0.05;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BaselineConfig, vfh_bins, vfh_lookahead, vfh_probe_distance,
                                                vfh_exposure_penalty, vfh_goal_weight, greedy_headings,
                                                greedy_safety_distance, greedy_clearance_penalty,
                                                greedy_exposure_penalty, dwa_speed_samples, dwa_rate_samples,
                                                dwa_max_rate, dwa_rollout_steps, dwa_goal_weight,
                                                dwa_obstacle_weight, dwa_exposure_weight)

struct ProjectionConfig {
    double z_min = 0.1;
    double z_max = 2.0;
    double cluster_eps = 0.4;
    int min_cluster = 5;
    double area_floor = 0.05;
    double cell_size = 0.25;
    int window = 5;
    int t_pers = 3;
    int lidar_rays = 360;
    double lidar_range = 12.0;
    double lidar_noise = 0.02;
    double lidar_dropout = 0.05;
    double dt = 0.1;
    double omega_max = 2.0;
    /// Transient point blobs injected per synthetic frame (clutter).
    int clutter_blobs = 0;
    /// Frames a high-level command is held for.
    int action_hold = 1;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ProjectionConfig, z_min, z_max, cluster_eps, min_cluster, area_floor,
                                                cell_size, window, t_pers, lidar_rays, lidar_range, lidar_noise,
                                                lidar_dropout, clutter_blobs, dt, omega_max, action_hold)

/// Everything a run needs; serialized as the resolved-config dump.
struct HavenConfig {
    WorldConfig world;
    RewardWeights reward;
    ControllerWeights controller;
    TacticsConfig tactics;
    NetworkConfig network;
    TrainConfig train;
    EvalConfig eval;
    BaselineConfig baselines;
    ProjectionConfig projection;

    void validate() const {
        world.validate();
        controller.validate();
        if (std::abs(controller.v_max - world.agent_max_speed) > 1e-12) {
            throw std::invalid_argument("controller.v_max must equal world.agent_max_speed");
        }
        if (network.k < 1 || network.d_model % network.heads != 0) {
            throw std::invalid_argument("network shape invalid");
        }
    }
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(HavenConfig, world, reward, controller, tactics, network, train, eval,
                                                baselines, projection)

[[nodiscard]] inline HavenConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config: " + path);
    }
    HavenConfig cfg = json::parse(in).get<HavenConfig>();
    cfg.validate();
    return cfg;
}

[[nodiscard]] inline std::string dump_config(const HavenConfig& cfg) { return json(cfg).dump(2); }

}  // namespace haven
