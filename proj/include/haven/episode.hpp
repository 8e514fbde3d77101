#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "haven/baselines.hpp"
#include "haven/config.hpp"
#include "haven/world.hpp"

namespace haven {

struct SubgoalEvent {
    int step = 0;
    Point2 subgoal;
    bool operator==(const SubgoalEvent&) const = default;
};

struct EnemySnapshot {
    int step = 0;
    std::vector<Enemy> enemies;
};

struct EpisodeRecord {
    PlannerId planner = PlannerId::reactive_pf;
    std::uint64_t seed = 0;
    int env_index = 0;
    int episode_index = 0;
    /// trajectory[0] is the start pose with empty flags; one entry per executed step after it.
    std::vector<TrajectoryStep> trajectory;
    std::vector<SubgoalEvent> subgoals;
    std::vector<double> rewards;
    std::vector<EnemySnapshot> snapshots;
    MetricsRow metrics;
    /// fnv1a of the start scene, used to pair a record with its scene file.
    std::uint64_t scene_hash = 0;
};

struct RunOptions {
    /// Keep enemy states every N steps for rendering; 0 disables.
    int snapshot_every = 0;
};

[[nodiscard]] inline std::uint64_t scene_hash(const World& w) { return fnv1a(world_to_scene(w).dump()); }

/// The one episode loop every planner runs through.
inline EpisodeRecord run_episode(World world, Planner& planner, const RewardWeights& rw,
                                 const RunOptions& opts = {}) {
    EpisodeRecord rec;
    rec.planner = planner.id();
    rec.scene_hash = scene_hash(world);
    planner.reset(world);
    const double empty_margin = world.config.bounds.diagonal();
    MetricsAccumulator acc(world.agent.position, world.obstacles, empty_margin);
    rec.trajectory.push_back({world.agent.position, {}});
    std::optional<Point2> last_subgoal;
    auto snapshot = [&] {
        if (opts.snapshot_every > 0 && world.step_count % opts.snapshot_every == 0) {
            rec.snapshots.push_back({world.step_count, world.enemies});
        }
    };
    snapshot();
    while (!world.done()) {
        const Vec2 cmd = planner.act(SensingFacade(world));
        if (cmd.norm() > world.config.agent_max_speed * (1.0 + 1e-9)) {
            throw std::logic_error(std::string("planner ") + std::string(to_string(planner.id())) +
                                   " exceeded v_max");
        }
        const std::optional<Point2> sub = planner.current_subgoal();
        if (sub && (!last_subgoal || !(*sub == *last_subgoal))) {
            rec.subgoals.push_back({world.step_count, *sub});
        }
        last_subgoal = sub;
        const Point2 target = sub.value_or(world.config.goal);
        const double before = distance(world.agent.position, target);
        StepFlags flags = step_agent(world, cmd);
        const double after = distance(world.agent.position, target);
        flags.reached_subgoal = after <= world.config.subgoal_radius;
        planner.observe(SensingFacade(world), flags);
        rec.rewards.push_back(reward(before, after, flags, rw));
        rec.trajectory.push_back({world.agent.position, flags});
        acc.add(world.agent.position, flags);
        snapshot();
    }
    rec.metrics = acc.row();
    return rec;
}

}  // namespace haven
