#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "haven/config.hpp"
#include "haven/geometry.hpp"
#include "haven/world.hpp"

namespace haven {

inline constexpr int kFeatureDim = 16;

/// Slot order of the candidate feature vector (also the debug CSV column order).
enum FeatureSlot : int {
    kAgentX = 0,
    kAgentY,
    kAgentVx,
    kAgentVy,
    kGoalDx,
    kGoalDy,
    kGoalDist,
    kCandX,
    kCandY,
    kCandDx,
    kCandDy,
    kCandDist,
    kEnemyCount,
    kEnemyMinDist,
    kVisibleCount,
    kSeenFlag,
};

inline constexpr std::array<const char*, kFeatureDim> kFeatureNames = {
    "x",      "y",      "vx",     "vy",       "goal_dx", "goal_dy",       "d_goal", "cand_x",
    "cand_y", "cand_dx", "cand_dy", "d_cand", "n_enemy", "d_min_enemy", "n_vis",  "seen"};

struct FeatureVector16 {
    std::array<double, kFeatureDim> values{};

    double& operator[](int i) { return values[static_cast<std::size_t>(i)]; }
    double operator[](int i) const { return values[static_cast<std::size_t>(i)]; }
    bool operator==(const FeatureVector16&) const = default;
};

enum class CandidateSource { obstacle_centroid, goal };

struct Candidate {
    Point2 position;
    CandidateSource source = CandidateSource::goal;
    /// Index into World::obstacles for centroid candidates, -1 for the goal.
    int obstacle_index = -1;
    bool masked = false;
    FeatureVector16 features;
    std::optional<double> q_value;
};

/// k x 16 row-major observation matrix.
class ObservationSequence {
public:
    explicit ObservationSequence(int k) : k_(k), data_(static_cast<std::size_t>(k) * kFeatureDim, 0.0) {
        if (k < 1) {
            throw std::invalid_argument("observation sequence needs k >= 1");
        }
    }

    [[nodiscard]] int rows() const { return k_; }
    [[nodiscard]] std::span<double> row(int i) {
        return {data_.data() + static_cast<std::size_t>(i) * kFeatureDim, kFeatureDim};
    }
    [[nodiscard]] std::span<const double> row(int i) const {
        return {data_.data() + static_cast<std::size_t>(i) * kFeatureDim, kFeatureDim};
    }
    [[nodiscard]] std::span<const double> data() const { return data_; }
    [[nodiscard]] std::span<double> data() { return data_; }

    void set_row(int i, const FeatureVector16& f) { std::copy(f.values.begin(), f.values.end(), row(i).begin()); }
    bool operator==(const ObservationSequence&) const = default;

private:
    int k_;
    std::vector<double> data_;
};

/// Position-scale slots divided by the bounds diagonal; velocities, counts, and the flag untouched.
inline void normalize_features(FeatureVector16& f, double scale) {
    for (int slot : {kAgentX, kAgentY, kGoalDx, kGoalDy, kGoalDist, kCandX, kCandY, kCandDx, kCandDy, kCandDist,
                     kEnemyMinDist}) {
        f[slot] /= scale;
    }
}

[[nodiscard]] inline FeatureVector16 encode_features(const World& world, Point2 candidate) {
    FeatureVector16 f;
    const Point2 p = world.agent.position;
    const Point2 goal = world.config.goal;
    f[kAgentX] = p.x;
    f[kAgentY] = p.y;
    f[kAgentVx] = world.agent.velocity.x;
    f[kAgentVy] = world.agent.velocity.y;
    f[kGoalDx] = goal.x - p.x;
    f[kGoalDy] = goal.y - p.y;
    f[kGoalDist] = std::hypot(f[kGoalDx], f[kGoalDy]);
    f[kCandX] = candidate.x;
    f[kCandY] = candidate.y;
    f[kCandDx] = candidate.x - p.x;
    f[kCandDy] = candidate.y - p.y;
    f[kCandDist] = std::hypot(f[kCandDx], f[kCandDy]);
    f[kEnemyCount] = static_cast<double>(world.enemies.size());
    double d_min = world.config.bounds.diagonal();
    int n_vis = 0;
    for (const auto& e : world.enemies) {
        d_min = std::min(d_min, distance(candidate, e.position));
        if (is_visible(candidate, e.sensor, world.obstacles)) {
            ++n_vis;
        }
    }
    f[kEnemyMinDist] = d_min;
    f[kVisibleCount] = static_cast<double>(n_vis);
    f[kSeenFlag] = agent_exposed(p, world.enemies, world.obstacles) ? 1.0 : 0.0;
    return f;
}

/// Goal first, then obstacle centroids in obstacle order. A centroid is
/// masked when it is out of bounds, within `dedup_radius` of an accepted
/// candidate, farther than the goal, inside another obstacle, or already
/// within the subgoal radius of the agent. The goal is never masked here.
[[nodiscard]] inline std::vector<Candidate> generate_candidates(const World& world, const TacticsConfig& tactics) {
    std::vector<Candidate> out;
    out.reserve(world.obstacles.size() + 1);
    const Point2 agent = world.agent.position;
    const double goal_dist = distance(agent, world.config.goal);

    Candidate goal;
    goal.position = world.config.goal;
    goal.source = CandidateSource::goal;
    out.push_back(goal);

    std::vector<Point2> accepted{goal.position};
    for (std::size_t i = 0; i < world.obstacles.size(); ++i) {
        Candidate c;
        c.position = world.obstacles[i].centroid();
        c.source = CandidateSource::obstacle_centroid;
        c.obstacle_index = static_cast<int>(i);
        const bool duplicate = std::any_of(accepted.begin(), accepted.end(),
                                           [&](Point2 a) { return distance(a, c.position) <= tactics.dedup_radius; });
        bool inside_other = false;
        for (std::size_t j = 0; j < world.obstacles.size() && !inside_other; ++j) {
            inside_other = j != i && point_in_polygon(c.position, world.obstacles[j]);
        }
        c.masked = !world.config.bounds.contains(c.position) || duplicate || distance(agent, c.position) > goal_dist ||
                   inside_other || distance(agent, c.position) <= world.config.subgoal_radius;
        if (!c.masked) {
            accepted.push_back(c.position);
        }
        out.push_back(c);
    }

    for (auto& c : out) {
        c.features = encode_features(world, c.position);
        if (world.config.bounds.diagonal() > 0.0 && tactics.normalize_features) {
            normalize_features(c.features, world.config.bounds.diagonal());
        }
    }
    return out;
}

/// Additionally masks candidates inside any enemy's current visibility
/// region. The goal stays unmasked if it would otherwise be the last
/// candidate removed.
inline void free_space_filter(std::vector<Candidate>& candidates, const World& world) {
    std::vector<bool> visible(candidates.size(), false);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        visible[i] = !candidates[i].masked && agent_exposed(candidates[i].position, world.enemies, world.obstacles);
    }
    bool survivor = false;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        survivor = survivor || (!candidates[i].masked && !visible[i]);
    }
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (!visible[i]) {
            continue;
        }
        if (!survivor && candidates[i].source == CandidateSource::goal) {
            continue;
        }
        candidates[i].masked = true;
        candidates[i].q_value.reset();
    }
}

[[nodiscard]] inline std::vector<Candidate> candidate_set(const World& world, const TacticsConfig& tactics) {
    auto c = generate_candidates(world, tactics);
    if (tactics.free_space_filter) {
        free_space_filter(c, world);
    }
    return c;
}

/// Tile mode repeats `features` k times. History mode puts the last k-1
/// entries of `history` (oldest first) before `features`, front-padding by
/// repeating the oldest available row (or `features` when history is empty).
[[nodiscard]] inline ObservationSequence build_sequence(const FeatureVector16& features,
                                                        std::span<const FeatureVector16> history, int k,
                                                        SequenceMode mode) {
    ObservationSequence seq(k);
    if (mode == SequenceMode::tile) {
        for (int r = 0; r < k; ++r) {
            seq.set_row(r, features);
        }
        return seq;
    }
    const int past = k - 1;
    const int available = std::min<int>(past, static_cast<int>(history.size()));
    const std::size_t first = history.size() - static_cast<std::size_t>(available);
    for (int r = 0; r < past; ++r) {
        const int idx = r - (past - available);
        if (available == 0) {
            seq.set_row(r, features);
        } else {
            seq.set_row(r, history[first + static_cast<std::size_t>(std::max(idx, 0))]);
        }
    }
    seq.set_row(k - 1, features);
    return seq;
}

}  // namespace haven
