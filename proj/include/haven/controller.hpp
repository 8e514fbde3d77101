#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "haven/config.hpp"
#include "haven/geometry.hpp"
#include "haven/world.hpp"

namespace haven {

struct ForceBreakdown {
    Vec2 f_des, f_obs, f_enemy, f_ant, f_esc, f_total;
};

[[nodiscard]] inline Vec2 compose_forces(const ForceBreakdown& f, const ControllerWeights& w) {
    return w.w_d * f.f_des + w.w_o * f.f_obs + w.w_e * f.f_enemy + w.w_a * f.f_ant + w.w_s * f.f_esc;
}

/// Every enemy's field of view advanced `steps` enemy steps along its current heading.
[[nodiscard]] inline std::vector<FovSector> predict_fovs(const World& world, int steps) {
    std::vector<FovSector> out;
    out.reserve(world.enemies.size());
    for (const auto& e : world.enemies) {
        FovSector s = e.sensor;
        s.apex = e.position + unit_from_angle(e.heading) * (e.speed * steps);
        out.push_back(s);
    }
    return out;
}

/// Where `p` sits relative to the sector-plus-ring footprint: `inside`, and the
/// nearest point on the footprint boundary (the exit point when inside).
struct FootprintContact {
    bool inside = false;
    Point2 nearest;
    double distance = 0.0;
};

[[nodiscard]] inline FootprintContact footprint_contact(Point2 p, const FovSector& s) {
    const Vec2 rel = p - s.apex;
    const double r = rel.norm();
    const Vec2 radial = r > 1e-12 ? rel / r : unit_from_angle(s.heading);
    const double bearing = std::atan2(rel.y, rel.x);
    const double off = std::abs(wrap_angle(bearing - s.heading));
    const double half = 0.5 * s.aperture;
    const bool full_circle = s.aperture >= 2.0 * std::numbers::pi - 1e-12;
    const bool in_wedge_angle = full_circle || off <= half;
    const bool in_wedge = in_wedge_angle && r <= s.range;
    const bool in_ring = r <= s.ring_range;

    FootprintContact c;
    if (in_ring || in_wedge) {
        c.inside = true;
        if (in_ring) {
            // Radial exit; out of the ring and, if in the wedge, out of range too.
            const double exit_r = in_wedge_angle ? s.range : s.ring_range;
            c.nearest = s.apex + radial * exit_r;
            c.distance = exit_r - r;
            return c;
        }
        c.nearest = s.apex + radial * s.range;
        c.distance = s.range - r;
        if (!full_circle) {
            for (double side : {-1.0, 1.0}) {
                const Point2 tip = s.apex + unit_from_angle(s.heading + side * half) * s.range;
                const auto proj = project_to_segment(p, s.apex, tip);
                // Lateral exit only counts if it also clears the ring.
                if (proj.distance < c.distance && distance(proj.point, s.apex) > s.ring_range) {
                    c.nearest = proj.point;
                    c.distance = proj.distance;
                }
            }
        }
        return c;
    }

    c.inside = false;
    c.nearest = s.apex + radial * s.ring_range;
    c.distance = r - s.ring_range;
    if (in_wedge_angle) {
        if (r - s.range < c.distance) {
            c.nearest = s.apex + radial * s.range;
            c.distance = r - s.range;
        }
    } else {
        for (double side : {-1.0, 1.0}) {
            const Point2 tip = s.apex + unit_from_angle(s.heading + side * half) * s.range;
            const auto proj = project_to_segment(p, s.apex, tip);
            if (proj.distance < c.distance) {
                c.nearest = proj.point;
                c.distance = proj.distance;
            }
        }
    }
    return c;
}

/// Inverse-distance repulsion magnitude (1/d - 1/rho), zero beyond rho.
[[nodiscard]] inline double repulsion_gain(double d, double rho) {
    constexpr double kMinDistance = 0.05;
    if (d >= rho) {
        return 0.0;
    }
    d = std::max(d, kMinDistance);
    return 1.0 / d - 1.0 / rho;
}

/// Workspace walls and obstacles.
[[nodiscard]] inline Vec2 obstacle_force(const World& world, Point2 p, double rho) {
    Vec2 f;
    for (const auto& o : world.obstacles) {
        if (point_in_polygon(p, o)) {
            f += (p - o.centroid()).normalized() * repulsion_gain(0.0, rho);
            continue;
        }
        const auto near = closest_boundary_point(p, o);
        if (near.distance < rho) {
            f += (p - near.point) / near.distance * repulsion_gain(near.distance, rho);
        }
    }
    const Bounds& b = world.config.bounds;
    f.x += repulsion_gain(p.x - b.x_min, rho) - repulsion_gain(b.x_max - p.x, rho);
    f.y += repulsion_gain(p.y - b.y_min, rho) - repulsion_gain(b.y_max - p.y, rho);
    return f;
}

[[nodiscard]] inline Vec2 enemy_force(const World& world, Point2 p, double rho) {
    Vec2 f;
    for (const auto& e : world.enemies) {
        const Vec2 rel = p - e.position;
        const double d = rel.norm();
        if (d < rho && d > 1e-12) {
            f += rel / d * repulsion_gain(d, rho);
        }
    }
    return f;
}

/// Push out of (or away from the edge of) predicted footprints that have a
/// clear line of sight to the agent. Unit strength inside, fading linearly
/// to zero at `margin` outside.
[[nodiscard]] inline Vec2 anticipation_force(const World& world, Point2 p, std::span<const FovSector> predicted,
                                             double margin) {
    Vec2 f;
    for (const auto& s : predicted) {
        if (!segment_clear(s.apex, p, world.obstacles)) {
            continue;
        }
        const auto c = footprint_contact(p, s);
        if (c.inside) {
            f += (c.nearest - p).normalized();
        } else if (c.distance < margin && c.distance > 1e-12) {
            f += (p - c.nearest) / c.distance * ((margin - c.distance) / margin);
        }
    }
    return f;
}

/// Unit direction toward the nearest reachable point hidden from every enemy,
/// searched along evenly spaced rays. A direction is only accepted if a probe
/// step along it does not add observers. Zero when unobserved or no
/// direction qualifies.
[[nodiscard]] inline Vec2 escape_force(const World& world, Point2 p, const ControllerWeights& w) {
    const int observers = count_observers(p, world.enemies, world.obstacles);
    if (observers == 0) {
        return {};
    }
    struct Option {
        double radius;
        int index;
        Vec2 dir;
    };
    std::vector<Option> options;
    const int n = std::max(1, w.escape_directions);
    for (int i = 0; i < n; ++i) {
        const Vec2 dir = unit_from_angle(2.0 * std::numbers::pi * i / n);
        for (double r = w.escape_radial_step; r <= w.escape_search_radius + 1e-12; r += w.escape_radial_step) {
            const Point2 q = p + dir * r;
            if (!world.config.bounds.contains(q) || clearance(q, world.obstacles) < world.config.collision_radius) {
                break;
            }
            if (!agent_exposed(q, world.enemies, world.obstacles)) {
                options.push_back({r, i, dir});
                break;
            }
        }
    }
    std::sort(options.begin(), options.end(), [](const Option& a, const Option& b) {
        return a.radius < b.radius || (a.radius == b.radius && a.index < b.index);
    });
    for (const auto& o : options) {
        if (count_observers(p + o.dir * w.escape_probe_step, world.enemies, world.obstacles) <= observers) {
            return o.dir;
        }
    }
    return {};
}

[[nodiscard]] inline ForceBreakdown compute_forces(const World& world, Point2 subgoal, const ControllerWeights& w,
                                                   std::span<const FovSector> predicted_fovs) {
    ForceBreakdown f;
    const Point2 p = world.agent.position;
    const Vec2 to_goal = subgoal - p;
    if (to_goal.norm() > world.config.subgoal_radius) {
        f.f_des = to_goal.normalized();
    }
    if (w.w_o != 0.0) {
        f.f_obs = obstacle_force(world, p, w.obstacle_rho);
    }
    if (w.w_e != 0.0) {
        f.f_enemy = enemy_force(world, p, w.enemy_rho);
    }
    if (w.w_a != 0.0) {
        f.f_ant = anticipation_force(world, p, predicted_fovs, w.anticipation_margin);
    }
    if (w.w_s != 0.0) {
        f.f_esc = escape_force(world, p, w);
    }
    f.f_total = compose_forces(f, w);
    return f;
}

[[nodiscard]] inline ForceBreakdown compute_forces(const World& world, Point2 subgoal, const ControllerWeights& w) {
    const auto predicted = predict_fovs(world, w.anticipation_steps);
    return compute_forces(world, subgoal, w, predicted);
}

/// u = beta v_prev + (1 - beta) f, rescaled to v_max when faster.
[[nodiscard]] inline Vec2 smooth_and_saturate(Vec2 v_prev, Vec2 f_total, const ControllerWeights& w) {
    Vec2 u = w.beta * v_prev + (1.0 - w.beta) * f_total;
    const double n = u.norm();
    if (n > w.v_max) {
        u = u * (w.v_max / n);
    }
    return u;
}

/// Forces are dimensionless; one unit of force maps to `force_scale` m/step.
[[nodiscard]] inline Vec2 force_to_velocity(Vec2 f_total, const ControllerWeights& w) { return f_total * w.force_scale; }

/// Removes the part of `u` heading into the nearest obstacle or wall.
[[nodiscard]] inline Vec2 slide_along_contact(const World& world, Vec2 u) {
    const Point2 p = world.agent.position;
    double best = std::numeric_limits<double>::infinity();
    Vec2 normal;
    for (const auto& o : world.obstacles) {
        const auto near = closest_boundary_point(p, o);
        if (near.distance < best && near.distance > 1e-12) {
            best = near.distance;
            normal = (p - near.point) / near.distance;
        }
    }
    const Bounds& b = world.config.bounds;
    const std::pair<double, Vec2> walls[] = {{p.x - b.x_min, {1, 0}},
                                             {b.x_max - p.x, {-1, 0}},
                                             {p.y - b.y_min, {0, 1}},
                                             {b.y_max - p.y, {0, -1}}};
    for (const auto& [d, n] : walls) {
        if (d < best) {
            best = d;
            normal = n;
        }
    }
    const double into = u.dot(normal);
    return into < 0.0 ? u - normal * into : u;
}

/// Keeps the next position `safety_margin` beyond the collision radius and in
/// bounds: first by sliding along the nearest contact, then by halving down
/// to a full stop. A pose that is already unsafe is left alone.
[[nodiscard]] inline Vec2 step_guard(const World& world, Vec2 u, const ControllerWeights& w) {
    if (!w.step_guard) {
        return u;
    }
    const Point2 p = world.agent.position;
    const double need = world.config.collision_radius + w.safety_margin;
    auto safe = [&](Point2 q) { return world.config.bounds.contains(q) && clearance(q, world.obstacles) >= need; };
    if (!safe(p) || safe(p + u)) {
        return u;
    }
    u = slide_along_contact(world, u);
    for (int i = 0; i < 6; ++i) {
        if (safe(p + u)) {
            return u;
        }
        u = u * 0.5;
    }
    return {};
}

/// One low-level velocity command toward `subgoal`.
[[nodiscard]] inline Vec2 controller_command(const World& world, Point2 subgoal, const ControllerWeights& w) {
    const ForceBreakdown f = compute_forces(world, subgoal, w);
    return step_guard(world, smooth_and_saturate(world.agent.velocity, force_to_velocity(f.f_total, w), w), w);
}

struct TrackResult {
    std::vector<StepFlags> flags;
    std::vector<double> rewards;
    std::vector<Point2> positions;
    int steps_used = 0;
};

/// Runs the controller toward `subgoal` until it is reached, the episode
/// ends, or `w.horizon` steps elapse.
inline TrackResult track_subgoal(World& world, Point2 subgoal, const ControllerWeights& w,
                                 const RewardWeights& rw) {
    TrackResult out;
    const double r_sub = world.config.subgoal_radius;
    double prev = distance(world.agent.position, subgoal);
    if (prev <= r_sub) {
        return out;
    }
    while (out.steps_used < w.horizon && !world.done()) {
        const Vec2 cmd = controller_command(world, subgoal, w);
        StepFlags flags = step_agent(world, cmd);
        const double now = distance(world.agent.position, subgoal);
        flags.reached_subgoal = now <= r_sub;
        out.rewards.push_back(reward(prev, now, flags, rw));
        out.flags.push_back(flags);
        out.positions.push_back(world.agent.position);
        ++out.steps_used;
        prev = now;
        if (flags.reached_subgoal || flags.terminal()) {
            break;
        }
    }
    return out;
}

struct UnicycleCommand {
    double v = 0.0;
    double omega = 0.0;
};

/// Speed is the force magnitude; the turn rate closes the wrapped heading error in one dt, clamped.
[[nodiscard]] inline UnicycleCommand unicycle_command(Vec2 f_total, double heading, double dt, double omega_max) {
    if (!(dt > 0.0)) {
        throw std::invalid_argument("unicycle_command: dt must be positive");
    }
    const double v = f_total.norm();
    if (v == 0.0) {
        return {};
    }
    const double theta_f = std::atan2(f_total.y, f_total.x);
    const double delta = wrap_angle(theta_f - heading);
    return {v, std::clamp(delta / dt, -omega_max, omega_max)};
}

}  // namespace haven
