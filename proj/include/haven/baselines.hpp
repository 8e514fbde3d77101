#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "haven/config.hpp"
#include "haven/controller.hpp"
#include "haven/dtqn.hpp"
#include "haven/tactics.hpp"
#include "haven/world.hpp"

namespace haven {

enum class PlannerId { haven, haven_memoryless, reactive_pf, vfh, greedy, dwa };

inline constexpr std::array<PlannerId, 6> kAllPlanners = {PlannerId::haven,       PlannerId::haven_memoryless,
                                                          PlannerId::reactive_pf, PlannerId::vfh,
                                                          PlannerId::greedy,      PlannerId::dwa};

[[nodiscard]] inline std::string_view to_string(PlannerId id) {
    switch (id) {
        case PlannerId::haven: return "haven";
        case PlannerId::haven_memoryless: return "haven_memoryless";
        case PlannerId::reactive_pf: return "reactive_pf";
        case PlannerId::vfh: return "vfh";
        case PlannerId::greedy: return "greedy";
        case PlannerId::dwa: return "dwa";
    }
    return "unknown";
}

[[nodiscard]] inline PlannerId parse_planner(std::string_view name) {
    for (PlannerId id : kAllPlanners) {
        if (to_string(id) == name) {
            return id;
        }
    }
    throw std::invalid_argument("unknown planner: " + std::string(name));
}

[[nodiscard]] inline bool uses_network(PlannerId id) {
    return id == PlannerId::haven || id == PlannerId::haven_memoryless;
}

/// The only view of the world a planner gets: its own state, the goal, the
/// obstacle map, and visibility queries against the current enemy sensors.
class SensingFacade {
public:
    explicit SensingFacade(const World& world) : world_(world) {}

    [[nodiscard]] Point2 position() const { return world_.agent.position; }
    [[nodiscard]] Vec2 velocity() const { return world_.agent.velocity; }
    [[nodiscard]] Point2 goal() const { return world_.config.goal; }
    [[nodiscard]] double v_max() const { return world_.config.agent_max_speed; }
    [[nodiscard]] double collision_radius() const { return world_.config.collision_radius; }
    [[nodiscard]] double subgoal_radius() const { return world_.config.subgoal_radius; }
    [[nodiscard]] std::span<const Polygon> obstacles() const { return world_.obstacles; }

    [[nodiscard]] bool in_bounds(Point2 p) const { return world_.config.bounds.contains(p); }
    [[nodiscard]] double clearance_at(Point2 p) const { return clearance(p, world_.obstacles); }
    /// Inside the current union of enemy visibility regions.
    [[nodiscard]] bool exposed_at(Point2 p) const { return agent_exposed(p, world_.enemies, world_.obstacles); }

    [[nodiscard]] ForceBreakdown forces_toward(Point2 subgoal, const ControllerWeights& w) const {
        return compute_forces(world_, subgoal, w);
    }
    [[nodiscard]] Vec2 controller_command(Point2 subgoal, const ControllerWeights& w) const {
        return haven::controller_command(world_, subgoal, w);
    }
    [[nodiscard]] std::vector<Candidate> candidates(const TacticsConfig& t) const { return candidate_set(world_, t); }

private:
    const World& world_;
};

/// Common planner contract used by the shared episode loop.
class Planner {
public:
    virtual ~Planner() = default;
    [[nodiscard]] virtual PlannerId id() const = 0;
    virtual void reset(const World& /*world*/) {}
    /// Velocity command with norm <= v_max.
    [[nodiscard]] virtual Vec2 act(const SensingFacade& sensing) = 0;
    /// Called after every executed step.
    virtual void observe(const SensingFacade& /*sensing*/, const StepFlags& /*flags*/) {}
    [[nodiscard]] virtual std::optional<Point2> current_subgoal() const { return std::nullopt; }
};

// ---------------------------------------------------------------------------
// Reactive potential field
// ---------------------------------------------------------------------------

[[nodiscard]] inline Vec2 reactive_pf_policy(const SensingFacade& s, const ControllerWeights& w) {
    return s.controller_command(s.goal(), w);
}

// ---------------------------------------------------------------------------
// Vector field histogram with exposure penalties
// ---------------------------------------------------------------------------

struct VfhHistogram {
    std::vector<double> headings;
    std::vector<double> free_distance;
    std::vector<double> density;
    std::vector<bool> blocked;
};

/// Polar histogram: per bin, the obstacle-free ray length within the
/// lookahead (clearance above collision radius, inside bounds), its density
/// (L - free) / L, and a triangular smoothing over +-2 neighbours.
[[nodiscard]] inline VfhHistogram vfh_histogram(const SensingFacade& s, const BaselineConfig& cfg) {
    const int bins = std::max(1, cfg.vfh_bins);
    const double look = cfg.vfh_lookahead;
    const double ds = 0.05;
    const Point2 p = s.position();
    const double d_goal = distance(p, s.goal());
    const double need = std::min(look, d_goal);
    VfhHistogram h;
    h.headings.resize(static_cast<std::size_t>(bins));
    h.free_distance.assign(static_cast<std::size_t>(bins), look);
    std::vector<double> raw(static_cast<std::size_t>(bins), 0.0);
    for (int b = 0; b < bins; ++b) {
        const double theta = wrap_angle(2.0 * std::numbers::pi * b / bins);
        h.headings[static_cast<std::size_t>(b)] = theta;
        const Vec2 u = unit_from_angle(theta);
        for (double r = ds; r <= look + 1e-12; r += ds) {
            const Point2 q = p + u * r;
            if (!s.in_bounds(q) || s.clearance_at(q) < s.collision_radius()) {
                h.free_distance[static_cast<std::size_t>(b)] = r - ds;
                break;
            }
        }
        raw[static_cast<std::size_t>(b)] = (look - h.free_distance[static_cast<std::size_t>(b)]) / look;
    }
    h.density.assign(static_cast<std::size_t>(bins), 0.0);
    h.blocked.assign(static_cast<std::size_t>(bins), false);
    for (int b = 0; b < bins; ++b) {
        double acc = 0.0;
        double wsum = 0.0;
        for (int o = -2; o <= 2; ++o) {
            const double wt = 3.0 - std::abs(o);
            acc += wt * raw[static_cast<std::size_t>((b + o + bins) % bins)];
            wsum += wt;
        }
        h.density[static_cast<std::size_t>(b)] = acc / wsum;
        h.blocked[static_cast<std::size_t>(b)] = h.free_distance[static_cast<std::size_t>(b)] < need - 1e-9;
    }
    return h;
}

/// Index of the chosen bin, or nullopt when every bin is blocked.
[[nodiscard]] inline std::optional<int> vfh_choose_bin(const SensingFacade& s, const BaselineConfig& cfg,
                                                       const VfhHistogram& h) {
    const Point2 p = s.position();
    const Vec2 g = s.goal() - p;
    const double goal_bearing = std::atan2(g.y, g.x);
    std::optional<int> best;
    double best_cost = std::numeric_limits<double>::infinity();
    double best_dev = std::numeric_limits<double>::infinity();
    for (int b = 0; b < static_cast<int>(h.headings.size()); ++b) {
        if (h.blocked[static_cast<std::size_t>(b)]) {
            continue;
        }
        const double theta = h.headings[static_cast<std::size_t>(b)];
        const double dev = std::abs(wrap_angle(theta - goal_bearing));
        const bool exposed = s.exposed_at(p + unit_from_angle(theta) * cfg.vfh_probe_distance);
        const double cost = cfg.vfh_goal_weight * dev / std::numbers::pi +
                            (exposed ? cfg.vfh_exposure_penalty : 0.0) + h.density[static_cast<std::size_t>(b)];
        if (cost < best_cost - 1e-12 || (std::abs(cost - best_cost) <= 1e-12 && dev < best_dev)) {
            best = b;
            best_cost = cost;
            best_dev = dev;
        }
    }
    return best;
}

/// Raw (pre-smoothing) VFH command; zero when every bin is blocked.
[[nodiscard]] inline Vec2 vfh_desired(const SensingFacade& s, const BaselineConfig& cfg) {
    const auto h = vfh_histogram(s, cfg);
    const auto bin = vfh_choose_bin(s, cfg, h);
    if (!bin) {
        return {};
    }
    const double d_goal = distance(s.position(), s.goal());
    const double speed = std::min(s.v_max(), d_goal);
    return unit_from_angle(h.headings[static_cast<std::size_t>(*bin)]) * speed;
}

[[nodiscard]] inline Vec2 vfh_policy(const SensingFacade& s, const BaselineConfig& cfg, const ControllerWeights& w) {
    return smooth_and_saturate(s.velocity(), vfh_desired(s, cfg), w);
}

// ---------------------------------------------------------------------------
// Visibility-aware greedy
// ---------------------------------------------------------------------------

/// One-step lookahead over headings offset from the goal bearing
/// (0, +d, -d, +2d, ...), so ties resolve toward the goal.
[[nodiscard]] inline Vec2 greedy_desired(const SensingFacade& s, const BaselineConfig& cfg) {
    const Point2 p = s.position();
    const Vec2 g = s.goal() - p;
    const double goal_bearing = std::atan2(g.y, g.x);
    const double step = std::min(s.v_max(), g.norm());
    const int n = std::max(1, cfg.greedy_headings);
    const double delta = 2.0 * std::numbers::pi / n;
    Vec2 best_cmd;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        const int mag = (i + 1) / 2;
        const double offset = (i % 2 == 1 ? 1.0 : -1.0) * mag * delta;
        const Vec2 cmd = unit_from_angle(goal_bearing + offset) * step;
        const Point2 q = p + cmd;
        const double clear = s.clearance_at(q);
        double cost = distance(q, s.goal());
        cost += cfg.greedy_clearance_penalty * std::max(0.0, cfg.greedy_safety_distance - clear);
        if (s.exposed_at(q)) {
            cost += cfg.greedy_exposure_penalty;
        }
        if (cost < best_cost - 1e-12) {
            best_cost = cost;
            best_cmd = cmd;
        }
    }
    return best_cmd;
}

[[nodiscard]] inline Vec2 greedy_policy(const SensingFacade& s, const BaselineConfig& cfg, const ControllerWeights& w) {
    return smooth_and_saturate(s.velocity(), greedy_desired(s, cfg), w);
}

// ---------------------------------------------------------------------------
// Dynamic window approach
// ---------------------------------------------------------------------------

struct DwaRollout {
    double speed = 0.0;
    double rate = 0.0;
    double cost = std::numeric_limits<double>::infinity();
    bool feasible = false;
};

[[nodiscard]] inline DwaRollout dwa_evaluate(const SensingFacade& s, const BaselineConfig& cfg, double heading,
                                             double speed, double rate) {
    DwaRollout r{speed, rate};
    Point2 q = s.position();
    double theta = heading;
    double min_clear = std::numeric_limits<double>::infinity();
    int exposed = 0;
    for (int t = 0; t < cfg.dwa_rollout_steps; ++t) {
        theta += rate;
        q += unit_from_angle(theta) * speed;
        const double c = s.clearance_at(q);
        if (!s.in_bounds(q) || c < s.collision_radius()) {
            return r;
        }
        min_clear = std::min(min_clear, c);
        exposed += s.exposed_at(q) ? 1 : 0;
    }
    r.feasible = true;
    const double proximity = std::isfinite(min_clear) ? 1.0 / std::max(min_clear, 0.05) : 0.0;
    r.cost = cfg.dwa_goal_weight * distance(q, s.goal()) + cfg.dwa_obstacle_weight * proximity +
             cfg.dwa_exposure_weight * exposed;
    return r;
}

/// Current heading follows the velocity, or the goal bearing when stationary.
[[nodiscard]] inline double dwa_heading(const SensingFacade& s) {
    const Vec2 v = s.velocity();
    if (v.norm() > 1e-9) {
        return std::atan2(v.y, v.x);
    }
    const Vec2 g = s.goal() - s.position();
    return std::atan2(g.y, g.x);
}

/// Grid over speed in [0, v_max] and turn rate in [-max, max]; speeds are
/// tried fastest first and rates straightest first so ties favour fast,
/// straight motion. Zero command when no rollout is feasible.
[[nodiscard]] inline Vec2 dwa_desired(const SensingFacade& s, const BaselineConfig& cfg) {
    const double heading = dwa_heading(s);
    const int ns = std::max(2, cfg.dwa_speed_samples);
    const int nr = std::max(1, cfg.dwa_rate_samples);
    std::vector<double> rates;
    rates.push_back(0.0);
    const int half = nr / 2;
    for (int j = 1; j <= half; ++j) {
        const double w = cfg.dwa_max_rate * j / half;
        rates.push_back(w);
        rates.push_back(-w);
    }
    DwaRollout best;
    for (int i = ns - 1; i >= 0; --i) {
        const double speed = s.v_max() * i / (ns - 1);
        for (double rate : rates) {
            const DwaRollout r = dwa_evaluate(s, cfg, heading, speed, rate);
            if (r.feasible && r.cost < best.cost - 1e-12) {
                best = r;
            }
        }
    }
    if (!best.feasible) {
        return {};
    }
    return unit_from_angle(heading + best.rate) * best.speed;
}

[[nodiscard]] inline Vec2 dwa_policy(const SensingFacade& s, const BaselineConfig& cfg, const ControllerWeights& w) {
    return smooth_and_saturate(s.velocity(), dwa_desired(s, cfg), w);
}

// ---------------------------------------------------------------------------
// Planner wrappers
// ---------------------------------------------------------------------------

class ReactivePfPlanner final : public Planner {
public:
    explicit ReactivePfPlanner(ControllerWeights w) : w_(w) {}
    [[nodiscard]] PlannerId id() const override { return PlannerId::reactive_pf; }
    [[nodiscard]] Vec2 act(const SensingFacade& s) override { return reactive_pf_policy(s, w_); }

private:
    ControllerWeights w_;
};

class VfhPlanner final : public Planner {
public:
    VfhPlanner(BaselineConfig cfg, ControllerWeights w) : cfg_(cfg), w_(w) {}
    [[nodiscard]] PlannerId id() const override { return PlannerId::vfh; }
    [[nodiscard]] Vec2 act(const SensingFacade& s) override { return vfh_policy(s, cfg_, w_); }

private:
    BaselineConfig cfg_;
    ControllerWeights w_;
};

class GreedyPlanner final : public Planner {
public:
    GreedyPlanner(BaselineConfig cfg, ControllerWeights w) : cfg_(cfg), w_(w) {}
    [[nodiscard]] PlannerId id() const override { return PlannerId::greedy; }
    [[nodiscard]] Vec2 act(const SensingFacade& s) override { return greedy_policy(s, cfg_, w_); }

private:
    BaselineConfig cfg_;
    ControllerWeights w_;
};

class DwaPlanner final : public Planner {
public:
    DwaPlanner(BaselineConfig cfg, ControllerWeights w) : cfg_(cfg), w_(w) {}
    [[nodiscard]] PlannerId id() const override { return PlannerId::dwa; }
    [[nodiscard]] Vec2 act(const SensingFacade& s) override { return dwa_policy(s, cfg_, w_); }

private:
    BaselineConfig cfg_;
    ControllerWeights w_;
};

struct SubgoalDecision {
    int step = 0;
    Point2 subgoal;
    std::size_t candidate_index = 0;
    int n_unmasked = 0;
};

/// DTQN subgoal selection over the candidate set with the potential-field
/// controller underneath. A new subgoal is chosen when the previous one is
/// reached or after `horizon` steps.
class HavenPlanner final : public Planner {
public:
    HavenPlanner(std::shared_ptr<const NetworkParams> params, TacticsConfig tactics, ControllerWeights w,
                 double epsilon = 0.0, std::uint64_t explore_seed = 0)
        : params_(std::move(params)),
          tactics_(tactics),
          w_(w),
          epsilon_(epsilon),
          rng_(Rng::stream(explore_seed, "exploration")) {
        if (!params_) {
            throw std::invalid_argument("HavenPlanner: network parameters required");
        }
    }

    [[nodiscard]] PlannerId id() const override {
        return params_->shape().k == 1 ? PlannerId::haven_memoryless : PlannerId::haven;
    }

    void reset(const World& /*world*/) override {
        history_.clear();
        decisions_.clear();
        subgoal_.reset();
        steps_left_ = 0;
        step_ = 0;
    }

    [[nodiscard]] Vec2 act(const SensingFacade& s) override {
        if (!subgoal_ || steps_left_ <= 0) {
            decide(s);
        }
        --steps_left_;
        return s.controller_command(*subgoal_, w_);
    }

    void observe(const SensingFacade& s, const StepFlags& /*flags*/) override {
        ++step_;
        if (subgoal_ && distance(s.position(), *subgoal_) <= s.subgoal_radius()) {
            steps_left_ = 0;
        }
    }

    [[nodiscard]] std::optional<Point2> current_subgoal() const override { return subgoal_; }
    [[nodiscard]] const std::vector<SubgoalDecision>& decisions() const { return decisions_; }

private:
    void decide(const SensingFacade& s) {
        for (int attempt = 0; attempt < 2; ++attempt) {
            auto cands = s.candidates(tactics_);
            const std::size_t idx = select_subgoal(*params_, cands, history_, tactics_.sequence_mode, epsilon_, rng_);
            subgoal_ = cands[idx].position;
            history_.push_back(cands[idx].features);
            int unmasked = 0;
            for (const auto& c : cands) {
                unmasked += c.masked ? 0 : 1;
            }
            decisions_.push_back({step_, *subgoal_, idx, unmasked});
            steps_left_ = w_.horizon;
            if (distance(s.position(), *subgoal_) > s.subgoal_radius()) {
                break;
            }
        }
    }

    std::shared_ptr<const NetworkParams> params_;
    TacticsConfig tactics_;
    ControllerWeights w_;
    double epsilon_;
    Rng rng_;
    std::vector<FeatureVector16> history_;
    std::vector<SubgoalDecision> decisions_;
    std::optional<Point2> subgoal_;
    int steps_left_ = 0;
    int step_ = 0;
};

}  // namespace haven
