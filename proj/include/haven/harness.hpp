#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "haven/baselines.hpp"
#include "haven/config.hpp"
#include "haven/controller.hpp"
#include "haven/dtqn.hpp"
#include "haven/episode.hpp"
#include "haven/rng.hpp"
#include "haven/tactics.hpp"
#include "haven/world.hpp"

namespace haven {

// ---------------------------------------------------------------------------
// Environment sampling
// ---------------------------------------------------------------------------

/// World config of environment `env` under `master`: clutter counts drawn
/// from the scenario ranges, layout seeded by (master, env). A fixed layout
/// keeps the base config (and its seed) for every environment.
[[nodiscard]] inline WorldConfig scenario_world(const WorldConfig& base, const ScenarioConfig& sc,
                                                std::uint64_t master, std::uint64_t env) {
    if (sc.fixed_layout) {
        return base;
    }
    WorldConfig w = base;
    w.seed = derive_seed(master, env, 0);
    Rng r = Rng::stream(w.seed, "scenario");
    w.n_obstacles = static_cast<int>(r.uniform_int(sc.n_obstacles_min, sc.n_obstacles_max));
    w.n_enemies = static_cast<int>(r.uniform_int(sc.n_enemies_min, sc.n_enemies_max));
    return w;
}

/// Environment layout plus the episode's enemy-motion stream.
[[nodiscard]] inline World episode_world(const WorldConfig& base, const ScenarioConfig& sc, std::uint64_t master,
                                         std::uint64_t env, std::uint64_t episode) {
    World w = generate_world(scenario_world(base, sc, master, env));
    reseed_dynamics(w, derive_seed(master, env, episode + 1));
    return w;
}

[[nodiscard]] inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

[[nodiscard]] inline std::uint64_t config_hash(const HavenConfig& cfg) { return fnv1a(json(cfg).dump()); }

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

inline constexpr const char* kTrainCsvSchema = "# haven-train v1";
inline constexpr const char* kTrainCsvHeader = "episode,steps,return,loss_mean,epsilon,success,exposure";

struct TrainRow {
    int episode = 0;
    int steps = 0;
    double ret = 0.0;
    double loss_mean = 0.0;
    double epsilon = 0.0;
    bool success = false;
    int exposure = 0;
    int decisions = 0;
    bool collision = false;
};

struct TrainProgress {
    /// Called after every episode.
    std::function<void(const TrainRow&)> on_episode;
};

struct TrainResult {
    NetworkParams params;
    AdamState adam;
    std::vector<TrainRow> rows;
    int episodes_done = 0;
    bool diverged = false;
    std::string message;
};

namespace detail {

inline std::string format_train_row(const TrainRow& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g,%d,%d", r.episode, r.steps, r.ret, r.loss_mean, r.epsilon,
                  r.success ? 1 : 0, r.exposure);
    return buf;
}

}  // namespace detail

/// Online training of one network: decisions are scored, picked epsilon-greedily,
/// tracked by the controller, and regressed toward the rolled-up TD target.
class Trainer {
public:
    /// Episode index -> world. Empty means sample from the scenario config.
    using WorldSource = std::function<World(int)>;

    explicit Trainer(HavenConfig cfg, WorldSource source = {})
        : cfg_(std::move(cfg)),
          source_(std::move(source)),
          shape_(NetworkShape::from(cfg_.network)),
          params_(NetworkParams::initialized(shape_, cfg_.network.init_seed)),
          target_(params_),
          adam_(AdamState::from(params_, cfg_.train)),
          explore_(Rng::stream(cfg_.train.seed, "exploration")) {
        cfg_.validate();
    }

    [[nodiscard]] const NetworkParams& params() const { return params_; }
    [[nodiscard]] const AdamState& adam() const { return adam_; }
    [[nodiscard]] const HavenConfig& config() const { return cfg_; }

    [[nodiscard]] World training_world(int episode) const {
        if (source_) {
            return source_(episode);
        }
        const auto env = static_cast<std::uint64_t>(cfg_.train.scenario.fixed_layout ? 0 : episode);
        return episode_world(cfg_.world, cfg_.train.scenario, cfg_.train.seed, env, static_cast<std::uint64_t>(episode));
    }

    TrainRow run_episode(int episode) {
        World world = training_world(episode);
        const auto& tc = cfg_.train;
        const bool use_target = tc.target_sync_every > 0;
        std::vector<FeatureVector16> history;
        TrainRow row;
        row.episode = episode;
        row.epsilon = tc.epsilon;
        double loss_sum = 0.0;

        auto cands = candidate_set(world, cfg_.tactics);
        score_candidates(params_, cands, history, cfg_.tactics.sequence_mode);
        int stalled = 0;
        while (!world.done()) {
            const std::size_t idx = select_subgoal(cands, tc.epsilon, explore_);
            const Candidate chosen = cands[idx];
            const ObservationSequence x =
                build_sequence(chosen.features, history, shape_.k, cfg_.tactics.sequence_mode);
            const TrackResult tr = track_subgoal(world, chosen.position, cfg_.controller, cfg_.reward);
            history.push_back(chosen.features);
            stalled = tr.steps_used == 0 ? stalled + 1 : 0;
            if (stalled > static_cast<int>(cands.size())) {
                throw std::logic_error("training: decisions stopped advancing the episode");
            }
            for (std::size_t i = 0; i < tr.flags.size(); ++i) {
                row.ret += tr.rewards[i];
                row.exposure += tr.flags[i].exposed ? 1 : 0;
                row.success = row.success || tr.flags[i].reached_goal;
                row.collision = row.collision || tr.flags[i].collided;
            }
            row.steps += tr.steps_used;

            double target = 0.0;
            std::vector<Candidate> next;
            if (world.terminal) {
                target = td_target(tr.rewards, tc.gamma, true, std::nullopt, tr.steps_used);
            } else {
                next = candidate_set(world, cfg_.tactics);
                if (use_target) {
                    auto boot = next;
                    score_candidates(target_, boot, history, cfg_.tactics.sequence_mode);
                    target = td_target(tr.rewards, tc.gamma, false, max_q(boot), tr.steps_used);
                } else {
                    score_candidates(params_, next, history, cfg_.tactics.sequence_mode);
                    target = td_target(tr.rewards, tc.gamma, false, max_q(next), tr.steps_used);
                }
            }
            loss_sum += train_step(params_, adam_, x, target).loss;
            ++row.decisions;
            ++updates_;
            if (use_target && updates_ % static_cast<std::uint64_t>(tc.target_sync_every) == 0) {
                target_ = params_;
            }
            if (!world.terminal) {
                if (use_target) {
                    score_candidates(params_, next, history, cfg_.tactics.sequence_mode);
                }
                cands = std::move(next);
            }
        }
        row.loss_mean = row.decisions > 0 ? loss_sum / row.decisions : 0.0;
        return row;
    }

private:
    HavenConfig cfg_;
    WorldSource source_;
    NetworkShape shape_;
    NetworkParams params_;
    NetworkParams target_;
    AdamState adam_;
    Rng explore_;
    std::uint64_t updates_ = 0;
};

/// Full training run. With `out_dir`, writes train.csv, config.resolved.json,
/// and checkpoint.bin (every `checkpoint_every` episodes and at the end). On
/// divergence the last good checkpoint is left in place and returned.
inline TrainResult train(const HavenConfig& cfg, const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                         const TrainProgress& progress = {}) {
    Trainer trainer(cfg);
    TrainResult res;
    res.params = trainer.params();
    res.adam = trainer.adam();
    const std::string cfg_json = json(trainer.config()).dump();

    std::ofstream csv;
    std::filesystem::path ckpt_path;
    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        std::ofstream(*out_dir / "config.resolved.json") << dump_config(trainer.config()) << '\n';
        csv.open(*out_dir / "train.csv", std::ios::trunc);
        csv << kTrainCsvSchema << '\n' << kTrainCsvHeader << '\n';
        ckpt_path = *out_dir / "checkpoint.bin";
    }
    auto save = [&](int episode) {
        res.params = trainer.params();
        res.adam = trainer.adam();
        if (out_dir) {
            save_checkpoint({trainer.params(), trainer.adam(), static_cast<std::uint64_t>(episode), cfg_json},
                            ckpt_path.string());
        }
    };

    const int total = std::max(0, cfg.train.episodes);
    if (total == 0) {
        save(0);
        return res;
    }
    for (int e = 0; e < total; ++e) {
        TrainRow row;
        try {
            row = trainer.run_episode(e);
        } catch (const TrainingDiverged& err) {
            res.diverged = true;
            res.message = err.what();
            return res;
        }
        res.rows.push_back(row);
        res.episodes_done = e + 1;
        if (csv.is_open()) {
            csv << detail::format_train_row(row) << '\n';
        }
        if (progress.on_episode) {
            progress.on_episode(row);
        }
        const bool periodic = cfg.train.checkpoint_every > 0 && (e + 1) % cfg.train.checkpoint_every == 0;
        if (periodic || e + 1 == total) {
            save(e + 1);
        }
    }
    return res;
}

[[nodiscard]] inline std::string train_csv(std::span<const TrainRow> rows) {
    std::string s = std::string(kTrainCsvSchema) + "\n" + kTrainCsvHeader + "\n";
    for (const auto& r : rows) {
        s += detail::format_train_row(r) + "\n";
    }
    return s;
}

// ---------------------------------------------------------------------------
// Planners and evaluation
// ---------------------------------------------------------------------------

[[nodiscard]] inline std::unique_ptr<Planner> make_planner(PlannerId id, const HavenConfig& cfg,
                                                           std::shared_ptr<const NetworkParams> params) {
    switch (id) {
        case PlannerId::reactive_pf: return std::make_unique<ReactivePfPlanner>(cfg.controller);
        case PlannerId::vfh: return std::make_unique<VfhPlanner>(cfg.baselines, cfg.controller);
        case PlannerId::greedy: return std::make_unique<GreedyPlanner>(cfg.baselines, cfg.controller);
        case PlannerId::dwa: return std::make_unique<DwaPlanner>(cfg.baselines, cfg.controller);
        case PlannerId::haven:
        case PlannerId::haven_memoryless:
            if (!params) {
                throw std::invalid_argument(std::string(to_string(id)) + " requires a checkpoint");
            }
            if (id == PlannerId::haven_memoryless && params->shape().k != 1) {
                throw std::invalid_argument("haven_memoryless requires a k=1 checkpoint, got k=" +
                                            std::to_string(params->shape().k));
            }
            return std::make_unique<HavenPlanner>(std::move(params), cfg.tactics, cfg.controller, 0.0);
    }
    throw std::invalid_argument("unknown planner");
}

/// Loads a checkpoint and checks it against the run's network config.
[[nodiscard]] inline std::shared_ptr<const NetworkParams> load_network(const std::string& path,
                                                                       const NetworkConfig& expected) {
    Checkpoint ck = load_checkpoint(path);
    require_shape(ck, NetworkShape::from(expected));
    return std::make_shared<const NetworkParams>(std::move(ck.params));
}

struct EvalOptions {
    bool keep_trajectories = true;
    int snapshot_every = 0;
};

/// Every (env, episode) pair of the eval protocol, in that order. Environment
/// and enemy motion depend only on the master seed, never on the planner or
/// the worker count.
[[nodiscard]] inline std::vector<EpisodeRecord> evaluate(const HavenConfig& cfg, PlannerId id,
                                                         std::shared_ptr<const NetworkParams> params,
                                                         const EvalOptions& opts = {}) {
    const auto& ec = cfg.eval;
    const int n_env = std::max(0, ec.envs);
    const int n_ep = std::max(0, ec.episodes);
    const std::size_t total = static_cast<std::size_t>(n_env) * static_cast<std::size_t>(n_ep);
    std::vector<EpisodeRecord> records(total);
    (void)make_planner(id, cfg, params);  // surface configuration errors before spawning workers

    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr failure;
    auto worker = [&] {
        auto planner = make_planner(id, cfg, params);
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= total) {
                return;
            }
            try {
                const int env = static_cast<int>(i / static_cast<std::size_t>(n_ep));
                const int ep = static_cast<int>(i % static_cast<std::size_t>(n_ep));
                World w = episode_world(cfg.world, ec.scenario, ec.seed, static_cast<std::uint64_t>(env),
                                        static_cast<std::uint64_t>(ep));
                EpisodeRecord r = run_episode(std::move(w), *planner, cfg.reward, {opts.snapshot_every});
                r.seed = derive_seed(ec.seed, static_cast<std::uint64_t>(env), static_cast<std::uint64_t>(ep) + 1);
                r.env_index = env;
                r.episode_index = ep;
                if (!opts.keep_trajectories) {
                    r.trajectory.clear();
                    r.rewards.clear();
                    r.snapshots.clear();
                }
                records[i] = std::move(r);
            } catch (...) {
                std::lock_guard lock(err_mu);
                if (!failure) {
                    failure = std::current_exception();
                }
                next.store(total);
                return;
            }
        }
    };
    const int workers = std::max(1, ec.workers);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < workers; ++t) {
            pool.emplace_back(worker);
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
    return records;
}

struct MetricSummary {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double se = std::numeric_limits<double>::quiet_NaN();
    int n = 0;
};

[[nodiscard]] inline MetricSummary summarize(std::span<const double> xs) {
    MetricSummary s;
    s.n = static_cast<int>(xs.size());
    if (xs.empty()) {
        return s;
    }
    double sum = 0.0;
    for (double x : xs) {
        sum += x;
    }
    s.mean = sum / s.n;
    if (s.n > 1) {
        double ss = 0.0;
        for (double x : xs) {
            ss += (x - s.mean) * (x - s.mean);
        }
        s.se = std::sqrt(ss / (s.n - 1) / s.n);
    } else {
        s.se = 0.0;
    }
    return s;
}

/// Aggregates of one planner. Time to goal and path length are averaged over
/// successful episodes only; the rest over every episode.
struct BenchmarkReport {
    PlannerId planner = PlannerId::reactive_pf;
    int episodes = 0;
    MetricSummary success, collision, time_to_goal, path_length, safety_margin, exposure;
    double failure = 0.0;
    std::string config_hash;
    std::uint64_t master_seed = 0;
    std::vector<std::uint64_t> seeds;
};

[[nodiscard]] inline BenchmarkReport aggregate(PlannerId id, std::span<const EpisodeRecord> records,
                                               const HavenConfig& cfg) {
    BenchmarkReport rep;
    rep.planner = id;
    rep.episodes = static_cast<int>(records.size());
    rep.config_hash = hex64(config_hash(cfg));
    rep.master_seed = cfg.eval.seed;
    std::vector<double> succ, coll, ttg, path, margin, expo;
    for (const auto& r : records) {
        rep.seeds.push_back(r.seed);
        succ.push_back(r.metrics.success ? 1.0 : 0.0);
        coll.push_back(r.metrics.collision ? 1.0 : 0.0);
        margin.push_back(r.metrics.safety_margin);
        expo.push_back(static_cast<double>(r.metrics.exposure));
        if (r.metrics.success) {
            ttg.push_back(static_cast<double>(r.metrics.time_to_goal));
            path.push_back(r.metrics.path_length);
        }
    }
    rep.success = summarize(succ);
    rep.collision = summarize(coll);
    rep.time_to_goal = summarize(ttg);
    rep.path_length = summarize(path);
    rep.safety_margin = summarize(margin);
    rep.exposure = summarize(expo);
    rep.failure = rep.episodes > 0 ? 1.0 - rep.success.mean : 0.0;
    return rep;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline constexpr const char* kEpisodeCsvSchema = "# haven-episodes v1";
inline constexpr const char* kEpisodeCsvHeader =
    "planner,env,episode,seed,success,collision,time_to_goal,path_length,safety_margin,exposure,steps";
inline constexpr const char* kAggregateCsvSchema = "# haven-aggregate v1";
inline constexpr const char* kAggregateCsvHeader =
    "planner,episodes,success,success_se,collision,collision_se,time_to_goal,time_to_goal_se,path_length,"
    "path_length_se,safety_margin,safety_margin_se,exposure,exposure_se,config_hash,master_seed";

[[nodiscard]] inline std::string episode_csv_rows(std::span<const EpisodeRecord> records) {
    std::string s;
    char buf[512];
    for (const auto& r : records) {
        const auto& m = r.metrics;
        std::snprintf(buf, sizeof buf, "%s,%d,%d,%llu,%d,%d,%d,%.17g,%.17g,%d,%d\n",
                      std::string(to_string(r.planner)).c_str(), r.env_index, r.episode_index,
                      static_cast<unsigned long long>(r.seed), m.success ? 1 : 0, m.collision ? 1 : 0, m.time_to_goal,
                      m.path_length, m.safety_margin, m.exposure, m.steps);
        s += buf;
    }
    return s;
}

[[nodiscard]] inline std::string aggregate_csv_row(const BenchmarkReport& r) {
    char buf[1024];
    std::snprintf(buf, sizeof buf, "%s,%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%s,%llu\n",
                  std::string(to_string(r.planner)).c_str(), r.episodes, r.success.mean, r.success.se,
                  r.collision.mean, r.collision.se, r.time_to_goal.mean, r.time_to_goal.se, r.path_length.mean,
                  r.path_length.se, r.safety_margin.mean, r.safety_margin.se, r.exposure.mean, r.exposure.se,
                  r.config_hash.c_str(), static_cast<unsigned long long>(r.master_seed));
    return buf;
}

/// Parses per-episode rows back (planner, env, episode, seed, metrics).
[[nodiscard]] inline std::vector<EpisodeRecord> parse_episode_csv(std::istream& in) {
    std::vector<EpisodeRecord> out;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        if (!header) {
            if (line != kEpisodeCsvHeader) {
                throw std::runtime_error("episode csv: unexpected header");
            }
            header = true;
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            f.push_back(cell);
        }
        if (f.size() != 11) {
            throw std::runtime_error("episode csv: expected 11 columns");
        }
        EpisodeRecord r;
        r.planner = parse_planner(f[0]);
        r.env_index = std::stoi(f[1]);
        r.episode_index = std::stoi(f[2]);
        r.seed = std::stoull(f[3]);
        r.metrics.success = f[4] == "1";
        r.metrics.collision = f[5] == "1";
        r.metrics.time_to_goal = std::stoi(f[6]);
        r.metrics.path_length = std::stod(f[7]);
        r.metrics.safety_margin = std::stod(f[8]);
        r.metrics.exposure = std::stoi(f[9]);
        r.metrics.steps = std::stoi(f[10]);
        out.push_back(r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Episode record files
// ---------------------------------------------------------------------------

inline json record_to_json(const EpisodeRecord& r) {
    json traj = json::array();
    for (const auto& s : r.trajectory) {
        traj.push_back({s.position.x, s.position.y, s.flags.exposed ? 1 : 0, s.flags.collided ? 1 : 0,
                        s.flags.reached_subgoal ? 1 : 0, s.flags.reached_goal ? 1 : 0});
    }
    json subs = json::array();
    for (const auto& e : r.subgoals) {
        subs.push_back({{"step", e.step}, {"subgoal", e.subgoal}});
    }
    json snaps = json::array();
    for (const auto& s : r.snapshots) {
        json en = json::array();
        for (const auto& e : s.enemies) {
            en.push_back(enemy_to_json(e));
        }
        snaps.push_back({{"step", s.step}, {"enemies", en}});
    }
    const auto& m = r.metrics;
    return json{{"schema", 1},
                {"planner", std::string(to_string(r.planner))},
                {"seed", r.seed},
                {"env", r.env_index},
                {"episode", r.episode_index},
                {"scene_hash", hex64(r.scene_hash)},
                {"trajectory", traj},
                {"subgoals", subs},
                {"rewards", r.rewards},
                {"snapshots", snaps},
                {"metrics",
                 {{"success", m.success},
                  {"collision", m.collision},
                  {"time_to_goal", m.time_to_goal},
                  {"path_length", m.path_length},
                  {"safety_margin", m.safety_margin},
                  {"exposure", m.exposure},
                  {"steps", m.steps}}}};
}

[[nodiscard]] inline EpisodeRecord record_from_json(const json& j) {
    if (j.value("schema", 0) != 1) {
        throw std::runtime_error("episode record: unsupported schema");
    }
    EpisodeRecord r;
    r.planner = parse_planner(j.at("planner").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.env_index = j.at("env").get<int>();
    r.episode_index = j.at("episode").get<int>();
    r.scene_hash = std::stoull(j.at("scene_hash").get<std::string>(), nullptr, 16);
    for (const auto& s : j.at("trajectory")) {
        TrajectoryStep t;
        t.position = {s.at(0).get<double>(), s.at(1).get<double>()};
        t.flags.exposed = s.at(2).get<int>() != 0;
        t.flags.collided = s.at(3).get<int>() != 0;
        t.flags.reached_subgoal = s.at(4).get<int>() != 0;
        t.flags.reached_goal = s.at(5).get<int>() != 0;
        r.trajectory.push_back(t);
    }
    for (const auto& e : j.at("subgoals")) {
        r.subgoals.push_back({e.at("step").get<int>(), e.at("subgoal").get<Point2>()});
    }
    r.rewards = j.at("rewards").get<std::vector<double>>();
    for (const auto& s : j.at("snapshots")) {
        EnemySnapshot snap;
        snap.step = s.at("step").get<int>();
        for (const auto& e : s.at("enemies")) {
            snap.enemies.push_back(enemy_from_json(e));
        }
        r.snapshots.push_back(std::move(snap));
    }
    const auto& m = j.at("metrics");
    r.metrics.success = m.at("success").get<bool>();
    r.metrics.collision = m.at("collision").get<bool>();
    r.metrics.time_to_goal = m.at("time_to_goal").get<int>();
    r.metrics.path_length = m.at("path_length").get<double>();
    r.metrics.safety_margin = m.at("safety_margin").get<double>();
    r.metrics.exposure = m.at("exposure").get<int>();
    r.metrics.steps = m.at("steps").get<int>();
    return r;
}

// ---------------------------------------------------------------------------
// SVG rendering
// ---------------------------------------------------------------------------

inline constexpr const char* kSafeColor = "#1f77b4";
inline constexpr const char* kExposedColor = "#d62728";

namespace detail {

class SvgCanvas {
public:
    SvgCanvas(const Bounds& b, double scale) : b_(b), scale_(scale) {}

    [[nodiscard]] std::string x(double wx) const { return fmt((wx - b_.x_min) * scale_); }
    [[nodiscard]] std::string y(double wy) const { return fmt((b_.y_max - wy) * scale_); }
    [[nodiscard]] std::string pt(Point2 p) const { return x(p.x) + "," + y(p.y); }
    [[nodiscard]] std::string len(double d) const { return fmt(d * scale_); }
    [[nodiscard]] double width() const { return (b_.x_max - b_.x_min) * scale_; }
    [[nodiscard]] double height() const { return (b_.y_max - b_.y_min) * scale_; }

    static std::string fmt(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        std::string s = buf;
        return s == "-0.00" ? "0.00" : s;
    }

private:
    Bounds b_;
    double scale_;
};

inline std::string fov_path(const SvgCanvas& c, const FovSector& s) {
    const double half = 0.5 * s.aperture;
    const Point2 a = s.apex + unit_from_angle(s.heading - half) * s.range;
    const Point2 b = s.apex + unit_from_angle(s.heading + half) * s.range;
    const int large = s.aperture > std::numbers::pi ? 1 : 0;
    // y axis is flipped, so counter-clockwise in the world is sweep-flag 0
    std::string d = "M " + c.pt(s.apex) + " L " + c.pt(a) + " A " + c.len(s.range) + " " + c.len(s.range) + " 0 " +
                    std::to_string(large) + " 0 " + c.pt(b) + " Z";
    return d;
}

}  // namespace detail

/// Deterministic vector image of one episode over its start scene: bounds,
/// obstacles, enemy fields of view at the stored snapshots (or the start),
/// the trajectory coloured per step by its exposure flag, subgoals, and goal.
[[nodiscard]] inline std::string render_svg(const World& scene, const EpisodeRecord& rec, double scale = 30.0) {
    if (scene_hash(scene) != rec.scene_hash) {
        throw std::invalid_argument("render: record does not belong to this scene");
    }
    const auto& cfg = scene.config;
    detail::SvgCanvas c(cfg.bounds, scale);
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::SvgCanvas::fmt(c.width()) << "\" height=\""
      << detail::SvgCanvas::fmt(c.height()) << "\" viewBox=\"0 0 " << detail::SvgCanvas::fmt(c.width()) << ' '
      << detail::SvgCanvas::fmt(c.height()) << "\">\n";
    o << "<rect id=\"bounds\" x=\"0\" y=\"0\" width=\"" << detail::SvgCanvas::fmt(c.width()) << "\" height=\""
      << detail::SvgCanvas::fmt(c.height()) << "\" fill=\"#ffffff\" stroke=\"#000000\"/>\n";

    std::vector<EnemySnapshot> snaps = rec.snapshots;
    if (snaps.empty()) {
        snaps.push_back({0, scene.enemies});
    }
    o << "<g id=\"fov\">\n";
    for (const auto& s : snaps) {
        for (const auto& e : s.enemies) {
            o << "<path class=\"fov\" data-step=\"" << s.step << "\" d=\"" << detail::fov_path(c, e.sensor)
              << "\" fill=\"#ff7f0e\" fill-opacity=\"0.08\" stroke=\"#ff7f0e\" stroke-opacity=\"0.4\"/>\n";
            o << "<circle class=\"ring\" cx=\"" << c.x(e.position.x) << "\" cy=\"" << c.y(e.position.y) << "\" r=\""
              << c.len(e.sensor.ring_range) << "\" fill=\"#ff7f0e\" fill-opacity=\"0.08\"/>\n";
            o << "<circle class=\"enemy\" cx=\"" << c.x(e.position.x) << "\" cy=\"" << c.y(e.position.y)
              << "\" r=\"4\" fill=\"#ff7f0e\"/>\n";
        }
    }
    o << "</g>\n<g id=\"obstacles\">\n";
    for (const auto& poly : scene.obstacles) {
        o << "<polygon points=\"";
        bool first = true;
        for (Point2 v : poly.vertices()) {
            o << (first ? "" : " ") << c.pt(v);
            first = false;
        }
        o << "\" fill=\"#7f7f7f\" stroke=\"#404040\"/>\n";
    }
    o << "</g>\n<g id=\"trajectory\">\n";
    for (std::size_t i = 1; i < rec.trajectory.size(); ++i) {
        const auto& a = rec.trajectory[i - 1];
        const auto& b = rec.trajectory[i];
        o << "<line class=\"" << (b.flags.exposed ? "exposed" : "safe") << "\" data-step=\"" << i << "\" x1=\""
          << c.x(a.position.x) << "\" y1=\"" << c.y(a.position.y) << "\" x2=\"" << c.x(b.position.x) << "\" y2=\""
          << c.y(b.position.y) << "\" stroke=\"" << (b.flags.exposed ? kExposedColor : kSafeColor)
          << "\" stroke-width=\"2\"/>\n";
    }
    o << "</g>\n<g id=\"subgoals\">\n";
    for (const auto& s : rec.subgoals) {
        o << "<circle class=\"subgoal\" data-step=\"" << s.step << "\" cx=\"" << c.x(s.subgoal.x) << "\" cy=\""
          << c.y(s.subgoal.y) << "\" r=\"3\" fill=\"none\" stroke=\"#9467bd\"/>\n";
    }
    o << "</g>\n";
    o << "<circle id=\"start\" cx=\"" << c.x(cfg.agent_start.x) << "\" cy=\"" << c.y(cfg.agent_start.y)
      << "\" r=\"4\" fill=\"#000000\"/>\n";
    o << "<circle id=\"goal\" cx=\"" << c.x(cfg.goal.x) << "\" cy=\"" << c.y(cfg.goal.y) << "\" r=\""
      << c.len(cfg.goal_radius) << "\" fill=\"#2ca02c\"/>\n";
    o << "</svg>\n";
    return o.str();
}

// ---------------------------------------------------------------------------
// Small file helpers
// ---------------------------------------------------------------------------

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    if (p.has_parent_path()) {
        std::filesystem::create_directories(p.parent_path());
    }
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + p.string());
    }
    out << text;
}

[[nodiscard]] inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + p.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace haven
