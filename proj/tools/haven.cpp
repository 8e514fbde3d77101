#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "haven/haven.hpp"

namespace fs = std::filesystem;
using namespace haven;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> episodes;
    std::optional<int> envs;
    std::string checkpoint;
    std::string out = "out";
};

HavenConfig resolve(const Common& c) {
    HavenConfig cfg = c.config.empty() ? HavenConfig{} : load_config(c.config);
    cfg.validate();
    return cfg;
}

void dump_resolved(const HavenConfig& cfg, const fs::path& out) {
    write_text(out / "config.resolved.json", dump_config(cfg) + "\n");
}

int cmd_train(const Common& c) {
    HavenConfig cfg = resolve(c);
    if (c.seed) {
        cfg.train.seed = *c.seed;
    }
    if (c.episodes) {
        cfg.train.episodes = *c.episodes;
    }
    const fs::path out(c.out);
    int done = 0;
    const auto res = train(cfg, out, {[&](const TrainRow& r) {
                               ++done;
                               if (done % 100 == 0) {
                                   std::fprintf(stderr, "episode %d  return %.2f  loss %.4f\n", r.episode + 1, r.ret,
                                                r.loss_mean);
                               }
                           }});
    if (res.diverged) {
        std::fprintf(stderr, "training diverged after %d episodes: %s\n", res.episodes_done, res.message.c_str());
        std::fprintf(stderr, "last good checkpoint kept in %s\n", (out / "checkpoint.bin").string().c_str());
        return 2;
    }
    std::printf("trained %d episodes -> %s\n", res.episodes_done, (out / "checkpoint.bin").string().c_str());
    return 0;
}

int cmd_eval(const Common& c, const std::vector<std::string>& planners, bool paper_scale, int workers,
             int keep_records) {
    HavenConfig cfg = resolve(c);
    if (paper_scale) {
        cfg.eval.envs = 100;
        cfg.eval.episodes = 50;
    }
    if (c.seed) {
        cfg.eval.seed = *c.seed;
    }
    if (c.episodes) {
        cfg.eval.episodes = *c.episodes;
    }
    if (c.envs) {
        cfg.eval.envs = *c.envs;
    }
    if (workers > 0) {
        cfg.eval.workers = workers;
    }
    std::vector<PlannerId> ids;
    for (const auto& p : planners) {
        if (p == "all") {
            ids.assign(kAllPlanners.begin(), kAllPlanners.end());
        } else {
            ids.push_back(parse_planner(p));
        }
    }
    std::shared_ptr<const NetworkParams> params;
    if (!c.checkpoint.empty()) {
        params = load_network(c.checkpoint, cfg.network);
    }
    const fs::path out(c.out);
    dump_resolved(cfg, out);
    std::string episodes = std::string(kEpisodeCsvSchema) + "\n" + kEpisodeCsvHeader + "\n";
    std::string aggregate_rows = std::string(kAggregateCsvSchema) + "\n" + kAggregateCsvHeader + "\n";
    for (PlannerId id : ids) {
        if (uses_network(id) && !params) {
            if (planners.size() == 1 && planners[0] != "all") {
                throw std::runtime_error(std::string(to_string(id)) + " needs --checkpoint");
            }
            std::fprintf(stderr, "skipping %s: no --checkpoint\n", std::string(to_string(id)).c_str());
            continue;
        }
        if (id == PlannerId::haven_memoryless && params && params->shape().k != 1) {
            std::fprintf(stderr, "skipping haven_memoryless: checkpoint has k=%d\n", params->shape().k);
            continue;
        }
        if (id == PlannerId::haven && params && params->shape().k == 1 && planners[0] == "all") {
            continue;
        }
        const auto records = evaluate(cfg, id, params, {keep_records > 0, keep_records > 0 ? 25 : 0});
        const auto rep = aggregate(id, records, cfg);
        episodes += episode_csv_rows(records);
        aggregate_rows += aggregate_csv_row(rep);
        std::printf("%-17s success %.3f  collision %.3f  exposure %.2f  time %.1f  path %.2f  margin %.3f\n",
                    std::string(to_string(id)).c_str(), rep.success.mean, rep.collision.mean, rep.exposure.mean,
                    rep.time_to_goal.mean, rep.path_length.mean, rep.safety_margin.mean);
        for (int i = 0; i < keep_records && i < static_cast<int>(records.size()); ++i) {
            const auto& r = records[static_cast<std::size_t>(i)];
            const std::string stem = std::string(to_string(id)) + "_env" + std::to_string(r.env_index) + "_ep" +
                                     std::to_string(r.episode_index);
            World scene = episode_world(cfg.world, cfg.eval.scenario, cfg.eval.seed,
                                        static_cast<std::uint64_t>(r.env_index),
                                        static_cast<std::uint64_t>(r.episode_index));
            write_text(out / "records" / (stem + ".record.json"), record_to_json(r).dump(1) + "\n");
            write_text(out / "records" / (stem + ".scene.json"), world_to_scene(scene).dump(1) + "\n");
        }
    }
    write_text(out / "episodes.csv", episodes);
    write_text(out / "aggregate.csv", aggregate_rows);
    return 0;
}

int cmd_render(const std::string& record_path, const std::string& scene_path, const std::string& out) {
    const EpisodeRecord rec = record_from_json(json::parse(read_text(record_path)));
    const World scene = world_from_scene(json::parse(read_text(scene_path)));
    write_text(out, render_svg(scene, rec));
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

int cmd_gen_env(const Common& c) {
    HavenConfig cfg = resolve(c);
    if (c.seed) {
        cfg.eval.seed = *c.seed;
    }
    if (c.envs) {
        cfg.eval.envs = *c.envs;
    }
    const fs::path out(c.out);
    dump_resolved(cfg, out);
    for (int e = 0; e < cfg.eval.envs; ++e) {
        World w = episode_world(cfg.world, cfg.eval.scenario, cfg.eval.seed, static_cast<std::uint64_t>(e), 0);
        write_text(out / ("env_" + std::to_string(e) + ".scene.json"), world_to_scene(w).dump(1) + "\n");
    }
    std::printf("wrote %d scenes to %s\n", cfg.eval.envs, out.string().c_str());
    return 0;
}

int cmd_project(const Common& c, const std::string& frames_path, int n_frames) {
    HavenConfig cfg = resolve(c);
    if (c.seed) {
        cfg.eval.seed = *c.seed;
    }
    if (c.checkpoint.empty()) {
        throw std::runtime_error("project needs --checkpoint");
    }
    const auto params = load_network(c.checkpoint, cfg.network);
    const fs::path out(c.out);
    dump_resolved(cfg, out);
    World truth = episode_world(cfg.world, cfg.eval.scenario, cfg.eval.seed, 0, 0);

    std::vector<PointCloud> frames;
    if (!frames_path.empty()) {
        std::ifstream in(frames_path);
        if (!in) {
            throw std::runtime_error("cannot open frames: " + frames_path);
        }
        frames = read_frames(in);
    } else {
        Rng rng = Rng::stream(cfg.eval.seed, "lidar");
        const auto views = default_viewpoints(truth.config.bounds, truth.obstacles);
        for (int f = 0; f < n_frames; ++f) {
            frames.push_back(synthetic_lidar_frame(truth.obstacles, views, cfg.projection, rng,
                                                   static_cast<std::uint64_t>(f), truth.config.bounds));
        }
        std::ofstream fo(out / "frames.txt");
        write_frames(fo, frames);
    }
    const auto enemies = simulate_enemy_states(truth, static_cast<int>(frames.size()));
    const auto run = run_projected_pipeline(frames, enemies, cfg, params);

    std::string csv = "# haven-projected v1\nframe,x,y,heading,v,omega,extracted,kept,candidates,exposed,collided\n";
    for (std::size_t f = 0; f < run.frames.size(); ++f) {
        const auto& fr = run.frames[f];
        int unmasked = 0;
        for (const auto& cnd : fr.candidates) {
            unmasked += cnd.masked ? 0 : 1;
        }
        char buf[256];
        std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%zu,%zu,%d,%d,%d\n", f, fr.position.x,
                      fr.position.y, fr.heading, fr.command.v, fr.command.omega, fr.extracted.size(), fr.kept.size(),
                      unmasked, fr.flags.exposed ? 1 : 0, fr.flags.collided ? 1 : 0);
        csv += buf;
    }
    write_text(out / "projected.csv", csv);
    const auto& m = run.record.metrics;
    std::printf("projected run: %d frames, success %d, collision %d, exposure %d\n", m.steps, m.success ? 1 : 0,
                m.collision ? 1 : 0, m.exposure);
    return 0;
}

void add_common(CLI::App* app, Common& c, bool with_checkpoint) {
    app->add_option("--config", c.config, "JSON config (missing keys take defaults)");
    app->add_option("--seed", c.seed, "master seed");
    app->add_option("--episodes", c.episodes, "episode budget (train) or episodes per environment (eval)");
    app->add_option("--envs", c.envs, "number of environments");
    app->add_option("--out", c.out, "output directory");
    if (with_checkpoint) {
        app->add_option("--checkpoint", c.checkpoint, "trained network checkpoint");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"haven: adversary-aware navigation simulator, trainer and benchmark"};
    app.require_subcommand(1);

    Common train_opts, eval_opts, gen_opts, proj_opts;
    auto* train_cmd = app.add_subcommand("train", "train a subgoal network");
    add_common(train_cmd, train_opts, false);

    auto* eval_cmd = app.add_subcommand("eval", "benchmark planners on paired environments");
    add_common(eval_cmd, eval_opts, true);
    std::vector<std::string> planners{"all"};
    bool paper_scale = false;
    int workers = 0;
    int keep_records = 0;
    eval_cmd->add_option("--planner", planners, "planner id(s) or 'all'");
    eval_cmd->add_flag("--paper-scale", paper_scale, "100 environments x 50 episodes");
    eval_cmd->add_option("--workers", workers, "worker threads");
    eval_cmd->add_option("--records", keep_records, "write record and scene files for the first N episodes");

    auto* render_cmd = app.add_subcommand("render", "render an episode record as SVG");
    std::string record_path, scene_path, svg_out = "episode.svg";
    render_cmd->add_option("--record", record_path, "episode record JSON")->required();
    render_cmd->add_option("--scene", scene_path, "matching scene JSON")->required();
    render_cmd->add_option("--out", svg_out, "output SVG path");

    auto* gen_cmd = app.add_subcommand("gen-env", "write environment scene files");
    add_common(gen_cmd, gen_opts, false);

    auto* proj_cmd = app.add_subcommand("project", "run the point-cloud projection pipeline");
    add_common(proj_cmd, proj_opts, true);
    std::string frames_path;
    int n_frames = 200;
    proj_cmd->add_option("--frames", frames_path, "point-cloud frames file (synthesized when omitted)");
    proj_cmd->add_option("--n-frames", n_frames, "synthetic frame count");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*train_cmd) {
            return cmd_train(train_opts);
        }
        if (*eval_cmd) {
            return cmd_eval(eval_opts, planners, paper_scale, workers, keep_records);
        }
        if (*render_cmd) {
            return cmd_render(record_path, scene_path, svg_out);
        }
        if (*gen_cmd) {
            return cmd_gen_env(gen_opts);
        }
        if (*proj_cmd) {
            return cmd_project(proj_opts, frames_path, n_frames);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
