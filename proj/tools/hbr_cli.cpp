#include <hbr/experiments.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>

namespace fs = std::filesystem;
using namespace hbr;

namespace {

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c)
{
    cmd->add_option("--config", c.config_path, "INI configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "run a single seed (overrides run.seeds)");
    cmd->add_option("--out", c.out, "output directory (overrides run.out_dir)");
    cmd->add_option("--set", c.overrides, "section.key=value override, repeatable");
}

RunConfig resolve(const Common& c)
{
    RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_config(c.config_path);
    for (const auto& kv : c.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects section.key=value, got '" + kv + "'");
        set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!c.out.empty())
        cfg.out_dir = c.out;
    if (c.seed) {
        cfg.seed = *c.seed;
        cfg.seeds.clear();
    }
    cfg.validate();
    return cfg;
}

/// Runs `body` once per seed. Several seeds get one subdirectory each and a
/// cross-seed aggregate of the returned headline value.
void for_each_seed(const RunConfig& cfg, const std::string& name, const std::string& metric,
    const std::function<double(const RunConfig&, std::uint64_t)>& body)
{
    const auto seeds = cfg.seed_list();
    if (seeds.size() == 1) {
        body(cfg, seeds.front());
        return;
    }
    std::vector<double> values;
    for (auto s : seeds) {
        RunConfig sub = cfg;
        sub.out_dir = cfg.path("seed_" + std::to_string(s));
        values.push_back(body(sub, s));
    }
    fs::create_directories(cfg.out_dir);
    std::ofstream os(cfg.path(name + "_seeds.csv"), std::ios::binary);
    os << std::setprecision(17) << "seed," << metric << '\n';
    for (std::size_t i = 0; i < seeds.size(); ++i)
        os << seeds[i] << ',' << values[i] << '\n';
    const Quartiles q = quartiles(values);
    std::printf("%s over %zu seeds: median %.6g [%.6g; %.6g]\n", metric.c_str(), seeds.size(), q.median, q.q1, q.q3);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Hierarchical behavioral repertoires for drawing robots"};
    app.require_subcommand(1);

    Common ae_opts, layer_opts, lines_opts, transfer_opts, robot_opts, grid_opts, print_opts;

    auto* train_ae = app.add_subcommand("train-ae", "train the digit autoencoder");
    add_common(train_ae, ae_opts);

    auto* train_layer = app.add_subcommand("train-layer", "evolve one layer over the stored lower layers");
    add_common(train_layer, layer_opts);
    int layer_id = 0;
    bool baseline = false;
    train_layer->add_option("layer", layer_id, "layer id")->required()->check(CLI::Range(1, 4));
    train_layer->add_flag("--baseline", baseline, "train the flat counterpart of layer 2, 3 or 4 instead");

    auto* eval_lines = app.add_subcommand("eval-lines", "line accuracy of a layer-2 variant");
    add_common(eval_lines, lines_opts);
    std::string variant;
    eval_lines->add_option("--variant", variant, "stochastic | extended | oracle");

    auto* transfer = app.add_subcommand("transfer", "re-execute layer 3 over an alternative layer 1");
    add_common(transfer, transfer_opts);

    auto* robot_transfer = app.add_subcommand("robot-transfer", "render layer 4 through a second robot");
    add_common(robot_transfer, robot_opts);

    auto* draw = app.add_subcommand("draw-grid", "tile the latent square with the nearest digits");
    add_common(draw, grid_opts);
    std::optional<int> rows, cols;
    draw->add_option("--rows", rows)->check(CLI::PositiveNumber);
    draw->add_option("--cols", cols)->check(CLI::PositiveNumber);

    auto* print = app.add_subcommand("print-config", "print the effective configuration");
    add_common(print, print_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*print) {
            std::cout << dump_config(resolve(print_opts));
        }
        else if (*train_ae) {
            for_each_seed(resolve(ae_opts), "train_ae", "final_mean_error", [](const RunConfig& cfg, std::uint64_t seed) {
                const TrainResult r = cmd_train_ae(cfg, seed);
                const auto& last = r.log.back();
                std::printf("seed %llu: epoch %d mean error %.6g on %zu images\n", static_cast<unsigned long long>(seed), last.epoch,
                    last.mean_error, last.dataset_size);
                return last.mean_error;
            });
        }
        else if (*train_layer) {
            Baseline b = Baseline::None;
            if (baseline) {
                if (layer_id == 1)
                    throw ExperimentError("layer 1 has no baseline");
                b = layer_id == 2 ? Baseline::ExtendedLines : layer_id == 3 ? Baseline::FlatArcs : Baseline::FlatDigits;
            }
            for_each_seed(resolve(layer_opts), "train_layer" + std::to_string(layer_id), "archive_size",
                [&](const RunConfig& cfg, std::uint64_t seed) {
                    const LayerTraining t = cmd_train_layer(cfg, layer_id, seed, b);
                    std::printf("seed %llu: layer %d%s archive of %zu members\n", static_cast<unsigned long long>(seed), layer_id,
                        baseline ? " baseline" : "", t.repertoire.size());
                    return static_cast<double>(t.repertoire.size());
                });
        }
        else if (*eval_lines) {
            RunConfig cfg = resolve(lines_opts);
            if (!variant.empty())
                cfg.eval_lines_variant = variant;
            cfg.validate();
            for_each_seed(cfg, "eval_lines_" + cfg.eval_lines_variant, "median_squared_error",
                [](const RunConfig& c, std::uint64_t seed) {
                    const LineEvalReport r = cmd_eval_lines(c, seed);
                    std::printf("seed %llu: %s (N=%d) repertoire %zu, median squared error %.6g over %zu lines\n",
                        static_cast<unsigned long long>(seed), r.variant.c_str(), r.samples, r.repertoire_size, r.median_squared_error,
                        r.lines.size());
                    return r.median_squared_error;
                });
        }
        else if (*transfer) {
            for_each_seed(resolve(transfer_opts), "transfer", "m3_mean_alternative", [](const RunConfig& cfg, std::uint64_t seed) {
                const TransferReport r = cmd_transfer(cfg, seed);
                std::printf("seed %llu: %zu arcs; M1 median %.6g -> %.6g, mean M2 %.6g -> %.6g, mean M3 %.6g -> %.6g\n",
                    static_cast<unsigned long long>(seed), r.records.size(), r.m1_original.median, r.m1_alternative.median,
                    r.mean_m2_original, r.mean_m2_alternative, r.mean_m3_original, r.mean_m3_alternative);
                return r.mean_m3_alternative;
            });
        }
        else if (*robot_transfer) {
            for_each_seed(resolve(robot_opts), "robot_transfer", "median_image_diff", [](const RunConfig& cfg, std::uint64_t seed) {
                const RobotTransferReport r = cmd_robot_transfer(cfg, seed);
                std::printf("seed %llu: %zu digits, image diff median %.4f%% [min %.4f%%; max %.4f%%]\n",
                    static_cast<unsigned long long>(seed), r.diffs.size(), 100 * r.summary.median, 100 * r.summary.min,
                    100 * r.summary.max);
                return r.summary.median;
            });
        }
        else if (*draw) {
            RunConfig cfg = resolve(grid_opts);
            if (rows)
                cfg.grid_rows = *rows;
            if (cols)
                cfg.grid_cols = *cols;
            const GrayImage sheet = cmd_draw_grid(cfg);
            std::printf("wrote %s (%dx%d)\n", cfg.path("digit_grid.pgm").c_str(), sheet.width, sheet.height);
        }
    }
    catch (const DependencyError& e) {
        std::cerr << "dependency error: " << e.what() << '\n';
        return 3;
    }
    catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }
    catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
