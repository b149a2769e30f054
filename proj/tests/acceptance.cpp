// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.

#include <hbr/experiments.hpp>
#include <hbr/idx.hpp>

#include <CLI11.hpp>

#include <Eigen/Geometry>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>

namespace fs = std::filesystem;
using namespace hbr;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void copy_into(const fs::path& from, const fs::path& dir, const std::string& name)
{
    if (fs::exists(from / name) && !fs::exists(dir / name)) {
        fs::create_directories(dir);
        fs::copy_file(from / name, dir / name);
    }
}

// -- criterion 1 ---------------------------------------------------------------

double summed_distance(const std::vector<std::vector<double>>& pts, double x, double y)
{
    double s = 0.0;
    for (const auto& p : pts)
        s += std::hypot(p[0] - x, p[1] - y);
    return s;
}

// Zooming exhaustive grid search; the objective is convex so each window keeps the minimizer.
double grid_minimum(const std::vector<std::vector<double>>& pts)
{
    double lo_x = pts[0][0], hi_x = lo_x, lo_y = pts[0][1], hi_y = lo_y;
    for (const auto& p : pts) {
        lo_x = std::min(lo_x, p[0]);
        hi_x = std::max(hi_x, p[0]);
        lo_y = std::min(lo_y, p[1]);
        hi_y = std::max(hi_y, p[1]);
    }
    double cx = 0.5 * (lo_x + hi_x), cy = 0.5 * (lo_y + hi_y);
    double half = 0.5 * std::max(hi_x - lo_x, hi_y - lo_y) + 1e-9;
    double best = summed_distance(pts, cx, cy);
    constexpr int n = 100;
    while (half > 1e-11) {
        double bx = cx, by = cy;
        for (int i = -n; i <= n; ++i)
            for (int j = -n; j <= n; ++j) {
                const double x = cx + half * i / n, y = cy + half * j / n;
                const double f = summed_distance(pts, x, y);
                if (f < best)
                    best = f, bx = x, by = y;
            }
        cx = bx;
        cy = by;
        half *= 4.0 / n;
    }
    return best;
}

Outcome criterion1()
{
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(101);
    double worst = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < 50; ++t) {
        const int n = 1 + static_cast<int>(rng.below(7));
        std::vector<std::vector<double>> pts;
        for (int i = 0; i < n; ++i)
            pts.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
        const MedianResult m = geometric_median(pts);
        worst = std::max(worst, sum_of_distances(pts, m.point) - grid_minimum(pts));
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-6 && secs < 10.0, fmt("worst summed-distance gap %.3g (<= 1e-6), %.1f s (< 10 s)", worst, secs)};
}

// -- criterion 2 ---------------------------------------------------------------

Outcome criterion2(const RunConfig& base)
{
    const auto t0 = std::chrono::steady_clock::now();
    const Dataset ds = load_idx(base.mnist_images);
    ConvAutoencoder net(base.ae_arch);
    net.init(202);
    const std::vector<const Image28*> batch{&ds.images[0], &ds.images[1]};
    Rng rng(203);
    const GradCheckResult r = grad_check(net, batch, 1e-5, 200, rng);
    const double secs = seconds_since(t0);
    return {r.checked == 200 && r.max_relative_error < 1e-4 && secs < 60.0,
        fmt("max relative error %.3g (< 1e-4) over %zu parameters, %zu probes skipped at kinks, %.1f s (< 60 s)", r.max_relative_error,
            r.checked, r.skipped, secs)};
}

// -- criterion 3 ---------------------------------------------------------------

Outcome criterion3(const RunConfig& base, const fs::path& out)
{
    RunConfig cfg = base;
    cfg.out_dir = out.string();
    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult r = cmd_train_ae(cfg, 0);
    const double secs = seconds_since(t0);
    if (r.log.size() != 30 || r.curriculum.size() != 1)
        return {false, "expected 30 epochs and one curriculum event"};
    const double first = r.log.front().mean_error, last = r.log.back().mean_error;
    const CurriculumEvent& ev = r.curriculum.front();
    const bool ok = last < 0.5 * first && ev.size_after < ev.size_before && ev.mean_after < ev.mean_before && secs < 1800.0;
    return {ok, fmt("epoch-30 error %.5f vs 0.5 x epoch-1 %.5f; curriculum at epoch %d: %zu -> %zu images, mean %.5f -> %.5f; %.0f s (< 1800 s)",
                    last, 0.5 * first, cfg.ae_train.curriculum_epoch, ev.size_before, ev.size_after, ev.mean_before, ev.mean_after, secs)};
}

// -- criterion 4 ---------------------------------------------------------------

Outcome criterion4(const RunConfig& base, const fs::path& out, const std::vector<std::uint64_t>& seeds)
{
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> size_ratio, error_ratio;
    std::string per_seed;
    for (auto seed : seeds) {
        RunConfig cfg = base;
        cfg.out_dir = (out / ("seed_" + std::to_string(seed))).string();
        for (int k = 0; k < 2; ++k)
            cfg.layer[k].generations = 2000;
        cfg.line4d.generations = 2000;
        cfg.samples = 10;
        cfg.eval_lines_count = 1000;
        cfg.eval_lines_variant = "stochastic";
        const LineEvalReport stochastic = cmd_eval_lines(cfg, seed);
        cfg.eval_lines_variant = "extended";
        const LineEvalReport extended = cmd_eval_lines(cfg, seed);
        size_ratio.push_back(static_cast<double>(extended.repertoire_size) / static_cast<double>(stochastic.repertoire_size));
        error_ratio.push_back(stochastic.median_squared_error / extended.median_squared_error);
        per_seed += fmt(" [seed %llu: %zu vs %zu members, error %.3g vs %.3g]", static_cast<unsigned long long>(seed),
            stochastic.repertoire_size, extended.repertoire_size, stochastic.median_squared_error, extended.median_squared_error);
    }
    const double secs = seconds_since(t0);
    const double smallest_size_ratio = *std::min_element(size_ratio.begin(), size_ratio.end());
    const double median_error_ratio = quartiles(error_ratio).median;
    const bool ok = smallest_size_ratio >= 50.0 && median_error_ratio <= 0.66 && secs < 3600.0;
    return {ok, fmt("size ratio >= %.1f on every seed (>= 50), median error ratio %.3f (<= 0.66), %.0f s (< 3600 s);", smallest_size_ratio,
                    median_error_ratio, secs)
                    + per_seed};
}

// -- criterion 5 ---------------------------------------------------------------

RunConfig hierarchy_config(const RunConfig& base, const fs::path& dir)
{
    RunConfig cfg = base;
    cfg.out_dir = dir.string();
    for (int k = 0; k < 3; ++k)
        cfg.layer[k].generations = 3000;
    cfg.flat_arc.generations = 3000;
    return cfg;
}

Outcome criterion5(const RunConfig& base, const fs::path& out, const std::vector<std::uint64_t>& seeds)
{
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> hbr_means, flat_means;
    std::string per_seed;
    for (auto seed : seeds) {
        const RunConfig cfg = hierarchy_config(base, out / ("seed_" + std::to_string(seed)));
        LayerTraining layers[3];
        for (int k = 1; k <= 3; ++k)
            layers[k - 1] = cmd_train_layer(cfg, k, seed);
        const LayerTraining flat = cmd_train_layer(cfg, 3, seed, Baseline::FlatArcs);
        auto mean_fitness = [](const Repertoire& r) {
            double s = 0.0;
            for (const auto& m : r.members())
                s += m.fitness;
            return s / static_cast<double>(r.size());
        };
        hbr_means.push_back(mean_fitness(layers[2].repertoire));
        flat_means.push_back(mean_fitness(flat.repertoire));
        per_seed += fmt(" [seed %llu: %.4g (%zu arcs) vs %.4g (%zu arcs)]", static_cast<unsigned long long>(seed), hbr_means.back(),
            layers[2].repertoire.size(), flat_means.back(), flat.repertoire.size());
    }
    const double secs = seconds_since(t0);
    const double hbr = mean(hbr_means), flat = mean(flat_means);
    const double ratio = flat / hbr;
    const bool ok = hbr < 0.0 && ratio >= 1.5 && secs < 3600.0;
    return {ok, fmt("mean layer-3 fitness %.4g vs flat %.4g, ratio %.2f (>= 1.5), %.0f s (< 3600 s);", hbr, flat, ratio, secs) + per_seed};
}

// -- criterion 6 ---------------------------------------------------------------

Outcome criterion6(const RunConfig& base, const fs::path& out, const fs::path& hierarchy_dir, std::uint64_t seed)
{
    const RunConfig cfg = hierarchy_config(base, out);
    for (int k = 1; k <= 3; ++k)
        copy_into(hierarchy_dir, out, layer_file(k));
    const TransferReport r = cmd_transfer(cfg, seed);
    const double m1_shift = std::abs(r.m1_alternative.median - r.m1_original.median) / r.m1_original.median;
    const bool ok = m1_shift < 0.10 && r.mean_m3_alternative < r.mean_m3_original && r.mean_m2_alternative > r.mean_m2_original;
    return {ok, fmt("%zu arcs; median M1 %.4g -> %.4g (shift %.1f%% < 10%%), mean M3 %.4g -> %.4g (must drop), mean M2 %.4g -> %.4g (must rise)",
                    r.records.size(), r.m1_original.median, r.m1_alternative.median, 100 * m1_shift, r.mean_m3_original,
                    r.mean_m3_alternative, r.mean_m2_original, r.mean_m2_alternative)};
}

// -- criterion 7 ---------------------------------------------------------------

Outcome criterion7(const RunConfig& base, const fs::path& out, const fs::path& hierarchy_dir, const fs::path& ae_dir, std::uint64_t seed)
{
    const RunConfig cfg = hierarchy_config(base, out);
    for (int k = 1; k <= 3; ++k)
        copy_into(hierarchy_dir, out, layer_file(k));
    copy_into(ae_dir, out, kCheckpointFile);
    if (!fs::exists(out / kCheckpointFile))
        cmd_train_ae(cfg, 0);
    const RobotTransferReport r = cmd_robot_transfer(cfg, seed);
    const bool ok = !r.diffs.empty() && r.summary.median < 0.05;
    return {ok, fmt("%zu digits; median image diff %.2f%% (< 5%%), quartiles [%.2f%%; %.2f%%]", r.diffs.size(), 100 * r.summary.median,
                    100 * r.summary.q1, 100 * r.summary.q3)};
}

// -- criterion 8 ---------------------------------------------------------------

class InvariantObserver : public EvolutionObserver {
public:
    std::size_t insertions = 0, spacing_violations = 0, shrinks = 0, bad_rows = 0;
    std::size_t last_size = 0;
    int expected_generation = 1;
    double l = 0.0;

    void on_generation(const GenerationStats& s) override
    {
        if (s.archive_size < last_size)
            ++shrinks;
        if (s.generation != expected_generation++)
            ++bad_rows;
        last_size = s.archive_size;
    }
    void on_attempt(const Archive& archive, const Individual& cand, const AddOutcome& outcome) override
    {
        if (outcome.kind != AddKind::AddedNew)
            return;
        ++insertions;
        const auto x = archive.space().to_archive(cand.descriptor);
        for (std::size_t i = 0; i < archive.size(); ++i)
            if (std::sqrt(squared_distance(x, archive.points().point(i))) < l) {
                ++spacing_violations;
                break;
            }
    }
};

Outcome criterion8(const RunConfig& base)
{
    const PlanarArm arm(base.planar_links, std::vector<JointLimit>(base.planar_links.size(), {-base.planar_joint_limit, base.planar_joint_limit}));
    const Layer1 layer(arm);
    const ArchiveConfig acfg = base.layer[0].archive;
    EvolutionConfig ecfg;
    ecfg.pop_size = base.layer[0].pop_size;
    ecfg.nb_generations = 1000;
    ecfg.rng_seed = 808;

    InvariantObserver obs;
    obs.l = acfg.l;
    const Archive a = run_evolution(layer, acfg, base.variation, ecfg, &obs);
    const Archive b = run_evolution(layer, acfg, base.variation, ecfg);

    std::size_t gene_violations = 0, ledger_violations = 0;
    for (const auto& m : a.members()) {
        for (double g : m.genotype.genes)
            gene_violations += !(g >= 0.0 && g <= 1.0);
        ledger_violations += std::abs(m.curiosity - (1.0 * m.offspring_added - 0.5 * m.offspring_rejected)) > 1e-12;
    }

    bool deterministic = a.size() == b.size();
    for (std::size_t i = 0; deterministic && i < a.size(); ++i)
        deterministic = a.member(i).id == b.member(i).id && a.member(i).genotype == b.member(i).genotype
            && a.member(i).descriptor == b.member(i).descriptor && a.member(i).fitness == b.member(i).fitness
            && a.member(i).curiosity == b.member(i).curiosity;

    // k-nearest mean distance by exhaustive sort.
    Rng rng(809);
    double novelty_gap = 0.0;
    const std::size_t k = static_cast<std::size_t>(acfg.k_novelty);
    for (int q = 0; q < 200; ++q) {
        const std::vector<double> raw{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const auto x = a.space().to_archive(raw);
        std::vector<double> d;
        for (std::size_t i = 0; i < a.size(); ++i)
            d.push_back(std::sqrt(squared_distance(x, a.points().point(i))));
        std::sort(d.begin(), d.end());
        double s = 0.0;
        for (std::size_t i = 0; i < k; ++i)
            s += d[i];
        novelty_gap = std::max(novelty_gap, std::abs(a.novelty(raw, k) - s / static_cast<double>(k)));
    }

    const bool ok = gene_violations == 0 && obs.spacing_violations == 0 && obs.shrinks == 0 && obs.bad_rows == 0
        && obs.expected_generation == 1001 && ledger_violations == 0 && deterministic && novelty_gap < 1e-12;
    return {ok, fmt("%zu members after 1000 generations; gene bound violations %zu, spacing violations %zu of %zu insertions, "
                    "size decreases %zu, ledger mismatches %zu, deterministic %s, novelty gap %.2g",
                    a.size(), gene_violations, obs.spacing_violations, obs.insertions, obs.shrinks, ledger_violations,
                    deterministic ? "yes" : "no", novelty_gap)};
}

// -- criterion 9 ---------------------------------------------------------------

Outcome criterion9(const RunConfig& base)
{
    Rng rng(909);
    const PlanarArm arm;
    double fk_err = 0.0;
    for (int i = 0; i < 100; ++i) {
        std::vector<double> g(8);
        for (auto& x : g)
            x = rng.uniform();
        const JointConfig q = arm.from_genes(g);
        Eigen::Affine2d t = Eigen::Affine2d::Identity();
        for (std::size_t j = 0; j < 8; ++j)
            t = t * Eigen::Rotation2Dd(q[j]) * Eigen::Translation2d(arm.link_lengths()[j], 0.0);
        const Vec2 p = forward_planar(arm, q);
        fk_err = std::max({fk_err, std::abs(p.x - t.translation().x()), std::abs(p.y - t.translation().y())});
    }
    const SpatialArm4 spatial;
    for (int i = 0; i < 100; ++i) {
        std::vector<double> g(4);
        for (auto& x : g)
            x = rng.uniform();
        const JointConfig q = spatial.from_genes(g);
        using Eigen::AngleAxisd;
        const Eigen::Vector3d ex = Eigen::Vector3d::UnitX();
        const Eigen::Vector3d o = AngleAxisd(q[0], Eigen::Vector3d::UnitY())
            * (AngleAxisd(q[1], Eigen::Vector3d::UnitZ())
                * (spatial.upper_arm() * ex + AngleAxisd(q[2], ex) * (AngleAxisd(q[3], Eigen::Vector3d::UnitZ()) * (spatial.forearm() * ex))));
        const Vec3 h = spatial.forward(q);
        fk_err = std::max({fk_err, std::abs(h.x - o.x()), std::abs(h.y - o.y()), std::abs(h.z - o.z())});
    }

    double raster_err = 0.0;
    for (int i = 0; i < 100; ++i) {
        Trajectory t;
        const int n = 2 + static_cast<int>(rng.below(20));
        for (int j = 0; j < n; ++j)
            t.points.push_back({{rng.uniform(-1, 1), rng.uniform(-1, 1)}, {}, j > 0});
        const Image28 a = rasterize(t, StrokeStyle{2.5});
        Trajectory moved = t;
        const double scale = std::exp(rng.uniform(-2, 2));
        const Vec2 offset{rng.uniform(-5, 5), rng.uniform(-5, 5)};
        for (auto& p : moved.points)
            p.position = p.position * scale + offset;
        const Image28 b = rasterize(moved, StrokeStyle{2.5});
        for (std::size_t k = 0; k < kImagePixels; ++k)
            raster_err = std::max(raster_err, std::abs(a.pixels[k] - b.pixels[k]));
    }

    const auto images = read_maybe_gzip(base.mnist_images);
    const auto labels = read_maybe_gzip(base.mnist_labels);
    const IdxHeader hi = parse_idx_header(images, kIdxImagesMagic);
    const IdxHeader hl = parse_idx_header(labels, kIdxLabelsMagic);
    const std::uint8_t canonical[16] = {0, 0, 8, 3, 0, 0, 0xea, 0x60, 0, 0, 0, 28, 0, 0, 0, 28};
    const IdxHeader h60k = parse_idx_header(canonical, kIdxImagesMagic);
    const bool idx_ok = hi.magic == 2051 && hi.dims == std::vector<std::uint32_t>{10000, 28, 28} && hl.magic == 2049
        && hl.dims == std::vector<std::uint32_t>{10000} && h60k.dims == std::vector<std::uint32_t>{60000, 28, 28}
        && load_idx(base.mnist_images, base.mnist_labels).images.size() == 10000;

    const bool ok = fk_err <= 1e-12 && raster_err < 1e-9 && idx_ok;
    return {ok, fmt("kinematics oracle error %.2g (<= 1e-12), raster invariance error %.2g, IDX headers %s", fk_err, raster_err,
                    idx_ok ? "exact" : "WRONG")};
}

// -- criterion 10 --------------------------------------------------------------

Outcome criterion10()
{
    const PlanarArm arm;
    const OraclePointExecutor points;
    const OracleLineExecutor lines(points);
    const ConvAutoencoder ae;
    const std::size_t l1 = Layer1(arm).layout().length(0);
    const std::size_t l2 = Layer2(points, 1).layout().length(0);
    const std::size_t l3 = Layer3(lines, points, 1).layout().length(0);
    const std::size_t flat_arc = FlatArcLayer(arm).layout().length(0);
    const FlatDigitLayer flat_digit(arm, ae);
    const auto fd = flat_digit.layout();
    const bool ok = l1 == 8 && l2 == 2 && l3 == 3 && l1 + l2 + l3 == 13 && flat_arc == 40 && fd.length(fd.min_arity) == 40
        && fd.length(fd.max_arity) == 120;
    return {ok, fmt("hierarchy %zu + %zu + %zu = %zu genes, flat arc %zu, flat digit %zu..%zu", l1, l2, l3, l1 + l2 + l3, flat_arc,
                    fd.length(fd.min_arity), fd.length(fd.max_arity))};
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"acceptance run"};
    std::string out = "acceptance_run";
    std::string config_path;
    std::vector<int> only;
    app.add_option("--out", out, "working directory");
    app.add_option("--config", config_path, "base configuration")->check(CLI::ExistingFile);
    app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',')->check(CLI::Range(1, 10));
    CLI11_PARSE(app, argc, argv);

    const RunConfig base = config_path.empty() ? RunConfig{} : load_config(config_path);
    const fs::path root(out);
    fs::create_directories(root);
    const std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    const fs::path hierarchy_dir = root / "c5" / "seed_0";

    const std::map<int, std::function<Outcome()>> criteria{
        {1, [] { return criterion1(); }},
        {2, [&] { return criterion2(base); }},
        {3, [&] { return criterion3(base, root / "c3"); }},
        {4, [&] { return criterion4(base, root / "c4", seeds); }},
        {5, [&] { return criterion5(base, root / "c5", seeds); }},
        {6, [&] { return criterion6(base, root / "c6", hierarchy_dir, seeds.front()); }},
        {7, [&] { return criterion7(base, root / "c7", hierarchy_dir, root / "c3", seeds.front()); }},
        {8, [&] { return criterion8(base); }},
        {9, [&] { return criterion9(base); }},
        {10, [] { return criterion10(); }},
    };
    const std::set<int> selected(only.begin(), only.end());

    std::ofstream summary(root / "acceptance.txt");
    int failures = 0;
    for (const auto& [id, run] : criteria) {
        if (!selected.empty() && !selected.count(id))
            continue;
        Outcome o;
        try {
            o = run();
        }
        catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failures += !o.pass;
        const std::string line = fmt("%s criterion %d: ", o.pass ? "PASS" : "FAIL", id) + o.detail;
        std::printf("%s\n", line.c_str());
        std::fflush(stdout);
        summary << line << '\n';
        summary.flush();
    }
    return failures == 0 ? 0 : 1;
}
