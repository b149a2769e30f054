#include <hbr/experiments.hpp>

#include <hbr/idx.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>

namespace hbr {

namespace fs = std::filesystem;

namespace {
    class StatsRecorder : public EvolutionObserver {
    public:
        explicit StatsRecorder(std::vector<GenerationStats>& out) : _out(out) {}
        void on_generation(const GenerationStats& s) override { _out.push_back(s); }

    private:
        std::vector<GenerationStats>& _out;
    };

    std::ofstream open_out(const RunConfig& cfg, const std::string& file)
    {
        fs::create_directories(cfg.out_dir.empty() ? "." : cfg.out_dir);
        std::ofstream os(cfg.path(file), std::ios::binary);
        if (!os)
            throw ExperimentError("cannot write " + cfg.path(file));
        os << std::setprecision(17);
        return os;
    }

    std::string metrics_file(const std::string& rep_file) { return rep_file.substr(0, rep_file.size() - 4) + "_metrics.csv"; }

    const char* layer_name(int id)
    {
        static const char* names[] = {"", "layer 1", "layer 2", "layer 3", "layer 4"};
        return names[id];
    }

    /// Loads `file` into layer `id` of `h`, or trains and stores it when absent.
    void ensure_layer(Hierarchy& h, int id, const std::string& file, std::uint64_t seed, Layer1Fitness fitness)
    {
        const RunConfig& cfg = h.config();
        const std::string path = cfg.path(file);
        if (fs::exists(path)) {
            h.set(id, read_repertoire(path));
            return;
        }
        const auto def = h.definition(id, fitness);
        LayerTraining t = train_repertoire(id, *def, cfg.layer[id - 1], cfg.variation, seed);
        fs::create_directories(cfg.out_dir.empty() ? "." : cfg.out_dir);
        write_repertoire(path, t.repertoire);
        write_metrics_csv(cfg.path(metrics_file(file)), t.metrics);
        h.set(id, std::move(t.repertoire));
    }

    void ensure_layer(Hierarchy& h, int id, std::uint64_t seed)
    {
        ensure_layer(h, id, layer_file(id), derive_seed(seed, {stream::kLayerBase + static_cast<std::uint64_t>(id)}),
            h.config().layer1_fitness_kind());
    }

    Repertoire load_dependency(const RunConfig& cfg, int id, int needed_by)
    {
        const std::string path = cfg.path(layer_file(id));
        if (!fs::exists(path))
            throw DependencyError(layer_name(id), std::string(layer_name(needed_by)) + " requires the " + layer_name(id) + " repertoire ("
                    + path + "); run train-layer " + std::to_string(id) + " first");
        return read_repertoire(path);
    }

    Image28 render(const Layer4& layer, const Genotype& g, const RasterConfig& raster)
    {
        return rasterize(layer.draw(g), StrokeStyle{layer.width(g)}, raster);
    }

    Layer1Fitness other(Layer1Fitness f)
    {
        return f == Layer1Fitness::JointVariance ? Layer1Fitness::TwoJoints : Layer1Fitness::JointVariance;
    }
} // namespace

std::unique_ptr<Robot> make_robot(const RunConfig& cfg, const std::string& name)
{
    if (name == "planar") {
        std::vector<JointLimit> limits(cfg.planar_links.size(), JointLimit{-cfg.planar_joint_limit, cfg.planar_joint_limit});
        return std::make_unique<PlanarArm>(cfg.planar_links, std::move(limits));
    }
    if (name == "spatial") {
        const SpatialArm4 defaults;
        const auto lim = defaults.limits();
        return std::make_unique<SpatialArm4>(cfg.spatial_upper_arm, cfg.spatial_forearm, std::vector<JointLimit>(lim.begin(), lim.end()),
            SpatialArm4::default_slice(cfg.spatial_upper_arm, cfg.spatial_forearm, cfg.slice_x, cfg.slice_half_thickness));
    }
    throw ConfigError("unknown robot '" + name + "'");
}

EvolutionConfig evolution_config(const LayerRunConfig& layer, std::uint64_t seed)
{
    EvolutionConfig e;
    e.pop_size = layer.pop_size;
    e.nb_generations = layer.generations;
    e.rng_seed = seed;
    return e;
}

Quartiles quartiles(std::vector<double> v)
{
    if (v.empty())
        throw ExperimentError("quartiles of an empty sample");
    std::sort(v.begin(), v.end());
    auto q = [&](double p) {
        const double x = p * static_cast<double>(v.size() - 1);
        const auto i = static_cast<std::size_t>(std::floor(x));
        const double f = x - static_cast<double>(i);
        return i + 1 < v.size() ? v[i] + f * (v[i + 1] - v[i]) : v[i];
    };
    return {q(0.25), q(0.5), q(0.75), v.front(), v.back()};
}

double mean(const std::vector<double>& v)
{
    if (v.empty())
        return 0.0;
    double s = 0.0;
    for (double x : v)
        s += x;
    return s / static_cast<double>(v.size());
}

LayerTraining train_repertoire(int layer_id, const LayerDef& def, const LayerRunConfig& run, const VariationConfig& variation,
    std::uint64_t seed)
{
    LayerTraining t;
    StatsRecorder rec(t.metrics);
    const Archive archive = run_evolution(def, run.archive, variation, evolution_config(run, seed), &rec);
    t.repertoire = Repertoire::from_archive(layer_id, archive);
    return t;
}

void write_metrics_csv(const std::string& path, const std::vector<GenerationStats>& metrics)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw ExperimentError("cannot write " + path);
    CsvMetricsSink sink(os);
    for (const auto& s : metrics)
        sink.on_generation(s);
}

// -- Hierarchy -------------------------------------------------------------------

Hierarchy::Hierarchy(const RunConfig& cfg, std::unique_ptr<Robot> robot) : _cfg(cfg), _robot(std::move(robot)) {}

bool Hierarchy::has(int id) const
{
    return id >= 1 && id <= 4 && _rep[id - 1].has_value();
}

void Hierarchy::require(int id) const
{
    if (!has(id))
        throw DependencyError(layer_name(id), std::string("hierarchy has no ") + layer_name(id));
}

const Repertoire& Hierarchy::layer(int id) const
{
    require(id);
    return *_rep[id - 1];
}

void Hierarchy::set(int id, Repertoire rep)
{
    if (id < 1 || id > 4)
        throw ExperimentError("layer id must be 1..4");
    if (id > 1)
        require(id - 1);
    if (rep.layer_id() != id)
        throw ExperimentError("repertoire of layer " + std::to_string(rep.layer_id()) + " given as " + layer_name(id));
    for (int k = 4; k >= id; --k) {
        if (k == 3)
            _arcs.reset();
        if (k == 2)
            _lines.reset();
        if (k == 1)
            _points.reset();
        _rep[k - 1].reset();
    }
    _rep[id - 1] = std::move(rep);
    const Repertoire& r = *_rep[id - 1];
    if (id == 1)
        _points = std::make_unique<RepertoirePointExecutor>(r, *_robot, _cfg.interp_steps);
    else if (id == 2)
        _lines = std::make_unique<RepertoireLineExecutor>(r, *_points, _cfg.line_spacing);
    else if (id == 3)
        _arcs = std::make_unique<ArcExecutor>(r, *_lines, _cfg.arc_params());
}

const RepertoirePointExecutor& Hierarchy::points() const
{
    require(1);
    return *_points;
}

const RepertoireLineExecutor& Hierarchy::lines() const
{
    require(2);
    return *_lines;
}

const ArcExecutor& Hierarchy::arcs() const
{
    require(3);
    return *_arcs;
}

std::unique_ptr<LayerDef> Hierarchy::definition(int id, Layer1Fitness fitness) const
{
    switch (id) {
    case 1:
        return std::make_unique<Layer1>(*_robot, fitness, _cfg.interp_steps);
    case 2:
        return std::make_unique<Layer2>(points(), _cfg.samples, _cfg.line_params());
    case 3:
        return std::make_unique<Layer3>(lines(), points(), _cfg.samples, _cfg.arc_params());
    case 4:
        return std::make_unique<Layer4>(digit_layer());
    default:
        throw ExperimentError("layer id must be 1..4");
    }
}

Layer4 Hierarchy::digit_layer() const
{
    if (!_ae)
        throw DependencyError("autoencoder", "layer 4 requires a trained autoencoder checkpoint");
    return Layer4(points(), arcs(), *_ae, _cfg.digit);
}

// -- commands ----------------------------------------------------------------------

std::string layer_file(int id)
{
    return "layer" + std::to_string(id) + ".rep";
}

std::string baseline_file(int id)
{
    return "layer" + std::to_string(id) + "_baseline.rep";
}

TrainResult cmd_train_ae(const RunConfig& cfg, std::uint64_t seed)
{
    if (!fs::exists(cfg.mnist_images))
        throw DependencyError("dataset", "image dataset not found: " + cfg.mnist_images);
    if (!cfg.mnist_labels.empty() && !fs::exists(cfg.mnist_labels))
        throw DependencyError("dataset", "label file not found: " + cfg.mnist_labels);
    cfg.ae_train.validate();

    Dataset ds = load_idx(cfg.mnist_images,
        cfg.mnist_labels.empty() ? std::nullopt : std::optional<std::string>(cfg.mnist_labels));
    if (ds.images.size() > cfg.ae_subset)
        ds.images.resize(cfg.ae_subset);

    ConvAutoencoder net(cfg.ae_arch);
    net.init(derive_seed(seed, {stream::kAutoencoderInit}));
    TrainConfig tc = cfg.ae_train;
    tc.rng_seed = derive_seed(seed, {stream::kAutoencoderTrain});
    TrainResult r = train(net, std::move(ds.images), tc);

    auto log = open_out(cfg, "ae_log.csv");
    log << "epoch,dataset_size,mean_error\n";
    for (const auto& e : r.log)
        log << e.epoch << ',' << e.dataset_size << ',' << e.mean_error << '\n';
    if (!r.curriculum.empty()) {
        auto cur = open_out(cfg, "ae_curriculum.csv");
        cur << "size_before,size_after,mean_before,mean_after\n";
        for (const auto& c : r.curriculum)
            cur << c.size_before << ',' << c.size_after << ',' << c.mean_before << ',' << c.mean_after << '\n';
    }
    net.save(cfg.path(kCheckpointFile));
    return r;
}

ConvAutoencoder load_autoencoder(const RunConfig& cfg)
{
    const std::string path = cfg.path(kCheckpointFile);
    if (!fs::exists(path))
        throw DependencyError("autoencoder", "autoencoder checkpoint not found (" + path + "); run train-ae first");
    return ConvAutoencoder::load(path);
}

LayerTraining cmd_train_layer(const RunConfig& cfg, int id, std::uint64_t seed, Baseline baseline)
{
    if (id < 1 || id > 4)
        throw ExperimentError("layer id must be 1..4");
    const bool flat = baseline != Baseline::None;
    if (flat) {
        const int expected = baseline == Baseline::ExtendedLines ? 2 : baseline == Baseline::FlatArcs ? 3 : 4;
        if (expected != id)
            throw ExperimentError("that baseline replaces layer " + std::to_string(expected) + ", not layer " + std::to_string(id));
    }

    Hierarchy h(cfg, make_robot(cfg, cfg.robot));
    const int lower = flat ? (baseline == Baseline::ExtendedLines ? 1 : 0) : id - 1;
    for (int k = 1; k <= lower; ++k)
        h.set(k, load_dependency(cfg, k, id));
    std::optional<ConvAutoencoder> ae;
    if (id == 4) {
        ae = load_autoencoder(cfg);
        h.set_autoencoder(&*ae);
    }

    std::unique_ptr<LayerDef> def;
    const LayerRunConfig* run = &cfg.layer[id - 1];
    std::uint64_t sub = stream::kLayerBase + static_cast<std::uint64_t>(id);
    switch (baseline) {
    case Baseline::None:
        def = h.definition(id);
        break;
    case Baseline::ExtendedLines:
        def = std::make_unique<ExtendedLineLayer>(h.points(), cfg.line_params());
        run = &cfg.line4d;
        sub = stream::kLine4d;
        break;
    case Baseline::FlatArcs:
        def = std::make_unique<FlatArcLayer>(h.robot(), cfg.arc_params(), cfg.interp_steps);
        run = &cfg.flat_arc;
        sub = stream::kFlatArc;
        break;
    case Baseline::FlatDigits:
        def = std::make_unique<FlatDigitLayer>(h.robot(), *ae, cfg.digit, cfg.interp_steps);
        run = &cfg.flat_digit;
        sub = stream::kFlatDigit;
        break;
    }

    LayerTraining t = train_repertoire(id, *def, *run, cfg.variation, derive_seed(seed, {sub}));
    const std::string file = flat ? baseline_file(id) : layer_file(id);
    fs::create_directories(cfg.out_dir.empty() ? "." : cfg.out_dir);
    write_repertoire(cfg.path(file), t.repertoire);
    write_metrics_csv(cfg.path(metrics_file(file)), t.metrics);
    if (!flat) {
        HierarchyBundle b{cfg.robot, {}};
        for (int k = 1; k <= id; ++k)
            b.layers.push_back(layer_file(k));
        write_bundle(cfg.path(kBundleFile), b);
    }
    return t;
}

std::vector<LineCommand> random_lines(const PointExecutor& points, int count, double max_length, std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<LineCommand> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        ExecState s = points.random_start(rng);
        const double theta = rng.uniform(-std::numbers::pi, std::numbers::pi);
        const double len = rng.uniform(0.0, max_length);
        out.push_back({std::move(s), {len * std::cos(theta), len * std::sin(theta)}});
    }
    return out;
}

LineEvalReport cmd_eval_lines(const RunConfig& cfg, std::uint64_t seed)
{
    LineEvalReport rep;
    rep.variant = cfg.eval_lines_variant;
    rep.samples = cfg.samples;
    const std::uint64_t test_seed = derive_seed(seed, {stream::kTestLines});

    auto run = [&](const PointExecutor& starts, auto&& move) {
        for (auto& cmd : random_lines(starts, cfg.eval_lines_count, cfg.eval_lines_max_length, test_seed)) {
            ExecState& s = cmd.start;
            const Vec2 start = s.pos;
            move(s, cmd.request);
            const Vec2 actual = s.pos - start;
            const Vec2 e = actual - cmd.request;
            rep.lines.push_back({start, cmd.request, actual, e.x * e.x + e.y * e.y});
        }
    };

    if (rep.variant == "oracle") {
        const OraclePointExecutor points;
        const OracleLineExecutor lines(points);
        run(points, [&](ExecState& s, Vec2 v) { lines.move(s, v, true); });
    }
    else {
        Hierarchy h(cfg, make_robot(cfg, cfg.robot));
        ensure_layer(h, 1, seed);
        if (rep.variant == "stochastic") {
            ensure_layer(h, 2, seed);
            rep.repertoire_size = h.layer(2).size();
            run(h.points(), [&](ExecState& s, Vec2 v) { h.lines().move(s, v, true); });
        }
        else if (rep.variant == "extended") {
            const std::string path = cfg.path(baseline_file(2));
            Repertoire r4d;
            if (fs::exists(path))
                r4d = read_repertoire(path);
            else {
                const ExtendedLineLayer def(h.points(), cfg.line_params());
                LayerTraining t = train_repertoire(2, def, cfg.line4d, cfg.variation, derive_seed(seed, {stream::kLine4d}));
                write_repertoire(path, t.repertoire);
                write_metrics_csv(cfg.path(metrics_file(baseline_file(2))), t.metrics);
                r4d = std::move(t.repertoire);
            }
            rep.repertoire_size = r4d.size();
            const LineParams lp = cfg.line_params();
            run(h.points(), [&](ExecState& s, Vec2 v) {
                const double target[4] = {s.pos.x, s.pos.y, v.x, v.y};
                const Individual& m = r4d.lookup(target);
                execute_line(h.points(), s, line_request(m.genotype.genes, lp), lp.spacing, true);
            });
        }
        else
            throw ConfigError("unknown eval-lines variant '" + rep.variant + "'");
    }

    std::vector<double> errors;
    for (const auto& l : rep.lines)
        errors.push_back(l.squared_error);
    const Quartiles q = quartiles(errors);
    rep.median_squared_error = q.median;

    auto raw = open_out(cfg, "eval_lines_" + rep.variant + ".csv");
    raw << "start_x,start_y,requested_x,requested_y,actual_x,actual_y,squared_error\n";
    for (const auto& l : rep.lines)
        raw << l.start.x << ',' << l.start.y << ',' << l.requested.x << ',' << l.requested.y << ',' << l.actual.x << ',' << l.actual.y
            << ',' << l.squared_error << '\n';
    auto sum = open_out(cfg, "eval_lines_" + rep.variant + "_summary.csv");
    sum << "variant,samples,repertoire_size,lines,median_squared_error,q1,q3\n"
        << rep.variant << ',' << rep.samples << ',' << rep.repertoire_size << ',' << rep.lines.size() << ',' << q.median << ',' << q.q1
        << ',' << q.q3 << '\n';
    return rep;
}

TransferReport summarize_transfer(std::vector<TransferRecord> records)
{
    TransferReport r;
    r.records = std::move(records);
    if (r.records.empty())
        throw ExperimentError("transfer: layer-3 repertoire is empty");
    std::vector<double> m1o, m1a, m2o, m2a, m3o, m3a;
    for (const auto& t : r.records) {
        m1o.push_back(t.original.m1);
        m1a.push_back(t.alternative.m1);
        m2o.push_back(t.original.m2);
        m2a.push_back(t.alternative.m2);
        m3o.push_back(t.original.m3);
        m3a.push_back(t.alternative.m3);
    }
    r.m1_original = quartiles(m1o);
    r.m1_alternative = quartiles(m1a);
    r.mean_m2_original = mean(m2o);
    r.mean_m2_alternative = mean(m2a);
    r.mean_m3_original = mean(m3o);
    r.mean_m3_alternative = mean(m3a);
    return r;
}

TransferReport cmd_transfer(const RunConfig& cfg, std::uint64_t seed)
{
    Hierarchy orig(cfg, make_robot(cfg, cfg.robot));
    for (int k = 1; k <= 3; ++k)
        ensure_layer(orig, k, seed);

    Hierarchy alt(cfg, make_robot(cfg, cfg.robot));
    ensure_layer(alt, 1, "layer1_alt.rep", derive_seed(seed, {stream::kLayer1Alt}), other(cfg.layer1_fitness_kind()));
    alt.set(2, orig.layer(2));
    alt.set(3, orig.layer(3));

    const Layer3 l_orig(orig.lines(), orig.points(), cfg.samples, cfg.arc_params());
    const Layer3 l_alt(alt.lines(), alt.points(), cfg.samples, cfg.arc_params());
    TransferReport r = summarize_transfer(evaluate_transfer(orig.layer(3), l_orig, l_alt, orig.points(), alt.points(), cfg.samples,
        derive_seed(seed, {stream::kTransferStarts})));

    auto raw = open_out(cfg, "transfer.csv");
    raw << "member_id,m1_original,m2_original,m3_original,m1_alternative,m2_alternative,m3_alternative\n";
    for (const auto& t : r.records)
        raw << t.member_id << ',' << t.original.m1 << ',' << t.original.m2 << ',' << t.original.m3 << ',' << t.alternative.m1 << ','
            << t.alternative.m2 << ',' << t.alternative.m3 << '\n';
    auto sum = open_out(cfg, "transfer_summary.csv");
    sum << "base,members,m1_q1,m1_median,m1_q3,m2_mean,m3_mean\n"
        << "original," << r.records.size() << ',' << r.m1_original.q1 << ',' << r.m1_original.median << ',' << r.m1_original.q3 << ','
        << r.mean_m2_original << ',' << r.mean_m3_original << '\n'
        << "alternative," << r.records.size() << ',' << r.m1_alternative.q1 << ',' << r.m1_alternative.median << ','
        << r.m1_alternative.q3 << ',' << r.mean_m2_alternative << ',' << r.mean_m3_alternative << '\n';
    return r;
}

RobotTransferReport compare_renders(const Hierarchy& a, const Hierarchy& b, const std::string& image_dir)
{
    const Layer4 la = a.digit_layer();
    const Layer4 lb = b.digit_layer();
    const Repertoire& rep = a.layer(4);
    if (rep.empty())
        throw ExperimentError("robot transfer: layer-4 repertoire is empty");
    if (!image_dir.empty())
        fs::create_directories(image_dir);
    const RasterConfig& raster = a.config().digit.raster;

    RobotTransferReport r;
    for (const auto& m : rep.members()) {
        const Image28 ia = render(la, m.genotype, raster);
        const Image28 ib = render(lb, m.genotype, raster);
        r.member_ids.push_back(m.id);
        r.diffs.push_back(image_diff(ia, ib));
        if (!image_dir.empty()) {
            const std::string stem = image_dir + "/member_" + std::to_string(m.id) + "_";
            write_pgm(stem + a.robot().name() + ".pgm", to_gray(ia));
            write_pgm(stem + b.robot().name() + ".pgm", to_gray(ib));
        }
    }
    r.summary = quartiles(r.diffs);
    return r;
}

RobotTransferReport cmd_robot_transfer(const RunConfig& cfg, std::uint64_t seed)
{
    const ConvAutoencoder ae = load_autoencoder(cfg);
    Hierarchy a(cfg, make_robot(cfg, cfg.robot));
    a.set_autoencoder(&ae);
    for (int k = 1; k <= 4; ++k)
        ensure_layer(a, k, seed);

    const std::string other_robot = cfg.robot == "planar" ? "spatial" : "planar";
    Hierarchy b(cfg, make_robot(cfg, other_robot));
    b.set_autoencoder(&ae);
    ensure_layer(b, 1, "layer1_" + other_robot + ".rep", derive_seed(seed, {stream::kLayer1Spatial}), cfg.layer1_fitness_kind());
    for (int k = 2; k <= 4; ++k)
        b.set(k, a.layer(k));

    RobotTransferReport r = compare_renders(a, b, cfg.path("robot_transfer"));
    auto raw = open_out(cfg, "robot_transfer.csv");
    raw << "member_id,image_diff\n";
    for (std::size_t i = 0; i < r.diffs.size(); ++i)
        raw << r.member_ids[i] << ',' << r.diffs[i] << '\n';
    auto sum = open_out(cfg, "robot_transfer_summary.csv");
    sum << "robot_a,robot_b,members,min,q1,median,q3,max\n"
        << cfg.robot << ',' << other_robot << ',' << r.diffs.size() << ',' << r.summary.min << ',' << r.summary.q1 << ','
        << r.summary.median << ',' << r.summary.q3 << ',' << r.summary.max << '\n';
    return r;
}

GrayImage draw_grid(const Hierarchy& h, int rows, int cols)
{
    if (rows < 1 || cols < 1)
        throw ExperimentError("draw-grid needs at least one row and column");
    const Repertoire& rep = h.layer(4);
    if (rep.empty())
        throw ExperimentError("draw-grid: layer-4 repertoire is empty");
    const Layer4 layer = h.digit_layer();
    GrayImage sheet(kImageSide * cols, kImageSide * rows);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            // Cell centers; the top row holds the largest second latent coordinate.
            const double target[2] = {-1.0 + (2.0 * c + 1.0) / cols, 1.0 - (2.0 * r + 1.0) / rows};
            const Individual& m = rep.lookup(target);
            sheet.blit(render(layer, m.genotype, h.config().digit.raster), c * kImageSide, r * kImageSide);
        }
    return sheet;
}

GrayImage cmd_draw_grid(const RunConfig& cfg)
{
    const ConvAutoencoder ae = load_autoencoder(cfg);
    Hierarchy h(cfg, make_robot(cfg, cfg.robot));
    h.set_autoencoder(&ae);
    for (int k = 1; k <= 4; ++k)
        h.set(k, load_dependency(cfg, k, 4));
    GrayImage sheet = draw_grid(h, cfg.grid_rows, cfg.grid_cols);
    fs::create_directories(cfg.out_dir.empty() ? "." : cfg.out_dir);
    write_pgm(cfg.path("digit_grid.pgm"), sheet);
    return sheet;
}

} // namespace hbr
