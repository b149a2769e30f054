#include <doctest.h>

#include <hbr/experiments.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace hbr;

namespace {

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

std::size_t line_count(const fs::path& p)
{
    const std::string s = slurp(p);
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

fs::path fresh_dir(const std::string& name)
{
    const fs::path d = fs::temp_directory_path() / ("hbr_harness_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

// Small enough for a unit test; every layer still gets a real evolutionary run.
RunConfig small_config(const fs::path& out)
{
    RunConfig cfg;
    cfg.out_dir = out.string();
    cfg.samples = 3;
    for (auto& l : cfg.layer) {
        l.pop_size = 40;
        l.generations = 4;
    }
    cfg.line4d.pop_size = cfg.flat_arc.pop_size = cfg.flat_digit.pop_size = 40;
    cfg.line4d.generations = cfg.flat_arc.generations = cfg.flat_digit.generations = 4;
    cfg.ae_subset = 200;
    cfg.ae_train.epochs = 2;
    cfg.ae_train.curriculum_epoch = 1;
    cfg.ae_arch.maps = 2;
    cfg.ae_arch.fc_hidden = {8};
    cfg.eval_lines_count = 100;
    cfg.validate();
    return cfg;
}

} // namespace

TEST_CASE("configuration files")
{
    std::istringstream ini("[run]\nseed = 7\nseeds = 1, 2, 3\nrobot = spatial\n\n[layer3]\nl = 0.04\ngenerations = 12\n\n"
                           "[autoencoder]\nfc_hidden = 50, 20\n");
    const RunConfig cfg = parse_config(ini);
    CHECK(cfg.seed == 7);
    CHECK(cfg.seed_list() == std::vector<std::uint64_t>{1, 2, 3});
    CHECK(cfg.robot == "spatial");
    CHECK(cfg.layer[2].archive.l == 0.04);
    CHECK(cfg.layer[2].generations == 12);
    CHECK(cfg.ae_arch.fc_hidden == std::vector<int>{50, 20});
    CHECK(cfg.layer[0].archive.l == RunConfig{}.layer[0].archive.l);

    std::istringstream unknown("[run]\nsede = 7\n");
    CHECK_THROWS_AS(parse_config(unknown), ConfigError);
    std::istringstream bad_value("[layer1]\nl = -1\n");
    CHECK_THROWS_AS(parse_config(bad_value), ConfigError);
    std::istringstream bad_robot("[run]\nrobot = hexapod\n");
    CHECK_THROWS_AS(parse_config(bad_robot), ConfigError);

    // The printed form parses back to the same configuration.
    std::istringstream printed(dump_config(cfg));
    const RunConfig back = parse_config(printed);
    CHECK(dump_config(back) == dump_config(cfg));
    for (const auto& key : config_keys())
        CHECK(get_config_value(back, key) == get_config_value(cfg, key));

    RunConfig edited;
    set_config_value(edited, "variation.eta_m", "15");
    CHECK(edited.variation.eta_m == 15.0);
    CHECK_THROWS_AS(set_config_value(edited, "variation.nope", "1"), ConfigError);
    CHECK_THROWS_AS(set_config_value(edited, "layer2.pop_size", "many"), ConfigError);
}

TEST_CASE("summary statistics")
{
    const Quartiles q = quartiles({4, 1, 3, 2});
    CHECK(q.min == 1.0);
    CHECK(q.max == 4.0);
    CHECK(q.median == 2.5);
    CHECK(q.q1 == 1.75);
    CHECK(q.q3 == 3.25);
    CHECK(quartiles({5}).median == 5.0);
    CHECK(mean({1, 2, 6}) == 3.0);
    CHECK_THROWS(quartiles({}));
}

TEST_CASE("repertoire files")
{
    Rng rng(1);
    std::vector<Individual> members;
    for (int i = 0; i < 30; ++i) {
        Individual m;
        m.id = static_cast<std::uint64_t>(100 + 3 * i);
        m.genotype.arity = 1 + i % 3;
        m.genotype.genes.resize(3 + 3 * static_cast<std::size_t>(m.genotype.arity));
        for (auto& g : m.genotype.genes)
            g = rng.uniform();
        m.descriptor = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
        m.fitness = -rng.uniform();
        m.curiosity = rng.uniform(-3, 3);
        m.uncertainty = rng.uniform() / 3.0;
        members.push_back(m);
    }
    const Repertoire rep(4, latent_space(2), members);
    std::stringstream ss;
    write_repertoire(ss, rep);
    const std::string text = ss.str();
    const Repertoire back = read_repertoire(ss);
    CHECK(back.layer_id() == 4);
    CHECK(back.space().lower == rep.space().lower);
    CHECK(back.space().normalize == false);
    REQUIRE(back.size() == rep.size());
    for (std::size_t i = 0; i < rep.size(); ++i) {
        CHECK(back.member(i).id == i + 1);
        CHECK(back.member(i).genotype == rep.member(i).genotype);
        CHECK(back.member(i).descriptor == rep.member(i).descriptor);
        CHECK(back.member(i).fitness == rep.member(i).fitness);
        CHECK(back.member(i).curiosity == rep.member(i).curiosity);
        CHECK(back.member(i).uncertainty == rep.member(i).uncertainty);
    }
    std::stringstream again;
    write_repertoire(again, back);
    CHECK(again.str() == text);

    std::string wrong_layer = text;
    wrong_layer.replace(wrong_layer.find("\n4,"), 3, "\n3,");
    std::istringstream wrong(wrong_layer);
    CHECK_THROWS_AS(read_repertoire(wrong), RepertoireIoError);
    std::istringstream garbage("# hbr-repertoire 1\n# layer 1\n");
    CHECK_THROWS_AS(read_repertoire(garbage), RepertoireIoError);

    const fs::path dir = fresh_dir("bundle");
    write_bundle((dir / "hierarchy.txt").string(), {"planar", {"layer1.rep", "layer2.rep"}});
    const HierarchyBundle b = read_bundle((dir / "hierarchy.txt").string());
    CHECK(b.robot == "planar");
    CHECK(b.layers == std::vector<std::string>{"layer1.rep", "layer2.rep"});
    fs::remove_all(dir);
}

TEST_CASE("train-layer")
{
    const fs::path dir = fresh_dir("train_layer");
    const RunConfig cfg = small_config(dir);

    CHECK_THROWS_AS(cmd_train_layer(cfg, 2, 1), DependencyError);
    CHECK_FALSE(fs::exists(dir / layer_file(2)));

    const LayerTraining one = cmd_train_layer(cfg, 1, 1);
    CHECK(one.metrics.size() == 4);
    CHECK(fs::exists(dir / layer_file(1)));
    CHECK(line_count(dir / "layer1_metrics.csv") == 1 + 4);
    CHECK(read_repertoire((dir / layer_file(1)).string()).size() == one.repertoire.size());

    const LayerTraining two = cmd_train_layer(cfg, 2, 1);
    CHECK(two.repertoire.size() > 0);
    for (const auto& m : two.repertoire.members())
        CHECK(m.fitness == 0.0);
    CHECK(read_bundle((dir / kBundleFile).string()).layers == std::vector<std::string>{layer_file(1), layer_file(2)});

    CHECK_THROWS_AS(cmd_train_layer(cfg, 4, 1), DependencyError);
    cmd_train_layer(cfg, 2, 1, Baseline::ExtendedLines);
    CHECK(fs::exists(dir / baseline_file(2)));
    CHECK(read_repertoire((dir / baseline_file(2)).string()).space().dim() == 4);

    SUBCASE("same seed, same bytes")
    {
        const fs::path other = fresh_dir("train_layer_again");
        const RunConfig cfg2 = small_config(other);
        cmd_train_layer(cfg2, 1, 1);
        CHECK(slurp(other / layer_file(1)) == slurp(dir / layer_file(1)));
        CHECK(slurp(other / "layer1_metrics.csv") == slurp(dir / "layer1_metrics.csv"));
        const RunConfig cfg3 = small_config(other);
        cmd_train_layer(cfg3, 1, 2);
        CHECK(slurp(other / layer_file(1)) != slurp(dir / layer_file(1)));
        fs::remove_all(other);
    }
    fs::remove_all(dir);
}

TEST_CASE("eval-lines with exact executors")
{
    const fs::path dir = fresh_dir("eval_lines");
    RunConfig cfg = small_config(dir);
    cfg.eval_lines_variant = "oracle";
    const LineEvalReport r = cmd_eval_lines(cfg, 3);
    CHECK(r.lines.size() == 100);
    // (start + v) - start differs from v by rounding only.
    CHECK(r.median_squared_error < 1e-24);
    CHECK(fs::exists(dir / "eval_lines_oracle.csv"));
    CHECK(line_count(dir / "eval_lines_oracle.csv") == 101);
    for (const auto& l : r.lines)
        CHECK(l.requested.norm() <= cfg.eval_lines_max_length + 1e-12);
    fs::remove_all(dir);
}

TEST_CASE("autoencoder command")
{
    const fs::path dir = fresh_dir("train_ae");
    RunConfig cfg = small_config(dir);

    SUBCASE("missing dataset fails before any work")
    {
        cfg.mnist_images = (dir / "absent.gz").string();
        CHECK_THROWS_AS(cmd_train_ae(cfg, 1), DependencyError);
        CHECK_FALSE(fs::exists(dir / "ae_log.csv"));
        CHECK_FALSE(fs::exists(dir / kCheckpointFile));
        CHECK_THROWS_AS(load_autoencoder(cfg), DependencyError);
    }
    SUBCASE("trains and writes its checkpoint")
    {
        const TrainResult r = cmd_train_ae(cfg, 1);
        CHECK(r.log.size() == 2);
        CHECK(line_count(dir / "ae_log.csv") == 3);
        const ConvAutoencoder ae = load_autoencoder(cfg);
        CHECK(ae.arch() == cfg.ae_arch);
    }
    fs::remove_all(dir);
}

TEST_CASE("digit pipeline commands")
{
    const fs::path dir = fresh_dir("digits");
    const RunConfig cfg = small_config(dir);
    cmd_train_ae(cfg, 4);
    CHECK_THROWS_AS(cmd_draw_grid(cfg), DependencyError);
    for (int k = 1; k <= 4; ++k)
        cmd_train_layer(cfg, k, 4);

    const ConvAutoencoder ae = load_autoencoder(cfg);
    auto load = [&](Hierarchy& h) {
        for (int k = 1; k <= 4; ++k)
            h.set(k, read_repertoire((dir / layer_file(k)).string()));
        h.set_autoencoder(&ae);
    };

    SUBCASE("draw-grid sheet size")
    {
        RunConfig grid = cfg;
        grid.grid_rows = 2;
        grid.grid_cols = 3;
        const GrayImage sheet = cmd_draw_grid(grid);
        CHECK(sheet.width == 28 * 3);
        CHECK(sheet.height == 28 * 2);
        CHECK(fs::exists(dir / "digit_grid.pgm"));
        const GrayImage back = read_pgm((dir / "digit_grid.pgm").string());
        CHECK(back.width == sheet.width);

        Hierarchy h(cfg, make_robot(cfg, "planar"));
        load(h);
        const GrayImage single = draw_grid(h, 1, 1);
        CHECK(single.width == 28);
        CHECK(single.height == 28);

        Hierarchy empty(cfg, make_robot(cfg, "planar"));
        load(empty);
        empty.set(4, Repertoire(4, latent_space(2), {}));
        CHECK_THROWS(draw_grid(empty, 2, 2));
    }
    SUBCASE("rendering through an identical robot changes nothing")
    {
        Hierarchy a(cfg, make_robot(cfg, "planar"));
        Hierarchy b(cfg, make_robot(cfg, "planar"));
        load(a);
        load(b);
        const RobotTransferReport r = compare_renders(a, b);
        REQUIRE(r.diffs.size() == a.layer(4).size());
        for (double d : r.diffs)
            CHECK(d == 0.0);
    }
    SUBCASE("hierarchy bookkeeping")
    {
        Hierarchy h(cfg, make_robot(cfg, "planar"));
        CHECK_THROWS(h.set(2, read_repertoire((dir / layer_file(2)).string())));
        load(h);
        CHECK(h.has(4));
        h.set(1, read_repertoire((dir / layer_file(1)).string()));
        CHECK(h.has(1));
        CHECK_FALSE(h.has(2));
        CHECK_FALSE(h.has(4));
    }
    fs::remove_all(dir);
}
