#include <hbr/config.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace hbr {

namespace {
    std::string trim(const std::string& s)
    {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos)
            return {};
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    std::string fmt(double v)
    {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }

    double to_double(const std::string& key, const std::string& v)
    {
        const std::string t = trim(v);
        double out = 0.0;
        const auto r = std::from_chars(t.data(), t.data() + t.size(), out);
        if (r.ec != std::errc() || r.ptr != t.data() + t.size())
            throw ConfigError(key + ": expected a number, got '" + v + "'");
        return out;
    }

    template <typename Int>
    Int to_int(const std::string& key, const std::string& v)
    {
        const std::string t = trim(v);
        Int out = 0;
        const auto r = std::from_chars(t.data(), t.data() + t.size(), out);
        if (r.ec != std::errc() || r.ptr != t.data() + t.size())
            throw ConfigError(key + ": expected an integer, got '" + v + "'");
        return out;
    }

    std::vector<std::string> split_list(const std::string& v)
    {
        std::vector<std::string> out;
        std::string item;
        std::istringstream is(v);
        while (std::getline(is, item, ','))
            if (!trim(item).empty())
                out.push_back(trim(item));
        return out;
    }

    struct Key {
        std::function<std::string(const RunConfig&)> get;
        std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    };

    using Table = std::vector<std::pair<std::string, Key>>;

    template <typename Field>
    Key real(Field f)
    {
        return {[f](const RunConfig& c) { return fmt(f(const_cast<RunConfig&>(c))); },
            [f](RunConfig& c, const std::string& k, const std::string& v) { f(c) = to_double(k, v); }};
    }

    template <typename Int, typename Field>
    Key integer(Field f)
    {
        return {[f](const RunConfig& c) { return std::to_string(f(const_cast<RunConfig&>(c))); },
            [f](RunConfig& c, const std::string& k, const std::string& v) { f(c) = to_int<Int>(k, v); }};
    }

    template <typename Field>
    Key text(Field f)
    {
        return {[f](const RunConfig& c) { return f(const_cast<RunConfig&>(c)); },
            [f](RunConfig& c, const std::string&, const std::string& v) { f(c) = trim(v); }};
    }

    void add_layer(Table& t, const std::string& section, LayerRunConfig RunConfig::*member)
    {
        auto L = [member](RunConfig& c) -> LayerRunConfig& { return c.*member; };
        t.push_back({section + ".l", real([L](RunConfig& c) -> double& { return L(c).archive.l; })});
        t.push_back({section + ".epsilon", real([L](RunConfig& c) -> double& { return L(c).archive.epsilon; })});
        t.push_back({section + ".k_novelty", integer<int>([L](RunConfig& c) -> int& { return L(c).archive.k_novelty; })});
        t.push_back({section + ".pop_size", integer<int>([L](RunConfig& c) -> int& { return L(c).pop_size; })});
        t.push_back({section + ".generations", integer<int>([L](RunConfig& c) -> int& { return L(c).generations; })});
    }

    void add_layer_index(Table& t, int i)
    {
        const std::string section = "layer" + std::to_string(i + 1);
        t.push_back({section + ".l", real([i](RunConfig& c) -> double& { return c.layer[i].archive.l; })});
        t.push_back({section + ".epsilon", real([i](RunConfig& c) -> double& { return c.layer[i].archive.epsilon; })});
        t.push_back({section + ".k_novelty", integer<int>([i](RunConfig& c) -> int& { return c.layer[i].archive.k_novelty; })});
        t.push_back({section + ".pop_size", integer<int>([i](RunConfig& c) -> int& { return c.layer[i].pop_size; })});
        t.push_back({section + ".generations", integer<int>([i](RunConfig& c) -> int& { return c.layer[i].generations; })});
    }

    const Table& table()
    {
        static const Table t = [] {
            Table t;
            t.push_back({"run.seed", integer<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return c.seed; })});
            t.push_back({"run.seeds",
                {[](const RunConfig& c) {
                     std::string s;
                     for (std::size_t i = 0; i < c.seeds.size(); ++i)
                         s += (i ? ", " : "") + std::to_string(c.seeds[i]);
                     return s;
                 },
                    [](RunConfig& c, const std::string& k, const std::string& v) {
                        c.seeds.clear();
                        for (const auto& item : split_list(v))
                            c.seeds.push_back(to_int<std::uint64_t>(k, item));
                    }}});
            t.push_back({"run.robot", text([](RunConfig& c) -> std::string& { return c.robot; })});
            t.push_back({"run.out_dir", text([](RunConfig& c) -> std::string& { return c.out_dir; })});
            t.push_back({"run.samples", integer<int>([](RunConfig& c) -> int& { return c.samples; })});
            t.push_back({"run.interp_steps", integer<int>([](RunConfig& c) -> int& { return c.interp_steps; })});
            t.push_back({"run.line_spacing", real([](RunConfig& c) -> double& { return c.line_spacing; })});
            t.push_back({"run.layer3_controller", text([](RunConfig& c) -> std::string& { return c.layer3_controller; })});
            t.push_back({"run.layer1_fitness", text([](RunConfig& c) -> std::string& { return c.layer1_fitness; })});

            t.push_back({"planar_arm.links",
                {[](const RunConfig& c) {
                     std::string s;
                     for (std::size_t i = 0; i < c.planar_links.size(); ++i)
                         s += (i ? ", " : "") + fmt(c.planar_links[i]);
                     return s;
                 },
                    [](RunConfig& c, const std::string& k, const std::string& v) {
                        c.planar_links.clear();
                        for (const auto& item : split_list(v))
                            c.planar_links.push_back(to_double(k, item));
                    }}});
            t.push_back({"planar_arm.joint_limit", real([](RunConfig& c) -> double& { return c.planar_joint_limit; })});
            t.push_back({"spatial_arm.upper_arm", real([](RunConfig& c) -> double& { return c.spatial_upper_arm; })});
            t.push_back({"spatial_arm.forearm", real([](RunConfig& c) -> double& { return c.spatial_forearm; })});
            t.push_back({"spatial_arm.slice_x", real([](RunConfig& c) -> double& { return c.slice_x; })});
            t.push_back({"spatial_arm.slice_half_thickness", real([](RunConfig& c) -> double& { return c.slice_half_thickness; })});

            t.push_back({"variation.eta_m", real([](RunConfig& c) -> double& { return c.variation.eta_m; })});
            t.push_back({"variation.eta_c", real([](RunConfig& c) -> double& { return c.variation.eta_c; })});
            t.push_back({"variation.mutation_rate", real([](RunConfig& c) -> double& { return c.variation.mutation_rate; })});
            t.push_back({"variation.structural_rate", real([](RunConfig& c) -> double& { return c.variation.structural_rate; })});

            for (int i = 0; i < 4; ++i)
                add_layer_index(t, i);
            add_layer(t, "line4d", &RunConfig::line4d);
            add_layer(t, "flat_arc", &RunConfig::flat_arc);
            add_layer(t, "flat_digit", &RunConfig::flat_digit);

            t.push_back({"autoencoder.images", text([](RunConfig& c) -> std::string& { return c.mnist_images; })});
            t.push_back({"autoencoder.labels", text([](RunConfig& c) -> std::string& { return c.mnist_labels; })});
            t.push_back({"autoencoder.subset", integer<std::size_t>([](RunConfig& c) -> std::size_t& { return c.ae_subset; })});
            t.push_back({"autoencoder.epochs", integer<int>([](RunConfig& c) -> int& { return c.ae_train.epochs; })});
            t.push_back({"autoencoder.curriculum_epoch", integer<int>([](RunConfig& c) -> int& { return c.ae_train.curriculum_epoch; })});
            t.push_back({"autoencoder.batch_size", integer<int>([](RunConfig& c) -> int& { return c.ae_train.batch_size; })});
            t.push_back({"autoencoder.learning_rate", real([](RunConfig& c) -> double& { return c.ae_train.learning_rate; })});
            t.push_back({"autoencoder.maps", integer<int>([](RunConfig& c) -> int& { return c.ae_arch.maps; })});
            t.push_back({"autoencoder.fc_hidden",
                {[](const RunConfig& c) {
                     std::string s;
                     for (std::size_t i = 0; i < c.ae_arch.fc_hidden.size(); ++i)
                         s += (i ? ", " : "") + std::to_string(c.ae_arch.fc_hidden[i]);
                     return s;
                 },
                    [](RunConfig& c, const std::string& k, const std::string& v) {
                        c.ae_arch.fc_hidden.clear();
                        for (const auto& item : split_list(v))
                            c.ae_arch.fc_hidden.push_back(to_int<int>(k, item));
                    }}});

            t.push_back({"digit.width_lo", real([](RunConfig& c) -> double& { return c.digit.width_lo; })});
            t.push_back({"digit.width_hi", real([](RunConfig& c) -> double& { return c.digit.width_hi; })});
            t.push_back({"digit.fit_box", real([](RunConfig& c) -> double& { return c.digit.raster.fit_box; })});

            t.push_back({"eval_lines.variant", text([](RunConfig& c) -> std::string& { return c.eval_lines_variant; })});
            t.push_back({"eval_lines.count", integer<int>([](RunConfig& c) -> int& { return c.eval_lines_count; })});
            t.push_back({"eval_lines.max_length", real([](RunConfig& c) -> double& { return c.eval_lines_max_length; })});

            t.push_back({"draw_grid.rows", integer<int>([](RunConfig& c) -> int& { return c.grid_rows; })});
            t.push_back({"draw_grid.cols", integer<int>([](RunConfig& c) -> int& { return c.grid_cols; })});
            return t;
        }();
        return t;
    }

    const Key& find_key(const std::string& key)
    {
        for (const auto& [name, k] : table())
            if (name == key)
                return k;
        throw ConfigError("unknown configuration key '" + key + "'");
    }
} // namespace

RunConfig::RunConfig()
{
    const double l[4] = {0.01, 0.02, 0.05, 0.1};
    const double eps[4] = {0.1, 0.1, 0.025, 0.1};
    for (int i = 0; i < 4; ++i) {
        layer[i].archive.l = l[i];
        layer[i].archive.epsilon = eps[i];
    }
    line4d.archive = layer[1].archive;
    flat_arc.archive = layer[2].archive;
    flat_digit.archive = layer[3].archive;
    flat_digit.generations = 2 * layer[3].generations;
    ae_train.epochs = 30;
    ae_train.curriculum_epoch = 18;
}

std::string RunConfig::path(const std::string& file) const
{
    return out_dir.empty() ? file : out_dir + "/" + file;
}

Layer1Fitness RunConfig::layer1_fitness_kind() const
{
    if (layer1_fitness == "variance")
        return Layer1Fitness::JointVariance;
    if (layer1_fitness == "two_joints")
        return Layer1Fitness::TwoJoints;
    throw ConfigError("run.layer1_fitness must be 'variance' or 'two_joints'");
}

ArcController RunConfig::arc_controller() const
{
    if (layer3_controller == "3param")
        return ArcController::ThreeParam;
    if (layer3_controller == "10param")
        return ArcController::TenParam;
    throw ConfigError("run.layer3_controller must be '3param' or '10param'");
}

LineParams RunConfig::line_params() const
{
    LineParams p;
    p.spacing = line_spacing;
    return p;
}

ArcParams RunConfig::arc_params() const
{
    ArcParams p;
    p.controller = arc_controller();
    p.line = line_params();
    return p;
}

void RunConfig::validate() const
{
    if (robot != "planar" && robot != "spatial")
        throw ConfigError("run.robot must be 'planar' or 'spatial'");
    if (samples < 1)
        throw ConfigError("run.samples must be >= 1");
    if (interp_steps < 1)
        throw ConfigError("run.interp_steps must be >= 1");
    if (!(line_spacing > 0.0))
        throw ConfigError("run.line_spacing must be positive");
    (void)layer1_fitness_kind();
    (void)arc_controller();
    if (planar_links.empty() || planar_links.size() > kMaxJoints)
        throw ConfigError("planar_arm.links must list 1 to 8 lengths");
    for (double v : planar_links)
        if (!(v > 0.0))
            throw ConfigError("planar_arm.links must be positive");
    if (!(planar_joint_limit > 0.0))
        throw ConfigError("planar_arm.joint_limit must be positive");
    if (!(spatial_upper_arm > 0.0) || !(spatial_forearm > 0.0) || !(slice_half_thickness > 0.0))
        throw ConfigError("spatial_arm lengths must be positive");
    try {
        variation.validate();
        for (const auto* l : {&layer[0], &layer[1], &layer[2], &layer[3], &line4d, &flat_arc, &flat_digit}) {
            l->archive.validate();
            if (l->pop_size < 1 || l->generations < 0)
                throw ConfigError("pop_size must be >= 1 and generations >= 0");
        }
        ae_train.validate();
    }
    catch (const QdError& e) {
        throw ConfigError(e.what());
    }
    catch (const AeError& e) {
        throw ConfigError(e.what());
    }
    if (!(digit.width_lo > 0.0) || !(digit.width_hi >= digit.width_lo))
        throw ConfigError("digit width range is invalid");
    if (eval_lines_variant != "stochastic" && eval_lines_variant != "extended" && eval_lines_variant != "oracle")
        throw ConfigError("eval_lines.variant must be stochastic, extended or oracle");
    if (eval_lines_count < 1 || !(eval_lines_max_length >= 0.0))
        throw ConfigError("eval_lines settings are invalid");
    if (grid_rows < 1 || grid_cols < 1)
        throw ConfigError("draw_grid needs at least one row and column");
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value)
{
    find_key(key).set(cfg, key, value);
}

std::string get_config_value(const RunConfig& cfg, const std::string& key)
{
    return find_key(key).get(cfg);
}

std::vector<std::string> config_keys()
{
    std::vector<std::string> out;
    for (const auto& [name, k] : table())
        out.push_back(name);
    return out;
}

RunConfig parse_config(std::istream& is)
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(is, tree);
    }
    catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    RunConfig cfg;
    for (const auto& [section, body] : tree) {
        if (body.empty())
            throw ConfigError("config: key '" + section + "' outside a section");
        for (const auto& [key, value] : body)
            set_config_value(cfg, section + "." + key, value.data());
    }
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::string& path)
{
    std::ifstream is(path);
    if (!is)
        throw ConfigError("cannot read config " + path);
    return parse_config(is);
}

std::string dump_config(const RunConfig& cfg)
{
    std::ostringstream os;
    std::string section;
    for (const auto& [name, k] : table()) {
        const auto dot = name.find('.');
        const std::string sec = name.substr(0, dot);
        if (sec != section) {
            os << (section.empty() ? "" : "\n") << '[' << sec << "]\n";
            section = sec;
        }
        os << name.substr(dot + 1) << " = " << k.get(cfg) << '\n';
    }
    return os.str();
}

} // namespace hbr
