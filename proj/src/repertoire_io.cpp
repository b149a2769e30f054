#include <hbr/repertoire_io.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hbr {

namespace {
    void put(std::ostream& os, double v)
    {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf;
    }

    double parse_real(std::string_view s, std::size_t line)
    {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
            s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
            s.remove_suffix(1);
        double v = 0.0;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec != std::errc() || r.ptr != s.data() + s.size())
            throw RepertoireIoError("repertoire line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
        return v;
    }

    std::vector<double> parse_reals(std::istringstream& is, std::size_t line)
    {
        std::vector<double> out;
        std::string tok;
        while (is >> tok)
            out.push_back(parse_real(tok, line));
        return out;
    }
} // namespace

void write_repertoire(std::ostream& os, const Repertoire& rep)
{
    const auto& sp = rep.space();
    os << "# hbr-repertoire 1\n# layer " << rep.layer_id() << "\n# descriptor_dim " << sp.dim() << "\n# lower";
    for (double v : sp.lower)
        os << ' ', put(os, v);
    os << "\n# upper";
    for (double v : sp.upper)
        os << ' ', put(os, v);
    os << "\n# normalize " << (sp.normalize ? 1 : 0) << '\n';
    for (const auto& m : rep.members()) {
        os << rep.layer_id() << ',' << m.genotype.arity;
        for (double g : m.genotype.genes)
            os << ',', put(os, g);
        for (double d : m.descriptor)
            os << ',', put(os, d);
        for (double v : {m.fitness, m.curiosity, m.uncertainty})
            os << ',', put(os, v);
        os << '\n';
    }
}

void write_repertoire(const std::string& path, const Repertoire& rep)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw RepertoireIoError("cannot write " + path);
    write_repertoire(os, rep);
    if (!os)
        throw RepertoireIoError("write failed: " + path);
}

Repertoire read_repertoire(std::istream& is)
{
    int layer_id = -1;
    std::size_t dim = 0;
    bool have_dim = false;
    DescriptorSpace space;
    std::vector<Individual> members;
    std::string text;
    std::size_t line = 0;
    while (std::getline(is, text)) {
        ++line;
        if (!text.empty() && text.back() == '\r')
            text.pop_back();
        if (text.empty())
            continue;
        if (text[0] == '#') {
            std::istringstream hs(text.substr(1));
            std::string key;
            hs >> key;
            if (key == "layer")
                hs >> layer_id;
            else if (key == "descriptor_dim")
                have_dim = static_cast<bool>(hs >> dim);
            else if (key == "lower")
                space.lower = parse_reals(hs, line);
            else if (key == "upper")
                space.upper = parse_reals(hs, line);
            else if (key == "normalize") {
                int n = 1;
                hs >> n;
                space.normalize = n != 0;
            }
            continue;
        }
        if (!have_dim || layer_id < 0)
            throw RepertoireIoError("repertoire: record before the layer and descriptor_dim headers");
        std::vector<std::string_view> fields;
        std::string_view rest(text);
        for (;;) {
            const auto comma = rest.find(',');
            fields.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos)
                break;
            rest.remove_prefix(comma + 1);
        }
        if (fields.size() < dim + 5)
            throw RepertoireIoError("repertoire line " + std::to_string(line) + ": too few fields");
        const int rec_layer = static_cast<int>(parse_real(fields[0], line));
        if (rec_layer != layer_id)
            throw RepertoireIoError("repertoire line " + std::to_string(line) + ": layer id " + std::to_string(rec_layer)
                + " in a layer-" + std::to_string(layer_id) + " file");
        Individual ind;
        ind.id = members.size() + 1;
        ind.genotype.arity = static_cast<int>(parse_real(fields[1], line));
        const std::size_t n_genes = fields.size() - dim - 5;
        std::size_t f = 2;
        for (std::size_t i = 0; i < n_genes; ++i)
            ind.genotype.genes.push_back(parse_real(fields[f++], line));
        for (std::size_t i = 0; i < dim; ++i)
            ind.descriptor.push_back(parse_real(fields[f++], line));
        ind.fitness = parse_real(fields[f++], line);
        ind.curiosity = parse_real(fields[f++], line);
        ind.uncertainty = parse_real(fields[f++], line);
        members.push_back(std::move(ind));
    }
    if (layer_id < 0 || !have_dim)
        throw RepertoireIoError("repertoire: missing header");
    if (space.lower.size() != dim || space.upper.size() != dim)
        throw RepertoireIoError("repertoire: descriptor bounds do not match descriptor_dim");
    return Repertoire(layer_id, std::move(space), std::move(members));
}

Repertoire read_repertoire(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw RepertoireIoError("cannot read " + path);
    return read_repertoire(is);
}

void write_bundle(const std::string& path, const HierarchyBundle& bundle)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw RepertoireIoError("cannot write " + path);
    os << "# hbr-hierarchy 1\nrobot = " << bundle.robot << '\n';
    for (const auto& l : bundle.layers)
        os << "layer = " << l << '\n';
}

HierarchyBundle read_bundle(const std::string& path)
{
    std::ifstream is(path);
    if (!is)
        throw RepertoireIoError("cannot read " + path);
    HierarchyBundle b;
    std::string text;
    while (std::getline(is, text)) {
        if (text.empty() || text[0] == '#')
            continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw RepertoireIoError(path + ": expected key = value, got '" + text + "'");
        auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t"));
            s.erase(s.find_last_not_of(" \t\r") + 1);
            return s;
        };
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        if (key == "robot")
            b.robot = value;
        else if (key == "layer")
            b.layers.push_back(value);
        else
            throw RepertoireIoError(path + ": unknown key '" + key + "'");
    }
    return b;
}

} // namespace hbr
