#include <hbr/experiments.hpp>
#include <hbr/idx.hpp>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

namespace py = pybind11;
using namespace hbr;

namespace {

py::array_t<double> image_array(const Image28& img)
{
    py::array_t<double> out({kImageSide, kImageSide});
    std::memcpy(out.mutable_data(), img.pixels.data(), sizeof img.pixels);
    return out;
}

py::array_t<double> gray_array(const GrayImage& img)
{
    py::array_t<double> out({img.height, img.width});
    std::memcpy(out.mutable_data(), img.pixels.data(), img.pixels.size() * sizeof(double));
    return out;
}

Trajectory polyline(const std::vector<std::pair<double, double>>& pts)
{
    Trajectory t;
    for (std::size_t i = 0; i < pts.size(); ++i)
        t.points.push_back({{pts[i].first, pts[i].second}, {}, true});
    return t;
}

Baseline baseline_of(const std::string& name)
{
    if (name.empty() || name == "none")
        return Baseline::None;
    if (name == "extended")
        return Baseline::ExtendedLines;
    if (name == "flat_arc")
        return Baseline::FlatArcs;
    if (name == "flat_digit")
        return Baseline::FlatDigits;
    throw py::value_error("unknown baseline '" + name + "'");
}

py::dict quartile_dict(const Quartiles& q)
{
    py::dict d;
    d["q1"] = q.q1;
    d["median"] = q.median;
    d["q3"] = q.q3;
    d["min"] = q.min;
    d["max"] = q.max;
    return d;
}

py::list members_of(const Repertoire& rep)
{
    py::list out;
    for (const auto& m : rep.members()) {
        py::dict d;
        d["id"] = m.id;
        d["genes"] = m.genotype.genes;
        d["arity"] = m.genotype.arity;
        d["descriptor"] = m.descriptor;
        d["fitness"] = m.fitness;
        d["curiosity"] = m.curiosity;
        out.append(d);
    }
    return out;
}

} // namespace

PYBIND11_MODULE(pyhbr, m)
{
    m.doc() = "Hierarchical behavioral repertoires";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DependencyError>(m, "DependencyError", PyExc_RuntimeError);
    py::register_exception<IdxError>(m, "IdxError", PyExc_IOError);

    // -- config ------------------------------------------------------------------
    py::class_<RunConfig>(m, "RunConfig")
        .def(py::init<>())
        .def_static("load", &load_config, py::arg("path"))
        .def("get", [](const RunConfig& c, const std::string& key) { return get_config_value(c, key); })
        .def("set", [](RunConfig& c, const std::string& key, const std::string& value) { set_config_value(c, key, value); })
        .def("dump", &dump_config)
        .def("validate", &RunConfig::validate)
        .def_readwrite("out_dir", &RunConfig::out_dir)
        .def_readwrite("seed", &RunConfig::seed)
        .def_readwrite("robot", &RunConfig::robot);
    m.def("config_keys", &config_keys);

    // -- primitives ----------------------------------------------------------------
    m.def("polynomial_mutate_gene", &polynomial_mutate_gene, py::arg("x"), py::arg("eta_m"), py::arg("u"));

    m.def(
        "geometric_median",
        [](const std::vector<std::vector<double>>& pts, double tol, int max_iter) {
            const MedianResult r = geometric_median(pts, tol, max_iter);
            return py::make_tuple(r.point, r.converged, r.iterations);
        },
        py::arg("points"), py::arg("tol") = 1e-9, py::arg("max_iter") = 200);

    m.def(
        "planar_effector",
        [](const std::vector<double>& angles) {
            const PlanarArm arm;
            const Vec2 p = arm.effector(JointConfig(angles));
            return py::make_tuple(p.x, p.y);
        },
        py::arg("angles"), "End effector of the default 8-link planar arm.");

    m.def(
        "spatial_hand",
        [](const std::vector<double>& angles) {
            const SpatialArm4 arm;
            const Vec3 p = arm.forward(JointConfig(angles));
            return py::make_tuple(p.x, p.y, p.z);
        },
        py::arg("angles"));

    m.def(
        "rasterize",
        [](const std::vector<std::pair<double, double>>& pts, double width) { return image_array(rasterize(polyline(pts), StrokeStyle{width})); },
        py::arg("points"), py::arg("width") = 2.5, "Pen-down polyline drawn into a 28x28 array.");

    m.def(
        "load_idx",
        [](const std::string& images, std::optional<std::string> labels) {
            const Dataset ds = load_idx(images, labels);
            py::array_t<double> out({static_cast<py::ssize_t>(ds.images.size()), py::ssize_t{kImageSide}, py::ssize_t{kImageSide}});
            auto* dst = out.mutable_data();
            for (const auto& img : ds.images) {
                std::memcpy(dst, img.pixels.data(), sizeof img.pixels);
                dst += kImagePixels;
            }
            return py::make_tuple(out, ds.labels);
        },
        py::arg("images"), py::arg("labels") = py::none());

    m.def(
        "read_repertoire",
        [](const std::string& path) {
            const Repertoire rep = read_repertoire(path);
            py::dict d;
            d["layer"] = rep.layer_id();
            d["lower"] = rep.space().lower;
            d["upper"] = rep.space().upper;
            d["members"] = members_of(rep);
            return d;
        },
        py::arg("path"));

    // -- commands ------------------------------------------------------------------
    m.def(
        "train_ae",
        [](const RunConfig& cfg, std::uint64_t seed) {
            const TrainResult r = cmd_train_ae(cfg, seed);
            std::vector<double> errors;
            for (const auto& e : r.log)
                errors.push_back(e.mean_error);
            return errors;
        },
        py::arg("config"), py::arg("seed") = 0, py::call_guard<py::gil_scoped_release>());

    m.def(
        "train_layer",
        [](const RunConfig& cfg, int layer, std::uint64_t seed, const std::string& baseline) {
            const LayerTraining t = cmd_train_layer(cfg, layer, seed, baseline_of(baseline));
            py::dict d;
            d["size"] = t.repertoire.size();
            d["generations"] = t.metrics.size();
            d["members"] = members_of(t.repertoire);
            return d;
        },
        py::arg("config"), py::arg("layer"), py::arg("seed") = 0, py::arg("baseline") = "none");

    m.def(
        "eval_lines",
        [](const RunConfig& cfg, std::uint64_t seed) {
            const LineEvalReport r = cmd_eval_lines(cfg, seed);
            std::vector<double> errors;
            for (const auto& l : r.lines)
                errors.push_back(l.squared_error);
            py::dict d;
            d["variant"] = r.variant;
            d["repertoire_size"] = r.repertoire_size;
            d["median_squared_error"] = r.median_squared_error;
            d["squared_errors"] = errors;
            return d;
        },
        py::arg("config"), py::arg("seed") = 0);

    m.def(
        "transfer",
        [](const RunConfig& cfg, std::uint64_t seed) {
            const TransferReport r = cmd_transfer(cfg, seed);
            py::dict d;
            d["arcs"] = r.records.size();
            d["m1_original"] = quartile_dict(r.m1_original);
            d["m1_alternative"] = quartile_dict(r.m1_alternative);
            d["mean_m2_original"] = r.mean_m2_original;
            d["mean_m2_alternative"] = r.mean_m2_alternative;
            d["mean_m3_original"] = r.mean_m3_original;
            d["mean_m3_alternative"] = r.mean_m3_alternative;
            return d;
        },
        py::arg("config"), py::arg("seed") = 0);

    m.def(
        "robot_transfer",
        [](const RunConfig& cfg, std::uint64_t seed) {
            const RobotTransferReport r = cmd_robot_transfer(cfg, seed);
            py::dict d;
            d["member_ids"] = r.member_ids;
            d["diffs"] = r.diffs;
            d["summary"] = quartile_dict(r.summary);
            return d;
        },
        py::arg("config"), py::arg("seed") = 0);

    m.def("draw_grid", [](const RunConfig& cfg) { return gray_array(cmd_draw_grid(cfg)); }, py::arg("config"));
}
