#include <hbr/layers.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hbr {

namespace {
    double config_variance(const JointConfig& q)
    {
        const std::size_t n = q.dof;
        if (n < 2)
            return 0.0;
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            mean += q.q[i];
        mean /= static_cast<double>(n);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            s += (q.q[i] - mean) * (q.q[i] - mean);
        return s / static_cast<double>(n);
    }

    // Sum of the squared angles without the two largest.
    double config_alt_cost(const JointConfig& q)
    {
        const std::size_t n = q.dof;
        if (n <= 2)
            return 0.0;
        std::array<double, kMaxJoints> sq{};
        for (std::size_t i = 0; i < n; ++i)
            sq[i] = q.q[i] * q.q[i];
        std::sort(sq.begin(), sq.begin() + static_cast<std::ptrdiff_t>(n));
        double s = 0.0;
        for (std::size_t i = 0; i + 2 < n; ++i)
            s += sq[i];
        return s;
    }

    double map_gene(double g, double lo, double hi) { return lo + g * (hi - lo); }

    void check_length(const Genotype& g, std::size_t n, const char* who)
    {
        if (g.genes.size() != n)
            throw LayerError(std::string(who) + ": expected " + std::to_string(n) + " genes, got " + std::to_string(g.genes.size()));
    }

    std::vector<double> clamp_to(std::vector<double> d, const DescriptorSpace& space)
    {
        for (std::size_t i = 0; i < d.size(); ++i)
            d[i] = std::clamp(d[i], space.lower[i], space.upper[i]);
        return d;
    }
} // namespace

// ---------------------------------------------------------------------------

Repertoire::Repertoire(int layer_id, DescriptorSpace space, std::vector<Individual> members)
    : _layer_id(layer_id), _space(std::move(space)), _members(std::move(members))
{
    _points.dim = _space.dim();
    std::vector<double> x(_space.dim());
    for (const auto& m : _members) {
        if (m.descriptor.size() != _space.dim())
            throw LayerError("repertoire member descriptor has the wrong dimension");
        _space.to_archive(m.descriptor, x);
        _points.push_back(x, m.id);
    }
    _tree = KdTree(_points);
}

Repertoire Repertoire::from_archive(int layer_id, const Archive& archive)
{
    return Repertoire(layer_id, archive.space(), archive.members());
}

std::size_t Repertoire::lookup_nearest(std::span<const double> target) const
{
    if (_members.empty())
        throw LayerError("lookup in an empty layer-" + std::to_string(_layer_id) + " repertoire");
    std::array<double, GridIndex::kMaxDim> buf{};
    std::vector<double> heap;
    std::span<double> x;
    if (target.size() <= buf.size()) {
        x = std::span<double>(buf.data(), target.size());
    }
    else {
        heap.resize(target.size());
        x = heap;
    }
    _space.to_archive(target, x);
    return _tree.nearest(_points, x)->slot;
}

// ---------------------------------------------------------------------------

void ExecState::start(const JointConfig& q0, Vec2 p0)
{
    q = q0;
    pos = p0;
    waypoints.clear();
    joint_var_sum = config_variance(q0);
    alt_cost_sum = track_alt ? config_alt_cost(q0) : 0.0;
    visited = 1;
    if (record)
        record->points.push_back({p0, q0, false});
}

void ExecState::attach(Trajectory* t)
{
    record = t;
    if (record)
        record->points.push_back({pos, q, false});
}

void ExecState::move_joints(const JointConfig& target, Vec2 target_pos, bool pen_down)
{
    // Angle variance along q + t d is a + 2 b t + c t^2 with centered moments
    // of q and d, so the sum over t = k/steps has a closed form.
    const std::size_t n = target.dof;
    if (n >= 2) {
        double mq = 0.0, md = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            mq += q.q[j];
            md += target.q[j] - q.q[j];
        }
        mq /= static_cast<double>(n);
        md /= static_cast<double>(n);
        double a = 0.0, b = 0.0, c = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double u = q.q[j] - mq, w = (target.q[j] - q.q[j]) - md;
            a += u * u;
            b += u * w;
            c += w * w;
        }
        const double m = steps;
        const double st = (m + 1.0) / 2.0, st2 = (m + 1.0) * (2.0 * m + 1.0) / (6.0 * m);
        joint_var_sum += (a * m + 2.0 * b * st + c * st2) / static_cast<double>(n);
    }
    visited += static_cast<std::size_t>(steps);
    if (track_alt || record) {
        JointConfig qk = target;
        for (int k = 1; k <= steps; ++k) {
            const bool last = k == steps;
            if (!last) {
                const double t = static_cast<double>(k) / steps;
                for (std::size_t j = 0; j < n; ++j)
                    qk.q[j] = q.q[j] + t * (target.q[j] - q.q[j]);
            }
            else {
                qk = target;
            }
            if (track_alt)
                alt_cost_sum += config_alt_cost(qk);
            if (record)
                record->points.push_back({last ? target_pos : robot->effector(qk), qk, pen_down});
        }
    }
    q = target;
    pos = target_pos;
}

void ExecState::move_point(Vec2 target, bool pen_down)
{
    if (record) {
        for (int k = 1; k <= steps; ++k) {
            const double t = static_cast<double>(k) / steps;
            record->points.push_back({k == steps ? target : pos + (target - pos) * t, q, pen_down});
        }
    }
    pos = target;
}

void ExecState::mark_waypoint()
{
    waypoints.push_back(pos);
    if (record)
        record->mark_waypoint();
}

// ---------------------------------------------------------------------------

RepertoirePointExecutor::RepertoirePointExecutor(const Repertoire& rep1, const Robot& robot, int steps)
    : _rep(&rep1), _robot(&robot), _steps(steps)
{
    if (steps < 1)
        throw LayerError("interpolation needs at least one step");
    _configs.reserve(rep1.size());
    _positions.reserve(rep1.size());
    for (const auto& m : rep1.members()) {
        if (m.genotype.genes.size() != robot.dof())
            throw LayerError("layer-1 member does not match robot " + robot.name());
        _configs.push_back(robot.from_genes(m.genotype.genes));
        _positions.push_back(robot.effector(_configs.back()));
    }
}

void RepertoirePointExecutor::reach(ExecState& s, Vec2 target, bool pen_down) const
{
    const double t[2] = {target.x, target.y};
    const std::size_t i = _rep->lookup_nearest(t);
    if (_configs[i] == s.q)
        return;
    s.move_joints(_configs[i], _positions[i], pen_down);
}

ExecState RepertoirePointExecutor::at_member(std::size_t i) const
{
    ExecState s;
    s.robot = _robot;
    s.steps = _steps;
    s.start(_configs[i], _positions[i]);
    return s;
}

ExecState RepertoirePointExecutor::random_start(Rng& rng) const
{
    if (_rep->empty())
        throw LayerError("cannot sample a start state from an empty layer-1 repertoire");
    return at_member(static_cast<std::size_t>(rng.below(_rep->size())));
}

ExecState RepertoirePointExecutor::home() const
{
    ExecState s;
    s.robot = _robot;
    s.steps = _steps;
    const JointConfig q = _robot->home();
    s.start(q, _robot->effector(q));
    return s;
}

void OraclePointExecutor::reach(ExecState& s, Vec2 target, bool pen_down) const
{
    s.move_point(target, pen_down);
}

ExecState OraclePointExecutor::random_start(Rng& rng) const
{
    ExecState s;
    s.steps = _steps;
    const double x = rng.uniform(_lo.x, _hi.x);
    const double y = rng.uniform(_lo.y, _hi.y);
    s.start(JointConfig{}, {x, y});
    return s;
}

ExecState OraclePointExecutor::home() const
{
    ExecState s;
    s.steps = _steps;
    s.start(JointConfig{}, (_lo + _hi) * 0.5);
    return s;
}

// ---------------------------------------------------------------------------

void execute_line(const PointExecutor& points, ExecState& s, Vec2 v, double spacing, bool pen_down)
{
    const Vec2 start = s.pos;
    const int k_total = std::max(1, static_cast<int>(std::ceil(v.norm() / spacing)));
    for (int k = 1; k <= k_total; ++k) {
        const Vec2 p = k == k_total ? start + v : start + v * (static_cast<double>(k) / k_total);
        points.reach(s, p, pen_down);
    }
}

RepertoireLineExecutor::RepertoireLineExecutor(const Repertoire& rep2, const PointExecutor& points, double spacing)
    : _rep(&rep2), _points(&points), _spacing(spacing)
{
    if (!(spacing > 0.0))
        throw LayerError("line spacing must be positive");
    LineParams lp;
    const DescriptorSpace& sp = rep2.space();
    if (sp.dim() != 2)
        throw LayerError("layer-2 repertoire must have a 2D descriptor");
    lp.lo = {sp.lower[0], sp.lower[1]};
    lp.hi = {sp.upper[0], sp.upper[1]};
    for (const auto& m : rep2.members()) {
        if (m.genotype.genes.size() != 2)
            throw LayerError("layer-2 member must have 2 genes");
        _requests.push_back(line_request(m.genotype.genes, lp));
    }
}

void RepertoireLineExecutor::move(ExecState& s, Vec2 v, bool pen_down) const
{
    const double t[2] = {v.x, v.y};
    execute_line(*_points, s, _requests[_rep->lookup_nearest(t)], _spacing, pen_down);
}

void OracleLineExecutor::move(ExecState& s, Vec2 v, bool pen_down) const
{
    _points->reach(s, s.pos + v, pen_down);
}

// ---------------------------------------------------------------------------

Vec2 line_request(std::span<const double> genes, const LineParams& p)
{
    return {map_gene(genes[0], p.lo.x, p.hi.x), map_gene(genes[1], p.lo.y, p.hi.y)};
}

std::size_t arc_gene_count(ArcController c)
{
    return c == ArcController::ThreeParam ? 3 : 10;
}

std::vector<Vec2> arc_requests(std::span<const double> genes, const ArcParams& p)
{
    std::vector<Vec2> out;
    out.reserve(5);
    if (p.controller == ArcController::ThreeParam) {
        const double theta0 = map_gene(genes[0], -std::numbers::pi, std::numbers::pi);
        const double len = map_gene(genes[1], 0.0, p.max_segment);
        const double delta = map_gene(genes[2], -std::numbers::pi, std::numbers::pi);
        for (int i = 0; i < 5; ++i) {
            const double a = theta0 + i * delta;
            out.push_back({len * std::cos(a), len * std::sin(a)});
        }
    }
    else {
        for (std::size_t i = 0; i < 5; ++i)
            out.push_back(line_request(genes.subspan(2 * i, 2), p.line));
    }
    return out;
}

ArcMetrics arc_metrics(std::span<const Vec2> waypoints, const ExecState& s, const ArcFitConfig& fit)
{
    ArcMetrics m;
    m.geometry = arc_geometry(waypoints);
    m.descriptor = arc_fit(waypoints, fit);
    m.shape_cost = 100.0 * variance(m.geometry.segment_lengths) + variance(m.geometry.turn_angles);
    m.joint_cost = s.joint_variance();
    m.alt_cost = s.alt_cost();
    return m;
}

void execute_arc(const LineExecutor& lines, ExecState& s, std::span<const double> genes, const ArcParams& p, bool pen_down)
{
    if (genes.size() != arc_gene_count(p.controller))
        throw LayerError("arc controller: wrong gene count");
    if (s.waypoints.empty())
        s.mark_waypoint();
    for (const Vec2& v : arc_requests(genes, p)) {
        lines.move(s, v, pen_down);
        s.mark_waypoint();
    }
}

// ---------------------------------------------------------------------------

StochasticResult aggregate_samples(std::vector<Sample> samples)
{
    if (samples.empty())
        throw LayerError("stochastic descriptor needs at least one sample");
    std::sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) {
        if (a.descriptor != b.descriptor)
            return a.descriptor < b.descriptor;
        return a.fitness < b.fitness;
    });
    std::vector<std::vector<double>> pts;
    pts.reserve(samples.size());
    for (const auto& s : samples)
        pts.push_back(s.descriptor);
    MedianResult med = geometric_median(pts);

    StochasticResult r;
    r.median = std::move(med.point);
    r.converged = med.converged;
    double best = std::numeric_limits<double>::infinity();
    double total = 0.0;
    for (const auto& s : samples) {
        const double d = std::sqrt(squared_distance(s.descriptor, r.median));
        total += d;
        if (d < best) {
            best = d;
            r.fitness = s.fitness;
        }
    }
    r.uncertainty = total / static_cast<double>(samples.size());
    return r;
}

// ---------------------------------------------------------------------------

double layer1_alt_fitness(const JointConfig& q)
{
    return -config_alt_cost(q);
}

double layer1_fitness(const JointConfig& q, Layer1Fitness kind)
{
    return kind == Layer1Fitness::JointVariance ? -config_variance(q) : layer1_alt_fitness(q);
}

DescriptorSpace point_space()
{
    return {{-1.0, -1.0}, {1.0, 1.0}, true};
}

DescriptorSpace line_space(const LineParams& p)
{
    return {{p.lo.x, p.lo.y}, {p.hi.x, p.hi.y}, true};
}

DescriptorSpace extended_line_space(const LineParams& p)
{
    const DescriptorSpace pt = point_space();
    return {{pt.lower[0], pt.lower[1], p.lo.x, p.lo.y}, {pt.upper[0], pt.upper[1], p.hi.x, p.hi.y}, true};
}

DescriptorSpace arc_space(const ArcParams& p)
{
    return {{p.fit.center_lo.x, p.fit.center_lo.y, 0.0}, {p.fit.center_hi.x, p.fit.center_hi.y, p.max_length}, true};
}

DescriptorSpace latent_space(int dim)
{
    return {std::vector<double>(static_cast<std::size_t>(dim), -1.0), std::vector<double>(static_cast<std::size_t>(dim), 1.0), false};
}

// -- layer 1 -----------------------------------------------------------------

Layer1::Layer1(const Robot& robot, Layer1Fitness fitness, int steps) : _robot(&robot), _fitness(fitness), _steps(steps) {}

Evaluation Layer1::evaluate(const Genotype& g, Rng&) const
{
    check_length(g, _robot->dof(), "layer1");
    const JointConfig q = _robot->from_genes(g.genes);
    Evaluation e;
    if (!_robot->in_workspace(q)) {
        e.valid = false;
        return e;
    }
    const Vec2 p = _robot->effector(q);
    e.descriptor = {p.x, p.y};
    e.fitness = layer1_fitness(q, _fitness);
    return e;
}

Layer1Result Layer1::execute(const Genotype& g) const
{
    check_length(g, _robot->dof(), "layer1");
    const JointConfig q = _robot->from_genes(g.genes);
    Layer1Result r;
    r.trajectory = interpolate_execute(*_robot, _robot->home(), q, _steps);
    r.descriptor = r.trajectory.points.back().position;
    r.fitness = layer1_fitness(q, _fitness);
    r.valid = _robot->in_workspace(q);
    return r;
}

// -- layer 2 -----------------------------------------------------------------

Layer2::Layer2(const PointExecutor& points, int samples, LineParams params) : _points(&points), _samples(samples), _params(params)
{
    if (samples < 1)
        throw LayerError("layer2 needs at least one sample");
}

std::vector<double> Layer2::execute(const Genotype& g, ExecState& s) const
{
    check_length(g, 2, "layer2");
    const Vec2 start = s.pos;
    execute_line(*_points, s, line_request(g.genes, _params), _params.spacing, true);
    const Vec2 d = s.pos - start;
    return clamp_to({d.x, d.y}, descriptor_space());
}

Evaluation Layer2::evaluate(const Genotype& g, Rng& rng) const
{
    std::vector<Sample> samples;
    samples.reserve(static_cast<std::size_t>(_samples));
    for (int i = 0; i < _samples; ++i) {
        ExecState s = _points->random_start(rng);
        samples.push_back({execute(g, s), 0.0});
    }
    const StochasticResult r = aggregate_samples(std::move(samples));
    return {r.median, r.fitness, r.uncertainty, true};
}

ExtendedLineLayer::ExtendedLineLayer(const PointExecutor& points, LineParams params) : _points(&points), _params(params) {}

Evaluation ExtendedLineLayer::evaluate(const Genotype& g, Rng& rng) const
{
    check_length(g, 2, "line4d");
    ExecState s = _points->random_start(rng);
    const Vec2 start = s.pos;
    execute_line(*_points, s, line_request(g.genes, _params), _params.spacing, true);
    const Vec2 d = s.pos - start;
    Evaluation e;
    e.descriptor = clamp_to({start.x, start.y, d.x, d.y}, descriptor_space());
    return e;
}

// -- layer 3 -----------------------------------------------------------------

Layer3::Layer3(const LineExecutor& lines, const PointExecutor& starts, int samples, ArcParams params)
    : _lines(&lines), _starts(&starts), _samples(samples), _params(params)
{
    if (samples < 1)
        throw LayerError("layer3 needs at least one sample");
}

ArcMetrics Layer3::execute(const Genotype& g, ExecState& s) const
{
    check_length(g, arc_gene_count(_params.controller), "layer3");
    execute_arc(*_lines, s, g.genes, _params, true);
    return arc_metrics(s.waypoints, s, _params.fit);
}

std::vector<double> Layer3::descriptor(const ArcMetrics& m) const
{
    return {m.descriptor.center.x, m.descriptor.center.y, std::min(m.descriptor.length, _params.max_length)};
}

Evaluation Layer3::evaluate(const Genotype& g, Rng& rng) const
{
    std::vector<Sample> samples;
    samples.reserve(static_cast<std::size_t>(_samples));
    for (int i = 0; i < _samples; ++i) {
        ExecState s = _starts->random_start(rng);
        const ArcMetrics m = execute(g, s);
        samples.push_back({descriptor(m), m.fitness()});
    }
    const StochasticResult r = aggregate_samples(std::move(samples));
    return {r.median, r.fitness, r.uncertainty, true};
}

FlatArcLayer::FlatArcLayer(const Robot& robot, ArcParams params, int steps) : _robot(&robot), _params(params), _steps(steps) {}

ArcMetrics FlatArcLayer::execute(const Genotype& g, Trajectory* record) const
{
    const std::size_t dof = _robot->dof();
    check_length(g, 5 * dof, "flat_arc");
    ExecState s;
    s.robot = _robot;
    s.steps = _steps;
    s.record = record;
    const JointConfig q0 = _robot->home();
    s.start(q0, _robot->effector(q0));
    s.mark_waypoint();
    for (std::size_t w = 0; w < 5; ++w) {
        const JointConfig q = _robot->from_genes(std::span<const double>(g.genes).subspan(w * dof, dof));
        s.move_joints(q, _robot->effector(q), true);
        s.mark_waypoint();
    }
    return arc_metrics(s.waypoints, s, _params.fit);
}

Evaluation FlatArcLayer::evaluate(const Genotype& g, Rng&) const
{
    const ArcMetrics m = execute(g);
    Evaluation e;
    e.descriptor = {m.descriptor.center.x, m.descriptor.center.y, std::min(m.descriptor.length, _params.max_length)};
    e.fitness = m.fitness();
    return e;
}

// -- layer 4 -----------------------------------------------------------------

ArcExecutor::ArcExecutor(const Repertoire& rep3, const LineExecutor& lines, ArcParams params)
    : _rep(&rep3), _lines(&lines), _params(params)
{
    for (const auto& m : rep3.members())
        if (m.genotype.genes.size() != arc_gene_count(params.controller))
            throw LayerError("layer-3 member does not match the arc controller");
}

void ArcExecutor::draw(ExecState& s, std::span<const double> target, bool pen_down) const
{
    execute_arc(*_lines, s, _rep->lookup(target).genotype.genes, _params, pen_down);
}

DigitResult score_drawing(Trajectory traj, double width, const ConvAutoencoder& ae, const RasterConfig& raster)
{
    DigitResult r;
    r.width = width;
    r.image = rasterize(traj, {width}, raster);
    r.trajectory = std::move(traj);
    r.latent = ae.encode(r.image);
    r.fitness = -ae.reconstruction_error(r.image);
    return r;
}

Layer4::Layer4(const PointExecutor& points, const ArcExecutor& arcs, const ConvAutoencoder& ae, DigitParams params)
    : _points(&points), _arcs(&arcs), _ae(&ae), _params(params)
{
}

DescriptorSpace Layer4::descriptor_space() const
{
    return latent_space(_ae->arch().latent);
}

double Layer4::width(const Genotype& g) const
{
    return map_gene(g.genes.at(2), _params.width_lo, _params.width_hi);
}

Trajectory Layer4::draw(const Genotype& g) const
{
    const auto lay = layout();
    if (g.arity < lay.min_arity || g.arity > lay.max_arity || g.genes.size() != lay.length(g.arity))
        throw LayerError("layer4: genotype does not match its arity");
    const DescriptorSpace arcs = _arcs->repertoire().space();
    Trajectory t;
    ExecState s = _points->home();
    s.attach(&t);
    _points->reach(s, {map_gene(g.genes[0], -1.0, 1.0), map_gene(g.genes[1], -1.0, 1.0)}, false);
    for (int a = 0; a < g.arity; ++a) {
        std::vector<double> target(arcs.dim());
        for (std::size_t j = 0; j < arcs.dim(); ++j)
            target[j] = map_gene(g.genes[3 + 3 * static_cast<std::size_t>(a) + j], arcs.lower[j], arcs.upper[j]);
        _arcs->draw(s, target, true);
    }
    return t;
}

DigitResult Layer4::execute(const Genotype& g) const
{
    return score_drawing(draw(g), width(g), *_ae, _params.raster);
}

Evaluation Layer4::evaluate(const Genotype& g, Rng&) const
{
    const DigitResult r = execute(g);
    return {r.latent, r.fitness, 0.0, true};
}

FlatDigitLayer::FlatDigitLayer(const Robot& robot, const ConvAutoencoder& ae, DigitParams params, int steps)
    : _robot(&robot), _ae(&ae), _params(params), _steps(steps)
{
}

DescriptorSpace FlatDigitLayer::descriptor_space() const
{
    return latent_space(_ae->arch().latent);
}

Trajectory FlatDigitLayer::draw(const Genotype& g) const
{
    const auto lay = layout();
    if (g.arity < lay.min_arity || g.arity > lay.max_arity || g.genes.size() != lay.length(g.arity))
        throw LayerError("flat_digit: genotype does not match its arity");
    const std::size_t dof = _robot->dof();
    Trajectory t;
    ExecState s;
    s.robot = _robot;
    s.steps = _steps;
    const JointConfig q0 = _robot->home();
    s.start(q0, _robot->effector(q0));
    s.attach(&t);
    const std::span<const double> genes(g.genes);
    for (int set = 0; set < g.arity; ++set) {
        for (std::size_t c = 0; c < 5; ++c) {
            const JointConfig q = _robot->from_genes(genes.subspan((static_cast<std::size_t>(set) * 5 + c) * dof, dof));
            s.move_joints(q, _robot->effector(q), c > 0);
            s.mark_waypoint();
        }
    }
    return t;
}

DigitResult FlatDigitLayer::execute(const Genotype& g) const
{
    return score_drawing(draw(g), 0.5 * (_params.width_lo + _params.width_hi), *_ae, _params.raster);
}

Evaluation FlatDigitLayer::evaluate(const Genotype& g, Rng&) const
{
    const DigitResult r = execute(g);
    return {r.latent, r.fitness, 0.0, true};
}

// -- transfer ----------------------------------------------------------------

std::vector<TransferRecord> evaluate_transfer(const Repertoire& rep3, const Layer3& layer_original, const Layer3& layer_alternative,
    const PointExecutor& base_original, const PointExecutor& base_alternative, int samples, std::uint64_t seed)
{
    if (samples < 1)
        throw LayerError("transfer needs at least one start per member");
    std::vector<TransferRecord> out;
    out.reserve(rep3.size());
    std::vector<Vec2> starts;
    for (std::size_t i = 0; i < rep3.size(); ++i) {
        const Individual& m = rep3.member(i);
        Rng rng(derive_seed(seed, {i}));
        starts.clear();
        for (int k = 0; k < samples; ++k)
            starts.push_back(base_original.random_start(rng).pos);

        auto run = [&](const Layer3& layer, const PointExecutor& base) {
            TransferMetrics t;
            for (const Vec2& p : starts) {
                ExecState s = base.home();
                s.track_alt = true;
                base.reach(s, p, false);
                s.start(s.q, s.pos);
                const ArcMetrics a = layer.execute(m.genotype, s);
                t.m1 += a.shape_cost;
                t.m2 += a.joint_cost;
                t.m3 += a.alt_cost;
            }
            const double n = static_cast<double>(starts.size());
            t.m1 /= n;
            t.m2 /= n;
            t.m3 /= n;
            return t;
        };
        out.push_back({m.id, run(layer_original, base_original), run(layer_alternative, base_alternative)});
    }
    return out;
}

} // namespace hbr
