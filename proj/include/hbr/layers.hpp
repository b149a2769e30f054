#ifndef HBR_LAYERS_HPP
#define HBR_LAYERS_HPP

#include <hbr/autoencoder.hpp>
#include <hbr/geometry.hpp>
#include <hbr/kinematics.hpp>
#include <hbr/qd_core.hpp>
#include <hbr/raster.hpp>

#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace hbr {

class LayerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// -- frozen repertoires ------------------------------------------------------

/// Read-only archive snapshot with an exact nearest-descriptor index.
class Repertoire {
public:
    Repertoire() = default;
    Repertoire(int layer_id, DescriptorSpace space, std::vector<Individual> members);
    static Repertoire from_archive(int layer_id, const Archive& archive);

    int layer_id() const { return _layer_id; }
    const DescriptorSpace& space() const { return _space; }
    const std::vector<Individual>& members() const { return _members; }
    const Individual& member(std::size_t i) const { return _members[i]; }
    std::size_t size() const { return _members.size(); }
    bool empty() const { return _members.empty(); }

    /// Index of the member nearest `target` (raw units, compared in archive
    /// space); ties go to the lowest member id. Throws on an empty repertoire.
    std::size_t lookup_nearest(std::span<const double> target) const;
    const Individual& lookup(std::span<const double> target) const { return _members[lookup_nearest(target)]; }

private:
    int _layer_id = 0;
    DescriptorSpace _space;
    std::vector<Individual> _members;
    PointSet _points;
    KdTree _tree;
};

// -- execution ---------------------------------------------------------------

inline constexpr int kDefaultInterpSteps = 10;

/// Robot state threaded through a behavior sequence. Joint-angle variance is
/// accumulated over every visited configuration; effector positions at the
/// intermediate interpolation steps are only computed when `record` is set.
struct ExecState {
    const Robot* robot = nullptr; ///< null for the oracle executors
    JointConfig q;
    Vec2 pos;
    int steps = kDefaultInterpSteps;
    Trajectory* record = nullptr;
    std::vector<Vec2> waypoints;
    double joint_var_sum = 0.0;
    double alt_cost_sum = 0.0; ///< sum of the 6 smallest squared angles
    std::size_t visited = 0;
    bool track_alt = false; ///< accumulate alt_cost_sum (sorts every configuration)

    /// Resets the accumulators and waypoints and places the robot at (q0, p0).
    void start(const JointConfig& q0, Vec2 p0);
    /// Starts recording into `t` with the current position as a pen-up point.
    void attach(Trajectory* t);
    /// Joint-space interpolation to `target`, whose effector position is known.
    void move_joints(const JointConfig& target, Vec2 target_pos, bool pen_down);
    /// Straight effector motion with no joint state (oracle executors).
    void move_point(Vec2 target, bool pen_down);
    void mark_waypoint();

    /// Mean over visited configurations of the per-configuration angle variance.
    double joint_variance() const { return visited ? joint_var_sum / static_cast<double>(visited) : 0.0; }
    double alt_cost() const { return visited ? alt_cost_sum / static_cast<double>(visited) : 0.0; }
};

/// Brings the effector to a requested drawing-plane point (layer-1 role).
class PointExecutor {
public:
    virtual ~PointExecutor() = default;
    virtual void reach(ExecState& s, Vec2 target, bool pen_down) const = 0;
    /// Fresh state at a uniformly drawn initial condition.
    virtual ExecState random_start(Rng& rng) const = 0;
    /// Fresh state at the home pose.
    virtual ExecState home() const = 0;
};

/// Executes the nearest layer-1 behavior by joint interpolation.
class RepertoirePointExecutor : public PointExecutor {
public:
    RepertoirePointExecutor(const Repertoire& rep1, const Robot& robot, int steps = kDefaultInterpSteps);

    void reach(ExecState& s, Vec2 target, bool pen_down) const override;
    ExecState random_start(Rng& rng) const override;
    ExecState home() const override;

    const Repertoire& repertoire() const { return *_rep; }
    const Robot& robot() const { return *_robot; }
    ExecState at_member(std::size_t i) const;

private:
    const Repertoire* _rep;
    const Robot* _robot;
    int _steps;
    std::vector<JointConfig> _configs;
    std::vector<Vec2> _positions;
};

/// Reaches any point exactly; starts are uniform in the given box.
class OraclePointExecutor : public PointExecutor {
public:
    explicit OraclePointExecutor(Vec2 lo = {-1.0, -1.0}, Vec2 hi = {1.0, 1.0}, int steps = kDefaultInterpSteps)
        : _lo(lo), _hi(hi), _steps(steps)
    {
    }
    void reach(ExecState& s, Vec2 target, bool pen_down) const override;
    ExecState random_start(Rng& rng) const override;
    ExecState home() const override;

private:
    Vec2 _lo, _hi;
    int _steps;
};

/// Layer-2 controller: walks the segment from the current position to
/// current + v through evenly spaced intermediate points (at most `spacing`
/// apart), reaching each through the point executor.
void execute_line(const PointExecutor& points, ExecState& s, Vec2 v, double spacing, bool pen_down);

/// Produces a requested displacement (layer-2 role).
class LineExecutor {
public:
    virtual ~LineExecutor() = default;
    virtual void move(ExecState& s, Vec2 v, bool pen_down) const = 0;
};

/// Executes the layer-2 member whose displacement is nearest the request.
class RepertoireLineExecutor : public LineExecutor {
public:
    RepertoireLineExecutor(const Repertoire& rep2, const PointExecutor& points, double spacing);
    void move(ExecState& s, Vec2 v, bool pen_down) const override;

    const Repertoire& repertoire() const { return *_rep; }

private:
    const Repertoire* _rep;
    const PointExecutor* _points;
    double _spacing;
    std::vector<Vec2> _requests;
};

/// Realizes the requested displacement exactly through the point executor.
class OracleLineExecutor : public LineExecutor {
public:
    explicit OracleLineExecutor(const PointExecutor& points) : _points(&points) {}
    void move(ExecState& s, Vec2 v, bool pen_down) const override;

private:
    const PointExecutor* _points;
};

// -- parameter maps ----------------------------------------------------------

struct LineParams {
    Vec2 lo{-1.0, -1.0}, hi{1.0, 1.0}; ///< layer-2 displacement range (= layer-1 descriptor box)
    double spacing = 0.04;             ///< intermediate point spacing, drawing units
};

Vec2 line_request(std::span<const double> genes, const LineParams& p);

enum class ArcController { ThreeParam, TenParam };

struct ArcParams {
    ArcController controller = ArcController::ThreeParam;
    double max_segment = 1.0; ///< 3-param segment length range [0, max_segment]
    LineParams line;          ///< 10-param gene pairs map onto this range
    ArcFitConfig fit;
    double max_length = 2.0; ///< descriptor L upper bound
};

std::size_t arc_gene_count(ArcController c);

/// The five displacement requests of an arc controller.
std::vector<Vec2> arc_requests(std::span<const double> genes, const ArcParams& p);

/// Fitness terms of a drawn arc. Costs are >= 0, lower is better.
struct ArcMetrics {
    ArcGeometry geometry;
    ArcDescriptor descriptor;
    double shape_cost = 0.0; ///< 100 Var(|V_i|) + Var(b_i)
    double joint_cost = 0.0; ///< mean joint-angle variance over the trajectory
    double alt_cost = 0.0;   ///< mean sum of the 6 smallest squared angles
    double fitness() const { return -(shape_cost + joint_cost); }
};

ArcMetrics arc_metrics(std::span<const Vec2> waypoints, const ExecState& s, const ArcFitConfig& fit);

/// Runs the arc controller from the current state; marks the start and the
/// end of each of the five lines as waypoints.
void execute_arc(const LineExecutor& lines, ExecState& s, std::span<const double> genes, const ArcParams& p, bool pen_down);

// -- stochastic descriptors ----------------------------------------------------

struct Sample {
    std::vector<double> descriptor;
    double fitness = 0.0;
};

struct StochasticResult {
    std::vector<double> median;
    double uncertainty = 0.0;
    double fitness = 0.0;
    bool converged = true;
};

/// Sorts the samples lexicographically, takes their geometric median, the
/// mean sample distance to it, and the fitness of the sample nearest to it.
StochasticResult aggregate_samples(std::vector<Sample> samples);

// -- layer definitions -------------------------------------------------------

enum class Layer1Fitness { JointVariance, TwoJoints };

/// -(sum of the 6 smallest squared angles).
double layer1_alt_fitness(const JointConfig& q);

double layer1_fitness(const JointConfig& q, Layer1Fitness kind);

DescriptorSpace point_space();
DescriptorSpace line_space(const LineParams& p = {});
DescriptorSpace extended_line_space(const LineParams& p = {});
DescriptorSpace arc_space(const ArcParams& p = {});
DescriptorSpace latent_space(int dim = 2);

struct Layer1Result {
    Trajectory trajectory;
    Vec2 descriptor;
    double fitness = 0.0;
    bool valid = true;
};

class Layer1 : public LayerDef {
public:
    Layer1(const Robot& robot, Layer1Fitness fitness = Layer1Fitness::JointVariance, int steps = kDefaultInterpSteps);
    std::string name() const override { return "layer1"; }
    GenotypeLayout layout() const override { return GenotypeLayout::fixed(_robot->dof()); }
    DescriptorSpace descriptor_space() const override { return point_space(); }
    Evaluation evaluate(const Genotype& g, Rng& rng) const override;
    Layer1Result execute(const Genotype& g) const;

private:
    const Robot* _robot;
    Layer1Fitness _fitness;
    int _steps;
};

/// Displacement lines over a frozen layer 1; stochastic over `samples` starts.
class Layer2 : public LayerDef {
public:
    Layer2(const PointExecutor& points, int samples, LineParams params = {});
    std::string name() const override { return "layer2"; }
    GenotypeLayout layout() const override { return GenotypeLayout::fixed(2); }
    DescriptorSpace descriptor_space() const override { return line_space(_params); }
    Evaluation evaluate(const Genotype& g, Rng& rng) const override;
    /// Clamped displacement executed from `s`.
    std::vector<double> execute(const Genotype& g, ExecState& s) const;

private:
    const PointExecutor* _points;
    int _samples;
    LineParams _params;
};

/// Baseline without stochastic descriptors: one random start per evaluation,
/// descriptor = (start position, displacement).
class ExtendedLineLayer : public LayerDef {
public:
    ExtendedLineLayer(const PointExecutor& points, LineParams params = {});
    std::string name() const override { return "line4d"; }
    GenotypeLayout layout() const override { return GenotypeLayout::fixed(2); }
    DescriptorSpace descriptor_space() const override { return extended_line_space(_params); }
    Evaluation evaluate(const Genotype& g, Rng& rng) const override;

private:
    const PointExecutor* _points;
    LineParams _params;
};

class Layer3 : public LayerDef {
public:
    Layer3(const LineExecutor& lines, const PointExecutor& starts, int samples, ArcParams params = {});
    std::string name() const override { return "layer3"; }
    GenotypeLayout layout() const override { return GenotypeLayout::fixed(arc_gene_count(_params.controller)); }
    DescriptorSpace descriptor_space() const override { return arc_space(_params); }
    Evaluation evaluate(const Genotype& g, Rng& rng) const override;
    /// Executes from `s` and returns the metrics of the drawn arc.
    ArcMetrics execute(const Genotype& g, ExecState& s) const;
    std::vector<double> descriptor(const ArcMetrics& m) const;
    const ArcParams& params() const { return _params; }

private:
    const LineExecutor* _lines;
    const PointExecutor* _starts;
    int _samples;
    ArcParams _params;
};

/// Flat baseline for arcs: five 8-joint waypoints executed from home.
class FlatArcLayer : public LayerDef {
public:
    FlatArcLayer(const Robot& robot, ArcParams params = {}, int steps = kDefaultInterpSteps);
    std::string name() const override { return "flat_arc"; }
    GenotypeLayout layout() const override { return GenotypeLayout::fixed(5 * _robot->dof()); }
    DescriptorSpace descriptor_space() const override { return arc_space(_params); }
    Evaluation evaluate(const Genotype& g, Rng& rng) const override;
    ArcMetrics execute(const Genotype& g, Trajectory* record = nullptr) const;

private:
    const Robot* _robot;
    ArcParams _params;
    int _steps;
};

/// Executes the layer-3 member nearest a requested arc descriptor.
class ArcExecutor {
public:
    ArcExecutor(const Repertoire& rep3, const LineExecutor& lines, ArcParams params);
    void draw(ExecState& s, std::span<const double> target, bool pen_down) const;
    const Repertoire& repertoire() const { return *_rep; }

private:
    const Repertoire* _rep;
    const LineExecutor* _lines;
    ArcParams _params;
};

struct DigitParams {
    double width_lo = 1.5, width_hi = 4.5; ///< stroke width range, pixels
    RasterConfig raster;
};

struct DigitResult {
    Trajectory trajectory;
    Image28 image;
    std::vector<double> latent;
    double fitness = 0.0;
    double width = 0.0;
};

/// Rasterizes, encodes and scores a drawn trajectory.
DigitResult score_drawing(Trajectory traj, double width, const ConvAutoencoder& ae, const RasterConfig& raster);

/// Digits from arcs: genes (x0, y0, width, then 1..3 arc triplets).
class Layer4 : public LayerDef {
public:
    Layer4(const PointExecutor& points, const ArcExecutor& arcs, const ConvAutoencoder& ae, DigitParams params = {});
    std::string name() const override { return "layer4"; }
    GenotypeLayout layout() const override { return GenotypeLayout::grouped(3, 3, 1, 3); }
    DescriptorSpace descriptor_space() const override;
    Evaluation evaluate(const Genotype& g, Rng& rng) const override;
    Trajectory draw(const Genotype& g) const;
    double width(const Genotype& g) const;
    DigitResult execute(const Genotype& g) const;

private:
    const PointExecutor* _points;
    const ArcExecutor* _arcs;
    const ConvAutoencoder* _ae;
    DigitParams _params;
};

/// Flat digit baseline: 1..3 sets of five joint configurations.
class FlatDigitLayer : public LayerDef {
public:
    FlatDigitLayer(const Robot& robot, const ConvAutoencoder& ae, DigitParams params = {}, int steps = kDefaultInterpSteps);
    std::string name() const override { return "flat_digit"; }
    GenotypeLayout layout() const override { return GenotypeLayout::grouped(0, 5 * _robot->dof(), 1, 3); }
    DescriptorSpace descriptor_space() const override;
    Evaluation evaluate(const Genotype& g, Rng& rng) const override;
    Trajectory draw(const Genotype& g) const;
    DigitResult execute(const Genotype& g) const;

private:
    const Robot* _robot;
    const ConvAutoencoder* _ae;
    DigitParams _params;
    int _steps;
};

// -- transfer ----------------------------------------------------------------

/// Costs measured on one re-execution of a layer-3 member (lower is better).
struct TransferMetrics {
    double m1 = 0.0; ///< arc-shape terms of the layer-3 fitness
    double m2 = 0.0; ///< joint-angle variance (original layer-1 objective)
    double m3 = 0.0; ///< sum of the 6 smallest squared angles (alternative objective)
};

struct TransferRecord {
    std::uint64_t member_id = 0;
    TransferMetrics original, alternative;
};

/// Re-executes every layer-3 member over two layer-1 bases. Each member runs
/// from `samples` start points shared by both bases (reached from home through
/// each base); metrics are averaged over the starts.
std::vector<TransferRecord> evaluate_transfer(const Repertoire& rep3, const Layer3& layer_original, const Layer3& layer_alternative,
    const PointExecutor& base_original, const PointExecutor& base_alternative, int samples, std::uint64_t seed);

} // namespace hbr

#endif
