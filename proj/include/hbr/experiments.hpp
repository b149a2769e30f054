#ifndef HBR_EXPERIMENTS_HPP
#define HBR_EXPERIMENTS_HPP

#include <hbr/config.hpp>
#include <hbr/repertoire_io.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hbr {

class ExperimentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A required input (lower layer, checkpoint, dataset) is missing.
class DependencyError : public ExperimentError {
public:
    DependencyError(std::string what_needed, const std::string& message) : ExperimentError(message), _needed(std::move(what_needed)) {}
    const std::string& needed() const { return _needed; }

private:
    std::string _needed;
};

// Substream ids under the run seed.
namespace stream {
    inline constexpr std::uint64_t kLayerBase = 0; // + layer id
    inline constexpr std::uint64_t kLine4d = 5;
    inline constexpr std::uint64_t kFlatArc = 6;
    inline constexpr std::uint64_t kFlatDigit = 7;
    inline constexpr std::uint64_t kLayer1Alt = 8;
    inline constexpr std::uint64_t kLayer1Spatial = 9;
    inline constexpr std::uint64_t kTestLines = 10;
    inline constexpr std::uint64_t kTransferStarts = 11;
    inline constexpr std::uint64_t kAutoencoderInit = 12;
    inline constexpr std::uint64_t kAutoencoderTrain = 13;
} // namespace stream

std::unique_ptr<Robot> make_robot(const RunConfig& cfg, const std::string& name);
EvolutionConfig evolution_config(const LayerRunConfig& layer, std::uint64_t seed);

struct Quartiles {
    double q1 = 0.0, median = 0.0, q3 = 0.0, min = 0.0, max = 0.0;
};

/// Linear-interpolation quantiles; throws on empty input.
Quartiles quartiles(std::vector<double> values);
double mean(const std::vector<double>& values);

// -- layer training ------------------------------------------------------------

struct LayerTraining {
    Repertoire repertoire;
    std::vector<GenerationStats> metrics;
};

LayerTraining train_repertoire(int layer_id, const LayerDef& def, const LayerRunConfig& run, const VariationConfig& variation,
    std::uint64_t seed);

void write_metrics_csv(const std::string& path, const std::vector<GenerationStats>& metrics);

/// A base robot and the frozen layers stacked on it, with the executors that
/// expose each layer to the one above. Layer k can only be set once layers
/// 1..k-1 are present; setting a layer drops every layer above it.
class Hierarchy {
public:
    Hierarchy(const RunConfig& cfg, std::unique_ptr<Robot> robot);
    Hierarchy(const Hierarchy&) = delete;
    Hierarchy& operator=(const Hierarchy&) = delete;

    const Robot& robot() const { return *_robot; }
    const RunConfig& config() const { return _cfg; }

    bool has(int layer_id) const;
    const Repertoire& layer(int layer_id) const;
    void set(int layer_id, Repertoire rep);
    void set_autoencoder(const ConvAutoencoder* ae) { _ae = ae; }
    const ConvAutoencoder* autoencoder() const { return _ae; }

    const RepertoirePointExecutor& points() const;
    const RepertoireLineExecutor& lines() const;
    const ArcExecutor& arcs() const;

    /// Definition of layer `layer_id` over the layers below it.
    std::unique_ptr<LayerDef> definition(int layer_id, Layer1Fitness fitness) const;
    std::unique_ptr<LayerDef> definition(int layer_id) const { return definition(layer_id, _cfg.layer1_fitness_kind()); }

    Layer4 digit_layer() const;

private:
    void require(int layer_id) const;

    RunConfig _cfg;
    std::unique_ptr<Robot> _robot;
    std::optional<Repertoire> _rep[4];
    std::unique_ptr<RepertoirePointExecutor> _points;
    std::unique_ptr<RepertoireLineExecutor> _lines;
    std::unique_ptr<ArcExecutor> _arcs;
    const ConvAutoencoder* _ae = nullptr;
};

// -- commands --------------------------------------------------------------------
//
// Each command reads and writes under cfg.out_dir and is a pure function of
// (cfg, seed). Experiment commands load lower layers from out_dir when
// present and train the missing ones; train-layer never does.

std::string layer_file(int layer_id);
std::string baseline_file(int layer_id);
inline constexpr const char* kCheckpointFile = "ae.ckpt";
inline constexpr const char* kBundleFile = "hierarchy.txt";

TrainResult cmd_train_ae(const RunConfig& cfg, std::uint64_t seed);
ConvAutoencoder load_autoencoder(const RunConfig& cfg);

enum class Baseline { None, ExtendedLines, FlatArcs, FlatDigits };

/// Trains one layer over the stored lower layers. With a baseline, trains the
/// flat counterpart of that layer instead (layer 2, 3 or 4).
LayerTraining cmd_train_layer(const RunConfig& cfg, int layer_id, std::uint64_t seed, Baseline baseline = Baseline::None);

struct LineSample {
    Vec2 start, requested, actual;
    double squared_error = 0.0;
};

struct LineEvalReport {
    std::string variant;
    int samples = 0;
    std::size_t repertoire_size = 0;
    std::vector<LineSample> lines;
    double median_squared_error = 0.0;
};

struct LineCommand {
    ExecState start;
    Vec2 request;
};

/// Random lines of uniform direction and length in [0, max_length] from
/// starts drawn like the layer-2 training starts.
std::vector<LineCommand> random_lines(const PointExecutor& points, int count, double max_length, std::uint64_t seed);

LineEvalReport cmd_eval_lines(const RunConfig& cfg, std::uint64_t seed);

struct TransferReport {
    std::vector<TransferRecord> records;
    Quartiles m1_original, m1_alternative;
    double mean_m2_original = 0.0, mean_m2_alternative = 0.0;
    double mean_m3_original = 0.0, mean_m3_alternative = 0.0;
};

TransferReport summarize_transfer(std::vector<TransferRecord> records);
TransferReport cmd_transfer(const RunConfig& cfg, std::uint64_t seed);

struct RobotTransferReport {
    std::vector<std::uint64_t> member_ids;
    std::vector<double> diffs;
    Quartiles summary;
};

/// Renders every layer-4 member through the two hierarchies.
RobotTransferReport compare_renders(const Hierarchy& a, const Hierarchy& b, const std::string& image_dir = {});
RobotTransferReport cmd_robot_transfer(const RunConfig& cfg, std::uint64_t seed);

GrayImage draw_grid(const Hierarchy& h, int rows, int cols);
GrayImage cmd_draw_grid(const RunConfig& cfg);

} // namespace hbr

#endif
