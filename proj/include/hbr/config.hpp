#ifndef HBR_CONFIG_HPP
#define HBR_CONFIG_HPP

#include <hbr/autoencoder.hpp>
#include <hbr/layers.hpp>
#include <hbr/qd_core.hpp>

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace hbr {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LayerRunConfig {
    ArchiveConfig archive;
    int pop_size = 200;
    int generations = 2000;
};

struct RunConfig {
    // [run]
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> seeds; ///< replications; empty means {seed}
    std::string robot = "planar";     ///< base robot of the hierarchy
    std::string out_dir = "out";
    int samples = 10; ///< stochastic-descriptor sample count N
    int interp_steps = kDefaultInterpSteps;
    double line_spacing = 0.04;
    std::string layer3_controller = "3param";
    std::string layer1_fitness = "variance"; ///< variance | two_joints

    // [planar_arm]
    std::vector<double> planar_links = std::vector<double>(8, 0.125);
    double planar_joint_limit = 1.5707963267948966;

    // [spatial_arm]
    double spatial_upper_arm = 0.105;
    double spatial_forearm = 0.114;
    double slice_x = 0.05;
    double slice_half_thickness = 0.01;

    VariationConfig variation;
    LayerRunConfig layer[4];
    LayerRunConfig line4d;
    LayerRunConfig flat_arc;
    LayerRunConfig flat_digit;

    // [autoencoder]
    std::string mnist_images = "data/mnist/mnist-10k-images-idx3-ubyte.gz";
    std::string mnist_labels = "data/mnist/mnist-10k-labels-idx1-ubyte.gz";
    std::size_t ae_subset = 10000;
    TrainConfig ae_train;
    AeArchitecture ae_arch;

    // [digit]
    DigitParams digit;

    // [eval_lines]
    std::string eval_lines_variant = "stochastic"; ///< stochastic | extended | oracle
    int eval_lines_count = 1000;
    double eval_lines_max_length = 0.5;

    // [draw_grid]
    int grid_rows = 10;
    int grid_cols = 10;

    RunConfig();

    std::vector<std::uint64_t> seed_list() const { return seeds.empty() ? std::vector<std::uint64_t>{seed} : seeds; }
    std::string path(const std::string& file) const;
    Layer1Fitness layer1_fitness_kind() const;
    ArcController arc_controller() const;
    ArcParams arc_params() const;
    LineParams line_params() const;

    void validate() const;
};

/// Applies `section.key = value`; throws ConfigError on unknown keys or bad values.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& cfg, const std::string& key);
std::vector<std::string> config_keys();

/// INI text: `[section]` headers and `key = value` lines; `#`/`;` comments.
RunConfig parse_config(std::istream& is);
RunConfig load_config(const std::string& path);
/// Every key with its current value, re-readable by parse_config.
std::string dump_config(const RunConfig& cfg);

} // namespace hbr

#endif
