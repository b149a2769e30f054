#ifndef HBR_AUTOENCODER_HPP
#define HBR_AUTOENCODER_HPP

#include <hbr/raster.hpp>
#include <hbr/rng.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hbr {

class AeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Encoder: conv(m, 9x9) - maxpool - conv(m, 3x3) - maxpool - FC(hidden..., latent).
/// Decoder: FC(reversed hidden..., 7*7*m) - deconv(m, 3x3) - upsample - deconv(m, 9x9)
/// - upsample - conv(1, 3x3). Same padding and stride 1 everywhere; ReLU on
/// hidden layers, tanh on the latent layer, logistic sigmoid on the output.
struct AeArchitecture {
    int maps = 8;
    int kernel_large = 9;
    int kernel_small = 3;
    std::vector<int> fc_hidden{100, 100};
    int latent = 2;

    int bottleneck() const { return maps * 7 * 7; }
    bool operator==(const AeArchitecture&) const = default;
};

struct ParamBlock {
    std::string name;
    std::vector<int> shape;
    std::size_t offset = 0;
    std::size_t size = 0;
};

struct TrainConfig {
    int epochs = 200;
    int curriculum_epoch = 120; ///< dataset filtered once this epoch completes; 0 disables
    int batch_size = 128;
    double learning_rate = 1e-3;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

struct EpochLog {
    int epoch = 0;
    std::size_t dataset_size = 0;
    double mean_error = 0.0;
};

struct CurriculumEvent {
    std::size_t size_before = 0, size_after = 0;
    double mean_before = 0.0, mean_after = 0.0;
};

class ConvAutoencoder {
public:
    explicit ConvAutoencoder(AeArchitecture arch = {});

    /// Fan-in scaled normal initialization; biases zero.
    void init(std::uint64_t seed);

    const AeArchitecture& arch() const { return _arch; }
    const std::vector<ParamBlock>& blocks() const { return _blocks; }
    const ParamBlock& block(const std::string& name) const;
    std::vector<double>& params() { return _params; }
    const std::vector<double>& params() const { return _params; }

    /// Latent code in [-1,1]^latent.
    std::vector<double> encode(const Image28& img) const;
    Image28 decode(std::span<const double> latent) const;
    /// Mean over the 784 pixels of (img - decode(encode(img)))^2.
    double reconstruction_error(const Image28& img) const;
    std::vector<double> reconstruction_errors(std::span<const Image28> images, int chunk = 256) const;

    /// Batch-mean reconstruction MSE; fills `grad` (same layout as params) when given.
    double loss(std::span<const Image28* const> batch, std::vector<double>* grad = nullptr) const;

    void save(std::ostream& os) const;
    void save(const std::string& path) const;
    static ConvAutoencoder load(std::istream& is);
    static ConvAutoencoder load(const std::string& path);

    /// ReLU on/off bits and max-pool argmaxes of a forward pass. The loss is
    /// smooth between two parameter vectors with equal patterns.
    std::vector<std::int64_t> activation_pattern(std::span<const Image28* const> batch) const;

    /// Human-readable shape manifest (one block per line).
    std::string manifest() const;

private:
    struct Forward;
    void forward(std::span<const Image28* const> batch, Forward& f) const;

    AeArchitecture _arch;
    std::vector<ParamBlock> _blocks;
    std::vector<double> _params;
};

/// Shapes of every intermediate tensor for a single 28x28 input, in order,
/// as (name, channels-or-units, height, width).
struct TensorShape {
    std::string name;
    int channels, height, width;
};
std::vector<TensorShape> forward_shapes(const AeArchitecture& arch);

/// Largest relative error between backprop and central differences over
/// `samples` parameters drawn uniformly without replacement (all if samples >=
/// count). A probe whose +-h step changes the activation pattern straddles a
/// kink; it is counted in `skipped` and another parameter is drawn.
struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0, worst_numeric = 0.0;
};
GradCheckResult grad_check(const ConvAutoencoder& net, std::span<const Image28* const> batch, double h, std::size_t samples, Rng& rng);

/// Adam on the batch-mean MSE with shuffled mini-batches. Once
/// `curriculum_epoch` completes, samples whose error is not below the current
/// mean error are dropped for good.
struct TrainResult {
    std::vector<EpochLog> log;
    std::vector<CurriculumEvent> curriculum;
};
TrainResult train(ConvAutoencoder& net, std::vector<Image28> data, const TrainConfig& cfg,
    const std::function<void(const EpochLog&)>& sink = {});

} // namespace hbr

#endif
