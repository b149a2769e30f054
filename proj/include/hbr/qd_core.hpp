#ifndef HBR_QD_CORE_HPP
#define HBR_QD_CORE_HPP

#include <hbr/rng.hpp>
#include <hbr/spatial_index.hpp>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hbr {

/// Shape of a genotype: a fixed prefix followed by `arity` groups of
/// `group_size` genes. Fixed-length layers have group_size == 0.
struct GenotypeLayout {
    std::size_t base_length = 0;
    std::size_t group_size = 0;
    int min_arity = 0;
    int max_arity = 0;

    static GenotypeLayout fixed(std::size_t n) { return {n, 0, 0, 0}; }
    static GenotypeLayout grouped(std::size_t base, std::size_t group, int min_arity, int max_arity)
    {
        return {base, group, min_arity, max_arity};
    }

    bool variable() const { return group_size > 0 && max_arity > min_arity; }
    std::size_t length(int arity) const { return base_length + group_size * static_cast<std::size_t>(arity); }
};

/// Genes live in [0,1]; phenotypes map them onto controller ranges.
struct Genotype {
    std::vector<double> genes;
    int arity = 0;

    bool operator==(const Genotype&) const = default;
};

struct Individual {
    std::uint64_t id = 0;
    Genotype genotype;
    std::vector<double> descriptor; ///< raw descriptor, layer units
    double fitness = 0.0;           ///< higher is better
    double curiosity = 0.0;
    double uncertainty = 0.0;
    // Offspring attributed to this member (curiosity ledger).
    std::uint32_t offspring_added = 0;
    std::uint32_t offspring_rejected = 0;
};

struct ArchiveConfig {
    double l = 0.01;
    double epsilon = 0.1;
    int k_novelty = 15;
    /// Archives larger than this answer neighbor queries with the grid index.
    std::size_t linear_scan_limit = 10000;

    void validate() const;
};

struct VariationConfig {
    double eta_m = 10.0;
    double eta_c = 10.0; // no crossover; kept so configs round-trip
    double mutation_rate = 0.1;
    double structural_rate = 0.05;

    void validate() const;
};

struct EvolutionConfig {
    int pop_size = 200;
    int nb_generations = 10000;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

/// Axis-aligned box the raw descriptors must lie in. When `normalize` is set
/// the archive measures distances after mapping the box onto [0,1]^d, so l and
/// epsilon are unitless.
struct DescriptorSpace {
    std::vector<double> lower;
    std::vector<double> upper;
    bool normalize = true;

    std::size_t dim() const { return lower.size(); }
    bool contains(std::span<const double> d) const;
    std::vector<double> to_archive(std::span<const double> d) const;
    void to_archive(std::span<const double> d, std::span<double> out) const;
};

enum class AddKind { AddedNew, Replaced, Rejected, OutOfBounds };

const char* to_string(AddKind k);

struct AddOutcome {
    AddKind kind = AddKind::Rejected;
    std::size_t slot = 0;         ///< slot written (AddedNew/Replaced)
    std::uint64_t victim_id = 0;  ///< id of the replaced member
    double nearest_distance = std::numeric_limits<double>::infinity();

    bool inserted() const { return kind == AddKind::AddedNew || kind == AddKind::Replaced; }
};

class QdError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unstructured archive: a new member must be at least l away from every
/// member; closer candidates can only replace their nearest neighbor.
class Archive {
public:
    Archive(DescriptorSpace space, ArchiveConfig cfg);

    const DescriptorSpace& space() const { return _space; }
    const ArchiveConfig& config() const { return _cfg; }

    std::size_t size() const { return _members.size(); }
    bool empty() const { return _members.empty(); }
    const std::vector<Individual>& members() const { return _members; }
    const Individual& member(std::size_t slot) const { return _members[slot]; }
    Individual& member(std::size_t slot) { return _members[slot]; }
    std::optional<std::size_t> slot_of(std::uint64_t id, std::size_t hint) const;

    /// Decides what try_add would do, without modifying the archive.
    AddOutcome classify(const Individual& cand) const;
    /// Applies an outcome computed by classify() for the same candidate.
    void apply(Individual cand, const AddOutcome& outcome);
    AddOutcome try_add(Individual cand);

    /// Mean distance (archive space) to the min(k, size) nearest members;
    /// +infinity on an empty archive.
    double novelty(std::span<const double> raw_descriptor, std::size_t k) const;

    std::optional<Neighbor> nearest(std::span<const double> raw_descriptor) const;

    const PointSet& points() const { return _points; }
    bool uses_grid() const { return _members.size() > _cfg.linear_scan_limit; }

private:
    std::optional<Neighbor> nearest_internal(std::span<const double> x, std::optional<std::size_t> exclude) const;
    double novelty_internal(std::span<const double> x, std::size_t k, std::optional<std::size_t> exclude) const;

    DescriptorSpace _space;
    ArchiveConfig _cfg;
    std::vector<Individual> _members;
    PointSet _points; // archive-space descriptors, slot aligned with _members
    GridIndex _grid;
    std::uint64_t _next_id = 1;
};

// -- variation ---------------------------------------------------------------

/// Bounded polynomial mutation of one gene in [0,1] for a given uniform draw u.
double polynomial_mutate_gene(double x, double eta_m, double u);

Genotype polynomial_mutate(const Genotype& g, const VariationConfig& cfg, Rng& rng);

/// Grows (appends a uniform-random group) or shrinks (drops the last group)
/// with probability structural_rate each; arity clamped to the layout range.
Genotype structural_mutate(const Genotype& g, const GenotypeLayout& layout, const VariationConfig& cfg, Rng& rng);

enum class StructuralEvent { None, Grow, Shrink };
Genotype apply_structural_event(const Genotype& g, const GenotypeLayout& layout, StructuralEvent ev, Rng& rng);

Genotype random_genotype(const GenotypeLayout& layout, Rng& rng);

// -- selection ---------------------------------------------------------------

/// `count` slots drawn with probability proportional to
/// curiosity - min_curiosity + 1. Throws QdError on an empty archive.
std::vector<std::size_t> select_parents(const Archive& archive, std::size_t count, Rng& rng);

void curiosity_update(Individual& parent, AddKind outcome);

// -- evolution ---------------------------------------------------------------

struct Evaluation {
    std::vector<double> descriptor;
    double fitness = 0.0;
    double uncertainty = 0.0;
    bool valid = true;
};

/// One level of the hierarchy as seen by the QD engine.
class LayerDef {
public:
    virtual ~LayerDef() = default;
    virtual std::string name() const = 0;
    virtual GenotypeLayout layout() const = 0;
    virtual DescriptorSpace descriptor_space() const = 0;
    /// Pure given the genotype and the random stream.
    virtual Evaluation evaluate(const Genotype& g, Rng& rng) const = 0;
};

struct GenerationStats {
    int generation = 0;
    std::size_t archive_size = 0;
    double best_fitness = 0.0;
    double mean_fitness = 0.0;
    std::size_t insertions = 0;
    std::size_t rejections = 0;
};

class EvolutionObserver {
public:
    virtual ~EvolutionObserver() = default;
    virtual void on_generation(const GenerationStats&) {}
    /// Called before `outcome` is applied to `archive`.
    virtual void on_attempt(const Archive& /*archive*/, const Individual& /*cand*/, const AddOutcome& /*outcome*/) {}
};

/// Writes generation,archive_size,best_fitness,mean_fitness,insertions,rejections.
class CsvMetricsSink : public EvolutionObserver {
public:
    explicit CsvMetricsSink(std::ostream& os, bool header = true);
    void on_generation(const GenerationStats& s) override;

private:
    std::ostream& _os;
};

/// Stats of the current archive; generation/insertions/rejections left zero.
GenerationStats archive_stats(const Archive& archive);

Archive run_evolution(const LayerDef& layer, const ArchiveConfig& acfg, const VariationConfig& vcfg, const EvolutionConfig& ecfg,
    EvolutionObserver* observer = nullptr);

} // namespace hbr

#endif
