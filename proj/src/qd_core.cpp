#include <hbr/qd_core.hpp>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

namespace hbr {

void ArchiveConfig::validate() const
{
    if (!(l > 0.0))
        throw QdError("archive l must be > 0");
    if (!(epsilon >= 0.0 && epsilon < 1.0))
        throw QdError("archive epsilon must be in [0,1)");
    if (k_novelty < 1)
        throw QdError("k_novelty must be >= 1");
}

void VariationConfig::validate() const
{
    if (!(eta_m > 0.0) || !(eta_c > 0.0))
        throw QdError("distribution indices must be > 0");
    if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0) || !(structural_rate >= 0.0 && structural_rate <= 0.5))
        throw QdError("variation rates out of range");
}

void EvolutionConfig::validate() const
{
    if (pop_size <= 0)
        throw QdError("pop_size must be > 0");
    if (nb_generations < 0)
        throw QdError("nb_generations must be >= 0");
}

bool DescriptorSpace::contains(std::span<const double> d) const
{
    if (d.size() != dim())
        return false;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (!(d[i] >= lower[i] && d[i] <= upper[i]))
            return false;
    return true;
}

void DescriptorSpace::to_archive(std::span<const double> d, std::span<double> out) const
{
    for (std::size_t i = 0; i < d.size(); ++i)
        out[i] = normalize ? (d[i] - lower[i]) / (upper[i] - lower[i]) : d[i];
}

std::vector<double> DescriptorSpace::to_archive(std::span<const double> d) const
{
    std::vector<double> out(d.size());
    to_archive(d, out);
    return out;
}

const char* to_string(AddKind k)
{
    switch (k) {
    case AddKind::AddedNew:
        return "added";
    case AddKind::Replaced:
        return "replaced";
    case AddKind::Rejected:
        return "rejected";
    case AddKind::OutOfBounds:
        return "out_of_bounds";
    }
    return "?";
}

// ---------------------------------------------------------------------------

Archive::Archive(DescriptorSpace space, ArchiveConfig cfg) : _space(std::move(space)), _cfg(cfg), _grid(_space.dim(), cfg.l)
{
    _cfg.validate();
    _points.dim = _space.dim();
}

std::optional<std::size_t> Archive::slot_of(std::uint64_t id, std::size_t hint) const
{
    if (hint < _members.size() && _members[hint].id == id)
        return hint;
    return std::nullopt;
}

std::optional<Neighbor> Archive::nearest_internal(std::span<const double> x, std::optional<std::size_t> exclude) const
{
    if (uses_grid())
        return _grid.nearest(_points, x, exclude);
    return linear_nearest(_points, x, exclude);
}

double Archive::novelty_internal(std::span<const double> x, std::size_t k, std::optional<std::size_t> exclude) const
{
    const auto nn = uses_grid() ? _grid.knn(_points, x, k, exclude) : linear_knn(_points, x, k, exclude);
    if (nn.empty())
        return std::numeric_limits<double>::infinity();
    double s = 0.0;
    for (const auto& n : nn)
        s += std::sqrt(n.squared_distance);
    return s / static_cast<double>(nn.size());
}

double Archive::novelty(std::span<const double> raw_descriptor, std::size_t k) const
{
    return novelty_internal(_space.to_archive(raw_descriptor), k, std::nullopt);
}

std::optional<Neighbor> Archive::nearest(std::span<const double> raw_descriptor) const
{
    return nearest_internal(_space.to_archive(raw_descriptor), std::nullopt);
}

AddOutcome Archive::classify(const Individual& cand) const
{
    AddOutcome out;
    if (!_space.contains(cand.descriptor)) {
        out.kind = AddKind::OutOfBounds;
        return out;
    }
    if (_members.empty()) {
        out.kind = AddKind::AddedNew;
        out.slot = 0;
        return out;
    }

    const auto x = _space.to_archive(cand.descriptor);
    const auto n = *nearest_internal(x, std::nullopt);
    out.nearest_distance = std::sqrt(n.squared_distance);
    if (out.nearest_distance >= _cfg.l) {
        out.kind = AddKind::AddedNew;
        out.slot = _members.size();
        return out;
    }

    const Individual& inc = _members[n.slot];
    bool replace = cand.fitness > inc.fitness + _cfg.epsilon * std::abs(inc.fitness);
    if (!replace && cand.fitness >= inc.fitness) {
        // Both novelties are measured against the archive without the incumbent.
        const auto k = static_cast<std::size_t>(_cfg.k_novelty);
        const double nov_cand = novelty_internal(x, k, n.slot);
        const double nov_inc = novelty_internal(_points.point(n.slot), k, n.slot);
        replace = nov_cand >= (1.0 + _cfg.epsilon) * nov_inc;
    }
    if (replace) {
        out.kind = AddKind::Replaced;
        out.slot = n.slot;
        out.victim_id = inc.id;
    }
    else {
        out.kind = AddKind::Rejected;
    }
    return out;
}

void Archive::apply(Individual cand, const AddOutcome& outcome)
{
    if (!outcome.inserted())
        return;
    cand.id = _next_id++;
    cand.curiosity = 0.0;
    cand.offspring_added = 0;
    cand.offspring_rejected = 0;
    const auto x = _space.to_archive(cand.descriptor);
    if (outcome.kind == AddKind::AddedNew) {
        assert(outcome.slot == _members.size());
        _members.push_back(std::move(cand));
        _points.push_back(x, _members.back().id);
        _grid.insert(outcome.slot, x);
    }
    else {
        assert(_members[outcome.slot].id == outcome.victim_id);
        _grid.erase(outcome.slot, _points.point(outcome.slot));
        _members[outcome.slot] = std::move(cand);
        _points.assign(outcome.slot, x, _members[outcome.slot].id);
        _grid.insert(outcome.slot, x);
    }
}

AddOutcome Archive::try_add(Individual cand)
{
    const auto outcome = classify(cand);
    apply(std::move(cand), outcome);
    return outcome;
}

// ---------------------------------------------------------------------------

double polynomial_mutate_gene(double x, double eta_m, double u)
{
    const double power = 1.0 / (eta_m + 1.0);
    const double delta = u < 0.5 ? std::pow(2.0 * u, power) - 1.0 : 1.0 - std::pow(2.0 * (1.0 - u), power);
    return std::clamp(x + delta, 0.0, 1.0);
}

Genotype polynomial_mutate(const Genotype& g, const VariationConfig& cfg, Rng& rng)
{
    Genotype out = g;
    for (auto& v : out.genes) {
        if (rng.uniform() < cfg.mutation_rate)
            v = polynomial_mutate_gene(v, cfg.eta_m, rng.uniform());
        v = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

Genotype apply_structural_event(const Genotype& g, const GenotypeLayout& layout, StructuralEvent ev, Rng& rng)
{
    Genotype out = g;
    if (ev == StructuralEvent::Grow && out.arity < layout.max_arity) {
        for (std::size_t i = 0; i < layout.group_size; ++i)
            out.genes.push_back(rng.uniform());
        ++out.arity;
    }
    else if (ev == StructuralEvent::Shrink && out.arity > layout.min_arity) {
        out.genes.resize(out.genes.size() - layout.group_size);
        --out.arity;
    }
    return out;
}

Genotype structural_mutate(const Genotype& g, const GenotypeLayout& layout, const VariationConfig& cfg, Rng& rng)
{
    if (!layout.variable())
        return g;
    const double u = rng.uniform();
    StructuralEvent ev = StructuralEvent::None;
    if (u < cfg.structural_rate)
        ev = StructuralEvent::Grow;
    else if (u < 2.0 * cfg.structural_rate)
        ev = StructuralEvent::Shrink;
    return apply_structural_event(g, layout, ev, rng);
}

Genotype random_genotype(const GenotypeLayout& layout, Rng& rng)
{
    Genotype g;
    g.arity = layout.min_arity;
    if (layout.variable())
        g.arity = layout.min_arity + static_cast<int>(rng.below(static_cast<std::uint64_t>(layout.max_arity - layout.min_arity + 1)));
    g.genes.resize(layout.length(g.arity));
    for (auto& v : g.genes)
        v = rng.uniform();
    return g;
}

std::vector<std::size_t> select_parents(const Archive& archive, std::size_t count, Rng& rng)
{
    if (archive.empty())
        throw QdError("cannot select parents from an empty archive");
    const auto& m = archive.members();
    double lo = m.front().curiosity;
    for (const auto& ind : m)
        lo = std::min(lo, ind.curiosity);
    std::vector<double> cumulative(m.size());
    double total = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        total += m[i].curiosity - lo + 1.0;
        cumulative[i] = total;
    }
    std::vector<std::size_t> out(count);
    for (auto& s : out) {
        const double r = rng.uniform() * total;
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
        s = std::min(static_cast<std::size_t>(it - cumulative.begin()), m.size() - 1);
    }
    return out;
}

void curiosity_update(Individual& parent, AddKind outcome)
{
    if (outcome == AddKind::AddedNew || outcome == AddKind::Replaced) {
        parent.curiosity += 1.0;
        ++parent.offspring_added;
    }
    else {
        parent.curiosity -= 0.5;
        ++parent.offspring_rejected;
    }
}

// ---------------------------------------------------------------------------

CsvMetricsSink::CsvMetricsSink(std::ostream& os, bool header) : _os(os)
{
    if (header)
        _os << "generation,archive_size,best_fitness,mean_fitness,insertions,rejections\n";
}

void CsvMetricsSink::on_generation(const GenerationStats& s)
{
    _os << s.generation << ',' << s.archive_size << ',' << std::setprecision(17) << s.best_fitness << ',' << s.mean_fitness << ','
        << s.insertions << ',' << s.rejections << '\n';
}

GenerationStats archive_stats(const Archive& archive)
{
    GenerationStats s;
    s.archive_size = archive.size();
    if (archive.empty())
        return s;
    s.best_fitness = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (const auto& m : archive.members()) {
        s.best_fitness = std::max(s.best_fitness, m.fitness);
        sum += m.fitness;
    }
    s.mean_fitness = sum / static_cast<double>(archive.size());
    return s;
}

namespace {
    struct Offspring {
        Individual cand;
        bool evaluated = false;
        std::optional<std::size_t> parent_slot;
        std::uint64_t parent_id = 0;
    };

    void evaluate_into(const LayerDef& layer, Offspring& o, Rng& rng)
    {
        try {
            Evaluation e = layer.evaluate(o.cand.genotype, rng);
            o.evaluated = e.valid;
            o.cand.descriptor = std::move(e.descriptor);
            o.cand.fitness = e.fitness;
            o.cand.uncertainty = e.uncertainty;
        }
        catch (const std::exception&) {
            o.evaluated = false;
        }
    }
} // namespace

Archive run_evolution(const LayerDef& layer, const ArchiveConfig& acfg, const VariationConfig& vcfg, const EvolutionConfig& ecfg,
    EvolutionObserver* observer)
{
    acfg.validate();
    vcfg.validate();
    ecfg.validate();

    Archive archive(layer.descriptor_space(), acfg);
    const GenotypeLayout layout = layer.layout();
    const auto pop = static_cast<std::size_t>(ecfg.pop_size);
    std::vector<Offspring> batch(pop);

    auto insert_batch = [&](GenerationStats& stats) {
        for (auto& o : batch) {
            AddOutcome outcome;
            if (o.evaluated)
                outcome = archive.classify(o.cand);
            if (observer)
                observer->on_attempt(archive, o.cand, outcome);
            if (outcome.inserted())
                ++stats.insertions;
            else
                ++stats.rejections;
            // Look the parent up before a replacement can reuse its slot.
            std::optional<std::size_t> parent;
            if (o.parent_slot)
                parent = archive.slot_of(o.parent_id, *o.parent_slot);
            if (parent && outcome.inserted() && outcome.kind == AddKind::Replaced && outcome.slot == *parent)
                parent.reset(); // the parent was the victim
            archive.apply(std::move(o.cand), outcome);
            if (parent)
                curiosity_update(archive.member(*parent), outcome.kind);
        }
    };

    // Generation 0: uniform random seeds.
    for (std::size_t i = 0; i < pop; ++i) {
        Rng rng(derive_seed(ecfg.rng_seed, {0, i}));
        batch[i] = Offspring{};
        batch[i].cand.genotype = random_genotype(layout, rng);
        evaluate_into(layer, batch[i], rng);
    }
    {
        GenerationStats ignored;
        insert_batch(ignored);
    }

    for (int gen = 1; gen <= ecfg.nb_generations; ++gen) {
        const auto g = static_cast<std::uint64_t>(gen);
        std::vector<std::size_t> parents;
        if (!archive.empty()) {
            Rng sel(derive_seed(ecfg.rng_seed, {g, ~0ULL}));
            parents = select_parents(archive, pop, sel);
        }
        // Evaluation is pure per offspring; each has its own substream.
        for (std::size_t i = 0; i < pop; ++i) {
            Rng rng(derive_seed(ecfg.rng_seed, {g, i}));
            Offspring& o = batch[i];
            o = Offspring{};
            if (parents.empty()) {
                o.cand.genotype = random_genotype(layout, rng);
            }
            else {
                const Individual& p = archive.member(parents[i]);
                o.parent_slot = parents[i];
                o.parent_id = p.id;
                o.cand.genotype = polynomial_mutate(p.genotype, vcfg, rng);
                o.cand.genotype = structural_mutate(o.cand.genotype, layout, vcfg, rng);
            }
            evaluate_into(layer, o, rng);
        }
        GenerationStats stats;
        insert_batch(stats);
        const auto snapshot = archive_stats(archive);
        stats.generation = gen;
        stats.archive_size = snapshot.archive_size;
        stats.best_fitness = snapshot.best_fitness;
        stats.mean_fitness = snapshot.mean_fitness;
        if (observer)
            observer->on_generation(stats);
    }
    return archive;
}

} // namespace hbr
