#ifndef HBR_SPATIAL_INDEX_HPP
#define HBR_SPATIAL_INDEX_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace hbr {

/// Flat storage of `dim`-dimensional points, each tagged with a member id.
/// Slots are stable; a slot may be overwritten in place.
struct PointSet {
    std::size_t dim = 0;
    std::vector<double> coords;
    std::vector<std::uint64_t> ids;

    std::size_t size() const { return ids.size(); }
    std::span<const double> point(std::size_t slot) const { return {coords.data() + slot * dim, dim}; }
    void push_back(std::span<const double> p, std::uint64_t id);
    void assign(std::size_t slot, std::span<const double> p, std::uint64_t id);
};

double squared_distance(std::span<const double> a, std::span<const double> b);

/// A neighbor found by a query, ordered by (squared distance, id).
struct Neighbor {
    std::size_t slot;
    double squared_distance;
    std::uint64_t id;

    bool operator<(const Neighbor& o) const
    {
        return squared_distance < o.squared_distance || (squared_distance == o.squared_distance && id < o.id);
    }
};

/// Exhaustive queries; the reference every index must agree with.
std::optional<Neighbor> linear_nearest(const PointSet& pts, std::span<const double> q, std::optional<std::size_t> exclude = {});
std::vector<Neighbor> linear_knn(const PointSet& pts, std::span<const double> q, std::size_t k, std::optional<std::size_t> exclude = {});

/// Uniform hash grid with cubic cells of side `cell`, for dynamic point sets
/// of dimension at most kMaxDim. Queries expand Chebyshev rings around the
/// query cell and fall back to a linear scan once a ring would touch more
/// cells than there are points, so results equal the linear queries exactly.
class GridIndex {
public:
    static constexpr std::size_t kMaxDim = 4;

    GridIndex() = default;
    GridIndex(std::size_t dim, double cell);

    bool supports(std::size_t dim) const { return dim <= kMaxDim; }

    void insert(std::size_t slot, std::span<const double> p);
    void erase(std::size_t slot, std::span<const double> p);
    void clear() { _cells.clear(); }

    std::optional<Neighbor> nearest(const PointSet& pts, std::span<const double> q, std::optional<std::size_t> exclude = {}) const;
    std::vector<Neighbor> knn(const PointSet& pts, std::span<const double> q, std::size_t k, std::optional<std::size_t> exclude = {}) const;

private:
    using Key = std::array<std::int32_t, kMaxDim>;
    struct KeyHash {
        std::size_t operator()(const Key& k) const;
    };

    Key key_of(std::span<const double> p) const;
    template <typename Visit>
    bool visit_ring(const Key& center, int r, Visit&& visit) const;

    std::size_t _dim = 0;
    double _cell = 1.0;
    std::unordered_map<Key, std::vector<std::size_t>, KeyHash> _cells;
};

/// Static k-d tree over a frozen point set; exact nearest neighbor with the
/// lowest-id tie rule.
class KdTree {
public:
    KdTree() = default;
    explicit KdTree(const PointSet& pts);

    std::optional<Neighbor> nearest(const PointSet& pts, std::span<const double> q) const;

private:
    struct Node {
        std::uint32_t begin, end;
        std::int32_t left = -1, right = -1;
        std::uint32_t axis = 0;
        double split = 0.0;
    };

    std::int32_t build(const PointSet& pts, std::uint32_t begin, std::uint32_t end);
    void search(const PointSet& pts, std::span<const double> q, std::int32_t node, Neighbor& best) const;

    std::vector<std::uint32_t> _order;
    std::vector<Node> _nodes;
};

} // namespace hbr

#endif
