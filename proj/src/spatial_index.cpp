#include <hbr/rng.hpp>
#include <hbr/spatial_index.hpp>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

namespace hbr {

void PointSet::push_back(std::span<const double> p, std::uint64_t id)
{
    assert(p.size() == dim);
    coords.insert(coords.end(), p.begin(), p.end());
    ids.push_back(id);
}

void PointSet::assign(std::size_t slot, std::span<const double> p, std::uint64_t id)
{
    assert(p.size() == dim && slot < ids.size());
    std::copy(p.begin(), p.end(), coords.begin() + static_cast<std::ptrdiff_t>(slot * dim));
    ids[slot] = id;
}

double squared_distance(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

std::optional<Neighbor> linear_nearest(const PointSet& pts, std::span<const double> q, std::optional<std::size_t> exclude)
{
    std::optional<Neighbor> best;
    for (std::size_t s = 0; s < pts.size(); ++s) {
        if (exclude && *exclude == s)
            continue;
        Neighbor n{s, squared_distance(pts.point(s), q), pts.ids[s]};
        if (!best || n < *best)
            best = n;
    }
    return best;
}

std::vector<Neighbor> linear_knn(const PointSet& pts, std::span<const double> q, std::size_t k, std::optional<std::size_t> exclude)
{
    std::vector<Neighbor> all;
    all.reserve(pts.size());
    for (std::size_t s = 0; s < pts.size(); ++s) {
        if (exclude && *exclude == s)
            continue;
        all.push_back({s, squared_distance(pts.point(s), q), pts.ids[s]});
    }
    const std::size_t m = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m), all.end());
    all.resize(m);
    return all;
}

// ---------------------------------------------------------------------------

GridIndex::GridIndex(std::size_t dim, double cell) : _dim(dim), _cell(cell)
{
    assert(cell > 0.0);
}

std::size_t GridIndex::KeyHash::operator()(const Key& k) const
{
    std::uint64_t h = 0;
    for (auto v : k)
        h = mix64(h ^ static_cast<std::uint32_t>(v));
    return static_cast<std::size_t>(h);
}

GridIndex::Key GridIndex::key_of(std::span<const double> p) const
{
    Key k{};
    for (std::size_t i = 0; i < _dim; ++i) {
        const double c = std::floor(p[i] / _cell);
        k[i] = static_cast<std::int32_t>(std::clamp(c, -1.0e9, 1.0e9));
    }
    return k;
}

void GridIndex::insert(std::size_t slot, std::span<const double> p)
{
    _cells[key_of(p)].push_back(slot);
}

void GridIndex::erase(std::size_t slot, std::span<const double> p)
{
    auto it = _cells.find(key_of(p));
    assert(it != _cells.end());
    auto& v = it->second;
    v.erase(std::find(v.begin(), v.end(), slot));
    if (v.empty())
        _cells.erase(it);
}

template <typename Visit>
bool GridIndex::visit_ring(const Key& center, int r, Visit&& visit) const
{
    if (r == 0) {
        if (auto it = _cells.find(center); it != _cells.end())
            visit(it->second);
        return true;
    }
    std::array<int, kMaxDim> off{};
    for (std::size_t i = 0; i < _dim; ++i)
        off[i] = -r;
    while (true) {
        bool on_shell = false;
        for (std::size_t i = 0; i < _dim; ++i)
            on_shell = on_shell || off[i] == -r || off[i] == r;
        if (on_shell) {
            Key k = center;
            for (std::size_t i = 0; i < _dim; ++i)
                k[i] += off[i];
            if (auto it = _cells.find(k); it != _cells.end())
                visit(it->second);
        }
        std::size_t i = 0;
        for (; i < _dim; ++i) {
            if (++off[i] <= r)
                break;
            off[i] = -r;
        }
        if (i == _dim)
            break;
    }
    return true;
}

namespace {
    // Number of cells in the Chebyshev shell of radius r in `dim` dimensions.
    double shell_cells(std::size_t dim, int r)
    {
        if (r == 0)
            return 1.0;
        return std::pow(2.0 * r + 1.0, static_cast<double>(dim)) - std::pow(2.0 * r - 1.0, static_cast<double>(dim));
    }

    // All unvisited points lie strictly farther than r cells from the query.
    bool settled(double d2, int r, double cell)
    {
        const double bound = r * cell;
        return d2 <= bound * bound * (1.0 - 1e-12);
    }
} // namespace

std::optional<Neighbor> GridIndex::nearest(const PointSet& pts, std::span<const double> q, std::optional<std::size_t> exclude) const
{
    std::size_t live = pts.size();
    if (exclude && *exclude < live)
        --live;
    if (live == 0)
        return std::nullopt;
    if (!supports(_dim))
        return linear_nearest(pts, q, exclude);

    const Key center = key_of(q);
    std::optional<Neighbor> best;
    double visited = 0.0;
    for (int r = 0;; ++r) {
        visited += shell_cells(_dim, r);
        if (visited > static_cast<double>(live) + 8.0)
            return linear_nearest(pts, q, exclude);
        visit_ring(center, r, [&](const std::vector<std::size_t>& slots) {
            for (auto s : slots) {
                if (exclude && *exclude == s)
                    continue;
                Neighbor n{s, squared_distance(pts.point(s), q), pts.ids[s]};
                if (!best || n < *best)
                    best = n;
            }
        });
        if (best && settled(best->squared_distance, r, _cell))
            return best;
    }
}

std::vector<Neighbor> GridIndex::knn(const PointSet& pts, std::span<const double> q, std::size_t k, std::optional<std::size_t> exclude) const
{
    std::size_t live = pts.size();
    if (exclude && *exclude < live)
        --live;
    if (live == 0 || k == 0)
        return {};
    if (!supports(_dim) || k >= live)
        return linear_knn(pts, q, k, exclude);

    const Key center = key_of(q);
    std::vector<Neighbor> found;
    double visited = 0.0;
    for (int r = 0;; ++r) {
        visited += shell_cells(_dim, r);
        if (visited > static_cast<double>(live) + 8.0)
            return linear_knn(pts, q, k, exclude);
        visit_ring(center, r, [&](const std::vector<std::size_t>& slots) {
            for (auto s : slots) {
                if (exclude && *exclude == s)
                    continue;
                found.push_back({s, squared_distance(pts.point(s), q), pts.ids[s]});
            }
        });
        if (found.size() >= k) {
            std::partial_sort(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(k), found.end());
            found.resize(k);
            if (settled(found.back().squared_distance, r, _cell))
                return found;
        }
    }
}

// ---------------------------------------------------------------------------

KdTree::KdTree(const PointSet& pts)
{
    _order.resize(pts.size());
    for (std::uint32_t i = 0; i < _order.size(); ++i)
        _order[i] = i;
    if (!_order.empty())
        build(pts, 0, static_cast<std::uint32_t>(_order.size()));
}

std::int32_t KdTree::build(const PointSet& pts, std::uint32_t begin, std::uint32_t end)
{
    constexpr std::uint32_t kLeaf = 8;
    const auto idx = static_cast<std::int32_t>(_nodes.size());
    _nodes.push_back({begin, end});
    if (end - begin <= kLeaf)
        return idx;

    std::uint32_t axis = 0;
    double widest = -1.0;
    for (std::uint32_t a = 0; a < pts.dim; ++a) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::uint32_t i = begin; i < end; ++i) {
            const double v = pts.point(_order[i])[a];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi - lo > widest) {
            widest = hi - lo;
            axis = a;
        }
    }
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(_order.begin() + begin, _order.begin() + mid, _order.begin() + end,
        [&](std::uint32_t a, std::uint32_t b) { return pts.point(a)[axis] < pts.point(b)[axis]; });

    const double split = pts.point(_order[mid])[axis];
    const auto left = build(pts, begin, mid);
    const auto right = build(pts, mid, end);
    Node& n = _nodes[static_cast<std::size_t>(idx)];
    n.axis = axis;
    n.split = split;
    n.left = left;
    n.right = right;
    return idx;
}

void KdTree::search(const PointSet& pts, std::span<const double> q, std::int32_t node, Neighbor& best) const
{
    const Node& n = _nodes[static_cast<std::size_t>(node)];
    if (n.left < 0) {
        for (std::uint32_t i = n.begin; i < n.end; ++i) {
            const auto s = _order[i];
            Neighbor c{s, squared_distance(pts.point(s), q), pts.ids[s]};
            if (c < best)
                best = c;
        }
        return;
    }
    const double diff = q[n.axis] - n.split;
    const auto near = diff < 0.0 ? n.left : n.right;
    const auto far = diff < 0.0 ? n.right : n.left;
    search(pts, q, near, best);
    if (diff * diff <= best.squared_distance)
        search(pts, q, far, best);
}

std::optional<Neighbor> KdTree::nearest(const PointSet& pts, std::span<const double> q) const
{
    if (_nodes.empty())
        return std::nullopt;
    Neighbor best{0, std::numeric_limits<double>::infinity(), std::numeric_limits<std::uint64_t>::max()};
    search(pts, q, 0, best);
    return best;
}

} // namespace hbr
