#include <doctest.h>

#include <hbr/geometry.hpp>
#include <hbr/rng.hpp>

#include <cmath>
#include <numbers>

using namespace hbr;

namespace {

using Points = std::vector<std::vector<double>>;

double summed(const Points& pts, double x, double y)
{
    double s = 0.0;
    for (const auto& p : pts)
        s += std::hypot(p[0] - x, p[1] - y);
    return s;
}

// Exhaustive grid search, re-centred on the best cell and shrunk until the
// cell size is far below the tolerance. The objective is convex, so each
// zoom window keeps the minimizer.
std::pair<double, double> grid_minimizer(const Points& pts)
{
    double lo_x = pts[0][0], hi_x = lo_x, lo_y = pts[0][1], hi_y = lo_y;
    for (const auto& p : pts) {
        lo_x = std::min(lo_x, p[0]);
        hi_x = std::max(hi_x, p[0]);
        lo_y = std::min(lo_y, p[1]);
        hi_y = std::max(hi_y, p[1]);
    }
    double cx = 0.5 * (lo_x + hi_x), cy = 0.5 * (lo_y + hi_y);
    double half = 0.5 * std::max(hi_x - lo_x, hi_y - lo_y) + 1e-9;
    constexpr int n = 100;
    while (half > 1e-11) {
        double best = std::numeric_limits<double>::infinity(), bx = cx, by = cy;
        for (int i = -n; i <= n; ++i)
            for (int j = -n; j <= n; ++j) {
                const double x = cx + half * i / n, y = cy + half * j / n;
                const double f = summed(pts, x, y);
                if (f < best)
                    best = f, bx = x, by = y;
            }
        cx = bx;
        cy = by;
        half *= 4.0 / n;
    }
    return {cx, cy};
}

// Geometric circle fit by Gauss-Newton on the orthogonal residuals.
Vec2 geometric_circle_fit(const std::vector<Vec2>& pts, Vec2 c, double r)
{
    for (int it = 0; it < 100; ++it) {
        double jtj[3][3] = {}, jtr[3] = {};
        for (const auto& p : pts) {
            const double dx = c.x - p.x, dy = c.y - p.y, d = std::hypot(dx, dy);
            const double jrow[3] = {dx / d, dy / d, -1.0};
            const double res = d - r;
            for (int a = 0; a < 3; ++a) {
                jtr[a] += jrow[a] * res;
                for (int b = 0; b < 3; ++b)
                    jtj[a][b] += jrow[a] * jrow[b];
            }
        }
        // Cramer's rule on the 3x3 normal equations.
        auto det3 = [](double m[3][3]) {
            return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        };
        const double det = det3(jtj);
        double step[3];
        for (int k = 0; k < 3; ++k) {
            double m[3][3];
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b)
                    m[a][b] = b == k ? jtr[a] : jtj[a][b];
            step[k] = det3(m) / det;
        }
        c.x -= step[0];
        c.y -= step[1];
        r -= step[2];
        if (std::abs(step[0]) + std::abs(step[1]) + std::abs(step[2]) < 1e-15)
            break;
    }
    return c;
}

} // namespace

TEST_CASE("population variance")
{
    CHECK(variance(std::vector<double>{}) == 0.0);
    CHECK(variance(std::vector<double>{3.0}) == 0.0);
    CHECK(variance(std::vector<double>{1.0, 3.0}) == 1.0);
    const double v[8] = {std::numbers::pi / 2, -std::numbers::pi / 2, 0, 0, 0, 0, 0, 0};
    CHECK(variance(v) == doctest::Approx(2.0 * std::pow(std::numbers::pi / 2, 2) / 8.0).epsilon(1e-15));
}

TEST_CASE("geometric median")
{
    SUBCASE("one point")
    {
        const Points p{{0.3, -2.0}};
        const auto r = geometric_median(p);
        CHECK(r.point == p[0]);
        CHECK(r.converged);
    }
    SUBCASE("equilateral triangle gives the centroid")
    {
        const double h = std::sqrt(3.0) / 2.0;
        const Points p{{0.0, 0.0}, {1.0, 0.0}, {0.5, h}};
        const auto r = geometric_median(p);
        CHECK(r.point[0] == doctest::Approx(0.5).epsilon(1e-8));
        CHECK(r.point[1] == doctest::Approx(h / 3.0).epsilon(1e-8));
    }
    SUBCASE("a repeated point dominates")
    {
        const Points p{{0, 0}, {0, 0}, {0, 0}, {10, 10}};
        const auto r = geometric_median(p);
        CHECK(std::hypot(r.point[0], r.point[1]) < 1e-9);
        const auto [gx, gy] = grid_minimizer(p);
        CHECK(std::abs(gx) < 1e-6);
        CHECK(std::abs(gy) < 1e-6);
    }
    SUBCASE("random sets agree with the grid-search minimizer")
    {
        Rng rng(31);
        for (int t = 0; t < 20; ++t) {
            const int n = 2 + static_cast<int>(rng.below(6));
            Points p;
            for (int i = 0; i < n; ++i)
                p.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
            const auto r = geometric_median(p);
            const auto [gx, gy] = grid_minimizer(p);
            CHECK(sum_of_distances(p, r.point) <= summed(p, gx, gy) + 1e-6);
        }
    }
    SUBCASE("never worse than the centroid")
    {
        Rng rng(32);
        for (int t = 0; t < 200; ++t) {
            const int n = 1 + static_cast<int>(rng.below(30));
            Points p;
            std::vector<double> c(3, 0.0);
            for (int i = 0; i < n; ++i) {
                p.push_back({rng.normal(), rng.normal(), rng.uniform() < 0.3 ? 0.0 : rng.normal()});
                for (int k = 0; k < 3; ++k)
                    c[k] += p.back()[k] / n;
            }
            CHECK(sum_of_distances(p, geometric_median(p).point) <= sum_of_distances(p, c) + 1e-12);
        }
    }
    SUBCASE("iteration cap reports non-convergence")
    {
        const Points p{{0, 0}, {1, 0}, {0, 1}, {5, 7}};
        const auto r = geometric_median(p, 1e-15, 1);
        CHECK_FALSE(r.converged);
        CHECK(r.iterations == 1);
    }
}

TEST_CASE("arc geometry")
{
    const std::vector<Vec2> square{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    const ArcGeometry g = arc_geometry(square);
    CHECK(g.segment_lengths == std::vector<double>{1.0, 1.0, 1.0});
    REQUIRE(g.turn_angles.size() == 2);
    CHECK(g.turn_angles[0] == doctest::Approx(std::numbers::pi / 2));
    CHECK(g.turn_angles[1] == doctest::Approx(std::numbers::pi / 2));

    const std::vector<Vec2> back{{0, 0}, {1, 0}, {0, 0}};
    CHECK(arc_geometry(back).turn_angles[0] == std::numbers::pi);

    const std::vector<Vec2> right{{0, 0}, {1, 0}, {1, -1}};
    CHECK(arc_geometry(right).turn_angles[0] == doctest::Approx(-std::numbers::pi / 2));
}

TEST_CASE("circle fitting")
{
    SUBCASE("exact circle through the start point")
    {
        std::vector<Vec2> pts;
        for (int i = 0; i < 6; ++i) {
            const double a = -std::numbers::pi / 2 + 0.4 * i;
            pts.push_back({std::cos(a), 1.0 + std::sin(a)});
        }
        const CircleFit f = kasa_fit(pts);
        REQUIRE(f.ok);
        CHECK(f.radius == doctest::Approx(1.0).epsilon(1e-12));
        const ArcDescriptor d = arc_fit(pts);
        CHECK_FALSE(d.degenerate);
        CHECK(std::abs(d.center.x) < 1e-12);
        CHECK(d.center.y == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("collinear points take the clamped-center branch")
    {
        std::vector<Vec2> pts;
        for (int i = 0; i < 6; ++i)
            pts.push_back({0.1 * i, 0.05 * i});
        CHECK_FALSE(kasa_fit(pts).ok);
        const ArcDescriptor d = arc_fit(pts);
        CHECK(d.degenerate);
        CHECK(d.length == doctest::Approx(5 * std::hypot(0.1, 0.05)));
        // Left normal of (2,1)/sqrt5 scaled to r_max = 2, then clamped to [-1,1]^2.
        CHECK(d.center.x == doctest::Approx(-2.0 / std::sqrt(5.0) * 1.0));
        CHECK(d.center.y == doctest::Approx(1.0));
    }
    SUBCASE("zero-length path")
    {
        const std::vector<Vec2> pts(6, Vec2{0.3, 0.3});
        const ArcDescriptor d = arc_fit(pts);
        CHECK(d.degenerate);
        CHECK(d.length == 0.0);
        CHECK(d.center.x == 0.0);
        CHECK(d.center.y == 1.0);
    }
    SUBCASE("noisy samples recover the center like a geometric fit")
    {
        Rng rng(77);
        for (int t = 0; t < 20; ++t) {
            const Vec2 c{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
            const double r = rng.uniform(0.2, 0.8);
            const double a0 = rng.uniform(-3, 3);
            std::vector<Vec2> pts;
            for (int i = 0; i < 6; ++i) {
                const double a = a0 + 0.5 * i;
                pts.push_back({c.x + r * std::cos(a) + 1e-3 * rng.normal(), c.y + r * std::sin(a) + 1e-3 * rng.normal()});
            }
            const CircleFit f = kasa_fit(pts);
            REQUIRE(f.ok);
            const Vec2 g = geometric_circle_fit(pts, f.center, f.radius);
            CHECK((f.center - g).norm() < 1e-2);
            CHECK((f.center - c).norm() < 1e-2 + (g - c).norm());
        }
    }
}
