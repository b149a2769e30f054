#include <hbr/geometry.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numbers>

namespace hbr {

double variance(std::span<const double> v)
{
    if (v.size() < 2)
        return 0.0;
    double mean = 0.0;
    for (double x : v)
        mean += x;
    mean /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v)
        s += (x - mean) * (x - mean);
    return s / static_cast<double>(v.size());
}

double sum_of_distances(std::span<const std::vector<double>> points, std::span<const double> x)
{
    double s = 0.0;
    for (const auto& p : points) {
        double d2 = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            d2 += (p[i] - x[i]) * (p[i] - x[i]);
        s += std::sqrt(d2);
    }
    return s;
}

MedianResult geometric_median(std::span<const std::vector<double>> points, double tol, int max_iter)
{
    assert(!points.empty());
    const std::size_t n = points.size();
    const std::size_t dim = points.front().size();
    MedianResult res;
    if (n == 1) {
        res.point = points.front();
        res.converged = true;
        return res;
    }

    std::vector<double> y(dim, 0.0);
    for (const auto& p : points)
        for (std::size_t i = 0; i < dim; ++i)
            y[i] += p[i] / static_cast<double>(n);

    std::vector<double> best = y;
    double best_f = sum_of_distances(points, y);
    std::vector<double> num(dim), resultant(dim), next(dim);

    for (int it = 1; it <= max_iter; ++it) {
        res.iterations = it;
        std::fill(num.begin(), num.end(), 0.0);
        std::fill(resultant.begin(), resultant.end(), 0.0);
        double den = 0.0;
        double coincident = 0.0;
        const std::vector<double>* hit = nullptr;
        double hit_dist = std::numeric_limits<double>::infinity();
        for (const auto& p : points) {
            double d2 = 0.0;
            for (std::size_t i = 0; i < dim; ++i)
                d2 += (p[i] - y[i]) * (p[i] - y[i]);
            const double d = std::sqrt(d2);
            if (d <= tol) {
                coincident += 1.0;
                if (d < hit_dist) {
                    hit_dist = d;
                    hit = &p;
                }
                continue;
            }
            for (std::size_t i = 0; i < dim; ++i) {
                num[i] += p[i] / d;
                resultant[i] += (p[i] - y[i]) / d;
            }
            den += 1.0 / d;
        }
        if (den == 0.0) { // every point coincides with y
            res.point = hit ? *hit : y;
            res.converged = true;
            return res;
        }
        if (coincident > 0.0) {
            double r = 0.0;
            for (double v : resultant)
                r += v * v;
            r = std::sqrt(r);
            if (r <= coincident) {
                // The pull of the other points cannot move y off this input point.
                res.point = *hit;
                res.converged = true;
                return res;
            }
            const double w = coincident / r;
            for (std::size_t i = 0; i < dim; ++i)
                next[i] = (1.0 - w) * (num[i] / den) + w * y[i];
        }
        else {
            for (std::size_t i = 0; i < dim; ++i)
                next[i] = num[i] / den;
        }

        double step2 = 0.0;
        for (std::size_t i = 0; i < dim; ++i)
            step2 += (next[i] - y[i]) * (next[i] - y[i]);
        y.swap(next);
        const double f = sum_of_distances(points, y);
        if (f <= best_f) {
            best_f = f;
            best = y;
        }
        if (std::sqrt(step2) < tol) {
            res.point = y;
            res.converged = true;
            return res;
        }
    }
    res.point = best;
    res.converged = false;
    return res;
}

// ---------------------------------------------------------------------------

ArcGeometry arc_geometry(std::span<const Vec2> waypoints)
{
    ArcGeometry g;
    if (waypoints.size() < 2)
        return g;
    std::vector<Vec2> seg;
    for (std::size_t i = 1; i < waypoints.size(); ++i) {
        seg.push_back(waypoints[i] - waypoints[i - 1]);
        g.segment_lengths.push_back(seg.back().norm());
    }
    for (std::size_t i = 1; i < seg.size(); ++i) {
        const Vec2 a = seg[i - 1], b = seg[i];
        double angle = std::atan2(a.x * b.y - a.y * b.x, a.x * b.x + a.y * b.y);
        if (angle <= -std::numbers::pi)
            angle = std::numbers::pi;
        g.turn_angles.push_back(angle);
    }
    return g;
}

CircleFit kasa_fit(std::span<const Vec2> points)
{
    CircleFit fit;
    const auto n = static_cast<Eigen::Index>(points.size());
    if (n < 3)
        return fit;

    // Center and scale for conditioning.
    Vec2 mean;
    for (const auto& p : points)
        mean = mean + p;
    mean = mean * (1.0 / static_cast<double>(n));
    double scale = 0.0;
    for (const auto& p : points)
        scale += (p.x - mean.x) * (p.x - mean.x) + (p.y - mean.y) * (p.y - mean.y);
    scale = std::sqrt(scale / static_cast<double>(n));
    if (scale <= 0.0)
        return fit;

    Eigen::MatrixXd a(n, 3);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double u = (points[static_cast<std::size_t>(i)].x - mean.x) / scale;
        const double v = (points[static_cast<std::size_t>(i)].y - mean.y) / scale;
        a(i, 0) = u;
        a(i, 1) = v;
        a(i, 2) = 1.0;
        b(i) = -(u * u + v * v);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv(2) <= 1e-10 * sv(0))
        return fit;
    const Eigen::Vector3d x = svd.solve(b);
    const double cu = -x(0) / 2.0, cv = -x(1) / 2.0;
    const double r2 = cu * cu + cv * cv - x(2);
    if (!(r2 > 0.0))
        return fit;
    fit.center = {mean.x + scale * cu, mean.y + scale * cv};
    fit.radius = scale * std::sqrt(r2);
    fit.ok = std::isfinite(fit.radius);
    return fit;
}

ArcDescriptor arc_fit(std::span<const Vec2> waypoints, const ArcFitConfig& cfg)
{
    ArcDescriptor d;
    if (waypoints.empty())
        return d;
    const Vec2 start = waypoints.front();
    for (std::size_t i = 1; i < waypoints.size(); ++i)
        d.length += (waypoints[i] - waypoints[i - 1]).norm();

    const CircleFit fit = kasa_fit(waypoints);
    if (fit.ok && fit.radius <= cfg.r_max) {
        d.center = fit.center - start;
    }
    else {
        d.degenerate = true;
        Vec2 dir = waypoints.back() - start;
        const double len = dir.norm();
        dir = len > 1e-12 ? dir * (1.0 / len) : Vec2{1.0, 0.0};
        d.center = Vec2{-dir.y, dir.x} * cfg.r_max;
    }
    d.center.x = std::clamp(d.center.x, cfg.center_lo.x, cfg.center_hi.x);
    d.center.y = std::clamp(d.center.y, cfg.center_lo.y, cfg.center_hi.y);
    return d;
}

} // namespace hbr
