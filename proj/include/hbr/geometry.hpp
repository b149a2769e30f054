#ifndef HBR_GEOMETRY_HPP
#define HBR_GEOMETRY_HPP

#include <hbr/kinematics.hpp>

#include <span>
#include <vector>

namespace hbr {

/// Population variance (divides by n); 0 for fewer than two values.
double variance(std::span<const double> v);

struct MedianResult {
    std::vector<double> point;
    bool converged = false;
    int iterations = 0;
};

/// Weiszfeld iteration started from the centroid, with the Vardi-Zhang
/// correction when an iterate meets an input point. An input point reached
/// within `tol` is returned as soon as it passes the optimality test.
MedianResult geometric_median(std::span<const std::vector<double>> points, double tol = 1e-9, int max_iter = 200);

/// Sum of distances from x to the points (the objective minimized above).
double sum_of_distances(std::span<const std::vector<double>> points, std::span<const double> x);

/// Segment lengths |V_i| and signed turn angles b_i in (-pi, pi] of a polyline.
struct ArcGeometry {
    std::vector<double> segment_lengths;
    std::vector<double> turn_angles;
};

ArcGeometry arc_geometry(std::span<const Vec2> waypoints);

struct CircleFit {
    Vec2 center;
    double radius = 0.0;
    bool ok = false; ///< false when the points are (numerically) collinear
};

/// Algebraic (Kasa) least-squares circle fit.
CircleFit kasa_fit(std::span<const Vec2> points);

struct ArcFitConfig {
    double r_max = 2.0;                 ///< larger fitted radii count as straight
    Vec2 center_lo{-1.0, -1.0};         ///< bounds of the start-relative center
    Vec2 center_hi{1.0, 1.0};
};

/// Center (relative to the first waypoint) and polyline length of a drawn arc.
struct ArcDescriptor {
    Vec2 center;
    double length = 0.0;
    bool degenerate = false;
};

ArcDescriptor arc_fit(std::span<const Vec2> waypoints, const ArcFitConfig& cfg = {});

} // namespace hbr

#endif
