#ifndef HBR_KINEMATICS_HPP
#define HBR_KINEMATICS_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hbr {

struct Vec2 {
    double x = 0.0, y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    bool operator==(const Vec2&) const = default;
    double norm() const;
};

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

inline constexpr std::size_t kMaxJoints = 8;

/// Joint angles in radians; fixed capacity so trajectories stay allocation-free.
struct JointConfig {
    std::array<double, kMaxJoints> q{};
    std::uint8_t dof = 0;

    JointConfig() = default;
    explicit JointConfig(std::span<const double> angles);

    std::span<const double> angles() const { return {q.data(), dof}; }
    std::span<double> angles() { return {q.data(), dof}; }
    double operator[](std::size_t i) const { return q[i]; }
    double& operator[](std::size_t i) { return q[i]; }
    bool operator==(const JointConfig& o) const;
};

struct JointLimit {
    double lo, hi;
};

class KinematicsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrajectoryPoint {
    Vec2 position;
    JointConfig joints;
    bool pen_down = false;
};

/// Timed effector path; `waypoints` index the points reached at the end of
/// each controller-level step.
struct Trajectory {
    std::vector<TrajectoryPoint> points;
    std::vector<std::size_t> waypoints;

    bool empty() const { return points.empty(); }
    void mark_waypoint() { waypoints.push_back(points.size() - 1); }
};

/// A robot whose effector is observed as a point in the 2D drawing plane.
class Robot {
public:
    virtual ~Robot() = default;
    virtual std::string name() const = 0;
    virtual std::size_t dof() const = 0;
    virtual std::span<const JointLimit> limits() const = 0;
    /// Effector position in drawing coordinates; throws on out-of-limit angles.
    virtual Vec2 effector(const JointConfig& q) const = 0;
    /// False when the effector is off the drawing surface.
    virtual bool in_workspace(const JointConfig&) const { return true; }
    virtual JointConfig home() const;
    /// Upper bound on the effector's distance from the drawing origin.
    virtual double reach() const = 0;

    void check_limits(const JointConfig& q) const;
    JointConfig from_genes(std::span<const double> genes) const;
};

/// Planar serial arm with revolute joints; angles accumulate from the base.
class PlanarArm : public Robot {
public:
    /// 8 equal links of 1/8 m, limits [-pi/2, pi/2].
    PlanarArm();
    PlanarArm(std::vector<double> link_lengths, std::vector<JointLimit> limits);

    std::string name() const override { return "planar"; }
    std::size_t dof() const override { return _links.size(); }
    std::span<const JointLimit> limits() const override { return _limits; }
    Vec2 effector(const JointConfig& q) const override;
    double reach() const override;

    std::span<const double> link_lengths() const { return _links; }

private:
    std::vector<double> _links;
    std::vector<JointLimit> _limits;
};

/// Affine map from a vertical slice plane (y, z) onto the drawing plane.
struct SliceFrame {
    double plane_x = 0.05;        ///< slice plane distance in front of the shoulder, m
    double half_thickness = 0.01; ///< hand must lie within this slab, m
    double center_y = 0.0, center_z = 0.0;
    double scale = 1.0; ///< drawing units per meter

    Vec2 project(const Vec3& p) const { return {scale * (p.y - center_y), scale * (p.z - center_z)}; }
    Vec3 unproject(Vec2 d) const { return {plane_x, d.x / scale + center_y, d.y / scale + center_z}; }
};

/// Four-joint humanoid arm (shoulder pitch/roll, elbow yaw/roll) drawing in a
/// vertical slice in front of the shoulder.
class SpatialArm4 : public Robot {
public:
    SpatialArm4();
    SpatialArm4(double upper_arm, double forearm, std::vector<JointLimit> limits, SliceFrame slice);

    std::string name() const override { return "spatial"; }
    std::size_t dof() const override { return 4; }
    std::span<const JointLimit> limits() const override { return _limits; }
    Vec2 effector(const JointConfig& q) const override;
    bool in_workspace(const JointConfig& q) const override;
    double reach() const override;

    Vec3 forward(const JointConfig& q) const;
    const SliceFrame& slice() const { return _slice; }
    double upper_arm() const { return _upper; }
    double forearm() const { return _forearm; }

    /// Slice scale that maps the widest in-slab hand circle onto the unit disk.
    static SliceFrame default_slice(double upper_arm, double forearm, double plane_x, double half_thickness);

private:
    double _upper, _forearm;
    std::vector<JointLimit> _limits;
    SliceFrame _slice;
};

Vec2 forward_planar(const PlanarArm& arm, const JointConfig& q);

/// Linear joint-space interpolation; appends `steps` points (the last equal
/// to the effector at q_to) and returns them as a trajectory.
Trajectory interpolate_execute(const Robot& robot, const JointConfig& q_from, const JointConfig& q_to, int steps, bool pen_down = false);
void interpolate_append(const Robot& robot, const JointConfig& q_from, const JointConfig& q_to, int steps, bool pen_down, Trajectory& out);

} // namespace hbr

#endif
