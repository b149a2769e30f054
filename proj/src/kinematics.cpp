#include <hbr/kinematics.hpp>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace hbr {

double Vec2::norm() const { return std::hypot(x, y); }

JointConfig::JointConfig(std::span<const double> angles)
{
    if (angles.size() > kMaxJoints)
        throw KinematicsError("too many joints");
    dof = static_cast<std::uint8_t>(angles.size());
    std::copy(angles.begin(), angles.end(), q.begin());
}

bool JointConfig::operator==(const JointConfig& o) const
{
    return dof == o.dof && std::equal(q.begin(), q.begin() + dof, o.q.begin());
}

JointConfig Robot::home() const
{
    JointConfig q;
    q.dof = static_cast<std::uint8_t>(dof());
    const auto lim = limits();
    for (std::size_t i = 0; i < dof(); ++i)
        q[i] = std::clamp(0.0, lim[i].lo, lim[i].hi);
    return q;
}

void Robot::check_limits(const JointConfig& q) const
{
    constexpr double kSlack = 1e-9;
    if (q.dof != dof())
        throw KinematicsError("joint count mismatch");
    const auto lim = limits();
    for (std::size_t i = 0; i < dof(); ++i) {
        if (!(q[i] >= lim[i].lo - kSlack && q[i] <= lim[i].hi + kSlack)) {
            std::ostringstream os;
            os << name() << ": joint " << i << " angle " << q[i] << " outside [" << lim[i].lo << ", " << lim[i].hi << "]";
            throw KinematicsError(os.str());
        }
    }
}

JointConfig Robot::from_genes(std::span<const double> genes) const
{
    assert(genes.size() == dof());
    JointConfig q;
    q.dof = static_cast<std::uint8_t>(dof());
    const auto lim = limits();
    for (std::size_t i = 0; i < dof(); ++i)
        q[i] = lim[i].lo + genes[i] * (lim[i].hi - lim[i].lo);
    return q;
}

// ---------------------------------------------------------------------------

PlanarArm::PlanarArm() : PlanarArm(std::vector<double>(8, 0.125), std::vector<JointLimit>(8, {-std::numbers::pi / 2, std::numbers::pi / 2})) {}

PlanarArm::PlanarArm(std::vector<double> link_lengths, std::vector<JointLimit> limits) : _links(std::move(link_lengths)), _limits(std::move(limits))
{
    if (_links.empty() || _links.size() > kMaxJoints || _links.size() != _limits.size())
        throw KinematicsError("planar arm: need 1..8 links with one limit each");
    for (double l : _links)
        if (!(l > 0.0))
            throw KinematicsError("planar arm: link lengths must be > 0");
    for (const auto& lim : _limits)
        if (!(lim.lo < lim.hi))
            throw KinematicsError("planar arm: joint limits need lo < hi");
}

Vec2 PlanarArm::effector(const JointConfig& q) const
{
    check_limits(q);
    Vec2 p;
    double angle = 0.0;
    for (std::size_t i = 0; i < _links.size(); ++i) {
        angle += q[i];
        p.x += _links[i] * std::cos(angle);
        p.y += _links[i] * std::sin(angle);
    }
    return p;
}

double PlanarArm::reach() const { return std::accumulate(_links.begin(), _links.end(), 0.0); }

Vec2 forward_planar(const PlanarArm& arm, const JointConfig& q) { return arm.effector(q); }

// ---------------------------------------------------------------------------

SliceFrame SpatialArm4::default_slice(double upper_arm, double forearm, double plane_x, double half_thickness)
{
    SliceFrame s;
    s.plane_x = plane_x;
    s.half_thickness = half_thickness;
    const double reach = upper_arm + forearm;
    const double near_x = std::max(0.0, plane_x - half_thickness);
    s.scale = 1.0 / std::sqrt(reach * reach - near_x * near_x);
    return s;
}

SpatialArm4::SpatialArm4()
    : SpatialArm4(0.105, 0.114,
        {{-std::numbers::pi / 2, std::numbers::pi / 2}, {-std::numbers::pi / 2, std::numbers::pi / 2}, {-std::numbers::pi / 2, std::numbers::pi / 2},
            {0.0, std::numbers::pi}},
        default_slice(0.105, 0.114, 0.05, 0.01))
{
}

SpatialArm4::SpatialArm4(double upper_arm, double forearm, std::vector<JointLimit> limits, SliceFrame slice)
    : _upper(upper_arm), _forearm(forearm), _limits(std::move(limits)), _slice(slice)
{
    if (!(_upper > 0.0 && _forearm > 0.0))
        throw KinematicsError("spatial arm: link lengths must be > 0");
    if (_limits.size() != 4)
        throw KinematicsError("spatial arm: exactly 4 joint limits required");
    if (!(_slice.scale > 0.0))
        throw KinematicsError("spatial arm: slice scale must be > 0");
}

Vec3 SpatialArm4::forward(const JointConfig& q) const
{
    check_limits(q);
    const double pitch = q[0], roll = q[1], yaw = q[2], elbow = q[3];
    // Forearm in the upper-arm frame: elbow roll about z, then elbow yaw about
    // the upper-arm (x) axis.
    const double fx = _forearm * std::cos(elbow);
    const double fy0 = _forearm * std::sin(elbow);
    const Vec3 a{_upper + fx, fy0 * std::cos(yaw), fy0 * std::sin(yaw)};
    // Shoulder roll about z, then shoulder pitch about y.
    const Vec3 b{a.x * std::cos(roll) - a.y * std::sin(roll), a.x * std::sin(roll) + a.y * std::cos(roll), a.z};
    return {b.x * std::cos(pitch) + b.z * std::sin(pitch), b.y, -b.x * std::sin(pitch) + b.z * std::cos(pitch)};
}

Vec2 SpatialArm4::effector(const JointConfig& q) const { return _slice.project(forward(q)); }

bool SpatialArm4::in_workspace(const JointConfig& q) const
{
    return std::abs(forward(q).x - _slice.plane_x) <= _slice.half_thickness;
}

double SpatialArm4::reach() const { return (_upper + _forearm) * _slice.scale; }

// ---------------------------------------------------------------------------

void interpolate_append(const Robot& robot, const JointConfig& q_from, const JointConfig& q_to, int steps, bool pen_down, Trajectory& out)
{
    assert(steps >= 1);
    assert(q_from.dof == q_to.dof);
    TrajectoryPoint pt;
    pt.pen_down = pen_down;
    pt.joints.dof = q_to.dof;
    for (int k = 1; k <= steps; ++k) {
        if (k == steps) {
            pt.joints = q_to;
        }
        else {
            const double t = static_cast<double>(k) / steps;
            for (std::size_t j = 0; j < q_to.dof; ++j)
                pt.joints[j] = q_from[j] + t * (q_to[j] - q_from[j]);
        }
        pt.position = robot.effector(pt.joints);
        out.points.push_back(pt);
    }
}

Trajectory interpolate_execute(const Robot& robot, const JointConfig& q_from, const JointConfig& q_to, int steps, bool pen_down)
{
    if (steps < 1)
        throw KinematicsError("interpolation needs at least one step");
    Trajectory t;
    t.points.reserve(static_cast<std::size_t>(steps));
    interpolate_append(robot, q_from, q_to, steps, pen_down, t);
    t.mark_waypoint();
    return t;
}

} // namespace hbr
