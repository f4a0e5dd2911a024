#ifndef AA4MM_GEOMETRY_HPP
#define AA4MM_GEOMETRY_HPP

// Toroidal 2-D world arithmetic and circular statistics.
//
// Angles are in degrees, 0° along +x, counterclockwise positive. Every
// heading handed out by this header is normalized to [0, 360).

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace aa4mm {

struct Vec2 {
    double dx = 0.0;
    double dy = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.dx + b.dx, a.dy + b.dy}; }
    friend Vec2 operator*(double s, Vec2 v) { return {s * v.dx, s * v.dy}; }
    friend Vec2 operator/(Vec2 v, double s) { return {v.dx / s, v.dy / s}; }
    friend bool operator==(Vec2, Vec2) = default;

    double norm() const { return std::hypot(dx, dy); }
};

struct Position {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(Position, Position) = default;
};

class TorusWorld {
public:
    TorusWorld() = default;
    TorusWorld(double width, double height) : width_(width), height_(height)
    {
        if (!(width > 0.0) || !(height > 0.0) || !std::isfinite(width) || !std::isfinite(height))
            throw std::invalid_argument("TorusWorld: extents must be positive and finite");
    }

    double width() const { return width_; }
    double height() const { return height_; }

    friend bool operator==(const TorusWorld&, const TorusWorld&) = default;

private:
    double width_ = 100.0;
    double height_ = 100.0;
};

namespace detail {

inline constexpr double deg_per_rad = 180.0 / std::numbers::pi;
inline constexpr double rad_per_deg = std::numbers::pi / 180.0;

// x mod extent into [0, extent). fmod can return -0.0 or values that round
// up to extent after the correction, so both are clamped explicitly.
inline double wrap_axis(double v, double extent)
{
    double r = std::fmod(v, extent);
    if (r < 0.0)
        r += extent;
    if (r >= extent || r == 0.0)
        r = 0.0;
    return r;
}

inline double minimal_axis_delta(double from, double to, double extent)
{
    double d = to - from;
    const double half = extent / 2.0;
    if (d > half)
        d -= extent;
    else if (d < -half)
        d += extent;
    return d;
}

} // namespace detail

/// A heading in degrees, always held in [0, 360).
class HeadingDeg {
public:
    constexpr HeadingDeg() = default;
    explicit HeadingDeg(double degrees) : deg_(detail::wrap_axis(degrees, 360.0))
    {
        if (!std::isfinite(degrees))
            throw std::invalid_argument("HeadingDeg: non-finite angle");
    }

    double degrees() const { return deg_; }
    double radians() const { return deg_ * detail::rad_per_deg; }
    Vec2 unit() const { return {std::cos(radians()), std::sin(radians())}; }

    /// Heading of a vector; the zero vector maps to 0°.
    static HeadingDeg of(Vec2 v) { return HeadingDeg(std::atan2(v.dy, v.dx) * detail::deg_per_rad); }

    friend bool operator==(HeadingDeg, HeadingDeg) = default;

private:
    double deg_ = 0.0;
};

inline Position wrap(double x, double y, const TorusWorld& w)
{
    if (!std::isfinite(x) || !std::isfinite(y))
        throw std::invalid_argument("wrap: non-finite coordinate");
    return {detail::wrap_axis(x, w.width()), detail::wrap_axis(y, w.height())};
}

inline Position wrap(Position p, const TorusWorld& w) { return wrap(p.x, p.y, w); }

inline Position translate(Position p, Vec2 v, const TorusWorld& w) { return wrap(p.x + v.dx, p.y + v.dy, w); }

/// Minimal displacement from a to b on the torus.
inline Vec2 torus_delta(Position a, Position b, const TorusWorld& w)
{
    return {detail::minimal_axis_delta(a.x, b.x, w.width()), detail::minimal_axis_delta(a.y, b.y, w.height())};
}

inline double torus_distance(Position a, Position b, const TorusWorld& w) { return torus_delta(a, b, w).norm(); }

struct UndefinedMean : std::domain_error {
    UndefinedMean() : std::domain_error("undefined mean: zero resultant") {}
};

namespace detail {

// A resultant shorter than this (per unit vector summed) is treated as zero.
inline constexpr double zero_resultant_eps = 1e-12;

inline std::optional<double> circular_mean_rad(std::span<const double> radians)
{
    double s = 0.0, c = 0.0;
    for (double a : radians) {
        s += std::sin(a);
        c += std::cos(a);
    }
    if (std::hypot(s, c) <= zero_resultant_eps * static_cast<double>(radians.size()))
        return std::nullopt;
    return std::atan2(s, c);
}

} // namespace detail

/// Circular mean, or nullopt for an empty list or a zero resultant.
inline std::optional<HeadingDeg> try_circular_mean(std::span<const HeadingDeg> hs)
{
    if (hs.empty())
        return std::nullopt;
    double s = 0.0, c = 0.0;
    for (auto h : hs) {
        s += std::sin(h.radians());
        c += std::cos(h.radians());
    }
    if (std::hypot(s, c) <= detail::zero_resultant_eps * static_cast<double>(hs.size()))
        return std::nullopt;
    return HeadingDeg(std::atan2(s, c) * detail::deg_per_rad);
}

inline HeadingDeg circular_mean(std::span<const HeadingDeg> hs)
{
    if (hs.empty())
        throw std::invalid_argument("circular_mean: empty list");
    if (auto m = try_circular_mean(hs))
        return *m;
    throw UndefinedMean();
}

/// Signed shortest rotation from `from` to `to`, in (-180, 180]. An exact
/// half turn is reported as +180 (counterclockwise).
inline double signed_turn(HeadingDeg from, HeadingDeg to)
{
    double d = std::fmod(to.degrees() - from.degrees(), 360.0);
    if (d <= -180.0)
        d += 360.0;
    if (d > 180.0)
        d -= 360.0;
    return d;
}

/// Minimal angular difference, in [0, 180].
inline double heading_diff(HeadingDeg a, HeadingDeg b) { return std::fabs(signed_turn(a, b)); }

inline HeadingDeg turn_towards(HeadingDeg current, HeadingDeg target, double max_turn)
{
    if (max_turn < 0.0)
        throw std::invalid_argument("turn_towards: negative max_turn");
    const double d = signed_turn(current, target);
    if (std::fabs(d) <= max_turn)
        return target;
    return HeadingDeg(current.degrees() + std::copysign(max_turn, d));
}

/// Centre of gravity on the torus: each axis is averaged as an angle, so a
/// cluster straddling the seam keeps its centre next to the seam. An axis
/// whose angular resultant vanishes falls back to the arithmetic mean.
inline Position torus_centroid(std::span<const Position> ps, const TorusWorld& w)
{
    if (ps.empty())
        throw std::invalid_argument("torus_centroid: empty list");

    auto axis_mean = [&](auto coord, double extent) {
        std::vector<double> angles;
        angles.reserve(ps.size());
        double plain = 0.0;
        for (const auto& p : ps) {
            angles.push_back(coord(p) * 2.0 * std::numbers::pi / extent);
            plain += coord(p);
        }
        if (auto m = detail::circular_mean_rad(angles))
            return detail::wrap_axis(*m * extent / (2.0 * std::numbers::pi), extent);
        return detail::wrap_axis(plain / static_cast<double>(ps.size()), extent);
    };

    return {axis_mean([](const Position& p) { return p.x; }, w.width()),
            axis_mean([](const Position& p) { return p.y; }, w.height())};
}

} // namespace aa4mm

#endif // AA4MM_GEOMETRY_HPP
