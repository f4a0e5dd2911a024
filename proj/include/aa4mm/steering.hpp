#ifndef AA4MM_STEERING_HPP
#define AA4MM_STEERING_HPP

// Bounded-turn separation / alignment / cohesion shared by birds and flocks.

#include "aa4mm/geometry.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace aa4mm {

struct BoidsParams {
    double vision = 10.0;
    double min_separation = 1.0;
    double max_align_turn = 5.0;
    double max_cohere_turn = 3.0;
    double max_separate_turn = 1.5;
    double speed = 1.0;

    void validate(const std::string& what) const
    {
        for (double v : {vision, min_separation, max_align_turn, max_cohere_turn, max_separate_turn, speed})
            if (!(v >= 0.0) || !std::isfinite(v))
                throw std::invalid_argument(what + ": parameters must be finite and non-negative");
    }

    friend bool operator==(const BoidsParams&, const BoidsParams&) = default;
};

/// A visible neighbour as seen from the steering agent. `distance` is the
/// distance the rules are evaluated against (surface distance for flocks).
struct Neighbor {
    std::uint64_t id;
    Position pos;
    HeadingDeg heading;
    double distance;
};

/// New heading after one application of the rule set. `mates` must be
/// ordered by id and exclude the agent itself.
inline HeadingDeg steer(Position self, HeadingDeg heading, std::span<const Neighbor> mates, const BoidsParams& p,
                        const TorusWorld& w)
{
    if (mates.empty())
        return heading;

    const Neighbor* nearest = &mates.front();
    for (const auto& m : mates)
        if (m.distance < nearest->distance)
            nearest = &m;

    if (nearest->distance < p.min_separation) {
        const auto away = HeadingDeg::of(torus_delta(nearest->pos, self, w));
        return turn_towards(heading, away, p.max_separate_turn);
    }

    double s = 0.0, c = 0.0;
    Vec2 pull{};
    for (const auto& m : mates) {
        s += std::sin(m.heading.radians());
        c += std::cos(m.heading.radians());
        pull = pull + torus_delta(self, m.pos, w);
    }
    if (std::hypot(s, c) > detail::zero_resultant_eps * static_cast<double>(mates.size()))
        heading = turn_towards(heading, HeadingDeg(std::atan2(s, c) * detail::deg_per_rad), p.max_align_turn);
    if (pull.dx != 0.0 || pull.dy != 0.0)
        heading = turn_towards(heading, HeadingDeg::of(pull), p.max_cohere_turn);
    return heading;
}

} // namespace aa4mm

#endif // AA4MM_STEERING_HPP
