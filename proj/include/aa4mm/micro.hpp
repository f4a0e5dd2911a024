#ifndef AA4MM_MICRO_HPP
#define AA4MM_MICRO_HPP

// Micro level: individual birds under boids rules, plus the commanded
// displacement mode driven from the macro level.

#include "aa4mm/geometry.hpp"
#include "aa4mm/steering.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace aa4mm {

using BirdId = std::uint64_t;
using SimTime = std::uint64_t;
using Rng = std::mt19937_64;
using MicroParams = BoidsParams;

struct Bird {
    BirdId id = 0;
    Position pos;
    HeadingDeg heading;

    friend bool operator==(const Bird&, const Bird&) = default;
};

/// Snapshot of the micro level, ascending id.
using MicroObservation = std::vector<Bird>;

struct MicroState {
    std::vector<Bird> birds;
    SimTime tick = 0;
    TorusWorld world;

    friend bool operator==(const MicroState&, const MicroState&) = default;
};

struct Command {
    Vec2 v;
    HeadingDeg heading;

    friend bool operator==(const Command&, const Command&) = default;
};

using CommandSet = std::map<BirdId, Command>;

namespace detail {

// 53 random mantissa bits; unlike std::uniform_real_distribution this is
// identical across standard library implementations.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::vector<std::size_t> order_by_id(const std::vector<Bird>& birds)
{
    std::vector<std::size_t> idx(birds.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return birds[a].id < birds[b].id; });
    return idx;
}

inline std::vector<Neighbor> visible_mates(const Bird& b, const std::vector<Bird>& birds,
                                           const std::vector<std::size_t>& by_id, double vision,
                                           const TorusWorld& w)
{
    std::vector<Neighbor> out;
    for (std::size_t k : by_id) {
        const Bird& o = birds[k];
        if (o.id == b.id)
            continue;
        const double d = torus_distance(b.pos, o.pos, w);
        if (d <= vision)
            out.push_back({o.id, o.pos, o.heading, d});
    }
    return out;
}

} // namespace detail

inline MicroState init_random(std::size_t n, const TorusWorld& world, Rng& rng)
{
    MicroState s;
    s.world = world;
    s.birds.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double x = detail::uniform01(rng) * world.width();
        const double y = detail::uniform01(rng) * world.height();
        const double h = detail::uniform01(rng) * 360.0;
        s.birds.push_back({static_cast<BirdId>(k), wrap(x, y, world), HeadingDeg(h)});
    }
    return s;
}

/// Other birds within `vision` (inclusive), ordered by id.
inline std::vector<Bird> flockmates(const Bird& b, const MicroState& s, const MicroParams& p)
{
    std::vector<Bird> out;
    for (const auto& n : detail::visible_mates(b, s.birds, detail::order_by_id(s.birds), p.vision, s.world))
        out.push_back({n.id, n.pos, n.heading});
    return out;
}

inline Bird step_autonomous(const Bird& b, const std::vector<Bird>& mates, const MicroParams& p, const TorusWorld& w)
{
    std::vector<Neighbor> view;
    view.reserve(mates.size());
    for (const auto& m : mates) {
        if (m.id == b.id)
            throw std::invalid_argument("step_autonomous: mates must exclude the bird itself");
        view.push_back({m.id, m.pos, m.heading, torus_distance(b.pos, m.pos, w)});
    }
    std::sort(view.begin(), view.end(), [](const Neighbor& x, const Neighbor& y) { return x.id < y.id; });
    const HeadingDeg h = steer(b.pos, b.heading, view, p, w);
    return {b.id, translate(b.pos, p.speed * h.unit(), w), h};
}

inline Bird step_commanded(const Bird& b, const Command& cmd, const TorusWorld& w)
{
    return {b.id, translate(b.pos, cmd.v, w), cmd.heading};
}

namespace detail {

inline MicroState micro_step_impl(const MicroState& s, const CommandSet* cmds, const MicroParams& p)
{
    if (cmds) {
        for (const auto& [id, _] : *cmds) {
            const bool known = std::any_of(s.birds.begin(), s.birds.end(), [id = id](const Bird& b) { return b.id == id; });
            if (!known)
                throw std::invalid_argument("micro_step: command for unknown bird " + std::to_string(id));
        }
    }

    const auto by_id = order_by_id(s.birds);
    MicroState next;
    next.world = s.world;
    next.tick = s.tick + 1;
    next.birds.reserve(s.birds.size());
    // Every new bird is computed from the pre-step state.
    for (const auto& b : s.birds) {
        if (cmds) {
            if (auto it = cmds->find(b.id); it != cmds->end()) {
                next.birds.push_back(step_commanded(b, it->second, s.world));
                continue;
            }
        }
        const auto mates = visible_mates(b, s.birds, by_id, p.vision, s.world);
        const HeadingDeg h = steer(b.pos, b.heading, mates, p, s.world);
        next.birds.push_back({b.id, translate(b.pos, p.speed * h.unit(), s.world), h});
    }
    return next;
}

} // namespace detail

/// Pure boids step (no commands).
inline MicroState micro_step(const MicroState& s, const MicroParams& p) { return detail::micro_step_impl(s, nullptr, p); }

/// Commanded birds translate rigidly; every other bird runs the boids rules.
inline MicroState micro_step(const MicroState& s, const CommandSet& cmds, const MicroParams& p)
{
    return detail::micro_step_impl(s, &cmds, p);
}

inline MicroObservation observe(const MicroState& s)
{
    MicroObservation out;
    out.reserve(s.birds.size());
    for (std::size_t k : detail::order_by_id(s.birds))
        out.push_back(s.birds[k]);
    return out;
}

} // namespace aa4mm

#endif // AA4MM_MICRO_HPP
