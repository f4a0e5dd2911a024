#ifndef AA4MM_MACRO_HPP
#define AA4MM_MACRO_HPP

// Macro level: flocks as agents, the registry kept in sync with emergence
// observations, and the per-flock displacement handed down to the birds.

#include "aa4mm/flock_observation.hpp"
#include "aa4mm/geometry.hpp"
#include "aa4mm/micro.hpp"
#include "aa4mm/steering.hpp"

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace aa4mm {

using FlockId = std::uint64_t;
using MacroParams = BoidsParams;

struct Flock {
    FlockId flock_id = 0;
    Position centroid;
    HeadingDeg heading;
    double radius = 0.0;
    std::vector<BirdId> members;

    friend bool operator==(const Flock&, const Flock&) = default;
};

struct MacroState {
    std::vector<Flock> flocks;
    FlockId next_id = 0;
    SimTime macro_tick = 0;
    TorusWorld world;

    friend bool operator==(const MacroState&, const MacroState&) = default;
};

struct Displacement {
    FlockId flock_id = 0;
    std::vector<BirdId> members;
    Vec2 v;
    HeadingDeg heading;

    friend bool operator==(const Displacement&, const Displacement&) = default;
};

using DisplacementList = std::vector<Displacement>;

/// |a ∩ b| / |a ∪ b| for ascending, duplicate-free id lists.
inline double jaccard(const std::vector<BirdId>& a, const std::vector<BirdId>& b)
{
    std::size_t common = 0;
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
        if (*i < *j)
            ++i;
        else if (*j < *i)
            ++j;
        else {
            ++common;
            ++i;
            ++j;
        }
    }
    const std::size_t uni = a.size() + b.size() - common;
    return uni == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(uni);
}

/// A registered-flock / observation pairing chosen by sync_registry.
struct RegistryMatch {
    std::size_t flock_index;
    std::size_t observation_index;
    double jaccard;
};

/// Greedy maximum-overlap pairing: candidate pairs are taken by descending
/// Jaccard index, ties by lowest flock id then lowest observed member id.
/// Pairs without common members never match.
inline std::vector<RegistryMatch> match_registry(const std::vector<Flock>& flocks, const FlockObservationList& obs)
{
    std::vector<RegistryMatch> candidates;
    for (std::size_t f = 0; f < flocks.size(); ++f)
        for (std::size_t o = 0; o < obs.size(); ++o)
            if (double jac = jaccard(flocks[f].members, obs[o].members); jac > 0.0)
                candidates.push_back({f, o, jac});

    std::sort(candidates.begin(), candidates.end(), [&](const RegistryMatch& a, const RegistryMatch& b) {
        return std::tuple(-a.jaccard, flocks[a.flock_index].flock_id, obs[a.observation_index].members.front()) <
               std::tuple(-b.jaccard, flocks[b.flock_index].flock_id, obs[b.observation_index].members.front());
    });

    std::vector<bool> flock_used(flocks.size(), false), obs_used(obs.size(), false);
    std::vector<RegistryMatch> chosen;
    for (const auto& c : candidates) {
        if (flock_used[c.flock_index] || obs_used[c.observation_index])
            continue;
        flock_used[c.flock_index] = obs_used[c.observation_index] = true;
        chosen.push_back(c);
    }
    return chosen;
}

inline void validate_observations(const FlockObservationList& obs)
{
    std::vector<BirdId> all;
    for (const auto& o : obs) {
        if (o.members.empty())
            throw std::invalid_argument("sync_registry: observation without members");
        if (!std::is_sorted(o.members.begin(), o.members.end()))
            throw std::invalid_argument("sync_registry: observation members must be ascending");
        all.insert(all.end(), o.members.begin(), o.members.end());
    }
    std::sort(all.begin(), all.end());
    if (auto it = std::adjacent_find(all.begin(), all.end()); it != all.end())
        throw std::invalid_argument("sync_registry: bird " + std::to_string(*it) + " appears in two observations");
}

/// Update matched flocks, register new ones, drop the ones that vanished.
inline MacroState sync_registry(const MacroState& s, const FlockObservationList& obs)
{
    validate_observations(obs);
    const auto matches = match_registry(s.flocks, obs);

    MacroState next;
    next.world = s.world;
    next.macro_tick = s.macro_tick;
    next.next_id = s.next_id;

    std::vector<bool> obs_used(obs.size(), false);
    for (const auto& m : matches) {
        const auto& o = obs[m.observation_index];
        next.flocks.push_back({s.flocks[m.flock_index].flock_id, o.centroid, o.heading, o.radius, o.members});
        obs_used[m.observation_index] = true;
    }

    std::vector<std::size_t> fresh;
    for (std::size_t o = 0; o < obs.size(); ++o)
        if (!obs_used[o])
            fresh.push_back(o);
    std::sort(fresh.begin(), fresh.end(),
              [&](std::size_t a, std::size_t b) { return obs[a].members.front() < obs[b].members.front(); });
    for (std::size_t o : fresh)
        next.flocks.push_back({next.next_id++, obs[o].centroid, obs[o].heading, obs[o].radius, obs[o].members});

    std::sort(next.flocks.begin(), next.flocks.end(),
              [](const Flock& a, const Flock& b) { return a.flock_id < b.flock_id; });
    return next;
}

/// Distance between flock surfaces, floored at zero.
inline double effective_distance(const Flock& a, const Flock& b, const TorusWorld& w)
{
    return std::max(0.0, torus_distance(a.centroid, b.centroid, w) - a.radius - b.radius);
}

inline MacroState macro_step(const MacroState& s, const MacroParams& p)
{
    std::vector<std::size_t> by_id(s.flocks.size());
    for (std::size_t k = 0; k < by_id.size(); ++k)
        by_id[k] = k;
    std::sort(by_id.begin(), by_id.end(),
              [&](std::size_t a, std::size_t b) { return s.flocks[a].flock_id < s.flocks[b].flock_id; });

    MacroState next = s;
    next.macro_tick = s.macro_tick + 1;
    for (std::size_t k = 0; k < s.flocks.size(); ++k) {
        const Flock& f = s.flocks[k];
        std::vector<Neighbor> mates;
        for (std::size_t j : by_id) {
            const Flock& o = s.flocks[j];
            if (o.flock_id == f.flock_id)
                continue;
            const double d = effective_distance(f, o, s.world);
            if (d <= p.vision)
                mates.push_back({o.flock_id, o.centroid, o.heading, d});
        }
        const HeadingDeg h = steer(f.centroid, f.heading, mates, p, s.world);
        next.flocks[k].heading = h;
        next.flocks[k].centroid = translate(f.centroid, p.speed * h.unit(), s.world);
    }
    return next;
}

inline DisplacementList displacements(const MacroState& before, const MacroState& after)
{
    auto ids = [](const MacroState& s) {
        std::vector<FlockId> out;
        for (const auto& f : s.flocks)
            out.push_back(f.flock_id);
        std::sort(out.begin(), out.end());
        return out;
    };
    if (ids(before) != ids(after))
        throw std::invalid_argument("displacements: flock id sets differ");

    DisplacementList out;
    for (const auto& a : after.flocks) {
        const auto b = std::find_if(before.flocks.begin(), before.flocks.end(),
                                    [&](const Flock& f) { return f.flock_id == a.flock_id; });
        out.push_back({a.flock_id, a.members, torus_delta(b->centroid, a.centroid, after.world), a.heading});
    }
    std::sort(out.begin(), out.end(),
              [](const Displacement& x, const Displacement& y) { return x.flock_id < y.flock_id; });
    return out;
}

} // namespace aa4mm

#endif // AA4MM_MACRO_HPP
