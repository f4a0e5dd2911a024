#ifndef AA4MM_COUPLING_HPP
#define AA4MM_COUPLING_HPP

// Interpretation transformers between the two levels.
//
//   emergence  : MicroObservation  -> FlockObservationList  (reduces)
//   immergence : DisplacementList  -> r CommandSets         (expands)

#include "aa4mm/flock_observation.hpp"
#include "aa4mm/geometry.hpp"
#include "aa4mm/macro.hpp"
#include "aa4mm/micro.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace aa4mm {

enum class RadiusMode { mean, max, rms };

inline RadiusMode parse_radius_mode(const std::string& s)
{
    if (s == "mean")
        return RadiusMode::mean;
    if (s == "max")
        return RadiusMode::max;
    if (s == "rms" || s == "stddev")
        return RadiusMode::rms;
    throw std::invalid_argument("unknown radius mode '" + s + "'");
}

struct ClusterParams {
    double d_prox = 5.0;
    double theta = 30.0;
    std::size_t min_size = 3;
    RadiusMode radius_mode = RadiusMode::mean;

    void validate() const
    {
        if (!(d_prox > 0.0) || !std::isfinite(d_prox))
            throw std::invalid_argument("cluster.d_prox must be positive");
        if (!(theta >= 0.0 && theta <= 180.0))
            throw std::invalid_argument("cluster.theta must lie in [0, 180]");
        if (min_size < 2)
            throw std::invalid_argument("cluster.min_size must be at least 2");
    }
};

namespace detail {

// Uniform bucket grid over the torus with cells no smaller than the
// proximity threshold, so every candidate neighbour sits in the 3x3 block
// around a bird's cell. Worlds too small for three cells per axis fall back
// to scanning everything.
class ProximityGrid {
public:
    ProximityGrid(const MicroObservation& birds, double radius, const TorusWorld& w)
        : cols_(static_cast<std::size_t>(std::floor(w.width() / radius))),
          rows_(static_cast<std::size_t>(std::floor(w.height() / radius))), w_(w)
    {
        if (cols_ < 3 || rows_ < 3) {
            cols_ = rows_ = 1;
        }
        cells_.resize(cols_ * rows_);
        for (std::size_t k = 0; k < birds.size(); ++k)
            cells_[cell_of(birds[k].pos)].push_back(k);
    }

    template <typename F>
    void for_each_candidate(Position p, F&& f) const
    {
        if (cols_ == 1) {
            for (std::size_t k : cells_[0])
                f(k);
            return;
        }
        const std::size_t c = column(p.x), r = row(p.y);
        for (std::size_t dr = 0; dr < 3; ++dr)
            for (std::size_t dc = 0; dc < 3; ++dc) {
                const std::size_t cc = (c + cols_ + dc - 1) % cols_;
                const std::size_t rr = (r + rows_ + dr - 1) % rows_;
                for (std::size_t k : cells_[rr * cols_ + cc])
                    f(k);
            }
    }

private:
    std::size_t column(double x) const
    {
        return std::min(cols_ - 1, static_cast<std::size_t>(x / w_.width() * static_cast<double>(cols_)));
    }
    std::size_t row(double y) const
    {
        return std::min(rows_ - 1, static_cast<std::size_t>(y / w_.height() * static_cast<double>(rows_)));
    }
    std::size_t cell_of(Position p) const { return row(p.y) * cols_ + column(p.x); }

    std::size_t cols_, rows_;
    TorusWorld w_;
    std::vector<std::vector<std::size_t>> cells_;
};

} // namespace detail

/// Two birds are linked when they are within d_prox of each other and their
/// headings differ by at most theta; clusters are the connected components
/// of that graph holding at least min_size birds. Each cluster is ascending
/// and clusters are ordered by their smallest id.
inline std::vector<std::vector<BirdId>> detect_clusters(const MicroObservation& obs, const ClusterParams& p,
                                                        const TorusWorld& w)
{
    p.validate();
    std::vector<std::size_t> by_id(obs.size());
    for (std::size_t k = 0; k < obs.size(); ++k)
        by_id[k] = k;
    std::sort(by_id.begin(), by_id.end(), [&](std::size_t a, std::size_t b) { return obs[a].id < obs[b].id; });

    const detail::ProximityGrid grid(obs, p.d_prox, w);
    std::vector<bool> seen(obs.size(), false);
    std::vector<std::vector<BirdId>> clusters;
    std::deque<std::size_t> frontier;

    for (std::size_t start : by_id) {
        if (seen[start])
            continue;
        seen[start] = true;
        frontier.push_back(start);
        std::vector<BirdId> component;
        while (!frontier.empty()) {
            const std::size_t cur = frontier.front();
            frontier.pop_front();
            component.push_back(obs[cur].id);
            grid.for_each_candidate(obs[cur].pos, [&](std::size_t k) {
                if (seen[k])
                    return;
                if (torus_distance(obs[cur].pos, obs[k].pos, w) <= p.d_prox &&
                    heading_diff(obs[cur].heading, obs[k].heading) <= p.theta) {
                    seen[k] = true;
                    frontier.push_back(k);
                }
            });
        }
        if (component.size() >= p.min_size) {
            std::sort(component.begin(), component.end());
            clusters.push_back(std::move(component));
        }
    }
    return clusters;
}

/// Reify a set of birds as a flock observation: centroid on the torus,
/// mean heading (lowest-id member's heading when the mean is undefined),
/// radius measuring the spread around the centroid.
inline FlockObservation reify(const std::vector<BirdId>& members, const MicroObservation& obs, const TorusWorld& w,
                              RadiusMode mode = RadiusMode::mean)
{
    if (members.empty())
        throw std::invalid_argument("reify: empty member set");

    std::unordered_map<BirdId, const Bird*> index;
    index.reserve(obs.size());
    for (const auto& b : obs)
        index.emplace(b.id, &b);

    std::vector<BirdId> sorted = members;
    std::sort(sorted.begin(), sorted.end());

    std::vector<Position> ps;
    std::vector<HeadingDeg> hs;
    for (BirdId id : sorted) {
        auto it = index.find(id);
        if (it == index.end())
            throw std::invalid_argument("reify: bird " + std::to_string(id) + " not observed");
        ps.push_back(it->second->pos);
        hs.push_back(it->second->heading);
    }

    FlockObservation out;
    out.members = sorted;
    out.centroid = torus_centroid(ps, w);
    out.heading = try_circular_mean(hs).value_or(hs.front());

    double acc = 0.0;
    for (const auto& q : ps) {
        const double d = torus_distance(out.centroid, q, w);
        switch (mode) {
        case RadiusMode::mean: acc += d; break;
        case RadiusMode::max: acc = std::max(acc, d); break;
        case RadiusMode::rms: acc += d * d; break;
        }
    }
    const double n = static_cast<double>(ps.size());
    out.radius = mode == RadiusMode::mean ? acc / n : mode == RadiusMode::rms ? std::sqrt(acc / n) : acc;
    return out;
}

inline FlockObservationList emergence_transform(const MicroObservation& obs, const ClusterParams& p,
                                                const TorusWorld& w)
{
    FlockObservationList out;
    for (const auto& members : detect_clusters(obs, p, w))
        out.push_back(reify(members, obs, w, p.radius_mode));
    return out;
}

/// Split each flock displacement into r equal sub-displacements, one
/// command set per micro tick. Every member of every flock receives
/// (v / r, flock heading) in each set.
inline std::vector<CommandSet> immergence_transform(const DisplacementList& d, std::size_t r)
{
    if (r == 0)
        throw std::invalid_argument("immergence_transform: ratio must be positive");

    CommandSet one;
    for (const auto& f : d) {
        const Command cmd{f.v / static_cast<double>(r), f.heading};
        for (BirdId id : f.members)
            if (!one.emplace(id, cmd).second)
                throw std::invalid_argument("immergence_transform: bird " + std::to_string(id) +
                                            " belongs to two flocks");
    }
    return std::vector<CommandSet>(r, one);
}

} // namespace aa4mm

#endif // AA4MM_COUPLING_HPP
