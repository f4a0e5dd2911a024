#ifndef AA4MM_FLOCK_OBSERVATION_HPP
#define AA4MM_FLOCK_OBSERVATION_HPP

#include "aa4mm/geometry.hpp"

#include <cstdint>
#include <vector>

namespace aa4mm {

/// A detected and reified group of birds, as produced by the emergence
/// transformer and consumed by the macro registry. `members` is ascending.
struct FlockObservation {
    std::vector<std::uint64_t> members;
    Position centroid;
    HeadingDeg heading;
    double radius = 0.0;

    friend bool operator==(const FlockObservation&, const FlockObservation&) = default;
};

using FlockObservationList = std::vector<FlockObservation>;

} // namespace aa4mm

#endif // AA4MM_FLOCK_OBSERVATION_HPP
