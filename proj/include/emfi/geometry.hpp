// Probe positions over the target surface and the grids that sample them.
//
// Distances are millimeters throughout. Grid coordinates are generated as
// exact arithmetic progressions from the origin; comparisons elsewhere snap
// to the lattice with a 1e-9 mm tolerance to absorb pitch-division rounding.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace emfi {

inline constexpr double kCoordinateTolMm = 1e-9;

struct ProbeCoordinate {
    double x = 0.0;  // mm over the scan plane
    double y = 0.0;  // mm over the scan plane
    double z = 0.0;  // probe height in mm above the package surface

    friend bool operator==(const ProbeCoordinate&, const ProbeCoordinate&) = default;
};

inline bool near(double a, double b, double tol = kCoordinateTolMm) {
    return std::abs(a - b) <= tol;
}

struct GridSpec {
    double origin_x = 0.0;
    double origin_y = 0.0;
    double pitch = 1.0;     // mm between adjacent points, > 0
    std::size_t nx = 1;
    std::size_t ny = 1;
    double z = 0.0;

    double max_x() const { return origin_x + static_cast<double>(nx - 1) * pitch; }
    double max_y() const { return origin_y + static_cast<double>(ny - 1) * pitch; }
    std::size_t point_count() const { return nx * ny; }

    ProbeCoordinate point(std::size_t ix, std::size_t iy) const {
        return {origin_x + static_cast<double>(ix) * pitch,
                origin_y + static_cast<double>(iy) * pitch, z};
    }

    void validate() const {
        if (!(pitch > 0.0)) throw std::invalid_argument("GridSpec.pitch must be > 0");
        if (nx < 1) throw std::invalid_argument("GridSpec.nx must be >= 1");
        if (ny < 1) throw std::invalid_argument("GridSpec.ny must be >= 1");
        if (!std::isfinite(origin_x)) throw std::invalid_argument("GridSpec.origin_x must be finite");
        if (!std::isfinite(origin_y)) throw std::invalid_argument("GridSpec.origin_y must be finite");
        if (!(z >= 0.0)) throw std::invalid_argument("GridSpec.z must be >= 0");
    }

    // Snaps a coordinate onto the lattice; nullopt when it is farther than
    // the tolerance from every grid point (or off the plane).
    std::optional<std::pair<std::size_t, std::size_t>> index_of(const ProbeCoordinate& c) const {
        if (!near(c.z, z)) return std::nullopt;
        const double fx = (c.x - origin_x) / pitch;
        const double fy = (c.y - origin_y) / pitch;
        const double rx = std::round(fx);
        const double ry = std::round(fy);
        if (rx < 0.0 || ry < 0.0 || rx >= static_cast<double>(nx) || ry >= static_cast<double>(ny))
            return std::nullopt;
        const auto ix = static_cast<std::size_t>(rx);
        const auto iy = static_cast<std::size_t>(ry);
        const ProbeCoordinate snapped = point(ix, iy);
        if (!near(snapped.x, c.x) || !near(snapped.y, c.y)) return std::nullopt;
        return std::make_pair(ix, iy);
    }

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct RefinementRegion {
    double center_x = 0.0;
    double center_y = 0.0;
    double half_extent = 0.0;        // mm, > 0
    int refinement_factor = 2;       // >= 2
    double peak_rate = 0.0;          // fault rate of the hottest cell, for ordering

    void validate() const {
        if (!(half_extent > 0.0)) throw std::invalid_argument("RefinementRegion.half_extent must be > 0");
        if (refinement_factor < 2) throw std::invalid_argument("RefinementRegion.refinement_factor must be >= 2");
    }
};

// Row-major enumeration: y is the outer loop, x the inner one.
inline std::vector<ProbeCoordinate> generate_grid(const GridSpec& spec) {
    spec.validate();
    std::vector<ProbeCoordinate> out;
    out.reserve(spec.point_count());
    for (std::size_t iy = 0; iy < spec.ny; ++iy)
        for (std::size_t ix = 0; ix < spec.nx; ++ix)
            out.push_back(spec.point(ix, iy));
    return out;
}

// Builds the sub-grid over [center - half_extent, center + half_extent]
// clipped to the parent extent, at pitch parent.pitch / refinement_factor.
// The sub-grid is the fine-lattice content of the clipped box: its origin
// and end snap inward onto the fine lattice anchored at the parent origin.
// Inward snapping keeps two guarantees at once: every parent coordinate
// inside the region reappears in the refined grid (parent points are fine
// points), and no refined coordinate escapes the region box (so staged
// campaigns only ever probe inside their selected regions). The box fringe
// narrower than one fine pitch is the only part left uncovered.
inline GridSpec refine_region(const GridSpec& parent, const RefinementRegion& region) {
    parent.validate();
    region.validate();

    const double lo_x = std::max(region.center_x - region.half_extent, parent.origin_x);
    const double hi_x = std::min(region.center_x + region.half_extent, parent.max_x());
    const double lo_y = std::max(region.center_y - region.half_extent, parent.origin_y);
    const double hi_y = std::min(region.center_y + region.half_extent, parent.max_y());
    if (lo_x > hi_x + kCoordinateTolMm || lo_y > hi_y + kCoordinateTolMm)
        throw std::domain_error("refinement region lies outside the parent grid extent");

    const double fine_pitch = parent.pitch / static_cast<double>(region.refinement_factor);
    const auto steps_up = [&](double v, double origin) {
        return std::ceil((v - origin) / fine_pitch - kCoordinateTolMm);
    };
    const auto steps_down = [&](double v, double origin) {
        return std::floor((v - origin) / fine_pitch + kCoordinateTolMm);
    };

    double first_x = steps_up(lo_x, parent.origin_x);
    double last_x = steps_down(hi_x, parent.origin_x);
    double first_y = steps_up(lo_y, parent.origin_y);
    double last_y = steps_down(hi_y, parent.origin_y);
    // A region narrower than one fine pitch may straddle the lattice without
    // containing a point; collapse it onto the fine point nearest its center,
    // kept inside the parent extent.
    const auto collapse = [&](double center, double origin, std::size_t n) {
        const double max_steps =
            static_cast<double>(n - 1) * static_cast<double>(region.refinement_factor);
        return std::clamp(std::round((center - origin) / fine_pitch), 0.0, max_steps);
    };
    if (first_x > last_x) first_x = last_x = collapse(region.center_x, parent.origin_x, parent.nx);
    if (first_y > last_y) first_y = last_y = collapse(region.center_y, parent.origin_y, parent.ny);

    GridSpec fine;
    fine.pitch = fine_pitch;
    fine.z = parent.z;
    fine.origin_x = parent.origin_x + first_x * fine_pitch;
    fine.origin_y = parent.origin_y + first_y * fine_pitch;
    fine.nx = static_cast<std::size_t>(last_x - first_x) + 1;
    fine.ny = static_cast<std::size_t>(last_y - first_y) + 1;
    fine.validate();
    return fine;
}

}  // namespace emfi
