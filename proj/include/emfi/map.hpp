// Spatial susceptibility maps and their export formats.
//
// A map is a grid plus per-cell aggregate statistics. Cells never scanned
// are no-data, which is deliberately distinct from a measured rate of zero:
// an unscanned cell is not a resilient cell. All exports are deterministic
// byte streams, suitable for golden-file comparison.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "emfi/classify.hpp"
#include "emfi/geometry.hpp"
#include "emfi/record.hpp"

namespace emfi {

namespace detail {

// Shortest round-trip decimal form, identical on every platform.
inline std::string format_double(double v) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

}  // namespace detail

struct MapMetadata {
    std::string campaign_id;
    std::string param_label;  // parameter-point hash or human-readable label
    std::uint64_t trials_per_point = 0;
};

struct SusceptibilityMap {
    GridSpec grid;
    std::vector<std::optional<CoordinateStats>> cells;  // row-major, ny*nx entries
    MapMetadata metadata;

    const std::optional<CoordinateStats>& cell(std::size_t ix, std::size_t iy) const {
        return cells[iy * grid.nx + ix];
    }
    std::optional<CoordinateStats>& cell(std::size_t ix, std::size_t iy) {
        return cells[iy * grid.nx + ix];
    }
};

inline SusceptibilityMap build_map(const GridSpec& grid, std::span<const CoordinateStats> stats,
                                   MapMetadata metadata = {}) {
    grid.validate();
    SusceptibilityMap map;
    map.grid = grid;
    map.metadata = std::move(metadata);
    map.cells.assign(grid.point_count(), std::nullopt);
    for (const CoordinateStats& s : stats) {
        const auto idx = grid.index_of(s.coordinate);
        if (!idx) {
            throw std::domain_error(
                "coordinate (" + detail::format_double(s.coordinate.x) + ", " +
                detail::format_double(s.coordinate.y) + ", " +
                detail::format_double(s.coordinate.z) + ") is not on the grid");
        }
        auto& cell = map.cell(idx->first, idx->second);
        if (cell.has_value()) {
            throw std::domain_error(
                "duplicate stats for coordinate (" + detail::format_double(s.coordinate.x) +
                ", " + detail::format_double(s.coordinate.y) + ")");
        }
        cell = s;
    }
    return map;
}

// Cell-wise additive merge; both maps must share the grid. Commutative.
inline SusceptibilityMap merge_maps(const SusceptibilityMap& a, const SusceptibilityMap& b) {
    if (!(a.grid == b.grid)) throw std::domain_error("merge_maps: grids differ");
    SusceptibilityMap out = a;
    for (std::size_t i = 0; i < out.cells.size(); ++i) {
        const auto& other = b.cells[i];
        if (!other) continue;
        if (!out.cells[i]) {
            out.cells[i] = other;
            continue;
        }
        CoordinateStats& s = *out.cells[i];
        s.trials += other->trials;
        s.count_none += other->count_none;
        s.count_control_flow += other->count_control_flow;
        s.count_data_corruption += other->count_data_corruption;
        s.count_system_level += other->count_system_level;
        s.flips_zero_to_one += other->flips_zero_to_one;
        s.flips_one_to_zero += other->flips_one_to_zero;
        s.error_count_total += other->error_count_total;
        finalize_stats(s);
    }
    return out;
}

// One region per 4-connected component of cells at or above the fault-rate
// threshold. Regions are centered on the component centroid and extend to
// the bounding-box half-diagonal plus one parent pitch, ordered by
// descending peak rate (ties: ascending (y, x) of the peak cell).
inline std::vector<RefinementRegion> select_regions_of_interest(const SusceptibilityMap& map,
                                                                double threshold,
                                                                int refinement_factor = 2) {
    const GridSpec& grid = map.grid;
    const auto hot = [&](std::size_t ix, std::size_t iy) {
        const auto& cell = map.cell(ix, iy);
        return cell.has_value() && cell->fault_rate >= threshold;
    };

    std::vector<bool> visited(grid.point_count(), false);
    std::vector<RefinementRegion> regions;
    std::vector<std::pair<double, std::pair<double, double>>> order_keys;  // peak, (peak_y, peak_x)

    for (std::size_t iy = 0; iy < grid.ny; ++iy) {
        for (std::size_t ix = 0; ix < grid.nx; ++ix) {
            if (visited[iy * grid.nx + ix] || !hot(ix, iy)) continue;

            // BFS over the 4-neighborhood.
            std::vector<std::pair<std::size_t, std::size_t>> component;
            std::vector<std::pair<std::size_t, std::size_t>> frontier{{ix, iy}};
            visited[iy * grid.nx + ix] = true;
            while (!frontier.empty()) {
                const auto [cx, cy] = frontier.back();
                frontier.pop_back();
                component.emplace_back(cx, cy);
                const std::pair<long long, long long> deltas[] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
                for (const auto& [dx, dy] : deltas) {
                    const long long nx = static_cast<long long>(cx) + dx;
                    const long long ny = static_cast<long long>(cy) + dy;
                    if (nx < 0 || ny < 0 || nx >= static_cast<long long>(grid.nx) ||
                        ny >= static_cast<long long>(grid.ny))
                        continue;
                    const auto ux = static_cast<std::size_t>(nx);
                    const auto uy = static_cast<std::size_t>(ny);
                    if (visited[uy * grid.nx + ux] || !hot(ux, uy)) continue;
                    visited[uy * grid.nx + ux] = true;
                    frontier.emplace_back(ux, uy);
                }
            }

            double sum_x = 0.0, sum_y = 0.0;
            double min_x = 0.0, max_x = 0.0, min_y = 0.0, max_y = 0.0;
            double peak = -1.0;
            double peak_x = 0.0, peak_y = 0.0;
            bool first = true;
            for (const auto& [mx, my] : component) {
                const ProbeCoordinate c = grid.point(mx, my);
                sum_x += c.x;
                sum_y += c.y;
                if (first) {
                    min_x = max_x = c.x;
                    min_y = max_y = c.y;
                    first = false;
                } else {
                    min_x = std::min(min_x, c.x);
                    max_x = std::max(max_x, c.x);
                    min_y = std::min(min_y, c.y);
                    max_y = std::max(max_y, c.y);
                }
                const double rate = map.cell(mx, my)->fault_rate;
                if (rate > peak || (rate == peak && (c.y < peak_y || (c.y == peak_y && c.x < peak_x)))) {
                    peak = rate;
                    peak_x = c.x;
                    peak_y = c.y;
                }
            }

            RefinementRegion region;
            region.center_x = sum_x / static_cast<double>(component.size());
            region.center_y = sum_y / static_cast<double>(component.size());
            region.half_extent =
                0.5 * std::hypot(max_x - min_x, max_y - min_y) + grid.pitch;
            region.refinement_factor = refinement_factor;
            region.peak_rate = peak;
            regions.push_back(region);
            order_keys.emplace_back(peak, std::make_pair(peak_y, peak_x));
        }
    }

    std::vector<std::size_t> order(regions.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (order_keys[a].first != order_keys[b].first)
            return order_keys[a].first > order_keys[b].first;
        return order_keys[a].second < order_keys[b].second;
    });
    std::vector<RefinementRegion> sorted;
    sorted.reserve(regions.size());
    for (std::size_t i : order) sorted.push_back(regions[i]);
    return sorted;
}

// ny rows of nx comma-separated per-cell total error counts; no-data cells
// render as NA. Row 0 is the smallest y. The leading comment line carries
// the grid placement so the artifact is self-describing.
inline std::string export_heatmap_csv(const SusceptibilityMap& map) {
    std::string out = "# origin_x=" + detail::format_double(map.grid.origin_x) +
                      " origin_y=" + detail::format_double(map.grid.origin_y) +
                      " pitch=" + detail::format_double(map.grid.pitch) +
                      " nx=" + std::to_string(map.grid.nx) +
                      " ny=" + std::to_string(map.grid.ny) +
                      " z=" + detail::format_double(map.grid.z);
    if (!map.metadata.campaign_id.empty()) out += " campaign=" + map.metadata.campaign_id;
    if (!map.metadata.param_label.empty()) out += " param=" + map.metadata.param_label;
    out += '\n';
    for (std::size_t iy = 0; iy < map.grid.ny; ++iy) {
        for (std::size_t ix = 0; ix < map.grid.nx; ++ix) {
            if (ix != 0) out += ',';
            const auto& cell = map.cell(ix, iy);
            out += cell ? std::to_string(cell->error_count_total) : std::string{"NA"};
        }
        out += '\n';
    }
    return out;
}

// One row per trial in log order: probe position, repeat index, per-trial
// error count, and fault class.
inline std::string export_scatter_csv(std::span<const TrialRecord> records) {
    std::string out = "x,y,trial_index,error_count,fault_class\n";
    for (const TrialRecord& r : records) {
        out += detail::format_double(r.coordinate.x);
        out += ',';
        out += detail::format_double(r.coordinate.y);
        out += ',';
        out += std::to_string(r.trial_index);
        out += ',';
        out += std::to_string(r.error_count);
        out += ',';
        out += to_string(r.classification.cls);
        out += '\n';
    }
    return out;
}

// Binary P5 graymap, maxval 255. Pixels scale linearly with the cell error
// count, saturating at `scale`; no-data renders black. Raster row 0 is the
// smallest y, matching the CSV export.
inline std::string export_pgm(const SusceptibilityMap& map, std::uint64_t scale) {
    if (scale < 1) throw std::invalid_argument("export_pgm: scale must be >= 1");
    std::string out = "P5\n" + std::to_string(map.grid.nx) + " " + std::to_string(map.grid.ny) +
                      "\n255\n";
    for (std::size_t iy = 0; iy < map.grid.ny; ++iy) {
        for (std::size_t ix = 0; ix < map.grid.nx; ++ix) {
            const auto& cell = map.cell(ix, iy);
            unsigned char pixel = 0;
            if (cell) {
                const std::uint64_t count = std::min<std::uint64_t>(cell->error_count_total, scale);
                pixel = static_cast<unsigned char>(std::floor(
                    255.0 * static_cast<double>(count) / static_cast<double>(scale) + 0.5));
            }
            out.push_back(static_cast<char>(pixel));
        }
    }
    return out;
}

}  // namespace emfi
