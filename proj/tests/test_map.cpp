#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "emfi/map.hpp"
#include "emfi/rng.hpp"

using namespace emfi;

namespace {

CoordinateStats stats_at(const GridSpec& grid, std::size_t ix, std::size_t iy,
                         std::uint64_t faults, std::uint64_t trials, std::uint64_t errors) {
    CoordinateStats s;
    s.coordinate = grid.point(ix, iy);
    s.trials = trials;
    s.count_none = trials - faults;
    s.count_data_corruption = faults;
    s.error_count_total = errors;
    finalize_stats(s);
    return s;
}

// Minimal re-import parser for the heatmap artifact, written for the test.
struct ParsedHeatmap {
    std::size_t nx = 0, ny = 0;
    std::vector<std::optional<std::uint64_t>> counts;
};

ParsedHeatmap parse_heatmap(const std::string& text) {
    ParsedHeatmap out;
    std::istringstream in(text);
    std::string line;
    REQUIRE(std::getline(in, line));
    REQUIRE(line.rfind("# ", 0) == 0);
    std::istringstream header(line.substr(2));
    std::string kv;
    while (header >> kv) {
        const auto eq = kv.find('=');
        REQUIRE(eq != std::string::npos);
        const std::string key = kv.substr(0, eq);
        const std::string value = kv.substr(eq + 1);
        if (key == "nx") out.nx = std::stoul(value);
        if (key == "ny") out.ny = std::stoul(value);
    }
    while (std::getline(in, line)) {
        std::istringstream row(line);
        std::string cell;
        while (std::getline(row, cell, ',')) {
            if (cell == "NA")
                out.counts.push_back(std::nullopt);
            else
                out.counts.push_back(std::stoull(cell));
        }
    }
    return out;
}

TrialRecord make_record(double x, double y, std::uint64_t trial_index, std::uint32_t errors,
                        FaultClass cls) {
    TrialRecord r;
    r.coordinate = {x, y, 0.0};
    r.trial_index = trial_index;
    r.error_count = errors;
    r.classification.cls = cls;
    return r;
}

}  // namespace

TEST_CASE("build_map leaves unscanned cells as no-data") {
    const GridSpec grid{0, 0, 1.0, 2, 2, 0.0};
    const auto empty = build_map(grid, {});
    CHECK(empty.cells.size() == 4);
    for (const auto& cell : empty.cells) CHECK_FALSE(cell.has_value());

    const std::vector<CoordinateStats> one{stats_at(grid, 0, 0, 50, 100, 50)};
    const auto map = build_map(grid, one);
    CHECK(map.cell(0, 0).has_value());
    CHECK(map.cell(0, 0)->fault_rate == Catch::Approx(0.5));
    CHECK_FALSE(map.cell(1, 0).has_value());
    CHECK_FALSE(map.cell(0, 1).has_value());
}

TEST_CASE("build_map rejects duplicates and off-grid coordinates") {
    const GridSpec grid{0, 0, 1.0, 2, 2, 0.0};
    const std::vector<CoordinateStats> dup{stats_at(grid, 0, 0, 1, 10, 1),
                                           stats_at(grid, 0, 0, 2, 10, 2)};
    CHECK_THROWS_AS(build_map(grid, dup), std::domain_error);

    CoordinateStats off;
    off.coordinate = {0.3, 0.0, 0.0};
    off.trials = 1;
    const std::vector<CoordinateStats> bad{off};
    CHECK_THROWS_WITH(build_map(grid, bad), Catch::Matchers::ContainsSubstring("0.3"));
}

TEST_CASE("heatmap renders counts with NA for no-data, smallest y first") {
    const GridSpec grid{0, 0, 1.0, 2, 2, 0.0};
    SECTION("all no-data") {
        const auto csv = export_heatmap_csv(build_map(grid, {}));
        CHECK(csv == "# origin_x=0 origin_y=0 pitch=1 nx=2 ny=2 z=0\nNA,NA\nNA,NA\n");
    }
    SECTION("single populated cell") {
        const std::vector<CoordinateStats> one{stats_at(grid, 0, 0, 7, 10, 7)};
        const auto csv = export_heatmap_csv(build_map(grid, one));
        CHECK(csv == "# origin_x=0 origin_y=0 pitch=1 nx=2 ny=2 z=0\n7,NA\nNA,NA\n");
    }
}

TEST_CASE("heatmap export re-imports to the exact counts") {
    CounterRng rng(99);
    const GridSpec grid{1.5, -2.0, 0.25, 7, 5, 1.0};
    std::vector<CoordinateStats> stats;
    for (std::size_t iy = 0; iy < grid.ny; ++iy)
        for (std::size_t ix = 0; ix < grid.nx; ++ix) {
            if (rng.bernoulli(0.3)) continue;  // leave holes
            stats.push_back(stats_at(grid, ix, iy, rng.next_below(50), 50, rng.next_below(900)));
        }
    const auto map = build_map(grid, stats);
    const auto parsed = parse_heatmap(export_heatmap_csv(map));
    REQUIRE(parsed.nx == grid.nx);
    REQUIRE(parsed.ny == grid.ny);
    REQUIRE(parsed.counts.size() == grid.point_count());
    for (std::size_t iy = 0; iy < grid.ny; ++iy)
        for (std::size_t ix = 0; ix < grid.nx; ++ix) {
            const auto& cell = map.cell(ix, iy);
            const auto& re = parsed.counts[iy * grid.nx + ix];
            if (cell) {
                REQUIRE(re.has_value());
                CHECK(*re == cell->error_count_total);
            } else {
                CHECK_FALSE(re.has_value());
            }
        }
}

TEST_CASE("scatter export writes header plus one row per trial in order") {
    SECTION("empty log") {
        CHECK(export_scatter_csv({}) == "x,y,trial_index,error_count,fault_class\n");
    }
    SECTION("three trials") {
        const std::vector<TrialRecord> records{
            make_record(0.5, 1.0, 0, 3, FaultClass::DataCorruption),
            make_record(0.5, 1.0, 1, 0, FaultClass::None),
            make_record(1.5, 2.5, 0, 1, FaultClass::ControlFlow),
        };
        const auto csv = export_scatter_csv(records);
        CHECK(csv ==
              "x,y,trial_index,error_count,fault_class\n"
              "0.5,1,0,3,DataCorruption\n"
              "0.5,1,1,0,None\n"
              "1.5,2.5,0,1,ControlFlow\n");
    }
}

TEST_CASE("scatter error-count column sums equal heatmap cell totals") {
    CounterRng rng(2025);
    const GridSpec grid{0, 0, 1.0, 4, 3, 0.0};
    std::vector<TrialRecord> records;
    std::vector<std::pair<ProbeCoordinate, FaultObservation>> observations;
    for (std::size_t iy = 0; iy < grid.ny; ++iy)
        for (std::size_t ix = 0; ix < grid.nx; ++ix)
            for (std::uint64_t t = 0; t < 20; ++t) {
                const bool fault = rng.bernoulli(0.4);
                FaultObservation obs;
                if (fault) {
                    obs.cls = FaultClass::DataCorruption;
                    obs.detail = FaultDetail::BitFlips;
                    obs.bit_flip_count = static_cast<std::uint32_t>(1 + rng.next_below(6));
                    obs.flips_zero_to_one = obs.bit_flip_count;
                    obs.evidence = {2};
                }
                TrialRecord r = make_record(grid.point(ix, iy).x, grid.point(ix, iy).y, t,
                                            error_count(obs), obs.cls);
                records.push_back(r);
                observations.emplace_back(grid.point(ix, iy), obs);
            }

    const auto map = build_map(grid, aggregate_coordinate_stats(observations));

    // sum scatter rows per coordinate
    std::map<std::pair<double, double>, std::uint64_t> sums;
    std::istringstream in(export_scatter_csv(records));
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        std::istringstream row(line);
        std::string x, y, t, e, cls;
        std::getline(row, x, ',');
        std::getline(row, y, ',');
        std::getline(row, t, ',');
        std::getline(row, e, ',');
        std::getline(row, cls, ',');
        sums[{std::stod(x), std::stod(y)}] += std::stoull(e);
    }
    for (std::size_t iy = 0; iy < grid.ny; ++iy)
        for (std::size_t ix = 0; ix < grid.nx; ++ix) {
            const auto c = grid.point(ix, iy);
            CHECK(sums[{c.x, c.y}] == map.cell(ix, iy)->error_count_total);
        }
}

TEST_CASE("pgm export has the exact header and rounding behavior") {
    const GridSpec grid{0, 0, 1.0, 2, 2, 0.0};
    SECTION("all no-data renders black") {
        const auto pgm = export_pgm(build_map(grid, {}), 10);
        CHECK(pgm == std::string{"P5\n2 2\n255\n"} + std::string(4, '\0'));
    }
    SECTION("count at scale saturates to 255, half scale rounds up to 128") {
        std::vector<CoordinateStats> stats{stats_at(grid, 0, 0, 1, 1, 2),
                                           stats_at(grid, 1, 0, 1, 1, 1),
                                           stats_at(grid, 0, 1, 1, 1, 4)};
        const auto pgm = export_pgm(build_map(grid, stats), 2);
        const std::string header = "P5\n2 2\n255\n";
        REQUIRE(pgm.size() == header.size() + 4);
        CHECK(pgm.substr(0, header.size()) == header);
        const auto pixel = [&](std::size_t i) {
            return static_cast<unsigned char>(pgm[header.size() + i]);
        };
        CHECK(pixel(0) == 255);  // count 2 == scale
        CHECK(pixel(1) == 128);  // count 1 of scale 2: 127.5 rounds half-up
        CHECK(pixel(2) == 255);  // count 4 clamps at scale
        CHECK(pixel(3) == 0);    // no-data
    }
    SECTION("scale below one is rejected") {
        CHECK_THROWS_AS(export_pgm(build_map(grid, {}), 0), std::invalid_argument);
    }
}

TEST_CASE("exports are deterministic byte streams") {
    CounterRng rng(5150);
    const GridSpec grid{0, 0, 0.5, 5, 5, 1.0};
    std::vector<CoordinateStats> stats;
    for (std::size_t iy = 0; iy < grid.ny; ++iy)
        for (std::size_t ix = 0; ix < grid.nx; ++ix)
            stats.push_back(stats_at(grid, ix, iy, rng.next_below(30), 30, rng.next_below(100)));
    const auto map = build_map(grid, stats);
    CHECK(export_heatmap_csv(map) == export_heatmap_csv(map));
    CHECK(export_pgm(map, 50) == export_pgm(map, 50));
}

TEST_CASE("merge of disjoint maps commutes cell-wise") {
    const GridSpec grid{0, 0, 1.0, 3, 3, 0.0};
    std::vector<CoordinateStats> left, right;
    left.push_back(stats_at(grid, 0, 0, 5, 10, 5));
    left.push_back(stats_at(grid, 1, 1, 2, 10, 2));
    right.push_back(stats_at(grid, 2, 2, 9, 10, 9));
    right.push_back(stats_at(grid, 0, 2, 1, 10, 1));
    const auto a = build_map(grid, left);
    const auto b = build_map(grid, right);
    const auto ab = merge_maps(a, b);
    const auto ba = merge_maps(b, a);
    for (std::size_t i = 0; i < ab.cells.size(); ++i) {
        CHECK(ab.cells[i].has_value() == ba.cells[i].has_value());
        if (!ab.cells[i]) continue;
        CHECK(ab.cells[i]->trials == ba.cells[i]->trials);
        CHECK(ab.cells[i]->fault_count() == ba.cells[i]->fault_count());
        CHECK(ab.cells[i]->error_count_total == ba.cells[i]->error_count_total);
    }
}

TEST_CASE("merge adds counts on overlapping cells and recomputes the rate") {
    const GridSpec grid{0, 0, 1.0, 2, 1, 0.0};
    const auto a = build_map(grid, std::vector<CoordinateStats>{stats_at(grid, 0, 0, 3, 10, 3)});
    const auto b = build_map(grid, std::vector<CoordinateStats>{stats_at(grid, 0, 0, 7, 10, 7)});
    const auto merged = merge_maps(a, b);
    REQUIRE(merged.cell(0, 0).has_value());
    CHECK(merged.cell(0, 0)->trials == 20);
    CHECK(merged.cell(0, 0)->fault_count() == 10);
    CHECK(merged.cell(0, 0)->fault_rate == Catch::Approx(0.5));
    CHECK(merged.cell(0, 0)->error_count_total == 10);

    const GridSpec other{0, 0, 1.0, 3, 1, 0.0};
    CHECK_THROWS_AS(merge_maps(a, build_map(other, {})), std::domain_error);
}
