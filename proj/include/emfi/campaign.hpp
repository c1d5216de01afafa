// Campaign orchestration: staged planning, trial execution, refinement,
// reproducibility logging, and replay verification.
//
// A campaign runs in stages. Stage 0 sweeps the coarse grid; each later
// stage sweeps the sub-grids refined around the regions of interest found
// in the previous one. Trial seeds derive statelessly from (campaign seed,
// coordinate index, param index, trial index), workers claim trials from a
// shared cursor, and records are sequenced in plan order — so log content
// (timestamps aside) is identical for any worker count.

#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "emfi/classify.hpp"
#include "emfi/config.hpp"
#include "emfi/log.hpp"
#include "emfi/map.hpp"
#include "emfi/protocol.hpp"
#include "emfi/record.hpp"
#include "emfi/rng.hpp"
#include "emfi/targets.hpp"

namespace emfi {

struct PlannedTrial {
    std::uint32_t stage = 0;
    std::uint32_t grid_index = 0;
    std::uint64_t coordinate_index = 0;
    std::uint64_t param_index = 0;
    std::uint64_t trial_index = 0;
    ProbeCoordinate coordinate;
    PulseParameters parameters;
};

namespace detail {

// Order within a stage: grids in discovery order, coordinates row-major,
// then parameter points in sweep order, then the trial repeats.
inline std::vector<PlannedTrial> plan_stage(const std::vector<GridSpec>& grids,
                                            const std::vector<PulseParameters>& sweep_points,
                                            const std::vector<std::uint64_t>& param_scope,
                                            std::size_t trials_per_point, std::uint32_t stage,
                                            std::uint64_t& next_coordinate_index) {
    std::vector<PlannedTrial> plan;
    for (std::uint32_t gi = 0; gi < grids.size(); ++gi) {
        for (const ProbeCoordinate& coord : generate_grid(grids[gi])) {
            const std::uint64_t coord_index = next_coordinate_index++;
            for (std::uint64_t pi : param_scope) {
                for (std::uint64_t t = 0; t < trials_per_point; ++t) {
                    plan.push_back({stage, gi, coord_index, pi, t, coord, sweep_points[pi]});
                }
            }
        }
    }
    return plan;
}

inline std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

}  // namespace detail

// The coarse-scan plan. Refinement stages are planned adaptively while the
// campaign runs, since their grids depend on earlier results.
inline std::vector<PlannedTrial> plan_trials(const CampaignConfig& config) {
    config.validate();
    const auto sweep_points = enumerate_sweep(config.sweep);
    std::vector<std::uint64_t> scope(sweep_points.size());
    std::iota(scope.begin(), scope.end(), 0);
    std::uint64_t next_coordinate_index = 0;
    return detail::plan_stage({config.grid}, sweep_points, scope, config.sweep.trials_per_point,
                              0, next_coordinate_index);
}

struct MapArtifact {
    std::uint32_t stage = 0;
    std::uint32_t grid_index = 0;
    std::uint64_t param_index = 0;
    std::string param_label;
    SusceptibilityMap map;
};

struct CampaignResult {
    std::vector<TrialRecord> records;
    std::vector<StageInfo> stages;
    std::vector<MapArtifact> maps;
    std::array<std::uint64_t, 4> class_totals{};  // indexed by FaultClass
};

struct RunOptions {
    unsigned workers = 1;
    std::string log_path;  // empty: keep the log in memory only
};

using BackendFactory = std::function<std::unique_ptr<TargetBackend>()>;

namespace detail {

inline TrialRecord execute_trial(const PlannedTrial& t, TargetBackend& backend,
                                 const NominalProfile& profile, const CampaignConfig& config,
                                 const std::string& cfg_hash) {
    TrialRecord r;
    r.campaign_id = config.campaign_id;
    r.config_hash = cfg_hash;
    r.stage = t.stage;
    r.grid_index = t.grid_index;
    r.coordinate_index = t.coordinate_index;
    r.param_index = t.param_index;
    r.trial_index = t.trial_index;
    r.trial_seed =
        derive_trial_seed(config.seed, t.coordinate_index, t.param_index, t.trial_index);
    r.coordinate = t.coordinate;
    r.parameters = t.parameters;

    backend.reset();
    RawObservation obs = backend.inject(t.coordinate, t.parameters, r.trial_seed);
    r.raw_lines = std::move(obs.output_lines);
    r.responded = obs.responded;
    r.duration_ms = obs.duration_ms;

    const SessionParse session = parse_session(r.raw_lines, r.responded);
    r.classification = classify_session(session, profile);
    r.error_count = error_count(r.classification);
    return r;
}

inline void execute_stage(std::vector<TrialRecord>& records,
                          const std::vector<PlannedTrial>& plan, const BackendFactory& factory,
                          const NominalProfile& profile, const CampaignConfig& config,
                          const std::string& cfg_hash, unsigned workers) {
    records.resize(plan.size());
    std::atomic<std::size_t> cursor{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto work = [&] {
        try {
            const auto backend = factory();
            for (;;) {
                const std::size_t i = cursor.fetch_add(1, std::memory_order_relaxed);
                if (i >= plan.size()) break;
                records[i] = execute_trial(plan[i], *backend, profile, config, cfg_hash);
            }
        } catch (...) {
            const std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
        for (std::thread& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
}

inline std::vector<MapArtifact> build_stage_maps(const StageInfo& stage,
                                                 const std::vector<TrialRecord>& records,
                                                 const std::vector<PulseParameters>& sweep_points,
                                                 const CampaignConfig& config) {
    std::vector<MapArtifact> artifacts;
    for (std::uint32_t gi = 0; gi < stage.grids.size(); ++gi) {
        for (std::uint64_t pi : stage.param_scope) {
            std::vector<std::pair<ProbeCoordinate, FaultObservation>> observations;
            for (const TrialRecord& r : records) {
                if (r.stage == stage.stage && r.grid_index == gi && r.param_index == pi)
                    observations.emplace_back(r.coordinate, r.classification);
            }
            const auto stats = aggregate_coordinate_stats(observations);
            MapMetadata meta{config.campaign_id, param_point_hash(sweep_points[pi]),
                             config.sweep.trials_per_point};
            artifacts.push_back({stage.stage, gi, pi, meta.param_label,
                                 build_map(stage.grids[gi], stats, meta)});
        }
    }
    return artifacts;
}

// Chooses the grids (and parameter scope) for the next refinement stage.
inline std::pair<std::vector<GridSpec>, std::vector<std::uint64_t>> select_next_stage(
    const std::vector<MapArtifact>& stage_maps, const StageInfo& stage,
    const CampaignConfig& config) {
    std::vector<std::uint64_t> next_scope = stage.param_scope;
    if (config.refinement.refine_best_param_only) {
        // Best parameter point: most faults observed this stage; ties fall
        // to the lowest parameter index.
        std::uint64_t best_param = stage.param_scope.empty() ? 0 : stage.param_scope.front();
        std::uint64_t best_faults = 0;
        for (std::uint64_t pi : stage.param_scope) {
            std::uint64_t faults = 0;
            for (const MapArtifact& a : stage_maps) {
                if (a.param_index != pi) continue;
                for (const auto& cell : a.map.cells)
                    if (cell) faults += cell->fault_count();
            }
            if (faults > best_faults) {
                best_faults = faults;
                best_param = pi;
            }
        }
        next_scope = {best_param};
    }

    std::vector<GridSpec> next_grids;
    for (const MapArtifact& a : stage_maps) {
        if (std::find(next_scope.begin(), next_scope.end(), a.param_index) == next_scope.end())
            continue;
        const GridSpec& parent = stage.grids[a.grid_index];
        for (const RefinementRegion& region :
             select_regions_of_interest(a.map, config.refinement.threshold,
                                        config.refinement.factor)) {
            const GridSpec refined = refine_region(parent, region);
            if (std::find(next_grids.begin(), next_grids.end(), refined) == next_grids.end())
                next_grids.push_back(refined);
        }
    }
    return {std::move(next_grids), std::move(next_scope)};
}

}  // namespace detail

inline CampaignResult run_campaign(const CampaignConfig& config, const BackendFactory& factory,
                                   const RunOptions& options = {}) {
    config.validate();
    const auto sweep_points = enumerate_sweep(config.sweep);
    const std::string cfg_hash = config_hash(config);
    const NominalProfile profile = factory()->nominal_profile();

    std::optional<LogWriter> writer;
    if (!options.log_path.empty()) {
        writer.emplace(options.log_path);
        writer->write_header(config);
    }

    CampaignResult result;
    std::vector<GridSpec> grids{config.grid};
    std::vector<std::uint64_t> scope(sweep_points.size());
    std::iota(scope.begin(), scope.end(), 0);
    std::uint64_t next_coordinate_index = 0;
    std::uint64_t next_sequence = 0;

    for (std::uint32_t stage = 0;
         !grids.empty() && stage <= static_cast<std::uint32_t>(config.refinement.max_levels);
         ++stage) {
        StageInfo info{stage, grids, scope};
        result.stages.push_back(info);
        if (writer) writer->write_stage(info);

        const auto plan = detail::plan_stage(grids, sweep_points, scope,
                                             config.sweep.trials_per_point, stage,
                                             next_coordinate_index);
        std::vector<TrialRecord> records;
        detail::execute_stage(records, plan, factory, profile, config, cfg_hash,
                              options.workers);

        // Results reach the log before any refinement decision reads them.
        for (TrialRecord& r : records) {
            r.sequence = next_sequence++;
            r.timestamp_ms = detail::now_ms();
            if (writer) writer->write_trial(r);
        }
        if (writer) writer->flush();

        const auto stage_maps = detail::build_stage_maps(info, records, sweep_points, config);
        for (const TrialRecord& r : records)
            ++result.class_totals[static_cast<std::size_t>(r.classification.cls)];
        result.records.insert(result.records.end(),
                              std::make_move_iterator(records.begin()),
                              std::make_move_iterator(records.end()));

        const bool last_stage =
            stage == static_cast<std::uint32_t>(config.refinement.max_levels);
        if (!last_stage) {
            auto [next_grids, next_scope] = detail::select_next_stage(stage_maps, info, config);
            grids = std::move(next_grids);
            scope = std::move(next_scope);
        } else {
            grids.clear();
        }
        result.maps.insert(result.maps.end(), stage_maps.begin(), stage_maps.end());
    }
    return result;
}

inline CampaignResult run_campaign(const CampaignConfig& config, const RunOptions& options = {}) {
    return run_campaign(config, [&config] { return make_target(config); }, options);
}

// Rebuilds every per-stage map from a log alone; used by the map exporter
// and by verification.
inline std::vector<MapArtifact> maps_from_log(const LogContents& log) {
    if (!log.config) throw std::runtime_error("log has no campaign header record");
    const auto sweep_points = enumerate_sweep(log.config->sweep);
    std::vector<MapArtifact> artifacts;
    for (const StageInfo& stage : log.stages) {
        std::vector<TrialRecord> stage_records;
        for (const TrialRecord& r : log.trials)
            if (r.stage == stage.stage) stage_records.push_back(r);
        auto stage_maps = detail::build_stage_maps(stage, stage_records, sweep_points,
                                                   *log.config);
        artifacts.insert(artifacts.end(), std::make_move_iterator(stage_maps.begin()),
                         std::make_move_iterator(stage_maps.end()));
    }
    return artifacts;
}

struct Disagreement {
    std::uint64_t sequence = 0;
    std::string field;
    std::string stored;
    std::string recomputed;
};

struct VerificationReport {
    std::size_t records_checked = 0;
    std::vector<Disagreement> disagreements;
    std::vector<MalformedLogLine> malformed;

    bool clean() const { return disagreements.empty() && malformed.empty(); }
};

// Re-parses every raw session in the log, re-classifies it, and compares
// against the stored verdicts.
inline VerificationReport replay_campaign(const LogContents& log) {
    VerificationReport report;
    report.malformed = log.malformed;
    if (!log.config) {
        report.malformed.push_back({0, "missing campaign header record"});
        return report;
    }
    const NominalProfile profile = make_target(*log.config)->nominal_profile();
    for (const TrialRecord& r : log.trials) {
        ++report.records_checked;
        const SessionParse session = parse_session(r.raw_lines, r.responded);
        const FaultObservation recomputed = classify_session(session, profile);
        if (!(recomputed == r.classification)) {
            report.disagreements.push_back(
                {r.sequence, "classification",
                 std::string{to_string(r.classification.cls)} + "/" +
                     to_string(r.classification.detail),
                 std::string{to_string(recomputed.cls)} + "/" + to_string(recomputed.detail)});
        }
        const std::uint32_t ec = error_count(recomputed);
        if (ec != r.error_count) {
            report.disagreements.push_back({r.sequence, "error_count",
                                            std::to_string(r.error_count),
                                            std::to_string(ec)});
        }
    }
    return report;
}

inline VerificationReport replay_campaign(const std::string& log_path) {
    return replay_campaign(read_log(log_path));
}

// ---- artifact files -----------------------------------------------------

// Stage-0 artifacts use the bare `<campaign>_<param>` stem; refined stages
// append `_s<stage>g<grid>` so nothing collides.
inline std::string artifact_stem(const MapArtifact& a) {
    std::string stem = a.map.metadata.campaign_id + "_" + a.param_label;
    if (a.stage != 0 || a.grid_index != 0)
        stem += "_s" + std::to_string(a.stage) + "g" + std::to_string(a.grid_index);
    return stem;
}

inline std::uint64_t heatmap_scale(const SusceptibilityMap& map) {
    std::uint64_t scale = 1;
    for (const auto& cell : map.cells)
        if (cell) scale = std::max(scale, cell->error_count_total);
    return scale;
}

enum class ArtifactFormat { HeatmapCsv, Pgm, ScatterCsv };

inline std::vector<std::filesystem::path> write_artifacts(
    const std::vector<MapArtifact>& maps, std::span<const TrialRecord> records,
    const std::string& campaign_id, const std::filesystem::path& out_dir,
    ArtifactFormat format) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> written;
    const auto dump = [&](const std::filesystem::path& path, const std::string& bytes) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write artifact: " + path.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        written.push_back(path);
    };
    switch (format) {
        case ArtifactFormat::HeatmapCsv:
            for (const MapArtifact& a : maps)
                dump(out_dir / (artifact_stem(a) + ".heatmap.csv"), export_heatmap_csv(a.map));
            break;
        case ArtifactFormat::Pgm:
            for (const MapArtifact& a : maps)
                dump(out_dir / (artifact_stem(a) + ".pgm"),
                     export_pgm(a.map, heatmap_scale(a.map)));
            break;
        case ArtifactFormat::ScatterCsv:
            dump(out_dir / (campaign_id + ".scatter.csv"), export_scatter_csv(records));
            break;
    }
    return written;
}

}  // namespace emfi
