// emfimap: plan, run, and analyze spatial fault-injection campaigns against
// the simulated targets, and export susceptibility-map artifacts.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "emfi/emfi.hpp"

namespace fs = std::filesystem;
using namespace emfi;

namespace {

CampaignConfig load_with_overrides(const std::string& path, std::uint64_t* seed_override) {
    CampaignConfig config = load_config(path);
    if (seed_override) {
        config.seed = *seed_override;
        config.validate();
    }
    return config;
}

// The EMFIMAP_LOG_DIR environment variable overrides --out.
fs::path resolve_out_dir(const std::string& flag_value) {
    if (const char* env = std::getenv("EMFIMAP_LOG_DIR"); env && *env) return fs::path{env};
    return fs::path{flag_value};
}

void print_summary(const CampaignConfig& config, const CampaignResult& result) {
    std::printf("campaign %s  seed %llu  config %s\n", config.campaign_id.c_str(),
                static_cast<unsigned long long>(config.seed), config_hash(config).c_str());
    std::printf("stages: %zu  trials: %zu\n", result.stages.size(), result.records.size());
    for (const StageInfo& stage : result.stages) {
        std::size_t points = 0;
        for (const GridSpec& g : stage.grids) points += g.point_count();
        std::printf("  stage %u: %zu grid(s), %zu coordinate(s), %zu parameter point(s)\n",
                    stage.stage, stage.grids.size(), points, stage.param_scope.size());
    }
    std::printf("classes: none=%llu control_flow=%llu data_corruption=%llu system_level=%llu\n",
                static_cast<unsigned long long>(result.class_totals[0]),
                static_cast<unsigned long long>(result.class_totals[1]),
                static_cast<unsigned long long>(result.class_totals[2]),
                static_cast<unsigned long long>(result.class_totals[3]));
}

void write_all_artifacts(const CampaignResult& result, const CampaignConfig& config,
                         const fs::path& out_dir) {
    std::vector<fs::path> files;
    for (auto format :
         {ArtifactFormat::HeatmapCsv, ArtifactFormat::Pgm, ArtifactFormat::ScatterCsv}) {
        const auto written =
            write_artifacts(result.maps, result.records, config.campaign_id, out_dir, format);
        files.insert(files.end(), written.begin(), written.end());
    }
    for (const auto& f : files) std::printf("wrote %s\n", f.string().c_str());
}

int run_or_sweep(const std::string& config_path, const std::string& out_flag,
                 std::uint64_t* seed_override, unsigned workers, bool disable_refinement) {
    CampaignConfig config = load_with_overrides(config_path, seed_override);
    if (disable_refinement) config.refinement.max_levels = 0;

    const fs::path out_dir = resolve_out_dir(out_flag);
    fs::create_directories(out_dir);
    RunOptions options;
    options.workers = workers;
    options.log_path = (out_dir / (config.campaign_id + ".jsonl")).string();

    const CampaignResult result = run_campaign(config, options);
    print_summary(config, result);
    std::printf("log %s\n", options.log_path.c_str());
    write_all_artifacts(result, config, out_dir);

    if (disable_refinement) {
        // Per-parameter-point breakdown, the sweep view.
        const auto points = enumerate_sweep(config.sweep);
        std::printf("%-18s %-10s %-9s %-10s %s\n", "param", "voltage_v", "width_ns", "polarity",
                    "fault_rate");
        for (const MapArtifact& artifact : result.maps) {
            std::uint64_t faults = 0, trials = 0;
            for (const auto& cell : artifact.map.cells) {
                if (!cell) continue;
                faults += cell->fault_count();
                trials += cell->trials;
            }
            const PulseParameters& p = points[artifact.param_index];
            std::printf("%-18s %-10g %-9g %-10s %.4f\n", artifact.param_label.c_str(),
                        p.voltage_v, p.width_ns, to_string(p.polarity),
                        trials ? static_cast<double>(faults) / static_cast<double>(trials) : 0.0);
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spatial EMFI campaign engine and susceptibility mapper"};
    app.require_subcommand(1);

    std::string config_path, log_path, out_dir = ".", format = "csv";
    std::uint64_t seed_value = 0;
    bool seed_set = false;
    unsigned workers = 1;

    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed_value, "override the config seed")
            ->each([&](const std::string&) { seed_set = true; });
    };

    CLI::App* plan = app.add_subcommand("plan", "print the staged trial plan for a config");
    plan->add_option("config", config_path, "campaign config JSON")->required();
    add_seed(plan);

    CLI::App* run = app.add_subcommand("run", "execute a campaign and write log + maps");
    run->add_option("config", config_path, "campaign config JSON")->required();
    run->add_option("--out", out_dir, "output directory (default .)");
    run->add_option("--workers", workers, "parallel backend workers");
    add_seed(run);

    CLI::App* sweep = app.add_subcommand(
        "sweep", "parameter-sweep emphasis: same engine, refinement disabled");
    sweep->add_option("config", config_path, "campaign config JSON")->required();
    sweep->add_option("--out", out_dir, "output directory (default .)");
    sweep->add_option("--workers", workers, "parallel backend workers");
    add_seed(sweep);

    CLI::App* classify = app.add_subcommand("classify", "re-classify raw sessions from a log");
    classify->add_option("log", log_path, "trial log (JSONL)")->required();

    CLI::App* map_cmd = app.add_subcommand("map", "export artifacts from a log");
    map_cmd->add_option("log", log_path, "trial log (JSONL)")->required();
    map_cmd->add_option("--format", format, "csv | pgm | scatter")
        ->check(CLI::IsMember({"csv", "pgm", "scatter"}));
    map_cmd->add_option("--out", out_dir, "output directory (default .)");

    CLI::App* replay = app.add_subcommand(
        "replay", "re-verify a log; nonzero exit on any disagreement");
    replay->add_option("log", log_path, "trial log (JSONL)")->required();

    CLI::App* ground_truth = app.add_subcommand(
        "ground-truth", "dump the simulator probability grid as CSV");
    ground_truth->add_option("config", config_path, "campaign config JSON")->required();
    std::string gt_out;
    ground_truth->add_option("--out", gt_out, "output file (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (plan->parsed()) {
            const CampaignConfig config =
                load_with_overrides(config_path, seed_set ? &seed_value : nullptr);
            const auto trials = plan_trials(config);
            std::printf("campaign %s  seed %llu\n", config.campaign_id.c_str(),
                        static_cast<unsigned long long>(config.seed));
            std::printf("coarse stage: %zu trials = %zu coordinates x %zu parameter points x %zu repeats\n",
                        trials.size(), config.grid.point_count(),
                        enumerate_sweep(config.sweep).size(), config.sweep.trials_per_point);
            std::printf("refinement: threshold %.3f, factor %d, up to %d level(s)%s\n",
                        config.refinement.threshold, config.refinement.factor,
                        config.refinement.max_levels,
                        config.refinement.refine_best_param_only ? ", best parameter only" : "");
            std::printf("later stages are planned adaptively from earlier results\n");
            return 0;
        }
        if (run->parsed())
            return run_or_sweep(config_path, out_dir, seed_set ? &seed_value : nullptr, workers,
                                false);
        if (sweep->parsed())
            return run_or_sweep(config_path, out_dir, seed_set ? &seed_value : nullptr, workers,
                                true);
        if (classify->parsed()) {
            const LogContents log = read_log(log_path);
            if (!log.config) throw std::runtime_error("log has no campaign header record");
            const NominalProfile profile = make_target(*log.config)->nominal_profile();
            std::map<std::string, std::uint64_t> by_detail;
            std::array<std::uint64_t, 4> by_class{};
            for (const TrialRecord& r : log.trials) {
                const auto obs =
                    classify_session(parse_session(r.raw_lines, r.responded), profile);
                ++by_class[static_cast<std::size_t>(obs.cls)];
                ++by_detail[std::string{to_string(obs.cls)} + "/" + to_string(obs.detail)];
            }
            std::printf("%zu trials re-classified\n", log.trials.size());
            for (const auto& [key, count] : by_detail)
                std::printf("  %-40s %llu\n", key.c_str(),
                            static_cast<unsigned long long>(count));
            if (!log.malformed.empty())
                std::printf("  %zu malformed log line(s) skipped\n", log.malformed.size());
            return 0;
        }
        if (map_cmd->parsed()) {
            const LogContents log = read_log(log_path);
            if (!log.config) throw std::runtime_error("log has no campaign header record");
            const auto maps = maps_from_log(log);
            const ArtifactFormat fmt = format == "csv"     ? ArtifactFormat::HeatmapCsv
                                       : format == "pgm"   ? ArtifactFormat::Pgm
                                                           : ArtifactFormat::ScatterCsv;
            const auto files = write_artifacts(maps, log.trials, log.config->campaign_id,
                                               resolve_out_dir(out_dir), fmt);
            for (const auto& f : files) std::printf("wrote %s\n", f.string().c_str());
            return 0;
        }
        if (replay->parsed()) {
            const VerificationReport report = replay_campaign(log_path);
            std::printf("%zu records checked, %zu disagreement(s), %zu malformed record(s)\n",
                        report.records_checked, report.disagreements.size(),
                        report.malformed.size());
            for (const Disagreement& d : report.disagreements)
                std::printf("  seq %llu %s: stored %s, recomputed %s\n",
                            static_cast<unsigned long long>(d.sequence), d.field.c_str(),
                            d.stored.c_str(), d.recomputed.c_str());
            for (const MalformedLogLine& m : report.malformed)
                std::printf("  line %zu: %s\n", m.line_number, m.message.c_str());
            return report.clean() ? 0 : 1;
        }
        if (ground_truth->parsed()) {
            const CampaignConfig config = load_with_overrides(config_path, nullptr);
            const auto backend = make_target(config);
            const auto points = enumerate_sweep(config.sweep);
            std::string csv =
                "coord_index,param_index,x,y,z,voltage_v,width_ns,polarity,offset_ns,probability\n";
            std::uint64_t ci = 0;
            for (const ProbeCoordinate& c : generate_grid(config.grid)) {
                for (std::size_t pi = 0; pi < points.size(); ++pi) {
                    const double p = ground_truth_probability(backend->field(), c, points[pi]);
                    char row[256];
                    std::snprintf(row, sizeof(row), "%llu,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%s,%.17g,%.17g\n",
                                  static_cast<unsigned long long>(ci), pi, c.x, c.y, c.z,
                                  points[pi].voltage_v, points[pi].width_ns,
                                  to_string(points[pi].polarity), points[pi].offset_ns, p);
                    csv += row;
                }
                ++ci;
            }
            if (gt_out.empty()) {
                std::fputs(csv.c_str(), stdout);
            } else {
                std::ofstream out(gt_out, std::ios::binary);
                if (!out) throw std::runtime_error("cannot write " + gt_out);
                out << csv;
                std::printf("wrote %s\n", gt_out.c_str());
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
