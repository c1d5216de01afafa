// Append-only trial log: newline-delimited JSON records, UTF-8.
//
// The first record embeds the full effective config, each stage announces
// its grids, and every trial carries its raw target output plus the stored
// classification — so maps, stats, and verdicts are all recomputable from
// the log alone. Unknown fields in a record are ignored on read (and thus
// preserved by tools that rewrite logs wholesale).

#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "emfi/classify.hpp"
#include "emfi/config.hpp"
#include "emfi/record.hpp"

namespace emfi {

inline constexpr int kLogFormatVersion = 1;

inline FaultClass fault_class_from_string(const std::string& s) {
    if (s == "None") return FaultClass::None;
    if (s == "ControlFlow") return FaultClass::ControlFlow;
    if (s == "DataCorruption") return FaultClass::DataCorruption;
    if (s == "SystemLevel") return FaultClass::SystemLevel;
    throw std::runtime_error("unknown fault class \"" + s + "\"");
}

inline FaultDetail fault_detail_from_string(const std::string& s) {
    static const std::pair<const char*, FaultDetail> table[] = {
        {"None", FaultDetail::None},
        {"Skip", FaultDetail::Skip},
        {"EarlyExit", FaultDetail::EarlyExit},
        {"LoopCountMismatch", FaultDetail::LoopCountMismatch},
        {"CrcMismatch", FaultDetail::CrcMismatch},
        {"BitFlips", FaultDetail::BitFlips},
        {"RegisterDeviation", FaultDetail::RegisterDeviation},
        {"Hang", FaultDetail::Hang},
        {"Reset", FaultDetail::Reset},
        {"Halt", FaultDetail::Halt},
        {"MalformedOutput", FaultDetail::MalformedOutput},
    };
    for (const auto& [name, detail] : table)
        if (s == name) return detail;
    throw std::runtime_error("unknown fault detail \"" + s + "\"");
}

inline nlohmann::json to_json(const FaultObservation& o) {
    return {{"class", to_string(o.cls)},
            {"detail", to_string(o.detail)},
            {"evidence", o.evidence},
            {"bit_flips", o.bit_flip_count},
            {"flips_01", o.flips_zero_to_one},
            {"flips_10", o.flips_one_to_zero}};
}

inline FaultObservation observation_from_json(const nlohmann::json& j) {
    FaultObservation o;
    o.cls = fault_class_from_string(j.at("class").get<std::string>());
    o.detail = fault_detail_from_string(j.at("detail").get<std::string>());
    o.evidence = j.value("evidence", std::vector<std::size_t>{});
    o.bit_flip_count = j.value("bit_flips", 0u);
    o.flips_zero_to_one = j.value("flips_01", 0u);
    o.flips_one_to_zero = j.value("flips_10", 0u);
    return o;
}

inline nlohmann::json to_json(const TrialRecord& r) {
    return {{"record", "trial"},
            {"campaign_id", r.campaign_id},
            {"config_hash", r.config_hash},
            {"seq", r.sequence},
            {"stage", r.stage},
            {"grid_index", r.grid_index},
            {"coord_index", r.coordinate_index},
            {"param_index", r.param_index},
            {"trial_index", r.trial_index},
            {"trial_seed", r.trial_seed},
            {"x", r.coordinate.x},
            {"y", r.coordinate.y},
            {"z", r.coordinate.z},
            {"voltage_v", r.parameters.voltage_v},
            {"width_ns", r.parameters.width_ns},
            {"polarity", to_string(r.parameters.polarity)},
            {"offset_ns", r.parameters.offset_ns},
            {"raw_lines", r.raw_lines},
            {"responded", r.responded},
            {"duration_ms", r.duration_ms},
            {"classification", to_json(r.classification)},
            {"error_count", r.error_count},
            {"timestamp_ms", r.timestamp_ms}};
}

inline TrialRecord trial_from_json(const nlohmann::json& j) {
    TrialRecord r;
    r.campaign_id = j.at("campaign_id").get<std::string>();
    r.config_hash = j.value("config_hash", std::string{});
    r.sequence = j.at("seq").get<std::uint64_t>();
    r.stage = j.value("stage", 0u);
    r.grid_index = j.value("grid_index", 0u);
    r.coordinate_index = j.at("coord_index").get<std::uint64_t>();
    r.param_index = j.at("param_index").get<std::uint64_t>();
    r.trial_index = j.at("trial_index").get<std::uint64_t>();
    r.trial_seed = j.at("trial_seed").get<std::uint64_t>();
    r.coordinate = {j.at("x").get<double>(), j.at("y").get<double>(), j.at("z").get<double>()};
    r.parameters.voltage_v = j.at("voltage_v").get<double>();
    r.parameters.width_ns = j.at("width_ns").get<double>();
    r.parameters.polarity = polarity_from_string(j.at("polarity").get<std::string>());
    r.parameters.offset_ns = j.at("offset_ns").get<double>();
    r.raw_lines = j.value("raw_lines", std::vector<std::string>{});
    r.responded = j.at("responded").get<bool>();
    r.duration_ms = j.value("duration_ms", 0u);
    r.classification = observation_from_json(j.at("classification"));
    r.error_count = j.at("error_count").get<std::uint32_t>();
    r.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
    return r;
}

struct StageInfo {
    std::uint32_t stage = 0;
    std::vector<GridSpec> grids;
    std::vector<std::uint64_t> param_scope;  // indices into the sweep enumeration
};

inline nlohmann::json to_json(const StageInfo& s) {
    nlohmann::json grids = nlohmann::json::array();
    for (const GridSpec& g : s.grids) grids.push_back(to_json(g));
    return {{"record", "stage"}, {"stage", s.stage}, {"grids", grids},
            {"param_scope", s.param_scope}};
}

inline StageInfo stage_from_json(const nlohmann::json& j) {
    StageInfo s;
    s.stage = j.at("stage").get<std::uint32_t>();
    for (const auto& gj : j.at("grids")) s.grids.push_back(grid_from_json(gj));
    s.param_scope = j.value("param_scope", std::vector<std::uint64_t>{});
    return s;
}

class PersistenceError : public std::runtime_error {
public:
    PersistenceError(const std::string& what, std::uint64_t last_durable_sequence)
        : std::runtime_error(what + " (last durable sequence: " +
                             std::to_string(last_durable_sequence) + ")"),
          last_durable_sequence_(last_durable_sequence) {}

    std::uint64_t last_durable_sequence() const { return last_durable_sequence_; }

private:
    std::uint64_t last_durable_sequence_;
};

class LogWriter {
public:
    explicit LogWriter(const std::string& path) : path_(path), out_(path, std::ios::trunc) {
        if (!out_) throw PersistenceError("cannot open log file " + path, 0);
    }

    void write_header(const CampaignConfig& config) {
        nlohmann::json j{{"record", "campaign"},
                         {"format_version", kLogFormatVersion},
                         {"config", to_json(config)},
                         {"config_hash", config_hash(config)}};
        write_line(j.dump());
    }

    void write_stage(const StageInfo& stage) { write_line(to_json(stage).dump()); }

    void write_trial(const TrialRecord& r) {
        write_line(to_json(r).dump());
        last_sequence_ = r.sequence;
    }

    void flush() {
        out_.flush();
        if (!out_) throw PersistenceError("flush failed on " + path_, last_sequence_);
    }

private:
    void write_line(const std::string& line) {
        out_ << line << '\n';
        if (!out_) throw PersistenceError("write failed on " + path_, last_sequence_);
    }

    std::string path_;
    std::ofstream out_;
    std::uint64_t last_sequence_ = 0;
};

struct MalformedLogLine {
    std::size_t line_number = 0;  // 1-based
    std::string message;
};

struct LogContents {
    std::optional<CampaignConfig> config;
    std::string config_hash;
    std::vector<StageInfo> stages;
    std::vector<TrialRecord> trials;
    std::vector<MalformedLogLine> malformed;
};

inline LogContents read_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open log file: " + path);
    LogContents contents;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        try {
            const nlohmann::json j = nlohmann::json::parse(line);
            const std::string kind = j.value("record", std::string{});
            if (kind == "campaign") {
                contents.config = config_from_json(j.at("config"));
                contents.config_hash = j.value("config_hash", std::string{});
            } else if (kind == "stage") {
                contents.stages.push_back(stage_from_json(j));
            } else if (kind == "trial") {
                contents.trials.push_back(trial_from_json(j));
            } else {
                contents.malformed.push_back(
                    {line_number, "unknown record type \"" + kind + "\""});
            }
        } catch (const std::exception& e) {
            contents.malformed.push_back({line_number, e.what()});
        }
    }
    return contents;
}

}  // namespace emfi
