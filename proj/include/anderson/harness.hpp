#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "anderson/centers.hpp"
#include "anderson/dos.hpp"
#include "anderson/pointproc.hpp"
#include "anderson/realizations.hpp"
#include "anderson/spacings.hpp"

namespace anderson {

enum class ExperimentKind { dos, levelstats, two_energy, concentration, spacings, centers, joint, dcs };

std::string to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& s);
const std::vector<std::string>& experiment_kind_names();

// One message per offending field, each prefixed by its path ("stats.beta: ...").
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

struct DosTableRef {
    std::filesystem::path path;  // empty: calibrate inline
    std::string hash;            // empty: accept whatever hash the file verifies to
    std::size_t realizations = 200;
    std::size_t grid_points = 2001;
    std::size_t bandwidth_steps = 5;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::dos;
    ModelParams model;
    RunOptions run;
    std::filesystem::path out = "out";
    DosTableRef dos;

    LevelStatsSettings levelstats;
    TwoEnergySettings two_energy;
    ConcentrationSettings concentration;
    DlsSettings spacings;
    CentersSettings centers;
    JointSettings joint;
    DcsSettings dcs;

    // statistic name -> declared bound; empty means no gating.
    std::map<std::string, double> gate;

    nlohmann::json source;  // the merged document, as recorded in the manifest
    std::vector<std::string> flag_overrides;  // field paths set from the command line
};

// Validates the whole document and collects every problem before throwing.
ExperimentConfig parse_config(const nlohmann::json& doc);

// Statistic names a gate may refer to for this configuration.
std::vector<std::string> gate_statistics(const ExperimentConfig& config);

struct OutputFile {
    std::string name;
    std::string sha256;
};

struct GateResult {
    std::string statistic;
    double value = 0.0;
    double bound = 0.0;  // declared bound, raised to the calibration threshold when one exists
    bool passed = false;
};

struct RunManifest {
    nlohmann::json config;
    std::string config_hash;
    std::string code_version;
    std::vector<std::string> flag_overrides;
    nlohmann::json seeds;
    double wall_clock_seconds = 0.0;
    std::vector<std::string> warnings;
    std::vector<OutputFile> outputs;
    std::vector<GateResult> gate;

    bool gated() const { return !gate.empty(); }
    bool passed() const;
    nlohmann::json to_json() const;
};

// Runs the experiment, writes every artifact atomically into config.out and
// the manifest last.
RunManifest run_experiment(const ExperimentConfig& config);

std::string code_version();

}  // namespace anderson
