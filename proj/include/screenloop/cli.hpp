#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "screenloop/datasets.hpp"
#include "screenloop/engine.hpp"
#include "screenloop/serialization.hpp"

namespace screenloop::cli {

enum ExitCode : int { exit_ok = 0, exit_runtime = 1, exit_config = 2, exit_contract = 3 };

struct RunManifest {
    std::filesystem::path config_path;
    std::filesystem::path output_dir;
    std::vector<std::uint64_t> seeds;  // empty: the seed in the config
};

struct PreparedData {
    SplitResult split;
    /// Target rows whose original class was in the shuffled class set.
    std::vector<SampleId> shuffled_target_ids;
};

/// Load, corrupt, subsample, split; in that order.
PreparedData prepare_data(const DataConfig& config);

/// "1,2,3" -> {1,2,3}. Throws ConfigError on malformed input.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

Json summary_json(const CampaignLog& log, const RunConfig& config);

/// Writes steps.csv, summary.json, hybrid.csv (and campaign_log.json when
/// requested) into `dir`.
void write_run_outputs(const std::filesystem::path& dir, const CampaignLog& log, const RunConfig& config);

struct ReportColumn {
    std::string name;
    std::vector<std::optional<double>> values;
};

struct ReportTable {
    std::vector<double> fractions;  // acquired fraction, ascending
    std::vector<ReportColumn> columns;
};

/// Metrics: inference_accuracy, system_accuracy, est_system_accuracy,
/// batch_accuracy, alpha, test_accuracy, hard_set_fraction (needs hard ids).
/// Each log is resampled to the union of acquired fractions as a step
/// function; per-agent mean and standard-error columns follow the raw ones.
ReportTable build_report(const std::vector<CampaignLog>& logs, const std::string& metric,
                         const std::vector<SampleId>* hard_ids = nullptr);
void write_report_csv(std::ostream& out, const ReportTable& table);

/// Step-function value of one column at acquired fraction `f`.
std::optional<double> column_at(const ReportTable& table, const std::string& column, double f);

int cmd_run(const RunManifest& manifest, std::ostream& out, std::ostream& err);
int cmd_validate(const std::string& kind, const std::filesystem::path& params, std::ostream& out, std::ostream& err);
int cmd_report(const std::vector<std::filesystem::path>& logs, const std::string& metric,
               const std::filesystem::path& out_file, const std::optional<std::filesystem::path>& hard_ids,
               std::ostream& out, std::ostream& err);

/// Parses arguments and dispatches to a subcommand.
int main(int argc, char** argv);

}  // namespace screenloop::cli
