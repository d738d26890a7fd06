#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "screenloop/core.hpp"
#include "screenloop/datasets.hpp"
#include "screenloop/engine.hpp"

namespace screenloop {

using Json = nlohmann::json;

enum class DataFormat { idx, csv, synthetic_regression };

/// Where the target/validation/test data comes from and how it is corrupted
/// and split before a campaign.
struct DataConfig {
    DataFormat format = DataFormat::idx;
    std::string images;  // idx
    std::string labels;  // idx
    std::string csv_path;
    CsvColumns csv;
    bool discretize_median = false;  // csv regression label -> 2 balanced classes
    std::size_t synthetic_n = 2000;
    std::uint64_t synthetic_seed = 0;
    std::size_t subsample = 0;  // 0 keeps every sample
    std::size_t image_height = 28;
    std::size_t image_width = 28;
    double crop_keep_fraction = 1.0;
    std::vector<int> shuffle_classes;
    std::uint64_t shuffle_seed = 0;
    double target_fraction = 0.8;
    double val_fraction = 0.1;
    double test_fraction = 0.1;
    std::uint64_t split_seed = 0;

    friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

struct OutputConfig {
    bool save_log = false;  // also write campaign_log.json

    friend bool operator==(const OutputConfig&, const OutputConfig&) = default;
};

/// The single JSON document accepted by `screenloop run`.
struct RunConfig {
    std::string profile;  // empty, or a named hyperparameter profile
    DataConfig data;
    CampaignConfig campaign;
    OutputConfig output;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Hyperparameter profiles: mnist, qm9, molecules3d, rxrx3, phenomics.
void apply_profile(std::string_view profile, CampaignConfig& campaign);

Json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const Json& j, const std::string& path, ModelConfig base = {});

Json campaign_config_to_json(const CampaignConfig& config);

/// Throws ConfigError with a field path on any schema violation.
RunConfig parse_run_config(const Json& j);
RunConfig load_run_config(const std::filesystem::path& path);
Json run_config_to_json(const RunConfig& config);

Json campaign_log_to_json(const CampaignLog& log);
CampaignLog campaign_log_from_json(const Json& j);
CampaignLog load_campaign_log(const std::filesystem::path& path);

/// 17 significant digits, so the text reparses to the same double.
std::string format_number(double value);

/// Header: step,n_obs,n_inf,batch_acc,alpha,est_sys_acc,true_sys_acc,inf_acc,test_acc,stopped
void write_step_csv(std::ostream& out, const CampaignLog& log);
/// Header: sample_id,label,source
void write_hybrid_csv(std::ostream& out, const CampaignLog& log);

}  // namespace screenloop
