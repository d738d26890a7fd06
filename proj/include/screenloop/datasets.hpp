#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "screenloop/core.hpp"

namespace screenloop {

/// Fractions or explicit id lists for a target/validation/test split.
struct SplitSpec {
    double target_fraction = 1.0;
    double val_fraction = 0.0;
    double test_fraction = 0.0;
    std::uint64_t split_seed = 0;
    /// When `explicit_lists` is set the fractions are ignored.
    bool explicit_lists = false;
    std::vector<SampleId> target_ids;
    std::vector<SampleId> val_ids;
    std::vector<SampleId> test_ids;
};

struct SplitResult {
    Dataset target;
    Dataset val;
    Dataset test;
};

/// Reads an IDX image/label pair (optionally gzip-compressed). Pixels are
/// scaled to [0,1].
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Writes raw IDX files; a ".gz" extension produces gzip output.
void write_idx_images(const std::filesystem::path& path, std::span<const std::uint8_t> pixels,
                      std::uint32_t n, std::uint32_t rows, std::uint32_t cols);
void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels);

struct CsvColumns {
    std::string label_column;
    std::vector<std::string> feature_columns;
    std::vector<std::string> aux_columns;          // parsed as reals
    std::vector<std::string> fingerprint_columns;  // parsed as 0/1 bit strings
    TaskKind task = TaskKind::classification;

    friend bool operator==(const CsvColumns&, const CsvColumns&) = default;
};

/// Comma-separated table with a header row. Row order is preserved.
Dataset load_csv_features(const std::filesystem::path& path, const CsvColumns& columns);

/// Zeroes image rows at index >= ceil(height * keep_fraction).
Dataset crop_bottom(const Dataset& dataset, std::size_t image_height, std::size_t image_width,
                    double keep_fraction);

/// Relabels every sample whose class is in `class_set` with a class drawn
/// uniformly from all K classes.
Dataset shuffle_labels(const Dataset& dataset, std::span<const int> class_set, std::uint64_t seed);

/// 1 where value > median, else 0.
std::vector<int> discretize_median(std::span<const double> values);

/// One input x ~ U(-1, 1) and y = f(x) + noise. f is a slow sinusoid except
/// on x > 0.5, where a fast oscillation is added; noise grows with |x|.
Dataset make_synthetic_regression(std::size_t n, std::uint64_t seed);
double synthetic_regression_mean(double x);

SplitResult split_dataset(const Dataset& dataset, const SplitSpec& spec);

}  // namespace screenloop
