#include "screenloop/datasets.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "screenloop/error.hpp"

namespace screenloop {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<std::uint8_t> read_maybe_gzipped(const std::filesystem::path& path) {
    gzFile file = gzopen(path.string().c_str(), "rb");
    if (file == nullptr) throw FormatError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes;
    std::uint8_t buffer[1 << 16];
    int n = 0;
    while ((n = gzread(file, buffer, sizeof(buffer))) > 0) bytes.insert(bytes.end(), buffer, buffer + n);
    const bool failed = n < 0;
    gzclose(file);
    if (failed) throw FormatError("read error in " + path.string());
    return bytes;
}

void write_maybe_gzipped(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    if (path.extension() == ".gz") {
        gzFile file = gzopen(path.string().c_str(), "wb");
        if (file == nullptr) throw FormatError("cannot create " + path.string());
        const int written = gzwrite(file, bytes.data(), static_cast<unsigned>(bytes.size()));
        gzclose(file);
        if (written != static_cast<int>(bytes.size())) throw FormatError("write error in " + path.string());
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot create " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::string& what) {
    if (offset + 4 > bytes.size()) throw FormatError("truncated IDX header: missing " + what);
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(std::move(cell));
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    cells.push_back(std::move(cell));
    return cells;
}

double parse_number(const std::string& text, std::size_t row, const std::string& column) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    while (first < last && *first == ' ') ++first;
    while (last > first && last[-1] == ' ') --last;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || first == last || !std::isfinite(value))
        throw FormatError("row " + std::to_string(row) + ", column '" + column +
                          "': not a finite number: '" + text + "'");
    return value;
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
    const auto image_bytes = read_maybe_gzipped(images_path);
    const auto label_bytes = read_maybe_gzipped(labels_path);

    const auto image_magic = read_be32(image_bytes, 0, "images magic");
    if (image_magic != kImageMagic)
        throw FormatError("images magic number is " + std::to_string(image_magic) + ", expected 2051");
    const auto n_images = read_be32(image_bytes, 4, "images count");
    const auto rows = read_be32(image_bytes, 8, "images rows");
    const auto cols = read_be32(image_bytes, 12, "images cols");

    const auto label_magic = read_be32(label_bytes, 0, "labels magic");
    if (label_magic != kLabelMagic)
        throw FormatError("labels magic number is " + std::to_string(label_magic) + ", expected 2049");
    const auto n_labels = read_be32(label_bytes, 4, "labels count");

    if (n_images != n_labels)
        throw FormatError("images count " + std::to_string(n_images) + " does not match labels count " +
                          std::to_string(n_labels));
    if (n_images == 0) throw FormatError("images count is 0");
    const std::size_t pixels = std::size_t{rows} * cols;
    if (image_bytes.size() < 16 + std::size_t{n_images} * pixels)
        throw FormatError("images payload truncated: expected " + std::to_string(n_images * pixels) +
                          " bytes");
    if (label_bytes.size() < 8 + std::size_t{n_labels})
        throw FormatError("labels payload truncated: expected " + std::to_string(n_labels) + " bytes");

    FeatureMatrix features(n_images, static_cast<Eigen::Index>(pixels));
    for (std::size_t i = 0; i < n_images; ++i)
        for (std::size_t j = 0; j < pixels; ++j)
            features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                image_bytes[16 + i * pixels + j] / 255.0;
    std::vector<int> classes(label_bytes.begin() + 8, label_bytes.begin() + 8 + n_labels);
    const int max_class = *std::max_element(classes.begin(), classes.end());
    return make_classification_dataset(std::move(features), std::move(classes),
                                       static_cast<std::size_t>(max_class + 1));
}

void write_idx_images(const std::filesystem::path& path, std::span<const std::uint8_t> pixels,
                      std::uint32_t n, std::uint32_t rows, std::uint32_t cols) {
    if (pixels.size() != std::size_t{n} * rows * cols)
        throw InvalidArgument("pixel buffer does not match n*rows*cols");
    std::vector<std::uint8_t> bytes;
    append_be32(bytes, kImageMagic);
    append_be32(bytes, n);
    append_be32(bytes, rows);
    append_be32(bytes, cols);
    bytes.insert(bytes.end(), pixels.begin(), pixels.end());
    write_maybe_gzipped(path, bytes);
}

void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels) {
    std::vector<std::uint8_t> bytes;
    append_be32(bytes, kLabelMagic);
    append_be32(bytes, static_cast<std::uint32_t>(labels.size()));
    bytes.insert(bytes.end(), labels.begin(), labels.end());
    write_maybe_gzipped(path, bytes);
}

Dataset load_csv_features(const std::filesystem::path& path, const CsvColumns& columns) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": missing header row");
    const auto header = split_csv_line(line);
    auto index_of = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw FormatError(path.string() + ": missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto label_idx = index_of(columns.label_column);
    std::vector<std::size_t> feature_idx;
    for (const auto& c : columns.feature_columns) feature_idx.push_back(index_of(c));
    std::vector<std::size_t> aux_idx;
    for (const auto& c : columns.aux_columns) aux_idx.push_back(index_of(c));
    std::vector<std::size_t> fp_idx;
    for (const auto& c : columns.fingerprint_columns) fp_idx.push_back(index_of(c));

    std::vector<std::vector<double>> rows;
    std::vector<double> labels;
    std::vector<RealColumn> aux(aux_idx.size());
    std::vector<BitColumn> fps(fp_idx.size());
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw FormatError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                              " cells, found " + std::to_string(cells.size()));
        std::vector<double> values;
        values.reserve(feature_idx.size());
        for (std::size_t k = 0; k < feature_idx.size(); ++k)
            values.push_back(parse_number(cells[feature_idx[k]], row, columns.feature_columns[k]));
        rows.push_back(std::move(values));
        labels.push_back(parse_number(cells[label_idx], row, columns.label_column));
        for (std::size_t k = 0; k < aux_idx.size(); ++k)
            aux[k].push_back(parse_number(cells[aux_idx[k]], row, columns.aux_columns[k]));
        for (std::size_t k = 0; k < fp_idx.size(); ++k) {
            try {
                fps[k].push_back(BitVector::from_string(cells[fp_idx[k]]));
            } catch (const FormatError& e) {
                throw FormatError("row " + std::to_string(row) + ", column '" +
                                  columns.fingerprint_columns[k] + "': " + e.what());
            }
        }
    }
    if (rows.empty()) throw FormatError(path.string() + ": no data rows");

    FeatureMatrix features(static_cast<Eigen::Index>(rows.size()),
                           static_cast<Eigen::Index>(feature_idx.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < feature_idx.size(); ++j)
            features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];

    Dataset d;
    if (columns.task == TaskKind::classification) {
        std::vector<int> classes;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const double v = labels[i];
            if (v < 0 || v != std::floor(v))
                throw FormatError("row " + std::to_string(i + 2) + ", column '" + columns.label_column +
                                  "': class label must be a non-negative integer");
            classes.push_back(static_cast<int>(v));
        }
        d = make_classification_dataset(std::move(features), std::move(classes));
    } else {
        d = make_regression_dataset(std::move(features), std::move(labels));
    }
    for (std::size_t k = 0; k < aux_idx.size(); ++k) d.aux.emplace(columns.aux_columns[k], std::move(aux[k]));
    for (std::size_t k = 0; k < fp_idx.size(); ++k)
        d.aux.emplace(columns.fingerprint_columns[k], std::move(fps[k]));
    d.validate();
    return d;
}

Dataset crop_bottom(const Dataset& dataset, std::size_t image_height, std::size_t image_width,
                    double keep_fraction) {
    if (image_height * image_width != dataset.n_features())
        throw InvalidArgument("image dimensions " + std::to_string(image_height) + "x" +
                              std::to_string(image_width) + " do not match " +
                              std::to_string(dataset.n_features()) + " features");
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
        throw InvalidArgument("keep_fraction must lie in (0,1]");
    const auto kept_rows = static_cast<std::size_t>(
        std::ceil(static_cast<double>(image_height) * keep_fraction - 1e-9));
    Dataset out = dataset;
    const auto first_blank = static_cast<Eigen::Index>(kept_rows * image_width);
    out.features.rightCols(out.features.cols() - first_blank).setZero();
    return out;
}

Dataset shuffle_labels(const Dataset& dataset, std::span<const int> class_set, std::uint64_t seed) {
    if (!dataset.is_classification()) throw PolicyMismatch("shuffle_labels needs a classification dataset");
    std::vector<bool> selected(dataset.n_classes, false);
    for (int c : class_set) {
        if (c < 0 || static_cast<std::size_t>(c) >= dataset.n_classes)
            throw InvalidArgument("class " + std::to_string(c) + " outside 0.." +
                                  std::to_string(dataset.n_classes) + "-1");
        selected[static_cast<std::size_t>(c)] = true;
    }
    Dataset out = dataset;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> draw(0, static_cast<int>(dataset.n_classes) - 1);
    for (auto& label : out.classes)
        if (selected[static_cast<std::size_t>(label)]) label = draw(rng);
    return out;
}

std::vector<int> discretize_median(std::span<const double> values) {
    if (values.size() < 2) throw InvalidArgument("median discretization needs at least 2 values");
    std::vector<double> sorted(values.begin(), values.end());
    for (double v : sorted)
        if (!std::isfinite(v)) throw InvalidArgument("median discretization needs finite values");
    std::sort(sorted.begin(), sorted.end());
    const auto n = sorted.size();
    const double median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    std::vector<int> out;
    out.reserve(n);
    for (double v : values) out.push_back(v > median ? 1 : 0);
    return out;
}

double synthetic_regression_mean(double x) {
    double y = std::sin(2.0 * x);
    if (x > 0.5) y += std::sin(30.0 * x);
    return y;
}

Dataset make_synthetic_regression(std::size_t n, std::uint64_t seed) {
    if (n == 0) throw InvalidArgument("synthetic regression needs n > 0");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(-1.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    FeatureMatrix x(static_cast<Eigen::Index>(n), 1);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = ux(rng);
        x(static_cast<Eigen::Index>(i), 0) = xi;
        y[i] = synthetic_regression_mean(xi) + 0.05 * (1.0 + std::abs(xi)) * noise(rng);
    }
    return make_regression_dataset(std::move(x), std::move(y));
}

SplitResult split_dataset(const Dataset& dataset, const SplitSpec& spec) {
    const auto n = dataset.n_samples();
    std::vector<SampleId> target_ids, val_ids, test_ids;
    if (spec.explicit_lists) {
        std::vector<bool> used(n, false);
        auto claim = [&](const std::vector<SampleId>& ids) {
            for (auto id : ids) {
                if (id >= n) throw InvalidArgument("split id " + std::to_string(id) + " out of range");
                if (used[id]) throw InvalidArgument("split id " + std::to_string(id) + " listed twice");
                used[id] = true;
            }
        };
        claim(spec.target_ids);
        claim(spec.val_ids);
        claim(spec.test_ids);
        target_ids = spec.target_ids;
        val_ids = spec.val_ids;
        test_ids = spec.test_ids;
    } else {
        const double fractions[] = {spec.target_fraction, spec.val_fraction, spec.test_fraction};
        for (double f : fractions)
            if (!(f >= 0.0)) throw InvalidArgument("split fractions must be non-negative");
        if (std::abs(spec.target_fraction + spec.val_fraction + spec.test_fraction - 1.0) > 1e-9)
            throw InvalidArgument("split fractions must sum to 1");
        std::vector<SampleId> perm(n);
        std::iota(perm.begin(), perm.end(), SampleId{0});
        std::mt19937_64 rng(spec.split_seed);
        std::shuffle(perm.begin(), perm.end(), rng);
        const auto n_target = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(spec.target_fraction * n)));
        const auto n_val = std::min<std::size_t>(n - n_target, static_cast<std::size_t>(std::llround(spec.val_fraction * n)));
        target_ids.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_target));
        val_ids.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_target),
                       perm.begin() + static_cast<std::ptrdiff_t>(n_target + n_val));
        test_ids.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_target + n_val), perm.end());
    }
    return SplitResult{dataset.subset(target_ids), dataset.subset(val_ids), dataset.subset(test_ids)};
}

}  // namespace screenloop
