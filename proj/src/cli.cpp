#include "screenloop/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "screenloop/error.hpp"
#include "screenloop/metrics.hpp"
#include "screenloop/predictor.hpp"
#include "screenloop/stopping.hpp"

namespace screenloop::cli {
namespace {

namespace fs = std::filesystem;

Dataset load_source(const DataConfig& c) {
    switch (c.format) {
        case DataFormat::idx: return load_idx(c.images, c.labels);
        case DataFormat::synthetic_regression: return make_synthetic_regression(c.synthetic_n, c.synthetic_seed);
        case DataFormat::csv: break;
    }
    CsvColumns cols = c.csv;
    if (!c.discretize_median) return load_csv_features(c.csv_path, cols);
    cols.task = TaskKind::regression;
    Dataset raw = load_csv_features(c.csv_path, cols);
    Dataset d = raw;
    d.task = TaskKind::classification;
    d.classes = discretize_median(raw.targets);
    d.targets.clear();
    d.n_classes = 2;
    return d;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path.string());
    f << text;
}

std::string columns_line(const ReportTable& t) {
    std::string s = "fraction";
    for (const auto& c : t.columns) s += "," + c.name;
    return s;
}

std::optional<double> metric_value(const CampaignLog& log, std::size_t row, const std::string& metric,
                                   const std::set<SampleId>* hard, std::size_t* hard_hits) {
    const auto& r = log.records[row];
    if (metric == "inference_accuracy") return r.inference_accuracy;
    if (metric == "system_accuracy") return r.true_system_accuracy;
    if (metric == "est_system_accuracy") return r.est_system_accuracy;
    if (metric == "batch_accuracy") return r.batch_accuracy;
    if (metric == "alpha") return r.alpha;
    if (metric == "test_accuracy") return r.test_accuracy;
    // hard_set_fraction: cumulative over the acquired batches
    if (row >= log.details.size()) return std::nullopt;
    for (auto id : log.details[row].acquired) *hard_hits += hard->contains(id) ? 1 : 0;
    return static_cast<double>(*hard_hits) / static_cast<double>(hard->size());
}

const std::set<std::string> kMetrics = {"inference_accuracy", "system_accuracy", "est_system_accuracy",
                                        "batch_accuracy",     "alpha",           "test_accuracy",
                                        "hard_set_fraction"};

std::vector<SampleId> read_id_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--hard-ids", "cannot open " + path.string());
    std::vector<SampleId> ids;
    std::string token;
    while (in >> token) {
        try {
            std::size_t used = 0;
            ids.push_back(std::stoull(token, &used));
            if (used != token.size()) throw std::invalid_argument(token);
        } catch (const std::exception&) {
            throw ConfigError("--hard-ids", "not a sample id: '" + token + "'");
        }
    }
    return ids;
}

Json read_json_file(const fs::path& path, const std::string& what) {
    std::ifstream in(path);
    if (!in) throw ConfigError(what, "cannot open " + path.string());
    try {
        Json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(what, std::string("invalid JSON: ") + e.what());
    }
}

template <typename T>
T param(const Json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("/") + key, e.what());
    }
}

void reject_unknown(const Json& j, std::initializer_list<const char*> known) {
    if (!j.is_object()) throw ConfigError("/", "params must be a JSON object");
    for (const auto& [key, value] : j.items())
        if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) == known.end())
            throw ConfigError("/" + key, "unknown field");
}

int validate_bound(const Json& p, std::ostream& out, std::ostream& err) {
    reject_unknown(p, {"mu", "n", "delta", "trials", "seed"});
    const auto mus = param<std::vector<double>>(p, "mu", {0.8, 0.9, 0.95, 0.99});
    const auto ns = param<std::vector<std::size_t>>(p, "n", {100, 1000});
    const auto deltas = param<std::vector<double>>(p, "delta", {0.05});
    const auto trials = param<std::size_t>(p, "trials", 10000);
    const auto seed = param<std::uint64_t>(p, "seed", 0);
    for (double mu : mus)
        if (!(mu >= 0.0 && mu <= 1.0)) throw ConfigError("/mu", "values must lie in [0,1]");
    for (double d : deltas)
        if (!(d > 0.0 && d < 1.0)) throw ConfigError("/delta", "values must lie in (0,1)");
    if (trials == 0) throw ConfigError("/trials", "must be positive");

    out << "mu,n,delta,trials,failure_rate,limit,ok\n";
    bool all_ok = true;
    std::size_t cell = 0;
    for (double mu : mus) {
        for (auto n : ns) {
            for (double delta : deltas) {
                std::mt19937_64 rng(step_seed(seed, cell++));
                const double rate = validate_bound_coverage(mu, n, delta, trials, rng);
                const double limit = delta + 3.0 * std::sqrt(delta * (1.0 - delta) / static_cast<double>(trials));
                const bool ok = rate <= limit;
                out << format_number(mu) << ',' << n << ',' << format_number(delta) << ',' << trials << ','
                    << format_number(rate) << ',' << format_number(limit) << ',' << (ok ? 1 : 0) << '\n';
                if (!ok) {
                    all_ok = false;
                    err << fmt::format("violated: failure rate {:.6g} > {:.6g} at mu={}, n={}, delta={}\n", rate,
                                       limit, mu, n, delta);
                }
            }
        }
    }
    return all_ok ? exit_ok : exit_contract;
}

int validate_lemma1(const Json& p, std::ostream& out, std::ostream& err) {
    reject_unknown(p, {"n", "n_b", "trials", "confidence_low", "confidence_high", "g", "seed"});
    Lemma1Setup setup;
    setup.n = param<std::size_t>(p, "n", 1000);
    setup.confidence_low = param<double>(p, "confidence_low", 0.5);
    setup.confidence_high = param<double>(p, "confidence_high", 1.0);
    const auto n_b = param<std::size_t>(p, "n_b", 100);
    const auto trials = param<std::size_t>(p, "trials", 1000);
    const auto g = param<std::string>(p, "g", "identity");
    const auto seed = param<std::uint64_t>(p, "seed", 0);
    if (g == "identity") {
        setup.g = [](double v) { return v; };
    } else if (g == "decreasing") {
        // mirror image of the identity on [lo, hi]: accuracy falls as confidence rises
        const double lo = setup.confidence_low, hi = setup.confidence_high;
        setup.g = [lo, hi](double v) { return std::clamp(lo + hi - v, 0.0, 1.0); };
    } else if (g == "constant") {
        setup.g = [](double) { return 0.75; };
    } else {
        throw ConfigError("/g", "unknown value '" + g + "' (expected one of: identity, decreasing, constant)");
    }
    if (n_b == 0 || n_b >= setup.n) throw ConfigError("/n_b", "must lie in [1, n)");
    if (trials == 0) throw ConfigError("/trials", "must be positive");
    if (!(0.0 <= setup.confidence_low && setup.confidence_low <= setup.confidence_high && setup.confidence_high <= 1.0))
        throw ConfigError("/confidence_low", "need 0 <= confidence_low <= confidence_high <= 1");

    std::mt19937_64 rng(seed);
    const auto r = screenloop::validate_lemma1(setup, n_b, trials, rng);
    out << "mean_batch_accuracy,mean_remaining_accuracy,fraction_batch_le_remaining,se_difference\n"
        << format_number(r.mean_batch_accuracy) << ',' << format_number(r.mean_remaining_accuracy) << ','
        << format_number(r.fraction_batch_le_remaining) << ',' << format_number(r.se_difference) << '\n';
    const double slack = 3.0 * r.se_difference;
    if (r.mean_batch_accuracy > r.mean_remaining_accuracy + slack) {
        err << fmt::format("violated: mean batch accuracy {:.6g} > mean remaining accuracy {:.6g} + {:.3g}\n",
                           r.mean_batch_accuracy, r.mean_remaining_accuracy, slack);
        return exit_contract;
    }
    return exit_ok;
}

int validate_calibration(const Json& p, const fs::path& params_path, std::ostream& out, std::ostream& err) {
    reject_unknown(p, {"log", "n_bins", "min_count", "max_violation", "min_pass_fraction", "steps"});
    if (!p.contains("log")) throw ConfigError("/log", "missing campaign log path");
    fs::path log_path = param<std::string>(p, "log", "");
    if (log_path.is_relative()) log_path = params_path.parent_path() / log_path;
    const auto n_bins = param<std::size_t>(p, "n_bins", 10);
    const auto min_count = param<std::size_t>(p, "min_count", 50);
    const auto max_violation = param<double>(p, "max_violation", 0.1);
    const auto min_pass = param<double>(p, "min_pass_fraction", 0.8);
    if (n_bins == 0) throw ConfigError("/n_bins", "must be positive");

    CampaignLog log;
    try {
        log = load_campaign_log(log_path);
    } catch (const FormatError& e) {
        throw ConfigError("/log", e.what());
    }
    if (log.task != TaskKind::classification) throw ConfigError("/log", "calibration needs a classification log");

    std::vector<std::size_t> usable;
    for (std::size_t t = 0; t < log.details.size(); ++t) {
        const auto& s = log.details[t].predictions;
        if (s.size() > 0 && s.correct.size() == s.size()) usable.push_back(t);
    }
    if (usable.empty()) throw ConfigError("/log", "log holds no predictions with ground-truth correctness");

    std::vector<std::size_t> steps;
    if (p.contains("steps")) {
        steps = param<std::vector<std::size_t>>(p, "steps", {});
        for (auto s : steps)
            if (std::find(usable.begin(), usable.end(), s) == usable.end())
                throw ConfigError("/steps", fmt::format("step {} has no usable predictions", s));
    } else {
        // early, middle and late checkpoints
        for (double q : {0.25, 0.5, 0.75}) {
            const auto idx = static_cast<std::size_t>(q * static_cast<double>(usable.size()));
            steps.push_back(usable[std::min(idx, usable.size() - 1)]);
        }
        steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
    }
    if (steps.empty()) throw ConfigError("/steps", "no checkpoints selected");

    out << "step,bin_low,bin_high,count,mean_confidence,accuracy\n";
    std::size_t passed = 0;
    std::ostringstream summary;
    for (auto t : steps) {
        const auto& s = log.details[t].predictions;
        auto flags = std::make_unique<bool[]>(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) flags[i] = s.correct[i];
        const auto report = calibration_bins(s.confidence, std::span<const bool>(flags.get(), s.size()), n_bins);
        for (std::size_t b = 0; b < report.bins.size(); ++b) {
            const auto& bin = report.bins[b];
            out << t << ',' << format_number(report.bin_edges[b]) << ',' << format_number(report.bin_edges[b + 1])
                << ',' << bin.count << ',' << (bin.mean_confidence ? format_number(*bin.mean_confidence) : "") << ','
                << (bin.accuracy ? format_number(*bin.accuracy) : "") << '\n';
        }
        const auto v = weak_calibration_violation(report, min_count);
        const bool ok = !v || *v <= max_violation;
        passed += ok ? 1 : 0;
        summary << "# step " << t << ": violation " << (v ? format_number(*v) : "none") << (ok ? "" : " (fail)")
                << '\n';
    }
    out << summary.str();
    const double frac = static_cast<double>(passed) / static_cast<double>(steps.size());
    if (frac < min_pass) {
        err << fmt::format("violated: {} of {} checkpoints have violation <= {} (need fraction >= {})\n", passed,
                           steps.size(), max_violation, min_pass);
        return exit_contract;
    }
    return exit_ok;
}

}  // namespace

PreparedData prepare_data(const DataConfig& c) {
    Dataset d = load_source(c);
    const Dataset original = d;
    if (c.crop_keep_fraction < 1.0) {
        if (c.format != DataFormat::idx) throw ConfigError("/data/corruption/crop_keep_fraction", "needs image data");
        d = crop_bottom(d, c.image_height, c.image_width, c.crop_keep_fraction);
    }
    if (!c.shuffle_classes.empty()) {
        if (!d.is_classification()) throw ConfigError("/data/corruption/shuffle_classes", "needs class labels");
        d = shuffle_labels(d, c.shuffle_classes, c.shuffle_seed);
    }
    if (c.subsample > 0 && c.subsample < d.n_samples()) {
        std::vector<SampleId> ids = all_ids(d.n_samples());
        std::mt19937_64 rng(step_seed(c.split_seed, 0, 1));
        std::shuffle(ids.begin(), ids.end(), rng);
        ids.resize(c.subsample);
        std::sort(ids.begin(), ids.end());
        d = d.subset(ids);
    }
    SplitSpec spec;
    spec.target_fraction = c.target_fraction;
    spec.val_fraction = c.val_fraction;
    spec.test_fraction = c.test_fraction;
    spec.split_seed = c.split_seed;

    PreparedData out{split_dataset(d, spec), {}};
    if (!c.shuffle_classes.empty()) {
        const std::set<int> shuffled(c.shuffle_classes.begin(), c.shuffle_classes.end());
        const auto& t = out.split.target;
        for (SampleId i = 0; i < t.n_samples(); ++i)
            if (shuffled.contains(original.classes[t.source_rows[i]])) out.shuffled_target_ids.push_back(i);
    }
    return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) throw ConfigError("--seeds", "empty seed in list");
        item = item.substr(b, e - b + 1);
        try {
            std::size_t used = 0;
            if (item.front() == '-') throw std::invalid_argument(item);
            seeds.push_back(std::stoull(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("--seeds", "not a non-negative integer: '" + item + "'");
        }
    }
    if (seeds.empty()) throw ConfigError("--seeds", "no seeds given");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
        throw ConfigError("--seeds", "duplicate seed");
    return seeds;
}

Json summary_json(const CampaignLog& log, const RunConfig& config) {
    auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
    Json final_step = nullptr;
    if (!log.records.empty()) {
        const auto& r = log.records.back();
        final_step = Json{{"step", r.step},
                          {"n_obs", r.n_obs},
                          {"n_inf", r.n_inf},
                          {"batch_acc", r.batch_accuracy},
                          {"alpha", opt(r.alpha)},
                          {"est_sys_acc", opt(r.est_system_accuracy)},
                          {"true_sys_acc", opt(r.true_system_accuracy)},
                          {"inf_acc", opt(r.inference_accuracy)},
                          {"test_acc", opt(r.test_accuracy)}};
    }
    RunConfig echo = config;
    echo.campaign = log.config;
    return Json{{"seed", log.config.seed},
                {"stopping_time", log.stopping_time ? Json(*log.stopping_time) : Json(nullptr)},
                {"stop_reason", to_string(log.stop_reason)},
                {"n_steps", log.records.size()},
                {"n_target", log.n_target},
                {"final", final_step},
                {"oracle_calls", log.oracle_calls},
                {"complete", log.complete},
                {"error", log.error},
                {"config", run_config_to_json(echo)}};
}

void write_run_outputs(const fs::path& dir, const CampaignLog& log, const RunConfig& config) {
    fs::create_directories(dir);
    std::ostringstream steps, hybrid;
    write_step_csv(steps, log);
    write_hybrid_csv(hybrid, log);
    write_text(dir / "steps.csv", steps.str());
    write_text(dir / "hybrid.csv", hybrid.str());
    write_text(dir / "summary.json", summary_json(log, config).dump(2) + "\n");
    if (config.output.save_log) write_text(dir / "campaign_log.json", campaign_log_to_json(log).dump() + "\n");
}

ReportTable build_report(const std::vector<CampaignLog>& logs, const std::string& metric,
                         const std::vector<SampleId>* hard_ids) {
    if (!kMetrics.contains(metric)) throw ConfigError("--metric", "unknown metric '" + metric + "'");
    if (logs.empty()) throw ConfigError("--logs", "no logs given");
    std::set<SampleId> hard;
    if (metric == "hard_set_fraction") {
        if (hard_ids == nullptr || hard_ids->empty())
            throw ConfigError("--hard-ids", "hard_set_fraction needs a non-empty hard-id list");
        hard.insert(hard_ids->begin(), hard_ids->end());
    }

    // one step function per log: (fraction, value) pairs in step order
    std::vector<std::vector<std::pair<double, std::optional<double>>>> series(logs.size());
    std::set<double> grid;
    for (std::size_t k = 0; k < logs.size(); ++k) {
        const auto& log = logs[k];
        if (log.n_target == 0) throw ConfigError("--logs", "log has an empty target set");
        if (metric == "hard_set_fraction" && log.details.size() < log.records.size())
            throw ConfigError("--logs", "hard_set_fraction needs logs saved with per-step details");
        std::size_t hits = 0;
        for (std::size_t row = 0; row < log.records.size(); ++row) {
            const double f = static_cast<double>(log.records[row].n_obs) / static_cast<double>(log.n_target);
            series[k].emplace_back(f, metric_value(log, row, metric, &hard, &hits));
            grid.insert(f);
        }
    }

    ReportTable table;
    table.fractions.assign(grid.begin(), grid.end());
    std::map<std::string, std::vector<std::size_t>> by_agent;
    std::map<std::string, std::size_t> name_uses;
    for (std::size_t k = 0; k < logs.size(); ++k) {
        const std::string agent = to_string(logs[k].config.acquisition.kind);
        std::string name = fmt::format("{}_seed{}", agent, logs[k].config.seed);
        if (const auto n = name_uses[name]++; n > 0) name += fmt::format("_{}", n);
        ReportColumn col{name, {}};
        std::size_t j = 0;
        std::optional<double> current;
        for (double f : table.fractions) {
            while (j < series[k].size() && series[k][j].first <= f) current = series[k][j++].second;
            col.values.push_back(current);
        }
        by_agent[agent].push_back(table.columns.size());
        table.columns.push_back(std::move(col));
    }
    for (const auto& [agent, cols] : by_agent) {
        ReportColumn mean{agent + "_mean", {}}, sem{agent + "_sem", {}};
        for (std::size_t r = 0; r < table.fractions.size(); ++r) {
            std::vector<double> v;
            for (auto c : cols)
                if (table.columns[c].values[r]) v.push_back(*table.columns[c].values[r]);
            if (v.empty()) {
                mean.values.emplace_back();
                sem.values.emplace_back();
                continue;
            }
            const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
            mean.values.emplace_back(m);
            if (v.size() < 2) {
                sem.values.emplace_back();
                continue;
            }
            double ss = 0.0;
            for (double x : v) ss += (x - m) * (x - m);
            const double k = static_cast<double>(v.size());
            sem.values.emplace_back(std::sqrt(ss / (k - 1.0) / k));
        }
        table.columns.push_back(std::move(mean));
        table.columns.push_back(std::move(sem));
    }
    return table;
}

void write_report_csv(std::ostream& out, const ReportTable& table) {
    out << columns_line(table) << '\n';
    for (std::size_t r = 0; r < table.fractions.size(); ++r) {
        out << format_number(table.fractions[r]);
        for (const auto& c : table.columns) out << ',' << (c.values[r] ? format_number(*c.values[r]) : "");
        out << '\n';
    }
}

std::optional<double> column_at(const ReportTable& table, const std::string& column, double f) {
    const auto it = std::find_if(table.columns.begin(), table.columns.end(),
                                 [&](const ReportColumn& c) { return c.name == column; });
    if (it == table.columns.end()) throw InvalidArgument("no report column named " + column);
    std::optional<double> value;
    for (std::size_t r = 0; r < table.fractions.size() && table.fractions[r] <= f; ++r) value = it->values[r];
    return value;
}

int cmd_run(const RunManifest& manifest, std::ostream& out, std::ostream& err) {
    RunConfig config;
    PreparedData data;
    std::vector<CampaignConfig> campaigns;
    try {
        config = load_run_config(manifest.config_path);
        data = prepare_data(config.data);
        const auto seeds = manifest.seeds.empty() ? std::vector<std::uint64_t>{config.campaign.seed} : manifest.seeds;
        for (auto s : seeds) {
            CampaignConfig c = config.campaign;
            c.seed = s;
            campaigns.push_back(c);
        }
    } catch (const ConfigError& e) {
        err << "config error at " << (e.field().empty() ? "/" : e.field()) << ": " << e.what() << '\n';
        return exit_config;
    } catch (const Error& e) {
        err << "error preparing data: " << e.what() << '\n';
        return exit_runtime;
    }

    const CampaignData cd{&data.split.target, &data.split.val,
                          data.split.test.n_samples() > 0 ? &data.split.test : nullptr};
    std::vector<CampaignLog> logs;
    try {
        logs = run_comparison(campaigns, cd);
    } catch (const PolicyMismatch& e) {
        err << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const InvalidArgument& e) {
        err << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << '\n';
        return exit_runtime;
    }

    int status = exit_ok;
    try {
        for (const auto& log : logs) {
            const fs::path dir =
                logs.size() == 1 ? manifest.output_dir : manifest.output_dir / fmt::format("seed_{}", log.config.seed);
            write_run_outputs(dir, log, config);
            if (!data.shuffled_target_ids.empty()) {
                std::string ids;
                for (auto id : data.shuffled_target_ids) ids += std::to_string(id) + "\n";
                write_text(dir / "shuffled_ids.txt", ids);
            }
            out << fmt::format("seed {}: {} steps, stop {}, tau {}\n", log.config.seed, log.records.size(),
                               to_string(log.stop_reason),
                               log.stopping_time ? std::to_string(*log.stopping_time) : "none");
            if (!log.complete) {
                err << "seed " << log.config.seed << ": campaign incomplete: " << log.error << '\n';
                status = exit_runtime;
            }
        }
    } catch (const std::exception& e) {
        err << "error writing outputs: " << e.what() << '\n';
        return exit_runtime;
    }
    return status;
}

int cmd_validate(const std::string& kind, const fs::path& params, std::ostream& out, std::ostream& err) {
    try {
        const Json p = params.empty() ? Json::object() : read_json_file(params, "--params");
        if (kind == "bound") return validate_bound(p, out, err);
        if (kind == "lemma1") return validate_lemma1(p, out, err);
        if (kind == "calibration") return validate_calibration(p, params, out, err);
        err << "unknown validation kind '" << kind << "' (expected bound, lemma1 or calibration)\n";
        return exit_config;
    } catch (const ConfigError& e) {
        err << "params error at " << (e.field().empty() ? "/" : e.field()) << ": " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << '\n';
        return exit_runtime;
    }
}

int cmd_report(const std::vector<fs::path>& log_paths, const std::string& metric, const fs::path& out_file,
               const std::optional<fs::path>& hard_ids, std::ostream& out, std::ostream& err) {
    try {
        if (!kMetrics.contains(metric)) throw ConfigError("--metric", "unknown metric '" + metric + "'");
        std::vector<CampaignLog> logs;
        for (const auto& p : log_paths) {
            try {
                logs.push_back(load_campaign_log(p));
            } catch (const FormatError& e) {
                throw ConfigError("--logs", e.what());
            }
        }
        std::vector<SampleId> ids;
        if (hard_ids) ids = read_id_file(*hard_ids);
        const auto table = build_report(logs, metric, hard_ids ? &ids : nullptr);
        std::ostringstream csv;
        write_report_csv(csv, table);
        write_text(out_file, csv.str());
        out << fmt::format("wrote {} rows x {} columns to {}\n", table.fractions.size(), table.columns.size() + 1,
                           out_file.string());
        return exit_ok;
    } catch (const ConfigError& e) {
        err << "error at " << e.field() << ": " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << '\n';
        return exit_runtime;
    }
}

int main(int argc, char** argv) {
    CLI::App app{"screenloop: active-learning hybrid screens with a stopping guarantee"};
    app.require_subcommand(1);

    RunManifest manifest;
    std::string seeds;
    auto* run = app.add_subcommand("run", "run one campaign per seed");
    run->add_option("--config", manifest.config_path, "JSON run config")->required()->check(CLI::ExistingFile);
    run->add_option("--out", manifest.output_dir, "output directory")->required();
    run->add_option("--seeds", seeds, "comma-separated seed list, e.g. \"1,2,3\"");

    std::string kind;
    fs::path params;
    auto* validate = app.add_subcommand("validate", "run a validation suite");
    validate->add_option("kind", kind, "bound, lemma1 or calibration")
        ->required()
        ->check(CLI::IsMember({"bound", "lemma1", "calibration"}));
    validate->add_option("--params", params, "JSON parameters")->check(CLI::ExistingFile);

    std::string metric;
    std::vector<fs::path> logs;
    fs::path out_file;
    std::optional<fs::path> hard_ids;
    auto* report = app.add_subcommand("report", "tabulate a metric across campaign logs");
    report->add_option("--metric", metric, "metric name")->required();
    report->add_option("--logs", logs, "campaign_log.json files")->required()->check(CLI::ExistingFile);
    report->add_option("--out", out_file, "output CSV")->required();
    report->add_option("--hard-ids", hard_ids, "file of target ids forming the hard set");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    if (*run) {
        if (!seeds.empty()) {
            try {
                manifest.seeds = parse_seed_list(seeds);
            } catch (const ConfigError& e) {
                std::cerr << "error at " << e.field() << ": " << e.what() << '\n';
                return exit_config;
            }
        }
        return cmd_run(manifest, std::cout, std::cerr);
    }
    if (*validate) return cmd_validate(kind, params, std::cout, std::cerr);
    return cmd_report(logs, metric, out_file, hard_ids, std::cout, std::cerr);
}

}  // namespace screenloop::cli
