#include "screenloop/serialization.hpp"

#include <fmt/format.h>

#include <fstream>
#include <ostream>
#include <set>

#include "screenloop/error.hpp"

namespace screenloop {
namespace {

constexpr int kLogVersion = 1;

// Typed access to one JSON object with path-qualified errors; finish()
// rejects keys that were never read.
class Section {
public:
    Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "/" : path_, "expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const Json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    std::string field(const std::string& key) const { return path_ + "/" + key; }

    template <typename T>
    T get(const std::string& key, T fallback) {
        if (!has(key)) return fallback;
        const Json& v = raw(key);
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError(field(key), "expected a boolean");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw ConfigError(field(key), "expected a string");
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v.is_number()) throw ConfigError(field(key), "expected a number");
            } else if constexpr (std::is_unsigned_v<T>) {
                if (!v.is_number_unsigned()) throw ConfigError(field(key), "expected a non-negative integer");
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
            }
            return v.get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(field(key), e.what());
        }
    }

    template <typename T>
    std::vector<T> get_list(const std::string& key, std::vector<T> fallback) {
        if (!has(key)) return fallback;
        const Json& v = raw(key);
        if (!v.is_array()) throw ConfigError(field(key), "expected an array");
        std::vector<T> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const auto& item = v[i];
            const auto where = field(key) + "/" + std::to_string(i);
            if constexpr (std::is_same_v<T, std::string>) {
                if (!item.is_string()) throw ConfigError(where, "expected a string");
            } else {
                if (!item.is_number_integer()) throw ConfigError(where, "expected an integer");
            }
            out.push_back(item.get<T>());
        }
        return out;
    }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!seen_.contains(key)) throw ConfigError(field(key), "unknown field");
    }

private:
    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

template <typename Enum>
Enum parse_enum(const std::string& text, const std::string& field,
                std::initializer_list<std::pair<const char*, Enum>> options) {
    std::string names;
    for (const auto& [name, value] : options) {
        if (text == name) return value;
        names += names.empty() ? name : std::string(", ") + name;
    }
    throw ConfigError(field, "unknown value '" + text + "' (expected one of: " + names + ")");
}

PolicyKind parse_policy(const std::string& text, const std::string& field) {
    return parse_enum<PolicyKind>(text, field,
                                  {{"least_confidence", PolicyKind::least_confidence},
                                   {"random", PolicyKind::random},
                                   {"bald", PolicyKind::bald},
                                   {"qbc_variance", PolicyKind::qbc_variance},
                                   {"fixed_order", PolicyKind::fixed_order},
                                   {"tanimoto_diversity", PolicyKind::tanimoto_diversity}});
}

std::string data_format_name(DataFormat f) {
    switch (f) {
        case DataFormat::idx: return "idx";
        case DataFormat::csv: return "csv";
        case DataFormat::synthetic_regression: return "synthetic_regression";
    }
    return "idx";
}

std::string task_name(TaskKind task) { return task == TaskKind::classification ? "classification" : "regression"; }

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> read_optional(const Json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

Json label_to_json(const Label& label) {
    return std::visit([](auto v) { return Json(v); }, label);
}

Label label_from_json(const Json& j, TaskKind task) {
    if (task == TaskKind::classification) return j.get<int>();
    return j.get<double>();
}

CampaignConfig campaign_config_from_sections(Section& campaign, Section* stopping, Section* model,
                                             CampaignConfig c) {
    c.gamma = campaign.get("gamma", c.gamma);
    c.delta = campaign.get("delta", c.delta);
    c.batch_size = campaign.get("batch_size", c.batch_size);
    if (campaign.has("policy"))
        c.acquisition.kind = parse_policy(campaign.get<std::string>("policy", ""), campaign.field("policy"));
    c.acquisition.order_key = campaign.get("order_key", c.acquisition.order_key);
    if (campaign.has("order_direction"))
        c.acquisition.direction = parse_enum<OrderDirection>(
            campaign.get<std::string>("order_direction", ""), campaign.field("order_direction"),
            {{"ascending", OrderDirection::ascending}, {"descending", OrderDirection::descending}});
    c.acquisition.fingerprint_column = campaign.get("fingerprint_column", c.acquisition.fingerprint_column);
    c.seed = campaign.get("seed", c.seed);
    if (campaign.has("max_steps")) {
        if (campaign.raw("max_steps").is_null()) {
            c.max_steps.reset();
        } else {
            c.max_steps = campaign.get<std::size_t>("max_steps", 0);
        }
    }
    if (campaign.has("cold_start"))
        c.cold_start = parse_enum<ColdStart>(campaign.get<std::string>("cold_start", ""),
                                             campaign.field("cold_start"),
                                             {{"uniform", ColdStart::uniform_predictions},
                                              {"random_batch", ColdStart::random_batch}});
    c.warm_start = campaign.get("warm_start", c.warm_start);
    if (stopping != nullptr) {
        if (stopping->has("mode"))
            c.stopping.mode = parse_enum<StoppingMode>(stopping->get<std::string>("mode", ""), stopping->field("mode"),
                                                       {{"chernoff", StoppingMode::chernoff},
                                                        {"naive", StoppingMode::naive},
                                                        {"mse_threshold", StoppingMode::mse_threshold}});
        c.stopping.patience = stopping->get("patience", c.stopping.patience);
        c.stopping.t_mse = stopping->get("t_mse", c.stopping.t_mse);
    }
    (void)model;
    return c;
}

}  // namespace

void apply_profile(std::string_view profile, CampaignConfig& campaign) {
    ModelConfig m;  // mnist column of the hyperparameter table
    std::size_t batch = 1000;
    if (profile == "mnist") {
    } else if (profile == "qm9") {
        batch = 250;
        m.n_hidden_layers = 3;
    } else if (profile == "molecules3d") {
        batch = 10000;
        m.max_epochs = 30;
        m.train_batch_size = 32768;
        m.early_stop_patience = 15;
        m.n_ensemble_members = 5;
    } else if (profile == "rxrx3") {
        batch = 10;
        m.max_epochs = 30;
        m.early_stop_patience = 25;
    } else if (profile == "phenomics") {
        m.hidden_size = 1024;
        m.early_stop_patience = 25;
    } else {
        throw ConfigError("/profile", "unknown profile '" + std::string(profile) +
                                          "' (expected one of: mnist, qm9, molecules3d, rxrx3, phenomics)");
    }
    campaign.model = m;
    campaign.batch_size = batch;
}

Json model_config_to_json(const ModelConfig& c) {
    return Json{{"n_hidden_layers", c.n_hidden_layers},
                {"hidden_size", c.hidden_size},
                {"learning_rate", c.learning_rate},
                {"grad_norm_clip", c.grad_norm_clip},
                {"dropout", c.dropout},
                {"max_epochs", c.max_epochs},
                {"train_batch_size", c.train_batch_size},
                {"early_stop_patience", c.early_stop_patience},
                {"n_ensemble_members", c.n_ensemble_members},
                {"optimizer", to_string(c.optimizer)}};
}

ModelConfig model_config_from_json(const Json& j, const std::string& path, ModelConfig c) {
    Section s(j, path);
    c.n_hidden_layers = s.get("n_hidden_layers", c.n_hidden_layers);
    c.hidden_size = s.get("hidden_size", c.hidden_size);
    c.learning_rate = s.get("learning_rate", c.learning_rate);
    c.grad_norm_clip = s.get("grad_norm_clip", c.grad_norm_clip);
    c.dropout = s.get("dropout", c.dropout);
    c.max_epochs = s.get("max_epochs", c.max_epochs);
    c.train_batch_size = s.get("train_batch_size", c.train_batch_size);
    c.early_stop_patience = s.get("early_stop_patience", c.early_stop_patience);
    c.n_ensemble_members = s.get("n_ensemble_members", c.n_ensemble_members);
    if (s.has("optimizer"))
        c.optimizer = parse_enum<Optimizer>(s.get<std::string>("optimizer", ""), s.field("optimizer"),
                                            {{"sgd", Optimizer::sgd}, {"adam", Optimizer::adam}});
    s.finish();
    return c;
}

Json campaign_config_to_json(const CampaignConfig& c) {
    Json campaign{{"gamma", c.gamma},
                  {"delta", c.delta},
                  {"batch_size", c.batch_size},
                  {"policy", to_string(c.acquisition.kind)},
                  {"order_key", c.acquisition.order_key},
                  {"order_direction", to_string(c.acquisition.direction)},
                  {"fingerprint_column", c.acquisition.fingerprint_column},
                  {"seed", c.seed},
                  {"max_steps", c.max_steps ? Json(*c.max_steps) : Json(nullptr)},
                  {"cold_start", to_string(c.cold_start)},
                  {"warm_start", c.warm_start}};
    Json stopping{{"mode", to_string(c.stopping.mode)},
                  {"patience", c.stopping.patience},
                  {"t_mse", c.stopping.t_mse}};
    return Json{{"campaign", campaign}, {"stopping", stopping}, {"model", model_config_to_json(c.model)}};
}

RunConfig parse_run_config(const Json& j) {
    Section root(j, "");
    RunConfig rc;
    rc.profile = root.get<std::string>("profile", "");
    if (!rc.profile.empty()) apply_profile(rc.profile, rc.campaign);

    if (root.has("data")) {
        Section d(root.raw("data"), "/data");
        auto& dc = rc.data;
        if (d.has("format"))
            dc.format = parse_enum<DataFormat>(d.get<std::string>("format", ""), d.field("format"),
                                               {{"idx", DataFormat::idx},
                                                {"csv", DataFormat::csv},
                                                {"synthetic_regression", DataFormat::synthetic_regression}});
        dc.images = d.get("images", dc.images);
        dc.labels = d.get("labels", dc.labels);
        if (d.has("csv")) {
            Section c(d.raw("csv"), "/data/csv");
            dc.csv_path = c.get("path", dc.csv_path);
            dc.csv.label_column = c.get("label_column", dc.csv.label_column);
            dc.csv.feature_columns = c.get_list<std::string>("feature_columns", dc.csv.feature_columns);
            dc.csv.aux_columns = c.get_list<std::string>("aux_columns", dc.csv.aux_columns);
            dc.csv.fingerprint_columns = c.get_list<std::string>("fingerprint_columns", dc.csv.fingerprint_columns);
            if (c.has("task"))
                dc.csv.task = parse_enum<TaskKind>(c.get<std::string>("task", ""), c.field("task"),
                                                   {{"classification", TaskKind::classification},
                                                    {"regression", TaskKind::regression}});
            dc.discretize_median = c.get("discretize_median", dc.discretize_median);
            c.finish();
        }
        if (d.has("synthetic")) {
            Section s(d.raw("synthetic"), "/data/synthetic");
            dc.synthetic_n = s.get("n", dc.synthetic_n);
            dc.synthetic_seed = s.get("seed", dc.synthetic_seed);
            s.finish();
        }
        dc.subsample = d.get("subsample", dc.subsample);
        dc.image_height = d.get("image_height", dc.image_height);
        dc.image_width = d.get("image_width", dc.image_width);
        if (d.has("corruption")) {
            Section c(d.raw("corruption"), "/data/corruption");
            dc.crop_keep_fraction = c.get("crop_keep_fraction", dc.crop_keep_fraction);
            dc.shuffle_classes = c.get_list<int>("shuffle_classes", dc.shuffle_classes);
            dc.shuffle_seed = c.get("shuffle_seed", dc.shuffle_seed);
            c.finish();
        }
        if (d.has("split")) {
            Section s(d.raw("split"), "/data/split");
            dc.target_fraction = s.get("target", dc.target_fraction);
            dc.val_fraction = s.get("val", dc.val_fraction);
            dc.test_fraction = s.get("test", dc.test_fraction);
            dc.split_seed = s.get("seed", dc.split_seed);
            s.finish();
        }
        d.finish();
        if (dc.format == DataFormat::idx && (dc.images.empty() || dc.labels.empty()))
            throw ConfigError("/data/images", "idx data needs both 'images' and 'labels'");
        if (dc.format == DataFormat::csv && (dc.csv_path.empty() || dc.csv.label_column.empty()))
            throw ConfigError("/data/csv", "csv data needs 'path' and 'label_column'");
        if (!(dc.crop_keep_fraction > 0.0 && dc.crop_keep_fraction <= 1.0))
            throw ConfigError("/data/corruption/crop_keep_fraction", "must lie in (0,1]");
        if (std::abs(dc.target_fraction + dc.val_fraction + dc.test_fraction - 1.0) > 1e-9)
            throw ConfigError("/data/split", "fractions must sum to 1");
    } else {
        throw ConfigError("/data", "missing required section");
    }

    if (root.has("model")) rc.campaign.model = model_config_from_json(root.raw("model"), "/model", rc.campaign.model);
    std::optional<Section> stopping;
    if (root.has("stopping")) stopping.emplace(root.raw("stopping"), "/stopping");
    if (root.has("campaign")) {
        Section c(root.raw("campaign"), "/campaign");
        rc.campaign = campaign_config_from_sections(c, stopping ? &*stopping : nullptr, nullptr, rc.campaign);
        c.finish();
    } else if (stopping) {
        Section empty(Json::object(), "/campaign");
        rc.campaign = campaign_config_from_sections(empty, &*stopping, nullptr, rc.campaign);
    }
    if (stopping) stopping->finish();
    if (root.has("output")) {
        Section o(root.raw("output"), "/output");
        rc.output.save_log = o.get("save_log", rc.output.save_log);
        o.finish();
    }
    root.finish();
    rc.campaign.validate();
    return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file " + path.string());
    Json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("", "invalid JSON in " + path.string() + ": " + e.what());
    }
    return parse_run_config(j);
}

Json run_config_to_json(const RunConfig& rc) {
    const auto& d = rc.data;
    Json data{{"format", data_format_name(d.format)},
              {"images", d.images},
              {"labels", d.labels},
              {"csv",
               {{"path", d.csv_path},
                {"label_column", d.csv.label_column},
                {"feature_columns", d.csv.feature_columns},
                {"aux_columns", d.csv.aux_columns},
                {"fingerprint_columns", d.csv.fingerprint_columns},
                {"task", task_name(d.csv.task)},
                {"discretize_median", d.discretize_median}}},
              {"synthetic", {{"n", d.synthetic_n}, {"seed", d.synthetic_seed}}},
              {"subsample", d.subsample},
              {"image_height", d.image_height},
              {"image_width", d.image_width},
              {"corruption",
               {{"crop_keep_fraction", d.crop_keep_fraction},
                {"shuffle_classes", d.shuffle_classes},
                {"shuffle_seed", d.shuffle_seed}}},
              {"split",
               {{"target", d.target_fraction}, {"val", d.val_fraction}, {"test", d.test_fraction}, {"seed", d.split_seed}}}};
    Json j = campaign_config_to_json(rc.campaign);
    j["data"] = data;
    j["output"] = Json{{"save_log", rc.output.save_log}};
    if (!rc.profile.empty()) j["profile"] = rc.profile;
    return j;
}

Json campaign_log_to_json(const CampaignLog& log) {
    Json records = Json::array();
    for (const auto& r : log.records) {
        records.push_back(Json{{"step", r.step},
                               {"n_obs", r.n_obs},
                               {"n_inf", r.n_inf},
                               {"batch_size", r.batch_size},
                               {"batch_acc", r.batch_accuracy},
                               {"alpha", optional_number(r.alpha)},
                               {"est_sys_acc", optional_number(r.est_system_accuracy)},
                               {"true_sys_acc", optional_number(r.true_system_accuracy)},
                               {"inf_acc", optional_number(r.inference_accuracy)},
                               {"test_acc", optional_number(r.test_accuracy)},
                               {"stopped", r.stopped}});
    }
    Json steps = Json::array();
    for (const auto& d : log.details) {
        Json labels = Json::array();
        for (const auto& l : d.acquired_labels) labels.push_back(label_to_json(l));
        const auto& p = d.predictions;
        Json preds{{"ids", p.ids}};
        if (log.task == TaskKind::classification) {
            preds["top_class"] = p.top_class;
            preds["confidence"] = p.confidence;
        } else {
            preds["value"] = p.value;
            preds["variance"] = p.variance;
        }
        if (!p.correct.empty()) preds["correct"] = p.correct;
        steps.push_back(Json{{"acquired", d.acquired}, {"acquired_labels", labels}, {"predictions", preds}});
    }
    Json hybrid = Json::array();
    for (const auto& h : log.hybrid)
        hybrid.push_back(Json{{"id", h.id},
                              {"label", label_to_json(h.label)},
                              {"source", h.source == ReadoutSource::observed ? "observed" : "predicted"}});
    return Json{{"format", "screenloop-campaign-log"},
                {"version", kLogVersion},
                {"config", campaign_config_to_json(log.config)},
                {"task", task_name(log.task)},
                {"n_target", log.n_target},
                {"records", records},
                {"steps", steps},
                {"stopping_time", log.stopping_time ? Json(*log.stopping_time) : Json(nullptr)},
                {"stop_reason", to_string(log.stop_reason)},
                {"hybrid", hybrid},
                {"oracle_calls", log.oracle_calls},
                {"complete", log.complete},
                {"error", log.error}};
}

CampaignLog campaign_log_from_json(const Json& j) {
    try {
        if (j.at("format") != "screenloop-campaign-log") throw FormatError("not a screenloop campaign log");
        if (j.at("version").get<int>() != kLogVersion) throw FormatError("unsupported campaign log version");
        CampaignLog log;
        const auto& cfg = j.at("config");
        Section campaign(cfg.at("campaign"), "/config/campaign");
        Section stopping(cfg.at("stopping"), "/config/stopping");
        CampaignConfig base;
        base.model = model_config_from_json(cfg.at("model"), "/config/model");
        log.config = campaign_config_from_sections(campaign, &stopping, nullptr, base);
        log.task = j.at("task") == "classification" ? TaskKind::classification : TaskKind::regression;
        log.n_target = j.at("n_target").get<std::size_t>();
        for (const auto& r : j.at("records")) {
            StepRecord rec;
            rec.step = r.at("step").get<std::size_t>();
            rec.n_obs = r.at("n_obs").get<std::size_t>();
            rec.n_inf = r.at("n_inf").get<std::size_t>();
            rec.batch_size = r.at("batch_size").get<std::size_t>();
            rec.batch_accuracy = r.at("batch_acc").get<double>();
            rec.alpha = read_optional(r, "alpha");
            rec.est_system_accuracy = read_optional(r, "est_sys_acc");
            rec.true_system_accuracy = read_optional(r, "true_sys_acc");
            rec.inference_accuracy = read_optional(r, "inf_acc");
            rec.test_accuracy = read_optional(r, "test_acc");
            rec.stopped = r.at("stopped").get<bool>();
            log.records.push_back(rec);
        }
        for (const auto& s : j.at("steps")) {
            StepDetail d;
            d.acquired = s.at("acquired").get<std::vector<SampleId>>();
            for (const auto& l : s.at("acquired_labels")) d.acquired_labels.push_back(label_from_json(l, log.task));
            const auto& p = s.at("predictions");
            d.predictions.ids = p.at("ids").get<std::vector<SampleId>>();
            if (log.task == TaskKind::classification) {
                d.predictions.top_class = p.at("top_class").get<std::vector<int>>();
                d.predictions.confidence = p.at("confidence").get<std::vector<double>>();
            } else {
                d.predictions.value = p.at("value").get<std::vector<double>>();
                d.predictions.variance = p.at("variance").get<std::vector<double>>();
            }
            if (p.contains("correct")) d.predictions.correct = p.at("correct").get<std::vector<bool>>();
            log.details.push_back(std::move(d));
        }
        if (!j.at("stopping_time").is_null()) log.stopping_time = j.at("stopping_time").get<std::size_t>();
        const auto reason = j.at("stop_reason").get<std::string>();
        for (auto r : {StopReason::not_stopped, StopReason::threshold_met, StopReason::inference_exhausted,
                       StopReason::max_steps})
            if (reason == to_string(r)) log.stop_reason = r;
        for (const auto& h : j.at("hybrid"))
            log.hybrid.push_back(HybridReadout{h.at("id").get<SampleId>(), label_from_json(h.at("label"), log.task),
                                               h.at("source") == "observed" ? ReadoutSource::observed
                                                                            : ReadoutSource::predicted});
        log.oracle_calls = j.at("oracle_calls").get<std::size_t>();
        log.complete = j.at("complete").get<bool>();
        log.error = j.at("error").get<std::string>();
        return log;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed campaign log: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("malformed campaign log config: ") + e.what());
    }
}

CampaignLog load_campaign_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    Json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return campaign_log_from_json(j);
}

std::string format_number(double value) { return fmt::format("{:.17g}", value); }

void write_step_csv(std::ostream& out, const CampaignLog& log) {
    out << "step,n_obs,n_inf,batch_acc,alpha,est_sys_acc,true_sys_acc,inf_acc,test_acc,stopped\n";
    auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
    for (const auto& r : log.records) {
        out << r.step << ',' << r.n_obs << ',' << r.n_inf << ',' << format_number(r.batch_accuracy) << ','
            << opt(r.alpha) << ',' << opt(r.est_system_accuracy) << ',' << opt(r.true_system_accuracy) << ','
            << opt(r.inference_accuracy) << ',' << opt(r.test_accuracy) << ',' << (r.stopped ? 1 : 0) << '\n';
    }
}

void write_hybrid_csv(std::ostream& out, const CampaignLog& log) {
    out << "sample_id,label,source\n";
    for (const auto& h : log.hybrid) {
        out << h.id << ',';
        if (const int* c = std::get_if<int>(&h.label)) {
            out << *c;
        } else {
            out << format_number(std::get<double>(h.label));
        }
        out << ',' << (h.source == ReadoutSource::observed ? "observed" : "predicted") << '\n';
    }
}

}  // namespace screenloop
