#include "screenloop/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "json.hpp"

#include "screenloop/error.hpp"
#include "screenloop/parallel.hpp"
#include "screenloop/serialization.hpp"

namespace screenloop {
namespace {

using MatrixF = Network::Matrix;
using VectorF = Network::Vector;

constexpr int kCheckpointVersion = 1;

// Rows `ids` of a row-major feature matrix as float columns.
MatrixF gather_columns(const FeatureMatrix& features, std::span<const SampleId> ids) {
    MatrixF out(features.cols(), static_cast<Eigen::Index>(ids.size()));
    for (std::size_t j = 0; j < ids.size(); ++j) {
        if (ids[j] >= static_cast<std::size_t>(features.rows())) throw InvalidArgument("row id out of range");
        out.col(static_cast<Eigen::Index>(j)) =
            features.row(static_cast<Eigen::Index>(ids[j])).transpose().cast<float>();
    }
    return out;
}

MatrixF target_row(const Dataset& data, double mean, double scale) {
    MatrixF y(1, static_cast<Eigen::Index>(data.n_samples()));
    for (std::size_t i = 0; i < data.n_samples(); ++i) {
        y(0, static_cast<Eigen::Index>(i)) =
            data.is_classification() ? static_cast<float>(data.classes[i])
                                     : static_cast<float>((data.targets[i] - mean) / scale);
    }
    return y;
}

LossKind loss_kind(TaskKind task) {
    return task == TaskKind::classification ? LossKind::cross_entropy : LossKind::squared_error;
}

double network_loss(const Network& net, LossKind loss, const MatrixF& x, const MatrixF& y) {
    const MatrixF out = net.forward(x);
    double total = 0.0;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        if (loss == LossKind::cross_entropy) {
            const double m = out.col(j).cast<double>().maxCoeff();
            const double s = (out.col(j).cast<double>().array() - m).exp().sum();
            total += -(static_cast<double>(out(static_cast<Eigen::Index>(y(0, j)), j)) - m - std::log(s));
        } else {
            const double d = static_cast<double>(out(0, j)) - static_cast<double>(y(0, j));
            total += d * d;
        }
    }
    return total / static_cast<double>(std::max<Eigen::Index>(1, out.cols()));
}

std::vector<double> softmax(const Eigen::Ref<const Eigen::VectorXf>& logits) {
    const double m = logits.cast<double>().maxCoeff();
    std::vector<double> p(static_cast<std::size_t>(logits.size()));
    double s = 0.0;
    for (Eigen::Index k = 0; k < logits.size(); ++k) {
        p[static_cast<std::size_t>(k)] = std::exp(static_cast<double>(logits(k)) - m);
        s += p[static_cast<std::size_t>(k)];
    }
    for (auto& v : p) v /= s;
    return p;
}

void check_compatible(const Dataset& a, const Dataset& b) {
    if (a.task != b.task) throw InvalidArgument("train and validation tasks differ");
    if (a.n_features() != b.n_features()) throw InvalidArgument("train and validation feature widths differ");
}

}  // namespace

Model::Model(ModelConfig config, TaskKind task, std::size_t input_dim, std::size_t n_classes)
    : config_(config),
      task_(task),
      network_(input_dim, config.hidden_size, config.n_hidden_layers,
               task == TaskKind::classification ? n_classes : 1) {}

void Model::set_target_standardization(double mean, double scale) {
    if (!(scale > 0.0) || !std::isfinite(mean)) throw InvalidArgument("invalid target standardization");
    target_mean_ = mean;
    target_scale_ = scale;
}

void Model::set_training_metadata(std::size_t epochs_run, std::size_t best_epoch, double best_val_loss) {
    epochs_run_ = epochs_run;
    best_epoch_ = best_epoch;
    best_val_loss_ = best_val_loss;
}

Eigen::MatrixXf Model::raw_outputs(const FeatureMatrix& features, std::span<const SampleId> ids) const {
    if (static_cast<std::size_t>(features.cols()) != input_dim())
        throw InvalidArgument("feature width " + std::to_string(features.cols()) + " does not match model input " +
                              std::to_string(input_dim()));
    constexpr std::size_t kChunk = 4096;
    Eigen::MatrixXf out(static_cast<Eigen::Index>(n_outputs()), static_cast<Eigen::Index>(ids.size()));
    for (std::size_t start = 0; start < ids.size(); start += kChunk) {
        const auto len = std::min(kChunk, ids.size() - start);
        out.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len)) =
            network_.forward(gather_columns(features, ids.subspan(start, len)));
    }
    return out;
}

std::vector<SampleId> all_ids(std::size_t n) {
    std::vector<SampleId> ids(n);
    std::iota(ids.begin(), ids.end(), SampleId{0});
    return ids;
}

Model train(const ModelConfig& config, const Dataset& train_set, const Dataset& val_set, std::uint64_t seed,
            const Model* warm_start) {
    config.validate();
    if (train_set.n_samples() == 0) throw InvalidArgument("training set is empty");
    if (val_set.n_samples() == 0) throw InvalidArgument("validation set is empty");
    check_compatible(train_set, val_set);
    const auto task = train_set.task;
    const auto n_classes = std::max(train_set.n_classes, val_set.n_classes);
    if (task == TaskKind::classification && n_classes < 2)
        throw InvalidArgument("classification needs at least 2 classes");

    Model model(config, task, train_set.n_features(), n_classes);
    std::mt19937_64 rng(seed);
    Network& net = model.network();
    if (warm_start != nullptr) {
        if (warm_start->network().parameter_count() != net.parameter_count())
            throw InvalidArgument("warm-start model has a different architecture");
        net.parameters() = warm_start->network().parameters();
    } else {
        net.initialize(rng);
    }

    double mean = 0.0;
    double scale = 1.0;
    if (task == TaskKind::regression) {
        const auto& t = train_set.targets;
        mean = std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(t.size());
        double ss = 0.0;
        for (double v : t) ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / static_cast<double>(t.size()));
        scale = sd > 1e-12 ? sd : 1.0;
        model.set_target_standardization(mean, scale);
    }

    const MatrixF x_train = gather_columns(train_set.features, all_ids(train_set.n_samples()));
    const MatrixF y_train = target_row(train_set, mean, scale);
    const MatrixF x_val = gather_columns(val_set.features, all_ids(val_set.n_samples()));
    const MatrixF y_val = target_row(val_set, mean, scale);
    const LossKind loss = loss_kind(task);

    const auto n = train_set.n_samples();
    const auto batch = std::min(config.train_batch_size, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    VectorF grad(net.parameters().size());
    VectorF adam_m = VectorF::Zero(net.parameters().size());
    VectorF adam_v = VectorF::Zero(net.parameters().size());
    std::size_t adam_t = 0;
    const auto lr = static_cast<float>(config.learning_rate);
    const auto clip = static_cast<float>(config.grad_norm_clip);

    VectorF best_params = net.parameters();
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    std::size_t since_best = 0;
    std::size_t epoch = 0;
    MatrixF xb(x_train.rows(), static_cast<Eigen::Index>(batch));
    MatrixF yb(1, static_cast<Eigen::Index>(batch));

    while (epoch < config.max_epochs) {
        ++epoch;
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < n; start += batch) {
            const auto len = static_cast<Eigen::Index>(std::min(batch, n - start));
            xb.resize(x_train.rows(), len);
            yb.resize(1, len);
            for (Eigen::Index j = 0; j < len; ++j) {
                const auto src = static_cast<Eigen::Index>(order[start + static_cast<std::size_t>(j)]);
                xb.col(j) = x_train.col(src);
                yb(0, j) = y_train(0, src);
            }
            net.loss_and_gradient(xb, yb, loss, grad, static_cast<float>(config.dropout), &rng);
            const float norm = grad.norm();
            if (norm > clip) grad *= clip / norm;
            if (config.optimizer == Optimizer::sgd) {
                net.parameters() -= lr * grad;
            } else {
                constexpr float b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;
                ++adam_t;
                adam_m = b1 * adam_m + (1 - b1) * grad;
                adam_v = b2 * adam_v + (1 - b2) * grad.cwiseAbs2();
                const float c1 = 1 - std::pow(b1, static_cast<float>(adam_t));
                const float c2 = 1 - std::pow(b2, static_cast<float>(adam_t));
                net.parameters().array() -=
                    lr * (adam_m.array() / c1) / ((adam_v.array() / c2).sqrt() + eps);
            }
        }
        const double val_loss = network_loss(net, loss, x_val, y_val);
        if (val_loss < best_loss) {
            best_loss = val_loss;
            best_params = net.parameters();
            best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= config.early_stop_patience) {
            break;
        }
    }
    if (!net.parameters().allFinite() && !best_params.allFinite())
        throw Error("training diverged: parameters are not finite");
    net.parameters() = best_params;
    model.set_training_metadata(epoch, best_epoch, best_loss * (task == TaskKind::regression ? scale * scale : 1.0));
    return model;
}

double evaluate_loss(const Model& model, const Dataset& data) {
    if (data.n_samples() == 0) throw InvalidArgument("cannot evaluate on an empty dataset");
    const MatrixF x = gather_columns(data.features, all_ids(data.n_samples()));
    const MatrixF y = target_row(data, model.target_mean(), model.target_scale());
    const double l = network_loss(model.network(), loss_kind(model.task()), x, y);
    return model.task() == TaskKind::regression ? l * model.target_scale() * model.target_scale() : l;
}

std::vector<Prediction> predict_proba(const Model& model, const FeatureMatrix& features,
                                      std::span<const SampleId> ids) {
    if (model.task() != TaskKind::classification) throw PolicyMismatch("predict_proba on a regression model");
    const Eigen::MatrixXf logits = model.raw_outputs(features, ids);
    std::vector<Prediction> out;
    out.reserve(ids.size());
    for (Eigen::Index j = 0; j < logits.cols(); ++j) out.push_back(Prediction::from_probs(softmax(logits.col(j))));
    return out;
}

std::vector<Prediction> predict_proba(const Model& model, const FeatureMatrix& features) {
    const auto ids = all_ids(static_cast<std::size_t>(features.rows()));
    return predict_proba(model, features, ids);
}

std::vector<Model> train_ensemble(const ModelConfig& config, const Dataset& train_set, const Dataset& val_set,
                                  std::uint64_t base_seed, const std::vector<Model>* warm_start) {
    if (config.n_ensemble_members < 1) throw InvalidArgument("ensemble needs at least one member");
    const auto m = config.n_ensemble_members;
    if (warm_start != nullptr && warm_start->size() != m)
        throw InvalidArgument("warm-start ensemble has the wrong number of members");
    std::vector<Model> members(m);
    parallel_for(m, [&](std::size_t i) {
        members[i] = train(config, train_set, val_set, base_seed + i,
                           warm_start != nullptr ? &(*warm_start)[i] : nullptr);
    });
    return members;
}

std::vector<double> predict_values(const Model& model, const FeatureMatrix& features,
                                   std::span<const SampleId> ids) {
    if (model.task() != TaskKind::regression) throw PolicyMismatch("predict_values on a classification model");
    const Eigen::MatrixXf raw = model.raw_outputs(features, ids);
    std::vector<double> out(ids.size());
    for (std::size_t j = 0; j < ids.size(); ++j)
        out[j] = static_cast<double>(raw(0, static_cast<Eigen::Index>(j))) * model.target_scale() + model.target_mean();
    return out;
}

RegressionOutput predict_regression(std::span<const Model> ensemble, const FeatureMatrix& features,
                                    std::span<const SampleId> ids) {
    RegressionOutput out;
    out.mean.assign(ids.size(), 0.0);
    out.variance.assign(ids.size(), 0.0);
    const auto members = predict_members(ensemble, features, ids);
    for (std::size_t i = 0; i < members.size(); ++i) {
        out.mean[i] = members[i].mean();
        out.variance[i] = members[i].variance();
    }
    return out;
}

RegressionOutput predict_regression(std::span<const Model> ensemble, const FeatureMatrix& features) {
    const auto ids = all_ids(static_cast<std::size_t>(features.rows()));
    return predict_regression(ensemble, features, ids);
}

std::vector<Prediction> predict_members(std::span<const Model> ensemble, const FeatureMatrix& features,
                                        std::span<const SampleId> ids) {
    if (ensemble.empty()) throw InvalidArgument("ensemble has no members");
    std::vector<std::vector<double>> per_member;
    per_member.reserve(ensemble.size());
    for (const auto& model : ensemble) per_member.push_back(predict_values(model, features, ids));
    std::vector<Prediction> out;
    out.reserve(ids.size());
    std::vector<double> values(ensemble.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t m = 0; m < ensemble.size(); ++m) values[m] = per_member[m][i];
        out.push_back(Prediction::from_members(values));
    }
    return out;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
    const auto& net = model.network();
    nlohmann::json j;
    j["format"] = "screenloop-model";
    j["version"] = kCheckpointVersion;
    j["config"] = model_config_to_json(model.config());
    j["task"] = model.task() == TaskKind::classification ? "classification" : "regression";
    j["input_dim"] = net.input_dim();
    j["n_outputs"] = net.n_outputs();
    j["target_mean"] = model.target_mean();
    j["target_scale"] = model.target_scale();
    j["epochs_run"] = model.epochs_run();
    j["best_epoch"] = model.best_epoch();
    j["best_val_loss"] = model.best_val_loss();
    const auto& p = net.parameters();
    j["parameters"] = std::vector<float>(p.data(), p.data() + p.size());
    std::ofstream out(path);
    if (!out) throw FormatError("cannot create " + path.string());
    out << j.dump();
}

Model load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
        if (j.at("format") != "screenloop-model") throw FormatError("not a screenloop model checkpoint");
        if (j.at("version").get<int>() != kCheckpointVersion)
            throw FormatError("unsupported checkpoint version " + j.at("version").dump());
        const auto config = model_config_from_json(j.at("config"), "config");
        const auto task = j.at("task") == "classification" ? TaskKind::classification : TaskKind::regression;
        Model model(config, task, j.at("input_dim").get<std::size_t>(), j.at("n_outputs").get<std::size_t>());
        const auto params = j.at("parameters").get<std::vector<float>>();
        if (params.size() != model.network().parameter_count())
            throw FormatError("checkpoint parameter count does not match architecture");
        model.network().parameters() = Eigen::Map<const VectorF>(params.data(), static_cast<Eigen::Index>(params.size()));
        model.set_target_standardization(j.at("target_mean").get<double>(), j.at("target_scale").get<double>());
        model.set_training_metadata(j.at("epochs_run").get<std::size_t>(), j.at("best_epoch").get<std::size_t>(),
                                    j.at("best_val_loss").get<double>());
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace screenloop
