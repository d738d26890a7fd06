#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "screenloop/cli.hpp"
#include "screenloop/error.hpp"

using namespace screenloop;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("screenloop_test_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) out.push_back(line);
    return out;
}

std::vector<std::string> cells(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

Json mnist_config() {
    const auto dir = fs::path(SCREENLOOP_DATA_DIR) / "mnist10k";
    auto j = Json::parse(R"({
        "profile": "mnist",
        "data": {"format": "idx", "subsample": 600,
                 "split": {"target": 0.8, "val": 0.1, "test": 0.1, "seed": 1},
                 "corruption": {"shuffle_classes": [6, 8, 9], "shuffle_seed": 2}},
        "model": {"hidden_size": 16, "n_hidden_layers": 1, "max_epochs": 5, "early_stop_patience": 2,
                  "train_batch_size": 64, "optimizer": "adam"},
        "campaign": {"batch_size": 120, "policy": "least_confidence", "seed": 3},
        "output": {"save_log": true}
    })");
    j["data"]["images"] = (dir / "images-idx3-ubyte.gz").string();
    j["data"]["labels"] = (dir / "labels-idx1-ubyte.gz").string();
    return j;
}

fs::path write_config(const fs::path& dir, const Json& j) {
    const auto p = dir / "config.json";
    std::ofstream(p) << j.dump(2);
    return p;
}

int run_tool(const std::string& args) {
    const std::string cmd = std::string(SCREENLOOP_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("numbers print with enough digits to reparse exactly") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 2000; ++i) {
        const double v = i % 2 ? u(rng) : u(rng) * 1e-12;
        CHECK(std::stod(format_number(v)) == v);
    }
    CHECK(format_number(0.1) == "0.10000000000000001");
    CHECK(format_number(1.0) == "1");
}

TEST_CASE("profiles fill the hyperparameter table") {
    CampaignConfig c;
    apply_profile("mnist", c);
    CHECK(c.batch_size == 1000);
    CHECK(c.model.n_hidden_layers == 2);
    CHECK(c.model.hidden_size == 512);
    CHECK(c.model.learning_rate == 0.001);
    CHECK(c.model.grad_norm_clip == 1.0);
    CHECK(c.model.dropout == 0.1);
    CHECK(c.model.max_epochs == 1000);
    CHECK(c.model.train_batch_size == 1024);
    CHECK(c.model.early_stop_patience == 50);
    apply_profile("qm9", c);
    CHECK(c.batch_size == 250);
    CHECK(c.model.n_hidden_layers == 3);
    apply_profile("molecules3d", c);
    CHECK(c.model.n_ensemble_members == 5);
    CHECK(c.model.train_batch_size == 32768);
    apply_profile("rxrx3", c);
    CHECK(c.batch_size == 10);
    apply_profile("phenomics", c);
    CHECK(c.model.hidden_size == 1024);
    CHECK_THROWS_AS(apply_profile("cifar", c), ConfigError);
}

TEST_CASE("config parse, serialize, parse is a fixed point") {
    const auto a = parse_run_config(mnist_config());
    const auto j = run_config_to_json(a);
    const auto b = parse_run_config(j);
    CHECK(a == b);
    CHECK(run_config_to_json(b) == j);
    CHECK(a.campaign.batch_size == 120);
    CHECK(a.campaign.model.hidden_size == 16);
    CHECK(a.campaign.model.dropout == 0.1);  // from the profile

    auto reg = Json::parse(R"({"data": {"format": "synthetic_regression", "synthetic": {"n": 300, "seed": 4}},
        "campaign": {"policy": "qbc_variance", "max_steps": 7, "cold_start": "random_batch"},
        "model": {"n_ensemble_members": 5},
        "stopping": {"mode": "mse_threshold", "t_mse": 0.02, "patience": 10}})");
    const auto r = parse_run_config(reg);
    CHECK(r.campaign.stopping.patience == 10);
    CHECK(*r.campaign.max_steps == 7);
    CHECK(parse_run_config(run_config_to_json(r)) == r);
}

TEST_CASE("config errors name the offending field") {
    auto expect_field = [](Json j, const std::string& field) {
        try {
            parse_run_config(j);
            FAIL("expected ConfigError for " << field);
        } catch (const ConfigError& e) {
            CHECK(e.field() == field);
        }
    };
    auto j = mnist_config();
    j["campaign"]["policy"] = "most_confident";
    expect_field(j, "/campaign/policy");
    j = mnist_config();
    j["model"]["hidden_size"] = -3;
    expect_field(j, "/model/hidden_size");
    j = mnist_config();
    j["model"]["hiden_size"] = 3;
    expect_field(j, "/model/hiden_size");
    j = mnist_config();
    j["campaign"]["gamma"] = "high";
    expect_field(j, "/campaign/gamma");
    j = mnist_config();
    j["campaign"]["delta"] = 1.5;
    expect_field(j, "/campaign/delta");
    j = mnist_config();
    j["data"]["split"]["test"] = 0.5;
    expect_field(j, "/data/split");
    j = mnist_config();
    j.erase("data");
    expect_field(j, "/data");
    j = mnist_config();
    j["extra"] = 1;
    expect_field(j, "/extra");
}

TEST_CASE("seed lists") {
    CHECK(cli::parse_seed_list("1,2,3") == std::vector<std::uint64_t>{1, 2, 3});
    CHECK(cli::parse_seed_list(" 7 ") == std::vector<std::uint64_t>{7});
    CHECK_THROWS_AS(cli::parse_seed_list("1,,2"), ConfigError);
    CHECK_THROWS_AS(cli::parse_seed_list("1,x"), ConfigError);
    CHECK_THROWS_AS(cli::parse_seed_list("-1"), ConfigError);
    CHECK_THROWS_AS(cli::parse_seed_list("2,2"), ConfigError);
}

TEST_CASE("data preparation tracks shuffled target ids") {
    const auto rc = parse_run_config(mnist_config());
    const auto p = cli::prepare_data(rc.data);
    CHECK(p.split.target.n_samples() == 480);
    CHECK(p.split.val.n_samples() == 60);
    CHECK(p.split.test.n_samples() == 60);
    const auto raw = load_idx(rc.data.images, rc.data.labels);
    std::size_t expected = 0;
    for (SampleId i = 0; i < p.split.target.n_samples(); ++i) {
        const int original = raw.classes[p.split.target.source_rows[i]];
        const bool shuffled = original == 6 || original == 8 || original == 9;
        expected += shuffled ? 1 : 0;
        if (!shuffled) CHECK(p.split.target.classes[i] == original);
    }
    CHECK(p.shuffled_target_ids.size() == expected);
    CHECK(expected > 0);
}

TEST_CASE("run writes the three artifacts and replays byte-identically") {
    const auto dir = scratch("run");
    const auto cfg = write_config(dir, mnist_config());
    std::ostringstream out, err;
    REQUIRE(cli::cmd_run({cfg, dir / "a", {}}, out, err) == 0);
    REQUIRE(cli::cmd_run({cfg, dir / "b", {}}, out, err) == 0);
    for (const char* f : {"steps.csv", "summary.json", "hybrid.csv", "campaign_log.json", "shuffled_ids.txt"}) {
        CHECK(fs::exists(dir / "a" / f));
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    }
    const auto summary = Json::parse(slurp(dir / "a" / "summary.json"));
    const auto step_lines = lines(slurp(dir / "a" / "steps.csv"));
    CHECK(step_lines.size() == summary["n_steps"].get<std::size_t>() + 1);
    CHECK(step_lines[0] == "step,n_obs,n_inf,batch_acc,alpha,est_sys_acc,true_sys_acc,inf_acc,test_acc,stopped");
    CHECK(summary["config"]["campaign"]["policy"] == "least_confidence");

    // numeric cells reparse to the logged values
    const auto log = load_campaign_log(dir / "a" / "campaign_log.json");
    for (std::size_t s = 0; s < log.records.size(); ++s) {
        const auto c = cells(step_lines[s + 1]);
        REQUIRE(c.size() == 10);
        const auto& r = log.records[s];
        CHECK(std::stod(c[3]) == r.batch_accuracy);
        CHECK(std::stod(c[4]) == *r.alpha);
        CHECK(std::stod(c[5]) == *r.est_system_accuracy);
        CHECK(std::stod(c[6]) == *r.true_system_accuracy);
        CHECK(std::stod(c[8]) == *r.test_accuracy);
    }
    const auto hybrid = lines(slurp(dir / "a" / "hybrid.csv"));
    CHECK(hybrid[0] == "sample_id,label,source");
    CHECK(hybrid.size() == log.n_target + 1);
    CHECK(campaign_log_to_json(log) == Json::parse(slurp(dir / "a" / "campaign_log.json")));
}

TEST_CASE("run with several seeds writes one directory per seed") {
    const auto dir = scratch("seeds");
    auto j = mnist_config();
    j["campaign"]["max_steps"] = 1;
    const auto cfg = write_config(dir, j);
    std::ostringstream out, err;
    CHECK(cli::cmd_run({cfg, dir / "o", {4, 9}}, out, err) == 0);
    CHECK(fs::exists(dir / "o" / "seed_4" / "steps.csv"));
    CHECK(fs::exists(dir / "o" / "seed_9" / "summary.json"));
    CHECK(Json::parse(slurp(dir / "o" / "seed_9" / "summary.json"))["seed"] == 9);
}

TEST_CASE("exit codes of the command-line tool") {
    const auto dir = scratch("exit");
    auto j = mnist_config();
    j["campaign"]["max_steps"] = 1;
    const auto good = write_config(dir, j);
    CHECK(run_tool("run --config " + good.string() + " --out " + (dir / "ok").string() + " --seeds 1") == 0);
    CHECK(fs::exists(dir / "ok" / "hybrid.csv"));

    j["campaign"]["policy"] = "unknown_policy";
    fs::create_directories(dir / "bad");
    const auto bad = write_config(dir / "bad", j);
    CHECK(run_tool("run --config " + bad.string() + " --out " + (dir / "x").string()) == 2);
    CHECK(run_tool("run --config " + good.string()) == 2);  // missing --out
    CHECK(run_tool("frobnicate") == 2);

    std::ofstream(dir / "lemma_neg.json") << R"({"g": "decreasing", "trials": 200})";
    CHECK(run_tool("validate lemma1 --params " + (dir / "lemma_neg.json").string()) == 3);
    std::ofstream(dir / "lemma_pos.json") << R"({"trials": 200})";
    CHECK(run_tool("validate lemma1 --params " + (dir / "lemma_pos.json").string()) == 0);
    std::ofstream(dir / "bound.json") << R"({"mu": [0.9], "n": [100], "trials": 2000})";
    CHECK(run_tool("validate bound --params " + (dir / "bound.json").string()) == 0);
    std::ofstream(dir / "bound_bad.json") << R"({"mu": [1.9]})";
    CHECK(run_tool("validate bound --params " + (dir / "bound_bad.json").string()) == 2);
}

TEST_CASE("validation commands print their tables") {
    const auto dir = scratch("validate");
    std::ofstream(dir / "bound.json") << R"({"mu": [0.8, 0.99], "n": [100], "trials": 3000, "seed": 2})";
    std::ostringstream out, err;
    CHECK(cli::cmd_validate("bound", dir / "bound.json", out, err) == 0);
    const auto rows = lines(out.str());
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == "mu,n,delta,trials,failure_rate,limit,ok");

    std::ostringstream lo, le;
    std::ofstream(dir / "neg.json") << R"({"g": "decreasing", "trials": 100})";
    CHECK(cli::cmd_validate("lemma1", dir / "neg.json", lo, le) == 3);
    CHECK(le.str().find("violated") != std::string::npos);
}

TEST_CASE("calibration validation reads a saved log") {
    const auto dir = scratch("calibration");
    auto j = mnist_config();
    j["campaign"]["gamma"] = 1.0;
    const auto cfg = write_config(dir, j);
    std::ostringstream out, err;
    REQUIRE(cli::cmd_run({cfg, dir / "run", {}}, out, err) == 0);

    std::ofstream(dir / "params.json") << R"({"log": "run/campaign_log.json", "min_count": 5, "max_violation": 1.0})";
    std::ostringstream co, ce;
    CHECK(cli::cmd_validate("calibration", dir / "params.json", co, ce) == 0);
    CHECK(co.str().rfind("step,bin_low,bin_high,count,mean_confidence,accuracy", 0) == 0);

    // strip predictions and correctness flags from the log
    auto log = Json::parse(slurp(dir / "run" / "campaign_log.json"));
    for (auto& s : log["steps"]) {
        s["predictions"] = Json{{"ids", Json::array()}, {"top_class", Json::array()}, {"confidence", Json::array()}};
    }
    std::ofstream(dir / "empty_log.json") << log.dump();
    std::ofstream(dir / "empty.json") << R"({"log": "empty_log.json"})";
    std::ostringstream eo, ee;
    CHECK(cli::cmd_validate("calibration", dir / "empty.json", eo, ee) == 2);
}

TEST_CASE("report resamples logs onto the acquired-fraction axis") {
    const auto dir = scratch("report");
    auto j = mnist_config();
    j["campaign"]["gamma"] = 1.0;
    const auto cfg = write_config(dir, j);
    std::ostringstream out, err;
    REQUIRE(cli::cmd_run({cfg, dir / "lc", {1, 2}}, out, err) == 0);
    j["campaign"]["policy"] = "random";
    const auto cfg_r = write_config(dir, j);
    REQUIRE(cli::cmd_run({cfg_r, dir / "rnd", {1}}, out, err) == 0);

    const std::vector<fs::path> logs{dir / "lc/seed_1/campaign_log.json", dir / "lc/seed_2/campaign_log.json",
                                     dir / "rnd/campaign_log.json"};
    CHECK(cli::cmd_report(logs, "inference_accuracy", dir / "inf.csv", std::nullopt, out, err) == 0);
    const auto rows = lines(slurp(dir / "inf.csv"));
    CHECK(rows[0] ==
          "fraction,least_confidence_seed1,least_confidence_seed2,random_seed1,least_confidence_mean,"
          "least_confidence_sem,random_mean,random_sem");
    CHECK(rows.size() == 4 + 1);  // 480 samples in batches of 120

    const auto lc1 = load_campaign_log(logs[0]);
    const auto first = cells(rows[1]);
    CHECK(std::stod(first[0]) == 0.25);
    CHECK(std::stod(first[1]) == *lc1.records[0].inference_accuracy);

    CHECK(cli::cmd_report(logs, "hard_set_fraction", dir / "hard.csv", dir / "lc/seed_1/shuffled_ids.txt", out,
                          err) == 0);
    const auto hard_rows = lines(slurp(dir / "hard.csv"));
    CHECK(cells(hard_rows.back())[1] == "1");  // everything acquired by the end
    CHECK(cli::cmd_report(logs, "hard_set_fraction", dir / "h2.csv", std::nullopt, out, err) == 2);
    CHECK(cli::cmd_report(logs, "no_such_metric", dir / "x.csv", std::nullopt, out, err) == 2);
    CHECK(run_tool("report --metric no_such_metric --logs " + logs[0].string() + " --out " +
                   (dir / "y.csv").string()) == 2);
}
