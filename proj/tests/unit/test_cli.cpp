#include "ed2/common/io.hpp"
#include "ed2/sd2/partition.hpp"

#include "../support/cli_run.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

using cli_run::run;
using cli_run::scratch;

namespace {

// A small dataset shared by the cases below.
std::string dataset() {
    static const std::string path = [] {
        const auto dir = scratch("data");
        run({"gen-data", "--episodes", "5", "--seed", "0", "--out", dir.string()});
        return (dir / "dataset.jsonl").string();
    }();
    return path;
}

}  // namespace

TEST_CASE("help and usage errors") {
    auto r = run({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("gen-data") != std::string::npos);
    r = run({"bench", "--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("--steps-per-stage") != std::string::npos);
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"gen-data", "--episodes", "many"}).code == 2);
    r = run({"gen-data", "--env", "nowhere", "--out", scratch("bad-env").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("blocks-2x3") != std::string::npos);
}

TEST_CASE("config files: section lookup, unknown keys and type errors") {
    const auto dir = scratch("config");
    std::filesystem::create_directories(dir);
    ed2::write_text_file(dir / "good.json", R"({"gen-data": {"episodes": 2, "seed": 4}})");
    ed2::write_text_file(dir / "unknown.json", R"({"episodes": 2, "colour": "red"})");
    ed2::write_text_file(dir / "type.json", R"({"episodes": "two"})");
    CHECK(run({"gen-data", "--config", (dir / "good.json").string(), "--out", (dir / "a").string()}).code == 0);
    const auto manifest = nlohmann::json::parse(ed2::read_text_file(dir / "a" / "manifest.json"));
    CHECK(manifest["config"]["episodes"] == 2);
    CHECK(manifest["config"]["seed"] == 4);
    // Flags override the file.
    CHECK(run({"gen-data", "--config", (dir / "good.json").string(), "--episodes", "3", "--out", (dir / "b").string()}).code == 0);
    CHECK(nlohmann::json::parse(ed2::read_text_file(dir / "b" / "manifest.json"))["config"]["episodes"] == 3);
    CHECK(run({"gen-data", "--config", (dir / "unknown.json").string()}).code == 2);
    CHECK(run({"gen-data", "--config", (dir / "type.json").string()}).code == 2);
    CHECK(run({"gen-data", "--config", (dir / "missing.json").string()}).code == 2);
}

TEST_CASE("cluster: methods and partition files") {
    const auto dir = scratch("cluster");
    REQUIRE(run({"cluster", "--data", dataset(), "--out", (dir / "cl").string()}).code == 0);
    const auto cl = ed2::sd2::load_prior_partition(dir / "cl" / "partition.json", 6);
    CHECK(cl == ed2::sd2::Partition::from_groups({{0, 1, 2}, {3, 4, 5}}, 6));
    CHECK(ed2::read_text_file(dir / "cl" / "merge_log.csv").rfind("step,first,second,rela,merged\n", 0) == 0);

    REQUIRE(run({"cluster", "--data", dataset(), "--method", "cd", "--out", (dir / "cd").string()}).code == 0);
    CHECK(ed2::sd2::load_prior_partition(dir / "cd" / "partition.json", 6).size() == 6);

    ed2::write_text_file(dir / "overlap.json", R"([[1,2],[2,3,4,5,6]])");
    auto r = run({"cluster", "--data", dataset(), "--method", "prior:" + (dir / "overlap.json").string(), "--out",
                  (dir / "p").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("2") != std::string::npos);
    CHECK(run({"cluster", "--data", dataset(), "--method", "kmeans"}).code == 2);
    CHECK(run({"cluster", "--data", (dir / "none.jsonl").string()}).code != 0);
}

TEST_CASE("train: every variant writes a loadable checkpoint") {
    const auto dir = scratch("train");
    REQUIRE(run({"cluster", "--data", dataset(), "--out", (dir / "cl").string()}).code == 0);
    const std::string part = (dir / "cl" / "partition.json").string();
    for (const char* variant : {"decomposed", "monolithic", "kernel_ensemble"}) {
        const auto out = dir / variant;
        const auto r = run({"train", "--data", dataset(), "--partition", part, "--variant", variant, "--steps", "5",
                            "--latent", "8", "--kernel-hidden", "8", "--decoder-hidden", "8", "--out", out.string()});
        REQUIRE(r.code == 0);
        const auto loss = ed2::read_text_file(out / "loss.csv");
        CHECK(std::count(loss.begin(), loss.end(), '\n') == 6);
        CHECK(nlohmann::json::parse(ed2::read_text_file(out / "checkpoint.json")).contains("tensors"));
    }
    CHECK(run({"train", "--data", dataset(), "--variant", "decomposed", "--steps", "5"}).code == 2);
    CHECK(run({"train", "--data", dataset(), "--variant", "monolithic", "--steps", "5", "--lr", "1e200", "--out",
               (dir / "nan").string()})
              .code == 1);
}

TEST_CASE("every command reruns byte-identically under a fixed seed") {
    const auto dir = scratch("rerun");
    CHECK(cli_run::rerun_identical({"gen-data", "--episodes", "3", "--seed", "5"}, dir / "gen"));
    CHECK(cli_run::rerun_identical({"cluster", "--data", dataset(), "--method", "random:3", "--seed", "2"}, dir / "cluster"));
    run({"cluster", "--data", dataset(), "--out", (dir / "part").string()});
    CHECK(cli_run::rerun_identical({"train", "--data", dataset(), "--partition", (dir / "part" / "partition.json").string(),
                                    "--steps", "10", "--latent", "8", "--kernel-hidden", "8", "--decoder-hidden", "8"},
                                   dir / "train"));
    const std::vector<std::string> small{"--latent", "8", "--kernel-hidden", "8", "--decoder-hidden", "8", "--batch", "16"};
    auto bench = std::vector<std::string>{"bench", "--episodes", "4", "--seeds", "0,1", "--stages", "2",
                                          "--steps-per-stage", "5", "--rollout-horizon", "3"};
    bench.insert(bench.end(), small.begin(), small.end());
    CHECK(cli_run::rerun_identical(bench, dir / "bench"));
    auto mbrl = std::vector<std::string>{"mbrl", "--iterations", "2", "--initial-episodes", "2", "--episodes-per-iteration", "1",
                                         "--train-steps", "5", "--population", "10", "--elites", "2", "--horizon", "3",
                                         "--reference-episodes", "1"};
    mbrl.insert(mbrl.end(), small.begin(), small.end());
    CHECK(cli_run::rerun_identical(mbrl, dir / "mbrl"));
    CHECK(cli_run::rerun_identical({"report", "--runs", (dir / "bench").string() + "," + (dir / "mbrl").string()},
                                   dir / "report"));
    const auto report = ed2::read_text_file(dir / "report" / "report.csv");
    CHECK(report.rfind("run,command,label,metric,mean,std,count,rank\n", 0) == 0);
    CHECK(report.find("oracle_mpc") != std::string::npos);
    CHECK(run({"report", "--runs", (dir / "nothing").string()}).code != 0);
}
