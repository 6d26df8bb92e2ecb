#include "densesvm/backbone.hpp"
#include "densesvm/cli.hpp"
#include "densesvm/eval.hpp"
#include "densesvm/imaging.hpp"
#include "densesvm/svm.hpp"

#include "support/fixtures.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace densesvm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = densesvm::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Workspace with a tiny bundle and 12 bright / 12 dark synthetic scans.
struct Workspace {
    fs::path dir;
    Workspace() : dir(fs::temp_directory_path() / ("densesvm_cli_" + std::to_string(::getpid()))) {
        fs::remove_all(dir);
        fs::create_directories(dir / "pos");
        fs::create_directories(dir / "neg");
        backbone::save_weight_bundle(backbone::build_densenet(backbone::tiny_densenet_config(), {.seed = 3}),
                                     dir / "bundle");
        std::ofstream list(dir / "list.csv");
        list << "path,label\n";
        for (int i = 0; i < 12; ++i) {
            const auto name = "scan" + std::to_string(100 + i) + ".png";
            write(dir / "pos" / name, imaging::encode_png(testing::synthetic_scan(10 + i, 150.0, 64, 64)));
            write(dir / "neg" / name, imaging::encode_png(testing::synthetic_scan(50 + i, 90.0, 64, 64)));
            list << "pos/" << name << ",1\n" << "neg/" << name << ",-1\n";
        }
    }
    ~Workspace() { fs::remove_all(dir); }
    static void write(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
        std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                                 static_cast<std::streamsize>(bytes.size()));
    }
    std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("usage errors") {
    const Outcome bad = invoke({"eval", "--features", "f", "--labels", "l", "--bogus"});
    CHECK(bad.code == cli::kExitUsage);
    CHECK(bad.err.find("Usage") != std::string::npos);
    CHECK(invoke({}).code == cli::kExitUsage);
    CHECK(invoke({"frobnicate"}).code == cli::kExitUsage);
    CHECK(invoke({"train", "--features", "f"}).code == cli::kExitUsage);
    CHECK(invoke({"eval", "--features", "f", "--labels", "l", "--format", "xml"}).code == cli::kExitUsage);
    const Outcome help = invoke({"--help"});
    CHECK(help.code == cli::kExitOk);
    CHECK(help.out.find("predict") != std::string::npos);
    CHECK(invoke({"train", "--help"}).out.find("--max-iter") != std::string::npos);
}

TEST_CASE("data errors") {
    CHECK(invoke({"eval", "--features", "/nonexistent/f.bin", "--labels", "/nonexistent/l.csv"}).code == cli::kExitData);
    CHECK(invoke({"predict", "--bundle", "/nonexistent", "--model", "m", "--image", "i"}).code == cli::kExitData);
    const Outcome serve = invoke({"serve", "--bundle", "/nonexistent", "--model", "/nonexistent/m"});
    CHECK(serve.code == cli::kExitData);
    CHECK(serve.err.find("startup_error") != std::string::npos);
}

TEST_CASE("extract, train, eval, tune and predict") {
    const Workspace ws;
    const Outcome ex = invoke({"extract", "--bundle", ws / "bundle", "--pos-dir", ws / "pos", "--neg-dir", ws / "neg",
                            "--out", ws / "f.bin", "--labels-out", ws / "l.csv", "--threads", "2"});
    REQUIRE(ex.code == 0);
    const Matrix features = eval::read_features(ws / "f.bin");
    const std::vector<int> labels = eval::read_labels(ws / "l.csv");
    CHECK(features.rows == 24);
    CHECK(features.cols == 16);
    CHECK(std::count(labels.begin(), labels.end(), 1) == 12);

    SUBCASE("list input gives the same features per image") {
        REQUIRE(invoke({"extract", "--bundle", ws / "bundle", "--list", ws / "list.csv", "--out", ws / "g.bin"}).code == 0);
        const Matrix g = eval::read_features(ws / "g.bin");
        const auto gl = eval::read_labels(ws / "g.bin.labels.csv");
        CHECK(gl[0] == 1);
        CHECK(gl[1] == -1);
        for (std::size_t j = 0; j < 16; ++j) {
            CHECK(g(0, j) == features(0, j));   // pos/scan100
            CHECK(g(1, j) == features(12, j));  // neg/scan100
        }
    }

    SUBCASE("extract then eval equals the in-memory pipeline") {
        const auto graph = backbone::load_weight_bundle(ws.dir / "bundle");
        Matrix mem(24, 16);
        for (int i = 0; i < 24; ++i) {
            const bool pos = i < 12;
            const auto f = backbone::forward(
                graph, imaging::preprocess(testing::synthetic_scan(static_cast<std::uint64_t>(pos ? 10 + i : 50 + i - 12),
                                                                   pos ? 150.0 : 90.0, 64, 64)));
            std::copy(f.values.begin(), f.values.end(), mem.row(static_cast<std::size_t>(i)).begin());
        }
        CHECK(mem.data == features.data);
        const svm::NuSvmConfig cfg{.nu = 0.4, .gamma = 1.0, .max_iter = 176};
        const auto report = eval::cross_validate(mem, labels, cfg, {.k = 10, .seed = 42});

        const std::vector<std::string> args{"eval", "--features", ws / "f.bin", "--labels", ws / "l.csv", "--folds",
                                            "10",   "--seed",     "42",         "--gamma",  "1.0",        "--out"};
        auto a1 = args, a2 = args;
        a1.push_back(ws / "r1.json");
        a2.push_back(ws / "r2.json");
        REQUIRE(invoke(a1).code == 0);
        REQUIRE(invoke(a2).code == 0);
        CHECK(slurp(ws / "r1.json") == slurp(ws / "r2.json"));
        CHECK(slurp(ws / "r1.json") == eval::report_json(report));
        CHECK(nlohmann::json::parse(slurp(ws / "r1.json"))["folds"].size() == 10);

        auto table = args;
        table.back() = "--format";
        table.push_back("table");
        const Outcome t = invoke(table);
        REQUIRE(t.code == 0);
        CHECK(t.out.find("(±") != std::string::npos);
    }

    SUBCASE("train writes the requested hyperparameters") {
        const Outcome tr = invoke({"train", "--features", ws / "f.bin", "--labels", ws / "l.csv", "--nu", "0.4", "--gamma",
                                "0.0098", "--max-iter", "176", "--out", ws / "m.dsvm"});
        REQUIRE(tr.code == 0);
        const svm::NuSvmModel m = svm::load_model(ws / "m.dsvm");
        CHECK(m.nu == 0.4);
        CHECK(m.gamma == 0.0098);
        CHECK(m.max_iter == 176);
        CHECK(nlohmann::json::parse(tr.out)["support_vectors"].get<int>() > 0);

        // The defaults are the same configuration.
        REQUIRE(invoke({"train", "--features", ws / "f.bin", "--labels", ws / "l.csv", "--out", ws / "d.dsvm"}).code == 0);
        CHECK(slurp(ws / "d.dsvm") == slurp(ws / "m.dsvm"));
    }

    SUBCASE("train then predict recovers training labels") {
        REQUIRE(invoke({"train", "--features", ws / "f.bin", "--labels", ws / "l.csv", "--gamma", "1.0", "--out",
                     ws / "m.dsvm"})
                    .code == 0);
        for (const auto& [img, label] : {std::pair{"pos/scan103.png", "COVID"}, std::pair{"neg/scan107.png", "NonCOVID"}}) {
            const Outcome p = invoke({"predict", "--bundle", ws / "bundle", "--model", ws / "m.dsvm", "--image", ws / img});
            REQUIRE(p.code == 0);
            const auto j = nlohmann::json::parse(p.out);
            CHECK(j["label"] == label);
            CHECK(j["elapsed_ms"].get<double>() > 0.0);
        }
        const Outcome bad = invoke({"predict", "--bundle", ws / "bundle", "--model", ws / "m.dsvm", "--image", ws / "l.csv"});
        CHECK(bad.code == cli::kExitData);
        CHECK(bad.err.find("decode_error") != std::string::npos);
    }

    SUBCASE("tune writes a trace and a configuration") {
        const Outcome t = invoke({"tune", "--features", ws / "f.bin", "--labels", ws / "l.csv", "--folds", "4", "--budget",
                               "8", "--seed", "7", "--trace", ws / "trace.jsonl", "--out", ws / "best.json"});
        REQUIRE(t.code == 0);
        std::ifstream trace(ws.dir / "trace.jsonl");
        std::string line;
        int n = 0;
        while (std::getline(trace, line)) {
            const auto j = nlohmann::json::parse(line);
            CHECK(j["step"] == n);
            ++n;
        }
        CHECK(n == 8);
        const auto best = nlohmann::json::parse(slurp(ws.dir / "best.json"));
        CHECK(best["gamma"].get<double>() > 0.0);
        CHECK(best["cv_accuracy"].get<double>() > 0.5);
        // Same seed, same result.
        REQUIRE(invoke({"tune", "--features", ws / "f.bin", "--labels", ws / "l.csv", "--folds", "4", "--budget", "8",
                     "--seed", "7", "--out", ws / "best2.json"})
                    .code == 0);
        CHECK(slurp(ws.dir / "best.json") == slurp(ws.dir / "best2.json"));

        const Outcome e = invoke({"eval", "--features", ws / "f.bin", "--labels", ws / "l.csv", "--folds", "4", "--tune",
                               "--budget", "6"});
        REQUIRE(e.code == 0);
        CHECK(nlohmann::json::parse(e.out)["folds"].size() == 4);
    }

    SUBCASE("mismatched label count") {
        std::ofstream(ws.dir / "short.csv") << "1\n-1\n";
        CHECK(invoke({"train", "--features", ws / "f.bin", "--labels", ws / "short.csv", "--out", ws / "x"}).code ==
              cli::kExitData);
    }
}
