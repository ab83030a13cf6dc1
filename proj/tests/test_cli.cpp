#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "leadnet/config_io.hpp"
#include "leadnet/datagen.hpp"
#include "leadnet/train.hpp"

namespace fs = std::filesystem;

namespace {

std::string binary() {
    const char* env = std::getenv("LEADNET_BIN");
    REQUIRE_MESSAGE(env != nullptr, "LEADNET_BIN must point at the CLI binary");
    return env;
}

int run(const std::string& args) {
    const std::string cmd = binary() + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

struct Workspace {
    fs::path root;
    Workspace() : root(fs::temp_directory_path() / "leadnet_cli_test") {
        fs::remove_all(root);
        fs::create_directories(root);
    }
    ~Workspace() { fs::remove_all(root); }
    std::string p(const char* rel) const { return (root / rel).string(); }
};

}  // namespace

TEST_CASE("cli end to end: synth-data, train, eval, infer, attn-dump") {
    Workspace ws;

    // dataset
    CHECK(run("synth-data --out " + ws.p("ds") + " --songs 8 --seed 3 --duration 10 --max-tracks 3") == 0);
    REQUIRE(fs::exists(ws.p("ds/manifest.json")));
    const auto manifest = leadnet::load_manifest(ws.p("ds/manifest.json"));
    CHECK(manifest.songs.size() == 8);

    // same seed regenerates the identical manifest
    CHECK(run("synth-data --out " + ws.p("ds_again") + " --songs 8 --seed 3 --duration 10 --max-tracks 3") == 0);
    {
        std::ifstream a(ws.p("ds/manifest.json"));
        std::ifstream b(ws.p("ds_again/manifest.json"));
        const std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
        const std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
        CHECK(sa == sb);
    }

    // config: tiny but trainable
    {
        std::ofstream cfg(ws.p("cfg.json"));
        cfg << R"({"model": {"feature_dim": 16, "heads": 2, "dropout_p": 0.1},
                   "train": {"epochs": 2, "batch_size": 4, "grad_accum": 1,
                             "lr_encoder": 2e-3, "lr_attention": 2e-3, "lr_classifier": 2e-3,
                             "validate_every": 1.0, "seed": 1}})";
    }
    CHECK(run("train --data " + ws.p("ds/manifest.json") + " --config " + ws.p("cfg.json") +
              " --out " + ws.p("run")) == 0);
    REQUIRE(fs::exists(ws.p("run/best.ckpt")));
    REQUIRE(fs::exists(ws.p("run/log.jsonl")));

    // the echoed config parses back with identical content
    {
        std::ifstream echof(ws.p("run/config.json"));
        nlohmann::json echoed;
        echof >> echoed;
        leadnet::ModelConfig model = echoed.at("model").get<leadnet::ModelConfig>();
        leadnet::TrainConfig train_cfg = echoed.at("train").get<leadnet::TrainConfig>();
        CHECK(model.feature_dim == 16);
        CHECK(model.heads == 2);
        CHECK(train_cfg.epochs == 2);
        nlohmann::json round_trip{{"model", model},
                                  {"train", train_cfg},
                                  {"mel", echoed.at("mel").get<leadnet::MelConfig>()}};
        CHECK(round_trip == echoed);
    }

    // eval with report
    CHECK(run("eval --ckpt " + ws.p("run/best.ckpt") + " --data " + ws.p("ds/manifest.json") +
              " --split test --report " + ws.p("report.json")) == 0);
    REQUIRE(fs::exists(ws.p("report.json")));
    {
        std::ifstream rf(ws.p("report.json"));
        nlohmann::json rep;
        rf >> rep;
        CHECK(rep.contains("macro_f1"));
        CHECK(rep.contains("per_instrument_frame_accuracy"));
        CHECK(rep.at("n_clips").get<int>() > 0);
    }

    // infer on the first test song using the pseudo-mix path (no --mix)
    const leadnet::ManifestSong* test_song = manifest.split_songs("test").front();
    std::string tracks_arg;
    {
        std::ofstream meta(ws.p("meta.csv"));
        meta << "track_id,instrument\n";
        for (const auto& t : test_song->tracks) {
            tracks_arg += " " + (fs::path(ws.p("ds")) / t.path).string();
            meta << t.track_id << "," << t.instrument << "\n";
        }
    }
    CHECK(run("infer --ckpt " + ws.p("run/best.ckpt") + " --tracks" + tracks_arg + " --meta " +
              ws.p("meta.csv") + " --out-frames " + ws.p("frames.csv") + " --out-segments " +
              ws.p("segments.csv")) == 0);
    REQUIRE(fs::exists(ws.p("frames.csv")));
    REQUIRE(fs::exists(ws.p("segments.csv")));
    {
        std::ifstream seg(ws.p("segments.csv"));
        std::string header;
        std::getline(seg, header);
        CHECK(header == "onset_sec,offset_sec,track_id,instrument");
    }

    // attention dump: rows = heads * frames * tracks, weights sum to 1
    CHECK(run("attn-dump --ckpt " + ws.p("run/best.ckpt") + " --tracks" + tracks_arg + " --meta " +
              ws.p("meta.csv") + " --mix " + (fs::path(ws.p("ds")) / test_song->mix_path).string() +
              " --clip-start 2.5 --out " + ws.p("attn.csv") + " --summary " + ws.p("attn_sum.csv")) == 0);
    {
        std::ifstream attn(ws.p("attn.csv"));
        std::string line;
        std::getline(attn, line);
        CHECK(line == "head,frame,track_id,weight");
        long long rows = 0;
        std::map<std::pair<int, int>, double> sums;
        while (std::getline(attn, line)) {
            ++rows;
            const auto c1 = line.find(',');
            const auto c2 = line.find(',', c1 + 1);
            const auto c3 = line.find(',', c2 + 1);
            const int head = std::stoi(line.substr(0, c1));
            const int frame = std::stoi(line.substr(c1 + 1, c2 - c1 - 1));
            sums[{head, frame}] += std::stod(line.substr(c3 + 1));
        }
        CHECK(rows == 2LL * 250 * static_cast<long long>(test_song->tracks.size()));
        for (const auto& [key, sum] : sums) {
            CHECK(std::abs(sum - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("cli exit codes") {
    Workspace ws;
    // usage errors
    CHECK(run("") == 1);
    CHECK(run("train") == 1);                      // missing required options
    CHECK(run("no-such-command") == 1);
    // data errors
    CHECK(run("eval --ckpt /nonexistent.ckpt --data /nonexistent.json") == 2);
    CHECK(run("synth-data --out " + ws.p("x") + " --songs 2 --duration 3.17") == 1);  // bad grid
    // config errors
    {
        std::ofstream cfg(ws.p("bad.json"));
        cfg << R"({"model": {"no_such_key": 1}})";
    }
    CHECK(run("synth-data --out " + ws.p("ds") + " --songs 4 --seed 1 --duration 10 --max-tracks 3") == 0);
    CHECK(run("train --data " + ws.p("ds/manifest.json") + " --config " + ws.p("bad.json") +
              " --out " + ws.p("run")) == 1);
}
