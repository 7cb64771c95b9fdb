#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include "dragkit/benchio.hpp"
#include "dragkit/png_io.hpp"
#include "dragkit/serialize.hpp"
#include "dragkit/synthetic.hpp"

using namespace dragkit;
namespace fs = std::filesystem;

namespace {

const fs::path kScratch = DRAGKIT_SCRATCH;
const fs::path kRed = fs::path(DRAGKIT_FIXTURES) / "red";

int run(const std::string& args) {
    const std::string cmd = std::string("\"") + DRAGKIT_CLI + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
    const fs::path d = kScratch / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("preview at k = 0 reproduces the source mask") {
    const fs::path out = scratch("preview");
    REQUIRE(run("preview --dataset " + kRed.string() + " --name sample_a --K 10 --k 0 --out " +
                out.string()) == 0);
    const LoadedSample s = load_sample(kRed, "sample_a");
    CHECK(read_mask_png(out / "mask_k000.png") == s.masks[0]);
    CHECK(fs::exists(out / "overlay_k000.png"));

    const fs::path all = scratch("preview_all");
    REQUIRE(run("preview --dataset " + kRed.string() + " --name sample_a --K 10 --every 4 --out " +
                all.string()) == 0);
    for (const char* f : {"mask_k000.png", "mask_k004.png", "mask_k008.png", "mask_k010.png"})
        CHECK(fs::exists(all / f));
}

TEST_CASE("run writes a result and the final latent") {
    const fs::path dir = scratch("run");
    Field z(1, 24, 24);
    add_gaussian_blob(z, {8, 12}, 2.0, {1.0});
    write_latent(dir / "z0.dflt", z);
    const RegionOp op(TaskKind::Relocation, disc_mask(24, 24, {8, 12}, 3), {14, 12});
    write_text_file(dir / "ops.json", Json{{"operations", {region_op_to_json(op)}}}.dump());
    write_text_file(dir / "config.json", R"({"k_motion": 10, "k_refine": 2})");

    REQUIRE(run("run --ops " + (dir / "ops.json").string() + " --input " + (dir / "z0.dflt").string() +
                " --config " + (dir / "config.json").string() + " --out " + (dir / "out").string()) == 0);
    const Json result = Json::parse(read_text_file(dir / "out" / "result.json"));
    CHECK(result["iterations_run"] == 12);
    CHECK(result["method"] == "region");
    CHECK(read_latent(dir / "out" / "final.dflt").width() == 24);
    CHECK(fs::exists(dir / "out" / "final.png"));

    CHECK(run("run --method point --ops " + (dir / "ops.json").string() + " --input " +
              (dir / "z0.dflt").string() + " --config " + (dir / "config.json").string() +
              " --out " + (dir / "out_point").string()) == 0);
    CHECK(Json::parse(read_text_file(dir / "out_point" / "result.json"))["method"] == "point");
}

TEST_CASE("exit codes") {
    const fs::path dir = scratch("codes");
    CHECK(run("validate " + kRed.string()) == 0);
    CHECK(run("validate " + (dir / "missing").string()) == 2);
    CHECK(run("frobnicate") == 1);
    CHECK(run("run --ops " + (dir / "nope.json").string() + " --input x.dflt") == 2);
    write_text_file(dir / "bad.json", R"({"operations": [{"task": "scaling"}]})");
    CHECK(run("mask --ops " + (dir / "bad.json").string() + " --out " + (dir / "m.png").string()) == 1);
    CHECK(run("preview --K 5") == 1);
    CHECK(run("drift --solver rf --steps 10 --size 8") == 0);
}
