#include "support.hpp"

#include "bostomo/cli.hpp"
#include "bostomo/io.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace bos;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream o, e;
  const int code = cli::run(args, o, e);
  return {code, o.str(), e.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

fs::path write_scene(const fs::path& dir) {
  auto j = testing::small_scene_json();
  j["camera"]["resolution"] = {8, 8};
  j["train"] = {{"iterations", 4},
                {"batch", {{"collocation", 16}, {"pixels", 8}, {"boundary", 8}}},
                {"network", {{"hidden", {6, 6}}}},
                {"spp", 1},
                {"render_step_m", 0.2},
                {"checkpoint_every", 2},
                {"boundary", {{"min_scale", 0.05}}}};
  j["benchmark"] = {{"plume", {{"center_m", {0.0, 0.0, 1.0}}, {"sigma_m", 0.3}, {"delta_T_K", 20.0}, {"w0", 0.5}}},
                    {"measurement_spp", 1},
                    {"measurement_step_m", 0.1},
                    {"eval_grid", 4}};
  const fs::path p = dir / "scene.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run({"--help"}).code == 0);
  const Run missing = run({"render"});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("--scene") != std::string::npos);
  CHECK(run({"render", "--scene", "x.json", "--bogus"}).code == 1);
  CHECK(run({"nosuchcommand"}).code == 1);
  CHECK(run({}).code == 1);
}

TEST_CASE("invalid inputs are validation errors") {
  const auto dir = testing::scratch("cli_bad");
  CHECK(run({"render", "--scene", (dir / "absent.json").string(), "--out", dir.string()}).code == 1);
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK(run({"render", "--scene", (dir / "broken.json").string(), "--out", dir.string()}).code == 1);
  const fs::path scene = write_scene(dir);
  CHECK(run({"render", "--scene", scene.string(), "--spp", "0", "--out", (dir / "o").string()}).code == 1);
}

TEST_CASE("render writes an image and a manifest") {
  const auto dir = testing::scratch("cli_render");
  const fs::path scene = write_scene(dir);
  const Run r = run({"render", "--scene", scene.string(), "--spp", "2", "--seed", "4", "--png", "--out",
                     (dir / "a").string()});
  REQUIRE(r.code == 0);
  const RasterImage img = read_pfm(dir / "a" / "img.pfm");
  CHECK(img.rows == 8);
  CHECK(img.cols == 8);
  CHECK(fs::exists(dir / "a" / "img.png"));
  const auto m = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
  CHECK(m.at("subcommand") == "render");
  CHECK(m.contains("scene"));
}

TEST_CASE("manifest replay and worker count give byte-identical output") {
  const auto dir = testing::scratch("cli_replay");
  const fs::path scene = write_scene(dir);
  REQUIRE(run({"--threads", "1", "render", "--scene", scene.string(), "--spp", "3", "--out", (dir / "a").string()})
              .code == 0);
  REQUIRE(run({"--threads", "3", "render", "--scene", scene.string(), "--spp", "3", "--out", (dir / "b").string()})
              .code == 0);
  fs::remove(scene);  // replay must rely on the snapshot only
  REQUIRE(run({"--from-manifest", (dir / "a" / "manifest.json").string(), "--out", (dir / "c").string()}).code == 0);
  const std::string a = slurp(dir / "a" / "img.pfm");
  CHECK(a == slurp(dir / "b" / "img.pfm"));
  CHECK(a == slurp(dir / "c" / "img.pfm"));
}

TEST_CASE("trace writes the sampled path") {
  const auto dir = testing::scratch("cli_trace");
  const fs::path scene = write_scene(dir);
  REQUIRE(run({"trace", "--scene", scene.string(), "--row", "3", "--col", "4", "--out", dir.string()}).code == 0);
  std::ifstream f(dir / "path.csv");
  std::string header;
  std::getline(f, header);
  CHECK(header == "t,x,y,z,vx,vy,vz");
  int lines = 0;
  for (std::string l; std::getline(f, l);) ++lines;
  CHECK(lines > 10);
  CHECK(run({"trace", "--scene", scene.string(), "--row", "8", "--col", "0", "--out", dir.string()}).code == 1);
}

TEST_CASE("synthesize, reconstruct, evaluate and eval-field chain together") {
  const auto dir = testing::scratch("cli_chain");
  const fs::path scene = write_scene(dir);
  const std::string s = scene.string();
  REQUIRE(run({"synthesize", "--scene", s, "--out", (dir / "syn").string()}).code == 0);
  for (const char* f : {"ref.pfm", "flow.pfm", "boundary.vox", "truth.vox"}) CHECK(fs::exists(dir / "syn" / f));

  const Run rec = run({"reconstruct", "--scene", s, "--measurement", (dir / "syn" / "flow.pfm").string(), "--boundary",
                       (dir / "syn" / "boundary.vox").string(), "--out", (dir / "rec").string()});
  REQUIRE(rec.code == 0);
  CHECK(fs::exists(dir / "rec" / "final.bin"));
  CHECK(fs::exists(dir / "rec" / "loss.csv"));

  // Resuming from the halfway checkpoint reproduces the final parameters.
  const Run res = run({"reconstruct", "--scene", s, "--measurement", (dir / "syn" / "flow.pfm").string(), "--boundary",
                       (dir / "syn" / "boundary.vox").string(), "--resume",
                       (dir / "rec" / "checkpoints" / "ckpt_0000002.bin").string(), "--out", (dir / "res").string()});
  REQUIRE(res.code == 0);
  CHECK(slurp(dir / "res" / "final.bin") == slurp(dir / "rec" / "final.bin"));

  REQUIRE(run({"evaluate", "--scene", s, "--checkpoint", (dir / "rec" / "final.bin").string(), "--truth",
               "plume", "--grid", "4", "--out", (dir / "ev").string()})
              .code == 0);
  const auto metrics = nlohmann::json::parse(slurp(dir / "ev" / "metrics.json"));
  CHECK(metrics.at("T_K").at("rmse").get<double>() > 0.0);
  CHECK(fs::exists(dir / "ev" / "error.vox"));

  REQUIRE(run({"eval-field", "--scene", s, "--checkpoint", (dir / "rec" / "final.bin").string(), "--grid", "5", "--out",
               (dir / "field.vox").string()})
              .code == 0);
  CHECK(read_voxgrid(dir / "field.vox").dims == std::array<int, 3>{5, 5, 5});
}

TEST_CASE("measurement that does not match the camera is rejected") {
  const auto dir = testing::scratch("cli_mismatch");
  const fs::path scene = write_scene(dir);
  write_pfm(dir / "m.pfm", 4, 4, std::vector<double>(16, 0.1));
  REQUIRE(run({"synthesize", "--scene", scene.string(), "--out", (dir / "syn").string()}).code == 0);
  CHECK(run({"reconstruct", "--scene", scene.string(), "--measurement", (dir / "m.pfm").string(), "--boundary",
             (dir / "syn" / "boundary.vox").string(), "--out", (dir / "rec").string()})
            .code == 1);
}
