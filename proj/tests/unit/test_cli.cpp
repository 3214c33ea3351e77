#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sys/wait.h>

#include "test_support.hpp"

using namespace relit;
using relit::testing::TempDir;

namespace {

struct RunResult {
  int status;
  std::string out;
};

RunResult run(const std::string& args) {
  std::string cmd = std::string(RELIT_CLI_PATH) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
  int st = pclose(p);
  return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, out};
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::ofstream(dir / "scene.json")
        << R"({"width": 24, "height": 24, "spheres": [{"center": [12, 12, 10], "radius": 9, "albedo": [0.7, 0.5, 0.3]}]})";
    ASSERT_EQ(run("make-env --kind sun_sky --params '{\"height\": 16}' --out " + q(dir / "sky.hdr")).status, 0);
    ASSERT_EQ(run("make-env --kind constant --params '{\"height\": 8}' --out " + q(dir / "white.pfm")).status, 0);
    auto r = run("synthgen --spec " + q(dir / "scene.json") + " --lights 40 --out " + q(dir / "subj"));
    ASSERT_EQ(r.status, 0) << r.out;
  }
  TempDir dir{"relit_cli"};
};

}  // namespace

TEST_F(CliTest, SynthgenWritesStackAndGroundTruth) {
  for (const char* f : {"manifest.json", "mask.pfm", "olat_039.pfm", "normals_gt.pfm", "albedo_gt.pfm"})
    EXPECT_TRUE(std::filesystem::exists(dir / "subj" / f)) << f;
  EXPECT_EQ(load_olat_stack(dir / "subj/manifest.json").lights.size(), 40u);
}

TEST_F(CliTest, RelightMatchesLibrary) {
  auto r = run("relight --olat " + q(dir / "subj/manifest.json") + " --env " + q(dir / "sky.hdr") +
               " --yaw 0.4 --out " + q(dir / "relit.pfm"));
  ASSERT_EQ(r.status, 0) << r.out;
  LinearImage expect = relight_superposition(load_olat_stack(dir / "subj/manifest.json"), read_env(dir / "sky.hdr"), 0.4);
  EXPECT_LT(relit::testing::max_abs_diff(read_pfm(dir / "relit.pfm"), expect), 1e-6);
  ASSERT_EQ(run("relight --olat " + q(dir / "subj/manifest.json") + " --env " + q(dir / "sky.hdr") + " --out " +
                q(dir / "relit.png"))
                .status,
            0);
  EXPECT_EQ(read_png(dir / "relit.png").width(), 24);
}

TEST_F(CliTest, OlatFitAndPrefilter) {
  auto r = run("olat-fit --olat " + q(dir / "subj/manifest.json") + " --out-normals " + q(dir / "n.pfm") +
               " --out-albedo " + q(dir / "a.pfm"));
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(read_pfm(dir / "n.pfm").width(), 24);
  r = run("prefilter --env " + q(dir / "sky.hdr") + " --exponents 1,8 --height 8 --out " + q(dir / "pf"));
  ASSERT_EQ(r.status, 0) << r.out;
  PrefilteredEnv pf = load_prefiltered(dir / "pf");
  ASSERT_EQ(pf.specular.size(), 2u);
  EXPECT_EQ(pf.specular[1].exponent, 8.0);
  EXPECT_EQ(pf.diffuse.height(), 8);
}

TEST_F(CliTest, AugmentWritesRecordAndPair) {
  std::ofstream(dir / "cfg.json") << R"({"p": 1.0})";
  auto r = run("augment --in " + q(dir / "subj/olat_000.pfm") + " --config " + q(dir / "cfg.json") +
               " --seed 12 --pair --out " + q(dir / "aug.png"));
  ASSERT_EQ(r.status, 0) << r.out;
  std::ifstream side(dir / "aug.png.json");
  auto j = nlohmann::json::parse(side);
  EXPECT_EQ(j["seed"], 12);
  EXPECT_EQ(j["record"]["stages"], nlohmann::json({"glare", "noise", "blur", "photometric", "tint"}));
  EXPECT_TRUE(std::filesystem::exists(dir / "aug_teacher.png"));

  // Re-running with the same seed reproduces the image.
  std::string first = [&] {
    std::ifstream in(dir / "aug.png", std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  }();
  run("augment --in " + q(dir / "subj/olat_000.pfm") + " --config " + q(dir / "cfg.json") +
      " --seed 12 --pair --out " + q(dir / "aug.png"));
  std::ifstream again(dir / "aug.png", std::ios::binary);
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(again), {}), first);
}

TEST_F(CliTest, MetricsJson) {
  auto r = run("metrics --a " + q(dir / "subj/olat_001.pfm") + " --b " + q(dir / "subj/olat_001.pfm") + " --mask " +
               q(dir / "subj/mask.pfm") + " --json");
  ASSERT_EQ(r.status, 0) << r.out;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["psnr"], "inf");
  EXPECT_EQ(j["ssim"], 1.0);
}

TEST_F(CliTest, ConsistWithBuiltins) {
  std::string m = (dir / "subj/manifest.json").string();
  auto r = run("consist --relighter builtin:olat=" + q(m) + " --albedo builtin:flatlit=" + q(m) + " --image " +
               q(dir / "subj/olat_002.pfm") + " --envs " + q(dir / "sky.hdr") + "," + q(dir / "white.pfm") +
               " --mask " + q(dir / "subj/mask.pfm"));
  ASSERT_EQ(r.status, 0) << r.out;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["l_env"], 0.0);
  EXPECT_EQ(j["l_amb"], 0.0);
  EXPECT_EQ(j["lambda_env"], 25.0);
}

TEST_F(CliTest, RouteAndEmit) {
  std::ofstream(dir / "data.json") << R"({"entries": [
    {"id": "c0", "tag": "curated"}, {"id": "c1", "tag": "curated"}, {"id": "c2", "tag": "curated"},
    {"id": "v0", "tag": "video"}, {"id": "o0", "tag": "olat", "files": {"olat": "subj/manifest.json"}},
    {"id": "r0", "tag": "residual"}]})";
  std::ofstream(dir / "plan.json") << R"({"fractions": {"curated": 0.5, "video": 0.2, "olat": 0.2, "residual": 0.1},
    "batch_size": 5})";
  auto r = run("route --manifest " + q(dir / "data.json") + " --plan " + q(dir / "plan.json") + " --seed 3");
  ASSERT_EQ(r.status, 0) << r.out;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["batch_size"], 5);
  EXPECT_EQ(j["batches"][0].size(), 5u);
  EXPECT_EQ(run("route --manifest " + q(dir / "data.json") + " --plan " + q(dir / "plan.json") + " --seed 3").out,
            r.out);

  std::ofstream(dir / "olat_only.json") << R"({"fractions": {"olat": 1.0}, "batch_size": 1})";
  r = run("route --manifest " + q(dir / "data.json") + " --plan " + q(dir / "olat_only.json") +
          " --seed 1 --emit-dir " + q(dir / "pgt") + " --env " + q(dir / "sky.hdr"));
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_TRUE(std::filesystem::exists(dir / "pgt/o0/pseudo_gt.json"));
}

TEST_F(CliTest, BenchJson) {
  auto r = run("bench --op relight --res 32 --lights 16 --iters 3 --warmup 1 --json");
  ASSERT_EQ(r.status, 0) << r.out;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["iterations"], 3);
  EXPECT_EQ(j["resolution"], "32x32");
  EXPECT_GT(j["throughput_fps"].get<double>(), 0.0);
}

TEST_F(CliTest, ErrorsExitNonZero) {
  EXPECT_NE(run("relight --olat /nonexistent.json --env " + q(dir / "sky.hdr") + " --out x.pfm").status, 0);
  EXPECT_NE(run("bench --op warp").status, 0);
  EXPECT_NE(run("").status, 0);
}
