#include "hsiu/cli.hpp"

#include "hsiu/datagen.hpp"
#include "hsiu/io.hpp"
#include "scratch_dir.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>

using namespace hsiu;
using testing_support::ScratchDir;

namespace {

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "hsiu");
  return run_cli(args);
}

// Runs the installed binary so stderr and the real exit status are observed.
int run_binary(const std::string& args, const std::filesystem::path& stderr_file) {
  const std::string cmd = std::string(HSIU_CLI_PATH) + " " + args + " 2>" + stderr_file.string() +
                          " >/dev/null";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> small_generate(const std::filesystem::path& out) {
  return {"generate", "--width", "6", "--height", "5", "--bands", "10", "--potts-sweeps", "5",
          "--seed", "3", "--out", out.string()};
}

}  // namespace

TEST_CASE("generate writes a complete dataset") {
  ScratchDir dir("cli");
  const auto out = dir / "data";
  REQUIRE(cli(small_generate(out)) == 0);
  for (const char* f : {"image.hsc", "endmembers.csv", "truth_abundances.csv", "truth_labels.csv",
                        "truth_phi.csv", "truth_sigma2.csv", "truth_s2.csv", "spec.json"}) {
    CHECK(std::filesystem::exists(out / f));
  }
  const HyperspectralImage img = read_cube(out / "image.hsc");
  CHECK(img.width() == 6);
  CHECK(img.height() == 5);
  CHECK(img.bands() == 10);
  const auto spec = nlohmann::json::parse(slurp(out / "spec.json"));
  CHECK(spec["classes"] == 4);
  CHECK(spec["seed"] == 3);
  CHECK(read_labels_csv(out / "truth_labels.csv", 4).size() == 30);

  ScenarioSpec s;
  s.width = 6;
  s.height = 5;
  s.bands = 10;
  s.potts_sweeps = 5;
  s.seed = 3;
  CHECK(generate(s).image.data() == img.data());
}

TEST_CASE("generate rejects inconsistent parameters with exit code 2") {
  ScratchDir dir("cli");
  CHECK(cli({"generate", "--s2", "0.1", "--out", (dir / "x").string()}) == 2);
  CHECK(cli({"generate", "--noise", "iid:abc", "--out", (dir / "x").string()}) == 2);
  CHECK(cli({"generate", "--neighborhood", "6", "--out", (dir / "x").string()}) == 2);
  CHECK(cli({"generate", "--scenario", "mixed-models", "--classes", "3", "--out", (dir / "x").string()}) == 2);
  CHECK(cli({"generate", "--width", "abc", "--out", (dir / "x").string()}) == 2);
  CHECK(cli({"generate"}) == 2);
  CHECK(cli({}) == 2);
  CHECK(cli({"frobnicate"}) == 2);
}

TEST_CASE("unmix, eval and render round trip") {
  ScratchDir dir("cli");
  const auto data = dir / "data";
  const auto res = dir / "res";
  REQUIRE(cli(small_generate(data)) == 0);
  REQUIRE(cli({"unmix", "--image", (data / "image.hsc").string(), "--endmembers",
               (data / "endmembers.csv").string(), "--iters", "40", "--burnin", "20", "--threads", "0",
               "--out", res.string()}) == 0);
  for (const char* f : {"labels_map.csv", "labels_map.pgm", "abundances.csv", "sigma2.csv", "s2.csv",
                        "label_posterior.csv", "chain_meta.json"}) {
    CHECK(std::filesystem::exists(res / f));
  }
  const Matrix a = read_csv_matrix(res / "abundances.csv");
  CHECK(a.rows() == 3);
  CHECK(a.cols() == 30);
  CHECK((a.colwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
  const Vector s2 = read_csv_vector(res / "s2.csv");
  for (Index k = 1; k < s2.size(); ++k) CHECK(s2(k - 1) <= s2(k));
  const auto meta = nlohmann::json::parse(slurp(res / "chain_meta.json"));
  CHECK(meta["stored_samples"] == 20);
  CHECK(meta["config"]["iterations"] == 40);

  REQUIRE(cli({"eval", "--truth", data.string(), "--results", res.string()}) == 0);
  const auto report = nlohmann::json::parse(slurp(res / "report.json"));
  CHECK(report["methods"].size() == 2);
  CHECK(report["methods"][0]["name"] == "FCLS");
  CHECK(report["methods"][1]["name"] == "RCA-SU");
  CHECK(report["methods"][1].contains("confusion"));
  CHECK(std::filesystem::exists(res / "report.md"));

  REQUIRE(cli({"render", "--labels", (res / "labels_map.csv").string(), "--classes", "4", "--out",
               (dir / "z.pgm").string()}) == 0);
  CHECK(read_pgm(dir / "z.pgm").width == 6);
  REQUIRE(cli({"render", "--abundances", (res / "abundances.csv").string(), "--width", "6", "--out",
               (dir / "maps").string()}) == 0);
  CHECK(std::filesystem::exists(dir / "maps" / "abundance_2.pgm"));
  CHECK(cli({"render", "--labels", (res / "labels_map.csv").string(), "--abundances",
             (res / "abundances.csv").string(), "--out", (dir / "q").string()}) == 2);
}

TEST_CASE("FCLS-only results evaluate as a single method") {
  ScratchDir dir("cli");
  const auto data = dir / "data";
  const auto res = dir / "res";
  REQUIRE(cli(small_generate(data)) == 0);
  REQUIRE(cli({"unmix", "--algo", "fcls", "--image", (data / "image.hsc").string(), "--endmembers",
               (data / "endmembers.csv").string(), "--out", res.string()}) == 0);
  CHECK(std::filesystem::exists(res / "abundances.csv"));
  CHECK_FALSE(std::filesystem::exists(res / "labels_map.csv"));
  REQUIRE(cli({"eval", "--truth", data.string(), "--results", res.string(), "--out",
               (dir / "rep").string()}) == 0);
  const auto report = nlohmann::json::parse(slurp(dir / "rep" / "report.json"));
  CHECK(report["methods"].size() == 1);
}

TEST_CASE("config files back the flags and reject unknown keys") {
  ScratchDir dir("cli");
  {
    std::ofstream(dir / "ok.ini") << "width=4\nheight=3\nbands=8\npotts-sweeps=2\n";
    std::ofstream(dir / "bad.ini") << "width=4\nwobble=1\n";
  }
  REQUIRE(cli({"generate", "--config", (dir / "ok.ini").string(), "--height", "2", "--out",
               (dir / "d").string()}) == 0);
  const HyperspectralImage img = read_cube(dir / "d" / "image.hsc");
  CHECK(img.width() == 4);
  CHECK(img.height() == 2);
  CHECK(img.bands() == 8);
  CHECK(cli({"generate", "--config", (dir / "bad.ini").string(), "--out", (dir / "e").string()}) == 2);
}

TEST_CASE("missing input files exit with code 2 and a message") {
  ScratchDir dir("cli");
  const int code = run_binary("unmix --image " + (dir / "nope.hsc").string() + " --endmembers " +
                                  (dir / "nope.csv").string() + " --out " + (dir / "o").string(),
                              dir / "err.txt");
  CHECK(code == 2);
  CHECK(slurp(dir / "err.txt").find("nope.hsc") != std::string::npos);

  REQUIRE(cli(small_generate(dir / "data")) == 0);
  std::filesystem::resize_file(dir / "data" / "image.hsc", 100);
  const int trunc = run_binary("unmix --image " + (dir / "data" / "image.hsc").string() +
                                   " --endmembers " + (dir / "data" / "endmembers.csv").string() +
                                   " --iters 4 --burnin 2 --out " + (dir / "o").string(),
                               dir / "err2.txt");
  CHECK(trunc == 2);
  CHECK(slurp(dir / "err2.txt").find("payload") != std::string::npos);
}

TEST_CASE("endmember and image band mismatch is a usage error") {
  ScratchDir dir("cli");
  REQUIRE(cli(small_generate(dir / "data")) == 0);
  write_csv_matrix(dir / "m.csv", Matrix::Constant(9, 3, 0.5));
  CHECK(cli({"unmix", "--image", (dir / "data" / "image.hsc").string(), "--endmembers",
             (dir / "m.csv").string(), "--iters", "4", "--burnin", "2", "--out", (dir / "o").string()}) == 2);
}

TEST_CASE("thread count comes from HSIU_THREADS unless overridden") {
  unsetenv("HSIU_THREADS");
  CHECK(threads_from_env() == 0);
  setenv("HSIU_THREADS", "3", 1);
  CHECK(threads_from_env() == 3);
  setenv("HSIU_THREADS", "x", 1);
  CHECK_THROWS_AS(threads_from_env(), InvalidInput);
  unsetenv("HSIU_THREADS");
}
