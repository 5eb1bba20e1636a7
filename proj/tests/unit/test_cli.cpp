#include <doctest.h>

#ifdef DIBC_CLI_PATH

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "dibc_cli_test";

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + DIBC_CLI_PATH + " " + args + " >" + (kDir / "stdout.txt").string() + " 2>" +
                          (kDir / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string p(const char* name) { return (kDir / name).string(); }

const std::string kSmall =
    " --k 4 --l 2 --iters 100 --burn-in 50 --pilot-sweeps 50 --pilot-runs 1 --refine-samples 10"
    " --candidates 5 --param-iters 60 --param-burn-in 30";

struct CliDir {
  CliDir() {
    fs::remove_all(kDir);
    fs::create_directories(kDir);
  }
  ~CliDir() { fs::remove_all(kDir); }
};

}  // namespace

TEST_CASE("command line") {
  CliDir dir;
  REQUIRE(run("generate --n 600 --seed 3 --out " + p("a.csv")) == 0);
  REQUIRE(run("generate --n 600 --seed 3 --out " + p("b.csv")) == 0);
  CHECK(slurp(p("a.csv")) == slurp(p("b.csv")));
  CHECK(run("generate --n 0 --out " + p("c.csv")) == 2);
  CHECK(run("fit --bogus") == 2);
  CHECK(run("--help") == 0);

  SUBCASE("single worker fit") {
    REQUIRE(run("fit --data " + p("a.csv") + " --workers 1 --out-dir " + p("one") + kSmall) == 0);
    const auto diag = nlohmann::json::parse(slurp(kDir / "one" / "diagnostics.json"));
    bool skipped = false;
    for (const auto& s : diag["steps"])
      if (s["name"] == "refinement") skipped = s["skipped"];
    CHECK(skipped);
    CHECK(diag.contains("metrics"));
    CHECK(fs::exists(kDir / "one" / "c_star.csv"));
    CHECK(fs::exists(kDir / "one" / "draws.bin"));
  }

  SUBCASE("candidate count above the refined samples") {
    CHECK(run("fit --data " + p("a.csv") + " --workers 2 --out-dir " + p("bad") + kSmall +
              " --refine-samples 20 --candidates 30") == 2);
  }

  SUBCASE("fit, evaluate, classify, predict and re-run") {
    REQUIRE(run("fit --data " + p("a.csv") + " --workers 2 --seed 5 --out-dir " + p("two") + kSmall) == 0);
    const auto cstar = (kDir / "two" / "c_star.csv").string();

    CHECK(run("evaluate --pred " + cstar + " --truth " + cstar + " --truth-column cluster --out " +
              p("m.json")) == 0);
    const auto m = nlohmann::json::parse(slurp(p("m.json")));
    CHECK(m["accuracy"] == 1.0);
    CHECK(m["ari"].get<double>() == doctest::Approx(1.0));
    CHECK(m["f_measure"].get<double>() == doctest::Approx(1.0));
    CHECK(run("evaluate --pred " + cstar + " --truth " + p("a.csv")) == 0);
    {
      std::ofstream out(p("short.csv"));
      out << "row,cluster\n1,1\n";
    }
    CHECK(run("evaluate --pred " + p("short.csv") + " --truth " + cstar + " --truth-column cluster") == 2);

    const auto draws = (kDir / "two" / "draws.json").string();
    CHECK(run("classify --draws " + draws + " --data " + p("a.csv") + " --out " + p("cls.csv")) == 0);
    std::ifstream cls(p("cls.csv"));
    std::string header;
    std::getline(cls, header);
    CHECK(header.rfind("row,cluster,p", 0) == 0);

    CHECK(run("predict --draws " + draws + " --n 250 --seed 2 --out " + p("pred.csv")) == 0);
    std::ifstream pred(p("pred.csv"));
    int lines = 0;
    for (std::string l; std::getline(pred, l);) ++lines;
    CHECK(lines == 251);
    CHECK(run("predict --draws " + p("missing.json") + " --out " + p("x.csv")) == 3);

    REQUIRE(run("fit --manifest " + (kDir / "two" / "manifest.json").string() + " --out-dir " + p("rerun")) == 0);
    CHECK(slurp(kDir / "rerun" / "c_star.csv") == slurp(cstar));

    REQUIRE(run("fit --manifest " + (kDir / "two" / "manifest.json").string() + " --out-dir " + p("env"),
                "DIBC_SEED=99") == 0);
    CHECK(nlohmann::json::parse(slurp(kDir / "env" / "manifest.json"))["seed"] == 99);
    CHECK(run("fit --data " + p("a.csv") + " --out-dir " + p("z") + kSmall, "DIBC_SEED=abc") == 2);
  }

  SUBCASE("single-cluster classification") {
    REQUIRE(run("fit --data " + p("a.csv") + " --workers 1 --k 1 --l 2 --iters 60 --burn-in 30 --pilot-sweeps 0"
                " --refine-samples 5 --candidates 2 --param-iters 40 --param-burn-in 20 --out-dir " + p("k1")) == 0);
    REQUIRE(run("classify --draws " + (kDir / "k1" / "draws.json").string() + " --data " + p("a.csv") +
                " --out " + p("k1.csv")) == 0);
    std::ifstream in(p("k1.csv"));
    std::string line;
    std::getline(in, line);
    CHECK(line == "row,cluster,p1");
    std::getline(in, line);
    CHECK(line == "1,1,1");
  }
}

#endif
