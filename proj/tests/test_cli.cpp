#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <doctest.h>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(DVLR_BINARY) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  Result r;
  char buf[4096];
  while (const std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("dvlr_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    files[fs::relative(e.path(), dir).string()] = s.str();
  }
  return files;
}

const char* kTiny =
    "--preset toy --set data.train=24 --set data.heldout=6 --set data.rl=12 --set sft.epochs=1 "
    "--set stage2.epochs=1 --set stage3.epochs=1 --set stage2.batch_size=4 --set stage3.batch_size=4 "
    "--set stage2.G=2 --set stage3.G=2 --set interpreter.H=8 --set reasoner.H=8 --set interpreter.d=4 "
    "--set reasoner.d=4 --set interpreter.max_len=48 --set reasoner.max_len=32 --quiet";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("argument errors exit with 2") {
    CHECK(run("no-such-command").code == 2);
    CHECK(run("config --nonsense").code == 2);
    CHECK(run("config --set stage2.bogus=1").code == 2);
    CHECK(run("config --set stage2.G=x").code == 2);
    CHECK(run("config --set stage2.G=1").code == 2);
  }

  TEST_CASE("config prints the resolved configuration") {
    const auto r = run("config --preset toy --set stage2.kl_beta=0.05");
    CHECK(r.code == 0);
    CHECK(r.out.find("stage2.kl_beta = 0.05") != std::string::npos);
  }

  TEST_CASE("a stage without its prerequisite exits with 3 and names it") {
    const auto dir = scratch("missing");
    fs::create_directories(dir);
    const auto r = run("rl-stage2 --quiet --out " + dir.string());
    CHECK(r.code == 3);
    CHECK(r.out.find("sft") != std::string::npos);
  }

  TEST_CASE("gradcheck passes and a sabotaged gradient fails") {
    CHECK(run("gradcheck --instances 3").code == 0);
    const auto bad = run("gradcheck --instances 3 --sabotage 0.01");
    CHECK(bad.code == 4);
  }

  TEST_CASE("a tiny full run is byte-for-byte reproducible") {
    const auto a = scratch("full_a");
    const auto b = scratch("full_b");
    REQUIRE(run(std::string("full-run ") + kTiny + " --out " + a.string()).code == 0);
    REQUIRE(run(std::string("full-run ") + kTiny + " --out " + b.string()).code == 0);
    const auto fa = snapshot(a);
    const auto fb = snapshot(b);
    CHECK(fa.count("summary.csv") == 1);
    CHECK(fa.count("reasoner.s2s3.ckpt") == 1);
    CHECK(fa.size() == fb.size());
    for (const auto& [name, bytes] : fa) {
      INFO(name);
      CHECK(fb.count(name) == 1);
      if (fb.count(name)) CHECK(bytes == fb.at(name));
    }
  }
}
