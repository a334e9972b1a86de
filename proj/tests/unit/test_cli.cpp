#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Workdir {
  fs::path root;
  explicit Workdir(const std::string& name) : root(fs::temp_directory_path() / ("sllbar_cli_" + name)) {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workdir() { fs::remove_all(root); }

  fs::path write(const std::string& file, const std::string& text) const {
    std::ofstream(root / file) << text;
    return root / file;
  }
};

int cli(const std::string& args) {
  const std::string cmd = std::string(SLLBAR_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_prefix(const fs::path& dir, const std::string& prefix) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().filename().string().rfind(prefix, 0) == 0) ++n;
  return n;
}

const char* small_run =
    "[scenario]\nname = sim1\n[run]\nT = 0.04\nlevel = 3\nsteps = 20\nsnapshot_stride = 10\n";

}  // namespace

TEST(Cli, RunIsReproducibleAndWritesSnapshots) {
  Workdir w("run");
  const fs::path cfg = w.write("run.ini", small_run);
  ASSERT_EQ(cli("run " + cfg.string() + " -o " + (w.root / "a").string() + " --seed 7"), 0);
  ASSERT_EQ(cli("--seed 7 run " + cfg.string() + " -o " + (w.root / "b").string()), 0);
  for (const char* f : {"u_final.csv", "H_final.csv", "energy.csv", "snapshot_u_000010.csv"})
    EXPECT_EQ(slurp(w.root / "a" / f), slurp(w.root / "b" / f)) << f;
  EXPECT_EQ(count_prefix(w.root / "a", "snapshot_u_"), 3u);
  EXPECT_EQ(count_prefix(w.root / "a", "snapshot_H_"), 3u);
  const std::string u = slurp(w.root / "a" / "u_final.csv");
  EXPECT_EQ(u.substr(0, u.find('\n')), "x,u1,u2,u3");
  const std::string e = slurp(w.root / "a" / "energy.csv");
  EXPECT_EQ(e.substr(0, e.find('\n')), "sample,t,energy");

  ASSERT_EQ(cli("run " + cfg.string() + " -o " + (w.root / "c").string() + " --seed 8"), 0);
  EXPECT_NE(slurp(w.root / "a" / "u_final.csv"), slurp(w.root / "c" / "u_final.csv"));
}

TEST(Cli, EnergyWritesEveryTraceAndTheMean) {
  Workdir w("energy");
  const fs::path cfg = w.write("e.ini", "[scenario]\nname = sim1\n[energy]\nT = 0.04\nlevel = 3\nsteps = 4\n");
  ASSERT_EQ(cli("energy " + cfg.string() + " -o " + w.root.string()), 0);
  EXPECT_EQ(count_prefix(w.root, "energy_sample_"), 30u);
  const std::string mean = slurp(w.root / "energy_mean.csv");
  EXPECT_EQ(mean.rfind("sample,t,energy\nmean,0,", 0), 0u);
}

TEST(Cli, ConvergenceReportHasRates) {
  Workdir w("conv");
  const fs::path cfg = w.write(
      "c.ini", "[scenario]\nname = sim1\n[space]\nT = 0.01\nsamples = 2\nreference_level = 4\nreference_steps = 4\n"
               "levels = 2, 3\n");
  ASSERT_EQ(cli("converge-space " + cfg.string() + " -o " + w.root.string()), 0);
  const std::string r = slurp(w.root / "convergence_space.csv");
  EXPECT_EQ(r.rfind("level,h,steps,k,M,E0_u,E1_u,E0_H,E1_H\n2,0.25,4,", 0), 0u);
  EXPECT_NE(r.find("# rate E1_u "), std::string::npos);
}

TEST(Cli, ErrorsSetTheExitCode) {
  Workdir w("errors");
  EXPECT_EQ(cli("run " + w.write("bad.ini", "[scenario]\nname = nowhere\n").string()), 2);
  EXPECT_EQ(cli("run " + w.write("key.ini", "[scenario]\nname = sim1\nfoo = 1\n").string()), 2);
  EXPECT_NE(cli("run " + (w.root / "missing.ini").string()), 0);
  EXPECT_NE(cli("launch " + w.write("ok.ini", small_run).string()), 0);
  EXPECT_NE(cli("--paper-preset --desk-preset run " + (w.root / "ok.ini").string()), 0);
}
