#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string output;
};

Run run(const std::string& args, const std::string& env = "") {
  const fs::path log = fs::temp_directory_path() / "hanle_cli_test.log";
  const std::string cmd = env + " " + std::string(HANLE_SIM_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("hanle_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "run.cfg";
  std::ofstream(p) << text;
  return p;
}

std::vector<std::string> data_rows(const std::string& text) {
  std::vector<std::string> rows;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line))
    if (!line.empty() && line[0] != '#') rows.push_back(line);
  return rows;
}

const std::string kQuick = "[doppler]\nnodes = 16\n[scan]\ncoarse_points = 21\nprobe_points = 12\nfine_points = 41\n";

}  // namespace

TEST(Cli, SolveOneWithoutLight) {
  const auto dir = fresh_dir("solve");
  const auto cfg = write_config(dir, "[field]\nrabi = 0\n[solve]\ndelta = 3\nomega_g = 0.4\n[output]\nprefix = s\n");
  const auto r = run("solve-one --config " + cfg.string() + " --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto rows = data_rows(slurp(dir / "s_density.csv"));
  ASSERT_EQ(rows.front(), "block,row,col,m_row,m_col,re,im");
  int diag = 0;
  for (const auto& row : rows) {
    if (row.rfind("rho_g,", 0) != 0) continue;
    std::stringstream ss(row);
    std::string block, i, j, mi, mj, re, im;
    std::getline(ss, block, ',');
    std::getline(ss, i, ',');
    std::getline(ss, j, ',');
    std::getline(ss, mi, ',');
    std::getline(ss, mj, ',');
    std::getline(ss, re, ',');
    std::getline(ss, im, ',');
    if (i == j) {
      EXPECT_NEAR(std::stod(re), 0.2, 1e-15);
      ++diag;
    }
  }
  EXPECT_EQ(diag, 5);
  const auto summary = data_rows(slurp(dir / "s_solve.csv"));
  ASSERT_EQ(summary.size(), 2u);
  EXPECT_NE(summary[1].find(",0,1"), std::string::npos) << summary[1];
}

TEST(Cli, ConfigErrorsExitWithTwo) {
  const auto dir = fresh_dir("cfgerr");
  EXPECT_EQ(run("scan-b --config " + (dir / "missing.cfg").string()).code, 2);
  const auto cfg = write_config(dir, "[field]\nrabi = 1\n");
  const auto bad = run("scan-b --config " + cfg.string() + " --override field.epsilon=0.9");
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.output.find("field.epsilon"), std::string::npos) << bad.output;
  EXPECT_EQ(run("scan-b --config " + cfg.string() + " --override atom.typo=1").code, 2);
  EXPECT_EQ(run("bogus --config " + cfg.string()).code, 2);
  EXPECT_EQ(run("scan-b").code, 2);
  EXPECT_EQ(run("scan-b --config " + cfg.string() + " --threads 0").code, 2);
}

TEST(Cli, NumericFailureExitsWithThree) {
  const auto dir = fresh_dir("numeric");
  const auto cfg = write_config(dir, "[field]\nrabi = 1e300\n[solve]\ndelta = 0\n[output]\nprefix = n\n");
  const auto r = run("solve-one --config " + cfg.string() + " --out " + dir.string());
  EXPECT_EQ(r.code, 3) << r.output;
  EXPECT_FALSE(fs::exists(dir / "n_solve.csv"));
  EXPECT_FALSE(fs::exists(dir / "n_solve.csv.partial"));
}

TEST(Cli, ExtractionFailureExitsWithFourAndLeavesNoFiles) {
  const auto dir = fresh_dir("extract");
  const auto cfg = write_config(dir, "[field]\nrabi = 0\n[sweep]\nepsilons = 0, 0.2\n[output]\nprefix = e\n" + kQuick);
  const auto r = run("sweep-eps --config " + cfg.string() + " --out " + dir.string());
  EXPECT_EQ(r.code, 4) << r.output;
  for (const auto& entry : fs::directory_iterator(dir)) EXPECT_EQ(entry.path().filename(), "run.cfg");
}

TEST(Cli, ScanIsDeterministicAcrossThreadCounts) {
  const auto dir = fresh_dir("determinism");
  const auto cfg = write_config(dir, "[field]\nrabi = 5\nepsilon = pi/9\n[output]\nprefix = c\n" + kQuick);
  ASSERT_EQ(run("scan-b --config " + cfg.string() + " --out " + dir.string() + " --threads 1").code, 0);
  const auto one = slurp(dir / "c_curve.csv");
  ASSERT_EQ(run("scan-b --config " + cfg.string() + " --out " + dir.string() + " --threads 3").code, 0);
  EXPECT_EQ(one, slurp(dir / "c_curve.csv"));
  ASSERT_EQ(run("scan-b --config " + cfg.string() + " --out " + dir.string(), "HANLE_SIM_THREADS=2").code, 0);
  EXPECT_EQ(one, slurp(dir / "c_curve.csv"));

  const auto rows = data_rows(one);
  EXPECT_EQ(rows.front(), "omega_g,signal");
  EXPECT_GT(rows.size(), 50u);
  EXPECT_NE(one.find("# [atom]"), std::string::npos);
  EXPECT_NE(one.find("# central structure: sign=EIA"), std::string::npos);
}

TEST(Cli, SweepWritesCsvAndPlotFiles) {
  const auto dir = fresh_dir("sweep");
  const auto cfg = write_config(
      dir, "[field]\nrabi = 5\n[sweep]\nepsilons = -0.3, 0, 0.3\n[output]\nprefix = w\nformat = both\n" + kQuick);
  const auto r = run("sweep-eps --config " + cfg.string() + " --out " + dir.string() + " --override doppler.nodes=24");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto rows = data_rows(slurp(dir / "w_sweep.csv"));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "epsilon,amplitude,width,ratio,sign");
  auto field = [](const std::string& row, int k) {
    std::stringstream ss(row);
    std::string item;
    for (int i = 0; i <= k; ++i) std::getline(ss, item, ',');
    return item;
  };
  const double a_minus = std::stod(field(rows[1], 1)), a_plus = std::stod(field(rows[3], 1));
  EXPECT_NEAR(a_minus / a_plus, 1.0, 1e-9);
  for (const char* panel : {"amplitude", "width", "ratio"})
    EXPECT_EQ(data_rows(slurp(dir / (std::string("w_sweep_") + panel + ".dat"))).size(), 3u) << panel;
}

TEST(Cli, SampleConfigsParse) {
  const auto dir = fresh_dir("samples");
  for (const auto& entry : fs::directory_iterator(HANLE_CONFIG_DIR)) {
    if (entry.path().extension() != ".cfg") continue;
    const auto r = run("solve-one --config " + entry.path().string() + " --out " + dir.string());
    EXPECT_EQ(r.code, 0) << entry.path() << "\n" << r.output;
  }
}
