#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <gtest/gtest.h>

#include <hanle/config.hpp>
#include <hanle/output.hpp>

using namespace hanle;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config_text(text, "test.cfg");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, MinimalConfigGetsDefaults) {
  const auto c = parse_config_text("[atom]\nf_g = 2\nf_e = 3\n[field]\nrabi = 5\nepsilon = 0\n");
  EXPECT_EQ(c.doppler.width, 100.0);
  EXPECT_EQ(c.doppler.nodes, 128);
  EXPECT_EQ(c.scan, ScanSettings{});
  EXPECT_EQ(c.atom, AtomSpec{});
}

TEST(Config, ValuesAndExpressions) {
  const auto c = parse_config_text(
      "# comment\n[atom]\nf_g = 3/2\nf_e = 2.5\ng_g = -0.5  # trailing\n"
      "[field]\nepsilon = -pi/9\nrabi=2\n[sweep]\nepsilons = 0, pi/8, 2*pi/16\n[doppler]\nrule = hermite\n");
  EXPECT_EQ(c.atom.f_g, Spin::from_twice(3));
  EXPECT_EQ(c.atom.f_e, Spin::from_twice(5));
  EXPECT_EQ(c.atom.g_g, -0.5);
  EXPECT_DOUBLE_EQ(c.epsilon, -std::numbers::pi / 9);
  ASSERT_EQ(c.sweep.epsilons.size(), 3u);
  EXPECT_DOUBLE_EQ(c.sweep.epsilons[2], std::numbers::pi / 8);
  EXPECT_EQ(c.doppler.rule, DopplerRule::hermite);
}

TEST(Config, EpsilonOutOfRangeNamesKeyAndLine) {
  const auto msg = error_of("[field]\nrabi = 1\nepsilon = 0.9\n");
  EXPECT_NE(msg.find("test.cfg:3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("field.epsilon"), std::string::npos) << msg;
}

TEST(Config, ForbiddenTransition) {
  const auto msg = error_of("[atom]\nf_g = 2\nf_e = 4\n");
  EXPECT_NE(msg.find("test.cfg:3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("dipole-forbidden"), std::string::npos) << msg;
}

TEST(Config, UnknownKeysAndSections) {
  EXPECT_NE(error_of("[field]\nrabbi = 1\n").find("unknown key 'field.rabbi'"), std::string::npos);
  EXPECT_NE(error_of("[fields]\n").find("unknown section"), std::string::npos);
  EXPECT_NE(error_of("rabi = 1\n").find("before any [section]"), std::string::npos);
}

TEST(Config, MalformedLines) {
  EXPECT_NE(error_of("[field]\nrabi 1\n").find("test.cfg:2"), std::string::npos);
  EXPECT_NE(error_of("[field\n").find("malformed section"), std::string::npos);
  EXPECT_NE(error_of("[field]\nrabi = abc\n").find("not a number"), std::string::npos);
  EXPECT_NE(error_of("[doppler]\nnodes = 1.5\n").find("not an integer"), std::string::npos);
  EXPECT_NE(error_of("[field]\nrabi = 1\nrabi = 2\n").find("duplicate"), std::string::npos);
  EXPECT_NE(error_of("[atom]\nf_g = 3/4\n").find("half-integer"), std::string::npos);
  EXPECT_NE(error_of("[atom]\nbig_gamma = 0\n").find("big_gamma"), std::string::npos);
  EXPECT_NE(error_of("[doppler]\nnodes = 0\n").find("doppler.nodes"), std::string::npos);
  EXPECT_NE(error_of("[scan]\nfine_points = 3\n").find("fine_points"), std::string::npos);
}

TEST(Config, MissingFile) {
  EXPECT_THROW(parse_config("/nonexistent/hanle.cfg"), ConfigError);
}

TEST(Config, OverridesApplyAfterFile) {
  const auto path = std::filesystem::temp_directory_path() / "hanle_override_test.cfg";
  {
    std::ofstream(path) << "[field]\nrabi = 1\n";
  }
  const auto c = parse_config(path.string(), {"field.rabi=3", "doppler.width=0"});
  EXPECT_EQ(c.rabi, 3.0);
  EXPECT_EQ(c.doppler.width, 0.0);
  EXPECT_THROW(parse_config(path.string(), {"field.rabbi=3"}), ConfigError);
  EXPECT_THROW(parse_config(path.string(), {"field.epsilon=1"}), ConfigError);
  EXPECT_THROW(parse_config(path.string(), {"noequals"}), ConfigError);
  std::filesystem::remove(path);
}

TEST(Config, WriteParseRoundTrip) {
  RunConfig c;
  c.atom.f_g = Spin::from_twice(3);
  c.atom.f_e = Spin::from_twice(5);
  c.atom.g_e = 1.0 / 3.0;
  c.epsilon = std::numbers::pi / 9;
  c.rabi = 0.1 + 1e-16;
  c.doppler.rule = DopplerRule::hermite;
  c.doppler.nodes = 77;
  c.scan.annulus_inner = 2.5;
  c.sweep.epsilons = {-0.1, 1.0 / 7.0};
  c.solve.omega_g = 0.123456789012345678;
  c.output.format = OutputFormat::both;
  c.output.prefix = "x";
  EXPECT_EQ(parse_config_text(write_config(c)), c);
  EXPECT_EQ(parse_config_text(write_config(RunConfig{})), RunConfig{});
}

TEST(Output, EmptySweepPlotIsAnError) {
  EllipticitySweep empty;
  const auto stem = std::filesystem::temp_directory_path() / "hanle_empty";
  EXPECT_THROW(emit_plot_data(empty, stem), std::invalid_argument);
  EXPECT_FALSE(std::filesystem::exists(stem.string() + "_amplitude.dat"));
}

TEST(Output, SinglePointCurveGivesOneRow) {
  ResonanceCurve c;
  c.omega_g = {0.0};
  c.signal = {0.25};
  const auto path = std::filesystem::temp_directory_path() / "hanle_one.dat";
  emit_plot_data(c, path);
  std::ifstream in(path);
  std::string line;
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') ++rows;
  EXPECT_EQ(rows, 1);
  std::filesystem::remove(path);
}

TEST(Output, UnwritablePathThrows) {
  ResonanceCurve c;
  c.omega_g = {0.0};
  c.signal = {0.25};
  EXPECT_THROW(emit_plot_data(c, "/nonexistent-dir/x.dat"), std::runtime_error);
}

TEST(Output, UncommittedFileIsRemoved) {
  const auto path = std::filesystem::temp_directory_path() / "hanle_partial.csv";
  {
    AtomicFile f(path);
    f.stream() << "x\n";
    EXPECT_TRUE(std::filesystem::exists(path.string() + ".partial"));
  }
  EXPECT_FALSE(std::filesystem::exists(path.string() + ".partial"));
  EXPECT_FALSE(std::filesystem::exists(path));
}
