#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "config.hpp"
#include "trajectory_io.hpp"

using namespace kcontact;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("kcontact_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST(Cli, ListModels) {
  auto r = run({"list-models"});
  EXPECT_EQ(r.code, 0);
  for (const auto& id : list_models()) EXPECT_NE(r.out.find(id), std::string::npos) << id;
  EXPECT_EQ(r.out.find("driven_josephson"), std::string::npos);
  EXPECT_NE(run({"list-models", "--candidates"}).out.find("driven_josephson"), std::string::npos);
}

TEST(Cli, DeriveShowsEquationsAndAgreement) {
  auto r = run({"derive", "damped_sg"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("u_t = p_t"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("hyperbolic"), std::string::npos);
  EXPECT_NE(r.out.find("u_tt - c^2 u_xx + sin u + lambda u_t = 0"), std::string::npos);
}

TEST(Cli, DeriveWarnsOnDegenerateHamiltonian) {
  auto dir = scratch("degenerate");
  auto cfg = write_file(dir / "h0.ini", "[model]\nhamiltonian = 0\n");
  auto r = run({"derive", "--config", cfg.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE((r.out + r.err).find("degenerate"), std::string::npos);
}

TEST(Cli, Classify) {
  auto r = run({"classify", "--model", "phi4_3p1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("signature=(1,3,0) type=hyperbolic"), std::string::npos) << r.out;
  auto dir = scratch("classify");
  auto cfg = write_file(dir / "e.ini", "[model]\nhamiltonian = (p_1^2 + p_2^2)/2\nindependents = 1, 2\n");
  auto e = run({"classify", "-c", cfg.string()});
  EXPECT_NE(e.out.find("elliptic"), std::string::npos) << e.out << e.err;
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, cli::kUsage);
  EXPECT_EQ(run({"derive", "no_such_model"}).code, cli::kUsage);
  EXPECT_EQ(run({"derive", "damped_sg", "-p", "nope=1"}).code, cli::kUsage);
  EXPECT_EQ(run({"derive", "damped_sg", "-p", "c"}).code, cli::kUsage);
  EXPECT_EQ(run({"derive", "-c", "/nonexistent/config.ini"}).code, cli::kUsage);
  auto dir = scratch("usage");
  auto bad = write_file(dir / "bad.ini", "[model]\nid = damped_sg\n[grid]\nbogus = 1\n");
  auto r = run({"simulate", "-c", bad.string()});
  EXPECT_EQ(r.code, cli::kUsage);
  EXPECT_NE(r.err.find("bogus"), std::string::npos);
  auto expr = write_file(dir / "expr.ini", "[model]\nhamiltonian = p_t^2 + w\n");
  auto e = run({"derive", "-c", expr.string()});
  EXPECT_EQ(e.code, cli::kUsage);
  EXPECT_NE(e.err.find("w"), std::string::npos);
}

TEST(Cli, SimulateWritesManifest) {
  auto dir = scratch("simulate");
  auto cfg = write_file(dir / "s.ini", "[model]\nid = fisher_kpp\n[grid]\npoints = 32\n[scheme]\nt_end = 0.1\n");
  auto r = run({"simulate", "-c", cfg.string(), "--out", (dir / "run").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto m = cli::read_manifest(dir / "run");
  EXPECT_EQ(m.model, "fisher_kpp");
  EXPECT_EQ(m.command, "simulate");
  EXPECT_FALSE(m.snapshots.empty());
  auto tr = cli::load_trajectory(dir / "run");
  EXPECT_EQ(tr.size(), m.snapshots.size());
  EXPECT_NEAR(tr.snapshots.back().time(), 0.1, 1e-12);
}

TEST(Cli, SimulateRefusesPorousMediumBelowFloor) {
  auto dir = scratch("pme");
  auto cfg = write_file(dir / "p.ini",
                        "[model]\nid = pme_absorption\n[grid]\npoints = 32\n[initial]\nu = 0.5 + 0.5*sin(x)\n");
  auto bad = run({"simulate", "-c", cfg.string()});
  EXPECT_EQ(bad.code, cli::kRuntime);
  EXPECT_NE(bad.err.find("refused"), std::string::npos);
}

TEST(Cli, VerifyZeroTrajectoryOfZeroHamiltonian) {
  auto dir = scratch("zero");
  Trajectory tr;
  auto g = Grid::line(16, 0.0, 1.0);
  for (int s = 0; s < 5; ++s) tr.snapshots.emplace_back(g, std::vector<std::string>{"u", "p_t", "p_x", "z_t", "z_x"}, 0.1 * s);
  cli::Manifest man;
  man.command = "test";
  man.model = "inline";
  man.grid = g;
  cli::save_trajectory(dir / "traj", tr, man);
  auto cfg = write_file(dir / "v.ini", "[model]\nhamiltonian = 0\n[grid]\npoints = 16\nupper = 1\n[verify]\ntrajectory = " +
                                           (dir / "traj").string() + "\n");
  auto r = run({"verify", "-c", cfg.string()});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("verification passed"), std::string::npos);
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST(Cli, VerifyMissingTrajectory) {
  auto dir = scratch("missing");
  auto cfg = write_file(dir / "v.ini", "[model]\nid = damped_wave\n[verify]\ntrajectory = " +
                                           (dir / "nothing_here").string() + "\n");
  auto r = run({"verify", "-c", cfg.string()});
  EXPECT_EQ(r.code, cli::kUsage);
  EXPECT_NE(r.err.find("missing trajectory"), std::string::npos) << r.err;
}

TEST(Cli, VerifyDampedWaveWithWeightedMomentum) {
  auto dir = scratch("verify");
  auto cfg = write_file(dir / "v.ini",
                        "[model]\nid = damped_wave\n[grid]\npoints = 32\n[scheme]\nt_end = 1\n"
                        "[verify]\nweighted_momentum = true\nweighted_lambda = 0.5\n");
  auto r = run({"verify", "-c", cfg.string(), "--refine", "3", "--out", (dir / "out").string()});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_TRUE(fs::exists(dir / "out" / "residuals.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "manifest.json"));
}

TEST(Config, HashIsDeterministicAndIgnoresOutput) {
  auto a = cli::Ini::parse("[model]\nid = damped_sg\n[params]\nc = 2\n[output]\ndir = /tmp/a\n");
  auto b = cli::Ini::parse("# comment\n[model]\nid=damped_sg\n\n[params]\nc=2\n[output]\ndir = /tmp/b\n");
  auto ra = cli::resolve(a, {});
  auto rb = cli::resolve(b, {});
  EXPECT_EQ(ra.hash, rb.hash);
  cli::Overrides ov;
  ov.params["c"] = "3";
  EXPECT_NE(cli::resolve(a, ov).hash, ra.hash);
  EXPECT_EQ(ra.params.at("c"), 2.0);
}

TEST(Config, Numbers) {
  EXPECT_DOUBLE_EQ(cli::parse_number("2*pi"), 2 * M_PI);
  EXPECT_DOUBLE_EQ(cli::parse_number("1e-3"), 1e-3);
  EXPECT_THROW(cli::parse_number("two"), cli::ConfigError);
  EXPECT_EQ(cli::split_list(" a, b ,c"), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_NE(cli::fnv1a("a"), cli::fnv1a("b"));
}
