#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cascade_recon/cli.hpp"
#include "oracles.hpp"

using namespace cascade_recon;
namespace fs = std::filesystem;

namespace {

const std::string kHubs = CASCADE_RECON_DATA_DIR "/us_hubs_30.tsv";

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_command(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& body) { std::ofstream(p, std::ios::binary) << body; }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("cascade_recon_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }

  fs::path dir;
};

}  // namespace

TEST_F(CliTest, SimulateIsReproducible) {
  const std::vector<std::string> args = {"simulate", "--network", kHubs, "--num-cascades", "6400", "--horizon", "10",
                                         "--seed", "5"};
  auto a = args, b = args;
  a.insert(a.end(), {"--out", path("a.txt")});
  b.insert(b.end(), {"--out", path("b.txt")});
  ASSERT_EQ(run(a).code, 0);
  ASSERT_EQ(run(b).code, 0);
  EXPECT_EQ(slurp(path("a.txt")), slurp(path("b.txt")));

  const auto net = parse_edge_list(slurp(kHubs)).network;
  std::istringstream in(slurp(path("a.txt")));
  const auto cascades = parse_cascades(in, net);
  EXPECT_EQ(cascades.size(), 6400u);
  EXPECT_EQ(cascades.front().horizon, 10);
}

TEST_F(CliTest, EvalOfTruthIsZero) {
  const auto r = run({"eval", "--network", kHubs, "--truth", kHubs, "--out", path("scatter.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("normalized_l1_error 0.0\n"), std::string::npos) << r.out;
  const auto csv = slurp(path("scatter.csv"));
  EXPECT_EQ(csv.rfind("src,dst,alpha_true,alpha_est\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 211);
}

TEST_F(CliTest, PipelineArtifactsRoundTripAndIgnoreThreadCount) {
  write(path("net.tsv"), "a\tb\t0.6\nb\tc\t0.4\nc\ta\t0.3\na\td\t0.7\nd\te\t0.5\ne\tb\t0.2\nb\ta\t0.35\n");
  write(path("mask.txt"), "hidden=1\nsnapshots=2,4,6\nmask_seed=3\n");
  for (const char* threads : {"1", "8"}) {
    const std::string t = threads;
    ASSERT_EQ(run({"simulate", "--network", path("net.tsv"), "--num-cascades", "400", "--horizon", "6", "--seed", "2",
                   "--mask", path("mask.txt"), "--threads", t, "--deterministic", "--out", path("truth" + t)})
                  .code,
              0);
    ASSERT_EQ(run({"mask", "--network", path("net.tsv"), "--cascades", path("truth" + t), "--mask", path("mask.txt"),
                   "--out", path("obs" + t)})
                  .code,
              0);
    for (const char* method : {"dmprec", "hts"}) {
      const auto r = run({"fit", "--network", path("net.tsv"), "--cascades", path("obs" + t), "--method", method,
                          "--samples", "40", "--outer-rounds", "3", "--threads", t, "--deterministic", "--out",
                          path(std::string(method) + t), "--diagnostics", path(std::string(method) + "diag" + t)});
      ASSERT_EQ(r.code, 0) << r.err;
    }
    ASSERT_EQ(run({"eval", "--network", path("net.tsv"), "--couplings", path("dmprec" + t), "--truth", path("net.tsv"),
                   "--mask", path("mask.txt"), "--out", path("scatter" + t)})
                  .code,
              0);
  }
  for (const char* name : {"truth", "obs", "dmprec", "hts", "dmprecdiag", "htsdiag", "scatter"})
    EXPECT_EQ(slurp(path(std::string(name) + "1")), slurp(path(std::string(name) + "8"))) << name;

  // Every artifact parses back.
  const auto net = parse_edge_list(slurp(path("net.tsv"))).network;
  std::istringstream obs(slurp(path("obs1")));
  const auto observed = parse_observed_cascades(obs, net);
  EXPECT_EQ(observed.cascades.size(), 400u);
  EXPECT_EQ(serialize_observed_cascades(net, observed.cascades), slurp(path("obs1")));
  const auto fitted = parse_edge_list(slurp(path("dmprec1")));
  ASSERT_TRUE(fitted.couplings);
  EXPECT_EQ(serialize_edge_list(fitted.network, &*fitted.couplings), slurp(path("dmprec1")));
  const auto diag = slurp(path("dmprecdiag1"));
  EXPECT_EQ(diag.rfind("iter,free_energy,step_size,grad_inf_norm\n", 0), 0u);

  // The hidden node is never a source.
  const auto hidden = net.label(select_hidden(5, 1, 3)[0]);
  std::istringstream gt(slurp(path("truth1")));
  for (const auto& c : parse_cascades(gt, net)) EXPECT_NE(net.label(c.sources[0]), hidden);
}

TEST_F(CliTest, MarginalsAndOracleAgreeOnTree) {
  write(path("tree.tsv"), "0\t1\t0.5\n0\t2\t0.25\n2\t3\t0.9\n");
  const auto m = run({"marginals", "--network", path("tree.tsv"), "--sources", "0", "--horizon", "3"});
  const auto o = run({"oracle", "--network", path("tree.tsv"), "--sources", "0", "--horizon", "3"});
  ASSERT_EQ(m.code, 0) << m.err;
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(m.out.rfind("node,time,P_S,m\n", 0), 0u);
  EXPECT_NE(m.out.find("\n1,2,0.25,0.25\n"), std::string::npos) << m.out;
  EXPECT_EQ(o.out.rfind("node,time,P_S\n", 0), 0u);
  EXPECT_NE(o.out.find("\n1,2,0.25\n"), std::string::npos);
  EXPECT_EQ(std::count(m.out.begin(), m.out.end(), '\n'), 1 + 4 * 4);
}

TEST_F(CliTest, GradcheckPasses) {
  write(path("net.tsv"), "0\t1\t0.6\n1\t2\t0.4\n2\t0\t0.3\n0\t3\t0.7\n3\t2\t0.5\n");
  const auto r = run({"gradcheck", "--network", path("net.tsv"), "--num-cascades", "60", "--horizon", "6",
                      "--hidden", "3", "--snapshots", "2,3,6"});
  ASSERT_EQ(r.code, 0) << r.err << r.out;
  EXPECT_EQ(r.out.rfind("edge,analytic,numeric,rel_error\n", 0), 0u);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 6);
}

TEST_F(CliTest, ConfigFileAndOverrides) {
  write(path("run.cfg"), "# defaults\nnetwork = " + kHubs + "\nnum_cascades = 3\nhorizon = 4\nseed = 1\n");
  const auto from_file = run({"simulate", "--config", path("run.cfg")});
  ASSERT_EQ(from_file.code, 0) << from_file.err;
  EXPECT_EQ(from_file.out.rfind("T=4\n", 0), 0u);
  EXPECT_EQ(std::count(from_file.out.begin(), from_file.out.end(), '\n'), 4);

  const auto overridden = run({"simulate", "--config", path("run.cfg"), "--horizon", "7"});
  ASSERT_EQ(overridden.code, 0);
  EXPECT_EQ(overridden.out.rfind("T=7\n", 0), 0u);

  write(path("bad.cfg"), "network = x\nflavour = mint\n");
  const auto bad = run({"simulate", "--config", path("bad.cfg")});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("flavour"), std::string::npos);
}

TEST_F(CliTest, ThreadsFromEnvironment) {
  ::setenv("CASCADE_RECON_THREADS", "3", 1);
  const auto ok = run({"simulate", "--network", kHubs, "--num-cascades", "10"});
  ::setenv("CASCADE_RECON_THREADS", "many", 1);
  const auto bad = run({"simulate", "--network", kHubs, "--num-cascades", "10"});
  ::unsetenv("CASCADE_RECON_THREADS");
  const auto plain = run({"simulate", "--network", kHubs, "--num-cascades", "10"});
  EXPECT_EQ(ok.code, 0);
  EXPECT_EQ(ok.out, plain.out);
  EXPECT_EQ(bad.code, 2);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"simulate", "--bogus"}).code, 2);
  EXPECT_EQ(run({"simulate"}).code, 2);
  EXPECT_EQ(run({"fit", "--network", kHubs, "--cascades", "x", "--method", "magic"}).code, 2);
  EXPECT_EQ(run({"marginals", "--network", kHubs, "--horizon", "3"}).code, 2);

  const auto missing = run({"simulate", "--network", path("nope.tsv")});
  EXPECT_EQ(missing.code, 1);
  EXPECT_EQ(std::count(missing.err.begin(), missing.err.end(), '\n'), 1);

  write(path("dup.tsv"), "0\t1\n0\t1\n");
  EXPECT_EQ(run({"simulate", "--network", path("dup.tsv"), "--couplings", kHubs}).code, 1);
  write(path("big.tsv"), [] {
    std::string s;
    for (int i = 1; i <= 21; ++i) s += "0\t" + std::to_string(i) + "\t0.5\n";
    return s;
  }());
  EXPECT_EQ(run({"oracle", "--network", path("big.tsv"), "--sources", "0", "--horizon", "2"}).code, 1);
  EXPECT_EQ(run({"simulate", "--network", kHubs, "--sources", "XXX"}).code, 1);
  EXPECT_EQ(run({"simulate", "--network", kHubs, "--horizon", "0"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(CliTest, HubNetworkFitShowsPositiveBias) {
  const std::string net = kHubs;
  ASSERT_EQ(run({"simulate", "--network", net, "--num-cascades", "10000", "--horizon", "10", "--seed", "1",
                 "--hidden", "15", "--mask-seed", "1", "--out", path("truth")})
                .code,
            0);
  ASSERT_EQ(run({"mask", "--network", net, "--cascades", path("truth"), "--hidden", "15", "--mask-seed", "1",
                 "--out", path("obs")})
                .code,
            0);
  const auto fit = run({"fit", "--network", net, "--cascades", path("obs"), "--method", "dmprec", "--out",
                        path("est")});
  ASSERT_EQ(fit.code, 0) << fit.err;
  const auto ev = run({"eval", "--network", net, "--couplings", path("est"), "--truth", net, "--hidden", "15",
                       "--mask-seed", "1", "--out", path("scatter.csv")});
  ASSERT_EQ(ev.code, 0) << ev.err;

  std::vector<double> truth, est;
  std::istringstream csv(slurp(path("scatter.csv")));
  std::string line;
  std::getline(csv, line);
  double residual = 0.0;
  while (std::getline(csv, line)) {
    const auto f = text::split(line, ',');
    truth.push_back(*text::parse_double(f[2]));
    est.push_back(*text::parse_double(f[3]));
    residual += est.back() - truth.back();
  }
  ASSERT_FALSE(truth.empty());
  // Edges between two hidden airports are barely constrained, so only ask for a
  // correlation that is significant at the 1% level for 210 pairs.
  EXPECT_GT(oracle::pearson(truth, est), 0.18);
  EXPECT_GT(residual / truth.size(), 0.0);
  EXPECT_NE(ev.out.find("mean_residual "), std::string::npos);
}
