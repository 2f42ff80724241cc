#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "cascade_recon/cascade.hpp"
#include "cascade_recon/cascade_io.hpp"
#include "cascade_recon/dmp.hpp"
#include "cascade_recon/exact_oracle.hpp"
#include "cascade_recon/generators.hpp"
#include "oracles.hpp"

using namespace cascade_recon;

namespace {

const Network& chain3() {
  static const Network net = Network::from_edges(3, {{0, 1}, {1, 2}});
  return net;
}

std::vector<ObservedCascade> observe_all(const std::vector<Cascade>& cs, const MaskSpec& mask) {
  std::vector<ObservedCascade> out;
  for (const auto& c : cs) out.push_back(apply_mask(c, mask));
  return out;
}

}  // namespace

TEST(SimulateCascade, DeterministicChain) {
  const NodeId src = 0;
  const auto c = simulate_cascade(chain3(), Couplings({1.0, 1.0}), {&src, 1}, 5, CounterRng(1));
  EXPECT_EQ(c.tau, (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(c.sources, (std::vector<NodeId>{0}));
}

TEST(SimulateCascade, NoTransmission) {
  const NodeId src = 0;
  const auto c = simulate_cascade(chain3(), Couplings({0.0, 0.0}), {&src, 1}, 5, CounterRng(1));
  EXPECT_EQ(c.tau, (std::vector<int>{0, 5, 5}));
}

TEST(SimulateCascade, Errors) {
  const NodeId bad = 7;
  EXPECT_THROW(simulate_cascade(chain3(), Couplings({1.0, 1.0}), {}, 5, CounterRng(1)), RangeError);
  EXPECT_THROW(simulate_cascade(chain3(), Couplings({1.0, 1.0}), {&bad, 1}, 5, CounterRng(1)), RangeError);
}

TEST(SimulateCascade, SingleEdgeFollowsTruncatedGeometric) {
  const auto net = Network::from_edges(2, {{0, 1}});
  const Couplings alpha({0.5});
  constexpr int T = 10;
  constexpr std::size_t M = 1'000'000;
  const auto data = generate_dataset(net, alpha, M, FixedSources{{0}}, T, 2024);
  std::vector<double> counts(T + 1, 0.0);
  for (const auto& c : data) counts[c.tau[1]] += 1.0;
  EXPECT_EQ(counts[0], 0.0);
  for (int t = 1; t <= T; ++t) {
    const double p = oracle::geometric_mass(0.5, t, T);
    const double se = std::sqrt(p * (1 - p) / M);
    EXPECT_NEAR(counts[t] / M, p, 4 * se) << "t=" << t;
  }
}

TEST(SimulateCascade, LoopyGraphMatchesSubsetChain) {
  std::mt19937_64 rng(11);
  const auto net = gen::random_loopy(6, 3, rng);
  const Couplings alpha(gen::uniform_couplings(net.edge_count(), rng, 0.1, 0.9));
  constexpr int T = 6;
  constexpr std::size_t M = 1'000'000;
  const auto data = generate_dataset(net, alpha, M, FixedSources{{2}}, T, 5);
  const auto ex = exact_marginals_oracle(net, alpha, InitialCondition::from_sources(6, std::vector<NodeId>{2}), T);
  for (NodeId i = 0; i < 6; ++i) {
    std::vector<double> counts(T + 1, 0.0);
    for (const auto& c : data) counts[c.tau[i]] += 1.0;
    for (int t = 1; t <= T; ++t) {
      const double p = t < T ? ex.ps(i, t - 1) - ex.ps(i, t) : ex.ps(i, T - 1);
      const double se = std::sqrt(std::max(p * (1 - p), 1e-12) / M);
      EXPECT_NEAR(counts[t] / M, p, 4 * se + 1e-12) << "node " << i << " t=" << t;
    }
  }
}

TEST(SimulateCascade, RealizableAlways) {
  std::mt19937_64 rng(3);
  const auto net = gen::power_law(15, 2, rng);
  const Couplings alpha(gen::uniform_couplings(net.edge_count(), rng));
  const auto data = generate_dataset(net, alpha, 10'000, RandomSingleSource{}, 8, 17);
  for (const auto& c : data) {
    ASSERT_TRUE(is_realizable(net, c.tau, 8));
    ASSERT_EQ(c.sources.size(), 1u);
    ASSERT_EQ(c.tau[c.sources[0]], 0);
  }
}

TEST(GenerateDataset, SingletonMatchesSubstreamZero) {
  const Couplings alpha({0.4, 0.7});
  const auto one = generate_dataset(chain3(), alpha, 1, FixedSources{{0}}, 6, 99);
  ASSERT_EQ(one.size(), 1u);
  const NodeId src = 0;
  EXPECT_EQ(one[0], simulate_cascade(chain3(), alpha, {&src, 1}, 6, CounterRng(99).substream(0)));
  EXPECT_THROW(generate_dataset(chain3(), alpha, 0, FixedSources{{0}}, 6, 99), RangeError);
}

TEST(GenerateDataset, PaperScaleRandomSources) {
  std::mt19937_64 rng(1);
  const auto net = gen::power_law(20, 2, rng);
  const Couplings alpha(gen::uniform_couplings(net.edge_count(), rng));
  const auto data = generate_dataset(net, alpha, 6400, RandomSingleSource{}, 10, 1);
  ASSERT_EQ(data.size(), 6400u);
  for (const auto& c : data) {
    int zeros = 0;
    for (int t : c.tau) zeros += t == 0;
    ASSERT_EQ(zeros, 1);
  }
}

TEST(GenerateDataset, ThreadCountDoesNotChangeOutput) {
  std::mt19937_64 rng(8);
  const auto net = gen::random_loopy(12, 4, rng);
  const Couplings alpha(gen::uniform_couplings(net.edge_count(), rng));
  const auto a = generate_dataset(net, alpha, 500, RandomSingleSource{}, 7, 42, 1);
  const auto b = generate_dataset(net, alpha, 500, RandomSingleSource{}, 7, 42, 8);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, generate_dataset(net, alpha, 500, RandomSingleSource{}, 7, 42, 3));
}

TEST(ApplyMask, HiddenNodeFullTimes) {
  const Cascade c{5, {0, 1, 2}, {0}};
  const auto obs = apply_mask(c, MaskSpec{{1}, std::nullopt});
  EXPECT_EQ(obs.status, (std::vector<NodeStatus>{Exact{0}, Hidden{}, Exact{2}}));
}

TEST(ApplyMask, Snapshots) {
  const MaskSpec mask{{}, std::vector<int>{2, 4, 6, 8, 10}};
  const Cascade c{11, {0, 3, 11, 10, 1}, {0}};
  const auto obs = apply_mask(c, mask);
  EXPECT_EQ(obs.status[1], NodeStatus(Interval{2, 4}));
  EXPECT_EQ(obs.status[2], NodeStatus{CensoredAtHorizon{}});
  EXPECT_EQ(obs.status[3], NodeStatus(Interval{8, 10}));
  EXPECT_EQ(obs.status[4], NodeStatus(Interval{0, 2}));
}

TEST(ApplyMask, CensoringAndLastSnapshotBeforeHorizon) {
  const Cascade c{5, {0, 5, 4}, {0}};
  EXPECT_EQ(apply_mask(c, MaskSpec{}).status[1], NodeStatus{CensoredAtHorizon{}});
  const auto obs = apply_mask(c, MaskSpec{{}, std::vector<int>{2}});
  EXPECT_EQ(obs.status[1], NodeStatus(Interval{2, 5}));
  EXPECT_EQ(obs.status[2], NodeStatus(Interval{2, 5}));
  EXPECT_THROW(apply_mask(c, MaskSpec{{}, std::vector<int>{3, 2}}), RangeError);
  EXPECT_THROW(apply_mask(c, MaskSpec{{9}, std::nullopt}), RangeError);
}

TEST(ApplyMask, StatusesAreConsistentWithTruth) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto net = gen::random_loopy(9, 2, rng);
    const Couplings alpha(gen::uniform_couplings(net.edge_count(), rng));
    const int T = std::uniform_int_distribution<int>(2, 9)(rng);
    std::vector<int> snaps;
    for (int t = 1; t <= T; ++t)
      if (rng() % 2) snaps.push_back(t);
    const MaskSpec mask{select_hidden(9, trial % 4, trial), snaps};
    for (const auto& c : generate_dataset(net, alpha, 20, RandomSingleSource{}, T, trial)) {
      const auto obs = apply_mask(c, mask);
      for (std::size_t i = 0; i < 9; ++i) {
        ASSERT_TRUE(is_consistent(obs.status[i], c.tau[i], T));
        ASSERT_NO_THROW(validate_status(obs.status[i], T));
      }
    }
  }
}

TEST(SelectHidden, DistinctSortedReproducible) {
  const auto h = select_hidden(20, 5, 3);
  ASSERT_EQ(h.size(), 5u);
  EXPECT_TRUE(std::is_sorted(h.begin(), h.end()));
  EXPECT_EQ(std::adjacent_find(h.begin(), h.end()), h.end());
  EXPECT_EQ(h, select_hidden(20, 5, 3));
  EXPECT_NE(h, select_hidden(20, 5, 4));
  EXPECT_THROW(select_hidden(4, 5, 0), RangeError);
}

TEST(CascadeFile, RoundTripObserved) {
  std::mt19937_64 rng(2);
  const auto net = parse_edge_list("a\tb\nb\tc\nc\ta\na\td\n").network;
  const Couplings alpha(gen::uniform_couplings(net.edge_count(), rng));
  const auto truth = generate_dataset(net, alpha, 200, RandomSingleSource{}, 6, 4);

  const auto text_truth = serialize_cascades(net, truth);
  std::istringstream in(text_truth);
  EXPECT_EQ(parse_cascades(in, net), truth);

  const auto observed = observe_all(truth, MaskSpec{{1}, std::vector<int>{1, 3, 6}});
  const auto text_obs = serialize_observed_cascades(net, observed);
  std::istringstream in2(text_obs);
  const auto back = parse_observed_cascades(in2, net);
  EXPECT_EQ(back.horizon, 6);
  // Hidden sources are dropped from the file, so compare only observable sources.
  for (std::size_t c = 0; c < observed.size(); ++c) {
    ASSERT_EQ(back.cascades[c].status, observed[c].status);
    if (!std::holds_alternative<Hidden>(observed[c].status[observed[c].sources[0]])) {
      ASSERT_EQ(back.cascades[c].sources, observed[c].sources);
    }
  }
}

TEST(CascadeFile, TokensAndErrors) {
  const auto net = parse_edge_list("0\t1\n1\t2\n").network;
  std::istringstream in("T=5\n0\t0:0,1:T+,2:(1,3]\n1\t0:0,2:5+\n");
  const auto ds = parse_observed_cascades(in, net);
  ASSERT_EQ(ds.cascades.size(), 2u);
  EXPECT_EQ(ds.cascades[0].status, (std::vector<NodeStatus>{Exact{0}, CensoredAtHorizon{}, Interval{1, 3}}));
  EXPECT_EQ(ds.cascades[1].status, (std::vector<NodeStatus>{Exact{0}, Hidden{}, CensoredAtHorizon{}}));
  EXPECT_EQ(format_status_token("x", CensoredAtHorizon{}, 5), "x:5+");

  const auto parse = [&](const char* s) {
    std::istringstream is(s);
    return parse_observed_cascades(is, net);
  };
  EXPECT_THROW(parse(""), ParseError);
  EXPECT_THROW(parse("0\t0:0\n"), ParseError);
  EXPECT_THROW(parse("T=5\n0\t9:0\n"), ParseError);
  EXPECT_THROW(parse("T=5\n0\t0:0,0:1\n"), ParseError);
  EXPECT_THROW(parse("T=5\n0\t0:0,1:(3,2]\n"), ParseError);
  EXPECT_THROW(parse("T=5\n0\t0:0,1:7\n"), ParseError);
  EXPECT_THROW(parse("T=5\n0\t0:0,1:4+\n"), ParseError);
  std::istringstream gt("T=5\n0\t0:0,1:(1,3],2:5+\n");
  EXPECT_THROW(parse_cascades(gt, net), ParseError);
}

TEST(MaskSpecFile, LabelsCountsAndSnapshots) {
  const auto net = parse_edge_list("a\tb\nb\tc\nc\td\n").network;
  {
    std::istringstream in("# mask\nhidden=b,d\nsnapshots=all\n");
    const auto m = resolve_mask(parse_mask_spec(in), net);
    EXPECT_EQ(m.hidden, (std::vector<NodeId>{1, 3}));
    EXPECT_FALSE(m.snapshots);
  }
  {
    std::istringstream in("hidden=2\nsnapshots=4,2\nmask_seed=7\n");
    const auto m = resolve_mask(parse_mask_spec(in), net);
    EXPECT_EQ(m.hidden, select_hidden(4, 2, 7));
    EXPECT_EQ(m.snapshots, (std::vector<int>{2, 4}));
  }
  std::istringstream bad("hidden=a\ncolour=red\n");
  EXPECT_THROW(parse_mask_spec(bad), ParseError);
  std::istringstream unknown("hidden=zz\n");
  EXPECT_THROW(resolve_mask(parse_mask_spec(unknown), net), RangeError);
}
