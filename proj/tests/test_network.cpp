#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <string>

#include "cascade_recon/generators.hpp"
#include "cascade_recon/network.hpp"

using namespace cascade_recon;

TEST(ParseEdgeList, SmallestChain) {
  const auto el = parse_edge_list("0\t1\n1\t2\n");
  const auto& net = el.network;
  EXPECT_EQ(net.node_count(), 3u);
  EXPECT_EQ(net.edge_count(), 2u);
  EXPECT_EQ(net.edge_id(0, 1), EdgeId{0});
  EXPECT_EQ(net.edge_id(1, 2), EdgeId{1});
  EXPECT_FALSE(net.edge_id(0, 2).has_value());
  EXPECT_FALSE(el.couplings.has_value());
}

TEST(ParseEdgeList, CommentsBlankLinesAndCouplings) {
  const auto el = parse_edge_list("# header\n\nb\ta\t0.25\n  \na\tc\t1\n");
  ASSERT_TRUE(el.couplings);
  const auto& net = el.network;
  const auto a = *net.find_node("a"), b = *net.find_node("b"), c = *net.find_node("c");
  EXPECT_EQ((*el.couplings)[*net.edge_id(b, a)], 0.25);
  EXPECT_EQ((*el.couplings)[*net.edge_id(a, c)], 1.0);
}

TEST(ParseEdgeList, Errors) {
  EXPECT_THROW(parse_edge_list(""), ParseError);
  EXPECT_THROW(parse_edge_list("# only a comment\n\n"), ParseError);
  try {
    parse_edge_list("0\t1\n1\t2\n0\t1\n");
    FAIL() << "duplicate edge accepted";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_edge_list("0\t0\n"), ParseError);
  EXPECT_THROW(parse_edge_list("0\t1\t1.5\n"), RangeError);
  EXPECT_THROW(parse_edge_list("0\t1\t-0.1\n"), RangeError);
  EXPECT_THROW(parse_edge_list("0\t1\t0.5\n1\t2\n"), ParseError);
  EXPECT_THROW(parse_edge_list("0\t1\t0,5\n"), ParseError);
  EXPECT_THROW(parse_edge_list("0\t1\t0.5\textra\n"), ParseError);
}

TEST(ParseEdgeList, BundledHubNetwork) {
  std::ifstream in(CASCADE_RECON_DATA_DIR "/us_hubs_30.tsv");
  ASSERT_TRUE(in);
  const auto el = parse_edge_list(in);
  EXPECT_EQ(el.network.node_count(), 30u);
  EXPECT_EQ(el.network.edge_count(), 210u);
  ASSERT_TRUE(el.couplings);
  const auto v = el.couplings->values();
  EXPECT_DOUBLE_EQ(*std::max_element(v.begin(), v.end()), 0.5);
  EXPECT_GE(*std::min_element(v.begin(), v.end()), 0.05);
}

TEST(Neighbors, Examples) {
  const auto chain = parse_edge_list("0\t1\n1\t2\n").network;
  EXPECT_EQ(neighbors(chain, 1, Direction::in), (std::vector<NodeId>{0}));
  EXPECT_TRUE(neighbors(chain, 0, Direction::in).empty());
  EXPECT_EQ(neighbors(chain, 1, Direction::out), (std::vector<NodeId>{2}));
  const auto pair = parse_edge_list("0\t1\n1\t0\n").network;
  EXPECT_EQ(neighbors(pair, 0, Direction::in), (std::vector<NodeId>{1}));
  EXPECT_THROW(neighbors(chain, 3, Direction::in), RangeError);
}

TEST(LabelOrder, NumericLabelsSortNumericallyBeforeText) {
  const auto net = parse_edge_list("10\t2\nx\t10\n2\tb\n").network;
  EXPECT_EQ(net.labels(), (std::vector<std::string>{"2", "10", "b", "x"}));
}

namespace {

std::string random_edge_list(std::mt19937_64& rng, bool with_alpha) {
  std::uniform_int_distribution<int> n_dist(2, 15);
  const int n = n_dist(rng);
  std::vector<std::string> labels;
  for (int i = 0; i < n; ++i) labels.push_back(i % 3 == 0 ? "n" + std::to_string(i * 7) : std::to_string(i * 13));
  std::set<std::pair<int, int>> pairs;
  std::uniform_int_distribution<int> node(0, n - 1);
  const int m = std::uniform_int_distribution<int>(1, n * 2)(rng);
  for (int k = 0; k < m; ++k) {
    const int a = node(rng), b = node(rng);
    if (a != b) pairs.emplace(a, b);
  }
  if (pairs.empty()) pairs.emplace(0, 1);
  std::vector<std::pair<int, int>> shuffled(pairs.begin(), pairs.end());
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  std::string out;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto [a, b] : shuffled) {
    out += labels[a] + "\t" + labels[b];
    if (with_alpha) out += "\t" + text::format_double(u(rng));
    out += "\n";
  }
  return out;
}

}  // namespace

TEST(NetworkProperties, RoundTripAndIndexing) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const bool with_alpha = trial % 2 == 0;
    const auto first = parse_edge_list(random_edge_list(rng, with_alpha));
    const auto& net = first.network;
    const auto text_out = serialize_edge_list(net, first.couplings ? &*first.couplings : nullptr);
    const auto second = parse_edge_list(text_out);
    ASSERT_EQ(second.network, net);
    ASSERT_EQ(second.couplings, first.couplings);

    for (EdgeId e = 0; e < net.edge_count(); ++e) {
      const auto& edge = net.edge(e);
      ASSERT_EQ(net.edge_id(edge.src, edge.dst), e);
      if (e > 0) {
        ASSERT_LT(net.edge(e - 1), edge);
      }
    }
    std::size_t in_total = 0, out_total = 0;
    for (NodeId i = 0; i < net.node_count(); ++i) {
      for (NodeId k : net.neighbors(i, Direction::in)) ASSERT_TRUE(net.edge_id(k, i));
      for (NodeId j : net.neighbors(i, Direction::out)) ASSERT_TRUE(net.edge_id(i, j));
      const auto in = net.neighbors(i, Direction::in);
      ASSERT_TRUE(std::is_sorted(in.begin(), in.end()));
      in_total += in.size();
      out_total += net.out_edges(i).size();
    }
    ASSERT_EQ(in_total, net.edge_count());
    ASSERT_EQ(out_total, net.edge_count());
  }
}

TEST(Generators, ShapesAreAsAdvertised) {
  std::mt19937_64 rng(3);
  const auto tree = gen::random_tree(12, rng);
  EXPECT_EQ(tree.edge_count(), 22u);
  const auto loopy = gen::random_loopy(10, 3, rng);
  EXPECT_EQ(loopy.edge_count(), 24u);
  const auto pl = gen::power_law(20, 2, rng);
  EXPECT_EQ(pl.node_count(), 20u);
  EXPECT_EQ(pl.edge_count(), 2u * (3 + 17 * 2));
}
