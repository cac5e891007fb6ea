#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"

using namespace mdpn;
using fixtures::load;
using fixtures::st;

namespace {

Execution random_execution(const MonitorDpn& d, std::mt19937& rng, std::size_t len, bool sensitive = true) {
  Configuration c = initial_configuration(d);
  Execution e;
  while (e.size() < len) {
    auto en = enabled(d, c, sensitive);
    if (en.empty()) break;
    const auto s = en[rng() % en.size()];
    apply_step(d, c, s.tid, s.rule, sensitive);
    e.push_back(s);
  }
  return e;
}

}  // namespace

TEST(Trees, EmptyExecution) {
  auto d = load("toy");
  EXPECT_EQ(serialize_tree(d, tree_of_execution(d, {})), "(NIL q g)");
}

TEST(Trees, BaseStep) {
  auto d = load("toy");
  auto t = tree_of_execution(d, {st(d, "0", "r1")});
  EXPECT_EQ(serialize_tree(d, t), "(BASE r1 (NIL q h))");
  EXPECT_EQ(format_configuration(d, conf_of_tree(d, t)), "{0: q [h]}");
  EXPECT_EQ(t.size(), 2u);
}

TEST(Trees, MonitorUse) {
  auto d = load("montoy");
  auto t = tree_of_execution(d, {st(d, "0", "r1"), st(d, "0", "r2")});
  EXPECT_EQ(serialize_tree(d, t), "(USE r1 a nr (RET r2) (NIL q h))");
  EXPECT_TRUE(held_locks(conf_of_tree(d, t)).empty());
  auto open = tree_of_execution(d, {st(d, "0", "r1")});
  EXPECT_EQ(serialize_tree(d, open), "(ACQ r1 a nr (NIL q g2))");
  EXPECT_EQ(format_configuration(d, conf_of_tree(d, open)), "{0: q [g2@a h]}");
}

TEST(Trees, Spawn) {
  auto d = load("spawntoy");
  auto t = tree_of_execution(d, {st(d, "0", "r1"), st(d, "0.1", "r2")});
  EXPECT_EQ(serialize_tree(d, t), "(SPAWN r1 (BASE r2 (NIL q u)) (NIL q h))");
}

TEST(Trees, CutAtStart) {
  auto d = load("toy");
  auto t = cut_tree_of_split(d, {}, {st(d, "0", "r1")});
  EXPECT_EQ(serialize_tree(d, t), "(CUT q g 1 (BASE r1 (NIL q h)))");
  EXPECT_EQ(serialize_tree(d, marked_prefix(t)), "(NIL q g)");
  EXPECT_THROW(conf_of_tree(d, t), Error);
}

TEST(Trees, CutInsideUse) {
  auto d = load("montoy");
  auto t = cut_tree_of_split(d, {st(d, "0", "r1")}, {st(d, "0", "r2")});
  EXPECT_EQ(serialize_tree(d, t), "(USE r1 a nr (CUT q g2 1 (RET r2)) (NIL q h))");
  EXPECT_EQ(serialize_tree(d, marked_prefix(t)), "(ACQ r1 a nr (NIL q g2))");
}

TEST(Trees, ThreadSpawnedAfterCutHasNoCut) {
  auto d = load("spawntoy");
  auto t = cut_tree_of_split(d, {}, {st(d, "0", "r1")});
  EXPECT_EQ(serialize_tree(d, t), "(CUT q g 1 (SPAWN r1 (NIL q s) (NIL q h)))");
}

TEST(Trees, ParseErrors) {
  auto d = load("montoy");
  EXPECT_THROW(parse_tree(d, "(NIL q"), Error);
  EXPECT_THROW(parse_tree(d, "(BASE r9 (NIL q g))"), Error);
  EXPECT_THROW(parse_tree(d, "(USE r1 a nr (RET r2))"), Error);
  try {
    ExecTree::make(TreeSymbol::nil(0, 0), {tree_of_execution(d, {})});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Arity);
  }
}

TEST(Trees, NotCutWellformed) {
  auto d = load("montoy");
  auto t = parse_tree(d, "(USE r1 a nr (RET r2) (NIL q h))");
  try {
    marked_prefix(t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotCutWellformed);
  }
}

TEST(Trees, CountsMatchFigureOne) {
  auto d = load("fig1");
  Execution e{st(d, "0", "p1"), st(d, "0.1", "q1"), st(d, "0.1", "s1"), st(d, "0", "p2"),
              st(d, "0.1", "s2"), st(d, "0", "p3"), st(d, "0", "r1"),  st(d, "0", "r2")};
  auto t = tree_of_execution(d, e);
  EXPECT_EQ(t.size(), 10u);
  EXPECT_EQ(tree_of_execution(d, canonical_execution(t)), t);
}

// Round trips and prefix laws on random executions with random splits.
TEST(Properties, RandomSplits) {
  std::mt19937 rng(11);
  for (const char* m : {"montoy", "spawntoy", "ex3", "ex5", "ex6", "lock2", "fig1"}) {
    auto d = load(m);
    for (int i = 0; i < 150; ++i) {
      const Execution e = random_execution(d, rng, 1 + rng() % 10);
      const ExecTree t = tree_of_execution(d, e);
      EXPECT_EQ(conf_of_tree(d, t), replay(d, e, true)) << m;
      EXPECT_EQ(parse_tree(d, serialize_tree(d, t)), t);
      EXPECT_EQ(tree_of_execution(d, canonical_execution(t)), t);
      const std::size_t k = rng() % (e.size() + 1);
      const Execution prefix(e.begin(), e.begin() + static_cast<std::ptrdiff_t>(k));
      const ExecTree c = cut_tree_of_executions(d, e, std::vector<std::size_t>{k});
      EXPECT_EQ(strip_cuts(c), t);
      EXPECT_EQ(marked_prefix(c), tree_of_execution(d, prefix));
      EXPECT_EQ(parse_tree(d, serialize_tree(d, c)), c);
      std::size_t cuts = 0;
      for (const auto& [tid, v] : threads_of_tree(c)) cuts += v.cuts.size();
      EXPECT_EQ(cuts, replay(d, prefix, true).threads.size());
    }
  }
}

TEST(Properties, TwoLevelCuts) {
  std::mt19937 rng(5);
  auto d = load("ex6");
  for (int i = 0; i < 200; ++i) {
    const Execution e = random_execution(d, rng, 10);
    std::size_t a = rng() % (e.size() + 1);
    std::size_t b = rng() % (e.size() + 1);
    if (a > b) std::swap(a, b);
    const ExecTree c = cut_tree_of_executions(d, e, {a, b});
    EXPECT_EQ(max_cut_level(c), 2u);
    EXPECT_EQ(strip_cuts(marked_prefix(c, 1)), tree_of_execution(d, Execution(e.begin(), e.begin() + a)));
    EXPECT_EQ(strip_cuts(marked_prefix(c, 2)), tree_of_execution(d, Execution(e.begin(), e.begin() + b)));
  }
}

TEST(MarkedPrefix, SpawnerReturnsBeforeItsCut) {
  auto d = load("ex2");
  auto t = parse_tree(d, "(USE sa a nr (SPAWN start (CUT q t0 1 (NIL q t0)) (BASE print (RET ra))) (CUT q m1 1 (NIL q m1)))");
  EXPECT_EQ(serialize_tree(d, marked_prefix(t)), "(USE sa a nr (SPAWN start (NIL q t0) (BASE print (RET ra))) (NIL q m1))");
}
