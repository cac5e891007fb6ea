#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "fixtures.hpp"

using namespace mdpn;
using fixtures::load;
using fixtures::st;

namespace {

ErrorCode parse_error(const std::string& text) {
  try {
    parse_dpn(text);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error for: " << text;
  return ErrorCode::Io;
}

bool prefix_closed(const Configuration& c) {
  for (const auto& [tid, tc] : c.threads) {
    if (tid.is_root()) continue;
    ThreadId parent = tid;
    const std::uint32_t last = parent.path.back();
    parent.path.pop_back();
    if (!c.threads.count(parent)) return false;
    if (last > 1) {
      ThreadId sibling = parent.child(last - 1);
      if (!c.threads.count(sibling)) return false;
    }
  }
  return true;
}

}  // namespace

TEST(Parse, CountsSymbols) {
  auto d = load("ex3");
  EXPECT_EQ(d.num_rules(), 8u);
  EXPECT_EQ(d.num_locks(), 1u);
  EXPECT_EQ(d.stack_symbols().name(d.init_stack()), "m0");
}

TEST(Parse, RuleShapes) {
  auto d = load("spawntoy");
  const Rule& r = d.rule(d.rule_by_name("r1"));
  EXPECT_EQ(r.kind, RuleKind::Spawn);
  EXPECT_EQ(d.stack_symbols().name(r.spawn_g), "s");
  EXPECT_EQ(d.stack_symbols().name(r.g2), "h");
  auto md = load("montoy");
  const Rule& m = md.rule(0);
  EXPECT_EQ(m.kind, RuleKind::Monitor);
  EXPECT_NE(m.g_ret, kNone);
  EXPECT_NE(m.lock, kNone);
}

TEST(Parse, Errors) {
  EXPECT_EQ(parse_error("rule r1 base q g -> q h\n"), ErrorCode::Syntax);
  EXPECT_EQ(parse_error("init q g\nrule r1 base q g q h\n"), ErrorCode::Syntax);
  EXPECT_EQ(parse_error("init q g\nrule r1 frob q g -> q h\n"), ErrorCode::Syntax);
  EXPECT_EQ(parse_error("init q g\nrule r1 base q g -> q h\nrule r1 base q h -> q g\n"), ErrorCode::DuplicateRule);
  EXPECT_EQ(parse_error("init q g\nrule r1 mon(a) q g -> q h k\n"), ErrorCode::Undeclared);
  EXPECT_EQ(parse_error("lock g\ninit q g\n"), ErrorCode::Disjoint);
}

TEST(Parse, ErrorPosition) {
  try {
    parse_dpn("init q g\nrule r1 base q g -> q h extra\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("at 2:"), std::string::npos) << e.what();
  }
}

TEST(Semantics, Initial) {
  auto d = load("toy");
  auto c = initial_configuration(d);
  EXPECT_EQ(format_configuration(d, c), "{0: q [g]}");
  EXPECT_TRUE(held_locks(c).empty());
  auto e = enabled(d, c, true);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(e[0].rule, d.rule_by_name("r1"));
  EXPECT_EQ(format_configuration(d, step(d, c, ThreadId{}, e[0].rule, true)), "{0: q [h]}");
}

TEST(Semantics, Spawn) {
  auto d = load("spawntoy");
  auto c = step(d, initial_configuration(d), ThreadId{}, d.rule_by_name("r1"), true);
  EXPECT_EQ(format_configuration(d, c), "{0: q [h], 0.1: q [s]}");
  EXPECT_EQ(next_child_index(c, ThreadId{}), 2u);
}

TEST(Semantics, MonitorAcquireRelease) {
  auto d = load("montoy");
  auto c = step(d, initial_configuration(d), ThreadId{}, d.rule_by_name("r1"), true);
  EXPECT_EQ(held_locks(c), LockSet::single(d.lock_by_name("a")));
  c = step(d, c, ThreadId{}, d.rule_by_name("r2"), true);
  EXPECT_TRUE(held_locks(c).empty());
  EXPECT_EQ(c.threads.at(ThreadId{}).stack.size(), 1u);
}

TEST(Semantics, LockBlocksOtherThread) {
  auto d = load("ex3");
  Execution e{st(d, "0", "start"), st(d, "0", "sa")};
  auto c = replay(d, e, true);
  EXPECT_FALSE(can_step(d, c, ThreadId::parse("0.1"), d.rule_by_name("ta"), true));
  EXPECT_TRUE(can_step(d, c, ThreadId::parse("0.1"), d.rule_by_name("ta"), false));
  EXPECT_THROW(apply_step(d, c, ThreadId::parse("0.1"), d.rule_by_name("ta"), true), Error);
}

TEST(Semantics, Reentrant) {
  auto d = parse_dpn("lock a\ninit q g\nrule r1 mon(a) q g -> q h g\nrule r2 mon(a) q h -> q k h\n");
  auto c = replay(d, {{ThreadId{}, 0}, {ThreadId{}, 1}}, true);
  EXPECT_EQ(c.threads.at(ThreadId{}).stack.size(), 3u);
}

TEST(Semantics, ReplayFailure) {
  auto d = load("toy");
  try {
    replay(d, {{ThreadId{}, 0}, {ThreadId{}, 0}}, true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Replay);
  }
}

TEST(Semantics, ExecutionRoundTrip) {
  auto d = load("ex6");
  Execution e{st(d, "0", "start"), st(d, "0.1", "tb"), st(d, "0.1", "else"), st(d, "0", "sa")};
  std::istringstream in(format_execution(d, e));
  EXPECT_EQ(parse_execution(d, in), e);
}

TEST(ThreadIds, ParsePrint) {
  EXPECT_EQ(ThreadId::parse("0.2.1").str(), "0.2.1");
  EXPECT_TRUE(ThreadId::parse("0").is_root());
  EXPECT_THROW(ThreadId::parse("1.2"), Error);
  EXPECT_THROW(ThreadId::parse("0..1"), Error);
}

TEST(NoEmptyStack, Fixtures) {
  for (const char* m : {"toy", "spawntoy", "ex1", "ex2", "ex3", "ex4", "ex5", "ex6", "lock2", "fig1", "fig3l"}) {
    EXPECT_TRUE(check_no_empty_stack(load(m)).empty()) << m;
  }
}

TEST(NoEmptyStack, ReturningInit) {
  auto d = parse_dpn("init q g\nrule r1 call q g -> q h k\nrule r2 ret q h -> q\nrule r3 ret q k -> p\n");
  auto bad = check_no_empty_stack(d);
  ASSERT_EQ(bad.size(), 1u);
  EXPECT_EQ(d.controls().name(bad[0].first), "q");
  EXPECT_EQ(d.stack_symbols().name(bad[0].second), "g");
}

TEST(NoEmptyStack, ReturningSpawnedThread) {
  auto d = parse_dpn("init q g\nrule r1 spawn q g -> [q s] q h\nrule r2 ret q s -> q\n");
  auto bad = check_no_empty_stack(d);
  ASSERT_EQ(bad.size(), 1u);
  EXPECT_EQ(d.stack_symbols().name(bad[0].second), "s");
}

// Random walks: sensitive steps are insensitive steps, thread ids stay
// prefix-closed and stacks of the fixtures never empty.
TEST(Properties, RandomWalks) {
  std::mt19937 rng(7);
  int checked = 0;
  for (const char* m : {"ex2", "ex5", "ex6", "lock2", "fig1"}) {
    auto d = load(m);
    for (int walk = 0; walk < 200; ++walk) {
      Configuration c = initial_configuration(d);
      Execution e;
      for (int k = 0; k < 10; ++k) {
        auto ins = enabled(d, c, false);
        auto sens = enabled(d, c, true);
        for (const auto& s : sens) {
          EXPECT_NE(std::find(ins.begin(), ins.end(), s), ins.end());
        }
        ++checked;
        if (sens.empty()) break;
        const auto s = sens[rng() % sens.size()];
        apply_step(d, c, s.tid, s.rule, true);
        e.push_back(s);
        EXPECT_TRUE(prefix_closed(c));
        for (const auto& [tid, tc] : c.threads) EXPECT_FALSE(tc.stack.empty());
      }
      EXPECT_EQ(replay(d, e, true), c);
    }
  }
  EXPECT_GE(checked, 1000);
}
