// Acceptance checks: one PASS/FAIL line per criterion.

#include <chrono>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "fixtures.hpp"

using namespace mdpn;
using fixtures::load;
using fixtures::st;

namespace {

constexpr double kRaceSeconds = 5.0;
constexpr double kDefUseSeconds = 30.0;
constexpr std::size_t kLanguageNodes = 9;
constexpr std::size_t kSplitsPerFixture = 500;
constexpr std::size_t kScheduleNodes = 10;
constexpr std::size_t kOracleSteps = 12;

struct Outcome {
  bool ok = true;
  std::ostringstream detail;
  void fail(const std::string& why) {
    if (ok) detail << "first failure: " << why << "; ";
    ok = false;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Execution prefix_of(const Execution& e, std::size_t k) {
  return Execution(e.begin(), e.begin() + static_cast<std::ptrdiff_t>(k));
}

std::set<ExecTree> language(const AutomatonPtr& a, std::size_t n) {
  auto v = enumerate_accepted(*a, n);
  return {v.begin(), v.end()};
}

bool top_at(const Configuration& c, const BitSet& s) { return oracle::top_holds(c, s); }

// ---------------------------------------------------------------------------

Outcome race_verdicts() {
  Outcome o;
  double worst = 0;
  for (const auto& c : fixtures::race_cases()) {
    auto d = load(c.model);
    auto q = fixtures::race_query(d, c.read, c.write);
    const auto t0 = std::chrono::steady_clock::now();
    auto r = run_query(q);
    const double secs = seconds_since(t0);
    worst = std::max(worst, secs);
    if (secs >= kRaceSeconds) o.fail(c.model + " took " + std::to_string(secs) + " s");
    const bool expect = c.model == "ex6";
    if (r.nonempty != expect) o.fail(c.model + " verdict");
    if (!r.nonempty) continue;
    try {
      const Configuration end = replay(d, *r.witness, true);
      const std::vector<BitSet> race{fixtures::syms(d, {"a1"}), fixtures::syms(d, {"b1", "b2"})};
      if (!oracle::mhp_holds(end, race)) o.fail("ex6 witness does not end in an x = 23 race");
    } catch (const Error& e) {
      o.fail(std::string("ex6 witness: ") + e.what());
    }
  }
  // Both actual races on ex6 exist, and x = 42 races with nothing.
  auto d = load("ex6");
  auto mhp = [&](const std::vector<std::string>& a, const std::vector<std::string>& b) {
    return run_query({d, {{MhpPatterns{{fixtures::syms(d, a), fixtures::syms(d, b)}}, all_rules(d)}}}).nonempty;
  };
  if (!mhp({"a1"}, {"b1"}) || !mhp({"a1"}, {"b2"})) o.fail("ex6 misses an actual race");
  if (mhp({"c0"}, {"b1", "b2", "a1"})) o.fail("ex6 reports a race on x = 42");
  o.detail << "ex1-ex5 no race, ex6 race with replayable witness; slowest " << worst << " s";
  return o;
}

Outcome defuse_verdicts() {
  Outcome o;
  double worst = 0;
  auto timed = [&](const Query& q, const std::string& what) {
    const auto t0 = std::chrono::steady_clock::now();
    auto r = run_query(q);
    const double secs = seconds_since(t0);
    worst = std::max(worst, secs);
    if (secs >= kDefUseSeconds) o.fail(what + " took " + std::to_string(secs) + " s");
    return r;
  };
  auto staged = [](const MonitorDpn& d, const std::vector<std::vector<std::string>>& tops,
                   const std::vector<std::vector<std::string>>& kills) {
    std::vector<oracle::Stage> stages;
    for (std::size_t i = 0; i < tops.size(); ++i) {
      const BitSet s = fixtures::syms(d, tops[i]);
      stages.push_back({[s](const Configuration& c) { return top_at(c, s); },
                        i == 0 ? all_rules(d) : fixtures::all_but(d, kills[i - 1])});
    }
    return oracle::staged_reachability(d, stages, true);
  };
  for (const auto& c : fixtures::defuse_cases()) {
    auto d = load(c.model);
    auto r = timed(fixtures::defuse_query(d, {c.gen, c.use}, {c.kill}), c.model);
    auto orc = staged(d, {c.gen, c.use}, {c.kill});
    if (r.nonempty) o.fail(c.model + " flow reported feasible");
    if (orc.reachable || orc.truncated) o.fail(c.model + " oracle disagrees or truncated");
  }
  auto d = load("ex4");
  const std::vector<std::pair<std::vector<std::vector<std::string>>, bool>> ex4{
      {{{"a1"}, {"b0"}}, true}, {{{"b1"}, {"a1"}}, true}, {{{"a1"}, {"b1"}, {"a1"}}, false}};
  for (const auto& [tops, expect] : ex4) {
    const std::vector<std::vector<std::string>> kills(tops.size() - 1);
    auto r = timed(fixtures::defuse_query(d, tops, kills), "ex4");
    auto orc = staged(d, tops, kills);
    if (r.nonempty != expect) o.fail("ex4 stage count " + std::to_string(tops.size()));
    if (orc.reachable != expect || orc.truncated) o.fail("ex4 oracle");
    if (r.nonempty) {
      try {
        replay(d, *r.witness, true);
      } catch (const Error& e) {
        o.fail(std::string("ex4 witness: ") + e.what());
      }
    }
  }
  o.detail << "42 never reaches print on ex1-ex6; ex4 single edges feasible, chain empty; slowest " << worst << " s";
  return o;
}

Outcome language_equalities() {
  Outcome o;
  std::size_t compared = 0;
  std::size_t trees = 0;
  for (const char* m : {"toy", "montoy", "spawntoy", "lock2"}) {
    auto d = load(m);
    std::vector<RuleSet> choices{all_rules(d), RuleSet{}, fixtures::all_but(d, {d.rule_name(0)}),
                                 RuleSet::single(0)};
    if (d.num_rules() > 2) choices.push_back(fixtures::all_but(d, {d.rule_name(d.num_rules() - 1)}));
    oracle::Bounds b;
    b.max_steps = kLanguageNodes;
    b.max_threads = kLanguageNodes;
    for (const auto& allowed : choices) {
      for (bool sensitive : {false, true}) {
        std::set<ExecTree> expect;
        for (const auto& [t, e] : oracle::enumerate_trees(d, sensitive, b, &allowed).trees) {
          if (t.size() <= kLanguageNodes) expect.insert(t);
        }
        std::vector<AutomatonPtr> parts{t_m(d), t_delta(d, allowed)};
        if (sensitive) parts.push_back(t_ah(d));
        const auto got = language(product_all(parts), kLanguageNodes);
        ++compared;
        trees += expect.size();
        if (got != expect) o.fail(std::string(m) + (sensitive ? " sensitive" : " insensitive"));
      }
    }
  }
  o.detail << compared << " language pairs equal up to " << kLanguageNodes << " nodes, " << trees << " trees";
  return o;
}

Outcome cut_membership() {
  Outcome o;
  std::mt19937 rng(2024);
  std::size_t samples = 0;
  std::size_t accepted = 0;
  std::size_t unschedulable = 0;
  for (const char* m : {"montoy", "spawntoy", "lock2", "fig1", "fig3l", "ex3", "ex5", "ex6"}) {
    auto d = load(m);
    std::vector<RuleSet> deltas{all_rules(d)};
    for (RuleIndex r = 0; r < d.num_rules(); ++r) deltas.push_back(fixtures::all_but(d, {d.rule_name(r)}));
    // Prefix languages per sensitivity: all reachable trees, without one rule, and with a target.
    std::map<bool, std::vector<AutomatonPtr>> prefixes;
    for (bool s : {true, false}) {
      prefixes[s] = {reachable_trees(d, all_rules(d), s), reachable_trees(d, deltas.back(), s),
                     product(reachable_trees(d, all_rules(d), s), t_top(d, BitSet::single(d.init_stack())))};
    }
    std::map<std::tuple<bool, std::size_t, std::size_t>, AutomatonPtr> pipes;
    auto pipe = [&](bool s, std::size_t a, std::size_t dl) {
      auto key = std::make_tuple(s, a, dl);
      auto it = pipes.find(key);
      if (it == pipes.end()) it = pipes.emplace(key, cut_pipeline(d, prefixes[s][a], deltas[dl], s)).first;
      return it->second;
    };
    for (std::size_t i = 0; i < kSplitsPerFixture; ++i) {
      Configuration c = initial_configuration(d);
      Execution e;
      const std::size_t len = rng() % 10;
      while (e.size() < len) {
        auto en = enabled(d, c, false);
        if (en.empty()) break;
        auto s = en[rng() % en.size()];
        apply_step(d, c, s.tid, s.rule, false);
        e.push_back(s);
      }
      const std::size_t k = rng() % (e.size() + 1);
      const ExecTree cut = cut_tree_of_executions(d, e, std::vector<std::size_t>{k});
      const ExecTree prefix = marked_prefix(cut);
      const std::size_t a = rng() % 3;
      const std::size_t dl = rng() % 2 == 0 ? 0 : rng() % deltas.size();
      bool suffix_ok = true;
      for (std::size_t j = k; j < e.size(); ++j) suffix_ok = suffix_ok && deltas[dl].contains(e[j].rule);
      for (bool s : {true, false}) {
        bool expect = accepts(*prefixes[s][a], prefix) && suffix_ok;
        if (s && expect) {
          const bool sched = oracle::count_suffix_schedules(d, cut, true) > 0;
          if (!sched) ++unschedulable;
          expect = sched;
        }
        const bool got = accepts(*pipe(s, a, dl), cut);
        ++samples;
        if (got != expect) o.fail(std::string(m) + ": " + serialize_tree(d, cut));
        if (got) {
          ++accepted;
          if (!accepts(*erase_unary(pipe(s, a, dl), is_cut_symbol), strip_cuts(cut))) {
            o.fail(std::string(m) + " erasure: " + serialize_tree(d, cut));
          }
        }
      }
    }
  }
  o.detail << samples << " memberships (" << kSplitsPerFixture << " splits x 2 variants per fixture), " << accepted
           << " accepted, " << unschedulable << " rejected only for schedulability";
  return o;
}

Outcome figure_three() {
  Outcome o;
  struct Case {
    std::string model;
    std::vector<std::pair<std::string, std::string>> steps;
    std::size_t split;
    std::function<AutomatonPtr(const MonitorDpn&)> culprit;
  };
  const std::vector<Case> cases{
      {"fig3l", {{"0", "sp"}, {"0", "acq"}, {"0.1", "cu"}, {"0.1", "cr"}}, 2, [](const MonitorDpn& d) { return t_ht(d); }},
      {"lock2",
       {{"0", "s"}, {"0", "ma"}, {"0.1", "cb"}, {"0", "mb"}, {"0", "rb"}, {"0", "ra"}, {"0.1", "ca"}, {"0.1", "rca"},
        {"0.1", "rcb"}},
       3,
       [](const MonitorDpn& d) { return t_rh(d); }}};
  for (const auto& c : cases) {
    auto d = load(c.model);
    Execution e;
    for (const auto& [tid, r] : c.steps) e.push_back(st(d, tid, r));
    const ExecTree cut = cut_tree_of_executions(d, e, std::vector<std::size_t>{c.split});
    auto pipe = cut_pipeline(d, reachable_trees(d, all_rules(d), true), all_rules(d), true);
    auto loose = cut_pipeline(d, reachable_trees(d, all_rules(d), false), all_rules(d), false);
    if (accepts(*pipe, cut)) o.fail(c.model + " accepted by the sensitive pipeline");
    if (accepts(*c.culprit(d), cut)) o.fail(c.model + " not rejected by the expected automaton");
    if (!accepts(*loose, cut)) o.fail(c.model + " rejected even without locks");
    if (oracle::count_suffix_schedules(d, cut, true) != 0) o.fail(c.model + " has a schedule");
    auto reach = oracle::explore(d, true);
    if (reach.truncated) o.fail(c.model + " exploration truncated");
    if (!reach.configs.count(replay(d, prefix_of(e, c.split), false))) o.fail(c.model + " intermediate unreachable");
    if (!reach.configs.count(replay(d, e, false))) o.fail(c.model + " final unreachable");
  }
  o.detail << "final acquisition before foreign use (fig3l) and release cycle (lock2) rejected; both endpoints reachable";
  return o;
}

Outcome scheduler_totality() {
  Outcome o;
  std::size_t plain = 0;
  std::size_t cut = 0;
  for (const char* m : {"montoy", "spawntoy", "lock2", "fig1", "fig3l", "ex1", "ex2", "ex3", "ex4", "ex5", "ex6"}) {
    auto d = load(m);
    if (d.num_locks() > 3) continue;
    auto reach = reachable_trees(d, all_rules(d), true);
    for (const auto& t : enumerate_accepted(*reach, kScheduleNodes)) {
      ++plain;
      try {
        auto [exec, points] = schedule(d, t, true);
        replay(d, exec, true);
        if (!(tree_of_execution(d, exec) == t)) o.fail(std::string(m) + " tree mismatch");
        if (oracle::count_schedules(d, t, true) == 0) o.fail(std::string(m) + " oracle finds no schedule");
      } catch (const Error& e) {
        o.fail(std::string(m) + ": " + e.what() + " on " + serialize_tree(d, t));
      }
    }
    auto pipe = cut_pipeline(d, reach, all_rules(d), true);
    for (const auto& t : enumerate_accepted(*pipe, kScheduleNodes)) {
      ++cut;
      try {
        auto [exec, points] = schedule(d, t, true);
        replay(d, exec, true);
        if (!(tree_of_execution(d, exec) == strip_cuts(t))) o.fail(std::string(m) + " cut tree mismatch");
        if (points.size() != 1 ||
            !(replay(d, prefix_of(exec, points[0]), true) == conf_of_tree(d, strip_cuts(marked_prefix(t))))) {
          o.fail(std::string(m) + " cut configuration missed");
        }
        if (oracle::count_schedules(d, strip_cuts(t), true) == 0 || oracle::count_suffix_schedules(d, t, true) == 0) {
          o.fail(std::string(m) + " oracle finds no schedule for a cut tree");
        }
      } catch (const Error& e) {
        o.fail(std::string(m) + ": " + e.what() + " on " + serialize_tree(d, t));
      }
    }
  }
  o.detail << plain << " trees and " << cut << " cut trees up to " << kScheduleNodes << " nodes scheduled and replayed";
  return o;
}

Outcome optimisation_transparency() {
  Outcome o;
  std::vector<Query> queries;
  for (const auto& c : fixtures::race_cases()) queries.push_back(fixtures::race_query(load(c.model), c.read, c.write));
  for (const auto& c : fixtures::defuse_cases()) {
    queries.push_back(fixtures::defuse_query(load(c.model), {c.gen, c.use}, {c.kill}));
  }
  auto ex4 = load("ex4");
  queries.push_back(fixtures::defuse_query(ex4, {{"a1"}, {"b0"}}, {{}}));
  queries.push_back(fixtures::defuse_query(ex4, {{"b1"}, {"a1"}}, {{}}));
  queries.push_back(fixtures::defuse_query(ex4, {{"a1"}, {"b1"}, {"a1"}}, {{}, {}}));
  auto ex5 = load("ex5");
  queries.push_back(fixtures::race_query(ex5, {"a2"}, {"a1", "b1"}, false));
  std::size_t runs = 0;
  for (const auto& q : queries) {
    const bool base = run_query(q).nonempty;
    for (bool directed : {true, false}) {
      for (bool prune : {true, false}) {
        QueryOptions opt;
        opt.directed = directed;
        opt.prune = prune;
        ++runs;
        if (run_query(q, opt).nonempty != base) o.fail("verdict changed");
      }
    }
  }
  QueryOptions naive;
  naive.directed = false;
  auto race = fixtures::race_query(ex5, {"a2"}, {"a1", "b1"});
  const auto d = run_query(race);
  const auto n = run_query(race, naive);
  if (d.explored > n.explored) o.fail("directed explored more states on ex5");
  o.detail << runs << " option runs agree; ex5 explored directed " << d.explored << " vs naive " << n.explored;
  return o;
}

Outcome commutation() {
  Outcome o;
  struct Instance {
    std::string model;
    std::vector<std::string> tops;
    std::vector<std::string> removed;
  };
  const std::vector<Instance> instances{{"lock2", {"x0"}, {}},        {"lock2", {"u0"}, {"mb"}},
                                        {"ex3", {"b1"}, {"w17"}},     {"ex5", {"a1"}, {}},
                                        {"ex6", {"c1"}, {"w23", "w17"}}, {"fig1", {"S0"}, {"p3"}}};
  std::size_t confs = 0;
  for (const auto& in : instances) {
    auto d = load(in.model);
    const RuleSet allowed = fixtures::all_but(d, in.removed);
    oracle::Bounds b;
    b.max_steps = kOracleSteps;
    b.max_threads = kOracleSteps;
    // Largest tree of the model bounds both languages.
    std::size_t bound = 0;
    auto all = oracle::enumerate_trees(d, true, b);
    if (all.truncated) o.fail(in.model + " tree enumeration truncated");
    for (const auto& [t, e] : all.trees) bound = std::max(bound, t.size());
    bound += 2;
    auto a = product(reachable_trees(d, all_rules(d), true), t_top(d, fixtures::syms(d, in.tops)));
    std::set<Configuration> expect;
    for (const auto& t : enumerate_accepted(*a, bound)) {
      auto r = oracle::explore(d, true, b, &allowed, conf_of_tree(d, t));
      if (r.truncated) o.fail(in.model + " exploration truncated");
      for (const auto& [c, e] : r.configs) expect.insert(c);
    }
    std::set<Configuration> got;
    for (const auto& t : enumerate_accepted(*post_step(d, a, allowed, true), bound)) got.insert(conf_of_tree(d, t));
    confs += expect.size();
    if (got != expect) o.fail(in.model + " configuration sets differ");
  }
  o.detail << instances.size() << " instances, " << confs << " configurations, oracle up to " << kOracleSteps << " steps";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"race verdicts", race_verdicts},
      {"def-use verdicts", defuse_verdicts},
      {"tree languages vs oracle", language_equalities},
      {"cut pipeline membership", cut_membership},
      {"cut-tree rejections", figure_three},
      {"scheduler totality", scheduler_totality},
      {"optimisation transparency", optimisation_transparency},
      {"configuration commutation", commutation}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    std::cout << "criterion " << i + 1 << " " << (o.ok ? "PASS" : "FAIL") << ": " << criteria[i].first << " ("
              << o.detail.str() << "; " << seconds_since(t0) << " s)" << std::endl;
    failed += o.ok ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
