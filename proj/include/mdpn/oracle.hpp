#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <utility>
#include <vector>

#include "mdpn/bitset.hpp"
#include "mdpn/dpn.hpp"
#include "mdpn/exec_tree.hpp"
#include "mdpn/semantics.hpp"

namespace mdpn::oracle {

struct Bounds {
  std::size_t max_steps = 12;
  std::size_t max_configs = 100000;
  std::size_t max_threads = 4;
};

struct ExploreResult {
  /// Reached configurations with one representative execution each.
  std::map<Configuration, Execution> configs;
  bool truncated = false;
};

namespace detail {

inline bool allowed_step(const MonitorDpn& dpn, const Configuration& c, const ExecStep& s, const RuleSet* allowed,
                         const Bounds& b, bool& truncated) {
  if (allowed && !allowed->contains(s.rule)) return false;
  if (dpn.rule(s.rule).kind == RuleKind::Spawn && c.threads.size() >= b.max_threads) {
    truncated = true;
    return false;
  }
  return true;
}

}  // namespace detail

/// Breadth-first exploration from `start` (default: the initial configuration),
/// optionally restricted to the rules in `allowed`.
inline ExploreResult explore(const MonitorDpn& dpn, bool sensitive, const Bounds& b = {},
                             const RuleSet* allowed = nullptr, std::optional<Configuration> start = std::nullopt) {
  ExploreResult res;
  const Configuration init = start ? *start : initial_configuration(dpn);
  res.configs.emplace(init, Execution{});
  std::vector<Configuration> frontier{init};
  for (std::size_t depth = 0; depth < b.max_steps && !frontier.empty(); ++depth) {
    std::vector<Configuration> next;
    for (const auto& c : frontier) {
      const Execution& path = res.configs.at(c);
      for (const auto& s : enabled(dpn, c, sensitive)) {
        if (!detail::allowed_step(dpn, c, s, allowed, b, res.truncated)) continue;
        Configuration n = step(dpn, c, s.tid, s.rule, sensitive);
        if (res.configs.count(n)) continue;
        if (res.configs.size() >= b.max_configs) {
          res.truncated = true;
          return res;
        }
        Execution p = path;
        p.push_back(s);
        res.configs.emplace(n, std::move(p));
        next.push_back(std::move(n));
      }
    }
    frontier = std::move(next);
  }
  for (const auto& c : frontier) {
    for (const auto& s : enabled(dpn, c, sensitive)) {
      if (!allowed || allowed->contains(s.rule)) {
        res.truncated = true;
        break;
      }
    }
    if (res.truncated) break;
  }
  return res;
}

struct TreeEnumeration {
  /// Distinct execution trees with a representative execution each.
  std::map<ExecTree, Execution> trees;
  bool truncated = false;
};

/// Trees of all executions within the bounds. Search is over trees rather than
/// executions: the tree fixes the configuration, so extensions depend only on it.
inline TreeEnumeration enumerate_trees(const MonitorDpn& dpn, bool sensitive, const Bounds& b = {},
                                       const RuleSet* allowed = nullptr) {
  TreeEnumeration res;
  struct Item {
    Execution exec;
    Configuration conf;
  };
  std::vector<Item> frontier{{{}, initial_configuration(dpn)}};
  res.trees.emplace(tree_of_execution(dpn, {}), Execution{});
  for (std::size_t depth = 0; depth < b.max_steps && !frontier.empty(); ++depth) {
    std::vector<Item> next;
    for (const auto& it : frontier) {
      for (const auto& s : enabled(dpn, it.conf, sensitive)) {
        if (!detail::allowed_step(dpn, it.conf, s, allowed, b, res.truncated)) continue;
        Execution e = it.exec;
        e.push_back(s);
        ExecTree t = tree_of_execution(dpn, e);
        if (res.trees.count(t)) continue;
        if (res.trees.size() >= b.max_configs) {
          res.truncated = true;
          return res;
        }
        res.trees.emplace(t, e);
        next.push_back({std::move(e), step(dpn, it.conf, s.tid, s.rule, sensitive)});
      }
    }
    frontier = std::move(next);
  }
  for (const auto& it : frontier) {
    for (const auto& s : enabled(dpn, it.conf, sensitive)) {
      if (!allowed || allowed->contains(s.rule)) res.truncated = true;
    }
  }
  return res;
}

/// Counts interleavings of the per-thread step sequences of `t` from the given
/// per-thread start positions and configuration. Threads absent from `start`
/// appear when spawned.
inline std::uint64_t count_schedules_from(const MonitorDpn& dpn, const std::map<ThreadId, ThreadView>& threads,
                                          const std::map<ThreadId, std::size_t>& start_pos, const Configuration& start,
                                          bool sensitive) {
  std::vector<ThreadId> ids;
  std::vector<const ThreadView*> views;
  for (const auto& [tid, v] : threads) {
    ids.push_back(tid);
    views.push_back(&v);
  }
  std::vector<std::size_t> pos(ids.size(), 0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto it = start_pos.find(ids[i]);
    if (it != start_pos.end()) pos[i] = it->second;
  }
  std::map<std::vector<std::size_t>, std::uint64_t> memo;
  std::function<std::uint64_t(const Configuration&)> go = [&](const Configuration& c) -> std::uint64_t {
    auto m = memo.find(pos);
    if (m != memo.end()) return m->second;
    std::uint64_t total = 0;
    bool done = true;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (pos[i] >= views[i]->steps.size()) continue;
      done = false;
      if (!c.threads.count(ids[i])) continue;
      const ThreadStep& st = views[i]->steps[pos[i]];
      if (!can_step(dpn, c, ids[i], st.rule, sensitive)) continue;
      Configuration n = step(dpn, c, ids[i], st.rule, false);
      if (st.tag == Tag::Spawn && !n.threads.count(st.child)) continue;
      ++pos[i];
      total += go(n);
      --pos[i];
    }
    if (done) total = 1;
    memo.emplace(pos, total);
    return total;
  };
  return go(start);
}

/// Number of executions whose tree is `t` (cut-free).
inline std::uint64_t count_schedules(const MonitorDpn& dpn, const ExecTree& t, bool sensitive) {
  if (has_cut(t)) throw Error(ErrorCode::HasCut, "count_schedules expects a cut-free tree");
  try {
    conf_of_tree(dpn, t);
    if (!(tree_of_execution(dpn, canonical_execution(t)) == t)) return 0;
  } catch (const Error&) {
    return 0;
  }
  return count_schedules_from(dpn, threads_of_tree(t), {}, initial_configuration(dpn), sensitive);
}

/// Schedules of the part of `t` after its level-`level` cuts, starting from the
/// configuration those cuts mark.
inline std::uint64_t count_suffix_schedules(const MonitorDpn& dpn, const ExecTree& t, bool sensitive,
                                            std::uint32_t level = 1) {
  const ExecTree prefix = strip_cuts(marked_prefix(t, level));
  Configuration start;
  try {
    start = conf_of_tree(dpn, prefix);
  } catch (const Error&) {
    return 0;
  }
  auto threads = threads_of_tree(t);
  std::map<ThreadId, std::size_t> pos;
  for (const auto& [tid, v] : threads) {
    auto it = v.cuts.find(level);
    if (it != v.cuts.end()) pos[tid] = it->second;
  }
  return count_schedules_from(dpn, threads, pos, start, sensitive);
}

// ---------------------------------------------------------------------------
// Staged reachability on configurations

using ConfPredicate = std::function<bool(const Configuration&)>;

struct Stage {
  ConfPredicate target;
  RuleSet allowed;
};

struct StagedResult {
  bool reachable = false;
  bool truncated = false;
  Execution witness;
  /// Prefix lengths at which each stage's target held.
  std::vector<std::size_t> stage_points;
};

/// Whether some execution visits targets 1..n in order, using stage i's rules
/// between target i-1 and target i.
inline StagedResult staged_reachability(const MonitorDpn& dpn, const std::vector<Stage>& stages, bool sensitive,
                                        const Bounds& b = {}) {
  StagedResult res;
  if (stages.empty()) return res;
  struct Node {
    Configuration conf;
    std::size_t stage;
    bool operator<(const Node& o) const { return std::tie(stage, conf) < std::tie(o.stage, o.conf); }
  };
  struct Info {
    Execution exec;
    std::vector<std::size_t> points;
  };
  std::map<Node, Info> seen;
  std::deque<Node> queue;
  auto push = [&](Node n, Info info) {
    if (seen.count(n)) return;
    if (seen.size() >= b.max_configs) {
      res.truncated = true;
      return;
    }
    seen.emplace(n, std::move(info));
    queue.push_back(std::move(n));
  };
  push({initial_configuration(dpn), 0}, {});
  while (!queue.empty()) {
    Node n = queue.front();
    queue.pop_front();
    const Info info = seen.at(n);
    const Stage& st = stages[n.stage];
    if (st.target(n.conf)) {
      Info adv = info;
      adv.points.push_back(info.exec.size());
      if (n.stage + 1 == stages.size()) {
        res.reachable = true;
        res.witness = adv.exec;
        res.stage_points = adv.points;
        return res;
      }
      push({n.conf, n.stage + 1}, adv);
    }
    for (const auto& s : enabled(dpn, n.conf, sensitive)) {
      if (!st.allowed.contains(s.rule)) continue;
      if (info.exec.size() >= b.max_steps) {
        res.truncated = true;
        break;
      }
      if (dpn.rule(s.rule).kind == RuleKind::Spawn && n.conf.threads.size() >= b.max_threads) {
        res.truncated = true;
        continue;
      }
      Info ext = info;
      ext.exec.push_back(s);
      push({step(dpn, n.conf, s.tid, s.rule, sensitive), n.stage}, std::move(ext));
    }
  }
  return res;
}

/// Distinct threads t_1..t_k with top symbol of t_i in patterns[i].
inline bool mhp_holds(const Configuration& c, const std::vector<BitSet>& patterns) {
  std::vector<SymbolId> tops;
  for (const auto& [tid, tc] : c.threads) {
    if (!tc.stack.empty()) tops.push_back(tc.top().g);
  }
  std::vector<bool> used(tops.size(), false);
  std::function<bool(std::size_t)> assign = [&](std::size_t i) {
    if (i == patterns.size()) return true;
    for (std::size_t j = 0; j < tops.size(); ++j) {
      if (used[j] || !patterns[i].contains(tops[j])) continue;
      used[j] = true;
      if (assign(i + 1)) return true;
      used[j] = false;
    }
    return false;
  };
  return assign(0);
}

inline bool top_holds(const Configuration& c, const BitSet& tops) {
  for (const auto& [tid, tc] : c.threads) {
    if (!tc.stack.empty() && tops.contains(tc.top().g)) return true;
  }
  return false;
}

}  // namespace mdpn::oracle
