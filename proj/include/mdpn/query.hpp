#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mdpn/dpn.hpp"
#include "mdpn/dpn_automata.hpp"
#include "mdpn/exec_tree.hpp"
#include "mdpn/semantics.hpp"
#include "mdpn/transducer.hpp"
#include "mdpn/tree_automaton.hpp"

namespace mdpn {

struct MhpPatterns {
  std::vector<BitSet> patterns;
};

struct TopSymbols {
  BitSet tops;
};

/// Automaton over the cut-free alphabet of the model.
struct RawTarget {
  AutomatonPtr automaton;
};

using TargetSpec = std::variant<MhpPatterns, TopSymbols, RawTarget>;

struct QueryStage {
  TargetSpec target;
  RuleSet allowed;
};

struct Query {
  MonitorDpn dpn;
  std::vector<QueryStage> stages;
  bool sensitive = true;
};

struct QueryOptions {
  bool directed = true;
  bool prune = false;
  const std::atomic<bool>* cancel = nullptr;
};

struct QueryResult {
  bool nonempty = false;
  /// Witness tree; the boundary after stage i is marked by CUT nodes of level i.
  std::optional<ExecTree> witness_tree;
  std::optional<Execution> witness;
  /// Prefix lengths of `witness` at which stages 1..n-1 end.
  std::vector<std::size_t> stage_points;
  std::size_t explored = 0;
  std::size_t pruned = 0;
};

inline bool is_cut_symbol(const TreeSymbol& s) { return s.is_cut(); }

inline AutomatonPtr target_automaton(const MonitorDpn& dpn, const TargetSpec& spec) {
  if (const auto* m = std::get_if<MhpPatterns>(&spec)) return t_mhp(dpn, m->patterns, false);
  if (const auto* t = std::get_if<TopSymbols>(&spec)) return t_top(dpn, t->tops, false);
  const auto& raw = std::get<RawTarget>(spec).automaton;
  if (!raw || !raw->alphabet()->same_set(*make_alphabet(dpn, 0))) {
    throw Error(ErrorCode::Alphabet, "raw target must be over the model's cut-free alphabet");
  }
  return raw;
}

/// Trees reachable from the initial node using only `allowed`.
inline AutomatonPtr reachable_trees(const MonitorDpn& dpn, const RuleSet& allowed, bool sensitive) {
  std::vector<AutomatonPtr> parts{t_m(dpn), t_delta(dpn, allowed)};
  if (sensitive) parts.push_back(t_ah(dpn));
  return product_all(parts);
}

/// Components of the cut pipeline other than the execution-tree automaton.
inline std::vector<AutomatonPtr> cut_constraints(const MonitorDpn& dpn, AutomatonPtr from, const RuleSet& allowed,
                                                 bool sensitive) {
  std::vector<AutomatonPtr> parts{t_cwf(dpn), inverse_image(t_ct(dpn), std::move(from)), t_delta_cut(dpn, allowed)};
  if (sensitive) {
    parts.push_back(t_rh(dpn));
    parts.push_back(t_ht(dpn));
    parts.push_back(t_ah(dpn, true));
  }
  return parts;
}

inline void require_nonempty_stacks(const MonitorDpn& dpn) {
  auto bad = check_no_empty_stack(dpn);
  if (!bad.empty()) {
    throw Error(ErrorCode::StackEmptyable, "thread starting at (" + dpn.controls().name(bad.front().first) + ", " +
                                               dpn.stack_symbols().name(bad.front().second) +
                                               ") can empty its stack");
  }
}

/// Cut trees whose marked prefix lies in `from` and whose suffix uses only `allowed`.
inline AutomatonPtr cut_pipeline(const MonitorDpn& dpn, AutomatonPtr from, const RuleSet& allowed, bool sensitive) {
  require_nonempty_stacks(dpn);
  std::vector<AutomatonPtr> parts{t_m(dpn, true)};
  for (auto& p : cut_constraints(dpn, std::move(from), allowed, sensitive)) parts.push_back(std::move(p));
  return product_all(parts);
}

/// Successor trees of L(from) via `allowed`, over the cut-free alphabet.
inline AutomatonPtr post_step(const MonitorDpn& dpn, AutomatonPtr from, const RuleSet& allowed, bool sensitive) {
  return erase_unary(cut_pipeline(dpn, std::move(from), allowed, sensitive), is_cut_symbol);
}

// ---------------------------------------------------------------------------
// Scheduling

namespace detail {

struct SchedThread {
  ThreadId tid;
  const ThreadView* view = nullptr;
  std::size_t pos = 0;
};

inline bool nonreentrant_monitor(const ThreadStep& s) {
  return (s.tag == Tag::Acq || s.tag == Tag::Use) && !s.reentrant;
}

}  // namespace detail

/// Execution whose tree is strip_cuts(t) and which reaches the configuration
/// marked by each cut level in order. Returns the execution and the prefix
/// lengths at which levels 1..k are reached.
inline std::pair<Execution, std::vector<std::size_t>> schedule(const MonitorDpn& dpn, const ExecTree& t,
                                                              bool sensitive) {
  const auto threads = threads_of_tree(t);
  const std::uint32_t levels = max_cut_level(t);
  std::vector<detail::SchedThread> ts;
  for (const auto& [tid, v] : threads) ts.push_back({tid, &v, 0});

  Configuration conf = initial_configuration(dpn);
  Execution exec;
  std::vector<std::size_t> points;

  auto lock_of = [&](const ThreadStep& s) { return dpn.rule(s.rule).lock; };
  auto held_by_other = [&](const ThreadId& me, SymbolId x) {
    for (const auto& [tid, tc] : conf.threads) {
      if (tid != me && tc.holds(x)) return true;
    }
    return false;
  };
  auto run = [&](detail::SchedThread& th) {
    const ThreadStep& s = th.view->steps[th.pos];
    apply_step(dpn, conf, th.tid, s.rule, sensitive);
    exec.push_back({th.tid, s.rule});
    ++th.pos;
  };

  for (std::uint32_t phase = 1; phase <= levels + 1; ++phase) {
    std::vector<std::size_t> target(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
      if (phase > levels) {
        target[i] = ts[i].view->steps.size();
      } else {
        auto it = ts[i].view->cuts.find(phase);
        target[i] = it == ts[i].view->cuts.end() ? 0 : it->second;
      }
      if (target[i] < ts[i].pos) throw Error(ErrorCode::Unschedulable, "cut levels out of order");
    }
    auto pending = [&](std::size_t i) { return ts[i].pos < target[i] && conf.threads.count(ts[i].tid) != 0; };

    if (!sensitive) {
      for (std::size_t i = 0; i < ts.size(); ++i) {
        while (pending(i)) run(ts[i]);
      }
    } else {
      // Whether some thread other than `me` has a non-reentrant monitor step on x
      // in [pos, limit), where limit is the phase target or the end of the thread.
      auto others_use = [&](std::size_t me, SymbolId x, bool whole_run) {
        for (std::size_t i = 0; i < ts.size(); ++i) {
          if (i == me) continue;
          const auto& steps = ts[i].view->steps;
          const std::size_t limit = whole_run ? steps.size() : target[i];
          for (std::size_t k = ts[i].pos; k < limit; ++k) {
            if (detail::nonreentrant_monitor(steps[k]) && lock_of(steps[k]) == x) return true;
          }
        }
        return false;
      };
      // A closed use [pos, match] runs atomically when none of its locks is held elsewhere.
      auto block_free = [&](std::size_t i, std::size_t from, std::size_t to) {
        const auto& steps = ts[i].view->steps;
        for (std::size_t k = from; k <= to; ++k) {
          if (detail::nonreentrant_monitor(steps[k]) && held_by_other(ts[i].tid, lock_of(steps[k]))) return false;
        }
        return true;
      };
      while (true) {
        bool any_pending = false;
        bool progressed = false;
        for (std::size_t i = 0; i < ts.size() && !progressed; ++i) {
          if (!pending(i)) {
            if (ts[i].pos < target[i]) any_pending = true;
            continue;
          }
          any_pending = true;
          const ThreadStep& s = ts[i].view->steps[ts[i].pos];
          if (!detail::nonreentrant_monitor(s)) {
            if (can_step(dpn, conf, ts[i].tid, s.rule, true)) {
              run(ts[i]);
              progressed = true;
            }
            continue;
          }
          if (s.tag == Tag::Use && s.match < target[i] && block_free(i, ts[i].pos, s.match)) {
            const std::size_t end = s.match;
            while (ts[i].pos <= end) run(ts[i]);
            progressed = true;
          }
        }
        if (progressed) continue;
        if (!any_pending) break;
        // Acquisitions: final ACQs and uses left open at the phase boundary.
        for (std::size_t i = 0; i < ts.size() && !progressed; ++i) {
          if (!pending(i)) continue;
          const ThreadStep& s = ts[i].view->steps[ts[i].pos];
          if (!detail::nonreentrant_monitor(s)) continue;
          const bool open_use = s.tag == Tag::Use && s.match >= target[i];
          if (s.tag == Tag::Use && !open_use) continue;
          const SymbolId x = lock_of(s);
          if (held_by_other(ts[i].tid, x)) continue;
          if (others_use(i, x, s.tag == Tag::Acq)) continue;
          run(ts[i]);
          progressed = true;
        }
        if (!progressed) {
          throw Error(ErrorCode::Unschedulable, "no schedulable step in phase " + std::to_string(phase));
        }
      }
    }
    for (std::size_t i = 0; i < ts.size(); ++i) {
      if (ts[i].pos != target[i]) throw Error(ErrorCode::Unschedulable, "thread " + ts[i].tid.str() + " did not reach its cut");
    }
    if (phase <= levels) points.push_back(exec.size());
  }
  try {
    replay(dpn, exec, sensitive);
  } catch (const Error& e) {
    throw Error(ErrorCode::Unschedulable, std::string("schedule does not replay: ") + e.what());
  }
  if (!(tree_of_execution(dpn, exec) == strip_cuts(t))) {
    throw Error(ErrorCode::Unschedulable, "schedule does not reproduce the tree");
  }
  return {exec, points};
}

// ---------------------------------------------------------------------------
// Queries

namespace detail {

/// Inserts the cuts of `cuts` (a prefix tree of `full` at `level`) into `full`.
inline ExecTree merge_cuts(const ExecTree& full, const ExecTree& cuts, std::uint32_t level) {
  const TreeSymbol& f = full.symbol();
  const TreeSymbol& c = cuts.symbol();
  if (c.is_cut()) return ExecTree::make(c, {merge_cuts(full, cuts.kid(0), level)});
  if (f.is_cut() && f.level == level) return full;
  if (f.is_cut()) return ExecTree::make(f, {merge_cuts(full.kid(0), cuts, level)});
  if ((f.tag == Tag::RCall && c.tag == Tag::NCall) || (f.tag == Tag::Use && c.tag == Tag::Acq)) {
    return ExecTree::make(f, {merge_cuts(full.kid(0), cuts.kid(0), level), full.kid(1)});
  }
  if (f.tag != c.tag || f.rule != c.rule || full.kids().size() != cuts.kids().size()) {
    throw Error(ErrorCode::NotCutWellformed, "prefix tree does not match the full tree");
  }
  std::vector<ExecTree> kids;
  for (std::size_t i = 0; i < full.kids().size(); ++i) kids.push_back(merge_cuts(full.kid(i), cuts.kid(i), level));
  return ExecTree::make(f, std::move(kids));
}

}  // namespace detail

inline QueryResult run_query(const Query& q, const QueryOptions& opt = {}) {
  if (q.stages.empty()) throw Error(ErrorCode::Alphabet, "query needs at least one stage");
  const MonitorDpn& dpn = q.dpn;
  if (q.stages.size() > 1) require_nonempty_stacks(dpn);

  // levels[k]: language after stage k+1 (cut-free); cut_langs[k]: its cut form for k >= 1.
  std::vector<AutomatonPtr> langs;
  std::vector<AutomatonPtr> cut_langs(q.stages.size());
  AutomatonPtr up;
  AutomatonPtr down;
  for (std::size_t k = 0; k < q.stages.size(); ++k) {
    const auto& st = q.stages[k];
    auto target = target_automaton(dpn, st.target);
    std::vector<AutomatonPtr> rest;
    if (k == 0) {
      rest = {t_delta(dpn, st.allowed)};
      if (q.sensitive) rest.push_back(t_ah(dpn));
      rest.push_back(target);
      down = t_m(dpn);
    } else {
      rest = cut_constraints(dpn, langs.back(), st.allowed, q.sensitive);
      rest.push_back(with_unary_passthrough(target, cut_symbols(dpn, 1)));
      down = t_m(dpn, true);
    }
    up = product_all(rest);
    auto full = product(up, down);
    cut_langs[k] = full;
    langs.push_back(k == 0 ? AutomatonPtr(full) : erase_unary(full, is_cut_symbol));
  }

  EmptinessOptions eopt;
  eopt.prune = opt.prune;
  eopt.cancel = opt.cancel;
  QueryResult res;
  std::optional<Witness> w;
  if (opt.directed) {
    auto r = directed_is_empty(up, down, eopt);
    res.explored = r.explored;
    res.pruned = r.pruned;
    w = r.witness;
  } else {
    auto r = is_empty(*cut_langs.back(), eopt);
    res.explored = r.explored;
    res.pruned = r.pruned;
    w = r.witness;
  }
  if (!w) return res;
  res.nonempty = true;

  const std::size_t n = q.stages.size();
  ExecTree tree = w->tree;
  if (n > 1) {
    tree = map_cut_levels(tree, [&](std::uint32_t) { return static_cast<std::uint32_t>(n - 1); });
    for (std::size_t k = n - 1; k >= 2; --k) {
      const ExecTree prefix = strip_cuts(marked_prefix(tree, static_cast<std::uint32_t>(k)));
      auto pre = find_preimage_with_unary(*cut_langs[k - 1], is_cut_symbol, prefix);
      if (!pre) throw Error(ErrorCode::Unschedulable, "no cut placement for stage " + std::to_string(k));
      const ExecTree relabelled = map_cut_levels(*pre, [&](std::uint32_t) { return static_cast<std::uint32_t>(k - 1); });
      tree = detail::merge_cuts(tree, relabelled, static_cast<std::uint32_t>(k - 1));
    }
  }
  res.witness_tree = tree;
  auto [exec, points] = schedule(dpn, tree, q.sensitive);
  res.witness = std::move(exec);
  res.stage_points = std::move(points);
  return res;
}

}  // namespace mdpn
