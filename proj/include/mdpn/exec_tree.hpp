#pragma once

#include <algorithm>
#include <cctype>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mdpn/bitset.hpp"
#include "mdpn/dpn.hpp"
#include "mdpn/error.hpp"
#include "mdpn/semantics.hpp"

namespace mdpn {

enum class Tag : std::uint8_t { Nil, Ret, Base, NCall, RCall, Acq, Use, Spawn, Cut };

inline const char* tag_name(Tag t) {
  switch (t) {
    case Tag::Nil: return "NIL";
    case Tag::Ret: return "RET";
    case Tag::Base: return "BASE";
    case Tag::NCall: return "NCALL";
    case Tag::RCall: return "RCALL";
    case Tag::Acq: return "ACQ";
    case Tag::Use: return "USE";
    case Tag::Spawn: return "SPAWN";
    case Tag::Cut: return "CUT";
  }
  return "?";
}

inline int tag_arity(Tag t) {
  switch (t) {
    case Tag::Nil:
    case Tag::Ret: return 0;
    case Tag::Base:
    case Tag::NCall:
    case Tag::Acq:
    case Tag::Cut: return 1;
    case Tag::RCall:
    case Tag::Use:
    case Tag::Spawn: return 2;
  }
  return 0;
}

/// Ranked symbol. Unused annotations stay at their defaults so that equality
/// and hashing are plain memberwise operations.
struct TreeSymbol {
  Tag tag = Tag::Nil;
  RuleIndex rule = kNone;
  SymbolId control = kNone;
  SymbolId stack = kNone;
  SymbolId lock = kNone;
  bool reentrant = false;
  std::uint32_t level = 0;

  int arity() const { return tag_arity(tag); }
  bool is_cut() const { return tag == Tag::Cut; }

  static TreeSymbol nil(SymbolId p, SymbolId g) { return {Tag::Nil, kNone, p, g, kNone, false, 0}; }
  static TreeSymbol ret(RuleIndex r) { return {Tag::Ret, r, kNone, kNone, kNone, false, 0}; }
  static TreeSymbol base(RuleIndex r) { return {Tag::Base, r, kNone, kNone, kNone, false, 0}; }
  static TreeSymbol ncall(RuleIndex r) { return {Tag::NCall, r, kNone, kNone, kNone, false, 0}; }
  static TreeSymbol rcall(RuleIndex r) { return {Tag::RCall, r, kNone, kNone, kNone, false, 0}; }
  static TreeSymbol acq(RuleIndex r, SymbolId x, bool re) { return {Tag::Acq, r, kNone, kNone, x, re, 0}; }
  static TreeSymbol use(RuleIndex r, SymbolId x, bool re) { return {Tag::Use, r, kNone, kNone, x, re, 0}; }
  static TreeSymbol spawn(RuleIndex r) { return {Tag::Spawn, r, kNone, kNone, kNone, false, 0}; }
  static TreeSymbol cut(SymbolId p, SymbolId g, std::uint32_t k) { return {Tag::Cut, kNone, p, g, kNone, false, k}; }

  std::size_t hash() const {
    std::size_t h = static_cast<std::size_t>(tag);
    h = hash_combine(h, rule);
    h = hash_combine(h, control);
    h = hash_combine(h, stack);
    h = hash_combine(h, lock);
    h = hash_combine(h, reentrant ? 1 : 0);
    return hash_combine(h, level);
  }

  friend bool operator==(const TreeSymbol&, const TreeSymbol&) = default;
  friend auto operator<=>(const TreeSymbol&, const TreeSymbol&) = default;
};

struct TreeSymbolHash {
  std::size_t operator()(const TreeSymbol& s) const { return s.hash(); }
};

/// Immutable, structurally shared tree.
class ExecTree {
 public:
  ExecTree() = default;

  static ExecTree make(const TreeSymbol& sym, std::vector<ExecTree> kids = {}) {
    if (static_cast<int>(kids.size()) != sym.arity()) {
      throw Error(ErrorCode::Arity, std::string(tag_name(sym.tag)) + " expects " + std::to_string(sym.arity()) +
                                        " children, got " + std::to_string(kids.size()));
    }
    auto n = std::make_shared<Node>();
    n->sym = sym;
    n->size = 1;
    n->hash = sym.hash();
    for (const auto& k : kids) {
      if (!k.node_) throw Error(ErrorCode::Arity, "null child");
      n->size += k.size();
      n->hash = hash_combine(n->hash, k.hash());
    }
    n->kids = std::move(kids);
    return ExecTree(std::move(n));
  }

  bool valid() const { return node_ != nullptr; }
  const TreeSymbol& symbol() const { return node_->sym; }
  const std::vector<ExecTree>& kids() const { return node_->kids; }
  const ExecTree& kid(std::size_t i) const { return node_->kids[i]; }
  std::size_t size() const { return node_->size; }
  std::size_t hash() const { return node_->hash; }

  friend bool operator==(const ExecTree& a, const ExecTree& b) {
    if (a.node_ == b.node_) return true;
    if (!a.node_ || !b.node_) return false;
    if (a.hash() != b.hash() || a.size() != b.size() || !(a.symbol() == b.symbol())) return false;
    return a.kids() == b.kids();
  }

  friend std::strong_ordering operator<=>(const ExecTree& a, const ExecTree& b) {
    if (a.node_ == b.node_) return std::strong_ordering::equal;
    if (!a.node_) return std::strong_ordering::less;
    if (!b.node_) return std::strong_ordering::greater;
    if (auto c = a.size() <=> b.size(); c != 0) return c;
    if (auto c = a.symbol() <=> b.symbol(); c != 0) return c;
    for (std::size_t i = 0; i < a.kids().size(); ++i) {
      if (auto c = a.kid(i) <=> b.kid(i); c != 0) return c;
    }
    return std::strong_ordering::equal;
  }

 private:
  struct Node {
    TreeSymbol sym;
    std::vector<ExecTree> kids;
    std::size_t size = 0;
    std::size_t hash = 0;
  };

  explicit ExecTree(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  std::shared_ptr<const Node> node_;
};

struct ExecTreeHash {
  std::size_t operator()(const ExecTree& t) const { return t.hash(); }
};

inline bool has_cut(const ExecTree& t) {
  if (t.symbol().is_cut()) return true;
  for (const auto& k : t.kids()) {
    if (has_cut(k)) return true;
  }
  return false;
}

inline ExecTree strip_cuts(const ExecTree& t) {
  if (t.symbol().is_cut()) return strip_cuts(t.kid(0));
  if (!has_cut(t)) return t;
  std::vector<ExecTree> kids;
  for (const auto& k : t.kids()) kids.push_back(strip_cuts(k));
  return ExecTree::make(t.symbol(), std::move(kids));
}

/// Rewrites the level of every CUT node through `f`; levels mapped to 0 are removed.
inline ExecTree map_cut_levels(const ExecTree& t, const std::function<std::uint32_t(std::uint32_t)>& f) {
  std::vector<ExecTree> kids;
  for (const auto& k : t.kids()) kids.push_back(map_cut_levels(k, f));
  if (t.symbol().is_cut()) {
    const auto lvl = f(t.symbol().level);
    if (lvl == 0) return kids[0];
    TreeSymbol s = t.symbol();
    s.level = lvl;
    return ExecTree::make(s, std::move(kids));
  }
  return ExecTree::make(t.symbol(), std::move(kids));
}

inline std::uint32_t max_cut_level(const ExecTree& t) {
  std::uint32_t m = t.symbol().is_cut() ? t.symbol().level : 0;
  for (const auto& k : t.kids()) m = std::max(m, max_cut_level(k));
  return m;
}

// ---------------------------------------------------------------------------
// Thread decomposition

struct ThreadStep {
  RuleIndex rule = kNone;
  Tag tag = Tag::Base;
  bool reentrant = false;
  /// For RCALL/USE: index of the matching RET step in the same thread.
  std::size_t match = SIZE_MAX;
  /// For SPAWN: the spawned thread.
  ThreadId child;
};

struct ThreadView {
  std::vector<ThreadStep> steps;
  /// Terminus: NIL(p, g) when nil_control != kNone, otherwise a RET leaf.
  SymbolId nil_control = kNone;
  SymbolId nil_stack = kNone;
  /// Cut position per level: number of steps of this thread before the cut.
  std::map<std::uint32_t, std::size_t> cuts;
  std::map<std::uint32_t, std::pair<SymbolId, SymbolId>> cut_labels;
};

/// Per-thread preorder projection of a tree; spawned children are numbered in
/// spawn order, matching the interpreter's child indices.
inline std::map<ThreadId, ThreadView> threads_of_tree(const ExecTree& t) {
  std::map<ThreadId, ThreadView> out;
  struct Walker {
    std::map<ThreadId, ThreadView>& out;
    std::map<ThreadId, std::uint32_t> spawned;

    void walk(const ExecTree& n, const ThreadId& tid) {
      ThreadView& v = out[tid];
      const TreeSymbol& s = n.symbol();
      switch (s.tag) {
        case Tag::Nil:
          v.nil_control = s.control;
          v.nil_stack = s.stack;
          return;
        case Tag::Ret:
          v.steps.push_back(ThreadStep{s.rule, s.tag, false, SIZE_MAX, {}});
          return;
        case Tag::Cut:
          v.cuts[s.level] = v.steps.size();
          v.cut_labels[s.level] = {s.control, s.stack};
          walk(n.kid(0), tid);
          return;
        case Tag::Base:
        case Tag::NCall:
        case Tag::Acq:
          v.steps.push_back(ThreadStep{s.rule, s.tag, s.reentrant, SIZE_MAX, {}});
          walk(n.kid(0), tid);
          return;
        case Tag::RCall:
        case Tag::Use: {
          const std::size_t at = v.steps.size();
          v.steps.push_back(ThreadStep{s.rule, s.tag, s.reentrant, SIZE_MAX, {}});
          walk(n.kid(0), tid);
          out[tid].steps[at].match = out[tid].steps.size() - 1;
          walk(n.kid(1), tid);
          return;
        }
        case Tag::Spawn: {
          const ThreadId child = tid.child(++spawned[tid]);
          v.steps.push_back(ThreadStep{s.rule, s.tag, false, SIZE_MAX, child});
          walk(n.kid(0), child);
          walk(n.kid(1), tid);
          return;
        }
      }
    }
  };
  Walker w{out, {}};
  w.walk(t, ThreadId{});
  return out;
}

/// Interleaving that runs every thread to completion in creation order.
inline Execution canonical_execution(const ExecTree& t) {
  auto threads = threads_of_tree(t);
  Execution out;
  for (const auto& [tid, v] : threads) {
    for (const auto& s : v.steps) out.push_back({tid, s.rule});
  }
  // Parents precede children in ThreadId order, so every spawn precedes its child's steps.
  return out;
}

inline Configuration conf_of_tree(const MonitorDpn& dpn, const ExecTree& t) {
  if (has_cut(t)) throw Error(ErrorCode::HasCut, "conf is undefined on trees with CUT nodes");
  auto threads = threads_of_tree(t);
  Configuration c;
  try {
    c = replay(dpn, canonical_execution(t), false);
  } catch (const Error& e) {
    throw Error(ErrorCode::Replay, std::string("tree is not an execution tree: ") + e.what());
  }
  for (const auto& [tid, v] : threads) {
    const auto& tc = c.threads.at(tid);
    if (v.nil_control != kNone) {
      if (tc.stack.empty() || tc.control != v.nil_control || tc.top().g != v.nil_stack) {
        throw Error(ErrorCode::Replay, "NIL label of thread " + tid.str() + " disagrees with its steps");
      }
    } else if (!tc.stack.empty()) {
      throw Error(ErrorCode::Replay, "thread " + tid.str() + " ends in RET with a non-empty stack");
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Construction from executions

namespace detail {

struct ThreadTrace {
  std::vector<RuleIndex> rules;
  std::vector<bool> reentrant;
  std::vector<ThreadId> child;
  std::vector<std::size_t> match;
  std::map<std::uint32_t, std::size_t> cuts;
  std::map<std::uint32_t, std::pair<SymbolId, SymbolId>> cut_labels;
};

class TreeBuilder {
 public:
  TreeBuilder(const MonitorDpn& dpn, std::map<ThreadId, ThreadTrace> traces, Configuration final_conf)
      : dpn_(dpn), traces_(std::move(traces)), final_(std::move(final_conf)) {}

  ExecTree thread_tree(const ThreadId& tid) {
    const auto& tr = traces_.at(tid);
    return segment(tid, 0, tr.rules.size());
  }

 private:
  ExecTree segment(const ThreadId& tid, std::size_t l, std::size_t r) {
    const auto& tr = traces_.at(tid);
    ExecTree body = segment_body(tid, l, r);
    // Lower levels end up outermost.
    for (auto it = tr.cuts.rbegin(); it != tr.cuts.rend(); ++it) {
      if (it->second != l) continue;
      const auto& [p, g] = tr.cut_labels.at(it->first);
      body = ExecTree::make(TreeSymbol::cut(p, g, it->first), {body});
    }
    return body;
  }

  ExecTree segment_body(const ThreadId& tid, std::size_t l, std::size_t r) {
    const auto& tr = traces_.at(tid);
    if (l == r) {
      const auto& tc = final_.threads.at(tid);
      return ExecTree::make(TreeSymbol::nil(tc.control, tc.top().g));
    }
    const RuleIndex ri = tr.rules[l];
    const Rule& rule = dpn_.rule(ri);
    switch (rule.kind) {
      case RuleKind::Base:
        return ExecTree::make(TreeSymbol::base(ri), {segment(tid, l + 1, r)});
      case RuleKind::Return:
        return ExecTree::make(TreeSymbol::ret(ri));
      case RuleKind::Spawn:
        return ExecTree::make(TreeSymbol::spawn(ri), {thread_tree(tr.child[l]), segment(tid, l + 1, r)});
      case RuleKind::Call:
      case RuleKind::Monitor: {
        const bool mon = rule.kind == RuleKind::Monitor;
        const std::size_t m = tr.match[l];
        if (m != SIZE_MAX && m < r) {
          TreeSymbol s = mon ? TreeSymbol::use(ri, rule.lock, tr.reentrant[l]) : TreeSymbol::rcall(ri);
          return ExecTree::make(s, {segment(tid, l + 1, m + 1), segment(tid, m + 1, r)});
        }
        TreeSymbol s = mon ? TreeSymbol::acq(ri, rule.lock, tr.reentrant[l]) : TreeSymbol::ncall(ri);
        return ExecTree::make(s, {segment(tid, l + 1, r)});
      }
    }
    throw Error(ErrorCode::Replay, "unknown rule kind");
  }

  const MonitorDpn& dpn_;
  std::map<ThreadId, ThreadTrace> traces_;
  Configuration final_;
};

}  // namespace detail

/// Tree of `exec` with one CUT of level i+1 per thread alive after the first
/// `splits[i]` steps. `splits` must be non-decreasing.
inline ExecTree cut_tree_of_executions(const MonitorDpn& dpn, const Execution& exec,
                                       const std::vector<std::size_t>& splits) {
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] > exec.size() || (i > 0 && splits[i] < splits[i - 1])) {
      throw Error(ErrorCode::Replay, "split points out of range");
    }
  }
  std::map<ThreadId, detail::ThreadTrace> traces;
  Configuration c = initial_configuration(dpn);
  traces[ThreadId{}];
  auto mark = [&](std::size_t pos) {
    for (std::size_t i = 0; i < splits.size(); ++i) {
      if (splits[i] != pos) continue;
      for (const auto& [tid, tc] : c.threads) {
        if (tc.stack.empty()) {
          throw Error(ErrorCode::StackEmptyable, "thread " + tid.str() + " has an empty stack at a cut");
        }
        auto& tr = traces[tid];
        const auto level = static_cast<std::uint32_t>(i + 1);
        tr.cuts[level] = tr.rules.size();
        tr.cut_labels[level] = {tc.control, tc.top().g};
      }
    }
  };
  mark(0);
  for (std::size_t i = 0; i < exec.size(); ++i) {
    const auto& st = exec[i];
    const auto it = c.threads.find(st.tid);
    const bool re = it != c.threads.end() && st.rule < dpn.num_rules() &&
                    dpn.rule(st.rule).kind == RuleKind::Monitor && it->second.holds(dpn.rule(st.rule).lock);
    try {
      apply_step(dpn, c, st.tid, st.rule, false);
    } catch (const Error& e) {
      throw Error(ErrorCode::Replay, "step " + std::to_string(i) + ": " + e.what());
    }
    auto& tr = traces[st.tid];
    tr.rules.push_back(st.rule);
    tr.reentrant.push_back(re);
    tr.child.emplace_back();
    if (dpn.rule(st.rule).kind == RuleKind::Spawn) {
      // The newest child is the one with the largest index.
      ThreadId newest;
      std::uint32_t best = 0;
      for (const auto& [tid, tc] : c.threads) {
        if (tid.path.size() == st.tid.path.size() + 1 &&
            std::equal(st.tid.path.begin(), st.tid.path.end(), tid.path.begin()) && tid.path.back() > best) {
          best = tid.path.back();
          newest = tid;
        }
      }
      tr.child.back() = newest;
      traces[newest];
    }
    mark(i + 1);
  }
  for (auto& [tid, tr] : traces) {
    std::vector<std::size_t> open;
    tr.match.assign(tr.rules.size(), SIZE_MAX);
    for (std::size_t i = 0; i < tr.rules.size(); ++i) {
      const auto k = dpn.rule(tr.rules[i]).kind;
      if (k == RuleKind::Call || k == RuleKind::Monitor) {
        open.push_back(i);
      } else if (k == RuleKind::Return && !open.empty()) {
        tr.match[open.back()] = i;
        open.pop_back();
      }
    }
  }
  detail::TreeBuilder b(dpn, std::move(traces), std::move(c));
  return b.thread_tree(ThreadId{});
}

/// Cut tree of prefix·suffix with level-1 cuts after the prefix.
inline ExecTree cut_tree_of_split(const MonitorDpn& dpn, const Execution& prefix, const Execution& suffix) {
  Execution all = prefix;
  all.insert(all.end(), suffix.begin(), suffix.end());
  return cut_tree_of_executions(dpn, all, std::vector<std::size_t>{prefix.size()});
}

inline ExecTree tree_of_execution(const MonitorDpn& dpn, const Execution& exec) {
  return cut_tree_of_executions(dpn, exec, std::vector<std::size_t>{});
}

/// Concrete counterpart of the cut transducer at one level: returns the tree
/// marked by the level's cuts. CUTs of other levels are kept.
inline ExecTree marked_prefix(const ExecTree& t, std::uint32_t level = 1) {
  // first: whether the subtree contains the cut (prefix output valid), second: output
  std::function<std::pair<bool, ExecTree>(const ExecTree&)> go = [&](const ExecTree& n) -> std::pair<bool, ExecTree> {
    const TreeSymbol& s = n.symbol();
    auto fail = [&](const std::string& why) { return Error(ErrorCode::NotCutWellformed, why); };
    switch (s.tag) {
      case Tag::Nil:
      case Tag::Ret:
        return {false, n};
      case Tag::Cut: {
        auto [c, out] = go(n.kid(0));
        if (s.level == level) {
          if (c) throw fail("two cuts of the same level in one thread");
          return {true, ExecTree::make(TreeSymbol::nil(s.control, s.stack))};
        }
        return {c, ExecTree::make(s, {out})};
      }
      case Tag::Base:
      case Tag::NCall:
      case Tag::Acq: {
        auto [c, out] = go(n.kid(0));
        return {c, ExecTree::make(s, {out})};
      }
      case Tag::RCall:
      case Tag::Use: {
        auto [cl, ol] = go(n.kid(0));
        auto [cr, orr] = go(n.kid(1));
        if (cl && cr) throw fail("cut in both branches of a returning call");
        if (cl) {
          TreeSymbol u = s;
          u.tag = s.tag == Tag::RCall ? Tag::NCall : Tag::Acq;
          return {true, ExecTree::make(u, {ol})};
        }
        return {cr, ExecTree::make(s, {ol, orr})};
      }
      case Tag::Spawn: {
        auto [cl, ol] = go(n.kid(0));
        auto [cr, orr] = go(n.kid(1));
        // The spawner may return past the spawn before its own cut.
        if (cr && !cl) throw fail("spawned thread and spawner disagree on the cut");
        return {cr, ExecTree::make(s, {ol, orr})};
      }
    }
    throw fail("unknown tag");
  };
  auto [c, out] = go(t);
  if (!c) throw Error(ErrorCode::NotCutWellformed, "root thread has no cut of level " + std::to_string(level));
  return out;
}

// ---------------------------------------------------------------------------
// S-expressions

inline std::string serialize_tree(const MonitorDpn& dpn, const ExecTree& t) {
  std::ostringstream os;
  std::function<void(const ExecTree&)> go = [&](const ExecTree& n) {
    const TreeSymbol& s = n.symbol();
    os << '(' << tag_name(s.tag);
    switch (s.tag) {
      case Tag::Nil:
        os << ' ' << dpn.controls().name(s.control) << ' ' << dpn.stack_symbols().name(s.stack);
        break;
      case Tag::Cut:
        os << ' ' << dpn.controls().name(s.control) << ' ' << dpn.stack_symbols().name(s.stack) << ' ' << s.level;
        break;
      case Tag::Acq:
      case Tag::Use:
        os << ' ' << dpn.rule_name(s.rule) << ' ' << dpn.locks().name(s.lock) << ' ' << (s.reentrant ? "re" : "nr");
        break;
      default:
        os << ' ' << dpn.rule_name(s.rule);
        break;
    }
    for (const auto& k : n.kids()) {
      os << ' ';
      go(k);
    }
    os << ')';
  };
  go(t);
  return os.str();
}

inline ExecTree parse_tree(const MonitorDpn& dpn, std::string_view text) {
  std::size_t pos = 0;
  auto err = [&](const std::string& msg) { return Error(ErrorCode::Syntax, msg + " at offset " + std::to_string(pos)); };
  auto skip = [&] {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  };
  auto atom = [&]() -> std::string {
    skip();
    const std::size_t start = pos;
    while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) && text[pos] != '(' &&
           text[pos] != ')') {
      ++pos;
    }
    if (start == pos) throw err("expected atom");
    return std::string(text.substr(start, pos - start));
  };
  auto expect = [&](char ch) {
    skip();
    if (pos >= text.size() || text[pos] != ch) throw err(std::string("expected '") + ch + "'");
    ++pos;
  };
  auto rule_of = [&](const std::string& name, std::initializer_list<RuleKind> kinds) {
    auto id = dpn.rule_names().find(name);
    if (!id) throw Error(ErrorCode::Undeclared, "unknown rule '" + name + "'");
    if (std::find(kinds.begin(), kinds.end(), dpn.rule(*id).kind) == kinds.end()) {
      throw err("rule '" + name + "' has the wrong kind for this node");
    }
    return *id;
  };
  auto control = [&](const std::string& n) {
    auto id = dpn.controls().find(n);
    if (!id) throw Error(ErrorCode::Undeclared, "unknown control state '" + n + "'");
    return *id;
  };
  auto stack = [&](const std::string& n) {
    auto id = dpn.stack_symbols().find(n);
    if (!id) throw Error(ErrorCode::Undeclared, "unknown stack symbol '" + n + "'");
    return *id;
  };

  std::function<ExecTree()> node = [&]() -> ExecTree {
    expect('(');
    const std::string head = atom();
    TreeSymbol s;
    if (head == "NIL") {
      const auto p = control(atom());
      s = TreeSymbol::nil(p, stack(atom()));
    } else if (head == "RET") {
      s = TreeSymbol::ret(rule_of(atom(), {RuleKind::Return}));
    } else if (head == "BASE") {
      s = TreeSymbol::base(rule_of(atom(), {RuleKind::Base}));
    } else if (head == "NCALL" || head == "RCALL") {
      const auto r = rule_of(atom(), {RuleKind::Call});
      s = head == "NCALL" ? TreeSymbol::ncall(r) : TreeSymbol::rcall(r);
    } else if (head == "SPAWN") {
      s = TreeSymbol::spawn(rule_of(atom(), {RuleKind::Spawn}));
    } else if (head == "ACQ" || head == "USE") {
      const auto r = rule_of(atom(), {RuleKind::Monitor});
      auto x = dpn.locks().find(atom());
      if (!x || *x != dpn.rule(r).lock) throw err("lock does not match the monitor rule");
      const std::string flag = atom();
      if (flag != "nr" && flag != "re") throw err("expected nr or re");
      s = head == "ACQ" ? TreeSymbol::acq(r, *x, flag == "re") : TreeSymbol::use(r, *x, flag == "re");
    } else if (head == "CUT") {
      const auto p = control(atom());
      const auto g = stack(atom());
      const std::string k = atom();
      if (k.empty() || !std::all_of(k.begin(), k.end(), [](unsigned char ch) { return std::isdigit(ch); }) ||
          std::stoul(k) == 0) {
        throw err("CUT level must be a positive integer");
      }
      s = TreeSymbol::cut(p, g, static_cast<std::uint32_t>(std::stoul(k)));
    } else {
      throw err("unknown node '" + head + "'");
    }
    std::vector<ExecTree> kids;
    for (int i = 0; i < s.arity(); ++i) kids.push_back(node());
    expect(')');
    return ExecTree::make(s, std::move(kids));
  };
  ExecTree t = node();
  skip();
  if (pos != text.size()) throw err("trailing input");
  return t;
}

}  // namespace mdpn
