#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mdpn/bitset.hpp"
#include "mdpn/dpn.hpp"
#include "mdpn/exec_tree.hpp"
#include "mdpn/transducer.hpp"
#include "mdpn/tree_automaton.hpp"

namespace mdpn {

/// Every well-formed node label of `dpn`, plus CUT(p, g, k) for k = 1..cut_levels.
inline AlphabetPtr make_alphabet(const MonitorDpn& dpn, std::uint32_t cut_levels = 0) {
  Alphabet a;
  for (SymbolId p = 0; p < dpn.num_controls(); ++p) {
    for (SymbolId g = 0; g < dpn.num_stack_symbols(); ++g) a.add(TreeSymbol::nil(p, g));
  }
  for (const Rule& r : dpn.rules()) {
    switch (r.kind) {
      case RuleKind::Base: a.add(TreeSymbol::base(r.index)); break;
      case RuleKind::Return: a.add(TreeSymbol::ret(r.index)); break;
      case RuleKind::Call:
        a.add(TreeSymbol::ncall(r.index));
        a.add(TreeSymbol::rcall(r.index));
        break;
      case RuleKind::Monitor:
        for (bool re : {false, true}) {
          a.add(TreeSymbol::acq(r.index, r.lock, re));
          a.add(TreeSymbol::use(r.index, r.lock, re));
        }
        break;
      case RuleKind::Spawn: a.add(TreeSymbol::spawn(r.index)); break;
    }
  }
  for (std::uint32_t k = 1; k <= cut_levels; ++k) {
    for (SymbolId p = 0; p < dpn.num_controls(); ++p) {
      for (SymbolId g = 0; g < dpn.num_stack_symbols(); ++g) a.add(TreeSymbol::cut(p, g, k));
    }
  }
  return std::make_shared<const Alphabet>(std::move(a));
}

inline std::vector<TreeSymbol> cut_symbols(const MonitorDpn& dpn, std::uint32_t level) {
  std::vector<TreeSymbol> out;
  for (SymbolId p = 0; p < dpn.num_controls(); ++p) {
    for (SymbolId g = 0; g < dpn.num_stack_symbols(); ++g) out.push_back(TreeSymbol::cut(p, g, level));
  }
  return out;
}

namespace detail {

template <class S, class H>
class TypedAutomaton : public TreeAutomaton {
 public:
  TypedAutomaton(MonitorDpn dpn, AlphabetPtr alpha) : dpn_(std::move(dpn)), alpha_(std::move(alpha)) {}
  const AlphabetPtr& alphabet() const override { return alpha_; }
  const S& state(StateId s) const { return table_.get(s); }
  StateId id(const S& s) const { return table_.intern(s); }
  std::size_t num_states() const { return table_.size(); }

 protected:
  const Rule& rule(const TreeSymbol& sym) const { return dpn_.rule(sym.rule); }

  template <class F>
  void for_each_lockset(F&& f) const {
    const std::size_t n = dpn_.num_locks();
    for (std::uint64_t m = 0; m < (std::uint64_t{1} << n); ++m) {
      LockSet ls;
      for (std::size_t i = 0; i < n; ++i) {
        if ((m >> i) & 1U) ls.insert(i);
      }
      f(ls);
    }
  }

  std::string lockset_str(const LockSet& s) const {
    std::string out = "{";
    bool first = true;
    s.for_each([&](std::size_t x) {
      if (!first) out += ",";
      first = false;
      out += dpn_.locks().name(static_cast<SymbolId>(x));
    });
    return out + "}";
  }

  std::string graph_str(const LockGraph& g) const {
    std::string out = "{";
    bool first = true;
    g.for_each_edge([&](std::size_t a, std::size_t b) {
      if (!first) out += ",";
      first = false;
      out += dpn_.locks().name(static_cast<SymbolId>(a)) + "->" + dpn_.locks().name(static_cast<SymbolId>(b));
    });
    return out + "}";
  }

  MonitorDpn dpn_;
  AlphabetPtr alpha_;
  StateTable<S, H> table_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Lock-insensitive execution trees

struct TmState {
  SymbolId p = kNone;
  SymbolId g = kNone;
  SymbolId pe = kNone;
  bool ret = false;
  LockSet ls;

  friend bool operator==(const TmState&, const TmState&) = default;
};

struct TmStateHash {
  std::size_t operator()(const TmState& s) const {
    return hash_combine(hash_combine(hash_combine(hash_combine(s.p, s.g), s.pe), s.ret ? 1 : 0), s.ls.hash());
  }
};

/// States record (start control, start top, main thread's final control,
/// whether it ends in RET, locks held on entry).
class TmAutomaton final : public detail::TypedAutomaton<TmState, TmStateHash> {
 public:
  TmAutomaton(const MonitorDpn& dpn, bool with_cut) : TypedAutomaton(dpn, make_alphabet(dpn, with_cut ? 1 : 0)) {}

  std::vector<StateId> step(const TreeSymbol& sym, std::span<const StateId> kids) const override {
    std::vector<StateId> out;
    switch (sym.tag) {
      case Tag::Nil:
        for_each_lockset([&](const LockSet& ls) { out.push_back(id({sym.control, sym.stack, sym.control, false, ls})); });
        break;
      case Tag::Ret: {
        const Rule& r = rule(sym);
        for_each_lockset([&](const LockSet& ls) { out.push_back(id({r.p, r.g, r.p2, true, ls})); });
        break;
      }
      case Tag::Base: {
        const Rule& r = rule(sym);
        const TmState& c = state(kids[0]);
        if (c.p == r.p2 && c.g == r.g2) out.push_back(id({r.p, r.g, c.pe, c.ret, c.ls}));
        break;
      }
      case Tag::NCall: {
        const Rule& r = rule(sym);
        const TmState& c = state(kids[0]);
        if (c.p == r.p2 && c.g == r.g2 && !c.ret) out.push_back(id({r.p, r.g, c.pe, false, c.ls}));
        break;
      }
      case Tag::Acq: {
        const Rule& r = rule(sym);
        const TmState& c = state(kids[0]);
        if (c.p == r.p2 && c.g == r.g2 && !c.ret && c.ls.contains(sym.lock)) {
          out.push_back(id({r.p, r.g, c.pe, false, sym.reentrant ? c.ls : c.ls.without(sym.lock)}));
        }
        break;
      }
      case Tag::RCall:
      case Tag::Use: {
        const Rule& r = rule(sym);
        const TmState& l = state(kids[0]);
        const TmState& rt = state(kids[1]);
        if (l.p != r.p2 || l.g != r.g2 || !l.ret || rt.p != l.pe || rt.g != r.g_ret) break;
        if (sym.tag == Tag::RCall) {
          if (l.ls == rt.ls) out.push_back(id({r.p, r.g, rt.pe, rt.ret, rt.ls}));
        } else if (rt.ls.contains(sym.lock) == sym.reentrant && l.ls == rt.ls.with(sym.lock)) {
          out.push_back(id({r.p, r.g, rt.pe, rt.ret, rt.ls}));
        }
        break;
      }
      case Tag::Spawn: {
        const Rule& r = rule(sym);
        const TmState& l = state(kids[0]);
        const TmState& rt = state(kids[1]);
        if (l.p == r.spawn_p && l.g == r.spawn_g && l.ls.empty() && rt.p == r.p2 && rt.g == r.g2) {
          out.push_back(id({r.p, r.g, rt.pe, rt.ret, rt.ls}));
        }
        break;
      }
      case Tag::Cut: {
        const TmState& c = state(kids[0]);
        if (c.p == sym.control && c.g == sym.stack) out.push_back(kids[0]);
        break;
      }
    }
    sort_unique(out);
    return out;
  }

  bool accepting(StateId s) const override {
    const TmState& t = state(s);
    return t.p == dpn_.init_control() && t.g == dpn_.init_stack() && t.ls.empty();
  }

  std::string describe(StateId s) const override {
    const TmState& t = state(s);
    return "(" + dpn_.controls().name(t.p) + "," + dpn_.stack_symbols().name(t.g) + "," + dpn_.controls().name(t.pe) +
           "," + (t.ret ? "T" : "F") + "," + lockset_str(t.ls) + ")";
  }

  std::optional<std::uint64_t> slot_key(const TreeSymbol& sym, int pos, StateId s) const override {
    if (sym.arity() != 2) return 0;
    const Rule& r = rule(sym);
    const TmState& t = state(s);
    if (sym.tag == Tag::Spawn) {
      if (pos == 0) return (t.p == r.spawn_p && t.g == r.spawn_g && t.ls.empty()) ? std::optional<std::uint64_t>(0) : std::nullopt;
      return (t.p == r.p2 && t.g == r.g2) ? std::optional<std::uint64_t>(0) : std::nullopt;
    }
    if (pos == 0) {
      if (t.p != r.p2 || t.g != r.g2 || !t.ret) return std::nullopt;
      if (sym.tag == Tag::Use && !t.ls.contains(sym.lock)) return std::nullopt;
      return hash_combine(t.pe, t.ls.hash());
    }
    if (t.g != r.g_ret) return std::nullopt;
    if (sym.tag == Tag::RCall) return hash_combine(t.p, t.ls.hash());
    if (t.ls.contains(sym.lock) != sym.reentrant) return std::nullopt;
    return hash_combine(t.p, t.ls.with(sym.lock).hash());
  }

  bool supports_down() const override { return true; }

  std::vector<StateId> initial_down() const override {
    std::vector<StateId> out;
    for (SymbolId pe = 0; pe < dpn_.num_controls(); ++pe) {
      for (bool ret : {false, true}) out.push_back(id({dpn_.init_control(), dpn_.init_stack(), pe, ret, {}}));
    }
    return out;
  }

  std::vector<std::vector<StateId>> down(const TreeSymbol& sym, StateId s) const override {
    const TmState& t = state(s);
    std::vector<std::vector<StateId>> out;
    if (sym.tag == Tag::Nil) {
      if (sym.control == t.p && sym.stack == t.g && t.pe == t.p && !t.ret) out.push_back({});
      return out;
    }
    if (sym.tag == Tag::Cut) {
      if (sym.control == t.p && sym.stack == t.g) out.push_back({s});
      return out;
    }
    const Rule& r = rule(sym);
    if (r.p != t.p || r.g != t.g) return out;
    switch (sym.tag) {
      case Tag::Ret:
        if (t.pe == r.p2 && t.ret) out.push_back({});
        break;
      case Tag::Base:
        out.push_back({id({r.p2, r.g2, t.pe, t.ret, t.ls})});
        break;
      case Tag::NCall:
        if (!t.ret) out.push_back({id({r.p2, r.g2, t.pe, false, t.ls})});
        break;
      case Tag::Acq:
        if (!t.ret && t.ls.contains(sym.lock) == sym.reentrant) {
          out.push_back({id({r.p2, r.g2, t.pe, false, t.ls.with(sym.lock)})});
        }
        break;
      case Tag::RCall:
      case Tag::Use: {
        if (sym.tag == Tag::Use && t.ls.contains(sym.lock) != sym.reentrant) break;
        const LockSet inner = sym.tag == Tag::Use ? t.ls.with(sym.lock) : t.ls;
        for (SymbolId m = 0; m < dpn_.num_controls(); ++m) {
          out.push_back({id({r.p2, r.g2, m, true, inner}), id({m, r.g_ret, t.pe, t.ret, t.ls})});
        }
        break;
      }
      case Tag::Spawn: {
        const StateId right = id({r.p2, r.g2, t.pe, t.ret, t.ls});
        for (SymbolId pe = 0; pe < dpn_.num_controls(); ++pe) {
          for (bool ret : {false, true}) out.push_back({id({r.spawn_p, r.spawn_g, pe, ret, {}}), right});
        }
        break;
      }
      default:
        break;
    }
    return out;
  }
};

inline std::shared_ptr<const TmAutomaton> t_m(const MonitorDpn& dpn, bool with_cut = false) {
  return std::make_shared<const TmAutomaton>(dpn, with_cut);
}

// ---------------------------------------------------------------------------
// Rule restriction

class DeltaAutomaton final : public TreeAutomaton {
 public:
  DeltaAutomaton(const MonitorDpn& dpn, RuleSet allowed, bool with_cut)
      : alpha_(make_alphabet(dpn, with_cut ? 1 : 0)), allowed_(std::move(allowed)) {}

  const AlphabetPtr& alphabet() const override { return alpha_; }
  std::vector<StateId> step(const TreeSymbol& sym, std::span<const StateId>) const override {
    return admits(sym) ? std::vector<StateId>{0} : std::vector<StateId>{};
  }
  bool accepting(StateId) const override { return true; }
  std::string describe(StateId) const override { return "."; }
  bool supports_down() const override { return true; }
  std::vector<StateId> initial_down() const override { return {0}; }
  std::vector<std::vector<StateId>> down(const TreeSymbol& sym, StateId) const override {
    if (!admits(sym)) return {};
    return {std::vector<StateId>(static_cast<std::size_t>(sym.arity()), 0)};
  }

 private:
  bool admits(const TreeSymbol& sym) const {
    if (sym.tag == Tag::Nil || sym.tag == Tag::Cut) return alpha_->contains(sym);
    return allowed_.contains(sym.rule);
  }

  AlphabetPtr alpha_;
  RuleSet allowed_;
};

inline AutomatonPtr t_delta(const MonitorDpn& dpn, const RuleSet& allowed, bool with_cut = false) {
  return std::make_shared<const DeltaAutomaton>(dpn, allowed, with_cut);
}

inline RuleSet all_rules(const MonitorDpn& dpn) {
  RuleSet s;
  for (RuleIndex i = 0; i < dpn.num_rules(); ++i) s.insert(i);
  return s;
}

// ---------------------------------------------------------------------------
// Acquisition structure

struct AhState {
  LockSet acquired;
  LockSet used;
  LockGraph graph;

  friend bool operator==(const AhState&, const AhState&) = default;
};

struct AhStateHash {
  std::size_t operator()(const AhState& s) const {
    return hash_combine(hash_combine(s.acquired.hash(), s.used.hash()), s.graph.hash());
  }
};

class AhAutomaton final : public detail::TypedAutomaton<AhState, AhStateHash> {
 public:
  AhAutomaton(const MonitorDpn& dpn, bool with_cut) : TypedAutomaton(dpn, make_alphabet(dpn, with_cut ? 1 : 0)) {}

  std::vector<StateId> step(const TreeSymbol& sym, std::span<const StateId> kids) const override {
    switch (sym.tag) {
      case Tag::Nil:
      case Tag::Ret:
        return {id({})};
      case Tag::Base:
      case Tag::NCall:
      case Tag::Cut:
        return {kids[0]};
      case Tag::Acq: {
        if (sym.reentrant) return {kids[0]};
        const AhState& c = state(kids[0]);
        if (c.acquired.contains(sym.lock)) return {};
        AhState n = c;
        n.acquired.insert(sym.lock);
        n.used.insert(sym.lock);
        c.used.for_each([&](std::size_t u) { n.graph.add_edge(sym.lock, u); });
        return {id(n)};
      }
      case Tag::RCall:
      case Tag::Use:
      case Tag::Spawn: {
        const AhState& a = state(kids[0]);
        const AhState& b = state(kids[1]);
        if (a.acquired.intersects(b.acquired)) return {};
        AhState n{a.acquired | b.acquired, a.used | b.used, a.graph | b.graph};
        if (sym.tag == Tag::Use && !sym.reentrant) n.used.insert(sym.lock);
        return {id(n)};
      }
    }
    return {};
  }

  bool accepting(StateId s) const override { return state(s).graph.acyclic(); }

  std::string describe(StateId s) const override {
    const AhState& t = state(s);
    return "(" + lockset_str(t.acquired) + "," + lockset_str(t.used) + "," + graph_str(t.graph) + ")";
  }

  bool has_order() const override { return true; }
  std::uint64_t order_class(StateId) const override { return 0; }
  bool subsumes(StateId a, StateId b) const override {
    const AhState& x = state(a);
    const AhState& y = state(b);
    return x.acquired.subset_of(y.acquired) && x.used.subset_of(y.used) && x.graph.subset_of(y.graph);
  }
};

inline AutomatonPtr t_ah(const MonitorDpn& dpn, bool with_cut = false) {
  return std::make_shared<const AhAutomaton>(dpn, with_cut);
}

// ---------------------------------------------------------------------------
// Cut well-formedness

/// States: 0 = no cut and no spawn, 1 = well-formed, 2 = spawned parts
/// well-formed but main-thread cut missing, 3 = spawns but no cuts.
class CwfAutomaton final : public TreeAutomaton {
 public:
  static constexpr StateId kBot = 0, kTop = 1, kTopBar = 2, kBotBar = 3;

  explicit CwfAutomaton(const MonitorDpn& dpn) : alpha_(make_alphabet(dpn, 1)) {}

  const AlphabetPtr& alphabet() const override { return alpha_; }

  std::vector<StateId> step(const TreeSymbol& sym, std::span<const StateId> kids) const override {
    auto in = [](StateId s, std::initializer_list<StateId> set) {
      return std::find(set.begin(), set.end(), s) != set.end();
    };
    switch (sym.tag) {
      case Tag::Nil:
      case Tag::Ret:
        return {kBot};
      case Tag::Base:
      case Tag::NCall:
      case Tag::Acq:
        return {kids[0]};
      case Tag::Cut:
        if (in(kids[0], {kBot, kBotBar})) return {kTop};
        return {};
      case Tag::RCall:
      case Tag::Use: {
        const StateId l = kids[0], r = kids[1];
        if (in(l, {kBot, kTopBar}) && r == kTop) return {kTop};
        if (l == kTop && in(r, {kBot, kBotBar})) return {kTop};
        if (l == kTopBar && in(r, {kBot, kTopBar})) return {kTopBar};
        if (l == kBotBar && in(r, {kBot, kBotBar})) return {kBotBar};
        if (l == kBot && r == kTopBar) return {kTopBar};
        if (l == kBot && r == kBotBar) return {kBotBar};
        if (l == kBot && r == kBot) return {kBot};
        return {};
      }
      case Tag::Spawn: {
        const StateId l = kids[0], r = kids[1];
        if (l == kTop && in(r, {kBot, kTopBar})) return {kTopBar};
        if (in(l, {kBot, kBotBar}) && in(r, {kBot, kBotBar})) return {kBotBar};
        if (l == kTop && r == kTop) return {kTop};
        return {};
      }
    }
    return {};
  }

  bool accepting(StateId s) const override { return s == kTop; }
  std::string describe(StateId s) const override {
    static const char* names[] = {"bot", "top", "top-bar", "bot-bar"};
    return names[s];
  }

 private:
  AlphabetPtr alpha_;
};

inline AutomatonPtr t_cwf(const MonitorDpn& dpn) { return std::make_shared<const CwfAutomaton>(dpn); }

// ---------------------------------------------------------------------------
// Marked-prefix transducer

/// States: 0 = subtree entirely after the cut, 1 = subtree contains the cut.
class CutTransducer final : public TreeTransducer {
 public:
  static constexpr TState kBot = 0, kTop = 1;

  explicit CutTransducer(const MonitorDpn& dpn) : in_(make_alphabet(dpn, 1)), out_(make_alphabet(dpn, 0)) {}

  const AlphabetPtr& input_alphabet() const override { return in_; }
  const AlphabetPtr& output_alphabet() const override { return out_; }

  std::vector<TransducerRule> rules(const TreeSymbol& sym, std::span<const TState> kids) const override {
    using T = Template;
    switch (sym.tag) {
      case Tag::Nil:
      case Tag::Ret:
        return {{kBot, T::node(sym)}};
      case Tag::Base:
      case Tag::NCall:
      case Tag::Acq:
        return {{kids[0], T::node(sym, {T::variable(0)})}};
      case Tag::Cut:
        if (kids[0] == kBot) return {{kTop, T::node(TreeSymbol::nil(sym.control, sym.stack))}};
        return {};
      case Tag::RCall:
      case Tag::Use: {
        if (kids[0] == kTop && kids[1] == kBot) {
          TreeSymbol open = sym;
          open.tag = sym.tag == Tag::RCall ? Tag::NCall : Tag::Acq;
          return {{kTop, T::node(open, {T::variable(0)})}};
        }
        if (kids[0] == kBot) return {{kids[1], T::node(sym, {T::variable(0), T::variable(1)})}};
        return {};
      }
      case Tag::Spawn:
        return {{kids[1], T::node(sym, {T::variable(0), T::variable(1)})}};
    }
    return {};
  }

  bool accepting(TState q) const override { return q == kTop; }
  std::string state_name(TState q) const override { return q == kTop ? "top" : "bot"; }

 private:
  AlphabetPtr in_, out_;
};

inline TransducerPtr t_ct(const MonitorDpn& dpn) { return std::make_shared<const CutTransducer>(dpn); }

// ---------------------------------------------------------------------------
// Rule restriction after the cut

/// States: 0 = no main-thread cut and only allowed rules, 1 = a disallowed
/// rule that must end up before the cut, 2 = main-thread cut seen.
class DeltaCutAutomaton final : public TreeAutomaton {
 public:
  static constexpr StateId kBot = 0, kPlus = 1, kTop = 2;

  DeltaCutAutomaton(const MonitorDpn& dpn, RuleSet allowed) : alpha_(make_alphabet(dpn, 1)), allowed_(std::move(allowed)) {}

  const AlphabetPtr& alphabet() const override { return alpha_; }

  std::vector<StateId> step(const TreeSymbol& sym, std::span<const StateId> kids) const override {
    const bool good = sym.rule == kNone || allowed_.contains(sym.rule);
    switch (sym.tag) {
      case Tag::Nil:
        return {kBot};
      case Tag::Ret:
        return {good ? kBot : kPlus};
      case Tag::Cut:
        if (kids[0] == kBot) return {kTop};
        return {};
      case Tag::Base:
      case Tag::NCall:
      case Tag::Acq:
        if (good || kids[0] == kTop) return {kids[0]};
        return {kPlus};
      case Tag::RCall:
      case Tag::Use:
      case Tag::Spawn: {
        const StateId l = kids[0], r = kids[1];
        const bool spawn = sym.tag == Tag::Spawn;
        if (!spawn) {
          if (l == kTop && r == kBot) return {kTop};
          if ((l == kBot || l == kPlus) && r == kTop) return {kTop};
        } else {
          if (l == kTop && r == kBot) return {good ? kBot : kPlus};
          if (l == kTop && r == kTop) return {kTop};
          if (l == kTop && r == kPlus) return {kPlus};
        }
        if (l == kBot && r == kBot) return {good ? kBot : kPlus};
        if (l == kPlus && (r == kBot || r == kPlus)) return {kPlus};
        if (l == kBot && r == kPlus) return {kPlus};
        return {};
      }
    }
    return {};
  }

  bool accepting(StateId s) const override { return s == kTop; }
  std::string describe(StateId s) const override {
    static const char* names[] = {"bot", "plus", "top"};
    return names[s];
  }

 private:
  AlphabetPtr alpha_;
  RuleSet allowed_;
};

inline AutomatonPtr t_delta_cut(const MonitorDpn& dpn, const RuleSet& allowed) {
  return std::make_shared<const DeltaCutAutomaton>(dpn, allowed);
}

// ---------------------------------------------------------------------------
// Release structure

struct RhState {
  bool cut = false;
  LockSet used;
  LockGraph graph;

  friend bool operator==(const RhState&, const RhState&) = default;
};

struct RhStateHash {
  std::size_t operator()(const RhState& s) const {
    return hash_combine(hash_combine(s.cut ? 1 : 0, s.used.hash()), s.graph.hash());
  }
};

class RhAutomaton final : public detail::TypedAutomaton<RhState, RhStateHash> {
 public:
  explicit RhAutomaton(const MonitorDpn& dpn) : TypedAutomaton(dpn, make_alphabet(dpn, 1)) {}

  std::vector<StateId> step(const TreeSymbol& sym, std::span<const StateId> kids) const override {
    switch (sym.tag) {
      case Tag::Nil:
      case Tag::Ret:
        return {id({})};
      case Tag::Base:
      case Tag::NCall:
      case Tag::Acq:
        return {kids[0]};
      case Tag::Cut: {
        const RhState& c = state(kids[0]);
        if (c.cut) return {};
        return {id({true, c.used, c.graph})};
      }
      case Tag::RCall:
      case Tag::Use: {
        const RhState& l = state(kids[0]);
        const RhState& r = state(kids[1]);
        if (r.cut) {
          if (l.cut) return {};
          return {id({true, r.used, l.graph | r.graph})};
        }
        if (sym.tag == Tag::RCall || sym.reentrant) return {id({l.cut, l.used | r.used, l.graph | r.graph})};
        if (!l.cut) return {id({false, (l.used | r.used).with(sym.lock), l.graph | r.graph})};
        LockGraph g = l.graph | r.graph;
        l.used.for_each([&](std::size_t y) { g.add_edge(y, sym.lock); });
        return {id({true, l.used | r.used, g})};
      }
      case Tag::Spawn: {
        // The spawned thread's cut flag is not constrained.
        const RhState& s = state(kids[0]);
        const RhState& r = state(kids[1]);
        return {id({r.cut, r.used, s.graph | r.graph})};
      }
    }
    return {};
  }

  bool accepting(StateId s) const override { return state(s).graph.acyclic(); }

  std::string describe(StateId s) const override {
    const RhState& t = state(s);
    return std::string("(") + (t.cut ? "T" : "F") + "," + lockset_str(t.used) + "," + graph_str(t.graph) + ")";
  }

  bool has_order() const override { return true; }
  std::uint64_t order_class(StateId s) const override { return state(s).cut ? 1 : 0; }
  bool subsumes(StateId a, StateId b) const override {
    const RhState& x = state(a);
    const RhState& y = state(b);
    return x.cut == y.cut && x.used.subset_of(y.used) && x.graph.subset_of(y.graph);
  }
};

inline AutomatonPtr t_rh(const MonitorDpn& dpn) { return std::make_shared<const RhAutomaton>(dpn); }

// ---------------------------------------------------------------------------
// Held-at-cut check

/// `acquired`: final acquisitions before the cut. `used_main`: uses after the
/// cut by the subtree's own thread, dropped once the subtree is known to lie
/// before the cut. `used_spawned`: post-cut uses by spawned threads, never dropped.
struct HtState {
  bool cut = false;
  LockSet acquired;
  LockSet used_main;
  LockSet used_spawned;

  friend bool operator==(const HtState&, const HtState&) = default;
};

struct HtStateHash {
  std::size_t operator()(const HtState& s) const {
    return hash_combine(hash_combine(hash_combine(s.cut ? 1 : 0, s.acquired.hash()), s.used_main.hash()),
                        s.used_spawned.hash());
  }
};

class HtAutomaton final : public detail::TypedAutomaton<HtState, HtStateHash> {
 public:
  explicit HtAutomaton(const MonitorDpn& dpn) : TypedAutomaton(dpn, make_alphabet(dpn, 1)) {}

  std::vector<StateId> step(const TreeSymbol& sym, std::span<const StateId> kids) const override {
    switch (sym.tag) {
      case Tag::Nil:
      case Tag::Ret:
        return {id({})};
      case Tag::Base:
      case Tag::NCall:
        return {kids[0]};
      case Tag::Acq: {
        if (sym.reentrant) return {kids[0]};
        HtState n = state(kids[0]);
        (n.cut ? n.acquired : n.used_main).insert(sym.lock);
        return {id(n)};
      }
      case Tag::Cut: {
        HtState n = state(kids[0]);
        if (n.cut) return {};
        n.cut = true;
        return {id(n)};
      }
      case Tag::RCall:
      case Tag::Use: {
        const HtState& l = state(kids[0]);
        const HtState& r = state(kids[1]);
        if (l.cut && r.cut) return {};
        HtState n;
        n.cut = l.cut || r.cut;
        n.acquired = l.acquired | r.acquired;
        n.used_spawned = l.used_spawned | r.used_spawned;
        if (r.cut) {
          n.used_main = r.used_main;
        } else {
          n.used_main = l.used_main | r.used_main;
          if (!n.cut && sym.tag == Tag::Use && !sym.reentrant) n.used_main.insert(sym.lock);
        }
        return {id(n)};
      }
      case Tag::Spawn: {
        const HtState& s = state(kids[0]);
        const HtState& r = state(kids[1]);
        HtState n{r.cut, s.acquired | r.acquired, r.used_main, r.used_spawned | s.used_main | s.used_spawned};
        return {id(n)};
      }
    }
    return {};
  }

  bool accepting(StateId s) const override {
    const HtState& t = state(s);
    return !t.acquired.intersects(t.used_main | t.used_spawned);
  }

  std::string describe(StateId s) const override {
    const HtState& t = state(s);
    return std::string("(") + (t.cut ? "T" : "F") + "," + lockset_str(t.acquired) + "," + lockset_str(t.used_main) +
           "," + lockset_str(t.used_spawned) + ")";
  }

  bool has_order() const override { return true; }
  std::uint64_t order_class(StateId s) const override { return state(s).cut ? 1 : 0; }
  bool subsumes(StateId a, StateId b) const override {
    const HtState& x = state(a);
    const HtState& y = state(b);
    return x.cut == y.cut && x.acquired.subset_of(y.acquired) && x.used_main.subset_of(y.used_main) &&
           x.used_spawned.subset_of(y.used_spawned);
  }
};

inline AutomatonPtr t_ht(const MonitorDpn& dpn) { return std::make_shared<const HtAutomaton>(dpn); }

// ---------------------------------------------------------------------------
// May-happen-in-parallel and top-of-stack automata

/// One flag per pattern; a thread whose top symbol lies in pattern i may raise
/// flag i. Accepts when every flag is raised.
class MhpAutomaton final : public TreeAutomaton {
 public:
  MhpAutomaton(const MonitorDpn& dpn, std::vector<BitSet> patterns, bool with_cut)
      : alpha_(make_alphabet(dpn, with_cut ? 1 : 0)), patterns_(std::move(patterns)) {
    if (patterns_.empty() || patterns_.size() > 31) throw Error(ErrorCode::Alphabet, "need 1 to 31 patterns");
  }

  const AlphabetPtr& alphabet() const override { return alpha_; }

  std::vector<StateId> step(const TreeSymbol& sym, std::span<const StateId> kids) const override {
    switch (sym.tag) {
      case Tag::Nil: {
        std::vector<StateId> out;
        for (std::size_t i = 0; i < patterns_.size(); ++i) {
          if (patterns_[i].contains(sym.stack)) out.push_back(StateId{1} << i);
        }
        if (out.empty()) out.push_back(0);
        sort_unique(out);
        return out;
      }
      case Tag::Ret:
        return {0};
      case Tag::Base:
      case Tag::NCall:
      case Tag::Acq:
      case Tag::Cut:
        return {kids[0]};
      case Tag::RCall:
      case Tag::Use:
      case Tag::Spawn:
        return {kids[0] | kids[1]};
    }
    return {};
  }

  bool accepting(StateId s) const override { return s == (StateId{1} << patterns_.size()) - 1; }

 private:
  AlphabetPtr alpha_;
  std::vector<BitSet> patterns_;
};

inline AutomatonPtr t_mhp(const MonitorDpn& dpn, std::vector<BitSet> patterns, bool with_cut = false) {
  return std::make_shared<const MhpAutomaton>(dpn, std::move(patterns), with_cut);
}

class TopAutomaton final : public TreeAutomaton {
 public:
  TopAutomaton(const MonitorDpn& dpn, BitSet tops, bool with_cut)
      : alpha_(make_alphabet(dpn, with_cut ? 1 : 0)), tops_(std::move(tops)) {}

  const AlphabetPtr& alphabet() const override { return alpha_; }

  std::vector<StateId> step(const TreeSymbol& sym, std::span<const StateId> kids) const override {
    switch (sym.tag) {
      case Tag::Nil:
        return {tops_.contains(sym.stack) ? 1U : 0U};
      case Tag::Ret:
        return {0};
      case Tag::Base:
      case Tag::NCall:
      case Tag::Acq:
      case Tag::Cut:
        return {kids[0]};
      case Tag::RCall:
      case Tag::Use:
      case Tag::Spawn:
        return {kids[0] | kids[1]};
    }
    return {};
  }

  bool accepting(StateId s) const override { return s == 1; }

 private:
  AlphabetPtr alpha_;
  BitSet tops_;
};

inline AutomatonPtr t_top(const MonitorDpn& dpn, const BitSet& tops, bool with_cut = false) {
  return std::make_shared<const TopAutomaton>(dpn, tops, with_cut);
}

}  // namespace mdpn
