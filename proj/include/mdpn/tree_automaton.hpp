#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mdpn/bitset.hpp"
#include "mdpn/error.hpp"
#include "mdpn/exec_tree.hpp"

namespace mdpn {

using StateId = std::uint32_t;

/// Finite ranked alphabet with a fixed symbol order (used for tie-breaking).
class Alphabet {
 public:
  Alphabet() = default;
  explicit Alphabet(std::vector<TreeSymbol> syms) {
    for (const auto& s : syms) add(s);
  }

  void add(const TreeSymbol& s) {
    if (index_.count(s)) return;
    index_.emplace(s, static_cast<std::uint32_t>(syms_.size()));
    syms_.push_back(s);
  }

  bool contains(const TreeSymbol& s) const { return index_.count(s) != 0; }

  std::optional<std::uint32_t> index_of(const TreeSymbol& s) const {
    auto it = index_.find(s);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::vector<TreeSymbol>& symbols() const { return syms_; }
  std::size_t size() const { return syms_.size(); }

  /// Same symbol set, irrespective of order.
  bool same_set(const Alphabet& other) const {
    if (size() != other.size()) return false;
    return std::all_of(syms_.begin(), syms_.end(), [&](const TreeSymbol& s) { return other.contains(s); });
  }

  Alphabet without(const std::function<bool(const TreeSymbol&)>& drop) const {
    Alphabet a;
    for (const auto& s : syms_) {
      if (!drop(s)) a.add(s);
    }
    return a;
  }

 private:
  std::vector<TreeSymbol> syms_;
  std::unordered_map<TreeSymbol, std::uint32_t, TreeSymbolHash> index_;
};

using AlphabetPtr = std::shared_ptr<const Alphabet>;

/// Nondeterministic bottom-up tree automaton with lazily enumerated states.
///
/// Beyond the transition function an automaton may expose:
///  - slot keys: binary symbols only combine children whose keys agree, which
///    lets saturation index partners instead of trying every pair;
///  - a subsumption preorder used for pruning;
///  - a top-down view (initial_down/down) for the directed emptiness check.
class TreeAutomaton {
 public:
  virtual ~TreeAutomaton() = default;

  virtual const AlphabetPtr& alphabet() const = 0;
  /// Result states, sorted and duplicate-free.
  virtual std::vector<StateId> step(const TreeSymbol& sym, std::span<const StateId> kids) const = 0;
  virtual bool accepting(StateId s) const = 0;
  virtual std::string describe(StateId s) const { return std::to_string(s); }

  virtual std::optional<std::uint64_t> slot_key(const TreeSymbol&, int, StateId) const { return 0; }

  virtual bool has_order() const { return false; }
  virtual std::uint64_t order_class(StateId s) const { return s; }
  /// True when `a` is at least as permissive as `b` (only asked within one order class).
  virtual bool subsumes(StateId a, StateId b) const { return a == b; }

  virtual bool supports_down() const { return false; }
  virtual std::vector<StateId> initial_down() const { return {}; }
  virtual std::vector<std::vector<StateId>> down(const TreeSymbol&, StateId) const { return {}; }
};

using AutomatonPtr = std::shared_ptr<const TreeAutomaton>;

/// Thread-safe interning of typed states.
template <class S, class Hash = std::hash<S>>
class StateTable {
 public:
  StateId intern(const S& s) const {
    std::lock_guard lock(mu_);
    auto it = ids_.find(s);
    if (it != ids_.end()) return it->second;
    const auto id = static_cast<StateId>(states_.size());
    states_.push_back(s);
    ids_.emplace(s, id);
    return id;
  }

  const S& get(StateId id) const {
    std::lock_guard lock(mu_);
    return states_[id];
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return states_.size();
  }

 private:
  mutable std::mutex mu_;
  mutable std::deque<S> states_;
  mutable std::unordered_map<S, StateId, Hash> ids_;
};

inline void sort_unique(std::vector<StateId>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

// ---------------------------------------------------------------------------
// Universal automaton and product

class UniversalAutomaton final : public TreeAutomaton {
 public:
  explicit UniversalAutomaton(AlphabetPtr alpha) : alpha_(std::move(alpha)) {}
  const AlphabetPtr& alphabet() const override { return alpha_; }
  std::vector<StateId> step(const TreeSymbol& sym, std::span<const StateId>) const override {
    if (!alpha_->contains(sym)) return {};
    return {0};
  }
  bool accepting(StateId) const override { return true; }
  std::string describe(StateId) const override { return "*"; }
  bool supports_down() const override { return true; }
  std::vector<StateId> initial_down() const override { return {0}; }
  std::vector<std::vector<StateId>> down(const TreeSymbol& sym, StateId) const override {
    return {std::vector<StateId>(static_cast<std::size_t>(sym.arity()), 0)};
  }

 private:
  AlphabetPtr alpha_;
};

class ProductAutomaton final : public TreeAutomaton {
 public:
  ProductAutomaton(AutomatonPtr a, AutomatonPtr b) : a_(std::move(a)), b_(std::move(b)) {
    if (!a_->alphabet()->same_set(*b_->alphabet())) {
      throw Error(ErrorCode::Alphabet, "product of automata over different alphabets");
    }
  }

  const AlphabetPtr& alphabet() const override { return a_->alphabet(); }
  const TreeAutomaton& left() const { return *a_; }
  const TreeAutomaton& right() const { return *b_; }

  std::pair<StateId, StateId> components(StateId s) const { return table_.get(s); }
  StateId pair_state(StateId a, StateId b) const { return table_.intern({a, b}); }

  std::vector<StateId> step(const TreeSymbol& sym, std::span<const StateId> kids) const override {
    std::vector<StateId> ka(kids.size()), kb(kids.size());
    for (std::size_t i = 0; i < kids.size(); ++i) std::tie(ka[i], kb[i]) = table_.get(kids[i]);
    const auto ra = a_->step(sym, ka);
    if (ra.empty()) return {};
    const auto rb = b_->step(sym, kb);
    std::vector<StateId> out;
    out.reserve(ra.size() * rb.size());
    for (auto x : ra) {
      for (auto y : rb) out.push_back(table_.intern({x, y}));
    }
    sort_unique(out);
    return out;
  }

  bool accepting(StateId s) const override {
    auto [x, y] = table_.get(s);
    return a_->accepting(x) && b_->accepting(y);
  }

  std::string describe(StateId s) const override {
    auto [x, y] = table_.get(s);
    return "<" + a_->describe(x) + ", " + b_->describe(y) + ">";
  }

  std::optional<std::uint64_t> slot_key(const TreeSymbol& sym, int pos, StateId s) const override {
    auto [x, y] = table_.get(s);
    auto kx = a_->slot_key(sym, pos, x);
    if (!kx) return std::nullopt;
    auto ky = b_->slot_key(sym, pos, y);
    if (!ky) return std::nullopt;
    return hash_combine(*kx, *ky);
  }

  bool has_order() const override { return a_->has_order() || b_->has_order(); }
  std::uint64_t order_class(StateId s) const override {
    auto [x, y] = table_.get(s);
    return hash_combine(a_->order_class(x), b_->order_class(y));
  }
  bool subsumes(StateId s, StateId t) const override {
    auto [sx, sy] = table_.get(s);
    auto [tx, ty] = table_.get(t);
    return a_->subsumes(sx, tx) && b_->subsumes(sy, ty);
  }

  bool supports_down() const override { return a_->supports_down() && b_->supports_down(); }
  std::vector<StateId> initial_down() const override {
    std::vector<StateId> out;
    for (auto x : a_->initial_down()) {
      for (auto y : b_->initial_down()) out.push_back(table_.intern({x, y}));
    }
    return out;
  }
  std::vector<std::vector<StateId>> down(const TreeSymbol& sym, StateId s) const override {
    auto [x, y] = table_.get(s);
    std::vector<std::vector<StateId>> out;
    for (const auto& ka : a_->down(sym, x)) {
      for (const auto& kb : b_->down(sym, y)) {
        std::vector<StateId> k(ka.size());
        for (std::size_t i = 0; i < ka.size(); ++i) k[i] = table_.intern({ka[i], kb[i]});
        out.push_back(std::move(k));
      }
    }
    return out;
  }

 private:
  struct PairHash {
    std::size_t operator()(const std::pair<StateId, StateId>& p) const {
      return hash_combine(std::hash<StateId>{}(p.first), std::hash<StateId>{}(p.second));
    }
  };
  AutomatonPtr a_, b_;
  StateTable<std::pair<StateId, StateId>, PairHash> table_;
};

inline std::shared_ptr<const ProductAutomaton> product(AutomatonPtr a, AutomatonPtr b) {
  return std::make_shared<const ProductAutomaton>(std::move(a), std::move(b));
}

/// Left-nested product of one or more automata.
inline AutomatonPtr product_all(const std::vector<AutomatonPtr>& parts) {
  if (parts.empty()) throw Error(ErrorCode::Alphabet, "empty product");
  AutomatonPtr acc = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) acc = product(acc, parts[i]);
  return acc;
}

// ---------------------------------------------------------------------------
// Membership

/// All states of `a` reachable at the root of `t`.
inline std::vector<StateId> run_states(const TreeAutomaton& a, const ExecTree& t) {
  if (!a.alphabet()->contains(t.symbol())) {
    throw Error(ErrorCode::Alphabet, std::string("symbol ") + tag_name(t.symbol().tag) + " not in alphabet");
  }
  std::vector<std::vector<StateId>> kid_states;
  for (const auto& k : t.kids()) {
    kid_states.push_back(run_states(a, k));
    if (kid_states.back().empty()) {
      // still validate the remaining subtrees' symbols
      for (std::size_t i = kid_states.size(); i < t.kids().size(); ++i) run_states(a, t.kid(i));
      return {};
    }
  }
  std::vector<StateId> out;
  std::vector<StateId> choice(kid_states.size());
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == kid_states.size()) {
      auto r = a.step(t.symbol(), choice);
      out.insert(out.end(), r.begin(), r.end());
      return;
    }
    for (auto s : kid_states[i]) {
      choice[i] = s;
      rec(i + 1);
    }
  };
  rec(0);
  sort_unique(out);
  return out;
}

inline bool accepts(const TreeAutomaton& a, const ExecTree& t) {
  auto states = run_states(a, t);
  return std::any_of(states.begin(), states.end(), [&](StateId s) { return a.accepting(s); });
}

// ---------------------------------------------------------------------------
// Emptiness

struct Witness {
  ExecTree tree;
  /// State of the accepting run at each node, in preorder.
  std::vector<StateId> states;
};

struct EmptinessOptions {
  bool prune = false;
  const std::atomic<bool>* cancel = nullptr;
  /// Only states passing the filter are ever created.
  std::function<bool(StateId)> filter;
};

struct EmptinessResult {
  bool empty = true;
  std::optional<Witness> witness;
  /// Number of states finalized by saturation.
  std::size_t explored = 0;
  std::size_t pruned = 0;
};

namespace detail {

class Saturator {
 public:
  Saturator(const TreeAutomaton& a, EmptinessOptions opt) : a_(a), opt_(std::move(opt)) {
    for (std::uint32_t i = 0; i < a_.alphabet()->size(); ++i) {
      const auto& s = a_.alphabet()->symbols()[i];
      (s.arity() == 0 ? leaves_ : s.arity() == 1 ? unary_ : binary_).push_back(i);
    }
  }

  EmptinessResult run() {
    EmptinessResult res;
    for (auto si : leaves_) offer(si, {});
    std::size_t iter = 0;
    while (!queue_.empty()) {
      if (opt_.cancel && (iter++ & 255U) == 0 && opt_.cancel->load()) {
        throw Error(ErrorCode::Cancelled, "emptiness check cancelled");
      }
      Cand c = queue_.top();
      queue_.pop();
      if (final_.count(c.state)) continue;
      if (opt_.prune && a_.has_order() && is_subsumed(c.state)) {
        ++res.pruned;
        continue;
      }
      finalize(c);
      ++res.explored;
      if (a_.accepting(c.state)) {
        res.empty = false;
        res.witness = build_witness(c.state);
        return res;
      }
      expand(c.state);
    }
    return res;
  }

 private:
  struct Cand {
    std::size_t cost;
    std::uint32_t sym;
    std::vector<std::size_t> ranks;
    StateId state;
    std::vector<StateId> kids;

    bool operator>(const Cand& o) const {
      if (cost != o.cost) return cost > o.cost;
      if (sym != o.sym) return sym > o.sym;
      if (ranks != o.ranks) return ranks > o.ranks;
      return state > o.state;
    }
  };

  struct Final {
    std::size_t cost;
    std::size_t rank;
    std::uint32_t sym;
    std::vector<StateId> kids;
  };

  struct JoinKey {
    std::uint32_t sym;
    int pos;
    std::uint64_t key;
    bool operator==(const JoinKey&) const = default;
  };
  struct JoinKeyHash {
    std::size_t operator()(const JoinKey& k) const {
      return hash_combine(hash_combine(k.sym, static_cast<std::size_t>(k.pos)), k.key);
    }
  };

  void offer(std::uint32_t sym, std::vector<StateId> kids) {
    std::size_t cost = 1;
    std::vector<std::size_t> ranks;
    for (auto k : kids) {
      const auto& f = final_.at(k);
      cost += f.cost;
      ranks.push_back(f.rank);
    }
    for (auto s : a_.step(a_.alphabet()->symbols()[sym], kids)) {
      if (final_.count(s)) continue;
      if (opt_.filter && !opt_.filter(s)) continue;
      Cand c{cost, sym, ranks, s, kids};
      auto it = best_.find(s);
      if (it != best_.end() && !(it->second > c)) continue;
      best_[s] = c;
      queue_.push(std::move(c));
    }
  }

  void finalize(const Cand& c) {
    final_.emplace(c.state, Final{c.cost, final_.size(), c.sym, c.kids});
    best_.erase(c.state);
    if (opt_.prune && a_.has_order()) classes_[a_.order_class(c.state)].push_back(c.state);
  }

  bool is_subsumed(StateId s) const {
    auto it = classes_.find(a_.order_class(s));
    if (it == classes_.end()) return false;
    return std::any_of(it->second.begin(), it->second.end(), [&](StateId t) { return a_.subsumes(t, s); });
  }

  void expand(StateId s) {
    for (auto si : unary_) offer(si, {s});
    for (auto si : binary_) {
      const auto& sym = a_.alphabet()->symbols()[si];
      for (int pos = 0; pos < 2; ++pos) {
        auto k = a_.slot_key(sym, pos, s);
        if (!k) continue;
        joins_[JoinKey{si, pos, *k}].push_back(s);
        auto it = joins_.find(JoinKey{si, 1 - pos, *k});
        if (it == joins_.end()) continue;
        // copy: offer() never touches joins_, but keep iteration independent anyway
        const std::vector<StateId> partners = it->second;
        for (auto t : partners) {
          if (pos == 0) {
            offer(si, {s, t});
          } else {
            offer(si, {t, s});
          }
        }
      }
    }
  }

  Witness build_witness(StateId root) const {
    Witness w;
    std::function<ExecTree(StateId)> rec = [&](StateId s) -> ExecTree {
      const auto& f = final_.at(s);
      w.states.push_back(s);
      std::vector<ExecTree> kids;
      for (auto k : f.kids) kids.push_back(rec(k));
      return ExecTree::make(a_.alphabet()->symbols()[f.sym], std::move(kids));
    };
    w.tree = rec(root);
    return w;
  }

  const TreeAutomaton& a_;
  EmptinessOptions opt_;
  std::vector<std::uint32_t> leaves_, unary_, binary_;
  std::priority_queue<Cand, std::vector<Cand>, std::greater<>> queue_;
  std::unordered_map<StateId, Cand> best_;
  std::unordered_map<StateId, Final> final_;
  std::unordered_map<JoinKey, std::vector<StateId>, JoinKeyHash> joins_;
  std::unordered_map<std::uint64_t, std::vector<StateId>> classes_;
};

}  // namespace detail

/// Uniform-cost saturation; a nonempty result carries a witness of minimal node count.
inline EmptinessResult is_empty(const TreeAutomaton& a, EmptinessOptions opt = {}) {
  return detail::Saturator(a, std::move(opt)).run();
}

/// States reachable top-down from `down`'s initial states.
inline std::unordered_set<StateId> top_down_reachable(const TreeAutomaton& down,
                                                      const std::atomic<bool>* cancel = nullptr) {
  if (!down.supports_down()) throw Error(ErrorCode::Alphabet, "automaton has no top-down view");
  std::unordered_set<StateId> seen;
  std::vector<StateId> work;
  for (auto s : down.initial_down()) {
    if (seen.insert(s).second) work.push_back(s);
  }
  std::size_t iter = 0;
  while (!work.empty()) {
    if (cancel && (iter++ & 255U) == 0 && cancel->load()) throw Error(ErrorCode::Cancelled, "cancelled");
    const StateId s = work.back();
    work.pop_back();
    for (const auto& sym : down.alphabet()->symbols()) {
      for (const auto& kids : down.down(sym, s)) {
        for (auto k : kids) {
          if (seen.insert(k).second) work.push_back(k);
        }
      }
    }
  }
  return seen;
}

struct DirectedResult : EmptinessResult {
  /// Size of the top-down reachable set of the down factor.
  std::size_t down_states = 0;
  std::shared_ptr<const ProductAutomaton> product;
};

/// Emptiness of product(up, down), restricting bottom-up saturation to
/// product states whose `down` component is reachable top-down.
inline DirectedResult directed_is_empty(AutomatonPtr up, AutomatonPtr down, EmptinessOptions opt = {}) {
  auto reach = std::make_shared<std::unordered_set<StateId>>(top_down_reachable(*down, opt.cancel));
  auto prod = product(std::move(up), std::move(down));
  auto outer = opt.filter;
  opt.filter = [prod, reach, outer](StateId s) {
    if (!reach->count(prod->components(s).second)) return false;
    return !outer || outer(s);
  };
  DirectedResult res;
  static_cast<EmptinessResult&>(res) = is_empty(*prod, std::move(opt));
  res.down_states = reach->size();
  res.product = prod;
  return res;
}

// ---------------------------------------------------------------------------
// Bounded enumeration

/// All accepted trees with at most `max_nodes` nodes, sorted.
inline std::vector<ExecTree> enumerate_accepted(const TreeAutomaton& a, std::size_t max_nodes) {
  using Entry = std::pair<ExecTree, std::vector<StateId>>;
  std::vector<std::vector<Entry>> layer(max_nodes + 1);
  std::vector<ExecTree> out;
  const auto& syms = a.alphabet()->symbols();
  auto add = [&](std::size_t n, const TreeSymbol& s, std::vector<ExecTree> kids, std::vector<StateId> states) {
    if (states.empty()) return;
    ExecTree t = ExecTree::make(s, std::move(kids));
    if (std::any_of(states.begin(), states.end(), [&](StateId q) { return a.accepting(q); })) out.push_back(t);
    layer[n].emplace_back(std::move(t), std::move(states));
  };
  auto step_all = [&](const TreeSymbol& s, const std::vector<const std::vector<StateId>*>& kid_states) {
    std::vector<StateId> res;
    std::vector<StateId> choice(kid_states.size());
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
      if (i == kid_states.size()) {
        auto r = a.step(s, choice);
        res.insert(res.end(), r.begin(), r.end());
        return;
      }
      for (auto q : *kid_states[i]) {
        choice[i] = q;
        rec(i + 1);
      }
    };
    rec(0);
    sort_unique(res);
    return res;
  };
  // Binary steps only combine children whose slot keys agree.
  auto step_pair = [&](const TreeSymbol& s, const std::vector<StateId>& ql, const std::vector<StateId>& qr) {
    std::unordered_map<std::uint64_t, std::vector<StateId>> right;
    for (StateId q : qr) {
      if (auto k = a.slot_key(s, 1, q)) right[*k].push_back(q);
    }
    std::vector<StateId> res;
    for (StateId l : ql) {
      auto k = a.slot_key(s, 0, l);
      if (!k) continue;
      auto it = right.find(*k);
      if (it == right.end()) continue;
      for (StateId r : it->second) {
        const StateId kids[2] = {l, r};
        auto out = a.step(s, kids);
        res.insert(res.end(), out.begin(), out.end());
      }
    }
    sort_unique(res);
    return res;
  };
  for (std::size_t n = 1; n <= max_nodes; ++n) {
    for (const auto& s : syms) {
      if (s.arity() == 0 && n == 1) {
        add(n, s, {}, a.step(s, {}));
      } else if (s.arity() == 1 && n >= 2) {
        for (const auto& [t, qs] : layer[n - 1]) add(n, s, {t}, step_all(s, {&qs}));
      } else if (s.arity() == 2 && n >= 3) {
        for (std::size_t i = 1; i + 1 < n; ++i) {
          for (const auto& [tl, ql] : layer[i]) {
            for (const auto& [tr, qr] : layer[n - 1 - i]) add(n, s, {tl, tr}, step_pair(s, ql, qr));
          }
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Finds t' in L(a) such that removing the unary symbols in `inserted` from t'
/// gives `t`. Chains of inserted symbols may appear above any node of `t`.
inline std::optional<ExecTree> find_preimage_with_unary(const TreeAutomaton& a,
                                                        const std::function<bool(const TreeSymbol&)>& inserted,
                                                        const ExecTree& t) {
  std::vector<TreeSymbol> extra;
  for (const auto& s : a.alphabet()->symbols()) {
    if (inserted(s)) {
      if (s.arity() != 1) throw Error(ErrorCode::Arity, "inserted symbols must be unary");
      extra.push_back(s);
    }
  }
  // For each node: reachable states with a way to rebuild the subtree.
  using Builder = std::function<ExecTree()>;
  std::function<std::unordered_map<StateId, Builder>(const ExecTree&)> go =
      [&](const ExecTree& n) -> std::unordered_map<StateId, Builder> {
    std::vector<std::unordered_map<StateId, Builder>> kid_maps;
    for (const auto& k : n.kids()) {
      kid_maps.push_back(go(k));
      if (kid_maps.back().empty()) return {};
    }
    std::unordered_map<StateId, Builder> here;
    std::vector<StateId> choice(kid_maps.size());
    std::vector<Builder> builders(kid_maps.size());
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
      if (i == kid_maps.size()) {
        for (auto s : a.step(n.symbol(), choice)) {
          if (here.count(s)) continue;
          here.emplace(s, [sym = n.symbol(), builders]() {
            std::vector<ExecTree> kids;
            for (const auto& b : builders) kids.push_back(b());
            return ExecTree::make(sym, std::move(kids));
          });
        }
        return;
      }
      for (const auto& [s, b] : kid_maps[i]) {
        choice[i] = s;
        builders[i] = b;
        rec(i + 1);
      }
    };
    rec(0);
    std::vector<StateId> work;
    for (const auto& [s, b] : here) work.push_back(s);
    while (!work.empty()) {
      const StateId s = work.back();
      work.pop_back();
      const Builder inner = here.at(s);
      for (const auto& sym : extra) {
        const StateId one[1] = {s};
        for (auto r : a.step(sym, one)) {
          if (here.count(r)) continue;
          here.emplace(r, [sym, inner]() { return ExecTree::make(sym, {inner()}); });
          work.push_back(r);
        }
      }
    }
    return here;
  };
  auto root = go(t);
  std::vector<StateId> acc;
  for (const auto& [s, b] : root) {
    if (a.accepting(s)) acc.push_back(s);
  }
  if (acc.empty()) return std::nullopt;
  std::sort(acc.begin(), acc.end());
  return root.at(acc.front())();
}

}  // namespace mdpn
