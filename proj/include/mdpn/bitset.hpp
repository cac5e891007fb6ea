#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace mdpn {

inline std::size_t hash_combine(std::size_t seed, std::size_t value) {
  return seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

/// Dynamically sized set of small integers. Trailing zero words are trimmed so
/// that equal sets have equal representations regardless of history.
class BitSet {
 public:
  BitSet() = default;

  static BitSet single(std::size_t i) {
    BitSet s;
    s.insert(i);
    return s;
  }

  bool contains(std::size_t i) const {
    const std::size_t w = i / 64;
    return w < words_.size() && ((words_[w] >> (i % 64)) & 1U) != 0;
  }

  void insert(std::size_t i) {
    const std::size_t w = i / 64;
    if (w >= words_.size()) words_.resize(w + 1, 0);
    words_[w] |= std::uint64_t{1} << (i % 64);
  }

  void erase(std::size_t i) {
    const std::size_t w = i / 64;
    if (w >= words_.size()) return;
    words_[w] &= ~(std::uint64_t{1} << (i % 64));
    trim();
  }

  BitSet with(std::size_t i) const {
    BitSet s = *this;
    s.insert(i);
    return s;
  }

  BitSet without(std::size_t i) const {
    BitSet s = *this;
    s.erase(i);
    return s;
  }

  BitSet& operator|=(const BitSet& other) {
    if (other.words_.size() > words_.size()) words_.resize(other.words_.size(), 0);
    for (std::size_t i = 0; i < other.words_.size(); ++i) words_[i] |= other.words_[i];
    return *this;
  }

  friend BitSet operator|(BitSet a, const BitSet& b) { return a |= b; }

  friend BitSet operator&(const BitSet& a, const BitSet& b) {
    BitSet r;
    r.words_.resize(std::min(a.words_.size(), b.words_.size()));
    for (std::size_t i = 0; i < r.words_.size(); ++i) r.words_[i] = a.words_[i] & b.words_[i];
    r.trim();
    return r;
  }

  bool intersects(const BitSet& other) const {
    const std::size_t n = std::min(words_.size(), other.words_.size());
    for (std::size_t i = 0; i < n; ++i) {
      if ((words_[i] & other.words_[i]) != 0) return true;
    }
    return false;
  }

  bool subset_of(const BitSet& other) const {
    if (words_.size() > other.words_.size()) return false;
    for (std::size_t i = 0; i < words_.size(); ++i) {
      if ((words_[i] & ~other.words_[i]) != 0) return false;
    }
    return true;
  }

  bool empty() const { return words_.empty(); }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  template <class F>
  void for_each(F&& f) const {
    for (std::size_t w = 0; w < words_.size(); ++w) {
      std::uint64_t bits = words_[w];
      while (bits != 0) {
        const int b = std::countr_zero(bits);
        f(w * 64 + static_cast<std::size_t>(b));
        bits &= bits - 1;
      }
    }
  }

  std::vector<std::size_t> elements() const {
    std::vector<std::size_t> out;
    for_each([&](std::size_t i) { out.push_back(i); });
    return out;
  }

  std::size_t hash() const {
    std::size_t h = 0x51ed27;
    for (auto w : words_) h = hash_combine(h, std::hash<std::uint64_t>{}(w));
    return h;
  }

  friend bool operator==(const BitSet&, const BitSet&) = default;
  friend auto operator<=>(const BitSet& a, const BitSet& b) { return a.words_ <=> b.words_; }

 private:
  void trim() {
    while (!words_.empty() && words_.back() == 0) words_.pop_back();
  }

  std::vector<std::uint64_t> words_;
};

using LockSet = BitSet;
using RuleSet = BitSet;

/// Directed graph over lock indices; used for acquisition and release graphs.
class LockGraph {
 public:
  void add_edge(std::size_t from, std::size_t to) {
    if (from >= succ_.size()) succ_.resize(from + 1);
    succ_[from].insert(to);
  }

  bool has_edge(std::size_t from, std::size_t to) const {
    return from < succ_.size() && succ_[from].contains(to);
  }

  LockGraph& operator|=(const LockGraph& other) {
    if (other.succ_.size() > succ_.size()) succ_.resize(other.succ_.size());
    for (std::size_t i = 0; i < other.succ_.size(); ++i) succ_[i] |= other.succ_[i];
    return *this;
  }

  friend LockGraph operator|(LockGraph a, const LockGraph& b) { return a |= b; }

  bool subset_of(const LockGraph& other) const {
    for (std::size_t i = 0; i < succ_.size(); ++i) {
      if (succ_[i].empty()) continue;
      if (i >= other.succ_.size() || !succ_[i].subset_of(other.succ_[i])) return false;
    }
    return true;
  }

  bool empty() const {
    return std::all_of(succ_.begin(), succ_.end(), [](const BitSet& s) { return s.empty(); });
  }

  bool acyclic() const {
    // 0 = unvisited, 1 = on stack, 2 = done
    std::vector<int> mark(succ_.size(), 0);
    std::function<bool(std::size_t)> visit = [&](std::size_t v) -> bool {
      if (v >= succ_.size()) return true;
      if (mark[v] == 1) return false;
      if (mark[v] == 2) return true;
      mark[v] = 1;
      bool ok = true;
      succ_[v].for_each([&](std::size_t w) {
        if (ok && !visit(w)) ok = false;
      });
      mark[v] = 2;
      return ok;
    };
    for (std::size_t v = 0; v < succ_.size(); ++v) {
      if (!visit(v)) return false;
    }
    return true;
  }

  template <class F>
  void for_each_edge(F&& f) const {
    for (std::size_t i = 0; i < succ_.size(); ++i) {
      succ_[i].for_each([&](std::size_t j) { f(i, j); });
    }
  }

  std::size_t hash() const {
    std::size_t h = 0x6a09e667;
    for (std::size_t i = 0; i < succ_.size(); ++i) {
      if (!succ_[i].empty()) h = hash_combine(hash_combine(h, i), succ_[i].hash());
    }
    return h;
  }

  friend bool operator==(const LockGraph& a, const LockGraph& b) {
    const std::size_t n = std::max(a.succ_.size(), b.succ_.size());
    for (std::size_t i = 0; i < n; ++i) {
      const bool ea = i >= a.succ_.size() || a.succ_[i].empty();
      const bool eb = i >= b.succ_.size() || b.succ_[i].empty();
      if (ea && eb) continue;
      if (ea != eb || !(a.succ_[i] == b.succ_[i])) return false;
    }
    return true;
  }

 private:
  std::vector<BitSet> succ_;
};

}  // namespace mdpn
