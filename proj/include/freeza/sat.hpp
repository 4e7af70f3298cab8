#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <vector>

#include "freeza/error.hpp"

namespace freeza {

// Small CDCL solver: two watched literals, first-UIP learning, VSIDS on a
// binary heap, phase saving and Luby restarts. Literals use DIMACS signs over
// 1-based variables. Good enough for the circuit instances built here.
class SatSolver {
 public:
  int new_var() {
    int v = nvars_++;
    assign_.push_back(kUndef);
    level_.push_back(0);
    reason_.push_back(-1);
    activity_.push_back(0.0);
    phase_.push_back(0);
    heap_pos_.push_back(-1);
    watches_.resize(2 * nvars_);
    heap_insert(v);
    return v + 1;
  }
  int num_vars() const { return nvars_; }

  // Returns false if the clause set became trivially unsatisfiable.
  bool add_clause(std::vector<int> lits) {
    if (!ok_) return false;
    backtrack(0);
    std::vector<int> c;
    for (int l : lits) {
      if (l == 0 || std::abs(l) > nvars_) throw Error("sat", "literal out of range");
      c.push_back(enc(l));
    }
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
    std::vector<int> kept;
    for (size_t i = 0; i < c.size(); ++i) {
      if (i + 1 < c.size() && (c[i] ^ 1) == c[i + 1]) return true;  // tautology
      int v = val(c[i]);
      if (v == 1 && level_[c[i] >> 1] == 0) return true;
      if (v == 0 && level_[c[i] >> 1] == 0) continue;
      kept.push_back(c[i]);
    }
    if (kept.empty()) return ok_ = false;
    if (kept.size() == 1) {
      enqueue(kept[0], -1);
      if (propagate() >= 0) ok_ = false;
      return ok_;
    }
    attach(std::move(kept), false);
    return true;
  }

  bool solve(int64_t conflict_limit = -1) {
    if (!ok_) return false;
    backtrack(0);
    if (propagate() >= 0) return ok_ = false;
    int64_t conflicts = 0;
    for (int restart = 1;; ++restart) {
      int64_t budget = 100 * luby(restart);
      int r = search(budget, conflicts, conflict_limit);
      if (r == 1) return true;
      if (r == 0) return ok_ = false;
      if (conflict_limit >= 0 && conflicts >= conflict_limit) throw Error("sat-budget", "conflict limit reached");
    }
  }

  bool value(int var) const { return assign_.at(var - 1) == 1; }

 private:
  static constexpr int8_t kUndef = -1;
  struct Clause {
    std::vector<int> lits;
    bool learnt;
  };

  static int enc(int l) { return l > 0 ? 2 * (l - 1) : 2 * (-l - 1) + 1; }
  int val(int lit) const {
    int8_t a = assign_[lit >> 1];
    return a == kUndef ? -1 : (a ^ (lit & 1));
  }

  void attach(std::vector<int> lits, bool learnt) {
    int id = static_cast<int>(clauses_.size());
    watches_[lits[0] ^ 1].push_back(id);
    watches_[lits[1] ^ 1].push_back(id);
    clauses_.push_back({std::move(lits), learnt});
  }

  void enqueue(int lit, int reason) {
    int v = lit >> 1;
    assign_[v] = static_cast<int8_t>((lit & 1) ^ 1);
    level_[v] = static_cast<int>(trail_lim_.size());
    reason_[v] = reason;
    trail_.push_back(lit);
  }

  // Returns a conflicting clause index, or -1.
  int propagate() {
    while (qhead_ < trail_.size()) {
      int p = trail_[qhead_++];  // p became true; visit clauses watching ~p
      auto& ws = watches_[p];
      size_t i = 0, j = 0;
      int conflict = -1;
      while (i < ws.size()) {
        int ci = ws[i++];
        auto& c = clauses_[ci].lits;
        int falsified = p ^ 1;
        if (c[0] == falsified) std::swap(c[0], c[1]);
        if (val(c[0]) == 1) {
          ws[j++] = ci;
          continue;
        }
        bool moved = false;
        for (size_t k = 2; k < c.size(); ++k)
          if (val(c[k]) != 0) {
            std::swap(c[1], c[k]);
            watches_[c[1] ^ 1].push_back(ci);
            moved = true;
            break;
          }
        if (moved) continue;
        ws[j++] = ci;
        if (val(c[0]) == 0) {
          conflict = ci;
          while (i < ws.size()) ws[j++] = ws[i++];
        } else {
          enqueue(c[0], ci);
        }
      }
      ws.resize(j);
      if (conflict >= 0) return conflict;
    }
    return -1;
  }

  void analyze(int confl, std::vector<int>& learnt, int& bt) {
    learnt.assign(1, 0);
    int paths = 0, p = -1;
    size_t idx = trail_.size();
    int cur = static_cast<int>(trail_lim_.size());
    do {
      for (int q : clauses_[confl].lits) {
        if (p >= 0 && q == p) continue;
        int v = q >> 1;
        if (seen_[v] || level_[v] == 0) continue;
        seen_[v] = 1;
        bump(v);
        if (level_[v] == cur)
          ++paths;
        else
          learnt.push_back(q);
      }
      while (!seen_[trail_[--idx] >> 1]) {
      }
      p = trail_[idx];
      confl = reason_[p >> 1];
      seen_[p >> 1] = 0;
      --paths;
    } while (paths > 0);
    learnt[0] = p ^ 1;
    bt = 0;
    size_t hi = 1;
    for (size_t i = 1; i < learnt.size(); ++i) {
      if (level_[learnt[i] >> 1] > bt) {
        bt = level_[learnt[i] >> 1];
        hi = i;
      }
    }
    if (learnt.size() > 1) std::swap(learnt[1], learnt[hi]);
    for (int q : learnt) seen_[q >> 1] = 0;
  }

  void backtrack(int lvl) {
    if (static_cast<int>(trail_lim_.size()) <= lvl) return;
    for (size_t i = trail_.size(); i-- > static_cast<size_t>(trail_lim_[lvl]);) {
      int v = trail_[i] >> 1;
      phase_[v] = static_cast<int8_t>(trail_[i] & 1);
      assign_[v] = kUndef;
      reason_[v] = -1;
      if (heap_pos_[v] < 0) heap_insert(v);
    }
    trail_.resize(trail_lim_[lvl]);
    trail_lim_.resize(lvl);
    qhead_ = trail_.size();
  }

  int search(int64_t budget, int64_t& conflicts, int64_t limit) {
    seen_.assign(nvars_, 0);
    std::vector<int> learnt;
    for (int64_t local = 0;;) {
      int confl = propagate();
      if (confl >= 0) {
        ++conflicts;
        ++local;
        if (trail_lim_.empty()) return 0;
        int bt;
        analyze(confl, learnt, bt);
        backtrack(bt);
        if (learnt.size() == 1) {
          enqueue(learnt[0], -1);
        } else {
          attach(learnt, true);
          enqueue(learnt[0], static_cast<int>(clauses_.size()) - 1);
        }
        inc_ *= 1.0 / 0.95;
        if (inc_ > 1e100) rescale();
        continue;
      }
      if (local >= budget || (limit >= 0 && conflicts >= limit)) {
        backtrack(0);
        return -1;
      }
      int v = pick();
      if (v < 0) return 1;
      trail_lim_.push_back(static_cast<int>(trail_.size()));
      enqueue(2 * v + phase_[v], -1);
    }
  }

  int pick() {
    while (!heap_.empty()) {
      int v = heap_pop();
      if (assign_[v] == kUndef) return v;
    }
    return -1;
  }

  static int64_t luby(int i) {
    int64_t size = 1, seq = 0;
    while (size < i + 1) size = 2 * size + 1, ++seq;
    int64_t x = i;
    while (size - 1 != x) {
      size = (size - 1) >> 1;
      --seq;
      x %= size;
    }
    return int64_t{1} << seq;
  }

  void bump(int v) {
    activity_[v] += inc_;
    if (activity_[v] > 1e100) rescale();
    if (heap_pos_[v] >= 0) sift_up(heap_pos_[v]);
  }
  void rescale() {
    for (auto& a : activity_) a *= 1e-100;
    inc_ *= 1e-100;
  }

  bool before(int a, int b) const { return activity_[a] > activity_[b] || (activity_[a] == activity_[b] && a < b); }
  void heap_insert(int v) {
    heap_pos_[v] = static_cast<int>(heap_.size());
    heap_.push_back(v);
    sift_up(heap_pos_[v]);
  }
  int heap_pop() {
    int top = heap_[0];
    heap_pos_[top] = -1;
    int last = heap_.back();
    heap_.pop_back();
    if (!heap_.empty()) {
      heap_[0] = last;
      heap_pos_[last] = 0;
      sift_down(0);
    }
    return top;
  }
  void sift_up(int i) {
    int v = heap_[i];
    while (i > 0) {
      int p = (i - 1) / 2;
      if (!before(v, heap_[p])) break;
      heap_[i] = heap_[p];
      heap_pos_[heap_[i]] = i;
      i = p;
    }
    heap_[i] = v;
    heap_pos_[v] = i;
  }
  void sift_down(int i) {
    int v = heap_[i], n = static_cast<int>(heap_.size());
    for (;;) {
      int c = 2 * i + 1;
      if (c >= n) break;
      if (c + 1 < n && before(heap_[c + 1], heap_[c])) ++c;
      if (!before(heap_[c], v)) break;
      heap_[i] = heap_[c];
      heap_pos_[heap_[i]] = i;
      i = c;
    }
    heap_[i] = v;
    heap_pos_[v] = i;
  }

  int nvars_ = 0;
  bool ok_ = true;
  std::vector<int8_t> assign_, phase_;
  std::vector<int> level_, reason_;
  std::vector<double> activity_;
  double inc_ = 1.0;
  std::vector<int> heap_, heap_pos_;
  std::vector<std::vector<int>> watches_;
  std::vector<Clause> clauses_;
  std::vector<int> trail_, trail_lim_;
  std::vector<char> seen_;
  size_t qhead_ = 0;
};

}  // namespace freeza
