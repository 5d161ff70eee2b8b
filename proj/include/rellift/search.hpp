#pragma once

// All-solutions search for distributive laws F P -> P F on carriers <= N.
//
// A variable b(n, a, y) says y ∈ σ_n(a). Naturality along bijections is
// built in: variables in one orbit of S_n share a class, so only maps up to
// relabelling of both ends and families up to relabelling of X generate
// constraints. Constraints are disjunctions of terms, each term a conjunction
// of at most two literals.

#include <atomic>
#include <chrono>
#include <map>
#include <numeric>
#include <set>
#include <thread>
#include <unordered_map>

#include "core.hpp"
#include "distlaw.hpp"
#include "extension.hpp"
#include "functor.hpp"
#include "monad.hpp"
#include "report.hpp"

namespace rellift {

struct OrbitRep {
  index_t rep;
  std::size_t orbit_size;
  std::size_t stabilizer_order;
};

namespace detail {

inline std::vector<FinFun> permutations_of(std::size_t n) {
  std::vector<FinFun> out;
  std::vector<index_t> p(n);
  std::iota(p.begin(), p.end(), index_t{0});
  do out.emplace_back(n, n, p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

inline std::size_t factorial(std::size_t n) { return n <= 1 ? 1 : n * factorial(n - 1); }

// For a family B ⊆ P X listed as j : |B| -> P X, the union map g : P|B| -> P X.
inline std::pair<FinFun, FinFun> family_maps(std::size_t X, const std::vector<index_t>& B) {
  const auto k = B.size();
  std::vector<index_t> gv(powerset_size(k));
  for (std::size_t S = 0; S < gv.size(); ++S) {
    std::uint64_t u = 0;
    for (std::size_t i = 0; i < k; ++i)
      if ((S >> i) & 1u) u |= B[i];
    gv[S] = static_cast<index_t>(u);
  }
  return {FinFun(powerset_size(k), powerset_size(X), std::move(gv)), FinFun(k, powerset_size(X), B)};
}

}  // namespace detail

/// Orbits of F(P X) under S_X, representative = least index.
inline std::vector<OrbitRep> enumerate_orbit_reps(const FunctorSpec& F, std::size_t X) {
  if (X > 6) throw bound_error("orbit enumeration needs |X| <= 6", detail::factorial(X));
  const auto size = F.size(powerset_size(X));
  std::vector<char> seen(size, 0);
  std::vector<FinFun> actions;
  for (const auto& p : detail::permutations_of(X)) actions.push_back(F.map(powerset_map(p)));
  std::vector<OrbitRep> out;
  for (index_t a = 0; a < size; ++a) {
    if (seen[a]) continue;
    std::set<index_t> orbit;
    for (const auto& g : actions) orbit.insert(g(a));
    for (auto b : orbit) seen[b] = 1;
    out.push_back({a, orbit.size(), actions.size() / orbit.size()});
  }
  return out;
}

/// A named group of constraints; the unit of obstruction certificates.
struct ConstraintGroup {
  enum class Kind { unit, naturality, multiplication } kind = Kind::unit;
  std::size_t n = 0, m = 0;   // unit: n; naturality: h : n -> m; multiplication: X = n
  std::vector<index_t> h;     // naturality
  std::vector<index_t> B;     // multiplication: the family, ascending subset masks
  index_t a = 0;              // unit: a ∈ F n; naturality: a ∈ F P n; multiplication: t ∈ F P |B|

  std::size_t level() const {
    switch (kind) {
      case Kind::unit: return n;
      case Kind::naturality: return std::max(n, m);
      case Kind::multiplication: return std::max(n, B.size());
    }
    return n;
  }
};

inline nlohmann::json group_to_json(const ConstraintGroup& g) {
  using K = ConstraintGroup::Kind;
  switch (g.kind) {
    case K::unit: return {{"kind", "unit"}, {"n", g.n}, {"a", g.a}};
    case K::naturality: return {{"kind", "naturality"}, {"n", g.n}, {"m", g.m}, {"h", g.h}, {"a", g.a}};
    case K::multiplication: return {{"kind", "multiplication"}, {"X", g.n}, {"B", g.B}, {"t", g.a}};
  }
  return {};
}

inline ConstraintGroup group_from_json(const nlohmann::json& j) {
  ConstraintGroup g;
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "unit") {
      g.kind = ConstraintGroup::Kind::unit;
      g.n = j.at("n").get<std::size_t>();
      g.a = j.at("a").get<index_t>();
    } else if (kind == "naturality") {
      g.kind = ConstraintGroup::Kind::naturality;
      g.n = j.at("n").get<std::size_t>();
      g.m = j.at("m").get<std::size_t>();
      g.h = j.at("h").get<std::vector<index_t>>();
      g.a = j.at("a").get<index_t>();
      FinFun(g.n, g.m, g.h);
    } else if (kind == "multiplication") {
      g.kind = ConstraintGroup::Kind::multiplication;
      g.n = j.at("X").get<std::size_t>();
      g.B = j.at("B").get<std::vector<index_t>>();
      g.a = j.at("t").get<index_t>();
      for (auto A : g.B)
        if (A >= powerset_size(g.n)) throw usage_error("constraint group: family member outside P X");
    } else {
      throw usage_error("constraint group: unknown kind '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw usage_error(std::string("malformed constraint group: ") + e.what());
  }
  return g;
}

/// The constraint system. Literal = 2·class + negated.
class LawCSP {
 public:
  struct Term {
    std::int32_t a, b;  // b < 0 for a single literal
  };
  struct Constraint {
    std::uint32_t begin, end;  // into terms()
    std::uint32_t group;
  };

  /// Every canonical group for a law on carriers <= N with multiplication
  /// families of size <= support. The inner component of a family B lives on
  /// carrier |B|, so carriers up to max(N, min(support, 2^N)) get variables;
  /// those above N are existentially quantified.
  static LawCSP build(const FunctorSpec& F, std::size_t N, std::size_t support) {
    const auto M = std::max(N, std::min(support, powerset_size(N)));
    LawCSP csp(F, N, M, support);
    csp.generate_all();
    return csp;
  }

  /// Exactly the given groups (obstruction replay).
  static LawCSP from_groups(const FunctorSpec& F, std::vector<ConstraintGroup> groups) {
    std::size_t N = 0, support = 0;
    for (const auto& g : groups) {
      N = std::max(N, g.level());
      if (g.kind == ConstraintGroup::Kind::multiplication) support = std::max(support, g.B.size());
    }
    LawCSP csp(F, N, N, support);
    for (auto& g : groups) csp.add_group(std::move(g));
    return csp;
  }

  const FunctorSpec& functor() const { return F_; }
  std::size_t max_size() const { return N_; }
  /// Largest carrier with variables (>= max_size()).
  std::size_t carriers() const { return M_; }
  std::size_t support() const { return support_; }
  std::size_t variables() const { return cls_.size(); }
  std::size_t classes() const { return class_carrier_.size(); }
  const std::vector<Term>& terms() const { return terms_; }
  const std::vector<Constraint>& constraints() const { return cons_; }
  const std::vector<ConstraintGroup>& groups() const { return groups_; }
  const std::vector<std::vector<std::uint32_t>>& occurrences() const { return occ_; }

  std::size_t in_size(std::size_t n) const { return in_[n]; }
  std::size_t out_size(std::size_t n) const { return out_[n]; }
  std::uint32_t class_of(std::size_t n, index_t a, index_t y) const { return cls_[offset_[n] + a * out_[n] + y]; }
  std::size_t class_carrier(std::uint32_t c) const { return class_carrier_[c]; }

  /// Branching order: carrier ascending, class size descending, least member.
  const std::vector<std::uint32_t>& order() const { return order_; }

  /// Multiplication families whose inner carrier |B| exceeds max_size(). Their
  /// groups are not generated up front; the search adds the ones a candidate
  /// violates.
  struct LazyFamily {
    std::size_t X;
    std::vector<index_t> B;
    FinFun Fg, Fj;
  };
  const std::vector<LazyFamily>& lazy_families() const { return lazy_; }

  /// Groups of the lazy families violated by a full assignment, at most `cap`.
  std::vector<ConstraintGroup> violated_lazy(const std::vector<std::int8_t>& val, std::size_t cap) const {
    std::vector<ConstraintGroup> out;
    for (const auto& f : lazy_) {
      const auto k = f.B.size();
      for (index_t t = 0; t < in_[k] && out.size() < cap; ++t) {
        const auto lhs = f.Fg(t);
        bool ok = true;
        for (index_t y = 0; y < out_[f.X] && ok; ++y) {
          bool rhs = false;
          for (index_t z = 0; z < out_[k] && !rhs; ++z)
            rhs = val[class_of(k, t, z)] == 1 && val[class_of(f.X, f.Fj(z), y)] == 1;
          ok = (val[class_of(f.X, lhs, y)] == 1) == rhs;
        }
        if (!ok) out.push_back({ConstraintGroup::Kind::multiplication, f.X, 0, {}, f.B, t});
      }
    }
    return out;
  }

  void add(ConstraintGroup g) { add_group(std::move(g)); }

 private:
  LawCSP(const FunctorSpec& F, std::size_t N, std::size_t M, std::size_t support)
      : F_(F), N_(N), M_(M), support_(support) {
    std::size_t total = 0;
    for (std::size_t n = 0; n <= M; ++n) {
      in_.push_back(F.size(powerset_size(n)));
      out_.push_back(F.size(n));
      offset_.push_back(total);
      if (in_[n] * out_[n] > F.bound())
        throw bound_error("law CSP: carrier " + std::to_string(n) + " needs |F P n|·|F n| variables", in_[n] * out_[n]);
      total += in_[n] * out_[n];
    }
    cls_.assign(total, 0);
    std::vector<std::uint32_t> parent(total);
    std::iota(parent.begin(), parent.end(), 0u);
    auto find = [&](std::uint32_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (std::size_t n = 2; n <= M; ++n) {
      // S_n is generated by a transposition and an n-cycle
      std::vector<index_t> swap(n), cycle(n);
      std::iota(swap.begin(), swap.end(), index_t{0});
      std::swap(swap[0], swap[1]);
      for (std::size_t i = 0; i < n; ++i) cycle[i] = static_cast<index_t>((i + 1) % n);
      for (const auto& gen : {FinFun(n, n, swap), FinFun(n, n, cycle)}) {
        const auto Fg = F.map(gen), FPg = F.map(powerset_map(gen));
        for (index_t a = 0; a < in_[n]; ++a)
          for (index_t y = 0; y < out_[n]; ++y) {
            auto u = find(static_cast<std::uint32_t>(offset_[n] + a * out_[n] + y));
            auto v = find(static_cast<std::uint32_t>(offset_[n] + FPg(a) * out_[n] + Fg(y)));
            if (u != v) parent[std::max(u, v)] = std::min(u, v);
          }
      }
    }
    std::vector<std::uint32_t> id(total, UINT32_MAX), csize;
    for (std::size_t n = 0; n <= M; ++n)
      for (std::size_t v = offset_[n]; v < offset_[n] + in_[n] * out_[n]; ++v) {
        auto r = find(static_cast<std::uint32_t>(v));
        if (id[r] == UINT32_MAX) {
          id[r] = static_cast<std::uint32_t>(class_carrier_.size());
          class_carrier_.push_back(n);
          class_first_.push_back(static_cast<std::uint32_t>(v));
          csize.push_back(0);
        }
        cls_[v] = id[r];
        ++csize[id[r]];
      }
    order_.resize(class_carrier_.size());
    std::iota(order_.begin(), order_.end(), 0u);
    std::stable_sort(order_.begin(), order_.end(), [&](auto x, auto y) {
      if (class_carrier_[x] != class_carrier_[y]) return class_carrier_[x] < class_carrier_[y];
      if (csize[x] != csize[y]) return csize[x] > csize[y];
      return class_first_[x] < class_first_[y];
    });
    occ_.assign(2 * class_carrier_.size(), {});
  }

  std::size_t max_terms() const { return 16 * F_.bound(); }

  std::int32_t lit(std::size_t n, index_t a, index_t y, bool negated = false) const {
    return static_cast<std::int32_t>(2 * class_of(n, a, y) + (negated ? 1 : 0));
  }

  const FinFun& fmap(const FinFun& f, bool via_powerset) {
    auto key = std::make_tuple(via_powerset, f.dom(), f.cod(), f.images());
    auto it = maps_.find(key);
    if (it != maps_.end()) return it->second;
    return maps_.emplace(key, F_.map(via_powerset ? powerset_map(f) : f)).first->second;
  }

  // Terms as sorted literal pairs; drops contradictory terms, tautologies and
  // duplicates. Returns false if the constraint is trivially satisfied.
  bool normalize(std::vector<Term>& ts) const {
    std::vector<Term> out;
    for (auto t : ts) {
      if (t.b >= 0) {
        if (t.a == t.b) t.b = -1;
        else if ((t.a ^ 1) == t.b) continue;
        else if (t.a > t.b) std::swap(t.a, t.b);
      }
      out.push_back(t);
    }
    std::sort(out.begin(), out.end(), [](Term x, Term y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); });
    out.erase(std::unique(out.begin(), out.end(), [](Term x, Term y) { return x.a == y.a && x.b == y.b; }), out.end());
    std::set<std::int32_t> singles;
    for (auto t : out)
      if (t.b < 0) {
        if (singles.count(t.a ^ 1)) return false;
        singles.insert(t.a);
      }
    ts = std::move(out);
    return true;
  }

  void emit(std::vector<Term> ts) {
    if (!normalize(ts)) return;
    std::uint64_t hash = 1469598103934665603ull;
    for (auto t : ts)
      for (auto x : {t.a, t.b}) hash = (hash ^ static_cast<std::uint32_t>(x)) * 1099511628211ull;
    auto range = seen_.equal_range(hash);
    for (auto it = range.first; it != range.second; ++it) {
      const auto& o = cons_[it->second];
      if (o.end - o.begin == ts.size() &&
          std::equal(ts.begin(), ts.end(), terms_.begin() + o.begin, [](Term x, Term y) { return x.a == y.a && x.b == y.b; }))
        return;
    }
    if (terms_.size() + ts.size() > max_terms())
      throw bound_error("law CSP exceeds " + std::to_string(max_terms()) + " constraint terms", terms_.size() + ts.size());
    seen_.emplace(hash, static_cast<std::uint32_t>(cons_.size()));
    const auto c = static_cast<std::uint32_t>(cons_.size());
    cons_.push_back({static_cast<std::uint32_t>(terms_.size()), static_cast<std::uint32_t>(terms_.size() + ts.size()),
                     static_cast<std::uint32_t>(groups_.size() - 1)});
    std::set<std::int32_t> lits;
    for (auto t : ts) {
      terms_.push_back(t);
      lits.insert(t.a);
      if (t.b >= 0) lits.insert(t.b);
    }
    for (auto l : lits) occ_[static_cast<std::size_t>(l)].push_back(c);
  }

  void add_group(ConstraintGroup g) {
    if (g.level() > M_) throw usage_error("constraint group beyond the CSP bound");
    groups_.push_back(g);
    using K = ConstraintGroup::Kind;
    switch (g.kind) {
      case K::unit: {
        if (g.a >= out_[g.n]) throw usage_error("unit group: element out of range");
        const auto& Feta = fmap(detail::unit_into_powerset(g.n), false);
        for (index_t y = 0; y < out_[g.n]; ++y) emit({{lit(g.n, Feta(g.a), y, y != g.a), -1}});
        break;
      }
      case K::naturality: {
        const FinFun h(g.n, g.m, g.h);
        if (g.a >= in_[g.n]) throw usage_error("naturality group: element out of range");
        const auto& Fh = fmap(h, false);
        const auto& FPh = fmap(h, true);
        const auto b = FPh(g.a);
        std::vector<std::vector<Term>> backward(out_[g.m]);
        for (auto& bw : backward) bw.push_back({-1, -1});
        for (index_t y2 = 0; y2 < out_[g.m]; ++y2) backward[y2][0] = {lit(g.m, b, y2, true), -1};
        for (index_t y = 0; y < out_[g.n]; ++y) {
          emit({{lit(g.n, g.a, y, true), -1}, {lit(g.m, b, Fh(y)), -1}});
          backward[Fh(y)].push_back({lit(g.n, g.a, y), -1});
        }
        for (auto& bw : backward) emit(std::move(bw));
        break;
      }
      case K::multiplication: {
        const auto X = g.n, k = g.B.size();
        if (g.a >= in_[k]) throw usage_error("multiplication group: element out of range");
        const auto [gmap, j] = detail::family_maps(X, g.B);
        const auto& Fg = fmap(gmap, false);
        const auto& Fj = fmap(j, false);
        const auto lhs = Fg(g.a);
        for (index_t y = 0; y < out_[X]; ++y) {
          std::vector<Term> any{{lit(X, lhs, y, true), -1}};
          for (index_t z = 0; z < out_[k]; ++z) {
            any.push_back({lit(k, g.a, z), lit(X, Fj(z), y)});
            emit({{lit(k, g.a, z, true), -1}, {lit(X, Fj(z), y, true), -1}, {lit(X, lhs, y), -1}});
          }
          emit(std::move(any));
        }
        break;
      }
    }
  }

  void generate_all() {
    for (std::size_t n = 0; n <= M_; ++n)
      for (index_t a = 0; a < out_[n]; ++a) add_group({ConstraintGroup::Kind::unit, n, 0, {}, {}, a});
    // Maps n -> m up to relabelling: non-increasing fibre sizes onto 0..k-1.
    // Bijections hold by construction. For a fixed shape h, inputs a and ρ·a
    // give the same constraints whenever ρ permutes the fibres of h.
    for (std::size_t n = 0; n <= M_; ++n) {
      const auto perms = detail::permutations_of(n);
      std::vector<FinFun> acts;
      for (const auto& p : perms) acts.push_back(F_.map(powerset_map(p)));
      for (std::size_t m = 0; m <= M_; ++m) {
        std::vector<std::vector<index_t>> shapes;
        std::vector<std::size_t> parts;
        std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t left, std::size_t cap) {
          if (left == 0) {
            std::vector<index_t> h;
            for (std::size_t i = 0; i < parts.size(); ++i) h.insert(h.end(), parts[i], static_cast<index_t>(i));
            shapes.push_back(std::move(h));
            return;
          }
          if (parts.size() == m) return;
          for (std::size_t p = std::min(left, cap); p >= 1; --p) {
            parts.push_back(p);
            rec(left - p, p);
            parts.pop_back();
          }
        };
        rec(n, n);
        for (const auto& h : shapes) {
          if (n == m && n > 0 && h.back() + 1 == n) continue;
          std::vector<const FinFun*> stab;
          for (std::size_t i = 0; i < perms.size(); ++i) {
            std::vector<index_t> to(n, static_cast<index_t>(-1));
            bool ok = true;
            for (std::size_t x = 0; x < n && ok; ++x) {
              auto& t = to[h[x]];
              const auto y = h[perms[i](static_cast<index_t>(x))];
              if (t == static_cast<index_t>(-1)) t = y;
              ok = t == y;
            }
            for (std::size_t b = 0; b < n && ok; ++b)
              if (to[b] != static_cast<index_t>(-1))
                ok = std::count(h.begin(), h.end(), b) == std::count(h.begin(), h.end(), to[b]);
            if (ok) stab.push_back(&acts[i]);
          }
          for (index_t a = 0; a < in_[n]; ++a) {
            if (std::any_of(stab.begin(), stab.end(), [&](const FinFun* g) { return (*g)(a) < a; })) continue;
            add_group({ConstraintGroup::Kind::naturality, n, m, h, {}, a});
          }
        }
      }
    }
    for (std::size_t X = 0; X <= N_; ++X) {
      const auto k = std::min({support_, powerset_size(X), M_});
      const auto perms = detail::permutations_of(X);
      std::vector<FinFun> acts;
      for (const auto& p : perms) acts.push_back(powerset_map(p));
      for (const auto& B : detail::small_families(X, k)) {
        bool canonical = true;
        for (const auto& act : acts) {
          std::vector<index_t> img;
          for (auto A : B) img.push_back(act(A));
          std::sort(img.begin(), img.end());
          if (img < B) {
            canonical = false;
            break;
          }
        }
        if (!canonical) continue;
        if (B.size() > N_) {
          const auto [g, j] = detail::family_maps(X, B);
          lazy_.push_back({X, B, F_.map(g), F_.map(j)});
          continue;
        }
        for (index_t t = 0; t < in_[B.size()]; ++t)
          add_group({ConstraintGroup::Kind::multiplication, X, 0, {}, B, t});
      }
    }
    seen_.clear();
    maps_.clear();
  }

  FunctorSpec F_;
  std::size_t N_, M_, support_;
  std::vector<std::size_t> in_, out_, offset_;
  std::vector<std::uint32_t> cls_, class_first_, order_;
  std::vector<std::size_t> class_carrier_;
  std::vector<Term> terms_;
  std::vector<Constraint> cons_;
  std::vector<ConstraintGroup> groups_;
  std::vector<LazyFamily> lazy_;
  std::vector<std::vector<std::uint32_t>> occ_;
  std::unordered_multimap<std::uint64_t, std::uint32_t> seen_;
  std::map<std::tuple<bool, std::size_t, std::size_t, std::vector<index_t>>, FinFun> maps_;
};

namespace detail {

struct SolverLimits {
  std::chrono::steady_clock::time_point deadline = std::chrono::steady_clock::time_point::max();
  std::size_t max_solutions = SIZE_MAX;
  std::atomic<bool>* stop = nullptr;
};

// Propagation plus chronological backtracking over the classes of carriers
// <= level, using only constraints of active groups at that level.
class Solver {
 public:
  Solver(const LawCSP& csp, std::size_t level, const std::vector<char>* active = nullptr)
      : csp_(csp), level_(level), active_(active), val_(csp.classes(), -1) {}

  std::size_t nodes = 0, propagations = 0;
  bool timed_out = false;

  bool enabled(std::uint32_t c) const {
    const auto g = csp_.constraints()[c].group;
    return csp_.groups()[g].level() <= level_ && (!active_ || (*active_)[g]);
  }

  /// Root propagation; false on conflict.
  bool init() {
    for (std::uint32_t c = 0; c < csp_.constraints().size(); ++c)
      if (enabled(c) && !check(c)) return false;
    return propagate();
  }

  bool assume(std::int32_t l) {
    if (value(l) == 0) return false;
    if (value(l) == 1) return true;
    set(l);
    return propagate();
  }

  /// The first `k` unassigned branching classes.
  std::vector<std::uint32_t> next_free(std::size_t k) const {
    std::vector<std::uint32_t> out;
    for (auto c : csp_.order())
      if (out.size() < k && csp_.class_carrier(c) <= std::min(level_, project_) && val_[c] < 0) out.push_back(c);
    return out;
  }

  /// Calls fn(values) for each solution; fn returns false to stop. Returns
  /// true iff the enumeration ran to completion.
  template <class Fn>
  bool enumerate(const SolverLimits& lim, Fn&& fn) {
    return !dfs(0, lim, fn);
  }

  const std::vector<std::int8_t>& values() const { return val_; }
  std::size_t unassigned() const { return static_cast<std::size_t>(std::count(val_.begin(), val_.end(), -1)); }

  /// Report solutions restricted to carriers <= n, each once, provided the
  /// higher carriers admit some completion; fn sees that completion.
  void project(std::size_t n) { project_ = n; }

 private:
  int value(std::int32_t l) const {
    const auto v = val_[static_cast<std::size_t>(l >> 1)];
    return v < 0 ? -1 : (v ^ (l & 1));
  }
  void set(std::int32_t l) {
    val_[static_cast<std::size_t>(l >> 1)] = static_cast<std::int8_t>(!(l & 1));
    trail_.push_back(l);
  }

  bool check(std::uint32_t c) {
    const auto& con = csp_.constraints()[c];
    const auto& ts = csp_.terms();
    std::size_t open = 0;
    std::uint32_t last = 0;
    for (auto i = con.begin; i < con.end; ++i) {
      const auto va = value(ts[i].a), vb = ts[i].b < 0 ? 1 : value(ts[i].b);
      if (va == 0 || vb == 0) continue;
      if (va == 1 && vb == 1) return true;
      ++open;
      last = i;
      if (open > 1) return true;
    }
    if (open == 0) return false;
    if (value(ts[last].a) < 0) set(ts[last].a);
    if (ts[last].b >= 0 && value(ts[last].b) < 0) set(ts[last].b);
    return true;
  }

  bool propagate() {
    while (head_ < trail_.size()) {
      const auto falsified = trail_[head_++] ^ 1;
      ++propagations;
      for (auto c : csp_.occurrences()[static_cast<std::size_t>(falsified)])
        if (enabled(c) && !check(c)) {
          head_ = trail_.size();
          return false;
        }
    }
    return true;
  }

  void undo(std::size_t mark) {
    while (trail_.size() > mark) {
      val_[static_cast<std::size_t>(trail_.back() >> 1)] = -1;
      trail_.pop_back();
    }
    head_ = mark;
  }

  // true = stop
  template <class Fn>
  bool dfs(std::size_t pos, const SolverLimits& lim, Fn& fn) {
    const auto& order = csp_.order();
    while (pos < order.size() && (val_[order[pos]] >= 0 || csp_.class_carrier(order[pos]) > level_)) ++pos;
    if (pos == order.size()) return !fn(val_);
    if (csp_.class_carrier(order[pos]) > project_) {
      const auto saved = project_;
      bool extends = false;
      project_ = SIZE_MAX;
      std::vector<std::int8_t> full;
      std::function<bool(const std::vector<std::int8_t>&)> first = [&](const auto& v) {
        full = v;
        extends = true;
        return false;
      };
      dfs(pos, lim, first);
      project_ = saved;
      if (timed_out) return true;
      return extends && !fn(full);
    }
    if ((++nodes & 1023) == 0 &&
        ((lim.stop && lim.stop->load()) || std::chrono::steady_clock::now() > lim.deadline)) {
      timed_out = true;
      return true;
    }
    for (int v : {0, 1}) {
      const auto mark = trail_.size();
      set(static_cast<std::int32_t>(2 * order[pos] + (v ? 0 : 1)));
      const bool stop = propagate() && dfs(pos + 1, lim, fn);
      undo(mark);
      if (stop) return true;
    }
    return false;
  }

  const LawCSP& csp_;
  std::size_t level_;
  const std::vector<char>* active_;
  std::vector<std::int8_t> val_;
  std::vector<std::int32_t> trail_;
  std::size_t head_ = 0;
  std::size_t project_ = SIZE_MAX;
};

}  // namespace detail

struct SearchOptions {
  std::size_t max_size = 3;
  std::size_t support = 3;
  std::size_t jobs = 1;
  double timeout_s = 0;  // 0: none
  std::size_t max_solutions = 4096;
};

struct SearchStats {
  std::size_t variables = 0, classes = 0, constraints = 0, groups = 0, carriers = 0;
  std::size_t nodes = 0, propagations = 0, refinements = 0;
  std::size_t free_at_root = 0;  // classes left open by root propagation
  double elapsed_ms = 0;
};

/// An unsatisfiable set of constraint groups on carriers <= size.
struct Obstruction {
  std::size_t size = 0;
  std::vector<ConstraintGroup> groups;
  bool minimized = false;
};

struct SearchOutcome {
  FunctorSpec functor;
  SearchOptions options;
  Verdict verdict = Verdict::inconclusive;  // pass: complete with solutions; unsat; inconclusive
  std::vector<DistLaw> solutions;           // sorted by table bit-vector
  std::vector<Verdict> verification;        // check_distlaw_axioms per solution, same bounds
  std::optional<Obstruction> obstruction;
  SearchStats stats;
  std::string note;

  bool complete() const { return verdict == Verdict::pass || verdict == Verdict::unsat; }
  bool all_verified() const {
    return std::all_of(verification.begin(), verification.end(), [](Verdict v) { return v == Verdict::pass; });
  }
};

namespace detail {

inline SolverLimits limits_for(const SearchOptions& o) {
  SolverLimits lim;
  if (o.timeout_s > 0)
    lim.deadline = std::chrono::steady_clock::now() +
                   std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(o.timeout_s));
  lim.max_solutions = o.max_solutions;
  return lim;
}

enum class Sat { yes, no, unknown };

inline Sat satisfiable(const LawCSP& csp, std::size_t level, const std::vector<char>* active, const SolverLimits& lim,
                       SearchStats* stats = nullptr) {
  Solver s(csp, level, active);
  bool found = false, complete = true;
  if (s.init()) complete = s.enumerate(lim, [&](const auto&) {
    found = true;
    return false;
  });
  if (stats) {
    stats->nodes += s.nodes;
    stats->propagations += s.propagations;
  }
  if (found) return Sat::yes;
  return complete ? Sat::no : Sat::unknown;
}

// Greedy deletion in halving chunks; stops shrinking (keeping a valid
// certificate) when the deadline passes.
inline Obstruction minimize_obstruction(const LawCSP& csp, std::size_t level, const SolverLimits& lim) {
  std::vector<char> active(csp.groups().size(), 0);
  std::vector<std::size_t> cand;
  for (std::size_t g = 0; g < csp.groups().size(); ++g)
    if (csp.groups()[g].level() <= level) {
      active[g] = 1;
      cand.push_back(g);
    }
  bool finished = true;
  for (std::size_t chunk = std::max<std::size_t>(1, cand.size() / 2);; chunk /= 2) {
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < cand.size(); i += chunk) {
      const auto end = std::min(cand.size(), i + chunk);
      for (auto k = i; k < end; ++k) active[cand[k]] = 0;
      const auto r = std::chrono::steady_clock::now() > lim.deadline ? Sat::unknown : satisfiable(csp, level, &active, lim);
      if (r != Sat::no) {
        if (r == Sat::unknown) finished = false;
        for (auto k = i; k < end; ++k) {
          active[cand[k]] = 1;
          kept.push_back(cand[k]);
        }
      }
    }
    cand = std::move(kept);
    if (chunk == 1 || !finished) break;
  }
  Obstruction ob;
  ob.minimized = finished;
  for (auto g : cand) {
    ob.groups.push_back(csp.groups()[g]);
    ob.size = std::max(ob.size, csp.groups()[g].level());
  }
  return ob;
}

inline DistLaw solution_law(const LawCSP& csp, const std::vector<std::int8_t>& val, const std::string& name) {
  DistLaw::Table t;
  for (std::size_t n = 0; n <= csp.max_size(); ++n) {
    std::vector<Bits> rows(csp.in_size(n), Bits(csp.out_size(n)));
    for (index_t a = 0; a < csp.in_size(n); ++a)
      for (index_t y = 0; y < csp.out_size(n); ++y)
        if (val[csp.class_of(n, a, y)] == 1) rows[a].set(y);
    t.emplace(n, std::move(rows));
  }
  return DistLaw::table(csp.functor(), std::move(t), name);
}

inline std::vector<std::uint64_t> law_key(const DistLaw& law) {
  std::vector<std::uint64_t> key;
  for (std::size_t n = 0; n <= *law.stored_bound(); ++n)
    for (const auto& row : law.carrier(n)) key.insert(key.end(), row.data(), row.data() + row.words());
  return key;
}

}  // namespace detail

/// Whether a law, read on carriers <= csp.carriers(), is constant on the
/// symmetry classes and satisfies every generated constraint.
inline bool law_satisfies(const LawCSP& csp, const DistLaw& law) {
  std::vector<std::int8_t> val(csp.classes(), -1);
  for (std::size_t n = 0; n <= csp.carriers(); ++n) {
    const auto& rows = law.carrier(n);
    for (index_t a = 0; a < csp.in_size(n); ++a)
      for (index_t y = 0; y < csp.out_size(n); ++y) {
        auto& v = val[csp.class_of(n, a, y)];
        const std::int8_t bit = rows[a].test(y) ? 1 : 0;
        if (v >= 0 && v != bit) return false;
        v = bit;
      }
  }
  const auto lit = [&](std::int32_t l) { return l < 0 || (val[static_cast<std::size_t>(l >> 1)] ^ (l & 1)) == 1; };
  const auto& ts = csp.terms();
  for (const auto& c : csp.constraints()) {
    bool sat = false;
    for (auto i = c.begin; i < c.end && !sat; ++i) sat = lit(ts[i].a) && lit(ts[i].b);
    if (!sat) return false;
  }
  return csp.violated_lazy(val, 1).empty();
}

/// Re-derives the groups' constraints and confirms they have no solution.
inline bool validate_obstruction(const FunctorSpec& F, const Obstruction& ob) {
  if (ob.groups.empty()) return false;
  const auto csp = LawCSP::from_groups(F, ob.groups);
  return detail::satisfiable(csp, csp.carriers(), nullptr, {}) == detail::Sat::no;
}

inline nlohmann::json obstruction_to_json(const Obstruction& ob) {
  nlohmann::json groups = nlohmann::json::array();
  std::set<std::size_t> carriers;
  for (const auto& g : ob.groups) {
    groups.push_back(group_to_json(g));
    carriers.insert(g.n);
    if (g.kind == ConstraintGroup::Kind::naturality) carriers.insert(g.m);
    if (g.kind == ConstraintGroup::Kind::multiplication) carriers.insert(g.B.size());
  }
  return {{"size", ob.size}, {"minimized", ob.minimized}, {"carriers", carriers}, {"groups", groups}};
}

inline Obstruction obstruction_from_json(const nlohmann::json& j) {
  Obstruction ob;
  try {
    for (const auto& g : j.at("groups")) {
      ob.groups.push_back(group_from_json(g));
      ob.size = std::max(ob.size, ob.groups.back().level());
    }
    ob.minimized = j.value("minimized", false);
  } catch (const nlohmann::json::exception& e) {
    throw usage_error(std::string("malformed obstruction: ") + e.what());
  }
  return ob;
}

/// Every law on carriers <= N satisfying unit, naturality and multiplication
/// on families of size <= support. Carrier levels below N are checked for
/// satisfiability first so an obstruction is reported at its least size.
inline SearchOutcome search_laws(const FunctorSpec& F, const SearchOptions& opt) {
  if (opt.max_size < 1) throw usage_error("search needs --max-size >= 1");
  if (opt.support < 1) throw usage_error("search needs --mult-support >= 1");
  Stopwatch sw;
  SearchOutcome out{F, opt};
  auto finish = [&]() -> SearchOutcome {
    out.stats.elapsed_ms = sw.ms();
    return std::move(out);
  };
  std::optional<LawCSP> built;
  try {
    built.emplace(LawCSP::build(F, opt.max_size, opt.support));
  } catch (const bound_error& e) {
    out.note = e.what();
    return finish();
  }
  auto& csp = *built;
  out.stats.variables = csp.variables();
  out.stats.classes = csp.classes();
  out.stats.constraints = csp.constraints().size();
  out.stats.groups = csp.groups().size();
  out.stats.carriers = csp.carriers();
  const auto lim = detail::limits_for(opt);

  auto unsat_at = [&](std::size_t k) {
    out.verdict = Verdict::unsat;
    out.obstruction = detail::minimize_obstruction(csp, k, lim);
    out.note = "obstruction at size " + std::to_string(out.obstruction->size) + ": no law exists on any larger carriers";
    if (!out.obstruction->minimized) out.note += " (certificate not fully minimized before the deadline)";
  };

  for (std::size_t k = 0; k < csp.carriers(); ++k) {
    const auto r = detail::satisfiable(csp, k, nullptr, lim, &out.stats);
    if (r == detail::Sat::unknown) {
      out.note = "timed out at carrier level " + std::to_string(k);
      return finish();
    }
    if (r == detail::Sat::no) {
      unsat_at(k);
      return finish();
    }
  }

  std::vector<std::vector<std::int8_t>> found;
  bool complete = true, capped = false;
  for (;;) {
    found.clear();
    detail::Solver root(csp, csp.carriers());
    root.project(opt.max_size);
    std::set<std::tuple<std::size_t, std::vector<index_t>, index_t>> violated;
    const bool root_ok = root.init();
    if (out.stats.refinements == 0) out.stats.free_at_root = root_ok ? root.unassigned() : 0;
    if (root_ok) {
      std::size_t split = 0;
      while (opt.jobs > 1 && (std::size_t{1} << split) < 4 * opt.jobs && split < 10) ++split;
      const auto vars = root.next_free(split);
      const std::size_t tasks = std::size_t{1} << vars.size();
      std::vector<std::vector<std::vector<std::int8_t>>> per_task(tasks);
      std::vector<char> task_complete(tasks, 1);
      std::atomic<std::size_t> next{0}, total{0};
      std::atomic<bool> stop{false}, cap_hit{false};
      std::mutex mu;
      auto worker = [&] {
        for (std::size_t t; (t = next++) < tasks;) {
          auto s = root;
          bool ok = true;
          for (std::size_t i = 0; i < vars.size() && ok; ++i)
            ok = s.assume(static_cast<std::int32_t>(2 * vars[i] + (((t >> i) & 1u) ? 0 : 1)));
          if (ok) {
            auto l = lim;
            l.stop = &stop;
            task_complete[t] = s.enumerate(l, [&](const std::vector<std::int8_t>& v) {
              const auto bad = csp.violated_lazy(v, 256);
              if (!bad.empty()) {
                std::lock_guard lock(mu);
                for (const auto& g : bad) violated.emplace(g.n, g.B, g.a);
                stop = true;
                return false;
              }
              if (++total > opt.max_solutions) {
                cap_hit = true;
                stop = true;
                return false;
              }
              per_task[t].push_back(v);
              return true;
            });
          }
          std::lock_guard lock(mu);
          out.stats.nodes += s.nodes;
          out.stats.propagations += s.propagations;
        }
      };
      std::vector<std::thread> pool;
      for (std::size_t w = 1; w < std::min(opt.jobs, tasks); ++w) pool.emplace_back(worker);
      worker();
      for (auto& th : pool) th.join();
      complete = true;
      for (std::size_t t = 0; t < tasks; ++t) {
        complete = complete && task_complete[t];
        for (auto& v : per_task[t]) found.push_back(std::move(v));
      }
      capped = cap_hit;
    }
    if (violated.empty()) break;
    for (const auto& [X, B, t] : violated) csp.add({ConstraintGroup::Kind::multiplication, X, 0, {}, B, t});
    ++out.stats.refinements;
    out.stats.constraints = csp.constraints().size();
    out.stats.groups = csp.groups().size();
    if (std::chrono::steady_clock::now() > lim.deadline) {
      complete = false;
      found.clear();
      break;
    }
  }

  for (std::size_t i = 0; i < found.size(); ++i)
    out.solutions.push_back(detail::solution_law(csp, found[i], "solution"));
  std::vector<std::pair<std::vector<std::uint64_t>, std::size_t>> keys;
  for (std::size_t i = 0; i < out.solutions.size(); ++i) keys.emplace_back(detail::law_key(out.solutions[i]), i);
  std::sort(keys.begin(), keys.end());
  std::vector<DistLaw> sorted;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto& law = out.solutions[keys[i].second];
    DistLaw::Table t;
    for (std::size_t n = 0; n <= opt.max_size; ++n) t.emplace(n, law.carrier(n));
    sorted.push_back(DistLaw::table(F, std::move(t), "solution " + std::to_string(i + 1)));
  }
  out.solutions = std::move(sorted);
  for (const auto& law : out.solutions)
    out.verification.push_back(check_distlaw_axioms(law, opt.max_size, opt.support).verdict());

  if (capped) {
    out.note = "stopped after " + std::to_string(opt.max_solutions) + " solutions";
  } else if (!complete) {
    out.note = "timed out; " + std::to_string(out.solutions.size()) + " solutions found so far";
  } else if (out.solutions.empty()) {
    unsat_at(opt.max_size);
  } else {
    out.verdict = Verdict::pass;
    if (!out.all_verified()) out.note = "a solution failed re-verification";
  }
  return finish();
}

// ---------------------------------------------------------------------------

struct Classification {
  std::string label;                 // first match, or UNKNOWN
  std::vector<std::string> matches;  // every named law equal on the stored carriers
};

/// Named laws for F: Barr, and for P the image laws, plus every registered
/// monad morphism into a monad on F.
inline std::vector<std::pair<std::string, DistLaw>> named_laws(const FunctorSpec& F) {
  std::vector<std::pair<std::string, DistLaw>> out{{"Barr", DistLaw::barr(F)}};
  if (F.expr() == FunctorSpec::parse("P(X)").expr()) {
    out.emplace_back("Image", DistLaw::image());
    out.emplace_back("RestrictedImage", DistLaw::restricted_image());
  }
  for (const auto& m : morphism_names()) {
    auto l = morphism_by_name(m);
    if (l.target.functor().expr() == F.expr()) out.emplace_back("FromMorphism(" + m + ")", DistLaw::from_morphism(l));
  }
  return out;
}

inline std::vector<Classification> classify_solutions(const SearchOutcome& outcome) {
  std::vector<Classification> out;
  if (outcome.solutions.empty()) return out;
  const auto N = outcome.options.max_size;
  std::vector<std::pair<std::string, std::vector<std::vector<Bits>>>> named;
  for (auto& [label, law] : named_laws(outcome.functor)) {
    try {
      std::vector<std::vector<Bits>> rows;
      for (std::size_t n = 0; n <= N; ++n) rows.push_back(law.carrier(n));
      named.emplace_back(label, std::move(rows));
    } catch (const bound_error&) {
    } catch (const usage_error&) {
    }
  }
  for (const auto& sol : outcome.solutions) {
    Classification c;
    for (const auto& [label, rows] : named) {
      bool eq = true;
      for (std::size_t n = 0; n <= N && eq; ++n) eq = sol.carrier(n) == rows[n];
      if (eq) c.matches.push_back(label);
    }
    c.label = c.matches.empty() ? "UNKNOWN" : c.matches.front();
    out.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------

/// {carrier_size: {input_index: [output_indices]}} with the functor and bound.
inline nlohmann::json solution_to_json(const DistLaw& law) {
  nlohmann::json table = nlohmann::json::object();
  for (std::size_t n = 0; n <= law.stored_bound().value_or(0); ++n) {
    nlohmann::json rows = nlohmann::json::object();
    const auto& c = law.carrier(n);
    for (std::size_t a = 0; a < c.size(); ++a) {
      nlohmann::json outs = nlohmann::json::array();
      c[a].for_each([&](std::size_t y) { outs.push_back(y); });
      rows[std::to_string(a)] = std::move(outs);
    }
    table[std::to_string(n)] = std::move(rows);
  }
  return {{"schema", "rellift.solution/1"}, {"functor", law.functor().name()}, {"name", law.name()}, {"table", table}};
}

inline DistLaw solution_from_json(const nlohmann::json& j) {
  try {
    const auto F = FunctorSpec::parse(j.at("functor").get<std::string>());
    DistLaw::Table t;
    for (const auto& [n, rows] : j.at("table").items()) {
      const auto carrier = std::stoul(n);
      std::vector<Bits> v(F.size(powerset_size(carrier)), Bits(F.size(carrier)));
      for (const auto& [a, outs] : rows.items()) {
        const auto ai = std::stoul(a);
        if (ai >= v.size()) throw usage_error("solution table: input index out of range");
        for (auto y : outs) {
          const auto yi = y.get<std::size_t>();
          if (yi >= v[ai].size()) throw usage_error("solution table: output index out of range");
          v[ai].set(yi);
        }
      }
      t.emplace(carrier, std::move(v));
    }
    return DistLaw::table(F, std::move(t), j.value("name", "table"));
  } catch (const nlohmann::json::exception& e) {
    throw usage_error(std::string("malformed solution table: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw usage_error("malformed solution table: carrier and input keys must be integers");
  }
}

/// One line per input: "σ_n(𝔞) ↦ {...}" with subsets of X written as sets.
inline std::string render_law_carrier(const DistLaw& law, std::size_t n) {
  const auto& F = law.functor();
  const auto pn = powerset_size(n);
  std::vector<std::string> labels;
  for (std::size_t A = 0; A < pn; ++A) labels.push_back(render_mask(A));
  const FinSet PX(pn, labels);
  std::string s;
  const auto& c = law.carrier(n);
  for (std::size_t a = 0; a < c.size(); ++a)
    s += F.render(pn, static_cast<index_t>(a), &PX) + " ↦ " + detail::render_row(F, n, c[a]) + "\n";
  return s;
}

inline std::string render_solution(const DistLaw& law) {
  std::string s;
  for (std::size_t n = 0; n <= law.stored_bound().value_or(0); ++n)
    s += "# carrier " + std::to_string(n) + "\n" + render_law_carrier(law, n);
  return s;
}

inline Report search_report(const SearchOutcome& o, const std::vector<Classification>& labels) {
  Report rep;
  rep.command = "search " + o.functor.name();
  rep.verdict = o.verdict;
  rep.max_size = o.options.max_size;
  rep.note = o.note;
  rep.elapsed_ms = o.stats.elapsed_ms;
  rep.instances_checked = o.stats.nodes;
  nlohmann::json sols = nlohmann::json::array();
  for (std::size_t i = 0; i < o.solutions.size(); ++i)
    sols.push_back({{"label", i < labels.size() ? labels[i].label : "UNKNOWN"},
                    {"matches", i < labels.size() ? labels[i].matches : std::vector<std::string>{}},
                    {"verified", to_string(o.verification.at(i))}});
  rep.details = {{"support", o.options.support},
                 {"solutions", sols},
                 {"solution_count", o.solutions.size()},
                 {"variables", o.stats.variables},
                 {"classes", o.stats.classes},
                 {"constraints", o.stats.constraints},
                 {"groups", o.stats.groups},
                 {"inner_carriers", o.stats.carriers},
                 {"refinements", o.stats.refinements},
                 {"free_at_root", o.stats.free_at_root},
                 {"propagations", o.stats.propagations}};
  if (o.obstruction) rep.details["obstruction"] = obstruction_to_json(*o.obstruction);
  return rep;
}

}  // namespace rellift
