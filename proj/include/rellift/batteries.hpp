#pragma once

// Axiom batteries for extensions and the functor-side conditions that
// govern them: extension axioms, local monotonicity, the injection/surjection
// inequalities and their six-way equivalence, elementwise boundedness and the
// codiagonal formula.

#include <array>
#include <map>
#include <tuple>

#include "core.hpp"
#include "extension.hpp"
#include "functor.hpp"
#include "functor_laws.hpp"
#include "report.hpp"

namespace rellift {

namespace detail {

inline std::string rel_text(const Rel& r) {
  std::string s = std::to_string(r.dom()) + "⇸" + std::to_string(r.cod()) + " {";
  bool first = true;
  for (auto [x, y] : r.pairs()) {
    s += (first ? "" : ",") + std::string("(") + std::to_string(x) + "," + std::to_string(y) + ")";
    first = false;
  }
  return s + "}";
}

// Lifted relations for every r : a -/-> b, indexed by row-major mask.
// Relations whose lift exceeds the element bound are recorded as missing.
class LiftTable {
 public:
  explicit LiftTable(const Extension& E) : E_(E) {}

  const std::optional<Rel>& get(std::size_t a, std::size_t b, std::uint64_t mask) {
    auto& row = table_[{a, b}];
    if (row.empty()) row.resize(std::size_t{1} << (a * b));
    auto& slot = row[mask];
    if (!slot.done) {
      slot.done = true;
      try {
        slot.rel = E_.lift(Rel::from_mask(a, b, mask));
      } catch (const bound_error& e) {
        if (note_.empty()) note_ = e.what();
        ++skipped_;
      }
    }
    return slot.rel;
  }

  const std::optional<Rel>& get(const Rel& r) { return get(r.dom(), r.cod(), r.to_mask()); }

  std::size_t skipped() const { return skipped_; }
  const std::string& note() const { return note_; }

 private:
  struct Slot {
    bool done = false;
    std::optional<Rel> rel;
  };
  Extension E_;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<Slot>> table_;
  std::size_t skipped_ = 0;
  std::string note_;
};

// Composition sweeps skip carrier triples with more than 2^max_pair_bits pairs (r, s).
inline constexpr std::size_t max_pair_bits = 20;

inline void require_mask_carriers(std::size_t N) {
  if (N * N > 20) throw usage_error("relation sweeps enumerate every relation; max-size must be at most 4");
}

// Carrier triples <= N ordered by (max, sum, lexicographic).
inline std::vector<std::array<std::size_t, 3>> carrier_triples(std::size_t N) {
  std::vector<std::array<std::size_t, 3>> out;
  for (std::size_t a = 0; a <= N; ++a)
    for (std::size_t b = 0; b <= N; ++b)
      for (std::size_t c = 0; c <= N; ++c) out.push_back({a, b, c});
  std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    auto k = [](const auto& t) { return std::make_tuple(std::max({t[0], t[1], t[2]}), t[0] + t[1] + t[2], t); };
    return k(x) < k(y);
  });
  return out;
}

inline std::vector<std::pair<std::size_t, std::size_t>> carrier_pairs(std::size_t N) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t a = 0; a <= N; ++a)
    for (std::size_t b = 0; b <= N; ++b) out.emplace_back(a, b);
  std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    return std::make_tuple(std::max(x.first, x.second), x.first + x.second, x) <
           std::make_tuple(std::max(y.first, y.second), y.first + y.second, y);
  });
  return out;
}

// First pair in `lhs` but not in `rhs`, rendered with F-elements.
inline std::string first_difference(const FunctorSpec& F, const Rel& lhs, const Rel& rhs, std::size_t a,
                                    std::size_t b) {
  for (auto [x, y] : lhs.pairs())
    if (!rhs.test(x, y)) return "(" + F.render(a, static_cast<index_t>(x)) + ", " + F.render(b, static_cast<index_t>(y)) + ")";
  return "";
}

inline void finish_bounded(Report& rep, const LiftTable& t, const Stopwatch& sw) {
  if (rep.verdict == Verdict::pass && t.skipped() > 0) {
    rep.verdict = Verdict::inconclusive;
    rep.note = std::to_string(t.skipped()) + " relations could not be lifted within the element bound; first: " + t.note();
  }
  rep.elapsed_ms = sw.ms();
}

inline FinFun coproduct_injection(std::size_t n, std::size_t which) {
  std::vector<index_t> v(n);
  for (std::size_t x = 0; x < n; ++x) v[x] = static_cast<index_t>(which * n + x);
  return FinFun(n, 2 * n, std::move(v));
}

inline FinFun codiagonal(std::size_t n) {
  std::vector<index_t> v(2 * n);
  for (std::size_t x = 0; x < 2 * n; ++x) v[x] = static_cast<index_t>(x % n);
  return FinFun(2 * n, n, std::move(v));
}

}  // namespace detail

/// E(graph f) = graph(F f) and E(s.r) = E s . E r on carriers <= N.
inline Report check_extension_axioms(const Extension& E, std::size_t N) {
  detail::require_mask_carriers(N);
  Stopwatch sw;
  Report rep;
  rep.command = "ext-check " + E.name();
  rep.max_size = N;
  const auto& F = E.functor();
  detail::LiftTable t(E);
  for (auto [a, b] : detail::carrier_pairs(N)) {
    bool ok = for_each_function(a, b, [&](const FinFun& f) {
      const auto& Ef = t.get(graph(f));
      if (!Ef) return true;
      ++rep.instances_checked;
      if (*Ef != graph(F.map(f))) {
        rep.fail_with({"extension-graph", {{"f", fun_to_json(f)}},
                       "E(graph f) ≠ graph(F f) for f = " + describe(f)});
        return false;
      }
      return true;
    });
    if (!ok) return detail::finish_bounded(rep, t, sw), rep;
  }
  std::size_t triples_skipped = 0;
  for (const auto& [a, b, c] : detail::carrier_triples(N)) {
    if (a * b + b * c > detail::max_pair_bits) {
      ++triples_skipped;
      continue;
    }
    const std::uint64_t nr = std::uint64_t{1} << (a * b), ns = std::uint64_t{1} << (b * c);
    for (std::uint64_t mr = 0; mr < nr; ++mr) {
      const auto& Er = t.get(a, b, mr);
      if (!Er) continue;
      const auto r = Rel::from_mask(a, b, mr);
      for (std::uint64_t ms = 0; ms < ns; ++ms) {
        const auto& Es = t.get(b, c, ms);
        if (!Es) continue;
        const auto s = Rel::from_mask(b, c, ms);
        const auto& Esr = t.get(compose_rel(r, s));
        if (!Esr) continue;
        ++rep.instances_checked;
        const auto composite = compose_rel(*Er, *Es);
        if (composite != *Esr) {
          auto extra = detail::first_difference(F, *Esr, composite, a, c);
          auto missing = detail::first_difference(F, composite, *Esr, a, c);
          rep.fail_with({"extension-composition",
                         {{"r", rel_to_json(r)}, {"s", rel_to_json(s)}},
                         "E(s·r) ≠ E s·E r for r = " + detail::rel_text(r) + ", s = " + detail::rel_text(s) +
                             (extra.empty() ? "" : "; only in E(s·r): " + extra) +
                             (missing.empty() ? "" : "; only in E s·E r: " + missing)});
          return detail::finish_bounded(rep, t, sw), rep;
        }
      }
    }
  }
  detail::finish_bounded(rep, t, sw);
  if (rep.verdict == Verdict::pass && triples_skipped > 0) {
    rep.verdict = Verdict::inconclusive;
    rep.note = std::to_string(triples_skipped) + " carrier triples have more than 2^" +
               std::to_string(detail::max_pair_bits) + " relation pairs and were not swept";
  }
  rep.details["triples_skipped"] = triples_skipped;
  return rep;
}

/// r <= r' implies E r <= E r', checked on covering pairs r < r + {(x,y)}
/// (every nested pair is a chain of covers, and <= is transitive).
inline Report check_local_monotonicity(const Extension& E, std::size_t N) {
  detail::require_mask_carriers(N);
  Stopwatch sw;
  Report rep;
  rep.command = "monotone-check " + E.name();
  rep.max_size = N;
  const auto& F = E.functor();
  detail::LiftTable t(E);
  for (auto [a, b] : detail::carrier_pairs(N)) {
    const std::uint64_t n = std::uint64_t{1} << (a * b);
    for (std::uint64_t m = 0; m < n; ++m) {
      const auto& Er = t.get(a, b, m);
      if (!Er) continue;
      for (std::size_t bit = 0; bit < a * b; ++bit) {
        if ((m >> bit) & 1u) continue;
        const auto m2 = m | (std::uint64_t{1} << bit);
        const auto& Er2 = t.get(a, b, m2);
        if (!Er2) continue;
        ++rep.instances_checked;
        if (!Er->leq(*Er2)) {
          const auto r = Rel::from_mask(a, b, m), r2 = Rel::from_mask(a, b, m2);
          rep.fail_with({"not-monotone", {{"r", rel_to_json(r)}, {"r_prime", rel_to_json(r2)}},
                         "r = " + detail::rel_text(r) + " ≤ r' = " + detail::rel_text(r2) + " but E r relates " +
                             detail::first_difference(F, *Er, *Er2, a, b) + " and E r' does not"});
          detail::finish_bounded(rep, t, sw);
          return rep;
        }
      }
    }
  }
  detail::finish_bounded(rep, t, sw);
  return rep;
}

/// (F i)° <= E(i°) for injections, E(e°) <= (F e)° for surjections, with
/// equality flags.
inline Report lemma1_battery(const Extension& E, std::size_t N) {
  Stopwatch sw;
  Report rep;
  rep.command = "lemma1 " + E.name();
  rep.max_size = N;
  const auto& F = E.functor();
  detail::LiftTable t(E);
  bool inj_eq = true, surj_eq = true;
  for (auto [a, b] : detail::carrier_pairs(N)) {
    bool ok = for_each_function(a, b, [&](const FinFun& f) {
      const bool inj = f.injective(), surj = f.surjective();
      if (!inj && !surj) return true;
      const auto& Ec = t.get(converse(graph(f)));
      if (!Ec) return true;
      const auto Fc = converse(graph(F.map(f)));
      ++rep.instances_checked;
      if (inj) {
        if (!Fc.leq(*Ec)) {
          rep.fail_with({"injection-inequality", {{"f", fun_to_json(f)}},
                         "(F i)° ≰ E(i°) for i = " + describe(f) + ": (F i)° relates " +
                             detail::first_difference(F, Fc, *Ec, b, a)});
          return false;
        }
        inj_eq = inj_eq && Fc == *Ec;
      }
      if (surj) {
        if (!Ec->leq(Fc)) {
          rep.fail_with({"surjection-inequality", {{"f", fun_to_json(f)}},
                         "E(e°) ≰ (F e)° for e = " + describe(f) + ": E(e°) relates " +
                             detail::first_difference(F, *Ec, Fc, b, a)});
          return false;
        }
        surj_eq = surj_eq && Fc == *Ec;
      }
      return true;
    });
    if (!ok) break;
  }
  rep.details["injection_equality"] = inj_eq;
  rep.details["surjection_equality"] = surj_eq;
  detail::finish_bounded(rep, t, sw);
  return rep;
}

struct Lemma6Result {
  std::array<bool, 6> holds{};
  std::array<std::optional<Witness>, 6> witnesses;
  Report report;

  bool all_equal() const {
    return std::all_of(holds.begin(), holds.end(), [&](bool h) { return h == holds[0]; });
  }
};

inline const std::array<const char*, 6> lemma6_labels = {
    "locally monotone", "r ≤ 1 ⇒ E r ≤ 1", "r ≥ 1 ⇒ E r ≥ 1",
    "E(i°) = (F i)° for injections", "E(e°) = (F e)° for surjections", "F ρ1 ≤ E(∇°)"};

/// The six conditions of the local-monotonicity equivalence, each evaluated on
/// every instance within N; (vi) only at X with 2|X| <= N.
inline Lemma6Result lemma6_battery(const Extension& E, std::size_t N) {
  detail::require_mask_carriers(N);
  Stopwatch sw;
  Lemma6Result res;
  res.holds.fill(true);
  auto& rep = res.report;
  rep.command = "lemma6 " + E.name();
  rep.max_size = N;
  const auto& F = E.functor();
  detail::LiftTable t(E);
  auto refute = [&](std::size_t k, Witness w) {
    if (!res.holds[k]) return;
    res.holds[k] = false;
    res.witnesses[k] = std::move(w);
  };

  auto mono = check_local_monotonicity(E, N);
  rep.instances_checked += mono.instances_checked;
  if (mono.verdict == Verdict::fail) refute(0, mono.witnesses[0]);

  for (std::size_t n = 0; n <= N; ++n) {
    const auto id = Rel::identity(n);
    const auto Fid = Rel::identity(F.size(n));
    for (std::uint64_t m = 0; m < (std::uint64_t{1} << (n * n)); ++m) {
      const auto r = Rel::from_mask(n, n, m);
      const bool below = r.leq(id), above = id.leq(r);
      if (!below && !above) continue;
      const auto& Er = t.get(n, n, m);
      if (!Er) continue;
      ++rep.instances_checked;
      if (below && !Er->leq(Fid))
        refute(1, {"sub-identity", {{"r", rel_to_json(r)}},
                   "r = " + detail::rel_text(r) + " ≤ 1 but E r relates " + detail::first_difference(F, *Er, Fid, n, n)});
      if (above && !Fid.leq(*Er))
        refute(2, {"super-identity", {{"r", rel_to_json(r)}},
                   "r = " + detail::rel_text(r) + " ≥ 1 but E r misses " + detail::first_difference(F, Fid, *Er, n, n)});
    }
  }

  for (auto [a, b] : detail::carrier_pairs(N))
    for_each_function(a, b, [&](const FinFun& f) {
      const bool inj = f.injective(), surj = f.surjective();
      if (!inj && !surj) return true;
      const auto& Ec = t.get(converse(graph(f)));
      if (!Ec) return true;
      ++rep.instances_checked;
      const auto Fc = converse(graph(F.map(f)));
      if (inj && Fc != *Ec)
        refute(3, {"injection-equality", {{"f", fun_to_json(f)}}, "E(i°) ≠ (F i)° for i = " + describe(f)});
      if (surj && Fc != *Ec)
        refute(4, {"surjection-equality", {{"f", fun_to_json(f)}}, "E(e°) ≠ (F e)° for e = " + describe(f)});
      return true;
    });

  for (std::size_t n = 0; 2 * n <= N; ++n) {
    const auto& Enabla = t.get(converse(graph(detail::codiagonal(n))));
    if (!Enabla) continue;
    ++rep.instances_checked;
    const auto Frho = graph(F.map(detail::coproduct_injection(n, 0)));
    if (!Frho.leq(*Enabla))
      refute(5, {"codiagonal", {{"carrier", n}},
                 "F ρ1 ≰ E(∇°) at |X| = " + std::to_string(n) + ": F ρ1 relates " +
                     detail::first_difference(F, Frho, *Enabla, n, 2 * n)});
  }

  auto flags = nlohmann::json::array();
  for (std::size_t k = 0; k < 6; ++k) flags.push_back(res.holds[k]);
  rep.details["conditions"] = flags;
  rep.details["all_equal"] = res.all_equal();
  for (std::size_t k = 0; k < 6; ++k)
    if (res.witnesses[k]) {
      auto w = *res.witnesses[k];
      w.text = "(" + std::to_string(k + 1) + ") " + lemma6_labels[k] + " fails: " + w.text;
      rep.witnesses.push_back(std::move(w));
    }
  // the six conditions are equivalent; disagreement is the violation
  rep.verdict = res.all_equal() ? Verdict::pass : Verdict::fail;
  detail::finish_bounded(rep, t, sw);
  return res;
}

/// Pointwise comparison of two extensions of the same functor on carriers <= N.
struct ExtensionOrder {
  bool leq = true;  // E1 r <= E2 r for all r
  bool geq = true;  // E1 r >= E2 r for all r
};

inline ExtensionOrder compare_extensions(const Extension& E1, const Extension& E2, std::size_t N) {
  detail::require_mask_carriers(N);
  ExtensionOrder o;
  for (auto [a, b] : detail::carrier_pairs(N))
    for (std::uint64_t m = 0; m < (std::uint64_t{1} << (a * b)); ++m) {
      const auto r = Rel::from_mask(a, b, m);
      const auto x = E1.lift(r), y = E2.lift(r);
      o.leq = o.leq && x.leq(y);
      o.geq = o.geq && y.leq(x);
    }
  return o;
}

// ---------------------------------------------------------------------------

/// K_X as a function of |X|; every value must be at least 2.
struct BoundedFamily {
  std::function<std::size_t(std::size_t)> K;
  std::string label;

  static BoundedFamily constant(std::size_t k) {
    if (k < 2) throw usage_error("bounded family: K must have at least 2 elements");
    return {[k](std::size_t) { return k; }, std::to_string(k)};
  }
  std::size_t at(std::size_t n) const {
    const auto k = K(n);
    if (k < 2) throw usage_error("bounded family: K_X must have at least 2 elements");
    return k;
  }
};

/// For |X| <= N, every element of F(X x K_X) lies in F A for some A that omits
/// at least one copy (x, k) of every x. It suffices to test the maximal such A,
/// which omit exactly one copy per x. Pairs (x,k) are numbered x*|K| + k.
inline Report check_elementwise_bounded(const FunctorSpec& F, const BoundedFamily& K, std::size_t N) {
  Stopwatch sw;
  Report rep;
  rep.command = "ewb " + F.name() + " K=" + K.label;
  rep.max_size = N;
  try {
    for (std::size_t n = 0; n <= N; ++n) {
      const auto k = K.at(n), total = n * k;
      const auto FXK = F.size(total);
      std::vector<char> covered(FXK, 0);
      std::vector<index_t> omit(n, 0);
      while (true) {
        Bits A(total);
        for (std::size_t x = 0; x < n; ++x)
          for (std::size_t j = 0; j < k; ++j)
            if (j != omit[x]) A.set(x * k + j);
        const auto Fi = F.map(subset_inclusion(total, A));
        for (auto v : Fi.images()) covered[v] = 1;
        std::size_t x = 0;
        while (x < n && ++omit[x] == k) omit[x++] = 0;
        if (x == n) break;
      }
      rep.instances_checked += FXK;
      for (index_t a = 0; a < FXK; ++a)
        if (!covered[a]) {
          rep.fail_with({"not-elementwise-bounded", {{"carrier", n}, {"K", k}, {"element", a}},
                         "|X| = " + std::to_string(n) + ", |K| = " + std::to_string(k) + ": " + F.render(total, a) +
                             " ∈ F(X×K) needs every copy of some element"});
          rep.elapsed_ms = sw.ms();
          return rep;
        }
    }
  } catch (const bound_error& e) {
    rep.verdict = Verdict::inconclusive;
    rep.note = e.what();
  }
  rep.elapsed_ms = sw.ms();
  return rep;
}

/// Every element of F kappa lies in F A for some proper subset A of kappa.
inline Report check_ewb_witness_set(const FunctorSpec& F, std::size_t kappa) {
  Stopwatch sw;
  Report rep;
  rep.command = "ewb-witness " + F.name() + " κ=" + std::to_string(kappa);
  rep.max_size = kappa;
  if (kappa < 2) throw usage_error("ewb-witness: κ must have at least 2 elements");
  try {
    const auto Fk = F.size(kappa);
    std::vector<char> covered(Fk, 0);
    for (std::size_t x = 0; x < kappa; ++x) {
      Bits A(kappa);
      for (std::size_t y = 0; y < kappa; ++y)
        if (y != x) A.set(y);
      const auto Fi = F.map(subset_inclusion(kappa, A));
      for (auto v : Fi.images()) covered[v] = 1;
    }
    rep.instances_checked = Fk;
    for (index_t a = 0; a < Fk; ++a)
      if (!covered[a]) {
        rep.fail_with({"no-proper-support", {{"kappa", kappa}, {"element", a}},
                       F.render(kappa, a) + " ∈ F κ lies in F A for no proper subset A of κ"});
        break;
      }
  } catch (const bound_error& e) {
    rep.verdict = Verdict::inconclusive;
    rep.note = e.what();
  }
  rep.elapsed_ms = sw.ms();
  return rep;
}

/// Compares F e with the join of (F ρ1)° · F f over all f : Y -> X+X with
/// e · f° = ∇_X. The join is always below F e; equality is reported.
inline Report check_codiagonal_formula(const FunctorSpec& F, const FinFun& e) {
  Stopwatch sw;
  Report rep;
  const auto Y = e.dom(), X = e.cod();
  rep.command = "codiagonal " + F.name() + " e = " + describe(e);
  try {
    const auto nabla = graph(detail::codiagonal(X));
    const auto Frho = graph(F.map(detail::coproduct_injection(X, 0)));
    const auto Fe = graph(F.map(e));
    const auto ge = graph(e);
    Rel join(F.size(Y), F.size(X));
    std::size_t factorizations = 0;
    for_each_function(Y, 2 * X, [&](const FinFun& f) {
      ++rep.instances_checked;
      if (compose_rel(converse(graph(f)), ge) != nabla) return true;
      ++factorizations;
      join |= compose_rel(graph(F.map(f)), converse(Frho));
      return true;
    });
    const bool below = join.leq(Fe), equal = join == Fe;
    if (!below)
      rep.fail_with({"codiagonal-above", {{"e", fun_to_json(e)}},
                     "the join relates " + detail::first_difference(F, join, Fe, Y, X) + ", which F e does not"});
    rep.details["inequality"] = below;
    rep.details["equality"] = equal;
    rep.details["factorizations"] = factorizations;
    if (below && !equal)
      rep.note = "strict: F e relates " + detail::first_difference(F, Fe, join, Y, X) + ", which the join misses";
  } catch (const bound_error& err) {
    rep.verdict = Verdict::inconclusive;
    rep.note = err.what();
  }
  rep.elapsed_ms = sw.ms();
  return rep;
}

}  // namespace rellift
