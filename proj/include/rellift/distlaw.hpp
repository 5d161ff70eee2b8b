#pragma once

// Distributive laws F P -> P F: rule-based and tabulated forms, the
// correspondence with extensions, and the bounded law axioms.

#include <map>
#include <memory>
#include <mutex>

#include "core.hpp"
#include "extension.hpp"
#include "functor.hpp"
#include "functor_laws.hpp"
#include "monad.hpp"
#include "report.hpp"

namespace rellift {

enum class LawRule { Barr, Image, RestrictedImage, FromMorphism, Table };

inline const char* to_string(LawRule r) {
  switch (r) {
    case LawRule::Barr: return "barr";
    case LawRule::Image: return "image";
    case LawRule::RestrictedImage: return "restricted-image";
    case LawRule::FromMorphism: return "from-morphism";
    case LawRule::Table: return "table";
  }
  return "?";
}

/// σ_X : F(P X) -> P(F X). apply(n, t) is the set σ_n(t) as a bit row over F n.
class DistLaw {
 public:
  using Table = std::map<std::size_t, std::vector<Bits>>;

  static DistLaw barr(FunctorSpec F) { return DistLaw(LawRule::Barr, std::move(F)); }
  static DistLaw image() { return DistLaw(LawRule::Image, FunctorSpec::parse("P(X)")); }
  static DistLaw restricted_image() { return DistLaw(LawRule::RestrictedImage, FunctorSpec::parse("P(X)")); }

  /// σ_X(t) = { bind^T(λ_X)(t) } for a monad morphism λ : P -> T.
  static DistLaw from_morphism(MonadMorphism l) {
    DistLaw d(LawRule::FromMorphism, l.target.functor());
    d.st_->morphism = std::make_shared<MonadMorphism>(std::move(l));
    return d;
  }

  /// Entries for carriers 0..bound; each carrier n needs |F(P n)| rows over F n.
  static DistLaw table(FunctorSpec F, Table t, std::string name = "table") {
    DistLaw d(LawRule::Table, std::move(F));
    std::size_t bound = 0;
    for (std::size_t n = 0; t.count(n); ++n) bound = n;
    if (t.empty() || !t.count(0) || t.size() != bound + 1)
      throw usage_error("law table must cover carriers 0..bound without gaps");
    for (const auto& [n, rows] : t) {
      const auto in = d.st_->functor.size(powerset_size(n)), out = d.st_->functor.size(n);
      if (rows.size() != in) throw usage_error("law table: carrier " + std::to_string(n) + " needs " + std::to_string(in) + " rows");
      for (const auto& r : rows)
        if (r.size() != out) throw usage_error("law table: row width must be |F " + std::to_string(n) + "|");
    }
    d.st_->bound = bound;
    d.st_->name = std::move(name);
    std::lock_guard lock(d.st_->mu);
    d.st_->cache = std::move(t);
    return d;
  }

  static DistLaw from_name(const std::string& name, const FunctorSpec& F) {
    if (name == "barr") return barr(F);
    if (name == "image" || name == "restricted-image") {
      if (F.expr() != FunctorSpec::parse("P(X)").expr()) throw usage_error(name + " law requires P(X)");
      return name == "image" ? image() : restricted_image();
    }
    const std::string prefix = "from-morphism:";
    if (name.rfind(prefix, 0) == 0) {
      auto d = from_morphism(morphism_by_name(name.substr(prefix.size())));
      if (d.functor().expr() != F.expr())
        throw usage_error(name + " is a law for " + d.functor().name() + ", not " + F.name());
      return d;
    }
    throw usage_error("unknown law '" + name + "' (barr | image | restricted-image | from-morphism:<morphism>)");
  }

  LawRule rule() const { return st_->rule; }
  const FunctorSpec& functor() const { return st_->functor; }
  std::optional<std::size_t> stored_bound() const { return st_->bound; }
  const MonadMorphism* morphism() const { return st_->morphism.get(); }
  std::string name() const {
    if (!st_->name.empty()) return st_->name;
    if (st_->rule == LawRule::FromMorphism) return "from-morphism:" + st_->morphism->name;
    return std::string(to_string(st_->rule)) + " law for " + st_->functor.name();
  }

  const std::vector<Bits>& carrier(std::size_t n) const {
    {
      std::lock_guard lock(st_->mu);
      auto it = st_->cache.find(n);
      if (it != st_->cache.end()) return it->second;
    }
    if (st_->rule == LawRule::Table)
      throw bound_error("law table stores carriers <= " + std::to_string(*st_->bound), SIZE_MAX);
    auto rows = compute(n);
    std::lock_guard lock(st_->mu);
    return st_->cache.emplace(n, std::move(rows)).first->second;
  }

  const Bits& apply(std::size_t n, index_t t) const { return carrier(n).at(t); }

 private:
  struct State {
    State(LawRule r, FunctorSpec F) : rule(r), functor(std::move(F)) {}
    LawRule rule;
    FunctorSpec functor;
    std::shared_ptr<MonadMorphism> morphism;
    std::optional<std::size_t> bound;
    std::string name;
    std::mutex mu;
    Table cache;
  };

  DistLaw(LawRule r, FunctorSpec F) : st_(std::make_shared<State>(r, std::move(F))) {}

  std::vector<Bits> compute(std::size_t n) const {
    const auto& F = st_->functor;
    const auto pn = powerset_size(n);
    const auto in = F.size(pn), out = F.size(n);
    std::vector<Bits> rows(in, Bits(out));
    switch (st_->rule) {
      case LawRule::Barr: {
        const auto lifted = barr_lift(F, membership(n));
        for (std::size_t t = 0; t < in; ++t) rows[t] = lifted.row_bits(t);
        break;
      }
      case LawRule::Image:
      case LawRule::RestrictedImage:
        for (std::size_t t = 0; t < in; ++t) {
          std::uint64_t u = 0;
          for (std::size_t A = 0; A < pn; ++A)
            if ((t >> A) & 1u) u |= A;
          if (st_->rule == LawRule::RestrictedImage && t != 0 && u == 0) continue;
          rows[t].set(u);
        }
        break;
      case LawRule::FromMorphism: {
        const auto comp = morphism_component(*st_->morphism, n);
        for (std::size_t t = 0; t < in; ++t)
          rows[t].set(st_->morphism->target.bind(n, comp.images(), pn, static_cast<index_t>(t)));
        break;
      }
      case LawRule::Table: break;
    }
    return rows;
  }

  std::shared_ptr<State> st_;
};

/// The extension of a law: a (E r) b iff b ∈ σ_Y(F(r♯)(a)). Tabulated on
/// codomains <= bound; any domain within the element bound.
inline Extension law_to_extension(const DistLaw& law, std::size_t bound) {
  if (law.stored_bound()) bound = std::min(bound, *law.stored_bound());
  const auto F = law.functor();
  return Extension::tabulated(
      F, bound,
      [law, F](const Rel& r) {
        const auto Fr = F.map(kleisli_transpose(r));
        Rel out(Fr.dom(), F.size(r.cod()));
        for (std::size_t a = 0; a < Fr.dom(); ++a) out.set_row(a, law.apply(r.cod(), Fr(a)));
        return out;
      },
      "extension of " + law.name(), SIZE_MAX);
}

/// σ_X = rows of E(∋_X) for carriers <= bound.
inline DistLaw extension_to_law(const Extension& E, std::size_t bound) {
  DistLaw::Table t;
  for (std::size_t n = 0; n <= bound; ++n) {
    const auto lifted = E.lift(membership(n));
    std::vector<Bits> rows;
    rows.reserve(lifted.dom());
    for (std::size_t a = 0; a < lifted.dom(); ++a) rows.push_back(lifted.row_bits(a));
    t.emplace(n, std::move(rows));
  }
  return DistLaw::table(E.functor(), std::move(t), "law of " + E.name());
}

// ---------------------------------------------------------------------------

struct LawAxiomReport {
  Report naturality, unit, multiplication;
  std::size_t max_size = 0, support_bound = 0;

  Verdict verdict() const {
    for (auto v : {Verdict::fail, Verdict::inconclusive})
      for (const auto* r : {&naturality, &unit, &multiplication})
        if (r->verdict == v) return v;
    return Verdict::pass;
  }

  /// All three parts folded into one report for output.
  Report combined(const std::string& command) const {
    Report rep;
    rep.command = command;
    rep.max_size = max_size;
    rep.verdict = verdict();
    double ms = 0;
    std::vector<std::string> notes;
    for (const auto* r : {&naturality, &unit, &multiplication}) {
      rep.instances_checked += r->instances_checked;
      rep.witnesses.insert(rep.witnesses.end(), r->witnesses.begin(), r->witnesses.end());
      rep.details[r->command] = to_string(r->verdict);
      ms += r->elapsed_ms;
      if (!r->note.empty()) notes.push_back(r->command + ": " + r->note);
    }
    for (std::size_t i = 0; i < notes.size(); ++i) rep.note += (i ? "; " : "") + notes[i];
    rep.details["support_bound"] = support_bound;
    rep.elapsed_ms = ms;
    return rep;
  }
};

namespace detail {

inline Bits image_bits(const FinFun& f, const Bits& s) {
  Bits out(f.cod());
  s.for_each([&](std::size_t i) { out.set(f(i)); });
  return out;
}

inline FinFun unit_into_powerset(std::size_t n) {
  std::vector<index_t> v(n);
  for (std::size_t x = 0; x < n; ++x) v[x] = static_cast<index_t>(std::uint64_t{1} << x);
  return FinFun(n, powerset_size(n), std::move(v));
}

inline std::string render_row(const FunctorSpec& F, std::size_t n, const Bits& row) {
  std::string s = "{";
  bool first = true;
  row.for_each([&](std::size_t i) {
    s += (first ? "" : ",") + F.render(n, static_cast<index_t>(i));
    first = false;
  });
  return s + "}";
}

// Subsets of P X of size <= k as ascending lists of subset masks.
inline std::vector<std::vector<index_t>> small_families(std::size_t X, std::size_t k) {
  std::vector<std::vector<index_t>> out;
  std::vector<index_t> cur;
  const auto px = powerset_size(X);
  std::function<void(std::size_t)> rec = [&](std::size_t from) {
    out.push_back(cur);
    if (cur.size() == k) return;
    for (std::size_t A = from; A < px; ++A) {
      cur.push_back(static_cast<index_t>(A));
      rec(A + 1);
      cur.pop_back();
    }
  };
  rec(0);
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.size() < b.size(); });
  return out;
}

}  // namespace detail

/// One multiplication instance: for j : b -> P X listing the family B and
/// 𝔅 ∈ F(P b), σ_X(F(∪∘P j)(𝔅)) = ⋃ {σ_X(F j(𝔟)) | 𝔟 ∈ σ_b(𝔅)}.
/// Returns the two sides.
inline std::pair<Bits, Bits> multiplication_sides(const DistLaw& law, std::size_t X, const std::vector<index_t>& B,
                                                  index_t frak_b) {
  const auto& F = law.functor();
  const auto b = B.size();
  const FinFun j(b, powerset_size(X), B);
  std::vector<index_t> g(powerset_size(b));
  for (std::size_t S = 0; S < g.size(); ++S) {
    index_t u = 0;
    for (std::size_t i = 0; i < b; ++i)
      if ((S >> i) & 1u) u |= B[i];
    g[S] = u;
  }
  const auto Fg = F.map(FinFun(powerset_size(b), powerset_size(X), std::move(g)));
  const auto Fj = F.map(j);
  Bits lhs = law.apply(X, Fg(frak_b));
  Bits rhs(F.size(X));
  law.apply(b, frak_b).for_each([&](std::size_t y) { rhs |= law.apply(X, Fj(static_cast<index_t>(y))); });
  return {lhs, rhs};
}

/// The law axioms on carriers <= N; multiplication on families B ⊆ P X with
/// |B| <= support_bound (and within the law's stored carriers).
inline LawAxiomReport check_distlaw_axioms(const DistLaw& law, std::size_t N, std::size_t support_bound) {
  LawAxiomReport out;
  out.max_size = N;
  out.support_bound = support_bound;
  const auto& F = law.functor();
  const auto stored = law.stored_bound().value_or(SIZE_MAX);
  const auto fx = [&](std::size_t n) { return F.size(n); };

  auto run = [&](Report& rep, const char* name, auto&& body) {
    Stopwatch sw;
    rep.command = name;
    rep.max_size = N;
    std::size_t skipped = 0;
    std::string note;
    body(rep, [&](const bound_error& e) {
      ++skipped;
      if (note.empty()) note = e.what();
    });
    if (rep.passed() && skipped) {
      rep.verdict = Verdict::inconclusive;
      rep.note = std::to_string(skipped) + " carriers exceeded the element bound; first: " + note;
    }
    rep.elapsed_ms = sw.ms();
  };

  run(out.naturality, "naturality", [&](Report& rep, auto&& skip) {
    for (std::size_t n = 0; n <= N && rep.passed(); ++n)
      for (std::size_t m = 0; m <= N && rep.passed(); ++m) {
        try {
          law.carrier(n), law.carrier(m);
        } catch (const bound_error& e) {
          skip(e);
          continue;
        }
        for_each_function(n, m, [&](const FinFun& h) {
          const auto Fh = F.map(h), FPh = F.map(powerset_map(h));
          for (index_t t = 0; t < FPh.dom(); ++t) {
            ++rep.instances_checked;
            const auto lhs = detail::image_bits(Fh, law.apply(n, t));
            const auto& rhs = law.apply(m, FPh(t));
            if (lhs != rhs) {
              rep.fail_with({"law-naturality", {{"law", law.name()}, {"h", fun_to_json(h)}, {"t", t}},
                             "P F h(σ(" + F.render(powerset_size(n), t) + ")) = " + detail::render_row(F, m, lhs) +
                                 " but σ(F P h(t)) = σ(" + F.render(powerset_size(m), FPh(t)) + ") = " +
                                 detail::render_row(F, m, rhs) + ", h = " + describe(h)});
              return false;
            }
          }
          return true;
        });
      }
  });

  run(out.unit, "unit", [&](Report& rep, auto&& skip) {
    for (std::size_t n = 0; n <= N && rep.passed(); ++n) {
      try {
        law.carrier(n);
      } catch (const bound_error& e) {
        skip(e);
        continue;
      }
      const auto Feta = F.map(detail::unit_into_powerset(n));
      for (index_t a = 0; a < fx(n); ++a) {
        ++rep.instances_checked;
        const auto& got = law.apply(n, Feta(a));
        if (got.count() != 1 || !got.test(a)) {
          rep.fail_with({"law-unit", {{"law", law.name()}, {"n", n}, {"a", a}},
                         "σ(F η(" + F.render(n, a) + ")) = " + detail::render_row(F, n, got) + ", expected {" +
                             F.render(n, a) + "}"});
          break;
        }
      }
    }
  });

  run(out.multiplication, "multiplication", [&](Report& rep, auto&& skip) {
    for (std::size_t X = 0; X <= N && rep.passed(); ++X) {
      try {
        law.carrier(X);
      } catch (const bound_error& e) {
        skip(e);
        continue;
      }
      const auto k = std::min({support_bound, powerset_size(X), stored});
      for (const auto& B : detail::small_families(X, k)) {
        if (!rep.passed()) break;
        try {
          law.carrier(B.size());
        } catch (const bound_error& e) {
          skip(e);
          continue;
        }
        const auto inputs = F.size(powerset_size(B.size()));
        for (index_t t = 0; t < inputs; ++t) {
          ++rep.instances_checked;
          auto [lhs, rhs] = multiplication_sides(law, X, B, t);
          if (lhs != rhs) {
            nlohmann::json fam = nlohmann::json::array();
            std::string famtext;
            for (auto A : B) {
              fam.push_back(A);
              famtext += (famtext.empty() ? "" : ",") + render_mask(A);
            }
            rep.fail_with({"law-multiplication",
                           {{"law", law.name()}, {"X", X}, {"B", fam}, {"t", t}},
                           "|X| = " + std::to_string(X) + ", B = [" + famtext + "], 𝔅 = " +
                               F.render(powerset_size(B.size()), t) + ": σ(F μ(𝔗)) = " +
                               detail::render_row(F, X, lhs) + " but μ(P σ(σ(𝔗))) = " +
                               detail::render_row(F, X, rhs)});
            break;
          }
        }
      }
    }
  });
  return out;
}

/// Re-checks a law-multiplication witness against the given law.
inline bool replay_multiplication_witness(const DistLaw& law, const Witness& w) {
  if (w.kind != "law-multiplication") throw usage_error("not a multiplication witness: " + w.kind);
  const auto B = w.data.at("B").get<std::vector<index_t>>();
  auto [lhs, rhs] = multiplication_sides(law, w.data.at("X").get<std::size_t>(), B, w.data.at("t").get<index_t>());
  return lhs != rhs;
}

// ---------------------------------------------------------------------------

/// The Barr law for P on carriers <= 3, except on the orbit of {{0,1},{2}}
/// where σ takes the value {{0,2},{1,2}} (transported along the permutation).
inline DistLaw case3_candidate() {
  const auto P = FunctorSpec::parse("P(X)");
  const auto barr = DistLaw::barr(P);
  DistLaw::Table t;
  for (std::size_t n = 0; n <= 3; ++n) t.emplace(n, barr.carrier(n));
  const index_t p = (1u << 0b011) | (1u << 0b100);
  const index_t value = (1u << 0b101) | (1u << 0b110);
  std::vector<index_t> perm = {0, 1, 2};
  do {
    const FinFun pi(3, 3, perm);
    const auto Ppi = powerset_map(pi);
    const auto PPpi = P.map(Ppi);
    Bits transported(8);
    for (std::size_t A = 0; A < 8; ++A)
      if ((value >> A) & 1u) transported.set(Ppi(static_cast<index_t>(A)));
    t[3][PPpi(p)] = transported;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return DistLaw::table(P, std::move(t), "case-3 candidate");
}

}  // namespace rellift
