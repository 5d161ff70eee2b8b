#pragma once

// Monads on finite carriers in Kleisli form (unit and bind), monad
// morphisms out of the powerset monad, and bounded law checks for both.

#include <optional>
#include <numeric>
#include <random>

#include "core.hpp"
#include "extension.hpp"
#include "functor.hpp"
#include "functor_laws.hpp"
#include "report.hpp"

namespace rellift {

namespace detail {

// Neighbourhood-type elements as bitmasks over the subsets of n.
inline std::uint64_t system_code(const FunctorSpec& F, std::size_t n, index_t i) {
  switch (F.expr().kind) {
    case FunctorKind::Filt: return up_of(i, n);
    case FunctorKind::Ultra: return up_of(std::uint64_t{1} << i, n);
    case FunctorKind::Mono:
    case FunctorKind::Nb: return F.object(n)->code(i);
    default: throw usage_error(F.name() + " is not a neighbourhood-type functor");
  }
}

inline std::optional<index_t> system_index(const FunctorSpec& F, std::size_t n, std::uint64_t code) {
  switch (F.expr().kind) {
    case FunctorKind::Filt: {
      std::uint64_t gen = (std::uint64_t{1} << n) - 1;
      for (std::size_t b = 0; b < (std::size_t{1} << n); ++b)
        if ((code >> b) & 1u) gen &= b;
      if (code == 0 || up_of(gen, n) != code) return std::nullopt;
      return static_cast<index_t>(gen);
    }
    case FunctorKind::Ultra:
      for (std::size_t x = 0; x < n; ++x)
        if (up_of(std::uint64_t{1} << x, n) == code) return static_cast<index_t>(x);
      return std::nullopt;
    case FunctorKind::Mono: {
      if (up_closure(code, n) != code) return std::nullopt;
      return F.object(n)->lookup(code);
    }
    case FunctorKind::Nb: return static_cast<index_t>(code);
    default: throw usage_error(F.name() + " is not a neighbourhood-type functor");
  }
}

// {A ⊆ X | {y | A ∈ k(y)} ∈ Φ}
inline std::uint64_t system_bind(std::size_t X, const std::vector<std::uint64_t>& k, std::uint64_t phi) {
  std::uint64_t out = 0;
  for (std::size_t A = 0; A < (std::size_t{1} << X); ++A) {
    std::uint64_t S = 0;
    for (std::size_t y = 0; y < k.size(); ++y)
      if ((k[y] >> A) & 1u) S |= std::uint64_t{1} << y;
    if ((phi >> S) & 1u) out |= std::uint64_t{1} << A;
  }
  return out;
}

inline void require_small(std::size_t n, const char* what) {
  if (n > 6) throw bound_error(std::string(what) + " on a " + std::to_string(n) + "-element carrier", SIZE_MAX);
}

}  // namespace detail

/// A monad given by its functor, unit and Kleisli extension: bind(X, k, Y, t)
/// is the extension of k : Y -> T X applied to t in T Y.
class MonadSpec {
 public:
  using Unit = std::function<index_t(std::size_t n, index_t x)>;
  using Bind = std::function<index_t(std::size_t X, const std::vector<index_t>& k, std::size_t Y, index_t t)>;

  MonadSpec(std::string name, FunctorSpec F, Unit unit, Bind bind)
      : name_(std::move(name)), F_(std::move(F)), unit_(std::move(unit)), bind_(std::move(bind)) {}

  const std::string& name() const { return name_; }
  const FunctorSpec& functor() const { return F_; }
  index_t unit(std::size_t n, index_t x) const { return unit_(n, x); }
  index_t bind(std::size_t X, const std::vector<index_t>& k, std::size_t Y, index_t t) const {
    return bind_(X, k, Y, t);
  }

  FinFun unit_map(std::size_t n) const {
    std::vector<index_t> v(n);
    for (std::size_t x = 0; x < n; ++x) v[x] = unit(n, static_cast<index_t>(x));
    return FinFun(n, F_.size(n), std::move(v));
  }

  /// mult_X : T T X -> T X, where it fits in the element bound.
  FinFun mult_map(std::size_t n) const {
    const auto tx = F_.size(n);
    const auto ttx = F_.size(tx);
    std::vector<index_t> id(tx);
    std::iota(id.begin(), id.end(), 0);
    std::vector<index_t> v(ttx);
    for (std::size_t t = 0; t < ttx; ++t) v[t] = bind(n, id, tx, static_cast<index_t>(t));
    return FinFun(ttx, tx, std::move(v));
  }

 private:
  std::string name_;
  FunctorSpec F_;
  Unit unit_;
  Bind bind_;
};

inline MonadSpec powerset_monad() {
  return MonadSpec(
      "P", FunctorSpec::parse("P(X)"), [](std::size_t, index_t x) { return index_t{1} << x; },
      [](std::size_t, const std::vector<index_t>& k, std::size_t Y, index_t t) {
        index_t out = 0;
        for (std::size_t y = 0; y < Y; ++y)
          if ((t >> y) & 1u) out |= k[y];
        return out;
      });
}

/// Negative control: unions replaced by intersections (the empty family goes to X).
inline MonadSpec powerset_intersection_monad() {
  return MonadSpec(
      "P-cap", FunctorSpec::parse("P(X)"), [](std::size_t, index_t x) { return index_t{1} << x; },
      [](std::size_t X, const std::vector<index_t>& k, std::size_t Y, index_t t) {
        index_t out = static_cast<index_t>((std::uint64_t{1} << X) - 1);
        for (std::size_t y = 0; y < Y; ++y)
          if ((t >> y) & 1u) out &= k[y];
        return out;
      });
}

inline MonadSpec terminal_monad() {
  return MonadSpec(
      "1", FunctorSpec::parse("1"), [](std::size_t, index_t) { return index_t{0}; },
      [](std::size_t, const std::vector<index_t>&, std::size_t, index_t) { return index_t{0}; });
}

/// Filters, ultrafilters, monotone and plain neighbourhood systems: the unit
/// is the principal ultrafilter and bind(k)(Φ) = {A | {y | A ∈ k(y)} ∈ Φ}.
inline MonadSpec neighbourhood_monad(const std::string& kind) {
  auto F = FunctorSpec::parse(kind + "(X)");
  const auto fk = F.expr().kind;
  if (fk != FunctorKind::Filt && fk != FunctorKind::Ultra && fk != FunctorKind::Mono && fk != FunctorKind::Nb)
    throw usage_error("no neighbourhood monad on " + kind);
  MonadSpec::Unit unit = [F](std::size_t n, index_t x) {
    detail::require_small(n, "neighbourhood unit");
    return *detail::system_index(F, n, detail::up_of(std::uint64_t{1} << x, n));
  };
  MonadSpec::Bind bind;
  if (fk == FunctorKind::Filt) {
    bind = [](std::size_t, const std::vector<index_t>& k, std::size_t Y, index_t t) {
      index_t out = 0;
      for (std::size_t y = 0; y < Y; ++y)
        if ((t >> y) & 1u) out |= k[y];
      return out;
    };
  } else if (fk == FunctorKind::Ultra) {
    bind = [](std::size_t, const std::vector<index_t>& k, std::size_t, index_t t) { return k[t]; };
  } else {
    bind = [F](std::size_t X, const std::vector<index_t>& k, std::size_t Y, index_t t) {
      detail::require_small(std::max(X, Y), "neighbourhood bind");
      std::vector<std::uint64_t> kc(Y);
      for (std::size_t y = 0; y < Y; ++y) kc[y] = detail::system_code(F, X, k[y]);
      return *detail::system_index(F, X, detail::system_bind(X, kc, detail::system_code(F, Y, t)));
    };
  }
  return MonadSpec(kind, std::move(F), std::move(unit), std::move(bind));
}

inline std::vector<std::string> monad_names() { return {"P", "Filt", "Ultra", "Mono", "Nb", "1", "P-cap"}; }

inline MonadSpec monad_by_name(const std::string& name) {
  if (name == "P") return powerset_monad();
  if (name == "P-cap") return powerset_intersection_monad();
  if (name == "1") return terminal_monad();
  if (name == "Filt" || name == "Ultra" || name == "Mono" || name == "Nb") return neighbourhood_monad(name);
  throw usage_error("unknown monad '" + name + "' (P | Filt | Ultra | Mono | Nb | 1 | P-cap)");
}

// ---------------------------------------------------------------------------

namespace detail {

// Calls fn(k) for every k : Y -> T X, or for `cap` pseudo-random ones when
// there are more. Returns true iff the family was sampled.
template <class Fn>
bool for_each_kleisli(std::size_t tx, std::size_t Y, std::size_t cap, std::mt19937_64& rng, Fn&& fn) {
  if (tx == 0 && Y > 0) return false;
  if (sat_pow(tx, Y) <= cap) {
    for_each_function(Y, tx, [&](const FinFun& f) {
      fn(f.images());
      return true;
    });
    return false;
  }
  std::uniform_int_distribution<index_t> d(0, static_cast<index_t>(tx - 1));
  std::vector<index_t> k(Y);
  for (std::size_t i = 0; i < cap; ++i) {
    for (auto& v : k) v = d(rng);
    fn(k);
  }
  return true;
}

template <class Fn>
bool for_each_element(std::size_t size, std::size_t cap, std::mt19937_64& rng, Fn&& fn) {
  if (size <= cap) {
    for (std::size_t i = 0; i < size; ++i) fn(static_cast<index_t>(i));
    return false;
  }
  std::uniform_int_distribution<index_t> d(0, static_cast<index_t>(size - 1));
  for (std::size_t i = 0; i < cap; ++i) fn(d(rng));
  return true;
}

inline std::vector<index_t> compose_vec(const FinFun& g, const std::vector<index_t>& k) {
  std::vector<index_t> out(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) out[i] = g(k[i]);
  return out;
}

inline nlohmann::json vec_json(const std::vector<index_t>& v) { return v; }

}  // namespace detail

struct SamplingBudget {
  std::size_t kleisli = 512;   // maps k : Y -> T X per carrier pair
  std::size_t elements = 64;   // elements t per carrier
  std::uint64_t seed = 0x5eed;
};

/// Unit and bind naturality, both unit laws and associativity on carriers <= N.
inline Report monad_axiom_check(const MonadSpec& T, std::size_t N, SamplingBudget budget = {}) {
  Stopwatch sw;
  Report rep;
  rep.command = "monad-check " + T.name();
  rep.max_size = N;
  const auto& F = T.functor();
  std::mt19937_64 rng(budget.seed);
  bool sampled = false;
  auto render = [&](std::size_t n, index_t a) { return F.render(n, a); };
  auto fail = [&](std::string kind, nlohmann::json data, std::string text) {
    data["monad"] = T.name();
    rep.fail_with({std::move(kind), std::move(data), std::move(text)});
  };
  try {
    for (std::size_t n = 0; n <= N && rep.passed(); ++n)
      for (std::size_t m = 0; m <= N && rep.passed(); ++m)
        for_each_function(n, m, [&](const FinFun& h) {
          const auto Fh = F.map(h);
          for (index_t x = 0; x < n; ++x) {
            ++rep.instances_checked;
            if (Fh(T.unit(n, x)) != T.unit(m, h(x))) {
              fail("unit-naturality", {{"h", fun_to_json(h)}, {"x", x}},
                   "T h(η(" + std::to_string(x) + ")) ≠ η(h " + std::to_string(x) + ") for h = " + describe(h));
              return false;
            }
          }
          return true;
        });

    for (std::size_t X = 0; X <= N && rep.passed(); ++X) {
      const auto tx = F.size(X);
      // left unit
      std::vector<index_t> eta(X);
      for (std::size_t x = 0; x < X; ++x) eta[x] = T.unit(X, static_cast<index_t>(x));
      sampled |= detail::for_each_element(tx, budget.elements * 4, rng, [&](index_t t) {
        ++rep.instances_checked;
        if (rep.passed() && T.bind(X, eta, X, t) != t)
          fail("left-unit", {{"X", X}, {"t", t}},
               "bind(η)(" + render(X, t) + ") = " + render(X, T.bind(X, eta, X, t)) + " at |X| = " + std::to_string(X));
      });
      for (std::size_t Y = 0; Y <= N && rep.passed(); ++Y) {
        const auto ty = F.size(Y);
        sampled |= detail::for_each_kleisli(tx, Y, budget.kleisli, rng, [&](const std::vector<index_t>& k) {
          if (!rep.passed()) return;
          // right unit
          for (std::size_t y = 0; y < Y; ++y) {
            ++rep.instances_checked;
            if (T.bind(X, k, Y, T.unit(Y, static_cast<index_t>(y))) != k[y]) {
              fail("right-unit", {{"X", X}, {"Y", Y}, {"k", k}, {"y", y}},
                   "bind(k)(η(" + std::to_string(y) + ")) ≠ k(" + std::to_string(y) + ")");
              return;
            }
          }
          sampled |= detail::for_each_element(ty, budget.elements, rng, [&](index_t t) {
            if (!rep.passed()) return;
            const auto b = T.bind(X, k, Y, t);
            // naturality in X
            for (std::size_t X2 = 0; X2 <= N && rep.passed(); ++X2) {
              if (X2 != X && X2 != (X + 1) % (N + 1)) continue;
              for_each_function(X, X2, [&](const FinFun& h) {
                const auto Fh = F.map(h);
                ++rep.instances_checked;
                if (Fh(b) != T.bind(X2, detail::compose_vec(Fh, k), Y, t)) {
                  fail("bind-naturality", {{"X", X}, {"Y", Y}, {"k", k}, {"t", t}, {"h", fun_to_json(h)}},
                       "T h · bind(k) ≠ bind(T h · k) at t = " + render(Y, t) + ", h = " + describe(h));
                  return false;
                }
                return true;
              });
            }
          });
        });
        // naturality in Y: bind(k)(T g (t)) = bind(k·g)(t)
        for (std::size_t Y2 = 0; Y2 <= N && rep.passed(); ++Y2) {
          if (Y2 != Y && Y2 != (Y + 1) % (N + 1)) continue;
          const auto ty2 = F.size(Y2);
          for_each_function(Y2, Y, [&](const FinFun& g) {
            const auto Fg = F.map(g);
            sampled |= detail::for_each_kleisli(tx, Y, budget.kleisli / 8, rng, [&](const std::vector<index_t>& k) {
              if (!rep.passed()) return;
              std::vector<index_t> kg(Y2);
              for (std::size_t y = 0; y < Y2; ++y) kg[y] = k[g(y)];
              sampled |= detail::for_each_element(ty2, budget.elements, rng, [&](index_t t) {
                ++rep.instances_checked;
                if (rep.passed() && T.bind(X, k, Y, Fg(t)) != T.bind(X, kg, Y2, t))
                  fail("bind-naturality", {{"X", X}, {"Y", Y}, {"k", k}, {"t", t}, {"g", fun_to_json(g)}},
                       "bind(k)(T g(t)) ≠ bind(k·g)(t) at t = " + render(Y2, t) + ", g = " + describe(g));
              });
            });
            return rep.passed();
          });
        }
      }
    }

    // associativity: bind(l)(bind(k)(t)) = bind(bind(l)·k)(t), k : Y -> T Z, l : Z -> T X
    for (std::size_t X = 0; X <= N && rep.passed(); ++X)
      for (std::size_t Z = 0; Z <= N && rep.passed(); ++Z)
        for (std::size_t Y = 0; Y <= N && rep.passed(); ++Y) {
          const auto tx = F.size(X), tz = F.size(Z), ty = F.size(Y);
          sampled |= detail::for_each_kleisli(tx, Z, budget.kleisli / 16, rng, [&](const std::vector<index_t>& l) {
            sampled |= detail::for_each_kleisli(tz, Y, budget.kleisli / 16, rng, [&](const std::vector<index_t>& k) {
              if (!rep.passed()) return;
              std::vector<index_t> lk(Y);
              for (std::size_t y = 0; y < Y; ++y) lk[y] = T.bind(X, l, Z, k[y]);
              sampled |= detail::for_each_element(ty, budget.elements, rng, [&](index_t t) {
                ++rep.instances_checked;
                if (rep.passed() && T.bind(X, l, Z, T.bind(Z, k, Y, t)) != T.bind(X, lk, Y, t))
                  fail("associativity", {{"X", X}, {"Y", Y}, {"Z", Z}, {"k", k}, {"l", l}, {"t", t}},
                       "bind(l)(bind(k)(t)) ≠ bind(bind(l)·k)(t) at t = " + render(Y, t));
              });
            });
          });
        }
  } catch (const bound_error& e) {
    if (rep.passed()) {
      rep.verdict = Verdict::inconclusive;
      rep.note = e.what();
    }
  }
  rep.details["sampled"] = sampled;
  if (sampled && rep.note.empty()) rep.note = "some Kleisli maps or elements were sampled (seed " + std::to_string(budget.seed) + ")";
  rep.elapsed_ms = sw.ms();
  return rep;
}

// ---------------------------------------------------------------------------

/// A natural transformation from the powerset monad to T. A component that
/// lands outside T X yields nullopt.
struct MonadMorphism {
  std::string name;
  MonadSpec target;
  std::function<std::optional<index_t>(std::size_t n, index_t U)> component;
};

inline MonadMorphism identity_morphism() {
  return {"id", powerset_monad(), [](std::size_t, index_t U) { return std::optional<index_t>(U); }};
}

inline MonadMorphism terminal_morphism() {
  return {"terminal", terminal_monad(), [](std::size_t, index_t) { return std::optional<index_t>(0); }};
}

/// Box(U) = {A | U ⊆ A}, Diamond(U) = {A | U ∩ A ≠ ∅}, into the given neighbourhood monad.
inline MonadMorphism modal_morphism(bool box, const std::string& target) {
  auto T = neighbourhood_monad(target);
  const auto F = T.functor();
  return {std::string(box ? "box-" : "diamond-") + (target == "Filt" ? "filt" : target == "Mono" ? "mono" : target),
          std::move(T), [F, box](std::size_t n, index_t U) -> std::optional<index_t> {
            detail::require_small(n, "modal component");
            std::uint64_t sys = 0;
            for (std::size_t A = 0; A < (std::size_t{1} << n); ++A)
              if (box ? (U & ~A) == 0 : (U & A) != 0) sys |= std::uint64_t{1} << A;
            return detail::system_index(F, n, sys);
          }};
}

inline std::vector<std::string> morphism_names() { return {"id", "terminal", "box-filt", "box-mono", "diamond-mono", "diamond-filt"}; }

inline MonadMorphism morphism_by_name(const std::string& name) {
  if (name == "id") return identity_morphism();
  if (name == "terminal") return terminal_morphism();
  if (name == "box-filt") return modal_morphism(true, "Filt");
  if (name == "box-mono") return modal_morphism(true, "Mono");
  if (name == "diamond-mono") return modal_morphism(false, "Mono");
  if (name == "diamond-filt") return modal_morphism(false, "Filt");
  throw usage_error("unknown monad morphism '" + name + "' (id | terminal | box-filt | box-mono | diamond-mono | diamond-filt)");
}

/// The component at n as a map P n -> T n; throws usage_error naming the
/// first subset that has no image in T n.
inline FinFun morphism_component(const MonadMorphism& l, std::size_t n) {
  const auto pn = powerset_size(n);
  std::vector<index_t> v(pn);
  for (std::size_t U = 0; U < pn; ++U) {
    auto c = l.component(n, static_cast<index_t>(U));
    if (!c) throw usage_error(l.name + ": component at " + render_mask(U) + " is not in " + l.target.functor().name());
    v[U] = *c;
  }
  return FinFun(pn, l.target.functor().size(n), std::move(v));
}

/// Components land in T, naturality, the unit triangle and the multiplication
/// square (in Kleisli form) on carriers <= N.
inline Report monad_morphism_check(const MonadMorphism& l, std::size_t N, SamplingBudget budget = {}) {
  Stopwatch sw;
  Report rep;
  rep.command = "morphism-check " + l.name;
  rep.max_size = N;
  const auto& T = l.target;
  const auto& F = T.functor();
  const auto P = powerset_monad();
  std::mt19937_64 rng(budget.seed);
  bool sampled = false;
  try {
    std::vector<FinFun> comp;
    for (std::size_t n = 0; n <= N; ++n) {
      for (std::size_t U = 0; U < powerset_size(n); ++U) {
        ++rep.instances_checked;
        if (!l.component(n, static_cast<index_t>(U))) {
          rep.fail_with({"not-in-target", {{"n", n}, {"U", U}},
                         "λ(" + render_mask(U) + ") at |X| = " + std::to_string(n) + " is not an element of " + F.name()});
          rep.elapsed_ms = sw.ms();
          return rep;
        }
      }
      comp.push_back(morphism_component(l, n));
    }
    for (std::size_t n = 0; n <= N && rep.passed(); ++n) {
      for (index_t x = 0; x < n; ++x) {
        ++rep.instances_checked;
        if (comp[n](P.unit(n, x)) != T.unit(n, x)) {
          rep.fail_with({"unit-triangle", {{"n", n}, {"x", x}},
                         "λ({" + std::to_string(x) + "}) = " + F.render(n, comp[n](P.unit(n, x))) + " ≠ " +
                             F.render(n, T.unit(n, x))});
          break;
        }
      }
      for (std::size_t m = 0; m <= N && rep.passed(); ++m)
        for_each_function(n, m, [&](const FinFun& h) {
          const auto Ph = powerset_map(h), Th = F.map(h);
          for (index_t U = 0; U < powerset_size(n); ++U) {
            ++rep.instances_checked;
            if (comp[m](Ph(U)) != Th(comp[n](U))) {
              rep.fail_with({"morphism-naturality", {{"h", fun_to_json(h)}, {"U", U}},
                             "λ · P h ≠ T h · λ at U = " + render_mask(U) + ", h = " + describe(h)});
              return false;
            }
          }
          return true;
        });
    }
    // λ_X(⋃ k[U]) = bind^T(λ_X · k)(λ_Y(U))
    for (std::size_t X = 0; X <= N && rep.passed(); ++X)
      for (std::size_t Y = 0; Y <= N && rep.passed(); ++Y)
        sampled |= detail::for_each_kleisli(powerset_size(X), Y, budget.kleisli, rng, [&](const std::vector<index_t>& k) {
          if (!rep.passed()) return;
          const auto lk = detail::compose_vec(comp[X], k);
          for (index_t U = 0; U < powerset_size(Y); ++U) {
            ++rep.instances_checked;
            if (comp[X](P.bind(X, k, Y, U)) != T.bind(X, lk, Y, comp[Y](U))) {
              rep.fail_with({"multiplication-square", {{"X", X}, {"Y", Y}, {"k", k}, {"U", U}},
                             "λ(⋃ k[U]) ≠ bind(λ·k)(λ U) at U = " + render_mask(U)});
              return;
            }
          }
        });
  } catch (const bound_error& e) {
    if (rep.passed()) {
      rep.verdict = Verdict::inconclusive;
      rep.note = e.what();
    }
  }
  rep.details["sampled"] = sampled;
  rep.elapsed_ms = sw.ms();
  return rep;
}

}  // namespace rellift
