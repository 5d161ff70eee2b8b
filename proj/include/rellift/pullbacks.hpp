#pragma once

// Weak-pullback and inverse-image preservation on bounded carriers, and the
// positivity/refinability conditions for monoid-valued functors.

#include <set>
#include <unordered_set>

#include "core.hpp"
#include "functor.hpp"
#include "functor_laws.hpp"
#include "monoid.hpp"
#include "report.hpp"

namespace rellift {

struct Cospan {
  FinFun f;  // B -> D
  FinFun g;  // C -> D

  Cospan(FinFun f_, FinFun g_) : f(std::move(f_)), g(std::move(g_)) {
    if (f.cod() != g.cod()) throw usage_error("Cospan: legs must share their codomain");
  }
};

/// Canonical pullback: the apex lists {(b,c) | f(b) = g(c)} row-major.
inline Span pullback(const Cospan& c) {
  std::vector<index_t> l, r;
  for (std::size_t b = 0; b < c.f.dom(); ++b)
    for (std::size_t x = 0; x < c.g.dom(); ++x)
      if (c.f(b) == c.g(x)) {
        l.push_back(static_cast<index_t>(b));
        r.push_back(static_cast<index_t>(x));
      }
  const auto n = l.size();
  return Span{n, FinFun(n, c.f.dom(), std::move(l)), FinFun(n, c.g.dom(), std::move(r))};
}

namespace detail {

// One cospan per isomorphism class: the class of (B,C,D,f,g) is the multiset
// of fibre-size pairs (|f^-1 d|, |g^-1 d|) over d in D.
struct CospanShape {
  std::vector<std::pair<std::size_t, std::size_t>> fibres;  // sorted

  std::size_t b() const {
    std::size_t s = 0;
    for (auto [p, q] : fibres) s += p;
    return s;
  }
  std::size_t c() const {
    std::size_t s = 0;
    for (auto [p, q] : fibres) s += q;
    return s;
  }
  std::size_t apex() const {
    std::size_t s = 0;
    for (auto [p, q] : fibres) s += p * q;
    return s;
  }

  Cospan realize() const {
    std::vector<index_t> f, g;
    for (std::size_t d = 0; d < fibres.size(); ++d) {
      f.insert(f.end(), fibres[d].first, static_cast<index_t>(d));
      g.insert(g.end(), fibres[d].second, static_cast<index_t>(d));
    }
    const auto nb = f.size(), nc = g.size();
    return Cospan(FinFun(nb, fibres.size(), std::move(f)), FinFun(nc, fibres.size(), std::move(g)));
  }
};

/// Shapes with |B|,|C|,|D| <= N, ordered by apex size, then total size, then lexicographically.
inline std::vector<CospanShape> cospan_shapes(std::size_t N, bool g_injective) {
  std::vector<CospanShape> out;
  std::vector<std::pair<std::size_t, std::size_t>> cur;
  const std::size_t qmax = g_injective ? 1 : N;
  std::function<void(std::size_t, std::size_t, std::size_t, std::pair<std::size_t, std::size_t>)> rec =
      [&](std::size_t left, std::size_t sb, std::size_t sc, std::pair<std::size_t, std::size_t> lo) {
        if (left == 0) {
          out.push_back({cur});
          return;
        }
        for (std::size_t p = lo.first; p + sb <= N; ++p)
          for (std::size_t q = (p == lo.first ? lo.second : 0); q <= qmax && q + sc <= N; ++q) {
            cur.emplace_back(p, q);
            rec(left - 1, sb + p, sc + q, {p, q});
            cur.pop_back();
          }
      };
  for (std::size_t d = 0; d <= N; ++d) rec(d, 0, 0, {0, 0});
  std::stable_sort(out.begin(), out.end(), [](const CospanShape& x, const CospanShape& y) {
    auto kx = std::make_tuple(x.apex(), x.b() + x.c() + x.fibres.size(), x.fibres);
    auto ky = std::make_tuple(y.apex(), y.b() + y.c() + y.fibres.size(), y.fibres);
    return kx < ky;
  });
  return out;
}

inline nlohmann::json cospan_json(const Cospan& c) { return {{"f", fun_to_json(c.f)}, {"g", fun_to_json(c.g)}}; }

struct SquareImage {
  FinFun Ff, Fg, Fp1, Fp2;
};

inline SquareImage apply_square(const FunctorSpec& F, const Cospan& c, const Span& p) {
  return {F.map(c.f), F.map(c.g), F.map(p.left), F.map(p.right)};
}

inline std::uint64_t pair_key(index_t a, index_t b) { return (std::uint64_t{a} << 32) | b; }

// Pairs (b,c) with Ff(b) = Fg(c), in ascending (b,c) order.
template <class Fn>
bool for_each_matching_pair(const SquareImage& s, Fn&& fn) {
  std::vector<std::vector<index_t>> by_d(s.Ff.cod());
  for (std::size_t c = 0; c < s.Fg.dom(); ++c) by_d[s.Fg(c)].push_back(static_cast<index_t>(c));
  for (std::size_t b = 0; b < s.Ff.dom(); ++b)
    for (auto c : by_d[s.Ff(b)])
      if (!fn(static_cast<index_t>(b), c)) return false;
  return true;
}

}  // namespace detail

/// True iff (b, c) in FB x FC agrees over FD but has no fill-in from F(apex).
inline bool wpb_pair_lacks_fill_in(const FunctorSpec& F, const Cospan& c, index_t b, index_t x) {
  const auto p = pullback(c);
  const auto s = detail::apply_square(F, c, p);
  if (b >= s.Ff.dom() || x >= s.Fg.dom() || s.Ff(b) != s.Fg(x)) return false;
  for (std::size_t q = 0; q < s.Fp1.dom(); ++q)
    if (s.Fp1(q) == b && s.Fp2(q) == x) return false;
  return true;
}

/// Every pullback square with |B|,|C|,|D| <= N is mapped by F to a weak pullback.
inline Report check_wpb(const FunctorSpec& F, std::size_t N, bool inverse_images_only = false) {
  Stopwatch sw;
  Report rep;
  rep.command = std::string(inverse_images_only ? "inverse-images " : "wpb ") + F.name();
  rep.max_size = N;
  std::size_t skipped = 0;
  std::string skip_note;
  for (const auto& shape : detail::cospan_shapes(N, inverse_images_only)) {
    const auto c = shape.realize();
    const auto p = pullback(c);
    detail::SquareImage s;
    try {
      s = detail::apply_square(F, c, p);
    } catch (const bound_error& e) {
      ++skipped;
      if (skip_note.empty()) skip_note = e.what();
      continue;
    }
    ++rep.instances_checked;
    std::unordered_map<std::uint64_t, index_t> fill;
    std::optional<std::pair<index_t, index_t>> duplicate;
    for (std::size_t q = 0; q < s.Fp1.dom(); ++q) {
      auto [it, fresh] = fill.emplace(detail::pair_key(s.Fp1(q), s.Fp2(q)), static_cast<index_t>(q));
      if (!fresh && !duplicate) duplicate = std::make_pair(it->second, static_cast<index_t>(q));
    }
    std::optional<std::pair<index_t, index_t>> missing;
    detail::for_each_matching_pair(s, [&](index_t b, index_t x) {
      if (fill.count(detail::pair_key(b, x))) return true;
      missing = std::make_pair(b, x);
      return false;
    });
    auto data = detail::cospan_json(c);
    const auto sizes = "|B|=" + std::to_string(c.f.dom()) + ", |C|=" + std::to_string(c.g.dom()) +
                       ", |D|=" + std::to_string(c.f.cod());
    if (missing) {
      data["b"] = missing->first;
      data["c"] = missing->second;
      rep.fail_with({"wpb-no-fill-in", data,
                     "cospan f = " + describe(c.f) + ", g = " + describe(c.g) + " (" + sizes + "): " +
                         F.render(c.f.dom(), missing->first) + " and " + F.render(c.g.dom(), missing->second) +
                         " agree in F D but no element of F P projects onto both"});
      break;
    }
    if (inverse_images_only && duplicate) {
      data["p"] = {duplicate->first, duplicate->second};
      rep.fail_with({"inverse-image-not-unique", data,
                     "cospan f = " + describe(c.f) + ", g = " + describe(c.g) + " (" + sizes + "): " +
                         F.render(p.apex, duplicate->first) + " and " + F.render(p.apex, duplicate->second) +
                         " in F P have the same projections"});
      break;
    }
  }
  if (rep.verdict == Verdict::pass && skipped > 0) {
    rep.verdict = Verdict::inconclusive;
    rep.note = std::to_string(skipped) + " cospans exceeded the element bound; first: " + skip_note;
  }
  rep.details["holds"] = rep.verdict == Verdict::pass;
  rep.details["cospans_checked"] = rep.instances_checked;
  rep.details["cospans_skipped"] = skipped;
  rep.elapsed_ms = sw.ms();
  return rep;
}

inline Report check_inverse_images(const FunctorSpec& F, std::size_t N) { return check_wpb(F, N, true); }

/// Re-checks a witness produced by check_wpb / check_inverse_images from scratch.
inline bool replay_pullback_witness(const FunctorSpec& F, const Witness& w) {
  const Cospan c(fun_from_json(w.data.at("f")), fun_from_json(w.data.at("g")));
  if (w.kind == "wpb-no-fill-in")
    return wpb_pair_lacks_fill_in(F, c, w.data.at("b").get<index_t>(), w.data.at("c").get<index_t>());
  if (w.kind == "inverse-image-not-unique") {
    if (!c.g.injective()) return false;
    const auto p = pullback(c);
    const auto s = detail::apply_square(F, c, p);
    const auto q0 = w.data.at("p")[0].get<index_t>(), q1 = w.data.at("p")[1].get<index_t>();
    return q0 != q1 && q0 < s.Fp1.dom() && q1 < s.Fp1.dom() && s.Fp1(q0) == s.Fp1(q1) && s.Fp2(q0) == s.Fp2(q1);
  }
  throw usage_error("not a pullback witness: " + w.kind);
}

// ---------------------------------------------------------------------------

/// positive: a+b = 0 implies a = b = 0. refinable: a1+a2 = b1+b2 admits a
/// 2x2 matrix with row sums a_i and column sums b_j.
inline Report check_monoid_conditions(const Monoid& M) {
  Stopwatch sw;
  Report rep;
  rep.command = "monoid " + M.name();
  const auto n = static_cast<index_t>(M.size());
  bool positive = true, refinable = true;
  for (index_t a = 0; a < n && positive; ++a)
    for (index_t b = 0; b < n && positive; ++b) {
      ++rep.instances_checked;
      if (M.add(a, b) == M.zero() && (a != M.zero() || b != M.zero())) {
        positive = false;
        rep.fail_with({"not-positive", {{"a", a}, {"b", b}},
                       std::to_string(a) + " + " + std::to_string(b) + " = " + std::to_string(M.zero())});
      }
    }
  for (index_t a1 = 0; a1 < n && refinable; ++a1)
    for (index_t a2 = 0; a2 < n && refinable; ++a2)
      for (index_t b1 = 0; b1 < n && refinable; ++b1)
        for (index_t b2 = 0; b2 < n && refinable; ++b2) {
          if (M.add(a1, a2) != M.add(b1, b2)) continue;
          ++rep.instances_checked;
          bool found = false;
          for (index_t c11 = 0; c11 < n && !found; ++c11)
            for (index_t c12 = 0; c12 < n && !found; ++c12) {
              if (M.add(c11, c12) != a1) continue;
              for (index_t c21 = 0; c21 < n && !found; ++c21)
                for (index_t c22 = 0; c22 < n && !found; ++c22)
                  found = M.add(c21, c22) == a2 && M.add(c11, c21) == b1 && M.add(c12, c22) == b2;
            }
          if (!found) {
            refinable = false;
            rep.fail_with({"not-refinable", {{"a", {a1, a2}}, {"b", {b1, b2}}},
                           std::to_string(a1) + "+" + std::to_string(a2) + " = " + std::to_string(b1) + "+" +
                               std::to_string(b2) + " has no 2x2 refinement"});
          }
        }
  rep.details["positive"] = positive;
  rep.details["refinable"] = refinable;
  rep.elapsed_ms = sw.ms();
  return rep;
}

}  // namespace rellift
