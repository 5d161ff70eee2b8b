#pragma once

// Extensions of set functors to relations: the Barr construction, the named
// rule-based extensions, and tabulated extensions over bounded carriers.

#include <memory>
#include <mutex>
#include <unordered_map>

#include "core.hpp"
#include "functor.hpp"
#include "functor_laws.hpp"

namespace rellift {

/// P h : P n -> P m, direct image on bitmask-indexed subsets.
inline FinFun powerset_map(const FinFun& h) {
  const auto n = powerset_size(h.dom()), m = powerset_size(h.cod());
  std::vector<index_t> img(n);
  for (std::size_t a = 0; a < n; ++a) img[a] = static_cast<index_t>(detail::image_mask(h, a));
  return FinFun(n, m, std::move(img));
}

/// F r = F pi2 . (F pi1)° over the canonical span of r.
inline Rel barr_lift(const FunctorSpec& F, const Rel& r) {
  const auto sp = span_factorize(r);
  const auto Fl = F.map(sp.left), Fr = F.map(sp.right);
  Rel out(Fl.cod(), Fr.cod());
  for (std::size_t p = 0; p < Fl.dom(); ++p) out.set(Fl(p), Fr(p));
  return out;
}

enum class ExtensionKind { Barr, Image, RestrictedImage, BoxFilt, BoxMono, DiamondMono, Tabulated };

inline const char* to_string(ExtensionKind k) {
  switch (k) {
    case ExtensionKind::Barr: return "barr";
    case ExtensionKind::Image: return "image";
    case ExtensionKind::RestrictedImage: return "restricted-image";
    case ExtensionKind::BoxFilt: return "box-filt";
    case ExtensionKind::BoxMono: return "box-mono";
    case ExtensionKind::DiamondMono: return "diamond-mono";
    case ExtensionKind::Tabulated: return "tabulated";
  }
  return "?";
}

inline ExtensionKind extension_kind_from_string(const std::string& s) {
  for (auto k : {ExtensionKind::Barr, ExtensionKind::Image, ExtensionKind::RestrictedImage, ExtensionKind::BoxFilt,
                 ExtensionKind::BoxMono, ExtensionKind::DiamondMono})
    if (s == to_string(k)) return k;
  throw usage_error("unknown extension kind '" + s + "' (barr | image | restricted-image | box-filt | box-mono | diamond-mono)");
}

namespace detail {

inline bool is_unary_of_var(const FunctorSpec& F, FunctorKind k) {
  const auto& e = F.expr();
  return e.kind == k && e.args.size() == 1 && e.args[0].kind == FunctorKind::Var;
}

inline std::uint64_t up_closure(std::uint64_t sys, std::size_t n) {
  const std::size_t subsets = std::size_t{1} << n;
  std::uint64_t out = 0;
  for (std::size_t a = 0; a < subsets; ++a)
    if ((sys >> a) & 1u)
      for (std::size_t b = 0; b < subsets; ++b)
        if ((a & ~b) == 0) out |= std::uint64_t{1} << b;
  return out;
}

inline std::uint64_t up_of(std::uint64_t u, std::size_t n) { return up_closure(std::uint64_t{1} << u, n); }

// r[A] for a subset mask A.
inline std::uint64_t image_of_mask(const Rel& r, std::uint64_t a) {
  std::uint64_t out = 0;
  for (std::size_t x = 0; x < r.dom(); ++x)
    if ((a >> x) & 1u) out |= r.row_bits(x).mask();
  return out;
}

inline void require_system_carrier(std::size_t n) {
  if (n > 6) throw bound_error("neighbourhood systems on a " + std::to_string(n) + "-element carrier", SIZE_MAX);
}

}  // namespace detail

/// The lifted relation for the rule-based extensions other than Barr.
inline Rel named_extension(ExtensionKind kind, const FunctorSpec& F, const Rel& r) {
  using namespace detail;
  const auto X = r.dom(), Y = r.cod();
  switch (kind) {
    case ExtensionKind::Barr: return barr_lift(F, r);
    case ExtensionKind::Image:
    case ExtensionKind::RestrictedImage: {
      if (!is_unary_of_var(F, FunctorKind::Pow)) throw usage_error(std::string(to_string(kind)) + " requires P(X)");
      const auto px = powerset_size(X), py = powerset_size(Y);
      Rel out(px, py);
      for (std::size_t a = 0; a < px; ++a) {
        const auto b = image_of_mask(r, a);
        if (kind == ExtensionKind::RestrictedImage && a != 0 && b == 0) continue;
        out.set(a, b);
      }
      return out;
    }
    case ExtensionKind::BoxFilt: {
      if (!is_unary_of_var(F, FunctorKind::Filt)) throw usage_error("box-filt requires Filt(X)");
      require_system_carrier(std::max(X, Y));
      const auto px = powerset_size(X), py = powerset_size(Y);
      Rel out(px, py);
      for (std::size_t u = 0; u < px; ++u) {
        // up{ r[A] | A in up(u) }, then read off its generator
        std::uint64_t sys = 0;
        const auto filt = up_of(u, X);
        for (std::size_t a = 0; a < px; ++a)
          if ((filt >> a) & 1u) sys |= std::uint64_t{1} << image_of_mask(r, a);
        sys = up_closure(sys, Y);
        std::uint64_t gen = py - 1;
        for (std::size_t b = 0; b < py; ++b)
          if ((sys >> b) & 1u) gen &= b;
        if (up_of(gen, Y) != sys) throw std::logic_error("box-filt: image is not a principal filter");
        out.set(u, gen);
      }
      return out;
    }
    case ExtensionKind::BoxMono:
    case ExtensionKind::DiamondMono: {
      if (!is_unary_of_var(F, FunctorKind::Mono))
        throw usage_error(std::string(to_string(kind)) + " requires Mono(X)");
      require_system_carrier(std::max(X, Y));
      const auto src = F.object(X), dst = F.object(Y);
      const auto px = powerset_size(X), py = powerset_size(Y);
      const auto rc = converse(r);
      Rel out(src->size, dst->size);
      for (index_t i = 0; i < src->size; ++i) {
        const auto sys = src->code(i);
        std::uint64_t res = 0;
        if (kind == ExtensionKind::BoxMono) {
          for (std::size_t a = 0; a < px; ++a)
            if ((sys >> a) & 1u) res |= std::uint64_t{1} << image_of_mask(r, a);
          res = up_closure(res, Y);
        } else {
          for (std::size_t b = 0; b < py; ++b)
            if ((sys >> image_of_mask(rc, b)) & 1u) res |= std::uint64_t{1} << b;
        }
        out.set(i, dst->lookup(res));
      }
      return out;
    }
    case ExtensionKind::Tabulated: break;
  }
  throw usage_error("named_extension: tabulated extensions have no rule");
}

/// An assignment r |-> E r. Rule-based or tabulated on carriers <= bound.
/// Lifted relations are memoized; copies share the cache.
class Extension {
 public:
  using Source = std::function<Rel(const Rel&)>;

  Extension(ExtensionKind kind, FunctorSpec F) : st_(std::make_shared<State>(kind, std::move(F))) {
    if (kind == ExtensionKind::Tabulated) throw usage_error("use Extension::tabulated for tabulated extensions");
    // reject incompatible functors up front
    if (kind != ExtensionKind::Barr) named_extension(kind, st_->functor, Rel(0, 0));
  }

  /// Tabulated on r : X -/-> Y with |Y| <= bound and |X| <= dom_bound
  /// (default: bound). The table is filled from `source` on demand;
  /// E(graph f) = graph(F f) is verified for every f between carriers <= bound.
  static Extension tabulated(FunctorSpec F, std::size_t bound, Source source, std::string name = "tabulated",
                             std::optional<std::size_t> dom_bound = std::nullopt) {
    Extension e(std::make_shared<State>(ExtensionKind::Tabulated, std::move(F)));
    e.st_->bound = bound;
    e.st_->dom_bound = dom_bound.value_or(bound);
    e.st_->source = std::move(source);
    e.st_->name = std::move(name);
    for (std::size_t a = 0; a <= bound; ++a)
      for (std::size_t b = 0; b <= bound; ++b)
        for_each_function(a, b, [&](const FinFun& f) {
          if (e.lift(graph(f)) != graph(e.functor().map(f)))
            throw usage_error("tabulated extension violates E(graph f) = graph(F f) at f = " + describe(f));
          return true;
        });
    return e;
  }

  ExtensionKind kind() const { return st_->kind; }
  const FunctorSpec& functor() const { return st_->functor; }
  std::optional<std::size_t> stored_bound() const { return st_->bound; }
  std::string name() const {
    if (!st_->name.empty()) return st_->name;
    return std::string(to_string(st_->kind)) + " over " + st_->functor.name();
  }

  Rel lift(const Rel& r) const {
    {
      std::lock_guard lock(st_->mu);
      auto it = st_->cache.find(r);
      if (it != st_->cache.end()) return it->second;
    }
    Rel out;
    if (st_->kind == ExtensionKind::Tabulated) {
      if (r.dom() > st_->dom_bound || r.cod() > *st_->bound)
        throw bound_error("tabulated extension stores carriers <= " + std::to_string(*st_->bound), SIZE_MAX);
      out = st_->source(r);
      const auto fx = st_->functor.size(r.dom()), fy = st_->functor.size(r.cod());
      if (out.dom() != fx || out.cod() != fy) throw usage_error("tabulated extension: entry has the wrong shape");
    } else {
      out = named_extension(st_->kind, st_->functor, r);
    }
    std::lock_guard lock(st_->mu);
    return st_->cache.emplace(r, std::move(out)).first->second;
  }

 private:
  struct State {
    State(ExtensionKind k, FunctorSpec F) : kind(k), functor(std::move(F)) {}
    ExtensionKind kind;
    FunctorSpec functor;
    std::optional<std::size_t> bound;
    std::size_t dom_bound = 0;
    Source source;
    std::string name;
    std::mutex mu;
    std::unordered_map<Rel, Rel, RelHash> cache;
  };

  explicit Extension(std::shared_ptr<State> st) : st_(std::move(st)) {}

  std::shared_ptr<State> st_;
};

}  // namespace rellift
