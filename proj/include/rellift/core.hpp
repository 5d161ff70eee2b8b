#pragma once

// Finite sets, total functions and dense bit-matrix relations.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace rellift {

/// Malformed input or a call whose arguments do not fit together.
struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A finite object exceeded the configured size bound.
struct bound_error : std::runtime_error {
  std::size_t requested;
  bound_error(const std::string& what, std::size_t req)
      : std::runtime_error(what), requested(req) {}
};

using index_t = std::uint32_t;

// ---------------------------------------------------------------------------
// Bits: a fixed-length dynamic bitset, used for subsets and relation rows.

class Bits {
 public:
  Bits() = default;
  explicit Bits(std::size_t n) : n_(n), w_((n + 63) / 64, 0) {}

  static Bits from_mask(std::size_t n, std::uint64_t mask) {
    Bits b(n);
    if (n > 0) b.w_[0] = mask & low_mask(std::min<std::size_t>(n, 64));
    return b;
  }

  std::size_t size() const { return n_; }
  std::size_t words() const { return w_.size(); }
  const std::uint64_t* data() const { return w_.data(); }
  std::uint64_t* data() { return w_.data(); }

  bool test(std::size_t i) const { return (w_[i >> 6] >> (i & 63)) & 1u; }
  void set(std::size_t i) { w_[i >> 6] |= std::uint64_t{1} << (i & 63); }
  void reset(std::size_t i) { w_[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }
  void assign(std::size_t i, bool v) { v ? set(i) : reset(i); }

  std::size_t count() const {
    std::size_t c = 0;
    for (auto w : w_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }
  bool any() const {
    return std::any_of(w_.begin(), w_.end(), [](auto w) { return w != 0; });
  }
  bool none() const { return !any(); }

  /// Low 64 bits; only meaningful when size() <= 64.
  std::uint64_t mask() const { return w_.empty() ? 0 : w_[0]; }

  bool subset_of(const Bits& o) const {
    for (std::size_t k = 0; k < w_.size(); ++k)
      if (w_[k] & ~o.w_[k]) return false;
    return true;
  }
  bool intersects(const Bits& o) const {
    for (std::size_t k = 0; k < w_.size(); ++k)
      if (w_[k] & o.w_[k]) return true;
    return false;
  }

  Bits& operator|=(const Bits& o) {
    for (std::size_t k = 0; k < w_.size(); ++k) w_[k] |= o.w_[k];
    return *this;
  }
  Bits& operator&=(const Bits& o) {
    for (std::size_t k = 0; k < w_.size(); ++k) w_[k] &= o.w_[k];
    return *this;
  }

  template <class Fn>
  void for_each(Fn&& fn) const {
    for (std::size_t k = 0; k < w_.size(); ++k) {
      auto w = w_[k];
      while (w) {
        auto b = static_cast<std::size_t>(std::countr_zero(w));
        fn(k * 64 + b);
        w &= w - 1;
      }
    }
  }

  std::vector<index_t> elements() const {
    std::vector<index_t> out;
    for_each([&](std::size_t i) { out.push_back(static_cast<index_t>(i)); });
    return out;
  }

  friend bool operator==(const Bits&, const Bits&) = default;
  /// Lexicographic order on the word vector, most significant word first.
  friend bool operator<(const Bits& a, const Bits& b) {
    if (a.n_ != b.n_) return a.n_ < b.n_;
    for (std::size_t k = a.w_.size(); k-- > 0;)
      if (a.w_[k] != b.w_[k]) return a.w_[k] < b.w_[k];
    return false;
  }

  std::size_t hash() const {
    std::size_t h = n_ * 0x9e3779b97f4a7c15ull;
    for (auto w : w_) h = (h ^ w) * 0x100000001b3ull + (h >> 29);
    return h;
  }

 private:
  static std::uint64_t low_mask(std::size_t n) {
    return n >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n) - 1);
  }

  std::size_t n_ = 0;
  std::vector<std::uint64_t> w_;
};

struct BitsHash {
  std::size_t operator()(const Bits& b) const { return b.hash(); }
};

// ---------------------------------------------------------------------------

struct FinSet {
  std::size_t size = 0;
  std::vector<std::string> labels;  // empty, or exactly `size` distinct names

  FinSet() = default;
  explicit FinSet(std::size_t n) : size(n) {}
  FinSet(std::size_t n, std::vector<std::string> names) : size(n), labels(std::move(names)) {
    if (labels.size() != size) throw usage_error("FinSet: label count does not match size");
    auto sorted = labels;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw usage_error("FinSet: labels must be distinct");
  }

  std::string label(std::size_t i) const {
    return labels.empty() ? std::to_string(i) : labels[i];
  }
};

class FinFun {
 public:
  FinFun() = default;
  FinFun(std::size_t dom, std::size_t cod, std::vector<index_t> images)
      : dom_(dom), cod_(cod), img_(std::move(images)) {
    if (img_.size() != dom_) throw usage_error("FinFun: image list length must equal domain size");
    for (auto y : img_)
      if (y >= cod_) throw usage_error("FinFun: image out of range");
  }

  static FinFun identity(std::size_t n) {
    std::vector<index_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<index_t>(i);
    return FinFun(n, n, std::move(v));
  }

  static FinFun constant(std::size_t dom, std::size_t cod, index_t value) {
    return FinFun(dom, cod, std::vector<index_t>(dom, value));
  }

  std::size_t dom() const { return dom_; }
  std::size_t cod() const { return cod_; }
  index_t operator()(std::size_t x) const { return img_[x]; }
  const std::vector<index_t>& images() const { return img_; }

  bool injective() const {
    std::vector<char> seen(cod_, 0);
    for (auto y : img_) {
      if (seen[y]) return false;
      seen[y] = 1;
    }
    return true;
  }
  bool surjective() const {
    std::vector<char> seen(cod_, 0);
    std::size_t hit = 0;
    for (auto y : img_)
      if (!seen[y]) seen[y] = 1, ++hit;
    return hit == cod_;
  }

  friend bool operator==(const FinFun&, const FinFun&) = default;

 private:
  std::size_t dom_ = 0;
  std::size_t cod_ = 0;
  std::vector<index_t> img_;
};

/// g after f.
inline FinFun compose(const FinFun& g, const FinFun& f) {
  if (f.cod() != g.dom()) throw usage_error("compose: codomain/domain mismatch");
  std::vector<index_t> v(f.dom());
  for (std::size_t x = 0; x < f.dom(); ++x) v[x] = g(f(x));
  return FinFun(f.dom(), g.cod(), std::move(v));
}

/// Calls fn on every function dom -> cod, in ascending mixed-radix order with
/// the image of element 0 varying fastest. Stops early when fn returns false.
template <class Fn>
bool for_each_function(std::size_t dom, std::size_t cod, Fn&& fn) {
  if (dom > 0 && cod == 0) return true;
  std::vector<index_t> img(dom, 0);
  while (true) {
    if (!fn(FinFun(dom, cod, img))) return false;
    std::size_t k = 0;
    while (k < dom && ++img[k] == cod) img[k++] = 0;
    if (k == dom) return true;
  }
}

// ---------------------------------------------------------------------------
// Rel: r : X -/-> Y stored as dom() rows of cod() bits.

class Rel {
 public:
  Rel() = default;
  Rel(std::size_t dom, std::size_t cod) : dom_(dom), cod_(cod), wpr_((cod + 63) / 64), w_(dom * wpr_, 0) {}

  static Rel identity(std::size_t n) {
    Rel r(n, n);
    for (std::size_t i = 0; i < n; ++i) r.set(i, i);
    return r;
  }
  static Rel full(std::size_t dom, std::size_t cod) {
    Rel r(dom, cod);
    for (std::size_t x = 0; x < dom; ++x)
      for (std::size_t y = 0; y < cod; ++y) r.set(x, y);
    return r;
  }
  static Rel from_pairs(std::size_t dom, std::size_t cod,
                        const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
    Rel r(dom, cod);
    for (auto [x, y] : pairs) {
      if (x >= dom || y >= cod) throw usage_error("Rel: pair index out of range");
      r.set(x, y);
    }
    return r;
  }
  /// Pairs numbered row-major: bit x*cod+y of the mask is (x,y). Requires dom*cod <= 64.
  static Rel from_mask(std::size_t dom, std::size_t cod, std::uint64_t mask) {
    Rel r(dom, cod);
    for (std::size_t x = 0; x < dom; ++x)
      for (std::size_t y = 0; y < cod; ++y)
        if ((mask >> (x * cod + y)) & 1u) r.set(x, y);
    return r;
  }
  std::uint64_t to_mask() const {
    std::uint64_t m = 0;
    for (std::size_t x = 0; x < dom_; ++x)
      for (std::size_t y = 0; y < cod_; ++y)
        if (test(x, y)) m |= std::uint64_t{1} << (x * cod_ + y);
    return m;
  }

  std::size_t dom() const { return dom_; }
  std::size_t cod() const { return cod_; }

  bool test(std::size_t x, std::size_t y) const { return (row(x)[y >> 6] >> (y & 63)) & 1u; }
  void set(std::size_t x, std::size_t y) { row(x)[y >> 6] |= std::uint64_t{1} << (y & 63); }
  void reset(std::size_t x, std::size_t y) { row(x)[y >> 6] &= ~(std::uint64_t{1} << (y & 63)); }

  const std::uint64_t* row(std::size_t x) const { return w_.data() + x * wpr_; }
  std::uint64_t* row(std::size_t x) { return w_.data() + x * wpr_; }
  std::size_t words_per_row() const { return wpr_; }

  Bits row_bits(std::size_t x) const {
    Bits b(cod_);
    std::copy(row(x), row(x) + wpr_, b.data());
    return b;
  }
  void set_row(std::size_t x, const Bits& b) {
    if (b.size() != cod_) throw usage_error("Rel::set_row: width mismatch");
    std::copy(b.data(), b.data() + wpr_, row(x));
  }

  template <class Fn>
  void for_each_in_row(std::size_t x, Fn&& fn) const {
    const auto* r = row(x);
    for (std::size_t k = 0; k < wpr_; ++k) {
      auto w = r[k];
      while (w) {
        fn(k * 64 + static_cast<std::size_t>(std::countr_zero(w)));
        w &= w - 1;
      }
    }
  }

  std::size_t count() const {
    std::size_t c = 0;
    for (auto w : w_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }
  bool empty() const { return count() == 0; }

  std::vector<std::pair<std::size_t, std::size_t>> pairs() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t x = 0; x < dom_; ++x) for_each_in_row(x, [&](std::size_t y) { out.emplace_back(x, y); });
    return out;
  }

  bool leq(const Rel& o) const {
    check_same_shape(o);
    for (std::size_t k = 0; k < w_.size(); ++k)
      if (w_[k] & ~o.w_[k]) return false;
    return true;
  }
  Rel& operator|=(const Rel& o) {
    check_same_shape(o);
    for (std::size_t k = 0; k < w_.size(); ++k) w_[k] |= o.w_[k];
    return *this;
  }

  friend bool operator==(const Rel&, const Rel&) = default;

  std::size_t hash() const {
    std::size_t h = dom_ * 31 + cod_;
    for (auto w : w_) h = (h ^ w) * 0x100000001b3ull + (h >> 29);
    return h;
  }

 private:
  void check_same_shape(const Rel& o) const {
    if (dom_ != o.dom_ || cod_ != o.cod_) throw usage_error("Rel: shape mismatch");
  }

  std::size_t dom_ = 0;
  std::size_t cod_ = 0;
  std::size_t wpr_ = 0;
  std::vector<std::uint64_t> w_;
};

struct RelHash {
  std::size_t operator()(const Rel& r) const { return r.hash(); }
};

/// s . r  (first r, then s).
inline Rel compose_rel(const Rel& r, const Rel& s) {
  if (r.cod() != s.dom()) throw usage_error("compose_rel: dimension mismatch");
  Rel out(r.dom(), s.cod());
  const auto wpr = out.words_per_row();
  for (std::size_t x = 0; x < r.dom(); ++x) {
    auto* dst = out.row(x);
    r.for_each_in_row(x, [&](std::size_t y) {
      const auto* src = s.row(y);
      for (std::size_t k = 0; k < wpr; ++k) dst[k] |= src[k];
    });
  }
  return out;
}

inline Rel converse(const Rel& r) {
  Rel out(r.cod(), r.dom());
  for (std::size_t x = 0; x < r.dom(); ++x) r.for_each_in_row(x, [&](std::size_t y) { out.set(y, x); });
  return out;
}

inline Rel graph(const FinFun& f) {
  Rel r(f.dom(), f.cod());
  for (std::size_t x = 0; x < f.dom(); ++x) r.set(x, f(x));
  return r;
}

inline std::optional<FinFun> is_map(const Rel& r) {
  std::vector<index_t> img(r.dom());
  for (std::size_t x = 0; x < r.dom(); ++x) {
    std::size_t n = 0;
    r.for_each_in_row(x, [&](std::size_t y) {
      img[x] = static_cast<index_t>(y);
      ++n;
    });
    if (n != 1) return std::nullopt;
  }
  return FinFun(r.dom(), r.cod(), std::move(img));
}

/// Relational image r[A] of a subset A of the domain.
inline Bits rel_image(const Rel& r, const Bits& a) {
  Bits out(r.cod());
  a.for_each([&](std::size_t x) {
    const auto* src = r.row(x);
    for (std::size_t k = 0; k < out.words(); ++k) out.data()[k] |= src[k];
  });
  return out;
}

// ---------------------------------------------------------------------------

struct Span {
  std::size_t apex = 0;
  FinFun left;   // apex -> X
  FinFun right;  // apex -> Y
};

/// Canonical span of r: the apex lists the pairs of r row-major.
inline Span span_factorize(const Rel& r) {
  std::vector<index_t> l, rt;
  for (std::size_t x = 0; x < r.dom(); ++x)
    r.for_each_in_row(x, [&](std::size_t y) {
      l.push_back(static_cast<index_t>(x));
      rt.push_back(static_cast<index_t>(y));
    });
  const auto n = l.size();
  return Span{n, FinFun(n, r.dom(), std::move(l)), FinFun(n, r.cod(), std::move(rt))};
}

/// right . left°
inline Rel span_relation(const FinFun& left, const FinFun& right) {
  if (left.dom() != right.dom()) throw usage_error("span_relation: legs must share their domain");
  Rel r(left.cod(), right.cod());
  for (std::size_t p = 0; p < left.dom(); ++p) r.set(left(p), right(p));
  return r;
}

struct ImageFactorization {
  FinFun surjection;  // X -> im f
  FinFun injection;   // im f -> Y
};

inline ImageFactorization image_factorize(const FinFun& f) {
  std::vector<char> hit(f.cod(), 0);
  for (auto y : f.images()) hit[y] = 1;
  std::vector<index_t> rank(f.cod(), 0), incl;
  for (std::size_t y = 0; y < f.cod(); ++y)
    if (hit[y]) {
      rank[y] = static_cast<index_t>(incl.size());
      incl.push_back(static_cast<index_t>(y));
    }
  std::vector<index_t> e(f.dom());
  for (std::size_t x = 0; x < f.dom(); ++x) e[x] = rank[f(x)];
  const auto m = incl.size();
  return {FinFun(f.dom(), m, std::move(e)), FinFun(m, f.cod(), std::move(incl))};
}

// ---------------------------------------------------------------------------
// Kleisli correspondence with the powerset monad. Subsets of Y are indexed by
// their bitmask, so the codomain of a transpose has size 2^|Y|.

inline std::size_t powerset_size(std::size_t n) {
  if (n >= 32) throw bound_error("powerset of a " + std::to_string(n) + "-element set", SIZE_MAX);
  return std::size_t{1} << n;
}

inline FinFun kleisli_transpose(const Rel& r) {
  if (r.cod() > 20) throw bound_error("kleisli_transpose: codomain too large", powerset_size(r.cod()));
  std::vector<index_t> img(r.dom());
  for (std::size_t x = 0; x < r.dom(); ++x) img[x] = static_cast<index_t>(r.row_bits(x).mask());
  return FinFun(r.dom(), powerset_size(r.cod()), std::move(img));
}

inline Rel kleisli_untranspose(const FinFun& f, std::size_t target) {
  if (target > 20 || f.cod() != (std::size_t{1} << target))
    throw usage_error("kleisli_untranspose: codomain is not the powerset of the target");
  Rel r(f.dom(), target);
  for (std::size_t x = 0; x < f.dom(); ++x)
    for (std::size_t y = 0; y < target; ++y)
      if ((f(x) >> y) & 1u) r.set(x, y);
  return r;
}

/// Membership relation PX -/-> X.
inline Rel membership(std::size_t n) {
  const auto p = powerset_size(n);
  Rel r(p, n);
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t x = 0; x < n; ++x)
      if ((a >> x) & 1u) r.set(a, x);
  return r;
}

// ---------------------------------------------------------------------------
// JSON: {"dom": n, "cod": m, "pairs": [[x,y], ...]}

inline nlohmann::json rel_to_json(const Rel& r) {
  nlohmann::json pairs = nlohmann::json::array();
  for (auto [x, y] : r.pairs()) pairs.push_back({x, y});
  return {{"dom", r.dom()}, {"cod", r.cod()}, {"pairs", pairs}};
}

inline Rel rel_from_json(const nlohmann::json& j) {
  try {
    const auto dom = j.at("dom").get<std::size_t>();
    const auto cod = j.at("cod").get<std::size_t>();
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& p : j.at("pairs")) {
      if (!p.is_array() || p.size() != 2) throw usage_error("relation JSON: each pair must be [x, y]");
      pairs.emplace_back(p[0].get<std::size_t>(), p[1].get<std::size_t>());
    }
    return Rel::from_pairs(dom, cod, pairs);
  } catch (const nlohmann::json::exception& e) {
    throw usage_error(std::string("relation JSON: ") + e.what());
  }
}

inline nlohmann::json fun_to_json(const FinFun& f) {
  return {{"dom", f.dom()}, {"cod", f.cod()}, {"images", f.images()}};
}

inline FinFun fun_from_json(const nlohmann::json& j) {
  try {
    return FinFun(j.at("dom").get<std::size_t>(), j.at("cod").get<std::size_t>(),
                  j.at("images").get<std::vector<index_t>>());
  } catch (const nlohmann::json::exception& e) {
    throw usage_error(std::string("function JSON: ") + e.what());
  }
}

/// A subset given by bitmask, in brace notation: 5 -> "{0,2}".
inline std::string render_mask(std::uint64_t m) {
  std::string s = "{";
  for (std::size_t i = 0; i < 64; ++i)
    if ((m >> i) & 1u) s += (s.size() > 1 ? "," : "") + std::to_string(i);
  return s + "}";
}

}  // namespace rellift
