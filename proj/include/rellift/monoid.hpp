#pragma once

// Finite commutative monoids for the monoid-valued functors M[name](X).

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "core.hpp"

namespace rellift {

class Monoid {
 public:
  Monoid(std::string name, std::size_t size, index_t zero, std::vector<std::vector<index_t>> add)
      : name_(std::move(name)), size_(size), zero_(zero), add_(std::move(add)) {
    validate();
  }

  const std::string& name() const { return name_; }
  std::size_t size() const { return size_; }
  index_t zero() const { return zero_; }
  index_t add(index_t a, index_t b) const { return add_[a][b]; }
  const std::vector<std::vector<index_t>>& table() const { return add_; }

 private:
  void validate() const {
    if (size_ == 0) throw usage_error("monoid " + name_ + ": carrier must be non-empty");
    if (zero_ >= size_) throw usage_error("monoid " + name_ + ": zero out of range");
    if (add_.size() != size_) throw usage_error("monoid " + name_ + ": table has wrong row count");
    for (const auto& row : add_) {
      if (row.size() != size_) throw usage_error("monoid " + name_ + ": table has wrong column count");
      for (auto v : row)
        if (v >= size_) throw usage_error("monoid " + name_ + ": table entry out of range");
    }
    for (index_t a = 0; a < size_; ++a) {
      if (add_[a][zero_] != a || add_[zero_][a] != a) throw usage_error("monoid " + name_ + ": zero is not a unit");
      for (index_t b = 0; b < size_; ++b) {
        if (add_[a][b] != add_[b][a]) throw usage_error("monoid " + name_ + ": not commutative");
        for (index_t c = 0; c < size_; ++c)
          if (add_[add_[a][b]][c] != add_[a][add_[b][c]]) throw usage_error("monoid " + name_ + ": not associative");
      }
    }
  }

  std::string name_;
  std::size_t size_;
  index_t zero_;
  std::vector<std::vector<index_t>> add_;
};

inline Monoid make_cyclic_group(std::size_t k) {
  std::vector<std::vector<index_t>> t(k, std::vector<index_t>(k));
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) t[a][b] = static_cast<index_t>((a + b) % k);
  return Monoid("Z" + std::to_string(k), k, 0, std::move(t));
}

/// {0..k} with addition capped at k.
inline Monoid make_truncated_naturals(std::size_t k) {
  std::vector<std::vector<index_t>> t(k + 1, std::vector<index_t>(k + 1));
  for (std::size_t a = 0; a <= k; ++a)
    for (std::size_t b = 0; b <= k; ++b) t[a][b] = static_cast<index_t>(std::min(a + b, k));
  return Monoid("N" + std::to_string(k), k + 1, 0, std::move(t));
}

inline Monoid make_boolean_or() { return Monoid("B", 2, 0, {{0, 1}, {1, 1}}); }

/// {"size": n, "zero": z, "add": [[...], ...]}
inline Monoid monoid_from_json(const std::string& name, const nlohmann::json& j) {
  try {
    return Monoid(name, j.at("size").get<std::size_t>(), j.at("zero").get<index_t>(),
                  j.at("add").get<std::vector<std::vector<index_t>>>());
  } catch (const nlohmann::json::exception& e) {
    throw usage_error("monoid JSON: " + std::string(e.what()));
  }
}

inline nlohmann::json monoid_to_json(const Monoid& m) {
  return {{"size", m.size()}, {"zero", m.zero()}, {"add", m.table()}};
}

/// Process-wide name -> monoid table. Ships with B, Z2, Z3, N2, N3.
class MonoidRegistry {
 public:
  static MonoidRegistry& instance() {
    static MonoidRegistry reg;
    return reg;
  }

  std::shared_ptr<const Monoid> find(const std::string& name) const {
    std::lock_guard lock(mu_);
    auto it = table_.find(name);
    return it == table_.end() ? nullptr : it->second;
  }

  std::shared_ptr<const Monoid> get(const std::string& name) const {
    auto m = find(name);
    if (!m) throw usage_error("unknown monoid '" + name + "'");
    return m;
  }

  void add(Monoid m) {
    std::lock_guard lock(mu_);
    auto name = m.name();
    table_[name] = std::make_shared<const Monoid>(std::move(m));
  }

  std::vector<std::string> names() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& [k, v] : table_) out.push_back(k);
    return out;
  }

 private:
  MonoidRegistry() {
    add(make_boolean_or());
    add(make_cyclic_group(2));
    add(make_cyclic_group(3));
    add(make_truncated_naturals(2));
    add(make_truncated_naturals(3));
  }

  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<const Monoid>> table_;
};

}  // namespace rellift
