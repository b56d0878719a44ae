#pragma once

// Named parameter registry with stable insertion order, so initialization,
// optimizer sweeps, and checkpoints all walk tensors in one deterministic
// sequence. Vectors are stored as 1 x C rows; conv weights as (9*Cin) x Cout.

#include "pestvl/types.hpp"

#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace pestvl::params {

template <typename S>
class ParamSet {
 public:
  struct Entry {
    std::string name;
    MatrixX<S> value;
  };

  MatrixX<S>& add(const std::string& name, MatrixX<S> value) {
    if (index_.count(name)) {
      throw std::logic_error("duplicate parameter: " + name);
    }
    index_.emplace(name, entries_.size());
    entries_.push_back(Entry{name, std::move(value)});
    return entries_.back().value;
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  MatrixX<S>& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::logic_error("unknown parameter: " + name);
    return entries_[it->second].value;
  }
  const MatrixX<S>& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::logic_error("unknown parameter: " + name);
    return entries_[it->second].value;
  }

  size_t size() const { return entries_.size(); }

  Index scalarCount() const {
    Index n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  template <typename T>
  ParamSet<T> cast() const {
    ParamSet<T> out;
    for (const auto& e : entries_) out.add(e.name, e.value.template cast<T>());
    return out;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace pestvl::params
