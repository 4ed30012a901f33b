// Copyright 2026 the batchmc authors
// SPDX-License-Identifier: Apache-2.0
//
// Kernel results are trees: internal nodes are named records or ordered
// lists, leaves are arrays (floating, boolean, or integer). Tree structure,
// field names, and leaf dtypes are invariant across steps; nested kernels
// address each other's leaves by slash-separated string paths such as
// "inner_results/accepted_results/step_size".

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "batchmc/array.hpp"
#include "batchmc/errors.hpp"

namespace batchmc {

template <typename S>
class Results {
 public:
  enum class Kind { record, list, leaf };
  using Leaf = std::variant<Array<S>, Mask, Array<std::int64_t>>;

  Results() : kind_(Kind::record) {}

  static Results record(std::vector<std::pair<std::string, Results>> fields) {
    Results r;
    r.kind_ = Kind::record;
    r.fields_ = std::move(fields);
    return r;
  }

  static Results list(std::vector<Results> items) {
    Results r;
    r.kind_ = Kind::list;
    r.items_ = std::move(items);
    return r;
  }

  static Results leaf(Leaf value) {
    Results r;
    r.kind_ = Kind::leaf;
    r.value_ = std::move(value);
    return r;
  }
  static Results leaf(Array<S> value) { return leaf(Leaf(std::move(value))); }
  static Results leaf(Mask value) { return leaf(Leaf(std::move(value))); }
  static Results leaf(Array<std::int64_t> value) { return leaf(Leaf(std::move(value))); }

  /// A list node whose items are the given leaves (used for state parts,
  /// gradients, per-part step sizes).
  static Results leaf_list(const std::vector<Array<S>>& arrays) {
    std::vector<Results> items;
    items.reserve(arrays.size());
    for (const auto& a : arrays) items.push_back(leaf(a));
    return list(std::move(items));
  }

  Kind kind() const { return kind_; }
  bool is_record() const { return kind_ == Kind::record; }
  bool is_list() const { return kind_ == Kind::list; }
  bool is_leaf() const { return kind_ == Kind::leaf; }

  const std::vector<std::pair<std::string, Results>>& fields() const { return fields_; }
  std::vector<std::pair<std::string, Results>>& mutable_fields() { return fields_; }
  const std::vector<Results>& items() const { return items_; }
  std::vector<Results>& items() { return items_; }

  bool has_field(std::string_view name) const {
    for (const auto& [key, value] : fields_) {
      if (key == name) return true;
    }
    return false;
  }

  const Results& field(std::string_view name) const {
    for (const auto& [key, value] : fields_) {
      if (key == name) return value;
    }
    throw ContractError("results record has no field '" + std::string(name) + "'");
  }

  Results& field(std::string_view name) {
    for (auto& [key, value] : fields_) {
      if (key == name) return value;
    }
    throw ContractError("results record has no field '" + std::string(name) + "'");
  }

  const Leaf& value() const { return value_; }
  Leaf& value() { return value_; }

  template <typename T>
  const Array<T>& leaf_as() const {
    if (!is_leaf()) throw ContractError("results node is not a leaf");
    const Array<T>* p = std::get_if<Array<T>>(&value_);
    if (!p) throw ContractError("results leaf holds a different dtype");
    return *p;
  }

  /// Navigates a slash-separated path; numeric tokens index list nodes.
  /// Throws ContractError naming the full path and the failing token.
  const Results& at(std::string_view path) const {
    return const_cast<Results*>(this)->at(path);
  }

  Results& at(std::string_view path) {
    Results* node = this;
    std::size_t start = 0;
    while (start <= path.size()) {
      const std::size_t slash = path.find('/', start);
      const std::string_view token =
          path.substr(start, slash == std::string_view::npos ? std::string_view::npos
                                                             : slash - start);
      if (!token.empty()) {
        node = &node->child(token, path);
      }
      if (slash == std::string_view::npos) break;
      start = slash + 1;
    }
    return *node;
  }

  const Mask& mask_at(std::string_view path) const { return leaf_at<std::uint8_t>(path); }
  const Array<std::int64_t>& int_at(std::string_view path) const {
    return leaf_at<std::int64_t>(path);
  }

  /// Convenience accessors for leaves at a path.
  template <typename T>
  const Array<T>& leaf_at(std::string_view path) const {
    const Results& node = at(path);
    if (!node.is_leaf()) {
      throw ContractError("results path '" + std::string(path) + "' is not a leaf");
    }
    const Array<T>* p = std::get_if<Array<T>>(&node.value());
    if (!p) {
      throw ContractError("results leaf '" + std::string(path) + "' holds a different dtype");
    }
    return *p;
  }

 private:
  Results& child(std::string_view token, std::string_view full_path) {
    const std::string context = "results path '" + std::string(full_path) + "'";
    if (is_record()) {
      for (auto& [key, value] : fields_) {
        if (key == token) return value;
      }
      throw ContractError(context + ": record has no field '" + std::string(token) + "'");
    }
    if (is_list()) {
      Index idx = -1;
      bool numeric = !token.empty();
      for (char ch : token) {
        if (ch < '0' || ch > '9') {
          numeric = false;
          break;
        }
      }
      if (numeric) idx = std::stoll(std::string(token));
      if (!numeric || idx < 0 || idx >= static_cast<Index>(items_.size())) {
        throw ContractError(context + ": bad list index '" + std::string(token) + "'");
      }
      return items_[static_cast<std::size_t>(idx)];
    }
    throw ContractError(context + ": leaf has no child '" + std::string(token) + "'");
  }

  Kind kind_;
  std::vector<std::pair<std::string, Results>> fields_;
  std::vector<Results> items_;
  Leaf value_;
};

namespace detail {

inline const char* leaf_dtype_name(std::size_t variant_index, std::size_t scalar_bytes) {
  switch (variant_index) {
    case 0:
      return scalar_bytes == 8 ? "f64" : "f32";
    case 1:
      return "bool";
    default:
      return "i64";
  }
}

template <typename S>
std::optional<std::string> structure_mismatch_impl(const Results<S>& a, const Results<S>& b,
                                                   const std::string& path) {
  const std::string here = path.empty() ? "(root)" : path;
  if (a.kind() != b.kind()) return here + ": node kinds differ";
  switch (a.kind()) {
    case Results<S>::Kind::record: {
      if (a.fields().size() != b.fields().size()) return here + ": record arity differs";
      for (std::size_t i = 0; i < a.fields().size(); ++i) {
        const auto& [name_a, child_a] = a.fields()[i];
        const auto& [name_b, child_b] = b.fields()[i];
        if (name_a != name_b) {
          return here + ": field name '" + name_a + "' vs '" + name_b + "'";
        }
        const std::string child_path = path.empty() ? name_a : path + "/" + name_a;
        if (auto m = structure_mismatch_impl(child_a, child_b, child_path)) return m;
      }
      return std::nullopt;
    }
    case Results<S>::Kind::list: {
      if (a.items().size() != b.items().size()) return here + ": list arity differs";
      for (std::size_t i = 0; i < a.items().size(); ++i) {
        const std::string child_path =
            (path.empty() ? std::string() : path + "/") + std::to_string(i);
        if (auto m = structure_mismatch_impl(a.items()[i], b.items()[i], child_path)) return m;
      }
      return std::nullopt;
    }
    case Results<S>::Kind::leaf: {
      if (a.value().index() != b.value().index()) {
        return here + ": leaf dtype " + leaf_dtype_name(a.value().index(), sizeof(S)) + " vs " +
               leaf_dtype_name(b.value().index(), sizeof(S));
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Path of the first structural difference (node kinds, record names, arity,
/// leaf dtypes), or nullopt when the trees match. Leaf shapes may differ.
template <typename S>
std::optional<std::string> structure_mismatch(const Results<S>& a, const Results<S>& b) {
  return detail::structure_mismatch_impl(a, b, "");
}

template <typename S>
void require_same_structure(const Results<S>& a, const Results<S>& b, const char* context) {
  if (auto m = structure_mismatch(a, b)) {
    throw ContractError(std::string(context) + ": results structure mismatch at " + *m);
  }
}

/// Per-leaf elementwise select with a [C] mask padded to each leaf's rank.
template <typename S>
Results<S> select_results(const Mask& take, const Results<S>& on_true,
                          const Results<S>& on_false) {
  require_same_structure(on_true, on_false, "select_results");
  switch (on_true.kind()) {
    case Results<S>::Kind::record: {
      std::vector<std::pair<std::string, Results<S>>> fields;
      fields.reserve(on_true.fields().size());
      for (std::size_t i = 0; i < on_true.fields().size(); ++i) {
        fields.emplace_back(on_true.fields()[i].first,
                            select_results(take, on_true.fields()[i].second,
                                           on_false.fields()[i].second));
      }
      return Results<S>::record(std::move(fields));
    }
    case Results<S>::Kind::list: {
      std::vector<Results<S>> items;
      items.reserve(on_true.items().size());
      for (std::size_t i = 0; i < on_true.items().size(); ++i) {
        items.push_back(select_results(take, on_true.items()[i], on_false.items()[i]));
      }
      return Results<S>::list(std::move(items));
    }
    case Results<S>::Kind::leaf: {
      return std::visit(
          [&](const auto& a) -> Results<S> {
            using LeafArray = std::decay_t<decltype(a)>;
            const auto& b = std::get<LeafArray>(on_false.value());
            if (a.rank() < take.rank()) {
              // Chain-shared leaf (e.g. a scalar step size): no per-chain
              // component to select.
              return Results<S>::leaf(a);
            }
            const Mask padded = left_justified_expand_dims_to_rank(take, a.rank());
            return Results<S>::leaf(select(padded, a, b));
          },
          on_true.value());
    }
  }
  throw ContractError("select_results: unreachable");
}

template <typename S>
bool results_bitwise_equal(const Results<S>& a, const Results<S>& b) {
  if (structure_mismatch(a, b)) return false;
  switch (a.kind()) {
    case Results<S>::Kind::record:
      for (std::size_t i = 0; i < a.fields().size(); ++i) {
        if (!results_bitwise_equal(a.fields()[i].second, b.fields()[i].second)) return false;
      }
      return true;
    case Results<S>::Kind::list:
      for (std::size_t i = 0; i < a.items().size(); ++i) {
        if (!results_bitwise_equal(a.items()[i], b.items()[i])) return false;
      }
      return true;
    case Results<S>::Kind::leaf:
      return std::visit(
          [&](const auto& x) {
            using LeafArray = std::decay_t<decltype(x)>;
            return bitwise_equal(x, std::get<LeafArray>(b.value()));
          },
          a.value());
  }
  return false;
}

/// Depth-first visit of every leaf with its slash path.
template <typename S, typename F>
void for_each_leaf(const Results<S>& node, F&& visit, const std::string& path = "") {
  switch (node.kind()) {
    case Results<S>::Kind::record:
      for (const auto& [name, child] : node.fields()) {
        for_each_leaf(child, visit, path.empty() ? name : path + "/" + name);
      }
      return;
    case Results<S>::Kind::list:
      for (std::size_t i = 0; i < node.items().size(); ++i) {
        for_each_leaf(node.items()[i], visit,
                      (path.empty() ? std::string() : path + "/") + std::to_string(i));
      }
      return;
    case Results<S>::Kind::leaf:
      visit(path, node.value());
      return;
  }
}

}  // namespace batchmc
