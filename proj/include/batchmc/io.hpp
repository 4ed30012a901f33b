// Copyright 2026 the batchmc authors
// SPDX-License-Identifier: Apache-2.0
//
// Sample and report serialization. CSV holds one row per (draw, chain) with
// flattened per-variable columns and IEEE round-trippable decimals (17
// significant digits for float64, 9 for float32); JSONL holds one object
// per draw with nested arrays; the run report is a single JSON document.

#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "batchmc/results.hpp"

namespace batchmc {

enum class SampleFormat { csv, jsonl };

inline SampleFormat parse_sample_format(const std::string& name) {
  if (name == "csv") return SampleFormat::csv;
  if (name == "jsonl") return SampleFormat::jsonl;
  throw ConfigError("unknown sample format '" + name + "' (expected csv or jsonl)");
}

inline const char* sample_format_name(SampleFormat format) {
  return format == SampleFormat::csv ? "csv" : "jsonl";
}

namespace detail {

template <typename S>
std::string format_value(S value) {
  char buf[40];
  if constexpr (sizeof(S) == 8) {
    std::snprintf(buf, sizeof(buf), "%.17g", static_cast<double>(value));
  } else {
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(value));
  }
  return buf;
}

/// Column suffixes for one flattened event element: "" for scalars,
/// "_i" / "_i_j" for higher ranks.
inline std::string event_suffix(const Shape& event, Index flat) {
  if (event.empty()) return "";
  std::string suffix;
  std::vector<Index> idx(event.size());
  for (Index ax = static_cast<Index>(event.size()) - 1; ax >= 0; --ax) {
    idx[static_cast<std::size_t>(ax)] = flat % event[static_cast<std::size_t>(ax)];
    flat /= event[static_cast<std::size_t>(ax)];
  }
  for (Index i : idx) suffix += "_" + std::to_string(i);
  return suffix;
}

/// Nested JSON array over dims [from..rank) of `a` starting at flat offset.
template <typename T>
nlohmann::json array_to_json(const Array<T>& a, Index from_dim, Index offset) {
  if (from_dim == a.rank()) {
    if constexpr (std::is_same_v<T, std::uint8_t>) {
      return static_cast<bool>(a[offset]);
    } else {
      return a[offset];
    }
  }
  Index block = 1;
  for (Index d = from_dim + 1; d < a.rank(); ++d) block *= a.shape()[d];
  nlohmann::json out = nlohmann::json::array();
  for (Index i = 0; i < a.shape()[from_dim]; ++i) {
    out.push_back(array_to_json(a, from_dim + 1, offset + i * block));
  }
  return out;
}

template <typename T>
nlohmann::json array_to_json(const Array<T>& a) {
  return array_to_json(a, 0, 0);
}

}  // namespace detail

/// Writes stacked samples ([num_results, C, ...event] per part) plus an
/// optional trace tree (leaves stacked to [num_results, ...]) to `path`.
///
/// CSV columns: draw, chain, then one column per flattened state element,
/// then trace leaves as trace.<path> columns (per-chain when their second
/// axis is the chain axis, otherwise repeated across rows of a draw).
template <typename S>
void write_samples(const std::vector<Array<S>>& samples,
                   const std::vector<std::string>& part_names, const Results<S>& trace,
                   const std::string& path, SampleFormat format) {
  if (samples.empty() || samples.size() != part_names.size()) {
    throw ArgumentError("write_samples: need one name per state part");
  }
  const Index draws = samples[0].shape().size() < 2 ? -1 : samples[0].shape()[0];
  const Index chains = samples[0].shape().size() < 2 ? -1 : samples[0].shape()[1];
  for (const auto& part : samples) {
    if (part.rank() < 2 || part.shape()[0] != draws || part.shape()[1] != chains) {
      throw ShapeError("write_samples: samples must share leading [draws, chains] axes");
    }
  }

  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open '" + path + "' for writing");

  struct TraceColumn {
    std::string label;
    const Array<S>* leaf;
    bool per_chain;
    Index event_size;
  };

  if (format == SampleFormat::csv) {
    std::string header = "draw,chain";
    std::vector<Shape> events;
    for (std::size_t p = 0; p < samples.size(); ++p) {
      Shape event(samples[p].shape().begin() + 2, samples[p].shape().end());
      for (Index e = 0; e < shape_size(event); ++e) {
        header += "," + part_names[p] + detail::event_suffix(event, e);
      }
      events.push_back(std::move(event));
    }
    std::vector<TraceColumn> trace_columns;
    for_each_leaf(trace, [&](const std::string& leaf_path,
                             const typename Results<S>::Leaf& leaf) {
      const Array<S>* numeric = std::get_if<Array<S>>(&leaf);
      if (!numeric || numeric->rank() < 1 || numeric->shape()[0] != draws) return;
      std::string label = "trace." + leaf_path;
      for (char& ch : label) {
        if (ch == '/') ch = '.';
      }
      const bool per_chain = numeric->rank() >= 2 && numeric->shape()[1] == chains;
      Shape event(numeric->shape().begin() + (per_chain ? 2 : 1), numeric->shape().end());
      const Index event_size = shape_size(event);
      for (Index e = 0; e < event_size; ++e) {
        header += "," + label + detail::event_suffix(event, e);
      }
      trace_columns.push_back({std::move(label), numeric, per_chain, event_size});
    });
    file << header << '\n';
    for (Index draw = 0; draw < draws; ++draw) {
      for (Index c = 0; c < chains; ++c) {
        file << draw << ',' << c;
        for (std::size_t p = 0; p < samples.size(); ++p) {
          const Index event_size = shape_size(events[p]);
          const Index base = (draw * chains + c) * event_size;
          for (Index e = 0; e < event_size; ++e) {
            file << ',' << detail::format_value(samples[p][base + e]);
          }
        }
        for (const auto& column : trace_columns) {
          const Index base = column.per_chain
                                 ? (draw * chains + c) * column.event_size
                                 : draw * column.event_size;
          for (Index e = 0; e < column.event_size; ++e) {
            file << ',' << detail::format_value((*column.leaf)[base + e]);
          }
        }
        file << '\n';
      }
    }
  } else {
    for (Index draw = 0; draw < draws; ++draw) {
      nlohmann::json row;
      row["draw"] = draw;
      nlohmann::json state = nlohmann::json::object();
      for (std::size_t p = 0; p < samples.size(); ++p) {
        state[part_names[p]] = detail::array_to_json(take_leading(samples[p], draw));
      }
      row["state"] = std::move(state);
      if (trace.kind() != Results<S>::Kind::record || !trace.fields().empty()) {
        nlohmann::json traced = nlohmann::json::object();
        for_each_leaf(trace, [&](const std::string& leaf_path,
                                 const typename Results<S>::Leaf& leaf) {
          std::visit(
              [&](const auto& arr) {
                if (arr.rank() >= 1 && arr.shape()[0] == draws) {
                  traced[leaf_path] = detail::array_to_json(take_leading(arr, draw));
                }
              },
              leaf);
        });
        row["trace"] = std::move(traced);
      }
      file << row.dump() << '\n';
    }
  }
  if (!file.good()) throw IoError("write failed for '" + path + "'");
}

inline void write_json_file(const std::string& path, const nlohmann::json& value) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open '" + path + "' for writing");
  file << value.dump(2) << '\n';
  if (!file.good()) throw IoError("write failed for '" + path + "'");
}

}  // namespace batchmc
