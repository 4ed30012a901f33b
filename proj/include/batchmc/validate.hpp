// Copyright 2026 the batchmc authors
// SPDX-License-Identifier: Apache-2.0
//
// Batch-semantics validation for user-supplied TLP callables. A callable
// has batch semantics when a leading axis indexes independent chains and
// the function never mixes or reduces across it. The validator probes the
// callable at several chain extents and catches both wrong-shape outputs
// (reductions over the batch axis) and cross-batch mixing.

#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "batchmc/array.hpp"
#include "batchmc/random.hpp"
#include "batchmc/state.hpp"

namespace batchmc {

struct BatchSemanticsCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct BatchSemanticsReport {
  bool passed = false;
  std::vector<BatchSemanticsCheck> checks;

  std::string summary() const {
    std::ostringstream os;
    for (const auto& check : checks) {
      os << (check.passed ? "PASS" : "FAIL") << "  " << check.name;
      if (!check.detail.empty()) os << ": " << check.detail;
      os << '\n';
    }
    return os.str();
  }
};

/// Evaluates `tlp` at chain extents 1, 2, and 5 over fixed pseudo-random
/// states. PASS requires output shape exactly [C] at every extent and that
/// the C=2 outputs equal the two C=1 outputs evaluated separately.
template <typename S>
BatchSemanticsReport validate_batch_semantics(
    const std::function<Array<S>(const ChainState<S>&)>& tlp,
    const std::vector<Shape>& event_shapes, S tolerance = static_cast<S>(1e-12)) {
  BatchSemanticsReport report;
  const RngKey key = make_key(0x00B5EC7);

  const Index max_chains = 5;
  // Row values are shared between extents so separability can be checked.
  std::vector<std::vector<Array<S>>> rows(static_cast<std::size_t>(max_chains));
  const auto part_keys = split(key, static_cast<Index>(event_shapes.size()));
  for (std::size_t p = 0; p < event_shapes.size(); ++p) {
    const auto chain_keys = split(part_keys[p], max_chains);
    for (Index c = 0; c < max_chains; ++c) {
      rows[static_cast<std::size_t>(c)].push_back(
          sample_standard_normal<S>(chain_keys[static_cast<std::size_t>(c)], event_shapes[p]));
    }
  }

  auto state_with_chains = [&](Index chains) {
    std::vector<Array<S>> parts;
    for (std::size_t p = 0; p < event_shapes.size(); ++p) {
      Shape shape{chains};
      shape.insert(shape.end(), event_shapes[p].begin(), event_shapes[p].end());
      Array<S> part(shape);
      for (Index c = 0; c < chains; ++c) {
        copy_into_leading_slice(part, c, rows[static_cast<std::size_t>(c)][p]);
      }
      parts.push_back(std::move(part));
    }
    return ChainState<S>(std::move(parts));
  };

  auto eval = [&](Index chains, Array<S>& out, std::string& error) {
    try {
      out = tlp(state_with_chains(chains));
      return true;
    } catch (const std::exception& e) {
      error = e.what();
      return false;
    }
  };

  std::vector<Array<S>> outputs(6);
  for (Index chains : {Index(1), Index(2), Index(5)}) {
    BatchSemanticsCheck check;
    check.name = "output shape is [C] at C=" + std::to_string(chains);
    std::string error;
    Array<S> out;
    if (!eval(chains, out, error)) {
      check.detail = "callable threw: " + error;
    } else if (out.shape() != Shape{chains}) {
      check.detail = "got shape " + shape_str(out.shape());
    } else {
      check.passed = true;
      outputs[static_cast<std::size_t>(chains)] = out;
    }
    report.checks.push_back(std::move(check));
  }

  BatchSemanticsCheck sep;
  sep.name = "C=2 batch equals the two C=1 evaluations (no cross-batch mixing)";
  if (report.checks[0].passed && report.checks[1].passed) {
    // Evaluate row 1 on its own; row 0 alone was already evaluated above.
    std::vector<Array<S>> parts;
    for (std::size_t p = 0; p < event_shapes.size(); ++p) {
      Shape shape{1};
      shape.insert(shape.end(), event_shapes[p].begin(), event_shapes[p].end());
      Array<S> part(shape);
      copy_into_leading_slice(part, 0, rows[1][p]);
      parts.push_back(std::move(part));
    }
    bool ok = true;
    std::string detail;
    try {
      const Array<S> alone1 = tlp(ChainState<S>(std::move(parts)));
      const Array<S>& alone0 = outputs[1];
      const Array<S>& pair = outputs[2];
      const S d0 = std::abs(pair[0] - alone0[0]);
      const S d1 = std::abs(pair[1] - alone1[0]);
      const bool inf_ok0 = pair[0] == alone0[0];  // covers matching infinities
      const bool inf_ok1 = pair[1] == alone1[0];
      ok = (d0 <= tolerance || inf_ok0) && (d1 <= tolerance || inf_ok1);
      if (!ok) {
        std::ostringstream os;
        os << "batch [" << pair[0] << "," << pair[1] << "] vs separate [" << alone0[0] << ","
           << alone1[0] << "]";
        detail = os.str();
      }
    } catch (const std::exception& e) {
      ok = false;
      detail = std::string("callable threw: ") + e.what();
    }
    sep.passed = ok;
    sep.detail = detail;
  } else {
    sep.detail = "skipped: shape checks failed";
  }
  report.checks.push_back(std::move(sep));

  report.passed = true;
  for (const auto& check : report.checks) report.passed = report.passed && check.passed;
  return report;
}

}  // namespace batchmc
