// Copyright 2026 The fkinterp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fkinterp/array.hpp"
#include "fkinterp/ops.hpp"

namespace fkinterp {

using VarId = std::size_t;

/// Ordered record of the ops executed during one forward pass. Each entry
/// keeps its op name, its input variable ids and the forward/backward
/// closures; the values held by the tape are the saved activations.
///
/// A tape has a single writer. Distinct tapes share nothing and may be used
/// from different threads.
class Tape {
 public:
  using Inputs = std::span<const Array* const>;
  using ForwardFn = std::function<Array(Inputs inputs)>;
  /// Returns one gradient per input; an empty Array means "no gradient".
  using BackwardFn = std::function<std::vector<Array>(Inputs inputs, const Array& output, const Array& grad_out)>;

  VarId leaf(Array value);
  VarId record(std::string op, std::vector<VarId> inputs, ForwardFn forward, BackwardFn backward);

  /// Stays valid for the lifetime of the tape.
  const Array& value(VarId id) const { return values_.at(id); }
  /// Gradient accumulated by the last backward(); zeros if the variable was not reached.
  Array grad(VarId id) const;
  bool has_grad(VarId id) const { return !grads_.at(id).empty(); }

  /// Reverse sweep from `root`, seeded with `seed` (ones when empty).
  void backward(VarId root, Array seed = {});

  /// Re-runs every recorded op from its recorded inputs and reports whether
  /// all outputs are reproduced bit for bit.
  bool replay_matches() const;

  std::size_t num_ops() const { return nodes_.size(); }
  std::size_t num_vars() const { return values_.size(); }
  const std::string& op_name(std::size_t node) const { return nodes_.at(node).op; }

  // Convenience wrappers around the ops in fkinterp::ops.
  VarId conv2d_3x3(VarId input, VarId weights, VarId bias);
  VarId relu(VarId input);
  VarId avg_pool2(VarId input);
  VarId upsample_bilinear2(VarId input);
  VarId pad_replicate(VarId input, ops::Margins margins);
  VarId crop(VarId input, ops::Margins margins);
  VarId concat_channels(std::vector<VarId> parts);
  VarId slice_channels(VarId input, std::size_t first, std::size_t count);
  VarId add(VarId a, VarId b);
  VarId scale(VarId a, double k);
  VarId weighted_sum(std::vector<VarId> scalars, std::vector<double> weights);

 private:
  struct Node {
    std::string op;
    std::vector<VarId> inputs;
    VarId output;
    ForwardFn forward;
    BackwardFn backward;
  };

  std::vector<const Array*> gather(const std::vector<VarId>& ids) const;

  std::deque<Array> values_;  // deque: value() references survive later records
  std::vector<Array> grads_;
  std::vector<long> producer_;  // node index producing each var, -1 for leaves
  std::vector<Node> nodes_;
};

}  // namespace fkinterp
