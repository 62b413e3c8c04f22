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

#include "fkinterp/tape.hpp"

#include <cstring>

#include "fkinterp/error.hpp"

namespace fkinterp {

VarId Tape::leaf(Array value) {
  require_finite(value, "tape leaf");
  values_.push_back(std::move(value));
  grads_.emplace_back();
  producer_.push_back(-1);
  return values_.size() - 1;
}

std::vector<const Array*> Tape::gather(const std::vector<VarId>& ids) const {
  std::vector<const Array*> ptrs;
  ptrs.reserve(ids.size());
  for (VarId id : ids) ptrs.push_back(&values_.at(id));
  return ptrs;
}

VarId Tape::record(std::string op, std::vector<VarId> inputs, ForwardFn forward, BackwardFn backward) {
  const auto ptrs = gather(inputs);
  Array out = forward(ptrs);
  require_finite(out, op);
  values_.push_back(std::move(out));
  grads_.emplace_back();
  producer_.push_back(static_cast<long>(nodes_.size()));
  const VarId id = values_.size() - 1;
  nodes_.push_back(Node{std::move(op), std::move(inputs), id, std::move(forward), std::move(backward)});
  return id;
}

Array Tape::grad(VarId id) const {
  if (grads_.at(id).empty()) return Array::like(values_.at(id));
  return grads_[id];
}

void Tape::backward(VarId root, Array seed) {
  for (Array& g : grads_) g = Array();
  if (seed.empty()) seed = Array::like(values_.at(root), 1.0);
  require_same_shape(seed, values_.at(root), "Tape::backward seed");
  grads_[root] = std::move(seed);

  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (grads_[it->output].empty()) continue;
    const auto ptrs = gather(it->inputs);
    std::vector<Array> in_grads = it->backward(ptrs, values_[it->output], grads_[it->output]);
    if (in_grads.size() != it->inputs.size()) {
      throw Error("Tape::backward: op '" + it->op + "' returned the wrong number of gradients");
    }
    for (std::size_t k = 0; k < in_grads.size(); ++k) {
      if (in_grads[k].empty()) continue;
      require_finite(in_grads[k], it->op + " backward");
      Array& acc = grads_[it->inputs[k]];
      if (acc.empty()) {
        acc = std::move(in_grads[k]);
      } else {
        acc += in_grads[k];
      }
    }
  }
}

bool Tape::replay_matches() const {
  for (const Node& n : nodes_) {
    const auto ptrs = gather(n.inputs);
    const Array again = n.forward(ptrs);
    const Array& recorded = values_[n.output];
    if (again.shape() != recorded.shape()) return false;
    if (std::memcmp(again.data(), recorded.data(), again.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

VarId Tape::conv2d_3x3(VarId input, VarId weights, VarId bias) {
  return record(
      "conv2d_3x3", {input, weights, bias},
      [](Inputs in) { return ops::conv2d_3x3(*in[0], *in[1], *in[2]); },
      [](Inputs in, const Array&, const Array& g) {
        ops::Conv2dGrads r = ops::conv2d_3x3_backward(*in[0], *in[1], g);
        return std::vector<Array>{std::move(r.input), std::move(r.weights), std::move(r.bias)};
      });
}

VarId Tape::relu(VarId input) {
  return record(
      "relu", {input}, [](Inputs in) { return ops::relu(*in[0]); },
      [](Inputs in, const Array&, const Array& g) { return std::vector<Array>{ops::relu_backward(*in[0], g)}; });
}

VarId Tape::avg_pool2(VarId input) {
  return record(
      "avg_pool2", {input}, [](Inputs in) { return ops::avg_pool2(*in[0]); },
      [](Inputs, const Array&, const Array& g) { return std::vector<Array>{ops::avg_pool2_backward(g)}; });
}

VarId Tape::upsample_bilinear2(VarId input) {
  return record(
      "upsample_bilinear2", {input}, [](Inputs in) { return ops::upsample_bilinear2(*in[0]); },
      [](Inputs, const Array&, const Array& g) { return std::vector<Array>{ops::upsample_bilinear2_backward(g)}; });
}

VarId Tape::pad_replicate(VarId input, ops::Margins margins) {
  return record(
      "pad_replicate", {input}, [margins](Inputs in) { return ops::pad_replicate(*in[0], margins); },
      [margins](Inputs, const Array&, const Array& g) {
        return std::vector<Array>{ops::pad_replicate_backward(g, margins)};
      });
}

VarId Tape::crop(VarId input, ops::Margins margins) {
  return record(
      "crop", {input}, [margins](Inputs in) { return ops::crop(*in[0], margins); },
      [margins](Inputs, const Array&, const Array& g) { return std::vector<Array>{ops::crop_backward(g, margins)}; });
}

VarId Tape::concat_channels(std::vector<VarId> parts) {
  return record(
      "concat_channels", std::move(parts),
      [](Inputs in) {
        std::vector<Array> copies;
        copies.reserve(in.size());
        for (const Array* a : in) copies.push_back(*a);
        return fkinterp::concat_channels(copies);
      },
      [](Inputs in, const Array&, const Array& g) {
        std::vector<Array> out;
        std::size_t first = 0;
        for (const Array* a : in) {
          out.push_back(fkinterp::slice_channels(g, first, a->dim(0)));
          first += a->dim(0);
        }
        return out;
      });
}

VarId Tape::slice_channels(VarId input, std::size_t first, std::size_t count) {
  return record(
      "slice_channels", {input}, [first, count](Inputs in) { return fkinterp::slice_channels(*in[0], first, count); },
      [first, count](Inputs in, const Array&, const Array& g) {
        Array full = Array::like(*in[0]);
        const std::size_t plane = g.dim(1) * g.dim(2);
        std::copy(g.data(), g.data() + count * plane, full.data() + first * plane);
        return std::vector<Array>{std::move(full)};
      });
}

VarId Tape::add(VarId a, VarId b) {
  return record(
      "add", {a, b}, [](Inputs in) { return *in[0] + *in[1]; },
      [](Inputs, const Array&, const Array& g) { return std::vector<Array>{g, g}; });
}

VarId Tape::scale(VarId a, double k) {
  return record(
      "scale", {a}, [k](Inputs in) { return *in[0] * k; },
      [k](Inputs, const Array&, const Array& g) { return std::vector<Array>{g * k}; });
}

VarId Tape::weighted_sum(std::vector<VarId> scalars, std::vector<double> weights) {
  if (scalars.size() != weights.size()) throw ShapeError("weighted_sum: one weight per input required");
  return record(
      "weighted_sum", std::move(scalars),
      [weights](Inputs in) {
        Array out = Array::like(*in[0]);
        for (std::size_t k = 0; k < in.size(); ++k) out += *in[k] * weights[k];
        return out;
      },
      [weights](Inputs in, const Array&, const Array& g) {
        std::vector<Array> out;
        for (std::size_t k = 0; k < in.size(); ++k) out.push_back(g * weights[k]);
        return out;
      });
}

}  // namespace fkinterp
