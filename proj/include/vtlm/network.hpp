// Copyright 2026 The vtlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vtlm/common.hpp"
#include "vtlm/landmarks.hpp"
#include "vtlm/ops.hpp"
#include "vtlm/random.hpp"
#include "vtlm/tensor.hpp"

namespace vtlm {

enum class Architecture { kFlatNet, kConvOnly };

inline std::string architecture_name(Architecture a) {
  return a == Architecture::kFlatNet ? "flatnet" : "convonly";
}

inline Architecture architecture_from_name(const std::string& name) {
  if (name == "flatnet") return Architecture::kFlatNet;
  if (name == "convonly") return Architecture::kConvOnly;
  throw ConfigError("unknown architecture '" + name + "' (flatnet | convonly)");
}

// Structure of one landmark-group network. Neither architecture pools,
// strides or flattens; spatial size is preserved through every layer.
//
// flatnet: L1 five parallel 9x9 conv branches, one per dilation rate
// (ReLU), L2 a second same-dilation 9x9 conv per branch (ReLU), L3 channel
// concatenation, L4 5x5 conv (ReLU), L5/L6 1x1 convs (ReLU), L7 1x1 conv
// to |group| channels with tanh.
//
// convonly: six same-padding convs, ReLU except the final tanh layer.
struct NetworkSpec {
  Architecture architecture = Architecture::kFlatNet;
  std::vector<std::string> group;
  std::vector<int> dilation_rates = {1, 2, 4, 8, 16};
  int branch_width = 32;
  int l4_width = 512;
  int l5_width = 512;
  int l6_width = 256;
  // widths of the first five convonly layers; the sixth maps to |group|
  std::vector<int> convonly_widths = {16, 32, 32, 32, 16};
  int convonly_kernel = 9;
  int input_channels = 3;

  void validate() const {
    if (group.empty()) throw ConfigError("network group is empty");
    for (const auto& id : group) landmark_index(id);
    if (input_channels <= 0) throw ConfigError("input channel count must be positive");
    if (architecture == Architecture::kFlatNet) {
      if (dilation_rates.size() != 5)
        throw ConfigError("flatnet takes exactly 5 dilation rates, got " +
                          std::to_string(dilation_rates.size()));
      for (std::size_t i = 0; i < dilation_rates.size(); ++i) {
        if (dilation_rates[i] <= 0)
          throw ConfigError("dilation rates must be positive");
        for (std::size_t j = i + 1; j < dilation_rates.size(); ++j)
          if (dilation_rates[i] == dilation_rates[j])
            throw ConfigError("dilation rates must be distinct");
      }
      if (branch_width <= 0 || l4_width <= 0 || l5_width <= 0 || l6_width <= 0)
        throw ConfigError("filter widths must be positive");
    } else {
      if (convonly_widths.size() != 5)
        throw ConfigError("convonly takes 5 interior widths (layer 6 is the output)");
      for (int c : convonly_widths)
        if (c <= 0) throw ConfigError("filter widths must be positive");
      if (convonly_kernel <= 0 || convonly_kernel % 2 == 0)
        throw ConfigError("convonly kernel must be odd and positive");
    }
  }
};

template <typename T>
class Network {
 public:
  struct Layer {
    std::string name;
    ConvSpec spec;
    Tensor<T> w;
    Tensor<T> b;
    enum class Act { kRelu, kTanh } act = Act::kRelu;
  };

  // Intermediate activations of one forward pass, kept for backward.
  struct Trace {
    Tensor<T> input;
    std::vector<Tensor<T>> branch1;  // post-ReLU L1 outputs (flatnet)
    std::vector<Tensor<T>> branch2;  // post-ReLU L2 outputs (flatnet)
    Tensor<T> concat;                // L3 output (flatnet)
    std::vector<Tensor<T>> trunk;    // post-activation outputs of the
                                     // remaining layers, ending at the output
  };

  Network(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    spec_.validate();
    const int out_c = static_cast<int>(spec_.group.size());
    if (spec_.architecture == Architecture::kFlatNet) {
      for (int br = 0; br < 5; ++br) {
        const int d = spec_.dilation_rates[static_cast<std::size_t>(br)];
        branches1_.push_back(make_layer("l1.b" + std::to_string(br), 9, d,
                                        spec_.input_channels, spec_.branch_width,
                                        Layer::Act::kRelu));
        branches2_.push_back(make_layer("l2.b" + std::to_string(br), 9, d,
                                        spec_.branch_width, spec_.branch_width,
                                        Layer::Act::kRelu));
      }
      trunk_.push_back(make_layer("l4", 5, 1, 5 * spec_.branch_width,
                                  spec_.l4_width, Layer::Act::kRelu));
      trunk_.push_back(make_layer("l5", 1, 1, spec_.l4_width, spec_.l5_width,
                                  Layer::Act::kRelu));
      trunk_.push_back(make_layer("l6", 1, 1, spec_.l5_width, spec_.l6_width,
                                  Layer::Act::kRelu));
      trunk_.push_back(make_layer("l7", 1, 1, spec_.l6_width, out_c,
                                  Layer::Act::kTanh));
    } else {
      int cin = spec_.input_channels;
      for (int i = 0; i < 5; ++i) {
        const int cout = spec_.convonly_widths[static_cast<std::size_t>(i)];
        trunk_.push_back(make_layer("c" + std::to_string(i + 1),
                                    spec_.convonly_kernel, 1, cin, cout,
                                    Layer::Act::kRelu));
        cin = cout;
      }
      trunk_.push_back(make_layer("c6", spec_.convonly_kernel, 1, cin, out_c,
                                  Layer::Act::kTanh));
    }
    initialize(seed);
  }

  const NetworkSpec& spec() const { return spec_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_layer([&n](const Layer& l) { n += l.w.size() + l.b.size(); });
    return n;
  }

  std::vector<Tensor<T>*> parameters() {
    std::vector<Tensor<T>*> out;
    for_each_layer([&out](Layer& l) {
      out.push_back(&l.w);
      out.push_back(&l.b);
    });
    return out;
  }

  std::vector<std::pair<std::string, Tensor<T>*>> named_parameters() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    for_each_layer([&out](Layer& l) {
      out.emplace_back(l.name + ".w", &l.w);
      out.emplace_back(l.name + ".b", &l.b);
    });
    return out;
  }

  void ensure_grads() {
    for (Tensor<T>* p : parameters()) p->ensure_grad();
  }
  void zero_grads() {
    for (Tensor<T>* p : parameters()) p->zero_grad();
  }

  // Forward pass over an N x H x W x C batch; fills `trace` when training.
  Tensor<T> forward(const Tensor<T>& input, Trace* trace = nullptr) const {
    if (input.rank() != 4 || input.dim(3) != spec_.input_channels)
      throw ShapeError("network input must be NxHxWx" +
                       std::to_string(spec_.input_channels) + ", got " +
                       shape_to_string(input.shape));
    if (trace) trace->input = input;

    Tensor<T> current;
    if (spec_.architecture == Architecture::kFlatNet) {
      std::vector<Tensor<T>> a2;
      std::vector<const Tensor<T>*> parts;
      a2.reserve(5);
      for (int br = 0; br < 5; ++br) {
        Tensor<T> a = run_layer(branches1_[static_cast<std::size_t>(br)], input);
        if (trace) trace->branch1.push_back(a);
        a2.push_back(run_layer(branches2_[static_cast<std::size_t>(br)], a));
      }
      for (const auto& a : a2) parts.push_back(&a);
      current = concat_channels(parts);
      if (trace) {
        trace->branch2 = std::move(a2);
        trace->concat = current;
      }
    } else {
      current = input;
    }

    for (const Layer& layer : trunk_) {
      current = run_layer(layer, current);
      if (trace) trace->trunk.push_back(current);
    }
    return current;
  }

  // Accumulates parameter gradients for d(loss)/d(output) = upstream.
  // The gradient w.r.t. the network input is never materialized.
  void backward(const Trace& trace, const Tensor<T>& upstream) {
    ensure_grads();
    Tensor<T> g = upstream;
    for (std::size_t i = trunk_.size(); i-- > 0;) {
      Layer& layer = trunk_[i];
      const Tensor<T>& out = trace.trunk[i];
      // post-activation stands in for pre-activation in both cases:
      // relu keeps sign, tanh backward wants the output anyway
      g = layer.act == Layer::Act::kTanh ? tanh_backward(g, out)
                                         : relu_backward(g, out);
      const Tensor<T>* layer_in;
      bool need_input = true;
      if (i > 0) {
        layer_in = &trace.trunk[i - 1];
      } else if (spec_.architecture == Architecture::kFlatNet) {
        layer_in = &trace.concat;
      } else {
        layer_in = &trace.input;
        need_input = false;
      }
      auto grads = conv2d_backward(g, *layer_in, layer.w, layer.spec, need_input);
      accumulate(layer, grads);
      if (need_input) g = std::move(grads.input);
    }
    if (spec_.architecture != Architecture::kFlatNet) return;

    std::vector<int> widths(5, spec_.branch_width);
    std::vector<Tensor<T>> split = concat_channels_backward(g, widths);
    for (int br = 0; br < 5; ++br) {
      Layer& l2 = branches2_[static_cast<std::size_t>(br)];
      Layer& l1 = branches1_[static_cast<std::size_t>(br)];
      Tensor<T> gb = relu_backward(split[static_cast<std::size_t>(br)],
                                   trace.branch2[static_cast<std::size_t>(br)]);
      auto g2 = conv2d_backward(gb, trace.branch1[static_cast<std::size_t>(br)],
                                l2.w, l2.spec, true);
      accumulate(l2, g2);
      gb = relu_backward(g2.input, trace.branch1[static_cast<std::size_t>(br)]);
      auto g1 = conv2d_backward(gb, trace.input, l1.w, l1.spec, false);
      accumulate(l1, g1);
    }
  }

  template <typename Fn>
  void for_each_layer(Fn&& fn) {
    for (auto& l : branches1_) fn(l);
    for (auto& l : branches2_) fn(l);
    for (auto& l : trunk_) fn(l);
  }
  template <typename Fn>
  void for_each_layer(Fn&& fn) const {
    for (const auto& l : branches1_) fn(l);
    for (const auto& l : branches2_) fn(l);
    for (const auto& l : trunk_) fn(l);
  }

 private:
  Layer make_layer(std::string name, int kernel, int dilation, int cin,
                   int cout, typename Layer::Act act) {
    Layer l;
    l.name = std::move(name);
    l.spec = ConvSpec{kernel, kernel, dilation, cin, cout};
    l.w = Tensor<T>({kernel, kernel, cin, cout});
    l.b = Tensor<T>({cout});
    l.act = act;
    return l;
  }

  // Fan-in variance-scaling uniform init for weights and biases. Nonzero
  // biases keep units off the exact ReLU kink, where a finite-difference
  // probe and the subgradient would legitimately disagree. Draw order is
  // fixed by layer order, so a seed pins every parameter.
  void initialize(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0xf17a7));
    for_each_layer([&rng](Layer& l) {
      const double fan_in = static_cast<double>(l.spec.kernel_h) *
                            l.spec.kernel_w * l.spec.in_channels;
      const double limit = std::sqrt(3.0 / fan_in);
      for (auto& v : l.w.data) v = static_cast<T>(rng.uniform(-limit, limit));
      const double bias_limit = 1.0 / std::sqrt(fan_in);
      for (auto& v : l.b.data)
        v = static_cast<T>(rng.uniform(-bias_limit, bias_limit));
    });
  }

  Tensor<T> run_layer(const Layer& layer, const Tensor<T>& input) const {
    Tensor<T> out = conv2d(input, layer.w, layer.b, layer.spec);
    if (out.dim(1) != input.dim(1) || out.dim(2) != input.dim(2))
      throw ShapeError("layer " + layer.name + " changed the spatial size");
    return layer.act == Layer::Act::kTanh ? tanh_op(out) : relu(out);
  }

  void accumulate(Layer& layer, const ConvGrads<T>& grads) {
    for (std::size_t i = 0; i < layer.w.grad.size(); ++i)
      layer.w.grad[i] += grads.weights.data[i];
    for (std::size_t i = 0; i < layer.b.grad.size(); ++i)
      layer.b.grad[i] += grads.bias.data[i];
  }

  NetworkSpec spec_;
  std::vector<Layer> branches1_;
  std::vector<Layer> branches2_;
  std::vector<Layer> trunk_;
};

}  // namespace vtlm
