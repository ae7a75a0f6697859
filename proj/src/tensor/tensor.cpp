/*
 * Copyright 2026 The accup Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "accup/tensor.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "accup/error.hpp"

namespace accup {

const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConformance:
      return "conformance";
    case ErrorKind::kNumericDomain:
      return "numeric-domain";
    case ErrorKind::kConfig:
      return "config";
    case ErrorKind::kContract:
      return "contract";
    case ErrorKind::kFormat:
      return "format";
    case ErrorKind::kDataShape:
      return "data-shape";
    case ErrorKind::kLabelRange:
      return "label-range";
    case ErrorKind::kIo:
      return "io";
  }
  return "unknown";
}

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until the first accumulation
  bool requires_grad = false;
  bool is_leaf = true;
};

}  // namespace detail

struct TensorAccess {
  static detail::TensorNode& node(const Tensor& t) { return *t.node_; }
  static Tensor Make(Shape shape, std::vector<double> values) {
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    return Tensor(std::move(node));
  }
};

namespace {

thread_local Graph* g_active_graph = nullptr;

}  // namespace

std::size_t ShapeNumel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream out;
  out << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ",";
    out << shape[i];
  }
  out << ")";
  return out.str();
}

Tensor::Tensor() = default;

Tensor::Tensor(std::shared_ptr<detail::TensorNode> node)
    : node_(std::move(node)) {}

Tensor Tensor::Zeros(Shape shape) { return Full(std::move(shape), 0.0); }

Tensor Tensor::Full(Shape shape, double value) {
  const std::size_t n = ShapeNumel(shape);
  return TensorAccess::Make(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::FromVector(Shape shape, std::vector<double> values) {
  if (ShapeNumel(shape) != values.size()) {
    Fail(ErrorKind::kConformance,
         "tensor shape " + ShapeToString(shape) + " holds " +
             std::to_string(ShapeNumel(shape)) + " values, got " +
             std::to_string(values.size()));
  }
  CheckFinite("from_vector", values);
  return TensorAccess::Make(std::move(shape), std::move(values));
}

Tensor Tensor::Scalar(double value) { return FromVector({}, {value}); }

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  Require(axis < node_->shape.size(), ErrorKind::kConformance,
          "axis " + std::to_string(axis) + " out of range for shape " +
              ShapeToString(node_->shape));
  return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->values.size(); }

std::span<const double> Tensor::values() const { return node_->values; }

double Tensor::item() const {
  Require(numel() == 1, ErrorKind::kContract,
          "item() needs a one-element tensor, got shape " +
              ShapeToString(shape()));
  return node_->values[0];
}

std::span<double> Tensor::mutable_values() {
  Require(node_->is_leaf, ErrorKind::kContract,
          "only leaf tensors may be mutated");
  return node_->values;
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  Require(node_->is_leaf, ErrorKind::kContract,
          "requires_grad can only be set on leaf tensors");
  node_->requires_grad = flag;
}

bool Tensor::is_leaf() const { return node_->is_leaf; }

std::span<const double> Tensor::grad() const {
  if (node_->grad.empty()) node_->grad.assign(node_->values.size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.assign(node_->values.size(), 0.0); }

Tensor Tensor::Clone() const {
  return TensorAccess::Make(node_->shape, node_->values);
}

void Graph::Record(GraphNode node) { nodes_.push_back(std::move(node)); }

GraphScope::GraphScope(Graph& graph) : previous_(g_active_graph) {
  g_active_graph = &graph;
}

GraphScope::~GraphScope() { g_active_graph = previous_; }

Graph* ActiveGraph() { return g_active_graph; }

std::span<double> GradBuffer(const Tensor& t) {
  auto& node = TensorAccess::node(t);
  if (node.grad.empty()) node.grad.assign(node.values.size(), 0.0);
  return node.grad;
}

void AccumulateGrad(const Tensor& t, std::span<const double> contribution) {
  if (!t.requires_grad()) return;
  auto grad = GradBuffer(t);
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += contribution[i];
}

void CheckFinite(const char* op, std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      Fail(ErrorKind::kNumericDomain,
           std::string(op) + " produced a non-finite value at index " +
               std::to_string(i));
    }
  }
}

Tensor MakeResult(const char* op, Shape shape, std::vector<double> values,
                  std::vector<Tensor> inputs,
                  std::function<void(const Tensor& out)> backward) {
  CheckFinite(op, values);
  Tensor out = TensorAccess::Make(std::move(shape), std::move(values));
  Graph* graph = g_active_graph;
  if (graph == nullptr) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;

  auto& node = TensorAccess::node(out);
  node.requires_grad = true;
  node.is_leaf = false;
  GraphNode record;
  record.op = op;
  record.output = out;
  record.inputs = std::move(inputs);
  record.backward = std::move(backward);
  graph->Record(std::move(record));
  return out;
}

void Backward(const Tensor& loss, Graph& graph) {
  if (loss.numel() != 1) {
    Fail(ErrorKind::kContract, "backward needs a scalar loss, got shape " +
                                   ShapeToString(loss.shape()));
  }
  if (!loss.requires_grad()) {
    graph.Clear();
    return;
  }
  GradBuffer(loss)[0] += 1.0;
  for (auto it = graph.nodes_.rbegin(); it != graph.nodes_.rend(); ++it) {
    auto& out_node = TensorAccess::node(it->output);
    if (out_node.grad.empty()) continue;  // no path to the loss
    it->backward(it->output);
  }
  graph.Clear();
}

}  // namespace accup
