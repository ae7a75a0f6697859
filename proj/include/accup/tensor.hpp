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

// Dense double-precision tensors with tape-based reverse-mode
// differentiation.
//
// A Tensor is a shared handle: copying a Tensor aliases the same storage, use
// Clone() for an independent value. Values are immutable once an operation
// has produced them; only leaves (parameters) are mutated, and only by
// optimizers between graph lifetimes.
//
// Operations record themselves on the Graph that is active on the calling
// thread (see GraphScope) whenever at least one input requires a gradient.
// Without an active graph nothing is recorded and results are plain values.

#ifndef ACCUP_TENSOR_HPP_
#define ACCUP_TENSOR_HPP_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace accup {

using Shape = std::vector<std::size_t>;

std::size_t ShapeNumel(const Shape& shape);
std::string ShapeToString(const Shape& shape);

namespace detail {
struct TensorNode;
}  // namespace detail

class Tensor {
 public:
  Tensor();

  static Tensor Zeros(Shape shape);
  static Tensor Full(Shape shape, double value);
  static Tensor FromVector(Shape shape, std::vector<double> values);
  static Tensor Scalar(double value);

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  double operator[](std::size_t i) const { return values()[i]; }
  // Scalar value of a one-element tensor.
  double item() const;

  // Mutable view of a leaf's storage. Optimizers and initializers only; never
  // call while a graph referencing this tensor is alive.
  std::span<double> mutable_values();

  bool requires_grad() const;
  // Only valid on leaves.
  void set_requires_grad(bool flag);
  bool is_leaf() const;

  // Accumulated gradient; all zeros when nothing has flowed into it yet.
  std::span<const double> grad() const;
  void zero_grad();

  // Independent leaf copy of the values; never requires grad.
  Tensor Clone() const;
  Tensor Detach() const { return Clone(); }

  bool defined() const { return node_ != nullptr; }
  bool SameStorage(const Tensor& other) const { return node_ == other.node_; }

 private:
  friend struct TensorAccess;
  explicit Tensor(std::shared_ptr<detail::TensorNode> node);
  std::shared_ptr<detail::TensorNode> node_;
};

// One recorded primitive application.
struct GraphNode {
  const char* op = "";
  std::vector<Tensor> inputs;
  Tensor output;
  // Reads the output's grad() and accumulates into the inputs that require
  // grad.
  std::function<void(const Tensor& output)> backward;
};

// Tape of primitive applications in execution order, which is a valid
// topological order by construction. Single-threaded.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  void Record(GraphNode node);
  std::size_t size() const { return nodes_.size(); }
  const std::vector<GraphNode>& nodes() const { return nodes_; }
  void Clear() { nodes_.clear(); }

 private:
  friend void Backward(const Tensor& loss, Graph& graph);
  std::vector<GraphNode> nodes_;
};

// Makes `graph` the active graph of the current thread for the scope's
// lifetime; restores the previous one on exit.
class GraphScope {
 public:
  explicit GraphScope(Graph& graph);
  ~GraphScope();
  GraphScope(const GraphScope&) = delete;
  GraphScope& operator=(const GraphScope&) = delete;

 private:
  Graph* previous_;
};

Graph* ActiveGraph();

// Propagates d(loss)/d(leaf) into every requires-grad leaf reachable on the
// graph, then clears the graph. `loss` must hold exactly one element.
void Backward(const Tensor& loss, Graph& graph);

// Accumulates `contribution` into t's gradient buffer (allocating it on first
// use). No-op when t does not require grad. Used by primitive backward passes.
void AccumulateGrad(const Tensor& t, std::span<const double> contribution);
// Mutable gradient buffer for primitive backward passes; allocates zeros.
std::span<double> GradBuffer(const Tensor& t);

// Creates the output tensor of a primitive and, when an active graph exists
// and any input requires grad, records `backward` on it.
Tensor MakeResult(const char* op, Shape shape, std::vector<double> values,
                  std::vector<Tensor> inputs,
                  std::function<void(const Tensor& out)> backward);

// Throws ErrorKind::kNumericDomain when any value is NaN or infinite.
void CheckFinite(const char* op, std::span<const double> values);

}  // namespace accup

#endif  // ACCUP_TENSOR_HPP_
