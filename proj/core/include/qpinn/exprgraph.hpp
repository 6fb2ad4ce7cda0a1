#pragma once

// Scalar computation graphs with graph-to-graph differentiation.
//
// Every node lives in a Graph arena and is addressed through a lightweight
// Node handle. Construction is hash-consed: building the same (op, children,
// payload) twice returns the same node, and trivial identities (x + 0, x * 0,
// x * 1, all-constant arithmetic) are folded on the spot. Derivatives are
// produced as new nodes of the same graph, so they can be differentiated
// again to any order.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace qpinn::expr {

using VarId = std::uint32_t;
using NodeId = std::uint32_t;

enum class Op : std::uint8_t {
  Constant,
  Variable,
  Add,
  Mul,
  Neg,
  Recip,
  Sin,
  Cos,
  Tanh,
  Exp,
  PowInt,
  Custom,
};

std::string_view op_name(Op op);

class Graph;

class Node {
 public:
  Node() = default;

  [[nodiscard]] Graph* graph() const { return graph_; }
  [[nodiscard]] NodeId id() const { return id_; }
  [[nodiscard]] bool valid() const { return graph_ != nullptr; }
  [[nodiscard]] Op op() const;

  friend bool operator==(const Node&, const Node&) = default;

 private:
  friend class Graph;
  Node(Graph* graph, NodeId id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  NodeId id_ = 0;
};

/// A custom operation with a user-supplied value and partial-derivative rule.
///
/// The partial rule must return nodes of the graph the children live in;
/// nested differentiation works as long as those nodes are themselves
/// differentiable. Implementations may also provide a numeric gradient,
/// which the tape evaluator uses instead of evaluating the partial graphs.
class Primitive {
 public:
  virtual ~Primitive() = default;

  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual std::size_t arity() const = 0;
  [[nodiscard]] virtual double value(std::span<const double> args) const = 0;
  [[nodiscard]] virtual Node partial(std::size_t index,
                                     std::span<const Node> children) const = 0;

  /// Writes all partials into `grad` and returns the value. Only called when
  /// has_numeric_gradient() is true.
  virtual double value_and_gradient(std::span<const double> args,
                                    std::span<double> grad) const;
  [[nodiscard]] virtual bool has_numeric_gradient() const { return false; }

  /// Structural identity used by hash-consing. The default is object identity.
  [[nodiscard]] virtual std::size_t hash() const;
  [[nodiscard]] virtual bool equals(const Primitive& other) const;
};

using PrimitiveRef = std::shared_ptr<const Primitive>;
using ValueFn = std::function<double(std::span<const double>)>;
using PartialRule =
    std::function<Node(std::size_t index, std::span<const Node> children)>;

/// Wraps a value function and a partial rule into a primitive tag that can be
/// applied with Graph::call.
PrimitiveRef register_primitive(std::string name, std::size_t arity,
                                ValueFn value, PartialRule partial);

class Graph {
 public:
  Graph();
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = delete;
  Graph& operator=(Graph&&) = delete;

  Node constant(double value);
  Node zero() { return constant(0.0); }
  Node one() { return constant(1.0); }

  /// Creates a free variable. Names must be unique within the graph.
  Node variable(const std::string& name);
  [[nodiscard]] Node variable(VarId id) const;
  [[nodiscard]] Node find_variable(const std::string& name) const;

  Node add(Node a, Node b);
  Node mul(Node a, Node b);
  Node neg(Node a);
  Node recip(Node a);
  Node sin(Node a);
  Node cos(Node a);
  Node tanh(Node a);
  Node exp(Node a);
  Node pow(Node a, int exponent);
  Node call(const PrimitiveRef& primitive, std::span<const Node> children);

  /// Rebuilds `root` with variables replaced by the given nodes.
  Node substitute(Node root, const std::unordered_map<VarId, Node>& replacement);

  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  [[nodiscard]] std::size_t num_variables() const { return var_names_.size(); }

  [[nodiscard]] Op op(NodeId id) const { return nodes_[id].op; }
  [[nodiscard]] std::span<const NodeId> children(NodeId id) const;
  [[nodiscard]] double constant_value(NodeId id) const { return nodes_[id].constant; }
  [[nodiscard]] VarId variable_id(NodeId id) const { return nodes_[id].var; }
  [[nodiscard]] int exponent(NodeId id) const { return nodes_[id].exponent; }
  [[nodiscard]] const PrimitiveRef& primitive(NodeId id) const;
  [[nodiscard]] const std::string& variable_name(VarId id) const { return var_names_[id]; }

  [[nodiscard]] bool is_constant(Node n, double value) const;
  [[nodiscard]] bool is_zero(Node n) const { return is_constant(n, 0.0); }

  /// Node ids reachable from `roots`, ascending (a valid topological order).
  [[nodiscard]] std::vector<NodeId> reachable(std::span<const Node> roots) const;

  /// Graphviz DOT rendering of the subgraph reachable from `roots`.
  [[nodiscard]] std::string to_dot(std::span<const Node> roots) const;

  [[nodiscard]] Node node(NodeId id) { return Node(this, id); }

 private:
  struct NodeData {
    Op op = Op::Constant;
    int exponent = 0;
    double constant = 0.0;
    VarId var = 0;
    std::uint32_t first_child = 0;
    std::uint32_t num_children = 0;
    std::uint32_t primitive = 0;  // index into primitives_, Custom only
  };

  struct Key {
    Op op;
    int exponent;
    std::uint64_t bits;  // constant bits or variable id
    const Primitive* primitive;
    std::vector<NodeId> children;
    bool operator==(const Key& other) const;
  };
  struct KeyHash {
    std::size_t operator()(const Key& key) const;
  };

  void check_owner(Node n) const;
  Node intern(Key key, const PrimitiveRef* primitive);

  std::vector<NodeData> nodes_;
  std::vector<NodeId> child_pool_;
  std::vector<PrimitiveRef> primitives_;
  std::vector<std::string> var_names_;
  std::vector<NodeId> var_nodes_;
  std::unordered_map<std::string, VarId> var_lookup_;
  std::unordered_map<Key, NodeId, KeyHash> table_;
};

Node operator+(Node a, Node b);
Node operator+(Node a, double b);
Node operator+(double a, Node b);
Node operator-(Node a, Node b);
Node operator-(Node a, double b);
Node operator-(double a, Node b);
Node operator-(Node a);
Node operator*(Node a, Node b);
Node operator*(Node a, double b);
Node operator*(double a, Node b);
Node operator/(Node a, Node b);
Node operator/(Node a, double b);
Node sin(Node a);
Node cos(Node a);
Node tanh(Node a);
Node exp(Node a);
Node recip(Node a);
Node pow(Node a, int exponent);

/// Values for free variables, indexed by VarId.
class Bindings {
 public:
  Bindings() = default;
  void set(Node variable, double value);
  void set(VarId id, double value);
  [[nodiscard]] bool has(VarId id) const;
  [[nodiscard]] double get(VarId id) const;
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] std::span<const std::uint8_t> bound() const { return bound_; }

 private:
  std::vector<double> values_;
  std::vector<std::uint8_t> bound_;
};

/// Evaluates `node`. Throws on unbound variables or non-finite results.
double eval(Node node, const Bindings& bindings);
std::vector<double> eval(std::span<const Node> nodes, const Bindings& bindings);

/// d node / d wrt, as a graph.
Node differentiate(Node node, Node wrt);
Node differentiate(Node node, VarId wrt);

/// One derivative graph per variable, produced by a single reverse sweep.
std::vector<Node> gradient(Node node, std::span<const Node> wrt);

}  // namespace qpinn::expr
