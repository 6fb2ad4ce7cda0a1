#include "qpinn/exprgraph.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "qpinn/tape.hpp"

namespace qpinn::expr {

namespace {

std::size_t mix(std::size_t seed, std::size_t value) {
  return seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

bool is_commutative(Op op) { return op == Op::Add || op == Op::Mul; }

class FunctionPrimitive final : public Primitive {
 public:
  FunctionPrimitive(std::string name, std::size_t arity, ValueFn value,
                    PartialRule partial)
      : name_(std::move(name)),
        arity_(arity),
        value_(std::move(value)),
        partial_(std::move(partial)) {}

  std::string name() const override { return name_; }
  std::size_t arity() const override { return arity_; }
  double value(std::span<const double> args) const override { return value_(args); }
  Node partial(std::size_t index, std::span<const Node> children) const override {
    return partial_(index, children);
  }

 private:
  std::string name_;
  std::size_t arity_;
  ValueFn value_;
  PartialRule partial_;
};

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Constant: return "const";
    case Op::Variable: return "var";
    case Op::Add: return "add";
    case Op::Mul: return "mul";
    case Op::Neg: return "neg";
    case Op::Recip: return "recip";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Tanh: return "tanh";
    case Op::Exp: return "exp";
    case Op::PowInt: return "pow";
    case Op::Custom: return "custom";
  }
  return "?";
}

Op Node::op() const { return graph_->op(id_); }

double Primitive::value_and_gradient(std::span<const double>, std::span<double>) const {
  throw std::logic_error("primitive '" + name() + "' has no numeric gradient");
}

std::size_t Primitive::hash() const { return std::hash<const void*>{}(this); }

bool Primitive::equals(const Primitive& other) const { return this == &other; }

PrimitiveRef register_primitive(std::string name, std::size_t arity, ValueFn value,
                                PartialRule partial) {
  if (!value || !partial) {
    throw std::invalid_argument("register_primitive: value and partial rule are required");
  }
  return std::make_shared<FunctionPrimitive>(std::move(name), arity, std::move(value),
                                             std::move(partial));
}

bool Graph::Key::operator==(const Key& other) const {
  if (op != other.op || exponent != other.exponent || bits != other.bits ||
      children != other.children) {
    return false;
  }
  if (primitive == other.primitive) return true;
  if (primitive == nullptr || other.primitive == nullptr) return false;
  return primitive->equals(*other.primitive);
}

std::size_t Graph::KeyHash::operator()(const Key& key) const {
  std::size_t h = static_cast<std::size_t>(key.op);
  h = mix(h, static_cast<std::size_t>(key.exponent));
  h = mix(h, key.bits);
  if (key.primitive != nullptr) h = mix(h, key.primitive->hash());
  for (NodeId c : key.children) h = mix(h, c);
  return h;
}

Graph::Graph() { nodes_.reserve(1024); }

void Graph::check_owner(Node n) const {
  if (n.graph() != this) {
    throw std::invalid_argument("node belongs to a different graph");
  }
}

Node Graph::intern(Key key, const PrimitiveRef* primitive) {
  if (is_commutative(key.op)) std::sort(key.children.begin(), key.children.end());
  if (auto it = table_.find(key); it != table_.end()) return Node(this, it->second);

  NodeData data;
  data.op = key.op;
  data.exponent = key.exponent;
  if (key.op == Op::Constant) data.constant = std::bit_cast<double>(key.bits);
  if (key.op == Op::Variable) data.var = static_cast<VarId>(key.bits);
  data.first_child = static_cast<std::uint32_t>(child_pool_.size());
  data.num_children = static_cast<std::uint32_t>(key.children.size());
  child_pool_.insert(child_pool_.end(), key.children.begin(), key.children.end());
  if (primitive != nullptr) {
    data.primitive = static_cast<std::uint32_t>(primitives_.size());
    primitives_.push_back(*primitive);
  }
  const auto id = static_cast<NodeId>(nodes_.size());
  nodes_.push_back(data);
  table_.emplace(std::move(key), id);
  return Node(this, id);
}

Node Graph::constant(double value) {
  return intern(Key{Op::Constant, 0, std::bit_cast<std::uint64_t>(value), nullptr, {}},
                nullptr);
}

Node Graph::variable(const std::string& name) {
  if (var_lookup_.contains(name)) {
    throw std::invalid_argument("variable '" + name + "' already exists");
  }
  const auto id = static_cast<VarId>(var_names_.size());
  var_names_.push_back(name);
  var_lookup_.emplace(name, id);
  Node n = intern(Key{Op::Variable, 0, id, nullptr, {}}, nullptr);
  var_nodes_.push_back(n.id());
  return n;
}

Node Graph::variable(VarId id) const {
  if (id >= var_nodes_.size()) throw std::out_of_range("unknown variable id");
  return Node(const_cast<Graph*>(this), var_nodes_[id]);
}

Node Graph::find_variable(const std::string& name) const {
  auto it = var_lookup_.find(name);
  if (it == var_lookup_.end()) throw std::out_of_range("unknown variable '" + name + "'");
  return variable(it->second);
}

bool Graph::is_constant(Node n, double value) const {
  check_owner(n);
  const auto& d = nodes_[n.id()];
  return d.op == Op::Constant && d.constant == value;
}

std::span<const NodeId> Graph::children(NodeId id) const {
  const auto& d = nodes_[id];
  return {child_pool_.data() + d.first_child, d.num_children};
}

const PrimitiveRef& Graph::primitive(NodeId id) const {
  if (nodes_[id].op != Op::Custom) throw std::invalid_argument("node is not a custom primitive");
  return primitives_[nodes_[id].primitive];
}

Node Graph::add(Node a, Node b) {
  check_owner(a);
  check_owner(b);
  if (is_zero(a)) return b;
  if (is_zero(b)) return a;
  if (op(a.id()) == Op::Constant && op(b.id()) == Op::Constant) {
    return constant(constant_value(a.id()) + constant_value(b.id()));
  }
  return intern(Key{Op::Add, 0, 0, nullptr, {a.id(), b.id()}}, nullptr);
}

Node Graph::mul(Node a, Node b) {
  check_owner(a);
  check_owner(b);
  if (is_zero(a) || is_zero(b)) return zero();
  if (is_constant(a, 1.0)) return b;
  if (is_constant(b, 1.0)) return a;
  if (op(a.id()) == Op::Constant && op(b.id()) == Op::Constant) {
    return constant(constant_value(a.id()) * constant_value(b.id()));
  }
  if (is_constant(a, -1.0)) return neg(b);
  if (is_constant(b, -1.0)) return neg(a);
  return intern(Key{Op::Mul, 0, 0, nullptr, {a.id(), b.id()}}, nullptr);
}

Node Graph::neg(Node a) {
  check_owner(a);
  if (op(a.id()) == Op::Constant) return constant(-constant_value(a.id()));
  if (op(a.id()) == Op::Neg) return Node(this, children(a.id())[0]);
  return intern(Key{Op::Neg, 0, 0, nullptr, {a.id()}}, nullptr);
}

namespace {
// Folds a unary op on a constant when the result stays finite.
bool fold_unary(Op op, double x, double& out) {
  switch (op) {
    case Op::Recip: out = 1.0 / x; break;
    case Op::Sin: out = std::sin(x); break;
    case Op::Cos: out = std::cos(x); break;
    case Op::Tanh: out = std::tanh(x); break;
    case Op::Exp: out = std::exp(x); break;
    default: return false;
  }
  return std::isfinite(out);
}
}  // namespace

Node Graph::recip(Node a) {
  check_owner(a);
  double folded = 0.0;
  if (op(a.id()) == Op::Constant && fold_unary(Op::Recip, constant_value(a.id()), folded)) {
    return constant(folded);
  }
  return intern(Key{Op::Recip, 0, 0, nullptr, {a.id()}}, nullptr);
}

Node Graph::sin(Node a) {
  check_owner(a);
  double folded = 0.0;
  if (op(a.id()) == Op::Constant && fold_unary(Op::Sin, constant_value(a.id()), folded)) {
    return constant(folded);
  }
  return intern(Key{Op::Sin, 0, 0, nullptr, {a.id()}}, nullptr);
}

Node Graph::cos(Node a) {
  check_owner(a);
  double folded = 0.0;
  if (op(a.id()) == Op::Constant && fold_unary(Op::Cos, constant_value(a.id()), folded)) {
    return constant(folded);
  }
  return intern(Key{Op::Cos, 0, 0, nullptr, {a.id()}}, nullptr);
}

Node Graph::tanh(Node a) {
  check_owner(a);
  double folded = 0.0;
  if (op(a.id()) == Op::Constant && fold_unary(Op::Tanh, constant_value(a.id()), folded)) {
    return constant(folded);
  }
  return intern(Key{Op::Tanh, 0, 0, nullptr, {a.id()}}, nullptr);
}

Node Graph::exp(Node a) {
  check_owner(a);
  double folded = 0.0;
  if (op(a.id()) == Op::Constant && fold_unary(Op::Exp, constant_value(a.id()), folded)) {
    return constant(folded);
  }
  return intern(Key{Op::Exp, 0, 0, nullptr, {a.id()}}, nullptr);
}

Node Graph::pow(Node a, int exponent) {
  check_owner(a);
  if (exponent == 0) return one();
  if (exponent == 1) return a;
  if (op(a.id()) == Op::Constant) {
    const double v = std::pow(constant_value(a.id()), exponent);
    if (std::isfinite(v)) return constant(v);
  }
  return intern(Key{Op::PowInt, exponent, 0, nullptr, {a.id()}}, nullptr);
}

Node Graph::call(const PrimitiveRef& primitive, std::span<const Node> children) {
  if (!primitive) throw std::invalid_argument("call: null primitive");
  if (children.size() != primitive->arity()) {
    throw std::invalid_argument("primitive '" + primitive->name() + "' expects " +
                                std::to_string(primitive->arity()) + " arguments, got " +
                                std::to_string(children.size()));
  }
  Key key{Op::Custom, 0, 0, primitive.get(), {}};
  key.children.reserve(children.size());
  for (Node c : children) {
    check_owner(c);
    key.children.push_back(c.id());
  }
  return intern(std::move(key), &primitive);
}

std::vector<NodeId> Graph::reachable(std::span<const Node> roots) const {
  std::vector<std::uint8_t> seen(nodes_.size(), 0);
  std::vector<NodeId> stack;
  std::vector<NodeId> out;
  for (Node r : roots) {
    check_owner(r);
    if (!seen[r.id()]) {
      seen[r.id()] = 1;
      stack.push_back(r.id());
    }
  }
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    out.push_back(id);
    for (NodeId c : children(id)) {
      if (!seen[c]) {
        seen[c] = 1;
        stack.push_back(c);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Node Graph::substitute(Node root, const std::unordered_map<VarId, Node>& replacement) {
  check_owner(root);
  const auto order = reachable(std::span(&root, 1));
  std::unordered_map<NodeId, Node> mapped;
  mapped.reserve(order.size());
  std::vector<Node> args;
  for (NodeId id : order) {
    const auto& d = nodes_[id];
    Node out;
    auto child = [&](std::size_t i) { return mapped.at(children(id)[i]); };
    switch (d.op) {
      case Op::Constant: out = Node(this, id); break;
      case Op::Variable: {
        auto it = replacement.find(d.var);
        out = it == replacement.end() ? Node(this, id) : it->second;
        break;
      }
      case Op::Add: out = add(child(0), child(1)); break;
      case Op::Mul: out = mul(child(0), child(1)); break;
      case Op::Neg: out = neg(child(0)); break;
      case Op::Recip: out = recip(child(0)); break;
      case Op::Sin: out = sin(child(0)); break;
      case Op::Cos: out = cos(child(0)); break;
      case Op::Tanh: out = tanh(child(0)); break;
      case Op::Exp: out = exp(child(0)); break;
      case Op::PowInt: out = pow(child(0), d.exponent); break;
      case Op::Custom: {
        args.clear();
        for (std::size_t i = 0; i < d.num_children; ++i) args.push_back(child(i));
        const PrimitiveRef prim = primitives_[d.primitive];
        out = call(prim, args);
        break;
      }
    }
    mapped.emplace(id, out);
  }
  return mapped.at(root.id());
}

std::string Graph::to_dot(std::span<const Node> roots) const {
  std::ostringstream os;
  os << "digraph expr {\n  rankdir=BT;\n";
  for (NodeId id : reachable(roots)) {
    const auto& d = nodes_[id];
    os << "  n" << id << " [label=\"";
    switch (d.op) {
      case Op::Constant: os << d.constant; break;
      case Op::Variable: os << var_names_[d.var]; break;
      case Op::PowInt: os << "pow " << d.exponent; break;
      case Op::Custom: os << primitives_[d.primitive]->name(); break;
      default: os << op_name(d.op); break;
    }
    os << "\"];\n";
    for (NodeId c : children(id)) os << "  n" << c << " -> n" << id << ";\n";
  }
  for (Node r : roots) os << "  n" << r.id() << " [shape=doublecircle];\n";
  os << "}\n";
  return os.str();
}

Node operator+(Node a, Node b) { return a.graph()->add(a, b); }
Node operator+(Node a, double b) { return a.graph()->add(a, a.graph()->constant(b)); }
Node operator+(double a, Node b) { return b.graph()->add(b.graph()->constant(a), b); }
Node operator-(Node a, Node b) { return a.graph()->add(a, a.graph()->neg(b)); }
Node operator-(Node a, double b) { return a.graph()->add(a, a.graph()->constant(-b)); }
Node operator-(double a, Node b) { return b.graph()->add(b.graph()->constant(a), b.graph()->neg(b)); }
Node operator-(Node a) { return a.graph()->neg(a); }
Node operator*(Node a, Node b) { return a.graph()->mul(a, b); }
Node operator*(Node a, double b) { return a.graph()->mul(a, a.graph()->constant(b)); }
Node operator*(double a, Node b) { return b.graph()->mul(b.graph()->constant(a), b); }
Node operator/(Node a, Node b) { return a.graph()->mul(a, a.graph()->recip(b)); }
Node operator/(Node a, double b) { return a.graph()->mul(a, a.graph()->constant(1.0 / b)); }
Node sin(Node a) { return a.graph()->sin(a); }
Node cos(Node a) { return a.graph()->cos(a); }
Node tanh(Node a) { return a.graph()->tanh(a); }
Node exp(Node a) { return a.graph()->exp(a); }
Node recip(Node a) { return a.graph()->recip(a); }
Node pow(Node a, int exponent) { return a.graph()->pow(a, exponent); }

void Bindings::set(Node variable, double value) {
  if (!variable.valid() || variable.op() != Op::Variable) {
    throw std::invalid_argument("Bindings::set: node is not a variable");
  }
  set(variable.graph()->variable_id(variable.id()), value);
}

void Bindings::set(VarId id, double value) {
  if (id >= values_.size()) {
    values_.resize(id + 1, 0.0);
    bound_.resize(id + 1, 0);
  }
  values_[id] = value;
  bound_[id] = 1;
}

bool Bindings::has(VarId id) const { return id < bound_.size() && bound_[id] != 0; }

double Bindings::get(VarId id) const {
  if (!has(id)) throw std::out_of_range("variable not bound");
  return values_[id];
}

std::vector<double> eval(std::span<const Node> nodes, const Bindings& bindings) {
  if (nodes.empty()) return {};
  Graph& g = *nodes.front().graph();
  Tape tape(g, std::vector<Node>(nodes.begin(), nodes.end()), /*enable_reverse=*/false);
  for (VarId v : tape.variables()) {
    if (!bindings.has(v)) {
      throw std::invalid_argument("unbound variable '" + g.variable_name(v) + "'");
    }
  }
  std::vector<double> shared(g.num_variables(), 0.0);
  auto values = bindings.values();
  std::copy_n(values.begin(), std::min(values.size(), shared.size()), shared.begin());
  Tape::Workspace ws;
  tape.forward(ws, shared, {}, {}, 1);
  std::vector<double> out(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) out[i] = tape.value(ws, i, 0);
  return out;
}

double eval(Node node, const Bindings& bindings) { return eval(std::span(&node, 1), bindings)[0]; }

namespace {

std::vector<std::uint8_t> dependency_mask(const Graph& g, const std::vector<NodeId>& order,
                                          const std::vector<std::uint8_t>& is_target) {
  std::vector<std::uint8_t> depends(g.size(), 0);
  for (NodeId id : order) {
    if (g.op(id) == Op::Variable) {
      depends[id] = is_target[g.variable_id(id)];
      continue;
    }
    for (NodeId c : g.children(id)) {
      if (depends[c]) {
        depends[id] = 1;
        break;
      }
    }
  }
  return depends;
}

// Local partial d(node)/d(child i) as a graph.
Node local_partial(Graph& g, NodeId id, std::size_t i) {
  const auto ch = g.children(id);
  Node self = g.node(id);
  auto child = [&](std::size_t k) { return g.node(ch[k]); };
  switch (g.op(id)) {
    case Op::Add: return g.one();
    case Op::Mul: return child(1 - i);
    case Op::Neg: return g.constant(-1.0);
    case Op::Recip: return g.neg(g.mul(self, self));
    case Op::Sin: return g.cos(child(0));
    case Op::Cos: return g.neg(g.sin(child(0)));
    case Op::Tanh: return g.add(g.one(), g.neg(g.mul(self, self)));
    case Op::Exp: return self;
    case Op::PowInt: {
      const int n = g.exponent(id);
      return g.mul(g.constant(n), g.pow(child(0), n - 1));
    }
    case Op::Custom: {
      std::vector<Node> args;
      args.reserve(ch.size());
      for (NodeId c : ch) args.push_back(g.node(c));
      const PrimitiveRef prim = g.primitive(id);
      return prim->partial(i, args);
    }
    default: break;
  }
  throw std::logic_error("local_partial: leaf node");
}

}  // namespace

Node differentiate(Node node, VarId wrt) {
  Graph& g = *node.graph();
  const auto order = g.reachable(std::span(&node, 1));
  std::vector<std::uint8_t> target(g.num_variables(), 0);
  if (wrt >= target.size()) throw std::out_of_range("differentiate: unknown variable");
  target[wrt] = 1;
  const auto depends = dependency_mask(g, order, target);

  std::vector<Node> d(g.size());
  Node zero = g.zero();
  for (NodeId id : order) {
    if (!depends[id]) {
      d[id] = zero;
      continue;
    }
    if (g.op(id) == Op::Variable) {
      d[id] = g.one();
      continue;
    }
    const auto ch = g.children(id);
    // Copy: local_partial may grow the child pool.
    const std::vector<NodeId> kids(ch.begin(), ch.end());
    Node acc = zero;
    for (std::size_t i = 0; i < kids.size(); ++i) {
      if (!depends[kids[i]]) continue;
      if (g.op(id) == Op::Mul && i == 1 && kids[0] == kids[1]) {
        // x*x: both slots handled in one term below
        continue;
      }
      Node term;
      if (g.op(id) == Op::Mul && kids[0] == kids[1]) {
        term = g.mul(g.mul(g.constant(2.0), g.node(kids[0])), d[kids[0]]);
      } else {
        term = g.mul(local_partial(g, id, i), d[kids[i]]);
      }
      acc = g.add(acc, term);
    }
    d[id] = acc;
  }
  return d[node.id()];
}

Node differentiate(Node node, Node wrt) {
  if (!wrt.valid() || wrt.op() != Op::Variable) {
    throw std::invalid_argument("differentiate: wrt must be a variable node");
  }
  if (wrt.graph() != node.graph()) throw std::invalid_argument("differentiate: graph mismatch");
  return differentiate(node, node.graph()->variable_id(wrt.id()));
}

std::vector<Node> gradient(Node node, std::span<const Node> wrt) {
  Graph& g = *node.graph();
  std::vector<std::uint8_t> target(g.num_variables(), 0);
  for (Node v : wrt) {
    if (!v.valid() || v.graph() != &g || v.op() != Op::Variable) {
      throw std::invalid_argument("gradient: wrt entries must be variables of the same graph");
    }
    target[g.variable_id(v.id())] = 1;
  }
  const auto order = g.reachable(std::span(&node, 1));
  const auto depends = dependency_mask(g, order, target);

  std::vector<Node> adjoint(g.size());
  adjoint[node.id()] = g.one();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const NodeId id = *it;
    if (!adjoint[id].valid() || !depends[id] || g.op(id) == Op::Variable) continue;
    const auto ch = g.children(id);
    const std::vector<NodeId> kids(ch.begin(), ch.end());
    const Node adj = adjoint[id];
    for (std::size_t i = 0; i < kids.size(); ++i) {
      if (!depends[kids[i]]) continue;
      Node contribution = g.mul(adj, local_partial(g, id, i));
      Node& slot = adjoint[kids[i]];
      slot = slot.valid() ? g.add(slot, contribution) : contribution;
    }
  }
  std::vector<Node> out;
  out.reserve(wrt.size());
  for (Node v : wrt) out.push_back(adjoint[v.id()].valid() ? adjoint[v.id()] : g.zero());
  return out;
}

}  // namespace qpinn::expr
