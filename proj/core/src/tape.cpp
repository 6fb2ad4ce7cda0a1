#include "qpinn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "qpinn/errors.hpp"

namespace qpinn::expr {

Tape::Tape(Graph& graph, std::vector<Node> roots, bool enable_reverse)
    : graph_(&graph), reverse_enabled_(enable_reverse) {
  for (Node r : roots) {
    if (r.graph() != &graph) throw std::invalid_argument("Tape: root from another graph");
  }
  auto order = graph.reachable(roots);

  // Partial graphs for primitives that cannot differentiate numerically.
  std::unordered_map<NodeId, std::vector<Node>> partials;
  if (enable_reverse) {
    std::vector<Node> extra_roots = roots;
    for (NodeId id : order) {
      if (graph.op(id) != Op::Custom) continue;
      const PrimitiveRef prim = graph.primitive(id);
      if (prim->has_numeric_gradient()) continue;
      const auto ch = graph.children(id);
      std::vector<Node> args;
      for (NodeId c : ch) args.push_back(graph.node(c));
      std::vector<Node> ps;
      for (std::size_t i = 0; i < args.size(); ++i) ps.push_back(prim->partial(i, args));
      extra_roots.insert(extra_roots.end(), ps.begin(), ps.end());
      partials.emplace(id, std::move(ps));
    }
    if (!partials.empty()) order = graph.reachable(extra_roots);
  }
  num_graph_vars_ = graph.num_variables();

  std::unordered_map<NodeId, std::uint32_t> slot_of;
  slot_of.reserve(order.size());
  instrs_.reserve(order.size());
  slot_node_.reserve(order.size());
  for (NodeId id : order) {
    const auto slot = static_cast<std::uint32_t>(instrs_.size());
    slot_of.emplace(id, slot);
    Instr in{graph.op(id), graph.exponent(id), 0, 0, 0, 0.0, 0};
    const auto ch = graph.children(id);
    switch (in.op) {
      case Op::Constant: in.constant = graph.constant_value(id); break;
      case Op::Variable:
        in.var = graph.variable_id(id);
        variables_.push_back(in.var);
        break;
      case Op::Custom: {
        CustomCall call;
        call.primitive = graph.primitive(id);
        for (NodeId c : ch) call.arg_slots.push_back(slot_of.at(c));
        in.custom = static_cast<std::uint32_t>(customs_.size());
        customs_.push_back(std::move(call));
        break;
      }
      default:
        in.a = slot_of.at(ch[0]);
        if (ch.size() > 1) in.b = slot_of.at(ch[1]);
        break;
    }
    instrs_.push_back(in);
    slot_node_.push_back(id);
  }
  for (std::size_t s = 0; s < instrs_.size(); ++s) {
    if (instrs_[s].op != Op::Custom) continue;
    auto& call = customs_[instrs_[s].custom];
    if (auto it = partials.find(slot_node_[s]); it != partials.end()) {
      for (Node p : it->second) call.partial_slots.push_back(slot_of.at(p.id()));
    } else if (enable_reverse) {
      call.grad_offset = custom_grad_width_;
      custom_grad_width_ += call.arg_slots.size();
    }
  }
  for (Node r : roots) root_slots_.push_back(slot_of.at(r.id()));
  std::sort(variables_.begin(), variables_.end());
}

void Tape::forward(Workspace& ws, std::span<const double> shared,
                   std::span<const VarId> lane_vars, std::span<const double> lane_values,
                   std::size_t lanes, bool keep_gradients) const {
  if (lanes == 0) throw std::invalid_argument("Tape::forward: zero lanes");
  if (shared.size() < num_graph_vars_) {
    throw std::invalid_argument("Tape::forward: shared values too short");
  }
  if (lane_values.size() != lanes * lane_vars.size()) {
    throw std::invalid_argument("Tape::forward: lane values size mismatch");
  }
  keep_gradients = keep_gradients && reverse_enabled_;
  ws.lanes = lanes;
  ws.values.resize(instrs_.size() * lanes);
  ws.have_custom_grads = keep_gradients;
  if (keep_gradients) ws.custom_grads.resize(custom_grad_width_ * lanes);

  // Lane-variable lookup: index into lane_vars or -1.
  std::vector<int> lane_index(num_graph_vars_, -1);
  for (std::size_t j = 0; j < lane_vars.size(); ++j) {
    if (lane_vars[j] < lane_index.size()) lane_index[lane_vars[j]] = static_cast<int>(j);
  }
  const std::size_t k = lane_vars.size();
  double* v = ws.values.data();

  for (std::size_t s = 0; s < instrs_.size(); ++s) {
    const Instr& in = instrs_[s];
    double* out = v + s * lanes;
    const double* a = v + static_cast<std::size_t>(in.a) * lanes;
    const double* b = v + static_cast<std::size_t>(in.b) * lanes;
    switch (in.op) {
      case Op::Constant: std::fill_n(out, lanes, in.constant); break;
      case Op::Variable: {
        const int j = lane_index[in.var];
        if (j < 0) {
          std::fill_n(out, lanes, shared[in.var]);
        } else {
          for (std::size_t l = 0; l < lanes; ++l) out[l] = lane_values[l * k + j];
        }
        break;
      }
      case Op::Add: for (std::size_t l = 0; l < lanes; ++l) out[l] = a[l] + b[l]; break;
      case Op::Mul: for (std::size_t l = 0; l < lanes; ++l) out[l] = a[l] * b[l]; break;
      case Op::Neg: for (std::size_t l = 0; l < lanes; ++l) out[l] = -a[l]; break;
      case Op::Recip: for (std::size_t l = 0; l < lanes; ++l) out[l] = 1.0 / a[l]; break;
      case Op::Sin: for (std::size_t l = 0; l < lanes; ++l) out[l] = std::sin(a[l]); break;
      case Op::Cos: for (std::size_t l = 0; l < lanes; ++l) out[l] = std::cos(a[l]); break;
      case Op::Tanh: for (std::size_t l = 0; l < lanes; ++l) out[l] = std::tanh(a[l]); break;
      case Op::Exp: for (std::size_t l = 0; l < lanes; ++l) out[l] = std::exp(a[l]); break;
      case Op::PowInt:
        for (std::size_t l = 0; l < lanes; ++l) out[l] = std::pow(a[l], in.exponent);
        break;
      case Op::Custom: {
        const CustomCall& call = customs_[in.custom];
        const std::size_t arity = call.arg_slots.size();
        ws.args.resize(arity);
        const bool grad = keep_gradients && call.partial_slots.empty();
        for (std::size_t l = 0; l < lanes; ++l) {
          for (std::size_t i = 0; i < arity; ++i) ws.args[i] = v[call.arg_slots[i] * lanes + l];
          if (grad) {
            double* g = ws.custom_grads.data() + call.grad_offset * lanes + l * arity;
            out[l] = call.primitive->value_and_gradient(ws.args, std::span(g, arity));
          } else {
            out[l] = call.primitive->value(ws.args);
          }
        }
        break;
      }
    }
  }

  // x * 0 is NaN exactly for non-finite x; the sum is a cheap vectorizable probe
  double probe = 0.0;
  for (double v : ws.values) probe += v * 0.0;
  if (probe == 0.0) return;
  for (std::size_t i = 0; i < ws.values.size(); ++i) {
    if (!std::isfinite(ws.values[i])) {
      const std::size_t s = i / lanes;
      throw NumericalError("non-finite value " + std::to_string(ws.values[i]) + " at node " +
                           std::to_string(slot_node_[s]) + " (" +
                           std::string(op_name(instrs_[s].op)) + ")");
    }
  }
}

double Tape::value(const Workspace& ws, std::size_t root, std::size_t lane) const {
  return ws.values[static_cast<std::size_t>(root_slots_.at(root)) * ws.lanes + lane];
}

void Tape::reverse(Workspace& ws, std::span<const double> seeds, std::span<double> var_grad) const {
  if (!reverse_enabled_) throw std::logic_error("Tape::reverse: tape built without reverse mode");
  const std::size_t lanes = ws.lanes;
  if (seeds.size() != root_slots_.size() * lanes) {
    throw std::invalid_argument("Tape::reverse: seed size mismatch");
  }
  if (!customs_.empty() && custom_grad_width_ > 0 && !ws.have_custom_grads) {
    throw std::logic_error("Tape::reverse: forward pass did not keep primitive gradients");
  }
  ws.adjoints.assign(instrs_.size() * lanes, 0.0);
  double* adj = ws.adjoints.data();
  const double* v = ws.values.data();
  for (std::size_t r = 0; r < root_slots_.size(); ++r) {
    double* dst = adj + static_cast<std::size_t>(root_slots_[r]) * lanes;
    for (std::size_t l = 0; l < lanes; ++l) dst[l] += seeds[r * lanes + l];
  }

  for (std::size_t s = instrs_.size(); s-- > 0;) {
    const Instr& in = instrs_[s];
    const double* g = adj + s * lanes;
    if (in.op == Op::Constant) continue;
    bool any = false;
    for (std::size_t l = 0; l < lanes; ++l) {
      if (g[l] != 0.0) {
        any = true;
        break;
      }
    }
    if (!any) continue;
    const double* out = v + s * lanes;
    double* da = adj + static_cast<std::size_t>(in.a) * lanes;
    double* db = adj + static_cast<std::size_t>(in.b) * lanes;
    const double* a = v + static_cast<std::size_t>(in.a) * lanes;
    const double* b = v + static_cast<std::size_t>(in.b) * lanes;
    switch (in.op) {
      case Op::Constant: break;
      case Op::Variable: {
        if (in.var >= var_grad.size()) break;
        double sum = 0.0;
        for (std::size_t l = 0; l < lanes; ++l) sum += g[l];
        var_grad[in.var] += sum;
        break;
      }
      case Op::Add:
        for (std::size_t l = 0; l < lanes; ++l) da[l] += g[l];
        for (std::size_t l = 0; l < lanes; ++l) db[l] += g[l];
        break;
      case Op::Mul:
        for (std::size_t l = 0; l < lanes; ++l) da[l] += g[l] * b[l];
        for (std::size_t l = 0; l < lanes; ++l) db[l] += g[l] * a[l];
        break;
      case Op::Neg: for (std::size_t l = 0; l < lanes; ++l) da[l] -= g[l]; break;
      case Op::Recip:
        for (std::size_t l = 0; l < lanes; ++l) da[l] -= g[l] * out[l] * out[l];
        break;
      case Op::Sin: for (std::size_t l = 0; l < lanes; ++l) da[l] += g[l] * std::cos(a[l]); break;
      case Op::Cos: for (std::size_t l = 0; l < lanes; ++l) da[l] -= g[l] * std::sin(a[l]); break;
      case Op::Tanh:
        for (std::size_t l = 0; l < lanes; ++l) da[l] += g[l] * (1.0 - out[l] * out[l]);
        break;
      case Op::Exp: for (std::size_t l = 0; l < lanes; ++l) da[l] += g[l] * out[l]; break;
      case Op::PowInt:
        for (std::size_t l = 0; l < lanes; ++l) {
          da[l] += g[l] * in.exponent * std::pow(a[l], in.exponent - 1);
        }
        break;
      case Op::Custom: {
        const CustomCall& call = customs_[in.custom];
        const std::size_t arity = call.arg_slots.size();
        for (std::size_t i = 0; i < arity; ++i) {
          double* dst = adj + static_cast<std::size_t>(call.arg_slots[i]) * lanes;
          if (call.partial_slots.empty()) {
            const double* cg = ws.custom_grads.data() + call.grad_offset * lanes;
            for (std::size_t l = 0; l < lanes; ++l) dst[l] += g[l] * cg[l * arity + i];
          } else {
            const double* p = v + static_cast<std::size_t>(call.partial_slots[i]) * lanes;
            for (std::size_t l = 0; l < lanes; ++l) dst[l] += g[l] * p[l];
          }
        }
        break;
      }
    }
  }
}

}  // namespace qpinn::expr
