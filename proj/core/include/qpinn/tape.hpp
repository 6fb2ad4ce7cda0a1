#pragma once

// Flat, lane-batched evaluator for a frozen subgraph.
//
// A Tape linearizes the nodes reachable from a set of roots into slots and
// evaluates them for several input points ("lanes") at once. The reverse pass
// accumulates d(sum_k seed_k * root_k)/d(variable) over all lanes. A Tape is
// immutable after construction; concurrent evaluation needs one Workspace per
// thread.

#include <cstdint>
#include <span>
#include <vector>

#include "qpinn/exprgraph.hpp"

namespace qpinn::expr {

class Tape {
 public:
  class Workspace {
   public:
    Workspace() = default;

   private:
    friend class Tape;
    std::vector<double> values;
    std::vector<double> adjoints;
    std::vector<double> custom_grads;
    std::vector<double> args;
    std::size_t lanes = 0;
    bool have_custom_grads = false;
  };

  /// With `enable_reverse`, custom primitives lacking a numeric gradient get
  /// their partial graphs built (and added to `graph`) now, so evaluation
  /// never mutates the graph.
  Tape(Graph& graph, std::vector<Node> roots, bool enable_reverse = true);

  [[nodiscard]] std::size_t num_slots() const { return instrs_.size(); }
  [[nodiscard]] std::size_t num_roots() const { return root_slots_.size(); }
  [[nodiscard]] std::size_t num_custom() const { return customs_.size(); }
  /// Free variables referenced by the roots, ascending.
  [[nodiscard]] const std::vector<VarId>& variables() const { return variables_; }

  /// Evaluates all slots for `lanes` points. `shared` holds one value per
  /// VarId (at least graph.num_variables() at construction); for each var in
  /// `lane_vars` the value for lane l is lane_values[l * lane_vars.size() + j].
  /// Throws NumericalError naming the first non-finite node.
  void forward(Workspace& ws, std::span<const double> shared,
               std::span<const VarId> lane_vars, std::span<const double> lane_values,
               std::size_t lanes, bool keep_gradients = false) const;

  [[nodiscard]] double value(const Workspace& ws, std::size_t root, std::size_t lane) const;

  /// Seeds are root-major: seeds[root * lanes + lane]. Adds the lane-summed
  /// variable adjoints into `var_grad` (indexed by VarId).
  void reverse(Workspace& ws, std::span<const double> seeds, std::span<double> var_grad) const;

 private:
  struct Instr {
    Op op;
    int exponent;
    std::uint32_t a;
    std::uint32_t b;
    std::uint32_t custom;
    double constant;
    VarId var;
  };
  struct CustomCall {
    PrimitiveRef primitive;
    std::vector<std::uint32_t> arg_slots;
    std::vector<std::uint32_t> partial_slots;  // empty when numeric gradient used
    std::size_t grad_offset = 0;               // into Workspace::custom_grads, per lane
  };

  const Graph* graph_;
  bool reverse_enabled_;
  std::size_t num_graph_vars_;
  std::vector<Instr> instrs_;
  std::vector<NodeId> slot_node_;
  std::vector<std::uint32_t> root_slots_;
  std::vector<CustomCall> customs_;
  std::size_t custom_grad_width_ = 0;
  std::vector<VarId> variables_;
};

}  // namespace qpinn::expr
