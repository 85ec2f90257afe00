#pragma once

// Activity-diagram IR: start/final nodes, activities, decisions, fork/join
// bars and object flows, plus the logical-level verifier.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gridflow/error.hpp"
#include "gridflow/quantities.hpp"
#include "gridflow/resources.hpp"

namespace gridflow {

enum class NodeKind { Start, Final, Activity, Decision, Fork, Join };
std::string_view node_kind_name(NodeKind k) noexcept;

// The three swimlane variants: program and actuator pinned by the designer,
// only the program pinned, or everything chosen by discovery.
enum class BindingVariant { PinnedBoth, PinnedProgram, Free };
std::string_view binding_variant_name(BindingVariant v) noexcept;

struct Binding {
  BindingVariant variant = BindingVariant::Free;
  std::optional<std::string> program;
  std::optional<std::string> actuator;
  std::set<std::string> capabilities;
  friend bool operator==(const Binding&, const Binding&) = default;
};

enum class CompareOp { Lt, Le, Eq, Ne, Ge, Gt };
std::string_view compare_op_symbol(CompareOp op) noexcept;
std::optional<CompareOp> parse_compare_op(std::string_view text) noexcept;

struct Guard {
  std::string observable;
  CompareOp op = CompareOp::Eq;
  double literal = 0.0;
  Unit unit = units::dimensionless();

  // Converts `value` to the literal's unit, then compares. Throws
  // GuardEvaluationError on a non-scalar or dimension mismatch.
  bool holds(const Observable& value) const;
  std::string str() const;
  friend bool operator==(const Guard&, const Guard&) = default;
};

struct Branch {
  std::optional<Guard> guard;  // nullopt: the else branch
  std::string target;
  friend bool operator==(const Branch&, const Branch&) = default;
};

struct Node {
  std::string id;
  NodeKind kind = NodeKind::Activity;
  // Activity only.
  Binding binding;
  ParamMap params;
  std::vector<std::string> outputs;
  std::vector<std::string> cites;
  // Decision only: guarded branches in evaluation order, else last.
  std::vector<Branch> branches;

  friend bool operator==(const Node&, const Node&) = default;
};

Node make_start(std::string id = "start");
Node make_final(std::string id = "end");
Node make_activity(std::string id, Binding binding, ParamMap params = {});
Node make_fork(std::string id);
Node make_join(std::string id);
Node make_decision(std::string id, std::vector<Branch> branches);

struct ControlEdge {
  std::string from;
  std::string to;
  friend bool operator==(const ControlEdge&, const ControlEdge&) = default;
  friend auto operator<=>(const ControlEdge&, const ControlEdge&) = default;
};

struct ObjectFlow {
  std::string producer;
  std::string consumer;
  ExtractionSpec spec;
  friend bool operator==(const ObjectFlow&, const ObjectFlow&) = default;
};

enum class ViolationKind {
  TwoStarts,
  NoStart,
  NoFinal,
  DuplicateNode,
  DanglingEdge,
  BadDegree,
  BadBinding,
  BadDecision,
  DanglingObjectFlow,
};
std::string_view violation_kind_name(ViolationKind k) noexcept;

struct Violation {
  ViolationKind kind;
  std::string subject;
  std::string str() const;
};

class StructuralError : public Error {
 public:
  explicit StructuralError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const noexcept { return violations_; }
  bool has(ViolationKind k) const;

 private:
  std::vector<Violation> violations_;
};

class WorkflowGraph {
 public:
  const std::string& name() const noexcept { return name_; }
  const std::map<std::string, Node>& nodes() const noexcept { return nodes_; }
  const std::set<ControlEdge>& edges() const noexcept { return edges_; }
  const std::vector<ObjectFlow>& object_flows() const noexcept { return flows_; }
  const std::vector<std::string>& source_refs() const noexcept { return source_refs_; }

  const Node& node(const std::string& id) const;
  const std::string& start_id() const noexcept { return start_; }
  // Sorted by id.
  const std::vector<std::string>& successors(const std::string& id) const;
  const std::vector<std::string>& predecessors(const std::string& id) const;
  std::vector<std::string> activity_ids() const;
  std::size_t decision_count() const;

  friend bool operator==(const WorkflowGraph& a, const WorkflowGraph& b) {
    return a.name_ == b.name_ && a.nodes_ == b.nodes_ && a.edges_ == b.edges_ && a.flows_ == b.flows_ &&
           a.source_refs_ == b.source_refs_;
  }

 private:
  friend WorkflowGraph build_graph(std::string, std::vector<Node>, std::vector<ControlEdge>,
                                   std::vector<ObjectFlow>, std::vector<std::string>);
  std::string name_;
  std::string start_;
  std::map<std::string, Node> nodes_;
  std::set<ControlEdge> edges_;
  std::vector<ObjectFlow> flows_;
  std::vector<std::string> source_refs_;
  std::map<std::string, std::vector<std::string>> succ_;
  std::map<std::string, std::vector<std::string>> pred_;
};

// Decision branch edges are implied by the branches and may be omitted from
// `edges`. Throws StructuralError listing every violation.
WorkflowGraph build_graph(std::string name, std::vector<Node> nodes, std::vector<ControlEdge> edges,
                          std::vector<ObjectFlow> object_flows, std::vector<std::string> source_refs = {});

// Edges closing a cycle in a depth-first walk from Start (successors in id
// order, then from unvisited nodes in id order).
std::set<ControlEdge> back_edges(const WorkflowGraph& g);
// All nodes, topologically sorted on the graph without back edges; ties by id.
std::vector<std::string> topological_order(const WorkflowGraph& g);

std::vector<std::pair<std::string, BindingRequirement>> binding_requirements(const WorkflowGraph& g);

// ---------------------------------------------------------------------------
// Verification

enum class FindingKind {
  Unreachable,
  NoTermination,
  JoinDeadlock,
  UnbalancedForkJoin,
  UnboundObjectFlow,
  UnguardedCycle,
};
std::string_view finding_kind_name(FindingKind k) noexcept;

struct Finding {
  FindingKind kind;
  std::string subject;
  std::string detail;
  friend bool operator==(const Finding& a, const Finding& b) {
    return a.kind == b.kind && a.subject == b.subject;
  }
  friend auto operator<=>(const Finding& a, const Finding& b) {
    if (auto c = a.kind <=> b.kind; c != 0) return c;
    return a.subject <=> b.subject;
  }
};

struct VerifyOptions {
  std::size_t max_decisions = 12;
  std::size_t max_states = 200000;
  int max_iterations = 100;
  int token_cap = 4;  // tokens on one edge beyond this count as unbounded
};

struct VerificationReport {
  std::vector<Finding> findings;  // sorted, deduplicated
  bool structural_only = false;
  std::size_t states_explored = 0;

  bool sound() const noexcept { return findings.empty(); }
  bool has(FindingKind k) const;
};

VerificationReport verify(const WorkflowGraph& g, const VerifyOptions& options = {});

}  // namespace gridflow
