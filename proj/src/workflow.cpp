#include "gridflow/workflow.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <queue>

namespace gridflow {

std::string_view node_kind_name(NodeKind k) noexcept {
  switch (k) {
    case NodeKind::Start: return "start";
    case NodeKind::Final: return "final";
    case NodeKind::Activity: return "activity";
    case NodeKind::Decision: return "decision";
    case NodeKind::Fork: return "fork";
    case NodeKind::Join: return "join";
  }
  return "?";
}

std::string_view binding_variant_name(BindingVariant v) noexcept {
  switch (v) {
    case BindingVariant::PinnedBoth: return "pinned-both";
    case BindingVariant::PinnedProgram: return "pinned-program";
    case BindingVariant::Free: return "free";
  }
  return "?";
}

std::string_view compare_op_symbol(CompareOp op) noexcept {
  switch (op) {
    case CompareOp::Lt: return "<";
    case CompareOp::Le: return "<=";
    case CompareOp::Eq: return "==";
    case CompareOp::Ne: return "!=";
    case CompareOp::Ge: return ">=";
    case CompareOp::Gt: return ">";
  }
  return "?";
}

std::optional<CompareOp> parse_compare_op(std::string_view t) noexcept {
  if (t == "<") return CompareOp::Lt;
  if (t == "<=") return CompareOp::Le;
  if (t == "==") return CompareOp::Eq;
  if (t == "!=") return CompareOp::Ne;
  if (t == ">=") return CompareOp::Ge;
  if (t == ">") return CompareOp::Gt;
  return std::nullopt;
}

bool Guard::holds(const Observable& value) const {
  if (value.kind() != ObservableKind::Scalar)
    throw Error(ErrorCode::GuardEvaluationError, observable + " is not a scalar");
  if (!value.unit().convertible_to(unit))
    throw Error(ErrorCode::GuardEvaluationError,
                observable + ": " + value.unit().name + " is not comparable with " + unit.name);
  const double lhs = value.with_unit(unit).as_scalar();
  switch (op) {
    case CompareOp::Lt: return lhs < literal;
    case CompareOp::Le: return lhs <= literal;
    case CompareOp::Eq: return lhs == literal;
    case CompareOp::Ne: return lhs != literal;
    case CompareOp::Ge: return lhs >= literal;
    case CompareOp::Gt: return lhs > literal;
  }
  return false;
}

std::string Guard::str() const {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, literal);
  std::string out = observable + " " + std::string(compare_op_symbol(op)) + " " + std::string(buf, res.ptr);
  if (unit != units::dimensionless()) out += " " + unit.name;
  return out;
}

Node make_start(std::string id) {
  Node n;
  n.id = std::move(id);
  n.kind = NodeKind::Start;
  return n;
}

Node make_final(std::string id) {
  Node n;
  n.id = std::move(id);
  n.kind = NodeKind::Final;
  return n;
}

Node make_activity(std::string id, Binding binding, ParamMap params) {
  Node n;
  n.id = std::move(id);
  n.kind = NodeKind::Activity;
  n.binding = std::move(binding);
  n.params = std::move(params);
  return n;
}

Node make_fork(std::string id) {
  Node n;
  n.id = std::move(id);
  n.kind = NodeKind::Fork;
  return n;
}

Node make_join(std::string id) {
  Node n;
  n.id = std::move(id);
  n.kind = NodeKind::Join;
  return n;
}

Node make_decision(std::string id, std::vector<Branch> branches) {
  Node n;
  n.id = std::move(id);
  n.kind = NodeKind::Decision;
  n.branches = std::move(branches);
  return n;
}

std::string_view violation_kind_name(ViolationKind k) noexcept {
  switch (k) {
    case ViolationKind::TwoStarts: return "TwoStarts";
    case ViolationKind::NoStart: return "NoStart";
    case ViolationKind::NoFinal: return "NoFinal";
    case ViolationKind::DuplicateNode: return "DuplicateNode";
    case ViolationKind::DanglingEdge: return "DanglingEdge";
    case ViolationKind::BadDegree: return "BadDegree";
    case ViolationKind::BadBinding: return "BadBinding";
    case ViolationKind::BadDecision: return "BadDecision";
    case ViolationKind::DanglingObjectFlow: return "DanglingObjectFlow";
  }
  return "?";
}

std::string Violation::str() const {
  return std::string(violation_kind_name(kind)) + (subject.empty() ? "" : "(" + subject + ")");
}

namespace {
std::string join_violations(const std::vector<Violation>& vs) {
  std::string out;
  for (const auto& v : vs) out += (out.empty() ? "" : ", ") + v.str();
  return out;
}
}  // namespace

StructuralError::StructuralError(std::vector<Violation> violations)
    : Error(ErrorCode::StructuralError, join_violations(violations)), violations_(std::move(violations)) {}

bool StructuralError::has(ViolationKind k) const {
  return std::any_of(violations_.begin(), violations_.end(), [&](const Violation& v) { return v.kind == k; });
}

const Node& WorkflowGraph::node(const std::string& id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw Error(ErrorCode::InvalidValue, "no node '" + id + "'");
  return it->second;
}

const std::vector<std::string>& WorkflowGraph::successors(const std::string& id) const {
  static const std::vector<std::string> none;
  auto it = succ_.find(id);
  return it == succ_.end() ? none : it->second;
}

const std::vector<std::string>& WorkflowGraph::predecessors(const std::string& id) const {
  static const std::vector<std::string> none;
  auto it = pred_.find(id);
  return it == pred_.end() ? none : it->second;
}

std::vector<std::string> WorkflowGraph::activity_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, n] : nodes_)
    if (n.kind == NodeKind::Activity) out.push_back(id);
  return out;
}

std::size_t WorkflowGraph::decision_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const auto& kv) {
    return kv.second.kind == NodeKind::Decision;
  }));
}

WorkflowGraph build_graph(std::string name, std::vector<Node> nodes, std::vector<ControlEdge> edges,
                          std::vector<ObjectFlow> object_flows, std::vector<std::string> source_refs) {
  std::vector<Violation> v;
  WorkflowGraph g;
  g.name_ = std::move(name);
  g.source_refs_ = std::move(source_refs);

  std::vector<std::string> starts;
  bool any_final = false;
  for (auto& n : nodes) {
    if (n.kind == NodeKind::Start) starts.push_back(n.id);
    if (n.kind == NodeKind::Final) any_final = true;
    std::string id = n.id;
    if (!g.nodes_.emplace(id, std::move(n)).second) v.push_back({ViolationKind::DuplicateNode, id});
  }
  if (starts.empty()) v.push_back({ViolationKind::NoStart, ""});
  if (starts.size() > 1) {
    std::string s;
    for (const auto& id : starts) s += (s.empty() ? "" : ",") + id;
    v.push_back({ViolationKind::TwoStarts, s});
  }
  if (!any_final) v.push_back({ViolationKind::NoFinal, ""});
  if (!starts.empty()) g.start_ = starts.front();

  for (const auto& [id, n] : g.nodes_)
    if (n.kind == NodeKind::Decision)
      for (const auto& b : n.branches) edges.push_back({id, b.target});

  for (auto& e : edges) {
    if (!g.nodes_.contains(e.from) || !g.nodes_.contains(e.to)) {
      v.push_back({ViolationKind::DanglingEdge, e.from + "->" + e.to});
      continue;
    }
    g.edges_.insert(std::move(e));
  }
  for (const auto& e : g.edges_) {
    g.succ_[e.from].push_back(e.to);
    g.pred_[e.to].push_back(e.from);
  }

  for (const auto& [id, n] : g.nodes_) {
    const std::size_t in = g.predecessors(id).size();
    const std::size_t out = g.successors(id).size();
    bool ok = true;
    switch (n.kind) {
      case NodeKind::Start: ok = in == 0 && out == 1; break;
      case NodeKind::Final: ok = in >= 1 && out == 0; break;
      case NodeKind::Activity: ok = in >= 1 && out == 1; break;
      case NodeKind::Decision: ok = in == 1 && out >= 2; break;
      case NodeKind::Fork: ok = in == 1 && out >= 2; break;
      case NodeKind::Join: ok = in >= 2 && out == 1; break;
    }
    if (!ok)
      v.push_back({ViolationKind::BadDegree, id + " (" + std::string(node_kind_name(n.kind)) + ", in " +
                                                 std::to_string(in) + ", out " + std::to_string(out) + ")"});
    if (n.kind == NodeKind::Activity) {
      const auto& b = n.binding;
      bool bound = true;
      switch (b.variant) {
        case BindingVariant::PinnedBoth: bound = b.program && b.actuator; break;
        case BindingVariant::PinnedProgram: bound = b.program && !b.actuator; break;
        case BindingVariant::Free: bound = !b.program && !b.actuator && !b.capabilities.empty(); break;
      }
      if (!bound) v.push_back({ViolationKind::BadBinding, id});
    }
    if (n.kind == NodeKind::Decision) {
      std::size_t elses = 0;
      std::set<std::string> targets;
      bool dup = false;
      for (const auto& b : n.branches) {
        if (!b.guard) ++elses;
        dup |= !targets.insert(b.target).second;
      }
      const bool else_last = !n.branches.empty() && !n.branches.back().guard;
      const auto& succ = g.successors(id);
      if (elses != 1 || !else_last || n.branches.size() < 2 || dup ||
          std::set<std::string>(succ.begin(), succ.end()) != targets)
        v.push_back({ViolationKind::BadDecision, id});
    }
  }

  for (const auto& f : object_flows) {
    auto p = g.nodes_.find(f.producer);
    auto c = g.nodes_.find(f.consumer);
    if (p == g.nodes_.end() || c == g.nodes_.end() || p->second.kind != NodeKind::Activity ||
        c->second.kind != NodeKind::Activity)
      v.push_back({ViolationKind::DanglingObjectFlow, f.producer + "->" + f.consumer});
  }
  // Per consumer, flows keep declaration order: it is the input slot order.
  std::stable_sort(object_flows.begin(), object_flows.end(),
                   [](const ObjectFlow& a, const ObjectFlow& b) { return a.consumer < b.consumer; });
  g.flows_ = std::move(object_flows);

  if (!v.empty()) throw StructuralError(std::move(v));
  return g;
}

std::set<ControlEdge> back_edges(const WorkflowGraph& g) {
  std::set<ControlEdge> out;
  std::map<std::string, int> color;  // 0 white, 1 on stack, 2 done
  std::function<void(const std::string&)> dfs = [&](const std::string& u) {
    color[u] = 1;
    for (const auto& w : g.successors(u)) {
      if (color[w] == 1) out.insert({u, w});
      else if (color[w] == 0) dfs(w);
    }
    color[u] = 2;
  };
  if (!g.start_id().empty()) dfs(g.start_id());
  for (const auto& [id, n] : g.nodes())
    if (color[id] == 0) dfs(id);
  return out;
}

std::vector<std::string> topological_order(const WorkflowGraph& g) {
  const auto back = back_edges(g);
  std::map<std::string, int> indegree;
  for (const auto& [id, n] : g.nodes()) indegree[id] = 0;
  for (const auto& e : g.edges())
    if (!back.contains(e)) ++indegree[e.to];
  std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
  for (const auto& [id, d] : indegree)
    if (d == 0) ready.push(id);
  std::vector<std::string> order;
  while (!ready.empty()) {
    std::string u = ready.top();
    ready.pop();
    order.push_back(u);
    for (const auto& w : g.successors(u))
      if (!back.contains({u, w}) && --indegree[w] == 0) ready.push(w);
  }
  return order;
}

std::vector<std::pair<std::string, BindingRequirement>> binding_requirements(const WorkflowGraph& g) {
  std::vector<std::pair<std::string, BindingRequirement>> out;
  for (const auto& id : topological_order(g)) {
    const Node& n = g.node(id);
    if (n.kind != NodeKind::Activity) continue;
    BindingRequirement r;
    r.capabilities = n.binding.capabilities;
    if (n.binding.variant != BindingVariant::Free) r.program = n.binding.program;
    if (n.binding.variant == BindingVariant::PinnedBoth) r.actuator = n.binding.actuator;
    out.emplace_back(id, std::move(r));
  }
  return out;
}

}  // namespace gridflow
