#include <algorithm>

#include "gridflow/dsl.hpp"

namespace gridflow {

namespace {

using Kind = PlanExpr::Kind;

const std::string kExit = "\x01exit";

PlanExpr seq(std::vector<PlanExpr> items) {
  PlanExpr p;
  p.kind = Kind::Seq;
  p.children = std::move(items);
  return p;
}

PlanExpr collapse(PlanExpr p) {
  if (p.kind == Kind::Seq && p.children.size() == 1) return std::move(p.children.front());
  return p;
}

[[noreturn]] void not_sp(const std::string& why) { throw Error(ErrorCode::NotSeriesParallel, why); }

class PlanBuilder {
 public:
  PlanBuilder(const WorkflowGraph& g, int max_iterations)
      : g_(g), max_iterations_(max_iterations), back_(back_edges(g)) {
    for (const auto& e : back_) {
      if (g_.node(e.from).kind != NodeKind::Decision) not_sp("cycle through " + e.from + " has no decision");
      if (g_.node(e.to).kind != NodeKind::Activity) not_sp("loop entry " + e.to + " is not an activity");
      if (!loop_of_head_.emplace(e.to, e.from).second) not_sp("several back edges into " + e.to);
      if (!loop_decisions_.insert(e.from).second) not_sp("decision " + e.from + " closes several loops");
    }
    compute_postdominators();
  }

  PlanExpr run() {
    auto [body, end] = walk(g_.successors(g_.start_id()).front(), kExit);
    if (g_.node(end).kind != NodeKind::Final) not_sp("walk from start stopped at " + end);
    for (const auto& id : g_.activity_ids())
      if (!visited_.contains(id)) not_sp("activity " + id + " is not on a structured path");
    return body;
  }

 private:

  std::vector<std::string> forward_succ(const std::string& u) const {
    std::vector<std::string> out;
    for (const auto& w : g_.successors(u))
      if (!back_.contains({u, w})) out.push_back(w);
    return out;
  }
  std::vector<std::string> forward_pred(const std::string& u) const {
    std::vector<std::string> out;
    for (const auto& p : g_.predecessors(u))
      if (!back_.contains({p, u})) out.push_back(p);
    return out;
  }

  // Post-dominator sets over the forward graph, every Final feeding a
  // virtual exit node.
  void compute_postdominators() {
    std::vector<std::string> all;
    for (const auto& [id, n] : g_.nodes()) all.push_back(id);
    all.push_back(kExit);
    const std::set<std::string> universe(all.begin(), all.end());
    for (const auto& id : all) pdom_[id] = universe;
    pdom_[kExit] = {kExit};
    auto order = topological_order(g_);
    std::reverse(order.begin(), order.end());
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& u : order) {
        std::vector<std::string> succ = forward_succ(u);
        if (g_.node(u).kind == NodeKind::Final) succ = {kExit};
        std::set<std::string> meet;
        bool first = true;
        for (const auto& s : succ) {
          if (first) {
            meet = pdom_[s];
            first = false;
          } else {
            std::set<std::string> tmp;
            std::set_intersection(meet.begin(), meet.end(), pdom_[s].begin(), pdom_[s].end(),
                                  std::inserter(tmp, tmp.end()));
            meet = std::move(tmp);
          }
        }
        if (first) meet.clear();
        meet.insert(u);
        if (meet != pdom_[u]) {
          pdom_[u] = std::move(meet);
          changed = true;
        }
      }
    }
  }

  std::string immediate_postdominator(const std::string& u) const {
    const auto& strict = pdom_.at(u);
    for (const auto& c : strict) {
      if (c == u) continue;
      bool immediate = true;
      for (const auto& other : strict)
        if (other != u && other != c && !pdom_.at(c).contains(other)) immediate = false;
      if (immediate) return c;
    }
    return kExit;
  }

  // Walks a sequence from `u` until `stop`, an unclaimed Join or a Final.
  // Returns the plan and the node the walk stopped at.
  std::pair<PlanExpr, std::string> walk(std::string u, const std::string& stop) {
    std::vector<PlanExpr> items;
    while (u != stop) {
      const Node& n = g_.node(u);
      if (n.kind == NodeKind::Final || n.kind == NodeKind::Join) return {seq(std::move(items)), u};
      if (n.kind == NodeKind::Activity && loop_of_head_.contains(u) && !open_loops_.contains(u)) {
        items.push_back(loop(u));
        u = next_after_loop_;
        continue;
      }
      switch (n.kind) {
        case NodeKind::Start:
          u = g_.successors(u).front();
          break;
        case NodeKind::Activity: {
          if (!visited_.insert(u).second) not_sp("activity " + u + " is reached along two structures");
          PlanExpr r;
          r.kind = Kind::Run;
          r.id = u;
          items.push_back(std::move(r));
          u = g_.successors(u).front();
          break;
        }
        case NodeKind::Fork: {
          PlanExpr par;
          par.kind = Kind::ParMap;
          std::string join;
          for (const auto& s : g_.successors(u)) {
            auto [branch, end] = walk(s, stop);
            if (g_.node(end).kind != NodeKind::Join) not_sp("branch " + s + " of fork " + u + " ends at " + end);
            if (join.empty()) join = end;
            else if (join != end) not_sp("fork " + u + " branches end at joins " + join + " and " + end);
            par.children.push_back(collapse(std::move(branch)));
          }
          if (forward_pred(join).size() != par.children.size())
            not_sp("join " + join + " does not match fork " + u);
          if (!claimed_joins_.insert(join).second) not_sp("join " + join + " closes two forks");
          par.id = join;
          items.push_back(std::move(par));
          u = g_.successors(join).front();
          break;
        }
        case NodeKind::Decision: {
          if (loop_decisions_.contains(u)) not_sp("loop decision " + u + " outside its loop");
          const std::string merge = immediate_postdominator(u);
          PlanExpr choice;
          choice.kind = Kind::Choice;
          choice.id = u;
          for (const auto& b : n.branches) {
            auto [branch, end] = walk(b.target, merge);
            if (end != merge && !(merge == kExit && g_.node(end).kind == NodeKind::Final))
              not_sp("branch " + b.target + " of decision " + u + " stops at " + end);
            choice.children.push_back(collapse(std::move(branch)));
            choice.guards.push_back(b.guard);
          }
          items.push_back(std::move(choice));
          if (merge == kExit) return {seq(std::move(items)), last_final_};
          u = merge;
          break;
        }
        default:
          not_sp("unexpected node " + u);
      }
      if (g_.node(u).kind == NodeKind::Final) last_final_ = u;
    }
    return {seq(std::move(items)), u};
  }

  PlanExpr loop(const std::string& head) {
    const std::string decision = loop_of_head_.at(head);
    const Node& d = g_.node(decision);
    if (d.branches.size() != 2) not_sp("loop decision " + decision + " must have two branches");
    open_loops_.insert(head);
    auto [body, end] = walk(head, decision);
    open_loops_.erase(head);
    if (end != decision) not_sp("loop body from " + head + " stops at " + end);
    PlanExpr l;
    l.kind = Kind::Loop;
    l.id = decision;
    l.max_iterations = max_iterations_;
    l.children.push_back(collapse(std::move(body)));
    for (std::size_t i = 0; i < d.branches.size(); ++i) {
      l.guards.push_back(d.branches[i].guard);
      if (d.branches[i].target == head) l.back_branch = i;
    }
    next_after_loop_ = d.branches[1 - l.back_branch].target;
    if (g_.node(next_after_loop_).kind == NodeKind::Final) last_final_ = next_after_loop_;
    return l;
  }

  const WorkflowGraph& g_;
  int max_iterations_;
  std::set<ControlEdge> back_;
  std::map<std::string, std::string> loop_of_head_;
  std::set<std::string> loop_decisions_;
  std::map<std::string, std::set<std::string>> pdom_;
  std::set<std::string> visited_;
  std::set<std::string> claimed_joins_;
  std::set<std::string> open_loops_;
  std::string next_after_loop_;
  std::string last_final_;
};

void print(const PlanExpr& p, std::string& out) {
  auto list = [&](const std::vector<PlanExpr>& xs) {
    out += "[";
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (i) out += ", ";
      print(xs[i], out);
    }
    out += "]";
  };
  switch (p.kind) {
    case Kind::Run: out += "run " + p.id; break;
    case Kind::Seq:
      out += "seq ";
      list(p.children);
      break;
    case Kind::ParMap:
      out += "reduceJoin " + p.id + " (parMap ";
      list(p.children);
      out += ")";
      break;
    case Kind::Choice:
      out += "choice " + p.id + " [";
      for (std::size_t i = 0; i < p.children.size(); ++i) {
        if (i) out += " | ";
        out += p.guards[i] ? "when " + p.guards[i]->str() : std::string("else");
        out += " -> ";
        print(p.children[i], out);
      }
      out += "]";
      break;
    case Kind::Loop:
      out += "loop " + p.id + " " + std::to_string(p.max_iterations) + " (";
      print(p.children.front(), out);
      out += ") repeatOn ";
      out += p.guards[p.back_branch] ? "(" + p.guards[p.back_branch]->str() + ")" : std::string("else");
      break;
  }
}

class Interpreter {
 public:
  explicit Interpreter(const OutcomeScript& script) : script_(script) {}

  void run(const PlanExpr& p) {
    switch (p.kind) {
      case Kind::Run: trace.push_back(p.id); break;
      case Kind::Seq:
      case Kind::ParMap:
        for (const auto& c : p.children) run(c);
        break;
      case Kind::Choice: run(p.children.at(pick(p))); break;
      case Kind::Loop: {
        int traversals = 0;
        for (;;) {
          run(p.children.front());
          if (pick(p) != p.back_branch) break;
          if (traversals == p.max_iterations) throw Error(ErrorCode::IterationLimit, p.id);
          ++traversals;
        }
        break;
      }
    }
  }

  std::vector<std::string> trace;

 private:
  std::size_t pick(const PlanExpr& p) {
    const std::size_t k = script_.choose(p.id, visits_[p.id]++);
    if (k >= p.guards.size())
      throw Error(ErrorCode::InvalidValue, "outcome " + std::to_string(k) + " out of range for " + p.id);
    return k;
  }

  const OutcomeScript& script_;
  std::map<std::string, std::size_t> visits_;
};

}  // namespace

PlanExpr to_functional_plan(const WorkflowGraph& g, int max_iterations) {
  return PlanBuilder(g, max_iterations).run();
}

std::string plan_to_string(const PlanExpr& plan) {
  std::string out;
  print(plan, out);
  return out;
}

std::size_t OutcomeScript::choose(const std::string& decision, std::size_t visit) const {
  auto it = outcomes.find(decision);
  if (it == outcomes.end() || it->second.empty()) return 0;
  return visit < it->second.size() ? it->second[visit] : it->second.back();
}

std::vector<std::string> interpret_plan(const PlanExpr& plan, const OutcomeScript& script) {
  Interpreter in(script);
  in.run(plan);
  return std::move(in.trace);
}

}  // namespace gridflow
