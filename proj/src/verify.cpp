#include <algorithm>
#include <deque>
#include <functional>
#include <unordered_map>

#include "gridflow/workflow.hpp"

namespace gridflow {

std::string_view finding_kind_name(FindingKind k) noexcept {
  switch (k) {
    case FindingKind::Unreachable: return "Unreachable";
    case FindingKind::NoTermination: return "NoTermination";
    case FindingKind::JoinDeadlock: return "JoinDeadlock";
    case FindingKind::UnbalancedForkJoin: return "UnbalancedForkJoin";
    case FindingKind::UnboundObjectFlow: return "UnboundObjectFlow";
    case FindingKind::UnguardedCycle: return "UnguardedCycle";
  }
  return "?";
}

bool VerificationReport::has(FindingKind k) const {
  return std::any_of(findings.begin(), findings.end(), [&](const Finding& f) { return f.kind == k; });
}

namespace {

std::set<std::string> forward_reach(const WorkflowGraph& g, const std::vector<std::string>& from) {
  std::set<std::string> seen(from.begin(), from.end());
  std::deque<std::string> q(from.begin(), from.end());
  while (!q.empty()) {
    auto u = q.front();
    q.pop_front();
    for (const auto& w : g.successors(u))
      if (seen.insert(w).second) q.push_back(w);
  }
  return seen;
}

std::set<std::string> backward_reach(const WorkflowGraph& g, const std::vector<std::string>& from) {
  std::set<std::string> seen(from.begin(), from.end());
  std::deque<std::string> q(from.begin(), from.end());
  while (!q.empty()) {
    auto u = q.front();
    q.pop_front();
    for (const auto& w : g.predecessors(u))
      if (seen.insert(w).second) q.push_back(w);
  }
  return seen;
}

// Cycles that avoid every Decision node, one finding per strongly connected
// component of the decision-free subgraph.
void unguarded_cycles(const WorkflowGraph& g, std::set<Finding>& out) {
  std::map<std::string, int> index, low;
  std::set<std::string> on_stack;
  std::vector<std::string> stack;
  int counter = 0;
  auto usable = [&](const std::string& id) { return g.node(id).kind != NodeKind::Decision; };

  std::function<void(const std::string&)> strong = [&](const std::string& v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack.insert(v);
    for (const auto& w : g.successors(v)) {
      if (!usable(w)) continue;
      if (!index.contains(w)) {
        strong(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack.contains(w)) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] != index[v]) return;
    std::vector<std::string> comp;
    std::string w;
    do {
      w = stack.back();
      stack.pop_back();
      on_stack.erase(w);
      comp.push_back(w);
    } while (w != v);
    const bool self_loop = comp.size() == 1 && g.edges().contains({comp[0], comp[0]});
    if (comp.size() > 1 || self_loop) {
      std::sort(comp.begin(), comp.end());
      std::string members;
      for (const auto& c : comp) members += (members.empty() ? "" : ",") + c;
      out.insert({FindingKind::UnguardedCycle, comp.front(), "cycle without decision through " + members});
    }
  };
  for (const auto& [id, n] : g.nodes())
    if (usable(id) && !index.contains(id)) strong(id);
}

std::map<std::string, std::set<std::string>> dominators(const WorkflowGraph& g, const std::set<std::string>& reach) {
  std::map<std::string, std::set<std::string>> dom;
  for (const auto& n : reach) dom[n] = n == g.start_id() ? std::set<std::string>{n} : reach;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& n : reach) {
      if (n == g.start_id()) continue;
      std::optional<std::set<std::string>> acc;
      for (const auto& p : g.predecessors(n)) {
        if (!reach.contains(p)) continue;
        if (!acc) {
          acc = dom[p];
        } else {
          std::set<std::string> meet;
          std::set_intersection(acc->begin(), acc->end(), dom[p].begin(), dom[p].end(),
                                std::inserter(meet, meet.end()));
          acc = std::move(meet);
        }
      }
      std::set<std::string> next = acc.value_or(std::set<std::string>{});
      next.insert(n);
      if (next != dom[n]) {
        dom[n] = std::move(next);
        changed = true;
      }
    }
  }
  return dom;
}

// The nearest dominating split of a join: a decision means its inputs sit on
// mutually exclusive branches; a fork of different arity means the join
// mixes branches of several splits.
void structural_join_rules(const WorkflowGraph& g, const std::set<std::string>& reach, bool arity,
                           std::set<Finding>& out) {
  auto dom = dominators(g, reach);
  for (const auto& [id, n] : g.nodes()) {
    if (n.kind != NodeKind::Join || !reach.contains(id)) continue;
    // Immediate dominator: the strict dominator dominated by all others.
    std::string idom;
    for (const auto& d : dom[id]) {
      if (d == id) continue;
      if (idom.empty() || dom[d].contains(idom)) idom = d;
    }
    if (idom.empty()) continue;
    const Node& split = g.node(idom);
    if (split.kind == NodeKind::Decision) {
      out.insert({FindingKind::JoinDeadlock, id, "inputs split by decision " + idom});
    } else if (arity && split.kind == NodeKind::Fork &&
               g.successors(idom).size() != g.predecessors(id).size()) {
      out.insert({FindingKind::UnbalancedForkJoin, id, "fork " + idom + " arity differs from join arity"});
    }
  }
}

// Exhaustive token game over the reachability graph of markings.
class TokenGame {
 public:
  TokenGame(const WorkflowGraph& g, const VerifyOptions& opt) : g_(g), opt_(opt) {
    for (const auto& e : g.edges()) {
      index_[e] = edges_.size();
      edges_.push_back(e);
    }
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      out_[edges_[i].from].push_back(i);
      in_[edges_[i].to].push_back(i);
    }
  }

  // False when the state budget ran out.
  bool run(std::set<Finding>& findings) {
    using Marking = std::string;
    Marking init(edges_.size(), '\0');
    for (auto i : out_[g_.start_id()]) init[i] = 1;

    std::unordered_map<Marking, std::size_t> ids;
    std::vector<Marking> states;
    std::vector<std::vector<std::size_t>> preds;
    std::vector<char> terminates, dead;
    std::map<std::size_t, std::vector<std::string>> enabled_join;
    auto intern = [&](const Marking& m) -> std::pair<std::size_t, bool> {
      auto [it, fresh] = ids.emplace(m, states.size());
      if (fresh) {
        states.push_back(m);
        preds.emplace_back();
        terminates.push_back(0);
        dead.push_back(0);
      }
      return {it->second, fresh};
    };

    std::deque<std::size_t> queue{intern(init).first};
    while (!queue.empty()) {
      if (states.size() > opt_.max_states) return false;
      const std::size_t s = queue.front();
      queue.pop_front();
      const Marking m = states[s];
      bool any = false;
      auto emit = [&](Marking next) {
        any = true;
        for (std::size_t i = 0; i < next.size(); ++i)
          if (next[i] > opt_.token_cap) {
            // Saturate: the edge holds "arbitrarily many" tokens from here on.
            if (next[i] != omega_)
              findings.insert({FindingKind::UnbalancedForkJoin, edges_[i].from,
                               "unbounded tokens on " + edges_[i].from + "->" + edges_[i].to});
            next[i] = omega_;
          }
        auto [t, fresh] = intern(next);
        preds[t].push_back(s);
        if (fresh) queue.push_back(t);
      };
      auto take = [&](Marking& x, std::size_t e) {
        if (x[e] != omega_) --x[e];
      };

      for (const auto& [id, n] : g_.nodes()) {
        const auto& ins = in_[id];
        const auto& outs = out_[id];
        switch (n.kind) {
          case NodeKind::Start: break;
          case NodeKind::Activity:
          case NodeKind::Fork:
            for (auto e : ins) {
              if (!m[e]) continue;
              Marking next = m;
              take(next, e);
              for (auto o : outs) ++next[o];
              emit(std::move(next));
            }
            break;
          case NodeKind::Decision:
            for (auto e : ins) {
              if (!m[e]) continue;
              for (auto o : outs) {
                Marking next = m;
                take(next, e);
                ++next[o];
                emit(std::move(next));
              }
            }
            break;
          case NodeKind::Join: {
            if (!std::all_of(ins.begin(), ins.end(), [&](auto e) { return m[e] > 0; })) break;
            Marking next = m;
            for (auto e : ins) take(next, e);
            for (auto o : outs) ++next[o];
            emit(std::move(next));
            enabled_join[s].push_back(id);
            break;
          }
          case NodeKind::Final:
            for (auto e : ins) {
              if (!m[e]) continue;
              any = true;
              Marking rest = m;
              take(rest, e);
              if (std::any_of(rest.begin(), rest.end(), [](char c) { return c != 0; })) {
                std::string live;
                for (std::size_t i = 0; i < rest.size(); ++i)
                  if (rest[i]) live += (live.empty() ? "" : ",") + edges_[i].from + "->" + edges_[i].to;
                findings.insert({FindingKind::UnbalancedForkJoin, id, "final reached with live tokens on " + live});
              }
              terminates[s] = 1;
            }
            break;
        }
      }
      if (!any) {
        dead[s] = 1;
        for (const auto& [id, n] : g_.nodes()) {
          if (n.kind != NodeKind::Join) continue;
          const auto& ins = in_[id];
          if (std::any_of(ins.begin(), ins.end(), [&](auto e) { return m[e] > 0; }))
            findings.insert({FindingKind::JoinDeadlock, id, "join waits forever for a missing input token"});
        }
      }
    }
    explored_ = states.size();

    auto back_fill = [&](std::vector<char> mark) {
      std::deque<std::size_t> q;
      for (std::size_t i = 0; i < mark.size(); ++i)
        if (mark[i]) q.push_back(i);
      while (!q.empty()) {
        auto t = q.front();
        q.pop_front();
        for (auto p : preds[t])
          if (!mark[p]) {
            mark[p] = 1;
            q.push_back(p);
          }
      }
      return mark;
    };
    // A join holding an input token in a state from which it can never fire
    // again waits forever.
    for (const auto& [id, n] : g_.nodes()) {
      if (n.kind != NodeKind::Join) continue;
      std::vector<char> fires(states.size(), 0);
      for (const auto& [s, joins] : enabled_join)
        if (std::find(joins.begin(), joins.end(), id) != joins.end()) fires[s] = 1;
      const auto may_fire = back_fill(fires);
      for (std::size_t s = 0; s < states.size(); ++s) {
        if (may_fire[s]) continue;
        if (std::any_of(in_[id].begin(), in_[id].end(), [&](auto e) { return states[s][e] > 0; })) {
          findings.insert({FindingKind::JoinDeadlock, id, "join waits forever for a missing input token"});
          break;
        }
      }
    }
    const auto can_finish = back_fill(terminates);
    const auto can_die = back_fill(dead);
    for (std::size_t s = 0; s < states.size(); ++s) {
      if (can_finish[s] || can_die[s]) continue;
      for (std::size_t i = 0; i < states[s].size(); ++i)
        if (states[s][i]) {
          findings.insert({FindingKind::NoTermination, edges_[i].to, "tokens circulate without reaching a final"});
          break;
        }
    }
    return true;
  }

  std::size_t explored() const { return explored_; }

 private:
  const WorkflowGraph& g_;
  const VerifyOptions& opt_;
  std::vector<ControlEdge> edges_;
  std::map<ControlEdge, std::size_t> index_;
  std::map<std::string, std::vector<std::size_t>> out_, in_;
  std::size_t explored_ = 0;
  char omega_ = static_cast<char>(opt_.token_cap + 1);
};

}  // namespace

VerificationReport verify(const WorkflowGraph& g, const VerifyOptions& options) {
  std::set<Finding> found;

  const auto reach = forward_reach(g, {g.start_id()});
  std::vector<std::string> finals;
  for (const auto& [id, n] : g.nodes()) {
    if (!reach.contains(id)) found.insert({FindingKind::Unreachable, id, "no path from start"});
    if (n.kind == NodeKind::Final) finals.push_back(id);
  }
  const auto coreach = backward_reach(g, finals);
  for (const auto& [id, n] : g.nodes())
    if (!coreach.contains(id)) found.insert({FindingKind::NoTermination, id, "no path to any final"});

  unguarded_cycles(g, found);

  for (const auto& f : g.object_flows()) {
    std::vector<std::string> next(g.successors(f.producer).begin(), g.successors(f.producer).end());
    if (!forward_reach(g, next).contains(f.consumer) || next.empty())
      found.insert({FindingKind::UnboundObjectFlow, f.producer + "->" + f.consumer,
                    "no control path from producer to consumer"});
  }

  VerificationReport report;
  if (g.decision_count() <= options.max_decisions) {
    TokenGame game(g, options);
    std::set<Finding> game_findings;
    if (game.run(game_findings)) {
      found.insert(game_findings.begin(), game_findings.end());
      report.states_explored = game.explored();
    } else {
      report.structural_only = true;
    }
  } else {
    report.structural_only = true;
  }
  // The decision rule holds in both regimes; fork/join arity matching is a
  // fallback for the token game only.
  structural_join_rules(g, reach, report.structural_only, found);

  report.findings.assign(found.begin(), found.end());
  return report;
}

}  // namespace gridflow
