#pragma once

// Independent reference implementations used to cross-check the library.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gridflow/workflow.hpp"

namespace oracle {

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Classical soundness by brute-force enumeration of firing sequences:
// every node fires in some execution, every reachable marking can still
// complete, completion leaves no token behind, no edge exceeds the token
// bound, and for every object flow some execution fires the consumer on a
// token causally produced after the producer fired. Tokens carry the set of
// activities in their causal history.
class TokenSimulator {
 public:
  explicit TokenSimulator(const gridflow::WorkflowGraph& g, int bound = 4) : g_(g), bound_(bound) {
    for (const auto& e : g.edges()) edges_.push_back(e);
    for (const auto& id : g.activity_ids()) bit_[id] = 1u << bit_.size();
  }

  bool sound() {
    explore();
    if (improper_ || unbounded_) return false;
    for (const auto& [id, n] : g_.nodes())
      if (n.kind != gridflow::NodeKind::Start && !fired_.contains(id)) return false;
    for (const auto& [m, info] : markings_)
      if (!can_complete(m)) return false;
    for (const auto& f : g_.object_flows())
      if (!ordered_.contains({f.producer, f.consumer})) return false;
    return true;
  }

 private:
  using Token = std::pair<std::size_t, unsigned>;  // edge, causal history
  using Marking = std::multiset<Token>;
  struct Info {
    std::vector<Marking> next;
    bool completes = false;
  };

  std::size_t edge(const std::string& a, const std::string& b) const {
    for (std::size_t i = 0; i < edges_.size(); ++i)
      if (edges_[i].from == a && edges_[i].to == b) return i;
    return edges_.size();
  }

  std::vector<Token> on(const Marking& m, std::size_t e) const {
    std::set<Token> distinct;
    for (const auto& t : m)
      if (t.first == e) distinct.insert(t);
    return {distinct.begin(), distinct.end()};
  }

  struct Move {
    std::string node;
    unsigned history;  // union of consumed histories
    Marking next;
  };

  std::vector<Move> moves(const Marking& m) const {
    std::vector<Move> out;
    for (const auto& [id, n] : g_.nodes()) {
      const auto& ins = g_.predecessors(id);
      const auto& outs = g_.successors(id);
      using K = gridflow::NodeKind;
      const unsigned self = bit_.contains(id) ? bit_.at(id) : 0u;
      if (n.kind == K::Join) {
        // Every combination of one token per input edge.
        std::vector<std::vector<Token>> choices;
        for (const auto& p : ins) choices.push_back(on(m, edge(p, id)));
        if (std::any_of(choices.begin(), choices.end(), [](const auto& c) { return c.empty(); })) continue;
        std::vector<std::size_t> pick(choices.size(), 0);
        for (;;) {
          Marking x = m;
          unsigned h = 0;
          for (std::size_t i = 0; i < choices.size(); ++i) {
            x.erase(x.find(choices[i][pick[i]]));
            h |= choices[i][pick[i]].second;
          }
          x.insert({edge(id, outs.front()), h});
          out.push_back({id, h, x});
          std::size_t i = 0;
          while (i < pick.size() && ++pick[i] == choices[i].size()) pick[i++] = 0;
          if (i == pick.size()) break;
        }
        continue;
      }
      for (const auto& p : ins) {
        for (const auto& tok : on(m, edge(p, id))) {
          Marking x = m;
          x.erase(x.find(tok));
          const unsigned h = tok.second | self;
          if (n.kind == K::Decision) {
            for (const auto& s : outs) {
              Marking y = x;
              y.insert({edge(id, s), h});
              out.push_back({id, tok.second, y});
            }
          } else {
            for (const auto& s : outs) x.insert({edge(id, s), h});
            out.push_back({id, tok.second, x});
          }
        }
      }
    }
    return out;
  }

  void explore() {
    Marking init{{edge(g_.start_id(), g_.successors(g_.start_id()).front()), 0u}};
    std::vector<Marking> stack{init};
    std::set<Marking> seen;
    while (!stack.empty()) {
      Marking m = std::move(stack.back());
      stack.pop_back();
      if (!seen.insert(m).second) continue;
      auto& info = markings_[m];
      for (auto& mv : moves(m)) {
        fired_.insert(mv.node);
        if (bit_.contains(mv.node))
          for (const auto& [other, b] : bit_)
            if (mv.history & b) ordered_.insert({other, mv.node});
        if (g_.node(mv.node).kind == gridflow::NodeKind::Final) {
          if (mv.next.empty()) info.completes = true;
          else improper_ = true;
          continue;
        }
        bool over = false;
        for (std::size_t e = 0; e < edges_.size(); ++e)
          over |= static_cast<int>(std::count_if(mv.next.begin(), mv.next.end(),
                                                 [&](const Token& t) { return t.first == e; })) > bound_;
        if (over) {
          unbounded_ = true;
          continue;
        }
        info.next.push_back(mv.next);
        stack.push_back(std::move(mv.next));
      }
    }
  }

  bool can_complete(const Marking& from) {
    std::set<Marking> seen{from};
    std::vector<Marking> stack{from};
    while (!stack.empty()) {
      Marking m = stack.back();
      stack.pop_back();
      const auto& info = markings_[m];
      if (info.completes) return true;
      for (const auto& n : info.next)
        if (seen.insert(n).second) stack.push_back(n);
    }
    return false;
  }

  const gridflow::WorkflowGraph& g_;
  int bound_;
  std::vector<gridflow::ControlEdge> edges_;
  std::map<std::string, unsigned> bit_;
  std::map<Marking, Info> markings_;
  std::set<std::string> fired_;
  std::set<std::pair<std::string, std::string>> ordered_;
  bool improper_ = false;
  bool unbounded_ = false;
};

// Transitive reduction of activity precedence: u < v when a forward path
// leads from u to v; u -> v kept when no activity w has u < w < v.
inline std::map<std::string, std::set<std::string>> reduced_precedence(const gridflow::WorkflowGraph& g) {
  std::vector<std::string> ids;
  for (const auto& [id, n] : g.nodes()) ids.push_back(id);
  const std::size_t n = ids.size();
  auto idx = [&](const std::string& id) {
    return static_cast<std::size_t>(std::find(ids.begin(), ids.end(), id) - ids.begin());
  };
  std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
  const auto back = gridflow::back_edges(g);
  for (const auto& e : g.edges())
    if (!back.contains(e)) reach[idx(e.from)][idx(e.to)] = 1;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (reach[i][k] && reach[k][j]) reach[i][j] = 1;
  auto is_act = [&](std::size_t i) { return g.node(ids[i]).kind == gridflow::NodeKind::Activity; };
  std::map<std::string, std::set<std::string>> out;
  for (std::size_t v = 0; v < n; ++v) {
    if (!is_act(v)) continue;
    auto& deps = out[ids[v]];
    for (std::size_t u = 0; u < n; ++u) {
      if (!is_act(u) || !reach[u][v]) continue;
      bool between = false;
      for (std::size_t w = 0; w < n; ++w)
        if (w != u && w != v && is_act(w) && reach[u][w] && reach[w][v]) between = true;
      if (!between) deps.insert(ids[u]);
    }
  }
  return out;
}

// Two-terminal series-parallel recognition by trying every order of series
// and parallel reductions. Edges form a multiset.
inline bool sp_reducible(std::multiset<std::pair<int, int>> edges, int source, int sink,
                         std::set<std::multiset<std::pair<int, int>>>& seen, std::size_t& attempts) {
  ++attempts;
  if (edges.size() == 1 && *edges.begin() == std::make_pair(source, sink)) return true;
  if (!seen.insert(edges).second) return false;
  // Parallel reductions: drop one copy of a duplicated edge.
  for (const auto& e : std::set<std::pair<int, int>>(edges.begin(), edges.end())) {
    if (edges.count(e) > 1) {
      auto next = edges;
      next.erase(next.find(e));
      if (sp_reducible(next, source, sink, seen, attempts)) return true;
    }
  }
  // Series reductions: contract an inner vertex with one in and one out edge.
  std::set<int> vertices;
  for (const auto& [a, b] : edges) {
    vertices.insert(a);
    vertices.insert(b);
  }
  for (int v : vertices) {
    if (v == source || v == sink) continue;
    std::vector<std::pair<int, int>> in, out;
    for (const auto& e : edges) {
      if (e.second == v) in.push_back(e);
      if (e.first == v) out.push_back(e);
    }
    if (in.size() != 1 || out.size() != 1) continue;
    auto next = edges;
    next.erase(next.find(in[0]));
    next.erase(next.find(out[0]));
    next.insert({in[0].first, out[0].second});
    if (sp_reducible(next, source, sink, seen, attempts)) return true;
  }
  return false;
}

}  // namespace oracle
