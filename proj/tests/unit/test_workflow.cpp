#include <doctest.h>

#include <random>

#include "corpus.hpp"
#include "gridflow/dsl.hpp"
#include "gridflow/workflow.hpp"
#include "oracles.hpp"

using namespace gridflow;

namespace {

Binding free_binding(std::string cap = "x") {
  Binding b;
  b.variant = BindingVariant::Free;
  b.capabilities = {std::move(cap)};
  return b;
}

Node act(const std::string& id) { return make_activity(id, free_binding()); }

std::vector<ViolationKind> violations_of(auto&& f) {
  try {
    f();
  } catch (const StructuralError& e) {
    std::vector<ViolationKind> out;
    for (const auto& v : e.violations()) out.push_back(v.kind);
    return out;
  }
  return {};
}

bool contains(const std::vector<ViolationKind>& v, ViolationKind k) {
  return std::find(v.begin(), v.end(), k) != v.end();
}

Guard guard(std::string obs, CompareOp op, double lit) {
  Guard g;
  g.observable = std::move(obs);
  g.op = op;
  g.literal = lit;
  return g;
}

}  // namespace

TEST_SUITE("workflow") {
  TEST_CASE("minimal chain builds") {
    auto g = build_graph("w", {make_start(), act("A"), make_final()}, {{"start", "A"}, {"A", "end"}}, {});
    CHECK(g.nodes().size() == 3);
    CHECK(g.successors("start") == std::vector<std::string>{"A"});
  }

  TEST_CASE("structural violations are listed") {
    auto two = violations_of([] {
      build_graph("w", {make_start("s1"), make_start("s2"), act("A"), make_final()},
                  {{"s1", "A"}, {"s2", "A"}, {"A", "end"}}, {});
    });
    CHECK(contains(two, ViolationKind::TwoStarts));

    auto fork = violations_of([] {
      build_graph("w", {make_start(), make_fork("F"), act("A"), make_final()},
                  {{"start", "F"}, {"F", "A"}, {"A", "end"}}, {});
    });
    CHECK(contains(fork, ViolationKind::BadDegree));

    auto nofinal = violations_of([] { build_graph("w", {make_start(), act("A")}, {{"start", "A"}}, {}); });
    CHECK(contains(nofinal, ViolationKind::NoFinal));

    auto dangling = violations_of([] {
      build_graph("w", {make_start(), act("A"), make_final()}, {{"start", "A"}, {"A", "end"}, {"A", "ghost"}}, {});
    });
    CHECK(contains(dangling, ViolationKind::DanglingEdge));

    auto dup = violations_of([] {
      build_graph("w", {make_start(), act("A"), act("A"), make_final()}, {{"start", "A"}, {"A", "end"}}, {});
    });
    CHECK(contains(dup, ViolationKind::DuplicateNode));

    auto binding = violations_of([] {
      Binding b;
      b.variant = BindingVariant::PinnedBoth;
      b.program = "p";
      build_graph("w", {make_start(), make_activity("A", b), make_final()}, {{"start", "A"}, {"A", "end"}}, {});
    });
    CHECK(contains(binding, ViolationKind::BadBinding));

    auto decision = violations_of([] {
      build_graph("w",
                  {make_start(), make_decision("D", {{guard("x", CompareOp::Lt, 1), "A"}, {guard("x", CompareOp::Gt, 1), "end"}}),
                   act("A"), make_final()},
                  {{"start", "D"}, {"A", "end"}}, {});
    });
    CHECK(contains(decision, ViolationKind::BadDecision));

    auto flow = violations_of([] {
      build_graph("w", {make_start(), act("A"), make_final()}, {{"start", "A"}, {"A", "end"}},
                  {{"A", "end", ExtractionSpec{}}});
    });
    CHECK(contains(flow, ViolationKind::DanglingObjectFlow));
  }

  TEST_CASE("binding variants") {
    Binding both;
    both.variant = BindingVariant::PinnedBoth;
    both.program = "bigmac";
    both.actuator = "cluster1";
    Binding prog;
    prog.variant = BindingVariant::PinnedProgram;
    prog.program = "gulp";
    auto g = build_graph("w",
                         {make_start(), make_activity("A", both), make_activity("B", prog),
                          make_activity("C", free_binding("md")), make_activity("D", free_binding("analysis")),
                          make_final()},
                         {{"start", "A"}, {"A", "B"}, {"B", "C"}, {"C", "D"}, {"D", "end"}}, {});
    auto reqs = binding_requirements(g);
    REQUIRE(reqs.size() == 4);
    CHECK(reqs[0].first == "A");
    CHECK(reqs[0].second.program == "bigmac");
    CHECK(reqs[0].second.actuator == "cluster1");
    CHECK(reqs[1].second.program == "gulp");
    CHECK_FALSE(reqs[1].second.actuator);
    CHECK_FALSE(reqs[2].second.program);
    CHECK(reqs[2].second.capabilities == std::set<std::string>{"md"});
    CHECK(reqs[3].first == "D");
  }

  TEST_CASE("verify examples") {
    auto par = build_graph("w", {make_start(), make_fork("F"), act("A"), act("B"), make_join("J"), make_final()},
                           {{"start", "F"}, {"F", "A"}, {"F", "B"}, {"A", "J"}, {"B", "J"}, {"J", "end"}}, {});
    auto r = verify(par);
    CHECK(r.sound());
    CHECK_FALSE(r.structural_only);

    auto dl = build_graph("w",
                          {make_start(), make_decision("D", {{guard("x", CompareOp::Lt, 0), "A"}, {std::nullopt, "B"}}),
                           act("A"), act("B"), make_join("J"), make_final()},
                          {{"start", "D"}, {"A", "J"}, {"B", "J"}, {"J", "end"}}, {});
    auto rd = verify(dl);
    CHECK(rd.has(FindingKind::JoinDeadlock));
    // Brute force: no execution marks both join inputs.
    CHECK_FALSE(oracle::TokenSimulator(dl).sound());

    auto cyc = build_graph("w", {make_start(), make_fork("F"), act("A"), act("B"), make_final()},
                           {{"start", "F"}, {"F", "A"}, {"F", "end"}, {"A", "B"}, {"B", "A"}}, {});
    CHECK(verify(cyc).has(FindingKind::UnguardedCycle));
  }

  TEST_CASE("corpus verdicts") {
    std::size_t sound = 0, unsound = 0;
    for (const auto& e : corpus::load()) {
      CAPTURE(e.name);
      if (e.expect.rfind("structural ", 0) == 0) {
        auto vs = violations_of([&] { parse_workflow(e.text); });
        CHECK_FALSE(vs.empty());
        bool named = false;
        for (auto k : vs) named |= violation_kind_name(k) == e.expect.substr(11);
        CHECK(named);
        ++unsound;
        continue;
      }
      auto g = parse_workflow(e.text);
      auto r = verify(g);
      CHECK(verify(g).findings == r.findings);
      if (e.expect == "sound") {
        CHECK(r.sound());
        ++sound;
      } else {
        bool found = false;
        for (const auto& f : r.findings) found |= finding_kind_name(f.kind) == e.expect;
        CHECK(found);
        ++unsound;
      }
    }
    CHECK(sound >= 6);
    CHECK(unsound >= 6);
  }

  TEST_CASE("verifier agrees with the brute-force token simulator on small corpus graphs") {
    std::size_t compared = 0;
    for (const auto& e : corpus::load()) {
      if (e.expect.rfind("structural", 0) == 0) continue;
      auto g = parse_workflow(e.text);
      if (g.nodes().size() > 8) continue;
      CAPTURE(e.name);
      CHECK(verify(g).sound() == oracle::TokenSimulator(g).sound());
      ++compared;
    }
    CHECK(compared >= 8);
  }

  TEST_CASE("verifier agrees with the brute-force simulator on random small graphs") {
    std::mt19937_64 rng(2024);
    std::size_t built = 0, sound = 0;
    for (int trial = 0; trial < 4000 && built < 400; ++trial) {
      // Random node kinds, random edges; most candidates fail build_graph.
      const int n_inner = 2 + static_cast<int>(rng() % 5);
      std::vector<Node> nodes{make_start(), make_final()};
      std::vector<std::string> ids{"start", "end"};
      for (int i = 0; i < n_inner; ++i) {
        std::string id = "n" + std::to_string(i);
        switch (rng() % 4) {
          case 0: nodes.push_back(act(id)); break;
          case 1: nodes.push_back(make_fork(id)); break;
          case 2: nodes.push_back(make_join(id)); break;
          default: nodes.push_back(make_decision(id, {})); break;
        }
        ids.push_back(id);
      }
      std::vector<ControlEdge> edges;
      for (auto& node : nodes) {
        if (node.kind == NodeKind::Final) continue;
        std::size_t outs = (node.kind == NodeKind::Fork || node.kind == NodeKind::Decision) ? 2 + rng() % 2 : 1;
        std::set<std::string> targets;
        for (std::size_t k = 0; k < outs; ++k) {
          std::string t = ids[1 + rng() % (ids.size() - 1)];
          targets.insert(t);
        }
        if (node.kind == NodeKind::Decision) {
          std::vector<std::string> ts(targets.begin(), targets.end());
          for (std::size_t k = 0; k + 1 < ts.size(); ++k)
            node.branches.push_back({guard("x", CompareOp::Lt, static_cast<double>(k)), ts[k]});
          node.branches.push_back({std::nullopt, ts.back()});
        } else {
          for (const auto& t : targets) edges.push_back({node.id, t});
        }
      }
      std::optional<WorkflowGraph> g;
      try {
        g = build_graph("r", nodes, edges, {});
      } catch (const StructuralError&) {
        continue;
      }
      if (g->nodes().size() > 8) continue;
      ++built;
      const bool v = verify(*g).sound();
      CAPTURE(emit_dsl(*g));
      CHECK(v == oracle::TokenSimulator(*g).sound());
      sound += v;
    }
    CHECK(built >= 100);
    CHECK(sound > 0);
  }

  TEST_CASE("adding an unguarded cycle never removes findings") {
    // The feedback edge b -> a is added between nodes that are already
    // reachable and can already reach a final, with a reaching b; start- and
    // final-reachability of every node stay as they were.
    std::size_t tried = 0;
    for (const auto& e : corpus::load()) {
      if (e.expect.rfind("structural", 0) == 0) continue;
      auto g = parse_workflow(e.text);
      auto before = verify(g);
      auto flagged = [&](const std::string& id) {
        for (const auto& f : before.findings)
          if ((f.kind == FindingKind::Unreachable || f.kind == FindingKind::NoTermination) && f.subject == id)
            return true;
        return false;
      };
      auto reaches = [&](const std::string& from, const std::string& to) {
        std::set<std::string> seen{from};
        std::vector<std::string> stack{from};
        while (!stack.empty()) {
          auto u = stack.back();
          stack.pop_back();
          if (u == to) return true;
          for (const auto& w : g.successors(u))
            if (g.node(w).kind != NodeKind::Decision && seen.insert(w).second) stack.push_back(w);
        }
        return false;
      };
      for (const auto& a : g.activity_ids())
        for (const auto& b : g.activity_ids()) {
          if (flagged(a) || flagged(b) || !reaches(a, b)) continue;
          std::vector<Node> nodes;
          for (const auto& [id, n] : g.nodes()) nodes.push_back(n);
          const std::string succ = g.successors(b).front();
          std::vector<ControlEdge> rewired;
          for (const auto& ed : g.edges())
            if (!(ed.from == b && ed.to == succ)) rewired.push_back(ed);
          nodes.push_back(make_fork("loopback"));
          rewired.push_back({b, "loopback"});
          rewired.push_back({"loopback", succ});
          rewired.push_back({"loopback", a});
          auto h = build_graph(g.name(), nodes, rewired, g.object_flows(), g.source_refs());
          auto after = verify(h);
          CAPTURE(e.name);
          CAPTURE(a);
          CAPTURE(b);
          CHECK(after.has(FindingKind::UnguardedCycle));
          for (const auto& f : before.findings)
            CHECK(std::find(after.findings.begin(), after.findings.end(), f) != after.findings.end());
          ++tried;
        }
    }
    CHECK(tried >= 10);
  }

  TEST_CASE("large decision counts fall back to structural rules") {
    // A chain of 14 two-way decisions that re-converge on activities.
    std::vector<Node> nodes{make_start(), make_final()};
    std::vector<ControlEdge> edges;
    std::string prev = "start";
    for (int i = 0; i < 14; ++i) {
      std::string d = "d" + std::to_string(i), a = "a" + std::to_string(i), b = "b" + std::to_string(i),
                  m = "m" + std::to_string(i);
      nodes.push_back(make_decision(d, {{guard("x", CompareOp::Lt, 0), a}, {std::nullopt, b}}));
      nodes.push_back(act(a));
      nodes.push_back(act(b));
      nodes.push_back(act(m));
      edges.push_back({prev, d});
      edges.push_back({a, m});
      edges.push_back({b, m});
      prev = m;
    }
    edges.push_back({prev, "end"});
    auto g = build_graph("big", nodes, edges, {});
    auto r = verify(g);
    CHECK(r.structural_only);
    CHECK(r.sound());

    // Same, with the last pair feeding a join: the structural rule flags it.
    nodes.push_back(make_join("J"));
    edges.pop_back();
    std::vector<ControlEdge> e2;
    for (const auto& e : edges)
      if (!(e.to == "m13")) e2.push_back(e);
    e2.push_back({"a13", "J"});
    e2.push_back({"b13", "J"});
    e2.push_back({"J", "m13"});
    e2.push_back({"m13", "end"});
    auto h = build_graph("big", nodes, e2, {});
    auto rh = verify(h);
    CHECK(rh.structural_only);
    CHECK(rh.has(FindingKind::JoinDeadlock));
  }

  TEST_CASE("guards convert to the literal unit") {
    Guard gd = guard("T", CompareOp::Ge, 300);
    gd.unit = units::get("K");
    CHECK(gd.holds(Observable::scalar("T", units::get("K"), 300)));
    CHECK_FALSE(gd.holds(Observable::scalar("T", units::get("K"), 299.5)));
    Guard len = guard("L", CompareOp::Lt, 1);
    len.unit = units::get("nm");
    CHECK(len.holds(Observable::scalar("L", units::get("Å"), 9.9)));
    CHECK_THROWS_AS(len.holds(Observable::scalar("L", units::get("K"), 1)), Error);
    CHECK_THROWS_AS(len.holds(Observable::vector3("L", units::get("nm"), {1, 2, 3})), Error);
  }
}
