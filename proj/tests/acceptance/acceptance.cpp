// Acceptance criteria 1-10, one PASS/FAIL line each; exits nonzero when any
// criterion fails.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "corpus.hpp"
#include "fixture.hpp"
#include "gridflow/dsl.hpp"
#include "gridflow/engine.hpp"
#include "gridflow/simgrid.hpp"
#include "oracles.hpp"

using namespace gridflow;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

struct Cli {
  fixture::TempDir dir;
  struct Result {
    int code;
    std::string out;
    std::string err;
  };
  Result run(const std::string& args) const {
    const std::string cmd = "cd '" + dir.path.string() + "' && GRIDFLOW_STORE=store '" GRIDFLOW_CLI "' " + args +
                            " > out.txt 2> err.txt";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, oracle::slurp(dir.path / "out.txt"),
            oracle::slurp(dir.path / "err.txt")};
  }
};

std::string strip(std::string s) {
  while (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> words(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

double output_value(const std::string& report, const std::string& activity, const std::string& name) {
  for (const auto& l : lines(report)) {
    const auto w = words(l);
    if (w.size() >= 4 && w[0] == "output" && w[1] == activity && w[2] == name) return std::stod(w[3]);
  }
  return std::nan("");
}

std::map<std::string, int> executions(const std::string& report) {
  std::map<std::string, int> out;
  for (const auto& l : lines(report)) {
    const auto w = words(l);
    if (w.size() >= 3 && w[0] == "activity") out[w[1]] = std::stoi(w[2].substr(w[2].find('=') + 1));
  }
  return out;
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

// --------------------------------------------------------------------------

Verdict case_study_end_to_end() {
  Verdict v;
  Cli cli;
  const auto t0 = std::chrono::steady_clock::now();
  const auto sub = cli.run("submit --case-study --seed 42 --param theta=0 --param n_helium=1000 --param T=200");
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  v.require(sub.code == 0, "submit exit " + std::to_string(sub.code) + " " + strip(sub.err));
  const auto rep = cli.run("report " + strip(sub.out));
  const double d = output_value(rep.out, "analysis", "D");
  v.detail = "D=" + fmt(d) + " A^2/ps (window [0.45, 0.55]), wall " + fmt(wall, 2) + " s";
  v.pass = sub.code == 0 && d >= 0.45 && d <= 0.55 && wall < 60;
  return v;
}

Verdict loading_monotonicity() {
  Verdict v;
  const std::vector<std::string> thetas{"0", "0.3", "0.6"};
  std::map<std::string, std::vector<double>> ds;
  const auto g = simgrid::build_case_study();
  for (std::uint64_t seed = 1; seed <= 8; ++seed)
    for (const auto& th : thetas) {
      fixture::Grid grid(seed);
      grid.add_builtin();
      const auto rec = grid.engine.execute(make_plan(g, grid.rm, {"acc", Affiliation::Academic}, {100, seed, {{"theta", th}}, ""}));
      v.require(rec.status == RunStatus::Completed, "run failed at theta " + th);
      ds[th].push_back(std::stod(rec.activities.at("analysis").outputs.at("D")));
    }
  if (!v.pass) return v;
  auto mean = [](const std::vector<double>& x) {
    double m = 0;
    for (double a : x) m += a / x.size();
    return m;
  };
  auto se = [&](const std::vector<double>& x) {
    const double m = mean(x);
    double s = 0;
    for (double a : x) s += (a - m) * (a - m) / (x.size() - 1);
    return std::sqrt(s / x.size());
  };
  std::ostringstream d;
  for (std::size_t i = 0; i + 1 < thetas.size(); ++i) {
    const auto &a = ds[thetas[i]], &b = ds[thetas[i + 1]];
    const double gap = mean(a) - mean(b), err = std::hypot(se(a), se(b));
    v.require(gap > 2 * err, "gap " + thetas[i] + "->" + thetas[i + 1] + " " + fmt(gap) + " <= 2*" + fmt(err));
    d << "D(" << thetas[i] << ")-D(" << thetas[i + 1] << ")=" << fmt(gap) << " (" << fmt(gap / err, 3) << " se) ";
  }
  if (v.pass) v.detail = "8 seeds, mean D " + fmt(mean(ds["0"])) + " > " + fmt(mean(ds["0.3"])) + " > " +
                         fmt(mean(ds["0.6"])) + "; " + d.str();
  return v;
}

Verdict verification_corpus() {
  Verdict v;
  // Two starts, unreachable node, dangling join, decision into join,
  // unbalanced fork/join, unguarded cycle.
  const std::set<std::string> required{"unsound_two_starts",    "unsound_unreachable", "unsound_dangling_join",
                                       "unsound_decision_join", "unsound_unbalanced",  "unsound_unguarded_cycle"};
  std::set<std::string> flagged;
  int sound = 0, unsound = 0, compared = 0;
  for (const auto& e : corpus::load()) {
    if (e.expect.rfind("structural ", 0) == 0) {
      const std::string kind = e.expect.substr(11);
      try {
        parse_workflow(e.text);
        v.require(false, e.name + " built");
      } catch (const StructuralError& err) {
        bool found = false;
        for (const auto& viol : err.violations()) found = found || violation_kind_name(viol.kind) == kind;
        v.require(found, e.name + " lacks " + kind);
        if (found) flagged.insert(e.name);
        ++unsound;
      }
      continue;
    }
    const auto g = parse_workflow(e.text);
    const auto report = verify(g);
    if (e.expect == "sound") {
      v.require(report.sound(), e.name + " has findings");
      ++sound;
    } else {
      bool found = false;
      for (const auto& f : report.findings) found = found || finding_kind_name(f.kind) == e.expect;
      v.require(found, e.name + " lacks " + e.expect);
      if (found) flagged.insert(e.name);
      ++unsound;
    }
    if (g.nodes().size() <= 8) {
      v.require(report.sound() == oracle::TokenSimulator(g).sound(), e.name + " disagrees with the token simulator");
      ++compared;
    }
  }
  for (const auto& k : required) v.require(flagged.contains(k), "no corpus graph flagged " + k);
  v.require(sound >= 6, "fewer than 6 sound graphs");
  v.require(unsound >= 6, "fewer than 6 unsound graphs");
  if (v.pass)
    v.detail = std::to_string(unsound) + " unsound flagged, " + std::to_string(sound) + " sound clean, " +
               std::to_string(compared) + " small graphs agree with the token simulator";
  return v;
}

Verdict resume_rollback() {
  Verdict v;
  Cli cli;
  const std::string args = "submit --case-study --seed 42";
  const auto failed = cli.run(args + " --fail-at md:1");
  const std::string run = strip(failed.out);
  v.require(failed.code == 2, "injected failure exit " + std::to_string(failed.code));
  const auto resumed = cli.run("resume " + run);
  v.require(resumed.code == 0, "resume exit " + std::to_string(resumed.code) + " " + strip(resumed.err));
  const auto rep = cli.run("report " + run);
  std::set<std::string> resubmitted;
  bool after_resume = false;
  for (const auto& l : lines(rep.out)) {
    const auto w = words(l);
    if (w.size() >= 5 && w[0] == "trace") {
      if (w[3] == "resume") after_resume = true;
      if (after_resume && w[3] == "submit") resubmitted.insert(w[4]);
    }
  }
  v.require(after_resume, "no resume event");
  v.require(resubmitted == std::set<std::string>{"md", "analysis"}, "resume resubmitted other stages");
  for (const auto& [activity, n] : executions(rep.out)) v.require(n == 1, activity + " executed " + std::to_string(n));
  const auto whole = cli.run(args);
  const auto rep2 = cli.run("report " + strip(whole.out));
  const double d1 = output_value(rep.out, "analysis", "D"), d2 = output_value(rep2.out, "analysis", "D");
  v.require(d1 == d2, "D differs: " + fmt(d1, 17) + " vs " + fmt(d2, 17));
  if (v.pass) v.detail = "resume submitted only md, analysis; counters 1; D " + fmt(d1, 17) + " equals uninterrupted run";
  return v;
}

Verdict reproducibility() {
  Verdict v;
  Cli cli;
  const std::string args = "submit --case-study --seed 7 --param theta=0.3";
  const auto a = cli.run(args), b = cli.run(args);
  v.require(a.code == 0 && b.code == 0, "submit failed");
  auto ckpts = [&](const std::string& run) {
    std::vector<std::string> out;
    for (const auto& l : lines(cli.run("store ls " + run).out))
      if (l.rfind("ckpt ", 0) == 0) out.push_back(words(l)[3]);
    return out;
  };
  const auto ha = ckpts(strip(a.out)), hb = ckpts(strip(b.out));
  v.require(!ha.empty() && ha == hb, "checkpoint hash sequences differ");
  auto report = [&](const std::string& run) {
    std::string out;
    for (const auto& l : lines(cli.run("report --deterministic " + run).out))
      if (l.rfind("run ", 0) != 0) out += l + "\n";
    return out;
  };
  v.require(report(strip(a.out)) == report(strip(b.out)), "redacted reports differ");
  if (v.pass)
    v.detail = std::to_string(ha.size()) + " checkpoint hashes identical; redacted reports identical apart from the run id";
  return v;
}

Verdict round_trips() {
  Verdict v;
  int graphs = 0;
  for (const auto& e : corpus::load()) {
    if (e.expect.rfind("structural", 0) == 0) continue;
    const std::string once = emit_dsl(parse_workflow(e.text));
    v.require(emit_dsl(parse_workflow(once)) == once, e.name + " is no fixpoint");
    ++graphs;
  }
  // Datasets: every stage output of a case-study run plus random ones.
  int datasets = 0;
  fixture::Grid grid(1);
  grid.add_builtin();
  const auto rec = grid.engine.execute(make_plan(simgrid::build_case_study(), grid.rm, {"acc", Affiliation::Academic},
                                                 {100, 1, {{"T", "50"}, {"n_helium", "100"}}, ""}));
  for (const auto& key : grid.storage.keys(rec.run_id)) {
    const Dataset ds = grid.storage.get(key);
    const std::string bytes = canonical_serialize(ds);
    v.require(canonical_deserialize(bytes) == ds && canonical_serialize(canonical_deserialize(bytes)) == bytes,
              key.activity_id + " dataset round trip");
    ++datasets;
  }
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> val(-1e6, 1e6);
  const auto all = units::all();
  for (int i = 0; i < 200; ++i) {
    Dataset ds;
    ds.set_meta("producer", "p" + std::to_string(i));
    ds.add(Observable::scalar("s", all[rng() % all.size()], val(rng)));
    std::vector<double> idx(rng() % 20 + 1), series(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      idx[k] = static_cast<double>(k);
      series[k] = val(rng);
    }
    ds.add(Observable::series("v", all[rng() % all.size()], idx, series));
    ds.add(Observable::vector3("w", all[rng() % all.size()], {val(rng), val(rng), val(rng)}));
    v.require(canonical_deserialize(canonical_serialize(ds)) == ds, "random dataset round trip");
    ++datasets;
  }
  double worst = 0;
  int pairs = 0;
  for (const auto& u1 : all)
    for (const auto& u2 : all) {
      if (!u1.convertible_to(u2)) continue;
      for (double x : {1.2345678901234567, -3.5e-7, 6.02e23}) {
        const auto q = Observable::scalar("q", u1, x);
        const double back = convert(convert(q, u2), u1).as_scalar();
        worst = std::max(worst, std::abs(back - x) / std::abs(x));
      }
      ++pairs;
    }
  v.require(worst <= 1e-12, "unit round trip error " + fmt(worst));
  if (v.pass)
    v.detail = std::to_string(graphs) + " DSL fixpoints, " + std::to_string(datasets) + " dataset round trips, " +
               std::to_string(pairs) + " unit pairs (worst rel. error " + fmt(worst, 3) + ")";
  return v;
}

Verdict translation_consistency() {
  Verdict v;
  int xml = 0, runs = 0;
  for (const auto& e : corpus::load()) {
    if (e.expect.rfind("structural", 0) == 0) continue;
    const auto g = parse_workflow(e.text);
    v.require(job_dependencies(to_job_xml(g, true)) == oracle::reduced_precedence(g), e.name + " job-XML dependencies");
    ++xml;
    if (e.expect != "sound") continue;
    PlanExpr plan;
    try {
      plan = to_functional_plan(g);
    } catch (const Error&) {
      continue;
    }
    std::vector<std::string> decisions;
    for (const auto& [id, n] : g.nodes())
      if (n.kind == NodeKind::Decision) decisions.push_back(id);
    if (decisions.size() > 6) continue;
    std::vector<OutcomeScript> scripts{{}};
    for (const auto& d : decisions) {
      std::vector<OutcomeScript> next;
      for (const auto& s : scripts)
        for (std::size_t b = 0; b < g.node(d).branches.size(); ++b)
          for (std::size_t repeat = 0; repeat < 2; ++repeat) {
            auto t = s;
            for (std::size_t r = 0; r < repeat; ++r) t.outcomes[d].push_back((b + 1) % g.node(d).branches.size());
            t.outcomes[d].push_back(b);
            next.push_back(t);
          }
      scripts = next;
    }
    for (const auto& script : scripts) {
      std::optional<std::vector<std::string>> expected;
      try {
        expected = interpret_plan(plan, script);
      } catch (const Error&) {
      }
      fixture::Grid grid;
      grid.add_generic(g);
      RunOptions opts;
      opts.outcomes = [&](const std::string& d, std::size_t visit) { return script.choose(d, visit); };
      const auto rec = grid.engine.execute(make_plan(g, grid.rm, {"acc", Affiliation::Academic}), opts);
      if (expected) {
        const auto done = rec.completed();
        v.require(rec.status == RunStatus::Completed &&
                      std::multiset<std::string>(done.begin(), done.end()) ==
                          std::multiset<std::string>(expected->begin(), expected->end()),
                  e.name + " engine and plan disagree");
      } else {
        v.require(rec.status == RunStatus::Failed, e.name + " engine completed where the plan fails");
      }
      ++runs;
    }
  }
  if (v.pass)
    v.detail = std::to_string(xml) + " job-XML reductions match, " + std::to_string(runs) +
               " engine runs match the plan interpreter";
  return v;
}

Verdict license_citation() {
  Verdict v;
  Cli cli;
  const auto refused = cli.run("submit --case-study --user acme:commercial");
  v.require(refused.code == 1, "commercial submit exit " + std::to_string(refused.code));
  v.require(refused.err.find("LicenseViolation") != std::string::npos, "no LicenseViolation on stderr");
  const auto ok = cli.run("submit --case-study --user alice:academic --param T=40 --param n_helium=100");
  v.require(ok.code == 0, "academic submit failed");
  const auto rep = cli.run("report " + strip(ok.out));
  std::multiset<std::string> cites;
  for (const auto& l : lines(rep.out))
    if (l.rfind("cite ", 0) == 0) cites.insert(l.substr(l.find(' ', 5) + 1));
  // Expected from the bindings and descriptors, independently of the ledger.
  std::set<std::string> expected;
  const auto g = simgrid::build_case_study();
  for (const auto& r : g.source_refs()) expected.insert(r);
  for (const auto& l : lines(rep.out)) {
    const auto w = words(l);
    if (w.size() == 3 && w[0] == "binding")
      for (const auto& d : simgrid::builtin_resources())
        if (d.id == w[2] && d.license.kind != LicenseKind::Open) expected.insert(d.license.citation);
  }
  v.require(cites == std::multiset<std::string>(expected.begin(), expected.end()), "ledger differs from expectation");
  if (v.pass) v.detail = "LicenseViolation exit 1; ledger holds " + std::to_string(cites.size()) + " distinct citations";
  return v;
}

Verdict concurrency() {
  Verdict v;
  const auto g = parse_workflow(R"(workflow "forked" {
    start -> F
    fork F after start into (A, B)
    activity A { capabilities: [generic] }
    activity B { capabilities: [generic] }
    join J waits (A, B) -> C
    activity C { capabilities: [generic] }
    C -> end
  })");
  std::set<std::string> orders;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    fixture::Grid grid(seed);
    grid.add_generic(g);
    const auto rec = grid.engine.execute(make_plan(g, grid.rm, {"acc", Affiliation::Academic}));
    std::map<std::string, std::size_t> at;
    for (std::size_t i = 0; i < rec.trace.size(); ++i)
      if (!at.contains(rec.trace[i].kind + " " + rec.trace[i].node)) at[rec.trace[i].kind + " " + rec.trace[i].node] = i;
    v.require(rec.status == RunStatus::Completed, "seed " + std::to_string(seed) + " failed");
    const auto a = at["complete A"], b = at["complete B"], j = at["join J"];
    v.require(a < j && b < j, "join before a branch at seed " + std::to_string(seed));
    v.require(j < at["submit C"] && at["submit A"] < a && at["submit B"] < b, "precedence at seed " + std::to_string(seed));
    orders.insert(a < b ? "AB" : "BA");
  }
  v.require(orders.size() == 2, "only one completion order observed");
  if (v.pass) v.detail = "50 schedules, both orders observed, join after both branches every time";
  return v;
}

Verdict storage_integrity() {
  Verdict v;
  fixture::Grid grid(3);
  grid.add_builtin();
  const auto g = simgrid::build_case_study();
  const PlanOptions opts{100, 3, {{"T", "60"}, {"n_helium", "200"}}, ""};
  const auto first = grid.engine.execute(make_plan(g, grid.rm, {"acc", Affiliation::Academic}, opts));
  // Snapshot, run a whole case study, compare.
  std::map<fs::path, std::string> before;
  for (const auto& e : fs::directory_iterator(grid.storage.root() / "store")) before[e.path()] = oracle::slurp(e.path());
  const std::string index_before = oracle::slurp(grid.storage.index_path());
  const auto second = grid.engine.execute(make_plan(g, grid.rm, {"acc", Affiliation::Academic}, opts));
  v.require(first.status == RunStatus::Completed && second.status == RunStatus::Completed, "runs failed");
  for (const auto& [p, bytes] : before) v.require(oracle::slurp(p) == bytes, "blob rewritten: " + p.filename().string());
  const std::string index_after = oracle::slurp(grid.storage.index_path());
  v.require(index_after.size() > index_before.size() && index_after.compare(0, index_before.size(), index_before) == 0,
            "index not append-only");

  std::mt19937_64 rng(5);
  std::size_t flips = 0, detected = 0;
  for (const auto& key : grid.storage.keys(second.run_id)) {
    const fs::path p = grid.storage.blob_path(key.hash);
    const std::string orig = oracle::slurp(p);
    std::vector<std::size_t> positions;
    if (orig.size() <= 4096) {
      for (std::size_t i = 0; i < orig.size(); ++i) positions.push_back(i);
    } else {
      positions = {0, orig.size() / 2, orig.size() - 1};
      for (int i = 0; i < 40; ++i) positions.push_back(rng() % orig.size());
    }
    fs::permissions(p, fs::perms::owner_write, fs::perm_options::add);
    for (std::size_t pos : positions) {
      std::string bad = orig;
      bad[pos] = static_cast<char>(bad[pos] ^ (1 + rng() % 255));
      std::ofstream(p, std::ios::binary | std::ios::trunc) << bad;
      ++flips;
      try {
        grid.storage.get(key);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::IntegrityError) ++detected;
      }
    }
    std::ofstream(p, std::ios::binary | std::ios::trunc) << orig;
  }
  v.require(flips > 0 && detected == flips,
            std::to_string(flips - detected) + " of " + std::to_string(flips) + " corruptions undetected");
  if (v.pass)
    v.detail = std::to_string(flips) + " single-byte corruptions detected; " + std::to_string(before.size()) +
               " blobs and the index unchanged across a full run";
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"end-to-end case study", case_study_end_to_end},
      {"loading monotonicity", loading_monotonicity},
      {"verification corpus", verification_corpus},
      {"resume/rollback", resume_rollback},
      {"determinism/reproducibility", reproducibility},
      {"round trips", round_trips},
      {"translation consistency", translation_consistency},
      {"license/citation", license_citation},
      {"concurrency contract", concurrency},
      {"storage integrity", storage_integrity},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    failed += v.pass ? 0 : 1;
    std::cout << "criterion " << (i + 1) << " " << (v.pass ? "PASS" : "FAIL") << " " << criteria[i].first << ": "
              << v.detail << "\n"
              << std::flush;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
