#include "gridflow/engine.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <ctime>
#include <deque>
#include <json.hpp>

#include "gridflow/dsl.hpp"
#include "gridflow/hash.hpp"

namespace gridflow {

using nlohmann::json;

std::string_view affiliation_name(Affiliation a) noexcept {
  return a == Affiliation::Academic ? "academic" : "commercial";
}

std::optional<Affiliation> parse_affiliation(std::string_view text) noexcept {
  if (text == "academic") return Affiliation::Academic;
  if (text == "commercial") return Affiliation::Commercial;
  return std::nullopt;
}

UserProfile parse_user_profile(std::string_view text) {
  UserProfile u;
  auto colon = text.rfind(':');
  std::string_view kind = text;
  if (colon != std::string_view::npos) {
    u.id = std::string(text.substr(0, colon));
    kind = text.substr(colon + 1);
  }
  auto a = parse_affiliation(kind);
  if (!a || u.id.empty())
    throw Error(ErrorCode::BadParams, "user profile must be ID:academic or ID:commercial, got '" + std::string(text) + "'");
  u.affiliation = *a;
  return u;
}

bool license_allows(LicenseKind license, Affiliation user) noexcept {
  return license != LicenseKind::Academic || user == Affiliation::Academic;
}

std::uint64_t derive_seed(std::uint64_t run_seed, std::string_view activity, std::uint64_t ordinal) {
  const std::string h =
      sha256_hex("seed|" + std::to_string(run_seed) + "|" + std::string(activity) + "|" + std::to_string(ordinal));
  std::uint64_t v = 0;
  std::from_chars(h.data(), h.data() + 15, v, 16);  // 60 bits survive a round trip through double
  return v;
}

ExecutionPlan make_plan(const WorkflowGraph& g, const ResourceManager& registry, const UserProfile& user,
                        const PlanOptions& options) {
  if (options.max_iterations < 1) throw Error(ErrorCode::BadParams, "max_iterations must be >= 1");
  VerifyOptions vo;
  vo.max_iterations = options.max_iterations;
  const auto report = verify(g, vo);
  if (!report.sound()) {
    std::string msg = "workflow '" + g.name() + "' is unsound:";
    for (const auto& f : report.findings) msg += " " + std::string(finding_kind_name(f.kind)) + "(" + f.subject + ")";
    throw Error(ErrorCode::UnsoundWorkflow, msg);
  }

  ExecutionPlan plan{g, options.source_text.empty() ? emit_dsl(g) : options.source_text, {}, {}, options.params,
                     user, options.max_iterations, options.seed};

  const auto activities = g.activity_ids();
  for (const auto& [key, value] : options.params) {
    auto dot = key.find('.');
    if (dot != std::string::npos) {
      if (!std::count(activities.begin(), activities.end(), key.substr(0, dot)))
        throw Error(ErrorCode::BadParams, "parameter '" + key + "' names no activity");
      continue;
    }
    bool declared = false;
    for (const auto& a : activities) declared = declared || g.node(a).params.contains(key);
    if (!declared) throw Error(ErrorCode::BadParams, "no activity declares parameter '" + key + "'");
  }

  for (const auto& [activity, req] : binding_requirements(g)) {
    const auto candidates = registry.discover(req);
    if (candidates.empty()) throw Error(ErrorCode::NoResource, activity);
    std::optional<std::string> chosen;
    for (const auto& id : candidates)
      if (license_allows(registry.descriptor(id).license.kind, user.affiliation)) {
        chosen = id;
        break;
      }
    if (!chosen) {
      const auto d = registry.descriptor(candidates.front());
      throw Error(ErrorCode::LicenseViolation,
                  activity + ": program " + d.program.name + " is under an " + std::string(license_kind_name(d.license.kind)) +
                      " license, refused for " + std::string(affiliation_name(user.affiliation)) + " user " + user.id);
    }
    plan.bindings[activity] = *chosen;
    plan.resources.emplace(*chosen, registry.descriptor(*chosen));
  }
  return plan;
}

ParamMap effective_params(const ExecutionPlan& plan, const std::string& activity, std::uint64_t ordinal) {
  ParamMap out = plan.graph.node(activity).params;
  const std::string prefix = activity + ".";
  for (const auto& [key, value] : plan.params) {
    if (key.find('.') == std::string::npos) {
      if (out.contains(key)) out[key] = value;
    } else if (key.starts_with(prefix)) {
      out[key.substr(prefix.size())] = value;
    }
  }
  if (!out.contains("seed")) out["seed"] = std::to_string(derive_seed(plan.seed, activity, ordinal));
  return out;
}

std::vector<std::string> RunRecord::completed() const {
  std::vector<std::string> out;
  for (const auto& e : trace)
    if (e.kind == "complete") out.push_back(e.node);
  return out;
}

// ---------------------------------------------------------------------------
// Persistence. The plan and the record live as per-run documents.

namespace {

std::string now_iso() {
  using namespace std::chrono;
  const auto t = system_clock::now();
  const std::time_t secs = system_clock::to_time_t(t);
  const auto ms = duration_cast<milliseconds>(t.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

json key_json(const ResultKey& k) {
  return {{"hash", k.hash}, {"run", k.run_id}, {"activity", k.activity_id}, {"sequence", k.sequence}};
}

ResultKey key_from(const json& j) {
  return {j.at("hash").get<std::string>(), j.at("run").get<std::string>(), j.at("activity").get<std::string>(),
          j.at("sequence").get<std::uint64_t>()};
}

json plan_json(const ExecutionPlan& p) {
  json resources = json::array();
  for (const auto& [id, d] : p.resources) resources.push_back(to_resource_xml(d));
  return {{"source", p.source_text},
          {"bindings", p.bindings},
          {"resources", resources},
          {"params", p.params},
          {"user", {{"id", p.user.id}, {"affiliation", affiliation_name(p.user.affiliation)}}},
          {"max_iterations", p.max_iterations},
          {"seed", p.seed}};
}

json record_json(const RunRecord& r) {
  json acts = json::object();
  for (const auto& [id, e] : r.activities) {
    json inputs = json::array();
    for (const auto& k : e.inputs) inputs.push_back(key_json(k));
    acts[id] = {{"resource", e.resource},   {"job", e.job},           {"inputs", inputs},
                {"started", e.started},     {"finished", e.finished}, {"executions", e.executions},
                {"outputs", e.outputs},     {"result", e.result ? key_json(*e.result) : json(nullptr)}};
  }
  json trace = json::array();
  for (const auto& t : r.trace)
    trace.push_back({{"seq", t.seq}, {"kind", t.kind}, {"node", t.node}, {"detail", t.detail}, {"time", t.timestamp}});
  json cps = json::array();
  for (const auto& c : r.checkpoints) cps.push_back({{"activity", c.activity_id}, {"key", key_json(c.key)}});
  json ledger = json::array();
  for (const auto& c : r.provenance.ledger) ledger.push_back({{"text", c.text}, {"origin", c.origin}});
  json resources = json::array();
  for (const auto& d : r.provenance.resources) resources.push_back(to_resource_xml(d));
  return {{"run", r.run_id},
          {"status", run_status_name(r.status)},
          {"workflow", r.workflow},
          {"user", {{"id", r.user.id}, {"affiliation", affiliation_name(r.user.affiliation)}}},
          {"seed", r.seed},
          {"max_iterations", r.max_iterations},
          {"bindings", r.bindings},
          {"activities", acts},
          {"trace", trace},
          {"checkpoints", cps},
          {"provenance",
           {{"workflow_hash", r.provenance.workflow_hash},
            {"params", r.provenance.params},
            {"resources", resources},
            {"ledger", ledger}}},
          {"error", r.error ? json(std::string(error_code_name(*r.error))) : json(nullptr)},
          {"error_message", r.error_message}};
}

UserProfile user_from(const json& j) {
  UserProfile u;
  u.id = j.at("id").get<std::string>();
  u.affiliation = parse_affiliation(j.at("affiliation").get<std::string>()).value_or(Affiliation::Academic);
  return u;
}

std::optional<ErrorCode> error_code_from(const std::string& name) {
  for (int c = 0; c <= static_cast<int>(ErrorCode::Internal); ++c)
    if (error_code_name(static_cast<ErrorCode>(c)) == name) return static_cast<ErrorCode>(c);
  return std::nullopt;
}

RunRecord record_from(const json& j) {
  RunRecord r;
  r.run_id = j.at("run").get<std::string>();
  r.status = parse_run_status(j.at("status").get<std::string>()).value_or(RunStatus::Failed);
  r.workflow = j.at("workflow").get<std::string>();
  r.user = user_from(j.at("user"));
  r.seed = j.at("seed").get<std::uint64_t>();
  r.max_iterations = j.at("max_iterations").get<int>();
  r.bindings = j.at("bindings").get<std::map<std::string, std::string>>();
  for (const auto& [id, a] : j.at("activities").items()) {
    ActivityEntry e;
    e.resource = a.at("resource").get<std::string>();
    e.job = a.at("job").get<std::uint64_t>();
    for (const auto& k : a.at("inputs")) e.inputs.push_back(key_from(k));
    e.started = a.at("started").get<std::string>();
    e.finished = a.at("finished").get<std::string>();
    e.executions = a.at("executions").get<std::uint64_t>();
    e.outputs = a.at("outputs").get<std::map<std::string, std::string>>();
    if (!a.at("result").is_null()) e.result = key_from(a.at("result"));
    r.activities[id] = std::move(e);
  }
  for (const auto& t : j.at("trace"))
    r.trace.push_back({t.at("seq").get<std::uint64_t>(), t.at("kind").get<std::string>(), t.at("node").get<std::string>(),
                       t.at("detail").get<std::string>(), t.at("time").get<std::string>()});
  for (const auto& c : j.at("checkpoints"))
    r.checkpoints.push_back({c.at("activity").get<std::string>(), key_from(c.at("key"))});
  const auto& p = j.at("provenance");
  r.provenance.workflow_hash = p.at("workflow_hash").get<std::string>();
  r.provenance.params = p.at("params").get<ParamMap>();
  for (const auto& x : p.at("resources")) r.provenance.resources.push_back(parse_resource_xml(x.get<std::string>()));
  for (const auto& c : p.at("ledger"))
    r.provenance.ledger.push_back({c.at("text").get<std::string>(), c.at("origin").get<std::string>()});
  if (!j.at("error").is_null()) r.error = error_code_from(j.at("error").get<std::string>());
  r.error_message = j.at("error_message").get<std::string>();
  return r;
}

}  // namespace

ExecutionPlan load_plan(const Storage& storage, const std::string& run_id) {
  auto doc = storage.read_document(run_id, "plan");
  if (!doc) throw Error(ErrorCode::UnknownRun, run_id);
  try {
    const json j = json::parse(*doc);
    const auto source = j.at("source").get<std::string>();
    ExecutionPlan p{parse_workflow(source), source, {}, {}, {}, {}, 100, 0};
    p.bindings = j.at("bindings").get<std::map<std::string, std::string>>();
    for (const auto& x : j.at("resources")) {
      auto d = parse_resource_xml(x.get<std::string>());
      p.resources.emplace(d.id, std::move(d));
    }
    p.params = j.at("params").get<ParamMap>();
    p.user = user_from(j.at("user"));
    p.max_iterations = j.at("max_iterations").get<int>();
    p.seed = j.at("seed").get<std::uint64_t>();
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, "run " + run_id + ": corrupt plan document: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// One invocation of the token game over a run.

class Engine::Run {
 public:
  Run(Engine& engine, ExecutionPlan plan, RunRecord record, const RunOptions& options)
      : storage_(engine.storage_), rm_(engine.resources_), mediator_(engine.storage_), plan_(std::move(plan)),
        rec_(std::move(record)), options_(options), back_(back_edges(plan_.graph)) {}

  void replay_from(const std::vector<Checkpoint>& checkpoints) {
    for (const auto& c : checkpoints) replay_[c.activity_id].push_back(c.key);
  }

  RunRecord go() {
    const auto& g = plan_.graph;
    event("start", g.start_id(), "");
    for (const auto& s : g.successors(g.start_id())) work_.push_back({g.start_id(), s, {}});

    for (;;) {
      while (!work_.empty() && !failing_ && !crashed_) {
        Token t = std::move(work_.front());
        work_.pop_front();
        try {
          arrive(t);
        } catch (const Error& e) {
          fail(e.code(), e.detail(), t.to);
        }
      }
      if (crashed_ || inflight_.empty()) break;
      const bool progressed = rm_.advance();
      std::vector<std::uint64_t> done;
      for (const auto& [job, activity] : inflight_)
        if (is_terminal(rm_.poll({job, rec_.bindings.at(activity)}).state)) done.push_back(job);
      if (!progressed && done.empty()) {
        fail(ErrorCode::Internal, "executor stalled with jobs in flight", "");
        break;
      }
      for (auto job : done) {
        if (crashed_) break;
        const std::string activity = inflight_.at(job);
        inflight_.erase(job);
        finish(activity, job, rm_.poll({job, rec_.bindings.at(activity)}));
      }
    }
    if (crashed_) {
      save();
      return rec_;
    }

    RunStatus status = RunStatus::Completed;
    if (failing_) {
      status = RunStatus::Failed;
    } else {
      std::string stuck;
      for (const auto& [join, buffers] : joins_)
        for (const auto& [pred, tokens] : buffers)
          if (!tokens.empty()) stuck = join;
      if (!stuck.empty() || !final_reached_) {
        rec_.error = ErrorCode::UnsoundWorkflow;
        rec_.error_message = stuck.empty() ? "no final node reached" : "tokens left waiting at join " + stuck;
        status = RunStatus::Failed;
      }
    }
    storage_.set_status(rec_.run_id, status);
    rec_.status = status;
    event("status", "", std::string(run_status_name(status)));
    save();
    return rec_;
  }

 private:
  struct Token {
    std::string from;
    std::string to;
    std::vector<ResultKey> carried;  // datasets visible to a downstream decision
  };

  void event(std::string kind, std::string node, std::string detail) {
    rec_.trace.push_back({rec_.trace.size() + 1, std::move(kind), std::move(node), std::move(detail), now_iso()});
  }

  void save() { storage_.write_document(rec_.run_id, "record", record_json(rec_).dump(1)); }

  void fail(ErrorCode code, const std::string& message, const std::string& node) {
    if (!failing_) {
      rec_.error = code;
      rec_.error_message = message;
    }
    failing_ = true;
    event("fail", node, std::string(error_code_name(code)) + ": " + message);
  }

  void forward(const std::string& from, std::vector<ResultKey> carried) {
    for (const auto& s : plan_.graph.successors(from)) work_.push_back({from, s, carried});
  }

  void arrive(const Token& t) {
    const Node& n = plan_.graph.node(t.to);
    switch (n.kind) {
      case NodeKind::Start:
        break;
      case NodeKind::Final:
        final_reached_ = true;
        event("final", n.id, "");
        break;
      case NodeKind::Fork:
        event("fork", n.id, "");
        forward(n.id, t.carried);
        break;
      case NodeKind::Join: {
        auto& buffers = joins_[n.id];
        buffers[t.from].push_back(t.carried);
        const auto& preds = plan_.graph.predecessors(n.id);
        if (!std::all_of(preds.begin(), preds.end(), [&](const std::string& p) { return !buffers[p].empty(); }))
          break;
        std::vector<ResultKey> merged;
        for (const auto& p : preds) {
          for (auto& k : buffers[p].front())
            if (std::find(merged.begin(), merged.end(), k) == merged.end()) merged.push_back(k);
          buffers[p].pop_front();
        }
        event("join", n.id, "");
        forward(n.id, std::move(merged));
        break;
      }
      case NodeKind::Decision:
        decide(n, t);
        break;
      case NodeKind::Activity:
        start_activity(n.id);
        break;
    }
  }

  void decide(const Node& n, const Token& t) {
    const std::size_t visit = visits_[n.id]++;
    std::size_t chosen = n.branches.size();
    if (options_.outcomes) {
      chosen = options_.outcomes(n.id, visit);
      if (chosen >= n.branches.size())
        throw Error(ErrorCode::InvalidValue, "outcome " + std::to_string(chosen) + " out of range for " + n.id);
    } else {
      // Union of the carried datasets; later producers win name clashes.
      Dataset view;
      std::map<std::string, std::string> owner;
      for (const auto& key : t.carried) {
        const Dataset carried = storage_.get(key);
        for (const auto& [name, obs] : carried.observables()) {
          if (auto o = owner.find(name); o != owner.end() && o->second != key.activity_id)
            event("warning", n.id, "observable " + name + " from " + key.activity_id + " overrides " + o->second);
          owner[name] = key.activity_id;
          view.put(obs);
        }
      }
      for (std::size_t i = 0; i < n.branches.size() && chosen == n.branches.size(); ++i) {
        const auto& b = n.branches[i];
        if (!b.guard) {
          chosen = i;
          break;
        }
        const Observable* obs = view.find(b.guard->observable);
        if (!obs)
          throw Error(ErrorCode::GuardEvaluationError,
                      n.id + ": observable '" + b.guard->observable + "' not in the incoming dataset");
        if (b.guard->holds(*obs)) chosen = i;
      }
      if (chosen == n.branches.size()) throw Error(ErrorCode::GuardEvaluationError, n.id + ": no branch applies");
    }
    const std::string& target = n.branches[chosen].target;
    if (back_.contains({n.id, target})) {
      if (iterations_[n.id] == plan_.max_iterations) throw Error(ErrorCode::IterationLimit, n.id);
      ++iterations_[n.id];
    } else {
      iterations_[n.id] = 0;
    }
    const auto& b = n.branches[chosen];
    event("decision", n.id, std::to_string(chosen) + " -> " + target + (b.guard ? " [" + b.guard->str() + "]" : " [else]"));
    work_.push_back({n.id, target, t.carried});
  }

  void start_activity(const std::string& id) {
    auto& entry = rec_.activities[id];
    if (auto r = replay_.find(id); r != replay_.end() && !r->second.empty()) {
      const ResultKey key = r->second.front();
      r->second.pop_front();
      ++ordinal_[id];
      latest_[id] = key;
      entry.result = key;
      event("reuse", id, key.hash);
      forward(id, {key});
      return;
    }

    const std::string& resource = rec_.bindings.at(id);
    const ResourceDescriptor& desc = plan_.resources.at(resource);
    JobRequest req;
    req.run_id = rec_.run_id;
    req.resource_id = resource;
    req.activity_id = id;
    req.params = effective_params(plan_, id, ordinal_[id]);

    std::size_t k = 0;
    for (const auto& flow : plan_.graph.object_flows()) {
      if (flow.consumer != id) continue;
      auto src = latest_.find(flow.producer);
      if (src == latest_.end())
        throw Error(ErrorCode::ActivityFailed, id + ": no result from " + flow.producer + " to read");
      JobRequest fetch;
      fetch.run_id = rec_.run_id;
      fetch.resource_id = "storage";
      fetch.activity_id = id + "#in" + std::to_string(k);
      fetch.inputs = {{"in", src->second, ""}};
      if (flow.spec.empty()) fetch.params = {{"op", "fetch"}};
      else fetch.params = {{"op", "project"}, {"want", format_extraction_list(flow.spec)}};
      const JobStatus st = mediator_.poll(mediator_.submit(fetch));
      if (st.state != JobState::Succeeded)
        throw Error(ErrorCode::ActivityFailed, id + ": input from " + flow.producer + ": " + st.reason);
      const std::string slot =
          k < desc.launch_template.input_slots.size() ? desc.launch_template.input_slots[k].name : "in" + std::to_string(k);
      req.inputs.push_back({slot, *st.result, ""});
      ++k;
    }

    JobHandle h;
    try {
      h = rm_.submit(req);
    } catch (const Error& e) {
      throw Error(ErrorCode::ActivityFailed, id + ": " + e.what());
    }
    for (const auto& c : desc.license.kind == LicenseKind::Open ? std::vector<std::string>{}
                                                                  : std::vector<std::string>{desc.license.citation})
      cite(c, "program");
    entry.resource = resource;
    entry.job = h.id;
    entry.inputs.clear();
    for (const auto& in : req.inputs) entry.inputs.push_back(in.key);
    entry.started = now_iso();
    inflight_[h.id] = id;
    event("submit", id, "resource=" + resource);
  }

  void finish(const std::string& id, std::uint64_t job, const JobStatus& st) {
    auto& entry = rec_.activities[id];
    entry.finished = now_iso();
    if (st.state != JobState::Succeeded || !st.result) {
      fail(ErrorCode::ActivityFailed, id + ": " + (st.reason.empty() ? std::string(job_state_name(st.state)) : st.reason),
           id);
      save();
      return;
    }
    const ResultKey key = *st.result;
    const auto state = storage_.checkpoint(rec_.run_id, id, key);
    rec_.checkpoints = state.checkpoints;
    ++entry.executions;
    ++ordinal_[id];
    entry.result = key;
    latest_[id] = key;
    entry.outputs.clear();
    const Dataset produced = storage_.get(key);
    for (const auto& [name, obs] : produced.observables())
      if (obs.kind() == ObservableKind::Scalar)
        entry.outputs[name] = format_real(obs.as_scalar()) + " " + obs.unit().name;
    event("complete", id, key.hash);
    save();
    ++new_checkpoints_;
    if (options_.crash_after_checkpoints && new_checkpoints_ >= *options_.crash_after_checkpoints) {
      crashed_ = true;
      return;
    }
    (void)job;
    if (!failing_) forward(id, {key});
  }

  void cite(const std::string& text, const std::string& origin) {
    if (text.empty()) return;
    auto& ledger = rec_.provenance.ledger;
    if (std::none_of(ledger.begin(), ledger.end(), [&](const Citation& c) { return c.text == text; }))
      ledger.push_back({text, origin});
  }

 public:
  void begin_provenance() {
    const auto& g = plan_.graph;
    auto& p = rec_.provenance;
    p.workflow_hash = sha256_hex(plan_.source_text);
    p.params["run.seed"] = std::to_string(plan_.seed);
    p.params["run.max_iterations"] = std::to_string(plan_.max_iterations);
    p.params["run.user"] = plan_.user.id + ":" + std::string(affiliation_name(plan_.user.affiliation));
    for (const auto& [k, v] : plan_.params) p.params["run.param." + k] = v;
    for (const auto& a : g.activity_ids())
      for (const auto& [k, v] : effective_params(plan_, a, 0)) p.params[a + "." + k] = v;
    for (const auto& [id, d] : plan_.resources) p.resources.push_back(d);
    for (const auto& ref : g.source_refs()) cite(ref, "workflow-source");
    for (const auto& id : topological_order(g))
      for (const auto& c : g.node(id).cites) cite(c, "workflow-source");
  }

  RunRecord& record() { return rec_; }

 private:
  Storage& storage_;
  ResourceManager& rm_;
  StorageService mediator_;
  ExecutionPlan plan_;
  RunRecord rec_;
  RunOptions options_;
  std::set<ControlEdge> back_;

  std::deque<Token> work_;
  std::map<std::string, std::map<std::string, std::deque<std::vector<ResultKey>>>> joins_;
  std::map<std::string, std::size_t> visits_;
  std::map<std::string, int> iterations_;
  std::map<std::string, std::uint64_t> ordinal_;
  std::map<std::string, ResultKey> latest_;
  std::map<std::string, std::deque<ResultKey>> replay_;
  std::map<std::uint64_t, std::string> inflight_;
  bool final_reached_ = false;
  bool failing_ = false;
  bool crashed_ = false;
  std::size_t new_checkpoints_ = 0;
};

// ---------------------------------------------------------------------------

Engine::Engine(Storage& storage, ResourceManager& resources) : storage_(storage), resources_(resources) {}

RunRecord Engine::execute(const ExecutionPlan& plan, const RunOptions& options) {
  RunRecord rec;
  rec.run_id = storage_.create_run();
  rec.workflow = plan.graph.name();
  rec.user = plan.user;
  rec.seed = plan.seed;
  rec.max_iterations = plan.max_iterations;
  rec.bindings = plan.bindings;
  storage_.write_document(rec.run_id, "plan", plan_json(plan).dump(1));
  Run run(*this, plan, std::move(rec), options);
  run.begin_provenance();
  return run.go();
}

RunRecord Engine::resume(const std::string& run_id, const RunOptions& options) {
  RunRecord rec = record(run_id);
  if (rec.status == RunStatus::Completed) throw Error(ErrorCode::NothingToResume, run_id + " already completed");
  ExecutionPlan plan = load_plan(storage_, run_id);
  const RunState state = storage_.run_state(run_id);
  storage_.set_status(run_id, RunStatus::Active);
  rec.status = RunStatus::Active;
  rec.error.reset();
  rec.error_message.clear();
  rec.checkpoints = state.checkpoints;
  rec.trace.push_back({rec.trace.size() + 1, "resume", "", std::to_string(state.checkpoints.size()) + " checkpoints",
                       now_iso()});
  Run run(*this, std::move(plan), std::move(rec), options);
  run.replay_from(state.checkpoints);
  return run.go();
}

RunRecord Engine::rollback(const std::string& run_id, const std::string& activity) {
  RunRecord rec = record(run_id);
  const RunState state = storage_.rollback(run_id, activity);
  rec.status = state.status;
  rec.checkpoints = state.checkpoints;
  rec.trace.push_back({rec.trace.size() + 1, "rollback", activity,
                       std::to_string(state.checkpoints.size()) + " checkpoints kept", now_iso()});
  storage_.write_document(run_id, "record", record_json(rec).dump(1));
  return rec;
}

RunRecord Engine::record(const std::string& run_id) const {
  if (!storage_.has_run(run_id)) throw Error(ErrorCode::UnknownRun, run_id);
  auto doc = storage_.read_document(run_id, "record");
  if (!doc) throw Error(ErrorCode::UnknownRun, run_id + " has no run record");
  try {
    RunRecord r = record_from(json::parse(*doc));
    // The index is authoritative for status and checkpoints.
    const RunState st = storage_.run_state(run_id);
    r.status = st.status;
    r.checkpoints = st.checkpoints;
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, "run " + run_id + ": corrupt record: " + e.what());
  }
}

ProvenanceRecord Engine::provenance(const std::string& run_id) const { return record(run_id).provenance; }

// ---------------------------------------------------------------------------
// Reports

namespace {

// Keys inside a report are relative to its run.
std::string run_key(const ResultKey& k) {
  return k.activity_id + "/" + std::to_string(k.sequence) + "/" + k.hash;
}

}  // namespace

std::string report_text(const RunRecord& r, bool redact) {
  auto ts = [&](const std::string& t) { return redact || t.empty() ? std::string("-") : t; };
  std::string out = "gridflow-report 1\n";
  out += "run " + r.run_id + "\n";
  out += "status " + std::string(run_status_name(r.status)) + "\n";
  out += "workflow " + r.workflow + "\n";
  out += "workflow-sha256 " + r.provenance.workflow_hash + "\n";
  out += "user " + r.user.id + " " + std::string(affiliation_name(r.user.affiliation)) + "\n";
  out += "seed " + std::to_string(r.seed) + "\n";
  out += "max-iterations " + std::to_string(r.max_iterations) + "\n";
  if (r.error) out += "error " + std::string(error_code_name(*r.error)) + " " + r.error_message + "\n";
  for (const auto& [k, v] : r.provenance.params) out += "param " + k + " = " + v + "\n";
  for (const auto& d : r.provenance.resources)
    out += "resource " + d.id + " program=" + d.program.str() + " calculator=" + d.calculator.name +
           " license=" + std::string(license_kind_name(d.license.kind)) + " descriptor-sha256=" +
           sha256_hex(to_resource_xml(d)) + "\n";
  for (const auto& [a, res] : r.bindings) out += "binding " + a + " " + res + "\n";
  for (const auto& [a, e] : r.activities) {
    out += "activity " + a + " executions=" + std::to_string(e.executions) + " resource=" + e.resource +
           " result=" + (e.result ? run_key(*e.result) : "-") + " started=" + ts(e.started) + " finished=" + ts(e.finished) +
           "\n";
    for (const auto& in : e.inputs) out += "input " + a + " " + run_key(in) + "\n";
    for (const auto& [name, v] : e.outputs) out += "output " + a + " " + name + " " + v + "\n";
  }
  for (std::size_t i = 0; i < r.checkpoints.size(); ++i)
    out += "checkpoint " + std::to_string(i) + " " + r.checkpoints[i].activity_id + " " + r.checkpoints[i].key.hash + "\n";
  for (const auto& c : r.provenance.ledger) out += "cite " + c.origin + " " + c.text + "\n";
  for (const auto& t : r.trace)
    out += "trace " + std::to_string(t.seq) + " " + ts(t.timestamp) + " " + t.kind + " " + (t.node.empty() ? "-" : t.node) +
           (t.detail.empty() ? "" : " " + t.detail) + "\n";
  return out;
}

std::string report_json(const RunRecord& r, bool redact) {
  json j = record_json(r);
  if (redact) {
    for (auto& [id, a] : j["activities"].items()) {
      a["started"] = "-";
      a["finished"] = "-";
    }
    for (auto& t : j["trace"]) t["time"] = "-";
  }
  return j.dump(2) + "\n";
}

}  // namespace gridflow
