#pragma once

// Workflow execution: binding resolution with the license gate, the token
// game over a WorkflowGraph with real jobs, checkpoints after every
// activity, resume from committed checkpoints, provenance and the citation
// ledger.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridflow/error.hpp"
#include "gridflow/resources.hpp"
#include "gridflow/storage.hpp"
#include "gridflow/workflow.hpp"

namespace gridflow {

enum class Affiliation { Academic, Commercial };
std::string_view affiliation_name(Affiliation a) noexcept;
std::optional<Affiliation> parse_affiliation(std::string_view text) noexcept;

struct UserProfile {
  std::string id = "anonymous";
  Affiliation affiliation = Affiliation::Academic;
  friend bool operator==(const UserProfile&, const UserProfile&) = default;
};
// "ID:academic" or "ID:commercial"; a bare kind keeps the default id.
UserProfile parse_user_profile(std::string_view text);

// Open and commercial licenses are usable by everyone, academic licenses
// only in academic contexts.
bool license_allows(LicenseKind license, Affiliation user) noexcept;

struct ExecutionPlan {
  WorkflowGraph graph;
  std::string source_text;                      // DSL text the graph came from
  std::map<std::string, std::string> bindings;  // activity -> resource id
  std::map<std::string, ResourceDescriptor> resources;
  ParamMap params;  // "key" applies to every activity declaring it, "act.key" to one
  UserProfile user;
  int max_iterations = 100;
  std::uint64_t seed = 0;
};

struct PlanOptions {
  int max_iterations = 100;
  std::uint64_t seed = 0;
  ParamMap params;
  std::string source_text;  // emit_dsl(g) when empty
};

// Throws UnsoundWorkflow, NoResource, LicenseViolation, BadParams.
ExecutionPlan make_plan(const WorkflowGraph& g, const ResourceManager& registry, const UserProfile& user,
                        const PlanOptions& options = {});

// Seed of the `ordinal`-th execution of an activity within a run.
std::uint64_t derive_seed(std::uint64_t run_seed, std::string_view activity, std::uint64_t ordinal);

// Activity parameters after run-level overrides, plus the derived seed.
ParamMap effective_params(const ExecutionPlan& plan, const std::string& activity, std::uint64_t ordinal);

struct Citation {
  std::string text;
  std::string origin;  // "program" or "workflow-source"
  friend bool operator==(const Citation&, const Citation&) = default;
};

struct ProvenanceRecord {
  std::string workflow_hash;  // SHA-256 of the workflow source text
  ParamMap params;            // run settings and effective activity parameters
  std::vector<ResourceDescriptor> resources;  // used, sorted by id
  std::vector<Citation> ledger;               // in order of first use
  friend bool operator==(const ProvenanceRecord&, const ProvenanceRecord&) = default;
};

struct TraceEvent {
  std::uint64_t seq = 0;
  std::string kind;  // start submit complete reuse fail fork join decision final warning resume status
  std::string node;
  std::string detail;
  std::string timestamp;
  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct ActivityEntry {
  std::string resource;
  std::uint64_t job = 0;
  std::optional<ResultKey> result;
  std::vector<ResultKey> inputs;
  std::string started;
  std::string finished;
  std::uint64_t executions = 0;  // jobs that ran to success in any invocation
  std::map<std::string, std::string> outputs;  // scalar observables of the latest result, "value unit"
  friend bool operator==(const ActivityEntry&, const ActivityEntry&) = default;
};

struct RunRecord {
  std::string run_id;
  RunStatus status = RunStatus::Active;
  std::string workflow;
  UserProfile user;
  std::uint64_t seed = 0;
  int max_iterations = 100;
  std::map<std::string, std::string> bindings;
  std::map<std::string, ActivityEntry> activities;
  std::vector<TraceEvent> trace;
  std::vector<Checkpoint> checkpoints;
  ProvenanceRecord provenance;
  std::optional<ErrorCode> error;
  std::string error_message;

  // Activities completed in trace order ("complete" events only).
  std::vector<std::string> completed() const;
};

struct RunOptions {
  // Replaces guard evaluation: decision id and 0-based visit -> branch index.
  std::function<std::size_t(const std::string&, std::size_t)> outcomes;
  // Simulated crash: stop after this many new checkpoints, leaving the run
  // active as a killed process would.
  std::optional<std::size_t> crash_after_checkpoints;
};

class Engine {
 public:
  Engine(Storage& storage, ResourceManager& resources);

  RunRecord execute(const ExecutionPlan& plan, const RunOptions& options = {});
  // Throws UnknownRun, NothingToResume.
  RunRecord resume(const std::string& run_id, const RunOptions& options = {});
  // Truncates checkpoints after `activity`; the next resume re-executes the rest.
  RunRecord rollback(const std::string& run_id, const std::string& activity);

  RunRecord record(const std::string& run_id) const;
  ProvenanceRecord provenance(const std::string& run_id) const;

 private:
  class Run;
  Storage& storage_;
  ResourceManager& resources_;
};

// Stored plan of a run, for callers that must configure an executor before
// resuming. Throws UnknownRun.
ExecutionPlan load_plan(const Storage& storage, const std::string& run_id);

// Deterministic report documents. `redact` replaces timestamps with "-".
std::string report_text(const RunRecord& record, bool redact);
std::string report_json(const RunRecord& record, bool redact);

}  // namespace gridflow
