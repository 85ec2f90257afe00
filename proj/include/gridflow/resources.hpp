#pragma once

// Fabric-layer virtualization of "calculator + program" resources:
// registration, discovery, launch-template rendering, the job lifecycle and
// usage accounting. Actual execution is delegated to an Executor.

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gridflow/quantities.hpp"
#include "gridflow/result_key.hpp"

namespace gridflow {

using ParamMap = std::map<std::string, std::string>;

enum class LicenseKind { Open, Academic, Commercial };
std::string_view license_kind_name(LicenseKind kind) noexcept;
std::optional<LicenseKind> parse_license_kind(std::string_view text) noexcept;

struct License {
  LicenseKind kind = LicenseKind::Open;
  std::string citation;
  friend bool operator==(const License&, const License&) = default;
};

struct ProgramId {
  std::string name;
  std::string version;
  std::string str() const { return version.empty() ? name : name + "-" + version; }
  friend bool operator==(const ProgramId&, const ProgramId&) = default;
};

struct Calculator {
  std::string name;
  std::string platform;
  int max_jobs = 1;
  friend bool operator==(const Calculator&, const Calculator&) = default;
};

struct InputSlot {
  std::string name;
  ExtractionSpec expected;
  friend bool operator==(const InputSlot&, const InputSlot&) = default;
};

struct LaunchTemplate {
  std::string command_pattern;  // `${slot}`, `${workdir}`, `${params.key}`
  std::vector<InputSlot> input_slots;
  std::string output_slot;
  std::string platform;
  friend bool operator==(const LaunchTemplate&, const LaunchTemplate&) = default;
};

struct ResourceDescriptor {
  std::string id;
  ProgramId program;
  Calculator calculator;
  std::set<std::string> capabilities;
  License license;
  LaunchTemplate launch_template;
  double cost_weight = 0.0;
  friend bool operator==(const ResourceDescriptor&, const ResourceDescriptor&) = default;
};

// Throws InvalidDescriptor naming the first violated invariant.
void validate_descriptor(const ResourceDescriptor& d);
std::vector<std::string> template_placeholders(std::string_view pattern);

ResourceDescriptor parse_resource_xml(std::string_view xml);
std::string to_resource_xml(const ResourceDescriptor& d);

struct BindingRequirement {
  std::optional<std::string> program;
  std::optional<std::string> actuator;
  std::set<std::string> capabilities;
  friend bool operator==(const BindingRequirement&, const BindingRequirement&) = default;
};

struct JobInput {
  std::string slot;
  ResultKey key;
  std::string staged_path;  // empty: derived from workdir, slot and hash
};

struct JobRequest {
  std::string run_id;
  std::string resource_id;
  std::string activity_id;
  std::vector<JobInput> inputs;
  ParamMap params;
};

struct LaunchPlan {
  std::string command;
  std::vector<std::pair<std::string, std::string>> staged;  // slot -> path
};

LaunchPlan render_launch(const LaunchTemplate& t, const JobRequest& req, std::string_view workdir);

enum class JobState { Queued, Running, Succeeded, Failed, Withdrawn };
std::string_view job_state_name(JobState s) noexcept;
bool is_terminal(JobState s) noexcept;
// Permitted transition in the job status relation.
bool is_valid_transition(JobState from, JobState to) noexcept;

struct JobStatus {
  JobState state = JobState::Queued;
  std::optional<ResultKey> result;  // when succeeded
  std::string reason;               // when failed / withdrawn
};

struct JobHandle {
  std::uint64_t id = 0;
  std::string resource_id;
  friend bool operator==(const JobHandle&, const JobHandle&) = default;
};

struct UsageRecord {
  std::string resource_id;
  std::uint64_t started = 0;
  std::uint64_t succeeded = 0;
  std::uint64_t failed = 0;
  std::uint64_t withdrawn = 0;
  double wall_seconds = 0.0;
};

// Same submit/poll shape for compute resources and the storage mediator.
class Service {
 public:
  virtual ~Service() = default;
  virtual JobHandle submit(const JobRequest& req) = 0;
  virtual JobStatus poll(const JobHandle& h) const = 0;
  // Makes progress on outstanding jobs; false once nothing is outstanding.
  virtual bool advance() = 0;
};

struct JobOutcome {
  bool ok = false;
  std::optional<ResultKey> result;
  std::string reason;
  double elapsed_seconds = 0.0;
};

class Executor {
 public:
  virtual ~Executor() = default;
  virtual void launch(std::uint64_t job, const ResourceDescriptor& resource, const JobRequest& req,
                      const LaunchPlan& plan) = 0;
  // Blocks until the next launched job completes; nullopt when none is in flight.
  virtual std::optional<std::pair<std::uint64_t, JobOutcome>> next_completion() = 0;
  virtual void cancel(std::uint64_t job) = 0;
};

struct JobEvent {
  std::uint64_t job = 0;
  std::string resource_id;
  JobState state = JobState::Queued;
};

class ResourceManager : public Service {
 public:
  explicit ResourceManager(Executor* executor = nullptr) : executor_(executor) {}

  void set_executor(Executor* executor) { executor_ = executor; }

  std::string register_resource(ResourceDescriptor d);
  std::vector<std::string> discover(const BindingRequirement& req) const;
  // Tombstones the resource; its queued and running jobs become withdrawn.
  void withdraw(const std::string& resource_id);

  bool contains(const std::string& resource_id) const;
  bool is_withdrawn(const std::string& resource_id) const;
  ResourceDescriptor descriptor(const std::string& resource_id) const;
  std::vector<std::string> resource_ids() const;
  UsageRecord usage(const std::string& resource_id) const;

  JobHandle submit(const JobRequest& req) override;
  JobStatus poll(const JobHandle& h) const override;
  bool advance() override;

  std::optional<LaunchPlan> launch_plan(const JobHandle& h) const;
  std::vector<JobState> history(const JobHandle& h) const;
  std::vector<JobEvent> events() const;
  bool busy() const;

 private:
  struct Entry {
    ResourceDescriptor descriptor;
    bool withdrawn = false;
    UsageRecord usage;
    int running = 0;
  };
  struct Job {
    JobRequest request;
    LaunchPlan plan;
    JobStatus status;
    std::vector<JobState> history;
  };

  void transition(std::uint64_t id, Job& job, JobState to);
  void start_queued(const std::string& resource_id);
  const Job& job_for(const JobHandle& h) const;

  Executor* executor_;
  mutable std::shared_mutex registry_mutex_;
  std::map<std::string, Entry> resources_;

  mutable std::mutex jobs_mutex_;
  std::uint64_t next_job_ = 1;
  std::map<std::uint64_t, Job> jobs_;
  std::map<std::string, std::vector<std::uint64_t>> queues_;
  std::vector<JobEvent> events_;
};

}  // namespace gridflow
