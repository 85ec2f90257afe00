#include "gridflow/resources.hpp"

#include <algorithm>

#include "gridflow/error.hpp"

namespace gridflow {

std::string_view license_kind_name(LicenseKind kind) noexcept {
  switch (kind) {
    case LicenseKind::Open: return "open";
    case LicenseKind::Academic: return "academic";
    case LicenseKind::Commercial: return "commercial";
  }
  return "?";
}

std::optional<LicenseKind> parse_license_kind(std::string_view text) noexcept {
  if (text == "open") return LicenseKind::Open;
  if (text == "academic") return LicenseKind::Academic;
  if (text == "commercial") return LicenseKind::Commercial;
  return std::nullopt;
}

std::string_view job_state_name(JobState s) noexcept {
  switch (s) {
    case JobState::Queued: return "queued";
    case JobState::Running: return "running";
    case JobState::Succeeded: return "succeeded";
    case JobState::Failed: return "failed";
    case JobState::Withdrawn: return "withdrawn";
  }
  return "?";
}

bool is_terminal(JobState s) noexcept {
  return s == JobState::Succeeded || s == JobState::Failed || s == JobState::Withdrawn;
}

bool is_valid_transition(JobState from, JobState to) noexcept {
  if (is_terminal(from)) return false;
  if (to == JobState::Withdrawn) return true;
  if (from == JobState::Queued) return to == JobState::Running;
  return to == JobState::Succeeded || to == JobState::Failed;
}

std::vector<std::string> template_placeholders(std::string_view pattern) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = pattern.find("${", pos)) != std::string_view::npos) {
    auto close = pattern.find('}', pos + 2);
    if (close == std::string_view::npos)
      throw Error(ErrorCode::InvalidDescriptor, "unterminated placeholder in '" + std::string(pattern) + "'");
    out.emplace_back(pattern.substr(pos + 2, close - pos - 2));
    pos = close + 1;
  }
  return out;
}

void validate_descriptor(const ResourceDescriptor& d) {
  auto bad = [&](const std::string& why) {
    throw Error(ErrorCode::InvalidDescriptor, (d.id.empty() ? std::string("<no id>") : d.id) + ": " + why);
  };
  if (d.id.empty()) bad("id is empty");
  if (d.program.name.empty()) bad("program name is empty");
  if (d.calculator.max_jobs < 1) bad("max concurrent jobs must be >= 1");
  if (d.capabilities.empty()) bad("capabilities are empty");
  if (!(d.cost_weight >= 0.0)) bad("cost weight must be nonnegative");
  if (d.license.kind != LicenseKind::Open && d.license.citation.empty())
    bad("non-open license needs a citation");
  std::set<std::string_view> slots;
  for (const auto& s : d.launch_template.input_slots) {
    if (s.name.empty() || s.name == "workdir" || s.name.starts_with("params."))
      bad("invalid input slot name '" + s.name + "'");
    if (!slots.insert(s.name).second) bad("duplicate input slot '" + s.name + "'");
  }
  for (const auto& p : template_placeholders(d.launch_template.command_pattern)) {
    if (p == "workdir" || slots.contains(p)) continue;
    if (p.starts_with("params.") && p.size() > 7) continue;
    bad("template references undeclared placeholder ${" + p + "}");
  }
}

LaunchPlan render_launch(const LaunchTemplate& t, const JobRequest& req, std::string_view workdir) {
  LaunchPlan plan;
  std::map<std::string, std::string, std::less<>> bound;
  for (const auto& slot : t.input_slots) {
    auto it = std::find_if(req.inputs.begin(), req.inputs.end(),
                           [&](const JobInput& in) { return in.slot == slot.name; });
    if (it == req.inputs.end()) throw Error(ErrorCode::MissingInput, slot.name);
    std::string path = it->staged_path.empty()
                           ? std::string(workdir) + "/" + slot.name + "-" + it->key.hash.substr(0, 16) + ".ds"
                           : it->staged_path;
    plan.staged.emplace_back(slot.name, path);
    bound.emplace(slot.name, std::move(path));
  }

  const std::string& pattern = t.command_pattern;
  std::size_t pos = 0;
  while (pos < pattern.size()) {
    auto open = pattern.find("${", pos);
    if (open == std::string::npos) {
      plan.command.append(pattern, pos);
      break;
    }
    plan.command.append(pattern, pos, open - pos);
    auto close = pattern.find('}', open + 2);
    if (close == std::string::npos) throw Error(ErrorCode::UnboundPlaceholder, pattern.substr(open));
    const std::string name = pattern.substr(open + 2, close - open - 2);
    if (name == "workdir") {
      plan.command += workdir;
    } else if (name.starts_with("params.")) {
      auto it = req.params.find(name.substr(7));
      if (it == req.params.end()) throw Error(ErrorCode::UnboundPlaceholder, name);
      plan.command += it->second;
    } else if (auto it = bound.find(name); it != bound.end()) {
      plan.command += it->second;
    } else {
      throw Error(ErrorCode::UnboundPlaceholder, name);
    }
    pos = close + 1;
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Registry

std::string ResourceManager::register_resource(ResourceDescriptor d) {
  validate_descriptor(d);
  std::unique_lock lock(registry_mutex_);
  if (resources_.contains(d.id)) throw Error(ErrorCode::DuplicateResource, d.id);
  std::string id = d.id;
  Entry e;
  e.usage.resource_id = id;
  e.descriptor = std::move(d);
  resources_.emplace(id, std::move(e));
  return id;
}

std::vector<std::string> ResourceManager::discover(const BindingRequirement& req) const {
  std::shared_lock lock(registry_mutex_);
  std::vector<const Entry*> hits;
  for (const auto& [id, e] : resources_) {
    if (e.withdrawn) continue;
    const auto& d = e.descriptor;
    if (req.actuator && *req.actuator != id) continue;
    if (req.program && *req.program != d.program.name) continue;
    if (!std::includes(d.capabilities.begin(), d.capabilities.end(), req.capabilities.begin(),
                       req.capabilities.end()))
      continue;
    hits.push_back(&e);
  }
  std::stable_sort(hits.begin(), hits.end(), [](const Entry* a, const Entry* b) {
    if (a->descriptor.cost_weight != b->descriptor.cost_weight)
      return a->descriptor.cost_weight < b->descriptor.cost_weight;
    return a->descriptor.id < b->descriptor.id;
  });
  std::vector<std::string> out;
  for (const auto* e : hits) out.push_back(e->descriptor.id);
  return out;
}

void ResourceManager::withdraw(const std::string& resource_id) {
  {
    std::unique_lock lock(registry_mutex_);
    auto it = resources_.find(resource_id);
    if (it == resources_.end()) throw Error(ErrorCode::UnknownResource, resource_id);
    it->second.withdrawn = true;
  }
  std::vector<std::uint64_t> cancelled;
  {
    std::scoped_lock lock(jobs_mutex_, registry_mutex_);
    auto& entry = resources_.at(resource_id);
    for (auto& [id, job] : jobs_) {
      if (job.request.resource_id != resource_id || is_terminal(job.status.state)) continue;
      if (job.status.state == JobState::Running) {
        --entry.running;
        cancelled.push_back(id);
      }
      job.status.reason = "resource withdrawn";
      transition(id, job, JobState::Withdrawn);
      ++entry.usage.withdrawn;
    }
    queues_[resource_id].clear();
  }
  if (executor_)
    for (auto id : cancelled) executor_->cancel(id);
}

bool ResourceManager::contains(const std::string& resource_id) const {
  std::shared_lock lock(registry_mutex_);
  return resources_.contains(resource_id);
}

bool ResourceManager::is_withdrawn(const std::string& resource_id) const {
  std::shared_lock lock(registry_mutex_);
  auto it = resources_.find(resource_id);
  if (it == resources_.end()) throw Error(ErrorCode::UnknownResource, resource_id);
  return it->second.withdrawn;
}

ResourceDescriptor ResourceManager::descriptor(const std::string& resource_id) const {
  std::shared_lock lock(registry_mutex_);
  auto it = resources_.find(resource_id);
  if (it == resources_.end()) throw Error(ErrorCode::UnknownResource, resource_id);
  return it->second.descriptor;
}

std::vector<std::string> ResourceManager::resource_ids() const {
  std::shared_lock lock(registry_mutex_);
  std::vector<std::string> out;
  for (const auto& [id, e] : resources_) out.push_back(id);
  return out;
}

UsageRecord ResourceManager::usage(const std::string& resource_id) const {
  std::shared_lock lock(registry_mutex_);
  auto it = resources_.find(resource_id);
  if (it == resources_.end()) throw Error(ErrorCode::UnknownResource, resource_id);
  return it->second.usage;
}

// ---------------------------------------------------------------------------
// Jobs

void ResourceManager::transition(std::uint64_t id, Job& job, JobState to) {
  if (!is_valid_transition(job.status.state, to))
    throw Error(ErrorCode::Internal, "illegal job transition " + std::string(job_state_name(job.status.state)) +
                                         " -> " + std::string(job_state_name(to)));
  job.status.state = to;
  job.history.push_back(to);
  events_.push_back({id, job.request.resource_id, to});
}

JobHandle ResourceManager::submit(const JobRequest& req) {
  ResourceDescriptor d;
  {
    std::shared_lock lock(registry_mutex_);
    auto it = resources_.find(req.resource_id);
    if (it == resources_.end()) throw Error(ErrorCode::UnknownResource, req.resource_id);
    if (it->second.withdrawn) throw Error(ErrorCode::ResourceWithdrawn, req.resource_id);
    d = it->second.descriptor;
  }
  if (!executor_) throw Error(ErrorCode::Internal, "no executor attached");

  std::uint64_t id;
  {
    std::scoped_lock lock(jobs_mutex_);
    id = next_job_++;
  }
  const std::string workdir = "/grid/" + d.calculator.name + "/" + req.run_id + "/" + req.activity_id +
                              "." + std::to_string(id);
  Job job;
  job.request = req;
  job.plan = render_launch(d.launch_template, req, workdir);
  job.history.push_back(JobState::Queued);
  {
    std::scoped_lock lock(jobs_mutex_, registry_mutex_);
    ++resources_.at(req.resource_id).usage.started;
    events_.push_back({id, req.resource_id, JobState::Queued});
    jobs_.emplace(id, std::move(job));
    queues_[req.resource_id].push_back(id);
  }
  start_queued(req.resource_id);
  return {id, req.resource_id};
}

void ResourceManager::start_queued(const std::string& resource_id) {
  std::vector<std::uint64_t> to_launch;
  ResourceDescriptor d;
  {
    std::scoped_lock lock(jobs_mutex_, registry_mutex_);
    auto& entry = resources_.at(resource_id);
    d = entry.descriptor;
    auto& queue = queues_[resource_id];
    while (!queue.empty() && entry.running < d.calculator.max_jobs && !entry.withdrawn) {
      auto id = queue.front();
      queue.erase(queue.begin());
      auto& job = jobs_.at(id);
      transition(id, job, JobState::Running);
      ++entry.running;
      to_launch.push_back(id);
    }
  }
  for (auto id : to_launch) {
    JobRequest req;
    LaunchPlan plan;
    {
      std::scoped_lock lock(jobs_mutex_);
      req = jobs_.at(id).request;
      plan = jobs_.at(id).plan;
    }
    executor_->launch(id, d, req, plan);
  }
}

bool ResourceManager::advance() {
  if (!executor_ || !busy()) return false;
  auto done = executor_->next_completion();
  if (!done) return busy();
  auto& [id, outcome] = *done;
  std::string resource_id;
  {
    std::scoped_lock lock(jobs_mutex_, registry_mutex_);
    auto it = jobs_.find(id);
    if (it == jobs_.end() || is_terminal(it->second.status.state)) return true;
    auto& job = it->second;
    resource_id = job.request.resource_id;
    auto& entry = resources_.at(resource_id);
    --entry.running;
    entry.usage.wall_seconds += outcome.elapsed_seconds;
    if (outcome.ok) {
      job.status.result = outcome.result;
      transition(id, job, JobState::Succeeded);
      ++entry.usage.succeeded;
    } else {
      job.status.reason = outcome.reason;
      transition(id, job, JobState::Failed);
      ++entry.usage.failed;
    }
  }
  start_queued(resource_id);
  return true;
}

const ResourceManager::Job& ResourceManager::job_for(const JobHandle& h) const {
  auto it = jobs_.find(h.id);
  if (it == jobs_.end() || it->second.request.resource_id != h.resource_id)
    throw Error(ErrorCode::UnknownJob, std::to_string(h.id) + "@" + h.resource_id);
  return it->second;
}

JobStatus ResourceManager::poll(const JobHandle& h) const {
  std::scoped_lock lock(jobs_mutex_);
  return job_for(h).status;
}

std::optional<LaunchPlan> ResourceManager::launch_plan(const JobHandle& h) const {
  std::scoped_lock lock(jobs_mutex_);
  return job_for(h).plan;
}

std::vector<JobState> ResourceManager::history(const JobHandle& h) const {
  std::scoped_lock lock(jobs_mutex_);
  return job_for(h).history;
}

std::vector<JobEvent> ResourceManager::events() const {
  std::scoped_lock lock(jobs_mutex_);
  return events_;
}

bool ResourceManager::busy() const {
  std::scoped_lock lock(jobs_mutex_);
  for (const auto& [id, job] : jobs_)
    if (!is_terminal(job.status.state)) return true;
  return false;
}

}  // namespace gridflow
