#pragma once

// The mediator through which services exchange data. Datasets are stored as
// content-addressed blobs (`store/<hash>`); every put, checkpoint, rollback
// and status change is appended to a line-oriented index, so the on-disk
// state is append-only.

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "gridflow/quantities.hpp"
#include "gridflow/resources.hpp"
#include "gridflow/result_key.hpp"

namespace gridflow {

enum class RunStatus { Active, Failed, Completed, RolledBack };
std::string_view run_status_name(RunStatus s) noexcept;
std::optional<RunStatus> parse_run_status(std::string_view s) noexcept;

struct Checkpoint {
  std::string activity_id;
  ResultKey key;
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

struct RunState {
  std::string run_id;
  std::vector<Checkpoint> checkpoints;
  RunStatus status = RunStatus::Active;
};

class Storage {
 public:
  struct Options {
    std::optional<std::uint64_t> max_blobs;  // StorageFull beyond this
  };

  explicit Storage(std::filesystem::path root);
  Storage(std::filesystem::path root, Options options);

  const std::filesystem::path& root() const noexcept { return root_; }

  // Allocates the next run id ("run-0001", ...) and records it.
  std::string create_run();
  bool has_run(const std::string& run_id) const;
  std::vector<std::string> runs() const;

  ResultKey put(const Dataset& ds, const std::string& run_id, const std::string& activity_id);
  Dataset get(const ResultKey& key) const;
  std::vector<ResultKey> keys(const std::string& run_id) const;

  RunState checkpoint(const std::string& run_id, const std::string& activity_id, const ResultKey& key);
  // Truncates checkpoints after the last checkpoint of `activity_id`.
  RunState rollback(const std::string& run_id, const std::string& activity_id);
  RunState set_status(const std::string& run_id, RunStatus status);
  RunState run_state(const std::string& run_id) const;

  // Mutable per-run documents (run manifest, run record). Not part of the
  // content-addressed store.
  void write_document(const std::string& run_id, const std::string& name, const std::string& text);
  std::optional<std::string> read_document(const std::string& run_id, const std::string& name) const;

  std::filesystem::path blob_path(const std::string& hash) const;
  std::filesystem::path index_path() const;

 private:
  void load_index();
  void append_index(const std::string& line);
  RunState& state_for(const std::string& run_id);
  const RunState& state_for(const std::string& run_id) const;

  std::filesystem::path root_;
  Options options_;
  mutable std::mutex mutex_;
  std::vector<std::string> run_order_;
  std::map<std::string, RunState> runs_;
  std::map<std::string, std::vector<ResultKey>> puts_;
  std::map<std::pair<std::string, std::string>, std::uint64_t> next_sequence_;
  std::uint64_t blob_count_ = 0;
};

// The storage mediator behind the same submit/poll interface as compute
// services. Supported `op` params: "fetch" (integrity-checked read, result is
// the input key) and "project" (`want` = "name:unit,...", result stored under
// the request's run/activity).
class StorageService : public Service {
 public:
  explicit StorageService(Storage& storage) : storage_(storage) {}

  JobHandle submit(const JobRequest& req) override;
  JobStatus poll(const JobHandle& h) const override;
  bool advance() override { return false; }

 private:
  Storage& storage_;
  mutable std::mutex mutex_;
  std::vector<JobStatus> jobs_;
};

ExtractionSpec parse_extraction_list(std::string_view text);
std::string format_extraction_list(const ExtractionSpec& spec);

}  // namespace gridflow
