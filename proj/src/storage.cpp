#include "gridflow/storage.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gridflow/error.hpp"
#include "gridflow/hash.hpp"

namespace gridflow {

namespace fs = std::filesystem;

std::string_view run_status_name(RunStatus s) noexcept {
  switch (s) {
    case RunStatus::Active: return "active";
    case RunStatus::Failed: return "failed";
    case RunStatus::Completed: return "completed";
    case RunStatus::RolledBack: return "rolled-back";
  }
  return "?";
}

std::optional<RunStatus> parse_run_status(std::string_view s) noexcept {
  if (s == "active") return RunStatus::Active;
  if (s == "failed") return RunStatus::Failed;
  if (s == "completed") return RunStatus::Completed;
  if (s == "rolled-back") return RunStatus::RolledBack;
  return std::nullopt;
}

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_atomically(const fs::path& p, const std::string& bytes) {
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to " + tmp.string());
  }
  fs::rename(tmp, p);
}

bool valid_token(const std::string& s) {
  return !s.empty() && s.find_first_of(" \t\r\n/") == std::string::npos;
}

}  // namespace

Storage::Storage(fs::path root) : Storage(std::move(root), Options{}) {}

Storage::Storage(fs::path root, Options options) : root_(std::move(root)), options_(options) {
  std::error_code ec;
  fs::create_directories(root_ / "store", ec);
  fs::create_directories(root_ / "runs", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create store at " + root_.string() + ": " + ec.message());
  for (const auto& e : fs::directory_iterator(root_ / "store"))
    if (e.is_regular_file() && e.path().extension() != ".tmp") ++blob_count_;
  load_index();
}

fs::path Storage::blob_path(const std::string& hash) const { return root_ / "store" / hash; }
fs::path Storage::index_path() const { return root_ / "index"; }

void Storage::load_index() {
  if (!fs::exists(index_path())) return;
  std::istringstream in(read_file(index_path()));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    std::istringstream ls(line);
    std::string tag, run;
    ls >> tag >> run;
    auto corrupt = [&] { throw Error(ErrorCode::ParseError, "index line " + std::to_string(n) + ": " + line); };
    if (tag == "run") {
      if (runs_.contains(run)) corrupt();
      run_order_.push_back(run);
      runs_[run] = RunState{run, {}, RunStatus::Active};
    } else if (tag == "put" || tag == "ckpt") {
      ResultKey k;
      k.run_id = run;
      if (!(ls >> k.activity_id >> k.sequence >> k.hash)) corrupt();
      if (tag == "put") {
        puts_[run].push_back(k);
        auto& next = next_sequence_[{run, k.activity_id}];
        next = std::max(next, k.sequence + 1);
      } else {
        auto& st = state_for(run);
        st.checkpoints.push_back({k.activity_id, k});
        st.status = RunStatus::Active;
      }
    } else if (tag == "rollback") {
      std::string activity;
      if (!(ls >> activity)) corrupt();
      auto& st = state_for(run);
      auto it = std::find_if(st.checkpoints.rbegin(), st.checkpoints.rend(),
                             [&](const Checkpoint& c) { return c.activity_id == activity; });
      if (it == st.checkpoints.rend()) corrupt();
      st.checkpoints.erase(it.base(), st.checkpoints.end());
      st.status = RunStatus::RolledBack;
    } else if (tag == "status") {
      std::string s;
      ls >> s;
      auto status = parse_run_status(s);
      if (!status) corrupt();
      state_for(run).status = *status;
    } else if (!tag.empty()) {
      corrupt();
    }
  }
}

void Storage::append_index(const std::string& line) {
  std::ofstream out(index_path(), std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::IoError, "cannot append to " + index_path().string());
  out << line << '\n';
  out.flush();
}

RunState& Storage::state_for(const std::string& run_id) {
  auto it = runs_.find(run_id);
  if (it == runs_.end()) throw Error(ErrorCode::UnknownRun, run_id);
  return it->second;
}

const RunState& Storage::state_for(const std::string& run_id) const {
  auto it = runs_.find(run_id);
  if (it == runs_.end()) throw Error(ErrorCode::UnknownRun, run_id);
  return it->second;
}

std::string Storage::create_run() {
  std::scoped_lock lock(mutex_);
  char buf[32];
  std::snprintf(buf, sizeof buf, "run-%04zu", run_order_.size() + 1);
  std::string id = buf;
  append_index("run " + id);
  run_order_.push_back(id);
  runs_[id] = RunState{id, {}, RunStatus::Active};
  return id;
}

bool Storage::has_run(const std::string& run_id) const {
  std::scoped_lock lock(mutex_);
  return runs_.contains(run_id);
}

std::vector<std::string> Storage::runs() const {
  std::scoped_lock lock(mutex_);
  return run_order_;
}

ResultKey Storage::put(const Dataset& ds, const std::string& run_id, const std::string& activity_id) {
  if (!valid_token(activity_id)) throw Error(ErrorCode::InvalidValue, "bad activity id '" + activity_id + "'");
  const std::string bytes = canonical_serialize(ds);
  const std::string hash = sha256_hex(bytes);
  std::scoped_lock lock(mutex_);
  state_for(run_id);
  const fs::path blob = blob_path(hash);
  if (!fs::exists(blob)) {
    if (options_.max_blobs && blob_count_ >= *options_.max_blobs)
      throw Error(ErrorCode::StorageFull, "blob cap " + std::to_string(*options_.max_blobs) + " reached");
    write_atomically(blob, bytes);
    ++blob_count_;
  }
  ResultKey key{hash, run_id, activity_id, next_sequence_[{run_id, activity_id}]++};
  append_index("put " + run_id + " " + activity_id + " " + std::to_string(key.sequence) + " " + hash);
  puts_[run_id].push_back(key);
  return key;
}

Dataset Storage::get(const ResultKey& key) const {
  {
    std::scoped_lock lock(mutex_);
    auto it = puts_.find(key.run_id);
    if (it == puts_.end() || std::find(it->second.begin(), it->second.end(), key) == it->second.end())
      throw Error(ErrorCode::UnknownKey, key.str());
  }
  const fs::path blob = blob_path(key.hash);
  if (!fs::exists(blob)) throw Error(ErrorCode::IntegrityError, "blob missing for " + key.str());
  const std::string bytes = read_file(blob);
  if (sha256_hex(bytes) != key.hash) throw Error(ErrorCode::IntegrityError, "hash mismatch for " + key.str());
  return canonical_deserialize(bytes);
}

std::vector<ResultKey> Storage::keys(const std::string& run_id) const {
  std::scoped_lock lock(mutex_);
  state_for(run_id);
  auto it = puts_.find(run_id);
  return it == puts_.end() ? std::vector<ResultKey>{} : it->second;
}

RunState Storage::checkpoint(const std::string& run_id, const std::string& activity_id, const ResultKey& key) {
  std::scoped_lock lock(mutex_);
  auto& st = state_for(run_id);
  auto it = puts_.find(run_id);
  if (key.run_id != run_id || it == puts_.end() ||
      std::find(it->second.begin(), it->second.end(), key) == it->second.end())
    throw Error(ErrorCode::UnknownKey, key.str());
  append_index("ckpt " + run_id + " " + activity_id + " " + std::to_string(key.sequence) + " " + key.hash);
  st.checkpoints.push_back({activity_id, key});
  st.status = RunStatus::Active;
  return st;
}

RunState Storage::rollback(const std::string& run_id, const std::string& activity_id) {
  std::scoped_lock lock(mutex_);
  auto& st = state_for(run_id);
  auto it = std::find_if(st.checkpoints.rbegin(), st.checkpoints.rend(),
                         [&](const Checkpoint& c) { return c.activity_id == activity_id; });
  if (it == st.checkpoints.rend()) throw Error(ErrorCode::UnknownCheckpoint, run_id + ":" + activity_id);
  append_index("rollback " + run_id + " " + activity_id);
  st.checkpoints.erase(it.base(), st.checkpoints.end());
  st.status = RunStatus::RolledBack;
  return st;
}

RunState Storage::set_status(const std::string& run_id, RunStatus status) {
  std::scoped_lock lock(mutex_);
  auto& st = state_for(run_id);
  append_index("status " + run_id + " " + std::string(run_status_name(status)));
  st.status = status;
  return st;
}

RunState Storage::run_state(const std::string& run_id) const {
  std::scoped_lock lock(mutex_);
  return state_for(run_id);
}

void Storage::write_document(const std::string& run_id, const std::string& name, const std::string& text) {
  std::scoped_lock lock(mutex_);
  state_for(run_id);
  if (!valid_token(name)) throw Error(ErrorCode::InvalidValue, "bad document name '" + name + "'");
  fs::create_directories(root_ / "runs" / run_id);
  write_atomically(root_ / "runs" / run_id / name, text);
}

std::optional<std::string> Storage::read_document(const std::string& run_id, const std::string& name) const {
  std::scoped_lock lock(mutex_);
  state_for(run_id);
  const fs::path p = root_ / "runs" / run_id / name;
  if (!fs::exists(p)) return std::nullopt;
  return read_file(p);
}

// ---------------------------------------------------------------------------

ExtractionSpec parse_extraction_list(std::string_view text) {
  std::vector<std::pair<std::string, Unit>> wanted;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto comma = text.find(',', pos);
    auto item = text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    auto colon = item.find(':');
    if (colon == std::string_view::npos)
      throw Error(ErrorCode::BadParams, "extraction item '" + std::string(item) + "' needs name:unit");
    wanted.emplace_back(std::string(item.substr(0, colon)), units::get(item.substr(colon + 1)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return ExtractionSpec(std::move(wanted));
}

std::string format_extraction_list(const ExtractionSpec& spec) {
  std::string out;
  for (const auto& [name, unit] : spec.wanted) {
    if (!out.empty()) out += ",";
    out += name + ":" + unit.name;
  }
  return out;
}

JobHandle StorageService::submit(const JobRequest& req) {
  JobStatus status;
  try {
    auto op = req.params.find("op");
    if (op == req.params.end()) throw Error(ErrorCode::BadParams, "missing op");
    if (req.inputs.size() != 1) throw Error(ErrorCode::MissingInput, "exactly one input required");
    const ResultKey& in = req.inputs.front().key;
    if (op->second == "fetch") {
      storage_.get(in);
      status.result = in;
    } else if (op->second == "project") {
      auto want = req.params.find("want");
      if (want == req.params.end()) throw Error(ErrorCode::BadParams, "missing want");
      Dataset projected = project(storage_.get(in), parse_extraction_list(want->second));
      status.result = storage_.put(projected, req.run_id, req.activity_id);
    } else {
      throw Error(ErrorCode::BadParams, "unknown op '" + op->second + "'");
    }
    status.state = JobState::Succeeded;
  } catch (const Error& e) {
    status.state = JobState::Failed;
    status.reason = e.what();
  }
  std::scoped_lock lock(mutex_);
  jobs_.push_back(std::move(status));
  return {jobs_.size(), "storage"};
}

JobStatus StorageService::poll(const JobHandle& h) const {
  std::scoped_lock lock(mutex_);
  if (h.resource_id != "storage" || h.id == 0 || h.id > jobs_.size())
    throw Error(ErrorCode::UnknownJob, std::to_string(h.id) + "@" + h.resource_id);
  return jobs_[h.id - 1];
}

}  // namespace gridflow
