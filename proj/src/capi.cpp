#include "gridflow/gridflow.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gridflow/dsl.hpp"
#include "gridflow/engine.hpp"
#include "gridflow/simgrid.hpp"

namespace fs = std::filesystem;
using namespace gridflow;
using json = nlohmann::json;

struct gf_workflow {
  WorkflowGraph graph;
  std::string source;
};

struct gf_context {
  explicit gf_context(const fs::path& dir) : root(dir), storage(dir), engine(storage, registry) {}

  fs::path root;
  Storage storage;
  ResourceManager registry;
  std::unique_ptr<simgrid::SimulatedExecutor> executor;
  Engine engine;

  void reset_executor(std::uint64_t seed, std::vector<simgrid::FaultPoint> faults = {}) {
    executor = std::make_unique<simgrid::SimulatedExecutor>(storage, seed, std::move(faults));
    registry.set_executor(executor.get());
  }
};

namespace {

thread_local std::string last_error;

static_assert(static_cast<int>(ErrorCode::Internal) + 1 == GF_INTERNAL, "gf_status must mirror ErrorCode");

gf_status to_status(ErrorCode code) { return static_cast<gf_status>(static_cast<int>(code) + 1); }

template <class F>
gf_status guarded(F&& f) {
  last_error.clear();
  try {
    return f();
  } catch (const Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::exception& e) {
    last_error = std::string("Internal: ") + e.what();
    return GF_INTERNAL;
  } catch (...) {
    last_error = "Internal: unknown exception";
    return GF_INTERNAL;
  }
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.data(), s.size() + 1);
  return p;
}

void require(const void* p, const char* what) {
  if (!p) throw Error(ErrorCode::InvalidValue, std::string(what) + " is null");
}

std::pair<std::string, std::string> split_param(std::string_view kv) {
  const auto eq = kv.find('=');
  if (eq == std::string_view::npos || eq == 0) throw Error(ErrorCode::BadParams, "expected key=value, got '" + std::string(kv) + "'");
  return {std::string(kv.substr(0, eq)), std::string(kv.substr(eq + 1))};
}

ParamMap param_map(const char* const* params, size_t n) {
  ParamMap out;
  for (size_t i = 0; i < n; ++i) {
    require(params[i], "param");
    auto [k, v] = split_param(params[i]);
    out[k] = v;
  }
  return out;
}

fs::path registry_dir(const gf_context& ctx) { return ctx.root / "registry"; }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Status of a finished run as a call result.
gf_status run_result(const RunRecord& rec) {
  if (rec.status == RunStatus::Completed) return GF_OK;
  last_error = std::string(error_code_name(rec.error.value_or(ErrorCode::Internal))) + ": " + rec.run_id + ": " +
               rec.error_message;
  return to_status(rec.error.value_or(ErrorCode::Internal));
}

}  // namespace

extern "C" {

const char* gf_status_name(gf_status status) {
  if (status == GF_OK) return "Ok";
  if (status < GF_OK || status > GF_INTERNAL) return "Unknown";
  return error_code_name(static_cast<ErrorCode>(static_cast<int>(status) - 1)).data();
}

gf_status_class gf_status_classify(gf_status status) {
  switch (status) {
    case GF_OK:
      return GF_CLASS_OK;
    case GF_RESOURCE_WITHDRAWN:
    case GF_UNKNOWN_JOB:
    case GF_MISSING_INPUT:
    case GF_STORAGE_FULL:
    case GF_UNKNOWN_KEY:
    case GF_INTEGRITY_ERROR:
    case GF_ACTIVITY_FAILED:
    case GF_ITERATION_LIMIT:
    case GF_GUARD_EVALUATION_ERROR:
    case GF_NO_FREE_SITES:
    case GF_IO_ERROR:
      return GF_CLASS_RUNTIME;
    case GF_INTERNAL:
      return GF_CLASS_INTERNAL;
    default:
      return status > GF_INTERNAL ? GF_CLASS_INTERNAL : GF_CLASS_USER;
  }
}

const char* gf_last_error(void) { return last_error.c_str(); }

void gf_free(void* p) { std::free(p); }

gf_status gf_context_open(const char* store_dir, gf_context** out) {
  return guarded([&] {
    require(store_dir, "store_dir");
    require(out, "out");
    *out = nullptr;
    std::error_code ec;
    fs::create_directories(store_dir, ec);
    if (ec) throw Error(ErrorCode::IoError, std::string("cannot create store ") + store_dir + ": " + ec.message());
    auto ctx = std::make_unique<gf_context>(store_dir);
    for (auto& d : simgrid::builtin_resources()) ctx->registry.register_resource(d);
    if (fs::is_directory(registry_dir(*ctx))) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(registry_dir(*ctx)))
        if (e.path().extension() == ".xml") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) ctx->registry.register_resource(parse_resource_xml(read_file(f)));
    }
    ctx->reset_executor(0);
    *out = ctx.release();
    return GF_OK;
  });
}

void gf_context_close(gf_context* ctx) { delete ctx; }

gf_status gf_register_resource(gf_context* ctx, const char* xml, char** out_id) {
  return guarded([&] {
    require(ctx, "context");
    require(xml, "xml");
    ResourceDescriptor d = parse_resource_xml(xml);
    if (d.id.find('/') != std::string::npos || d.id.starts_with("."))
      throw Error(ErrorCode::InvalidDescriptor, "resource id '" + d.id + "' cannot name a file");
    const std::string id = ctx->registry.register_resource(d);
    fs::create_directories(registry_dir(*ctx));
    const fs::path target = registry_dir(*ctx) / (id + ".xml");
    const fs::path tmp = target.string() + ".tmp";
    {
      std::ofstream o(tmp, std::ios::binary);
      o << to_resource_xml(ctx->registry.descriptor(id));
      if (!o) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    }
    fs::rename(tmp, target);
    if (out_id) *out_id = dup(id);
    return GF_OK;
  });
}

gf_status gf_list_resources(gf_context* ctx, char** out) {
  return guarded([&] {
    require(ctx, "context");
    require(out, "out");
    std::string s;
    for (const auto& id : ctx->registry.resource_ids()) s += id + "\n";
    *out = dup(s);
    return GF_OK;
  });
}

gf_status gf_workflow_parse(const char* dsl_text, gf_workflow** out) {
  return guarded([&] {
    require(dsl_text, "text");
    require(out, "out");
    *out = new gf_workflow{parse_workflow(dsl_text), dsl_text};
    return GF_OK;
  });
}

gf_status gf_workflow_case_study(gf_workflow** out) {
  return guarded([&] {
    require(out, "out");
    const std::string text(simgrid::case_study_dsl());
    *out = new gf_workflow{parse_workflow(text), text};
    return GF_OK;
  });
}

void gf_workflow_free(gf_workflow* wf) { delete wf; }

gf_status gf_workflow_verify(const gf_workflow* wf, int as_json, int* out_sound, char** out) {
  return guarded([&] {
    require(wf, "workflow");
    require(out, "out");
    const auto report = verify(wf->graph);
    if (out_sound) *out_sound = report.sound() ? 1 : 0;
    if (as_json) {
      json j;
      j["workflow"] = wf->graph.name();
      j["sound"] = report.sound();
      j["structural_only"] = report.structural_only;
      j["findings"] = json::array();
      for (const auto& f : report.findings)
        j["findings"].push_back({{"kind", finding_kind_name(f.kind)}, {"subject", f.subject}, {"detail", f.detail}});
      *out = dup(j.dump(2) + "\n");
    } else if (report.sound()) {
      *out = dup("sound\n");
    } else {
      std::string s;
      for (const auto& f : report.findings)
        s += std::string(finding_kind_name(f.kind)) + " " + f.subject + (f.detail.empty() ? "" : ": " + f.detail) + "\n";
      *out = dup(s);
    }
    return GF_OK;
  });
}

gf_status gf_workflow_export(const gf_workflow* wf, const char* format, char** out) {
  return guarded([&] {
    require(wf, "workflow");
    require(format, "format");
    require(out, "out");
    const std::string f = format;
    if (f == "xml") *out = dup(to_job_xml(wf->graph));
    else if (f == "plan") *out = dup(plan_to_string(to_functional_plan(wf->graph)) + "\n");
    else if (f == "dot") *out = dup(to_dot(wf->graph));
    else if (f == "dsl") *out = dup(emit_dsl(wf->graph));
    else throw Error(ErrorCode::BadParams, "unknown export format '" + f + "' (xml, plan, dot, dsl)");
    return GF_OK;
  });
}

gf_status gf_submit(gf_context* ctx, const gf_workflow* wf, const gf_submit_options* options, char** out_run_id) {
  if (out_run_id) *out_run_id = nullptr;
  return guarded([&] {
    require(ctx, "context");
    require(wf, "workflow");
    gf_submit_options none{};
    const gf_submit_options& o = options ? *options : none;
    const UserProfile user = o.user ? parse_user_profile(o.user) : UserProfile{};
    std::vector<simgrid::FaultPoint> faults;
    for (size_t i = 0; i < o.n_faults; ++i) {
      require(o.faults[i], "fault");
      faults.push_back(simgrid::parse_fault_point(o.faults[i]));
    }
    PlanOptions po;
    po.max_iterations = o.max_iterations > 0 ? o.max_iterations : 100;
    po.seed = o.seed;
    po.params = param_map(o.params, o.n_params);
    po.source_text = wf->source;
    const ExecutionPlan plan = make_plan(wf->graph, ctx->registry, user, po);
    ctx->reset_executor(o.seed, std::move(faults));
    const RunRecord rec = ctx->engine.execute(plan);
    if (out_run_id) *out_run_id = dup(rec.run_id);
    return run_result(rec);
  });
}

gf_status gf_resume(gf_context* ctx, const char* run_id) {
  return guarded([&] {
    require(ctx, "context");
    require(run_id, "run id");
    const ExecutionPlan plan = load_plan(ctx->storage, run_id);
    ctx->reset_executor(plan.seed);
    return run_result(ctx->engine.resume(run_id));
  });
}

gf_status gf_rollback(gf_context* ctx, const char* run_id, const char* activity) {
  return guarded([&] {
    require(ctx, "context");
    require(run_id, "run id");
    require(activity, "activity");
    ctx->engine.rollback(run_id, activity);
    return GF_OK;
  });
}

gf_status gf_report(gf_context* ctx, const char* run_id, int as_json, int deterministic, char** out) {
  return guarded([&] {
    require(ctx, "context");
    require(run_id, "run id");
    require(out, "out");
    const RunRecord rec = ctx->engine.record(run_id);
    *out = dup(as_json ? report_json(rec, deterministic != 0) : report_text(rec, deterministic != 0));
    return GF_OK;
  });
}

gf_status gf_store_ls(gf_context* ctx, const char* run_id, int as_json, char** out) {
  return guarded([&] {
    require(ctx, "context");
    require(run_id, "run id");
    require(out, "out");
    const RunState state = ctx->storage.run_state(run_id);
    std::set<ResultKey> checkpointed;
    for (const auto& c : state.checkpoints) checkpointed.insert(c.key);
    const auto keys = ctx->storage.keys(run_id);
    if (as_json) {
      json j;
      j["run"] = state.run_id;
      j["status"] = run_status_name(state.status);
      j["keys"] = json::array();
      for (const auto& k : keys)
        j["keys"].push_back({{"activity", k.activity_id},
                             {"sequence", k.sequence},
                             {"hash", k.hash},
                             {"checkpoint", checkpointed.contains(k)}});
      *out = dup(j.dump(2) + "\n");
    } else {
      std::string s = "run " + state.run_id + " " + std::string(run_status_name(state.status)) + "\n";
      for (const auto& k : keys)
        s += (checkpointed.contains(k) ? "ckpt " : "data ") + k.activity_id + " " + std::to_string(k.sequence) + " " +
             k.hash + "\n";
      *out = dup(s);
    }
    return GF_OK;
  });
}

gf_status gf_list_runs(gf_context* ctx, char** out) {
  return guarded([&] {
    require(ctx, "context");
    require(out, "out");
    std::string s;
    for (const auto& r : ctx->storage.runs()) s += r + "\n";
    *out = dup(s);
    return GF_OK;
  });
}

gf_status gf_mock(const char* name, const char* input, const char* const* params, size_t n_params, int canonical,
                  char** out) {
  return guarded([&] {
    require(name, "name");
    require(out, "out");
    const auto& app = simgrid::mock_app(name);
    const Dataset in = input ? canonical_deserialize(input) : Dataset{};
    const std::string native = app.run(in, param_map(params, n_params));
    *out = dup(canonical ? canonical_serialize(app.adapt(native)) : native);
    return GF_OK;
  });
}

gf_status gf_mock_names(char** out) {
  return guarded([&] {
    require(out, "out");
    std::string s;
    for (const auto& n : simgrid::mock_names()) s += n + "\n";
    *out = dup(s);
    return GF_OK;
  });
}

}  // extern "C"
