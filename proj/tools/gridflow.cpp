// gridflow command line. Talks to the library only through gridflow.h.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gridflow/gridflow.h"

namespace {

constexpr int kUserError = 1;
constexpr int kRuntimeError = 2;
constexpr int kInternalError = 3;

// Owning wrapper for strings returned by the library.
struct Text {
  char* p = nullptr;
  ~Text() { gf_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct Failure {
  int code;
};

int exit_code(gf_status s) { return static_cast<int>(gf_status_classify(s)); }

void check(gf_status s) {
  if (s == GF_OK) return;
  std::cerr << "gridflow: " << gf_last_error() << "\n";
  throw Failure{exit_code(s)};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "gridflow: IoError: cannot read " << path << "\n";
    throw Failure{kUserError};
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  out << text;
  if (!out) {
    std::cerr << "gridflow: IoError: cannot write " << out_path << "\n";
    throw Failure{kRuntimeError};
  }
}

std::vector<const char*> c_strings(const std::vector<std::string>& v) {
  std::vector<const char*> out;
  for (const auto& s : v) out.push_back(s.c_str());
  return out;
}

struct Context {
  gf_context* ctx = nullptr;
  explicit Context(const std::string& store) { check(gf_context_open(store.c_str(), &ctx)); }
  ~Context() { gf_context_close(ctx); }
};

struct Workflow {
  gf_workflow* wf = nullptr;
  Workflow(const std::string& path, bool case_study) {
    if (case_study) check(gf_workflow_case_study(&wf));
    else check(gf_workflow_parse(read_file(path).c_str(), &wf));
  }
  ~Workflow() { gf_workflow_free(wf); }
};

bool given_on_command_line(int argc, char** argv, const std::string& flag) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  }
  return false;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridflow: activity-diagram workflows on a simulated grid"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "gridflow.toml", "Configuration file (key = value, [subcommand] sections)");

  std::string store = "gridflow-store";
  bool as_json = false;
  bool deterministic = false;
  app.add_option("--store", store, "Store directory (GRIDFLOW_STORE overrides the config file)");
  app.add_flag("--json", as_json, "Machine-readable output");
  app.add_flag("--deterministic", deterministic, "Redact timestamps in reports");

  auto* reg = app.add_subcommand("register", "Register a resource descriptor (XML)");
  std::string resource_file;
  reg->add_option("file", resource_file, "Resource descriptor")->required();

  auto* resources = app.add_subcommand("resources", "List registered resources");

  auto* ver = app.add_subcommand("verify", "Check a workflow for soundness");
  std::string verify_file;
  ver->add_option("workflow", verify_file, "Workflow DSL file")->required();

  auto* exp = app.add_subcommand("export", "Translate a workflow");
  std::string export_file, export_format = "xml", export_out;
  exp->add_option("workflow", export_file, "Workflow DSL file")->required();
  exp->add_option("--to", export_format, "Target format")->check(CLI::IsMember({"xml", "plan", "dot", "dsl"}));
  exp->add_option("-o,--output", export_out, "Write to a file instead of standard output");

  auto* sub = app.add_subcommand("submit", "Bind and execute a workflow");
  std::string submit_file, user;
  std::vector<std::string> params, faults;
  std::uint64_t seed = 0;
  int max_iterations = 0;
  bool case_study = false;
  auto* wf_opt = sub->add_option("workflow", submit_file, "Workflow DSL file");
  sub->add_flag("--case-study", case_study, "Run the built-in zeolite case study")->excludes(wf_opt);
  sub->add_option("--user", user, "User profile ID:academic or ID:commercial");
  sub->add_option("--param", params, "Parameter override key=value or activity.key=value");
  sub->add_option("--seed", seed, "Run seed, also the executor's scheduling seed");
  sub->add_option("--fail-at", faults, "Inject a failure at the N-th launch of an activity (ACT:N)");
  sub->add_option("--max-iterations", max_iterations, "Loop bound per decision")->check(CLI::PositiveNumber);

  auto* res = app.add_subcommand("resume", "Continue a failed or interrupted run");
  std::string resume_run;
  res->add_option("run", resume_run, "Run id")->required();

  auto* rb = app.add_subcommand("rollback", "Drop checkpoints after an activity");
  std::string rollback_run, rollback_activity;
  rb->add_option("run", rollback_run, "Run id")->required();
  rb->add_option("activity", rollback_activity, "Last activity to keep")->required();

  auto* rep = app.add_subcommand("report", "Provenance report of a run");
  std::string report_run, report_out;
  rep->add_option("run", report_run, "Run id")->required();
  rep->add_option("-o,--output", report_out, "Write to a file instead of standard output");

  auto* st = app.add_subcommand("store", "Inspect the store");
  st->require_subcommand(1);
  auto* ls = st->add_subcommand("ls", "List stored datasets of a run");
  std::string ls_run;
  ls->add_option("run", ls_run, "Run id")->required();
  auto* runs = st->add_subcommand("runs", "List runs");

  auto* mock = app.add_subcommand("mock", "Run a mock application standalone");
  std::string mock_name, mock_input;
  std::vector<std::string> mock_params;
  std::string mock_seed;
  bool canonical = false;
  mock->add_option("name", mock_name, "lattice, cbmc, gcmc, md or analysis")->required();
  mock->add_option("--input", mock_input, "Input dataset in canonical form");
  mock->add_option("--param", mock_params, "Parameter key=value");
  mock->add_option("--seed", mock_seed, "Seed parameter");
  mock->add_flag("--canonical", canonical, "Print the adapted canonical dataset instead of the native text");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUserError;
  }

  if (!given_on_command_line(argc, argv, "--store"))
    if (const char* env = std::getenv("GRIDFLOW_STORE"); env && *env) store = env;

  try {
    if (*reg) {
      Context c(store);
      Text id;
      check(gf_register_resource(c.ctx, read_file(resource_file).c_str(), &id.p));
      std::cout << id.str() << "\n";
    } else if (*resources) {
      Context c(store);
      Text out;
      check(gf_list_resources(c.ctx, &out.p));
      std::cout << out.str();
    } else if (*ver) {
      Workflow w(verify_file, false);
      Text out;
      int sound = 0;
      check(gf_workflow_verify(w.wf, as_json, &sound, &out.p));
      std::cout << out.str();
      return sound ? 0 : kUserError;
    } else if (*exp) {
      Workflow w(export_file, false);
      Text out;
      check(gf_workflow_export(w.wf, export_format.c_str(), &out.p));
      emit(out.str(), export_out);
    } else if (*sub) {
      if (submit_file.empty() && !case_study) {
        std::cerr << "gridflow: submit needs a workflow file or --case-study\n";
        return kUserError;
      }
      Workflow w(submit_file, case_study);
      Context c(store);
      const auto p = c_strings(params);
      const auto f = c_strings(faults);
      gf_submit_options o{user.empty() ? nullptr : user.c_str(), p.data(), p.size(), f.data(), f.size(), seed,
                          max_iterations};
      Text run;
      const gf_status s = gf_submit(c.ctx, w.wf, &o, &run.p);
      if (run.p) std::cout << run.str() << "\n";
      check(s);
    } else if (*res) {
      Context c(store);
      check(gf_resume(c.ctx, resume_run.c_str()));
      std::cout << resume_run << "\n";
    } else if (*rb) {
      Context c(store);
      check(gf_rollback(c.ctx, rollback_run.c_str(), rollback_activity.c_str()));
      std::cout << rollback_run << "\n";
    } else if (*rep) {
      Context c(store);
      Text out;
      check(gf_report(c.ctx, report_run.c_str(), as_json, deterministic, &out.p));
      emit(out.str(), report_out);
    } else if (*ls) {
      Context c(store);
      Text out;
      check(gf_store_ls(c.ctx, ls_run.c_str(), as_json, &out.p));
      std::cout << out.str();
    } else if (*runs) {
      Context c(store);
      Text out;
      check(gf_list_runs(c.ctx, &out.p));
      std::cout << out.str();
    } else if (*mock) {
      std::string input;
      if (!mock_input.empty()) input = read_file(mock_input);
      if (!mock_seed.empty()) mock_params.push_back("seed=" + mock_seed);
      const auto p = c_strings(mock_params);
      Text out;
      check(gf_mock(mock_name.c_str(), mock_input.empty() ? nullptr : input.c_str(), p.data(), p.size(), canonical,
                    &out.p));
      std::cout << out.str();
    }
  } catch (const Failure& f) {
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "gridflow: Internal: " << e.what() << "\n";
    return kInternalError;
  }
  return 0;
}
