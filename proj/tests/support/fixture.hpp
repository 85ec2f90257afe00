#pragma once

// Scratch stores and a generic simulated grid for engine-level tests.

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "gridflow/engine.hpp"
#include "gridflow/simgrid.hpp"

namespace fixture {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("gridflow-fx-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

template <class F>
gridflow::ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const gridflow::Error& e) {
    return e.code();
  }
  return gridflow::ErrorCode::Internal;
}

// Emits every observable any flow of `g` asks for (value 1, in the first
// requested unit) plus a scalar `calls` counting invocations of this app.
inline gridflow::simgrid::MockApp echo_app(const gridflow::WorkflowGraph& g) {
  using namespace gridflow;
  std::vector<std::pair<std::string, Unit>> wanted;
  for (const auto& f : g.object_flows())
    for (const auto& [name, unit] : f.spec.wanted)
      if (std::none_of(wanted.begin(), wanted.end(), [&](const auto& w) { return w.first == name; }))
        wanted.emplace_back(name, unit);
  auto calls = std::make_shared<int>(0);
  simgrid::MockApp app;
  app.name = "echo";
  app.run = [wanted, calls](const Dataset& in, const ParamMap& params) {
    Dataset out;
    for (const auto& [name, unit] : wanted)
      if (name != "calls") out.add(Observable::scalar(name, unit, 1.0));
    out.add(Observable::scalar("calls", units::dimensionless(), ++*calls));
    out.add(Observable::scalar("inputs", units::dimensionless(), static_cast<double>(in.observables().size())));
    out.set_meta("seed", params.count("seed") ? params.at("seed") : "");
    return canonical_serialize(out);
  };
  app.adapt = [](std::string_view text) { return canonical_deserialize(text); };
  return app;
}

// One generic resource per activity, satisfying its binding requirement.
inline std::vector<gridflow::ResourceDescriptor> generic_resources(const gridflow::WorkflowGraph& g) {
  using namespace gridflow;
  std::vector<ResourceDescriptor> out;
  for (const auto& [activity, req] : binding_requirements(g)) {
    ResourceDescriptor d;
    d.id = req.actuator ? *req.actuator : activity + "@sim";
    d.program = {req.program ? *req.program : "echo", "1.0"};
    d.calculator = {"sim", "linux-x86_64", 2};
    d.capabilities = req.capabilities;
    d.capabilities.insert("generic");
    d.launch_template = {"run ${workdir}", {}, "out", "linux-x86_64"};
    d.cost_weight = 1.0;
    if (std::none_of(out.begin(), out.end(), [&](const auto& x) { return x.id == d.id; })) out.push_back(d);
  }
  return out;
}

// A store, registry, simulated executor and engine wired together.
struct Grid {
  TempDir dir;
  gridflow::Storage storage{dir.path};
  gridflow::ResourceManager rm;
  std::unique_ptr<gridflow::simgrid::SimulatedExecutor> executor;
  gridflow::Engine engine{storage, rm};
  std::map<std::string, gridflow::simgrid::MockApp> apps;

  explicit Grid(std::uint64_t seed = 0, std::vector<gridflow::simgrid::FaultPoint> faults = {}) {
    reset_executor(seed, std::move(faults));
  }

  // A fresh executor, as a new process would have.
  void reset_executor(std::uint64_t seed, std::vector<gridflow::simgrid::FaultPoint> faults = {}) {
    executor = std::make_unique<gridflow::simgrid::SimulatedExecutor>(storage, seed, std::move(faults));
    for (const auto& [program, app] : apps) executor->register_app(program, app);
    rm.set_executor(executor.get());
  }

  void add_app(const std::string& program, gridflow::simgrid::MockApp app) {
    apps[program] = app;
    executor->register_app(program, std::move(app));
  }

  void add_generic(const gridflow::WorkflowGraph& g) {
    for (auto& d : generic_resources(g)) {
      if (!rm.contains(d.id)) rm.register_resource(d);
      add_app(d.program.name, echo_app(g));
    }
  }

  void add_builtin() {
    for (auto& d : gridflow::simgrid::builtin_resources()) rm.register_resource(d);
  }
};

}  // namespace fixture
