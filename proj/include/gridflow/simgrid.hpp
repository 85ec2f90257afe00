#pragma once

// Simulated grid: a virtual-clock executor and the desk-scale zeolite
// diffusion case study. Each mock application writes its own native text
// format; an adapter turns that text into a Dataset before anything is
// stored, so no stage bypasses the intermediate format.

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gridflow/quantities.hpp"
#include "gridflow/resources.hpp"
#include "gridflow/storage.hpp"
#include "gridflow/workflow.hpp"

namespace gridflow::simgrid {

// Native text formats, one per mock:
//   lattice   CSV-like (format A)
//   cbmc      key = value (format B)
//   gcmc      keyword blocks
//   md        fixed-width columns (format C)
//   analysis  line report
std::string lattice_native(const ParamMap& params);
std::string cbmc_native(const Dataset& lattice, const ParamMap& params);
std::string gcmc_native(const Dataset& occupancy, const ParamMap& params);
std::string md_native(const Dataset& config, const ParamMap& params);
std::string analysis_native(const Dataset& trajectory, const ParamMap& params);

Dataset parse_lattice_native(std::string_view text);
Dataset parse_cbmc_native(std::string_view text);
Dataset parse_gcmc_native(std::string_view text);
Dataset parse_md_native(std::string_view text);
Dataset parse_analysis_native(std::string_view text);

// Native run followed by the adapter.
Dataset mock_lattice(const ParamMap& params);
Dataset mock_cbmc(const Dataset& lattice, const ParamMap& params);
Dataset mock_gcmc(const Dataset& occupancy, const ParamMap& params);
Dataset mock_md(const Dataset& config, const ParamMap& params);

// Walker positions in lattice sites, x[t][w].
struct Trajectory {
  std::vector<std::vector<long>> x;
  double spacing_angstrom = 1.0;
  double timestep_fs = 1000.0;
  double theta = 0.0;

  std::size_t walkers() const { return x.empty() ? 0 : x.front().size(); }
  std::size_t steps() const { return x.empty() ? 0 : x.size() - 1; }
};

Trajectory trajectory_from(const Dataset& ds);
Observable trajectory_observable(const Trajectory& t);

// MSD(t) in Å² with step indices; BadParams for W < 2.
Observable msd(const Trajectory& t);
struct DiffusivityFit {
  double slope = 0.0;     // Å² per step
  double d = 0.0;         // slope / (2 dim), Å² per step
  double exponent = 1.0;  // log-log slope over the fit window
  bool warning = false;   // |exponent - 1| > 0.3
};
// Least squares over the second half of the series; BadParams when shorter
// than 10 points.
DiffusivityFit diffusivity(const Observable& msd_series, int dimensionality = 1);
// msd + diffusivity, D in Å²/ps with a walker-block standard error.
Dataset analyse(const Trajectory& t, int dimensionality = 1);

struct MockApp {
  std::string name;
  // Input datasets are merged in slot order before the call.
  std::function<std::string(const Dataset& input, const ParamMap& params)> run;
  std::function<Dataset(std::string_view native)> adapt;
};

// lattice, cbmc, gcmc, md, analysis. Throws BadParams for other names.
const MockApp& mock_app(std::string_view name);
std::vector<std::string> mock_names();

// Program names of the built-in resources mapped to their mock.
const std::map<std::string, std::string>& program_mocks();

struct FaultPoint {
  std::string activity;
  std::uint64_t occurrence = 1;  // 1-based launch count of that activity
  friend bool operator==(const FaultPoint&, const FaultPoint&) = default;
};
// "ACT:N"; BadParams when malformed.
FaultPoint parse_fault_point(std::string_view text);

// Runs launched jobs on a virtual clock. A job finishes `latency` ticks after
// launch; jobs finishing on the same tick complete in an order drawn from
// the scheduling seed. The mock runs when its job completes: inputs are read
// from storage, merged, passed through the native format and the adapter,
// and the result is put back under the request's run and activity.
class SimulatedExecutor : public Executor {
 public:
  SimulatedExecutor(Storage& storage, std::uint64_t seed, std::vector<FaultPoint> faults = {});

  void set_latency(const std::string& resource_id, std::uint64_t ticks);
  // Program name -> application; overrides the built-in mapping.
  void register_app(const std::string& program, MockApp app);

  void launch(std::uint64_t job, const ResourceDescriptor& resource, const JobRequest& req,
              const LaunchPlan& plan) override;
  std::optional<std::pair<std::uint64_t, JobOutcome>> next_completion() override;
  void cancel(std::uint64_t job) override;

  std::uint64_t now() const;
  std::uint64_t launches(const std::string& activity) const;

 private:
  struct Pending {
    std::uint64_t finish = 0;
    std::uint64_t priority = 0;
    std::uint64_t job = 0;
    std::uint64_t started = 0;
    bool fault = false;
    std::string program;
    JobRequest request;
    friend auto operator<=>(const Pending& a, const Pending& b) {
      if (auto c = a.finish <=> b.finish; c != 0) return c;
      if (auto c = a.priority <=> b.priority; c != 0) return c;
      return a.job <=> b.job;
    }
  };

  JobOutcome run(const Pending& p);

  Storage& storage_;
  std::vector<FaultPoint> faults_;
  mutable std::mutex mutex_;
  std::mt19937_64 rng_;
  std::uint64_t clock_ = 0;
  std::map<std::string, std::uint64_t> latency_;
  std::map<std::string, MockApp> apps_;
  std::map<std::string, std::uint64_t> launches_;
  std::vector<Pending> pending_;
  std::set<std::uint64_t> cancelled_;
};

// The case-study workflow text (also shipped as workflows/zeolite.dsl).
std::string_view case_study_dsl();
WorkflowGraph build_case_study();
// Resources of the simulated grid, in registration order.
std::vector<ResourceDescriptor> builtin_resources();

}  // namespace gridflow::simgrid
