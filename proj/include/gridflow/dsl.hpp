#pragma once

// Textual workflow language and its translations: job-sequence XML,
// functional execution plan and Graphviz DOT.

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gridflow/error.hpp"
#include "gridflow/workflow.hpp"

namespace gridflow {

class SyntaxError : public Error {
 public:
  SyntaxError(int line, int column, std::string expected, std::string found);
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }
  const std::string& expected() const noexcept { return expected_; }

 private:
  int line_;
  int column_;
  std::string expected_;
};

WorkflowGraph parse_workflow(std::string_view text);
std::string emit_dsl(const WorkflowGraph& g);

// Throws UnsoundWorkflow unless `force` or verify() finds nothing.
std::string to_job_xml(const WorkflowGraph& g, bool force = false, int max_iterations = 100);
// Structural schema check of a job-sequence document; throws ParseError.
void validate_job_xml(std::string_view xml);
// job id -> ids named by its <depends-on> children.
std::map<std::string, std::set<std::string>> job_dependencies(std::string_view xml);
// Activity precedence as emitted into <depends-on>: immediate activity
// predecessors over forward edges, transitively reduced.
std::map<std::string, std::set<std::string>> activity_dependencies(const WorkflowGraph& g);

std::string to_dot(const WorkflowGraph& g);

// Functional execution plan.
struct PlanExpr {
  enum class Kind { Run, Seq, ParMap, Choice, Loop };

  Kind kind = Kind::Seq;
  // Run: activity id. ParMap: the join that reduces the branches.
  // Choice/Loop: the decision node.
  std::string id;
  // Seq: items. ParMap: branches. Choice: alternatives in decision-branch
  // order (else last). Loop: a single body.
  std::vector<PlanExpr> children;
  // Choice: one guard per alternative (nullopt for else). Loop: the guard of
  // each decision branch.
  std::vector<std::optional<Guard>> guards;
  std::size_t back_branch = 0;  // Loop: decision branch that repeats the body
  int max_iterations = 0;       // Loop

  friend bool operator==(const PlanExpr&, const PlanExpr&) = default;
};

PlanExpr to_functional_plan(const WorkflowGraph& g, int max_iterations = 100);
std::string plan_to_string(const PlanExpr& plan);

// Decision outcomes by visit: decision id -> branch index per visit; the
// last entry repeats once the list is exhausted, and decisions without an
// entry take branch 0.
struct OutcomeScript {
  std::map<std::string, std::vector<std::size_t>> outcomes;
  std::size_t choose(const std::string& decision, std::size_t visit) const;
};

// Reference interpreter: activities in execution order (ParMap branches left
// to right). Throws IterationLimit when a loop exceeds its bound.
std::vector<std::string> interpret_plan(const PlanExpr& plan, const OutcomeScript& script);

}  // namespace gridflow
