#include <charconv>
#include <sstream>

#include "gridflow/dsl.hpp"

namespace gridflow {

namespace {

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

bool bare_word(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  return true;
}

std::string word(std::string_view s) { return bare_word(s) ? std::string(s) : quote(s); }

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

class Emitter {
 public:
  explicit Emitter(const WorkflowGraph& g) : g_(g) {}

  std::string run() {
    out_ << "workflow " << quote(g_.name()) << " {\n";
    for (const auto& ref : g_.source_refs()) out_ << "  cite " << quote(ref) << ";\n";
    if (!g_.source_refs().empty()) out_ << "\n";
    for (const auto& id : topological_order(g_)) node(g_.node(id));
    out_ << "}\n";
    return out_.str();
  }

 private:
  std::string ref(const std::string& id) const {
    const Node& n = g_.node(id);
    if (n.kind == NodeKind::Start) return "start";
    if (n.kind == NodeKind::Final && id == "end") return "end";
    return id;
  }

  bool plain_edge_target(const std::string& id) const {
    auto k = g_.node(id).kind;
    return k == NodeKind::Activity || k == NodeKind::Final;
  }

  std::string list(const std::vector<std::string>& ids) const {
    std::string s;
    for (const auto& id : ids) s += (s.empty() ? "" : ", ") + ref(id);
    return s;
  }

  void simple_edges(const std::string& id) {
    for (const auto& to : g_.successors(id))
      if (plain_edge_target(to)) out_ << "  " << ref(id) << " -> " << ref(to) << ";\n";
  }

  void node(const Node& n) {
    switch (n.kind) {
      case NodeKind::Start: simple_edges(n.id); break;
      case NodeKind::Final:
        if (n.id != "end") out_ << "  final " << n.id << ";\n";
        break;
      case NodeKind::Activity:
        activity(n);
        simple_edges(n.id);
        break;
      case NodeKind::Fork:
        out_ << "  fork " << n.id << " after " << ref(g_.predecessors(n.id).front()) << " into ("
             << list(g_.successors(n.id)) << ");\n";
        break;
      case NodeKind::Join:
        out_ << "  join " << n.id << " waits (" << list(g_.predecessors(n.id)) << ") -> "
             << ref(g_.successors(n.id).front()) << ";\n";
        break;
      case NodeKind::Decision:
        out_ << "  decision " << n.id << " after " << ref(g_.predecessors(n.id).front()) << " {\n";
        for (const auto& b : n.branches) {
          if (b.guard) {
            const Guard& gd = *b.guard;
            out_ << "    when " << word(gd.observable) << " " << compare_op_symbol(gd.op) << " "
                 << shortest(gd.literal);
            if (gd.unit != units::dimensionless()) out_ << " " << quote(gd.unit.name);
          } else {
            out_ << "    else";
          }
          out_ << " -> " << ref(b.target) << ";\n";
        }
        out_ << "  }\n";
        break;
    }
  }

  void activity(const Node& n) {
    const Binding& b = n.binding;
    out_ << "  activity " << n.id << " {\n";
    if (b.program) out_ << "    program: " << quote(*b.program) << ";\n";
    if (b.actuator) out_ << "    actuator: " << quote(*b.actuator) << ";\n";
    if (!b.capabilities.empty()) {
      out_ << "    capabilities: [";
      bool first = true;
      for (const auto& c : b.capabilities) {
        out_ << (first ? "" : ", ") << word(c);
        first = false;
      }
      out_ << "];\n";
    }
    if (!n.params.empty()) {
      out_ << "    params: { ";
      bool first = true;
      for (const auto& [k, v] : n.params) {
        out_ << (first ? "" : ", ") << k << ": " << quote(v);
        first = false;
      }
      out_ << " };\n";
    }
    for (const auto& f : g_.object_flows()) {
      if (f.consumer != n.id) continue;
      out_ << "    inputs: from " << f.producer << " [";
      bool first = true;
      for (const auto& [name, unit] : f.spec.wanted) {
        out_ << (first ? "" : ", ") << word(name) << ": " << quote(unit.name);
        first = false;
      }
      out_ << "];\n";
    }
    if (!n.outputs.empty()) {
      out_ << "    outputs: [";
      bool first = true;
      for (const auto& o : n.outputs) {
        out_ << (first ? "" : ", ") << word(o);
        first = false;
      }
      out_ << "];\n";
    }
    for (const auto& c : n.cites) out_ << "    cite: " << quote(c) << ";\n";
    out_ << "  }\n";
  }

  const WorkflowGraph& g_;
  std::ostringstream out_;
};

}  // namespace

std::string emit_dsl(const WorkflowGraph& g) { return Emitter(g).run(); }

}  // namespace gridflow
