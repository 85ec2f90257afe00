#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <charconv>
#include <functional>
#include <sstream>

#include "gridflow/dsl.hpp"
#include "gridflow/xml_util.hpp"

namespace gridflow {

namespace pt = boost::property_tree;

namespace {

std::string attr(std::string_view name, std::string_view value) {
  return " " + std::string(name) + "=\"" + xml_escape(value) + "\"";
}

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Activity ancestors over forward edges, stopping at the first activity on
// each path.
std::set<std::string> immediate_activity_preds(const WorkflowGraph& g, const std::set<ControlEdge>& back,
                                               const std::string& id) {
  std::set<std::string> out, seen;
  std::vector<std::string> stack{id};
  while (!stack.empty()) {
    std::string u = stack.back();
    stack.pop_back();
    for (const auto& p : g.predecessors(u)) {
      if (back.contains({p, u}) || !seen.insert(p).second) continue;
      if (g.node(p).kind == NodeKind::Activity) out.insert(p);
      else stack.push_back(p);
    }
  }
  return out;
}

}  // namespace

std::map<std::string, std::set<std::string>> activity_dependencies(const WorkflowGraph& g) {
  const auto back = back_edges(g);
  std::map<std::string, std::set<std::string>> immediate;
  for (const auto& id : g.activity_ids()) immediate[id] = immediate_activity_preds(g, back, id);

  std::map<std::string, std::set<std::string>> ancestors;
  for (const auto& id : topological_order(g)) {
    if (g.node(id).kind != NodeKind::Activity) continue;
    auto& anc = ancestors[id];
    for (const auto& p : immediate[id]) {
      anc.insert(p);
      anc.insert(ancestors[p].begin(), ancestors[p].end());
    }
  }
  std::map<std::string, std::set<std::string>> out;
  for (const auto& [id, preds] : immediate) {
    auto& deps = out[id];
    for (const auto& p : preds) {
      bool implied = false;
      for (const auto& q : preds)
        if (q != p && ancestors[q].contains(p)) implied = true;
      if (!implied) deps.insert(p);
    }
  }
  return out;
}

std::string to_job_xml(const WorkflowGraph& g, bool force, int max_iterations) {
  VerifyOptions vo;
  vo.max_iterations = max_iterations;
  const auto report = verify(g, vo);
  if (!report.sound() && !force) {
    std::string s;
    for (const auto& f : report.findings)
      s += (s.empty() ? "" : "; ") + std::string(finding_kind_name(f.kind)) + "(" + f.subject + ")";
    throw Error(ErrorCode::UnsoundWorkflow, s);
  }

  const auto deps = activity_dependencies(g);
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<workflow" << attr("name", g.name()) << ">\n";
  for (const auto& ref : g.source_refs()) out << "  <cite>" << xml_escape(ref) << "</cite>\n";
  const auto order = topological_order(g);
  for (const auto& id : order) {
    const Node& n = g.node(id);
    if (n.kind != NodeKind::Activity) continue;
    const Binding& b = n.binding;
    out << "  <job" << attr("id", id) << attr("binding", binding_variant_name(b.variant));
    if (b.program) out << attr("program", *b.program);
    if (b.actuator) out << attr("actuator", *b.actuator);
    out << ">\n";
    for (const auto& c : b.capabilities) out << "    <capability" << attr("name", c) << "/>\n";
    for (const auto& [k, v] : n.params) out << "    <param" << attr("name", k) << attr("value", v) << "/>\n";
    for (const auto& f : g.object_flows()) {
      if (f.consumer != id) continue;
      out << "    <input" << attr("source", f.producer) << ">\n";
      for (const auto& [name, unit] : f.spec.wanted)
        out << "      <observable" << attr("name", name) << attr("unit", unit.name) << "/>\n";
      out << "    </input>\n";
    }
    for (const auto& o : n.outputs) out << "    <output" << attr("name", o) << "/>\n";
    for (const auto& c : n.cites) out << "    <cite>" << xml_escape(c) << "</cite>\n";
    for (const auto& d : deps.at(id)) out << "    <depends-on" << attr("job", d) << "/>\n";
    out << "  </job>\n";
  }
  const auto back = back_edges(g);
  for (const auto& id : order) {
    const Node& n = g.node(id);
    switch (n.kind) {
      case NodeKind::Fork:
        out << "  <fork" << attr("id", id) << attr("after", g.predecessors(id).front()) << ">\n";
        for (const auto& s : g.successors(id)) out << "    <branch" << attr("target", s) << "/>\n";
        out << "  </fork>\n";
        break;
      case NodeKind::Join:
        out << "  <join" << attr("id", id) << attr("then", g.successors(id).front()) << ">\n";
        for (const auto& p : g.predecessors(id)) out << "    <wait" << attr("source", p) << "/>\n";
        out << "  </join>\n";
        break;
      case NodeKind::Decision:
        out << "  <decision" << attr("id", id) << attr("after", g.predecessors(id).front()) << ">\n";
        for (const auto& br : n.branches) {
          if (br.guard)
            out << "    <when" << attr("observable", br.guard->observable)
                << attr("op", compare_op_symbol(br.guard->op)) << attr("value", shortest(br.guard->literal))
                << attr("unit", br.guard->unit.name) << attr("target", br.target) << "/>\n";
          else
            out << "    <else" << attr("target", br.target) << "/>\n";
        }
        out << "  </decision>\n";
        break;
      default: break;
    }
  }
  for (const auto& e : back)
    out << "  <loop" << attr("decision", e.from) << attr("head", e.to)
        << attr("max", std::to_string(max_iterations)) << "/>\n";
  out << "</workflow>\n";
  return out.str();
}

namespace {

[[noreturn]] void invalid(const std::string& why) { throw Error(ErrorCode::ParseError, "job xml: " + why); }

std::string required(const pt::ptree& node, const std::string& element, const std::string& name) {
  auto v = node.get_optional<std::string>("<xmlattr>." + name);
  if (!v || v->empty()) invalid("<" + element + "> without " + name);
  return *v;
}

pt::ptree read(std::string_view xml) {
  pt::ptree tree;
  std::istringstream in{std::string(xml)};
  try {
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    invalid(e.message() + " at line " + std::to_string(e.line()));
  }
  return tree;
}

}  // namespace

void validate_job_xml(std::string_view xml) {
  const pt::ptree tree = read(xml);
  if (tree.size() != 1 || tree.front().first != "workflow") invalid("root element must be <workflow>");
  const pt::ptree& wf = tree.front().second;
  required(wf, "workflow", "name");

  std::set<std::string> ids, jobs;
  std::map<std::string, std::set<std::string>> deps;
  for (const auto& [tag, child] : wf) {
    if (tag == "<xmlattr>" || tag == "<xmlcomment>" || tag == "cite") continue;
    if (tag == "loop") {
      required(child, tag, "decision");
      required(child, tag, "head");
      const std::string max = required(child, tag, "max");
      int m = 0;
      auto r = std::from_chars(max.data(), max.data() + max.size(), m);
      if (r.ec != std::errc{} || r.ptr != max.data() + max.size() || m < 1) invalid("bad loop max " + max);
      continue;
    }
    if (tag != "job" && tag != "fork" && tag != "join" && tag != "decision") invalid("unexpected <" + tag + ">");
    const std::string id = required(child, tag, "id");
    if (!ids.insert(id).second) invalid("duplicate id " + id);
    if (tag != "job") continue;
    jobs.insert(id);
    const std::string binding = required(child, tag, "binding");
    const bool has_program = child.get_optional<std::string>("<xmlattr>.program").has_value();
    const bool has_actuator = child.get_optional<std::string>("<xmlattr>.actuator").has_value();
    if (binding == "pinned-both") {
      if (!has_program || !has_actuator) invalid("job " + id + ": pinned-both needs program and actuator");
    } else if (binding == "pinned-program") {
      if (!has_program || has_actuator) invalid("job " + id + ": pinned-program needs program only");
    } else if (binding == "free") {
      if (has_program || has_actuator) invalid("job " + id + ": free binding pins nothing");
    } else {
      invalid("job " + id + ": unknown binding " + binding);
    }
    for (const auto& [ctag, c] : child) {
      if (ctag == "<xmlattr>" || ctag == "cite") continue;
      if (ctag == "capability" || ctag == "output") {
        required(c, ctag, "name");
      } else if (ctag == "param") {
        required(c, ctag, "name");
        if (!c.get_optional<std::string>("<xmlattr>.value")) invalid("<param> without value");
      } else if (ctag == "input") {
        required(c, ctag, "source");
        for (const auto& [otag, o] : c) {
          if (otag == "<xmlattr>") continue;
          if (otag != "observable") invalid("unexpected <" + otag + "> in <input>");
          required(o, otag, "name");
          required(o, otag, "unit");
        }
      } else if (ctag == "depends-on") {
        deps[id].insert(required(c, ctag, "job"));
      } else {
        invalid("unexpected <" + ctag + "> in <job>");
      }
    }
  }
  for (const auto& [job, ds] : deps)
    for (const auto& d : ds)
      if (!jobs.contains(d)) invalid("job " + job + " depends on unknown job " + d);

  std::map<std::string, int> color;
  std::function<void(const std::string&)> dfs = [&](const std::string& u) {
    color[u] = 1;
    for (const auto& w : deps[u]) {
      if (color[w] == 1) invalid("dependency cycle through " + w);
      if (color[w] == 0) dfs(w);
    }
    color[u] = 2;
  };
  for (const auto& j : jobs)
    if (color[j] == 0) dfs(j);
}

std::map<std::string, std::set<std::string>> job_dependencies(std::string_view xml) {
  validate_job_xml(xml);
  const pt::ptree tree = read(xml);
  std::map<std::string, std::set<std::string>> out;
  for (const auto& [tag, child] : tree.front().second) {
    if (tag != "job") continue;
    auto& deps = out[child.get<std::string>("<xmlattr>.id")];
    for (const auto& [ctag, c] : child)
      if (ctag == "depends-on") deps.insert(c.get<std::string>("<xmlattr>.job"));
  }
  return out;
}

namespace {

std::string dot_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  return out + "\"";
}

std::string dot_node(const Node& n) {
  const std::string id = dot_quote(n.id);
  switch (n.kind) {
    case NodeKind::Start:
      return id + " [shape=circle, style=filled, fillcolor=black, label=\"\", width=0.3];";
    case NodeKind::Final:
      return id + " [shape=doublecircle, style=filled, fillcolor=black, label=\"\", width=0.2];";
    case NodeKind::Decision:
      return id + " [shape=diamond, label=" + dot_quote(n.id) + "];";
    case NodeKind::Fork:
    case NodeKind::Join:
      return id + " [shape=box, style=filled, fillcolor=black, label=\"\", height=0.06, width=1.2];";
    case NodeKind::Activity: {
      std::string label = n.id;
      if (n.binding.program) label += "\n" + *n.binding.program;
      if (n.binding.actuator) label += " @ " + *n.binding.actuator;
      if (!n.binding.program && !n.binding.capabilities.empty()) {
        std::string caps;
        for (const auto& c : n.binding.capabilities) caps += (caps.empty() ? "" : ",") + c;
        label += "\n{" + caps + "}";
      }
      return id + " [shape=box, style=rounded, label=" + dot_quote(label) + "];";
    }
  }
  return id + ";";
}

}  // namespace

std::string to_dot(const WorkflowGraph& g) {
  std::ostringstream out;
  out << "digraph " << dot_quote(g.name()) << " {\n";
  out << "  rankdir=TB;\n";
  out << "  node [fontname=\"Helvetica\"];\n";
  out << "  edge [fontname=\"Helvetica\"];\n";

  std::map<BindingVariant, std::vector<const Node*>> lanes;
  for (const auto& [id, n] : g.nodes()) {
    if (n.kind == NodeKind::Activity) lanes[n.binding.variant].push_back(&n);
    else out << "  " << dot_node(n) << "\n";
  }
  for (const auto& [variant, members] : lanes) {
    std::string name(binding_variant_name(variant));
    std::string cluster = "cluster_" + name;
    for (auto& c : cluster)
      if (c == '-') c = '_';
    out << "  subgraph " << cluster << " {\n";
    out << "    label=" << dot_quote(name) << ";\n";
    out << "    style=dashed;\n";
    for (const Node* n : members) out << "    " << dot_node(*n) << "\n";
    out << "  }\n";
  }
  for (const auto& e : g.edges()) {
    out << "  " << dot_quote(e.from) << " -> " << dot_quote(e.to);
    const Node& from = g.node(e.from);
    if (from.kind == NodeKind::Decision) {
      for (const auto& b : from.branches)
        if (b.target == e.to) out << " [label=" << dot_quote(b.guard ? "[" + b.guard->str() + "]" : "[else]") << "]";
    }
    out << ";\n";
  }
  for (const auto& f : g.object_flows()) {
    std::string label;
    for (const auto& [name, unit] : f.spec.wanted) label += (label.empty() ? "" : ", ") + name;
    out << "  " << dot_quote(f.producer) << " -> " << dot_quote(f.consumer)
        << " [style=dashed, arrowhead=open, constraint=false, label=" << dot_quote(label) << "];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace gridflow
