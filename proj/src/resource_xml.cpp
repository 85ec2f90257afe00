#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <sstream>

#include "gridflow/error.hpp"
#include "gridflow/resources.hpp"
#include "gridflow/xml_util.hpp"

namespace gridflow {

namespace pt = boost::property_tree;

std::string xml_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

namespace {

std::string attr(const pt::ptree& node, const std::string& name, const std::string& fallback = {}) {
  return node.get<std::string>("<xmlattr>." + name, fallback);
}

[[noreturn]] void bad(const std::string& why) { throw Error(ErrorCode::InvalidDescriptor, why); }

}  // namespace

ResourceDescriptor parse_resource_xml(std::string_view xml) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(xml)};
    pt::read_xml(in, tree, pt::xml_parser::trim_whitespace);
  } catch (const pt::xml_parser_error& e) {
    throw Error(ErrorCode::ParseError, "resource xml line " + std::to_string(e.line()) + ": " + e.message());
  }
  auto root_opt = tree.get_child_optional("resource");
  if (!root_opt) bad("root element must be <resource>");
  const pt::ptree& root = *root_opt;

  ResourceDescriptor d;
  d.id = attr(root, "id");
  try {
    d.cost_weight = std::stod(attr(root, "cost", "0"));
    if (auto p = root.get_child_optional("program")) {
      d.program.name = attr(*p, "name");
      d.program.version = attr(*p, "version");
    } else {
      bad("missing <program>");
    }
    if (auto c = root.get_child_optional("calculator")) {
      d.calculator.name = attr(*c, "name");
      d.calculator.platform = attr(*c, "platform");
      d.calculator.max_jobs = std::stoi(attr(*c, "max-jobs", "1"));
    } else {
      bad("missing <calculator>");
    }
  } catch (const std::logic_error&) {
    bad("malformed numeric attribute");
  }
  if (auto caps = root.get_child_optional("capabilities"))
    for (const auto& [tag, node] : *caps)
      if (tag == "capability") d.capabilities.insert(node.data());
  if (auto lic = root.get_child_optional("license")) {
    auto kind = parse_license_kind(attr(*lic, "kind", "open"));
    if (!kind) bad("unknown license kind '" + attr(*lic, "kind") + "'");
    d.license.kind = *kind;
    d.license.citation = lic->data();
  }
  if (auto tpl = root.get_child_optional("template")) {
    d.launch_template.platform = attr(*tpl, "platform");
    d.launch_template.output_slot = attr(*tpl, "output");
    d.launch_template.command_pattern = tpl->get<std::string>("command", "");
    for (const auto& [tag, node] : *tpl) {
      if (tag != "input") continue;
      InputSlot slot;
      slot.name = attr(node, "slot");
      std::vector<std::pair<std::string, Unit>> wanted;
      for (const auto& [otag, obs] : node)
        if (otag == "observable") wanted.emplace_back(attr(obs, "name"), units::get(attr(obs, "unit", "dimensionless")));
      slot.expected = ExtractionSpec(std::move(wanted));
      d.launch_template.input_slots.push_back(std::move(slot));
    }
  } else {
    bad("missing <template>");
  }
  validate_descriptor(d);
  return d;
}

std::string to_resource_xml(const ResourceDescriptor& d) {
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<resource id=\"" << xml_escape(d.id) << "\" cost=\"" << format_real(d.cost_weight) << "\">\n";
  out << "  <program name=\"" << xml_escape(d.program.name) << "\" version=\"" << xml_escape(d.program.version)
      << "\"/>\n";
  out << "  <calculator name=\"" << xml_escape(d.calculator.name) << "\" platform=\""
      << xml_escape(d.calculator.platform) << "\" max-jobs=\"" << d.calculator.max_jobs << "\"/>\n";
  out << "  <capabilities>\n";
  for (const auto& c : d.capabilities) out << "    <capability>" << xml_escape(c) << "</capability>\n";
  out << "  </capabilities>\n";
  out << "  <license kind=\"" << license_kind_name(d.license.kind) << "\">" << xml_escape(d.license.citation)
      << "</license>\n";
  const auto& t = d.launch_template;
  out << "  <template platform=\"" << xml_escape(t.platform) << "\" output=\"" << xml_escape(t.output_slot)
      << "\">\n";
  out << "    <command>" << xml_escape(t.command_pattern) << "</command>\n";
  for (const auto& slot : t.input_slots) {
    out << "    <input slot=\"" << xml_escape(slot.name) << "\">\n";
    for (const auto& [name, unit] : slot.expected.wanted)
      out << "      <observable name=\"" << xml_escape(name) << "\" unit=\"" << xml_escape(unit.name) << "\"/>\n";
    out << "    </input>\n";
  }
  out << "  </template>\n</resource>\n";
  return out.str();
}

}  // namespace gridflow
