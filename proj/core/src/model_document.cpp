#include "ebmix/model_document.hpp"

#include <cstdio>
#include <string>

#include <json.hpp>

#include "ebmix/errors.hpp"

namespace ebmix {

namespace {

using nlohmann::json;

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write(const json& node, std::string& out, int depth) {
  const std::string pad(static_cast<std::size_t>(2 * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(2 * depth), ' ');
  switch (node.type()) {
    case json::value_t::object: {
      if (node.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = node.begin(); it != node.end(); ++it) {  // std::map: sorted keys
        if (!first) out += ",\n";
        first = false;
        out += pad + json(it.key()).dump() + ": ";
        write(it.value(), out, depth + 1);
      }
      out += "\n" + close_pad + "}";
      return;
    }
    case json::value_t::array: {
      if (node.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < node.size(); ++i) {
        if (i > 0) out += ",\n";
        out += pad;
        write(node[i], out, depth + 1);
      }
      out += "\n" + close_pad + "]";
      return;
    }
    case json::value_t::number_float:
      out += format_real(node.get<double>());
      return;
    default:
      out += node.dump();
  }
}

template <typename T>
T field(const json& node, const char* key) {
  if (!node.is_object() || !node.contains(key)) throw ParseError(std::string("missing field '") + key + "'", 1);
  try {
    return node.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("field '") + key + "' has the wrong type", 1);
  }
}

double real_field(const json& node, const char* key) {
  if (!node.is_object() || !node.contains(key)) throw ParseError(std::string("missing field '") + key + "'", 1);
  const auto& v = node.at(key);
  if (!v.is_number()) throw ParseError(std::string("field '") + key + "' must be a number", 1);
  return v.get<double>();
}

std::vector<double> real_array(const json& node, const char* key) {
  if (!node.contains(key) || !node.at(key).is_array())
    throw ParseError(std::string("field '") + key + "' must be an array", 1);
  std::vector<double> out;
  for (const auto& v : node.at(key)) {
    if (!v.is_number()) throw ParseError(std::string("field '") + key + "' must hold numbers", 1);
    out.push_back(v.get<double>());
  }
  return out;
}

// Force float storage so integral reals still print through format_real.
json real(double v) { return json(static_cast<double>(v)); }

}  // namespace

std::string to_canonical_json(const ModelDocument& doc) {
  const MixtureModel& m = doc.model;
  json root = json::object();
  root["format_version"] = doc.format_version;
  root["family"] = std::string(to_string(m.family));
  root["null_mode"] = std::string(to_string(m.null_mode));
  root["J"] = m.size();
  root["pi"] = json::array();
  for (double w : m.weights) root["pi"].push_back(real(w));
  root["penalty"] = json::array();
  for (double b : m.penalty) root["penalty"].push_back(real(b));
  root["components"] = json::array();
  for (const auto& c : m.components) {
    json comp = json::object();
    if (const auto* n = std::get_if<NormalComponent>(&c)) {
      comp["mean"] = real(n->mean);
      comp["variance"] = real(n->variance);
    } else {
      const auto& b = std::get<BetaComponent>(c);
      comp["alpha"] = real(b.alpha);
      comp["beta"] = real(b.beta);
    }
    root["components"].push_back(comp);
  }
  root["diagnostics"] = {{"penalized_loglik", real(m.diagnostics.penalized_loglik)},
                         {"loglik", real(m.diagnostics.loglik)},
                         {"iterations", m.diagnostics.iterations},
                         {"converged", m.diagnostics.converged}};
  root["fit_timestamp"] = doc.fit_timestamp;
  root["seed"] = doc.seed;
  std::string out;
  write(root, out, 0);
  out += "\n";
  return out;
}

ModelDocument parse_model_document(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), 1);
  }
  if (!root.is_object()) throw ParseError("model document must be a JSON object", 1);
  ModelDocument doc;
  doc.format_version = field<int>(root, "format_version");
  if (doc.format_version != ModelDocument::kFormatVersion)
    throw ParseError("unsupported format_version " + std::to_string(doc.format_version), 1);
  MixtureModel& m = doc.model;
  try {
    m.family = parse_family(field<std::string>(root, "family"));
    m.null_mode = parse_null_mode(field<std::string>(root, "null_mode"));
  } catch (const ContractViolation& e) {
    throw ParseError(e.what(), 1);
  }
  const auto j = field<std::size_t>(root, "J");
  m.weights = real_array(root, "pi");
  m.penalty = real_array(root, "penalty");
  if (!root.contains("components") || !root.at("components").is_array())
    throw ParseError("field 'components' must be an array", 1);
  for (const auto& c : root.at("components")) {
    if (m.family == Family::Normal) {
      m.components.emplace_back(NormalComponent{real_field(c, "mean"), real_field(c, "variance")});
    } else {
      m.components.emplace_back(BetaComponent{real_field(c, "alpha"), real_field(c, "beta")});
    }
  }
  if (m.weights.size() != j || m.components.size() != j || m.penalty.size() != j)
    throw ParseError("J does not match the lengths of pi, penalty and components", 1);
  const json diag = root.contains("diagnostics") ? root.at("diagnostics") : json();
  m.diagnostics.penalized_loglik = real_field(diag, "penalized_loglik");
  m.diagnostics.loglik = real_field(diag, "loglik");
  m.diagnostics.iterations = field<int>(diag, "iterations");
  m.diagnostics.converged = field<bool>(diag, "converged");
  doc.fit_timestamp = field<std::string>(root, "fit_timestamp");
  doc.seed = field<std::uint64_t>(root, "seed");
  m.validate();
  return doc;
}

}  // namespace ebmix
