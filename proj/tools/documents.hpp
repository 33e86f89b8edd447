#pragma once

#include <algorithm>
#include <json.hpp>
#include <string>

#include "jetfree/dsl.hpp"
#include "jetfree/frames.hpp"

namespace jetfree::cli {

using Json = nlohmann::ordered_json;

inline std::string str(const Scalar& s) { return s.get_str(); }

inline Scalar scalar_field(const Json& j, const std::string& where) {
  if (j.is_string()) return parse_scalar(j.get<std::string>());
  if (j.is_number_integer()) return Scalar(mpz_class(j.dump()));
  throw Error(ErrorKind::InvalidArgument, where + ": expected a rational string");
}

/// PointDocument: {"order", "independent", "dependent", "jets"}.
inline SubmanifoldJetPoint point_from_json(const JetSpacePtr& space, const Json& doc) {
  if (!doc.is_object() || !doc.contains("order") || !doc["order"].is_number_integer())
    throw Error(ErrorKind::InvalidArgument, "point document needs an integer \"order\"");
  const JetSpace& js = *space;
  const int n = doc["order"].get<int>();
  if (n < 0) throw Error(ErrorKind::InvalidArgument, "point order is negative");
  js.check_cap(n);
  auto coords = js.jet_coordinates(n);
  std::map<VarId, Scalar> given;
  auto take = [&](const char* key, std::size_t from, std::size_t to) {
    if (!doc.contains(key)) return;
    const Json& block = doc[key];
    if (!block.is_object()) throw Error(ErrorKind::InvalidArgument, std::string("\"") + key + "\" must be an object");
    for (const auto& [name, val] : block.items()) {
      auto v = js.find(name);
      if (!v) throw Error(ErrorKind::UnknownCoordinate, "no jet coordinate named '" + name + "'");
      auto it = std::find(coords.begin(), coords.end(), *v);
      auto pos = static_cast<std::size_t>(it - coords.begin());
      if (it == coords.end() && js.var(*v).kind == JetKind::Submanifold)
        throw Error(ErrorKind::OrderMismatch, "'" + name + "' exceeds the point order " + std::to_string(n));
      if (it == coords.end() || pos < from || pos >= to)
        throw Error(ErrorKind::InvalidArgument, "'" + name + "' does not belong in \"" + key + "\"");
      if (!given.emplace(*v, scalar_field(val, name)).second) throw Error(ErrorKind::InvalidArgument, "'" + name + "' given twice");
    }
  };
  const auto p = static_cast<std::size_t>(js.p()), m = static_cast<std::size_t>(js.m());
  take("independent", 0, p);
  take("dependent", p, m);
  take("jets", m, coords.size());
  SubmanifoldJetPoint z{space, n, {}};
  for (VarId v : coords) {
    auto it = given.find(v);
    if (it == given.end()) throw Error(ErrorKind::InvalidArgument, "point is missing coordinate '" + js.name(v) + "'");
    z.values.push_back(it->second);
  }
  return z;
}

inline Json point_to_json(const SubmanifoldJetPoint& z) {
  const JetSpace& js = *z.space;
  Json doc{{"order", z.order}, {"independent", Json::object()}, {"dependent", Json::object()}, {"jets", Json::object()}};
  auto coords = js.jet_coordinates(z.order);
  const auto p = static_cast<std::size_t>(js.p()), m = static_cast<std::size_t>(js.m());
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const char* key = i < p ? "independent" : i < m ? "dependent" : "jets";
    doc[key][js.name(coords[i])] = str(z.values[i]);
  }
  return doc;
}

inline Json vector_field_to_json(const VectorFieldJet& v) {
  Json out = Json::object();
  auto vars = v.space->zeta_vars(v.order);
  for (std::size_t i = 0; i < vars.size(); ++i) out[v.space->name(vars[i])] = str(v.coeffs[i]);
  return out;
}

inline Json diffeo_to_json(const DiffeoJet& g) {
  Json out = Json::object();
  auto vars = g.space->target_vars(g.order);
  for (std::size_t i = 0; i < vars.size(); ++i) out[g.space->name(vars[i])] = str(g.coeffs[i]);
  return out;
}

inline Json diagnostic_to_json(const SpecSource& src, const ParseDiagnostic& d) {
  return {{"severity", d.severity == Severity::Error ? "error" : "warning"},
          {"code", d.code},
          {"message", d.message},
          {"file", src.origin()},
          {"span", {{"offset", d.span.offset}, {"line", d.span.line}, {"column", d.span.column}, {"length", d.span.length}}}};
}

inline Json certificate_to_json(const TransversalityCertificate& c) {
  return {{"transversal", c.transversal},     {"jet_dimension", c.jet_dimension}, {"orbit_dimension", c.orbit_dimension},
          {"fixed", c.fixed},                 {"fixed_rank", c.fixed_rank},       {"stacked_rank", c.stacked_rank},
          {"deficit", c.deficit()}};
}

/// Cross-section document: {"fix": {"x": "0", "u.x": "1"}} or the bare map.
inline CrossSection cross_section_from_json(const JetSpace& js, int n, const Json& doc) {
  const Json& fix = doc.is_object() && doc.contains("fix") ? doc["fix"] : doc;
  if (!fix.is_object()) throw Error(ErrorKind::InvalidArgument, "cross-section must map coordinate names to constants");
  std::vector<std::pair<std::string, Scalar>> pairs;
  for (const auto& [name, val] : fix.items()) pairs.emplace_back(name, scalar_field(val, name));
  return make_cross_section(js, n, pairs);
}

/// Skeleton ReportDocument with every schema key present.
inline Json report(const std::string& command, const PseudogroupSpec& ps, int n, const SubmanifoldJetPoint& z) {
  return {{"command", command},
          {"pseudogroup", ps.name},
          {"order", n},
          {"point", point_to_json(z)},
          {"verdict", nullptr},
          {"kernel_dimension", nullptr},
          {"kernel_basis", Json::array()},
          {"orbit_dimension", nullptr},
          {"samples", nullptr},
          {"seed", nullptr},
          {"failures", Json::array()}};
}

}  // namespace jetfree::cli
