#include <CLI11.hpp>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "documents.hpp"

using namespace jetfree;
using jetfree::cli::Json;

namespace {

constexpr int kAffirmative = 0;
constexpr int kNegative = 1;
constexpr int kError = 2;

struct Common {
  std::string file;
  bool json = false;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot read '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Thrown once the diagnostics of a bad spec file have been reported.
struct SpecRejected {};

std::string message(const Error& e) {
  std::string s = e.what();
  std::string prefix = std::string(to_string(e.kind())) + ": ";
  return s.rfind(prefix, 0) == 0 ? s.substr(prefix.size()) : s;
}

void emit(const Json& doc) { std::cout << doc.dump(2) << "\n"; }

int fail(const Common& c, const std::string& command, const Error& e, Json extra = Json::object()) {
  if (c.json) {
    Json doc{{"command", command}, {"error", {{"kind", std::string(to_string(e.kind()))}, {"message", message(e)}}}};
    for (auto& [k, v] : extra.items()) doc[k] = v;
    emit(doc);
  }
  std::cerr << "jetfree " << command << ": " << e.what() << "\n";
  return kError;
}

PseudogroupSpec load_spec(const Common& c, const std::string& command, int cap) {
  SpecSource src(slurp(c.file), c.file);
  auto res = parse_spec(src, {cap});
  for (const auto& d : res.diagnostics) std::cerr << format_diagnostic(src, d) << "\n";
  if (!res.ok()) {
    if (c.json) {
      Json diags = Json::array();
      for (const auto& d : res.diagnostics) diags.push_back(cli::diagnostic_to_json(src, d));
      emit({{"command", command}, {"error", {{"kind", "InvalidSpec"}, {"message", "the specification has errors"}}}, {"diagnostics", diags}});
    }
    throw SpecRejected{};
  }
  return *res.spec;
}

SubmanifoldJetPoint load_point(const PseudogroupSpec& ps, const std::string& path, int n) {
  Json doc;
  try {
    doc = Json::parse(slurp(path));
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::InvalidArgument, "point file is not valid JSON: " + std::string(e.what()));
  }
  auto z = cli::point_from_json(ps.space, doc);
  if (z.order != n)
    throw Error(ErrorKind::OrderMismatch, "point has order " + std::to_string(z.order) + " but --order is " + std::to_string(n));
  return z;
}

Json kernel_json(const std::vector<VectorFieldJet>& kernel) {
  Json out = Json::array();
  for (const auto& v : kernel) out.push_back(cli::vector_field_to_json(v));
  return out;
}

int cmd_parse(const Common& c) {
  SpecSource src(slurp(c.file), c.file);
  auto res = parse_spec(src);
  Json diags = Json::array();
  for (const auto& d : res.diagnostics) diags.push_back(cli::diagnostic_to_json(src, d));
  if (!res.ok()) {
    if (c.json) emit(diags);
    for (const auto& d : res.diagnostics) std::cerr << format_diagnostic(src, d) << "\n";
    return kError;
  }
  if (c.json) {
    emit({{"command", "parse"}, {"pseudogroup", res.spec->name}, {"normalized", serialize_spec(*res.spec)}, {"diagnostics", diags}});
  } else {
    for (const auto& d : res.diagnostics) std::cerr << format_diagnostic(src, d) << "\n";
    std::cout << serialize_spec(*res.spec);
  }
  return kAffirmative;
}

int cmd_freeness(const Common& c, int n, const std::string& point) {
  auto ps = load_spec(c, "freeness", std::max(8, n));
  auto z = load_point(ps, point, n);
  auto v = local_freeness(ps, n, z);
  if (c.json) {
    auto doc = cli::report("freeness", ps, n, z);
    doc["verdict"] = to_string(v.verdict);
    doc["kernel_dimension"] = v.kernel_dimension;
    doc["kernel_basis"] = kernel_json(v.kernel);
    doc["orbit_dimension"] = v.orbit_dimension;
    doc["fiber_dimension"] = v.fiber_dimension;
    emit(doc);
  } else {
    std::cout << to_string(v.verdict) << "\nfiber dimension " << v.fiber_dimension << ", orbit dimension " << v.orbit_dimension
              << ", kernel dimension " << v.kernel_dimension << "\n";
    for (const auto& k : v.kernel) std::cout << "kernel: " << cli::vector_field_to_json(k).dump() << "\n";
  }
  return v.locally_free() ? kAffirmative : kNegative;
}

int cmd_persistence(const Common& c, int n, int through, const std::string& point, int samples, std::uint64_t seed, unsigned threads,
                    bool timing) {
  auto ps = load_spec(c, "persistence", std::max({8, n, through}));
  if (n < ps.base_order)
    throw Error(ErrorKind::PreconditionViolation,
                "persistence needs --order at least the pseudogroup order " + std::to_string(ps.base_order));
  if (through <= n) throw Error(ErrorKind::InvalidArgument, "--through must exceed --order");
  if (samples < 1) throw Error(ErrorKind::InvalidArgument, "--samples must be positive");
  auto z = load_point(ps, point, n);
  auto start = std::chrono::steady_clock::now();
  auto rep = persistence_sweep(ps, n, z, through, samples, seed, {10, threads});
  auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (c.json) {
    auto doc = cli::report("persistence", ps, n, z);
    doc["verdict"] = rep.passed() ? "LOCALLY_FREE" : "NOT_LOCALLY_FREE";
    doc["kernel_dimension"] = rep.base_verdict.kernel_dimension;
    doc["orbit_dimension"] = rep.base_verdict.orbit_dimension;
    doc["samples"] = samples;
    doc["seed"] = seed;
    doc["through"] = through;
    Json orders = Json::array();
    for (const auto& o : rep.orders) orders.push_back({{"order", o.order}, {"fiber_dimension", o.fiber_dimension}, {"checked", o.checked}});
    doc["orders"] = orders;
    for (const auto& f : rep.failures)
      doc["failures"].push_back(
          {{"order", f.order}, {"point", cli::point_to_json(f.lift)}, {"kernel_element", cli::vector_field_to_json(f.kernel_element)}});
    if (timing) doc["timing_ms"] = ms;
    emit(doc);
  } else {
    for (const auto& o : rep.orders) std::cout << "order " << o.order << ": " << o.checked << " lifts, fiber dimension " << o.fiber_dimension << "\n";
    std::cout << rep.failures.size() << " failures\n";
    for (const auto& f : rep.failures) std::cout << "failure at order " << f.order << ": " << cli::point_to_json(f.lift).dump() << "\n";
    if (timing) std::cout << "time " << ms << " ms\n";
  }
  return rep.passed() ? kAffirmative : kNegative;
}

Json parse_cross_section_arg(const std::string& arg) {
  try {
    return Json::parse(arg);
  } catch (const Json::parse_error&) {
  }
  try {
    return Json::parse(slurp(arg));
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::InvalidArgument, "cross-section is neither JSON nor a JSON file: " + std::string(e.what()));
  }
}

int cmd_frame(const Common& c, int n, const std::string& cs_arg, const std::string& point, bool with_invariants, bool exact_only) {
  auto ps = load_spec(c, "frame", std::max(8, n));
  auto z = load_point(ps, point, n);
  auto cs = cli::cross_section_from_json(*ps.space, n, parse_cross_section_arg(cs_arg));
  SolverConfig cfg;
  cfg.allow_float = !exact_only;
  auto cert = anchor_transversality(ps, cs, z, cfg);
  if (!cert.transversal)
    return fail(c, "frame",
                Error(ErrorKind::PreconditionViolation, "the cross-section is not transversal at the anchor: " + cert.describe()),
                {{"certificate", cli::certificate_to_json(cert)}});
  MovingFrameChart chart(ps, cs, z, cfg);
  auto f = chart.require(z);
  auto moved = act_on_jet(f.jet, z);
  Json inv = Json::object();
  if (with_invariants)
    for (const auto& e : invariants(chart, z))
      if (!e.normalized) inv[ps.space->name(e.coordinate)] = cli::str(e.value);
  if (c.json) {
    auto doc = cli::report("frame", ps, n, z);
    doc["verdict"] = f.exact ? "EXACT" : "FLOAT";
    doc["orbit_dimension"] = cert.orbit_dimension;
    doc["cross_section"] = Json::object();
    for (const auto& [v, val] : cs.fix) doc["cross_section"][ps.space->name(v)] = cli::str(val);
    doc["certificate"] = cli::certificate_to_json(cert);
    doc["frame"] = cli::diffeo_to_json(f.jet);
    doc["exact"] = f.exact;
    doc["normalized_point"] = cli::point_to_json(moved);
    if (with_invariants) doc["invariants"] = inv;
    emit(doc);
  } else {
    std::cout << "frame (" << (f.exact ? "exact" : "float") << "): " << cli::diffeo_to_json(f.jet).dump() << "\n";
    std::cout << "normalized point: " << cli::point_to_json(moved).dump() << "\n";
    if (with_invariants) std::cout << "invariants: " << inv.dump() << "\n";
  }
  return kAffirmative;
}

int cmd_isotropy(const Common& c, int n, const std::string& point) {
  auto ps = load_spec(c, "isotropy", std::max(8, n + 1));
  auto z = load_point(ps, point, n);
  auto rep = isotropy_jets_triangular(ps, n, z);
  if (c.json) {
    auto doc = cli::report("isotropy", ps, n, z);
    doc["verdict"] = to_string(rep.status);
    Json stages = Json::array();
    for (const auto& s : rep.stages) {
      Json coords = Json::object();
      for (const auto& [v, val] : s.coordinates) coords[ps.space->name(v)] = val ? Json(cli::str(*val)) : Json(nullptr);
      stages.push_back({{"order", s.order}, {"coordinates", coords}});
    }
    doc["stages"] = stages;
    doc["witness"] = rep.witness ? cli::diffeo_to_json(*rep.witness) : Json(nullptr);
    doc["note"] = rep.note;
    emit(doc);
  } else {
    std::cout << to_string(rep.status) << "\n";
    if (rep.witness) std::cout << "witness: " << cli::diffeo_to_json(*rep.witness).dump() << "\n";
    if (!rep.note.empty()) std::cout << rep.note << "\n";
  }
  return rep.status == IsotropyStatus::Trivial ? kAffirmative : kNegative;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"jetfree: exact computations with Lie pseudogroups on submanifold jet bundles"};
  app.require_subcommand(1);
  Common c;
  auto common = [&](CLI::App* sub) {
    sub->add_option("file", c.file, "pseudogroup specification (.psg)")->required();
    sub->add_flag("--json", c.json, "write one JSON document to standard output");
  };
  int n = 0, through = 0, samples = 100;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string point, cs;
  bool timing = false, with_invariants = false, exact_only = false;

  auto* parse = app.add_subcommand("parse", "check a specification and print its normalized form");
  common(parse);

  auto* freeness = app.add_subcommand("freeness", "decide local freeness at a jet point");
  common(freeness);
  freeness->add_option("--order,-n", n, "jet order")->required();
  freeness->add_option("--point", point, "PointDocument file")->required();

  auto* persistence = app.add_subcommand("persistence", "check local freeness at random lifts to higher orders");
  common(persistence);
  persistence->add_option("--order,-n", n, "base order")->required();
  persistence->add_option("--through", through, "highest order checked")->required();
  persistence->add_option("--point", point, "PointDocument file")->required();
  persistence->add_option("--samples", samples, "lifts per order")->capture_default_str();
  persistence->add_option("--seed", seed, "random seed")->capture_default_str();
  persistence->add_option("--threads", threads, "worker threads, 0 for all cores")->capture_default_str();
  persistence->add_flag("--timing", timing, "report the wall time");

  auto* frame = app.add_subcommand("frame", "construct a normalized moving frame at a point");
  common(frame);
  frame->add_option("--order,-n", n, "jet order")->required();
  frame->add_option("--cross-section", cs, "JSON object or file, e.g. {\"fix\":{\"x\":\"0\",\"u.x\":\"1\"}}")->required();
  frame->add_option("--point", point, "PointDocument file of the anchor")->required();
  frame->add_flag("--invariants", with_invariants, "list the differential invariants");
  frame->add_flag("--exact-only", exact_only, "refuse floating-point solves");

  auto* isotropy = app.add_subcommand("isotropy", "solve for the isotropy jets at a point");
  common(isotropy);
  isotropy->add_option("--order,-n", n, "jet order")->required();
  isotropy->add_option("--point", point, "PointDocument file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kError;
  }

  std::string command = app.get_subcommands().front()->get_name();
  try {
    if (parse->parsed()) return cmd_parse(c);
    if (freeness->parsed()) return cmd_freeness(c, n, point);
    if (persistence->parsed()) return cmd_persistence(c, n, through, point, samples, seed, threads, timing);
    if (frame->parsed()) return cmd_frame(c, n, cs, point, with_invariants, exact_only);
    if (isotropy->parsed()) return cmd_isotropy(c, n, point);
  } catch (const SpecRejected&) {
    return kError;
  } catch (const Error& e) {
    return fail(c, command, e);
  } catch (const std::exception& e) {
    return fail(c, command, Error(ErrorKind::InvalidArgument, e.what()));
  }
  return kError;
}
