// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Exit codes: 0 success, 1 I/O error, 2 invalid
// input, 3 cell budget exceeded.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cpwl/bounds.hpp"
#include "cpwl/constructions.hpp"
#include "cpwl/geometry.hpp"
#include "cpwl/io.hpp"
#include "cpwl/parallel.hpp"
#include "cpwl/paths.hpp"
#include "cpwl/random.hpp"
#include "cpwl/stochastic.hpp"

namespace fs = std::filesystem;
using namespace cpwl;

namespace {

constexpr int kExitIo = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitBudget = 3;

template <class T>
std::vector<T> parse_list(const std::string& s, const char* what) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::stringstream is(item);
    T v{};
    if (!(is >> v) || !is.eof()) throw std::invalid_argument(std::string("bad ") + what + " list '" + s + "'");
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument(std::string("empty ") + what + " list");
  return out;
}

struct Common {
  std::uint64_t seed = 1;
  std::size_t threads = 0;
  std::string out_dir = "cpwl_out";
};

// Every option of a subcommand with its parsed or default value.
Json resolved_config(const CLI::App& sub, const Common& c) {
  Json opts = Json::object();
  for (const CLI::Option* o : sub.get_options()) {
    const std::string name = o->get_name(false, true);
    if (name.empty() || name == "--help" || name == "-h") continue;
    const std::string key = o->get_lnames().empty() ? name : o->get_lnames().front();
    if (o->count() > 0) {
      opts[key] = o->results();
    } else if (!o->get_default_str().empty()) {
      opts[key] = std::vector<std::string>{o->get_default_str()};
    }
  }
  return {{"subcommand", sub.get_name()}, {"seed", c.seed}, {"threads", c.threads},
          {"out_dir", c.out_dir}, {"options", opts}};
}

std::string out_file(const Common& c, const std::string& name) {
  fs::create_directories(c.out_dir);
  return (fs::path(c.out_dir) / name).string();
}

void write_config(const CLI::App& sub, const Common& c) {
  write_text(out_file(c, sub.get_name() + ".config.json"), dump(resolved_config(sub, c)));
}

Domain parse_box(const std::string& box, std::size_t dim) {
  if (box.empty()) return Domain::unbounded();
  const auto v = parse_list<double>(box, "box");
  if (v.size() == 2) return Domain::cube(dim, v[0], v[1]);
  if (v.size() == 2 * dim) {
    Vector lo(static_cast<Eigen::Index>(dim)), hi(static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < dim; ++i) {
      lo[static_cast<Eigen::Index>(i)] = v[2 * i];
      hi[static_cast<Eigen::Index>(i)] = v[2 * i + 1];
    }
    return Domain::box(lo, hi);
  }
  throw std::invalid_argument("--box takes lo,hi or lo1,hi1,...,lod,hid");
}

// ------------------------------------------------------------------ bound

struct BoundArgs {
  std::string family;
  std::string dims;
  std::size_t kappa = 2;
  std::size_t gs = 2;
  std::size_t d = 0, N = 0, dprime = 0, M = 0;
  std::vector<std::string> beta;
  std::string cor36;
  std::size_t depth = 1;
};

int run_bound(const BoundArgs& a, const CLI::App& sub, const Common& c) {
  Json report = Json::object();
  CsvTable csv({"name", "value"});
  auto emit = [&](const std::string& name, const std::string& value) {
    std::cout << name << " = " << value << "\n";
    csv.add({name, value});
    report[name] = value;
  };
  bool any = false;
  if (!a.beta.empty()) {
    const auto d = parse_list<std::size_t>(a.beta[0], "dimension").front();
    const auto ns = parse_list<std::size_t>(a.beta[1], "partition size");
    emit("beta", to_string(beta(d, ns)));
    any = true;
  }
  if (!a.cor36.empty()) {
    const auto v = parse_list<std::size_t>(a.cor36, "d_in,W,d_out");
    if (v.size() != 3) throw std::invalid_argument("--cor36 takes d_in,W,d_out");
    const Envelope env = corollary_envelope(v[0], v[1], v[2], a.depth, a.kappa);
    const auto fam = corollary_family(v[0], v[1], v[2], a.depth, a.kappa);
    const BigInt upper = compositional_upper(fam).value;
    const BigInt cons = alpha_lower_constructive(fam).value;
    emit("corollary_lower_paper", to_string(env.lower_paper));
    emit("corollary_upper", to_string(env.upper));
    emit("compositional_upper", to_string(upper));
    emit("alpha_lower_constructive", to_string(cons));
    for (const auto& w : env.warnings) std::cout << "WARNING: " << w << "\n";
    if (env.lower_paper > upper) {
      std::cout << "AUDIT: paper-lower " << to_string(env.lower_paper) << " > thm-upper "
                << to_string(upper) << "\n";
      report["audit"] = "paper-lower " + to_string(env.lower_paper) + " > thm-upper " + to_string(upper);
    }
    any = true;
  }
  if (!a.family.empty()) {
    std::map<std::string, std::size_t> p;
    for (const auto& [k, v] : std::map<std::string, std::size_t>{
             {"kappa", a.kappa}, {"gs", a.gs}, {"d", a.d}, {"N", a.N}, {"dprime", a.dprime}, {"M", a.M}}) {
      if (v != 0) p[k] = v;
    }
    const std::vector<std::size_t> dims = a.dims.empty() ? std::vector<std::size_t>{} : parse_list<std::size_t>(a.dims, "dims");
    const BoundReport r = architecture_bound(a.family, p, dims);
    std::cout << "formula: " << r.formula << "\n";
    emit(a.family, to_string(r.value));
    if (r.envelope_upper != 0) {
      emit("envelope_lower", to_string(r.envelope_lower));
      emit("envelope_upper", to_string(r.envelope_upper));
    }
    report["report"] = bound_report_to_json(r);
    any = true;
  }
  if (!a.dims.empty() && (a.family.empty() || a.family == "generic")) {
    const auto dims = parse_list<std::size_t>(a.dims, "dims");
    const auto arch = ArchitectureDescriptor::uniform(dims, a.kappa);
    const BigInt upper = compositional_upper(arch).value;
    const TauResult paper = alpha_lower_paper(arch);
    const TauResult cons = alpha_lower_constructive(arch);
    emit("compositional_upper", to_string(upper));
    emit("alpha_lower_paper", to_string(paper.value));
    emit("alpha_lower_constructive", to_string(cons.value));
    if (paper.heuristic || cons.heuristic) std::cout << "note: tau search heuristic (valid lower bound)\n";
    if (paper.value > upper) {
      std::cout << "AUDIT: paper-lower " << to_string(paper.value) << " > thm-upper " << to_string(upper) << "\n";
      report["audit"] = "paper-lower " + to_string(paper.value) + " > thm-upper " + to_string(upper);
    }
    any = true;
  }
  if (!any) throw std::invalid_argument("bound: give --beta, --cor36, --family or --dims");
  write_text(out_file(c, "bound.json"), dump(report));
  write_text(out_file(c, "bound.csv"), csv.str());
  write_config(sub, c);
  return 0;
}

// ------------------------------------------------------------------ count / render

struct CountArgs {
  std::string net;
  std::string box;
  bool exact = false;
  std::size_t max_cells = 1000000;
  double width = 480.0;
};

GeometryConfig geometry_config(const CountArgs& a, const Common& c) {
  GeometryConfig cfg;
  cfg.max_cells = a.max_cells;
  cfg.threads = c.threads;
  return cfg;
}

int run_count(const CountArgs& a, const CLI::App& sub, const Common& c) {
  const NetworkSpec net = read_network(a.net);
  const Domain dom = parse_box(a.box, net.input_dim);
  const GeometryConfig cfg = geometry_config(a, c);
  const RegionSet rs = enumerate_regions(net, dom, cfg);
  const CountReport r = count_report(rs, net);
  std::cout << "cell_count " << r.cell_count << "\n"
            << "distinct_piece_count " << r.distinct_piece_count << "\n"
            << "connected_piece_count " << r.connected_piece_count << "\n"
            << "compositional_upper " << to_string(r.compositional_upper) << "\n";
  Json j = count_report_to_json(r);
  CsvTable csv({"cell_count", "distinct_piece_count", "connected_piece_count", "compositional_upper"});
  csv.add({std::to_string(r.cell_count), std::to_string(r.distinct_piece_count),
           std::to_string(r.connected_piece_count), to_string(r.compositional_upper)});
  if (a.exact) {
    const ExactCount e = enumerate_regions_exact(net, dom, cfg);
    std::cout << "exact_cells " << e.cells << "\nexact_distinct_pieces " << e.distinct_pieces << "\n";
    j["exact"] = {{"cells", e.cells}, {"distinct_pieces", e.distinct_pieces}};
  }
  write_text(out_file(c, "count.json"), dump(j));
  write_text(out_file(c, "count.csv"), csv.str());
  write_text(out_file(c, "regions.json"), dump(region_set_to_json(rs)));
  write_config(sub, c);
  return 0;
}

int run_render(const CountArgs& a, const CLI::App& sub, const Common& c) {
  const NetworkSpec net = read_network(a.net);
  if (net.input_dim != 2) throw std::invalid_argument("render needs a 2D network");
  const Domain dom = parse_box(a.box.empty() ? "-1,1" : a.box, 2);
  const RegionSet rs = enumerate_regions(net, dom, geometry_config(a, c));
  SvgStyle style;
  style.width = style.height = a.width;
  const std::string svg = render_svg(rs, dom.lo, dom.hi, style);
  write_text(out_file(c, "render.svg"), svg);
  std::cout << "cell_count " << rs.regions.size() << "\n";
  write_config(sub, c);
  return 0;
}

// ------------------------------------------------------------------ knots

struct KnotArgs {
  std::string net;
  std::string path;
  std::string segment;
};

int run_knots(const KnotArgs& a, const CLI::App& sub, const Common& c) {
  const NetworkSpec net = read_network(a.net);
  PolygonalPath path;
  if (!a.path.empty()) {
    path = read_path(a.path);
  } else if (a.segment.empty()) {
    throw std::invalid_argument("knots: give --path or --segment");
  } else {
    const auto v = parse_list<double>(a.segment, "segment");
    const std::size_t d = net.input_dim;
    if (v.size() != 2 * d) throw std::invalid_argument("--segment takes 2 * input_dim numbers");
    Vector p(static_cast<Eigen::Index>(d)), q(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) {
      p[static_cast<Eigen::Index>(i)] = v[i];
      q[static_cast<Eigen::Index>(i)] = v[d + i];
    }
    path = PolygonalPath::segment(p, q);
  }
  const KnotReport r = count_knots(net, path, c.threads);
  std::cout << "knots " << r.count << "\nlength " << csv_number(r.length) << "\ndensity "
            << csv_number(r.density) << "\n";
  CsvTable csv({"t", "segment", "layer", "at_vertex", "degenerate"});
  for (const auto& k : r.knots) {
    csv.add({csv_number(k.t), std::to_string(k.segment), std::to_string(k.layer),
             k.at_vertex ? "1" : "0", k.degenerate ? "1" : "0"});
  }
  write_text(out_file(c, "knots.json"), dump(knot_report_to_json(r)));
  write_text(out_file(c, "knots.csv"), csv.str());
  write_config(sub, c);
  return 0;
}

// ------------------------------------------------------------------ mc

struct McArgs {
  std::string family = "relu";
  std::size_t d = 4;
  std::size_t width = 1;
  std::size_t depth = 1;
  std::size_t kappa = 0;
  double sigma_w = 1.0;
  double sigma_b = 1.0;
  std::string dist = "normal";
  bool fan_in = false;
  std::size_t trials = 10000;
  double probe_length = 0.0;
};

int run_mc(const McArgs& a, const CLI::App& sub, const Common& c) {
  InitSpec init;
  init.weight_dist = init.bias_dist = parse_distribution(a.dist);
  init.sigma_w = a.sigma_w;
  init.sigma_b = a.sigma_b;
  init.fan_in_scaling = a.fan_in;
  init.validate();
  if (a.trials < 100) throw std::invalid_argument("--trials must be >= 100");
  std::size_t kappa = a.kappa;
  if (kappa == 0) kappa = a.family == "maxout" ? 3 : 2;
  std::vector<std::size_t> dims{a.d};
  for (std::size_t l = 0; l < a.depth; ++l) dims.push_back(a.width);
  const auto arch = ArchitectureDescriptor::uniform(dims, kappa, a.family);
  const McEstimate e = mc_knot_density(arch, init, a.trials, c.seed, a.probe_length, c.threads);
  double bound = e.bound;
  Json j{{"density", mc_estimate_to_json(e)}};
  if (a.depth > 1 || !std::isfinite(bound)) {
    const McEstimate D = estimate_directional_expansion(arch, init, a.trials, derive_seed(c.seed, 10), c.threads);
    const McEstimate lam = estimate_unit_density(arch, init, a.trials, derive_seed(c.seed, 11), 0.0, c.threads);
    const DensityBound b = compositional_density_bound(lam.mean, D.mean, a.width, a.depth);
    bound = b.corollary;
    j["D0"] = mc_estimate_to_json(D);
    j["lambda0"] = mc_estimate_to_json(lam);
    j["bound_geometric"] = b.geometric;
  }
  const bool pass = e.mean <= bound + 3.0 * e.se;
  j["bound"] = bound;
  j["pass"] = pass;
  std::cout << "mean " << csv_number(e.mean) << "\nse " << csv_number(e.se) << "\nbound "
            << csv_number(bound) << "\n" << (pass ? "PASS" : "FAIL") << "\n";
  CsvTable csv({"family", "W", "L", "kappa", "sigma_w", "sigma_b", "trials", "mean", "SE", "bound", "pass"});
  csv.add({a.family, std::to_string(a.width), std::to_string(a.depth), std::to_string(kappa),
           csv_number(a.fan_in ? -1.0 : a.sigma_w), csv_number(a.sigma_b), std::to_string(a.trials),
           csv_number(e.mean), csv_number(e.se), csv_number(bound), pass ? "1" : "0"});
  write_text(out_file(c, "mc.csv"), csv.str());
  write_text(out_file(c, "mc.json"), dump(j));
  write_config(sub, c);
  return 0;
}

// ------------------------------------------------------------------ construct

struct ConstructArgs {
  std::string kind;
  std::size_t p = 2, q = 2;
  std::string dims;
  std::size_t kappa = 2;
  std::size_t d = 2;
  std::string ns;
  std::string output;
};

int run_construct(const ConstructArgs& a, const CLI::App& sub, const Common& c) {
  NetworkSpec net;
  if (a.kind == "sawtooth") {
    net = scalar_network(sawtooth(a.p), "sawtooth " + std::to_string(a.p));
  } else if (a.kind == "composition") {
    net = sawtooth_composition(a.p, a.q);
  } else if (a.kind == "network") {
    net = sawtooth_network(ArchitectureDescriptor::uniform(parse_list<std::size_t>(a.dims, "dims"), a.kappa, "deepspline"));
  } else if (a.kind == "general-position") {
    net = general_position_partitions(a.d, parse_list<std::size_t>(a.ns, "ns"), c.seed);
  } else if (a.kind == "extremal-sum") {
    net = extremal_sum_network(a.d, parse_list<std::size_t>(a.ns, "ns"), c.seed);
  } else {
    throw std::invalid_argument("unknown --kind '" + a.kind + "'");
  }
  const std::string file = a.output.empty() ? out_file(c, "construct.json") : a.output;
  write_network(file, net);
  std::cout << "wrote " << file << "\n";
  write_config(sub, c);
  return 0;
}

// ------------------------------------------------------------------ audit

int run_audit(const CLI::App& sub, const Common& c) {
  const std::size_t d_in = 1, W = 4, d_out = 1, L = 3, kappa = 2;
  const auto fam = corollary_family(d_in, W, d_out, L, kappa);
  const BigInt paper = alpha_lower_paper(fam).value;
  const BigInt cons = alpha_lower_constructive(fam).value;
  const BigInt upper = compositional_upper(fam).value;
  const Envelope env = corollary_envelope(d_in, W, d_out, L, kappa);
  std::cout << "architecture (d_in, W, d_out, L, kappa) = (1, 4, 1, 3, 2)\n"
            << "alpha_lower_paper = " << to_string(paper) << "\n"
            << "alpha_lower_constructive = " << to_string(cons) << "\n"
            << "compositional_upper = " << to_string(upper) << "\n"
            << "corollary_lower_paper = " << to_string(env.lower_paper) << "\n";
  Json j{{"alpha_lower_paper", to_string(paper)},
         {"alpha_lower_constructive", to_string(cons)},
         {"compositional_upper", to_string(upper)},
         {"corollary_lower_paper", to_string(env.lower_paper)}};
  Json findings = Json::array();
  if (paper > upper) {
    const std::string f = "paper-lower " + to_string(paper) + " > thm-upper " + to_string(upper);
    std::cout << "AUDIT: " << f << "\n";
    findings.push_back(f);
  }
  if (cons == upper) {
    const std::string f = "constructive-lower " + to_string(cons) + " = thm-upper " + to_string(upper);
    std::cout << "AUDIT: " << f << "\n";
    findings.push_back(f);
  }
  // the sawtooth realizing the constructive bound, counted exactly
  const NetworkSpec net = sawtooth_network(fam);
  GeometryConfig cfg;
  cfg.threads = c.threads;
  const std::size_t cells = enumerate_regions(net, Domain::unbounded(), cfg).regions.size();
  std::cout << "sawtooth_network cells = " << cells << "\n";
  j["sawtooth_network_cells"] = cells;
  j["findings"] = findings;
  write_text(out_file(c, "audit.json"), dump(j));
  write_config(sub, c);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linear regions, bounds and knot densities of piecewise-linear networks"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--seed", common.seed, "Root random seed")->capture_default_str();
  app.add_option("--threads", common.threads, "Worker thread cap (0 = all cores)")->capture_default_str();
  app.add_option("--out-dir", common.out_dir, "Directory for outputs")->capture_default_str();

  BoundArgs ba;
  auto* bound = app.add_subcommand("bound", "Closed-form region-count bounds");
  bound->add_option("--family", ba.family, "relu|deepspline|maxout|groupsort|ridge|maxpool|ghh|groupsort_activation|sort|pwlu_unit|pwlu_layer|generic");
  bound->add_option("--dims", ba.dims, "Layer dimensions d_1,...,d_{L+1}");
  bound->add_option("--kappa", ba.kappa, "Activation complexity")->capture_default_str();
  bound->add_option("--gs", ba.gs, "GroupSort group size")->capture_default_str();
  bound->add_option("--d", ba.d, "Input dimension");
  bound->add_option("--N", ba.N, "Number of units");
  bound->add_option("--dprime", ba.dprime, "Pooled dimension");
  bound->add_option("--M", ba.M, "PWLU grid size");
  bound->add_option("--beta", ba.beta, "beta(d, ns): D N1,N2,...")->expected(2);
  bound->add_option("--cor36", ba.cor36, "Uniform family d_in,W,d_out");
  bound->add_option("--depth", ba.depth, "Depth L for --cor36")->capture_default_str();

  CountArgs ca;
  auto* count = app.add_subcommand("count", "Exact cell and piece counts");
  count->add_option("--net", ca.net, "NetworkSpec JSON")->required();
  count->add_option("--box", ca.box, "Domain box lo,hi (default: all of R^d)");
  count->add_flag("--exact", ca.exact, "Also count in exact rational arithmetic");
  count->add_option("--max-cells", ca.max_cells, "Cell budget")->capture_default_str();

  CountArgs ra;
  auto* render = app.add_subcommand("render", "SVG region map of a 2D network");
  render->add_option("--net", ra.net, "NetworkSpec JSON")->required();
  render->add_option("--box", ra.box, "Box lo,hi or x0,x1,y0,y1")->capture_default_str();
  render->add_option("--max-cells", ra.max_cells, "Cell budget")->capture_default_str();
  render->add_option("--size", ra.width, "Image size in pixels")->capture_default_str();

  KnotArgs ka;
  auto* knots = app.add_subcommand("knots", "Exact knots along a polygonal path");
  knots->add_option("--net", ka.net, "NetworkSpec JSON")->required();
  auto* path_opt = knots->add_option("--path", ka.path, "Path JSON {\"vertices\": [...]}");
  auto* seg_opt = knots->add_option("--segment", ka.segment, "Segment a1,..,ad,b1,..,bd");
  path_opt->excludes(seg_opt);

  McArgs ma;
  auto* mc = app.add_subcommand("mc", "Monte Carlo knot density of random networks");
  mc->add_option("--family", ma.family, "relu|leaky|abs|deepspline|maxout|groupsort")->capture_default_str();
  mc->add_option("--d", ma.d, "Input dimension")->capture_default_str();
  mc->add_option("--width", ma.width, "Layer width")->capture_default_str();
  mc->add_option("--depth", ma.depth, "Number of layers")->capture_default_str();
  mc->add_option("--kappa", ma.kappa, "Kappa, rank or group size (default 2, maxout 3)");
  mc->add_option("--sigma-w", ma.sigma_w, "Weight standard deviation")->capture_default_str();
  mc->add_option("--sigma-b", ma.sigma_b, "Bias standard deviation")->capture_default_str();
  mc->add_option("--dist", ma.dist, "normal|uniform")->capture_default_str();
  mc->add_flag("--fan-in", ma.fan_in, "Weight variance 2 / fan_in");
  mc->add_option("--trials", ma.trials, "Trials (>= 100)")->capture_default_str();
  mc->add_option("--probe-length", ma.probe_length, "Probe segment length (0 = 10 sigma_b / sigma_w)")->capture_default_str();

  ConstructArgs xa;
  auto* construct = app.add_subcommand("construct", "Write an extremal network");
  construct->add_option("--kind", xa.kind, "sawtooth|composition|network|general-position|extremal-sum")->required();
  construct->add_option("--p", xa.p, "Sawtooth order")->capture_default_str();
  construct->add_option("--q", xa.q, "Second sawtooth order")->capture_default_str();
  construct->add_option("--dims", xa.dims, "Layer dimensions for --kind network");
  construct->add_option("--kappa", xa.kappa, "Uniform kappa for --kind network")->capture_default_str();
  construct->add_option("--d", xa.d, "Input dimension")->capture_default_str();
  construct->add_option("--ns", xa.ns, "Partition sizes n_1,...,n_N");
  construct->add_option("--output", xa.output, "Output file (default <out-dir>/construct.json)");

  auto* audit = app.add_subcommand("audit", "Report the lower/upper bound inconsistency");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }

  try {
    set_thread_cap(common.threads);
    if (*bound) return run_bound(ba, *bound, common);
    if (*count) return run_count(ca, *count, common);
    if (*render) return run_render(ra, *render, common);
    if (*knots) return run_knots(ka, *knots, common);
    if (*mc) return run_mc(ma, *mc, common);
    if (*construct) return run_construct(xa, *construct, common);
    if (*audit) return run_audit(*audit, common);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const BudgetExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBudget;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}
