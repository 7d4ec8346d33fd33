// treescat: batch frontend. Writes CSV/JSON reports; every file starts with
// a fingerprint of the effective configuration.
//
// exit codes: 0 ok, 2 an invariant check failed, 3 bad input or configuration

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "treescat/dtn.hpp"
#include "treescat/free_operator.hpp"
#include "treescat/quadrature.hpp"
#include "treescat/scattering.hpp"
#include "treescat/surgery.hpp"

using namespace treescat;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitInvariant = 2;
constexpr int kExitInput = 3;

struct RunConfig {
  int q = 2;
  int depth = 8;
  int s_nodes = 256;
  std::vector<double> eps_ladder{1e-2, 1e-3};
  double threshold = 1e-8;
  double tolerance = 1e-6;
  std::string out = ".";
  unsigned threads = 0;
  std::uint64_t seed = 0;
  // subcommand parameters
  int points = 201;
  int sweep = 16;
  int support_depth = 2;
  int radius = 0;
  int extra_depth = 4;

  void validate() const {
    auto check = [](bool ok, const std::string& what) { require(ok, ErrorKind::InputFormat, what); };
    check(q >= 2 && q <= 250, "q must lie in [2, 250]");
    check(depth >= 1 && depth <= 24, "depth must lie in [1, 24]");
    check(s_nodes >= 8 && s_nodes <= 1 << 20, "s-nodes must lie in [8, 2^20]");
    check(!eps_ladder.empty(), "eps ladder is empty");
    for (double e : eps_ladder) check(e > 0.0 && e < 1.0, "eps values must lie in (0, 1)");
    check(threshold > 0.0 && threshold < 1.0, "threshold must lie in (0, 1)");
    check(tolerance > 0.0 && tolerance < 1.0, "tolerance must lie in (0, 1)");
    check(points >= 2 && points <= 100000, "points must lie in [2, 100000]");
    check(sweep >= 1 && sweep <= 4096, "sweep must lie in [1, 4096]");
    check(support_depth >= 0 && support_depth <= 12, "support depth must lie in [0, 12]");
    check(radius >= 0 && radius <= 8, "radius must lie in [0, 8]");
    check(extra_depth >= 2 && extra_depth <= 12, "extra depth must lie in [2, 12]");
  }

  // everything that can change the numbers; out and threads cannot
  json fingerprint_source(const std::string& command) const {
    return json{{"command", command},   {"q", q},           {"depth", depth},
                {"s_nodes", s_nodes},   {"eps_ladder", eps_ladder}, {"threshold", threshold},
                {"tolerance", tolerance}, {"seed", seed},    {"points", points},
                {"sweep", sweep},       {"support_depth", support_depth}, {"radius", radius},
                {"extra_depth", extra_depth}};
  }
};

void apply_config_file(RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::InputFormat, "cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
    if (j.contains("q")) c.q = j.at("q").get<int>();
    if (j.contains("depth")) c.depth = j.at("depth").get<int>();
    if (j.contains("s_nodes")) c.s_nodes = j.at("s_nodes").get<int>();
    if (j.contains("eps_ladder")) c.eps_ladder = j.at("eps_ladder").get<std::vector<double>>();
    if (j.contains("threshold")) c.threshold = j.at("threshold").get<double>();
    if (j.contains("tolerance")) c.tolerance = j.at("tolerance").get<double>();
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
    if (j.contains("threads")) c.threads = j.at("threads").get<unsigned>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("points")) c.points = j.at("points").get<int>();
    if (j.contains("sweep")) c.sweep = j.at("sweep").get<int>();
    if (j.contains("support_depth")) c.support_depth = j.at("support_depth").get<int>();
    if (j.contains("radius")) c.radius = j.at("radius").get<int>();
    if (j.contains("extra_depth")) c.extra_depth = j.at("extra_depth").get<int>();
  } catch (const json::exception& ex) {
    fail(ErrorKind::InputFormat, std::string("config: ") + ex.what());
  }
}

std::string fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::InputFormat, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& ex) {
    fail(ErrorKind::InputFormat, path + ": " + ex.what());
  }
}

std::string num(double v) {
  if (v == 0.0) v = 0.0;  // no negative zero
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12e", v);
  return buf;
}

// 1e-2 style label for an epsilon
std::string eps_label(double e) {
  const int exp = static_cast<int>(std::floor(std::log10(e) + 1e-12));
  const double mant = e / std::pow(10.0, exp);
  char buf[32];
  if (std::abs(mant - std::round(mant)) < 1e-9)
    std::snprintf(buf, sizeof buf, "%de%d", static_cast<int>(std::round(mant)), exp);
  else
    std::snprintf(buf, sizeof buf, "%ge%d", mant, exp);
  return buf;
}

class Writer {
 public:
  Writer(const RunConfig& cfg, const std::string& command, const std::string& name)
      : path_(fs::path(cfg.out) / name) {
    const auto src = cfg.fingerprint_source(command).dump();
    header_ = "# treescat " + command + " fingerprint=" + fnv1a(src) + " config=" + src + "\n";
    fingerprint_ = fnv1a(src);
  }

  const std::string& fingerprint() const { return fingerprint_; }
  std::ostringstream& body() { return body_; }

  void row(std::initializer_list<std::string> cells) {
    bool first = true;
    for (const auto& c : cells) {
      if (!first) body_ << ',';
      body_ << c;
      first = false;
    }
    body_ << '\n';
  }

  void commit(bool with_header = true) const {
    std::ofstream out(path_, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::InputFormat, "cannot write " + path_.string());
    if (with_header) out << header_;
    out << body_.str();
  }

 private:
  fs::path path_;
  std::string header_;
  std::string fingerprint_;
  std::ostringstream body_;
};

// ---------------------------------------------------------------------------
// dos

int cmd_dos(const RunConfig& cfg) {
  const SpectralSurface S(cfg.q);
  const double e = S.band_edge();
  const auto atoms = root_spectral_measure(cfg.q, cfg.depth);
  const double width = 2.0 * e / cfg.points;
  Writer w(cfg, "dos", "dos.csv");
  std::string head = "lambda,de";
  for (double eps : cfg.eps_ladder) head += ",stone_" + eps_label(eps);
  head += ",hist";
  w.body() << head << '\n';
  for (int i = 0; i < cfg.points; ++i) {
    const double lam = -e + width * (i + 0.5);
    double mass = 0.0;
    for (const auto& a : atoms)
      if (a.lambda >= lam - width / 2 && a.lambda < lam + width / 2) mass += a.weight;
    w.body() << num(lam) << ',' << num(S.dos_density(lam));
    for (double eps : cfg.eps_ladder) w.body() << ',' << num(stone_dos(S, lam, eps));
    w.body() << ',' << num(mass / width) << '\n';
  }
  // moments of de against closed-walk counts at the root
  const auto rule = gauss_legendre(2000, 0.0, std::numbers::pi);
  const TruncatedTree tree(cfg.q, 6);
  w.body() << "# moment,quadrature,walks\n";
  for (int n = 0; n <= 8; ++n) {
    double m = 0.0;
    for (std::size_t k = 0; k < rule.size() / 2; ++k) {
      const double lam = e * std::cos(rule[k].x);
      const double p = std::pow(lam, n);
      m += rule[k].w * e * std::sin(rule[k].x) * S.dos_density(lam) * (p + (n % 2 ? -p : p));
    }
    w.body() << "# " << n << ',' << num(m) << ',' << closed_walk_count(tree, kRoot, n) << '\n';
  }
  w.commit();
  return 0;
}

// ---------------------------------------------------------------------------
// scatter

struct ScatterInput {
  NonlocalPotential w;
  int depth = 0;
};

int run_scatter(const RunConfig& cfg, const std::string& command, const ScatterInput& in) {
  const auto& w = in.w;
  const TruncatedTree tree(w.q(), in.depth);
  const SpectralSurface S(w.q());
  require(w.empty() || w.max_depth(tree) + 3 <= tree.depth(), ErrorKind::InputFormat,
          "depth must exceed the support depth by at least 3");
  const ScatteringProblem problem(tree, w);
  bool ok = true;
  std::mt19937_64 rng(cfg.seed);

  // exceptional set
  const auto grid = periodic_rule(S.tau(), cfg.s_nodes);
  std::vector<double> nodes;
  for (const auto& n : grid) nodes.push_back(n.x);
  const auto ex = exceptional_scan(problem, nodes, cfg.threshold, cfg.threads);
  {
    Writer out(cfg, command, "exceptional.csv");
    out.body() << "s,sigma_min,sigma_max,ratio\n";
    for (const auto& smp : ex.samples) out.row({num(smp.s), num(smp.sigma_min), num(smp.sigma_max), num(smp.sigma_min / smp.sigma_max)});
    for (const auto& [a, b] : ex.intervals) out.body() << "# flagged," << num(a) << ',' << num(b) << '\n';
    out.commit();
  }

  // point spectrum
  {
    Writer out(cfg, command, "pp.csv");
    out.body() << "kind,lambda,support,norm\n";
    if (!w.empty()) {
      auto pp = pp_embedded(tree, w);
      const auto outside = pp_outside(tree, w);
      pp.insert(pp.end(), outside.begin(), outside.end());
      for (const auto& p : pp) {
        char lam[40];
        std::snprintf(lam, sizeof lam, "%.12f", std::abs(p.lambda) < 5e-13 ? 0.0 : p.lambda);
        out.row({p.embedded ? "embedded" : "outside", lam, std::to_string(p.vertices.size()), num(p.coefficients.norm())});
      }
    }
    out.commit();
  }

  // transmission and reduced S-matrix over a sweep of S^0
  const int radius = w.empty() ? 2 : minimal_ball_radius(tree, w);
  const int stride = std::max(1, cfg.s_nodes / cfg.sweep);
  {
    Writer tau_out(cfg, command, "tau_dtn.csv");
    Writer s_out(cfg, command, "smatrix.csv");
    tau_out.body() << "s,lambda,ends,max_abs_tau,max_abs_diff,status\n";
    s_out.body() << "s,lambda,ends,max_abs_entry,unitarity_defect,status\n";
    for (int k = 0; k < cfg.s_nodes; k += stride) {
      const SpectralParam s{nodes[static_cast<std::size_t>(k)], 0.0};
      const auto lam = num(S.lambda(s).real());
      if (ex.contains(s.re)) {
        tau_out.row({num(s.re), lam, "", "", "", "exceptional"});
        s_out.row({num(s.re), lam, "", "", "", "exceptional"});
        continue;
      }
      const auto asym = tau_matrix_asymptotic(problem, s, radius);
      const auto ends = std::to_string(asym.rows());
      std::string status = "ok";
      std::string diff;
      try {
        const auto dtn = tau_via_dtn(tree, w, s, radius);
        const double d = (dtn.tau - asym).cwiseAbs().maxCoeff();
        diff = num(d);
        if (d > 1e-8) {
          status = "mismatch";
          ok = false;
        }
      } catch (const Error& err) {
        status = std::string(to_string(err.kind()));
      }
      tau_out.row({num(s.re), lam, ends, num(asym.cwiseAbs().maxCoeff()), diff, status});
      const auto sm = s_matrix_reduced(problem, s, radius);
      const auto n = sm.rows();
      const double defect = (sm.adjoint() * sm - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff();
      s_out.row({num(s.re), lam, ends, num(sm.cwiseAbs().maxCoeff()), num(defect), "ok"});
    }
    tau_out.commit();
    s_out.commit();
  }

  // on-shell unitarity
  {
    Writer out(cfg, command, "unitarity.csv");
    out.body() << "alpha,residual,status\n";
    const double e = S.band_edge();
    for (int k = 0; k < 20; ++k) {
      const double a = e * (-0.95 + 1.9 * (k + 0.5) / 20.0);
      const auto shell = S.on_shell_weight(a);
      if (ex.contains(shell[0].s.re) || ex.contains(shell[1].s.re)) {
        out.row({num(a), "", "exceptional"});
        continue;
      }
      const double r = unitarity_check(problem, a);
      const bool pass = r < cfg.tolerance;
      ok = ok && pass;
      out.row({num(a), num(r), pass ? "ok" : "fail"});
    }
    out.commit();
  }

  // correlation spot checks
  {
    Writer out(cfg, command, "correlation.csv");
    out.body() << "x,y,lambda,lhs_re,lhs_im,rhs_re,rhs_im,abs_diff,status\n";
    const double e = S.band_edge();
    const int probe_depth = std::min(2, tree.depth() - 3);
    std::uniform_int_distribution<std::uint32_t> vertex(0, tree.level(std::max(0, probe_depth)).second - 1);
    std::uniform_real_distribution<double> energy(-0.9 * e, 0.9 * e);
    for (int k = 0; k < 10; ++k) {
      const VertexId x{vertex(rng)};
      const VertexId y{vertex(rng)};
      const double lam = energy(rng);
      if (ex.contains(S.s_of_lambda(lam).re) || ex.contains(S.tau() - S.s_of_lambda(lam).re)) {
        out.row({std::to_string(x.index), std::to_string(y.index), num(lam), "", "", "", "", "", "exceptional"});
        continue;
      }
      const auto c = correlation(problem, lam, x, y);
      const double d = std::abs(c.lhs - c.rhs);
      const bool pass = d < cfg.tolerance;
      ok = ok && pass;
      out.row({std::to_string(x.index), std::to_string(y.index), num(lam), num(c.lhs.real()), num(c.lhs.imag()),
               num(c.rhs.real()), num(c.rhs.imag()), num(d), pass ? "ok" : "fail"});
    }
    out.commit();
  }
  if (!ok) std::cerr << "treescat: invariant check failed\n";
  return ok ? 0 : kExitInvariant;
}

int cmd_scatter(const RunConfig& cfg, const std::string& potential_path) {
  auto w = potential_from_json(load_json_file(potential_path));
  RunConfig eff = cfg;
  eff.q = w.q();
  return run_scatter(eff, "scatter", {std::move(w), cfg.depth});
}

// ---------------------------------------------------------------------------
// surgery

int cmd_surgery(const RunConfig& cfg, const std::string& graph_path, bool chain) {
  const auto g = finite_graph_from_json(load_json_file(graph_path));
  try {
    validate_asymptotic(g);
  } catch (const Error& err) {
    fail(ErrorKind::InputFormat, err.what());
  }
  RunConfig eff = cfg;
  eff.q = g.q;
  const auto r = embed(g, {cfg.radius, cfg.extra_depth});
  eff.depth = r.depth;
  Writer out(eff, "surgery", "embedding.json");
  auto j = to_json(r);
  j["fingerprint"] = out.fingerprint();
  out.body() << j.dump(2) << '\n';
  out.commit(false);
  int code = (r.matrix_certificate && r.component_certificate) ? 0 : kExitInvariant;
  if (chain) {
    const int c = run_scatter(eff, "surgery", {r.w, r.depth});
    code = std::max(code, c);
  }
  return code;
}

// ---------------------------------------------------------------------------
// fh

int cmd_fh(const RunConfig& cfg) {
  require(cfg.support_depth + 2 <= cfg.depth, ErrorKind::InputFormat, "support depth must be at most depth - 2");
  const TruncatedTree tree(cfg.q, cfg.depth);
  const SpectralSurface S(cfg.q);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal;
  SparseFunction f;
  for (std::uint32_t v = 0; v < tree.level(cfg.support_depth).second; ++v) f.emplace_back(VertexId{v}, cplx{normal(rng), normal(rng)});
  const auto image = fh_forward(tree, S, f, tree.cylinders_at_depth(std::max(1, cfg.support_depth)),
                                periodic_rule(S.tau(), cfg.s_nodes));
  Writer out(cfg, "fh", "fh.csv");
  out.body() << "vertex,re,im,recon_re,recon_im,abs_err\n";
  double worst = 0.0;
  for (const auto& [x, v] : f) {
    const cplx back = fh_inverse(tree, S, image, x);
    worst = std::max(worst, std::abs(back - v));
    out.row({std::to_string(x.index), num(v.real()), num(v.imag()), num(back.real()), num(back.imag()), num(std::abs(back - v))});
  }
  const double parseval = std::abs(fh_norm_squared(S, image) - norm_squared(f));
  std::vector<VertexId> probe;
  for (const auto& [x, v] : f) probe.push_back(x);
  out.body() << "# max_abs_err," << num(worst) << "\n# parseval_defect," << num(parseval) << "\n# symmetry_defect,"
             << num(fh_symmetry_defect(tree, S, image, probe)) << '\n';
  out.commit();
  return worst < cfg.tolerance && parseval < cfg.tolerance ? 0 : kExitInvariant;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scattering on regular trees with non-local potentials"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string config_path;
  app.add_option("--q", cfg.q, "branching number q")->check(CLI::Range(2, 250));
  app.add_option("--depth", cfg.depth, "truncation depth D")->check(CLI::PositiveNumber);
  app.add_option("--s-nodes", cfg.s_nodes, "nodes on the circle Im s = 0")->check(CLI::PositiveNumber);
  app.add_option("--eps-ladder", cfg.eps_ladder, "smearing widths for the Stone formula");
  app.add_option("--threshold", cfg.threshold, "flag level for sigma_min / sigma_max")->check(CLI::PositiveNumber);
  app.add_option("--tolerance", cfg.tolerance, "pass level of the invariant checks")->check(CLI::PositiveNumber);
  app.add_option("--out", cfg.out, "output directory");
  app.add_option("--threads", cfg.threads, "worker threads (0: all cores)");
  app.add_option("--seed", cfg.seed, "seed for sampled checks");
  app.add_option("--config", config_path, "JSON file; its values override the flags");

  auto* dos = app.add_subcommand("dos", "density of states table");
  dos->add_option("--points", cfg.points, "energy grid size")->check(CLI::PositiveNumber);

  std::string potential_path;
  auto* scatter = app.add_subcommand("scatter", "scattering report for a potential file");
  scatter->add_option("--potential", potential_path, "potential JSON")->required();
  scatter->add_option("--sweep", cfg.sweep, "number of s values in the S-matrix sweep")->check(CLI::PositiveNumber);

  std::string graph_path;
  bool chain = false;
  auto* surgery = app.add_subcommand("surgery", "embed an asymptotic graph into T_q");
  surgery->add_option("--graph", graph_path, "graph JSON")->required();
  surgery->add_flag("--chain", chain, "run the scattering report on the resulting potential");
  surgery->add_option("--radius", cfg.radius, "ball radius (0: smallest valid)");
  surgery->add_option("--extra-depth", cfg.extra_depth, "truncation depth beyond the ball");
  surgery->add_option("--sweep", cfg.sweep, "number of s values in the S-matrix sweep")->check(CLI::PositiveNumber);

  auto* fh = app.add_subcommand("fh", "Fourier-Helgason round trip of a random function");
  fh->add_option("--support-depth", cfg.support_depth, "support radius of the test function");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << "treescat: exit " << kExitInput << '\n';
    return kExitInput;
  }

  try {
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    cfg.validate();
    fs::create_directories(cfg.out);
    if (*dos) return cmd_dos(cfg);
    if (*scatter) return cmd_scatter(cfg, potential_path);
    if (*surgery) return cmd_surgery(cfg, graph_path, chain);
    if (*fh) return cmd_fh(cfg);
  } catch (const Error& e) {
    std::cerr << "treescat: " << to_string(e.kind()) << ": " << e.what() << '\n';
    switch (e.kind()) {
      case ErrorKind::InputFormat:
      case ErrorKind::InvalidParameter:
      case ErrorKind::DepthInsufficient:
      case ErrorKind::InvalidStructure:
        return kExitInput;
      default:
        return 1;
    }
  } catch (const fs::filesystem_error& e) {
    std::cerr << "treescat: " << e.what() << '\n';
    return kExitInput;
  }
  return 1;
}
