#include "cli/commands.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "gsfcalc/gsfcalc.hpp"

namespace gsfcli {

namespace fs = std::filesystem;
using namespace gsfc;

namespace {

const std::set<std::string> kCommonKeys{
    "problem",       "seed",           "output",          "grid.eps0",       "grid.ratio",     "grid.levels",
    "gauge.kind",    "gauge.power",    "mollifier.j",     "mollifier.eta",   "mollifier.left_mass",
    "embedding.a",   "solver.rk4_steps", "solver.newton_tol", "solver.quad_tol", "expect.tolerance"};

std::set<std::string> with_common(std::initializer_list<std::string> extra) {
  std::set<std::string> s = kCommonKeys;
  s.insert(extra.begin(), extra.end());
  return s;
}

GaugePtr gauge_from(const Config& cfg) {
  const double eps0 = cfg.num("grid.eps0", 0.5), ratio = cfg.num("grid.ratio", 0.5);
  if (!(eps0 > 0.0 && eps0 <= 1.0)) throw ConfigError("key 'grid.eps0': must lie in (0, 1]");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("key 'grid.ratio': must lie in (0, 1)");
  const auto levels = static_cast<std::size_t>(cfg.integer("grid.levels", 20, 8, 200));
  const std::string kind = cfg.choice("gauge.kind", "identity", {"identity", "power", "exp"});
  GaugeSpec spec = GaugeSpec::identity();
  if (kind == "power") spec = GaugeSpec::power_of(cfg.positive("gauge.power", 1.0));
  if (kind == "exp") spec = GaugeSpec::exponential();
  return make_gauge(EpsGrid::geometric(eps0, ratio, levels), spec);
}

MollifierSpec mollifier_from(const Config& cfg, int default_j) {
  MollifierSpec s;
  s.j = static_cast<int>(cfg.integer("mollifier.j", default_j, 0, 12));
  s.eta = cfg.positive("mollifier.eta", 1.0);
  s.left_mass = cfg.opt_num("mollifier.left_mass");
  if (s.left_mass && !(*s.left_mass > 0.0 && *s.left_mass < 1.0)) {
    throw ConfigError("key 'mollifier.left_mass': must lie in (0, 1)");
  }
  return s;
}

Vec vec_from(const Config& cfg, const std::string& key, int dim) {
  const auto v = cfg.list(key);
  if (static_cast<int>(v.size()) != dim) {
    throw ConfigError("key '" + key + "': expected " + std::to_string(dim) + " components");
  }
  return Eigen::Map<const Vec>(v.data(), dim);
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
  std::ofstream f(dir / name, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
  return f;
}

std::string fmt(double v) { return csv::num(v); }

/// Collects expectation outcomes; the command fails if any is false.
class Checks {
 public:
  void add(const std::string& what, bool ok) { items_.push_back({what, ok}); }
  bool all_ok() const {
    for (const auto& i : items_)
      if (!i.second) return false;
    return true;
  }
  void write(std::ostream& os) const {
    for (const auto& [what, ok] : items_) os << "check " << (ok ? "PASS " : "FAIL ") << what << '\n';
  }

 private:
  std::vector<std::pair<std::string, bool>> items_;
};

int finish(const Checks& checks, std::ostringstream& report, const fs::path& out, std::ostream& log) {
  checks.write(report);
  auto f = open_out(out, "report.txt");
  f << report.str();
  log << report.str();
  return checks.all_ok() ? kOk : kCheckFailed;
}

std::string standard_part_text(const StandardPartReport& r) {
  return r.exists ? fmt(r.value) + " (" + r.message + ")" : "none (" + r.message + ")";
}

}  // namespace

int cmd_embed(const Config& cfg, const fs::path& out, std::ostream& log) {
  cfg.require_known(with_common({"distribution", "distribution.x0", "test_function", "test_function.center",
                                 "probe.points", "probe.random", "expect.weak_limit_decreasing",
                                 "expect.final_error_max", "expect.value_at_zero"}));
  const GaugePtr g = gauge_from(cfg);
  const std::string dist = cfg.choice("distribution", "delta", {"delta", "delta_prime", "heaviside"});
  const double x0 = cfg.num("distribution.x0", 0.0);
  const std::string tf_default = dist == "delta_prime" ? "x_gaussian" : "gaussian";
  const std::string tf = cfg.choice("test_function", tf_default, {"gaussian", "x_gaussian"});
  const double center = cfg.num("test_function.center", dist == "heaviside" ? 0.5 : 0.0);
  if (tf == "x_gaussian" && cfg.has("test_function.center")) {
    throw ConfigError("key 'test_function.center': x_gaussian is centred at 0");
  }
  std::vector<double> probes = cfg.list("probe.points", {-0.5, 0.0, 0.5});
  const long random_probes = cfg.integer("probe.random", 0, 0, 1000);
  std::mt19937_64 rng(static_cast<std::uint64_t>(cfg.integer("seed", 42, 0, std::numeric_limits<int>::max())));
  for (long i = 0; i < random_probes; ++i) probes.push_back(-1.0 + 2.0 * std::generate_canonical<double, 53>(rng));
  quad::Options qopt;
  qopt.rel_tol = cfg.positive("solver.quad_tol", 1e-10);

  const Mollifier mol = build_mollifier(mollifier_from(cfg, 4));
  const EmbeddingParams params = EmbeddingParams::power(g, cfg.positive("embedding.a", 1.0));
  Distribution T = dist == "heaviside" ? Distribution::heaviside(x0) : Distribution::dirac(x0);
  if (dist == "delta_prime") T = T.derivative(1);
  const GsfFamily f = embed(T, params, mol);
  const TestFunction phi = tf == "gaussian" ? TestFunction::gaussian(center) : TestFunction::x_gaussian();
  const WeakLimitReport wl = weak_limit_check(T, params, mol, phi, qopt);
  const MomentReport mom = verify_moments(mol);

  fs::create_directories(out);
  {
    auto k = open_out(out, "kernel.csv");
    write_kernel_csv(k, mol);
  }
  {
    auto w = open_out(out, "weak_limit.csv");
    csv::write_gen_nums(w, {{"b", params.b()}, {"pairing", wl.pairing}, {"error", wl.error}});
  }
  std::vector<StandardPartReport> probe_st;
  {
    auto p = open_out(out, "probes.csv");
    csv::write_row(p, {"k", "eps", "x", "value"});
    for (std::size_t k = 0; k < g->size(); ++k) {
      for (double x : probes) csv::write_row(p, {std::to_string(k + 1), fmt(g->eps(k)), fmt(x), fmt(f.value(k, x))});
    }
    for (double x : probes) probe_st.push_back(standard_part_report(GenNum::from_index(g, [&](std::size_t k) {
      return f.value(k, x);
    })));
  }

  std::ostringstream r;
  r << "problem embed\n"
    << "distribution " << dist << " at " << fmt(x0) << "\n"
    << "mollifier j=" << mol.spec().j << " degree=" << mol.degree() << " condition=" << fmt(mol.condition_number())
    << "\n"
    << "moments mass_error=" << fmt(mom.mass_error) << " max_moment=" << fmt(mom.max_moment_violation)
    << " abs_mass=" << fmt(mom.abs_mass) << " support_violation=" << fmt(mom.support_violation) << "\n";
  if (mom.left_mass_error) r << "left_mass_error " << fmt(*mom.left_mass_error) << "\n";
  r << "weak_limit exact=" << fmt(wl.exact) << " final_error=" << fmt(wl.final_error) << " rate=" << fmt(wl.rate)
    << " decreasing_tail=" << (wl.decreasing_tail ? "yes" : "no") << "\n";
  for (std::size_t i = 0; i < probes.size(); ++i) {
    r << "standard_part at x=" << fmt(probes[i]) << ": " << standard_part_text(probe_st[i]) << "\n";
  }

  Checks checks;
  const double tol = cfg.positive("expect.tolerance", 1e-8);
  if (cfg.has("expect.weak_limit_decreasing")) {
    checks.add("weak limit error decreasing on the tail",
               wl.decreasing_tail == cfg.flag("expect.weak_limit_decreasing", true));
  }
  if (auto m = cfg.opt_num("expect.final_error_max")) checks.add("final weak-limit error", wl.final_error <= *m);
  if (auto v = cfg.opt_num("expect.value_at_zero")) {
    const auto st = standard_part_report(GenNum::from_index(g, [&](std::size_t k) { return f.value(k, 0.0); }));
    checks.add("standard part at 0", st.exists && std::fabs(st.value - *v) <= tol);
  }
  return finish(checks, r, out, log);
}

int cmd_variational(const Config& cfg, const fs::path& out, std::ostream& log) {
  cfg.require_known(with_common({"lagrangian", "lagrangian.omega", "lagrangian.dim", "interval.a", "interval.b",
                                 "boundary.p", "boundary.q", "symmetry", "symmetry.direction", "minimizer.modes",
                                 "minimizer.el_tol", "expect.verdict", "expect.conjugate", "expect.no_conjugate",
                                 "expect.noether_drift_max"}));
  const GaugePtr g = gauge_from(cfg);
  const std::string name = cfg.choice("lagrangian", "harmonic", {"free", "harmonic", "inverted"});
  const int d = static_cast<int>(cfg.integer("lagrangian.dim", 1, 1, 8));
  const double a = cfg.num("interval.a", 0.0), b = cfg.num("interval.b", 1.0);
  if (!(a < b)) throw ConfigError("key 'interval.b': must exceed interval.a");
  const Vec p = vec_from(cfg, "boundary.p", d), q = vec_from(cfg, "boundary.q", d);
  SolverOptions sopt;
  sopt.rk4_steps = static_cast<std::size_t>(cfg.integer("solver.rk4_steps", 1024, 8, 1000000));
  sopt.newton_tol = cfg.positive("solver.newton_tol", 1e-9);
  MinimizerOptions mopt;
  mopt.modes = static_cast<int>(cfg.integer("minimizer.modes", 8, 1, 64));
  mopt.el_tol = cfg.positive("minimizer.el_tol", 1e-6);
  const std::string sym = cfg.choice("symmetry", "none", {"none", "time", "space"});
  if (cfg.has("symmetry.direction") && sym != "space") {
    throw ConfigError("key 'symmetry.direction': only used with symmetry = space");
  }
  if (cfg.has("lagrangian.omega") && name != "harmonic") {
    throw ConfigError("key 'lagrangian.omega': only used by the harmonic Lagrangian");
  }

  const Lagrangian F = name == "free"       ? lagrangians::free_particle(g, d)
                       : name == "inverted" ? lagrangians::inverted(g, d)
                                            : lagrangians::harmonic(g, cfg.positive("lagrangian.omega", 1.0), d);
  const IntervalDomain dom = IntervalDomain::constant(g, a, b);
  GenVec pg, qg;
  for (int i = 0; i < d; ++i) {
    pg.push_back(GenNum::constant(g, p(i)));
    qg.push_back(GenNum::constant(g, q(i)));
  }
  const BvpResult bvp = solve_el_bvp(F, pg, qg, dom, sopt);
  const MinimizerReport rep = minimizer_report(F, bvp.trajectory, mopt);

  fs::create_directories(out);
  {
    auto t = open_out(out, "trajectory.csv");
    write_trajectory_csv(t, bvp.trajectory);
  }
  {
    auto e = open_out(out, "el_residual.csv");
    csv::write_gen_nums(e, {{"el_max", rep.el_norm}, {"legendre_min_eig", rep.legendre.min_eigenvalue}});
  }
  {
    auto c = open_out(out, "conjugate.csv");
    write_conjugate_csv(c, rep.jacobi);
  }
  {
    std::vector<std::pair<std::string, GenNum>> cols;
    for (std::size_t i = 0; i < rep.mode_values.size(); ++i) {
      cols.emplace_back("mode" + std::to_string(i + 1), rep.mode_values[i]);
    }
    auto m = open_out(out, "second_variation.csv");
    csv::write_gen_nums(m, cols);
  }

  std::ostringstream r;
  r << "problem variational\n"
    << "lagrangian " << name << " dim=" << d << " interval=[" << fmt(a) << ", " << fmt(b) << "]\n";
  for (const auto& w : bvp.warnings) r << "warning " << w << "\n";
  r << "el_residual max_tail=" << fmt(rep.el_norm.last()) << (rep.el_ok ? " ok" : " above tolerance") << "\n"
    << "legendre min_eigenvalue=" << fmt(rep.legendre.min_eigenvalue.last()) << (rep.legendre.pass ? " pass" : " fail")
    << "\n";
  if (!rep.conjugate.aggregated) r << "conjugate " << rep.conjugate.message << "\n";
  for (std::size_t i = 0; i < rep.conjugate.points.size(); ++i) {
    r << "conjugate " << i + 1 << ": " << standard_part_text(rep.conjugate.standard_parts[i]) << "\n";
  }
  if (rep.broken_accessory) r << "broken_accessory_integral " << fmt(rep.broken_accessory->last()) << "\n";
  if (rep.negative_mode) {
    r << "negative_mode " << *rep.negative_mode + 1 << " value=" << fmt(rep.mode_values[*rep.negative_mode].last())
      << "\n";
  }
  r << "verdict " << to_string(rep.verdict) << " (" << rep.summary << ")\n";

  std::optional<NoetherReport> noe;
  if (sym != "none") {
    SymmetryFamily fam = SymmetryFamily::time_translation();
    if (sym == "space") {
      Vec dir = cfg.has("symmetry.direction") ? vec_from(cfg, "symmetry.direction", d) : Vec(Vec::Unit(d, 0));
      fam = SymmetryFamily::space_translation(dir);
    }
    noe = noether_charge(F, bvp.trajectory, fam);
    auto n = open_out(out, "noether.csv");
    csv::write_gen_nums(n, {{"drift", noe->drift}});
    r << "noether " << sym << " drift=" << fmt(noe->drift.last()) << (noe->invariant ? "" : " (not invariant)") << "\n";
    for (const auto& w : noe->warnings) r << "warning " << w << "\n";
  }

  Checks checks;
  const double tol = cfg.positive("expect.tolerance", 1e-6);
  if (cfg.has("expect.verdict")) {
    checks.add("verdict " + cfg.str("expect.verdict"), cfg.str("expect.verdict") == to_string(rep.verdict));
  }
  if (auto c = cfg.opt_num("expect.conjugate")) {
    bool found = false;
    for (const auto& sp : rep.conjugate.standard_parts) found = found || (sp.exists && std::fabs(sp.value - *c) <= tol);
    checks.add("conjugate point at " + fmt(*c), found);
  }
  if (cfg.has("expect.no_conjugate")) {
    const bool none = rep.jacobi.roots.back().empty();
    checks.add("no conjugate point", none == cfg.flag("expect.no_conjugate", true));
  }
  if (auto m = cfg.opt_num("expect.noether_drift_max")) {
    if (!noe) throw ConfigError("key 'expect.noether_drift_max': needs a symmetry");
    double worst = 0.0;
    for (double v : noe->drift.samples()) worst = std::max(worst, v);
    checks.add("noether drift", worst <= *m);
  }
  return finish(checks, r, out, log);
}

namespace {

template <int D>
int run_geodesic(const Config& cfg, MetricSpec<D> spec, const GaugePtr& g, const fs::path& out, std::ostream& log) {
  const Vec p = vec_from(cfg, "boundary.p", D), q = vec_from(cfg, "boundary.q", D);
  GeodesicOptions gopt;
  gopt.rk4_steps = static_cast<std::size_t>(cfg.integer("solver.rk4_steps", 256, 8, 100000));
  gopt.newton_tol = cfg.positive("solver.newton_tol", 1e-9);
  MinimizerOptions mopt;
  mopt.modes = static_cast<int>(cfg.integer("minimizer.modes", 8, 1, 64));
  mopt.el_tol = cfg.positive("minimizer.el_tol", 1e-6);
  const bool minimality = cfg.flag("minimality", true);

  const Mollifier mol = build_mollifier(mollifier_from(cfg, 2));
  auto rg = std::make_shared<const RegularizedMetric<D>>(std::move(spec), mol,
                                                         EmbeddingParams::power(g, cfg.positive("embedding.a", 0.4)));
  const GeodesicResult res = geodesic_bvp(*rg, p, q, gopt);
  const StandardPartReport st = standard_part_report(res.length);

  std::optional<double> oracle = cfg.opt_num("oracle.length");
  if (cfg.has("oracle.file")) {
    if (oracle) throw ConfigError("key 'oracle.file': conflicts with oracle.length");
    std::ifstream f(cfg.str("oracle.file"));
    if (!f) throw ConfigError("key 'oracle.file': cannot read '" + cfg.str("oracle.file") + "'");
    std::string header, row;
    std::getline(f, header);
    std::getline(f, row);
    std::stringstream hs(header), rs(row);
    std::string h, v;
    while (std::getline(hs, h, ',') && std::getline(rs, v, ',')) {
      if (h == "length") oracle = parse_number("oracle.file", v);
    }
    if (!oracle) throw ConfigError("key 'oracle.file': no 'length' column");
  }

  fs::create_directories(out);
  {
    auto t = open_out(out, "trajectory.csv");
    write_trajectory_csv(t, res.trajectory);
  }
  {
    std::vector<std::pair<std::string, GenNum>> cols{{"length", res.length},
                                                     {"speed_drift", res.speed_drift},
                                                     {"geodesic_residual", res.residual}};
    for (int i = 0; i < D; ++i) cols.emplace_back("c0_" + std::to_string(i + 1), res.initial_velocity[i]);
    auto l = open_out(out, "lengths.csv");
    csv::write_gen_nums(l, cols);
  }
  {
    auto s = open_out(out, "standard_length.csv");
    csv::write_row(s, {"exists", "value", "method", "oracle", "gap"});
    csv::write_row(s, {st.exists ? "1" : "0", st.exists ? fmt(st.value) : "nan", st.message,
                       oracle ? fmt(*oracle) : "nan",
                       oracle && st.exists ? fmt(std::fabs(st.value - *oracle)) : "nan"});
  }

  std::ostringstream r;
  r << "problem geodesic\n"
    << "metric " << rg->spec().name << " dim=" << D << " a=" << fmt(rg->params().a()) << " j=" << mol.spec().j << "\n"
    << "length last=" << fmt(res.length.last()) << "\n"
    << "standard_length " << standard_part_text(st) << "\n";
  if (oracle) r << "oracle_length " << fmt(*oracle) << "\n";
  double drift = 0.0;
  for (std::size_t k = g->tail_begin(); k < g->size(); ++k) drift = std::max(drift, res.speed_drift[k]);
  r << "speed_drift max_tail=" << fmt(drift) << "\n";

  std::optional<MinimizerReport> mrep;
  if (minimality) {
    mrep = minimality_report<D>(rg, res.trajectory, mopt);
    auto c = open_out(out, "conjugate.csv");
    write_conjugate_csv(c, mrep->jacobi);
    r << "minimality el_max_tail=" << fmt(mrep->el_norm.last())
      << " legendre=" << (mrep->legendre.pass ? "pass" : "fail")
      << " conjugate_points=" << mrep->jacobi.roots.back().size() << "\n"
      << "verdict " << to_string(mrep->verdict) << " (" << mrep->summary << ")\n";
  }

  Checks checks;
  const double tol = cfg.positive("expect.tolerance", 1e-8);
  if (oracle) {
    const double otol = cfg.positive("oracle.tolerance", 1e-3);
    checks.add("standard length within " + fmt(otol) + " of oracle", st.exists && std::fabs(st.value - *oracle) <= otol);
  }
  if (auto v = cfg.opt_num("expect.standard_length")) {
    checks.add("standard length " + fmt(*v), st.exists && std::fabs(st.value - *v) <= tol);
  }
  if (auto m = cfg.opt_num("expect.speed_drift_max")) checks.add("speed drift", drift <= *m);
  if (cfg.has("expect.verdict")) {
    if (!mrep) throw ConfigError("key 'expect.verdict': needs minimality = true");
    checks.add("verdict " + cfg.str("expect.verdict"), cfg.str("expect.verdict") == to_string(mrep->verdict));
  }
  return finish(checks, r, out, log);
}

}  // namespace

int cmd_geodesic(const Config& cfg, const fs::path& out, std::ostream& log) {
  cfg.require_known(with_common({"metric", "metric.amplitude", "metric.c0", "boundary.p", "boundary.q", "minimality",
                                 "minimizer.modes", "minimizer.el_tol", "oracle.length", "oracle.file",
                                 "oracle.tolerance", "expect.standard_length", "expect.speed_drift_max",
                                 "expect.verdict"}));
  const GaugePtr g = gauge_from(cfg);
  const std::string metric = cfg.choice("metric", "flat", {"flat", "conformal-c11", "curved-1d"});
  if (cfg.has("metric.amplitude") && metric != "conformal-c11") {
    throw ConfigError("key 'metric.amplitude': only used by conformal-c11");
  }
  if (cfg.has("metric.c0") && metric != "curved-1d") throw ConfigError("key 'metric.c0': only used by curved-1d");
  if (metric == "curved-1d") return run_geodesic<1>(cfg, metrics::curved_1d(cfg.num("metric.c0", 1.0)), g, out, log);
  if (metric == "conformal-c11") {
    return run_geodesic<2>(cfg, metrics::conformal_c11(cfg.num("metric.amplitude", 0.1)), g, out, log);
  }
  return run_geodesic<2>(cfg, metrics::flat(), g, out, log);
}

int run(const std::string& command, const std::string& config_path, const Overrides& ov, std::ostream& log,
        std::ostream& err) {
  try {
    Config cfg = Config::load(config_path);
    if (cfg.has("problem") && cfg.str("problem") != command) {
      throw ConfigError("key 'problem': config is for '" + cfg.str("problem") + "', not '" + command + "'");
    }
    if (ov.eps_levels) cfg.set("grid.levels", std::to_string(*ov.eps_levels));
    if (ov.seed) cfg.set("seed", std::to_string(*ov.seed));
    cfg.integer("seed", 42, 0, std::numeric_limits<int>::max());
    const fs::path out = ov.out_dir ? fs::path(*ov.out_dir) : fs::path(cfg.str("output", "out"));
    if (command == "embed") return cmd_embed(cfg, out, log);
    if (command == "variational") return cmd_variational(cfg, out, log);
    if (command == "geodesic") return cmd_geodesic(cfg, out, log);
    throw ConfigError("unknown command '" + command + "'");
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const SolverError& e) {
    err << "solver error: " << e.what() << '\n';
    return kSolverError;
  } catch (const NoStandardPart& e) {
    err << "solver error: " << e.what() << '\n';
    return kSolverError;
  } catch (const gsfc::Error& e) {
    err << "construction error: " << e.what() << '\n';
    return kConstructionError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kConstructionError;
  }
}

int main_entry(int argc, char** argv) {
  CLI::App app{"Generalized smooth functions: embeddings, variational problems and regularized geodesics"};
  app.require_subcommand(1);
  std::string config;
  Overrides ov;
  std::string out;
  long levels = 0, seed = 0;
  std::string chosen;
  for (const char* name : {"embed", "variational", "geodesic"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "configuration file")->required();
    sub->add_option("--out", out, "output directory");
    sub->add_option("--eps-levels", levels, "number of grid levels")->check(CLI::Range(8L, 200L));
    sub->add_option("--seed", seed, "random seed")->check(CLI::NonNegativeNumber);
    sub->callback([&chosen, name] { chosen = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  const CLI::App* sub = app.get_subcommand(chosen);
  if (sub->count("--out")) ov.out_dir = out;
  if (sub->count("--eps-levels")) ov.eps_levels = levels;
  if (sub->count("--seed")) ov.seed = seed;
  return run(chosen, config, ov, std::cout, std::cerr);
}

}  // namespace gsfcli
