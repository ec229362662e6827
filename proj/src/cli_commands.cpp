#include "pwflow/cli.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <future>
#include <random>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "pwflow/io.hpp"
#include "pwflow/model_map.hpp"
#include "pwflow/section.hpp"

namespace pwflow::cli {
namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Json load_json_file(const std::string& path) {
  std::string raw;
  try {
    raw = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  try {
    return Json::parse(raw);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad JSON in ") + path + ": " + e.what());
  }
}

// Integer-based draw so float and rational runs see the same point.
template <class T>
Vec<T> random_simplex(size_t n, std::mt19937_64& rng) {
  Vec<T> v(n);
  long tot = 0;
  std::vector<long> k(n);
  for (auto& x : k) {
    x = 1 + static_cast<long>(rng() % 9973);
    tot += x;
  }
  for (size_t i = 0; i < n; ++i)
    v[i] = scalar_traits<T>::from_int(k[i]) / scalar_traits<T>::from_int(tot);
  return v;
}

template <class T>
std::string vec_csv(const Vec<T>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ';';
    s += format_double(to_double(v[i]));
  }
  return s;
}

template <class T>
Json vec_json(const Vec<T>& v) {
  Json a = Json::array();
  for (const auto& x : v) a.push_back(scalar_to_json(x));
  return a;
}

// One trajectory of the inclusion flow; CSV row per segment exit, plus the
// worst relative deviation from the H(t) = H(0) e^{-t} law.
template <class T>
std::pair<Csv, Json> run_trajectory(const DynamicsSpec<T>& spec, const Vec<T>& p0,
                                    const Vec<T>& q0, double t_end) {
  Csv csv;
  csv.header = {"t_enter", "t_exit", "mode", "support_p", "support_q", "p", "q", "H"};
  double h0 = to_double(hamiltonian_value(spec.game, p0, q0));
  double worst = 0.0;
  size_t slides = 0;
  FlowState<T> st{p0, q0, 0.0};
  flow<T>(st, spec, t_end, [&](const SegmentRecord<T>& seg, const FlowState<T>& s) {
    double h = to_double(hamiltonian_value(spec.game, s.p, s.q));
    auto& row = csv.add_row();
    row.push_back(format_double(seg.t_enter));
    row.push_back(format_double(seg.t_exit));
    row.push_back(seg.mode == SegmentMode::Sliding ? "sliding" : "transversal");
    std::string sp, sq;
    for (size_t i : seg.support_p) sp += (sp.empty() ? "" : ";") + std::to_string(i);
    for (size_t j : seg.support_q) sq += (sq.empty() ? "" : ";") + std::to_string(j);
    row.push_back(sp);
    row.push_back(sq);
    row.push_back(vec_csv(s.p));
    row.push_back(vec_csv(s.q));
    row.push_back(format_double(h));
    if (h0 > 0) worst = std::max(worst, std::fabs(h - h0 * std::exp(-seg.t_exit)) / h0);
    if (seg.mode == SegmentMode::Sliding) ++slides;
    return true;
  });
  Json stats{{"h_law_residual", worst},
             {"segments", csv.rows.size()},
             {"sliding_segments", slides},
             {"h_initial", h0}};
  return {csv, stats};
}

const std::vector<std::pair<size_t, size_t>> kHexItinerary = {
    {0, 1}, {1, 1}, {1, 2}, {2, 2}, {2, 0}, {0, 0}};

struct SectionBundle {
  GameMatrix<double> game;
  DynamicsSpec<double> spec;
  PeriodicOrbit<double> gamma;
  Section sec;
};

SectionBundle build_section_bundle(double beta, double rho) {
  GameMatrix<double> g = cyclic_matrix<double>(beta);
  DynamicsSpec<double> spec = make_spec(g, DynamicsKind::BestResponse);
  auto orbit = periodic_orbit_solve(kHexItinerary, spec, rho);
  if (!orbit) throw NumericError("section: hexagon orbit solve failed at this beta");
  return SectionBundle{g, spec, *orbit, build_section(*orbit, spec)};
}

Json orbit_json(const PeriodicOrbit<double>& orb) {
  Json j;
  j["itinerary"] = Json::array();
  for (auto [i, jj] : orb.itinerary) j["itinerary"].push_back({i, jj});
  j["period_s"] = orb.period_s;
  j["rho"] = orb.rho;
  j["closure_residual"] = orb.closure_residual;
  j["all_transversal"] = orb.all_transversal;
  j["vertices"] = Json::array();
  for (const auto& v : orb.vertices) j["vertices"].push_back(vec_json(v));
  return j;
}

int cmd_nash(const std::string& matrix_path, const std::string& out_dir, const Json& cfg) {
  Json mj = load_json_file(matrix_path);
  auto g = game_from_json<Rational>(mj);
  auto eq = solve_nash(g);
  Json out{{"schema", kSchema},
           {"p_bar", vec_json(eq.p_bar)},
           {"q_bar", vec_json(eq.q_bar)},
           {"lambda", rational_string(eq.lambda)},
           {"mu", rational_string(eq.mu)},
           {"completely_mixed", eq.completely_mixed},
           {"degenerate_multiple", eq.degenerate_multiple}};
  std::printf("%s\n", out.dump(2).c_str());
  RunManifest man;
  man.config = cfg;
  man.inputs[matrix_path] = fnv1a64_hex(mj.dump());
  write_artifact(out_dir, "nash.json", out.dump(2) + "\n", man);
  finalize_manifest(out_dir, man);
  return 0;
}

int cmd_transversality(const std::string& matrix_path, const std::string& out_dir,
                       const Json& cfg) {
  Json mj = load_json_file(matrix_path);
  auto g = game_from_json<Rational>(mj);
  auto rep = check_transversality(g);
  Json out{{"schema", kSchema},
           {"assumption1_ok", rep.assumption1_ok},
           {"assumption2_ok", rep.assumption2_ok}};
  out["failing_minors"] = Json::array();
  for (const auto& w : rep.failing_minors)
    out["failing_minors"].push_back(
        {{"rows", w.row_set}, {"cols", w.col_set}, {"matrix", w.variant}});
  std::printf("%s\n", out.dump(2).c_str());
  RunManifest man;
  man.config = cfg;
  man.inputs[matrix_path] = fnv1a64_hex(mj.dump());
  write_artifact(out_dir, "transversality.json", out.dump(2) + "\n", man);
  finalize_manifest(out_dir, man);
  return 0;
}

template <class T>
int simulate_impl(const Json& mj, DynamicsKind kind, double t_end, unsigned long seed,
                  const std::string& out_dir, const Json& cfg,
                  const std::string& matrix_path) {
  auto g = game_from_json<T>(mj);
  auto spec = make_spec(g, kind);
  std::mt19937_64 rng(seed);
  Vec<T> p0 = random_simplex<T>(g.rows(), rng);
  Vec<T> q0 = random_simplex<T>(g.cols(), rng);
  auto [csv, stats] = run_trajectory(spec, p0, q0, t_end);
  RunManifest man;
  man.config = cfg;
  man.inputs[matrix_path] = fnv1a64_hex(mj.dump());
  man.stats = stats;
  write_artifact(out_dir, "trajectory.csv", csv.str(), man);
  finalize_manifest(out_dir, man);
  std::printf("%s\n", stats.dump(2).c_str());
  return 0;
}

int cmd_project(const std::string& matrix_path, double rho, unsigned long seed,
                const std::string& out_dir, const Json& cfg) {
  Json mj = load_json_file(matrix_path);
  auto g = game_from_json<double>(mj);
  auto eq = solve_nash(g);
  std::mt19937_64 rng(seed);
  Vec<double> p0 = random_simplex<double>(g.rows(), rng);
  Vec<double> q0 = random_simplex<double>(g.cols(), rng);
  auto pt = project_to_level_set(g, eq, p0, q0, rho);
  Json out{{"schema", kSchema},
           {"p", vec_json(pt.p)},
           {"q", vec_json(pt.q)},
           {"rho", rho},
           {"H", to_double(hamiltonian_value(g, pt.p, pt.q))}};
  std::printf("%s\n", out.dump(2).c_str());
  RunManifest man;
  man.config = cfg;
  man.inputs[matrix_path] = fnv1a64_hex(mj.dump());
  write_artifact(out_dir, "projected.json", out.dump(2) + "\n", man);
  finalize_manifest(out_dir, man);
  return 0;
}

int cmd_return_map(double beta, double rho, double px, double py, size_t returns,
                   const std::string& out_dir, const Json& cfg) {
  auto bundle = build_section_bundle(beta, rho);
  SectionOrbit orb = section_orbit({px, py}, returns, bundle.sec, bundle.spec);
  Csv csv;
  csv.header = {"iterate", "u", "v", "return_s", "itinerary_len"};
  for (size_t i = 0; i < orb.samples.size(); ++i) {
    auto& row = csv.add_row();
    row.push_back(std::to_string(i));
    row.push_back(format_double(orb.samples[i][0]));
    row.push_back(format_double(orb.samples[i][1]));
    row.push_back(i < orb.return_times.size() ? format_double(orb.return_times[i]) : "");
    row.push_back(i < orb.itineraries.size() ? std::to_string(orb.itineraries[i].size()) : "");
  }
  RunManifest man;
  man.config = cfg;
  man.stats = {{"period_s", bundle.gamma.period_s},
               {"closure_residual", bundle.gamma.closure_residual},
               {"reverify_chart_dist", verify_section_orbit(orb, bundle.sec, bundle.spec)}};
  write_artifact(out_dir, "return_orbit.csv", csv.str(), man);
  finalize_manifest(out_dir, man);
  std::printf("%s\n", man.stats.dump(2).c_str());
  return 0;
}

int cmd_section(double beta, double rho, size_t returns, size_t seeds, unsigned long seed,
                const std::string& out_dir, const Json& cfg) {
  auto bundle = build_section_bundle(beta, rho);
  Json sj{{"schema", kSchema},
          {"beta", beta},
          {"cone_angle", bundle.sec.cone_angle},
          {"level_deviation", bundle.sec.level_deviation},
          {"gamma", orbit_json(bundle.gamma)}};
  sj["chart_vertices"] = Json::array();
  for (const auto& cv : bundle.sec.chart_vertex) sj["chart_vertices"].push_back({cv[0], cv[1]});
  sj["triangles"] = Json::array();
  for (const auto& t : bundle.sec.tri) sj["triangles"].push_back({t[0], t[1], t[2]});

  // scatter from random interior chart starts
  std::mt19937_64 rng(seed);
  double scale = 0.0;
  for (const auto& cv : bundle.sec.chart_vertex)
    scale = std::max(scale, chart_dist(cv, {0, 0}));
  Csv scatter;
  scatter.header = {"seed", "iterate", "u", "v"};
  size_t failures = 0;
  for (size_t sidx = 0; sidx < seeds; ++sidx) {
    std::uniform_real_distribution<double> U(-0.6 * scale, 0.6 * scale);
    ChartPoint c{U(rng), U(rng)};
    if (!chart_lift(bundle.sec, bundle.spec, c)) continue;
    try {
      SectionOrbit orb = section_orbit(c, returns, bundle.sec, bundle.spec);
      for (size_t i = 0; i < orb.samples.size(); ++i) {
        auto& row = scatter.add_row();
        row.push_back(std::to_string(sidx));
        row.push_back(std::to_string(i));
        row.push_back(format_double(orb.samples[i][0]));
        row.push_back(format_double(orb.samples[i][1]));
      }
    } catch (const NumericError&) {
      ++failures;  // orbit left the resolvable region; reported, not fatal
    }
  }

  auto pts = find_periodic_points(1, {-2 * scale, 2 * scale, -2 * scale, 2 * scale},
                                  bundle.sec, bundle.spec, 16);
  Json pj = Json::array();
  for (const auto& pt : pts)
    pj.push_back({{"u", pt.chart[0]},
                  {"v", pt.chart[1]},
                  {"period_k", pt.period_k},
                  {"period_s", pt.period_s},
                  {"eig_mod", {pt.eig_mod[0], pt.eig_mod[1]}},
                  {"elliptic", pt.elliptic},
                  {"saddle", pt.saddle},
                  {"area_det", pt.area_det},
                  {"residual", pt.residual}});
  sj["periodic_points"] = pj;

  RunManifest man;
  man.config = cfg;
  man.stats = {{"scatter_failures", failures}, {"periodic_points", pts.size()}};
  write_artifact(out_dir, "section.json", sj.dump(2) + "\n", man);
  write_artifact(out_dir, "scatter.csv", scatter.str(), man);
  finalize_manifest(out_dir, man);
  std::printf("%s\n", man.stats.dump(2).c_str());
  return 0;
}

int cmd_modelmap(size_t iterates, size_t samples, const std::string& out_dir,
                 const Json& cfg) {
  ModelMapSpec<double> spec;
  Csv spiral;
  spiral.header = {"iterate", "x", "y"};
  for (size_t s = 0; s < samples; ++s) {
    double p = 4.0 * s / samples;
    L1Point<double> z = detail::diamond_point(static_cast<int>(p), p - std::floor(p), 1.0);
    for (size_t it = 0; it <= iterates; ++it) {
      auto& row = spiral.add_row();
      row.push_back(std::to_string(it));
      row.push_back(format_double(z.z[0]));
      row.push_back(format_double(z.z[1]));
      if (it < iterates) z = model_map_step(z, spec);
    }
  }
  auto fps = fixed_points_on_ray({2.0 / 3, 1.0 / 3}, 1e-3, 1.0, spec);
  Csv fp;
  fp.header = {"radius", "x", "y", "residual"};
  for (const auto& f : fps) {
    auto& row = fp.add_row();
    row.push_back(format_double(f.radius));
    row.push_back(format_double(f.z[0]));
    row.push_back(format_double(f.z[1]));
    row.push_back(format_double(f.residual));
  }
  RunManifest man;
  man.config = cfg;
  man.stats = {{"fixed_points", fps.size()}};
  write_artifact(out_dir, "spiral.csv", spiral.str(), man);
  write_artifact(out_dir, "fixed_points.csv", fp.str(), man);
  finalize_manifest(out_dir, man);
  std::printf("%s\n", man.stats.dump(2).c_str());
  return 0;
}

int cmd_sweep(const std::string& matrix_path, const std::vector<double>& betas, size_t starts,
              double t_end, unsigned long seed, size_t workers, const std::string& out_dir,
              const Json& cfg) {
  struct Row {
    std::string label;
    std::string status;
    Json stats;
  };
  std::vector<std::function<Row()>> jobs;

  for (double beta : betas) {
    jobs.push_back([beta, out_dir]() -> Row {
      char label[32];
      std::snprintf(label, sizeof(label), "beta_%g", beta);
      try {
        auto bundle = build_section_bundle(beta, 1.0);
        SectionOrbit orb = section_orbit({-0.3, 0.25}, 60, bundle.sec, bundle.spec);
        Csv csv;
        csv.header = {"iterate", "u", "v"};
        for (size_t i = 0; i < orb.samples.size(); ++i) {
          auto& row = csv.add_row();
          row.push_back(std::to_string(i));
          row.push_back(format_double(orb.samples[i][0]));
          row.push_back(format_double(orb.samples[i][1]));
        }
        write_file((std::filesystem::path(out_dir) / (std::string(label) + "_scatter.csv")).string(),
                   csv.str());
        return {label, "ok", Json{{"period_s", bundle.gamma.period_s}}};
      } catch (const std::exception& e) {
        return {label, std::string("error: ") + e.what(), Json::object()};
      }
    });
  }

  if (starts > 0) {
    Json mj = load_json_file(matrix_path);
    auto g = game_from_json<double>(mj);
    auto eq = solve_nash(g);
    auto spec = make_spec(g, DynamicsKind::BestResponse);
    for (size_t i = 0; i < starts; ++i) {
      jobs.push_back([i, seed, t_end, g, eq, spec]() -> Row {
        std::string label = "start_" + std::to_string(i);
        try {
          std::mt19937_64 rng(seed + i);
          Vec<double> p0 = random_simplex<double>(g.rows(), rng);
          Vec<double> q0 = random_simplex<double>(g.cols(), rng);
          auto lp = project_to_level_set(g, eq, p0, q0, 1.0);
          double drift = 0.0;
          size_t count = 0;
          level_flow<double>(lp.p, lp.q, spec, 0.0, t_end,
                             [&](const TranslationSegment<double>& seg) {
                               auto [p, q] = unstack_state(seg.x_enter, g.rows());
                               drift = std::max(drift,
                                                std::fabs(to_double(hamiltonian_value(g, p, q)) - 1.0));
                               ++count;
                               return true;
                             });
          return {label, "ok", Json{{"h_drift", drift}, {"segments", count}}};
        } catch (const std::exception& e) {
          return {label, std::string("error: ") + e.what(), Json::object()};
        }
      });
    }
  }

  // bounded fan-out; aggregation single-writer in job order
  std::vector<Row> results(jobs.size());
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      results[i] = jobs[i]();
    }
  };
  std::vector<std::future<void>> fleet;
  for (size_t w = 0; w < std::min(workers, jobs.size()); ++w)
    fleet.push_back(std::async(std::launch::async, worker));
  for (auto& f : fleet) f.get();

  Csv summary;
  summary.header = {"label", "status", "stats"};
  size_t ok = 0;
  for (const auto& r : results) {
    auto& row = summary.add_row();
    row.push_back(r.label);
    row.push_back(r.status);
    std::string s = r.stats.dump();
    for (auto& ch : s)
      if (ch == ',') ch = ';';
    row.push_back(s);
    if (r.status == "ok") ++ok;
  }
  RunManifest man;
  man.config = cfg;
  man.stats = {{"runs", results.size()}, {"ok", ok}};
  write_artifact(out_dir, "summary.csv", summary.str(), man);
  finalize_manifest(out_dir, man);
  std::printf("%s\n", man.stats.dump(2).c_str());
  if (!results.empty() && ok == 0) return 4;
  return 0;
}

int cmd_plot(const std::string& csv_path, const std::string& x_col, const std::string& y_col,
             bool polyline, const std::string& out_path) {
  std::string raw;
  try {
    raw = read_file(csv_path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  std::istringstream in(raw);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("plot: empty CSV");
  std::vector<std::string> header;
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
  }
  auto col_of = [&](const std::string& name) -> size_t {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw ConfigError("plot: no column named " + name);
  };
  size_t xi = col_of(x_col), yi = col_of(y_col);
  SvgSeries series;
  series.polyline = polyline;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() <= std::max(xi, yi)) continue;
    try {
      series.points.push_back({std::stod(cells[xi]), std::stod(cells[yi])});
    } catch (...) {
      continue;  // blank or non-numeric cell
    }
  }
  write_file(out_path, render_svg({series}));
  std::printf("{\"points\": %zu, \"svg\": \"%s\"}\n", series.points.size(), out_path.c_str());
  return 0;
}

Json preload_config(int argc, char** argv) {
  for (int i = 2; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") return load_json_file(argv[i + 1]);
  return Json::object();
}

void write_diagnostic(const std::string& out_dir, const std::string& sub,
                      const std::string& what) {
  Json j{{"schema", kSchema}, {"subcommand", sub}, {"error", what}};
  try {
    write_file((std::filesystem::path(out_dir) / "diagnostic.json").string(), j.dump(2) + "\n");
  } catch (...) {
  }
  std::fprintf(stderr, "%s\n", j.dump(2).c_str());
}

}  // namespace

int run(int argc, char** argv) {
  static const std::vector<std::string> known = {
      "nash",   "transversality", "simulate", "project", "return-map",
      "section", "modelmap",      "sweep",    "plot"};
  if (argc < 2) {
    std::fprintf(stderr, "usage: pwflow <subcommand> [options]; subcommands:");
    for (const auto& s : known) std::fprintf(stderr, " %s", s.c_str());
    std::fprintf(stderr, "\n");
    return 2;
  }
  std::string sub = argv[1];
  if (std::find(known.begin(), known.end(), sub) == known.end()) {
    std::fprintf(stderr, "unknown subcommand: %s\n", sub.c_str());
    return 2;
  }

  Json cfg;
  try {
    cfg = preload_config(argc, argv);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 3;
  }
  auto cd = [&](const char* key, double dflt) { return cfg.value(key, dflt); };
  auto ci = [&](const char* key, long dflt) { return cfg.value(key, dflt); };
  auto cs = [&](const char* key, const std::string& dflt) { return cfg.value(key, dflt); };

  CLI::App app{"piecewise flow toolkit"};
  app.name("pwflow " + sub);
  std::string config_path, matrix = cs("matrix", ""), out_dir = cs("out", "out");
  std::string kind = cs("kind", "best_response"), start = cs("start", "random");
  std::string csv_path = cs("csv", ""), x_col = cs("x", "u"), y_col = cs("y", "v");
  std::string mode = cs("mode", "scatter"), beta_list = cs("beta_grid", "");
  double t_end = cd("t", 10.0), rho = cd("rho", 1.0), beta = cd("beta", 0.618);
  double px = cd("px", -0.3), py = cd("py", 0.25);
  unsigned long seed = static_cast<unsigned long>(ci("seed", 1));
  size_t returns = static_cast<size_t>(ci("returns", 50));
  size_t seeds = static_cast<size_t>(ci("seeds", 8));
  size_t iterates = static_cast<size_t>(ci("iterates", 6));
  size_t samples = static_cast<size_t>(ci("samples", 720));
  size_t starts = static_cast<size_t>(ci("starts", 0));
  size_t workers = static_cast<size_t>(ci("workers", 0));
  bool rational = cfg.value("rational", false), polyline = mode == "polyline";

  app.add_option("--config", config_path, "JSON config; explicit flags win");
  app.add_option("--matrix", matrix, "game matrix JSON path");
  app.add_option("--out", out_dir, "artifact directory");
  app.add_option("--kind", kind)->check(CLI::IsMember({"best_response", "hamiltonian"}));
  app.add_option("--t", t_end);
  app.add_option("--rho", rho);
  app.add_option("--beta", beta);
  app.add_option("--beta-grid", beta_list, "comma-separated betas for sweep");
  app.add_option("--px", px);
  app.add_option("--py", py);
  app.add_option("--seed", seed);
  app.add_option("--returns", returns);
  app.add_option("--seeds", seeds);
  app.add_option("--iterates", iterates);
  app.add_option("--samples", samples);
  app.add_option("--starts", starts);
  app.add_option("--workers", workers);
  app.add_option("--start", start)->check(CLI::IsMember({"random"}));
  app.add_option("--csv", csv_path);
  app.add_option("--x", x_col);
  app.add_option("--y", y_col);
  app.add_option("--mode", mode)->check(CLI::IsMember({"scatter", "polyline"}));
  app.add_flag("--rational", rational, "exact arithmetic where supported");

  try {
    app.parse(argc - 1, argv + 1);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 3;
  }
  polyline = mode == "polyline";

  Json echo{{"subcommand", sub}, {"seed", seed}, {"out", out_dir}};
  for (auto& [k, v] : cfg.items()) echo[k] = v;

  auto need_matrix = [&]() {
    if (matrix.empty()) throw ConfigError(sub + ": --matrix is required");
  };
  try {
    if (sub == "nash") {
      need_matrix();
      return cmd_nash(matrix, out_dir, echo);
    }
    if (sub == "transversality") {
      need_matrix();
      return cmd_transversality(matrix, out_dir, echo);
    }
    if (sub == "simulate") {
      need_matrix();
      Json mj = load_json_file(matrix);
      DynamicsKind dk = kind == "hamiltonian" ? DynamicsKind::Hamiltonian
                                              : DynamicsKind::BestResponse;
      echo["kind"] = kind;
      echo["t"] = t_end;
      if (rational) return simulate_impl<Rational>(mj, dk, t_end, seed, out_dir, echo, matrix);
      return simulate_impl<double>(mj, dk, t_end, seed, out_dir, echo, matrix);
    }
    if (sub == "project") {
      need_matrix();
      return cmd_project(matrix, rho, seed, out_dir, echo);
    }
    if (sub == "return-map") return cmd_return_map(beta, rho, px, py, returns, out_dir, echo);
    if (sub == "section") return cmd_section(beta, rho, returns, seeds, seed, out_dir, echo);
    if (sub == "modelmap") return cmd_modelmap(iterates, samples, out_dir, echo);
    if (sub == "sweep") {
      std::vector<double> betas;
      std::istringstream bs(beta_list);
      std::string tok;
      while (std::getline(bs, tok, ','))
        if (!tok.empty()) betas.push_back(std::stod(tok));
      if (starts > 0 && matrix.empty()) throw ConfigError("sweep: --starts needs --matrix");
      return cmd_sweep(matrix, betas, starts, t_end, seed, workers, out_dir, echo);
    }
    if (sub == "plot") {
      if (csv_path.empty()) throw ConfigError("plot: --csv is required");
      std::string out_svg =
          (std::filesystem::path(out_dir) / "plot.svg").string();
      return cmd_plot(csv_path, x_col, y_col, polyline, out_svg);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    write_diagnostic(out_dir, sub, e.what());
    return 4;
  }
  return 2;
}

}  // namespace pwflow::cli
