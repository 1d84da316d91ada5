#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "minaction/gradient.hpp"
#include "minaction/io.hpp"
#include "minaction/report.hpp"
#include "minaction/sindy.hpp"
#include "minaction/stencil.hpp"

namespace {

using namespace minaction;

constexpr double kUnsetD = std::numeric_limits<double>::quiet_NaN();

// Exit codes: 0 success, 1 validation/domain error, 2 usage error.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t parse_u64(const std::string& s, const char* what) {
  try {
    if (s.empty() || s[0] == '-') throw std::invalid_argument("sign");
    size_t pos = 0;
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw UsageError(std::string("invalid ") + what + ": '" + s + "'");
  }
}

// "0..9" (inclusive) or "0,3,7"
std::vector<std::uint64_t> parse_seed_list(const std::string& spec, const char* what) {
  std::vector<std::uint64_t> out;
  if (const size_t dots = spec.find(".."); dots != std::string::npos) {
    const std::uint64_t lo = parse_u64(spec.substr(0, dots), what);
    const std::uint64_t hi = parse_u64(spec.substr(dots + 2), what);
    if (hi < lo || hi - lo > 100000) throw UsageError(std::string("bad range for ") + what);
    for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
    return out;
  }
  size_t pos = 0;
  while (pos <= spec.size()) {
    const size_t comma = spec.find(',', pos);
    const std::string tok =
        spec.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!tok.empty()) out.push_back(parse_u64(tok, what));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw UsageError(std::string("empty list for ") + what);
  return out;
}

struct Common {
  std::string config_path;
  std::string preset;
  std::string library;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "run configuration JSON file");
  cmd->add_option("--preset", c.preset,
                  "preset: kepler-default|hooke-default|biased-init|ablation-tf|"
                  "slow-anneal|extended-warmup|low-noise");
  cmd->add_option("--library", c.library,
                  "basis library: standard|confounders|expanded|reduced");
  c.seed_opt = cmd->add_option("--seed", c.seed, "master seed");
}

// Precedence for the master seed: config file < MINACTION_SEED < --seed.
RunConfig resolve(const Common& c) {
  if (!c.config_path.empty() && !c.preset.empty())
    throw UsageError("--config and --preset are mutually exclusive");
  RunConfig rc;
  if (!c.config_path.empty()) {
    rc = load_run_config(c.config_path);
  } else {
    try {
      rc = make_preset(c.preset.empty() ? "kepler-default" : c.preset);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (const char* env = std::getenv("MINACTION_SEED")) rc.seed = parse_u64(env, "MINACTION_SEED");
  if (c.seed_opt != nullptr && c.seed_opt->count() > 0) rc.seed = c.seed;
  if (!c.library.empty()) {
    try {
      rc.train.library = library_by_name(c.library);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  rc.train.seed = rc.seed;
  if (!rc.data_seed_explicit) rc.data.seed = rc.seed;
  return rc;
}

int effective_jobs(int requested, size_t n_tasks) {
  int jobs = requested > 0 ? requested
                           : std::max(1u, std::thread::hardware_concurrency());
  return std::max(1, std::min<int>(jobs, static_cast<int>(n_tasks)));
}

// ---- generate ----

struct GenerateCmd {
  Common common;
  std::string system;
  double coupling = kUnsetD, noise = kUnsetD, periods = kUnsetD;
  double dt_obs = kUnsetD, dt_sim = kUnsetD;
  double a_min = kUnsetD, a_max = kUnsetD, e_min = kUnsetD, e_max = kUnsetD;
  int n_orbits = -1;
  std::string out = "data.json";
};

int run_generate(const GenerateCmd& g) {
  RunConfig rc = resolve(g.common);
  if (!g.system.empty()) {
    if (g.system == "kepler")
      rc.data.law.kind = LawKind::Kepler;
    else if (g.system == "hooke")
      rc.data.law.kind = LawKind::Hooke;
    else
      throw UsageError("unknown system '" + g.system + "' (expected kepler or hooke)");
  }
  if (std::isfinite(g.coupling)) rc.data.law.coupling = g.coupling;
  if (std::isfinite(g.noise)) rc.data.noise_fraction = g.noise;
  if (std::isfinite(g.periods)) rc.data.periods = g.periods;
  if (std::isfinite(g.dt_obs)) rc.data.dt_obs = g.dt_obs;
  if (std::isfinite(g.dt_sim)) rc.data.dt_sim = g.dt_sim;
  if (std::isfinite(g.a_min)) rc.data.a_min = g.a_min;
  if (std::isfinite(g.a_max)) rc.data.a_max = g.a_max;
  if (std::isfinite(g.e_min)) rc.data.e_min = g.e_min;
  if (std::isfinite(g.e_max)) rc.data.e_max = g.e_max;
  if (g.n_orbits > 0) rc.data.n_orbits = g.n_orbits;

  const Dataset data = generate_dataset(rc.data);
  save_dataset(data, g.out);
  std::cout << "wrote " << g.out << ": " << data.orbits.size() << " "
            << law_name(data.config.law.kind) << " orbits (train/val/test "
            << data.n_train << "/" << data.n_val << "/" << data.n_test
            << "), sigma_pos = " << format_double(data.sigma_pos) << "\n";
  return 0;
}

// ---- noise-table ----

struct NoiseCmd {
  double sigma_pos = 0.016, dt = 0.05, signal = 0.25;
  std::string strides = "1,5,10,20";
  int samples = 50000;
  std::uint64_t seed = 0;
  std::string out;
};

int run_noise_table(const NoiseCmd& n) {
  std::vector<NoiseTableRow> rows;
  for (std::uint64_t s64 : parse_seed_list(n.strides, "--strides")) {
    const int s = static_cast<int>(s64);
    if (s < 1) throw UsageError("strides must be >= 1");
    const NoiseCheck chk =
        verify_accel_noise(n.sigma_pos, s, n.dt, n.samples, derive_seed(n.seed, 100 + s));
    rows.push_back({s, chk.analytic, chk.empirical, n.signal, n.signal / chk.analytic});
  }
  const std::string csv = noise_table_csv(rows);
  if (n.out.empty())
    std::cout << csv;
  else {
    write_file_atomic(n.out, csv);
    std::cout << "wrote " << n.out << "\n";
  }
  return 0;
}

// ---- gradcheck ----

struct GradCmd {
  Common common;
  std::string data;
  int points = 3;
  int n_seeds = 3;
  double tol = 1e-4;
  double step = 1e-5;
  std::string out;
};

int run_gradcheck(const GradCmd& g) {
  RunConfig rc = resolve(g.common);
  const BasisLibrary& lib = rc.train.library;
  const int k = lib.size();
  if (2 * k > kGradLanes) throw UsageError("library too large for gradient lanes");

  double worst = 0.0;
  for (int si = 0; si < g.n_seeds; ++si) {
    OrbitGenConfig dc = rc.data;
    dc.seed = rc.seed + static_cast<std::uint64_t>(si);
    dc.orbit_seed.reset();
    dc.noise_seed.reset();
    const Dataset data = g.data.empty() ? generate_dataset(dc) : load_dataset(g.data);

    LossOptions lopt = rc.train.loss;
    lopt.literal_coupling = data.config.law.coupling;
    std::vector<PreparedTrajectory> prep;
    for (const Trajectory& tr : data.train()) prep.push_back(prepare_trajectory(tr, lopt));
    const std::span<const PreparedTrajectory> batch(prep.data(), prep.size());

    // Mid-anneal weights exercise every loss term at once.
    const double tau = 0.3, alpha_E = 0.5;
    auto loss_at = [&](const auto& xv) {
      using S = std::decay_t<decltype(xv[Eigen::Index(0)])>;
      VecX<S> lg(k), th(k);
      for (int i = 0; i < k; ++i) {
        lg[i] = xv[i];
        th[i] = xv[k + i];
      }
      return batch_loss<S>(lib, lg, th, tau, batch, rc.train.weights, alpha_E, lopt).total;
    };

    Rng rng(derive_seed(dc.seed, 6));
    for (int p = 0; p < g.points; ++p) {
      Eigen::VectorXd x(2 * k);
      for (int i = 0; i < k; ++i) x[i] = rng.uniform(-1.0, 1.0);
      for (int i = 0; i < k; ++i) x[k + i] = rng.normal(0.0, 0.5);
      const auto [value, grad] = value_and_grad(loss_at, x);
      (void)value;
      const Eigen::VectorXd fd = fd_gradient(loss_at, x, g.step);
      worst = std::max(worst, max_rel_error(grad, fd));
    }
  }

  const bool pass = worst < g.tol;
  std::cout << "max relative gradient error: " << format_double(worst) << " (tolerance "
            << format_double(g.tol) << ") -> " << (pass ? "PASS" : "FAIL") << "\n";
  if (!g.out.empty()) {
    JsonWriter w;
    w.begin_object();
    w.key("config");
    emit_run_config(w, rc);
    w.key("max_rel_error").value(worst);
    w.key("tol").value(g.tol);
    w.key("pass").value(pass);
    w.end_object();
    w.newline();
    write_file_atomic(g.out, w.str());
  }
  return pass ? 0 : 1;
}

// ---- train ----

struct TrainCmd {
  Common common;
  std::string data;
  std::string out = "run";
};

void write_train_outputs(const std::filesystem::path& dir, const BasisModel& model,
                         const std::vector<EpochRecord>& log, const Milestones& ms,
                         const RunConfig& rc) {
  write_file_atomic(dir / "model.json", model_to_json(model, rc));
  write_file_atomic(dir / "milestones.json", milestones_to_json(ms, rc));
  write_file_atomic(dir / "trainlog.csv", trainlog_csv(log));
  write_file_atomic(dir / "gates.csv", gates_csv(log, model.library));
}

int run_train(const TrainCmd& t) {
  RunConfig rc = resolve(t.common);
  if (t.data.empty()) throw UsageError("train requires --data");
  const Dataset data = load_dataset(t.data);
  try {
    const TrainResult res = train(data, rc.train);
    write_train_outputs(t.out, res.model, res.log, res.milestones, rc);
    const GateStats gs = gate_stats(res.model);
    std::cout << "trained " << rc.train.schedule.total_epochs << " epochs; dominant gate "
              << (gs.dominant >= 0 ? rc.train.library.terms[gs.dominant].name() : "-")
              << ", selectivity " << format_double(gs.selectivity) << "\n"
              << "wrote " << (std::filesystem::path(t.out) / "model.json").string()
              << " (+ milestones.json, trainlog.csv, gates.csv)\n";
    return 0;
  } catch (const TrainingInstability& e) {
    write_file_atomic(std::filesystem::path(t.out) / "model.json",
                      model_to_json(e.last_good, rc));
    std::cerr << "error: " << e.what() << " (last stable snapshot written)\n";
    return 1;
  }
}

// ---- sweep ----

struct SweepCmd {
  Common common;
  std::string data;
  std::string seeds;
  int jobs = 0;
  std::string out = "sweep.json";
};

int run_sweep(const SweepCmd& s) {
  RunConfig rc = resolve(s.common);
  if (s.data.empty()) throw UsageError("sweep requires --data");
  if (!s.seeds.empty()) rc.sweep.seeds = parse_seed_list(s.seeds, "--seeds");
  if (s.jobs > 0) rc.sweep.jobs = s.jobs;
  const Dataset data = load_dataset(s.data);
  const SweepResult res =
      sweep(data, rc.train, rc.sweep.seeds, effective_jobs(rc.sweep.jobs, rc.sweep.seeds.size()));
  write_file_atomic(s.out, sweep_to_json(res, rc));
  if (res.verdict.decided)
    std::cout << "verdict: " << res.verdict.basis_name << " (margin "
              << format_double(res.verdict.margin) << "x)\n";
  else
    std::cout << "verdict: undecided\n";
  std::cout << "wrote " << s.out << "\n";
  return 0;
}

// ---- validate ----

struct ValidateCmd {
  Common common;
  std::string model;
  std::string data;
  std::string out = "validate.json";
};

int run_validate(const ValidateCmd& v) {
  RunConfig rc = resolve(v.common);
  if (v.model.empty() || v.data.empty()) throw UsageError("validate requires --model and --data");
  const Dataset data = load_dataset(v.data);
  const BasisModel model = load_model(v.model);
  rc.train.library = model.library;

  const SweepEntry e = evaluate_model(data, model, rc.train.loss);
  ValidateReport rep;
  rep.dominant = e.dominant;
  if (e.dominant >= 0) rep.dominant_name = model.library.terms[e.dominant].name();
  rep.selectivity = e.selectivity;
  rep.concentration = e.concentration;
  rep.theta_opt = e.theta_opt;
  rep.kepler_p = e.kepler_p;
  rep.sigma_h = e.sigma_h;
  rep.rollout_diverged = e.rollout_diverged;
  write_file_atomic(v.out, validate_to_json(rep, rc));

  auto opt_str = [](const std::optional<double>& o) {
    return o ? format_double(*o) : std::string("-");
  };
  std::cout << "dominant " << (rep.dominant >= 0 ? rep.dominant_name : "-") << ", theta_opt "
            << opt_str(rep.theta_opt) << ", p " << opt_str(rep.kepler_p) << ", C "
            << format_double(rep.concentration) << ", sigma_H " << opt_str(rep.sigma_h) << "\n"
            << "wrote " << v.out << "\n";
  return 0;
}

// ---- select ----

struct SelectCmd {
  std::string sweep_path;
  std::string out = "verdict.json";
};

int run_select(const SelectCmd& s) {
  if (s.sweep_path.empty()) throw UsageError("select requires --sweep");
  const LoadedSweep ls = load_sweep(s.sweep_path);
  std::vector<std::pair<int, double>> grouped;
  for (const SweepEntry& e : ls.result.entries)
    if (e.sigma_h && e.dominant >= 0) grouped.emplace_back(e.dominant, *e.sigma_h);
  const GroupSelection sel = select_by_conservation(grouped);
  write_file_atomic(s.out, verdict_to_json(sel, ls.config.train.library, ls.config));
  if (sel.decided)
    std::cout << "verdict: " << ls.config.train.library.terms[sel.basis].name() << " (margin "
              << format_double(sel.margin) << "x)\n";
  else
    std::cout << "verdict: undecided\n";
  std::cout << "wrote " << s.out << "\n";
  return 0;
}

// ---- sindy ----

struct SindyCmd {
  Common common;
  std::string data;
  int stride = 0;
  int ensemble = -1;
  double threshold = kUnsetD;
  std::string seeds;
  std::string out = "sindy.json";
};

int run_sindy(const SindyCmd& s) {
  RunConfig rc = resolve(s.common);
  if (s.data.empty()) throw UsageError("sindy requires --data");
  if (s.stride > 0) rc.sindy.stride = s.stride;
  if (s.ensemble >= 0) rc.sindy.n_boot = s.ensemble;
  if (std::isfinite(s.threshold)) rc.sindy.threshold = s.threshold;
  if (!s.seeds.empty()) rc.sindy.seeds = parse_seed_list(s.seeds, "--seeds");

  const Dataset base = load_dataset(s.data);
  const BasisLibrary& lib = rc.train.library;
  SindyReport rep;
  rep.stride = rc.sindy.stride;
  rep.n_boot = rc.sindy.n_boot;
  rep.threshold = rc.sindy.threshold;
  rep.correct_index = true_basis_index(lib, base.config.law.kind);

  for (std::uint64_t seed : rc.sindy.seeds) {
    // Same clean orbits, fresh observation noise per seed.
    OrbitGenConfig cfg = base.config;
    cfg.orbit_seed = base.config.effective_orbit_seed();
    cfg.seed = seed;
    cfg.noise_seed.reset();
    const Dataset data = generate_dataset(cfg);

    const auto t0 = std::chrono::steady_clock::now();
    const SindyFit fit =
        rc.sindy.n_boot > 0
            ? sindy_ensemble(data, lib, rc.sindy.stride, rc.sindy.threshold, rc.sindy.n_boot,
                             derive_seed(seed, 5))
            : sindy_fit(data, lib, rc.sindy.stride, rc.sindy.threshold);
    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    rep.runs.push_back({seed, fit.identified, fit.coefficients, fit.n_points, wall_ms});
  }

  write_file_atomic(s.out, sindy_to_json(rep, lib, rc));
  int correct = 0;
  for (const SindyRun& r : rep.runs)
    if (rep.correct_index >= 0 && r.identified == rep.correct_index) ++correct;
  std::cout << "identified "
            << (rep.correct_index >= 0 ? lib.terms[rep.correct_index].name() : "-") << " in "
            << correct << "/" << rep.runs.size() << " runs (stride " << rep.stride
            << ", ensemble " << rep.n_boot << ")\n"
            << "wrote " << s.out << "\n";
  return 0;
}

// ---- report ----

struct ReportCmd {
  std::string sweep_path;
  std::string sindy_path;
  std::string out = "report";
};

int run_report(const ReportCmd& r) {
  if (r.sweep_path.empty()) throw UsageError("report requires --sweep");
  const LoadedSweep ls = load_sweep(r.sweep_path);
  std::optional<SindyReport> sindy;
  if (!r.sindy_path.empty()) sindy = load_sindy_report(r.sindy_path);
  write_report(r.out, ls.result, ls.config, sindy ? &*sindy : nullptr);
  std::cout << "wrote " << (std::filesystem::path(r.out) / "report.md").string()
            << " (+ loss_curves.csv, gates_evolution.csv, phase_trajectory.csv)\n";
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"energy-constrained symbolic force-law identification"};
  app.require_subcommand(1);

  GenerateCmd gen;
  CLI::App* cg = app.add_subcommand("generate", "simulate orbits and write a dataset");
  add_common(cg, gen.common);
  cg->add_option("--system", gen.system, "kepler|hooke")
      ->check(CLI::IsMember({"kepler", "hooke"}));
  cg->add_option("--coupling", gen.coupling, "GM or spring constant");
  cg->add_option("--n-orbits", gen.n_orbits, "number of orbits");
  cg->add_option("--noise", gen.noise, "noise fraction of median semi-major axis");
  cg->add_option("--periods", gen.periods, "orbital periods per trajectory");
  cg->add_option("--dt-obs", gen.dt_obs, "observation cadence");
  cg->add_option("--dt-sim", gen.dt_sim, "integrator step");
  cg->add_option("--a-min", gen.a_min, "semi-major axis lower bound");
  cg->add_option("--a-max", gen.a_max, "semi-major axis upper bound");
  cg->add_option("--e-min", gen.e_min, "eccentricity lower bound");
  cg->add_option("--e-max", gen.e_max, "eccentricity upper bound");
  cg->add_option("--out", gen.out, "output dataset path");

  NoiseCmd noise;
  CLI::App* cn = app.add_subcommand("noise-table", "stencil noise predictions vs Monte Carlo");
  cn->add_option("--sigma-pos", noise.sigma_pos, "position noise sigma");
  cn->add_option("--dt", noise.dt, "observation cadence");
  cn->add_option("--strides", noise.strides, "comma-separated strides");
  cn->add_option("--signal", noise.signal, "reference acceleration magnitude");
  cn->add_option("--samples", noise.samples, "Monte Carlo sample count");
  cn->add_option("--seed", noise.seed, "random seed");
  cn->add_option("--out", noise.out, "output CSV path (stdout if omitted)");

  GradCmd grad;
  CLI::App* cgr = app.add_subcommand("gradcheck", "finite-difference gradient contract");
  add_common(cgr, grad.common);
  cgr->add_option("--data", grad.data, "dataset path (generated per seed if omitted)");
  cgr->add_option("--points", grad.points, "parameter points per seed");
  cgr->add_option("--trials", grad.n_seeds, "dataset seeds");
  cgr->add_option("--tol", grad.tol, "max relative error");
  cgr->add_option("--step", grad.step, "finite-difference step");
  cgr->add_option("--out", grad.out, "output JSON path");

  TrainCmd tr;
  CLI::App* ct = app.add_subcommand("train", "train one model");
  add_common(ct, tr.common);
  ct->add_option("--data", tr.data, "dataset path")->required();
  ct->add_option("--out", tr.out, "output directory");

  SweepCmd sw;
  CLI::App* cs = app.add_subcommand("sweep", "train across seeds and group by conservation");
  add_common(cs, sw.common);
  cs->add_option("--data", sw.data, "dataset path")->required();
  cs->add_option("--seeds", sw.seeds, "seed list, e.g. 0..9 or 0,2,5");
  cs->add_option("--jobs", sw.jobs, "worker threads (default: available cores)");
  cs->add_option("--out", sw.out, "output sweep JSON path");

  ValidateCmd va;
  CLI::App* cv = app.add_subcommand("validate", "calibrate and diagnose a trained model");
  add_common(cv, va.common);
  cv->add_option("--model", va.model, "model JSON path")->required();
  cv->add_option("--data", va.data, "dataset path")->required();
  cv->add_option("--out", va.out, "output JSON path");

  SelectCmd se;
  CLI::App* cse = app.add_subcommand("select", "pick a basis from a sweep by conservation");
  cse->add_option("--sweep", se.sweep_path, "sweep JSON path")->required();
  cse->add_option("--out", se.out, "output verdict path");

  SindyCmd si;
  CLI::App* csi = app.add_subcommand("sindy", "sequentially thresholded regression baseline");
  add_common(csi, si.common);
  csi->add_option("--data", si.data, "dataset path")->required();
  csi->add_option("--stride", si.stride, "stencil stride");
  csi->add_option("--ensemble", si.ensemble, "bootstrap count (0 = plain)");
  csi->add_option("--threshold", si.threshold, "coefficient threshold");
  csi->add_option("--seeds", si.seeds, "noise seeds, e.g. 0..9");
  csi->add_option("--out", si.out, "output JSON path");

  ReportCmd re;
  CLI::App* cre = app.add_subcommand("report", "markdown summary with plotting sidecars");
  cre->add_option("--sweep", re.sweep_path, "sweep JSON path")->required();
  cre->add_option("--sindy", re.sindy_path, "optional sindy JSON to include");
  cre->add_option("--out", re.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (cg->parsed()) return run_generate(gen);
    if (cn->parsed()) return run_noise_table(noise);
    if (cgr->parsed()) return run_gradcheck(grad);
    if (ct->parsed()) return run_train(tr);
    if (cs->parsed()) return run_sweep(sw);
    if (cv->parsed()) return run_validate(va);
    if (cse->parsed()) return run_select(se);
    if (csi->parsed()) return run_sindy(si);
    if (cre->parsed()) return run_report(re);
    std::cerr << "no subcommand\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
