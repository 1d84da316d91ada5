#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "minaction/io.hpp"
#include "minaction/orbit.hpp"

using namespace minaction;
namespace fs = std::filesystem;

namespace {

std::uint64_t bits(double x) {
  std::uint64_t u = 0;
  std::memcpy(&u, &x, sizeof u);
  return u;
}

std::string rc_json(const RunConfig& rc) {
  JsonWriter w;
  emit_run_config(w, rc);
  return w.str();
}

fs::path fresh_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("minaction_io_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Dataset tiny_dataset(std::uint64_t seed) {
  OrbitGenConfig cfg;
  cfg.seed = seed;
  cfg.n_orbits = 3;
  cfg.periods = 1.0;
  cfg.dt_obs = 0.2;
  cfg.dt_sim = 1e-2;
  return generate_dataset(cfg);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MINACTION_CLI_PATH) + " " + args +
                          " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("format_double round-trips every bit pattern it prints") {
  const double cases[] = {0.0,
                          -0.0,
                          1.0,
                          -2.5,
                          1.0 / 3.0,
                          0.1,
                          1e-300,
                          1e300,
                          5e-324,
                          std::numeric_limits<double>::max(),
                          std::numeric_limits<double>::min(),
                          3.0184234190828471};
  for (double x : cases) {
    CAPTURE(x);
    const std::string s = format_double(x);
    const double back = std::strtod(s.c_str(), nullptr);
    CHECK(bits(back) == bits(x));
  }
  CHECK(format_double(0.0) == "0");
  CHECK(format_double(-0.0) == "-0");
  CHECK(format_double(1.0) == "1");
}

TEST_CASE("json_escape emits standard escapes and passes UTF-8 through") {
  CHECK(json_escape("plain text_09") == "plain text_09");
  CHECK(json_escape("a\"b") == "a\\\"b");
  CHECK(json_escape("a\\b") == "a\\\\b");
  CHECK(json_escape("\n\t\r\b\f") == "\\n\\t\\r\\b\\f");
  CHECK(json_escape(std::string(1, '\x01')) == "\\u0001");
  CHECK(json_escape(std::string(1, '\x1f')) == "\\u001f");
  CHECK(json_escape("\xcf\x80") == "\xcf\x80");  // two-byte UTF-8 untouched
}

TEST_CASE("JsonWriter output depends only on the call sequence") {
  JsonWriter w;
  w.begin_object();
  w.key("a").value(1.5);
  w.key("b").value("x\"y");
  w.key("c").begin_array().value(1).null_value().end_array();
  w.key("d").begin_object().end_object();
  w.key("nan").value(std::numeric_limits<double>::quiet_NaN());
  w.key("inf").value(std::numeric_limits<double>::infinity());
  w.key("flag").value(true);
  w.end_object();
  CHECK(w.str() ==
        "{\"a\":1.5,\"b\":\"x\\\"y\",\"c\":[1,null],\"d\":{},"
        "\"nan\":null,\"inf\":null,\"flag\":true}");
}

TEST_CASE("dataset json round-trip is bit-exact") {
  Dataset data = tiny_dataset(7);
  const std::string s1 = dataset_to_json(data);
  Dataset back = dataset_from_json_text(s1, "t");
  CHECK(dataset_to_json(back) == s1);

  CHECK(back.n_train == data.n_train);
  CHECK(back.n_val == data.n_val);
  CHECK(back.n_test == data.n_test);
  CHECK(back.config.seed == data.config.seed);
  CHECK(bits(back.sigma_pos) == bits(data.sigma_pos));
  REQUIRE(back.orbits.size() == data.orbits.size());
  for (size_t k = 0; k < data.orbits.size(); ++k) {
    const Trajectory& a = data.orbits[k];
    const Trajectory& b = back.orbits[k];
    REQUIRE(b.n() == a.n());
    CHECK(bits(b.a) == bits(a.a));
    CHECK(bits(b.e) == bits(a.e));
    for (Eigen::Index j = 0; j < a.n(); ++j) {
      CHECK(bits(b.times[j]) == bits(a.times[j]));
      CHECK(bits(b.noisy_pos(j, 0)) == bits(a.noisy_pos(j, 0)));
      CHECK(bits(b.clean_pos(j, 1)) == bits(a.clean_pos(j, 1)));
      CHECK(bits(b.vel(j, 0)) == bits(a.vel(j, 0)));
    }
  }

  SUBCASE("save and load through a nested path") {
    const fs::path dir = fresh_dir("dataset");
    const fs::path file = dir / "deep" / "nested" / "data.json";
    save_dataset(data, file);
    REQUIRE(fs::exists(file));
    Dataset loaded = load_dataset(file);
    CHECK(dataset_to_json(loaded) == s1);
    fs::remove_all(dir);
  }

  SUBCASE("unknown keys fail loudly") {
    const std::string broken =
        "{\"config\":{\"bogus\":1},\"sigma_pos\":0,\"orbits\":[]}";
    CHECK_THROWS_WITH_AS(dataset_from_json_text(broken, "t"),
                         doctest::Contains("unknown key 'bogus'"),
                         std::runtime_error);
  }
}

TEST_CASE("model json round-trip preserves logits, couplings, and terms") {
  RunConfig rc = make_preset("kepler-default");
  rc.train.library = BasisLibrary::expanded();
  BasisLibrary lib = rc.train.library;

  BasisModel model;
  model.library = lib;
  model.logits = Eigen::VectorXd::Zero(lib.size());
  model.thetas = Eigen::VectorXd::Zero(lib.size());
  for (int i = 0; i < lib.size(); ++i) {
    model.logits[i] = std::sin(1.0 + i) * 7.123456789012345;
    model.thetas[i] = std::cos(2.0 + i) * 0.987654321098765;
  }
  model.tau = 0.0731;

  const std::string s1 = model_to_json(model, rc);
  BasisModel back = model_from_json_text(s1, "t");
  CHECK(model_to_json(back, rc) == s1);

  REQUIRE(back.library.size() == lib.size());
  for (int i = 0; i < lib.size(); ++i) {
    CHECK(back.library.terms[i].kind == lib.terms[i].kind);
    CHECK(bits(back.library.terms[i].exponent) == bits(lib.terms[i].exponent));
    CHECK(bits(back.logits[i]) == bits(model.logits[i]));
    CHECK(bits(back.thetas[i]) == bits(model.thetas[i]));
  }
  CHECK(bits(back.tau) == bits(model.tau));
  CHECK(s1.find("log") != std::string::npos);  // expanded library carries the log term
}

TEST_CASE("sweep json round-trip rebuilds entries, logs, and the verdict") {
  RunConfig rc = make_preset("kepler-default");
  BasisLibrary lib = BasisLibrary::standard();
  const int K = lib.size();

  auto entry = [&](std::uint64_t seed, int dominant, double sigma) {
    SweepEntry e;
    e.seed = seed;
    e.model.library = lib;
    e.model.logits = Eigen::VectorXd::LinSpaced(K, -1.5, 2.5 + 0.01 * seed);
    e.model.thetas = Eigen::VectorXd::Constant(K, 0.93 + 0.001 * seed);
    e.model.tau = 0.05;
    e.milestones.onset = 130 + static_cast<int>(seed);
    e.milestones.frozen = 170 + static_cast<int>(seed);
    e.milestones.span = 40;
    e.milestones.growth = 1.137;
    for (int ep = 0; ep < 2; ++ep) {
      EpochRecord r;
      r.epoch = ep;
      r.loss.traj = 0.5 / (ep + 1);
      r.loss.accel = 0.25;
      r.loss.sym = 0.125;
      r.loss.comp = 0.0625;
      r.loss.arch = 0.03125;
      r.loss.total = r.loss.traj + r.loss.accel;
      r.loss.alpha_E = 0.01 * (ep + 1);
      r.gates = Eigen::VectorXd::Constant(K, 1.0 / K);
      r.selectivity = 1.0 + ep;
      r.concentration = 0.2 + 0.1 * ep;
      r.tau = 1.0 - 0.1 * ep;
      r.clamps = 3 * ep;
      e.log.push_back(r);
    }
    e.dominant = dominant;
    e.selectivity = 5000.0 + seed;
    e.concentration = 0.999;
    e.clamp_total = 12;
    e.theta_opt = sigma > 0 ? std::optional<double>(0.941) : std::nullopt;
    e.kepler_p = sigma > 0 ? std::optional<double>(3.004) : std::nullopt;
    e.sigma_h = sigma > 0 ? std::optional<double>(sigma) : std::nullopt;
    e.rollout_diverged = (sigma <= 0);
    return e;
  };

  SweepResult res;
  res.entries.push_back(entry(0, 0, 0.0065));
  res.entries.push_back(entry(1, 0, 0.0049));
  res.entries.push_back(entry(2, 2, -1.0));  // undiagnosed seed: no optionals
  res.verdict.decided = true;
  res.verdict.basis = 0;
  res.verdict.basis_name = lib.terms[0].name();
  res.verdict.margin = 11.99;

  const std::string s1 = sweep_to_json(res, rc);
  LoadedSweep back = sweep_from_json_text(s1, "t");
  CHECK(sweep_to_json(back.result, back.config) == s1);

  REQUIRE(back.result.entries.size() == 3);
  const SweepEntry& b0 = back.result.entries[0];
  const SweepEntry& src = res.entries[0];
  CHECK(b0.seed == 0);
  CHECK(b0.dominant == 0);
  for (int i = 0; i < K; ++i) {
    CHECK(bits(b0.model.logits[i]) == bits(src.model.logits[i]));
    CHECK(bits(b0.model.thetas[i]) == bits(src.model.thetas[i]));
  }
  CHECK(b0.milestones.onset == src.milestones.onset);
  CHECK(b0.milestones.span == src.milestones.span);
  REQUIRE(b0.log.size() == 2);
  CHECK(b0.log[1].epoch == 1);
  CHECK(bits(b0.log[1].loss.traj) == bits(src.log[1].loss.traj));
  CHECK(bits(b0.log[1].tau) == bits(src.log[1].tau));
  CHECK(b0.log[1].clamps == 3);
  REQUIRE(b0.log[1].gates.size() == K);
  CHECK(bits(b0.log[1].gates[K - 1]) == bits(1.0 / K));
  REQUIRE(b0.theta_opt.has_value());
  CHECK(bits(*b0.theta_opt) == bits(0.941));
  REQUIRE(b0.sigma_h.has_value());
  CHECK(bits(*b0.sigma_h) == bits(0.0065));
  CHECK_FALSE(b0.rollout_diverged);

  const SweepEntry& b2 = back.result.entries[2];
  CHECK(b2.dominant == 2);
  CHECK_FALSE(b2.theta_opt.has_value());
  CHECK_FALSE(b2.kepler_p.has_value());
  CHECK_FALSE(b2.sigma_h.has_value());
  CHECK(b2.rollout_diverged);

  CHECK(back.result.verdict.decided);
  CHECK(back.result.verdict.basis == 0);
  CHECK(bits(back.result.verdict.margin) == bits(11.99));
}

TEST_CASE("sindy report round-trip keeps coefficients and misses") {
  RunConfig rc = make_preset("kepler-default");
  BasisLibrary lib = BasisLibrary::standard();

  SindyReport rep;
  rep.stride = 10;
  rep.n_boot = 40;
  rep.threshold = 0.05;
  rep.correct_index = 0;

  SindyRun hit;
  hit.seed = 3;
  hit.identified = 0;
  hit.coefficients = Eigen::VectorXd::Zero(lib.size());
  hit.coefficients[0] = 1.0423456789;
  hit.n_points = 1234;
  hit.wall_ms = 8.5;
  rep.runs.push_back(hit);

  SindyRun miss;
  miss.seed = 4;
  miss.identified = -1;  // thresholding emptied the support
  miss.coefficients = Eigen::VectorXd::Zero(lib.size());
  miss.n_points = 1234;
  miss.wall_ms = 7.25;
  rep.runs.push_back(miss);

  const std::string s1 = sindy_to_json(rep, lib, rc);
  SindyReport back = sindy_from_json_text(s1, "t");
  CHECK(sindy_to_json(back, lib, rc) == s1);

  CHECK(back.stride == 10);
  CHECK(back.n_boot == 40);
  CHECK(back.correct_index == 0);
  REQUIRE(back.runs.size() == 2);
  CHECK(back.runs[0].identified == 0);
  CHECK(bits(back.runs[0].coefficients[0]) == bits(1.0423456789));
  CHECK(back.runs[0].n_points == 1234);
  CHECK(back.runs[1].identified == -1);
  CHECK(back.runs[1].coefficients.norm() == 0.0);
}

TEST_CASE("run configs start from a preset and overlay recognized keys") {
  SUBCASE("empty document equals the default preset") {
    RunConfig rc = run_config_from_json_text("{}", "t");
    CHECK(rc_json(rc) == rc_json(make_preset("kepler-default")));
  }

  SUBCASE("named preset selects the other system") {
    RunConfig rc = run_config_from_json_text("{\"preset\":\"hooke-default\"}", "t");
    CHECK(rc_json(rc) == rc_json(make_preset("hooke-default")));
    CHECK(rc.data.law.kind == LawKind::Hooke);
  }

  SUBCASE("nested keys overlay without disturbing siblings") {
    RunConfig base = make_preset("kepler-default");
    RunConfig rc = run_config_from_json_text(
        "{\"seed\":99,"
        "\"data\":{\"seed\":7,\"n_orbits\":4},"
        "\"train\":{\"theta_lr\":0.004,\"adam\":{\"lr\":0.002}}}",
        "t");
    CHECK(rc.seed == 99);
    CHECK(rc.data.seed == 7);
    CHECK(rc.data.n_orbits == 4);
    CHECK(rc.data.a_min == base.data.a_min);
    REQUIRE(rc.train.theta_lr.has_value());
    CHECK(*rc.train.theta_lr == 0.004);
    CHECK(rc.train.adam.lr == 0.002);
    CHECK(rc.train.schedule.total_epochs == base.train.schedule.total_epochs);
  }

  SUBCASE("null clears the per-coupling learning rate") {
    RunConfig rc =
        run_config_from_json_text("{\"train\":{\"theta_lr\":null}}", "t");
    CHECK_FALSE(rc.train.theta_lr.has_value());
  }

  SUBCASE("sweep and sindy sections") {
    RunConfig rc = run_config_from_json_text(
        "{\"sweep\":{\"seeds\":[3,1,2],\"jobs\":4},"
        "\"sindy\":{\"stride\":7,\"n_boot\":9,\"threshold\":0.1,\"seeds\":[5]}}",
        "t");
    REQUIRE(rc.sweep.seeds.size() == 3);
    CHECK(rc.sweep.seeds[0] == 3);
    CHECK(rc.sweep.jobs == 4);
    CHECK(rc.sindy.stride == 7);
    CHECK(rc.sindy.n_boot == 9);
    CHECK(rc.sindy.threshold == 0.1);
    REQUIRE(rc.sindy.seeds.size() == 1);
    CHECK(rc.sindy.seeds[0] == 5);
  }

  SUBCASE("unknown keys are rejected at every level") {
    CHECK_THROWS_WITH_AS(run_config_from_json_text("{\"bogus\":1}", "t"),
                         doctest::Contains("unknown key 'bogus'"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(
        run_config_from_json_text("{\"train\":{\"lr\":0.1}}", "t"),
        doctest::Contains("unknown key 'lr'"), std::runtime_error);
    CHECK_THROWS_WITH_AS(
        run_config_from_json_text("{\"sweep\":{\"seedz\":[1]}}", "t"),
        doctest::Contains("unknown key 'seedz'"), std::runtime_error);
  }

  SUBCASE("unknown preset names are rejected") {
    CHECK_THROWS_AS(run_config_from_json_text("{\"preset\":\"nope\"}", "t"),
                    std::runtime_error);
  }

  SUBCASE("malformed documents are rejected") {
    CHECK_THROWS_AS(run_config_from_json_text("{", "t"), std::runtime_error);
    CHECK_THROWS_AS(run_config_from_json_text("[]", "t"), std::runtime_error);
    CHECK_THROWS_AS(run_config_from_json_text("{\"seed\":\"abc\"}", "t"),
                    std::runtime_error);
  }
}

TEST_CASE("write_file_atomic replaces content and leaves no temp files") {
  const fs::path dir = fresh_dir("atomic");
  const fs::path file = dir / "sub" / "out.txt";

  write_file_atomic(file, "one");
  CHECK(read_text_file(file) == "one");
  write_file_atomic(file, "two");
  CHECK(read_text_file(file) == "two");

  int n_entries = 0;
  for (const auto& e : fs::directory_iterator(file.parent_path())) {
    (void)e;
    ++n_entries;
  }
  CHECK(n_entries == 1);
  fs::remove_all(dir);
}

TEST_CASE("cli maps bad input to nonzero exit codes") {
  const fs::path dir = fresh_dir("cli");

  SUBCASE("usage errors") {
    CHECK(run_cli("") != 0);
    CHECK(run_cli("frobnicate") != 0);
    CHECK(run_cli("validate") != 0);  // missing required --model/--data
  }

  SUBCASE("config validation errors") {
    const fs::path bad = dir / "bad.json";
    write_file_atomic(bad, "{\"train\":{\"bogus\":1}}");
    CHECK(run_cli("train --config " + bad.string() + " --out " +
                  (dir / "out").string()) != 0);
  }

  SUBCASE("generate writes a loadable dataset and exits zero") {
    const fs::path out = dir / "data.json";
    const int code = run_cli("generate --n-orbits 3 --periods 1 --dt-obs 0.2 "
                             "--seed 5 --out " +
                             out.string());
    CHECK(code == 0);
    REQUIRE(fs::exists(out));
    Dataset d = load_dataset(out);
    CHECK(d.config.n_orbits == 3);
    CHECK(d.orbits.size() == 3);
  }

  fs::remove_all(dir);
}
