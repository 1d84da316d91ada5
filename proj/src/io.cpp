#include "minaction/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace minaction {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw std::runtime_error(where + ": " + what);
}

json parse(std::string_view text, const std::string& where) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    fail(where, e.what());
  }
}

void check_keys(const json& o, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!o.is_object()) fail(where, "expected a JSON object");
  for (const auto& item : o.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        known = true;
        break;
      }
    if (!known) fail(where, "unknown key '" + item.key() + "'");
  }
}

const json& member(const json& o, const char* k, const std::string& where) {
  auto it = o.find(k);
  if (it == o.end()) fail(where, std::string("missing key '") + k + "'");
  return *it;
}

// Present-and-non-null lookup; absent and null both mean "keep the default".
const json* find(const json& o, const char* k) {
  auto it = o.find(k);
  if (it == o.end() || it->is_null()) return nullptr;
  return &*it;
}

double as_double(const json& v, const std::string& where) {
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!v.is_number()) fail(where, "expected a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& where) {
  if (!v.is_number_integer()) fail(where, "expected an integer");
  return v.get<int>();
}

long long as_int64(const json& v, const std::string& where) {
  if (!v.is_number_integer()) fail(where, "expected an integer");
  return v.get<long long>();
}

std::uint64_t as_u64(const json& v, const std::string& where) {
  if (!(v.is_number_integer() || v.is_number_unsigned())) fail(where, "expected an integer");
  if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
    fail(where, "expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

bool as_bool(const json& v, const std::string& where) {
  if (!v.is_boolean()) fail(where, "expected a boolean");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& where) {
  if (!v.is_string()) fail(where, "expected a string");
  return v.get<std::string>();
}

Eigen::VectorXd as_vector(const json& v, const std::string& where) {
  if (!v.is_array()) fail(where, "expected an array of numbers");
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = as_double(v[i], where);
  return out;
}

Series2 as_series(const json& v, const std::string& where) {
  if (!v.is_array()) fail(where, "expected an array of [x, y] pairs");
  Series2 out(static_cast<Eigen::Index>(v.size()), 2);
  for (size_t i = 0; i < v.size(); ++i) {
    const json& row = v[i];
    if (!row.is_array() || row.size() != 2) fail(where, "expected [x, y] pairs");
    out(static_cast<Eigen::Index>(i), 0) = as_double(row[0], where);
    out(static_cast<Eigen::Index>(i), 1) = as_double(row[1], where);
  }
  return out;
}

void get(const json& o, const char* k, double& out, const std::string& where) {
  if (const json* v = find(o, k)) out = as_double(*v, where + "." + k);
}
void get(const json& o, const char* k, int& out, const std::string& where) {
  if (const json* v = find(o, k)) out = as_int(*v, where + "." + k);
}
void get(const json& o, const char* k, bool& out, const std::string& where) {
  if (const json* v = find(o, k)) out = as_bool(*v, where + "." + k);
}
void get(const json& o, const char* k, std::uint64_t& out, const std::string& where) {
  if (const json* v = find(o, k)) out = as_u64(*v, where + "." + k);
}

void emit_vector(JsonWriter& w, const Eigen::VectorXd& v) {
  w.begin_array();
  for (Eigen::Index i = 0; i < v.size(); ++i) w.value(v[i]);
  w.end_array();
}

void emit_series(JsonWriter& w, const Series2& s) {
  w.begin_array();
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    w.begin_array();
    w.value(s(i, 0));
    w.value(s(i, 1));
    w.end_array();
  }
  w.end_array();
}

void emit_optional(JsonWriter& w, const std::optional<double>& v) {
  if (v)
    w.value(*v);
  else
    w.null_value();
}

void emit_optional(JsonWriter& w, const std::optional<int>& v) {
  if (v)
    w.value(*v);
  else
    w.null_value();
}

LawKind law_from_name(const std::string& name, const std::string& where) {
  if (name == "kepler") return LawKind::Kepler;
  if (name == "hooke") return LawKind::Hooke;
  fail(where, "unknown system '" + name + "' (expected kepler or hooke)");
}

void emit_library(JsonWriter& w, const BasisLibrary& lib) {
  const std::string name = library_name(lib);
  if (name != "custom") {
    w.value(name);
    return;
  }
  w.begin_array();
  for (const BasisTerm& t : lib.terms) {
    w.begin_object();
    w.key("kind").value(t.kind == BasisTerm::Kind::Log ? "log" : "power");
    w.key("exponent").value(t.exponent);
    w.end_object();
  }
  w.end_array();
}

BasisLibrary parse_library(const json& v, const std::string& where) {
  if (v.is_string()) {
    try {
      return library_by_name(v.get<std::string>());
    } catch (const std::invalid_argument& e) {
      fail(where, e.what());
    }
  }
  if (!v.is_array()) fail(where, "expected a library name or an array of terms");
  BasisLibrary lib;
  for (size_t i = 0; i < v.size(); ++i) {
    const json& el = v[i];
    check_keys(el, {"kind", "exponent"}, where);
    BasisTerm t;
    const std::string kind = as_string(member(el, "kind", where), where + ".kind");
    if (kind == "power")
      t.kind = BasisTerm::Kind::Power;
    else if (kind == "log")
      t.kind = BasisTerm::Kind::Log;
    else
      fail(where, "unknown term kind '" + kind + "' (expected power or log)");
    if (t.kind == BasisTerm::Kind::Power)
      t.exponent = as_double(member(el, "exponent", where), where + ".exponent");
    lib.terms.push_back(t);
  }
  if (lib.terms.empty()) fail(where, "library has no terms");
  return lib;
}

void overlay_orbit_config(OrbitGenConfig& c, const json& o, const std::string& where,
                          bool* had_seed) {
  check_keys(o,
             {"system", "coupling", "n_orbits", "a_min", "a_max", "e_min", "e_max",
              "dt_sim", "dt_obs", "periods", "noise_fraction", "seed", "orbit_seed",
              "noise_seed", "r_floor"},
             where);
  if (const json* v = find(o, "system"))
    c.law.kind = law_from_name(as_string(*v, where + ".system"), where + ".system");
  get(o, "coupling", c.law.coupling, where);
  get(o, "n_orbits", c.n_orbits, where);
  get(o, "a_min", c.a_min, where);
  get(o, "a_max", c.a_max, where);
  get(o, "e_min", c.e_min, where);
  get(o, "e_max", c.e_max, where);
  get(o, "dt_sim", c.dt_sim, where);
  get(o, "dt_obs", c.dt_obs, where);
  get(o, "periods", c.periods, where);
  get(o, "noise_fraction", c.noise_fraction, where);
  if (const json* v = find(o, "seed")) {
    c.seed = as_u64(*v, where + ".seed");
    if (had_seed) *had_seed = true;
  }
  if (const json* v = find(o, "orbit_seed")) c.orbit_seed = as_u64(*v, where + ".orbit_seed");
  if (const json* v = find(o, "noise_seed")) c.noise_seed = as_u64(*v, where + ".noise_seed");
  get(o, "r_floor", c.r_floor, where);
}

void emit_schedule(JsonWriter& w, const Schedule& s) {
  w.begin_object();
  w.key("warmup_epochs").value(s.warmup_epochs);
  w.key("total_epochs").value(s.total_epochs);
  w.key("alpha_I").value(s.alpha_I);
  w.key("alpha_E_start").value(s.alpha_E_start);
  w.key("alpha_E_end").value(s.alpha_E_end);
  w.key("tau_start").value(s.tau_start);
  w.key("tau_end").value(s.tau_end);
  w.end_object();
}

void overlay_schedule(Schedule& s, const json& o, const std::string& where) {
  check_keys(o,
             {"warmup_epochs", "total_epochs", "alpha_I", "alpha_E_start",
              "alpha_E_end", "tau_start", "tau_end"},
             where);
  get(o, "warmup_epochs", s.warmup_epochs, where);
  get(o, "total_epochs", s.total_epochs, where);
  get(o, "alpha_I", s.alpha_I, where);
  get(o, "alpha_E_start", s.alpha_E_start, where);
  get(o, "alpha_E_end", s.alpha_E_end, where);
  get(o, "tau_start", s.tau_start, where);
  get(o, "tau_end", s.tau_end, where);
}

void emit_weights(JsonWriter& w, const LossWeights& v) {
  w.begin_object();
  w.key("alpha_I").value(v.alpha_I);
  w.key("lambda_accel").value(v.lambda_accel);
  w.key("lambda_comp").value(v.lambda_comp);
  w.key("lambda_arch").value(v.lambda_arch);
  w.key("alpha_S");
  emit_optional(w, v.alpha_S);
  w.end_object();
}

void overlay_weights(LossWeights& v, const json& o, const std::string& where) {
  check_keys(o, {"alpha_I", "lambda_accel", "lambda_comp", "lambda_arch", "alpha_S"}, where);
  get(o, "alpha_I", v.alpha_I, where);
  get(o, "lambda_accel", v.lambda_accel, where);
  get(o, "lambda_comp", v.lambda_comp, where);
  get(o, "lambda_arch", v.lambda_arch, where);
  if (auto it = o.find("alpha_S"); it != o.end()) {
    if (it->is_null())
      v.alpha_S.reset();
    else
      v.alpha_S = as_double(*it, where + ".alpha_S");
  }
}

void emit_loss_options(JsonWriter& w, const LossOptions& o) {
  w.begin_object();
  w.key("stride").value(o.stride);
  w.key("substeps").value(o.substeps);
  w.key("teacher").value(o.teacher == TeacherVelocity::Clean ? "clean" : "stencil");
  w.key("energy").value(o.energy == EnergyForm::ModelPotential ? "model_potential"
                                                               : "gravity_literal");
  w.key("literal_coupling").value(o.literal_coupling);
  w.key("r_floor").value(o.r_floor);
  w.end_object();
}

void overlay_loss_options(LossOptions& l, const json& o, const std::string& where) {
  check_keys(o, {"stride", "substeps", "teacher", "energy", "literal_coupling", "r_floor"},
             where);
  get(o, "stride", l.stride, where);
  get(o, "substeps", l.substeps, where);
  if (const json* v = find(o, "teacher")) {
    const std::string t = as_string(*v, where + ".teacher");
    if (t == "clean")
      l.teacher = TeacherVelocity::Clean;
    else if (t == "stencil")
      l.teacher = TeacherVelocity::WideStencil;
    else
      fail(where, "unknown teacher '" + t + "' (expected clean or stencil)");
  }
  if (const json* v = find(o, "energy")) {
    const std::string e = as_string(*v, where + ".energy");
    if (e == "model_potential")
      l.energy = EnergyForm::ModelPotential;
    else if (e == "gravity_literal")
      l.energy = EnergyForm::GravityLiteral;
    else
      fail(where, "unknown energy form '" + e + "'");
  }
  get(o, "literal_coupling", l.literal_coupling, where);
  get(o, "r_floor", l.r_floor, where);
}

void emit_adam(JsonWriter& w, const AdamConfig& a) {
  w.begin_object();
  w.key("lr").value(a.lr);
  w.key("beta1").value(a.beta1);
  w.key("beta2").value(a.beta2);
  w.key("eps").value(a.eps);
  w.end_object();
}

void overlay_adam(AdamConfig& a, const json& o, const std::string& where) {
  check_keys(o, {"lr", "beta1", "beta2", "eps"}, where);
  get(o, "lr", a.lr, where);
  get(o, "beta1", a.beta1, where);
  get(o, "beta2", a.beta2, where);
  get(o, "eps", a.eps, where);
}

void emit_train_config(JsonWriter& w, const TrainConfig& t) {
  w.begin_object();
  w.key("library");
  emit_library(w, t.library);
  w.key("schedule");
  emit_schedule(w, t.schedule);
  w.key("weights");
  emit_weights(w, t.weights);
  w.key("loss");
  emit_loss_options(w, t.loss);
  w.key("adam");
  emit_adam(w, t.adam);
  w.key("theta_lr");
  if (t.theta_lr)
    w.value(*t.theta_lr);
  else
    w.null_value();
  w.key("batch_size").value(t.batch_size);
  w.key("shuffle").value(t.shuffle);
  w.key("logit_bias");
  if (t.logit_bias.size() == 0)
    w.null_value();
  else
    emit_vector(w, t.logit_bias);
  w.key("init_logit_halfwidth").value(t.init_logit_halfwidth);
  w.key("init_theta_sigma").value(t.init_theta_sigma);
  w.end_object();
}

void overlay_train_config(TrainConfig& t, const json& o, const std::string& where) {
  check_keys(o,
             {"library", "schedule", "weights", "loss", "adam", "theta_lr",
              "batch_size", "shuffle", "logit_bias", "init_logit_halfwidth",
              "init_theta_sigma"},
             where);
  if (const json* v = find(o, "library")) t.library = parse_library(*v, where + ".library");
  if (const json* v = find(o, "schedule")) overlay_schedule(t.schedule, *v, where + ".schedule");
  if (const json* v = find(o, "weights")) overlay_weights(t.weights, *v, where + ".weights");
  if (const json* v = find(o, "loss")) overlay_loss_options(t.loss, *v, where + ".loss");
  if (const json* v = find(o, "adam")) overlay_adam(t.adam, *v, where + ".adam");
  if (auto it = o.find("theta_lr"); it != o.end()) {
    if (it->is_null())
      t.theta_lr.reset();
    else
      t.theta_lr = as_double(*it, where + ".theta_lr");
  }
  get(o, "batch_size", t.batch_size, where);
  get(o, "shuffle", t.shuffle, where);
  if (auto it = o.find("logit_bias"); it != o.end()) {
    if (it->is_null())
      t.logit_bias.resize(0);
    else
      t.logit_bias = as_vector(*it, where + ".logit_bias");
  }
  get(o, "init_logit_halfwidth", t.init_logit_halfwidth, where);
  get(o, "init_theta_sigma", t.init_theta_sigma, where);
}

std::vector<std::uint64_t> parse_seed_array(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) fail(where, "expected a non-empty array of seeds");
  std::vector<std::uint64_t> out;
  for (size_t i = 0; i < v.size(); ++i) out.push_back(as_u64(v[i], where));
  return out;
}

RunConfig parse_run_config(const json& doc, const std::string& where) {
  check_keys(doc, {"preset", "seed", "data", "train", "sweep", "sindy"}, where);
  std::string preset = "kepler-default";
  if (const json* v = find(doc, "preset")) preset = as_string(*v, where + ".preset");
  RunConfig rc;
  try {
    rc = make_preset(preset);
  } catch (const std::invalid_argument& e) {
    fail(where, e.what());
  }
  if (const json* v = find(doc, "seed")) rc.seed = as_u64(*v, where + ".seed");
  if (const json* v = find(doc, "data"))
    overlay_orbit_config(rc.data, *v, where + ".data", &rc.data_seed_explicit);
  if (const json* v = find(doc, "train")) overlay_train_config(rc.train, *v, where + ".train");
  if (const json* v = find(doc, "sweep")) {
    check_keys(*v, {"seeds", "jobs"}, where + ".sweep");
    if (const json* s = find(*v, "seeds"))
      rc.sweep.seeds = parse_seed_array(*s, where + ".sweep.seeds");
    get(*v, "jobs", rc.sweep.jobs, where + ".sweep");
  }
  if (const json* v = find(doc, "sindy")) {
    check_keys(*v, {"stride", "n_boot", "threshold", "seeds"}, where + ".sindy");
    get(*v, "stride", rc.sindy.stride, where + ".sindy");
    get(*v, "n_boot", rc.sindy.n_boot, where + ".sindy");
    get(*v, "threshold", rc.sindy.threshold, where + ".sindy");
    if (const json* s = find(*v, "seeds"))
      rc.sindy.seeds = parse_seed_array(*s, where + ".sindy.seeds");
  }
  return rc;
}

Milestones parse_milestones(const json& o, const std::string& where) {
  check_keys(o, {"onset", "sparse", "frozen", "span", "growth"}, where);
  Milestones m;
  if (const json* v = find(o, "onset")) m.onset = as_int(*v, where + ".onset");
  if (const json* v = find(o, "sparse")) m.sparse = as_int(*v, where + ".sparse");
  if (const json* v = find(o, "frozen")) m.frozen = as_int(*v, where + ".frozen");
  if (const json* v = find(o, "span")) m.span = as_int(*v, where + ".span");
  if (const json* v = find(o, "growth")) m.growth = as_double(*v, where + ".growth");
  return m;
}

// Selectivity is a max/runner-up ratio, so null can only mean the runner-up
// underflowed.
double selectivity_from(const json& v, const std::string& where) {
  if (v.is_null()) return std::numeric_limits<double>::infinity();
  return as_double(v, where);
}

constexpr const char* kLogColumns[] = {"epoch", "traj",        "accel",
                                       "sym",   "comp",        "arch",
                                       "total", "alpha_E",     "tau",
                                       "selectivity", "concentration", "clamps"};
constexpr int kFixedLogColumns = 12;

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path dir = path.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out.good()) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw std::runtime_error("short write to " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string json_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  return out;
}

void emit_orbit_config(JsonWriter& w, const OrbitGenConfig& c) {
  w.begin_object();
  w.key("system").value(law_name(c.law.kind));
  w.key("coupling").value(c.law.coupling);
  w.key("n_orbits").value(c.n_orbits);
  w.key("a_min").value(c.a_min);
  w.key("a_max").value(c.a_max);
  w.key("e_min").value(c.e_min);
  w.key("e_max").value(c.e_max);
  w.key("dt_sim").value(c.dt_sim);
  w.key("dt_obs").value(c.dt_obs);
  w.key("periods").value(c.periods);
  w.key("noise_fraction").value(c.noise_fraction);
  w.key("seed").value(c.seed);
  w.key("orbit_seed");
  if (c.orbit_seed)
    w.value(*c.orbit_seed);
  else
    w.null_value();
  w.key("noise_seed");
  if (c.noise_seed)
    w.value(*c.noise_seed);
  else
    w.null_value();
  w.key("r_floor").value(c.r_floor);
  w.end_object();
}

void emit_run_config(JsonWriter& w, const RunConfig& rc) {
  w.begin_object();
  w.key("preset").value(rc.preset);
  w.key("seed").value(rc.seed);
  w.key("data");
  emit_orbit_config(w, rc.data);
  w.key("train");
  emit_train_config(w, rc.train);
  w.key("sweep");
  w.begin_object();
  w.key("seeds");
  w.begin_array();
  for (std::uint64_t s : rc.sweep.seeds) w.value(s);
  w.end_array();
  w.key("jobs").value(rc.sweep.jobs);
  w.end_object();
  w.key("sindy");
  w.begin_object();
  w.key("stride").value(rc.sindy.stride);
  w.key("n_boot").value(rc.sindy.n_boot);
  w.key("threshold").value(rc.sindy.threshold);
  w.key("seeds");
  w.begin_array();
  for (std::uint64_t s : rc.sindy.seeds) w.value(s);
  w.end_array();
  w.end_object();
  w.end_object();
}

void emit_milestones(JsonWriter& w, const Milestones& m) {
  w.begin_object();
  w.key("onset");
  emit_optional(w, m.onset);
  w.key("sparse");
  emit_optional(w, m.sparse);
  w.key("frozen");
  emit_optional(w, m.frozen);
  w.key("span");
  emit_optional(w, m.span);
  w.key("growth");
  emit_optional(w, m.growth);
  w.end_object();
}

std::string dataset_to_json(const Dataset& data) {
  JsonWriter w;
  w.begin_object();
  w.key("config");
  OrbitGenConfig cfg = data.config;
  cfg.orbit_seed = cfg.effective_orbit_seed();
  cfg.noise_seed = cfg.effective_noise_seed();
  emit_orbit_config(w, cfg);
  w.key("sigma_pos").value(data.sigma_pos);
  w.key("orbits");
  w.begin_array();
  for (const Trajectory& t : data.orbits) {
    w.newline();
    w.begin_object();
    w.key("a").value(t.a);
    w.key("e").value(t.e);
    w.key("times");
    emit_vector(w, t.times);
    w.key("clean_positions");
    emit_series(w, t.clean_pos);
    w.key("noisy_positions");
    emit_series(w, t.noisy_pos);
    w.key("velocities");
    emit_series(w, t.vel);
    w.end_object();
  }
  w.newline();
  w.end_array();
  w.end_object();
  w.newline();
  return w.str();
}

Dataset dataset_from_json_text(std::string_view text, const std::string& where) {
  const json doc = parse(text, where);
  check_keys(doc, {"config", "sigma_pos", "orbits"}, where);
  Dataset d;
  overlay_orbit_config(d.config, member(doc, "config", where), where + ".config", nullptr);
  d.sigma_pos = as_double(member(doc, "sigma_pos", where), where + ".sigma_pos");
  const json& orbits = member(doc, "orbits", where);
  if (!orbits.is_array() || orbits.empty()) fail(where, "orbits must be a non-empty array");
  for (size_t i = 0; i < orbits.size(); ++i) {
    const std::string ow = where + ".orbits[" + std::to_string(i) + "]";
    const json& o = orbits[i];
    check_keys(o, {"a", "e", "times", "clean_positions", "noisy_positions", "velocities"}, ow);
    Trajectory t;
    t.a = as_double(member(o, "a", ow), ow + ".a");
    t.e = as_double(member(o, "e", ow), ow + ".e");
    t.noise_sigma = d.sigma_pos;
    t.times = as_vector(member(o, "times", ow), ow + ".times");
    t.clean_pos = as_series(member(o, "clean_positions", ow), ow + ".clean_positions");
    t.noisy_pos = as_series(member(o, "noisy_positions", ow), ow + ".noisy_positions");
    t.vel = as_series(member(o, "velocities", ow), ow + ".velocities");
    if (t.times.size() < 2 || t.clean_pos.rows() != t.times.size() ||
        t.noisy_pos.rows() != t.times.size() || t.vel.rows() != t.times.size())
      fail(ow, "series lengths disagree or are too short");
    d.orbits.push_back(std::move(t));
  }
  split_sizes(static_cast<int>(d.orbits.size()), d.n_train, d.n_val, d.n_test);
  return d;
}

Dataset load_dataset(const std::filesystem::path& path) {
  return dataset_from_json_text(read_text_file(path), path.string());
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  write_file_atomic(path, dataset_to_json(data));
}

std::string model_to_json(const BasisModel& model, const RunConfig& rc) {
  JsonWriter w;
  w.begin_object();
  w.key("config");
  emit_run_config(w, rc);
  w.key("library");
  emit_library(w, model.library);
  w.key("logits");
  emit_vector(w, model.logits);
  w.key("thetas");
  emit_vector(w, model.thetas);
  w.key("tau").value(model.tau);
  w.end_object();
  w.newline();
  return w.str();
}

BasisModel model_from_json_text(std::string_view text, const std::string& where) {
  const json doc = parse(text, where);
  check_keys(doc, {"config", "library", "logits", "thetas", "tau"}, where);
  if (const json* v = find(doc, "config")) parse_run_config(*v, where + ".config");
  BasisModel m;
  m.library = parse_library(member(doc, "library", where), where + ".library");
  m.logits = as_vector(member(doc, "logits", where), where + ".logits");
  m.thetas = as_vector(member(doc, "thetas", where), where + ".thetas");
  m.tau = as_double(member(doc, "tau", where), where + ".tau");
  if (m.logits.size() != m.library.size() || m.thetas.size() != m.library.size())
    fail(where, "logits/thetas size does not match the library");
  if (!(m.tau > 0.0)) fail(where, "tau must be positive");
  return m;
}

BasisModel load_model(const std::filesystem::path& path) {
  return model_from_json_text(read_text_file(path), path.string());
}

std::string milestones_to_json(const Milestones& m, const RunConfig& rc) {
  JsonWriter w;
  w.begin_object();
  w.key("config");
  emit_run_config(w, rc);
  w.key("milestones");
  emit_milestones(w, m);
  w.end_object();
  w.newline();
  return w.str();
}

std::string trainlog_csv(const std::vector<EpochRecord>& log) {
  std::string out = "epoch,traj,accel,sym,comp,arch,total,alpha_E,tau\n";
  for (const EpochRecord& r : log) {
    out += std::to_string(r.epoch);
    for (double v : {r.loss.traj, r.loss.accel, r.loss.sym, r.loss.comp, r.loss.arch,
                     r.loss.total, r.loss.alpha_E, r.tau}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

std::string gates_csv(const std::vector<EpochRecord>& log, const BasisLibrary& lib) {
  std::string out = "epoch";
  for (const BasisTerm& t : lib.terms) out += ",gate_" + t.name();
  out += ",selectivity,concentration\n";
  for (const EpochRecord& r : log) {
    out += std::to_string(r.epoch);
    for (Eigen::Index i = 0; i < r.gates.size(); ++i) {
      out += ',';
      out += format_double(r.gates[i]);
    }
    out += ',';
    out += format_double(r.selectivity);
    out += ',';
    out += format_double(r.concentration);
    out += '\n';
  }
  return out;
}

std::string noise_table_csv(const std::vector<NoiseTableRow>& rows) {
  std::string out = "stride,sigma_a_analytic,sigma_a_empirical,signal,snr\n";
  for (const NoiseTableRow& r : rows) {
    out += std::to_string(r.stride);
    for (double v : {r.sigma_analytic, r.sigma_empirical, r.signal, r.snr}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

std::string sweep_to_json(const SweepResult& res, const RunConfig& rc) {
  const BasisLibrary& lib = rc.train.library;
  JsonWriter w;
  w.begin_object();
  w.key("config");
  emit_run_config(w, rc);
  w.key("log_columns");
  w.begin_array();
  for (const char* c : kLogColumns) w.value(c);
  for (const BasisTerm& t : lib.terms) w.value("gate_" + t.name());
  w.end_array();
  w.key("entries");
  w.begin_array();
  for (const SweepEntry& e : res.entries) {
    w.newline();
    w.begin_object();
    w.key("seed").value(e.seed);
    w.key("dominant").value(e.dominant);
    w.key("dominant_name");
    if (e.dominant >= 0)
      w.value(lib.terms[e.dominant].name());
    else
      w.null_value();
    w.key("selectivity").value(e.selectivity);
    w.key("concentration").value(e.concentration);
    w.key("clamp_total").value(static_cast<long long>(e.clamp_total));
    w.key("rollout_diverged").value(e.rollout_diverged);
    w.key("theta_opt");
    emit_optional(w, e.theta_opt);
    w.key("kepler_p");
    emit_optional(w, e.kepler_p);
    w.key("sigma_h");
    emit_optional(w, e.sigma_h);
    w.key("milestones");
    emit_milestones(w, e.milestones);
    w.key("logits");
    emit_vector(w, e.model.logits);
    w.key("thetas");
    emit_vector(w, e.model.thetas);
    w.key("tau").value(e.model.tau);
    w.key("log");
    w.begin_array();
    for (const EpochRecord& r : e.log) {
      w.newline();
      w.begin_array();
      w.value(r.epoch);
      w.value(r.loss.traj);
      w.value(r.loss.accel);
      w.value(r.loss.sym);
      w.value(r.loss.comp);
      w.value(r.loss.arch);
      w.value(r.loss.total);
      w.value(r.loss.alpha_E);
      w.value(r.tau);
      w.value(r.selectivity);
      w.value(r.concentration);
      w.value(static_cast<long long>(r.clamps));
      for (Eigen::Index i = 0; i < r.gates.size(); ++i) w.value(r.gates[i]);
      w.end_array();
    }
    w.newline();
    w.end_array();
    w.end_object();
  }
  w.newline();
  w.end_array();
  w.key("verdict");
  w.begin_object();
  w.key("decided").value(res.verdict.decided);
  w.key("basis").value(res.verdict.basis);
  w.key("basis_name");
  if (res.verdict.decided)
    w.value(res.verdict.basis_name);
  else
    w.null_value();
  w.key("margin").value(res.verdict.margin);
  w.end_object();
  w.end_object();
  w.newline();
  return w.str();
}

LoadedSweep sweep_from_json_text(std::string_view text, const std::string& where) {
  const json doc = parse(text, where);
  check_keys(doc, {"config", "log_columns", "entries", "verdict"}, where);
  LoadedSweep out;
  out.config = parse_run_config(member(doc, "config", where), where + ".config");
  const BasisLibrary& lib = out.config.train.library;
  const int k = lib.size();

  const json& entries = member(doc, "entries", where);
  if (!entries.is_array()) fail(where, "entries must be an array");
  for (size_t i = 0; i < entries.size(); ++i) {
    const std::string ew = where + ".entries[" + std::to_string(i) + "]";
    const json& o = entries[i];
    check_keys(o,
               {"seed", "dominant", "dominant_name", "selectivity", "concentration",
                "clamp_total", "rollout_diverged", "theta_opt", "kepler_p", "sigma_h",
                "milestones", "logits", "thetas", "tau", "log"},
               ew);
    SweepEntry e;
    e.seed = as_u64(member(o, "seed", ew), ew + ".seed");
    e.dominant = as_int(member(o, "dominant", ew), ew + ".dominant");
    e.selectivity = selectivity_from(member(o, "selectivity", ew), ew + ".selectivity");
    e.concentration = as_double(member(o, "concentration", ew), ew + ".concentration");
    e.clamp_total = as_int64(member(o, "clamp_total", ew), ew + ".clamp_total");
    e.rollout_diverged = as_bool(member(o, "rollout_diverged", ew), ew + ".rollout_diverged");
    if (const json* v = find(o, "theta_opt")) e.theta_opt = as_double(*v, ew + ".theta_opt");
    if (const json* v = find(o, "kepler_p")) e.kepler_p = as_double(*v, ew + ".kepler_p");
    if (const json* v = find(o, "sigma_h")) e.sigma_h = as_double(*v, ew + ".sigma_h");
    e.milestones = parse_milestones(member(o, "milestones", ew), ew + ".milestones");
    e.model.library = lib;
    e.model.logits = as_vector(member(o, "logits", ew), ew + ".logits");
    e.model.thetas = as_vector(member(o, "thetas", ew), ew + ".thetas");
    e.model.tau = as_double(member(o, "tau", ew), ew + ".tau");
    if (e.model.logits.size() != k || e.model.thetas.size() != k)
      fail(ew, "logits/thetas size does not match the library");

    const json& rows = member(o, "log", ew);
    if (!rows.is_array()) fail(ew, "log must be an array of rows");
    for (size_t j = 0; j < rows.size(); ++j) {
      const std::string rw = ew + ".log[" + std::to_string(j) + "]";
      const json& row = rows[j];
      if (!row.is_array() || static_cast<int>(row.size()) != kFixedLogColumns + k)
        fail(rw, "expected " + std::to_string(kFixedLogColumns + k) + " columns");
      EpochRecord rec;
      rec.epoch = as_int(row[0], rw);
      rec.loss.traj = as_double(row[1], rw);
      rec.loss.accel = as_double(row[2], rw);
      rec.loss.sym = as_double(row[3], rw);
      rec.loss.comp = as_double(row[4], rw);
      rec.loss.arch = as_double(row[5], rw);
      rec.loss.total = as_double(row[6], rw);
      rec.loss.alpha_E = as_double(row[7], rw);
      rec.loss.alpha_I = out.config.train.weights.alpha_I;
      rec.loss.alpha_S = out.config.train.weights.alpha_S.value_or(rec.loss.alpha_E);
      rec.loss.lambda_accel = out.config.train.weights.lambda_accel;
      rec.loss.lambda_comp = out.config.train.weights.lambda_comp;
      rec.loss.lambda_arch = out.config.train.weights.lambda_arch;
      rec.tau = as_double(row[8], rw);
      rec.selectivity = selectivity_from(row[9], rw);
      rec.concentration = as_double(row[10], rw);
      rec.clamps = as_int64(row[11], rw);
      rec.gates.resize(k);
      for (int g = 0; g < k; ++g) rec.gates[g] = as_double(row[kFixedLogColumns + g], rw);
      e.log.push_back(std::move(rec));
    }
    out.result.entries.push_back(std::move(e));
  }

  const json& v = member(doc, "verdict", where);
  check_keys(v, {"decided", "basis", "basis_name", "margin"}, where + ".verdict");
  out.result.verdict.decided = as_bool(member(v, "decided", where), where + ".verdict.decided");
  out.result.verdict.basis = as_int(member(v, "basis", where), where + ".verdict.basis");
  if (const json* n = find(v, "basis_name"))
    out.result.verdict.basis_name = as_string(*n, where + ".verdict.basis_name");
  out.result.verdict.margin =
      selectivity_from(member(v, "margin", where), where + ".verdict.margin");
  return out;
}

LoadedSweep load_sweep(const std::filesystem::path& path) {
  return sweep_from_json_text(read_text_file(path), path.string());
}

std::string validate_to_json(const ValidateReport& rep, const RunConfig& rc) {
  JsonWriter w;
  w.begin_object();
  w.key("config");
  emit_run_config(w, rc);
  w.key("dominant").value(rep.dominant);
  w.key("dominant_name");
  if (rep.dominant >= 0)
    w.value(rep.dominant_name);
  else
    w.null_value();
  w.key("selectivity").value(rep.selectivity);
  w.key("theta_opt");
  emit_optional(w, rep.theta_opt);
  w.key("p");
  emit_optional(w, rep.kepler_p);
  w.key("C").value(rep.concentration);
  w.key("sigma_H");
  emit_optional(w, rep.sigma_h);
  w.key("rollout_diverged").value(rep.rollout_diverged);
  w.end_object();
  w.newline();
  return w.str();
}

std::string sindy_to_json(const SindyReport& rep, const BasisLibrary& lib,
                          const RunConfig& rc) {
  JsonWriter w;
  w.begin_object();
  w.key("config");
  emit_run_config(w, rc);
  w.key("stride").value(rep.stride);
  w.key("ensemble").value(rep.n_boot);
  w.key("threshold").value(rep.threshold);
  w.key("correct_index").value(rep.correct_index);
  w.key("correct_name");
  if (rep.correct_index >= 0)
    w.value(lib.terms[rep.correct_index].name());
  else
    w.null_value();
  w.key("runs");
  w.begin_array();
  for (const SindyRun& r : rep.runs) {
    w.newline();
    w.begin_object();
    w.key("seed").value(r.seed);
    w.key("identified").value(r.identified);
    w.key("identified_name");
    if (r.identified >= 0)
      w.value(lib.terms[r.identified].name());
    else
      w.null_value();
    w.key("coefficients");
    emit_vector(w, r.coefficients);
    w.key("n_points").value(r.n_points);
    w.key("wall_ms").value(r.wall_ms);
    w.end_object();
  }
  w.newline();
  w.end_array();

  int n_correct = 0;
  double coef_min = 0.0, coef_max = 0.0, wall_sum = 0.0, wall_max = 0.0;
  bool have_coef = false;
  for (const SindyRun& r : rep.runs) {
    wall_sum += r.wall_ms;
    wall_max = std::max(wall_max, r.wall_ms);
    if (rep.correct_index >= 0 && r.identified == rep.correct_index) {
      ++n_correct;
      const double c = r.coefficients[rep.correct_index];
      coef_min = have_coef ? std::min(coef_min, c) : c;
      coef_max = have_coef ? std::max(coef_max, c) : c;
      have_coef = true;
    }
  }
  w.key("summary");
  w.begin_object();
  w.key("n_runs").value(static_cast<int>(rep.runs.size()));
  w.key("n_correct").value(n_correct);
  w.key("coef_min");
  if (have_coef)
    w.value(coef_min);
  else
    w.null_value();
  w.key("coef_max");
  if (have_coef)
    w.value(coef_max);
  else
    w.null_value();
  w.key("mean_wall_ms").value(rep.runs.empty() ? 0.0 : wall_sum / rep.runs.size());
  w.key("max_wall_ms").value(wall_max);
  w.end_object();
  w.end_object();
  w.newline();
  return w.str();
}

SindyReport sindy_from_json_text(std::string_view text, const std::string& where) {
  const json doc = parse(text, where);
  check_keys(doc,
             {"config", "stride", "ensemble", "threshold", "correct_index",
              "correct_name", "runs", "summary"},
             where);
  SindyReport rep;
  rep.stride = as_int(member(doc, "stride", where), where + ".stride");
  rep.n_boot = as_int(member(doc, "ensemble", where), where + ".ensemble");
  rep.threshold = as_double(member(doc, "threshold", where), where + ".threshold");
  rep.correct_index = as_int(member(doc, "correct_index", where), where + ".correct_index");
  const json& runs = member(doc, "runs", where);
  if (!runs.is_array()) fail(where, "runs must be an array");
  for (size_t i = 0; i < runs.size(); ++i) {
    const std::string rw = where + ".runs[" + std::to_string(i) + "]";
    const json& o = runs[i];
    check_keys(o, {"seed", "identified", "identified_name", "coefficients", "n_points",
                   "wall_ms"},
               rw);
    SindyRun r;
    r.seed = as_u64(member(o, "seed", rw), rw + ".seed");
    r.identified = as_int(member(o, "identified", rw), rw + ".identified");
    r.coefficients = as_vector(member(o, "coefficients", rw), rw + ".coefficients");
    r.n_points = as_int64(member(o, "n_points", rw), rw + ".n_points");
    r.wall_ms = as_double(member(o, "wall_ms", rw), rw + ".wall_ms");
    rep.runs.push_back(std::move(r));
  }
  return rep;
}

SindyReport load_sindy_report(const std::filesystem::path& path) {
  return sindy_from_json_text(read_text_file(path), path.string());
}

std::string verdict_to_json(const GroupSelection& sel, const BasisLibrary& lib,
                            const RunConfig& rc) {
  JsonWriter w;
  w.begin_object();
  w.key("config");
  emit_run_config(w, rc);
  w.key("decided").value(sel.decided);
  w.key("basis").value(sel.basis);
  w.key("basis_name");
  if (sel.decided && sel.basis >= 0 && sel.basis < lib.size())
    w.value(lib.terms[sel.basis].name());
  else
    w.null_value();
  w.key("margin").value(sel.margin);
  w.key("groups");
  w.begin_array();
  for (const auto& [basis, mean] : sel.group_means) {
    w.begin_object();
    w.key("basis").value(basis);
    w.key("name");
    if (basis >= 0 && basis < lib.size())
      w.value(lib.terms[basis].name());
    else
      w.null_value();
    w.key("mean_sigma_H").value(mean);
    w.end_object();
  }
  w.end_array();
  w.end_object();
  w.newline();
  return w.str();
}

RunConfig run_config_from_json_text(std::string_view text, const std::string& where) {
  return parse_run_config(parse(text, where), where);
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return run_config_from_json_text(read_text_file(path), path.string());
}

}  // namespace minaction
