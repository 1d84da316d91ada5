#include "minaction/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "minaction/gradient.hpp"
#include "minaction/metrics.hpp"
#include "minaction/rng.hpp"

namespace minaction {

Milestones compute_milestones(const std::vector<EpochRecord>& log) {
  Milestones m;
  for (const EpochRecord& rec : log) {
    if (!m.onset && rec.selectivity >= 10.0) m.onset = rec.epoch;
    if (!m.sparse && rec.selectivity >= 100.0) m.sparse = rec.epoch;
    if (!m.frozen && rec.selectivity >= 1000.0) m.frozen = rec.epoch;
  }
  if (m.onset && m.frozen) {
    m.span = *m.frozen - *m.onset;
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int n = 0;
    for (const EpochRecord& rec : log) {
      if (rec.epoch < *m.onset || rec.epoch > *m.frozen) continue;
      if (!std::isfinite(rec.selectivity) || rec.selectivity <= 0.0) continue;
      const double x = rec.epoch, y = std::log(rec.selectivity);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++n;
    }
    if (n >= 3) {
      const double denom = n * sxx - sx * sx;
      if (denom > 0.0) m.growth = std::exp((n * sxy - sx * sy) / denom);
    }
  }
  return m;
}

TrainResult train(const Dataset& data, const TrainConfig& cfg) {
  const int k = cfg.library.size();
  if (k < 2) throw std::invalid_argument("library needs >= 2 terms");
  if (2 * k > kGradLanes)
    throw std::invalid_argument("library too large for gradient lanes");
  if (data.n_train < 1) throw std::invalid_argument("no training orbits");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (cfg.logit_bias.size() != 0 && cfg.logit_bias.size() != k)
    throw std::invalid_argument("logit bias size does not match library");

  LossOptions lopt = cfg.loss;
  lopt.literal_coupling = data.config.law.coupling;

  std::vector<PreparedTrajectory> prep;
  prep.reserve(data.n_train);
  for (const Trajectory& tr : data.train()) prep.push_back(prepare_trajectory(tr, lopt));

  // Initialization draws logits first, then coefficients.
  Rng init_rng(derive_seed(cfg.seed, 3));
  Eigen::VectorXd logits(k), thetas(k);
  for (int i = 0; i < k; ++i)
    logits[i] = init_rng.uniform(-cfg.init_logit_halfwidth, cfg.init_logit_halfwidth);
  if (cfg.logit_bias.size() == k) logits += cfg.logit_bias;
  for (int i = 0; i < k; ++i) thetas[i] = init_rng.normal(0.0, cfg.init_theta_sigma);

  Eigen::VectorXd x = pack_params(logits, thetas);
  // Logits and coefficients step under separate Adam states so the
  // coefficient rate can differ; identical rates reproduce a single
  // whole-vector state bit for bit.
  AdamState adam_logits(k), adam_thetas(k);
  AdamConfig theta_adam = cfg.adam;
  theta_adam.lr = cfg.theta_lr.value_or(cfg.adam.lr);
  Rng shuffle_rng(derive_seed(cfg.seed, 4));

  std::vector<int> order(prep.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  TrainResult res;
  res.log.reserve(cfg.schedule.total_epochs);
  BasisModel last_good{cfg.library, logits, thetas, cfg.schedule.tau_start};

  for (int epoch = 1; epoch <= cfg.schedule.total_epochs; ++epoch) {
    const SchedulePoint sched = schedule_at(cfg.schedule, epoch);
    if (cfg.shuffle) {
      for (size_t i = order.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(shuffle_rng.uniform() * i);
        std::swap(order[i - 1], order[j]);
      }
    }

    long long epoch_clamps = 0;
    LossBreakdown acc;
    double weight_sum = 0.0;

    for (size_t lo = 0; lo < order.size(); lo += cfg.batch_size) {
      const size_t hi = std::min(lo + cfg.batch_size, order.size());
      std::vector<PreparedTrajectory> batch;
      batch.reserve(hi - lo);
      for (size_t i = lo; i < hi; ++i) batch.push_back(prep[order[i]]);

      VecX<Dual> dl(k), dth(k);
      for (int i = 0; i < k; ++i) {
        dl[i] = Dual(x[i], i);
        dth[i] = Dual(x[k + i], k + i);
      }
      const LossTerms<Dual> terms = batch_loss<Dual>(
          cfg.library, dl, dth, sched.tau,
          std::span<const PreparedTrajectory>(batch.data(), batch.size()),
          cfg.weights, sched.alpha_E, lopt, &epoch_clamps);

      if (!isfinite(terms.total)) throw TrainingInstability(epoch, last_good);
      const Eigen::VectorXd g = terms.total.grad.head(2 * k);
      Eigen::VectorXd xl = x.head(k), xt = x.tail(k);
      adam_step(cfg.adam, adam_logits, xl, g.head(k));
      adam_step(theta_adam, adam_thetas, xt, g.tail(k));
      x.head(k) = xl;
      x.tail(k) = xt;

      const double w = static_cast<double>(hi - lo);
      const LossBreakdown b = make_breakdown(terms, cfg.weights, sched.alpha_E);
      acc.traj += w * b.traj;
      acc.accel += w * b.accel;
      acc.sym += w * b.sym;
      acc.comp += w * b.comp;
      acc.arch += w * b.arch;
      acc.total += w * b.total;
      acc.alpha_I = b.alpha_I;
      acc.alpha_E = b.alpha_E;
      acc.alpha_S = b.alpha_S;
      acc.lambda_accel = b.lambda_accel;
      acc.lambda_comp = b.lambda_comp;
      acc.lambda_arch = b.lambda_arch;
      weight_sum += w;
    }

    acc.traj /= weight_sum;
    acc.accel /= weight_sum;
    acc.sym /= weight_sum;
    acc.comp /= weight_sum;
    acc.arch /= weight_sum;
    acc.total /= weight_sum;

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = acc;
    rec.tau = sched.tau;
    Eigen::VectorXd cur_logits = x.head(k), cur_thetas = x.tail(k);
    rec.gates = softmax_gates<double>(cur_logits, sched.tau);
    rec.selectivity = selectivity(rec.gates);
    rec.concentration = gate_concentration(rec.gates, cur_thetas);
    rec.clamps = epoch_clamps;
    res.clamp_total += epoch_clamps;
    res.log.push_back(std::move(rec));

    last_good = BasisModel{cfg.library, cur_logits, cur_thetas, sched.tau};
  }

  res.model = last_good;
  res.milestones = compute_milestones(res.log);
  return res;
}

SweepEntry evaluate_model(const Dataset& data, const BasisModel& model,
                          const LossOptions& loss) {
  SweepEntry e;
  e.model = model;

  const GateStats gs = gate_stats(model);
  e.dominant = gs.dominant;
  e.selectivity = gs.selectivity;
  e.concentration = gs.concentration;

  if (gs.selectivity > 10.0) {
    const CalibrationResult cal = calibrate(model, data.train(), loss.stride);
    e.theta_opt = cal.theta_opt;
    CalibratedModel cm{model.library, cal.dominant, cal.theta_opt};

    const double dt_model = data.config.dt_obs / loss.substeps;
    try {
      e.kepler_p = kepler_exponent(cm, data, dt_model).p;
    } catch (const std::exception&) {
      e.kepler_p.reset();
    }

    double sum = 0.0;
    int n = 0;
    for (const Trajectory& t : data.test()) {
      const ConservationReport rep = conservation(
          cm, t.clean_pos.row(0), t.vel.row(0), t.duration(), dt_model,
          HamiltonianForm::TrueLaw, data.config.law);
      sum += rep.sigma_h;
      n += 1;
      e.rollout_diverged = e.rollout_diverged || rep.diverged;
    }
    if (n > 0) e.sigma_h = sum / n;
  }
  return e;
}

namespace {

SweepEntry run_seed(const Dataset& data, const TrainConfig& base,
                    std::uint64_t seed) {
  TrainConfig cfg = base;
  cfg.seed = seed;
  TrainResult tr = train(data, cfg);

  SweepEntry e = evaluate_model(data, tr.model, base.loss);
  e.seed = seed;
  e.milestones = tr.milestones;
  e.log = std::move(tr.log);
  e.clamp_total = tr.clamp_total;
  return e;
}

}  // namespace

SweepResult sweep(const Dataset& data, const TrainConfig& base,
                  const std::vector<std::uint64_t>& seeds, int jobs) {
  SweepResult result;
  result.entries.resize(seeds.size());
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(seeds.size())));

  if (jobs == 1) {
    for (size_t i = 0; i < seeds.size(); ++i)
      result.entries[i] = run_seed(data, base, seeds[i]);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(jobs);
    for (int w = 0; w < jobs; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (size_t i = next.fetch_add(1); i < seeds.size();
               i = next.fetch_add(1))
            result.entries[i] = run_seed(data, base, seeds[i]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& err : errors)
      if (err) std::rethrow_exception(err);
  }

  std::vector<std::pair<int, double>> grouped;
  for (const SweepEntry& e : result.entries)
    if (e.sigma_h) grouped.emplace_back(e.dominant, *e.sigma_h);
  const GroupSelection sel = select_by_conservation(grouped);
  result.verdict.decided = sel.decided;
  result.verdict.basis = sel.basis;
  result.verdict.margin = sel.margin;
  if (sel.decided)
    result.verdict.basis_name = base.library.terms[sel.basis].name();
  return result;
}

}  // namespace minaction
