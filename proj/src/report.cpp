#include "minaction/report.hpp"

#include <cmath>
#include <cstdio>
#include <map>

#include "minaction/metrics.hpp"

namespace minaction {

namespace {

std::string fmt(double v, int prec = 4) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

std::string cell(const std::optional<int>& v) { return v ? std::to_string(*v) : "-"; }

std::string cell(const std::optional<double>& v, int prec = 4) {
  return v ? fmt(*v, prec) : "-";
}

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
  int n = 0;
};

MeanSd mean_sd(const std::vector<double>& xs) {
  MeanSd m;
  m.n = static_cast<int>(xs.size());
  if (m.n == 0) return m;
  for (double x : xs) m.mean += x;
  m.mean /= m.n;
  for (double x : xs) m.sd += (x - m.mean) * (x - m.mean);
  m.sd = m.n > 1 ? std::sqrt(m.sd / (m.n - 1)) : 0.0;
  return m;
}

std::string term_name(const BasisLibrary& lib, int i) {
  return i >= 0 && i < lib.size() ? lib.terms[i].name() : std::string("-");
}

}  // namespace

std::string sweep_markdown(const SweepResult& res, const RunConfig& rc,
                           const SindyReport* sindy) {
  const BasisLibrary& lib = rc.train.library;
  std::string md = "# Sweep report\n\n";
  md += "- preset: `" + rc.preset + "`\n";
  md += "- system: `" + law_name(rc.data.law.kind) + "` (coupling " +
        fmt(rc.data.law.coupling) + ")\n";
  md += "- library: `" + library_name(lib) + "` (";
  for (int i = 0; i < lib.size(); ++i) md += (i ? ", " : "") + lib.terms[i].name();
  md += ")\n";
  md += "- seeds: " + std::to_string(res.entries.size()) + "\n";
  md += "- epochs: " + std::to_string(rc.train.schedule.total_epochs) + " (warmup " +
        std::to_string(rc.train.schedule.warmup_epochs) + ")\n\n";

  md += "## Per-seed results\n\n";
  md +=
      "| seed | basis | onset | sparse | frozen | span | growth | selectivity "
      "| C_gate | theta_opt | p | sigma_H |\n";
  md += "|---:|:---|---:|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n";
  for (const SweepEntry& e : res.entries) {
    md += "| " + std::to_string(e.seed);
    md += " | " + term_name(lib, e.dominant);
    md += " | " + cell(e.milestones.onset);
    md += " | " + cell(e.milestones.sparse);
    md += " | " + cell(e.milestones.frozen);
    md += " | " + cell(e.milestones.span);
    md += " | " + cell(e.milestones.growth);
    md += " | " + fmt(e.selectivity, 3);
    md += " | " + fmt(e.concentration, 3);
    md += " | " + cell(e.theta_opt);
    md += " | " + cell(e.kepler_p);
    md += " | " + cell(e.sigma_h, 3);
    md += " |\n";
  }

  std::vector<double> spans, growths;
  int frozen_count = 0;
  for (const SweepEntry& e : res.entries) {
    if (e.milestones.frozen) ++frozen_count;
    if (e.milestones.span) spans.push_back(*e.milestones.span);
    if (e.milestones.growth) growths.push_back(*e.milestones.growth);
  }
  const MeanSd span_stats = mean_sd(spans);
  const MeanSd growth_stats = mean_sd(growths);
  md += "\n## Milestones\n\n";
  md += "- frozen by final epoch: " + std::to_string(frozen_count) + "/" +
        std::to_string(res.entries.size()) + "\n";
  if (span_stats.n > 0)
    md += "- span: " + fmt(span_stats.mean) + " +/- " + fmt(span_stats.sd) + " epochs (n=" +
          std::to_string(span_stats.n) + ")\n";
  if (growth_stats.n > 0)
    md += "- growth rate: " + fmt(growth_stats.mean) + " +/- " + fmt(growth_stats.sd) +
          " per epoch (n=" + std::to_string(growth_stats.n) + ")\n";

  std::vector<std::pair<int, double>> grouped;
  for (const SweepEntry& e : res.entries)
    if (e.sigma_h) grouped.emplace_back(e.dominant, *e.sigma_h);
  md += "\n## Conservation groups\n\n";
  if (grouped.empty()) {
    md += "No seed produced a dominant gate; nothing to group.\n";
  } else {
    const GroupSelection sel = select_by_conservation(grouped);
    md += "| basis | runs | mean sigma_H |\n|:---|---:|---:|\n";
    std::map<int, int> counts;
    for (const auto& [basis, _] : grouped) counts[basis]++;
    for (const auto& [basis, mean] : sel.group_means)
      md += "| " + term_name(lib, basis) + " | " + std::to_string(counts[basis]) + " | " +
            fmt(mean, 3) + " |\n";
    md += "\nVerdict: ";
    if (sel.decided)
      md += "**" + term_name(lib, sel.basis) + "** (margin " + fmt(sel.margin, 3) + "x)\n";
    else
      md += "undecided\n";
  }

  if (sindy) {
    int n_correct = 0;
    double coef_min = 0.0, coef_max = 0.0, wall_sum = 0.0;
    bool have = false;
    for (const SindyRun& r : sindy->runs) {
      wall_sum += r.wall_ms;
      if (sindy->correct_index >= 0 && r.identified == sindy->correct_index) {
        ++n_correct;
        const double c = r.coefficients[sindy->correct_index];
        coef_min = have ? std::min(coef_min, c) : c;
        coef_max = have ? std::max(coef_max, c) : c;
        have = true;
      }
    }
    md += "\n## Sparse-regression baseline\n\n";
    md += "| stride | ensemble | correct | coefficient range | mean wall ms |\n";
    md += "|---:|---:|---:|:---|---:|\n";
    md += "| " + std::to_string(sindy->stride) + " | " + std::to_string(sindy->n_boot) +
          " | " + std::to_string(n_correct) + "/" + std::to_string(sindy->runs.size()) +
          " | " + (have ? "[" + fmt(coef_min) + ", " + fmt(coef_max) + "]" : "-") + " | " +
          fmt(sindy->runs.empty() ? 0.0 : wall_sum / sindy->runs.size(), 3) + " |\n";
  }
  return md;
}

std::string loss_curves_csv(const SweepResult& res) {
  std::string out = "seed,epoch,traj,accel,sym,comp,arch,total,alpha_E,tau\n";
  for (const SweepEntry& e : res.entries) {
    for (const EpochRecord& r : e.log) {
      out += std::to_string(e.seed);
      out += ',';
      out += std::to_string(r.epoch);
      for (double v : {r.loss.traj, r.loss.accel, r.loss.sym, r.loss.comp, r.loss.arch,
                       r.loss.total, r.loss.alpha_E, r.tau}) {
        out += ',';
        out += format_double(v);
      }
      out += '\n';
    }
  }
  return out;
}

std::string gates_evolution_csv(const SweepResult& res, const BasisLibrary& lib) {
  std::string out = "seed,epoch";
  for (const BasisTerm& t : lib.terms) out += ",gate_" + t.name();
  out += ",selectivity,concentration\n";
  for (const SweepEntry& e : res.entries) {
    for (const EpochRecord& r : e.log) {
      out += std::to_string(e.seed);
      out += ',';
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
  }
  return out;
}

std::string phase_trajectory_csv(const Schedule& s) {
  std::map<int, std::string> marks;
  for (const RatioNode& n : ratio_nodes(s)) {
    std::string& m = marks[n.epoch];
    if (!m.empty()) m += ' ';
    m += std::to_string(n.p) + ":" + std::to_string(n.q);
  }
  std::string out = "epoch,alpha_E,tau,ratio,node\n";
  for (int epoch = 1; epoch <= s.total_epochs; ++epoch) {
    const SchedulePoint p = schedule_at(s, epoch);
    out += std::to_string(epoch);
    out += ',';
    out += format_double(p.alpha_E);
    out += ',';
    out += format_double(p.tau);
    out += ',';
    out += format_double(p.alpha_E / p.tau);
    out += ',';
    if (auto it = marks.find(epoch); it != marks.end()) out += it->second;
    out += '\n';
  }
  return out;
}

void write_report(const std::filesystem::path& dir, const SweepResult& res,
                  const RunConfig& rc, const SindyReport* sindy) {
  write_file_atomic(dir / "report.md", sweep_markdown(res, rc, sindy));
  write_file_atomic(dir / "loss_curves.csv", loss_curves_csv(res));
  write_file_atomic(dir / "gates_evolution.csv", gates_evolution_csv(res, rc.train.library));
  write_file_atomic(dir / "phase_trajectory.csv", phase_trajectory_csv(rc.train.schedule));
}

}  // namespace minaction
