// Acceptance report: one PASS/FAIL line per criterion, detail lines indented above it.
// Exits 0 once every check has run (a FAIL is a reported result, not a crash); exits 1 only on
// an unexpected exception. An optional argument names a file that receives a copy of the report.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "walkin/equilibrium.hpp"
#include "walkin/metrics.hpp"
#include "walkin/optimizer.hpp"
#include "walkin/verification.hpp"
#include "walkin/waiting.hpp"

using namespace walkin;

namespace {

// Tolerances.
constexpr double kAtomTol = 0.02;
constexpr double kSolveSeconds = 60.0;
constexpr double kSupportTol = 0.02;
constexpr double kMarginTol = 1e-3;
constexpr double kZ = 3.0;
constexpr double kConservationTol = 1e-12;
constexpr std::size_t kMcReplications = 1000000;
constexpr std::size_t kOracleReplications = 1000000;
constexpr double kDerivativeTol = 1e-4;
constexpr double kClosedFormTol = 1e-8;
constexpr double kPhiRelTol = 0.05;
constexpr double kImprovementMax = 0.05;
constexpr double kDeSeconds = 1800.0;
constexpr double kRefineAtomTol = 0.01;
constexpr double kRefineWaitRel = 0.01;

struct Instance {
  std::vector<double> schedule;
  double lambda;
  double atom;  // reference value
};

const std::vector<Instance> kInstances{
    {{1, 3, 5}, 2, 0.790},     {{1, 3, 5}, 4, 0.815},     {{4, 4.5, 5}, 2, 0.827}, {{4, 4.5, 5}, 4, 0.983},
    {{0, 2, 5}, 2, 0.128},     {{0, 2, 5}, 4, 0.550},     {{0, 0.5, 0.8}, 2, 0.0}, {{0, 0.5, 0.8}, 4, 0.151},
    {{0, 4.5, 5}, 2, 0.163},   {{0, 4.5, 5}, 4, 0.714}};

struct TableRow {
  double lambda;
  double gamma;
  std::vector<double> schedule;
  double phi;
};

const std::vector<TableRow> kEqualSpacing{{2, 0.1, {0, 0.6, 1.2}, 1.6383}, {2, 0.5, {0, 1.1, 2.2}, 2.7133},
                                          {2, 0.9, {0, 2.5, 5}, 3.4868},   {4, 0.1, {0, 0.5, 1}, 1.8527},
                                          {4, 0.5, {0, 2.5, 5}, 6.5603},   {4, 0.9, {0, 2.5, 5}, 11.0276}};

int passed = 0;
int failed = 0;

std::FILE* report = nullptr;  // optional copy of stdout

void emit(const std::string& line) {
  std::printf("%s\n", line.c_str());
  std::fflush(stdout);
  if (report) {
    std::fprintf(report, "%s\n", line.c_str());
    std::fflush(report);
  }
}

void criterion(bool ok, const std::string& name, const std::string& summary) {
  emit(std::string(ok ? "PASS " : "FAIL ") + name + ": " + summary);
  (ok ? passed : failed)++;
}

template <typename... Args>
void detail(const char* fmt, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  emit(std::string("  ") + buf);
}

ModelParams frame(double lambda, double delta = 0.01) {
  ModelParams p;
  p.lambda = lambda;
  p.delta = delta;
  return p;
}

std::string label(const Instance& in) {
  return format_schedule(in.schedule) + " lambda=" + std::to_string(static_cast<int>(in.lambda));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string rounded(const std::vector<double>& x) {
  std::string out;
  char buf[32];
  for (double v : x) {
    std::snprintf(buf, sizeof buf, "%s%.4g", out.empty() ? "" : ",", v);
    out += buf;
  }
  return out;
}

unsigned worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

double tagged_wait(const AugmentedSchedule& a, std::size_t k, std::size_t n, double mu, std::mt19937_64& rng) {
  std::exponential_distribution<double> service(mu);
  const double start = a.point(k);
  double clock = start;
  std::size_t next = k + 1;
  std::size_t ahead = n;
  while (ahead > 0) {
    clock += service(rng);
    --ahead;
    while (next <= a.appointments() && a.point(next) <= clock) {
      ++ahead;
      ++next;
    }
  }
  return clock - start;
}

void atoms_and_equilibrium(std::vector<EquilibriumResult>& solved) {
  bool atoms_ok = true;
  double worst_time = 0.0;
  for (const auto& in : kInstances) {
    const auto t0 = std::chrono::steady_clock::now();
    solved.push_back(solve(Schedule(in.schedule, 5.0), frame(in.lambda), SolveConfig{}));
    const double secs = seconds_since(t0);
    worst_time = std::max(worst_time, secs);
    const auto& r = solved.back();
    const bool ok = std::abs(r.atom - in.atom) <= kAtomTol && secs <= kSolveSeconds;
    atoms_ok = atoms_ok && ok;
    detail("%-28s p_e=%.4f reference=%.3f t0=%.3f E_w=%.4f %.2fs %s", label(in).c_str(), r.atom, in.atom,
           r.support_start, r.equilibrium_wait, secs, ok ? "ok" : "MISMATCH");
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "10 instances within +-%.2f, slowest solve %.2fs (limit %.0fs)", kAtomTol, worst_time,
                kSolveSeconds);
  criterion(atoms_ok, "atom reproduction", buf);

  bool eq_ok = true;
  double worst_dev = 0.0, worst_margin = 1.0;
  for (std::size_t i = 0; i < solved.size(); ++i) {
    const auto v = verify_equilibrium(solved[i]);
    worst_dev = std::max(worst_dev, v.max_support_deviation);
    worst_margin = std::min(worst_margin, v.min_offsupport_margin);
    const bool ok = v.max_support_deviation <= kSupportTol && v.min_offsupport_margin >= -kMarginTol;
    eq_ok = eq_ok && ok;
    detail("%-28s support deviation %.2e, off-support margin %+.2e %s", label(kInstances[i]).c_str(),
           v.max_support_deviation, v.min_offsupport_margin, ok ? "ok" : "VIOLATION");
  }
  std::snprintf(buf, sizeof buf, "max deviation %.2e (<= %.2f), min margin %+.2e (>= -%.0e)", worst_dev, kSupportTol,
                worst_margin, kMarginTol);
  criterion(eq_ok, "equilibrium property", buf);
}

void structure(const std::vector<EquilibriumResult>& solved) {
  bool ok = true;
  std::size_t checked = 0;
  for (bool early : {false, true}) {
    for (std::size_t i = 0; i < kInstances.size(); ++i) {
      SolveConfig c;
      c.early_arrivals = early;
      const auto r = early ? solve(Schedule(kInstances[i].schedule, 5.0), frame(kInstances[i].lambda), c) : solved[i];
      const auto v = verify_equilibrium(r);
      const bool good = v.atoms_after_open == 0 && (!early || v.atoms_total == 0) && v.gap_violations.empty();
      ok = ok && good;
      ++checked;
      detail("%-28s %-9s atoms after open %zu, atoms total %zu, gap violations %zu%s", label(kInstances[i]).c_str(),
             early ? "early" : "no-early", v.atoms_after_open, v.atoms_total, v.gap_violations.size(),
             good ? "" : "  VIOLATION");
    }
  }
  criterion(ok, "structural properties", std::to_string(checked) + " solves checked for atoms and post-appointment gaps");
}

struct ZScores {
  CostBreakdown cost;
  double zw;
  double zi;
};

ZScores simulated_z(const Instance& in, const ModelParams& p) {
  const auto r = solve(Schedule(in.schedule, 5.0), p, SolveConfig::precise());
  SimulationConfig sc;
  sc.replications = kMcReplications;
  sc.seed = 1;
  sc.threads = worker_count();
  ZScores z{simulate(r, sc), 0.0, 0.0};
  z.zw = (z.cost.e_w_mc.mean - z.cost.e_w) / z.cost.e_w_mc.std_error;
  z.zi = (z.cost.e_i_mc.mean - z.cost.e_i) / z.cost.e_i_mc.std_error;
  return z;
}

void cross_validation() {
  bool ok = true;
  double worst_z = 0.0, worst_cons = 0.0;
  std::vector<const Instance*> mismatched;
  for (const auto& in : kInstances) {
    const auto [c, zw, zi] = simulated_z(in, frame(in.lambda));
    const bool good = std::abs(zw) <= kZ && std::abs(zi) <= kZ && c.max_conservation_error <= kConservationTol;
    ok = ok && good;
    if (!good) mismatched.push_back(&in);
    worst_z = std::max({worst_z, std::abs(zw), std::abs(zi)});
    worst_cons = std::max(worst_cons, c.max_conservation_error);
    detail("%-28s E_w %.4f vs MC %.4f (z=%+.2f)  E_I %.4f vs MC %.4f (z=%+.2f)  idle+busy err %.1e %s",
           label(in).c_str(), c.e_w, c.e_w_mc.mean, zw, c.e_i, c.e_i_mc.mean, zi, c.max_conservation_error,
           good ? "ok" : "MISMATCH");
  }
  // Diagnostic only: the same instances with a finer grid and a looser walk-in truncation, to show
  // whether a mismatch is discretisation bias or a modelling error. The verdict above stands.
  for (const Instance* in : mismatched) {
    ModelParams fine = frame(in->lambda, 0.0025);
    fine.trunc_mass = 1.0 - 1e-7;
    const auto z = simulated_z(*in, fine);
    detail("diagnostic %-17s at delta=0.0025, c=1-1e-7: z(E_w)=%+.2f z(E_I)=%+.2f", label(*in).c_str(), z.zw, z.zi);
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "10 instances at %zu days, max |z| %.2f (<= %.0f), max |idle+busy-T| %.1e", kMcReplications,
                worst_z, kZ, worst_cons);
  criterion(ok, "simulation cross-validation", buf);
}

void oracles() {
  // Wait table against a tagged-customer simulation.
  const AugmentedSchedule a(Schedule({1.0, 3.0, 5.0}, 5.0));
  const std::size_t n_max = 20;
  const WaitTable w(a, 1.0, n_max);
  std::mt19937_64 pick(2024);
  bool table_ok = true;
  double worst_z = 0.0;
  for (int cell = 0; cell < 10; ++cell) {
    const std::size_t k = std::uniform_int_distribution<std::size_t>(0, a.appointments())(pick);
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, w.row_limit(k))(pick);
    std::mt19937_64 rng(1000 + cell);
    double s = 0.0, ss = 0.0;
    for (std::size_t r = 0; r < kOracleReplications; ++r) {
      const double x = tagged_wait(a, k, n, 1.0, rng);
      s += x;
      ss += x * x;
    }
    const double reps = static_cast<double>(kOracleReplications);
    const double mean = s / reps;
    const double se = std::sqrt((ss / reps - mean * mean) / reps);
    const double z = (mean - w.at(k, n)) / se;
    worst_z = std::max(worst_z, std::abs(z));
    table_ok = table_ok && std::abs(z) <= kZ;
    detail("wait table (k=%zu, n=%zu): %.5f vs tagged MC %.5f (z=%+.2f)", k, n, w.at(k, n), mean, z);
  }

  // Time derivative against central differences.
  const AugmentedSchedule b(Schedule({0.6, 1.9, 3.3, 4.4}, 5.0));
  const WaitTable wb(b, 1.0, 18);
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double h = 1e-5;
  double worst_rel = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t k = static_cast<std::size_t>(u(rng) * 5) % 5;
    const double a0 = b.point(k), a1 = b.point(k + 1);
    const double t = a0 + h + u(rng) * (a1 - a0 - 2 * h);
    const std::size_t n = 1 + static_cast<std::size_t>(u(rng) * static_cast<double>(wb.row_limit(k) - 1));
    const double fd = (wait_given_queue(wb, b, k, n, t + h) - wait_given_queue(wb, b, k, n, t - h)) / (2 * h);
    const double d = wait_time_derivative(wb, b, k, n, t);
    worst_rel = std::max(worst_rel, std::abs(d - fd) / std::max(std::abs(fd), 1e-2));
  }
  detail("derivative vs finite differences: worst relative error %.2e over 1000 points", worst_rel);

  // Density in the last segment against (mu / lambda)(1 - P0).
  const AugmentedSchedule c(Schedule({1.0, 3.0}, 5.0));
  const WaitTable wc(c, 1.3, 16);
  double worst_abs = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    StateVector s(12, 3.0 + 2.0 * u(rng));
    for (auto& p : s.probs) p = u(rng);
    const double total = s.mass();
    for (auto& p : s.probs) p /= total;
    const double lambda = 0.5 + 4.0 * u(rng);
    worst_abs = std::max(worst_abs, std::abs(equilibrium_density(s, wc, c, 2, lambda) - 1.3 / lambda * (1.0 - s.probs[0])));
  }
  detail("last-segment density vs closed form: worst absolute error %.2e over 1000 states", worst_abs);

  const bool ok = table_ok && worst_rel <= kDerivativeTol && worst_abs <= kClosedFormTol;
  char buf[160];
  std::snprintf(buf, sizeof buf, "table max |z| %.2f (<= %.0f), derivative %.1e (<= %.0e), closed form %.1e (<= %.0e)",
                worst_z, kZ, worst_rel, kDerivativeTol, worst_abs, kClosedFormTol);
  criterion(ok, "oracle equivalence", buf);
}

struct SweepResult {
  double lambda;
  std::vector<SweepRow> rows;
};

std::vector<SweepResult> equal_spacing_table() {
  std::vector<SweepResult> sweeps;
  SweepSpec spec;
  SimulationConfig sc;
  sc.replications = kMcReplications;
  sc.seed = 1;
  sc.threads = worker_count();
  for (double lambda : {2.0, 4.0}) {
    const auto t0 = std::chrono::steady_clock::now();
    sweeps.push_back({lambda, sweep_equal_spacing(spec, frame(lambda), SolveConfig::precise(), sc)});
    std::size_t bad = 0;
    for (const auto& r : sweeps.back().rows) bad += !r.ok();
    detail("sweep lambda=%.0f: %zu schedules, %zu failed, %.0fs", lambda, sweeps.back().rows.size(), bad,
           seconds_since(t0));
  }

  bool ok = true;
  int matched = 0;
  for (const auto& row : kEqualSpacing) {
    const auto& rows = sweeps[row.lambda == 2.0 ? 0 : 1].rows;
    const std::size_t g = row.gamma == 0.1 ? 0 : row.gamma == 0.5 ? 1 : 2;
    const SweepRow* best = best_row(rows, g);
    const SweepRow* reference = nullptr;
    for (const auto& r : rows) {
      if (r.ok() && r.schedule == row.schedule) reference = &r;
    }
    bool same = best && best->schedule == row.schedule;
    const double phi = best ? best->phi[g] : std::nan("");
    const double rel = std::abs(phi - row.phi) / row.phi;
    const bool good = same && rel <= kPhiRelTol;
    ok = ok && good;
    matched += same;
    detail("lambda=%.0f gamma=%.1f: best %s Phi=%.4f | reference %s Phi=%.4f (ours there %.4f) | rel diff %.2f%% %s",
           row.lambda, row.gamma, best ? format_schedule(best->schedule).c_str() : "-", phi,
           format_schedule(row.schedule).c_str(), row.phi, reference ? reference->phi[g] : std::nan(""), 100 * rel,
           good ? "ok" : (same ? "PHI OFF" : "SCHEDULE DIFFERS"));
  }
  criterion(ok, "equal-spacing table", std::to_string(matched) + "/6 optimal schedules match; Phi within +-5% where matched");
  return sweeps;
}

void de_table(const std::vector<SweepResult>& sweeps) {
  bool ok = true;
  for (const auto& row : kEqualSpacing) {
    const auto& rows = sweeps[row.lambda == 2.0 ? 0 : 1].rows;
    const std::size_t g = row.gamma == 0.1 ? 0 : row.gamma == 0.5 ? 1 : 2;
    const SweepRow* best = best_row(rows, g);
    if (!best) {
      ok = false;
      detail("lambda=%.0f gamma=%.1f: no equal-spacing baseline", row.lambda, row.gamma);
      continue;
    }
    DEConfig c;
    c.seed = 1;
    c.initial = best->schedule;
    c.final_replications = kMcReplications;
    c.threads = worker_count();
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = optimize_de(frame(row.lambda), row.gamma, 3, c, SolveConfig::precise());
    const double secs = seconds_since(t0);
    const double base = best->phi[g];
    const double improvement = (base - r.phi_star) / base;
    const bool good = r.phi_star <= base && improvement <= kImprovementMax && secs <= kDeSeconds;
    ok = ok && good;
    detail("lambda=%.0f gamma=%.1f: DE %s Phi*=%.4f vs equal spacing %.4f, improvement %.2f%%, %zu generations%s, %.0fs %s",
           row.lambda, row.gamma, rounded(r.best_schedule).c_str(), r.phi_star, base, 100 * improvement,
           r.iterations, r.converged ? "" : " (cap)", secs, good ? "ok" : "OUT OF RANGE");
  }
  criterion(ok, "differential evolution direction", "Phi* <= equal-spacing Phi with improvement in [0%, 5%] for all six rows");
}

void refinement(const std::vector<EquilibriumResult>& solved) {
  // Default tolerances snap p_e to the same bisection midpoint on both grids, so the comparison is
  // repeated with the precise preset, where the grid actually moves the answer.
  bool ok = true;
  double worst_atom = 0.0, worst_wait = 0.0;
  auto compare = [&](const std::string& name, const EquilibriumResult& coarse, const EquilibriumResult& fine) {
    const double da = std::abs(fine.atom - coarse.atom);
    const double dw = std::abs(fine.equilibrium_wait - coarse.equilibrium_wait) / coarse.equilibrium_wait;
    worst_atom = std::max(worst_atom, da);
    worst_wait = std::max(worst_wait, dw);
    const bool good = da < kRefineAtomTol && dw < kRefineWaitRel;
    ok = ok && good;
    detail("%-36s p_e %.4f -> %.4f, E_w %.4f -> %.4f %s", name.c_str(), coarse.atom, fine.atom,
           coarse.equilibrium_wait, fine.equilibrium_wait, good ? "ok" : "UNSTABLE");
  };
  for (std::size_t i = 0; i < kInstances.size(); ++i) {
    const Schedule s(kInstances[i].schedule, 5.0);
    const double lambda = kInstances[i].lambda;
    compare(label(kInstances[i]) + " default", solved[i], solve(s, frame(lambda, 0.005), SolveConfig{}));
    compare(label(kInstances[i]) + " precise", solve(s, frame(lambda), SolveConfig::precise()),
            solve(s, frame(lambda, 0.005), SolveConfig::precise()));
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "max |dp_e| %.4f (< %.2f), max relative dE_w %.2f%% (< 1%%)", worst_atom, kRefineAtomTol,
                100 * worst_wait);
  criterion(ok, "grid refinement", buf);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1 && !(report = std::fopen(argv[1], "w"))) {
    std::fprintf(stderr, "cannot write %s\n", argv[1]);
    return 1;
  }
  try {
    const auto start = std::chrono::steady_clock::now();
    std::vector<EquilibriumResult> solved;
    atoms_and_equilibrium(solved);
    structure(solved);
    cross_validation();
    oracles();
    const auto sweeps = equal_spacing_table();
    de_table(sweeps);
    refinement(solved);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%d passed, %d failed, %.0fs", passed, failed, seconds_since(start));
    emit(buf);
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance aborted: %s\n", e.what());
    return 1;
  }
}
