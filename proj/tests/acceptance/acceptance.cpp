// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "../test_util.hpp"

using namespace versabo;
using namespace versabo::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(5);
  os << v;
  return os.str();
}

fs::path out_root() {
  const fs::path p = fs::temp_directory_path() / "versabo_acceptance";
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Runs a shipped config restricted to the given cell ids.
struct CellRuns {
  BenchmarkConfig cfg;
  BenchResult res;

  const std::vector<TrialOutcome>& cell(const std::string& id) const {
    for (std::size_t c = 0; c < cfg.cells.size(); ++c) {
      if (cfg.cells[c].id == id) return res.cells[c];
    }
    throw Error("no cell " + id);
  }
};

CellRuns run_shipped(const std::string& name, const std::vector<std::string>& ids) {
  CellRuns r;
  r.cfg = load_config(fs::path(VERSABO_CONFIG_DIR) / (name + ".json"));
  std::vector<CellSpec> keep;
  for (const auto& c : r.cfg.cells) {
    if (std::find(ids.begin(), ids.end(), c.id) != ids.end()) keep.push_back(c);
  }
  r.cfg.cells = keep;
  r.res = run_benchmark(r.cfg, out_root() / name, {});
  if (r.res.failures() > 0) throw Error(name + ": " + std::to_string(r.res.failures()) + " failed trials");
  return r;
}

std::vector<double> final_best(const std::vector<TrialOutcome>& trials) {
  std::vector<double> v;
  for (const auto& t : trials) v.push_back(t.trace.iterations.back().best_f);
  return v;
}

/// First iteration whose best_f is <= target, N + 1 when never reached.
std::vector<double> hitting_iterations(const std::vector<TrialOutcome>& trials, double target) {
  std::vector<double> v;
  for (const auto& t : trials) {
    double hit = static_cast<double>(t.trace.iterations.size() + 1);
    for (const auto& rec : t.trace.iterations) {
      if (rec.best_f <= target) {
        hit = static_cast<double>(rec.iteration);
        break;
      }
    }
    v.push_back(hit);
  }
  return v;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double e : v) s += (s.empty() ? "" : " ") + fmt(e);
  return s;
}

struct Toy {
  GaussianToyModel model{0.0, 1.0};
  PosteriorHandle handle = model.infer(Dataset{}, Seed{0});
  auto post() const {
    return [this](Seed s) { return model.post(handle, s); };
  }
  auto gen() const {
    return [this](const Input& x, const LatentSample& z, Seed s) { return model.gen(x, z, s); };
  }
};

Outcome ac1() {
  const Toy toy;
  const std::size_t m = 100000;
  const double ei = std_normal_pdf(0.0);
  const double se_ei = std::sqrt((0.5 - ei * ei) / double(m));
  const double se_pi = std::sqrt(0.25 / double(m));
  int passes = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Seed seed = derive_seed(Seed{101}, {s});
    const double e = acq_ei(Input{0.0}, toy.post(), toy.gen(), 0.0, m, derive_seed(seed, {1})).value / double(m);
    const double p = acq_pi(Input{0.0}, toy.post(), toy.gen(), 0.0, m, derive_seed(seed, {2})).value / double(m);
    passes += (std::abs(e - ei) <= 3 * se_ei && std::abs(p - 0.5) <= 3 * se_pi) ? 1 : 0;
  }
  return {passes >= 18, std::to_string(passes) + "/20 seeds within 3 SE"};
}

Outcome ac2() {
  const Toy toy;
  const std::vector<std::size_t> ms{100, 1000, 10000};
  std::string detail;
  bool ok = true;
  for (auto t : {AcqType::ei, AcqType::pi}) {
    const double truth = t == AcqType::ei ? std_normal_pdf(0.0) : 0.5;
    std::vector<double> lx, ly;
    for (std::size_t m : ms) {
      double sq = 0.0;
      for (std::uint64_t r = 0; r < 50; ++r) {
        const Seed seed = derive_seed(Seed{202}, {m, r});
        const double v = (t == AcqType::ei ? acq_ei(Input{0.0}, toy.post(), toy.gen(), 0.0, m, seed)
                                           : acq_pi(Input{0.0}, toy.post(), toy.gen(), 0.0, m, seed))
                             .value /
                         double(m);
        sq += (v - truth) * (v - truth);
      }
      lx.push_back(std::log(double(m)));
      ly.push_back(std::log(std::sqrt(sq / 50.0)));
    }
    const double mx = mean_of(lx), my = mean_of(ly);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      num += (lx[i] - mx) * (ly[i] - my);
      den += (lx[i] - mx) * (lx[i] - mx);
    }
    const double slope = num / den;
    ok = ok && slope >= -0.7 && slope <= -0.3;
    detail += to_string(t) + " slope " + fmt(slope) + " ";
  }
  return {ok, detail};
}

Outcome ac3() {
  const std::vector<double> v{1, 2, 3, 4, 5};
  const double q2 = lcb_empirical_quantile(v, 2.0);
  const double q25 = lcb_empirical_quantile(v, 2.5);
  const double par = lcb_parametric(std::vector<double>{-1.0, 1.0, 3.0}, 0.5);  // mean 1, variance 4
  return {q2 == 2.0 && q25 == 2.5 && par == -1.0, "b=2 -> " + fmt(q2) + ", b=2.5 -> " + fmt(q25) +
                                                      ", parametric -> " + fmt(par)};
}

Outcome ac4() {
  const auto r = run_shipped("multifidelity", {"ei_mf", "ei_m10", "ei_m1000"});
  const auto mf = final_best(r.cell("ei_mf"));
  const auto m10 = final_best(r.cell("ei_m10"));
  const auto m1000 = final_best(r.cell("ei_m1000"));
  const double se = std::sqrt(var_of(m1000) / double(m1000.size()));
  const bool a = std::abs(median_of(mf) - median_of(m1000)) <= se;
  double gen_mf = 0.0, gen_1000 = 0.0;
  for (const auto& t : r.cell("ei_mf")) gen_mf += double(t.trace.iterations.back().cumulative.gen);
  for (const auto& t : r.cell("ei_m1000")) gen_1000 += double(t.trace.iterations.back().cumulative.gen);
  const bool b = gen_mf <= 0.5 * gen_1000;
  const bool c = median_of(m10) > median_of(m1000);
  return {a && b && c, std::string("(a) ") + (a ? "ok" : "no") + " median mf " + fmt(median_of(mf)) + " vs M1000 " +
                           fmt(median_of(m1000)) + " se " + fmt(se) + "; (b) " + (b ? "ok" : "no") +
                           " gen ratio " + fmt(gen_mf / gen_1000) + "; (c) " + (c ? "ok" : "no") + " median M10 " +
                           fmt(median_of(m10))};
}

Outcome ac5() {
  const auto r = run_shipped("contaminated", {"gp_p0.01", "denoising_p0.01", "gp_p0.33", "denoising_p0.33"});
  const double dn33 = median_of(final_best(r.cell("denoising_p0.33")));
  const double gp33 = median_of(final_best(r.cell("gp_p0.33")));
  const double dn01 = median_of(final_best(r.cell("denoising_p0.01")));
  const double gp01 = median_of(final_best(r.cell("gp_p0.01")));
  const bool ok = dn33 <= -0.8 && dn33 < gp33 && std::abs(dn01 - gp01) <= 0.15;
  return {ok, "p=0.33 denoising " + fmt(dn33) + " gp " + fmt(gp33) + "; p=0.01 denoising " + fmt(dn01) + " gp " +
                  fmt(gp01)};
}

Outcome ac6() {
  // rigged surface: draws are -1 (per-draw EI 1) near the optimum and +1 (EI 0) elsewhere, a_min = -0.5
  std::size_t gen_seen = 0;
  const auto sampler = [&](const Input& x, std::size_t m, Seed) {
    DrawBatch d;
    d.objectives.assign(m, std::abs(x[0]) < 0.1 ? -1.0 : 1.0);
    d.calls.post = m;
    d.calls.gen = m;
    gen_seen += m;
    return d;
  };
  FidelitySchedule s;
  s.fidelities = {10, 1000};
  const Acquisition acq{AcqType::ei, ParametricLcb{}, 1000};
  bool ok = true;
  std::size_t near_calls = 0, far_calls = 0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    AcqMinState state;
    state.reset(-0.5);
    gen_seen = 0;
    const auto near = acq_mf(Input{0.05 - 0.005 * double(k)}, sampler, acq, s, state, 0.0, Seed{k});
    ok = ok && near.gen_calls == 1010 && gen_seen == 1010 && near.fidelity_used == 1000;
    near_calls = near.gen_calls;
    gen_seen = 0;
    const auto far = acq_mf(Input{0.5 + 0.01 * double(k)}, sampler, acq, s, state, 0.0, Seed{k});
    ok = ok && far.gen_calls == 10 && gen_seen == 10 && far.fidelity_used == 10;
    far_calls = far.gen_calls;
  }
  return {ok, "near " + std::to_string(near_calls) + " gen calls, far " + std::to_string(far_calls)};
}

Outcome ac7() {
  int ok = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    Rng ra(derive_seed(Seed{707}, {s, 1})), rb(derive_seed(Seed{707}, {s, 2}));
    std::vector<double> a(5000), b(5000);
    for (auto& e : a) e = ra.normal();
    for (auto& e : b) e = 1.0 + rb.normal();
    const auto out = combine(a, b, derive_seed(Seed{707}, {s, 3}));
    ok += (std::abs(mean_of(out) - 0.5) <= 0.15 && std::abs(var_of(out) - 0.5) <= 0.2) ? 1 : 0;
  }
  // as-printed acceptance rule, kept as a regression artifact
  Rng ra(Seed{7071}), rb(Seed{7072});
  std::vector<double> a(5000), b(5000);
  for (auto& e : a) e = ra.normal();
  for (auto& e : b) e = 1.0 + rb.normal();
  const auto printed = combine(a, b, Seed{7073}, CombineRule::as_printed);
  std::ofstream(out_root() / "combine_as_printed.txt")
      << "mean " << format_number(mean_of(printed)) << "\nvariance " << format_number(var_of(printed)) << "\n";
  return {ok >= 9, std::to_string(ok) + "/10 seeds; as-printed rule mean " + fmt(mean_of(printed)) + " variance " +
                       fmt(var_of(printed))};
}

Outcome ac8() {
  Rng rng(Seed{808});
  GpHyper h;
  h.log_lengthscale = {std::log(0.35), std::log(0.6)};
  h.log_signal_var = std::log(1.3);
  h.log_noise_var = std::log(0.02);
  h.mean = -0.2;
  std::vector<std::vector<double>> u;
  Eigen::VectorXd y(3);
  for (int i = 0; i < 3; ++i) {
    u.push_back({rng.uniform(), rng.uniform()});
    y[i] = rng.normal();
  }
  const GpPredictor gp(u, y, h);
  const double sf2 = std::exp(h.log_signal_var), sn2 = std::exp(h.log_noise_var);
  const auto k = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double r2 = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) r2 += std::pow((a[j] - b[j]) / std::exp(h.log_lengthscale[j]), 2);
    return sf2 * std::exp(-0.5 * r2);
  };
  Eigen::Matrix3d K;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) K(i, j) = k(u[i], u[j]) + (i == j ? sn2 : 0.0);
  }
  const Eigen::Matrix3d inv = K.inverse();
  double worst = 0.0;
  for (int q = 0; q < 10; ++q) {
    const std::vector<double> x{rng.uniform(), rng.uniform()};
    Eigen::Vector3d kx;
    for (int i = 0; i < 3; ++i) kx[i] = k(u[i], x);
    const double mean = h.mean + kx.dot(inv * (y.array() - h.mean).matrix());
    const double var = sf2 - kx.dot(inv * kx);
    const auto got = gp.latent(x);
    worst = std::max({worst, std::abs(got.mean - mean), std::abs(got.var - var)});
  }
  return {worst <= 1e-8, "max abs difference " + fmt(worst)};
}

Outcome ac9() {
  const std::size_t n = 10000;
  std::string detail;
  bool ok = true;
  for (const auto& c : zoo_cases()) {
    const auto model = make_zoo_model(c.id, c.ctx);
    const auto h = model->infer(c.data, Seed{909});
    int passes = 0;
    for (std::uint64_t r = 0; r < 20; ++r) {
      std::vector<double> via_gen(n), direct(n);
      Rng rng(derive_seed(Seed{910}, {r}));
      for (std::size_t i = 0; i < n; ++i) {
        const Seed s = derive_seed(Seed{911}, {r, i});
        via_gen[i] = model->gen(c.query, model->post(h, s), s).objective;
        const auto z = model->post(h, derive_seed(Seed{912}, {r, i}));
        direct[i] = law_sample(model->conditional_law(c.query, z), rng);
      }
      passes += ks_two_sample_p(via_gen, direct) > 0.01 ? 1 : 0;
    }
    ok = ok && passes >= 18;
    detail += c.id + " " + std::to_string(passes) + "/20 ";
  }
  return {ok, detail};
}

Outcome ac10() {
  const auto cfg = load_config(fs::path(VERSABO_CONFIG_DIR) / "smoke.json");
  const auto a = out_root() / "det_serial_1", b = out_root() / "det_serial_2", c = out_root() / "det_parallel";
  run_benchmark(cfg, a, {true, 1});
  run_benchmark(cfg, b, {true, 1});
  run_benchmark(cfg, c, {false, 4});
  bool ok = true;
  for (const auto* f : {"trace.csv", "summary.csv"}) {
    const auto ref = slurp(a / f);
    ok = ok && !ref.empty() && ref == slurp(b / f) && ref == slurp(c / f);
  }
  return {ok, ok ? "reruns and parallel run byte-identical" : "CSV outputs differ"};
}

Outcome ac11() {
  const auto r = run_shipped("state", {"gp", "switching"});
  // objective is the negated score
  const double target = -0.95 * StateSystem().max_score();
  const auto gp = hitting_iterations(r.cell("gp"), target);
  const auto sw = hitting_iterations(r.cell("switching"), target);
  return {median_of(sw) <= median_of(gp), "median iterations switching " + fmt(median_of(sw)) + " [" + join(sw) +
                                              "] gp " + fmt(median_of(gp)) + " [" + join(gp) + "]"};
}

Outcome ac12() {
  const auto r = run_shipped("basin", {"gp", "basin"});
  const double target = BasinSystem().minimum() + 0.05;
  const auto gp = hitting_iterations(r.cell("gp"), target);
  const auto bs = hitting_iterations(r.cell("basin"), target);
  return {median_of(bs) < median_of(gp), "median iterations basin " + fmt(median_of(bs)) + " [" + join(bs) +
                                             "] gp " + fmt(median_of(gp)) + " [" + join(gp) + "]"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, Outcome (*)()>> criteria{
      {"AC1 mc acquisition oracle", ac1},   {"AC2 monte carlo rate", ac2},
      {"AC3 lcb estimators", ac3},          {"AC4 multi-fidelity cost", ac4},
      {"AC5 contaminated bo", ac5},         {"AC6 two-fidelity call counts", ac6},
      {"AC7 combine oracle", ac7},          {"AC8 gp exactness", ac8},
      {"AC9 marginal consistency", ac9},    {"AC10 determinism", ac10},
      {"AC11 state system bo", ac11},       {"AC12 basin bo", ac12},
  };
  // optional filter: acceptance AC4 AC9 ...
  std::vector<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    const std::string tag = name.substr(0, name.find(' '));
    if (!only.empty() && std::find(only.begin(), only.end(), tag) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
