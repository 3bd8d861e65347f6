// Acceptance suite: one PASS/FAIL line per criterion, synthetic banks only.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "hoso/eval.hpp"
#include "hoso/optim.hpp"
#include "hoso/synthetic.hpp"
#include "hoso/trainers.hpp"
#include "oracles.hpp"

using namespace hoso;
using train::Method;
using train::TrainConfig;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

struct Check {
  std::string detail;
  bool ok = true;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) detail = what;
    ok = ok && cond;
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void criterion(const char* name, const std::function<void(Check&)>& body) {
  Check c;
  const auto t0 = Clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.ok = false;
    c.detail = std::string("exception: ") + e.what();
  }
  std::printf("%s %s (%.2fs)%s%s\n", c.ok ? "PASS" : "FAIL", name, seconds_since(t0), c.detail.empty() ? "" : ": ",
              c.detail.c_str());
  std::fflush(stdout);
  if (!c.ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

void gradient_fd(Check& c) {
  const auto t0 = Clock::now();
  const double h = 1e-4;
  double worst = 0;
  for (auto mode : {model::BlendMode::Feature, model::BlendMode::Logit}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      Rng rng(seed);
      num::Matrix<float> protos(3, 8);
      for (std::size_t k = 0; k < 3; ++k) {
        std::vector<double> row(8);
        for (auto& x : row) x = rng.normal();
        const auto n = num::l2_normalize(std::span<const double>(row));
        for (std::size_t i = 0; i < 8; ++i) protos(k, i) = static_cast<float>(n.unit[i]);
      }
      auto p = model::init_adapter<double>(8, seed + 1, 0.3);
      for (auto& b : p.b1) b = rng.uniform(-0.3, 0.3);
      for (auto& b : p.b2) b = rng.uniform(-0.3, 0.3);
      std::vector<double> v(8);
      for (auto& x : v) x = rng.normal();
      const std::size_t label = seed % 3;
      const model::Head head{protos, 10.0};
      const auto loss = [&] {
        auto t = model::forward(head, p, std::span<const double>(v), model::alpha_from_logit(p.alpha_logit), mode);
        return num::softmax_xent(t.logits, label).loss;
      };
      auto tape = model::forward(head, p, std::span<const double>(v), model::alpha_from_logit(p.alpha_logit), mode);
      const auto x = num::softmax_xent(tape.logits, label);
      model::Gradients g(p);
      model::model_backward(tape, head, p, x.grad_logits, g);
      worst = std::max({worst,
                        oracle::relative_error(g.w1.flat(), oracle::central_differences(p.w1.flat(), h, loss)),
                        oracle::relative_error(g.b1, oracle::central_differences(std::span<double>(p.b1), h, loss)),
                        oracle::relative_error(g.w2.flat(), oracle::central_differences(p.w2.flat(), h, loss)),
                        oracle::relative_error(g.b2, oracle::central_differences(std::span<double>(p.b2), h, loss)),
                        oracle::relative_error(std::span<const double>(&g.alpha_logit, 1),
                                               oracle::central_differences(std::span<double>(&p.alpha_logit, 1), h,
                                                                           loss))});
    }
  }
  const double t = seconds_since(t0);
  c.expect(worst < 1e-4, fmt("worst relative error %.3g", worst));
  c.expect(t < 1.0, fmt("took %.2fs", t));
  c.detail = c.ok ? fmt("worst relative error %.3g over 10 toys", worst) : c.detail;
}

void alpha_transform(Check& c) {
  c.expect(std::abs(model::alpha_from_logit(0.0) - 0.5) <= 1e-12, "alpha(0) != 0.5");
  double prev = -1;
  for (int i = 0; i < 1000; ++i) {
    const double z = -50.0 + 100.0 * i / 999.0;
    const double a = model::alpha_from_logit(z);
    c.expect(a > 0.1 && a < 0.9, fmt("alpha(%.3f) = %.17g outside (0.1, 0.9)", z, a));
    c.expect(a >= prev, fmt("not monotone at logit %.3f", z));
    prev = a;
  }
  c.expect(model::alpha_from_logit(-50.0) < model::alpha_from_logit(50.0), "not increasing end to end");
}

void endpoints(Check& c) {
  const auto b = eval::make_synthetic_bank(eval::overfit_fixture(1));
  const double zs = eval::evaluate(b, eval::zero_shot_classifier(b)).accuracy;
  TrainConfig cfg;
  cfg.method = Method::Fixed;
  cfg.fixed_alpha = 0.0;
  cfg.epochs = 20;
  cfg.seed = 1;
  c.expect(*train::train(b, cfg).report.test_accuracy == zs, "fixed alpha=0 accuracy differs from zero-shot");

  const auto s = bank::sample_few_shot(b, 16, 1);
  const auto tip = train::tip_adapter(b, s, {0.0, 1.0});
  const auto head = model::Head::of(b);
  double worst = 0;
  for (std::size_t i = 0; i < b.test.size(); ++i) {
    const auto a = tip.logits(b.test.feature(i));
    const auto z = model::zero_shot_logits(head, b.test.feature(i));
    for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - z[k]));
    c.expect(num::argmax(a) == num::argmax(z), "tip alpha=0 argmax differs");
  }
  c.expect(worst <= 1e-6, fmt("tip alpha=0 logit difference %.3g", worst));

  const std::vector<double> grid{0.0, 0.3, 0.6};
  const auto g = eval::grid_search_alpha(b, cfg, grid, 1);
  c.expect(g.rows.front().accuracy == zs, "grid row at alpha=0 differs from zero-shot");
  c.detail = c.ok ? fmt("zero-shot accuracy %.4f, tip logit diff %.2g", zs, worst) : c.detail;
}

void isolation_and_determinism(Check& iso, Check& det) {
  const auto b = eval::make_synthetic_bank(eval::overfit_fixture(1));
  TrainConfig cfg;
  cfg.seed = 1;
  const auto support = bank::sample_few_shot(b, cfg.shots, cfg.seed);
  const auto split = bank::split_hoso_cache(support, cfg.cache_per_class, true, cfg.seed);
  const std::set<std::size_t> cache(split.cache.indices.begin(), split.cache.indices.end());
  std::size_t adapter_steps = 0, ratio_steps = 0;
  train::TrainObserver obs;
  obs.on_step = [&](const train::StepEvent& e) {
    if (e.kind == train::StepKind::Adapter) {
      ++adapter_steps;
      iso.expect(e.alpha_logit_before == e.alpha_logit_after, "adapter step changed alpha_logit");
      for (auto i : e.items) iso.expect(!cache.contains(i), "cache item in adapter minibatch");
    } else {
      ++ratio_steps;
      iso.expect(e.psi_before == e.psi_after, "ratio step changed adapter weights");
    }
  };
  const auto t0 = Clock::now();
  const auto r = train::train_hoso(b, cfg, &obs);
  const double t = seconds_since(t0);
  iso.expect(ratio_steps == cfg.epochs, "ratio step count != epochs");
  iso.expect(adapter_steps == cfg.epochs * 5, "adapter step count != epochs * ceil(150/32)");
  iso.expect(r.report.trace.alpha[1] != r.report.trace.alpha[0], "alpha never moved");
  iso.expect(t < 30.0, fmt("took %.2fs", t));
  if (iso.ok) iso.detail = fmt("%.0f adapter and %.0f ratio steps checked", double(adapter_steps), double(ratio_steps));

  const auto again = train::train_hoso(b, cfg);
  det.expect(again.report.trace == r.report.trace, "HOSO traces differ");
  det.expect(again.report.test_accuracy == r.report.test_accuracy, "HOSO accuracy differs");
  for (auto m : {Method::Joint, Method::Dvc, Method::Tip, Method::Random}) {
    auto mc = cfg;
    mc.method = m;
    mc.epochs = 30;
    auto vb = m == Method::Dvc ? [] {
      auto s = eval::overfit_fixture(1);
      s.with_augmented = true;
      return eval::make_synthetic_bank(s);
    }()
                               : b;
    const auto x = train::train(vb, mc), y = train::train(vb, mc);
    det.expect(x.report.trace == y.report.trace && x.report.step_alpha.size() == y.report.step_alpha.size() &&
                   std::equal(x.report.step_alpha.begin(), x.report.step_alpha.end(), y.report.step_alpha.begin()) &&
                   x.report.test_accuracy == y.report.test_accuracy,
               std::string(train::to_string(m)) + " run not reproducible");
  }
}

struct Arm {
  const char* name;
  std::function<void(TrainConfig&)> edit;
  double acc = 0, alpha = 0, gap = 0;
};

void table3(Check& c) {
  std::vector<Arm> arms{
      {"hoso", [](TrainConfig&) {}},
      {"joint", [](TrainConfig& t) { t.method = Method::Joint; }},
      {"keep", [](TrainConfig& t) { t.remove_cache = false; }},
      {"cache8", [](TrainConfig& t) { t.cache_per_class = 8; }},
  };
  const auto t0 = Clock::now();
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto b = eval::make_synthetic_bank(eval::overfit_fixture(seed));
    for (auto& a : arms) {
      TrainConfig cfg;
      cfg.seed = seed;
      a.edit(cfg);
      const auto r = train::train(b, cfg).report;
      a.acc += *r.test_accuracy / 3;
      a.alpha += r.final_alpha / 3;
      a.gap += r.gap.back() / 3;
    }
  }
  const double t = seconds_since(t0);
  const auto& h = arms[0];
  const double slack = 0.005;
  for (const auto& a : arms) {
    std::printf("  %-7s acc %.4f  alpha %.3f  gap %.3f\n", a.name, a.acc, a.alpha, a.gap);
  }
  c.expect(h.acc >= arms[1].acc - slack, "HOSO below joint");
  c.expect(h.acc >= arms[2].acc - slack, "HOSO below keep-cache-in-train");
  c.expect(h.acc >= arms[3].acc - slack, "HOSO(cache=1) below HOSO(cache=8)");
  c.expect(h.alpha <= arms[1].alpha, "HOSO alpha above joint alpha");
  c.expect(h.gap <= arms[1].gap, "HOSO gap above joint gap");
  c.expect(t < 300.0, fmt("took %.1fs", t));
}

void fig1(Check& c) {
  std::vector<bank::FeatureBank> banks;
  double lo = 1, hi = 0;
  for (const auto& s : eval::correlation_family(8, 1)) {
    banks.push_back(eval::make_synthetic_bank(s));
    const double zs = eval::evaluate(banks.back(), eval::zero_shot_classifier(banks.back())).accuracy;
    lo = std::min(lo, zs);
    hi = std::max(hi, zs);
  }
  const auto r = eval::pooled_correlation(banks, 20, 1);

  // Independent recomputation of r from the pairs.
  const auto& x = r.one_shot_acc;
  const auto& y = r.full_acc;
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= x.size();
  my /= y.size();
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double direct = static_cast<double>(sxy / std::sqrt(sxx * syy));
  c.expect(r.r.has_value(), "r undefined");
  c.expect(x.size() == 160, "expected 8 x 20 pairs");
  c.expect(r.r && std::abs(*r.r - direct) < 1e-12, "engine r disagrees with direct computation");
  c.expect(lo <= 0.3 && hi >= 0.9, fmt("zero-shot span %.3f..%.3f too narrow", lo, hi));
  c.expect(r.r && *r.r > 0.9, fmt("r = %.4f", r.r.value_or(NAN)));
  if (c.ok) c.detail = fmt("r = %.4f, zero-shot span %.3f..%.3f", *r.r, lo, hi);
}

void optimizer(Check& c) {
  std::vector<double> w{0.3}, g{0.7};
  optim::Sgd opt({0.9, 0.0});
  const double lr = 0.002;
  std::vector<optim::ParamRef<double>> group{{"w", w, g}};
  opt.step(group, lr);
  opt.step(group, lr);
  const double disp = 0.3 - w[0];
  c.expect(std::abs(disp - lr * (0.7 + (1.0 + 0.9) * 0.7)) <= 1e-10, fmt("displacement %.17g", disp));
  c.expect(std::abs(optim::cosine_lr(0, 200, 0.002) - 0.002) <= 1e-12, "cosine start");
  c.expect(std::abs(optim::cosine_lr(200, 200, 0.002)) <= 1e-12, "cosine end");
  c.expect(std::abs(optim::cosine_lr(100, 200, 0.002) - 0.001) <= 1e-12, "cosine midpoint");
}

void svl(Check& c) {
  auto b = eval::make_synthetic_bank(eval::overfit_fixture(1));
  b.logit_scale = 0.0;
  const auto s = bank::sample_few_shot(b, 16, 1);
  const double a = train::alpha_svl(b, s);
  c.expect(std::abs(a - (1.0 - 1.0 / 10.0)) <= 1e-9, fmt("alpha %.17g", a));
}

void dvc(Check& c) {
  auto spec = eval::overfit_fixture(1);
  spec.with_augmented = true;
  auto same = eval::make_synthetic_bank(spec);
  same.augmented->strong = same.augmented->weak;
  const auto items = eval::all_items(same.train);
  const double d = train::dual_view_consistency(*same.augmented, items);
  c.expect(std::abs(d - 1.0) <= 1e-7, fmt("dvc %.17g with identical views", d));

  const auto b = eval::make_synthetic_bank(spec);
  TrainConfig cfg;
  cfg.method = Method::Dvc;
  cfg.epochs = 40;
  cfg.seed = 1;
  cfg.alpha_init = 0.5;
  cfg.dvc.alpha_min = 0.3;
  cfg.dvc.alpha_max = 0.45;
  cfg.dvc.smooth = 1.0;
  const auto r = train::train(b, cfg).report;
  c.expect(!r.step_alpha.empty(), "no alpha updates recorded");
  for (double a : r.step_alpha) c.expect(a >= 0.3 && a <= 0.45, fmt("alpha %.4f outside [0.3, 0.45]", a));
  for (std::size_t e = 1; e < r.trace.size(); ++e) {
    c.expect(r.trace.alpha[e] >= 0.3 && r.trace.alpha[e] <= 0.45, "epoch alpha outside bounds");
  }
  cfg.dvc.smooth = 0.0;
  const auto frozen = train::train(b, cfg).report;
  for (double a : frozen.step_alpha) c.expect(a == 0.5, "smooth=0 moved alpha");
  c.expect(frozen.final_alpha == 0.5, "smooth=0 final alpha moved");
}

}  // namespace

int main() {
  criterion("gradient-finite-differences", gradient_fd);
  criterion("alpha-transform", alpha_transform);
  criterion("endpoint-equivalences", endpoints);
  {
    Check iso, det;
    const auto t0 = Clock::now();
    try {
      isolation_and_determinism(iso, det);
    } catch (const std::exception& e) {
      iso.expect(false, std::string("exception: ") + e.what());
      det.expect(false, std::string("exception: ") + e.what());
    }
    const double t = seconds_since(t0);
    for (auto [name, c] : {std::pair{"decoupled-isolation", &iso}, std::pair{"determinism", &det}}) {
      std::printf("%s %s (%.2fs)%s%s\n", c->ok ? "PASS" : "FAIL", name, t, c->detail.empty() ? "" : ": ",
                  c->detail.c_str());
      if (!c->ok) ++failures;
    }
  }
  criterion("ablation-structure", table3);
  criterion("one-shot-correlation", fig1);
  criterion("optimizer-math", optimizer);
  criterion("svl-alpha", svl);
  criterion("dvc-trainer", dvc);
  std::printf("%d failed\n", failures);
  return failures == 0 ? 0 : 1;
}
