// hoso: few-shot adaptation experiments on precomputed feature banks.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hoso/experiment.hpp"
#include "hoso/plot.hpp"

using namespace hoso;
namespace fs = std::filesystem;

namespace {

// Experiment flags shared by `run` and `sweep`; each is applied on top of
// the JSON config only when given.
struct ExperimentFlags {
  std::string config, bank, synthetic, preset, method, blend, out;
  std::vector<std::uint64_t> seeds;
  std::size_t shots = 0, epochs = 0, batch_size = 0, cache = 0, jobs = 0, preset_seed = 1;
  double adapter_lr = 0, ratio_lr = 0, alpha_init = 0, fixed_alpha = 0, tip_alpha = 0, tip_beta = 0;
  bool keep_cache = false, views = false;
  std::map<std::string, CLI::Option*> opts;

  void attach(CLI::App* app) {
    opts["config"] = app->add_option("--config", config, "JSON experiment config");
    opts["bank"] = app->add_option("--bank", bank, "feature-bank directory");
    opts["synthetic"] = app->add_option("--synthetic", synthetic, "JSON synthetic-bank spec");
    opts["preset"] = app->add_option("--preset", preset, "built-in synthetic bank")->check(CLI::IsMember({"overfit"}));
    opts["preset_seed"] = app->add_option("--preset-seed", preset_seed, "seed of the preset bank");
    opts["method"] = app->add_option("--method", method, "zeroshot|fixed|hoso|joint|svl|dvc|random|tip");
    opts["shots"] = app->add_option("--shots,-k", shots, "shots per class");
    opts["seeds"] = app->add_option("--seeds", seeds, "run seeds (default 1 2 3)");
    opts["epochs"] = app->add_option("--epochs", epochs);
    opts["batch_size"] = app->add_option("--batch-size", batch_size);
    opts["adapter_lr"] = app->add_option("--adapter-lr", adapter_lr);
    opts["ratio_lr"] = app->add_option("--ratio-lr", ratio_lr);
    opts["alpha_init"] = app->add_option("--alpha-init", alpha_init);
    opts["fixed_alpha"] = app->add_option("--fixed-alpha", fixed_alpha);
    opts["cache"] = app->add_option("--cache", cache, "hold-out shots per class");
    opts["keep_cache"] = app->add_flag("--keep-cache", keep_cache, "keep cache items in the adapter's training set");
    opts["blend"] = app->add_option("--blend", blend)->check(CLI::IsMember({"feature", "logit"}));
    opts["views"] = app->add_flag("--views", views, "train on one extra augmented view per item");
    opts["tip_alpha"] = app->add_option("--tip-alpha", tip_alpha);
    opts["tip_beta"] = app->add_option("--tip-beta", tip_beta);
    opts["out"] = app->add_option("--out,-o", out, "output root (HOSO_OUT overrides)");
    opts["jobs"] = app->add_option("--jobs,-j", jobs, "parallel runs");
  }

  bool given(const char* name) const { return opts.at(name)->count() > 0; }

  exp::ExperimentConfig resolve() const {
    exp::ExperimentConfig c;
    if (given("config")) c = exp::experiment_from_json(io::read_json(config));
    if (given("bank") + given("synthetic") + given("preset") > 1) {
      throw ConfigError("give only one of --bank, --synthetic, --preset");
    }
    if (given("bank")) {
      c.bank = bank;
      c.synthetic.reset();
    }
    if (given("synthetic")) {
      c.synthetic = io::synthetic_from_json(io::read_json(synthetic));
      c.bank.reset();
    }
    if (given("preset")) {
      c.synthetic = eval::overfit_fixture(preset_seed);
      c.bank.reset();
    }
    auto& t = c.train;
    if (given("method")) t.method = train::method_from_string(method);
    if (given("shots")) t.shots = shots;
    if (given("seeds")) c.seeds = seeds;
    if (given("epochs")) t.epochs = epochs;
    if (given("batch_size")) t.batch_size = batch_size;
    if (given("adapter_lr")) t.adapter_lr = adapter_lr;
    if (given("ratio_lr")) t.ratio_lr = ratio_lr;
    if (given("alpha_init")) t.alpha_init = alpha_init;
    if (given("fixed_alpha")) t.fixed_alpha = fixed_alpha;
    if (given("cache")) t.cache_per_class = cache;
    if (given("keep_cache")) t.remove_cache = !keep_cache;
    if (given("blend")) t.blend_mode = model::blend_mode_from_string(blend);
    if (given("views")) t.use_augmented_views = views;
    if (given("tip_alpha")) t.tip.alpha = tip_alpha;
    if (given("tip_beta")) t.tip.beta = tip_beta;
    if (given("out")) c.out = out;
    if (given("jobs")) c.jobs = jobs;
    exp::check(c);
    return c;
  }
};

void print_summary(const exp::RunSummary& s) {
  const auto& j = s.summary;
  std::printf("%s %s %zu-shot: accuracy %.4f +- %.4f, alpha %.4f  (%s)\n", j["dataset"].get<std::string>().c_str(),
              j["method"].get<std::string>().c_str(), j["shots"].get<std::size_t>(), s.accuracy.mean,
              s.accuracy.std, j["mean_final_alpha"].get<double>(), s.dir.string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HOSO-Adapter few-shot adaptation on precomputed embeddings"};
  app.require_subcommand(1);

  ExperimentFlags run_flags;
  auto* run = app.add_subcommand("run", "train a method over all seeds and summarise");
  run_flags.attach(run);

  ExperimentFlags sweep_flags;
  std::string axis;
  std::vector<double> values;
  auto* sweep = app.add_subcommand("sweep", "sweep one axis across seeds");
  sweep_flags.attach(sweep);
  sweep->add_option("--axis", axis, "alpha|cache|shots|ratio_lr")->required();
  sweep->add_option("--values", values, "axis values")->required();

  std::string validate_path;
  bool auto_normalize = false;
  auto* validate = app.add_subcommand("validate-bank", "check a feature bank and report zero-shot accuracy");
  validate->add_option("path", validate_path)->required();
  validate->add_flag("--auto-normalize", auto_normalize, "renormalize off-norm prototypes");

  eval::SyntheticSpec spec;
  std::string synth_out, synth_spec, synth_preset, synth_name = "synthetic";
  auto* synth = app.add_subcommand("synth", "write a synthetic feature bank");
  synth->add_option("--out,-o", synth_out)->required();
  synth->add_option("--spec", synth_spec, "JSON synthetic spec (flags win)");
  synth->add_option("--preset", synth_preset)->check(CLI::IsMember({"overfit"}));
  synth->add_option("--dataset", synth_name);
  auto* s_classes = synth->add_option("--classes", spec.num_classes);
  auto* s_dim = synth->add_option("--dim", spec.dim);
  auto* s_noise = synth->add_option("--noise", spec.within_class_noise);
  auto* s_gap = synth->add_option("--gap", spec.domain_gap);
  auto* s_spread = synth->add_option("--spread", spec.prototype_angle_spread);
  auto* s_scale = synth->add_option("--logit-scale", spec.logit_scale);
  auto* s_train = synth->add_option("--train-per-class", spec.train_per_class);
  auto* s_test = synth->add_option("--test-per-class", spec.test_per_class);
  auto* s_views = synth->add_flag("--views", spec.with_augmented);
  auto* s_seed = synth->add_option("--seed", spec.seed);

  std::vector<std::string> corr_banks;
  std::size_t corr_runs = 20;
  std::uint64_t corr_seed = 1;
  bool corr_from_test = false;
  std::string corr_out = "corr.csv";
  auto* correlate = app.add_subcommand("correlate", "one-shot vs full-test zero-shot accuracy");
  correlate->add_option("banks", corr_banks)->required();
  correlate->add_option("--runs", corr_runs);
  correlate->add_option("--seed", corr_seed);
  correlate->add_flag("--from-test", corr_from_test, "draw the single shot from the test split");
  correlate->add_option("--out,-o", corr_out);

  std::string plot_csv, plot_out, plot_x, plot_group, plot_title;
  std::vector<std::string> plot_y;
  auto* plot_cmd = app.add_subcommand("plot", "render a CSV as an SVG line chart");
  plot_cmd->add_option("csv", plot_csv)->required();
  plot_cmd->add_option("--out,-o", plot_out);
  plot_cmd->add_option("--x", plot_x, "x column (default: first)");
  plot_cmd->add_option("--y", plot_y, "y columns (default: all others)");
  auto* group_opt = plot_cmd->add_option("--group", plot_group, "one series per value of this column");
  plot_cmd->add_option("--title", plot_title);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      print_summary(exp::cmd_run(run_flags.resolve()));
    } else if (*sweep) {
      const auto c = sweep_flags.resolve();
      const auto a = exp::axis_from_string(axis);
      const auto r = exp::cmd_sweep(c, a, values);
      for (std::size_t i = 0; i < values.size(); ++i) {
        std::printf("%s=%g: accuracy %.4f +- %.4f, alpha %.4f\n", exp::to_string(a), values[i], r.accuracy[i].mean,
                    r.accuracy[i].std, r.alpha[i].mean);
      }
      if (a == exp::Axis::Alpha) std::printf("(%s: alpha selected on test accuracy)\n", eval::GridResult::kLabel);
      std::printf("%s\n", r.dir.string().c_str());
    } else if (*validate) {
      return exp::cmd_validate_bank(validate_path, std::cout, auto_normalize);
    } else if (*synth) {
      eval::SyntheticSpec s;
      if (!synth_preset.empty()) s = eval::overfit_fixture(spec.seed);
      if (!synth_spec.empty()) s = io::synthetic_from_json(io::read_json(synth_spec), s);
      if (s_classes->count()) s.num_classes = spec.num_classes;
      if (s_dim->count()) s.dim = spec.dim;
      if (s_noise->count()) s.within_class_noise = spec.within_class_noise;
      if (s_gap->count()) s.domain_gap = spec.domain_gap;
      if (s_spread->count()) s.prototype_angle_spread = spec.prototype_angle_spread;
      if (s_scale->count()) s.logit_scale = spec.logit_scale;
      if (s_train->count()) s.train_per_class = spec.train_per_class;
      if (s_test->count()) s.test_per_class = spec.test_per_class;
      if (s_views->count()) s.with_augmented = spec.with_augmented;
      if (s_seed->count()) s.seed = spec.seed;
      const auto b = exp::cmd_synth(s, synth_out, synth_name);
      std::printf("wrote %s: %zu classes, dim %zu, %zu train, %zu test, zero-shot %.4f\n", synth_out.c_str(),
                  b.num_classes, b.embedding_dim, b.train.size(), b.test.size(),
                  b.test.size() ? eval::evaluate(b, eval::zero_shot_classifier(b)).accuracy : 0.0);
    } else if (*correlate) {
      std::vector<fs::path> paths(corr_banks.begin(), corr_banks.end());
      const auto r = exp::cmd_correlate(paths, corr_runs, corr_seed, corr_from_test, corr_out);
      if (r.r) {
        std::printf("pearson r = %.4f over %zu pairs (%s)\n", *r.r, r.one_shot_acc.size(), corr_out.c_str());
      } else {
        std::printf("pearson r undefined: zero variance (%s)\n", corr_out.c_str());
      }
    } else if (*plot_cmd) {
      const auto t = plot::read_csv(plot_csv);
      if (t.header.size() < 2) throw FormatError(plot_csv + ": need at least two columns");
      const auto x = plot_x.empty() ? t.header.front() : plot_x;
      auto ys = plot_y;
      if (ys.empty()) {
        for (const auto& h : t.header) {
          if (h != x && (!group_opt->count() || h != plot_group)) ys.push_back(h);
        }
        if (group_opt->count()) ys.resize(1);
      }
      const auto series =
          plot::series_from(t, x, ys, group_opt->count() ? std::optional(plot_group) : std::nullopt);
      const auto out = plot_out.empty() ? fs::path(plot_csv).replace_extension(".svg") : fs::path(plot_out);
      io::open_text(out) << plot::line_chart_svg(
          series, {plot_title.empty() ? fs::path(plot_csv).stem().string() : plot_title, x,
                   ys.size() == 1 ? ys.front() : ""});
      std::printf("%s\n", out.string().c_str());
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
