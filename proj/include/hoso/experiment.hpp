#pragma once

// Reproducible experiments over seeds: the commands behind the CLI.
//
// Layout under the output root (HOSO_OUT, else config.out):
//   <dataset>/<method>/<K>shot/seed<i>/{report.json, trace.csv, gap.csv, model/}
//   <dataset>/<method>/<K>shot/summary.json
//   <dataset>/<method>/<K>shot/sweep-<axis>/{sweep.csv, sweep_summary.csv, ...}

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hoso/errors.hpp"
#include "hoso/eval.hpp"
#include "hoso/featurebank.hpp"
#include "hoso/model.hpp"
#include "hoso/parallel.hpp"
#include "hoso/report_io.hpp"
#include "hoso/synthetic.hpp"
#include "hoso/trainers.hpp"

namespace hoso::exp {

namespace fs = std::filesystem;
using nlohmann::json;

struct ExperimentConfig {
  std::optional<fs::path> bank;
  std::optional<eval::SyntheticSpec> synthetic;
  train::TrainConfig train;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  fs::path out = "out";
  std::size_t jobs = 1;
};

inline void check(const ExperimentConfig& c) {
  if (c.bank.has_value() == c.synthetic.has_value()) {
    throw ConfigError("exactly one data source required: a bank path or a synthetic spec");
  }
  if (c.seeds.empty()) throw ConfigError("seed list is empty");
  if (c.jobs == 0) throw ConfigError("jobs must be at least 1");
  if (c.train.method != train::Method::ZeroShot && c.train.shots == 0) throw ConfigError("shots must be positive");
}

inline json to_json(const ExperimentConfig& c) {
  json j = {
      {"train", io::to_json(c.train)},
      {"seeds", c.seeds},
      {"out", c.out.string()},
      {"jobs", c.jobs},
  };
  if (c.bank) j["bank"] = c.bank->string();
  if (c.synthetic) j["synthetic"] = io::to_json(*c.synthetic);
  return j;
}

inline ExperimentConfig experiment_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  io::detail::reject_unknown(j, {"bank", "synthetic", "train", "seeds", "out", "jobs"}, "experiment");
  ExperimentConfig c;
  if (j.contains("bank")) c.bank = j.at("bank").get<std::string>();
  if (j.contains("synthetic")) c.synthetic = io::synthetic_from_json(j.at("synthetic"));
  if (j.contains("train")) c.train = io::config_from_json(j.at("train"));
  io::detail::read(j, "seeds", c.seeds);
  if (j.contains("out")) c.out = j.at("out").get<std::string>();
  io::detail::read(j, "jobs", c.jobs);
  return c;
}

inline fs::path output_root(const ExperimentConfig& c) {
  if (const char* env = std::getenv("HOSO_OUT"); env && *env) return env;
  return c.out;
}

inline bank::FeatureBank load_source(const ExperimentConfig& c) {
  check(c);
  return c.bank ? bank::load_bank(*c.bank) : eval::make_synthetic_bank(*c.synthetic);
}

inline std::string dataset_name(const bank::FeatureBank& b) { return b.dataset.empty() ? "unnamed" : b.dataset; }

inline std::size_t effective_shots(const train::TrainConfig& t) {
  return t.method == train::Method::ZeroShot ? 0 : t.shots;
}

inline fs::path method_dir(const fs::path& root, const std::string& dataset, const train::TrainConfig& t) {
  return root / dataset / train::to_string(t.method) / (std::to_string(effective_shots(t)) + "shot");
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1) standard deviation; 0 for one value
};

inline MeanStd mean_std(std::span<const double> v) {
  MeanStd out;
  if (v.empty()) return out;
  for (double x : v) out.mean += x;
  out.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return out;
}

inline bool trains_adapter(train::Method m) { return m != train::Method::ZeroShot && m != train::Method::Tip; }

// One training run; artefacts go to dir when given.
inline train::RunReport run_one(const bank::FeatureBank& b, train::TrainConfig cfg, std::uint64_t seed,
                                const std::optional<fs::path>& dir) {
  cfg.seed = seed;
  auto res = train::train(b, cfg);
  if (dir) {
    io::write_json(io::to_json(res.report), *dir / "report.json");
    io::write_trace_csv(res.report.trace, *dir / "trace.csv");
    eval::write_gap_csv(res.report.gap, *dir / "gap.csv");
    if (trains_adapter(cfg.method)) model::save_model(res.model, *dir / "model");
  }
  return std::move(res.report);
}

struct RunSummary {
  fs::path dir;
  std::vector<train::RunReport> reports;
  MeanStd accuracy;
  json summary;
};

inline json summarize(const ExperimentConfig& c, const bank::FeatureBank& b,
                      const std::vector<train::RunReport>& reports, MeanStd& acc) {
  std::vector<double> accs, alphas;
  for (const auto& r : reports) {
    accs.push_back(r.test_accuracy.value_or(std::nan("")));
    alphas.push_back(r.final_alpha);
  }
  acc = mean_std(accs);
  const auto alpha = mean_std(alphas);
  auto echo = to_json(c);
  echo.erase("out");
  echo.erase("jobs");
  return {
      {"config", echo},
      {"dataset", dataset_name(b)},
      {"bank_hash", io::hex64(bank::content_hash(b))},
      {"method", train::to_string(c.train.method)},
      {"shots", effective_shots(c.train)},
      {"seeds", c.seeds},
      {"accuracies", io::numbers(accs)},
      {"final_alphas", io::numbers(alphas)},
      {"mean_accuracy", io::number(acc.mean)},
      {"std_accuracy", io::number(acc.std)},
      {"mean_final_alpha", alpha.mean},
      {"std_final_alpha", alpha.std},
  };
}

inline RunSummary cmd_run(const ExperimentConfig& c) {
  const auto b = load_source(c);
  const auto dir = method_dir(output_root(c), dataset_name(b), c.train);
  RunSummary out;
  out.dir = dir;
  out.reports.resize(c.seeds.size());
  parallel_for(c.seeds.size(), c.jobs, [&](std::size_t i) {
    out.reports[i] = run_one(b, c.train, c.seeds[i], dir / ("seed" + std::to_string(c.seeds[i])));
  });
  out.summary = summarize(c, b, out.reports, out.accuracy);
  io::write_json(out.summary, dir / "summary.json");
  return out;
}

// ---------------------------------------------------------------------------
// sweeps

enum class Axis { Alpha, Cache, Shots, RatioLr };

inline const char* to_string(Axis a) noexcept {
  switch (a) {
    case Axis::Alpha: return "alpha";
    case Axis::Cache: return "cache";
    case Axis::Shots: return "shots";
    case Axis::RatioLr: return "ratio_lr";
  }
  return "?";
}

inline Axis axis_from_string(const std::string& s) {
  for (auto a : {Axis::Alpha, Axis::Cache, Axis::Shots, Axis::RatioLr}) {
    if (s == to_string(a)) return a;
  }
  throw ConfigError("unknown sweep axis '" + s + "' (expected alpha|cache|shots|ratio_lr)");
}

inline train::TrainConfig apply_axis(train::TrainConfig t, Axis axis, double v) {
  const auto whole = [&](const char* what) {
    if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError(std::string(what) + " must be a positive integer");
    return static_cast<std::size_t>(v);
  };
  switch (axis) {
    case Axis::Alpha:
      t.method = train::Method::Fixed;
      t.fixed_alpha = v;
      break;
    case Axis::Cache: t.cache_per_class = whole("cache size"); break;
    case Axis::Shots: t.shots = whole("shots"); break;
    case Axis::RatioLr: t.ratio_lr = v; break;
  }
  return t;
}

struct SweepRow {
  double value = 0.0;
  std::uint64_t seed = 0;
  train::RunReport report;
};

struct SweepResult {
  fs::path dir;
  std::vector<SweepRow> rows;               // value-major, seed-minor
  std::vector<MeanStd> accuracy, alpha;     // per value
};

// Cross product of axis values and seeds. The alpha axis selects on test
// accuracy and is written as an oracle (grid.csv, per_class.csv).
inline SweepResult cmd_sweep(const ExperimentConfig& c, Axis axis, const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  const auto b = load_source(c);
  auto base = c.train;
  if (axis == Axis::Alpha) base.method = train::Method::Fixed;
  SweepResult out;
  out.dir = method_dir(output_root(c), dataset_name(b), base) / (std::string("sweep-") + to_string(axis));
  std::vector<train::TrainConfig> configs;
  for (double v : values) configs.push_back(apply_axis(base, axis, v));

  const auto n_seeds = c.seeds.size();
  out.rows.resize(values.size() * n_seeds);
  parallel_for(out.rows.size(), c.jobs, [&](std::size_t k) {
    const auto vi = k / n_seeds, si = k % n_seeds;
    out.rows[k] = {values[vi], c.seeds[si], run_one(b, configs[vi], c.seeds[si], std::nullopt)};
  });

  auto csv = io::open_text(out.dir / "sweep.csv");
  csv.precision(17);
  csv << to_string(axis) << ",seed,accuracy,final_alpha\n";
  for (const auto& r : out.rows) {
    csv << r.value << ',' << r.seed << ',' << r.report.test_accuracy.value_or(std::nan("")) << ','
        << r.report.final_alpha << '\n';
  }
  auto summary = io::open_text(out.dir / "sweep_summary.csv");
  summary.precision(17);
  summary << to_string(axis) << ",mean_accuracy,std_accuracy,mean_final_alpha\n";
  for (std::size_t vi = 0; vi < values.size(); ++vi) {
    std::vector<double> accs, alphas;
    for (std::size_t si = 0; si < n_seeds; ++si) {
      const auto& r = out.rows[vi * n_seeds + si].report;
      accs.push_back(r.test_accuracy.value_or(std::nan("")));
      alphas.push_back(r.final_alpha);
    }
    out.accuracy.push_back(mean_std(accs));
    out.alpha.push_back(mean_std(alphas));
    summary << values[vi] << ',' << out.accuracy.back().mean << ',' << out.accuracy.back().std << ','
            << out.alpha.back().mean << '\n';
  }

  if (axis == Axis::Alpha) {
    eval::GridResult grid;
    eval::PerClassSweep pc;
    pc.alphas = values;
    pc.accuracy = num::Matrix<double>(b.num_classes, values.size());
    for (std::size_t vi = 0; vi < values.size(); ++vi) {
      grid.rows.push_back({values[vi], out.accuracy[vi].mean, {}});
      for (std::size_t si = 0; si < n_seeds; ++si) {
        const auto& per = out.rows[vi * n_seeds + si].report.per_class_accuracy;
        for (std::size_t cl = 0; cl < per.size(); ++cl) pc.accuracy(cl, vi) += per[cl] / static_cast<double>(n_seeds);
      }
    }
    eval::write_grid_csv(grid, out.dir / "grid.csv");
    eval::write_per_class_csv(pc, out.dir / "per_class.csv");
    io::write_json({{"selection", eval::GridResult::kLabel}, {"note", "alpha chosen on test accuracy"}},
                   out.dir / "ORACLE.json");
  }
  return out;
}

// ---------------------------------------------------------------------------
// bank utilities

// Returns the exit code; diagnostics go to `out`.
inline int cmd_validate_bank(const fs::path& path, std::ostream& out, bool auto_normalize = false) {
  try {
    const auto b = bank::load_bank(path, {.auto_normalize = auto_normalize});
    double lo = 1e300, hi = -1e300;
    for (std::size_t c = 0; c < b.num_classes; ++c) {
      const double n = num::norm2(b.text_prototypes.row(c));
      lo = std::min(lo, n);
      hi = std::max(hi, n);
    }
    out << "OK " << path.string() << '\n';
    out << "  dataset " << dataset_name(b) << ", backbone " << (b.backbone.empty() ? "?" : b.backbone) << '\n';
    out << "  classes " << b.num_classes << ", dim " << b.embedding_dim << ", train " << b.train.size()
        << ", test " << b.test.size() << (b.has_augmented() ? ", with weak/strong views" : "") << '\n';
    out << "  prototype norms [" << lo << ", " << hi << "], logit scale " << b.logit_scale << '\n';
    if (b.test.size() == 0) {
      out << "  warning: no test split; zero-shot accuracy unavailable\n";
    } else {
      out << "  zero-shot accuracy " << eval::evaluate(b, eval::zero_shot_classifier(b)).accuracy << '\n';
    }
    return 0;
  } catch (const Error& e) {
    out << "FAIL " << path.string() << "\n  " << e.kind() << ": " << e.what() << '\n';
    return 1;
  }
}

inline bank::FeatureBank cmd_synth(const eval::SyntheticSpec& spec, const fs::path& dir,
                                   const std::string& dataset = "synthetic") {
  auto b = eval::make_synthetic_bank(spec);
  b.dataset = dataset;
  bank::write_bank(b, dir);
  io::write_json(io::to_json(spec), dir / "synthetic_spec.json");
  return b;
}

inline eval::CorrelationResult cmd_correlate(const std::vector<fs::path>& banks, std::size_t runs,
                                             std::uint64_t seed, bool from_test, const fs::path& csv) {
  if (banks.empty()) throw ConfigError("correlate needs at least one bank");
  std::vector<bank::FeatureBank> loaded;
  for (const auto& p : banks) loaded.push_back(bank::load_bank(p));
  const auto r = loaded.size() == 1 ? eval::one_shot_correlation(loaded.front(), runs, seed, from_test)
                                    : eval::pooled_correlation(loaded, runs, seed, from_test);
  eval::write_corr_csv(r, csv);
  return r;
}

}  // namespace hoso::exp
