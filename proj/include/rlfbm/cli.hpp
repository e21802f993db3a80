#pragma once

// Command-line front end. Exit codes: 0 success, 1 invalid input, 2 runtime failure.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rlfbm/experiments.hpp"

namespace rlfbm {

namespace cli_detail {

using nlohmann::ordered_json;

/// "64,32,16,8,4", entries optionally suffixed with the step symbol (Δ or d).
inline std::vector<std::size_t> parse_eps_ladder(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    const auto last = item.find_last_not_of(" \t");
    if (first == std::string::npos) throw ValidationError("empty entry in eps ladder");
    item = item.substr(first, last - first + 1);
    for (const std::string suffix : {"\xCE\x94", "d", "D"}) {
      if (item.size() > suffix.size() && item.compare(item.size() - suffix.size(), suffix.size(), suffix) == 0) {
        item.resize(item.size() - suffix.size());
        break;
      }
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || !std::isfinite(v)) throw ValidationError("eps ladder entry is not a number: " + item);
    if (v <= 0.0 || v != std::floor(v)) {
      throw ValidationError("eps must be a positive integer multiple of the grid step, got " + item);
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw ValidationError("eps ladder is empty");
  return out;
}

inline std::pair<std::string, std::string> parse_param(const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("model parameter must read key=value, got " + kv);
  return {kv.substr(0, eq), kv.substr(eq + 1)};
}

inline void apply_json_config(const std::string& file, ExperimentConfig& cfg) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open config file " + file);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config file " + file + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ValidationError("config file must hold a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "hurst") cfg.hurst = v.get<double>();
      else if (key == "horizon") cfg.horizon = v.get<double>();
      else if (key == "steps") cfg.steps = v.get<std::size_t>();
      else if (key == "ext_steps") cfg.ext_steps = v.get<std::size_t>();
      else if (key == "paths") cfg.paths = v.get<std::size_t>();
      else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
      else if (key == "model") cfg.model = v.get<std::string>();
      else if (key == "model_params") {
        cfg.model_params.clear();
        for (const auto& [pk, pv] : v.items()) {
          cfg.model_params[pk] = pv.is_string() ? pv.get<std::string>() : pv.dump();
        }
      } else if (key == "eps_ladder") {
        if (v.is_string()) {
          cfg.eps_ladder = parse_eps_ladder(v.get<std::string>());
        } else {
          std::string joined;
          for (const auto& e : v) joined += (joined.empty() ? "" : ",") + e.dump();
          cfg.eps_ladder = parse_eps_ladder(joined);
        }
      } else if (key == "out") cfg.out = v.get<std::string>();
      else if (key == "workers") cfg.workers = v.get<std::size_t>();
      else if (key == "path_index") cfg.path_index = v.get<std::uint64_t>();
      else throw ValidationError("unknown config key: " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config file " + file + ": " + e.what());
  }
}

inline ordered_json to_json(const Moments& m) {
  return {{"n", m.n}, {"mean", m.mean}, {"variance", m.variance},
          {"stderr_mean", m.stderr_mean}, {"stderr_variance", m.stderr_variance}};
}

inline ordered_json config_json(const ExperimentConfig& cfg) {
  ordered_json params = ordered_json::object();
  for (const auto& [k, v] : cfg.model_params) params[k] = v;
  return {{"hurst", cfg.hurst},     {"horizon", cfg.horizon},     {"steps", cfg.steps},
          {"ext_steps", cfg.resolved_ext()}, {"paths", cfg.paths}, {"seed", cfg.seed},
          {"model", cfg.model},     {"model_params", params},     {"eps_ladder", cfg.eps_ladder}};
}

inline ordered_json envelope(const char* experiment, const ExperimentConfig& cfg) {
  return {{"experiment", experiment}, {"version", kVersion}, {"config", config_json(cfg)}};
}

inline ordered_json eps_json(const std::vector<EpsSummary>& v) {
  ordered_json arr = ordered_json::array();
  for (const auto& e : v) {
    arr.push_back({{"eps", e.eps}, {"eps_steps", e.eps_steps}, {"lhs", to_json(e.lhs)},
                   {"l2_gap", e.gap_sq.mean}, {"l2_gap_stderr", e.gap_sq.stderr_mean}});
  }
  return arr;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file " + path);
  out << text;
  if (!out) throw std::runtime_error("failed writing output file " + path);
}

/// JSON to `<out>.json`, or to stdout when no output is given.
inline void emit_json(const ExperimentConfig& cfg, const ordered_json& j) {
  const std::string text = j.dump(2) + "\n";
  if (cfg.out.empty()) {
    std::cout << text;
  } else {
    write_text(cfg.out + ".json", text);
  }
}

inline void report_runtime(const char* what, double seconds) {
  std::fprintf(stderr, "%s finished in %.2f s\n", what, seconds);
}

inline int run_subcommand(const std::string& name, const ExperimentConfig& cfg) {
  cfg.validate();
  if (name == "simulate") {
    auto disc = cfg.discretization();
    const auto path = build_rlfbm(disc, simulate_brownian(disc->grid(), cfg.seed, cfg.path_index));
    std::ostringstream os;
    write_path_csv(os, path);
    if (cfg.out.empty()) {
      std::cout << os.str();
    } else {
      write_text(cfg.out + ".csv", os.str());
    }
    return 0;
  }
  if (name == "covariance") {
    const auto r = run_covariance_validation(cfg);
    auto j = envelope("covariance", cfg);
    j["times"] = r.times;
    j["empirical"] = r.empirical;
    j["exact"] = r.exact;
    j["stderr"] = r.stderr_entry;
    j["max_rel_error"] = r.max_rel_error;
    j["max_abs_z"] = r.max_abs_z;
    j["terminal_variance"] = {{"plain", r.terminal.variance},
                              {"plain_stderr", r.terminal.stderr_variance},
                              {"controlled", r.terminal_variance_cv.variance},
                              {"controlled_stderr", r.terminal_variance_cv.stderr_variance}};
    emit_json(cfg, j);
    report_runtime("covariance", r.runtime_seconds);
    return 0;
  }
  if (name == "identity") {
    const auto r = run_identity_experiment(cfg);
    auto j = envelope("identity", cfg);
    j["model"] = r.model;
    j["drift"] = r.drift;
    j["rhs_total"] = to_json(r.rhs_total);
    j["rhs_stochastic"] = to_json(r.rhs_stochastic);
    j["kcal_energy"] = to_json(r.kcal_energy);
    j["rhs_variance_controlled"] = {{"variance", r.rhs_variance_cv.variance},
                                    {"stderr", r.rhs_variance_cv.stderr_variance}};
    if (r.has_oracle) j["oracle_l2_gap"] = {{"mean", r.oracle_gap_sq.mean}, {"stderr", r.oracle_gap_sq.stderr_mean}};
    j["per_eps"] = eps_json(r.per_eps);
    if (!cfg.out.empty()) {
      std::ostringstream os;
      write_identity_csv(os, cfg, r);
      write_text(cfg.out + ".csv", os.str());
    }
    emit_json(cfg, j);
    report_runtime("identity", r.runtime_seconds);
    return 0;
  }
  if (name == "wiener") {
    const auto r = run_wiener(cfg);
    auto j = envelope("wiener", cfg);
    j["model"] = r.model;
    j["integral"] = to_json(r.integral);
    j["hnorm_sq"] = r.hnorm;
    j["per_eps"] = eps_json(r.per_eps);
    emit_json(cfg, j);
    report_runtime("wiener", r.runtime_seconds);
    return 0;
  }
  if (name == "diagnostics") {
    const auto r = run_assumption_diagnostics(cfg);
    auto j = envelope("diagnostics", cfg);
    ordered_json arr = ordered_json::array();
    for (const auto& e : r.entries) {
      arr.push_back({{"name", e.name}, {"value_n", e.value_n}, {"value_2n", e.value_2n},
                     {"stable", e.stable}, {"warning", e.warning}});
      if (e.warning) std::fprintf(stderr, "warning: %s grows by more than 2x under refinement\n", e.name.c_str());
    }
    j["entries"] = arr;
    emit_json(cfg, j);
    report_runtime("diagnostics", r.runtime_seconds);
    return 0;
  }
  if (name == "isometry") {
    const auto r = run_isometry_expansion(cfg);
    auto j = envelope("isometry", cfg);
    j["lhs"] = to_json(r.lhs);
    j["rhs"] = to_json(r.rhs);
    j["difference"] = to_json(r.difference);
    j["rhs_kernel_term"] = to_json(r.rhs_kernel_term);
    j["rhs_bold_terms"] = to_json(r.rhs_bold_terms);
    emit_json(cfg, j);
    report_runtime("isometry", r.runtime_seconds);
    return 0;
  }
  if (name == "sweep") {
    const auto r = run_sweep(cfg);
    auto j = envelope("sweep", cfg);
    ordered_json arr = ordered_json::array();
    for (const auto& l : r.levels) {
      arr.push_back({{"steps", l.steps},
                     {"oracle_rmse", std::sqrt(l.oracle_gap_sq.mean)},
                     {"oracle_l2_gap", l.oracle_gap_sq.mean},
                     {"oracle_l2_gap_stderr", l.oracle_gap_sq.stderr_mean},
                     {"forward_eps_steps", l.eps_steps},
                     {"forward_l2_gap", l.forward_gap_sq.mean}});
    }
    j["levels"] = arr;
    emit_json(cfg, j);
    report_runtime("sweep", r.runtime_seconds);
    return 0;
  }
  throw ValidationError("unknown subcommand " + name);
}

}  // namespace cli_detail

inline int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Riemann-Liouville fBm: forward integrals against their martingale representation"};
  app.require_subcommand(1);

  ExperimentConfig cfg;
  std::string ladder;
  std::vector<std::string> params;
  std::string config_file;
  app.add_option("--hurst", cfg.hurst, "Hurst index in (1/2, 1)");
  app.add_option("--horizon", cfg.horizon, "time horizon T");
  app.add_option("--steps", cfg.steps, "grid steps on [0,T]");
  app.add_option("--ext-steps", cfg.ext_steps, "grid steps beyond T (default: largest eps)");
  app.add_option("--paths", cfg.paths, "Monte Carlo paths");
  app.add_option("--seed", cfg.seed, "random seed");
  app.add_option("--model", cfg.model, "integrand: constant, power_t, linear, square, cube, cos, fracmart");
  app.add_option("--model-param", params, "model parameter key=value (repeatable)");
  app.add_option("--eps-ladder", ladder, "eps values in grid steps, e.g. 64,32,16,8,4");
  app.add_option("--out", cfg.out, "output path prefix (.csv/.json appended)");
  app.add_option("--workers", cfg.workers, "worker threads (0: all cores)");
  app.add_option("--path-index", cfg.path_index, "path exported by simulate");
  app.add_option("--config", config_file, "JSON config; its keys override the flags");

  const char* names[] = {"simulate", "covariance", "identity", "wiener", "diagnostics", "isometry", "sweep"};
  const char* help[] = {"export one simulated path (t, W, B)",
                        "Monte Carlo covariance of B against the exact kernel",
                        "forward estimate versus the martingale representation",
                        "forward estimate versus the Wiener integral for deterministic g",
                        "discrete integrability diagnostics at n and 2n",
                        "three-term isometry expansion (steps <= 128)",
                        "representation error against the chain rule over n/4, n/2, n"};
  for (std::size_t i = 0; i < std::size(names); ++i) app.add_subcommand(names[i], help[i])->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    if (!ladder.empty()) cfg.eps_ladder = cli_detail::parse_eps_ladder(ladder);
    for (const auto& kv : params) {
      const auto [k, v] = cli_detail::parse_param(kv);
      cfg.model_params[k] = v;
    }
    if (!config_file.empty()) cli_detail::apply_json_config(config_file, cfg);
    const std::string sub = app.get_subcommands().front()->get_name();
    return cli_detail::run_subcommand(sub, cfg);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace rlfbm
