// Command-line front end: run specs, presets and the circulant studies.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "lhb/harness.hpp"

using nlohmann::json;

namespace {

int fail(const std::string& kind, const std::string& message, const std::string& field = "") {
  json err{{"error", kind}, {"message", message}};
  if (!field.empty()) err["field"] = field;
  std::cerr << err.dump() << '\n';
  return kind == "usage" ? 2 : 1;
}

void report(const lhb::RunSummary& s) {
  std::printf("%s: %zu files, %.1fs", s.output_dir.string().c_str(), s.files.size(),
              s.wall_seconds);
  if (!s.failures.empty()) std::printf(", %zu failed trials", s.failures.size());
  std::printf("\n");
}

std::string sparsity_dir(long s) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%02ld", s);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Long-horizon bandit experiments"};
  app.require_subcommand(1);
  unsigned workers = 0;
  app.add_option("--workers", workers, "Worker threads (default: LHB_WORKERS or all cores)");

  auto* run = app.add_subcommand("run", "Run an experiment spec (JSON)");
  std::string spec_path;
  std::optional<std::string> run_out;
  run->add_option("spec", spec_path, "Spec file")->required();
  run->add_option("--out", run_out, "Override output directory");

  auto* pre = app.add_subcommand("preset", "Run a named figure preset");
  std::string preset_name;
  std::optional<std::string> preset_out;
  std::optional<long> preset_s;
  std::optional<long> preset_trials;
  bool dump = false;
  pre->add_option("name", preset_name, "Preset name")
      ->required()
      ->check(CLI::IsMember(lhb::preset_names()));
  pre->add_option("--out", preset_out, "Output directory");
  pre->add_option("--s", preset_s, "Sparsity (sweeps 5, 10, 25, 50 when omitted)");
  pre->add_option("--trials", preset_trials, "Override the trial count");
  pre->add_flag("--dump", dump, "Print the spec JSON instead of running");

  auto* rip = app.add_subcommand("riplab", "Circulant measurement studies");
  std::string study;
  std::optional<std::string> rip_out;
  std::optional<long> rip_trials;
  rip->add_option("study", study, "fig2 | ripconst | lemma1")
      ->required()
      ->check(CLI::IsMember({"fig2", "ripconst", "lemma1"}));
  rip->add_option("--out", rip_out, "Output directory");
  rip->add_option("--trials", rip_trials, "Override the trial count");

  auto* qd = app.add_subcommand("q-diagnostic", "Prefix-mass diagnostic of a weight vector");
  std::string w_path;
  double mu = 0.5;
  qd->add_option("w", w_path, "JSON array, or object with a \"w\" array")->required();
  qd->add_option("--mu", mu, "Prefix l2 mass threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    if (*run) {
      auto spec = lhb::load_spec(spec_path);
      if (run_out) spec.output_dir = *run_out;
      report(lhb::run_experiment(spec, workers));
    } else if (*pre || *rip) {
      const std::string name = *pre ? preset_name : study;
      const auto out = *pre ? preset_out : rip_out;
      const auto trials = *pre ? preset_trials : rip_trials;
      std::vector<std::optional<long>> sweep{std::nullopt};
      if (*pre && lhb::preset_takes_s(name)) {
        sweep.clear();
        if (preset_s) {
          sweep.push_back(preset_s);
        } else {
          for (long s : lhb::preset_s_sweep()) sweep.push_back(s);
        }
      } else if (preset_s) {
        throw lhb::ConfigError("s", "preset '" + name + "' does not take a sparsity");
      }
      json dumped = json::array();
      for (const auto& s : sweep) {
        auto spec = lhb::preset(name, s);
        if (out) spec.output_dir = *out;
        if (s && sweep.size() > 1) {
          spec.output_dir = (std::filesystem::path(spec.output_dir) / sparsity_dir(*s)).string();
        }
        if (trials) spec.trials = *trials;
        spec.validate();
        if (dump) {
          dumped.push_back(lhb::to_json(spec));
        } else {
          report(lhb::run_experiment(spec, workers));
        }
      }
      if (dump) std::cout << (dumped.size() == 1 ? dumped[0] : dumped).dump(2) << '\n';
    } else if (*qd) {
      std::ifstream in(w_path);
      if (!in) throw lhb::ConfigError("w", "cannot open " + w_path);
      json j;
      in >> j;
      if (j.is_object()) {
        if (!j.contains("w")) throw lhb::ConfigError("w", "object must contain a \"w\" array");
        j = j.at("w");
      }
      const auto values = j.get<std::vector<double>>();
      const lhb::VectorXd w = Eigen::Map<const lhb::VectorXd>(values.data(), static_cast<lhb::Index>(values.size()));
      const auto q = lhb::diagnostic_q(w, mu);
      std::cout << json{{"q", q.q}, {"alpha", q.alpha}, {"h", w.size()}, {"mu", mu}}.dump() << '\n';
    }
  } catch (const lhb::ConfigError& e) {
    return fail("config", e.what(), e.field());
  } catch (const json::exception& e) {
    return fail("config", e.what());
  } catch (const std::invalid_argument& e) {
    return fail("invalid_argument", e.what());
  } catch (const std::exception& e) {
    return fail("runtime", e.what());
  }
  return 0;
}
