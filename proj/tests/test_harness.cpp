#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lhb/harness.hpp"
#include "oracles.hpp"

using namespace lhb;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lhb_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentSpec tiny_bandit(const fs::path& out) {
  ExperimentSpec spec;
  spec.env.d = 3;
  spec.env.K = 4;
  spec.env.h = 10;
  spec.env.s = 2;
  spec.env.T = 80;
  spec.trials = 3;
  spec.base_seed = 17;
  spec.output_dir = out.string();
  AgentParams p;
  p.lambda_c = 0.01;
  spec.agents.push_back({"ad", AgentKind::ad_lasso, p, std::nullopt});
  spec.agents.push_back({"sw", AgentKind::sw_mp, p, std::nullopt});
  return spec;
}

struct Proc {
  int status;
  std::string out;
};

Proc run_cli(const std::string& args) {
  const std::string cmd = std::string(LHB_CLI) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[512];
  while (std::fgets(buf, sizeof buf, pipe)) out += buf;
  const int raw = pclose(pipe);
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, out};
}

}  // namespace

TEST_CASE("spec JSON round trip") {
  for (const auto& name : preset_names()) {
    const auto spec = preset(name);
    const json j = to_json(spec);
    CHECK(j.at("schema_version") == kSchemaVersion);
    CHECK(to_json(spec_from_json(j)) == j);
  }
}

TEST_CASE("strict spec parsing") {
  json j = to_json(tiny_bandit("x"));
  auto field_of = [](const json& bad) {
    try {
      spec_from_json(bad);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("<accepted>");
  };
  json extra = j;
  extra["env"]["colour"] = 1;
  CHECK(field_of(extra) == "env.colour");
  json nested = j;
  nested["agents"][1]["params"]["speed"] = 2;
  CHECK(field_of(nested) == "agents[1].params.speed");
  json version = j;
  version["schema_version"] = 2;
  CHECK(field_of(version) == "schema_version");
  json missing = j;
  missing.erase("schema_version");
  CHECK(field_of(missing) == "schema_version");
  json bad_s = j;
  bad_s["env"]["s"] = 50;
  CHECK(field_of(bad_s) == "env.s");
}

TEST_CASE("presets carry the documented parameters") {
  const auto f4 = preset("fig4");
  CHECK(f4.env.h == 1000);
  CHECK(f4.env.T == 999);
  CHECK(f4.env.s == 10);
  CHECK(f4.trials == 10);
  REQUIRE(f4.agents.size() == 2);
  const auto& w1 = f4.agents[0].w_pattern->mass;
  const auto& w2 = f4.agents[1].w_pattern->mass;
  double early1 = 0, early2 = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    early1 += w1[i] * w1[i];
    early2 += w2[i] * w2[i];
  }
  CHECK(early1 > early2);

  const auto f2 = preset("fig2");
  CHECK(f2.phase_transition.d == 10);
  CHECK(f2.phase_transition.h == 100);
  CHECK(f2.phase_transition.s_list == std::vector<long>{1, 50, 100});
  CHECK(f2.trials == 50);
  CHECK(f2.phase_transition.m_grid.back() <= 500);

  const auto f5 = preset("fig5_spiking", 25);
  CHECK(f5.env.T == 2000);
  CHECK(f5.env.h == 100);
  CHECK(f5.env.d == 5);
  CHECK(f5.env.s == 25);
  CHECK(f5.env.w_pattern.spike_fraction == doctest::Approx(0.2));
  CHECK(f5.agents.size() == 4);
  CHECK(!f5.defaulted.empty());

  CHECK_THROWS_AS(preset("fig9"), ConfigError);
  CHECK_THROWS_AS(preset("fig4", 5), ConfigError);
}

TEST_CASE("aggregate matches a streaming computation") {
  std::vector<std::vector<double>> traces{{1, 2, 4}, {2, 2, 5}, {0, 5, 9}, {3, 3, 3}};
  std::vector<const std::vector<double>*> ptrs;
  for (const auto& t : traces) ptrs.push_back(&t);
  const auto agg = aggregate_traces(ptrs);
  const auto ref = oracle::welford(traces);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(agg.mean[i] == doctest::Approx(ref.mean[i]).epsilon(1e-14));
    CHECK(agg.stderr_[i] == doctest::Approx(ref.stderr_[i]).epsilon(1e-12));
  }
  std::vector<double> one{1, 2};
  const auto single = aggregate_traces({&one});
  CHECK(single.mean == one);
  CHECK(single.stderr_ == std::vector<double>{0, 0});
}

TEST_CASE("oracle trial has zero regret") {
  auto spec = tiny_bandit("unused");
  spec.trials = 1;
  const auto r = run_oracle_trial(spec, 0);
  CHECK(r.cum_regret.size() == 80);
  CHECK(r.cum_regret.back() == 0);
}

TEST_CASE("runs are byte-identical across reruns and worker counts") {
  const auto a = scratch_dir("det_a"), b = scratch_dir("det_b");
  const auto sa = run_experiment(tiny_bandit(a), 1);
  const auto sb = run_experiment(tiny_bandit(b), 3);
  REQUIRE(sa.failures.empty());
  REQUIRE(sa.files.size() == sb.files.size());
  for (std::size_t i = 0; i < sa.files.size(); ++i) {
    CHECK(sa.files[i].filename() == sb.files[i].filename());
    CHECK(slurp(sa.files[i]) == slurp(sb.files[i]));
  }
  CHECK(fs::exists(a / "ad_0000.csv"));
  CHECK(fs::exists(a / "sw_agg.csv"));
  CHECK(slurp(a / "ad_0001.csv").rfind("t,cum_regret\n1,", 0) == 0);
  CHECK(slurp(a / "ad_0001_epochs.csv").rfind("epoch,t,full_horizon,lambda,", 0) == 0);

  const json meta = json::parse(slurp(a / "metadata.json"));
  CHECK(meta.at("schema_version") == kSchemaVersion);
  CHECK(meta.at("config_hash") == config_hash(tiny_bandit(b)));
  CHECK(meta.at("files").size() == sa.files.size());
}

TEST_CASE("config hash ignores the output directory only") {
  auto x = tiny_bandit("one"), y = tiny_bandit("two");
  CHECK(config_hash(x) == config_hash(y));
  CHECK(config_hash(x).size() == 16);
  y.base_seed = 18;
  CHECK(config_hash(x) != config_hash(y));
}

TEST_CASE("prefix-mass diagnostic") {
  VectorXd e1 = VectorXd::Zero(10);
  e1(0) = 1;
  auto q = diagnostic_q(e1, 0.5);
  CHECK(q.q == 1);
  CHECK(q.alpha == 0);

  VectorXd eh = VectorXd::Zero(10);
  eh(9) = 1;
  for (double mu : {0.1, 0.5, 1.0}) {
    q = diagnostic_q(eh, mu);
    CHECK(q.q == 10);
    CHECK(q.alpha == doctest::Approx(1));
  }

  for (long s : {1, 2, 5, 8, 9}) {
    VectorXd flat = VectorXd::Zero(20);
    flat.head(s).setConstant(1.0 / static_cast<double>(s));
    q = diagnostic_q(flat, flat.norm() / std::sqrt(2.0));
    CHECK(q.q == (s + 1) / 2);
  }
  CHECK_THROWS_WITH(diagnostic_q(e1, 1.5), "mass unreachable");
}

TEST_CASE("command line") {
  const auto dir = scratch_dir("cli");
  SUBCASE("unknown preset is a usage error") {
    const auto p = run_cli("preset fig9");
    CHECK(p.status == 2);
    CHECK(json::parse(p.out).at("error") == "usage");
  }
  SUBCASE("bad spec names the field") {
    json j = to_json(tiny_bandit(dir / "out"));
    j["env"]["K"] = 0;
    std::ofstream(dir / "bad.json") << j.dump();
    const auto p = run_cli("run " + (dir / "bad.json").string());
    CHECK(p.status == 1);
    const json err = json::parse(p.out);
    CHECK(err.at("error") == "config");
    CHECK(err.at("field") == "env.K");
  }
  SUBCASE("spec run writes outputs") {
    std::ofstream(dir / "ok.json") << to_json(tiny_bandit(dir / "out")).dump();
    const auto p = run_cli("--workers 1 run " + (dir / "ok.json").string());
    CHECK(p.status == 0);
    CHECK(fs::exists(dir / "out" / "ad_agg.csv"));
  }
  SUBCASE("q diagnostic") {
    std::ofstream(dir / "w.json") << "[0, 0.6, 0.8]";
    const auto p = run_cli("q-diagnostic " + (dir / "w.json").string() + " --mu 0.7");
    CHECK(p.status == 0);
    const json out = json::parse(p.out);
    CHECK(out.at("q") == 3);
    const auto bad = run_cli("q-diagnostic " + (dir / "w.json").string() + " --mu 2");
    CHECK(bad.status == 1);
    CHECK(json::parse(bad.out).at("message") == "mass unreachable");
  }
  SUBCASE("preset dump") {
    const auto p = run_cli("preset fig4 --dump");
    CHECK(p.status == 0);
    CHECK(spec_from_json(json::parse(p.out)).env.h == 1000);
  }
}
