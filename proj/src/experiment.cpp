// Copyright 2026 The POPL Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "popl/experiment.hpp"

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <set>
#include <sstream>

#include "popl/errors.hpp"
#include "popl/metrics.hpp"
#include "popl/models.hpp"

namespace popl {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Presets

json SyntheticDomainJson() {
  return {{"num_prefs", 2048},     {"num_annotators", 100}, {"group_probability", 0.5},
          {"holdout_per_group", 41}, {"test_per_group", 500}, {"embed_dim", 64},
          {"hidden_width", 64}};
}

json GridDomainJson() {
  return {{"num_demos", 200},
          {"num_prefs", 4000},
          {"segment_len", 8},
          {"mix", {0.0, 0.1, 0.3, 0.5}},
          {"holdout_per_group", 80},
          {"test_per_group", 500},
          {"kappa", 20.0},
          {"value_tol", 1e-10},
          {"max_steps", 40},
          {"discount", 0.95},
          {"bc_laplace", 1.0}};
}

json EvalJson() {
  return {{"coverage_threshold", 0.9}, {"rollouts", 200},  {"top_k", 10},
          {"fairness_q", 0.1},         {"curve_points", 101}, {"door_threshold", 0.8}};
}

const std::map<std::string, json>& Presets() {
  static const std::map<std::string, json> presets = [] {
    std::map<std::string, json> p;
    p["synthetic-popl"] = {{"experiment", "stateless"},
                           {"method", "popl"},
                           {"seed", 0},
                           {"domain", SyntheticDomainJson()},
                           {"method_config",
                            {{"population_size", 100},
                             {"generations", 100},
                             {"mutation_sigma", 0.05},
                             {"pref_batch_size", 2048},
                             {"refresh_interval", 1},
                             {"elite_count", 0},
                             {"pool_size", 0},
                             {"init_sigma", 0.1}}},
                           {"eval", EvalJson()}};
    p["synthetic-brex"] = {{"experiment", "stateless"},
                           {"method", "brex"},
                           {"seed", 0},
                           {"domain", SyntheticDomainJson()},
                           {"method_config",
                            {{"steps", 10000},
                             {"step_size", 0.1},
                             {"burn_in", 2000},
                             {"thin", 10},
                             {"beta", 10.0}}},
                           {"eval", EvalJson()}};
    p["grid-popl"] = {{"experiment", "gridworld"},
                      {"method", "popl"},
                      {"seed", 0},
                      {"domain", GridDomainJson()},
                      {"method_config",
                       {{"population_size", 500},
                        {"generations", 1000},
                        {"mutation_sigma", 0.01},
                        {"pref_batch_size", 64},
                        {"refresh_interval", 10},
                        {"elite_count", 0},
                        {"pool_size", 640},
                        {"init_sigma", 0.01}}},
                      {"eval", EvalJson()}};
    p["grid-multicpl"] = {{"experiment", "gridworld"},
                          {"method", "multicpl"},
                          {"seed", 0},
                          {"domain", GridDomainJson()},
                          {"method_config",
                           {{"alpha", 1.0},
                            {"learning_rate", 1e-3},
                            {"iterations", 20},
                            {"num_models", 500},
                            {"subsample_fraction", 0.5}}},
                          {"eval", EvalJson()}};
    p["grid-bc"] = {{"experiment", "gridworld"},
                    {"method", "bc"},
                    {"seed", 0},
                    {"domain", GridDomainJson()},
                    {"method_config", json::object()},
                    {"eval", EvalJson()}};
    return p;
  }();
  return presets;
}

// ---------------------------------------------------------------------------
// Field parsing with error accumulation

class FieldReader {
 public:
  FieldReader(const json* obj, std::string prefix, std::vector<std::string>* errors)
      : obj_(obj), prefix_(std::move(prefix)), errors_(errors) {
    if (obj_ != nullptr && !obj_->is_object()) {
      errors_->push_back(Name("") + " must be an object");
      obj_ = nullptr;
    }
  }

  void Count(const char* key, std::size_t& out, bool allow_zero = false) {
    const json* v = Fetch(key);
    if (v == nullptr) return;
    if (!v->is_number_integer()) {
      Error(key, "must be an integer");
      return;
    }
    const auto n = v->get<std::int64_t>();
    if (n < 0 || (n == 0 && !allow_zero)) {
      Error(key, allow_zero ? "must be non-negative" : "must be positive");
      return;
    }
    out = static_cast<std::size_t>(n);
  }

  void Int(const char* key, int& out, int min) {
    std::size_t n = 0;
    const std::size_t before = errors_->size();
    const json* v = Peek(key);
    if (v == nullptr) {
      Fetch(key);
      return;
    }
    Count(key, n, min <= 0);
    if (errors_->size() != before) return;
    if (n < static_cast<std::size_t>(std::max(min, 0)) ||
        n > static_cast<std::size_t>(std::numeric_limits<int>::max())) {
      Error(key, "must be at least " + std::to_string(min));
      return;
    }
    out = static_cast<int>(n);
  }

  void Seed(const char* key, std::uint64_t& out) {
    const json* v = Fetch(key);
    if (v == nullptr) return;
    if (v->is_number_unsigned() || (v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
      out = v->get<std::uint64_t>();
    } else {
      Error(key, "must be a non-negative integer");
    }
  }

  // Requires lo < x < hi, with either end closed when the flag says so.
  void Real(const char* key, double& out, double lo, double hi, bool lo_closed = true,
            bool hi_closed = true) {
    const json* v = Fetch(key);
    if (v == nullptr) return;
    double x = 0.0;
    if (!ToReal(*v, x)) {
      Error(key, "must be a number");
      return;
    }
    if (!InRange(x, lo, hi, lo_closed, hi_closed)) {
      Error(key, "must lie in " + RangeText(lo, hi, lo_closed, hi_closed));
      return;
    }
    out = x;
  }

  void Positive(const char* key, double& out) {
    Real(key, out, 0.0, std::numeric_limits<double>::infinity(), false, false);
  }

  void RealList(const char* key, std::vector<double>& out, double lo, double hi) {
    const json* v = Fetch(key);
    if (v == nullptr) return;
    if (!v->is_array()) {
      Error(key, "must be an array of numbers");
      return;
    }
    std::vector<double> values;
    for (const auto& item : *v) {
      double x = 0.0;
      if (!ToReal(item, x) || !InRange(x, lo, hi, true, true)) {
        Error(key, "entries must be numbers in " + RangeText(lo, hi, true, true));
        return;
      }
      values.push_back(x);
    }
    out = std::move(values);
  }

  void OptionalCount(const char* key, std::optional<std::size_t>& out) {
    const json* v = Peek(key);
    if (v != nullptr && v->is_null()) {
      Fetch(key);
      out.reset();
      return;
    }
    std::size_t n = 0;
    const std::size_t before = errors_->size();
    const bool present = v != nullptr;
    Count(key, n, true);
    if (present && errors_->size() == before) out = n;
  }

  void OptionalPositive(const char* key, std::optional<double>& out) {
    const json* v = Peek(key);
    if (v != nullptr && v->is_null()) {
      Fetch(key);
      out.reset();
      return;
    }
    double x = 0.0;
    const std::size_t before = errors_->size();
    const bool present = v != nullptr;
    Real(key, x, 0.0, std::numeric_limits<double>::infinity(), true, false);
    if (present && errors_->size() == before) out = x;
  }

  void String(const char* key, std::string& out) {
    const json* v = Fetch(key);
    if (v == nullptr) return;
    if (!v->is_string()) {
      Error(key, "must be a string");
      return;
    }
    out = v->get<std::string>();
  }

  // Reports every key that no accessor asked for.
  void Finish() {
    if (obj_ == nullptr) return;
    for (const auto& [key, value] : obj_->items()) {
      if (!seen_.contains(key)) errors_->push_back(Name(key) + " is not a recognised field");
    }
  }

 private:
  const json* Peek(const char* key) const {
    if (obj_ == nullptr || !obj_->contains(key)) return nullptr;
    return &(*obj_)[key];
  }
  const json* Fetch(const char* key) {
    seen_.insert(key);
    return Peek(key);
  }
  std::string Name(const std::string& key) const {
    if (prefix_.empty()) return key;
    return key.empty() ? prefix_ : prefix_ + "." + key;
  }
  void Error(const char* key, const std::string& what) {
    errors_->push_back(Name(key) + " " + what);
  }
  static bool ToReal(const json& v, double& x) {
    if (!v.is_number()) return false;
    x = v.get<double>();
    return std::isfinite(x);
  }
  static bool InRange(double x, double lo, double hi, bool lo_closed, bool hi_closed) {
    const bool lo_ok = lo_closed ? x >= lo : x > lo;
    const bool hi_ok = hi_closed ? x <= hi : x < hi;
    return lo_ok && hi_ok;
  }
  static std::string RangeText(double lo, double hi, bool lo_closed, bool hi_closed) {
    std::ostringstream ss;
    ss << (lo_closed ? '[' : '(') << lo << ", " << hi << (hi_closed ? ']' : ')');
    return ss.str();
  }

  const json* obj_;
  std::string prefix_;
  std::vector<std::string>* errors_;
  std::set<std::string> seen_;
};

const json* Section(const json& root, const char* key) {
  return root.contains(key) ? &root[key] : nullptr;
}

template <typename Fn>
void CrossCheck(std::vector<std::string>& errors, std::size_t before, const std::string& section,
                Fn&& fn) {
  if (errors.size() != before) return;
  try {
    fn();
  } catch (const ConfigError& e) {
    errors.push_back(section + ": " + e.what());
  } catch (const InvalidInput& e) {
    errors.push_back(section + ": " + e.what());
  }
}

void ParseStatelessDomain(const json* obj, StatelessDomainConfig& d,
                          std::vector<std::string>& errors) {
  const std::size_t before = errors.size();
  FieldReader r(obj, "domain", &errors);
  r.Count("num_prefs", d.data.num_prefs);
  r.Count("num_annotators", d.data.num_annotators);
  r.Real("group_probability", d.data.group_probability, 0.0, 1.0);
  r.Count("holdout_per_group", d.data.holdout_per_group);
  r.Count("test_per_group", d.data.test_per_group, true);
  r.OptionalCount("holdout_offset", d.data.holdout_offset);
  r.OptionalPositive("generation_beta", d.data.generation_beta);
  r.Int("embed_dim", d.embed_dim, 1);
  r.Int("hidden_width", d.hidden_width, 1);
  r.Finish();
  CrossCheck(errors, before, "domain", [&] { d.data.Validate(); });
}

void ParseGridDomain(const json* obj, GridDomainConfig& d, std::vector<std::string>& errors) {
  const std::size_t before = errors.size();
  FieldReader r(obj, "domain", &errors);
  r.Count("num_demos", d.data.num_demos);
  r.Count("num_prefs", d.data.num_prefs, true);
  r.Count("segment_len", d.data.segment_len);
  r.RealList("mix", d.data.mix, 0.0, 1.0);
  r.Count("holdout_per_group", d.data.holdout_per_group);
  r.Count("test_per_group", d.data.test_per_group, true);
  r.OptionalCount("holdout_offset", d.data.holdout_offset);
  r.Positive("kappa", d.data.kappa);
  r.Positive("value_tol", d.data.value_tol);
  r.Int("max_steps", d.max_steps, 1);
  r.Real("discount", d.discount, 0.0, 1.0, false, false);
  r.Real("bc_laplace", d.bc_laplace, 0.0, std::numeric_limits<double>::infinity(), true, false);
  r.Finish();
  CrossCheck(errors, before, "domain", [&] {
    const GridWorld world = GridWorld::TwoDoor(d.max_steps, d.discount);
    d.data.Validate(world);
  });
}

void ParsePopl(const json* obj, PoplMethodConfig& m, std::vector<std::string>& errors) {
  const std::size_t before = errors.size();
  FieldReader r(obj, "method_config", &errors);
  r.Count("population_size", m.lexicase.population_size);
  r.Count("generations", m.lexicase.generations);
  r.Positive("mutation_sigma", m.lexicase.mutation_sigma);
  r.Count("pref_batch_size", m.lexicase.pref_batch_size);
  r.Count("refresh_interval", m.lexicase.refresh_interval);
  r.Count("elite_count", m.lexicase.elite_count, true);
  r.Count("pool_size", m.pool_size, true);
  r.Real("init_sigma", m.init_sigma, 0.0, std::numeric_limits<double>::infinity(), true, false);
  r.Finish();
  CrossCheck(errors, before, "method_config", [&] { m.lexicase.Validate(); });
}

void ParseBrex(const json* obj, MCMCConfig& m, std::vector<std::string>& errors) {
  const std::size_t before = errors.size();
  FieldReader r(obj, "method_config", &errors);
  r.Count("steps", m.steps);
  r.Positive("step_size", m.step_size);
  r.Count("burn_in", m.burn_in, true);
  r.Count("thin", m.thin);
  r.Real("beta", m.beta, 0.0, std::numeric_limits<double>::infinity(), true, false);
  r.Finish();
  CrossCheck(errors, before, "method_config", [&] { m.Validate(); });
}

void ParseMultiCpl(const json* obj, CPLConfig& m, std::vector<std::string>& errors) {
  const std::size_t before = errors.size();
  FieldReader r(obj, "method_config", &errors);
  r.Positive("alpha", m.alpha);
  r.Positive("learning_rate", m.learning_rate);
  r.Count("iterations", m.iterations, true);
  r.Count("num_models", m.num_models);
  r.Real("subsample_fraction", m.subsample_fraction, 0.0, 1.0, false, true);
  r.Finish();
  CrossCheck(errors, before, "method_config", [&] { m.Validate(); });
}

void ParseEval(const json* obj, EvalConfig& e, std::vector<std::string>& errors) {
  FieldReader r(obj, "eval", &errors);
  r.Real("coverage_threshold", e.coverage_threshold, 0.0, 1.0);
  r.Count("rollouts", e.rollouts);
  r.Count("top_k", e.top_k);
  r.Real("fairness_q", e.fairness_q, 0.0, 1.0);
  r.Count("curve_points", e.curve_points);
  r.Real("door_threshold", e.door_threshold, 0.0, 1.0);
  r.Finish();
  if (e.curve_points < 2) errors.push_back("eval.curve_points must be at least 2");
}

bool MethodAllowed(const std::string& experiment, const std::string& method) {
  if (experiment == "stateless") return method == "popl" || method == "brex";
  if (experiment == "gridworld") return method == "popl" || method == "multicpl" || method == "bc";
  return false;
}

// ---------------------------------------------------------------------------
// Serialization of the resolved config

json OptionalJson(const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); }
json OptionalJson(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json DomainJson(const ExperimentConfig& c) {
  if (c.experiment == "stateless") {
    const auto& d = c.stateless;
    return {{"num_prefs", d.data.num_prefs},
            {"num_annotators", d.data.num_annotators},
            {"group_probability", d.data.group_probability},
            {"holdout_per_group", d.data.holdout_per_group},
            {"test_per_group", d.data.test_per_group},
            {"holdout_offset", OptionalJson(d.data.holdout_offset)},
            {"generation_beta", OptionalJson(d.data.generation_beta)},
            {"embed_dim", d.embed_dim},
            {"hidden_width", d.hidden_width}};
  }
  const auto& d = c.grid;
  return {{"num_demos", d.data.num_demos},
          {"num_prefs", d.data.num_prefs},
          {"segment_len", d.data.segment_len},
          {"mix", d.data.mix},
          {"holdout_per_group", d.data.holdout_per_group},
          {"test_per_group", d.data.test_per_group},
          {"holdout_offset", OptionalJson(d.data.holdout_offset)},
          {"kappa", d.data.kappa},
          {"value_tol", d.data.value_tol},
          {"max_steps", d.max_steps},
          {"discount", d.discount},
          {"bc_laplace", d.bc_laplace}};
}

json MethodJson(const ExperimentConfig& c) {
  if (c.method == "popl") {
    const auto& l = c.popl.lexicase;
    return {{"population_size", l.population_size},
            {"generations", l.generations},
            {"mutation_sigma", l.mutation_sigma},
            {"pref_batch_size", l.pref_batch_size},
            {"refresh_interval", l.refresh_interval},
            {"elite_count", l.elite_count},
            {"pool_size", c.popl.pool_size},
            {"init_sigma", c.popl.init_sigma}};
  }
  if (c.method == "brex") {
    const auto& b = c.brex;
    return {{"steps", b.steps},
            {"step_size", b.step_size},
            {"burn_in", b.burn_in},
            {"thin", b.thin},
            {"beta", b.beta}};
  }
  if (c.method == "multicpl") {
    const auto& m = c.multicpl;
    return {{"alpha", m.alpha},
            {"learning_rate", m.learning_rate},
            {"iterations", m.iterations},
            {"num_models", m.num_models},
            {"subsample_fraction", m.subsample_fraction}};
  }
  return json::object();
}

json EvalToJson(const EvalConfig& e) {
  return {{"coverage_threshold", e.coverage_threshold}, {"rollouts", e.rollouts},
          {"top_k", e.top_k},
          {"fairness_q", e.fairness_q},
          {"curve_points", e.curve_points},
          {"door_threshold", e.door_threshold}};
}

// ---------------------------------------------------------------------------
// Running methods

std::string Csv(const std::function<void(std::ostream&)>& write) {
  std::ostringstream ss;
  write(ss);
  return ss.str();
}

FeatureEmbedding EmbeddingFromManifest(const json& dm) {
  const auto& e = dm.at("embedding");
  return FeatureEmbedding(e.at("seed").get<std::uint64_t>(), e.at("dim").get<int>(),
                          e.at("hidden_width").get<int>());
}

GridWorld WorldFromManifest(const json& dm) {
  const auto& w = dm.at("world");
  return GridWorld::TwoDoor(w.at("max_steps").get<int>(), w.at("discount").get<double>());
}

PolicyHypothesis Pretrain(const Dataset& data, double laplace) {
  return BehaviorClone(data.demos, data.segments.num_states, data.segments.num_actions, laplace);
}

struct MethodOutput {
  std::vector<Hypothesis> population;
  std::vector<GenerationStats> stats;
};

MethodOutput RunPoplMethod(const ExperimentConfig& c, const Dataset& data, const json& dm,
                           const RandomStream& method_rng) {
  const auto& m = c.popl;
  LexicaseConfig lex = m.lexicase;
  lex.seed = method_rng.Child("lexicase").seed();
  RandomStream init = method_rng.Child("init");

  std::vector<Hypothesis> initial;
  initial.reserve(lex.population_size);
  std::optional<FeatureEmbedding> embed;
  std::optional<PassEvaluator> evaluator;
  if (c.experiment == "stateless") {
    embed.emplace(EmbeddingFromManifest(dm));
    evaluator.emplace(PassEvaluator::ForRewards(data.segments, *embed));
    for (std::size_t i = 0; i < lex.population_size; ++i) {
      std::vector<double> w(static_cast<std::size_t>(embed->dim()));
      for (double& x : w) x = init.Normal(0.0, m.init_sigma);
      initial.emplace_back(RewardHypothesis{std::move(w)});
    }
  } else {
    const PolicyHypothesis base = Pretrain(data, c.grid.bc_laplace);
    evaluator.emplace(PassEvaluator::ForPolicies(data.segments));
    for (std::size_t i = 0; i < lex.population_size; ++i) {
      const auto logits = base.logits();
      std::vector<double> l(logits.begin(), logits.end());
      for (double& x : l) x += init.Normal(0.0, m.init_sigma);
      initial.emplace_back(PolicyHypothesis(base.num_states(), base.num_actions(), std::move(l)));
    }
  }
  PreferenceSampler sampler(LearnerView(data.train), m.pool_size);
  PoplResult result = RunPopl(std::move(initial), sampler, lex, *evaluator, c.jobs);
  if (!result.stats.empty()) {
    const auto& last = result.stats.back();
    spdlog::info("popl finished: mean pass rate {:.4f}, max {:.4f}, {} unique", last.mean_pass_rate,
                 last.max_pass_rate, last.unique_candidates);
  }
  return {std::move(result.population), std::move(result.stats)};
}

MethodOutput RunMethod(const ExperimentConfig& c, const Dataset& data, const json& dm,
                       std::uint64_t method_seed) {
  const RandomStream method_rng(method_seed);
  if (c.method == "popl") return RunPoplMethod(c, data, dm, method_rng);
  MethodOutput out;
  if (c.method == "brex") {
    MCMCConfig mc = c.brex;
    mc.seed = method_rng.Child("brex").seed();
    const FeatureEmbedding embed = EmbeddingFromManifest(dm);
    const auto prefs = LearnerView(data.train);
    BrexResult r = BrexSample(prefs, data.segments, embed, mc);
    spdlog::info("b-rex accepted {} of {} proposals", r.accepted, mc.steps);
    if (r.stuck) spdlog::warn("b-rex chain never accepted a proposal");
    for (auto& s : r.samples) out.population.emplace_back(std::move(s));
    if (out.population.empty()) out.population.emplace_back(r.map_sample);
    return out;
  }
  const PolicyHypothesis pretrained = Pretrain(data, c.grid.bc_laplace);
  if (c.method == "multicpl") {
    CPLConfig cc = c.multicpl;
    cc.seed = method_rng.Child("multicpl").seed();
    const auto prefs = LearnerView(data.train);
    auto models = MultiCpl(pretrained, prefs, data.segments, cc, nullptr, c.jobs);
    for (auto& p : models) out.population.emplace_back(std::move(p));
    return out;
  }
  out.population.emplace_back(pretrained);
  return out;
}

std::string GroupName(int g) { return std::to_string(g); }

}  // namespace

// ---------------------------------------------------------------------------

std::vector<std::string> PresetNames() {
  std::vector<std::string> names;
  for (const auto& [name, value] : Presets()) names.push_back(name);
  return names;
}

json PresetJson(const std::string& name) {
  const auto& presets = Presets();
  const auto it = presets.find(name);
  if (it == presets.end()) throw ConfigError("unknown preset '" + name + "'");
  return it->second;
}

ValidationResult ValidateConfig(const json& raw, const std::string& preset) {
  ValidationResult result;
  auto& errors = result.errors;
  if (!raw.is_object()) {
    errors.push_back("config must be a JSON object");
    return result;
  }
  json overrides = raw;
  std::string preset_name = preset;
  if (overrides.contains("preset")) {
    if (!overrides["preset"].is_string()) {
      errors.push_back("preset must be a string");
    } else if (preset_name.empty()) {
      preset_name = overrides["preset"].get<std::string>();
    }
    overrides.erase("preset");
  }
  json merged = json::object();
  if (!preset_name.empty()) {
    const auto& presets = Presets();
    const auto it = presets.find(preset_name);
    if (it == presets.end()) {
      errors.push_back("unknown preset '" + preset_name + "'");
    } else {
      merged = it->second;
    }
  }
  // A method switch must not inherit the preset's method-specific fields.
  if (overrides.contains("method") && merged.contains("method") &&
      overrides["method"] != merged["method"]) {
    merged.erase("method_config");
  }
  merged.merge_patch(overrides);

  ExperimentConfig c;
  FieldReader top(&merged, "", &errors);
  top.String("experiment", c.experiment);
  top.String("method", c.method);
  top.Seed("seed", c.seed);
  top.String("output_dir", c.output_dir);
  top.Int("jobs", c.jobs, 1);
  top.String("dataset_dir", c.dataset_dir);
  const bool experiment_ok = c.experiment == "stateless" || c.experiment == "gridworld";
  const bool method_known =
      c.method == "popl" || c.method == "brex" || c.method == "multicpl" || c.method == "bc";
  if (!experiment_ok) {
    errors.push_back("experiment must be one of: stateless, gridworld (got '" + c.experiment +
                     "')");
  }
  if (!method_known) {
    errors.push_back("method must be one of: popl, brex, multicpl, bc (got '" + c.method + "')");
  }
  if (experiment_ok && method_known && !MethodAllowed(c.experiment, c.method)) {
    errors.push_back("method '" + c.method + "' is not available for experiment '" +
                     c.experiment + "'");
  }

  if (experiment_ok) {
    if (c.experiment == "stateless") {
      ParseStatelessDomain(Section(merged, "domain"), c.stateless, errors);
    } else {
      ParseGridDomain(Section(merged, "domain"), c.grid, errors);
    }
  }
  if (method_known) {
    const json* mc = Section(merged, "method_config");
    if (c.method == "popl") {
      ParsePopl(mc, c.popl, errors);
    } else if (c.method == "brex") {
      ParseBrex(mc, c.brex, errors);
    } else if (c.method == "multicpl") {
      ParseMultiCpl(mc, c.multicpl, errors);
    } else {
      FieldReader r(mc, "method_config", &errors);
      r.Finish();
    }
  }
  ParseEval(Section(merged, "eval"), c.eval, errors);

  for (const auto& [key, value] : merged.items()) {
    static const std::set<std::string> known = {"experiment", "method",     "seed",
                                                "output_dir", "jobs",       "dataset_dir",
                                                "domain",     "method_config", "eval"};
    if (!known.contains(key)) errors.push_back(key + " is not a recognised field");
  }
  if (errors.empty()) result.config = std::move(c);
  return result;
}

json ConfigToJson(const ExperimentConfig& c) {
  json j = {{"experiment", c.experiment},
            {"method", c.method},
            {"seed", c.seed},
            {"output_dir", c.output_dir},
            {"jobs", c.jobs},
            {"dataset_dir", c.dataset_dir},
            {"domain", DomainJson(c)},
            {"method_config", MethodJson(c)},
            {"eval", EvalToJson(c.eval)}};
  return j;
}

std::string ConfigHash(const ExperimentConfig& config) {
  json j = ConfigToJson(config);
  j.erase("output_dir");
  j.erase("jobs");
  return ContentHash(j.dump());
}

SeedFanout FanOutSeed(std::uint64_t seed) {
  const RandomStream root(seed);
  return {root.Child("dataset").seed(), root.Child("method").seed(), root.Child("eval").seed()};
}

std::pair<Dataset, json> GenerateDataset(const ExperimentConfig& c) {
  const SeedFanout seeds = FanOutSeed(c.seed);
  const RandomStream data_rng(seeds.dataset);
  json manifest = {{"experiment", c.experiment}, {"seed", c.seed}, {"domain", DomainJson(c)}};
  if (c.experiment == "stateless") {
    StatelessDatasetSpec spec = c.stateless.data;
    spec.seed = data_rng.Child("preferences").seed();
    Dataset data = GenerateStatelessDataset(spec);
    manifest["embedding"] = {{"seed", data_rng.Child("embedding").seed()},
                             {"dim", c.stateless.embed_dim},
                             {"hidden_width", c.stateless.hidden_width}};
    return {std::move(data), std::move(manifest)};
  }
  if (c.experiment != "gridworld") throw ConfigError("unknown experiment '" + c.experiment + "'");
  const GridWorld world = GridWorld::TwoDoor(c.grid.max_steps, c.grid.discount);
  GridDatasetSpec spec = c.grid.data;
  spec.seed = data_rng.Child("preferences").seed();
  Dataset data =
      GenerateGridworldDataset(world, {GroupReward::ForGroup(0), GroupReward::ForGroup(1)}, spec);
  const auto& doors = *world.doors();
  manifest["world"] = {{"layout", "two_door"},
                       {"width", world.width()},
                       {"height", world.height()},
                       {"max_steps", world.max_steps()},
                       {"discount", world.discount()},
                       {"start", {world.start().x, world.start().y}},
                       {"goal", {world.goal().x, world.goal().y}},
                       {"doors",
                        {{"top", {doors.top.x, doors.top.y}},
                         {"bottom", {doors.bottom.x, doors.bottom.y}}}}};
  return {std::move(data), std::move(manifest)};
}

EvaluationOutput EvaluatePopulation(std::span<const Hypothesis> population, const Dataset& data,
                                    const json& dm, const EvalConfig& eval,
                                    const std::string& method, std::uint64_t seed, int jobs) {
  if (population.empty()) throw InvalidInput("cannot evaluate an empty population");
  const std::string experiment = dm.at("experiment").get<std::string>();
  const bool stateless = experiment == "stateless";
  std::optional<FeatureEmbedding> embed;
  if (stateless) embed.emplace(EmbeddingFromManifest(dm));
  const PassEvaluator evaluator = stateless ? PassEvaluator::ForRewards(data.segments, *embed)
                                            : PassEvaluator::ForPolicies(data.segments);
  const RandomStream eval_rng(FanOutSeed(seed).eval);

  EvaluationOutput out;
  auto add = [&](const std::string& group, const std::string& metric, double value) {
    out.metrics.push_back({method, group, metric, value, seed});
  };

  std::vector<std::vector<PreferencePair>> holdouts;
  std::vector<CateringResult> catered;
  std::vector<double> accuracies;
  for (int g = 0; g < kNumGroups; ++g) {
    holdouts.push_back(LearnerView(data.holdout[g]));
    const auto test = LearnerView(data.test[g]);
    const CateringResult c = Cater(population, holdouts.back(), evaluator, g, test);
    catered.push_back(c);
    accuracies.push_back(c.eval_pass_rate);
    add(GroupName(g), "selected_index", static_cast<double>(c.selected_idx));
    add(GroupName(g), "holdout_pass_rate", c.holdout_pass_rate);
    add(GroupName(g), "test_accuracy", c.eval_pass_rate);
    if (!test.empty()) {
      const PassMatrix pm = BuildPassMatrix(population, test, evaluator, jobs);
      double mean = 0.0;
      for (std::size_t i = 0; i < pm.num_candidates(); ++i) {
        mean += static_cast<double>(pm.PassCount(i)) / static_cast<double>(test.size());
      }
      add(GroupName(g), "population_mean_test_accuracy",
          mean / static_cast<double>(pm.num_candidates()));
    }
  }
  const auto coverage = PopulationCoverage(population, holdouts, evaluator, eval.coverage_threshold);
  for (int g = 0; g < kNumGroups; ++g) add(GroupName(g), "covered", coverage[g] ? 1.0 : 0.0);
  add("all", "population_size", static_cast<double>(population.size()));
  add("all", "fairness_test_accuracy", FairnessQuantile(accuracies, eval.fairness_q));

  if (stateless) {
    std::vector<double> grid(eval.curve_points);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      grid[i] = static_cast<double>(i) / static_cast<double>(grid.size() - 1);
    }
    std::ostringstream curves;
    curves << "a,group,reward\n";
    for (int g = 0; g < kNumGroups; ++g) {
      const auto& r = std::get<RewardHypothesis>(population[catered[g].selected_idx]);
      add(GroupName(g), "split_ranking", SplitRankingFraction(r, *embed));
      for (double a : grid) {
        curves << FormatDouble(a) << ',' << g << ',' << FormatDouble(embed->Reward(r, a)) << '\n';
      }
    }
    out.files["reward_curves.csv"] = curves.str();
    const auto q = RewardQuantileCurve(population, *embed, grid, eval.fairness_q);
    std::ostringstream fair;
    fair << "a,group,reward\n";
    const std::string label = "q" + FormatDouble(eval.fairness_q);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      fair << FormatDouble(grid[i]) << ',' << label << ',' << FormatDouble(q[i]) << '\n';
    }
    out.files["fairness_curve.csv"] = fair.str();
    return out;
  }

  const GridWorld world = WorldFromManifest(dm);
  int served = 0;
  for (int g = 0; g < kNumGroups; ++g) {
    const auto& policy = std::get<PolicyHypothesis>(population[catered[g].selected_idx]);
    RandomStream rng = eval_rng.Child("rollout").Child(static_cast<std::uint64_t>(g));
    const RolloutResult rr = Rollout(policy, world, rng, eval.rollouts);
    const DoorUsage usage = MeasureDoorUsage(rr.trajectories, world);
    const double preferred = g == 0 ? usage.top_rate : usage.bottom_rate;
    add(GroupName(g), "goal_rate", usage.goal_rate);
    add(GroupName(g), "top_door_rate", usage.top_rate);
    add(GroupName(g), "bottom_door_rate", usage.bottom_rate);
    add(GroupName(g), "preferred_door_rate", preferred);
    const bool serves = preferred >= eval.door_threshold;
    served += serves ? 1 : 0;
    add(GroupName(g), "serves_group", serves ? 1.0 : 0.0);
    out.files["occupancy_g" + GroupName(g) + ".csv"] = Csv([&](std::ostream& os) {
      WriteOccupancyCsv(os, rr.occupancy, world.width(), world.height());
    });

    const auto top = CaterTopK(population, holdouts[g], evaluator, eval.top_k);
    std::vector<double> occupancy(world.num_states(), 0.0);
    double top_preferred = 0.0;
    for (std::size_t k = 0; k < top.size(); ++k) {
      RandomStream krng = eval_rng.Child("topk").Child(static_cast<std::uint64_t>(g), k);
      const auto& member = std::get<PolicyHypothesis>(population[top[k]]);
      const RolloutResult kr = Rollout(member, world, krng, eval.rollouts);
      const DoorUsage ku = MeasureDoorUsage(kr.trajectories, world);
      top_preferred += g == 0 ? ku.top_rate : ku.bottom_rate;
      for (std::size_t s = 0; s < occupancy.size(); ++s) occupancy[s] += kr.occupancy[s];
    }
    for (double& v : occupancy) v /= static_cast<double>(top.size());
    add(GroupName(g), "topk_preferred_door_rate", top_preferred / static_cast<double>(top.size()));
    out.files["occupancy_g" + GroupName(g) + "_top" + std::to_string(eval.top_k) + ".csv"] =
        Csv([&](std::ostream& os) {
          WriteOccupancyCsv(os, occupancy, world.width(), world.height());
        });
  }
  add("all", "groups_served", static_cast<double>(served));
  return out;
}

RunOutput ExecuteExperiment(const ExperimentConfig& c) {
  namespace fs = std::filesystem;
  const fs::path out_dir(c.output_dir);
  fs::create_directories(out_dir);
  const SeedFanout seeds = FanOutSeed(c.seed);
  const std::string config_hash = ConfigHash(c);

  Dataset data;
  json dm;
  if (c.dataset_dir.empty()) {
    spdlog::info("generating {} dataset (seed {})", c.experiment, c.seed);
    std::tie(data, dm) = GenerateDataset(c);
    WriteDataset(out_dir / "dataset", data, dm);
    dm["num_states"] = data.segments.num_states;
    dm["num_actions"] = data.segments.num_actions;
  } else {
    spdlog::info("loading dataset from {}", c.dataset_dir);
    data = ReadDataset(c.dataset_dir, &dm);
    if (dm.value("experiment", "") != c.experiment) {
      throw ConfigError("dataset in " + c.dataset_dir + " was not generated for experiment '" +
                        c.experiment + "'");
    }
  }

  spdlog::info("running {} on {} training preferences", c.method, data.train.size());
  MethodOutput method = RunMethod(c, data, dm, seeds.method);

  RunOutput run;
  run.evaluation = EvaluatePopulation(method.population, data, dm, c.eval, c.method, c.seed, c.jobs);
  run.population = std::move(method.population);
  run.stats = std::move(method.stats);

  std::map<std::string, std::string> files = run.evaluation.files;
  files["population.jsonl"] =
      Csv([&](std::ostream& os) { WritePopulation(os, run.population); });
  files["stats.csv"] = Csv([&](std::ostream& os) { WriteStatsCsv(os, run.stats); });
  files["metrics.csv"] =
      Csv([&](std::ostream& os) { WriteMetricsCsv(os, run.evaluation.metrics); });

  json manifest = {{"config", ConfigToJson(c)},
                   {"config_hash", config_hash},
                   {"dataset", dm},
                   {"files", json::object()}};
  for (const auto& [name, contents] : files) {
    WriteFile(out_dir / name, contents);
    const std::string hash = ContentHash(contents);
    run.file_hashes[name] = hash;
    manifest["files"][name] = {{"hash", hash}, {"config_hash", config_hash}};
  }
  WriteFile(out_dir / "manifest.json", manifest.dump(2) + "\n");
  spdlog::info("wrote {} files to {}", files.size() + 1, out_dir.string());
  return run;
}

int RunExperiment(const ExperimentConfig& config) {
  try {
    ExecuteExperiment(config);
    return 0;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}

void ConfigureLogging() {
  static const auto logger = [] {
    auto l = spdlog::stderr_logger_mt("popl");
    l->set_pattern("[%H:%M:%S.%e] [%l] %v");
    spdlog::set_default_logger(l);
    return l;
  }();
  const char* env = std::getenv("POPL_LOG");
  const std::string level = env == nullptr ? "warn" : env;
  static const std::map<std::string, spdlog::level::level_enum> levels = {
      {"trace", spdlog::level::trace}, {"debug", spdlog::level::debug},
      {"info", spdlog::level::info},   {"warn", spdlog::level::warn},
      {"error", spdlog::level::err},   {"off", spdlog::level::off}};
  const auto it = levels.find(level);
  logger->set_level(it == levels.end() ? spdlog::level::warn : it->second);
  if (it == levels.end()) spdlog::warn("unknown POPL_LOG level '{}', using warn", level);
}

}  // namespace popl
