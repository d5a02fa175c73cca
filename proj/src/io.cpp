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

#include "popl/io.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "popl/errors.hpp"

namespace popl {

using nlohmann::json;

namespace {

template <typename Fn>
void ForEachLine(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw InvalidInput("line " + std::to_string(number) + ": " + e.what());
    }
  }
}

}  // namespace

void WriteSegments(std::ostream& out, const SegmentSet& segments) {
  for (std::size_t i = 0; i < segments.size(); ++i) {
    json steps = json::array();
    for (const auto& step : segments.segments[i].steps) {
      json state = step.is_scalar() ? json(step.scalar()) : json(step.state_id());
      json action = step.action == kNoAction ? json(nullptr) : json(step.action);
      steps.push_back(json::array({state, action}));
    }
    out << json{{"id", i}, {"steps", steps}}.dump() << '\n';
  }
}

SegmentSet ReadSegments(std::istream& in, int num_states, int num_actions) {
  SegmentSet set;
  set.num_states = num_states;
  set.num_actions = num_actions;
  ForEachLine(in, [&](const json& j) {
    const auto id = j.at("id").get<std::size_t>();
    if (id != set.segments.size()) throw InvalidInput("segment ids must be 0, 1, 2, ...");
    Segment seg;
    for (const auto& pair : j.at("steps")) {
      Step step;
      const auto& state = pair.at(0);
      if (state.is_number_integer()) {
        step.state = state.get<int>();
      } else {
        step.state = state.get<double>();
      }
      step.action = pair.at(1).is_null() ? kNoAction : pair.at(1).get<int>();
      seg.steps.push_back(step);
    }
    set.segments.push_back(std::move(seg));
  });
  set.Validate();
  return set;
}

void WritePreferences(std::ostream& out, std::span<const Preference> prefs) {
  for (const auto& p : prefs) {
    out << json{{"winner", p.pair.winner},
                {"loser", p.pair.loser},
                {"group", p.group},
                {"annotator", p.annotator}}
               .dump()
        << '\n';
  }
}

std::vector<Preference> ReadPreferences(std::istream& in) {
  std::vector<Preference> prefs;
  ForEachLine(in, [&](const json& j) {
    Preference p;
    p.pair.winner = j.at("winner").get<std::size_t>();
    p.pair.loser = j.at("loser").get<std::size_t>();
    p.group = j.value("group", 0);
    p.annotator = j.value("annotator", 0);
    prefs.push_back(p);
  });
  return prefs;
}

json HypothesisToJson(const Hypothesis& h) {
  if (const auto* r = std::get_if<RewardHypothesis>(&h)) {
    return json{{"kind", "reward"}, {"weights", r->weights}};
  }
  const auto& p = std::get<PolicyHypothesis>(h);
  const auto logits = p.logits();
  return json{{"kind", "policy"},
              {"num_states", p.num_states()},
              {"num_actions", p.num_actions()},
              {"logits", std::vector<double>(logits.begin(), logits.end())}};
}

Hypothesis HypothesisFromJson(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "reward") return RewardHypothesis{j.at("weights").get<std::vector<double>>()};
  if (kind == "policy") {
    return PolicyHypothesis(j.at("num_states").get<int>(), j.at("num_actions").get<int>(),
                            j.at("logits").get<std::vector<double>>());
  }
  throw InvalidInput("unknown hypothesis kind '" + kind + "'");
}

void WritePopulation(std::ostream& out, std::span<const Hypothesis> population) {
  for (const auto& h : population) out << HypothesisToJson(h).dump() << '\n';
}

std::vector<Hypothesis> ReadPopulation(std::istream& in) {
  std::vector<Hypothesis> pop;
  ForEachLine(in, [&](const json& j) { pop.push_back(HypothesisFromJson(j)); });
  return pop;
}

std::string FormatDouble(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void WriteStatsCsv(std::ostream& out, std::span<const GenerationStats> stats) {
  out << "generation,mean_pass_rate,max_pass_rate,unique_candidates\n";
  for (const auto& s : stats) {
    out << s.generation << ',' << FormatDouble(s.mean_pass_rate) << ','
        << FormatDouble(s.max_pass_rate) << ',' << s.unique_candidates << '\n';
  }
}

void WriteMetricsCsv(std::ostream& out, std::span<const MetricRow> rows) {
  out << "method,group,metric,value,seed\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.group << ',' << r.metric << ',' << FormatDouble(r.value) << ','
        << r.seed << '\n';
  }
}

std::vector<MetricRow> ReadMetricsCsv(std::istream& in) {
  std::vector<MetricRow> rows;
  std::string line;
  if (!std::getline(in, line) || line != "method,group,metric,value,seed") {
    throw InvalidInput("metrics CSV header mismatch");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    MetricRow row;
    std::string value, seed;
    std::getline(ss, row.method, ',');
    std::getline(ss, row.group, ',');
    std::getline(ss, row.metric, ',');
    std::getline(ss, value, ',');
    std::getline(ss, seed, ',');
    row.value = std::stod(value);
    row.seed = std::stoull(seed);
    rows.push_back(std::move(row));
  }
  return rows;
}

void WriteOccupancyCsv(std::ostream& out, std::span<const double> occupancy, int width,
                       int height) {
  if (occupancy.size() != static_cast<std::size_t>(width) * height) {
    throw ConfigError("occupancy size does not match grid dimensions");
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (x > 0) out << ',';
      out << FormatDouble(occupancy[static_cast<std::size_t>(y) * width + x]);
    }
    out << '\n';
  }
}

std::string ContentHash(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

namespace {

std::string PreferencesText(std::span<const Preference> prefs) {
  std::ostringstream ss;
  WritePreferences(ss, prefs);
  return ss.str();
}

std::vector<Preference> LoadPreferences(const std::filesystem::path& path) {
  std::istringstream in(ReadFile(path));
  return ReadPreferences(in);
}

}  // namespace

void WriteDataset(const std::filesystem::path& dir, const Dataset& data, json manifest) {
  std::filesystem::create_directories(dir);
  std::ostringstream segs;
  WriteSegments(segs, data.segments);
  WriteFile(dir / "segments.jsonl", segs.str());
  WriteFile(dir / "train.jsonl", PreferencesText(data.train));
  for (int g = 0; g < kNumGroups; ++g) {
    WriteFile(dir / ("holdout_" + std::to_string(g) + ".jsonl"), PreferencesText(data.holdout[g]));
    WriteFile(dir / ("test_" + std::to_string(g) + ".jsonl"), PreferencesText(data.test[g]));
  }
  if (!data.demos.empty()) {
    SegmentSet demos{data.demos, data.segments.num_states, data.segments.num_actions};
    std::ostringstream ds;
    WriteSegments(ds, demos);
    WriteFile(dir / "demos.jsonl", ds.str());
  }
  manifest["num_states"] = data.segments.num_states;
  manifest["num_actions"] = data.segments.num_actions;
  WriteFile(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset ReadDataset(const std::filesystem::path& dir, json* manifest) {
  const json m = json::parse(ReadFile(dir / "manifest.json"));
  const int ns = m.at("num_states").get<int>();
  const int na = m.at("num_actions").get<int>();
  Dataset data;
  {
    std::istringstream in(ReadFile(dir / "segments.jsonl"));
    data.segments = ReadSegments(in, ns, na);
  }
  data.train = LoadPreferences(dir / "train.jsonl");
  for (int g = 0; g < kNumGroups; ++g) {
    data.holdout[g] = LoadPreferences(dir / ("holdout_" + std::to_string(g) + ".jsonl"));
    data.test[g] = LoadPreferences(dir / ("test_" + std::to_string(g) + ".jsonl"));
  }
  if (std::filesystem::exists(dir / "demos.jsonl")) {
    std::istringstream in(ReadFile(dir / "demos.jsonl"));
    data.demos = ReadSegments(in, ns, na).segments;
  }
  for (const auto* split : {&data.train, &data.holdout[0], &data.holdout[1], &data.test[0],
                            &data.test[1]}) {
    ValidatePairs(LearnerView(*split), data.segments);
  }
  if (manifest != nullptr) *manifest = m;
  return data;
}

}  // namespace popl
