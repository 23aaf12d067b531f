/*
 * Copyright 2026 The hardshap Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// hardshap command-line entry point.
//
// Exit codes: 0 success, 2 usage or validation error, 1 runtime failure.
// Every output file starts with '#' comment lines holding the invocation
// (minus --threads, which never changes results) and the seed.

#include <cstdint>
#include <cstdio>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hardshap/hardshap.hpp"

namespace fs = std::filesystem;
using namespace hardshap;

namespace {

// Re-throws with a stage prefix, keeping the error category.
template <typename Fn>
auto staged(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const InvalidInput& e) {
    throw InvalidInput("[" + stage + "] " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error("[" + stage + "] " + e.what());
  }
}

struct Invocation {
  std::string command_line;
  std::vector<std::string> config;  // resolved config-file entries

  std::vector<std::string> header(std::uint64_t seed) const {
    std::vector<std::string> out{command_line};
    for (const auto& c : config) out.push_back("config " + c);
    out.push_back("seed=" + std::to_string(seed));
    return out;
  }
};

Invocation make_invocation(int argc, char** argv) {
  std::string line = "hardshap";
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg == "--threads") {
      ++i;
      continue;
    }
    if (arg.rfind("--threads=", 0) == 0) continue;
    line += " " + arg;
  }
  return {line};
}

bool parse_bool(std::string v, const std::string& key) {
  for (auto& ch : v) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw InvalidInput("config key '" + key + "' expects true or false, got '" + v + "'");
}

// Turns `--config FILE` into ordinary arguments placed right after the
// subcommand name, so that later command-line flags win. Config files must
// set the seed of any subcommand that takes one (unless the flag does).
std::vector<std::string> expand_config(CLI::App& app, int argc, char** argv, Invocation& inv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::size_t sub_pos = args.size();
  CLI::App* sub = nullptr;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--threads") {
      ++i;
      continue;
    }
    if (auto* s = app.get_subcommand_no_throw(args[i]); s != nullptr && args[i].rfind("-", 0) != 0) {
      sub = s;
      sub_pos = i;
      break;
    }
  }
  if (sub == nullptr) return {args.rbegin(), args.rend()};

  std::string path;
  bool seed_flag = false;
  std::vector<std::string> rest;
  for (std::size_t i = sub_pos + 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      if (args[i] == "--seed" || args[i].rfind("--seed=", 0) == 0) seed_flag = true;
      rest.push_back(args[i]);
    }
  }
  std::vector<std::string> injected;
  if (!path.empty()) {
    require(fs::is_regular_file(path), "config file not found: " + path);
    std::ifstream in(path);
    std::string line;
    bool seed_set = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto text = std::string(detail::trim(line));
      if (text.empty() || text[0] == '#') continue;
      const auto eq = text.find('=');
      require(eq != std::string::npos,
              path + ":" + std::to_string(line_no) + ": expected key = value");
      std::string key(detail::trim(std::string_view(text).substr(0, eq)));
      std::string value(detail::trim(std::string_view(text).substr(eq + 1)));
      if (key.rfind("--", 0) == 0) key = key.substr(2);
      require(key != "config" && key != "threads", "config key '" + key + "' is not allowed in a config file");
      const CLI::Option* opt = sub->get_option_no_throw("--" + key);
      require(opt != nullptr, path + ":" + std::to_string(line_no) + ": unknown key '" + key + "' for " +
                                  sub->get_name());
      if (key == "seed") seed_set = true;
      inv.config.push_back(key + "=" + value);
      if (opt->get_expected_max() == 0) {
        if (parse_bool(value, key)) injected.push_back("--" + key);
      } else {
        injected.push_back("--" + key);
        injected.push_back(value);
      }
    }
    if (sub->get_option_no_throw("--seed") != nullptr)
      require(seed_set || seed_flag, "config file " + path + " must set seed");
  }
  std::vector<std::string> out(args.begin(), args.begin() + static_cast<long>(sub_pos) + 1);
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), rest.begin(), rest.end());
  // CLI11 takes the vector in reverse order.
  return {out.rbegin(), out.rend()};
}

void require_file(const std::string& path, const std::string& what) {
  require(!path.empty(), what + " path is required");
  require(fs::is_regular_file(path), what + " file not found: " + path);
}

void require_writable(const std::string& path, const std::string& what) {
  require(!path.empty(), what + " path is required");
  const auto parent = fs::path(path).parent_path();
  require(parent.empty() || fs::is_directory(parent), what + " directory does not exist: " + parent.string());
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<double> parse_doubles(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& s : split_list(text)) out.push_back(parse_double(s, what));
  require(!out.empty(), what + " list is empty");
  return out;
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
  fs::path p(path);
  const auto ext = p.extension().string();
  p.replace_extension();
  return p.string() + suffix + (ext.empty() ? ".csv" : ext);
}

std::string meta_text(const std::vector<std::string>& header, const std::map<std::string, std::string>& kv) {
  std::string out = comment_block(header);
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

// Scores CSV: id,score,rank,method; rank 0 is the hardest row.
std::string scores_csv(const ValuationScores& s, const std::vector<std::string>& header) {
  const auto order = rank_by_hardness(s);
  std::map<RowId, std::size_t> rank;
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;
  std::ostringstream out;
  out << comment_block(header) << "id,score,rank,method\n";
  for (std::size_t i = 0; i < s.scores.size(); ++i)
    out << s.ids[i] << ',' << format_double(s.scores[i]) << ',' << rank[s.ids[i]] << ',' << to_string(s.method)
        << '\n';
  return out.str();
}

ValuationScores read_scores(const std::string& path) {
  const Table t = read_table(path);
  const long id = t.column("id"), score = t.column("score"), method = t.column("method");
  require(id >= 0 && score >= 0, "scores file needs id and score columns: " + path);
  require(!t.rows.empty(), "scores file has no rows: " + path);
  ValuationScores s;
  for (const auto& row : t.rows) {
    s.ids.push_back(parse_uint(row[static_cast<std::size_t>(id)], "scores id"));
    s.scores.push_back(parse_double(row[static_cast<std::size_t>(score)], "scores"));
  }
  if (method >= 0) s.method = method_from_string(t.rows.front()[static_cast<std::size_t>(method)]);
  return s;
}

// Reorders scores to the row order of `ds`; every row needs a score.
ValuationScores align_scores(const ValuationScores& s, const Dataset& ds) {
  std::map<RowId, double> by_id;
  for (std::size_t i = 0; i < s.ids.size(); ++i) by_id[s.ids[i]] = s.scores[i];
  require(by_id.size() == ds.size(), "scores and dataset have different row counts");
  ValuationScores out{{}, ds.ids(), s.method, s.params};
  for (RowId id : ds.ids()) {
    auto it = by_id.find(id);
    require(it != by_id.end(), "no score for row id " + std::to_string(id));
    out.scores.push_back(it->second);
  }
  return out;
}

// A single value column, optionally keyed by an id column.
struct Column {
  std::vector<std::optional<RowId>> ids;
  std::vector<double> values;
};

Column read_value_column(const std::string& path, const std::vector<std::string>& preferred) {
  const Table t = read_table(path);
  const long id = t.column("id");
  long value = -1;
  for (const auto& name : preferred)
    if (value < 0) value = t.column(name);
  if (value < 0)
    for (long c = static_cast<long>(t.header.size()) - 1; c >= 0; --c)
      if (c != id) {
        value = c;
        break;
      }
  require(value >= 0, "no value column in " + path);
  Column col;
  for (const auto& row : t.rows) {
    col.ids.push_back(id >= 0 ? std::optional<RowId>(parse_uint(row[static_cast<std::size_t>(id)], "id"))
                              : std::nullopt);
    col.values.push_back(parse_double(row[static_cast<std::size_t>(value)], path));
  }
  require(!col.values.empty(), "no rows in " + path);
  return col;
}

struct Common {
  std::string label = "y";
  bool no_standardize = false;
};

void add_label(CLI::App* cmd, Common& c) {
  cmd->add_option("--label", c.label, "Label column name")->capture_default_str();
}

void add_no_standardize(CLI::App* cmd, Common& c) {
  cmd->add_flag("--no-standardize", c.no_standardize,
                "Skip z-scoring (population stddev, fitted on the training part)");
}

// ---------------------------------------------------------------------------

struct ValueArgs {
  Common common;
  std::string train, test, out;
  std::size_t k = 5;
  std::string method = "knn_shapley";
  std::size_t permutations = 0;
  double truncation_tol = 1e-4;
  std::uint64_t seed = 0;
};

int run_value(const ValueArgs& a, const Invocation& inv) {
  require(a.k >= 1, "K must be positive");
  require_file(a.train, "train");
  require_file(a.test, "test");
  require_writable(a.out, "output");
  const Method method = method_from_string(a.method);
  require(method == Method::kKnnShapley || method == Method::kExactShapley || method == Method::kTmcShapley,
          "value supports knn_shapley, exact_shapley and tmc_shapley");

  Dataset train = load_csv(a.train, a.common.label);
  Dataset test = load_csv(a.test, a.common.label);
  if (!a.common.no_standardize) {
    auto st = standardize(train, {test});
    train = std::move(st.train);
    test = std::move(st.others[0]);
  }
  ValuationScores scores;
  switch (method) {
    case Method::kExactShapley: scores = exact_data_shapley(train, test, a.k); break;
    case Method::kTmcShapley:
      scores = tmc_shapley(train, test, a.k, {a.permutations, a.truncation_tol, a.seed});
      break;
    default: scores = knn_shapley(train, test, a.k); break;
  }
  const auto header = inv.header(a.seed);
  write_text(a.out, scores_csv(scores, header));
  auto meta = scores.params;
  meta["method"] = std::string(to_string(method));
  meta["seed"] = std::to_string(a.seed);
  meta["standardize"] = a.common.no_standardize ? "false" : "true";
  meta["n_train"] = std::to_string(train.size());
  meta["n_test"] = std::to_string(test.size());
  write_text(a.out + ".meta", meta_text(header, meta));
  std::cerr << "value: method=" << to_string(method) << " K=" << a.k << " seed=" << a.seed
            << " standardize=" << (a.common.no_standardize ? "no" : "yes") << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct RankArgs {
  Common common;
  std::string scores, out, data, subset_out;
  double tau = 0.0;
};

int run_rank(const RankArgs& a, const Invocation& inv) {
  require_file(a.scores, "scores");
  require_writable(a.out, "output");
  if (!a.subset_out.empty()) {
    require_file(a.data, "data");
    require(a.tau > 0.0 && a.tau <= 1.0, "tau must lie in (0,1]");
  }
  const auto scores = read_scores(a.scores);
  const auto order = rank_by_hardness(scores);
  std::map<RowId, double> by_id;
  for (std::size_t i = 0; i < scores.ids.size(); ++i) by_id[scores.ids[i]] = scores.scores[i];
  std::ostringstream out;
  out << comment_block(inv.header(0)) << "rank,id,score\n";
  for (std::size_t r = 0; r < order.size(); ++r) out << r << ',' << order[r] << ',' << format_double(by_id[order[r]]) << '\n';
  write_text(a.out, out.str());
  if (!a.subset_out.empty()) {
    const Dataset ds = load_csv(a.data, a.common.label);
    save_csv(hardest_subset(ds, align_scores(scores, ds), a.tau), a.subset_out, inv.header(0));
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct AugmentArgs {
  Common common;
  std::string data, scores, out, generator, exec_in, exec_out, exec_cmd, weights;
  double tau = 0.05, amount = 1.0;
  std::size_t k = 5;
  std::uint64_t seed = 0;
};

GeneratorSpec make_generator(const std::string& kind, std::size_t k, std::uint64_t seed, const std::string& exec_in,
                             const std::string& exec_out, const std::string& exec_cmd) {
  GeneratorSpec g;
  if (kind == "smote") {
    g.kind = GeneratorKind::kSmote;
    require(k >= 1, "SMOTE needs --k >= 1");
  } else if (kind == "external") {
    g.kind = GeneratorKind::kExternal;
    require(!exec_in.empty() && !exec_out.empty(), "external generator needs --exec-in and --exec-out");
  } else {
    throw InvalidInput("unknown generator '" + kind + "' (expected smote or external)");
  }
  g.k_neighbors = k;
  g.seed = seed;
  g.exchange_in = exec_in;
  g.exchange_out = exec_out;
  g.command = exec_cmd;
  return g;
}

std::vector<double> read_weights(const std::string& path, const Dataset& ds) {
  if (path.empty()) return {};
  const Table t = read_table(path);
  const long f = t.column("feature"), w = t.column("weight");
  require(f >= 0 && w >= 0, "weights file needs feature and weight columns");
  std::map<std::string, double> by_name;
  for (const auto& row : t.rows)
    by_name[row[static_cast<std::size_t>(f)]] = parse_double(row[static_cast<std::size_t>(w)], "weight");
  std::vector<double> out;
  for (const auto& name : ds.feature_names()) {
    auto it = by_name.find(name);
    require(it != by_name.end(), "no weight for feature '" + name + "'");
    out.push_back(it->second);
  }
  return out;
}

int run_augment(const AugmentArgs& a, const Invocation& inv) {
  require_file(a.data, "data");
  require_file(a.scores, "scores");
  require_writable(a.out, "output");
  require(a.tau > 0.0 && a.tau <= 1.0, "tau must lie in (0,1]");
  require(a.amount > 0.0, "amount must be positive");
  if (!a.weights.empty()) require_file(a.weights, "weights");
  const auto gen = make_generator(a.generator, a.k, a.seed, a.exec_in, a.exec_out, a.exec_cmd);

  const Dataset train = load_csv(a.data, a.common.label);
  const auto scores = align_scores(read_scores(a.scores), train);
  if (gen.kind == GeneratorKind::kExternal && gen.command.empty() && !fs::exists(gen.exchange_out)) {
    save_csv(hardest_subset(train, scores, a.tau), gen.exchange_in, inv.header(a.seed));
    std::cerr << "augment: wrote hard subset to " << gen.exchange_in.string() << "; run the generator to produce "
              << gen.exchange_out.string() << " with " << synthetic_count(train.size(), a.tau, a.amount)
              << " rows, then rerun\n";
    return 0;
  }
  const auto aug = targeted_augment(train, scores, a.tau, a.amount, gen);
  const auto header = inv.header(a.seed);
  save_csv(aug.data, a.out, header);
  const auto weights = read_weights(a.weights, train);
  std::map<std::string, std::string> meta{
      {"generator", std::string(to_string(gen.kind))},
      {"seed", std::to_string(a.seed)},
      {"tau", format_double(a.tau)},
      {"amount", format_double(a.amount)},
      {"hard_rows", std::to_string(aug.hard_subset.size())},
      {"synthetic_rows", std::to_string(aug.batch.size())},
      {"augmented_rows", std::to_string(aug.data.size())},
      {"weighted_ks", format_double(weighted_ks(aug.hard_subset, aug.batch, weights))}};
  write_text(a.out + ".meta", meta_text(header, meta));
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  Common common;
  std::string probs, labels, train, valid, out;
  std::size_t k = kDefaultDownstreamK;
};

int run_eval(const EvalArgs& a, const Invocation& inv) {
  std::vector<double> probs;
  std::vector<Label> labels;
  if (!a.probs.empty()) {
    require_file(a.probs, "probs");
    require_file(a.labels, "labels");
    const auto p = read_value_column(a.probs, {"prob", "p", "score"});
    const auto l = read_value_column(a.labels, {a.common.label, "label", "y"});
    require(p.values.size() == l.values.size(), "probs and labels have different row counts");
    const bool keyed = p.ids.front().has_value() && l.ids.front().has_value();
    std::map<RowId, double> label_by_id;
    if (keyed)
      for (std::size_t i = 0; i < l.values.size(); ++i) label_by_id[*l.ids[i]] = l.values[i];
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      double y = l.values[i];
      if (keyed) {
        auto it = label_by_id.find(*p.ids[i]);
        require(it != label_by_id.end(), "no label for id " + std::to_string(*p.ids[i]));
        y = it->second;
      }
      require(y == 0.0 || y == 1.0, "invalid label");
      require(p.values[i] >= 0.0 && p.values[i] <= 1.0, "probability outside [0,1]");
      probs.push_back(p.values[i]);
      labels.push_back(static_cast<Label>(y));
    }
  } else {
    require_file(a.train, "train");
    require_file(a.valid, "valid");
    require(a.k >= 1, "K must be positive");
    Dataset train = load_csv(a.train, a.common.label);
    Dataset valid = load_csv(a.valid, a.common.label);
    if (!a.common.no_standardize) {
      auto st = standardize(train, {valid});
      train = std::move(st.train);
      valid = std::move(st.others[0]);
    }
    probs = knn_predict_proba(train, valid, a.k);
    labels = valid.labels();
  }
  const double auc = auc_roc(probs, labels);
  std::ostringstream text;
  text << "metric,value\nauc," << format_double(auc) << "\ngini," << format_double(2.0 * auc - 1.0) << '\n';
  std::cout << text.str();
  if (!a.out.empty()) {
    require_writable(a.out, "output");
    write_text(a.out, comment_block(inv.header(0)) + text.str());
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct PipelineArgs {
  Common common;
  std::string train, valid, test, out, generator, exec_in, exec_out, exec_cmd;
  bool blobs = false;
  std::uint64_t blobs_seed = 0;
  std::size_t k = 5, downstream_k = kDefaultDownstreamK, smote_k = 5, replicates = 30;
  double tau = 0.05, amount = 1.0;
  std::uint64_t seed = 0;
  bool baseline = false;
};

int run_pipeline(const PipelineArgs& a, const Invocation& inv) {
  // Everything is validated before the first computation.
  require(a.k >= 1, "K must be positive");
  require(a.downstream_k >= 1, "downstream K must be positive");
  require(a.replicates >= 1, "replicates must be positive");
  require(a.tau > 0.0 && a.tau <= 1.0, "tau must lie in (0,1]");
  require(a.amount > 0.0, "amount must be positive");
  require_writable(a.out, "output");
  const auto gen = make_generator(a.generator, a.smote_k, a.seed, a.exec_in, a.exec_out, a.exec_cmd);
  if (!a.blobs) {
    require_file(a.train, "train");
    require_file(a.valid, "valid");
    require_file(a.test, "test");
  }

  Dataset train, valid, test;
  staged("load", [&] {
    if (a.blobs) {
      BlobConfig cfg;
      cfg.seed = a.blobs_seed;
      auto b = gen_blobs(cfg);
      train = std::move(b.train);
      valid = std::move(b.valid);
      test = std::move(b.test);
    } else {
      train = load_csv(a.train, a.common.label);
      valid = load_csv(a.valid, a.common.label);
      test = load_csv(a.test, a.common.label);
    }
    if (!a.common.no_standardize) {
      auto st = standardize(train, {valid, test});
      train = std::move(st.train);
      valid = std::move(st.others[0]);
      test = std::move(st.others[1]);
    }
  });
  const auto scores = staged("value", [&] { return knn_shapley(train, test, a.k); });
  staged("rank", [&] { return hardest_subset(train, scores, a.tau); });

  struct Arm {
    std::string name;
    PipelineConfig cfg;
    MetricReport report;
  };
  std::vector<Arm> arms;
  PipelineConfig targeted{a.tau, a.amount, gen, a.downstream_k};
  arms.push_back({"targeted", targeted, {}});
  const std::size_t m = synthetic_count(train.size(), a.tau, a.amount);
  if (a.baseline) {
    PipelineConfig flat = targeted;
    flat.tau = 1.0;
    flat.amount = static_cast<double>(m) / static_cast<double>(train.size());
    arms.push_back({"non_targeted", flat, {}});
  }
  for (auto& arm : arms)
    arm.report = staged("augment/" + arm.name,
                        [&] { return repeated_gini(train, valid, scores, arm.cfg, a.replicates, a.seed); });

  const auto header = inv.header(a.seed);
  std::ostringstream rows;
  rows << comment_block(header) << "arm,replicate,gini\n";
  for (const auto& arm : arms)
    for (std::size_t r = 0; r < arm.report.replicates.size(); ++r)
      rows << arm.name << ',' << r << ',' << format_double(arm.report.replicates[r]) << '\n';
  write_text(a.out, rows.str());

  std::ostringstream summary;
  summary << comment_block(header) << "arm,metric,mean,ci_low,ci_high,replicates,synthetic_rows\n";
  auto emit = [&](const std::string& name, const MetricReport& rep, std::size_t synth) {
    summary << name << ',' << rep.metric << ',' << format_double(rep.mean) << ',' << format_double(rep.ci_low) << ','
            << format_double(rep.ci_high) << ',' << rep.replicates.size() << ',' << synth << '\n';
  };
  for (const auto& arm : arms)
    emit(arm.name, arm.report, synthetic_count(train.size(), arm.cfg.tau, arm.cfg.amount));
  if (arms.size() == 2) {
    std::vector<double> diff;
    for (std::size_t r = 0; r < a.replicates; ++r)
      diff.push_back(arms[0].report.replicates[r] - arms[1].report.replicates[r]);
    emit("difference", make_report("gini_difference", diff), m);
  }
  write_text(with_suffix(a.out, "_summary"), summary.str());
  std::cerr << "eval-pipeline: targeted gini " << arms[0].report.mean << " over " << a.replicates << " replicates\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  Common common;
  std::string data, out, mean_out;
  std::size_t blobs_n = 2000;
  std::uint64_t blobs_seed = 0;
  std::string kinds = "mislabeling,ood,atypical";
  std::string proportions = "0.05,0.1,0.15,0.2";
  std::string characterizers = "knn_shapley,dataiq,random";
  BenchmarkConfig cfg;
};

int run_bench(BenchArgs a, const Invocation& inv) {
  require_writable(a.out, "output");
  if (!a.data.empty()) require_file(a.data, "data");
  a.cfg.kinds.clear();
  for (const auto& k : split_list(a.kinds)) a.cfg.kinds.push_back(hardness_kind_from_string(k));
  a.cfg.proportions = parse_doubles(a.proportions, "proportions");
  a.cfg.characterizers.clear();
  for (const auto& c : split_list(a.characterizers)) a.cfg.characterizers.push_back(characterizer_from_string(c));
  a.cfg.standardize = !a.common.no_standardize;
  require(a.cfg.runs >= 1, "runs must be positive");
  require(a.cfg.K >= 1, "K must be positive");
  require(a.cfg.reference_fraction > 0.0 && a.cfg.reference_fraction < 1.0, "reference fraction must lie in (0,1)");

  Dataset ds;
  if (a.data.empty()) {
    BlobConfig b;
    b.n_train = a.blobs_n;
    b.seed = a.blobs_seed;
    ds = gen_blobs(b).train;
  } else {
    ds = load_csv(a.data, a.common.label);
  }
  const auto rows = benchmark(ds, a.cfg);
  const auto header = inv.header(a.cfg.seed);
  std::ostringstream out;
  out << comment_block(header) << "kind,proportion,characterizer,run,auprc\n";
  for (const auto& r : rows)
    out << to_string(r.kind) << ',' << format_double(r.proportion) << ',' << to_string(r.characterizer) << ','
        << r.run << ',' << format_double(r.auprc) << '\n';
  write_text(a.out, out.str());

  std::ostringstream mean;
  mean << comment_block(header) << "kind,proportion,characterizer,mean_auprc,std_error\n";
  for (const auto& s : summarize(rows, a.cfg))
    mean << to_string(s.kind) << ',' << format_double(s.proportion) << ',' << to_string(s.characterizer) << ','
         << format_double(s.mean_auprc) << ',' << format_double(s.std_error) << '\n';
  write_text(a.mean_out.empty() ? with_suffix(a.out, "_mean") : a.mean_out, mean.str());
  return 0;
}

// ---------------------------------------------------------------------------

struct DataIqArgs {
  Common common;
  std::string probs, data, out, probs_out, thresholds;
  std::size_t checkpoints = 10, k = 5;
  std::uint64_t seed = 0;
  TagThresholds t;
};

CheckpointProbs read_checkpoints(const std::string& path) {
  const Table t = read_table(path);
  const long id = t.column("id");
  require(id == 0, "checkpoint file must start with an id column");
  require(t.header.size() >= 2, "checkpoint file needs at least one probability column");
  CheckpointProbs cp{t.rows.size(), t.header.size() - 1, {}, {}};
  for (const auto& row : t.rows) {
    cp.ids.push_back(parse_uint(row[0], "checkpoint id"));
    for (std::size_t c = 1; c < row.size(); ++c) cp.probs.push_back(parse_double(row[c], "checkpoint probability"));
  }
  require(cp.rows >= 1, "checkpoint file has no rows");
  cp.validate();
  return cp;
}

int run_dataiq(DataIqArgs a, const Invocation& inv) {
  require_writable(a.out, "output");
  if (!a.thresholds.empty()) {
    const auto v = parse_doubles(a.thresholds, "thresholds");
    require(v.size() == 3, "--thresholds takes low_conf,high_conf,low_aleatoric");
    a.t = {v[0], v[1], v[2]};
  }
  require(a.t.low_confidence < a.t.high_confidence, "low confidence threshold must be below the high threshold");
  CheckpointProbs cp;
  if (!a.probs.empty()) {
    require_file(a.probs, "probs");
    cp = read_checkpoints(a.probs);
  } else {
    require_file(a.data, "data");
    require(a.checkpoints >= 2, "need at least two checkpoints");
    require(a.k >= 1, "K must be positive");
    Dataset ds = load_csv(a.data, a.common.label);
    if (!a.common.no_standardize) ds = standardize(ds).train;
    cp = bagged_checkpoint_probs(ds, a.checkpoints, a.k, a.seed);
  }
  const auto header = inv.header(a.seed);
  const auto tags = tag(confidence(cp), aleatoric(cp), a.t);
  std::ostringstream out;
  out << comment_block(header) << "id,confidence,aleatoric,tag\n";
  for (std::size_t i = 0; i < cp.rows; ++i)
    out << cp.ids[i] << ',' << format_double(tags.confidence[i]) << ',' << format_double(tags.aleatoric[i]) << ','
        << to_string(tags.tags[i]) << '\n';
  write_text(a.out, out.str());
  if (!a.probs_out.empty()) {
    require_writable(a.probs_out, "probs output");
    std::ostringstream p;
    p << comment_block(header) << "id";
    for (std::size_t e = 0; e < cp.checkpoints; ++e) p << ",p_" << (e + 1);
    p << '\n';
    for (std::size_t i = 0; i < cp.rows; ++i) {
      p << cp.ids[i];
      for (std::size_t e = 0; e < cp.checkpoints; ++e) p << ',' << format_double(cp.at(i, e));
      p << '\n';
    }
    write_text(a.probs_out, p.str());
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct RemovalArgs {
  Common common;
  std::string train, valid, scores, out;
  std::string fractions = "0,0.05,0.1,0.15,0.2";
  std::string strategy = "both";
  std::size_t k = kDefaultDownstreamK;
  std::uint64_t seed = 0;
};

int run_removal(const RemovalArgs& a, const Invocation& inv) {
  require_file(a.train, "train");
  require_file(a.valid, "valid");
  require_file(a.scores, "scores");
  require_writable(a.out, "output");
  require(a.k >= 1, "K must be positive");
  std::vector<RemovalStrategy> strategies;
  if (a.strategy == "hardest" || a.strategy == "both") strategies.push_back(RemovalStrategy::kHardest);
  if (a.strategy == "random" || a.strategy == "both") strategies.push_back(RemovalStrategy::kRandom);
  require(!strategies.empty(), "strategy must be hardest, random or both");
  const auto fractions = parse_doubles(a.fractions, "fractions");

  Dataset train = load_csv(a.train, a.common.label);
  Dataset valid = load_csv(a.valid, a.common.label);
  if (!a.common.no_standardize) {
    auto st = standardize(train, {valid});
    train = std::move(st.train);
    valid = std::move(st.others[0]);
  }
  const auto scores = align_scores(read_scores(a.scores), train);
  std::ostringstream out;
  out << comment_block(inv.header(a.seed)) << "strategy,fraction,gini\n";
  for (auto s : strategies)
    for (const auto& p : removal_curve(train, valid, scores, fractions, s, a.seed, a.k))
      out << to_string(s) << ',' << format_double(p.fraction) << ',' << format_double(p.gini) << '\n';
  write_text(a.out, out.str());
  return 0;
}

// ---------------------------------------------------------------------------

struct SimToyArgs {
  double x_train = 0.0;
  QuadratureGrid grid;
  std::string sweep, out;
};

std::string fraction_text(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

int run_sim_toy(const SimToyArgs& a, const Invocation& inv) {
  require(std::isfinite(a.x_train), "x-train must be finite");
  if (!a.out.empty()) require_writable(a.out, "output");
  std::ostringstream text;
  text << comment_block(inv.header(0));
  text << "expected_shapley=" << fraction_text(toy_expected_shapley(a.x_train, a.grid)) << '\n';
  text << "x_lower,x_upper,x_test,y_test,s_minus,s_train,s_plus\n";
  for (const auto& r : toy_table(a.x_train))
    text << format_double(r.lower) << ',' << format_double(r.upper) << ',' << format_double(r.representative) << ','
         << static_cast<int>(r.y_test) << ',' << fraction_text(r.shapleys.s_minus) << ','
         << fraction_text(r.shapleys.s_train) << ',' << fraction_text(r.shapleys.s_plus) << '\n';
  if (!a.sweep.empty()) {
    text << "x_train,expected_shapley\n";
    for (double x : parse_doubles(a.sweep, "sweep"))
      text << format_double(x) << ',' << fraction_text(toy_expected_shapley(x, a.grid)) << '\n';
  }
  std::cout << text.str();
  if (!a.out.empty()) write_text(a.out, text.str());
  return 0;
}

struct SimBlobsArgs {
  BlobConfig cfg;
  std::string prefix;
};

int run_sim_blobs(const SimBlobsArgs& a, const Invocation& inv) {
  require_writable(a.prefix + "_train.csv", "output prefix");
  const auto b = gen_blobs(a.cfg);
  const auto header = inv.header(a.cfg.seed);
  save_csv(b.train, a.prefix + "_train.csv", header);
  save_csv(b.valid, a.prefix + "_valid.csv", header);
  save_csv(b.test, a.prefix + "_test.csv", header);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KNN Shapley hardness scores and targeted synthetic augmentation for binary tabular data"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_path;
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = all cores); outputs do not depend on it")
      ->capture_default_str();

  ValueArgs value;
  auto* value_cmd = app.add_subcommand("value", "Score training rows by KNN Shapley (or an exact/TMC oracle)");
  value_cmd->add_option("--config", config_path, "Key=value config file (one option per line); flags override it");
  value_cmd->add_option("--train", value.train, "Training CSV")->required();
  value_cmd->add_option("--test", value.test, "Test CSV the values are measured against")->required();
  value_cmd->add_option("--out", value.out, "Scores CSV (id,score,rank,method); metadata goes to <out>.meta")->required();
  value_cmd->add_option("--k", value.k, "Neighbors K")->capture_default_str();
  value_cmd->add_option("--method", value.method, "knn_shapley | exact_shapley (n <= 16) | tmc_shapley")->capture_default_str();
  value_cmd->add_option("--permutations", value.permutations, "TMC permutations (0 = 100 * n)")->capture_default_str();
  value_cmd->add_option("--truncation-tol", value.truncation_tol, "TMC truncation tolerance")->capture_default_str();
  value_cmd->add_option("--seed", value.seed, "Seed (TMC only)")->capture_default_str();
  add_label(value_cmd, value.common);
  add_no_standardize(value_cmd, value.common);

  RankArgs rank;
  auto* rank_cmd = app.add_subcommand("rank", "Order rows by hardness (ascending score, ties by id)");
  rank_cmd->add_option("--config", config_path, "Key=value config file (one option per line); flags override it");
  rank_cmd->add_option("--scores", rank.scores, "Scores CSV from `value`")->required();
  rank_cmd->add_option("--out", rank.out, "Ordering CSV (rank,id,score); rank 0 is hardest")->required();
  rank_cmd->add_option("--data", rank.data, "Dataset CSV, needed for --subset-out");
  rank_cmd->add_option("--tau", rank.tau, "Hardest fraction for --subset-out");
  rank_cmd->add_option("--subset-out", rank.subset_out, "Write the ceil(tau*n) hardest rows here");
  add_label(rank_cmd, rank.common);

  AugmentArgs aug;
  auto* aug_cmd = app.add_subcommand("augment", "Generate synthetic rows from the hardest points and append them");
  aug_cmd->add_option("--config", config_path, "Key=value config file (one option per line); flags override it");
  aug_cmd->add_option("--data", aug.data, "Training CSV")->required();
  aug_cmd->add_option("--scores", aug.scores, "Scores CSV aligned with --data")->required();
  aug_cmd->add_option("--out", aug.out, "Augmented CSV; metadata (incl. weighted KS) goes to <out>.meta")->required();
  aug_cmd->add_option("--generator", aug.generator, "smote | external")->required();
  aug_cmd->add_option("--tau", aug.tau, "Hardest fraction to generate from")->capture_default_str();
  aug_cmd->add_option("--amount", aug.amount, "Synthetic rows as a multiple of the hard subset size")->capture_default_str();
  aug_cmd->add_option("--k", aug.k, "SMOTE neighbors")->capture_default_str();
  aug_cmd->add_option("--seed", aug.seed, "Generator seed")->capture_default_str();
  aug_cmd->add_option("--exec-in", aug.exec_in, "External generator: hard subset is written here");
  aug_cmd->add_option("--exec-out", aug.exec_out, "External generator: synthetic rows are read from here");
  aug_cmd->add_option("--exec-cmd", aug.exec_cmd, "External generator command ({in} {out} {m} {seed} substituted)");
  aug_cmd->add_option("--weights", aug.weights, "Feature weights CSV (feature,weight) for the KS fidelity score");
  add_label(aug_cmd, aug.common);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "ROC AUC and Gini of probabilities, or of a KNN fit on --train");
  eval_cmd->add_option("--config", config_path, "Key=value config file (one option per line); flags override it");
  eval_cmd->add_option("--probs", ev.probs, "Probabilities CSV (optionally keyed by id)");
  eval_cmd->add_option("--labels", ev.labels, "Labels CSV (optionally keyed by id)");
  eval_cmd->add_option("--train", ev.train, "Training CSV for the KNN classifier");
  eval_cmd->add_option("--valid", ev.valid, "Validation CSV for the KNN classifier");
  eval_cmd->add_option("--k", ev.k, "KNN classifier neighbors")->capture_default_str();
  eval_cmd->add_option("--out", ev.out, "Also write the metrics CSV here");
  add_label(eval_cmd, ev.common);
  add_no_standardize(eval_cmd, ev.common);

  PipelineArgs pipe;
  auto* pipe_cmd = app.add_subcommand("eval-pipeline", "value -> rank -> targeted augment -> repeated Gini");
  pipe_cmd->add_option("--config", config_path, "Key=value config file (one option per line); flags override it");
  pipe_cmd->add_option("--train", pipe.train, "Training CSV");
  pipe_cmd->add_option("--valid", pipe.valid, "Validation CSV (Gini is measured here)");
  pipe_cmd->add_option("--test", pipe.test, "Test CSV (KNN Shapley values are measured here)");
  pipe_cmd->add_flag("--blobs", pipe.blobs, "Use the default simulated blobs instead of CSVs");
  pipe_cmd->add_option("--blobs-seed", pipe.blobs_seed, "Seed for --blobs")->capture_default_str();
  pipe_cmd->add_option("--out", pipe.out, "Replicates CSV (arm,replicate,gini); summary goes to <out>_summary.csv")->required();
  pipe_cmd->add_option("--generator", pipe.generator, "smote | external")->required();
  pipe_cmd->add_option("--seed", pipe.seed, "Base seed for the replicates")->required();
  pipe_cmd->add_option("--k", pipe.k, "KNN Shapley neighbors")->capture_default_str();
  pipe_cmd->add_option("--downstream-k", pipe.downstream_k, "KNN classifier neighbors")->capture_default_str();
  pipe_cmd->add_option("--smote-k", pipe.smote_k, "SMOTE neighbors")->capture_default_str();
  pipe_cmd->add_option("--tau", pipe.tau, "Hardest fraction")->capture_default_str();
  pipe_cmd->add_option("--amount", pipe.amount, "Synthetic rows as a multiple of the hard subset size")->capture_default_str();
  pipe_cmd->add_option("--replicates", pipe.replicates, "Generator replicates per arm")->capture_default_str();
  pipe_cmd->add_flag("--baseline", pipe.baseline, "Also run the non-targeted arm (tau=1) with the same synthetic budget");
  pipe_cmd->add_option("--exec-in", pipe.exec_in, "External generator: hard subset path");
  pipe_cmd->add_option("--exec-out", pipe.exec_out, "External generator: synthetic rows path");
  pipe_cmd->add_option("--exec-cmd", pipe.exec_cmd, "External generator command");
  add_label(pipe_cmd, pipe.common);
  add_no_standardize(pipe_cmd, pipe.common);

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("perturb-bench", "AUPRC of characterizers against planted hardness");
  bench_cmd->add_option("--config", config_path, "Key=value config file (one option per line); flags override it");
  bench_cmd->add_option("--data", bench.data, "Dataset CSV (default: simulated blobs)");
  bench_cmd->add_option("--blobs-n", bench.blobs_n, "Blob rows when --data is absent")->capture_default_str();
  bench_cmd->add_option("--blobs-seed", bench.blobs_seed, "Blob seed when --data is absent")->capture_default_str();
  bench_cmd->add_option("--out", bench.out, "Per-run CSV (kind,proportion,characterizer,run,auprc)")->required();
  bench_cmd->add_option("--mean-out", bench.mean_out, "Aggregated mean_auprc CSV (default <out>_mean.csv)");
  bench_cmd->add_option("--kinds", bench.kinds, "mislabeling,ood,atypical")->capture_default_str();
  bench_cmd->add_option("--proportions", bench.proportions, "Perturbed proportions")->capture_default_str();
  bench_cmd->add_option("--characterizers", bench.characterizers, "knn_shapley,dataiq,random")->capture_default_str();
  bench_cmd->add_option("--runs", bench.cfg.runs, "Independent runs per cell")->capture_default_str();
  bench_cmd->add_option("--seed", bench.cfg.seed, "Seed")->capture_default_str();
  bench_cmd->add_option("--k", bench.cfg.K, "KNN Shapley neighbors")->capture_default_str();
  bench_cmd->add_option("--reference-fraction", bench.cfg.reference_fraction,
                        "Clean held-out share used as the valuation test set")->capture_default_str();
  bench_cmd->add_option("--magnitude", bench.cfg.ood_magnitude, "OOD shift in per-feature stddevs")->capture_default_str();
  bench_cmd->add_option("--quantile", bench.cfg.atypical_quantile, "Atypical target radius quantile")->capture_default_str();
  bench_cmd->add_option("--checkpoints", bench.cfg.dataiq_checkpoints, "Data-IQ bagged checkpoints")->capture_default_str();
  bench_cmd->add_option("--dataiq-k", bench.cfg.dataiq_k, "Data-IQ KNN neighbors")->capture_default_str();
  add_label(bench_cmd, bench.common);
  add_no_standardize(bench_cmd, bench.common);

  DataIqArgs diq;
  auto* diq_cmd = app.add_subcommand("dataiq", "Data-IQ confidence, aleatoric uncertainty and Easy/Hard/Ambiguous tags");
  diq_cmd->add_option("--config", config_path, "Key=value config file (one option per line); flags override it");
  diq_cmd->add_option("--probs", diq.probs, "Checkpoint probabilities CSV (id,p_1,...,p_E)");
  diq_cmd->add_option("--data", diq.data, "Dataset CSV; checkpoints come from a bagged KNN ensemble");
  diq_cmd->add_option("--out", diq.out, "Tags CSV (id,confidence,aleatoric,tag)")->required();
  diq_cmd->add_option("--probs-out", diq.probs_out, "Write the checkpoint probabilities here");
  diq_cmd->add_option("--checkpoints", diq.checkpoints, "Bagged checkpoints E")->capture_default_str();
  diq_cmd->add_option("--k", diq.k, "Bagged KNN neighbors")->capture_default_str();
  diq_cmd->add_option("--seed", diq.seed, "Bootstrap seed")->capture_default_str();
  diq_cmd->add_option("--thresholds", diq.thresholds, "low_conf,high_conf,low_aleatoric (default 0.25,0.75,0.2)");
  diq_cmd->add_option("--low-conf", diq.t.low_confidence, "Low confidence threshold")->capture_default_str();
  diq_cmd->add_option("--high-conf", diq.t.high_confidence, "High confidence threshold")->capture_default_str();
  diq_cmd->add_option("--low-aleatoric", diq.t.low_aleatoric, "Low aleatoric threshold")->capture_default_str();
  add_label(diq_cmd, diq.common);
  add_no_standardize(diq_cmd, diq.common);

  RemovalArgs rem;
  auto* rem_cmd = app.add_subcommand("removal-curve", "Validation Gini after removing the hardest or random rows");
  rem_cmd->add_option("--config", config_path, "Key=value config file (one option per line); flags override it");
  rem_cmd->add_option("--train", rem.train, "Training CSV")->required();
  rem_cmd->add_option("--valid", rem.valid, "Validation CSV")->required();
  rem_cmd->add_option("--scores", rem.scores, "Scores CSV aligned with --train")->required();
  rem_cmd->add_option("--out", rem.out, "Curve CSV (strategy,fraction,gini)")->required();
  rem_cmd->add_option("--fractions", rem.fractions, "Ascending removal fractions in [0,1)")->capture_default_str();
  rem_cmd->add_option("--strategy", rem.strategy, "hardest | random | both")->capture_default_str();
  rem_cmd->add_option("--k", rem.k, "KNN classifier neighbors")->capture_default_str();
  rem_cmd->add_option("--seed", rem.seed, "Seed for random removal")->capture_default_str();
  add_label(rem_cmd, rem.common);
  add_no_standardize(rem_cmd, rem.common);

  SimToyArgs toy;
  auto* toy_cmd = app.add_subcommand("sim-toy", "Expected 1NN Shapley of (x_train, 0) and the per-interval table");
  toy_cmd->add_option("--config", config_path, "Key=value config file (one option per line); flags override it");
  toy_cmd->add_option("--x-train", toy.x_train, "Location of the label-0 training point")->capture_default_str();
  toy_cmd->add_option("--lower", toy.grid.lower, "Quadrature lower bound")->capture_default_str();
  toy_cmd->add_option("--upper", toy.grid.upper, "Quadrature upper bound")->capture_default_str();
  toy_cmd->add_option("--step", toy.grid.step, "Trapezoid step")->capture_default_str();
  toy_cmd->add_option("--sweep", toy.sweep, "Comma-separated x_train values to integrate as well");
  toy_cmd->add_option("--out", toy.out, "Also write the printed output here");

  SimBlobsArgs blobs;
  auto* blobs_cmd = app.add_subcommand("sim-blobs", "Write the four-Gaussian train/valid/test CSVs");
  blobs_cmd->add_option("--config", config_path, "Key=value config file (one option per line); flags override it");
  blobs_cmd->add_option("--seed", blobs.cfg.seed, "Seed")->required();
  blobs_cmd->add_option("--out-prefix", blobs.prefix, "Writes <prefix>_train.csv, _valid.csv, _test.csv")->required();
  blobs_cmd->add_option("--n-train", blobs.cfg.n_train, "Training rows")->capture_default_str();
  blobs_cmd->add_option("--n-valid", blobs.cfg.n_valid, "Validation rows")->capture_default_str();
  blobs_cmd->add_option("--n-test", blobs.cfg.n_test, "Test rows")->capture_default_str();
  blobs_cmd->add_option("--scale", blobs.cfg.scale, "Per-coordinate stddev")->capture_default_str();

  Invocation inv = make_invocation(argc, argv);
  try {
    auto args = expand_config(app, argc, argv, inv);
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "hardshap: error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidInput& e) {
    std::cerr << "hardshap: error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "hardshap: error: " << e.what() << "\n";
    return 1;
  }

  try {
    set_thread_limit(threads);
    if (*value_cmd) return run_value(value, inv);
    if (*rank_cmd) return run_rank(rank, inv);
    if (*aug_cmd) return run_augment(aug, inv);
    if (*eval_cmd) return run_eval(ev, inv);
    if (*pipe_cmd) return run_pipeline(pipe, inv);
    if (*bench_cmd) return run_bench(bench, inv);
    if (*diq_cmd) return run_dataiq(diq, inv);
    if (*rem_cmd) return run_removal(rem, inv);
    if (*toy_cmd) return run_sim_toy(toy, inv);
    if (*blobs_cmd) return run_sim_blobs(blobs, inv);
  } catch (const InvalidInput& e) {
    std::cerr << "hardshap: error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "hardshap: error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
