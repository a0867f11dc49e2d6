/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

// apr: command-line front end for a retrieval workspace.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "apr/workspace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitWorkspace = 3;
constexpr int kExitRemote = 4;

json terms_json(const apr::FineTerms& t) {
  return {{"rel_top_t", t.rel_top_t},       {"coverage_raw", t.coverage_raw}, {"coverage", t.coverage},
          {"many_to_many", t.many_to_many}, {"distinct", t.distinct},         {"whole_gate", t.whole_gate}};
}

json counts_json(const std::array<std::size_t, 3>& counts) {
  json out = json::object();
  for (auto e : apr::kEncodings) out[std::string(apr::to_string(e))] = counts[static_cast<std::size_t>(e)];
  return out;
}

json triples_json(const apr::PromptPayload& p) {
  json out = json::object();
  for (auto c : apr::kChannels) {
    json list = json::array();
    for (const auto& t : p.decode(c)) list.push_back({t.head, t.relation, t.tail});
    out[std::string(apr::to_string(c))] = list;
  }
  return out;
}

json answer_json(const apr::QueryAnswer& a, bool explain) {
  const auto& t = a.trace;
  json ranked = json::array();
  for (const auto& r : a.retrieval.ranked) {
    json item = {{"run", r.run.value},
                 {"channel", std::string(apr::to_string(r.channel))},
                 {"coarse", r.coarse},
                 {"fine", r.fine}};
    if (explain && !a.retrieval.fallback) item["terms"] = terms_json(r.terms);
    ranked.push_back(item);
  }
  json out = {{"v", 1},
              {"query_id", t.query_id},
              {"ranked", ranked},
              {"counters",
               {{"runs_scanned_coarse", t.runs_scanned_coarse},
                {"edges_touched_fine", t.edges_touched_fine},
                {"shortlist_bound", a.retrieval.shortlist_bound},
                {"longest_shortlisted", a.retrieval.longest_shortlisted}}},
              {"fallback", t.fallback},
              {"actions", t.actions.to_string()},
              {"action_source", t.action_source},
              {"encoding", std::string(apr::to_string(t.encoding))},
              {"prompt_tokens", t.prompt_tokens},
              {"token_counts", counts_json(t.token_counts)},
              {"prompt", a.packed.text}};
  if (explain) {
    const auto& x = a.features;
    out["features"] = {{"query_tokens", x.query_tokens}, {"triples", x.triples},     {"ambiguity", x.ambiguity},
                       {"budget", x.budget},             {"redundancy", x.redundancy}, {"model", x.model}};
    out["payload"] = triples_json(a.payload);
    out["timings_ms"] = {{"extract", t.timings.extract_ms}, {"retrieve", t.timings.retrieve_ms},
                         {"select", t.timings.select_ms},   {"pack", t.timings.pack_ms},
                         {"total", t.timings.total_ms}};
  }
  return out;
}

apr::Channel channel_arg(const std::string& s) {
  const auto c = apr::parse_channel(s);
  if (!c) throw CLI::ValidationError("--channel", "expected question, answer or fact");
  return *c;
}

std::optional<apr::SelectorConfig> selection_arg(const std::string& spec, const apr::WorkspaceConfig& config) {
  if (spec.empty()) return std::nullopt;
  return apr::parse_selection(spec, config.selector);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symbolic retrieval workspace: ingest text, answer queries with compact prompts"};
  app.require_subcommand(1);
  std::string root = ".";
  app.add_option("-w,--workspace", root, "Workspace directory");

  // init
  auto* init = app.add_subcommand("init", "Create a workspace");
  bool init_force = false;
  std::string provider = "hashing", fixture;
  int dimension = 64;
  std::uint64_t seed = 7;
  init->add_flag("--force", init_force, "Overwrite an existing workspace");
  init->add_option("--provider", provider, "Embedding provider")->check(CLI::IsMember({"hashing", "fixture", "remote"}));
  init->add_option("--fixture", fixture, "Fixture embedding table (JSON)");
  init->add_option("--dim", dimension, "Embedding dimension")->check(CLI::PositiveNumber);
  init->add_option("--seed", seed, "Workspace seed");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Ingest text files into a channel");
  std::vector<std::string> files;
  std::string channel = "fact";
  ingest->add_option("files", files, "Input files")->required()->check(CLI::ExistingFile);
  ingest->add_option("--channel", channel, "question, answer or fact");

  // query
  auto* query = app.add_subcommand("query", "Retrieve and pack a prompt for a question");
  std::string text, select;
  std::size_t top_m = 0;
  bool explain = false, record = false;
  query->add_option("--text", text, "Question text")->required();
  query->add_option("--top-m", top_m, "Number of runs to keep");
  query->add_option("--select", select, "Per-channel override, e.g. question=unique,fact=include_all");
  query->add_flag("--explain", explain, "Include term breakdowns and features");
  query->add_flag("--record", record, "Store the question for later reuse");

  // pack
  auto* packc = app.add_subcommand("pack", "Print the packed prompt for a question");
  bool report_counts = false;
  std::string pack_query, pack_select;
  packc->add_option("--query", pack_query, "Question text")->required();
  packc->add_option("--select", pack_select, "Per-channel override");
  packc->add_flag("--report", report_counts, "Print a JSON report with all three token counts");

  // consolidate
  auto* consolidate = app.add_subcommand("consolidate", "Merge entity aliases");
  bool cons_force = false;
  consolidate->add_flag("--force", cons_force, "Run even when under budget");

  auto* stats = app.add_subcommand("stats", "Codebook and run statistics");
  auto* report = app.add_subcommand("report", "Token and latency summary over recorded queries");

  // policy
  auto* policy = app.add_subcommand("policy", "Selector policy");
  policy->require_subcommand(1);
  auto* train = policy->add_subcommand("train", "Train the policy from an eval log");
  auto* eval = policy->add_subcommand("eval", "Compare policy choices with an eval log");
  std::string log_path;
  std::size_t epochs = 300;
  double lr = 1.0, beta_dpo = 0.5, eta = 0.0;
  train->add_option("--log", log_path, "Eval CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--epochs", epochs, "Training epochs");
  train->add_option("--lr", lr, "Learning rate");
  train->add_option("--beta-dpo", beta_dpo, "DPO temperature");
  train->add_option("--eta", eta, "Token penalty");
  eval->add_option("--log", log_path, "Eval CSV")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*init) {
      apr::WorkspaceConfig config;
      config.seed = seed;
      config.provider.seed = seed;
      config.budget.seed = seed;
      config.provider.dimension = dimension;
      if (provider == "fixture") {
        config.provider.kind = apr::ProviderKind::kFixture;
        config.provider.fixture_path = fs::absolute(fixture);
      } else if (provider == "remote") {
        config.provider.kind = apr::ProviderKind::kRemote;
      }
      apr::Workspace::init(root, config, init_force);
      std::cout << json{{"v", 1}, {"workspace", fs::absolute(root).string()}}.dump() << '\n';
    } else if (*ingest) {
      auto ws = apr::Workspace::open(root, apr::LockMode::kExclusive);
      const std::vector<fs::path> paths(files.begin(), files.end());
      const auto r = ws.ingest(paths, channel_arg(channel));
      std::cout << json{{"v", 1},
                        {"spans", r.spans},
                        {"triples", r.triples},
                        {"new_entities", r.new_entities},
                        {"new_relations", r.new_relations},
                        {"new_edges", r.new_edges},
                        {"runs_created", r.runs_created},
                        {"consolidations", r.consolidations}}
                       .dump()
                << '\n';
    } else if (*query || *packc) {
      auto ws = apr::Workspace::open(root, record ? apr::LockMode::kExclusive : apr::LockMode::kShared);
      apr::QueryOptions options;
      options.record = record;
      if (top_m) options.top_m = top_m;
      options.selection = selection_arg(*query ? select : pack_select, ws.pipeline().config());
      const auto answer = ws.query(*query ? text : pack_query, options);
      if (*query) {
        std::cout << answer_json(answer, explain).dump(2) << '\n';
      } else if (report_counts) {
        std::cout << json{{"v", 1},
                          {"encoding", std::string(apr::to_string(answer.packed.encoding))},
                          {"tokenizer", answer.packed.tokenizer},
                          {"token_counts", counts_json(answer.packed.counts)}}
                         .dump(2)
                  << '\n';
      } else {
        std::cout << answer.packed.text << '\n';
      }
    } else if (*consolidate) {
      auto ws = apr::Workspace::open(root, apr::LockMode::kExclusive);
      const auto r = ws.consolidate(cons_force);
      std::cout << json{{"v", 1},
                        {"entities_before", r.entities_before},
                        {"entities_after", r.entities_after},
                        {"edges_before", r.edges_before},
                        {"edges_after", r.edges_after},
                        {"merged", r.aliases.size()}}
                       .dump()
                << '\n';
    } else if (*stats) {
      auto ws = apr::Workspace::open(root, apr::LockMode::kShared);
      const auto s = ws.pipeline().codebook().stats();
      json channels = json::object();
      for (auto c : apr::kChannels) {
        const auto& cs = s.channels[static_cast<std::size_t>(c)];
        channels[std::string(apr::to_string(c))] = {{"sequences", cs.sequences},
                                                    {"occurrences", cs.occurrences},
                                                    {"runs", ws.pipeline().runs().channel(c).size()}};
      }
      std::cout << json{{"v", 1},
                        {"entities", s.entities},
                        {"relations", s.relations},
                        {"edges", s.edges},
                        {"occurrences", s.occurrences},
                        {"compression_ratio", s.compression_ratio},
                        {"runs", ws.pipeline().runs().size()},
                        {"channels", channels},
                        {"bytes", ws.bytes()}}
                       .dump(2)
                << '\n';
    } else if (*report) {
      auto ws = apr::Workspace::open(root, apr::LockMode::kShared);
      const auto s = ws.report();
      json growth = json::array();
      for (const auto& g : s.growth) {
        growth.push_back({{"ts", g.ts}, {"event", g.event}, {"entities", g.entities}, {"relations", g.relations},
                          {"edges", g.edges}});
      }
      std::cout << json{{"v", 1},
                        {"queries", s.queries},
                        {"mean_tokens", s.mean_tokens},
                        {"median_tokens", s.median_tokens},
                        {"mean_latency_ms", s.mean_latency_ms},
                        {"median_latency_ms", s.median_latency_ms},
                        {"encodings", s.encodings},
                        {"growth", growth}}
                       .dump(2)
                << '\n';
    } else if (*train) {
      auto ws = apr::Workspace::open(root, apr::LockMode::kExclusive);
      const auto records = apr::read_eval_csv(fs::path(log_path));
      std::set<std::string> models;
      for (const auto& r : records) models.insert(r.features.model);
      apr::Policy p(std::vector<std::string>(models.begin(), models.end()));
      p.beta_dpo = beta_dpo;
      p.eta = eta;
      p.calibrate_costs(records);
      const auto pairs = apr::build_preference_pairs(records, {});
      apr::TrainOptions opts;
      opts.epochs = epochs;
      opts.learning_rate = lr;
      opts.seed = ws.pipeline().config().seed;
      const auto r = apr::train(p, pairs, opts);
      const fs::path out = fs::path(root) / "policy.json";
      p.save(out);
      auto config = ws.pipeline().config();
      config.policy_path = fs::absolute(out);
      config.save(fs::path(root) / apr::Workspace::kConfigFile);
      std::cout << json{{"v", 1},
                        {"records", records.size()},
                        {"pairs", pairs.size()},
                        {"loss_start", r.losses.empty() ? 0.0 : r.losses.front()},
                        {"loss_end", r.losses.empty() ? 0.0 : r.losses.back()},
                        {"halvings", r.halvings},
                        {"policy", out.string()}}
                       .dump()
                << '\n';
    } else if (*eval) {
      auto ws = apr::Workspace::open(root, apr::LockMode::kShared);
      const auto& policy_opt = ws.pipeline().policy();
      if (!policy_opt) throw apr::Error(apr::ErrorCode::kConfig, "no trained policy; run 'apr policy train' first");
      const auto records = apr::read_eval_csv(fs::path(log_path));
      std::map<std::string, std::vector<const apr::EvalRecord*>> groups;
      for (const auto& r : records) groups[r.query_id].push_back(&r);
      std::size_t agree = 0, covered = 0;
      double chosen_utility = 0;
      for (const auto& [id, g] : groups) {
        const auto best = *std::max_element(g.begin(), g.end(), [](auto* a, auto* b) {
          return apr::utility(*a, {}) < apr::utility(*b, {});
        });
        const auto pick = policy_opt->select_action(g.front()->features);
        agree += pick == best->action;
        for (const auto* r : g) {
          if (r->action == pick) {
            chosen_utility += apr::utility(*r, {});
            ++covered;
            break;
          }
        }
      }
      std::cout << json{{"v", 1},
                        {"queries", groups.size()},
                        {"argmax_agreement", groups.empty() ? 0.0 : double(agree) / double(groups.size())},
                        {"mean_chosen_utility", covered ? chosen_utility / double(covered) : 0.0},
                        {"chosen_in_log", covered}}
                       .dump()
                << '\n';
    }
  } catch (const CLI::ParseError& e) {
    std::cerr << "apr: " << e.what() << '\n';
    return kExitUsage;
  } catch (const apr::Error& e) {
    std::cerr << "apr: " << e.what() << '\n';
    switch (e.code()) {
      case apr::ErrorCode::kRemoteUnavailable: return kExitRemote;
      case apr::ErrorCode::kInvalidArgument:
      case apr::ErrorCode::kInvalidParams: return kExitUsage;
      default: return kExitWorkspace;
    }
  } catch (const std::exception& e) {
    std::cerr << "apr: " << e.what() << '\n';
    return kExitWorkspace;
  }
  return 0;
}
