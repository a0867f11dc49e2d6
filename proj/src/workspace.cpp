/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "apr/workspace.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace apr {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr char kMagic[4] = {'A', 'P', 'R', 'V'};

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03lldZ", buf, static_cast<long long>(ms));
  return out;
}

void write_file(const fs::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary);
  if (!out.write(data.data(), static_cast<std::streamsize>(data.size()))) {
    throw Error(ErrorCode::kIo, "cannot write " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void append_line(const fs::path& path, const std::string& line) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw Error(ErrorCode::kIo, "cannot append to " + path.string());
  const std::string data = line + "\n";
  const auto n = ::write(fd, data.data(), data.size());
  ::close(fd);
  if (n != static_cast<ssize_t>(data.size())) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::vector<std::string> lines;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

json parse_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kWorkspace, path.string() + ": " + e.what());
  }
}

json trace_json(const QueryTrace& t) {
  json counts = json::object();
  for (Encoding e : kEncodings) counts[std::string(to_string(e))] = t.token_counts[static_cast<std::size_t>(e)];
  json actions = json::object();
  for (Channel c : kChannels) {
    actions[std::string(to_string(c))] = std::string(to_string(t.actions.actions[static_cast<std::size_t>(c)]));
  }
  return {{"v", 1},
          {"ts", timestamp()},
          {"query_id", t.query_id},
          {"timings_ms",
           {{"extract", t.timings.extract_ms},
            {"retrieve", t.timings.retrieve_ms},
            {"select", t.timings.select_ms},
            {"pack", t.timings.pack_ms},
            {"total", t.timings.total_ms}}},
          {"query_triples", t.query_triples},
          {"runs_scanned_coarse", t.runs_scanned_coarse},
          {"edges_touched_fine", t.edges_touched_fine},
          {"runs_retrieved", t.runs_retrieved},
          {"runs_selected", t.runs_selected},
          {"fallback", t.fallback},
          {"token_counts", counts},
          {"encoding", std::string(to_string(t.encoding))},
          {"prompt_tokens", t.prompt_tokens},
          {"tokenizer", t.tokenizer},
          {"actions", actions},
          {"action_source", t.action_source}};
}

double median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

fs::path snapshot_dir(const fs::path& root) {
  const fs::path current = root / "CURRENT";
  if (!fs::exists(current)) return {};
  std::string gen = read_file(current);
  while (!gen.empty() && std::isspace(static_cast<unsigned char>(gen.back()))) gen.pop_back();
  return root / "snapshots" / gen;
}

}  // namespace

// ---------------------------------------------------------------------------

void write_vectors(const fs::path& path, std::span<const Vector> rows, int dim) {
  std::string data(16 + rows.size() * static_cast<std::size_t>(std::max(dim, 0)) * sizeof(float), '\0');
  const std::uint32_t header[3] = {static_cast<std::uint32_t>(rows.size()), static_cast<std::uint32_t>(dim), 0};
  std::memcpy(data.data(), kMagic, 4);
  std::memcpy(data.data() + 4, header, sizeof header);
  char* p = data.data() + 16;
  for (const auto& row : rows) {
    if (row.size() != dim) throw Error(ErrorCode::kDimensionMismatch, "vector row has the wrong dimension");
    std::memcpy(p, row.data(), static_cast<std::size_t>(dim) * sizeof(float));
    p += static_cast<std::size_t>(dim) * sizeof(float);
  }
  write_file(path, data);
}

std::vector<Vector> read_vectors(const fs::path& path, int* dim_out) {
  const std::string data = read_file(path);
  if (data.size() < 16 || std::memcmp(data.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::kWorkspace, path.string() + " is not a vector table");
  }
  std::uint32_t header[3];
  std::memcpy(header, data.data() + 4, sizeof header);
  const std::size_t rows = header[0], dim = header[1];
  if (data.size() != 16 + rows * dim * sizeof(float)) throw Error(ErrorCode::kWorkspace, path.string() + " is truncated");
  std::vector<Vector> out(rows, Vector(static_cast<Eigen::Index>(dim)));
  for (std::size_t i = 0; i < rows; ++i) std::memcpy(out[i].data(), data.data() + 16 + i * dim * sizeof(float), dim * sizeof(float));
  if (dim_out) *dim_out = static_cast<int>(dim);
  return out;
}

EfficiencySummary report_efficiency(std::span<const std::string> trace_lines,
                                    std::span<const std::string> history_lines) {
  EfficiencySummary s;
  std::vector<double> tokens, latency;
  for (const auto& line : trace_lines) {
    const auto t = json::parse(line);
    tokens.push_back(t.at("prompt_tokens").get<double>());
    latency.push_back(t.at("timings_ms").at("total").get<double>());
    ++s.encodings[t.at("encoding").get<std::string>()];
  }
  s.queries = tokens.size();
  if (!tokens.empty()) {
    for (double v : tokens) s.mean_tokens += v;
    for (double v : latency) s.mean_latency_ms += v;
    s.mean_tokens /= static_cast<double>(tokens.size());
    s.mean_latency_ms /= static_cast<double>(latency.size());
    s.median_tokens = median(tokens);
    s.median_latency_ms = median(latency);
  }
  for (const auto& line : history_lines) {
    const auto h = json::parse(line);
    s.growth.push_back({h.at("ts").get<std::string>(), h.at("event").get<std::string>(),
                        h.at("entities").get<std::size_t>(), h.at("relations").get<std::size_t>(),
                        h.at("edges").get<std::size_t>()});
  }
  return s;
}

// ---------------------------------------------------------------------------

void Workspace::init(const fs::path& root, const WorkspaceConfig& config, bool force) {
  config.validate();
  const fs::path cfg = root / kConfigFile;
  if (fs::exists(cfg) && !force) throw Error(ErrorCode::kWorkspace, "workspace already exists at " + root.string());
  fs::create_directories(root / "consolidations");
  fs::create_directories(root / "snapshots");
  config.save(cfg);
  Workspace ws(root, LockMode::kExclusive);
  if (force) {
    fs::remove(root / "CURRENT");
    fs::remove_all(root / "snapshots");
    fs::create_directories(root / "snapshots");
  }
  ws.save();
  ws.append_history("init");
}

Workspace Workspace::open(const fs::path& root, LockMode mode) {
  if (!fs::exists(root / kConfigFile)) throw Error(ErrorCode::kWorkspace, "no workspace at " + root.string());
  Workspace ws(root, mode);
  ws.load_state();
  return ws;
}

Workspace::Workspace(fs::path root, LockMode mode) : root_(std::move(root)), mode_(mode) {
  // Writers hold an exclusive flock; readers work on the published snapshot
  // and take no lock.
  if (mode_ == LockMode::kExclusive) {
    lock_fd_ = ::open((root_ / ".apr.lock").c_str(), O_RDWR | O_CREAT, 0644);
    if (lock_fd_ < 0) throw Error(ErrorCode::kWorkspace, "cannot open lock file");
    if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(lock_fd_);
      lock_fd_ = -1;
      throw Error(ErrorCode::kWorkspace, "workspace is locked by another writer");
    }
  }
  auto config = WorkspaceConfig::load(root_ / kConfigFile, root_);
  config.validate();
  std::shared_ptr<const EmbeddingProvider> provider = make_provider(config.provider);
  auto extractor = make_extractor(config);
  std::optional<Policy> policy;
  if (!config.policy_path.empty()) policy = Policy::load(config.policy_path);
  pipeline_ = std::make_unique<Pipeline>(std::move(config), std::move(provider), std::move(extractor));
  pipeline_->set_policy(std::move(policy));
}

Workspace::Workspace(Workspace&& o) noexcept
    : root_(std::move(o.root_)), mode_(o.mode_), lock_fd_(std::exchange(o.lock_fd_, -1)),
      pipeline_(std::move(o.pipeline_)) {}

Workspace& Workspace::operator=(Workspace&& o) noexcept {
  if (this != &o) {
    if (lock_fd_ >= 0) ::close(lock_fd_);
    root_ = std::move(o.root_);
    mode_ = o.mode_;
    lock_fd_ = std::exchange(o.lock_fd_, -1);
    pipeline_ = std::move(o.pipeline_);
  }
  return *this;
}

Workspace::~Workspace() {
  if (lock_fd_ >= 0) ::close(lock_fd_);
}

void Workspace::require_writer() const {
  if (mode_ != LockMode::kExclusive) throw Error(ErrorCode::kWorkspace, "operation needs the writer lock");
}

void Workspace::append_history(std::string_view event) const {
  const auto& cb = pipeline_->codebook();
  const json h = {{"v", 1},
                  {"ts", timestamp()},
                  {"event", std::string(event)},
                  {"entities", cb.entity_count()},
                  {"relations", cb.relation_count()},
                  {"edges", cb.edge_count()},
                  {"runs", pipeline_->runs().size()}};
  append_line(root_ / "history.jsonl", h.dump());
}

void Workspace::save() {
  require_writer();
  const Codebook& cb = pipeline_->codebook();
  const RunStore& runs = pipeline_->runs();

  std::uint64_t gen = 0;
  if (const auto dir = snapshot_dir(root_); !dir.empty()) gen = std::stoull(dir.filename().string()) + 1;
  const fs::path dir = root_ / "snapshots" / std::to_string(gen);
  fs::remove_all(dir);
  fs::create_directories(dir / "runs");

  json edges = json::array();
  for (const Edge& e : cb.edges()) edges.push_back({e.head.value, e.relation.value, e.tail.value});
  json stores = json::object();
  for (Channel c : kChannels) {
    json list = json::array();
    for (const auto& seq : cb.store(c)) {
      json ids = json::array();
      for (EdgeId id : seq.edges) ids.push_back(id.value);
      list.push_back({{"span", seq.span}, {"edges", ids}});
    }
    stores[std::string(to_string(c))] = list;
  }
  const int dim = pipeline_->provider().dimension();
  const json codebook = {{"v", 1},
                         {"dimension", dim},
                         {"entities", std::vector<std::string>(cb.entities().begin(), cb.entities().end())},
                         {"relations", std::vector<std::string>(cb.relations().begin(), cb.relations().end())},
                         {"edges", edges},
                         {"stores", stores}};
  write_file(dir / "codebook.json", codebook.dump());
  std::vector<Vector> vecs(cb.entity_vectors().begin(), cb.entity_vectors().end());
  vecs.insert(vecs.end(), cb.relation_vectors().begin(), cb.relation_vectors().end());
  write_vectors(dir / "vectors.bin", vecs, dim);

  json run_list = json::array();
  std::vector<Vector> centroids;
  for (Channel c : kChannels) {
    for (const Run& r : runs.channel(c)) {
      json ids = json::array();
      for (EdgeId id : r.edges) ids.push_back(id.value);
      run_list.push_back({{"id", r.id.value}, {"channel", std::string(to_string(c))}, {"edges", ids},
                          {"cohesion", r.cohesion}});
      centroids.push_back(r.centroid);
    }
  }
  write_file(dir / "runs.json", json{{"v", 1}, {"runs", run_list}}.dump());
  write_vectors(dir / "runs" / "vectors.bin", centroids, dim);

  json groups = json::array();
  for (const auto& g : pipeline_->alias_groups()) {
    json members = json::array();
    for (EntityId e : g.members) members.push_back(cb.entity(e));
    groups.push_back({{"members", members}, {"provisional", g.provisional}});
  }
  write_file(dir / "aliases.json", json{{"v", 1}, {"groups", groups}}.dump(2));

  // Publish atomically, then drop generations older than the previous one.
  write_file(root_ / "CURRENT.tmp", std::to_string(gen) + "\n");
  fs::rename(root_ / "CURRENT.tmp", root_ / "CURRENT");
  for (const auto& entry : fs::directory_iterator(root_ / "snapshots")) {
    const auto name = entry.path().filename().string();
    if (name.find_first_not_of("0123456789") == std::string::npos && std::stoull(name) + 1 < gen) {
      fs::remove_all(entry.path());
    }
  }
}

void Workspace::load_state() {
  const fs::path dir = snapshot_dir(root_);
  if (dir.empty()) return;
  const json doc = parse_json(dir / "codebook.json");
  int dim = 0;
  auto vecs = read_vectors(dir / "vectors.bin", &dim);
  if (dim != pipeline_->provider().dimension()) {
    throw Error(ErrorCode::kDimensionMismatch, "workspace vectors have dimension " + std::to_string(dim) +
                                                   ", provider has " +
                                                   std::to_string(pipeline_->provider().dimension()));
  }
  try {
    auto entities = doc.at("entities").get<std::vector<std::string>>();
    auto relations = doc.at("relations").get<std::vector<std::string>>();
    if (vecs.size() != entities.size() + relations.size()) throw Error(ErrorCode::kWorkspace, "vector count mismatch");
    std::vector<Vector> evecs(vecs.begin(), vecs.begin() + static_cast<std::ptrdiff_t>(entities.size()));
    std::vector<Vector> rvecs(vecs.begin() + static_cast<std::ptrdiff_t>(entities.size()), vecs.end());
    std::vector<Edge> edges;
    for (const auto& e : doc.at("edges")) {
      edges.push_back({EntityId(e.at(0).get<std::uint32_t>()), RelationId(e.at(1).get<std::uint32_t>()),
                       EntityId(e.at(2).get<std::uint32_t>())});
    }
    std::array<std::vector<EdgeSequence>, 3> stores;
    for (Channel c : kChannels) {
      for (const auto& s : doc.at("stores").at(std::string(to_string(c)))) {
        EdgeSequence seq{c, {}, s.at("span").get<std::string>()};
        for (const auto& id : s.at("edges")) seq.edges.push_back(EdgeId(id.get<std::uint32_t>()));
        stores[static_cast<std::size_t>(c)].push_back(std::move(seq));
      }
    }
    auto cb = Codebook::restore(std::move(entities), std::move(relations), std::move(edges), std::move(stores),
                                std::move(evecs), std::move(rvecs), nullptr);

    const json rdoc = parse_json(dir / "runs.json");
    auto centroids = read_vectors(dir / "runs" / "vectors.bin");
    const auto& list = rdoc.at("runs");
    if (centroids.size() != list.size()) throw Error(ErrorCode::kWorkspace, "run centroid count mismatch");
    std::vector<Run> runs;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto& r = list[i];
      const auto channel = parse_channel(r.at("channel").get<std::string>());
      if (!channel) throw Error(ErrorCode::kWorkspace, "bad run channel");
      Run run{RunId(r.at("id").get<std::uint32_t>()), *channel, {}, std::move(centroids[i]), r.at("cohesion").get<float>()};
      for (const auto& id : r.at("edges")) {
        const auto v = id.get<std::uint32_t>();
        if (v >= cb.edge_count()) throw Error(ErrorCode::kDanglingId, "run references a missing edge");
        run.edges.push_back(EdgeId(v));
      }
      runs.push_back(std::move(run));
    }
    RunStore store;
    store.restore(std::move(runs));
    pipeline_->restore(std::move(cb), std::move(store));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kWorkspace, "corrupt snapshot in " + dir.string() + ": " + e.what());
  }
}

IngestReport Workspace::ingest(std::span<const fs::path> files, Channel channel) {
  require_writer();
  IngestReport total;
  for (const auto& file : files) total += pipeline_->ingest_text(read_file(file), channel, file.string());
  save();
  append_history("ingest");
  if (should_consolidate(pipeline_->codebook().stats(), bytes(), pipeline_->config().budget)) {
    consolidate(true);
    ++total.consolidations;
  }
  return total;
}

QueryAnswer Workspace::query(std::string_view text, const QueryOptions& options) {
  if (options.record) require_writer();
  auto answer = pipeline_->answer_query(text, options);
  append_line(root_ / "traces.jsonl", trace_json(answer.trace).dump());
  if (options.record) save();
  return answer;
}

ConsolidationReport Workspace::consolidate(bool force) {
  require_writer();
  const auto& budget = pipeline_->config().budget;
  if (!force && !should_consolidate(pipeline_->codebook().stats(), bytes(), budget)) return {};
  auto report = pipeline_->consolidate();
  save();
  append_history("consolidate");

  json aliases = json::object();
  for (const auto& [member, rep] : report.aliases) aliases[member] = rep;
  const json doc = {{"v", 1},
                    {"ts", timestamp()},
                    {"entities_before", report.entities_before},
                    {"entities_after", report.entities_after},
                    {"edges_before", report.edges_before},
                    {"edges_after", report.edges_after},
                    {"store_length_before", report.store_length_before},
                    {"store_length_after", report.store_length_after},
                    {"alias_map", aliases}};
  fs::create_directories(root_ / "consolidations");
  write_file(root_ / "consolidations" / (timestamp() + ".json"), doc.dump(2));
  return report;
}

std::uint64_t Workspace::bytes() const {
  std::uint64_t total = 0;
  const fs::path dir = snapshot_dir(root_);
  if (dir.empty()) return 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) total += entry.file_size();
  }
  return total;
}

EfficiencySummary Workspace::report() const {
  const auto traces = read_lines(root_ / "traces.jsonl");
  const auto history = read_lines(root_ / "history.jsonl");
  return report_efficiency(traces, history);
}

}  // namespace apr
