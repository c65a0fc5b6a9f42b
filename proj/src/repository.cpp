#include "sjreuse/repository.hpp"

#include <cstdio>
#include <cstring>
#include <unistd.h>

#include <algorithm>

#include "json_util.hpp"
#include "sjreuse/error.hpp"

namespace sjreuse {

namespace {

constexpr const char* kManifestFormat = "sjreuse.repository.v1";

std::uint64_t model_key(const SiameseModel& m) {
  const auto p = m.params();
  std::string_view bytes(reinterpret_cast<const char*>(p.data()), p.size() * sizeof(double));
  return json_util::fnv1a(bytes) ^ std::hash<double>{}(m.coord_scale());
}

}  // namespace

nlohmann::ordered_json manifest_to_json(const Manifest& m) {
  nlohmann::ordered_json j;
  j["format"] = kManifestFormat;
  j["generation"] = m.generation;
  j["next_seq"] = m.next_seq;
  j["model_ref"] = m.model_ref;
  j["forest_ref"] = m.forest_ref;
  if (m.histogram_grid) {
    j["histogram_grid"] = {{"domain", json_util::rect(m.histogram_grid->domain)},
                           {"resolution", m.histogram_grid->resolution}};
  } else {
    j["histogram_grid"] = nullptr;
  }
  j["seeds"] = m.seeds;
  auto entries = nlohmann::ordered_json::array();
  for (const auto& e : m.entries) {
    nlohmann::ordered_json je;
    je["dataset_id"] = e.dataset_id;
    je["embedding"] = e.embedding.v;
    je["partitioner_path"] = e.partitioner_path;
    je["created_at"] = e.created_at;
    entries.push_back(std::move(je));
  }
  j["entries"] = std::move(entries);
  return j;
}

Manifest manifest_from_json(const nlohmann::json& j) {
  if (json_util::get<std::string>(j, "format") != kManifestFormat) {
    throw Error(ErrorCode::kFormat, "unknown manifest format");
  }
  Manifest m;
  m.generation = json_util::get<std::uint64_t>(j, "generation");
  m.next_seq = json_util::get<std::uint64_t>(j, "next_seq");
  m.model_ref = json_util::get<std::string>(j, "model_ref");
  m.forest_ref = json_util::get<std::string>(j, "forest_ref");
  const auto& grid = json_util::field(j, "histogram_grid");
  if (!grid.is_null()) {
    m.histogram_grid = GridSpec{json_util::to_rect(json_util::field(grid, "domain"), "domain"),
                                json_util::get<int>(grid, "resolution")};
  }
  if (j.contains("seeds")) m.seeds = j.at("seeds");
  for (const auto& je : json_util::field(j, "entries")) {
    RepositoryEntry e;
    e.dataset_id = json_util::get<std::string>(je, "dataset_id");
    const auto& v = json_util::field(je, "embedding");
    if (!v.is_array() || v.size() != kEmbeddingDim) {
      throw Error(ErrorCode::kFormat, "entry '" + e.dataset_id + "' embedding is not 9-dimensional");
    }
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) e.embedding.v[i] = json_util::number(v[i], "embedding");
    e.embedding.source_id = e.dataset_id;
    e.partitioner_path = json_util::get<std::string>(je, "partitioner_path");
    e.created_at = json_util::get<std::uint64_t>(je, "created_at");
    m.entries.push_back(std::move(e));
  }
  return m;
}

Repository Repository::open(const std::filesystem::path& dir) {
  Repository r;
  r.dir_ = std::filesystem::absolute(dir);
  std::filesystem::create_directories(r.dir_ / "partitioners");
  std::filesystem::create_directories(r.dir_ / "models");
  const auto file = r.dir_ / "manifest.json";
  if (std::filesystem::exists(file)) r.manifest_ = manifest_from_json(json_util::parse_file(file));
  return r;
}

const RepositoryEntry* Repository::find(const std::string& dataset_id) const {
  for (const auto& e : manifest_.entries) {
    if (e.dataset_id == dataset_id) return &e;
  }
  return nullptr;
}

const RepositoryEntry& Repository::add(const QuadtreePartitioner& p, const DatasetEmbedding& e) {
  if (e.source_id.empty()) throw Error(ErrorCode::kInvalidArgument, "embedding without a dataset id");
  if (find(e.source_id)) throw Error(ErrorCode::kDuplicateId, "dataset '" + e.source_id + "' already stored");
  const std::string rel = "partitioners/" + e.source_id + ".json";
  p.save(dir_ / rel);
  return add(RepositoryEntry{e.source_id, e, rel, 0});
}

const RepositoryEntry& Repository::add(RepositoryEntry entry) {
  if (find(entry.dataset_id)) {
    throw Error(ErrorCode::kDuplicateId, "dataset '" + entry.dataset_id + "' already stored");
  }
  if (!std::filesystem::exists(dir_ / entry.partitioner_path)) {
    throw Error(ErrorCode::kNotFound, "partitioner " + entry.partitioner_path + " is missing");
  }
  entry.embedding.source_id = entry.dataset_id;
  entry.created_at = manifest_.next_seq++;
  manifest_.entries.push_back(std::move(entry));
  try {
    save();
  } catch (...) {
    manifest_.entries.pop_back();
    --manifest_.next_seq;
    throw;
  }
  features_valid_ = false;
  return manifest_.entries.back();
}

void Repository::swap_models(std::string model_ref, std::string forest_ref,
                             std::uint64_t generation) {
  Manifest next = manifest_;
  next.model_ref = std::move(model_ref);
  next.forest_ref = std::move(forest_ref);
  next.generation = generation;
  json_util::write_atomic(dir_ / "manifest.json", manifest_to_json(next).dump(1) + "\n");
  manifest_ = std::move(next);
  invalidate_features();
}

void Repository::set_histogram_grid(const GridSpec& grid) { manifest_.histogram_grid = grid; }
void Repository::set_seeds(nlohmann::ordered_json seeds) { manifest_.seeds = std::move(seeds); }

void Repository::save() const {
  json_util::write_atomic(dir_ / "manifest.json", manifest_to_json(manifest_).dump(1) + "\n");
}

void Repository::invalidate_features() const {
  features_valid_ = false;
  features_.clear();
}

Match Repository::best_match(const DatasetEmbedding& r, const DatasetEmbedding& s,
                             const SiameseModel& m, const std::vector<std::string>& exclude) const {
  const std::uint64_t key = model_key(m);
  if (!features_valid_ || features_key_ != key || features_.size() != manifest_.entries.size()) {
    features_.resize(manifest_.entries.size());
    for (std::size_t i = 0; i < features_.size(); ++i) {
      features_[i] = m.forward(manifest_.entries[i].embedding);
    }
    features_key_ = key;
    features_valid_ = true;
  }
  const Features fr = m.forward(r);
  const Features fs = m.forward(s);
  bool found = false;
  Match best;
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const std::string& id = manifest_.entries[i].dataset_id;
    if (std::find(exclude.begin(), exclude.end(), id) != exclude.end()) continue;
    const double d = std::min(clamp_distance(feature_distance(fr, features_[i])),
                              clamp_distance(feature_distance(fs, features_[i])));
    const double sim = 1.0 - d;
    if (!found || sim > best.sim_max || (sim == best.sim_max && id < best.dataset_id)) {
      best = {sim, i, id};
      found = true;
    }
  }
  if (!found) throw Error(ErrorCode::kEmptyRepository, "no repository entry to match against");
  return best;
}

RepoLock::RepoLock(const std::filesystem::path& repo_dir) : file_(repo_dir / "lock") {
  std::filesystem::create_directories(repo_dir);
  std::FILE* f = std::fopen(file_.c_str(), "wx");
  if (!f) {
    throw Error(ErrorCode::kLocked, "repository " + repo_dir.string() +
                                        " is locked by another command (remove " + file_.string() +
                                        " if stale)");
  }
  std::fprintf(f, "%ld\n", static_cast<long>(::getpid()));
  std::fclose(f);
}

RepoLock::~RepoLock() {
  std::error_code ec;
  std::filesystem::remove(file_, ec);
}

}  // namespace sjreuse
