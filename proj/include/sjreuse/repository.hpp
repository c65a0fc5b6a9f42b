#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sjreuse/embedding.hpp"
#include "sjreuse/histogram.hpp"
#include "sjreuse/quadtree.hpp"
#include "sjreuse/siamese.hpp"

namespace sjreuse {

struct RepositoryEntry {
  std::string dataset_id;
  DatasetEmbedding embedding;
  std::string partitioner_path;  // relative to the repository directory
  std::uint64_t created_at = 0;  // logical sequence number
};

struct Manifest {
  std::vector<RepositoryEntry> entries;
  std::string model_ref;   // relative checkpoint paths, empty before training
  std::string forest_ref;
  std::uint64_t generation = 0;
  std::uint64_t next_seq = 1;
  std::optional<GridSpec> histogram_grid;  // frozen at the first training
  nlohmann::ordered_json seeds = nlohmann::ordered_json::object();
};

nlohmann::ordered_json manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const nlohmann::json& j);

struct Match {
  double sim_max = 0.0;
  std::size_t entry = 0;  // index into entries()
  std::string dataset_id;
};

/// Directory-backed store of dataset embeddings and their partitioners:
/// manifest.json, partitioners/<id>.json, models/.
class Repository {
 public:
  /// Creates the layout when missing and loads the manifest if present.
  static Repository open(const std::filesystem::path& dir);

  const std::filesystem::path& dir() const { return dir_; }
  const Manifest& manifest() const { return manifest_; }
  const std::vector<RepositoryEntry>& entries() const { return manifest_.entries; }
  bool empty() const { return manifest_.entries.empty(); }
  std::size_t size() const { return manifest_.entries.size(); }
  const RepositoryEntry* find(const std::string& dataset_id) const;

  std::filesystem::path partitioner_file(const RepositoryEntry& e) const {
    return dir_ / e.partitioner_path;
  }
  std::filesystem::path models_dir() const { return dir_ / "models"; }
  std::filesystem::path decisions_log() const { return dir_ / "decisions.log"; }

  /// Writes the partitioner file, then appends the entry and rewrites the
  /// manifest atomically. Throws DuplicateId.
  const RepositoryEntry& add(const QuadtreePartitioner& p, const DatasetEmbedding& e);
  /// Appends an entry whose partitioner file already sits under the
  /// repository. Throws DuplicateId, NotFound.
  const RepositoryEntry& add(RepositoryEntry entry);

  /// Points the manifest at new checkpoints in one atomic rewrite.
  void swap_models(std::string model_ref, std::string forest_ref, std::uint64_t generation);
  void set_histogram_grid(const GridSpec& grid);
  void set_seeds(nlohmann::ordered_json seeds);
  void save() const;

  /// Highest 1 - d over both query sides and every entry, d being the clamped
  /// learned distance. Ties go to the smallest dataset id. Entries listed in
  /// `exclude` are skipped. Throws EmptyRepository when nothing is eligible.
  Match best_match(const DatasetEmbedding& r, const DatasetEmbedding& s, const SiameseModel& m,
                   const std::vector<std::string>& exclude = {}) const;

  /// Drops the cached entry features.
  void invalidate_features() const;

 private:
  std::filesystem::path dir_;
  Manifest manifest_;
  mutable std::vector<Features> features_;
  mutable std::uint64_t features_key_ = 0;
  mutable bool features_valid_ = false;
};

/// Exclusive per-repository lock held for the lifetime of one command.
class RepoLock {
 public:
  explicit RepoLock(const std::filesystem::path& repo_dir);
  ~RepoLock();
  RepoLock(const RepoLock&) = delete;
  RepoLock& operator=(const RepoLock&) = delete;

 private:
  std::filesystem::path file_;
};

}  // namespace sjreuse
