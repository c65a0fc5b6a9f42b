#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sjreuse/config.hpp"
#include "sjreuse/dataset.hpp"
#include "sjreuse/forest.hpp"
#include "sjreuse/join.hpp"
#include "sjreuse/repository.hpp"
#include "sjreuse/siamese.hpp"

namespace sjreuse {

/// What `Engine::generate` writes: a uniform box, a Gaussian blob clipped to
/// `region`, or a histogram enlargement of an ingested dataset.
struct GenSpec {
  std::string kind;  // uniform | gaussian | enlarge
  std::string id;
  std::size_t n = 0;
  Rect region;
  Point center;
  double sigma = 0.0;
  std::string source;  // enlarge only
  int resolution = 64;
  std::uint64_t seed = 0;

  static GenSpec from_json(const nlohmann::json& j);
};

/// One online call as recorded in decisions.log.
struct Trace {
  std::uint64_t seq = 0;
  std::string left;
  std::string right;
  double theta = 0.0;
  bool forced = false;
  std::optional<double> sim_max;
  std::optional<std::string> matched_id;
  Decision decision = Decision::kRepartition;
  std::string reason;  // why the repartition path ran without a forest vote
  double reuse_votes = 0.0;
  bool reused = false;
  std::string fallback_error;
  bool added_to_repository = false;
  double lookup_seconds = 0.0;
  double decision_seconds = 0.0;
  JoinStats stats;

  /// Deterministic fields, plus wall-clock timings under "seconds" when asked.
  nlohmann::ordered_json to_json(bool with_timings) const;
};

struct OnlineResult {
  std::vector<PairIndex> pairs;
  Trace trace;
};

/// Order statistics with linear interpolation between ranks.
struct Percentiles {
  std::size_t count = 0;
  double min = 0.0;
  double p25 = 0.0;
  double p50 = 0.0;
  double p75 = 0.0;
  double max = 0.0;
};
Percentiles percentiles(std::vector<double> values);
nlohmann::ordered_json percentiles_to_json(const Percentiles& p);

/// Offline training, online joins, benchmarking and retraining over one
/// repository and data directory. Each command holds the repository lock.
class Engine {
 public:
  explicit Engine(EngineConfig cfg);

  const EngineConfig& config() const { return cfg_; }
  EngineConfig& mutable_config() { return cfg_; }

  /// Single pass over the CSV; writes <data_dir>/<id>.meta.json.
  Dataset ingest(const std::string& id, const std::filesystem::path& csv);
  /// Writes <data_dir>/<id>.csv and ingests it.
  Dataset generate(const GenSpec& spec);
  Dataset dataset(const std::string& id) const;
  std::vector<std::string> catalog() const;

  /// Trains the similarity model on every pair of `datasets`, stores a
  /// partitioner for each join's left side, labels each join by reusing
  /// the best stored match against building fresh, and fits the forest.
  /// Empty `joins` pairs the datasets into a seeded cycle.
  nlohmann::ordered_json offline(std::vector<std::string> datasets, std::vector<JoinPair> joins);

  /// Looks up the best stored partitioner, asks the forest, then joins.
  /// Reuse errors fall back to repartitioning. A repartitioned left dataset
  /// not yet stored is added. Every call appends one trace line.
  OnlineResult join(const std::string& left, const std::string& right, double theta,
                    bool force_repartition = false);

  /// Each join under forced repartition and online; writes bench.json
  /// (deterministic) and bench_timings.json (wall clock) into out_dir.
  nlohmann::ordered_json bench(const std::vector<JoinPair>& joins, double theta,
                               const std::filesystem::path& out_dir);

  /// Retrains both models over the training datasets and every stored
  /// dataset, then swaps the checkpoints atomically.
  nlohmann::ordered_json retrain();

  /// best_match plus the forest vote, no join. For overhead measurements.
  Trace lookup(const std::string& left, const std::string& right);

 private:
  struct Models {
    std::uint64_t generation = 0;
    SiameseModel model;
    DecisionForest forest;
  };

  Repository& repo();
  const Models* models();
  PartitionerSpec partitioner_spec(const std::string& id) const;
  DatasetEmbedding embedding(const Dataset& d) const;
  GridSpec resolve_grid(const std::vector<Dataset>& datasets) const;
  OnlineResult join_locked(const std::string& left, const std::string& right, double theta,
                           bool force);
  std::vector<DecisionSample> collect_labels(const std::vector<JoinPair>& joins,
                                             const SiameseModel& model, double theta,
                                             nlohmann::ordered_json* log);
  double clock(const JoinStats& s) const;
  void append_trace(const Trace& t);
  void write_snapshot() const;

  EngineConfig cfg_;
  std::optional<Repository> repo_;
  std::optional<Models> models_;
};

}  // namespace sjreuse
