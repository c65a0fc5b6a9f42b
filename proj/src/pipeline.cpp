#include "sjreuse/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

#include "json_util.hpp"
#include "sjreuse/error.hpp"
#include "sjreuse/log.hpp"
#include "sjreuse/random.hpp"

namespace sjreuse {

namespace {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

/// Every unordered pair plus each self-pair at target 0, which anchors the
/// identity the online lookup depends on.
std::vector<TrainPair> training_pairs(const std::vector<DatasetEmbedding>& embs,
                                      const JsdMatrix& gt) {
  std::vector<TrainPair> pairs;
  for (std::size_t i = 0; i < embs.size(); ++i) {
    for (std::size_t j = i; j < embs.size(); ++j) {
      pairs.push_back({embs[i], embs[j], i == j ? 0.0 : gt.at(i, j)});
    }
  }
  return pairs;
}

void check_id(const std::string& id) {
  const bool ok = !id.empty() && id.size() <= 128 && id[0] != '.' &&
                  std::all_of(id.begin(), id.end(), [](char c) {
                    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
                           c == '.';
                  });
  if (!ok) {
    throw Error(ErrorCode::kInvalidArgument,
                "dataset id '" + id + "' must use letters, digits, '_', '-' or '.'");
  }
}

std::uint64_t id_stream(const std::string& id) { return json_util::fnv1a(id); }

double ratio(double num, double den) {
  if (den > 0.0) return num / den;
  return num > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
}

nlohmann::ordered_json opt(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}
nlohmann::ordered_json opt(const std::optional<std::string>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json joins_to_json(const std::vector<JoinPair>& joins) {
  auto a = nlohmann::ordered_json::array();
  for (const auto& j : joins) a.push_back({j.left, j.right});
  return a;
}

std::vector<JoinPair> joins_from_json(const nlohmann::json& j) {
  std::vector<JoinPair> out;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2) throw Error(ErrorCode::kFormat, "join is not a pair");
    out.push_back({p[0].get<std::string>(), p[1].get<std::string>()});
  }
  return out;
}

void write_json(const std::filesystem::path& file, const nlohmann::ordered_json& j) {
  json_util::write_atomic(file, j.dump(1) + "\n");
}

}  // namespace

GenSpec GenSpec::from_json(const nlohmann::json& j) {
  GenSpec g;
  g.kind = json_util::get<std::string>(j, "kind");
  g.id = json_util::get<std::string>(j, "id");
  g.n = json_util::get<std::size_t>(j, "n");
  if (j.contains("seed")) g.seed = json_util::get<std::uint64_t>(j, "seed");
  if (g.kind == "uniform" || g.kind == "gaussian") {
    g.region = json_util::to_rect(json_util::field(j, "region"), "region");
  }
  if (g.kind == "gaussian") {
    g.center = json_util::to_point(json_util::field(j, "center"), "center");
    g.sigma = json_util::get<double>(j, "sigma");
  } else if (g.kind == "enlarge") {
    g.source = json_util::get<std::string>(j, "source");
    if (j.contains("resolution")) g.resolution = json_util::get<int>(j, "resolution");
  } else if (g.kind != "uniform") {
    throw Error(ErrorCode::kInvalidArgument, "unknown generator kind '" + g.kind + "'");
  }
  return g;
}

nlohmann::ordered_json Trace::to_json(bool with_timings) const {
  nlohmann::ordered_json j;
  j["seq"] = seq;
  j["left"] = left;
  j["right"] = right;
  j["theta"] = theta;
  j["forced"] = forced;
  j["sim_max"] = opt(sim_max);
  j["matched_id"] = opt(matched_id);
  j["decision"] = decision_name(decision);
  j["reason"] = reason;
  j["reuse_votes"] = reuse_votes;
  j["reused"] = reused;
  j["fallback_error"] = fallback_error;
  j["added_to_repository"] = added_to_repository;
  j["stats"] = stats.to_json(false);
  if (with_timings) {
    nlohmann::ordered_json t = stats.to_json(true)["seconds"];
    t["best_match"] = lookup_seconds;
    t["decision"] = decision_seconds;
    j["seconds"] = std::move(t);
  }
  return j;
}

Percentiles percentiles(std::vector<double> values) {
  Percentiles p;
  p.count = values.size();
  if (values.empty()) return p;
  std::sort(values.begin(), values.end());
  auto at = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
  };
  p.min = values.front();
  p.p25 = at(0.25);
  p.p50 = at(0.5);
  p.p75 = at(0.75);
  p.max = values.back();
  return p;
}

nlohmann::ordered_json percentiles_to_json(const Percentiles& p) {
  if (p.count == 0) return nullptr;
  return {{"count", p.count}, {"best", p.max}, {"p75", p.p75}, {"median", p.p50},
          {"p25", p.p25},     {"worst", p.min}};
}

Engine::Engine(EngineConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.workers < 1) throw Error(ErrorCode::kInvalidArgument, "workers must be >= 1");
  std::filesystem::create_directories(cfg_.data_dir);
  std::filesystem::create_directories(cfg_.repo_dir);
}

Repository& Engine::repo() {
  if (!repo_) repo_ = Repository::open(cfg_.repo_dir);
  return *repo_;
}

const Engine::Models* Engine::models() {
  const Manifest& m = repo().manifest();
  if (m.model_ref.empty() || m.forest_ref.empty()) return nullptr;
  if (!models_ || models_->generation != m.generation) {
    models_ = Models{m.generation, load_model(repo().dir() / m.model_ref),
                     DecisionForest::load(repo().dir() / m.forest_ref)};
  }
  return &*models_;
}

PartitionerSpec Engine::partitioner_spec(const std::string& id) const {
  PartitionerSpec s;
  s.domain = cfg_.partition_domain;
  s.params.rdd_partitions = cfg_.workers;
  s.params.user_max_depth = cfg_.user_max_depth;
  s.params.node_capacity = cfg_.node_capacity;
  s.sample_cap = cfg_.sample_cap;
  s.seed = derive_seed(cfg_.seed_ingest, id_stream(id));
  return s;
}

DatasetEmbedding Engine::embedding(const Dataset& d) const {
  return embed(d.metadata, cfg_.coord_scale, d.id);
}

GridSpec Engine::resolve_grid(const std::vector<Dataset>& datasets) const {
  if (repo_ && repo_->manifest().histogram_grid) return *repo_->manifest().histogram_grid;
  if (cfg_.histogram_domain) return {*cfg_.histogram_domain, cfg_.histogram_resolution};
  Rect u = datasets.at(0).metadata.bbox;
  for (const auto& d : datasets) u = u.united(d.metadata.bbox);
  Rect padded = u.padded(0.01);
  if (!(padded.width() > 0.0 && padded.height() > 0.0)) {
    padded = {u.min_x - 1.0, u.min_y - 1.0, u.max_x + 1.0, u.max_y + 1.0};
  }
  return {padded, cfg_.histogram_resolution};
}

double Engine::clock(const JoinStats& s) const {
  return cfg_.label_clock == LabelClock::kWork ? static_cast<double>(s.work_units)
                                               : s.seconds.total();
}

Dataset Engine::ingest(const std::string& id, const std::filesystem::path& csv) {
  check_id(id);
  Dataset d = sjreuse::ingest(csv, id, cfg_.sample_cap, derive_seed(cfg_.seed_ingest, id_stream(id)));
  save_metadata(d, cfg_.data_dir / (id + ".meta.json"));
  return d;
}

Dataset Engine::generate(const GenSpec& spec) {
  check_id(spec.id);
  if (spec.n == 0) throw Error(ErrorCode::kInvalidArgument, "generator needs n >= 1");
  const auto out = std::filesystem::absolute(cfg_.data_dir / (spec.id + ".csv"));
  const std::uint64_t seed = derive_seed(spec.seed, id_stream(spec.id));
  if (spec.kind == "uniform") {
    write_points_csv(out, generate_uniform(spec.region, spec.n, seed));
  } else if (spec.kind == "gaussian") {
    write_points_csv(out, generate_gaussian(spec.center, spec.sigma, spec.n, seed, spec.region));
  } else if (spec.kind == "enlarge") {
    const Dataset src = dataset(spec.source);
    if (spec.n < src.count) {
      throw Error(ErrorCode::kInvalidArgument, "enlarge target below the source count");
    }
    write_points_csv(out, enlarge_points(read_points_csv(src.path), spec.n, spec.resolution, seed));
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown generator kind '" + spec.kind + "'");
  }
  return ingest(spec.id, out);
}

Dataset Engine::dataset(const std::string& id) const {
  check_id(id);
  const auto file = cfg_.data_dir / (id + ".meta.json");
  if (!std::filesystem::exists(file)) {
    throw Error(ErrorCode::kNotFound, "dataset '" + id + "' has not been ingested");
  }
  return load_metadata(file);
}

std::vector<std::string> Engine::catalog() const {
  std::vector<std::string> ids;
  for (const auto& e : std::filesystem::directory_iterator(cfg_.data_dir)) {
    const std::string name = e.path().filename().string();
    const std::string suffix = ".meta.json";
    if (name.size() > suffix.size() && name.ends_with(suffix)) {
      ids.push_back(name.substr(0, name.size() - suffix.size()));
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

void Engine::write_snapshot() const {
  json_util::write_atomic(cfg_.repo_dir / "effective_config.txt", cfg_.to_text());
}

void Engine::append_trace(const Trace& t) {
  std::ofstream out(repo().decisions_log(), std::ios::app | std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot append to " + repo().decisions_log().string());
  out << t.to_json(true).dump() << '\n';
}

std::vector<DecisionSample> Engine::collect_labels(const std::vector<JoinPair>& joins,
                                                   const SiameseModel& model, double theta,
                                                   nlohmann::ordered_json* log) {
  const ExecOptions opts{cfg_.workers, cfg_.capacity_cap};
  std::vector<DecisionSample> samples;
  for (const auto& jp : joins) {
    const Dataset r = dataset(jp.left);
    const Dataset s = dataset(jp.right);
    const DatasetEmbedding er = embedding(r);
    const DatasetEmbedding es = embedding(s);

    JoinStats fresh_stats;
    PointSource r_src = PointSource::file(r.path);
    PointSource s_src = PointSource::file(s.path);
    const QuadtreePartitioner fresh = build_partitioner(r_src, partitioner_spec(r.id), fresh_stats, r.id);
    const JoinResult t2_run = execute(r_src, s_src, theta, fresh, opts, fresh_stats);
    const double t2 = clock(t2_run.stats);

    // The full lookup hits the join's own stored partitioner when there is
    // one; leaving both inputs out shows what reuse costs without it.
    const std::vector<std::vector<std::string>> variants{{}, {r.id, s.id}};
    for (const auto& exclude : variants) {
      Match match;
      JoinStats st;
      Stopwatch lookup;
      try {
        match = repo().best_match(er, es, model, exclude);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kEmptyRepository) throw;
        continue;
      }
      st.seconds.lookup = lookup.seconds();
      st.work_units += repo().size();
      st.partition_work_units += repo().size();
      DecisionSample sample;
      std::string error;
      try {
        const auto& entry = repo().entries()[match.entry];
        PointSource r2 = PointSource::file(r.path);
        PointSource s2 = PointSource::file(s.path);
        const QuadtreePartitioner p = fetch_partitioner(repo().partitioner_file(entry), st, entry.dataset_id);
        const JoinResult t1_run = execute(r2, s2, theta, p, opts, st);
        if (t1_run.pairs != t2_run.pairs) {
          throw Error(ErrorCode::kInternal, "reused partitioner changed the result of " + r.id +
                                                " x " + s.id);
        }
        sample = DecisionSample::make(match.sim_max, clock(t1_run.stats), t2);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kInternal) throw;
        error = e.what();
        sample = DecisionSample::failed_reuse(match.sim_max, t2);
      }
      samples.push_back(sample);
      if (log) {
        log->push_back({{"left", r.id},
                        {"right", s.id},
                        {"excluded", exclude},
                        {"matched_id", match.dataset_id},
                        {"sim_max", sample.sim_max},
                        {"t1", std::isfinite(sample.t1) ? nlohmann::ordered_json(sample.t1)
                                                        : nlohmann::ordered_json("inf")},
                        {"t2", sample.t2},
                        {"label", sample.label},
                        {"error", error}});
      }
    }
  }
  return samples;
}

nlohmann::ordered_json Engine::offline(std::vector<std::string> datasets,
                                       std::vector<JoinPair> joins) {
  RepoLock lock(cfg_.repo_dir);
  repo_.reset();
  models_.reset();
  if (datasets.empty()) datasets = catalog();
  {
    std::set<std::string> seen;
    std::vector<std::string> unique;
    for (auto& id : datasets) {
      if (seen.insert(id).second) unique.push_back(id);
    }
    datasets = std::move(unique);
  }
  if (datasets.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "offline training needs at least 2 datasets");
  }
  std::vector<Dataset> ds;
  for (const auto& id : datasets) ds.push_back(dataset(id));
  if (joins.empty()) joins = pair_joins(datasets, cfg_.seed_workload);
  for (const auto& j : joins) {
    dataset(j.left);
    dataset(j.right);
  }

  Repository& rp = repo();
  const GridSpec grid = resolve_grid(ds);
  rp.set_histogram_grid(grid);
  rp.set_seeds({{"ingest", cfg_.seed_ingest},
                {"train", cfg_.seed_train},
                {"forest", cfg_.seed_forest},
                {"workload", cfg_.seed_workload}});
  rp.save();

  // Ground truth and the similarity model.
  std::vector<DatasetRef> refs;
  std::vector<DatasetEmbedding> embs;
  for (const auto& d : ds) {
    refs.push_back({d.id, d.path});
    embs.push_back(embedding(d));
  }
  const JsdMatrix gt = ground_truth_matrix(refs, grid, rp.dir() / "cache");
  const std::vector<TrainPair> pairs = training_pairs(embs, gt);
  TrainConfig tc;
  tc.seed = cfg_.seed_train;
  tc.coord_scale = cfg_.coord_scale;
  const TrainResult trained = train(pairs, tc);

  // A partitioner for every left side.
  std::size_t added = 0;
  for (const auto& j : joins) {
    if (rp.find(j.left)) continue;
    const Dataset d = dataset(j.left);
    JoinStats st;
    PointSource src = PointSource::file(d.path);
    rp.add(build_partitioner(src, partitioner_spec(d.id), st, d.id), embedding(d));
    ++added;
  }

  auto label_log = nlohmann::ordered_json::array();
  const std::vector<DecisionSample> samples = collect_labels(joins, trained.model, cfg_.theta, &label_log);
  const DecisionForest forest =
      DecisionForest::fit(samples, {cfg_.forest_trees, cfg_.forest_depth, cfg_.seed_forest});

  const std::uint64_t gen = rp.manifest().generation + 1;
  const std::string model_ref = "models/siamese.g" + std::to_string(gen) + ".json";
  const std::string forest_ref = "models/forest.g" + std::to_string(gen) + ".json";
  save_model(trained.model, rp.dir() / model_ref);
  forest.save(rp.dir() / forest_ref);
  nlohmann::ordered_json report;
  report["generation"] = gen;
  report["datasets"] = datasets;
  report["training_pairs"] = pairs.size();
  report["training"] = report_to_json(trained.report);
  report["labels"] = label_log;
  write_json(rp.models_dir() / ("train_report.g" + std::to_string(gen) + ".json"), report);
  write_json(rp.models_dir() / "training.json",
             {{"datasets", datasets}, {"joins", joins_to_json(joins)}, {"theta", cfg_.theta}});
  rp.swap_models(model_ref, forest_ref, gen);
  write_snapshot();

  std::size_t positive = 0;
  for (const auto& s : samples) positive += s.label == 1 ? 1 : 0;
  nlohmann::ordered_json summary;
  summary["generation"] = gen;
  summary["datasets"] = datasets.size();
  summary["joins"] = joins.size();
  summary["training_pairs"] = pairs.size();
  summary["lr"] = trained.report.lr;
  summary["weight_decay"] = trained.report.weight_decay;
  summary["train_mse"] = trained.report.train_mse;
  summary["val_mse"] = trained.report.val_mse;
  summary["decision_samples"] = samples.size();
  summary["reuse_labels"] = positive;
  summary["forest_degenerate"] = forest.degenerate();
  summary["partitioners_added"] = added;
  summary["repository_entries"] = rp.size();
  summary["model"] = model_ref;
  summary["forest"] = forest_ref;
  return summary;
}

Trace Engine::lookup(const std::string& left, const std::string& right) {
  Trace t;
  t.left = left;
  t.right = right;
  const Dataset r = dataset(left);
  const Dataset s = dataset(right);
  const Models* m = models();
  if (!m) throw Error(ErrorCode::kNotFound, "no trained models in the repository");
  Stopwatch match_clock;
  const Match match = repo().best_match(embedding(r), embedding(s), m->model);
  t.lookup_seconds = match_clock.seconds();
  Stopwatch decide_clock;
  t.decision = m->forest.predict(match.sim_max);
  t.decision_seconds = decide_clock.seconds();
  t.reuse_votes = m->forest.reuse_votes(match.sim_max);
  t.sim_max = match.sim_max;
  t.matched_id = match.dataset_id;
  return t;
}

OnlineResult Engine::join_locked(const std::string& left, const std::string& right, double theta,
                                 bool force) {
  Trace t;
  t.left = left;
  t.right = right;
  t.theta = theta;
  t.forced = force;
  const Dataset r = dataset(left);
  const Dataset s = dataset(right);
  const DatasetEmbedding er = embedding(r);
  const ExecOptions opts{cfg_.workers, cfg_.capacity_cap};
  Repository& rp = repo();

  JoinStats base;
  std::optional<Match> match;
  if (force) {
    t.reason = "forced";
  } else if (rp.empty()) {
    t.reason = "empty_repository";
    log_warning("repository is empty; repartitioning");
  } else if (const Models* m = models(); !m) {
    t.reason = "no_models";
    log_warning("no trained models; repartitioning");
  } else {
    Stopwatch match_clock;
    match = rp.best_match(er, embedding(s), m->model);
    t.lookup_seconds = match_clock.seconds();
    Stopwatch decide_clock;
    t.decision = m->forest.predict(match->sim_max);
    t.decision_seconds = decide_clock.seconds();
    t.reuse_votes = m->forest.reuse_votes(match->sim_max);
    t.sim_max = match->sim_max;
    t.matched_id = match->dataset_id;
    base.seconds.lookup = t.lookup_seconds + t.decision_seconds;
    base.work_units += rp.size();
    base.partition_work_units += rp.size();
  }

  OnlineResult out;
  if (t.decision == Decision::kReuse) {
    try {
      JoinStats st = base;
      const auto& entry = rp.entries()[match->entry];
      QuadtreePartitioner p = fetch_partitioner(rp.partitioner_file(entry), st, entry.dataset_id);
      PointSource r_src = PointSource::file(r.path);
      PointSource s_src = PointSource::file(s.path);
      JoinResult res = execute(r_src, s_src, theta, p, opts, st);
      out.pairs = std::move(res.pairs);
      t.stats = std::move(res.stats);
      t.reused = true;
    } catch (const Error& e) {
      t.fallback_error = std::string(error_code_name(e.code())) + ": " + e.what();
      log_warning("reuse failed, repartitioning: " + t.fallback_error);
    }
  }
  if (!t.reused) {
    JoinStats st = base;
    PointSource r_src = PointSource::file(r.path);
    PointSource s_src = PointSource::file(s.path);
    QuadtreePartitioner p = build_partitioner(r_src, partitioner_spec(r.id), st, r.id);
    JoinResult res = execute(r_src, s_src, theta, p, opts, st);
    if (!force && !rp.find(r.id)) {
      rp.add(p, er);
      t.added_to_repository = true;
    }
    out.pairs = std::move(res.pairs);
    t.stats = std::move(res.stats);
  }

  std::uint64_t lines = 0;
  {
    std::ifstream in(rp.decisions_log());
    std::string line;
    while (std::getline(in, line)) lines += line.empty() ? 0 : 1;
  }
  t.seq = lines + 1;
  append_trace(t);
  out.trace = std::move(t);
  return out;
}

OnlineResult Engine::join(const std::string& left, const std::string& right, double theta,
                          bool force_repartition) {
  RepoLock lock(cfg_.repo_dir);
  repo_.reset();
  OnlineResult r = join_locked(left, right, theta, force_repartition);
  write_snapshot();
  return r;
}

nlohmann::ordered_json Engine::bench(const std::vector<JoinPair>& joins, double theta,
                                     const std::filesystem::path& out_dir) {
  if (joins.empty()) throw Error(ErrorCode::kInvalidArgument, "bench needs at least one join");
  RepoLock lock(cfg_.repo_dir);
  repo_.reset();

  auto rows = nlohmann::ordered_json::array();
  auto timing_rows = nlohmann::ordered_json::array();
  std::vector<double> work_overall, work_partitioning, wall_overall, wall_partitioning;
  std::vector<double> match_ms, decide_ms;
  std::size_t reuse_decisions = 0;
  std::size_t failures = 0;
  bool all_equal = true;
  for (const auto& jp : joins) {
    nlohmann::ordered_json row{{"left", jp.left}, {"right", jp.right}};
    try {
      const OnlineResult fresh = join_locked(jp.left, jp.right, theta, true);
      const OnlineResult online = join_locked(jp.left, jp.right, theta, false);
      const JoinStats& a = fresh.trace.stats;
      const JoinStats& b = online.trace.stats;
      const bool equal = fresh.pairs == online.pairs;
      all_equal = all_equal && equal;
      if (online.trace.decision == Decision::kReuse) ++reuse_decisions;
      const double wo = ratio(static_cast<double>(a.work_units), static_cast<double>(b.work_units));
      const double wp = ratio(static_cast<double>(a.partition_work_units),
                              static_cast<double>(b.partition_work_units));
      work_overall.push_back(wo);
      work_partitioning.push_back(wp);
      const Speedup sp = speedup_report(a, b);
      wall_overall.push_back(sp.overall);
      wall_partitioning.push_back(sp.partitioning);
      if (online.trace.sim_max) {
        match_ms.push_back(online.trace.lookup_seconds * 1e3);
        decide_ms.push_back(online.trace.decision_seconds * 1e3);
      }
      row["decision"] = decision_name(online.trace.decision);
      row["reused"] = online.trace.reused;
      row["sim_max"] = opt(online.trace.sim_max);
      row["matched_id"] = opt(online.trace.matched_id);
      row["fallback_error"] = online.trace.fallback_error;
      row["result_pairs"] = online.pairs.size();
      row["pairs_equal"] = equal;
      row["work_units"] = {{"repartition", {{"total", a.work_units}, {"partitioning", a.partition_work_units}}},
                           {"online", {{"total", b.work_units}, {"partitioning", b.partition_work_units}}}};
      row["work_speedup"] = {{"overall", wo}, {"partitioning", wp}};
      row["construction_passes_r"] = {{"repartition", a.construction_passes_r},
                                      {"online", b.construction_passes_r}};
      timing_rows.push_back({{"left", jp.left},
                             {"right", jp.right},
                             {"repartition", fresh.trace.to_json(true)["seconds"]},
                             {"online", online.trace.to_json(true)["seconds"]},
                             {"speedup", {{"overall", sp.overall}, {"partitioning", sp.partitioning}}}});
    } catch (const Error& e) {
      ++failures;
      row["error"] = std::string(error_code_name(e.code())) + ": " + e.what();
    }
    rows.push_back(std::move(row));
  }

  nlohmann::ordered_json report;
  report["comparator"] = "forced repartition in this engine";
  report["theta"] = theta;
  report["workers"] = cfg_.workers;
  report["seeds"] = {{"ingest", cfg_.seed_ingest},
                     {"train", cfg_.seed_train},
                     {"forest", cfg_.seed_forest},
                     {"workload", cfg_.seed_workload}};
  report["joins"] = rows;
  report["summary"] = {{"joins", joins.size()},
                       {"failures", failures},
                       {"reuse_decisions", reuse_decisions},
                       {"reuse_frequency", static_cast<double>(reuse_decisions) /
                                               static_cast<double>(joins.size())},
                       {"all_pairs_equal", all_equal},
                       {"work_speedup_overall", percentiles_to_json(percentiles(work_overall))},
                       {"work_speedup_partitioning",
                        percentiles_to_json(percentiles(work_partitioning))}};
  nlohmann::ordered_json timings;
  timings["joins"] = timing_rows;
  timings["summary"] = {{"speedup_overall", percentiles_to_json(percentiles(wall_overall))},
                        {"speedup_partitioning", percentiles_to_json(percentiles(wall_partitioning))},
                        {"best_match_ms", percentiles_to_json(percentiles(match_ms))},
                        {"decision_ms", percentiles_to_json(percentiles(decide_ms))}};
  std::filesystem::create_directories(out_dir);
  write_json(out_dir / "bench.json", report);
  write_json(out_dir / "bench_timings.json", timings);
  json_util::write_atomic(out_dir / "effective_config.txt", cfg_.to_text());
  write_snapshot();
  return {{"report", report}, {"timings", timings}};
}

nlohmann::ordered_json Engine::retrain() {
  RepoLock lock(cfg_.repo_dir);
  repo_.reset();
  models_.reset();
  Repository& rp = repo();
  if (rp.empty()) throw Error(ErrorCode::kEmptyRepository, "nothing to retrain on");

  std::vector<std::string> ids;
  std::vector<JoinPair> joins;
  double theta = cfg_.theta;
  const auto training_file = rp.models_dir() / "training.json";
  if (std::filesystem::exists(training_file)) {
    const auto tj = json_util::parse_file(training_file);
    ids = json_util::get<std::vector<std::string>>(tj, "datasets");
    joins = joins_from_json(json_util::field(tj, "joins"));
    theta = json_util::get<double>(tj, "theta");
  }
  for (const auto& e : rp.entries()) {
    if (std::find(ids.begin(), ids.end(), e.dataset_id) == ids.end()) ids.push_back(e.dataset_id);
  }
  if (ids.size() < 2) throw Error(ErrorCode::kInvalidArgument, "retraining needs at least 2 datasets");

  std::vector<Dataset> ds;
  std::vector<DatasetRef> refs;
  std::vector<DatasetEmbedding> embs;
  for (const auto& id : ids) {
    ds.push_back(dataset(id));
    refs.push_back({id, ds.back().path});
    embs.push_back(embedding(ds.back()));
  }
  const GridSpec grid = resolve_grid(ds);
  const JsdMatrix gt = ground_truth_matrix(refs, grid, rp.dir() / "cache");
  const std::vector<TrainPair> pairs = training_pairs(embs, gt);
  TrainConfig tc;
  tc.seed = cfg_.seed_train;
  tc.coord_scale = cfg_.coord_scale;
  const TrainResult trained = train(pairs, tc);

  std::optional<double> previous_val;
  const std::uint64_t old_gen = rp.manifest().generation;
  const auto old_report = rp.models_dir() / ("train_report.g" + std::to_string(old_gen) + ".json");
  if (std::filesystem::exists(old_report)) {
    const auto j = json_util::parse_file(old_report);
    previous_val = j.at("training").at("val_mse").get<double>();
  }

  auto label_log = nlohmann::ordered_json::array();
  std::vector<DecisionSample> samples = collect_labels(joins, trained.model, theta, &label_log);
  // Reuse attempts that broke an online join are kept as negative samples.
  std::size_t feedback = 0;
  if (std::ifstream in(rp.decisions_log()); in) {
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("fallback_error") || !j.contains("sim_max")) continue;
      if (j.at("fallback_error").get<std::string>().empty() || j.at("sim_max").is_null()) continue;
      const double t2 = cfg_.label_clock == LabelClock::kWork
                            ? j.at("stats").at("work_units").get<double>()
                            : j.at("seconds").at("total").get<double>();
      samples.push_back(DecisionSample::failed_reuse(j.at("sim_max").get<double>(), t2));
      ++feedback;
    }
  }
  const DecisionForest forest =
      DecisionForest::fit(samples, {cfg_.forest_trees, cfg_.forest_depth, cfg_.seed_forest});

  const std::uint64_t gen = old_gen + 1;
  const std::string model_ref = "models/siamese.g" + std::to_string(gen) + ".json";
  const std::string forest_ref = "models/forest.g" + std::to_string(gen) + ".json";
  save_model(trained.model, rp.dir() / model_ref);
  forest.save(rp.dir() / forest_ref);
  nlohmann::ordered_json report;
  report["generation"] = gen;
  report["datasets"] = ids;
  report["training_pairs"] = pairs.size();
  report["training"] = report_to_json(trained.report);
  report["labels"] = label_log;
  report["feedback_samples"] = feedback;
  write_json(rp.models_dir() / ("train_report.g" + std::to_string(gen) + ".json"), report);

  if (cfg_.fault == "retrain_before_swap") {
    throw Error(ErrorCode::kInternal, "fault injected before the checkpoint swap");
  }
  rp.swap_models(model_ref, forest_ref, gen);
  models_.reset();
  write_snapshot();

  nlohmann::ordered_json summary;
  summary["generation"] = gen;
  summary["datasets"] = ids.size();
  summary["training_pairs"] = pairs.size();
  summary["previous_val_mse"] = opt(previous_val);
  summary["val_mse"] = trained.report.val_mse;
  summary["train_mse"] = trained.report.train_mse;
  summary["decision_samples"] = samples.size();
  summary["feedback_samples"] = feedback;
  summary["forest_degenerate"] = forest.degenerate();
  summary["repository_entries"] = rp.size();
  summary["model"] = model_ref;
  summary["forest"] = forest_ref;
  return summary;
}

}  // namespace sjreuse
