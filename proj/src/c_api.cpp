#include "sjreuse/sjreuse.h"

#include <cmath>
#include <cstring>
#include <string>

#include "sjreuse/error.hpp"
#include "sjreuse/histogram.hpp"
#include "sjreuse/log.hpp"
#include "sjreuse/pipeline.hpp"

struct sjr_engine {
  sjreuse::Engine engine;
};

struct sjr_partitioner {
  sjreuse::QuadtreePartitioner p;
};

namespace {

thread_local std::string g_last_error;

int fail(int status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

template <class Fn>
int guard(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return SJR_OK;
  } catch (const sjreuse::Error& e) {
    return fail(static_cast<int>(e.code()) + 1, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(SJR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(SJR_INTERNAL, e.what());
  } catch (...) {
    return fail(SJR_INTERNAL, "unknown failure");
  }
}

char* dup(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void need(const void* p, const char* what) {
  if (!p) throw sjreuse::Error(sjreuse::ErrorCode::kInvalidArgument, std::string(what) + " is null");
}

std::vector<std::string> split(const char* text, char sep) {
  std::vector<std::string> out;
  if (!text) return out;
  std::string cur;
  for (const char* c = text; ; ++c) {
    if (*c == sep || *c == '\0') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
      if (*c == '\0') break;
    } else if (*c != ' ') {
      cur += *c;
    }
  }
  return out;
}

std::vector<sjreuse::JoinPair> parse_joins(const char* text) {
  std::vector<sjreuse::JoinPair> out;
  for (const auto& item : split(text, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == item.size()) {
      throw sjreuse::Error(sjreuse::ErrorCode::kInvalidArgument,
                           "join '" + item + "' is not left:right");
    }
    out.push_back({item.substr(0, colon), item.substr(colon + 1)});
  }
  return out;
}

}  // namespace

extern "C" {

const char* sjr_status_string(int status) {
  static constexpr const char* names[] = {
      "ok",           "invalid_argument", "io",          "parse",           "degenerate_input",
      "empty_histogram", "domain_mismatch", "out_of_domain", "empty_sample", "format",
      "shape_mismatch", "non_finite_loss", "duplicate_id", "not_found",      "empty_repository",
      "capacity",     "locked",           "internal"};
  if (status < 0 || status > SJR_INTERNAL) return "unknown";
  return names[status];
}

const char* sjr_last_error_message(void) { return g_last_error.c_str(); }

void sjr_free_string(char* s) { delete[] s; }

int sjr_set_log_level(int level) {
  if (level < 0 || level > 4) return fail(SJR_INVALID_ARGUMENT, "log level must be in 0..4");
  sjreuse::set_log_level(static_cast<sjreuse::LogLevel>(level));
  return SJR_OK;
}

int sjr_engine_open(const char* config_path, sjr_engine** out) {
  return guard([&] {
    need(out, "out");
    *out = nullptr;
    sjreuse::EngineConfig cfg =
        config_path ? sjreuse::EngineConfig::load(config_path) : sjreuse::EngineConfig{};
    *out = new sjr_engine{sjreuse::Engine(std::move(cfg))};
  });
}

int sjr_engine_set(sjr_engine* e, const char* key, const char* value) {
  return guard([&] {
    need(e, "engine");
    need(key, "key");
    need(value, "value");
    sjreuse::EngineConfig cfg = e->engine.config();
    cfg.set(key, value);
    e->engine = sjreuse::Engine(std::move(cfg));
  });
}

void sjr_engine_close(sjr_engine* e) { delete e; }

int sjr_engine_config(sjr_engine* e, char** out_text) {
  return guard([&] {
    need(e, "engine");
    need(out_text, "out_text");
    *out_text = dup(e->engine.config().to_text());
  });
}

int sjr_ingest(sjr_engine* e, const char* id, const char* csv_path, char** out_json) {
  return guard([&] {
    need(e, "engine");
    need(id, "id");
    need(csv_path, "csv_path");
    need(out_json, "out_json");
    const sjreuse::Dataset d = e->engine.ingest(id, csv_path);
    *out_json = dup(sjreuse::metadata_to_json(d).dump());
  });
}

int sjr_generate(sjr_engine* e, const char* spec_json, char** out_json) {
  return guard([&] {
    need(e, "engine");
    need(spec_json, "spec_json");
    need(out_json, "out_json");
    const auto j = nlohmann::json::parse(spec_json, nullptr, false);
    if (j.is_discarded()) {
      throw sjreuse::Error(sjreuse::ErrorCode::kInvalidArgument, "generator spec is not JSON");
    }
    const sjreuse::Dataset d = e->engine.generate(sjreuse::GenSpec::from_json(j));
    *out_json = dup(sjreuse::metadata_to_json(d).dump());
  });
}

int sjr_offline(sjr_engine* e, const char* datasets, const char* joins, char** out_json) {
  return guard([&] {
    need(e, "engine");
    need(out_json, "out_json");
    *out_json = dup(e->engine.offline(split(datasets, ','), parse_joins(joins)).dump());
  });
}

int sjr_join(sjr_engine* e, const char* left, const char* right, double theta,
             int force_repartition, const char* pairs_csv, char** out_json) {
  return guard([&] {
    need(e, "engine");
    need(left, "left");
    need(right, "right");
    need(out_json, "out_json");
    if (std::isnan(theta)) throw sjreuse::Error(sjreuse::ErrorCode::kInvalidArgument, "theta is NaN");
    const double t = theta < 0.0 ? e->engine.config().theta : theta;
    const sjreuse::OnlineResult r = e->engine.join(left, right, t, force_repartition != 0);
    if (pairs_csv) sjreuse::write_pairs_csv(pairs_csv, r.pairs);
    *out_json = dup(r.trace.to_json(true).dump());
  });
}

int sjr_bench(sjr_engine* e, const char* joins, double theta, const char* out_dir,
              char** out_json) {
  return guard([&] {
    need(e, "engine");
    need(joins, "joins");
    need(out_dir, "out_dir");
    need(out_json, "out_json");
    if (std::isnan(theta)) throw sjreuse::Error(sjreuse::ErrorCode::kInvalidArgument, "theta is NaN");
    const double t = theta < 0.0 ? e->engine.config().theta : theta;
    *out_json = dup(e->engine.bench(parse_joins(joins), t, out_dir).dump());
  });
}

int sjr_retrain(sjr_engine* e, char** out_json) {
  return guard([&] {
    need(e, "engine");
    need(out_json, "out_json");
    *out_json = dup(e->engine.retrain().dump());
  });
}

int sjr_lookup(sjr_engine* e, const char* left, const char* right, char** out_json) {
  return guard([&] {
    need(e, "engine");
    need(left, "left");
    need(right, "right");
    need(out_json, "out_json");
    const sjreuse::Trace t = e->engine.lookup(left, right);
    nlohmann::ordered_json j;
    j["left"] = t.left;
    j["right"] = t.right;
    j["sim_max"] = *t.sim_max;
    j["matched_id"] = *t.matched_id;
    j["decision"] = sjreuse::decision_name(t.decision);
    j["reuse_votes"] = t.reuse_votes;
    j["best_match_seconds"] = t.lookup_seconds;
    j["decision_seconds"] = t.decision_seconds;
    *out_json = dup(j.dump());
  });
}

int sjr_partitioner_load(const char* path, sjr_partitioner** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    *out = new sjr_partitioner{sjreuse::QuadtreePartitioner::load(path)};
  });
}

int sjr_partitioner_route(const sjr_partitioner* p, double x, double y, uint32_t* block) {
  return guard([&] {
    need(p, "partitioner");
    need(block, "block");
    *block = p->p.route({x, y});
  });
}

size_t sjr_partitioner_block_count(const sjr_partitioner* p) { return p ? p->p.block_count() : 0; }

void sjr_partitioner_free(sjr_partitioner* p) { delete p; }

int sjr_jsd(const double* p, const double* q, size_t n, double* out) {
  return guard([&] {
    need(p, "p");
    need(q, "q");
    need(out, "out");
    if (n == 0) throw sjreuse::Error(sjreuse::ErrorCode::kInvalidArgument, "empty vectors");
    auto side = [n](const double* v) {
      sjreuse::ProbVector pv;
      double total = 0.0;
      for (size_t i = 0; i < n; ++i) {
        if (!(v[i] >= 0.0) || !std::isfinite(v[i])) {
          throw sjreuse::Error(sjreuse::ErrorCode::kInvalidArgument,
                               "counts must be finite and non-negative");
        }
        total += v[i];
      }
      if (total <= 0.0) throw sjreuse::Error(sjreuse::ErrorCode::kEmptyHistogram, "all counts are zero");
      for (size_t i = 0; i < n; ++i) {
        if (v[i] > 0.0) pv.probs.emplace_back(i, v[i] / total);
      }
      return pv;
    };
    *out = sjreuse::jsd(side(p), side(q));
  });
}

}  // extern "C"
