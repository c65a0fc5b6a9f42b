// Command-line front end. Talks to the engine only through the C API.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sjreuse/sjreuse.h"

namespace {

struct Failure {
  int status;
};

void check(int status) {
  if (status != SJR_OK) throw Failure{status};
}

struct Engine {
  sjr_engine* e = nullptr;
  ~Engine() { sjr_engine_close(e); }
};

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<int> workers;
  bool verbose = false;
  bool json = false;
};

void open(Engine& eng, const Common& c) {
  check(sjr_engine_open(c.config.empty() ? nullptr : c.config.c_str(), &eng.e));
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "--set expects key=value, got '%s'\n", kv.c_str());
      throw Failure{SJR_INVALID_ARGUMENT};
    }
    check(sjr_engine_set(eng.e, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
  }
  if (c.workers) check(sjr_engine_set(eng.e, "workers", std::to_string(*c.workers).c_str()));
}

nlohmann::json take(char* s) {
  nlohmann::json j = nlohmann::json::parse(s);
  sjr_free_string(s);
  return j;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "engine config file (key = value)");
  cmd->add_option("--set", c.overrides, "override a config key, key=value");
  cmd->add_flag("-v,--verbose", c.verbose, "log progress to stderr");
  cmd->add_flag("--json", c.json, "print the raw JSON result");
}

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string cell(const nlohmann::json& v, int digits = 3) {
  if (v.is_null()) return "-";
  if (v.is_number()) return fixed(v.get<double>(), digits);
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

void print_bench(const nlohmann::json& out) {
  const auto& report = out.at("report");
  const auto& timings = out.at("timings");
  std::printf("comparator: %s\n\n", report.at("comparator").get<std::string>().c_str());
  std::printf("%-14s %-14s %-12s %8s %10s %10s %10s\n", "left", "right", "decision", "sim_max",
              "pairs", "speedup", "part.spd");
  std::size_t t = 0;
  for (const auto& row : report.at("joins")) {
    const std::string left = row.at("left");
    const std::string right = row.at("right");
    if (row.contains("error")) {
      std::printf("%-14s %-14s failed: %s\n", left.c_str(), right.c_str(),
                  row.at("error").get<std::string>().c_str());
      continue;
    }
    const auto& tr = timings.at("joins").at(t++);
    std::printf("%-14s %-14s %-12s %8s %10s %10s %10s\n", left.c_str(), right.c_str(),
                row.at("decision").get<std::string>().c_str(), cell(row.at("sim_max")).c_str(),
                cell(row.at("result_pairs"), 0).c_str(),
                cell(tr.at("speedup").at("overall")).c_str(),
                cell(tr.at("speedup").at("partitioning")).c_str());
  }
  const auto& s = report.at("summary");
  std::printf("\nreuse frequency: %s (%s of %s joins), failures: %s, results equal: %s\n",
              fixed(s.at("reuse_frequency").get<double>(), 2).c_str(),
              s.at("reuse_decisions").dump().c_str(), s.at("joins").dump().c_str(),
              s.at("failures").dump().c_str(), s.at("all_pairs_equal").dump().c_str());
  std::printf("\n%-26s %8s %8s %8s %8s %8s\n", "", "best", "p75", "median", "p25", "worst");
  auto line = [](const char* name, const nlohmann::json& p) {
    if (p.is_null()) {
      std::printf("%-26s %8s\n", name, "-");
      return;
    }
    std::printf("%-26s %8s %8s %8s %8s %8s\n", name, cell(p.at("best")).c_str(),
                cell(p.at("p75")).c_str(), cell(p.at("median")).c_str(),
                cell(p.at("p25")).c_str(), cell(p.at("worst")).c_str());
  };
  line("speed-up (overall)", timings.at("summary").at("speedup_overall"));
  line("speed-up (partitioning)", timings.at("summary").at("speedup_partitioning"));
  line("work ratio (overall)", s.at("work_speedup_overall"));
  line("work ratio (partitioning)", s.at("work_speedup_partitioning"));
  line("best_match ms", timings.at("summary").at("best_match_ms"));
  line("decision ms", timings.at("summary").at("decision_ms"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial distance joins with learned partitioner reuse"};
  app.require_subcommand(1);

  Common common;
  std::vector<std::string> files;
  std::string id;
  auto* ingest = app.add_subcommand("ingest", "ingest CSV point files (x,y per row)");
  add_common(ingest, common);
  ingest->add_option("files", files, "CSV files")->required();
  ingest->add_option("--id", id, "dataset id (single file only; default: file stem)");

  nlohmann::json gen_spec = nlohmann::json::object();
  std::string kind, region, center, source;
  std::size_t n = 0;
  double sigma = 0.0;
  int resolution = 64;
  std::uint64_t seed = 0;
  auto* gen = app.add_subcommand("gen", "synthesize a dataset");
  add_common(gen, common);
  gen->add_option("--kind", kind, "uniform, gaussian or enlarge")->required();
  gen->add_option("--id", id, "new dataset id")->required();
  gen->add_option("-n,--count", n, "number of points")->required();
  gen->add_option("--region", region, "min_x,min_y,max_x,max_y (uniform box or gaussian clip)");
  gen->add_option("--center", center, "x,y (gaussian)");
  gen->add_option("--sigma", sigma, "standard deviation (gaussian)");
  gen->add_option("--source", source, "dataset to enlarge");
  gen->add_option("--resolution", resolution, "histogram resolution for enlarge");
  gen->add_option("--seed", seed, "generator seed");

  std::string datasets, joins;
  auto* offline = app.add_subcommand("offline", "train the similarity model and decision forest");
  add_common(offline, common);
  offline->add_option("--datasets", datasets, "comma-separated ids (default: all ingested)");
  offline->add_option("--joins", joins, "left:right,... (default: seeded cycle)");

  std::string left, right, out;
  double theta = -1.0;
  bool force = false;
  auto* join = app.add_subcommand("join", "run one join, reusing a stored partitioner when worthwhile");
  add_common(join, common);
  join->add_option("--left", left, "left (partitioned) dataset id")->required();
  join->add_option("--right", right, "right dataset id")->required();
  join->add_option("--theta", theta, "distance predicate (default: config theta)");
  join->add_option("--workers", common.workers, "worker threads");
  join->add_flag("--force-repartition", force, "skip lookup and build a fresh partitioner");
  join->add_option("--out", out, "write result pairs as CSV");

  auto* bench = app.add_subcommand("bench", "compare forced repartition against online reuse");
  add_common(bench, common);
  bench->add_option("--joins", joins, "left:right,...")->required();
  bench->add_option("--theta", theta, "distance predicate (default: config theta)");
  bench->add_option("--workers", common.workers, "worker threads");
  bench->add_option("--out", out, "report directory")->required();

  auto* retrain = app.add_subcommand("retrain", "retrain both models over the repository");
  add_common(retrain, common);

  auto* lookup = app.add_subcommand("lookup", "best stored match and decision, without joining");
  add_common(lookup, common);
  lookup->add_option("--left", left, "left dataset id")->required();
  lookup->add_option("--right", right, "right dataset id")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    sjr_set_log_level(common.verbose ? 1 : 2);
    Engine eng;
    open(eng, common);
    nlohmann::json result;
    if (ingest->parsed()) {
      if (!id.empty() && files.size() != 1) {
        std::fprintf(stderr, "--id needs exactly one file\n");
        return 1;
      }
      result = nlohmann::json::array();
      for (const auto& f : files) {
        const std::string ds = id.empty() ? std::filesystem::path(f).stem().string() : id;
        char* s = nullptr;
        check(sjr_ingest(eng.e, ds.c_str(), f.c_str(), &s));
        auto j = take(s);
        j.erase("hull");
        result.push_back(std::move(j));
      }
    } else if (gen->parsed()) {
      gen_spec = {{"kind", kind}, {"id", id}, {"n", n}, {"seed", seed}, {"resolution", resolution}};
      auto numbers = [](const std::string& text) {
        nlohmann::json a = nlohmann::json::array();
        std::stringstream ss(text);
        std::string part;
        while (std::getline(ss, part, ',')) a.push_back(std::stod(part));
        return a;
      };
      try {
        if (!region.empty()) gen_spec["region"] = numbers(region);
        if (!center.empty()) gen_spec["center"] = numbers(center);
      } catch (const std::exception&) {
        std::fprintf(stderr, "--region and --center take comma-separated numbers\n");
        return 1;
      }
      gen_spec["sigma"] = sigma;
      if (!source.empty()) gen_spec["source"] = source;
      char* s = nullptr;
      check(sjr_generate(eng.e, gen_spec.dump().c_str(), &s));
      result = take(s);
      result.erase("hull");
    } else if (offline->parsed()) {
      char* s = nullptr;
      check(sjr_offline(eng.e, datasets.empty() ? nullptr : datasets.c_str(),
                        joins.empty() ? nullptr : joins.c_str(), &s));
      result = take(s);
    } else if (join->parsed()) {
      char* s = nullptr;
      check(sjr_join(eng.e, left.c_str(), right.c_str(), theta, force ? 1 : 0,
                     out.empty() ? nullptr : out.c_str(), &s));
      result = take(s);
      if (!common.json) {
        const auto& st = result.at("stats");
        std::printf("decision: %s%s\n", result.at("decision").get<std::string>().c_str(),
                    result.at("reused").get<bool>() ? " (reused)" : "");
        std::printf("sim_max: %s  matched: %s\n", cell(result.at("sim_max")).c_str(),
                    cell(result.at("matched_id")).c_str());
        if (!result.at("fallback_error").get<std::string>().empty()) {
          std::printf("fallback: %s\n", result.at("fallback_error").get<std::string>().c_str());
        }
        std::printf("pairs: %s  blocks: %s  passes R/S: %s/%s\n", st.at("result_pairs").dump().c_str(),
                    st.at("blocks").dump().c_str(), st.at("data_passes_r").dump().c_str(),
                    st.at("data_passes_s").dump().c_str());
        std::printf("seconds: partitioning %s  total %s\n",
                    fixed(result.at("seconds").at("partitioning").get<double>(), 4).c_str(),
                    fixed(result.at("seconds").at("total").get<double>(), 4).c_str());
        return 0;
      }
    } else if (bench->parsed()) {
      char* s = nullptr;
      check(sjr_bench(eng.e, joins.c_str(), theta, out.c_str(), &s));
      result = take(s);
      if (!common.json) {
        print_bench(result);
        return 0;
      }
    } else if (retrain->parsed()) {
      char* s = nullptr;
      check(sjr_retrain(eng.e, &s));
      result = take(s);
    } else if (lookup->parsed()) {
      char* s = nullptr;
      check(sjr_lookup(eng.e, left.c_str(), right.c_str(), &s));
      result = take(s);
    }
    std::printf("%s\n", result.dump(2).c_str());
    return 0;
  } catch (const Failure& f) {
    std::fprintf(stderr, "error (%s): %s\n", sjr_status_string(f.status), sjr_last_error_message());
    return f.status == SJR_INTERNAL || f.status == SJR_NON_FINITE_LOSS ? 2 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
