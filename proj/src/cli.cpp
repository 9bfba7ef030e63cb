#include "trustroute/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "trustroute/config.hpp"
#include "trustroute/evalkit.hpp"
#include "trustroute/pipeline.hpp"
#include "trustroute/providers/index.hpp"

namespace trustroute {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_interrupted{false};

extern "C" void on_sigint(int) { g_interrupted.store(true); }

class SigintGuard {
 public:
  SigintGuard() {
    g_interrupted.store(false);
    previous_ = std::signal(SIGINT, on_sigint);
  }
  ~SigintGuard() { std::signal(SIGINT, previous_); }
  SigintGuard(const SigintGuard&) = delete;
  SigintGuard& operator=(const SigintGuard&) = delete;

 private:
  void (*previous_)(int) = SIG_DFL;
};

class LoggerScope {
 public:
  LoggerScope(std::ostream& err, spdlog::level::level_enum level) : previous_(spdlog::default_logger()) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
    auto logger = std::make_shared<spdlog::logger>("trustroute", sink);
    logger->set_pattern("[%l] %v");
    logger->set_level(level);
    spdlog::set_default_logger(logger);
  }
  ~LoggerScope() { spdlog::set_default_logger(previous_); }
  LoggerScope(const LoggerScope&) = delete;
  LoggerScope& operator=(const LoggerScope&) = delete;

 private:
  std::shared_ptr<spdlog::logger> previous_;
};

struct UsageError : Error {
  using Error::Error;
};

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write " + path);
  out << content;
  if (!out) throw UsageError("failed writing " + path);
}

std::vector<TrdRecord> load_dataset(const std::string& path) {
  if (!fs::is_regular_file(path)) throw DatasetError("dataset not found: " + path);
  auto records = load_trd_jsonl(path);
  if (records.empty()) throw DatasetError("dataset is empty: " + path);
  return records;
}

void print_run(const RunRecord& r, std::ostream& out) {
  out << "question: " << r.question << "\n";
  out << "strategy: " << to_string(r.decision.strategy) << "\n";
  out << "answer: ";
  if (r.answer_option) out << *r.answer_option << ". ";
  out << r.answer << "\n";
  out << "bias: r_p=" << fixed(r.bias.r_p) << " g_p=" << fixed(r.bias.g_p)
      << (r.bias_fallback ? " (fallback)" : "") << "\n";
  if (!r.cycles.empty()) {
    const auto& s = r.cycles.back().scores;
    out << "scores: s1=" << fixed(s.s1) << " s2=" << fixed(s.s2) << " s3=" << fixed(s.s3)
        << " s4=" << fixed(s.s4) << "\n";
  }
  out << "trust: t_ret=" << fixed(r.decision.t_ret) << " t_llm=" << fixed(r.decision.t_llm) << "\n";
  out << "reflections: " << r.decision.reflections_used << "\n";
  out << "llm calls: " << r.calls.llm_calls;
  if (!r.calls.by_stage.empty()) {
    out << " (";
    bool first = true;
    for (const auto& [stage, n] : r.calls.by_stage) {
      out << (first ? "" : ", ") << stage << " " << n;
      first = false;
    }
    out << ")";
  }
  out << "\n";
  out << "retrievals: " << r.calls.retrievals << "\n";
  out << "trace:\n";
  for (const auto& f : r.decision.trace) out << "  " << f.rule << ": " << f.detail << "\n";
  for (const auto& e : r.events) out << "event: " << e << "\n";
}

void print_eval(const EvalReport& rep, std::ostream& out) {
  out << "questions: " << rep.completed << "/" << rep.total << (rep.complete ? "" : " (incomplete)")
      << "\n";
  if (rep.failed > 0) out << "failed: " << rep.failed << "\n";
  out << "Acc: " << fixed(rep.accuracy, 2) << "\n";
  out << "RR: " << fixed(rep.refusal_rate, 2) << "\n";
  if (rep.exact_match) out << "EM: " << fixed(*rep.exact_match, 2) << "\n";
  out << "avg calls: " << fixed(rep.avg_calls, 2) << "\n";
  if (rep.efficiency) out << "efficiency: " << fixed(*rep.efficiency, 2) << "\n";
  out << "reflection rate: " << fixed(rep.reflection_rate, 2) << "\n";
  out << "scenario  count  acc      FA   FI   FE   RA\n";
  for (Strategy gold : kAllStrategies) {
    const auto g = static_cast<std::size_t>(gold);
    const auto acc = rep.scenarios.accuracy(gold);
    out << std::left << std::setw(10) << to_string(gold) << std::setw(7) << rep.scenarios.counts[g]
        << std::setw(9) << (acc ? fixed(*acc, 2) : std::string("-"));
    for (Strategy pred : kAllStrategies) {
      out << std::setw(5) << rep.scenarios.matrix[g][static_cast<std::size_t>(pred)];
    }
    out << std::right << "\n";
  }
}

std::vector<double> read_axis(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) throw UsageError(std::string("grid file lacks '") + key + "'");
  if (!it->is_array()) throw UsageError(std::string("grid axis '") + key + "' must be an array");
  std::vector<double> out;
  for (const auto& v : *it) {
    if (!v.is_number()) throw UsageError(std::string("grid axis '") + key + "' must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

/// {"weights": {"sparse": [...], "dense": [...], "late": [...]} | "weight_step": s,
///  "alpha": [...], "beta": [...] | "threshold_step": s}
std::pair<WeightGrid, ThresholdGrid> load_grid_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open grid file: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("grid file " + path + " is not valid JSON: " + e.what());
  }
  WeightGrid w;
  if (auto step = doc.find("weight_step"); step != doc.end()) {
    w = sweep_weight_grid(step->get<double>());
  } else {
    auto it = doc.find("weights");
    if (it == doc.end() || !it->is_object()) throw UsageError("grid file needs 'weights' or 'weight_step'");
    w = {read_axis(*it, "sparse"), read_axis(*it, "dense"), read_axis(*it, "late")};
  }
  ThresholdGrid t;
  if (auto step = doc.find("threshold_step"); step != doc.end()) {
    t = sweep_threshold_grid(step->get<double>());
  } else {
    t = {read_axis(doc, "alpha"), read_axis(doc, "beta")};
  }
  bool any_valid = false;
  for (double a : t.alpha) {
    for (double b : t.beta) any_valid = any_valid || (a > 0.0 && b > a);
  }
  if (!any_valid) throw UsageError("grid file has no cell with beta > alpha > 0");
  return {w, t};
}

json read_raw_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return json::parse(in, nullptr, true, true);
}

json default_config_json() {
  return {{"llm",
           {{"kind", "openai"},
            {"base_url", "https://api.openai.com/v1"},
            {"api_key", "${OPENAI_API_KEY}"},
            {"model", "gpt-3.5-turbo"},
            {"timeout_s", 60},
            {"max_attempts", 3}}},
          {"allocator", {{"mode", "icl"}, {"demonstrations", "demonstrations.jsonl"}}},
          {"embedder", {{"kind", "hashing"}, {"dense_dim", 256}, {"token_dim", 64}}},
          {"index", "index.jsonl"},
          {"workers", 4},
          {"pipeline", to_json(PipelineConfig{})}};
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Trust-aware routing between internal and retrieved knowledge", "trustroute"};
  app.require_subcommand(1);
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Errors only");

  std::string config_path;
  std::string mock_script;
  std::string dataset;
  std::string out_path;
  std::size_t workers = 0;
  bool as_json = false;
  bool no_timing = false;

  auto* ask = app.add_subcommand("ask", "Answer one question and show the decision");
  std::string question_text;
  std::string record_path;
  std::string record_id;
  std::string k_int;
  std::string k_ext;
  std::string options_text;
  ask->add_option("question", question_text, "Question text");
  ask->add_option("--record", record_path, "TRD JSON-lines file to take the question from");
  ask->add_option("--id", record_id, "Record id within --record (default: first)");
  ask->add_option("--internal", k_int, "Internal knowledge text");
  ask->add_option("--external", k_ext, "External knowledge text");
  ask->add_option("--options", options_text, "Options, e.g. \"A. x B. y C. I don't know\"");

  auto* eval = app.add_subcommand("eval", "Evaluate a TRD dataset");
  std::string csv_path;
  eval->add_option("--csv", csv_path, "Write the confusion matrix as CSV");

  auto* grid = app.add_subcommand("grid", "Grid-search scorer weights and thresholds");
  std::string grid_path;
  grid->add_option("--grid", grid_path, "Grid definition JSON")->required();

  auto* index = app.add_subcommand("index", "Chunk and embed a corpus directory");
  std::string corpus_dir;
  std::size_t chunk_tokens = kDefaultChunkTokens;
  index->add_option("corpus", corpus_dir, "Directory of .txt / .jsonl documents")->required();
  index->add_option("--chunk-tokens", chunk_tokens, "Maximum tokens per chunk");

  auto* config_cmd = app.add_subcommand("config", "Show or create configuration");
  config_cmd->require_subcommand(1);
  auto* config_show = config_cmd->add_subcommand("show", "Print the resolved config (secrets redacted)");
  auto* config_init = config_cmd->add_subcommand("init", "Write a starter config and prompt templates");

  for (auto* cmd : {ask, eval, grid}) {
    cmd->add_option("--config", config_path, "Config file")->required();
    cmd->add_option("--mock-script", mock_script, "Scripted LLM responses (replaces the configured LLM)");
    cmd->add_option("--workers", workers, "Concurrent questions");
  }
  for (auto* cmd : {eval, grid}) cmd->add_option("--dataset", dataset, "TRD JSON-lines dataset")->required();
  for (auto* cmd : {ask, eval}) {
    cmd->add_flag("--json", as_json, "Print machine-readable JSON");
    cmd->add_flag("--no-timing", no_timing, "Omit wall-clock fields");
  }
  eval->add_option("--out", out_path, "Write the metrics report here");
  grid->add_option("--out", out_path, "Write the best config here");
  index->add_option("--out", out_path, "Index file to write")->required();
  index->add_option("--config", config_path, "Config file (for the embedder)");
  config_show->add_option("--config", config_path, "Config file")->required();
  config_init->add_option("--out", out_path, "Directory to create")->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_code::kOk : exit_code::kUsage;
  }

  LoggerScope logging(err, verbose ? spdlog::level::debug
                                   : (quiet ? spdlog::level::err : spdlog::level::warn));
  try {
    if (*index) {
      EmbedderConfig ec;
      if (!config_path.empty()) ec = load_config(config_path).embedder;
      auto embedder = make_embedder(ec);
      auto docs = load_corpus_dir(corpus_dir);
      auto idx = build_index(docs, *embedder, chunk_tokens);
      save_index(idx, out_path);
      out << "indexed " << docs.size() << " documents into " << idx.size() << " chunks: " << out_path
          << "\n";
      return exit_code::kOk;
    }

    if (*config_cmd) {
      if (*config_show) {
        out << load_config(config_path).to_json().dump(2) << "\n";
        return exit_code::kOk;
      }
      fs::create_directories(out_path);
      const auto cfg = (fs::path(out_path) / "config.json").string();
      if (fs::exists(cfg)) throw UsageError(cfg + " already exists");
      write_text_file(cfg, default_config_json().dump(2) + "\n");
      write_prompts(default_prompts(), (fs::path(out_path) / "prompts").string());
      out << "wrote " << cfg << "\n";
      return exit_code::kOk;
    }

    auto config = load_config(config_path);
    if (workers > 0) config.workers = workers;
    auto runtime = build_runtime(config, mock_script);
    const auto providers = runtime->providers();

    if (*ask) {
      PipelineInput input;
      if (!record_path.empty()) {
        auto records = load_dataset(record_path);
        const TrdRecord* chosen = &records.front();
        if (!record_id.empty()) {
          chosen = nullptr;
          for (const auto& r : records) {
            if (r.question.id == record_id) chosen = &r;
          }
          if (!chosen) throw UsageError("no record with id " + record_id + " in " + record_path);
        }
        input = PipelineInput::from_record(*chosen);
      } else {
        if (question_text.empty()) throw UsageError("ask needs a question or --record");
        input.question.id = "cli";
        input.question.text = question_text;
        if (!options_text.empty()) input.question.options = parse_options_string(options_text);
        input.k_int = k_int;
        input.k_ext = k_ext;
      }
      auto rec = run(input, config.pipeline, providers);
      if (as_json) {
        out << to_json(rec, !no_timing).dump(2) << "\n";
      } else {
        print_run(rec, out);
      }
      return exit_code::kOk;
    }

    const auto records = load_dataset(dataset);

    if (*eval) {
      SigintGuard sigint;
      EvalOptions opts;
      opts.workers = config.workers;
      opts.cancel = &g_interrupted;
      auto rep = evaluate(records, config.pipeline, providers, opts);
      auto report = rep.to_json(true, !no_timing);
      report["config"] = config.to_json();
      report["dataset"] = dataset;
      if (!out_path.empty()) write_text_file(out_path, report.dump(2) + "\n");
      if (!csv_path.empty()) write_text_file(csv_path, rep.scenarios.to_csv());
      if (as_json) {
        out << report.dump(2) << "\n";
      } else {
        print_eval(rep, out);
      }
      if (!rep.complete) {
        err << "interrupted: report covers " << rep.completed << " of " << rep.total << " questions\n";
        return exit_code::kRuntime;
      }
      return exit_code::kOk;
    }

    // grid
    auto [wgrid, tgrid] = load_grid_file(grid_path);
    auto result = grid_search(records, wgrid, tgrid, config.pipeline, providers, config.workers);
    const auto& best = result.best;
    out << "cells evaluated: " << result.cells.size() << " (skipped " << result.skipped_invalid
        << " with beta <= alpha)\n";
    out << "best: weights=(" << fixed(best.weights.sparse) << ", " << fixed(best.weights.dense) << ", "
        << fixed(best.weights.late) << ") alpha=" << fixed(best.thresholds.alpha, 2)
        << " beta=" << fixed(best.thresholds.beta, 2) << " acc=" << fixed(best.accuracy(), 2)
        << " avg_calls=" << fixed(best.avg_calls(), 2) << "\n";
    if (!out_path.empty()) {
      json raw = read_raw_config(config_path);
      json& p = raw["pipeline"];
      if (!p.is_object()) p = json::object();
      p["weights"] = {{"sparse", best.weights.sparse}, {"dense", best.weights.dense}, {"late", best.weights.late}};
      p["alpha"] = best.thresholds.alpha;
      p["beta"] = best.thresholds.beta;
      raw["grid_search"] = to_json(result)["best"];
      write_text_file(out_path, raw.dump(2) + "\n");
    }
    return exit_code::kOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return exit_code::kUsage;
  } catch (const DatasetError& e) {
    err << "dataset error: " << e.what() << "\n";
    return exit_code::kUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kUsage;
  } catch (const ContractError& e) {
    err << "invalid input: " << e.what() << "\n";
    return exit_code::kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kRuntime;
  }
}

}  // namespace trustroute
