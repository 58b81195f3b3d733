#include "mvlens/cli.hpp"

#include <charconv>
#include <functional>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <vector>

#include <CLI11.hpp>

#include "mvlens/embedstore.hpp"
#include "mvlens/error.hpp"
#include "mvlens/lengthbias.hpp"
#include "mvlens/metrics.hpp"
#include "mvlens/random.hpp"
#include "mvlens/report_writer.hpp"
#include "mvlens/scoring.hpp"
#include "mvlens/simdist.hpp"
#include "mvlens/synthlab.hpp"
#include "mvlens/trec.hpp"

namespace mvlens::cli {
namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A store given either as a directory or as an explicit manifest/blob pair.
struct StoreArg {
  explicit StoreArg(std::string store_name) : name(std::move(store_name)) {}

  std::string name;
  std::string dir;
  std::string manifest;
  std::string vectors;

  void add_to(CLI::App* app) {
    app->add_option("--" + name, dir,
                    "Directory holding manifest.json and vectors.bin of the " + name + " store");
    app->add_option("--" + name + "-manifest", manifest, "Manifest of the " + name + " store");
    app->add_option("--" + name + "-vectors", vectors, "Vector blob of the " + name + " store");
  }

  StorePaths resolve() const {
    if (!dir.empty()) {
      if (!manifest.empty() || !vectors.empty()) {
        throw UsageError("give either --" + name + " or --" + name + "-manifest/--" + name +
                         "-vectors, not both");
      }
      return store_paths(dir);
    }
    if (manifest.empty() || vectors.empty()) {
      throw UsageError("the " + name + " store needs --" + name + " or both --" + name +
                       "-manifest and --" + name + "-vectors");
    }
    return {manifest, vectors};
  }

  EmbeddingStore open() const {
    const auto p = resolve();
    return EmbeddingStore::open(p.manifest, p.vectors);
  }

  Json config() const {
    const auto p = resolve();
    return {{"manifest", p.manifest.string()}, {"vectors", p.vectors.string()}};
  }
};

struct PermutationArgs {
  std::size_t n_bins = 10;
  std::size_t n_permutations = 1000;
  double ci_level = 0.9;
  std::uint64_t seed = 0;

  void add_to(CLI::App* app) {
    app->add_option("--n-bins", n_bins, "Equal-count chunk length bins")->capture_default_str();
    app->add_option("--n-permutations", n_permutations, "Permutation trials")
        ->capture_default_str();
    app->add_option("--ci-level", ci_level, "Two-sided baseline interval level")
        ->capture_default_str();
    app->add_option("--seed", seed, "Root random seed")->capture_default_str();
  }

  Json config() const {
    return {{"n_bins", n_bins},
            {"n_permutations", n_permutations},
            {"ci_level", ci_level},
            {"seed", seed}};
  }
};

void add_synth_options(CLI::App* app, SynthConfig& c, std::string& extension_mode) {
  app->add_option("--dim", c.dim, "Embedding dimension")->capture_default_str();
  app->add_option("--n-chunks", c.n_chunks, "Corpus size")->capture_default_str();
  app->add_option("--n-queries", c.n_queries, "Number of queries")->capture_default_str();
  app->add_option("--query-tokens", c.query_tokens, "Rows per query")->capture_default_str();
  app->add_option("--length-min", c.length_min, "Shortest chunk (tokens)")->capture_default_str();
  app->add_option("--length-max", c.length_max, "Longest chunk (tokens)")->capture_default_str();
  app->add_option("--relevance-signal", c.relevance_signal,
                  "Cosine between planted rows and their query row")
      ->capture_default_str();
  app->add_option("--noise-scale", c.noise_scale, "Jitter on planted and resampled rows")
      ->capture_default_str();
  app->add_option("--seed", c.seed, "Root random seed")->capture_default_str();
  app->add_option("--extension-mode", extension_mode, "causal_prefix or bidirectional_resample")
      ->capture_default_str();
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find(',', start);
    const auto item = text.substr(start, end == std::string::npos ? std::string::npos : end - start);
    if (!item.empty()) out.push_back(item);
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

std::pair<std::int64_t, std::int64_t> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  std::int64_t lo = 0, hi = 0;
  auto parse = [](std::string_view s, std::int64_t& v) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() && p == s.data() + s.size();
  };
  if (colon == std::string::npos ||
      !parse(std::string_view(text).substr(0, colon), lo) ||
      !parse(std::string_view(text).substr(colon + 1), hi)) {
    throw UsageError("length range must look like MIN:MAX, got '" + text + "'");
  }
  return {lo, hi};
}

void require_corpus_coverage(const RetrievalRun& run, const EmbeddingStore& corpus) {
  if (run.chunk_ids().size() != corpus.size() || !run.is_full()) {
    throw Error(ErrorCode::TruncatedRun,
                "the run must rank every corpus chunk for every query (retrieve with --k 0)");
  }
}

void report_error(std::ostream& err, std::string_view name, std::string_view message) {
  err << Json{{"error", std::string(name)}, {"message", std::string(message)}}.dump() << '\n';
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exact late-interaction retrieval and length-bias diagnostics", "mvlens"};
  app.require_subcommand(1);
  std::function<int()> action;
  std::size_t threads = 0;

  // ---- ingest ----
  auto* ingest = app.add_subcommand("ingest", "Open and validate an embedding store");
  std::string manifest_path, vectors_path;
  bool verify = false;
  ingest->add_option("--manifest", manifest_path, "Store manifest (manifest.json)")->required();
  ingest->add_option("--vectors", vectors_path, "Vector blob (vectors.bin)")->required();
  ingest->add_flag("--verify", verify, "Scan every vector for finiteness and unit norm");
  ingest->callback([&] {
    action = [&] {
      const auto store = EmbeddingStore::open(manifest_path, vectors_path);
      if (verify) store.verify();
      std::size_t rows = 0;
      for (const auto& item : store.manifest().items) rows += item.n_vectors;
      out << Json{{"status", "ok"},
                  {"items", store.size()},
                  {"vectors", rows},
                  {"dim", store.dim()},
                  {"normalized", store.normalized()},
                  {"verified", verify}}
                 .dump()
          << '\n';
      return kExitOk;
    };
  });

  // ---- retrieve ----
  auto* retrieve_cmd = app.add_subcommand("retrieve", "Exhaustive MaxSim retrieval to a TREC run");
  StoreArg queries_arg{"queries"}, corpus_arg{"corpus"};
  std::size_t k = 0;
  std::string run_out, tag = "mvlens";
  queries_arg.add_to(retrieve_cmd);
  corpus_arg.add_to(retrieve_cmd);
  retrieve_cmd->add_option("--k", k, "Keep the top k per query (0 = full ranking)")
      ->capture_default_str();
  retrieve_cmd->add_option("--out", run_out, "Run file to write")->required();
  retrieve_cmd->add_option("--tag", tag, "Run tag column")->capture_default_str();
  retrieve_cmd->add_option("--threads", threads, "Worker threads (0 = all cores)");
  retrieve_cmd->callback([&] {
    action = [&] {
      const Json config = {{"queries", queries_arg.config()},
                           {"corpus", corpus_arg.config()},
                           {"k", k},
                           {"tag", tag}};
      const auto queries = queries_arg.open();
      const auto corpus = corpus_arg.open();
      const auto result = mvlens::retrieve(queries, corpus, k, {threads});
      write_run(run_out, result, tag);
      Json meta = envelope("retrieve", config);
      meta["result"] = {{"queries", result.lists().size()}, {"chunks", corpus.size()}};
      write_text(run_out + ".meta.json", meta.dump(2) + "\n");
      return kExitOk;
    };
  });

  // ---- evaluate ----
  auto* evaluate = app.add_subcommand("evaluate", "nDCG@k of a run against qrels");
  std::string run_path, qrels_path, out_prefix;
  std::size_t eval_k = 10;
  evaluate->add_option("--run", run_path, "TREC run file")->required();
  evaluate->add_option("--qrels", qrels_path, "TREC qrels file")->required();
  evaluate->add_option("--k", eval_k, "nDCG cutoff")->capture_default_str();
  evaluate->add_option("--out", out_prefix, "Output prefix for .json and .csv")->required();
  evaluate->callback([&] {
    action = [&] {
      const Json config = {{"run", run_path}, {"qrels", qrels_path}, {"k", eval_k}};
      const auto report = evaluate_run(read_run(run_path), read_qrels(qrels_path), eval_k);
      Json j = envelope("evaluate", config);
      j["result"] = to_json(report);
      write_outputs(out_prefix, j, csv_preamble("evaluate", config) + to_csv(report));
      out << Json{{"mean_ndcg", report.mean}, {"n_evaluated", report.per_query.size()}}.dump()
          << '\n';
      return kExitOk;
    };
  });

  // ---- bias ----
  auto* bias = app.add_subcommand("bias", "Length-bias analyses");
  bias->require_subcommand(1);
  StoreArg bias_corpus{"corpus"};
  std::string fp_mode_text = "above-positive";
  std::size_t n_quantiles = 10, harm_k = 10;
  PermutationArgs perm;

  auto* fp_length = bias->add_subcommand("fp-length", "False-positive vs relevant chunk length");
  fp_length->add_option("--run", run_path, "Full TREC run")->required();
  fp_length->add_option("--qrels", qrels_path, "TREC qrels")->required();
  bias_corpus.add_to(fp_length);
  fp_length->add_option("--n-quantiles", n_quantiles, "Query quantiles")->capture_default_str();
  fp_length->add_option("--fp-mode", fp_mode_text, "above-positive or topk:<k>")
      ->capture_default_str();
  fp_length->add_option("--out", out_prefix, "Output prefix")->required();
  fp_length->callback([&] {
    action = [&] {
      const auto mode = FpMode::parse(fp_mode_text);
      const Json config = {{"run", run_path},
                           {"qrels", qrels_path},
                           {"corpus", bias_corpus.config()},
                           {"n_quantiles", n_quantiles},
                           {"fp_mode", mode.to_string()}};
      const auto corpus = bias_corpus.open();
      const auto run_file = read_run(run_path);
      require_corpus_coverage(run_file, corpus);
      const auto report =
          fp_length_report(run_file, read_qrels(qrels_path), corpus, n_quantiles, mode);
      Json j = envelope("bias fp-length", config);
      j["result"] = to_json(report);
      write_outputs(out_prefix, j, csv_preamble("bias fp-length", config) + to_csv(report));
      return kExitOk;
    };
  });

  auto* harm = bias->add_subcommand("harm", "nDCG harm per chunk-length bin vs permutation null");
  harm->add_option("--run", run_path, "Full TREC run")->required();
  harm->add_option("--qrels", qrels_path, "TREC qrels")->required();
  bias_corpus.add_to(harm);
  harm->add_option("--k", harm_k, "nDCG cutoff")->capture_default_str();
  perm.add_to(harm);
  harm->add_option("--threads", threads, "Worker threads (0 = all cores)");
  harm->add_option("--out", out_prefix, "Output prefix")->required();
  harm->callback([&] {
    action = [&] {
      Json config = {{"run", run_path},
                     {"qrels", qrels_path},
                     {"corpus", bias_corpus.config()},
                     {"k", harm_k}};
      config.update(perm.config());
      const auto corpus = bias_corpus.open();
      const auto run_file = read_run(run_path);
      require_corpus_coverage(run_file, corpus);
      const auto harm_map = chunk_harm(run_file, read_qrels(qrels_path), harm_k, threads);
      const auto binning = corpus_length_bins(corpus, perm.n_bins);
      const auto report = harm_report(harm_map, binning, perm.n_permutations, perm.ci_level,
                                      derive_seed(perm.seed, "bias-harm"), threads);
      Json j = envelope("bias harm", config);
      j["result"] = to_json(report);
      write_outputs(out_prefix, j, csv_preamble("bias harm", config) + to_csv(report));
      return kExitOk;
    };
  });

  auto* errors = bias->add_subcommand("error-counts",
                                      "False-positive counts per chunk-length bin vs null");
  errors->add_option("--run", run_path, "Full TREC run")->required();
  errors->add_option("--qrels", qrels_path, "TREC qrels")->required();
  bias_corpus.add_to(errors);
  perm.add_to(errors);
  errors->add_option("--fp-mode", fp_mode_text, "above-positive or topk:<k>")
      ->capture_default_str();
  errors->add_option("--threads", threads, "Worker threads (0 = all cores)");
  errors->add_option("--out", out_prefix, "Output prefix")->required();
  errors->callback([&] {
    action = [&] {
      const auto mode = FpMode::parse(fp_mode_text);
      Json config = {{"run", run_path},
                     {"qrels", qrels_path},
                     {"corpus", bias_corpus.config()},
                     {"fp_mode", mode.to_string()}};
      config.update(perm.config());
      const auto corpus = bias_corpus.open();
      const auto run_file = read_run(run_path);
      require_corpus_coverage(run_file, corpus);
      const auto binning = corpus_length_bins(corpus, perm.n_bins);
      const auto report = error_count_report(
          run_file, read_qrels(qrels_path), binning, perm.n_permutations, perm.ci_level,
          derive_seed(perm.seed, "bias-error-counts"), mode, threads);
      Json j = envelope("bias error-counts", config);
      j["result"] = to_json(report);
      write_outputs(out_prefix, j, csv_preamble("bias error-counts", config) + to_csv(report));
      return kExitOk;
    };
  });

  // ---- simdist ----
  auto* simdist = app.add_subcommand("simdist", "Sorted document-token similarity curves");
  StoreArg sim_queries{"queries"}, sim_corpus{"corpus"};
  std::string sim_mode = "failed";
  std::size_t cutoff = 10, grid_size = 100;
  simdist->add_option("--run", run_path, "Full TREC run")->required();
  simdist->add_option("--qrels", qrels_path, "TREC qrels")->required();
  sim_queries.add_to(simdist);
  sim_corpus.add_to(simdist);
  simdist->add_option("--mode", sim_mode, "failed or success")->capture_default_str();
  simdist->add_option("--cutoff", cutoff, "Failure cutoff rank")->capture_default_str();
  simdist->add_option("--grid-size", grid_size, "Points on the fraction axis")
      ->capture_default_str();
  simdist->add_option("--threads", threads, "Worker threads (0 = all cores)");
  simdist->add_option("--out", out_prefix, "Output prefix")->required();
  simdist->callback([&] {
    action = [&] {
      const auto mode = parse_sim_mode(sim_mode);
      const Json config = {{"run", run_path},
                           {"qrels", qrels_path},
                           {"queries", sim_queries.config()},
                           {"corpus", sim_corpus.config()},
                           {"mode", std::string(mode_name(mode))},
                           {"cutoff", cutoff},
                           {"grid_size", grid_size}};
      const auto report =
          simdist_report(read_run(run_path), read_qrels(qrels_path), sim_queries.open(),
                         sim_corpus.open(), mode, cutoff, grid_size, threads);
      Json j = envelope("simdist", config);
      j["result"] = to_json(report);
      write_outputs(out_prefix, j, csv_preamble("simdist", config) + to_csv(report));
      return kExitOk;
    };
  });

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "Synthetic controlled experiments");
  synth->require_subcommand(1);
  SynthConfig synth_config;
  std::string extension_mode = "causal_prefix";

  auto* generate = synth->add_subcommand("generate", "Write a synthetic corpus, queries and qrels");
  add_synth_options(generate, synth_config, extension_mode);
  std::string out_dir;
  generate->add_option("--out", out_dir, "Output directory")->required();
  generate->callback([&] {
    action = [&] {
      synth_config.extension_mode = parse_extension_mode(extension_mode);
      const auto data = generate_corpus(synth_config);
      const std::filesystem::path dir(out_dir);
      write_store(data.corpus, dir / "corpus");
      write_store(data.queries, dir / "queries");
      write_qrels(dir / "qrels.txt", data.qrels);
      write_text(dir / "synth.json", envelope("synth generate", to_json(synth_config)).dump(2) + "\n");
      return kExitOk;
    };
  });

  auto* mono = synth->add_subcommand("monotonicity",
                                     "Check MaxSim never drops under causal-prefix extension");
  MonotonicityConfig mono_config;
  mono->add_option("--trials", mono_config.trials, "Random instances")->capture_default_str();
  mono->add_option("--seed", mono_config.seed, "Root random seed")->capture_default_str();
  mono->add_option("--max-query-rows", mono_config.max_query_rows)->capture_default_str();
  mono->add_option("--max-chunk-rows", mono_config.max_chunk_rows)->capture_default_str();
  mono->add_option("--max-dim", mono_config.max_dim)->capture_default_str();
  mono->add_option("--max-extra", mono_config.max_extra)->capture_default_str();
  mono->add_option("--noise-scale", mono_config.noise_scale,
                   "Perturbation of existing rows under bidirectional resampling")
      ->capture_default_str();
  mono->add_option("--out", out_prefix, "Optional output prefix");
  mono->callback([&] {
    action = [&] {
      const Json config = {{"trials", mono_config.trials},
                           {"seed", mono_config.seed},
                           {"max_query_rows", mono_config.max_query_rows},
                           {"max_chunk_rows", mono_config.max_chunk_rows},
                           {"max_dim", mono_config.max_dim},
                           {"max_extra", mono_config.max_extra},
                           {"noise_scale", mono_config.noise_scale}};
      const auto result = monotonicity_check(mono_config);
      Json j = envelope("synth monotonicity", config);
      j["result"] = to_json(result);
      if (!out_prefix.empty()) {
        std::string csv = csv_preamble("synth monotonicity", config) +
                          "trials,causal_decreases,bidirectional_decreases,min_causal_delta,"
                          "min_bidirectional_delta\n" +
                          std::to_string(result.trials) + ',' +
                          std::to_string(result.causal_decreases) + ',' +
                          std::to_string(result.bidirectional_decreases) + ',' +
                          format_double(result.min_causal_delta) + ',' +
                          format_double(result.min_bidirectional_delta) + '\n';
        write_outputs(out_prefix, j, csv);
      }
      out << j["result"].dump() << '\n';
      if (result.causal_decreases > 0) {
        report_error(err, "MonotonicityViolation",
                     std::to_string(result.causal_decreases) +
                         " causal-prefix extensions decreased MaxSim");
        return kExitAnalysis;
      }
      return kExitOk;
    };
  });

  auto* sweep = synth->add_subcommand("sweep", "Harm-by-length sweep over synthetic corpora");
  std::string ranges = "8:128", modes = "causal_prefix";
  bool no_single = false;
  SweepOptions sweep_options;
  add_synth_options(sweep, synth_config, extension_mode);
  sweep->add_option("--length-ranges", ranges, "Comma-separated MIN:MAX ranges")
      ->capture_default_str();
  sweep->add_option("--extension-modes", modes, "Comma-separated extension modes")
      ->capture_default_str();
  sweep->add_option("--k", sweep_options.k, "nDCG cutoff")->capture_default_str();
  sweep->add_option("--n-bins", sweep_options.n_bins)->capture_default_str();
  sweep->add_option("--n-permutations", sweep_options.n_permutations)->capture_default_str();
  sweep->add_option("--ci-level", sweep_options.ci_level)->capture_default_str();
  sweep->add_flag("--no-single-vector", no_single, "Skip the mean-pooled control");
  sweep->add_option("--threads", threads, "Worker threads (0 = all cores)");
  sweep->add_option("--out", out_prefix, "Output prefix")->required();
  sweep->callback([&] {
    action = [&] {
      sweep_options.single_vector_control = !no_single;
      sweep_options.threads = threads;
      std::vector<SynthConfig> grid;
      Json grid_json = Json::array();
      for (const auto& range : split_list(ranges)) {
        for (const auto& mode : split_list(modes)) {
          SynthConfig c = synth_config;
          std::tie(c.length_min, c.length_max) = parse_range(range);
          c.extension_mode = parse_extension_mode(mode);
          grid.push_back(c);
          grid_json.push_back(to_json(c));
        }
      }
      const Json config = {{"grid", grid_json},
                           {"k", sweep_options.k},
                           {"n_bins", sweep_options.n_bins},
                           {"n_permutations", sweep_options.n_permutations},
                           {"ci_level", sweep_options.ci_level},
                           {"single_vector_control", sweep_options.single_vector_control}};
      const auto rows = bias_sweep(grid, sweep_options);
      Json j = envelope("synth sweep", config);
      j["result"] = to_json(rows);
      write_outputs(out_prefix, j, csv_preamble("synth sweep", config) + to_csv(rows));
      return kExitOk;
    };
  });

  std::vector<std::string> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.emplace_back("mvlens");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    return action ? action() : kExitUsage;
  } catch (const UsageError& e) {
    err << "mvlens: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    report_error(err, error_name(e.code()), e.what());
    return is_data_error(e.code()) ? kExitData : kExitAnalysis;
  } catch (const std::exception& e) {
    report_error(err, "Io", e.what());
    return kExitData;
  }
}

}  // namespace mvlens::cli
