#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "manifest.hpp"
#include "xmusic/checkpoint.hpp"
#include "xmusic/dataset.hpp"
#include "xmusic/error.hpp"
#include "xmusic/event_io.hpp"
#include "xmusic/events.hpp"
#include "xmusic/generator.hpp"
#include "xmusic/metrics.hpp"
#include "xmusic/midi.hpp"
#include "xmusic/projection.hpp"
#include "xmusic/selector.hpp"
#include "xmusic/synthetic.hpp"
#include "xmusic/xprojector.hpp"

#ifndef XMUSIC_DATA_DIR
#define XMUSIC_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace xmusic;

namespace {

constexpr const char* kToolVersion = "1.0.0";
constexpr int kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitModel = 3;

// Raised for bad flag combinations found after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path) {
  const auto bytes = midi::read_file(path);
  return {bytes.begin(), bytes.end()};
}

void spit(const std::string& path, const std::string& text) {
  midi::write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

/// Re-raises module errors with the file they came from.
template <typename F>
auto with_file(const std::string& path, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.message());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidFeatures, path + ": " + e.what());
  }
}

json read_json(const std::string& path) {
  return with_file(path, [&] { return json::parse(slurp(path)); });
}

bool is_event_file(const std::string& path) {
  const auto ext = fs::path(path).extension().string();
  return ext == ".jsonl" || ext == ".xmev";
}

EventSequence read_events(const std::string& path) {
  return with_file(path, [&] {
    if (fs::path(path).extension() == ".xmev") return event_io::from_binary(midi::read_file(path));
    return event_io::from_jsonl(slurp(path));
  });
}

void write_events(const std::string& path, const EventSequence& seq) {
  if (fs::path(path).extension() == ".xmev")
    midi::write_file(path, event_io::to_binary(seq));
  else
    spit(path, event_io::to_jsonl(seq));
}

Score read_score(const std::string& path) {
  if (is_event_file(path)) {
    const auto seq = read_events(path);
    return with_file(path, [&] { return decode(seq).score; });
  }
  return with_file(path, [&] { return midi::parse_midi(midi::read_file(path)); });
}

/// MIDI files are quantized and encoded without labels; event files are read as is.
EventSequence read_sequence(const std::string& path) {
  if (is_event_file(path)) return read_events(path);
  const Score s = read_score(path);
  return with_file(path, [&] { return encode(quantize_score(s), std::nullopt, std::nullopt); });
}

/// Expands directories into their .mid/.midi files, sorted.
std::vector<std::string> expand_midi_inputs(const std::vector<std::string>& inputs) {
  std::vector<std::string> out;
  for (const auto& in : inputs) {
    if (!fs::is_directory(in)) {
      out.push_back(in);
      continue;
    }
    std::vector<std::string> found;
    for (const auto& e : fs::recursive_directory_iterator(in)) {
      const auto ext = e.path().extension().string();
      if (e.is_regular_file() && (ext == ".mid" || ext == ".midi")) found.push_back(e.path().string());
    }
    std::sort(found.begin(), found.end());
    out.insert(out.end(), found.begin(), found.end());
  }
  return out;
}

/// Flag value when given on the command line, else the config entry, else the default.
template <typename T>
T pick(const CLI::Option* flag, const T& flag_value, const json& config, const std::string& key, const T& fallback) {
  if (flag && flag->count() > 0) return flag_value;
  if (config.contains(key)) return config.at(key).get<T>();
  return fallback;
}

json merged(json base, const json& config, const std::string& section) {
  if (config.contains(section)) base.merge_patch(config.at(section));
  return base;
}

struct Globals {
  std::uint64_t seed = 1;
  std::string config_path;
  std::string manifest_path;
  int jobs = 1;
  json config = json::object();
  CLI::Option* seed_flag = nullptr;
};

struct Run {
  cli::RunManifest manifest;
  void input(const std::string& p) { manifest.inputs.push_back(p); }
  void output(const std::string& p) { manifest.outputs.push_back(p); }
};

spdlog::level::level_enum log_level_from_env() {
  const char* env = std::getenv("XMUSIC_LOG");
  if (!env || !*env) return spdlog::level::warn;
  return spdlog::level::from_str(env);
}

json version_json() {
  return {{"xmusic", kToolVersion},
          {"schemas",
           {{"xmusic.events", event_io::kJsonlVersion},
            {"XMEV (binary events)", event_io::kBinaryVersion},
            {"xmusic.prompt_features", xp::kFeaturesSchemaVersion},
            {"xmusic.percentile_tables", xp::kTablesSchemaVersion},
            {"xmusic.projection", projection_io::kSchemaVersion},
            {"xmusic.checkpoint", checkpoint::kVersion},
            {"xmusic.metrics_summary", 1},
            {"xmusic.corpus_stats", 1},
            {"xmusic.run_manifest", cli::kManifestVersion},
            {"xmusic.dedup_report", 1}}}};
}

std::optional<Emotion> parse_emotion(const std::string& s) {
  if (s.empty()) return std::nullopt;
  if (auto e = emotion_from_name(s)) return e;
  throw UsageError("unknown emotion '" + s + "'");
}

std::optional<Genre> parse_genre(const std::string& s) {
  if (s.empty()) return std::nullopt;
  if (auto g = genre_from_name(s)) return g;
  throw UsageError("unknown genre '" + s + "'");
}

xp::PercentileTables load_tables(const std::string& path) {
  return with_file(path, [&] { return xp::tables_from_json(read_json(path)); });
}

std::string default_tables_path() { return std::string(XMUSIC_DATA_DIR) + "/tables/default_percentiles.json"; }

HeadMask parse_mask(const std::string& s) {
  if (s == "quality") return HeadMask::quality_only();
  if (s == "emotion") return HeadMask::with_emotion();
  if (s == "all") return HeadMask::all();
  throw UsageError("--mask must be quality, emotion or all");
}

json selector_output_json(const SelectorOutput& o) {
  auto top = [](const auto& p) {
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
  };
  return {{"quality", o.quality_score()},
          {"emotion", std::string(name_of(static_cast<Emotion>(top(o.emotion))))},
          {"genre", std::string(name_of(static_cast<Genre>(top(o.genre))))}};
}

}  // namespace

int run(std::vector<std::string> args);

namespace {

int run_rerun(const std::string& manifest_path) {
  const auto m = cli::manifest_from_json(read_json(manifest_path));
  if (m.argv.empty()) throw Error(ErrorCode::InvalidFeatures, manifest_path + ": manifest has no argv");
  spdlog::info("rerunning '{}' from {}", m.subcommand, manifest_path);
  return run(m.argv);
}

}  // namespace

int run(std::vector<std::string> args) {
  CLI::App app{"xmusic: emotion- and genre-controlled symbolic music generation toolkit", "xmusic"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", [] { return version_json().dump(2); });

  Globals g;
  g.seed_flag = app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--config", g.config_path, "JSON config; flags override its entries");
  app.add_option("--manifest", g.manifest_path, "Where to write the run manifest");
  app.add_option("--jobs", g.jobs, "Parallel workers for batch subcommands")->check(CLI::PositiveNumber)->capture_default_str();

  Run run;
  std::function<void()> action;

  // tokenize
  auto* tok = app.add_subcommand("tokenize", "MIDI file to event sequence (.jsonl, or .xmev binary)");
  std::string tok_in, tok_out, tok_emotion, tok_genre;
  tok->add_option("input", tok_in, "MIDI file")->required();
  tok->add_option("-o,--output", tok_out, "Event file")->required();
  tok->add_option("--emotion", tok_emotion, "Emotion label");
  tok->add_option("--genre", tok_genre, "Genre label");
  tok->callback([&] {
    action = [&] {
      const auto emotion = parse_emotion(tok_emotion);
      const auto genre = parse_genre(tok_genre);
      run.input(tok_in);
      const Score s = read_score(tok_in);
      const auto seq = with_file(tok_in, [&] { return encode(quantize_score(s), emotion, genre); });
      write_events(tok_out, seq);
      run.output(tok_out);
      run.manifest.details = json{{"events", seq.size()}};
    };
  });

  // detokenize
  auto* detok = app.add_subcommand("detokenize", "Event sequence to MIDI file");
  std::string detok_in, detok_out;
  detok->add_option("input", detok_in, "Event file (.jsonl or .xmev)")->required();
  detok->add_option("-o,--output", detok_out, "MIDI file")->required();
  detok->callback([&] {
    action = [&] {
      run.input(detok_in);
      const auto seq = read_events(detok_in);
      const auto d = with_file(detok_in, [&] { return decode(seq); });
      midi::write_file(detok_out, midi::serialize_midi(d.score));
      run.output(detok_out);
    };
  });

  // parse-prompt
  auto* pp = app.add_subcommand("parse-prompt", "Prompt features to projection elements");
  std::string pp_features, pp_tables, pp_out;
  pp->add_option("--features", pp_features, "PromptFeatures JSON")->required();
  pp->add_option("--tables", pp_tables, "Percentile tables for video prompts (default: bundled tables)");
  pp->add_option("-o,--output", pp_out, "ProjectionElements JSON")->required();
  pp->callback([&] {
    action = [&] {
      run.input(pp_features);
      const auto f = with_file(pp_features, [&] { return xp::features_from_json(read_json(pp_features)); });
      std::optional<xp::PercentileTables> tables;
      if (f.modality == Modality::Video) {
        const std::string path = pp_tables.empty() ? default_tables_path() : pp_tables;
        tables = load_tables(path);
        run.input(path);
      }
      const auto elements = with_file(pp_features, [&] { return xp::project(f, tables ? &*tables : nullptr); });
      const auto problems = validate(elements, f.modality);
      if (!problems.empty()) throw Error(ErrorCode::InvalidElements, pp_features + ": " + problems.front());
      spit(pp_out, projection_io::to_json(elements, f.modality).dump(2) + "\n");
      run.output(pp_out);
    };
  });

  // build-tables
  auto* bt = app.add_subcommand("build-tables", "Percentile reference tables from video prompt features");
  std::vector<std::string> bt_in;
  std::string bt_out;
  bt->add_option("inputs", bt_in, "PromptFeatures JSON files")->required();
  bt->add_option("-o,--output", bt_out, "Tables JSON")->required();
  bt->callback([&] {
    action = [&] {
      std::vector<xp::PromptFeatures> corpus;
      for (const auto& p : bt_in) {
        corpus.push_back(with_file(p, [&] { return xp::features_from_json(read_json(p)); }));
        run.input(p);
      }
      spit(bt_out, xp::tables_to_json(xp::build_tables(corpus)).dump(2) + "\n");
      run.output(bt_out);
    };
  });

  // generate
  auto* gen = app.add_subcommand("generate", "Sample music under projection-element control");
  std::string gen_elements, gen_ckpt, gen_out, gen_events;
  int gen_batch = 1, gen_bars = 8;
  double gen_temp = 1.0, gen_theta = 0.5;
  bool gen_select = false;
  gen->add_option("--elements", gen_elements, "ProjectionElements JSON (default: unconditioned)");
  gen->add_option("--checkpoint", gen_ckpt, "Checkpoint holding a generator (and a selector for --select)")
      ->required()
      ;
  auto* gen_batch_flag = gen->add_option("--batch", gen_batch, "Candidates to sample")->check(CLI::PositiveNumber);
  auto* gen_bars_flag = gen->add_option("--max-bars", gen_bars, "Bar limit without rhythm control")->check(CLI::PositiveNumber);
  auto* gen_temp_flag = gen->add_option("--temperature", gen_temp, "Sampling temperature (> 0)");
  auto* gen_theta_flag = gen->add_option("--threshold", gen_theta, "Selector quality threshold")->check(CLI::Range(0.0, 1.0));
  gen->add_flag("--select", gen_select, "Keep the best candidate by selector quality");
  gen->add_option("-o,--output", gen_out, "MIDI file")->required();
  gen->add_option("--events", gen_events, "Also write the chosen event sequence here");
  gen->callback([&] {
    action = [&] {
      const json& c = g.config;
      const int batch = pick(gen_batch_flag, gen_batch, c, "batch", 1);
      const int bars = pick(gen_bars_flag, gen_bars, c, "max_bars", 8);
      const double temp = pick(gen_temp_flag, gen_temp, c, "temperature", 1.0);
      if (!(temp > 0)) throw UsageError("--temperature must be positive");
      ProjectionElements ctl;
      if (!gen_elements.empty()) {
        ctl = with_file(gen_elements, [&] { return projection_io::from_json(read_json(gen_elements)); });
        run.input(gen_elements);
      }
      run.input(gen_ckpt);
      const auto models = with_file(gen_ckpt, [&] { return checkpoint::load(gen_ckpt); });
      const Generator model = with_file(gen_ckpt, [&] { return checkpoint::generator_from(models); });
      std::vector<EventSequence> cands(static_cast<std::size_t>(batch));
      std::vector<std::exception_ptr> errs(cands.size());
      const long n = batch;
#pragma omp parallel for schedule(dynamic) num_threads(g.jobs)
      for (long i = 0; i < n; ++i) {
        try {
          cands[static_cast<std::size_t>(i)] = model.sample(ctl, {temp, bars, g.seed + static_cast<std::uint64_t>(i)});
        } catch (...) {
          errs[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
      for (auto& e : errs)
        if (e) std::rethrow_exception(e);
      std::size_t chosen = 0;
      json details = {{"batch", batch}, {"temperature", temp}, {"max_bars", bars}};
      if (gen_select) {
        const Selector sel = with_file(gen_ckpt, [&] { return checkpoint::selector_from(models); });
        const double theta = pick(gen_theta_flag, gen_theta, c, "threshold", sel.config().threshold);
        const auto outs = sel.score_batch(cands);
        std::vector<double> q;
        for (const auto& o : outs) q.push_back(o.quality_score());
        const auto best = select_best(q, theta);
        if (best) {
          chosen = *best;
        } else {
          chosen = static_cast<std::size_t>(std::max_element(q.begin(), q.end()) - q.begin());
          spdlog::warn("no candidate scored above {}; keeping the highest ({:.4f})", theta, q[chosen]);
        }
        details["threshold"] = theta;
        details["quality_scores"] = q;
        details["threshold_met"] = best.has_value();
      }
      details["chosen"] = chosen;
      const auto decoded = decode(cands[chosen]);
      midi::write_file(gen_out, midi::serialize_midi(decoded.score));
      run.output(gen_out);
      if (!gen_events.empty()) {
        write_events(gen_events, cands[chosen]);
        run.output(gen_events);
      }
      run.manifest.details = details;
    };
  });

  // select
  auto* selc = app.add_subcommand("select", "Score candidates with the selector and pick the best");
  std::vector<std::string> sel_in;
  std::string sel_ckpt, sel_out;
  double sel_theta = 0.5;
  selc->add_option("inputs", sel_in, "Event files or MIDI files")->required();
  selc->add_option("--checkpoint", sel_ckpt, "Checkpoint holding a selector")->required();
  auto* sel_theta_flag = selc->add_option("--threshold", sel_theta, "Quality threshold")->check(CLI::Range(0.0, 1.0));
  selc->add_option("-o,--output", sel_out, "Scores JSON")->required();
  selc->callback([&] {
    action = [&] {
      run.input(sel_ckpt);
      const auto models = with_file(sel_ckpt, [&] { return checkpoint::load(sel_ckpt); });
      const Selector sel = with_file(sel_ckpt, [&] { return checkpoint::selector_from(models); });
      const double theta = pick(sel_theta_flag, sel_theta, g.config, "threshold", sel.config().threshold);
      std::vector<EventSequence> seqs;
      for (const auto& p : sel_in) {
        seqs.push_back(read_sequence(p));
        run.input(p);
      }
      const auto outs = sel.score_batch(seqs);
      std::vector<double> q;
      json rows = json::array();
      for (std::size_t i = 0; i < outs.size(); ++i) {
        q.push_back(outs[i].quality_score());
        auto row = selector_output_json(outs[i]);
        row["path"] = sel_in[i];
        rows.push_back(row);
      }
      const auto best = select_best(q, theta);
      spit(sel_out, json{{"threshold", theta}, {"candidates", rows}, {"selected", best ? json(sel_in[*best]) : json(nullptr)}}
                            .dump(2) +
                        "\n");
      run.output(sel_out);
    };
  });

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Objective metrics per file and for the corpus");
  std::vector<std::string> ev_in;
  std::string ev_csv, ev_json;
  ev->add_option("inputs", ev_in, "MIDI files, event files or directories")->required();
  ev->add_option("--csv", ev_csv, "Per-file metrics CSV")->required();
  ev->add_option("--summary", ev_json, "Corpus summary JSON")->required();
  ev->callback([&] {
    action = [&] {
      const auto files = expand_midi_inputs(ev_in);
      std::vector<metrics::MetricReport> reports(files.size());
      const long n = static_cast<long>(files.size());
#pragma omp parallel for schedule(dynamic) num_threads(g.jobs)
      for (long i = 0; i < n; ++i) {
        const auto& path = files[static_cast<std::size_t>(i)];
        try {
          reports[static_cast<std::size_t>(i)] = metrics::evaluate(read_score(path), path);
        } catch (const std::exception& e) {
          reports[static_cast<std::size_t>(i)].name = path;
          reports[static_cast<std::size_t>(i)].errors.push_back(e.what());
        }
      }
      json failures = json::array();
      for (const auto& r : reports) {
        run.input(r.name);
        for (const auto& e : r.errors) failures.push_back({{"path", r.name}, {"error", e}});
      }
      spit(ev_csv, metrics::to_csv(reports));
      auto summary = metrics::to_json(metrics::summarize(reports));
      summary["errors"] = failures;
      spit(ev_json, summary.dump(2) + "\n");
      run.output(ev_csv);
      run.output(ev_json);
    };
  });

  // dataset
  auto* ds = app.add_subcommand("dataset", "Corpus deduplication and statistics");
  ds->require_subcommand(1);
  auto* dd = ds->add_subcommand("dedup", "Exact then pitch-profile similarity deduplication");
  std::vector<std::string> dd_in;
  std::string dd_out, dd_labels;
  double dd_theta = dataset::kDefaultSimilarityThreshold;
  bool dd_md5 = false;
  dd->add_option("inputs", dd_in, "MIDI files or directories")->required();
  auto* dd_theta_flag = dd->add_option("--threshold", dd_theta, "Cosine threshold in (0, 1]");
  dd->add_option("--labels", dd_labels, "Labels CSV (path,emotion,genre)");
  dd->add_flag("--md5", dd_md5, "Hash with MD5 instead of SHA-256");
  dd->add_option("-o,--output", dd_out, "Report JSON")->required();
  dd->callback([&] {
    action = [&] {
      const double theta = pick(dd_theta_flag, dd_theta, g.config, "threshold", dataset::kDefaultSimilarityThreshold);
      const auto labels = dd_labels.empty() ? dataset::LabelMap{} : with_file(dd_labels, [&] { return dataset::read_labels_csv(dd_labels); });
      const auto files = expand_midi_inputs(dd_in);
      const auto idx = dataset::index_files(files, labels, dd_md5 ? dataset::HashAlgorithm::Md5 : dataset::HashAlgorithm::Sha256, g.jobs);
      const auto exact = dataset::dedup_exact(idx.entries);
      const auto sim = dataset::dedup_similarity(exact.kept, theta);
      json jx = json::array(), js = json::array(), jf = json::array(), kept = json::array();
      for (const auto& [d, k] : exact.dropped) jx.push_back({{"path", d}, {"duplicate_of", k}});
      for (const auto& p : sim.dropped) js.push_back({{"path", p.dropped}, {"similar_to", p.kept}, {"cosine", p.cosine}});
      for (const auto& f : idx.failures) jf.push_back({{"path", f.path}, {"error", f.error}});
      std::vector<std::string> kept_paths;
      for (const auto& e : sim.kept) kept_paths.push_back(e.path);
      std::sort(kept_paths.begin(), kept_paths.end());
      const json report = {{"format", "xmusic.dedup_report"},
                           {"version", 1},
                           {"hash", dd_md5 ? "md5" : "sha256"},
                           {"threshold", theta},
                           {"files", files.size()},
                           {"kept", kept_paths},
                           {"exact_duplicates", jx},
                           {"similar_duplicates", js},
                           {"failures", jf}};
      spit(dd_out, report.dump(2) + "\n");
      run.manifest.inputs = files;
      run.output(dd_out);
    };
  });

  auto* st = ds->add_subcommand("stats", "Label and duration histograms");
  std::vector<std::string> st_in;
  std::string st_out, st_labels;
  double st_bin = 30;
  st->add_option("inputs", st_in, "MIDI files or directories")->required();
  st->add_option("--labels", st_labels, "Labels CSV (path,emotion,genre)");
  st->add_option("--bin-seconds", st_bin, "Duration histogram bin width")->capture_default_str();
  st->add_option("-o,--output", st_out, "Stats JSON")->required();
  st->callback([&] {
    action = [&] {
      const auto labels = st_labels.empty() ? dataset::LabelMap{} : with_file(st_labels, [&] { return dataset::read_labels_csv(st_labels); });
      const auto files = expand_midi_inputs(st_in);
      const auto idx = dataset::index_files(files, labels, dataset::HashAlgorithm::Sha256, g.jobs);
      auto j = dataset::to_json(dataset::corpus_stats(idx.entries, st_bin));
      json jf = json::array();
      for (const auto& f : idx.failures) jf.push_back({{"path", f.path}, {"error", f.error}});
      j["failures"] = jf;
      spit(st_out, j.dump(2) + "\n");
      run.manifest.inputs = files;
      run.output(st_out);
    };
  });

  // train
  auto* tr = app.add_subcommand("train", "Toy-scale training on the synthetic corpora");
  std::string tr_model = "both", tr_out, tr_mask = "all";
  int tr_steps = 200, tr_batch = 8, tr_count = 256;
  double tr_budget = 0;
  tr->add_option("--model", tr_model, "generator, selector or both")->check(CLI::IsMember({"generator", "selector", "both"}))->capture_default_str();
  auto* tr_steps_flag = tr->add_option("--steps", tr_steps, "Optimizer steps per model")->check(CLI::PositiveNumber);
  auto* tr_batch_flag = tr->add_option("--batch", tr_batch, "Minibatch size")->check(CLI::PositiveNumber);
  auto* tr_count_flag = tr->add_option("--count", tr_count, "Synthetic corpus size")->check(CLI::PositiveNumber);
  auto* tr_budget_flag = tr->add_option("--time-budget", tr_budget, "Seconds per model (0 = no limit)");
  auto* tr_mask_flag = tr->add_option("--mask", tr_mask, "Selector heads: quality, emotion or all");
  tr->add_option("-o,--output", tr_out, "Checkpoint")->required();
  tr->callback([&] {
    action = [&] {
      const json& c = g.config;
      const int steps = pick(tr_steps_flag, tr_steps, c, "steps", 200);
      const int batch = pick(tr_batch_flag, tr_batch, c, "batch", 8);
      const int count = pick(tr_count_flag, tr_count, c, "count", 256);
      const double budget = pick(tr_budget_flag, tr_budget, c, "time_budget", 0.0);
      const HeadMask mask = parse_mask(pick(tr_mask_flag, tr_mask, c, "mask", std::string("all")));
      std::vector<checkpoint::ModelEntry> entries;
      json details = {{"steps", steps}, {"batch", batch}, {"count", count}};
      auto config_error = [](const Error& e) { return Error(ErrorCode::InvalidConfig, e.what()); };
      if (tr_model != "selector") {
        GeneratorConfig gc;
        try {
          gc = GeneratorConfig::from_json(merged(GeneratorConfig{}.to_json(), c, "generator"));
        } catch (const Error& e) {
          throw config_error(e);
        }
        if (!c.contains("generator") || !c["generator"].contains("seed")) gc.seed = g.seed;
        Generator model(gc);
        TrainOptions o;
        o.steps = steps;
        o.batch_size = batch;
        o.seed = g.seed;
        o.time_budget_s = budget;
        o.on_step = [](int step, double loss, double lr) { spdlog::debug("generator step {} loss {:.4f} lr {:.2e}", step, loss, lr); };
        const auto corpus = synthetic::register_corpus(static_cast<std::size_t>(count), g.seed, 2);
        const auto rep = train_generator(model, corpus, o);
        spdlog::info("generator: {} steps in {:.1f}s, smoothed loss {:.4f}", rep.steps, rep.seconds,
                     rep.smoothed.empty() ? 0.0 : rep.smoothed.back());
        details["generator"] = {{"config", gc.to_json()}, {"steps_run", rep.steps},
                                {"final_loss", rep.smoothed.empty() ? json(nullptr) : json(rep.smoothed.back())}};
        entries.push_back(checkpoint::entry_of(model));
      }
      if (tr_model != "generator") {
        SelectorConfig sc;
        try {
          sc = SelectorConfig::from_json(merged(SelectorConfig{}.to_json(), c, "selector"));
        } catch (const Error& e) {
          throw config_error(e);
        }
        if (!c.contains("selector") || !c["selector"].contains("seed")) sc.seed = g.seed;
        Selector model(sc);
        SelectorTrainOptions o;
        o.steps = steps;
        o.batch_size = batch;
        o.seed = g.seed;
        o.mask = mask;
        o.time_budget_s = budget;
        o.on_step = [](int step, double loss) { spdlog::debug("selector step {} loss {:.4f}", step, loss); };
        const auto data = to_selector_examples(synthetic::quality_corpus(static_cast<std::size_t>(count), g.seed));
        const auto rep = train_multitask(model, data, o);
        spdlog::info("selector: {} steps in {:.1f}s", rep.steps, rep.seconds);
        details["selector"] = {{"config", sc.to_json()}, {"steps_run", rep.steps},
                               {"final_loss", rep.losses.empty() ? json(nullptr) : json(rep.losses.back())}};
        entries.push_back(checkpoint::entry_of(model));
      }
      checkpoint::save(tr_out, entries);
      run.output(tr_out);
      run.manifest.details = details;
    };
  });

  // rerun
  auto* rr = app.add_subcommand("rerun", "Repeat the run recorded in a manifest");
  std::string rr_manifest;
  rr->add_option("manifest", rr_manifest, "Run manifest JSON")->required();
  bool is_rerun = false;
  rr->callback([&] { is_rerun = true; });

  std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (is_rerun) return run_rerun(rr_manifest);
    if (!g.config_path.empty()) g.config = read_json(g.config_path);
    if (!g.config.is_object()) throw UsageError("--config must hold a JSON object");
    if (g.seed_flag->count() == 0 && g.config.contains("seed")) g.seed = g.config.at("seed").get<std::uint64_t>();

    const CLI::App* sub = app.get_subcommands().front();
    run.manifest.subcommand = sub->get_name();
    for (const auto* s : sub->get_subcommands()) run.manifest.subcommand += " " + s->get_name();
    run.manifest.config_path = g.config_path;
    run.manifest.seed = g.seed;
    run.manifest.timestamp = cli::utc_timestamp();
    run.manifest.argv = args;
    spdlog::debug("running {}", run.manifest.subcommand);

    action();

    const std::string mpath = g.manifest_path.empty() ? cli::manifest_path_for(run.manifest, "") : g.manifest_path;
    if (!mpath.empty()) cli::write_manifest(run.manifest, mpath);
    return kExitOk;
  } catch (const UsageError& e) {
    std::cerr << "xmusic: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "xmusic: " << e.what() << '\n';
    return is_model_error(e.code()) ? kExitModel : kExitData;
  } catch (const json::exception& e) {
    std::cerr << "xmusic: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "xmusic: " << e.what() << '\n';
    return kExitData;
  }
}

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("xmusic");
  spdlog::set_default_logger(logger);
  spdlog::set_level(log_level_from_env());
  spdlog::set_pattern("[%l] %v");
  return run(std::vector<std::string>(argv, argv + argc));
}
