#include "simtrans/pipeline.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "simtrans/errors.h"
#include "simtrans/metrics.h"

namespace simtrans {

namespace fs = std::filesystem;
using nlohmann::json;

std::string CodecPath(const RunConfig& config) { return (fs::path(config.paths.out_dir) / "codec.rvq").string(); }
std::string CheckpointPath(const RunConfig& config) {
  return (fs::path(config.paths.out_dir) / "model.rqt").string();
}
std::string SplitDir(const RunConfig& config, const std::string& split) {
  return (fs::path(config.paths.out_dir) / "data" / split).string();
}
std::string ManifestPath(const RunConfig& config, const std::string& split) {
  return (fs::path(SplitDir(config, split)) / "manifest.jsonl").string();
}

namespace {

void RequireFile(const std::string& path) {
  if (!fs::is_regular_file(path)) throw DataError("missing file: " + path);
}

void EnsureDir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

std::ofstream OpenOut(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path);
  return os;
}

// Runs a loader and tags its failure with the path.
template <typename Fn>
auto Load(const std::string& path, Fn&& fn) {
  RequireFile(path);
  try {
    return fn(path);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream os = OpenOut(path);
  os << text;
}

// One manifest entry; file fields are relative to the manifest directory.
struct Entry {
  std::string id;
  json fields;
  std::string dir;

  std::string File(const std::string& key) const {
    if (!fields.contains(key) || !fields[key].is_string()) throw DataError("manifest entry " + id + " lacks " + key);
    return (fs::path(dir) / fields[key].get<std::string>()).string();
  }
};

std::vector<Entry> ReadManifest(const std::string& path) {
  RequireFile(path);
  std::ifstream in(path);
  const std::string dir = fs::path(path).parent_path().string();
  std::vector<Entry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) {
      throw DataError(path + ":" + std::to_string(lineno) + ": entry without an id");
    }
    out.push_back({j["id"].get<std::string>(), j, dir});
  }
  if (out.empty()) throw DataError(path + ": empty manifest");
  return out;
}

ConditionLabel EntryLabel(const Entry& e) {
  try {
    return ParseLabel(e.fields.at("label").get<std::string>());
  } catch (const std::exception& ex) {
    throw DataError("manifest entry " + e.id + ": bad label: " + ex.what());
  }
}

AlignmentMap LoadAlignmentFile(const std::string& path) {
  return Load(path, [](const std::string& p) {
    std::ifstream in(p);
    return ReadAlignment(in);
  });
}

TimedTranscript LoadTranscriptFile(const std::string& path) {
  return Load(path, [](const std::string& p) { return LoadTranscript(p); });
}

Multistream LoadStreams(const std::string& path) {
  return Load(path, [](const std::string& p) { return LoadMultistream(p); });
}

std::string FormatLags(const LagSummary& s) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << "mean=" << s.mean << " min=" << s.min << " max=" << s.max
     << " violations=" << s.violations;
  return os.str();
}

std::string DecodeText(const Multistream& streams) {
  std::string line;
  for (int t = 0; t < streams.frames(); ++t) {
    const Token tok = streams.text(t);
    if (tok < kTextFirstWord) continue;
    if (!line.empty()) line += ' ';
    line += SyntheticTask::TargetText(tok - kTextFirstWord);
  }
  return line;
}

// Source frames after the end repeat the first frame with the delay undone,
// which holds the speaker's leading silence.
std::vector<Token> LeadFrame(const TokenGrid& source, int delay_steps) {
  std::vector<Token> f(source.levels);
  for (int q = 0; q < source.levels; ++q) {
    const int t = q == 0 ? 0 : std::min(delay_steps, source.frames - 1);
    f[q] = source.at(t, q);
  }
  return f;
}

// Mean decoded latent over frames holding codec tokens at every level.
std::optional<std::vector<double>> MeanLatent(const TokenGrid& stream, int delay_steps,
                                              const CodebookStack<float>& codebooks) {
  const TokenGrid undelayed = RemoveAcousticDelay(stream, delay_steps);
  std::vector<double> mean(codebooks.latent_dim(), 0.0);
  int count = 0;
  for (int t = 0; t < undelayed.frames; ++t) {
    bool codes = true;
    for (int q = 0; q < undelayed.levels; ++q) codes = codes && undelayed.at(t, q) >= kAudioFirstCode;
    if (!codes) continue;
    for (int q = 0; q < undelayed.levels; ++q) {
      const auto row = codebooks.entries[q].row(undelayed.at(t, q) - kAudioFirstCode);
      for (int c = 0; c < codebooks.latent_dim(); ++c) mean[c] += row[c];
    }
    ++count;
  }
  if (count == 0) return std::nullopt;
  for (double& x : mean) x /= count;
  return mean;
}

int TrainCodecCommand(const RunConfig& config, std::ostream& out) {
  const SyntheticTask task(config.task());
  const auto codebooks = task.TrainCodec(config.experiment.codec_sentences, config.experiment.codec_steps,
                                         config.seed());
  EnsureDir(config.paths.out_dir);
  SaveCodebooks(CodecPath(config), codebooks, config.task().codec);
  out << "codebooks: levels=" << codebooks.num_levels() << " size=" << codebooks.codebook_size()
      << " latent=" << codebooks.latent_dim() << " -> " << CodecPath(config) << '\n';
  return kExitOk;
}

int MakeDataCommand(const RunConfig& config, const CommandArgs& args, std::ostream& out) {
  std::uint64_t first = 0;
  int count = args.count;
  if (args.split == "train") {
    if (count < 0) count = config.experiment.train_examples;
  } else if (args.split == "heldout") {
    first = kHeldOutIndex;
    if (count < 0) count = config.experiment.eval_examples;
  } else {
    throw ConfigError("--split: expected train or heldout, got " + args.split);
  }
  if (count < 5) throw ConfigError("--count: at least 5 examples are needed for quantile labels");
  const auto codebooks = Load(CodecPath(config), [](const std::string& p) { return LoadCodebooks(p); });
  const SyntheticTask task(config.task());
  const auto corpus = task.GenerateCorpus(codebooks, count, first);

  const std::string dir = SplitDir(config, args.split);
  EnsureDir(dir);
  std::ofstream manifest = OpenOut(ManifestPath(config, args.split));
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    const SyntheticExample& ex = corpus[k];
    char id[16];
    std::snprintf(id, sizeof(id), "%05zu", k);
    const std::string base = (fs::path(dir) / id).string();
    SaveMultistream(base + ".msf", ex.streams);
    SaveTokenGrid(base + ".src.tgr", ex.source_codes);
    SaveTokenGrid(base + ".tgt.tgr", ex.target_codes);
    SaveTranscript(base + ".src.jsonl", ex.plan.source);
    SaveTranscript(base + ".tgt.jsonl", ex.target);
    SaveTranscript(base + ".base.jsonl", ex.plan.target_base);
    SaveTranscript(base + ".ctx.jsonl", ex.contextual_target);
    {
      std::ofstream a = OpenOut(base + ".planted.align");
      WriteAlignment(a, ex.plan.planted);
    }
    const std::string s(id);
    const json entry = {{"id", s},
                        {"streams", s + ".msf"},
                        {"source_codes", s + ".src.tgr"},
                        {"target_codes", s + ".tgt.tgr"},
                        {"source", s + ".src.jsonl"},
                        {"target", s + ".tgt.jsonl"},
                        {"target_base", s + ".base.jsonl"},
                        {"contextual", s + ".ctx.jsonl"},
                        {"planted", s + ".planted.align"},
                        {"label", LabelName(ex.label)},
                        {"source_speaker", ex.source_speaker},
                        {"target_speaker", ex.target_speaker},
                        {"similarity", ex.similarity},
                        {"source_end_frame", ex.source_end_frame},
                        {"text_eos_frame", ex.text_eos_frame}};
    manifest << entry.dump() << '\n';
  }
  out << "examples: " << corpus.size() << " split=" << args.split << " regime=" << RegimeName(config.task().regime)
      << " -> " << ManifestPath(config, args.split) << '\n';
  return kExitOk;
}

WordTableScorer FitScorer(const RunConfig& config, const std::vector<Entry>& entries) {
  std::vector<Words> sources, targets;
  for (const auto& e : entries) {
    sources.push_back(LoadTranscriptFile(e.File("source")).texts());
    targets.push_back(LoadTranscriptFile(e.File("target_base")).texts());
  }
  WordTableScorer::Options opt;
  opt.iterations = config.alignment.em_iterations;
  return WordTableScorer::Train(sources, targets, opt);
}

int AlignCommand(const RunConfig& config, const CommandArgs& args, std::ostream& out) {
  const auto entries = ReadManifest(ManifestPath(config, args.split));
  const WordTableScorer scorer = FitScorer(config, entries);
  LoglikOptions lo;
  lo.threads = config.alignment.threads;
  const TaskSpec& spec = config.task();
  int words = 0, exact = 0;
  double inserted = 0;
  std::vector<double> lags;
  for (const auto& e : entries) {
    const TimedTranscript source = LoadTranscriptFile(e.File("source"));
    const TimedTranscript base = LoadTranscriptFile(e.File("target_base"));
    const AlignmentMap planted = LoadAlignmentFile(e.File("planted"));
    const LoglikTable table = LoglikMatrix(scorer, source.texts(), base.texts(), lo);
    const AlignmentMap raw = ContextualAlign(table);
    const AlignmentMap smooth = SmoothSpikes(raw, source, config.alignment.spikes);
    const TimedTranscript aligned =
        ApplyLagRegime(base, source, smooth, spec.regime, spec.constant_lag_s, spec.min_lag_s);
    const std::string stem = (fs::path(e.dir) / e.id).string();
    {
      std::ofstream os = OpenOut(stem + ".ctx.align");
      WriteAlignment(os, raw, table);
    }
    SaveTranscript(stem + ".aligned.jsonl", aligned);
    for (std::size_t j = 0; j < raw.size(); ++j) {
      ++words;
      if (j < planted.size() && raw[j] == planted[j]) ++exact;
    }
    inserted += aligned.words.back().end - base.words.back().end;
    const auto l = ComputeLags(source, aligned, smooth);
    lags.insert(lags.end(), l.begin(), l.end());
  }
  out << std::fixed << std::setprecision(3) << "sentences: " << entries.size() << " regime=" << RegimeName(spec.regime)
      << '\n'
      << "alignment exact match vs planted: " << (words > 0 ? double(exact) / words : 0.0) << '\n'
      << "silence inserted: total_s=" << inserted << " mean_s=" << inserted / entries.size() << '\n'
      << "lags: " << FormatLags(SummarizeLags(lags, spec.min_lag_s)) << '\n';
  return kExitOk;
}

int AlignPipelineCommand(const RunConfig& config, const CommandArgs& args, std::ostream& out) {
  if (args.source_transcript.empty() || args.target_transcript.empty()) {
    throw ConfigError("align-pipeline needs --source and --target");
  }
  const TimedTranscript source = LoadTranscriptFile(args.source_transcript);
  const TimedTranscript target = LoadTranscriptFile(args.target_transcript);
  std::vector<Words> sources, targets;
  if (!args.manifest.empty()) {
    for (const auto& e : ReadManifest(args.manifest)) {
      sources.push_back(LoadTranscriptFile(e.File("source")).texts());
      targets.push_back(LoadTranscriptFile(e.File("target_base")).texts());
    }
  }
  sources.push_back(source.texts());
  targets.push_back(target.texts());
  WordTableScorer::Options opt;
  opt.iterations = config.alignment.em_iterations;
  const WordTableScorer scorer = WordTableScorer::Train(sources, targets, opt);
  LoglikOptions lo;
  lo.threads = config.alignment.threads;
  const LoglikTable table = LoglikMatrix(scorer, source.texts(), target.texts(), lo);
  const AlignmentMap raw = ContextualAlign(table);
  const AlignmentMap smooth = SmoothSpikes(raw, source, config.alignment.spikes);
  const TimedTranscript aligned = InsertSilences(target, source, smooth, config.task().min_lag_s);

  const std::string dir = (fs::path(config.paths.out_dir) / "align").string();
  EnsureDir(dir);
  {
    std::ofstream os = OpenOut(dir + "/loglik.csv");
    WriteLoglikCsv(os, table);
  }
  {
    std::ofstream os = OpenOut(dir + "/alignment.tsv");
    WriteAlignment(os, raw, table);
  }
  {
    std::ofstream os = OpenOut(dir + "/smoothed.tsv");
    WriteAlignment(os, smooth);
  }
  SaveTranscript(dir + "/aligned.jsonl", aligned);
  const double min_lag = config.task().min_lag_s;
  const auto before = ComputeLags(source, target, raw);
  const auto after = ComputeLags(source, aligned, smooth);
  int moved = 0;
  for (std::size_t j = 0; j < raw.size(); ++j) moved += raw[j] != smooth[j];
  out << "words: " << target.size() << " smoothed=" << moved << '\n'
      << "lags before: " << FormatLags(SummarizeLags(before, min_lag)) << '\n'
      << "lags after:  " << FormatLags(SummarizeLags(after, min_lag)) << '\n'
      << "-> " << dir << '\n';
  return kExitOk;
}

int TrainCommand(const RunConfig& config, std::ostream& out) {
  const auto entries = ReadManifest(ManifestPath(config, "train"));
  std::vector<TrainingExample> examples;
  for (const auto& e : entries) {
    Multistream ms = LoadStreams(e.File("streams"));
    if (ms.levels() != config.experiment.model.levels) {
      throw DataError(e.File("streams") + ": level count differs from the configured codec");
    }
    examples.push_back(TrainingExample::FromStreams(std::move(ms), EntryLabel(e)));
  }
  const TrainedSystem sys = TrainOnExamples(config.experiment, config.experiment.model, examples,
                                            [&out](int step, const StreamLosses& l) {
                                              if (step % 500 != 0) return;
                                              out << std::fixed << std::setprecision(4) << "step " << step
                                                  << " loss=" << l.total << " text=" << l.text
                                                  << " audio_out=" << l.audio_out << " audio_in=" << l.audio_in
                                                  << '\n';
                                            });
  const StreamLosses& last = sys.curve.back();
  const json meta = {{"steps", sys.steps},
                     {"train_seconds", sys.train_seconds},
                     {"examples", examples.size()},
                     {"final_loss", last.total},
                     {"regime", RegimeName(config.task().regime)}};
  SaveCheckpoint(CheckpointPath(config), sys.model, sys.weights, meta.dump());
  out << "trained " << sys.steps << " steps in " << std::setprecision(1) << sys.train_seconds << " s -> "
      << CheckpointPath(config) << '\n';
  return kExitOk;
}

SessionConfig DecodeConfig(const RunConfig& config, const CommandArgs& args) {
  SessionConfig s = config.Session();
  if (!args.preset.empty()) {
    const SamplingConfig keep = s.sampling;
    try {
      s.sampling = SamplingConfig::Preset(args.preset);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("--preset: ") + e.what());
    }
    s.sampling.cfg_gamma = keep.cfg_gamma;
    s.sampling.seed = keep.seed;
  }
  if (args.gamma >= 0) {
    s.sampling.cfg_gamma = args.gamma;
    s.use_cfg = true;
  }
  if (args.sampling_seed >= 0) s.sampling.seed = static_cast<std::uint64_t>(args.sampling_seed);
  try {
    s.sampling.Validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("sampling: ") + e.what());
  }
  return s;
}

Checkpoint LoadModel(const RunConfig& config, const CommandArgs& args) {
  const std::string path = args.checkpoint.empty() ? CheckpointPath(config) : args.checkpoint;
  return Load(path, [](const std::string& p) { return LoadCheckpoint(p); });
}

int TranslateCommand(const RunConfig& config, const CommandArgs& args, std::ostream& out) {
  if (args.inputs.empty()) throw ConfigError("translate needs --in");
  if (args.batch < 1) throw ConfigError("--batch: must be at least 1");
  const Checkpoint ck = LoadModel(config, args);
  const RqTransformer<float> model(ck.config, ck.weights);
  const SessionConfig session = DecodeConfig(config, args);
  std::optional<CodebookStack<float>> codebooks;
  if (fs::is_regular_file(CodecPath(config))) {
    codebooks = Load(CodecPath(config), [](const std::string& p) { return LoadCodebooks(p); });
  }
  const std::string dir = (fs::path(config.paths.out_dir) / "translate").string();
  EnsureDir(dir);
  const double fr = session.frame_rate_hz;

  for (std::size_t first = 0; first < args.inputs.size(); first += args.batch) {
    const std::size_t n = std::min<std::size_t>(args.batch, args.inputs.size() - first);
    std::vector<TokenGrid> sources;
    std::vector<std::vector<Token>> pads;
    for (std::size_t k = 0; k < n; ++k) {
      const Multistream ms = LoadStreams(args.inputs[first + k]);
      if (ms.levels() != ck.config.levels) throw DataError(args.inputs[first + k] + ": level count differs from the model");
      sources.push_back(SplitMultistream(ms).source);
      pads.push_back(LeadFrame(sources.back(), ck.config.delay_steps));
    }
    BatchOptions bo;
    bo.first_stream = first;
    bo.pad_frames = pads;
    const auto t0 = std::chrono::steady_clock::now();
    const auto results = RunBatched(model, sources, session, bo);
    const double batch_wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    for (std::size_t k = 0; k < n; ++k) {
      const SessionResult& r = results[k];
      const std::string stem = (fs::path(dir) / fs::path(args.inputs[first + k]).stem()).string();
      SaveMultistream(stem + ".out.msf", r.frames);
      TimedTranscript hyp;
      for (int t = 0; t < r.frames.frames(); ++t) {
        const Token tok = r.frames.text(t);
        if (tok >= kTextFirstWord) {
          hyp.words.push_back({SyntheticTask::TargetText(tok - kTextFirstWord), t / fr, (t + 1) / fr});
        }
      }
      SaveTranscript(stem + ".hyp.jsonl", hyp);
      // The source ends where its input EOS sits.
      int source_end = sources[k].frames;
      for (int t = 0; t < sources[k].frames; ++t) {
        if (sources[k].at(t, 0) == kAudioInputEos) {
          source_end = t;
          break;
        }
      }
      json timing = {{"rtf", r.frames.frames() / (fr * batch_wall)},
                     {"frames", r.frames.frames()},
                     {"wall_s", batch_wall},
                     {"batch", n},
                     {"finished", r.finished},
                     {"truncated", r.truncated},
                     {"source_end_s", source_end / fr}};
      if (codebooks) {
        const SplitStreams split = SplitMultistream(r.frames);
        const auto a = MeanLatent(sources[k], ck.config.delay_steps, *codebooks);
        const auto b = MeanLatent(split.target, ck.config.delay_steps, *codebooks);
        if (a && b) {
          try {
            timing["similarity"] = CosineSimilarity(*a, *b);
          } catch (const std::invalid_argument&) {
            // Zero embeddings carry no speaker information.
          }
        }
      }
      WriteText(stem + ".timing.json", timing.dump(2) + "\n");
      out << DecodeText(r.frames) << '\n';
    }
  }
  return kExitOk;
}

int EvalCommand(const CommandArgs& args, std::ostream& out) {
  if (args.hyps.empty() || args.hyps.size() != args.refs.size()) {
    throw ConfigError("eval needs matching --hyp and --ref lists");
  }
  if (!args.timings.empty() && args.timings.size() != args.hyps.size()) {
    throw ConfigError("eval needs one --timing per --hyp");
  }
  std::vector<std::string> hyp_lines, ref_lines;
  double laal = 0, offset = 0, sim = 0;
  int timed = 0, sims = 0;
  for (std::size_t k = 0; k < args.hyps.size(); ++k) {
    const TimedTranscript hyp = LoadTranscriptFile(args.hyps[k]);
    const TimedTranscript ref = LoadTranscriptFile(args.refs[k]);
    if (ref.words.empty()) throw DataError(args.refs[k] + ": empty reference");
    std::string h, r;
    for (const auto& w : hyp.words) h += w.text + " ";
    for (const auto& w : ref.words) r += w.text + " ";
    hyp_lines.push_back(h);
    ref_lines.push_back(r);
    if (args.timings.empty()) continue;
    const json t = Load(args.timings[k], [](const std::string& p) {
      std::ifstream in(p);
      return json::parse(in);
    });
    if (!t.contains("source_end_s") || !t["source_end_s"].is_number()) {
      throw DataError(args.timings[k] + ": lacks source_end_s");
    }
    const double source_end = t["source_end_s"].get<double>();
    if (t.contains("similarity") && t["similarity"].is_number()) {
      sim += t["similarity"].get<double>();
      ++sims;
    }
    if (hyp.words.empty()) continue;
    LatencyInputs in;
    for (const auto& w : hyp.words) in.emit_times.push_back(w.start);
    in.source_duration = source_end;
    in.n_ref = ref.size();
    laal += Laal(in);
    offset += EndOffset(source_end, hyp.words.back().end);
    ++timed;
  }
  out << std::fixed << std::setprecision(3) << "metric        value\n"
      << "BLEU          " << CorpusBleu(hyp_lines, ref_lines) << '\n';
  if (timed > 0) {
    out << "LAAL_s        " << laal / timed << '\n' << "EndOffset_s   " << offset / timed << '\n';
  } else {
    out << "LAAL_s        n/a\nEndOffset_s   n/a\n";
  }
  if (sims > 0) {
    out << "similarity    " << sim / sims << '\n';
  } else {
    out << "similarity    n/a\n";
  }
  return kExitOk;
}

int BenchCommand(const RunConfig& config, const CommandArgs& args, std::ostream& out) {
  if (args.inputs.size() != 1) throw ConfigError("bench needs exactly one --in");
  for (int b : args.batch_sizes) {
    if (b < 1) throw ConfigError("--batch: sizes must be positive");
  }
  const Checkpoint ck = LoadModel(config, args);
  const RqTransformer<float> model(ck.config, ck.weights);
  SessionConfig session = DecodeConfig(config, args);
  const Multistream ms = LoadStreams(args.inputs[0]);
  if (ms.levels() != ck.config.levels) throw DataError(args.inputs[0] + ": level count differs from the model");
  const TokenGrid source = SplitMultistream(ms).source;
  session.pad_frame = LeadFrame(source, ck.config.delay_steps);
  const auto rows = RunBench(model, source, args.batch_sizes, session);
  const std::string csv = BenchCsv(rows);
  EnsureDir(config.paths.out_dir);
  WriteText((fs::path(config.paths.out_dir) / "bench.csv").string(), csv);
  out << csv;
  return kExitOk;
}

int Dispatch(const std::string& command, const RunConfig& config, const CommandArgs& args, std::ostream& out) {
  if (command == "train-codec") return TrainCodecCommand(config, out);
  if (command == "make-data") return MakeDataCommand(config, args, out);
  if (command == "align") return AlignCommand(config, args, out);
  if (command == "align-pipeline") return AlignPipelineCommand(config, args, out);
  if (command == "train") return TrainCommand(config, out);
  if (command == "translate") return TranslateCommand(config, args, out);
  if (command == "eval") return EvalCommand(args, out);
  if (command == "bench") return BenchCommand(config, args, out);
  throw ConfigError("unknown command: " + command);
}

}  // namespace

int RunPipeline(const std::string& command, const RunConfig& config, const CommandArgs& args, std::ostream& out,
                std::ostream& err) {
  try {
    return Dispatch(command, config, args, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace simtrans
