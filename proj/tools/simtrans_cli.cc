// Command-line front end: simtrans <command> [--config run.json] [options].

#include <iostream>

#include <CLI11.hpp>

#include "simtrans/errors.h"
#include "simtrans/pipeline.h"

int main(int argc, char** argv) {
  using namespace simtrans;
  CLI::App app{"Streaming speech translation toolkit on synthetic token corpora"};
  app.require_subcommand(0, 1);
  std::string config_path;
  app.add_option("-c,--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  bool print_config = false;
  app.add_flag("--print-config", print_config, "print the resolved configuration and exit");
  CommandArgs args;

  app.add_subcommand("train-codec", "fit RVQ codebooks on synthetic speech");
  auto* make_data = app.add_subcommand("make-data", "generate a corpus split");
  make_data->add_option("--split", args.split, "train or heldout");
  make_data->add_option("--count", args.count, "number of examples");
  auto* align = app.add_subcommand("align", "contextual alignment of a corpus split");
  align->add_option("--split", args.split, "train or heldout");
  auto* align_pipe = app.add_subcommand("align-pipeline", "compute, smooth and insert silences for one pair");
  align_pipe->add_option("--source", args.source_transcript, "source transcript JSONL")->required();
  align_pipe->add_option("--target", args.target_transcript, "target transcript JSONL")->required();
  align_pipe->add_option("--manifest", args.manifest, "corpus manifest to fit the word table on");
  app.add_subcommand("train", "train the model on the train split");
  auto* translate = app.add_subcommand("translate", "streaming translation of multistream files");
  translate->add_option("--in", args.inputs, "input .msf files")->required();
  translate->add_option("--ckpt", args.checkpoint, "model checkpoint");
  translate->add_option("--preset", args.preset, "short or long");
  translate->add_option("--gamma", args.gamma, "guidance strength; enables guidance");
  translate->add_option("--seed", args.sampling_seed, "sampling seed");
  translate->add_option("--batch", args.batch, "sequences decoded together");
  auto* eval = app.add_subcommand("eval", "score hypotheses against references");
  eval->add_option("--hyp", args.hyps, "hypothesis transcripts")->required();
  eval->add_option("--ref", args.refs, "reference transcripts")->required();
  eval->add_option("--timing", args.timings, "timing reports from translate");
  auto* bench = app.add_subcommand("bench", "real-time factor against batch size");
  bench->add_option("--in", args.inputs, "input .msf file")->required();
  bench->add_option("--ckpt", args.checkpoint, "model checkpoint");
  bench->add_option("--batch", args.batch_sizes, "batch sizes")->delimiter(',');
  bench->add_option("--preset", args.preset, "short or long");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  RunConfig config;
  try {
    if (!config_path.empty()) config = LoadRunConfig(config_path);
    ApplySeedOverride(config);
    config.Resolve();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  if (print_config) {
    std::cout << RunConfigToJson(config) << '\n';
    return kExitOk;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return kExitConfig;
  }
  return RunPipeline(app.get_subcommands().front()->get_name(), config, args, std::cout, std::cerr);
}
