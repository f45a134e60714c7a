#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "semcomp/log.hpp"
#include "semcomp/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"semcomp: interpretable semantic components from word embeddings"};
  app.require_subcommand(1);

  semcomp::CliFlags flags;
  auto opt = [&](auto& field, const std::string& name, const std::string& help) {
    app.add_option_function<typename std::decay_t<decltype(field)>::value_type>(
           name, [&field](const auto& v) { field = v; }, help)
        ->configurable(false);
  };
  opt(flags.config_path, "--config", "JSON config file");
  opt(flags.workdir, "--workdir", "artifact directory");
  opt(flags.profile, "--profile", "default profile: full or desk");
  opt(flags.provider, "--provider", "hidden-state provider: http, file or synth");
  opt(flags.input, "--input", "corpus text file for `vocab`");
  opt(flags.matrix, "--matrix", "SCM1 matrix for the file provider");
  opt(flags.seed, "--seed", "seed for ICA and synthetic data");
  opt(flags.d, "--d", "whitened dimensionality");
  opt(flags.t, "--t", "binarization threshold, 0 < t < 1");
  opt(flags.k, "--k", "graph edge threshold");
  opt(flags.center, "--center", "ego graph center component");
  app.add_flag("--dry-run", flags.dry_run, "print the resolved config and exit");

  const std::map<std::string, std::string> help = {
      {"vocab", "build vocab.tsv from --input or sampled text"},
      {"harvest", "collect one representation row per vocabulary word"},
      {"synth", "generate synthetic words, ground truth and raw matrix"},
      {"whiten", "center, reduce to --d dims and whiten"},
      {"ica", "FastICA on the whitened matrix"},
      {"binarize", "normalize rows, threshold at --t, report density sweep"},
      {"orient", "orientation and active counts per component"},
      {"graph", "component co-occurrence graph (edges with > --k shared words)"},
      {"name", "name both ends of every component via the chat endpoint"},
      {"ego", "ego graph around --center as DOT, JSON and TikZ"},
      {"sweep-t", "active-bit density across the threshold sweep"},
      {"recover-eval", "micro-F1 and Amari index against synthetic ground truth"},
  };
  for (const auto& name : semcomp::subcommand_names()) {
    app.add_subcommand(name, help.at(name))->fallthrough();
  }

  CLI11_PARSE(app, argc, argv);

  semcomp::PipelineConfig cfg;
  try {
    cfg = semcomp::resolve_config(flags);
  } catch (const std::exception& e) {
    semcomp::log::emit(semcomp::log::Level::error, "cli.config", {{"error", e.what()}});
    return 1;
  }
  const std::string name = app.get_subcommands().front()->get_name();
  return semcomp::run_subcommand(name, cfg, flags, std::cout);
}
