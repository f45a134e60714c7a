#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "semcomp/fastica.hpp"
#include "semcomp/harvest.hpp"
#include "semcomp/naming.hpp"

namespace semcomp {

/// Everything a pipeline run needs. `full` defaults are the full-scale
/// settings (250000-word vocabulary, min count 5, layer 8, 512 dims, 30
/// naming words); `desk` shrinks the vocabulary and graph threshold for
/// laptop-sized runs.
struct PipelineConfig {
  std::string profile = "full";

  struct Paths {
    std::string workdir = "semcomp-work";
    std::string corpus;  ///< text file for `vocab`; empty samples from the endpoint
    std::string matrix;  ///< SCM1 matrix for the file provider
  } paths;

  struct Whiten {
    std::size_t d = 512;
  } whiten;

  IcaConfig ica;

  struct Features {
    double t = 0.1;
    std::vector<double> sweep = {0.05, 0.10, 0.15, 0.20, 0.25, 0.30};
  } features;

  struct Graph {
    std::size_t k = 20;
    std::size_t ring_capacity = 13;
    std::size_t labels_per_edge = 3;
    std::size_t words_per_edge = 5;
  } graph;

  struct Naming {
    ChatEndpointConfig endpoint;
    std::size_t words = 30;
    NamingStyle style = NamingStyle::one_word;
  } naming;

  struct Harvest {
    std::string provider = "http";  ///< http | file | synth
    std::string base_url = "http://localhost:8000/v1";
    std::string model;
    double timeout_seconds = 120.0;
    int max_retries = 3;
    std::uint64_t min_count = 5;
    std::size_t target_size = 250000;
    std::size_t target_words = 94000000;
    HarvestSpec spec;
    SamplingParams sampling;
    std::size_t checkpoint_every = 1000;
    std::size_t concurrency = 8;
    double max_missing_fraction = 0.01;
  } harvest;

  SyntheticSpec synthetic;
};

PipelineConfig default_config(std::string_view profile = "full");

/// Complete resolved configuration, every default spelled out.
nlohmann::ordered_json config_to_json(const PipelineConfig& cfg);

/// Overlays `overrides` on the defaults of its profile. Unknown keys are errors.
PipelineConfig config_from_json(const nlohmann::json& overrides);

struct CliFlags {
  std::optional<std::string> config_path;
  std::optional<std::string> workdir;
  std::optional<std::string> profile;
  std::optional<std::string> provider;
  std::optional<std::string> input;
  std::optional<std::string> matrix;
  std::optional<std::uint64_t> seed;  ///< ICA and synthetic seeds
  std::optional<std::size_t> d;
  std::optional<double> t;
  std::optional<std::size_t> k;
  std::optional<std::size_t> center;
  bool dry_run = false;
};

/// Config file (if any), then flags; flags win.
PipelineConfig resolve_config(const CliFlags& flags);

const std::vector<std::string>& subcommand_names();

/// Runs one pipeline step against cfg.paths.workdir. Reports go to `out`,
/// line-oriented JSON logs to the log sink. Returns the process exit status.
int run_subcommand(std::string_view name, const PipelineConfig& cfg, const CliFlags& flags, std::ostream& out);

}  // namespace semcomp
