#include "semcomp/pipeline.hpp"

#include <fstream>
#include <functional>
#include <map>

#include "semcomp/compgraph.hpp"
#include "semcomp/features.hpp"
#include "semcomp/log.hpp"
#include "semcomp/matrixio.hpp"
#include "semcomp/recovery.hpp"
#include "semcomp/whiten.hpp"

namespace semcomp {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

PipelineConfig default_config(std::string_view profile) {
  PipelineConfig cfg;
  if (profile == "full") return cfg;
  if (profile != "desk") throw Error("unknown profile: " + std::string(profile) + " (expected full or desk)");
  cfg.profile = "desk";
  cfg.harvest.target_size = 2000;
  cfg.harvest.min_count = 2;
  cfg.harvest.target_words = 200000;
  cfg.graph.k = 1;
  return cfg;
}

ojson config_to_json(const PipelineConfig& cfg) {
  ojson j;
  j["profile"] = cfg.profile;
  j["paths"] = {{"workdir", cfg.paths.workdir}, {"corpus", cfg.paths.corpus}, {"matrix", cfg.paths.matrix}};
  j["whiten"] = {{"d", cfg.whiten.d}};
  j["ica"] = {{"n_components", cfg.ica.n_components},
              {"max_iter", cfg.ica.max_iter},
              {"tol", cfg.ica.tol},
              {"nonlinearity", to_string(cfg.ica.nonlinearity)},
              {"seed", cfg.ica.seed}};
  j["features"] = {{"t", cfg.features.t}, {"sweep", cfg.features.sweep}};
  j["graph"] = {{"k", cfg.graph.k},
                {"ring_capacity", cfg.graph.ring_capacity},
                {"labels_per_edge", cfg.graph.labels_per_edge},
                {"words_per_edge", cfg.graph.words_per_edge}};
  const auto& ep = cfg.naming.endpoint;
  j["naming"] = {{"base_url", ep.base_url},
                 {"model", ep.model},
                 {"timeout_seconds", ep.timeout_seconds},
                 {"max_retries", ep.max_retries},
                 {"temperature", ep.temperature},
                 {"retry_base_delay_ms", ep.retry_base_delay_ms},
                 {"concurrency", ep.concurrency},
                 {"fallback", ep.fallback},
                 {"words", cfg.naming.words},
                 {"style", to_string(cfg.naming.style)}};
  const auto& h = cfg.harvest;
  j["harvest"] = {{"provider", h.provider},
                  {"base_url", h.base_url},
                  {"model", h.model},
                  {"timeout_seconds", h.timeout_seconds},
                  {"max_retries", h.max_retries},
                  {"min_count", h.min_count},
                  {"target_size", h.target_size},
                  {"target_words", h.target_words},
                  {"layer", h.spec.layer},
                  {"template", h.spec.template_text},
                  {"position", h.spec.position},
                  {"sampling",
                   {{"prompt", h.sampling.prompt},
                    {"temperature", h.sampling.temperature},
                    {"max_tokens", h.sampling.max_length},
                    {"top_k", h.sampling.top_k}}},
                  {"checkpoint_every", h.checkpoint_every},
                  {"concurrency", h.concurrency},
                  {"max_missing_fraction", h.max_missing_fraction}};
  const auto& s = cfg.synthetic;
  j["synthetic"] = {{"n_words", s.n_words},
                    {"n_features", s.n_features},
                    {"dim", s.dim},
                    {"actives_per_word", s.actives_per_word},
                    {"noise_sigma", s.noise_sigma},
                    {"seed", s.seed},
                    {"identity_mixing", s.identity_mixing}};
  return j;
}

namespace {

void reject_unknown_keys(const ojson& defaults, const nlohmann::json& given, const std::string& where) {
  if (!given.is_object()) throw Error("config: " + (where.empty() ? std::string("root") : where) + " must be an object");
  for (const auto& [key, value] : given.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!defaults.contains(key)) throw Error("config: unknown key " + path);
    if (defaults.at(key).is_object()) reject_unknown_keys(defaults.at(key), value, path);
  }
}

PipelineConfig parse_config(const ojson& j) {
  PipelineConfig cfg = default_config(j.at("profile").get<std::string>());
  const auto& paths = j.at("paths");
  cfg.paths.workdir = paths.at("workdir").get<std::string>();
  cfg.paths.corpus = paths.at("corpus").get<std::string>();
  cfg.paths.matrix = paths.at("matrix").get<std::string>();
  cfg.whiten.d = j.at("whiten").at("d").get<std::size_t>();
  const auto& ica = j.at("ica");
  cfg.ica.n_components = ica.at("n_components").get<std::size_t>();
  cfg.ica.max_iter = ica.at("max_iter").get<std::size_t>();
  cfg.ica.tol = ica.at("tol").get<double>();
  cfg.ica.nonlinearity = parse_nonlinearity(ica.at("nonlinearity").get<std::string>());
  cfg.ica.seed = ica.at("seed").get<std::uint64_t>();
  cfg.features.t = j.at("features").at("t").get<double>();
  cfg.features.sweep = j.at("features").at("sweep").get<std::vector<double>>();
  const auto& g = j.at("graph");
  cfg.graph.k = g.at("k").get<std::size_t>();
  cfg.graph.ring_capacity = g.at("ring_capacity").get<std::size_t>();
  cfg.graph.labels_per_edge = g.at("labels_per_edge").get<std::size_t>();
  cfg.graph.words_per_edge = g.at("words_per_edge").get<std::size_t>();
  const auto& n = j.at("naming");
  auto& ep = cfg.naming.endpoint;
  ep.base_url = n.at("base_url").get<std::string>();
  ep.model = n.at("model").get<std::string>();
  ep.timeout_seconds = n.at("timeout_seconds").get<double>();
  ep.max_retries = n.at("max_retries").get<int>();
  ep.temperature = n.at("temperature").get<double>();
  ep.retry_base_delay_ms = n.at("retry_base_delay_ms").get<int>();
  ep.concurrency = n.at("concurrency").get<std::size_t>();
  ep.fallback = n.at("fallback").get<bool>();
  cfg.naming.words = n.at("words").get<std::size_t>();
  cfg.naming.style = parse_naming_style(n.at("style").get<std::string>());
  const auto& h = j.at("harvest");
  auto& hc = cfg.harvest;
  hc.provider = h.at("provider").get<std::string>();
  hc.base_url = h.at("base_url").get<std::string>();
  hc.model = h.at("model").get<std::string>();
  hc.timeout_seconds = h.at("timeout_seconds").get<double>();
  hc.max_retries = h.at("max_retries").get<int>();
  hc.min_count = h.at("min_count").get<std::uint64_t>();
  hc.target_size = h.at("target_size").get<std::size_t>();
  hc.target_words = h.at("target_words").get<std::size_t>();
  hc.spec.layer = h.at("layer").get<std::size_t>();
  hc.spec.template_text = h.at("template").get<std::string>();
  hc.spec.position = h.at("position").get<std::string>();
  const auto& sp = h.at("sampling");
  hc.sampling.prompt = sp.at("prompt").get<std::string>();
  hc.sampling.temperature = sp.at("temperature").get<double>();
  hc.sampling.max_length = sp.at("max_tokens").get<std::size_t>();
  hc.sampling.top_k = sp.at("top_k").get<std::size_t>();
  hc.checkpoint_every = h.at("checkpoint_every").get<std::size_t>();
  hc.concurrency = h.at("concurrency").get<std::size_t>();
  hc.max_missing_fraction = h.at("max_missing_fraction").get<double>();
  const auto& s = j.at("synthetic");
  auto& sc = cfg.synthetic;
  sc.n_words = s.at("n_words").get<std::size_t>();
  sc.n_features = s.at("n_features").get<std::size_t>();
  sc.dim = s.at("dim").get<std::size_t>();
  sc.actives_per_word = s.at("actives_per_word").get<double>();
  sc.noise_sigma = s.at("noise_sigma").get<double>();
  sc.seed = s.at("seed").get<std::uint64_t>();
  sc.identity_mixing = s.at("identity_mixing").get<bool>();
  return cfg;
}

void validate_config(const PipelineConfig& cfg) {
  Threshold{cfg.features.t};
  for (double t : cfg.features.sweep) Threshold{t};
  if (cfg.whiten.d < 1) throw Error("config: whiten.d must be at least 1");
  if (cfg.harvest.min_count < 1) throw Error("config: harvest.min_count must be at least 1");
  if (cfg.harvest.provider != "http" && cfg.harvest.provider != "file" && cfg.harvest.provider != "synth") {
    throw Error("config: harvest.provider must be http, file or synth");
  }
  if (cfg.naming.words < 1 || cfg.naming.words > kMaxNamingWords) throw Error("config: naming.words must be in [1, 100]");
  if (cfg.graph.ring_capacity < 1) throw Error("config: graph.ring_capacity must be at least 1");
  if (!(cfg.ica.tol > 0) || cfg.ica.max_iter < 1) throw Error("config: ica.tol must be positive and ica.max_iter >= 1");
  cfg.harvest.spec.validate();
  cfg.naming.endpoint.validate();
  cfg.synthetic.validate();
}

}  // namespace

PipelineConfig config_from_json(const nlohmann::json& overrides) {
  const std::string profile = overrides.is_object() ? overrides.value("profile", std::string("full")) : "full";
  ojson resolved = config_to_json(default_config(profile));
  reject_unknown_keys(resolved, overrides, "");
  resolved.merge_patch(ojson(overrides));
  auto cfg = parse_config(resolved);
  validate_config(cfg);
  return cfg;
}

PipelineConfig resolve_config(const CliFlags& flags) {
  nlohmann::json overrides = nlohmann::json::object();
  if (flags.config_path) {
    try {
      overrides = nlohmann::json::parse(read_file(*flags.config_path));
    } catch (const nlohmann::json::exception& e) {
      throw Error("config " + *flags.config_path + ": " + e.what());
    }
  }
  if (flags.profile) overrides["profile"] = *flags.profile;
  PipelineConfig cfg = config_from_json(overrides);
  if (flags.workdir) cfg.paths.workdir = *flags.workdir;
  if (flags.provider) cfg.harvest.provider = *flags.provider;
  if (flags.input) cfg.paths.corpus = *flags.input;
  if (flags.matrix) cfg.paths.matrix = *flags.matrix;
  if (flags.seed) {
    cfg.ica.seed = *flags.seed;
    cfg.synthetic.seed = *flags.seed;
  }
  if (flags.d) cfg.whiten.d = *flags.d;
  if (flags.t) cfg.features.t = *flags.t;
  if (flags.k) cfg.graph.k = *flags.k;
  validate_config(cfg);
  return cfg;
}

const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names = {"vocab", "harvest", "synth", "whiten", "ica",  "binarize",
                                                 "orient", "graph", "name",  "ego",    "sweep-t", "recover-eval"};
  return names;
}

namespace {

// ---- workdir state ------------------------------------------------------------

struct ArtifactInfo {
  std::vector<std::string> files;
  std::vector<std::string> downstream;
  std::string missing_message;
};

const std::map<std::string, ArtifactInfo>& artifacts() {
  static const std::map<std::string, ArtifactInfo> table = {
      {"vocab", {{"vocab.tsv"}, {"raw"}, "missing vocabulary; run `vocab` or `synth` first"}},
      {"raw", {{"raw.scm"}, {"whitened", "truth"}, "missing raw matrix; run `harvest` or `synth` first"}},
      {"truth",
       {{"synth/truth.scm", "synth/mixing.scm"}, {}, "missing synthetic ground truth; run `synth` first"}},
      {"whitened",
       {{"whitened.scm", "whiten/mean.scm", "whiten/projection.scm", "whiten/explained_variance.scm",
         "whiten/manifest.json"},
        {"components"},
        "missing whitened matrix; run `whiten` first"}},
      {"components",
       {{"components.scm", "ica/unmixing.scm", "ica/manifest.json"}, {"binary"},
        "missing component matrix; run `ica` first"}},
      {"binary",
       {{"normalized.scm", "binary.scm"}, {"metas", "graph"}, "missing binary feature matrix; run `binarize` first"}},
      {"metas", {{"components.json"}, {"graph"}, "missing component metadata; run `orient` first"}},
      {"graph", {{"graph.json", "graph.dot"}, {}, "missing component graph; run `graph` first"}},
  };
  return table;
}

std::string digest_file(const fs::path& path) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : read_file(path)) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kDigits[h & 0xf];
  return out;
}

class Workdir {
 public:
  explicit Workdir(fs::path root) : root_(std::move(root)) {
    fs::create_directories(root_);
    if (fs::exists(state_path())) state_ = ojson::parse(read_file(state_path()));
    if (!state_.contains("artifacts")) state_["artifacts"] = ojson::object();
  }

  fs::path operator/(const std::string& name) const { return root_ / name; }

  /// Throws unless the artifact exists and matches its recorded digests.
  void require(const std::string& name) const {
    const auto& info = artifacts().at(name);
    if (!state_["artifacts"].contains(name)) throw Error(info.missing_message);
    const auto& recorded = state_["artifacts"][name];
    for (const auto& file : info.files) {
      if (!fs::exists(root_ / file)) throw Error(info.missing_message);
      if (recorded.at(file).get<std::string>() != digest_file(root_ / file)) {
        throw Error(file + " changed since it was produced; rerun the step that writes it");
      }
    }
  }

  bool has(const std::string& name) const { return state_["artifacts"].contains(name); }

  /// Forgets the artifact and everything computed from it.
  void invalidate(const std::string& name) {
    state_["artifacts"].erase(name);
    for (const auto& next : artifacts().at(name).downstream) invalidate(next);
    save();
  }

  void record(const std::string& name, const std::string& producer) {
    ojson entry;
    entry["producer"] = producer;
    for (const auto& file : artifacts().at(name).files) entry[file] = digest_file(root_ / file);
    state_["artifacts"][name] = std::move(entry);
    save();
  }

 private:
  fs::path state_path() const { return root_ / "state.json"; }
  void save() const { write_file(state_path(), state_.dump(2) + "\n"); }

  fs::path root_;
  ojson state_;
};

// ---- steps --------------------------------------------------------------------

struct Context {
  const PipelineConfig& cfg;
  const CliFlags& flags;
  Workdir& work;
  std::ostream& out;
};

void report(Context& ctx, const ojson& j) { ctx.out << j.dump() << '\n'; }

void step_vocab(Context& ctx) {
  const auto& h = ctx.cfg.harvest;
  Vocabulary vocab;
  if (!ctx.cfg.paths.corpus.empty()) {
    std::ifstream in(ctx.cfg.paths.corpus, std::ios::binary);
    if (!in) throw Error("cannot open corpus " + ctx.cfg.paths.corpus);
    vocab = build_vocab(in, h.min_count, h.target_size);
  } else {
    HttpCompletionClient client(h.base_url, h.model, h.timeout_seconds,
                                RetryPolicy{h.max_retries, std::chrono::milliseconds(500)});
    const std::string text = sample_text(client, h.sampling, h.target_words);
    write_file(ctx.work / "corpus-sample.txt", text);
    vocab = build_vocab(text, h.min_count, h.target_size);
  }
  ctx.work.invalidate("vocab");
  write_vocab(vocab, ctx.work / "vocab.tsv");
  ctx.work.record("vocab", "vocab");
  report(ctx, {{"step", "vocab"}, {"words", vocab.size()}, {"min_count", h.min_count}});
}

void step_synth(Context& ctx) {
  const auto data = synth_generate(ctx.cfg.synthetic);
  ctx.work.invalidate("vocab");
  fs::create_directories(ctx.work / "synth");
  write_vocab(synthetic_vocab(ctx.cfg.synthetic.n_words), ctx.work / "vocab.tsv");
  write_matrix(data.x, ctx.work / "raw.scm");
  write_bits(data.truth, ctx.work / "synth/truth.scm");
  write_matrix({RowMatrix(data.mixing), Stage::raw}, ctx.work / "synth/mixing.scm");
  ctx.work.record("vocab", "synth");
  ctx.work.record("raw", "synth");
  ctx.work.record("truth", "synth");
  const double mean_actives = static_cast<double>(data.truth.count()) / static_cast<double>(data.truth.rows());
  report(ctx, {{"step", "synth"},
               {"n_words", data.x.rows()},
               {"dim", data.x.cols()},
               {"n_features", data.truth.cols()},
               {"mean_actives", mean_actives},
               {"seed", ctx.cfg.synthetic.seed}});
}

void step_harvest(Context& ctx) {
  ctx.work.require("vocab");
  const auto& h = ctx.cfg.harvest;
  const Vocabulary vocab = read_vocab(ctx.work / "vocab.tsv");
  std::unique_ptr<StateProvider> provider;
  if (h.provider == "http") {
    provider = std::make_unique<HttpStateProvider>(h.base_url, h.timeout_seconds,
                                                   RetryPolicy{h.max_retries, std::chrono::milliseconds(500)});
  } else if (h.provider == "file") {
    if (ctx.cfg.paths.matrix.empty()) throw Error("file provider needs paths.matrix (or --matrix)");
    provider = std::make_unique<FileStateProvider>(fs::path(ctx.cfg.paths.matrix));
  } else {
    provider = std::make_unique<SyntheticStateProvider>(ctx.cfg.synthetic);
  }
  HarvestOptions options;
  options.checkpoint_dir = ctx.work / "harvest-checkpoint";
  options.checkpoint_every = h.checkpoint_every;
  options.concurrency = h.concurrency;
  options.max_missing_fraction = h.max_missing_fraction;
  auto result = harvest_states(*provider, vocab, h.spec, options);

  if (!result.missing.empty()) {
    auto [kept_vocab, kept] = drop_rows(vocab, result.states, result.missing);
    ojson missing = ojson::array();
    for (auto r : result.missing) missing.push_back(vocab.word(r));
    write_file(ctx.work / "missing.json", missing.dump(2) + "\n");
    ctx.work.invalidate("vocab");
    write_vocab(kept_vocab, ctx.work / "vocab.tsv");
    ctx.work.record("vocab", "harvest");
    result.states = std::move(kept);
  } else {
    ctx.work.invalidate("raw");
  }
  write_matrix(result.states, ctx.work / "raw.scm");
  ctx.work.record("raw", "harvest");
  fs::remove_all(ctx.work / "harvest-checkpoint");
  report(ctx, {{"step", "harvest"},
               {"provider", h.provider},
               {"rows", result.states.rows()},
               {"dims", result.states.cols()},
               {"missing", result.missing.size()},
               {"layer", h.spec.layer}});
}

void step_whiten(Context& ctx) {
  ctx.work.require("raw");
  const auto x = read_matrix(ctx.work / "raw.scm");
  auto fit = fit_whiten(x, ctx.cfg.whiten.d);
  ctx.work.invalidate("whitened");
  save_whitening(fit.model, ctx.work / "whiten");
  write_matrix(fit.z, ctx.work / "whitened.scm");
  ctx.work.record("whitened", "whiten");
  const double total = fit.model.explained_variance.sum();
  report(ctx, {{"step", "whiten"}, {"input_dims", fit.model.input_dims()}, {"d", fit.model.reduced_dims()},
               {"retained_variance", total}});
}

void step_ica(Context& ctx) {
  ctx.work.require("whitened");
  const auto z = read_matrix(ctx.work / "whitened.scm", Stage::whitened);
  auto fit = fit_ica(z, ctx.cfg.ica);
  ctx.work.invalidate("components");
  save_ica(fit.model, ctx.work / "ica");
  write_matrix(fit.components, ctx.work / "components.scm");
  ctx.work.record("components", "ica");
  report(ctx, {{"step", "ica"},
               {"components", fit.components.cols()},
               {"n_iter", fit.model.n_iter},
               {"converged", fit.model.converged},
               {"seed", fit.model.seed}});
}

ojson sweep_json(const RepresentationMatrix& n, const std::vector<double>& thresholds) {
  ojson rows = ojson::array();
  for (const auto& p : threshold_sweep(n, thresholds)) {
    rows.push_back({{"t", p.t},
                    {"density", p.density},
                    {"mean_active_per_word", p.mean_active_per_word},
                    {"empty_components", p.empty_components}});
  }
  return rows;
}

void step_binarize(Context& ctx) {
  ctx.work.require("components");
  const auto m = read_matrix(ctx.work / "components.scm", Stage::components);
  const auto normalized = normalize_rows(m);
  if (!normalized.zero_rows.empty()) {
    log::warn("binarize.zero_rows", {{"count", normalized.zero_rows.size()}, {"rows", normalized.zero_rows}});
  }
  const auto b = binarize(normalized.normalized, Threshold(ctx.cfg.features.t));
  ctx.work.invalidate("binary");
  write_matrix(normalized.normalized, ctx.work / "normalized.scm");
  write_bits(b, ctx.work / "binary.scm");
  ctx.work.record("binary", "binarize");
  const auto sweep = sweep_json(normalized.normalized, ctx.cfg.features.sweep);
  write_file(ctx.work / "sensitivity.json", sweep.dump(2) + "\n");
  report(ctx, {{"step", "binarize"},
               {"t", ctx.cfg.features.t},
               {"density", static_cast<double>(b.count()) / static_cast<double>(std::max<std::size_t>(1, b.rows() * b.cols()))},
               {"zero_rows", normalized.zero_rows.size()},
               {"sensitivity", sweep}});
}

void step_orient(Context& ctx) {
  ctx.work.require("components");
  ctx.work.require("binary");
  const auto m = read_matrix(ctx.work / "components.scm", Stage::components);
  const auto b = read_bits(ctx.work / "binary.scm");
  const auto metas = orient_components(m, b);
  ctx.work.invalidate("metas");
  write_file(ctx.work / "components.json", metas_to_json(metas).dump(2) + "\n");
  ctx.work.record("metas", "orient");
  std::size_t negative = 0;
  for (const auto& meta : metas) negative += meta.orientation < 0 ? 1 : 0;
  report(ctx, {{"step", "orient"}, {"components", metas.size()}, {"negative", negative}});
}

std::vector<ComponentMeta> load_metas(const Workdir& work) {
  return metas_from_json(nlohmann::json::parse(read_file(work / "components.json")));
}

void step_name(Context& ctx) {
  ctx.work.require("vocab");
  ctx.work.require("binary");
  ctx.work.require("metas");
  const auto vocab = read_vocab(ctx.work / "vocab.tsv");
  const auto n = read_matrix(ctx.work / "normalized.scm", Stage::normalized);
  Namer namer(ctx.cfg.naming.endpoint, ctx.work / "naming-cache.jsonl", ctx.work / "naming-audit.jsonl");
  auto result = name_all(n, vocab, load_metas(ctx.work), namer, {ctx.cfg.naming.words, ctx.cfg.naming.style});
  write_file(ctx.work / "components.json", metas_to_json(result.metas).dump(2) + "\n");
  // Recorded without invalidating the graph.
  ctx.work.record("metas", "name");
  ojson failures = ojson::array();
  for (const auto& f : result.failures) {
    failures.push_back({{"component", f.component}, {"end", to_string(f.end)}, {"error", f.message}});
  }
  report(ctx, {{"step", "name"},
               {"components", result.metas.size()},
               {"cache_hits", result.cache_hits},
               {"fallbacks", result.fallbacks},
               {"failures", failures}});
}

void step_graph(Context& ctx) {
  ctx.work.require("vocab");
  ctx.work.require("binary");
  ctx.work.require("metas");
  const auto vocab = read_vocab(ctx.work / "vocab.tsv");
  const auto n = read_matrix(ctx.work / "normalized.scm", Stage::normalized);
  const auto b = read_bits(ctx.work / "binary.scm");
  const auto g = build_graph(b, load_metas(ctx.work), vocab, n, {ctx.cfg.graph.k, ctx.cfg.graph.words_per_edge});
  ctx.work.invalidate("graph");
  write_file(ctx.work / "graph.json", export_json(g));
  write_file(ctx.work / "graph.dot", export_dot(g, ctx.cfg.graph.labels_per_edge));
  ctx.work.record("graph", "graph");
  report(ctx, {{"step", "graph"}, {"k", g.k}, {"nodes", g.nodes.size()}, {"edges", g.edges.size()}});
}

void step_ego(Context& ctx) {
  ctx.work.require("graph");
  ctx.work.require("metas");
  ctx.work.require("binary");
  ctx.work.require("vocab");
  auto g = graph_from_json(nlohmann::json::parse(read_file(ctx.work / "graph.json")));
  // Overlay current names.
  const auto metas = load_metas(ctx.work);
  for (auto& node : g.nodes)
    for (const auto& meta : metas)
      if (meta.index == node.index) node = meta;

  std::size_t center = 0;
  if (ctx.flags.center) {
    center = *ctx.flags.center;
  } else {
    std::vector<std::size_t> degree(g.nodes.size(), 0);
    for (const auto& e : g.edges) {
      if (e.a < degree.size()) ++degree[e.a];
      if (e.b < degree.size()) ++degree[e.b];
    }
    center = static_cast<std::size_t>(std::max_element(degree.begin(), degree.end()) - degree.begin());
  }
  EgoLayout layout = ego_subgraph(g, center, {ctx.cfg.graph.ring_capacity, ctx.cfg.graph.labels_per_edge, 5});
  annotate_triangles(layout, read_bits(ctx.work / "binary.scm"), read_vocab(ctx.work / "vocab.tsv"),
                     read_matrix(ctx.work / "normalized.scm", Stage::normalized));
  const std::string stem = "ego-" + std::to_string(center);
  write_file(ctx.work / (stem + ".dot"), export_dot(layout));
  write_file(ctx.work / (stem + ".json"), export_json(layout));
  write_file(ctx.work / (stem + ".tex"), export_tikz(layout));
  report(ctx, {{"step", "ego"},
               {"center", center},
               {"ring", layout.ring.size()},
               {"overflow", layout.overflow.size()},
               {"triangles", layout.triangles.size()},
               {"files", {stem + ".dot", stem + ".json", stem + ".tex"}}});
}

void step_sweep(Context& ctx) {
  ctx.work.require("binary");
  const auto n = read_matrix(ctx.work / "normalized.scm", Stage::normalized);
  const auto sweep = sweep_json(n, ctx.cfg.features.sweep);
  write_file(ctx.work / "sweep.json", sweep.dump(2) + "\n");
  report(ctx, {{"step", "sweep-t"}, {"sweep", sweep}});
}

void step_recover_eval(Context& ctx) {
  ctx.work.require("truth");
  ctx.work.require("whitened");
  ctx.work.require("components");
  ctx.work.require("binary");
  const auto truth = read_bits(ctx.work / "synth/truth.scm");
  const Matrix mixing = read_matrix(ctx.work / "synth/mixing.scm").values;
  const auto b = read_bits(ctx.work / "binary.scm");
  const auto n = read_matrix(ctx.work / "normalized.scm", Stage::normalized);
  if (truth.rows() != b.rows()) throw Error("recover-eval: ground truth and binary matrix differ in rows");

  const auto at_t = match_binary(b, truth);
  ojson sweep = ojson::array();
  double best_f1 = -1.0;
  double best_t = 0.0;
  for (double t : ctx.cfg.features.sweep) {
    const auto m = match_binary(binarize(n, Threshold(t)), truth);
    sweep.push_back({{"t", t}, {"micro_f1", m.micro_f1}});
    if (m.micro_f1 > best_f1) {
      best_f1 = m.micro_f1;
      best_t = t;
    }
  }

  ojson amari = nullptr;
  const auto whitening = load_whitening(ctx.work / "whiten");
  const auto ica = load_ica(ctx.work / "ica");
  const Matrix unmixing = compose_unmixing(whitening, ica);
  if (unmixing.rows() == mixing.rows() && unmixing.cols() == mixing.cols()) {
    amari = amari_index(unmixing, mixing.transpose());
  } else {
    log::warn("recover_eval.amari_skipped", {{"components", unmixing.rows()}, {"features", mixing.rows()}});
  }

  ojson result;
  result["step"] = "recover-eval";
  result["t"] = ctx.cfg.features.t;
  result["micro_f1"] = at_t.micro_f1;
  result["best_t"] = best_t;
  result["best_micro_f1"] = best_f1;
  result["amari_index"] = amari;
  result["sweep"] = sweep;
  write_file(ctx.work / "recovery.json", result.dump(2) + "\n");
  report(ctx, result);
}

}  // namespace

int run_subcommand(std::string_view name, const PipelineConfig& cfg, const CliFlags& flags, std::ostream& out) {
  static const std::map<std::string, std::function<void(Context&)>, std::less<>> steps = {
      {"vocab", step_vocab},       {"harvest", step_harvest},   {"synth", step_synth},  {"whiten", step_whiten},
      {"ica", step_ica},           {"binarize", step_binarize}, {"orient", step_orient}, {"graph", step_graph},
      {"name", step_name},         {"ego", step_ego},           {"sweep-t", step_sweep}, {"recover-eval", step_recover_eval},
  };
  if (flags.dry_run) {
    out << config_to_json(cfg).dump(2) << '\n';
    return 0;
  }
  const auto it = steps.find(name);
  if (it == steps.end()) {
    log::emit(log::Level::error, "cli.unknown_subcommand", {{"name", name}});
    return 2;
  }
  try {
    Workdir work(cfg.paths.workdir);
    Context ctx{cfg, flags, work, out};
    it->second(ctx);
    return 0;
  } catch (const std::exception& e) {
    log::emit(log::Level::error, "cli.failed", {{"subcommand", name}, {"error", e.what()}});
    return 1;
  }
}

}  // namespace semcomp
