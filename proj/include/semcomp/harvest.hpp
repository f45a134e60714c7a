#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "semcomp/http.hpp"
#include "semcomp/types.hpp"

namespace semcomp {

// ---- vocabulary -------------------------------------------------------------

/// Splits on whitespace and punctuation. Hyphen, underscore, slash, apostrophe
/// and period survive when they join two word characters ("pop-rock",
/// "search_word", "actress/singer"). Bytes >= 0x80 are word characters, so
/// UTF-8 words stay whole. Case is preserved.
std::vector<std::string> tokenize(std::string_view text);

/// Counts tokens, keeps those seen at least min_count times, ranks by count
/// (descending) then first occurrence, and truncates to target_size.
Vocabulary build_vocab(std::istream& text, std::uint64_t min_count, std::size_t target_size);
Vocabulary build_vocab(std::string_view text, std::uint64_t min_count, std::size_t target_size);

// ---- sampling ---------------------------------------------------------------

struct SamplingParams {
  double temperature = 1.1;
  std::size_t max_length = 100;
  std::size_t top_k = 0;  ///< 0 disables top-k
  std::string prompt;     ///< empty prompt
};

/// Anything that returns one sampled continuation per call.
class CompletionClient {
 public:
  virtual ~CompletionClient() = default;
  virtual std::string complete(const SamplingParams& params) = 0;
};

/// POST {base_url}/completions with {"prompt", "temperature", "max_tokens"}
/// (plus "top_k" when enabled); reads choices[0].text.
class HttpCompletionClient : public CompletionClient {
 public:
  HttpCompletionClient(std::string base_url, std::string model = {}, double timeout_seconds = 120.0,
                       RetryPolicy retry = {}, std::string api_key = {});
  std::string complete(const SamplingParams& params) override;

  static nlohmann::ordered_json request_body(const SamplingParams& params, const std::string& model);

 private:
  JsonClient client_;
  std::string model_;
  RetryPolicy retry_;
};

/// Requests samples until at least target_word_count tokens were observed.
/// Samples are joined with newlines.
std::string sample_text(CompletionClient& client, const SamplingParams& params, std::size_t target_word_count);

// ---- hidden states ----------------------------------------------------------

struct HarvestSpec {
  std::size_t layer = 8;
  std::string template_text = "The meaning of the word <w>";
  std::string position = "last";

  void validate() const;
  std::string instantiate(std::string_view word) const;
};

struct HarvestItem {
  std::size_t row = 0;
  std::string word;
  std::string prompt;
  std::size_t layer = 0;
  std::string position;
};

/// Source of one representation vector per vocabulary word.
class StateProvider {
 public:
  virtual ~StateProvider() = default;
  virtual std::vector<double> fetch(const HarvestItem& item) = 0;
  /// False when fetch() must not be called from several threads at once.
  virtual bool concurrent() const { return true; }
};

/// POST {base_url}/hidden_states {"prompt","layer","position"} -> {"vector":[...]}.
class HttpStateProvider : public StateProvider {
 public:
  HttpStateProvider(std::string base_url, double timeout_seconds = 60.0, RetryPolicy retry = {}, std::string api_key = {});
  std::vector<double> fetch(const HarvestItem& item) override;

 private:
  JsonClient client_;
  RetryPolicy retry_;
};

/// Rows of a prewritten SCM1 matrix, by row index.
class FileStateProvider : public StateProvider {
 public:
  explicit FileStateProvider(RepresentationMatrix matrix) : matrix_(std::move(matrix)) {}
  explicit FileStateProvider(const std::filesystem::path& path);
  std::vector<double> fetch(const HarvestItem& item) override;

 private:
  RepresentationMatrix matrix_;
};

struct HarvestOptions {
  std::optional<std::filesystem::path> checkpoint_dir;
  std::size_t checkpoint_every = 1000;
  std::size_t concurrency = 8;
  int retries = 2;  ///< extra attempts per word after a provider failure
  double max_missing_fraction = 0.01;
};

struct HarvestResult {
  RepresentationMatrix states;       ///< missing rows are zero
  std::vector<std::size_t> missing;  ///< rows the provider never delivered
};

/// Row i is the provider's vector for vocab word i. With a checkpoint
/// directory, progress (checkpoint.scm + cursor.json {"next_row":..}) is
/// committed in order every checkpoint_every rows, and an existing
/// checkpoint is resumed.
HarvestResult harvest_states(StateProvider& provider, const Vocabulary& vocab, const HarvestSpec& spec,
                             const HarvestOptions& options = {});

/// Removes the listed rows from a matrix and its vocabulary together.
std::pair<Vocabulary, RepresentationMatrix> drop_rows(const Vocabulary& vocab, const RepresentationMatrix& m,
                                                      const std::vector<std::size_t>& rows);

// ---- synthetic ground truth -------------------------------------------------

struct SyntheticSpec {
  std::size_t n_words = 200;
  std::size_t n_features = 12;
  std::size_t dim = 40;
  double actives_per_word = 3.0;
  double noise_sigma = 0.05;
  std::uint64_t seed = 7;
  bool identity_mixing = false;  ///< requires n_features == dim

  void validate() const;
};

struct SyntheticData {
  BinaryFeatureMatrix truth;    ///< words x features
  Matrix mixing;                ///< features x dim
  RepresentationMatrix x;       ///< words x dim, stage raw
  std::vector<double> rates;    ///< Bernoulli rate per feature
};

/// Words carry independent binary features; each active feature contributes
/// a loading of random sign and magnitude 1 + |gauss| times its mixing row,
/// plus gaussian noise.
SyntheticData synth_generate(const SyntheticSpec& spec);

/// "w0000", "w0001", ... for synthetic rows.
Vocabulary synthetic_vocab(std::size_t n_words);

/// Serves rows of a synthetic matrix, like FileStateProvider.
class SyntheticStateProvider : public FileStateProvider {
 public:
  explicit SyntheticStateProvider(const SyntheticSpec& spec) : FileStateProvider(synth_generate(spec).x) {}
};

}  // namespace semcomp
