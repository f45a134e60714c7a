#include "semcomp/harvest.hpp"

#include <algorithm>
#include <cmath>
#include <atomic>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "semcomp/log.hpp"
#include "semcomp/matrixio.hpp"

namespace semcomp {
namespace {

bool is_word_char(unsigned char c) {
  return c >= 0x80 || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool is_connector(unsigned char c) { return c == '-' || c == '_' || c == '/' || c == '\'' || c == '.'; }

template <typename Fn>
void for_each_token(std::string_view text, Fn&& fn) {
  std::string token;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_word_char(c)) {
      token += static_cast<char>(c);
    } else if (is_connector(c) && !token.empty() && i + 1 < text.size() &&
               is_word_char(static_cast<unsigned char>(text[i + 1]))) {
      token += static_cast<char>(c);
    } else if (!token.empty()) {
      fn(std::move(token));
      token.clear();
    }
  }
  if (!token.empty()) fn(std::move(token));
}

struct Tally {
  std::uint64_t count = 0;
  std::size_t first = 0;
};

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  for_each_token(text, [&](std::string t) { tokens.push_back(std::move(t)); });
  return tokens;
}

Vocabulary build_vocab(std::istream& text, std::uint64_t min_count, std::size_t target_size) {
  if (min_count < 1) throw Error("build_vocab: min_count must be at least 1");
  std::unordered_map<std::string, Tally> tallies;
  std::vector<const std::string*> order;
  std::size_t tokens = 0;
  std::string line;
  while (std::getline(text, line)) {
    for_each_token(line, [&](std::string t) {
      auto [it, inserted] = tallies.try_emplace(std::move(t), Tally{0, order.size()});
      if (inserted) order.push_back(&it->first);
      ++it->second.count;
      ++tokens;
    });
  }

  std::vector<const std::string*> kept;
  for (const auto* word : order)
    if (tallies.at(*word).count >= min_count) kept.push_back(word);
  std::stable_sort(kept.begin(), kept.end(), [&](const std::string* a, const std::string* b) {
    return tallies.at(*a).count > tallies.at(*b).count;
  });
  if (kept.size() > target_size) kept.resize(target_size);

  Vocabulary vocab;
  for (const auto* word : kept) vocab.add(*word, tallies.at(*word).count);
  if (vocab.size() < target_size) {
    log::warn("vocab.short", {{"size", vocab.size()}, {"target_size", target_size}, {"min_count", min_count},
                              {"tokens_seen", tokens}});
  }
  return vocab;
}

Vocabulary build_vocab(std::string_view text, std::uint64_t min_count, std::size_t target_size) {
  std::istringstream in{std::string(text)};
  return build_vocab(in, min_count, target_size);
}

HttpCompletionClient::HttpCompletionClient(std::string base_url, std::string model, double timeout_seconds,
                                           RetryPolicy retry, std::string api_key)
    : client_(std::move(base_url), timeout_seconds, std::move(api_key)), model_(std::move(model)), retry_(retry) {}

nlohmann::ordered_json HttpCompletionClient::request_body(const SamplingParams& params, const std::string& model) {
  nlohmann::ordered_json body;
  if (!model.empty()) body["model"] = model;
  body["prompt"] = params.prompt;
  body["temperature"] = params.temperature;
  body["max_tokens"] = params.max_length;
  if (params.top_k > 0) body["top_k"] = params.top_k;
  return body;
}

std::string HttpCompletionClient::complete(const SamplingParams& params) {
  const auto response = client_.post("/completions", request_body(params, model_), retry_);
  const auto& choices = response.at("choices");
  if (!choices.is_array() || choices.empty()) throw HttpError("completion response has no choices", 200);
  return choices.at(0).at("text").get<std::string>();
}

std::string sample_text(CompletionClient& client, const SamplingParams& params, std::size_t target_word_count) {
  std::string out;
  std::size_t words = 0;
  std::size_t barren = 0;
  while (words < target_word_count) {
    const std::string sample = client.complete(params);
    const std::size_t n = tokenize(sample).size();
    if (n == 0) {
      if (++barren >= 100) throw Error("sample_text: endpoint returned 100 consecutive samples without words");
      continue;
    }
    barren = 0;
    words += n;
    out += sample;
    out += '\n';
  }
  return out;
}

void HarvestSpec::validate() const {
  const auto first = template_text.find("<w>");
  if (first == std::string::npos || template_text.find("<w>", first + 1) != std::string::npos) {
    throw Error("harvest template must contain exactly one <w> slot: \"" + template_text + "\"");
  }
  if (position != "last") throw Error("harvest position must be \"last\"");
}

std::string HarvestSpec::instantiate(std::string_view word) const {
  std::string prompt = template_text;
  prompt.replace(prompt.find("<w>"), 3, word);
  return prompt;
}

HttpStateProvider::HttpStateProvider(std::string base_url, double timeout_seconds, RetryPolicy retry,
                                     std::string api_key)
    : client_(std::move(base_url), timeout_seconds, std::move(api_key)), retry_(retry) {}

std::vector<double> HttpStateProvider::fetch(const HarvestItem& item) {
  const nlohmann::ordered_json body = {{"prompt", item.prompt}, {"layer", item.layer}, {"position", item.position}};
  const auto response = client_.post("/hidden_states", body, retry_);
  return response.at("vector").get<std::vector<double>>();
}

FileStateProvider::FileStateProvider(const std::filesystem::path& path) : matrix_(read_matrix(path)) {}

std::vector<double> FileStateProvider::fetch(const HarvestItem& item) {
  if (item.row >= matrix_.rows()) {
    throw Error("file provider has " + std::to_string(matrix_.rows()) + " rows, asked for row " + std::to_string(item.row));
  }
  const auto row = matrix_.values.row(static_cast<Eigen::Index>(item.row));
  return {row.data(), row.data() + row.size()};
}

namespace {

std::uint64_t vocab_fingerprint(const Vocabulary& vocab) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& w : vocab.words()) {
    for (unsigned char c : w) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    h ^= 0xff;
    h *= 0x100000001b3ull;
  }
  return h;
}

struct Progress {
  std::size_t next_row = 0;
  std::size_t dims = 0;
  std::vector<double> values;  // next_row * dims, row-major
  std::vector<std::size_t> missing;
};

RepresentationMatrix to_matrix(const Progress& p) {
  RowMatrix m = RowMatrix::Zero(static_cast<Eigen::Index>(p.next_row), static_cast<Eigen::Index>(p.dims));
  if (!p.values.empty()) std::copy(p.values.begin(), p.values.end(), m.data());
  return {std::move(m), Stage::raw};
}

void commit(const Progress& p, const std::filesystem::path& dir, const Vocabulary& vocab) {
  write_matrix(to_matrix(p), dir / "checkpoint.scm");
  nlohmann::ordered_json cursor;
  cursor["next_row"] = p.next_row;
  cursor["missing"] = p.missing;
  cursor["vocab_size"] = vocab.size();
  cursor["vocab_hash"] = vocab_fingerprint(vocab);
  write_file(dir / "cursor.json", cursor.dump() + "\n");
}

Progress resume(const std::filesystem::path& dir, const Vocabulary& vocab) {
  Progress p;
  if (!std::filesystem::exists(dir / "cursor.json")) return p;
  const auto cursor = nlohmann::json::parse(read_file(dir / "cursor.json"));
  if (cursor.at("vocab_size").get<std::size_t>() != vocab.size() ||
      cursor.at("vocab_hash").get<std::uint64_t>() != vocab_fingerprint(vocab)) {
    throw Error("checkpoint in " + dir.string() + " belongs to a different vocabulary");
  }
  p.next_row = cursor.at("next_row").get<std::size_t>();
  p.missing = cursor.at("missing").get<std::vector<std::size_t>>();
  const auto m = read_matrix(dir / "checkpoint.scm");
  if (m.rows() != p.next_row || p.next_row > vocab.size()) {
    throw Error("checkpoint in " + dir.string() + " is inconsistent with its cursor");
  }
  p.dims = m.cols();
  p.values.assign(m.values.data(), m.values.data() + m.values.size());
  log::info("harvest.resume", {{"next_row", p.next_row}, {"missing", p.missing.size()}});
  return p;
}

}  // namespace

HarvestResult harvest_states(StateProvider& provider, const Vocabulary& vocab, const HarvestSpec& spec,
                             const HarvestOptions& options) {
  spec.validate();
  if (vocab.empty()) throw Error("harvest: vocabulary is empty");
  if (options.checkpoint_every < 1) throw Error("harvest: checkpoint_every must be at least 1");
  const std::size_t total = vocab.size();
  const auto budget = static_cast<std::size_t>(options.max_missing_fraction * static_cast<double>(total));

  Progress progress;
  if (options.checkpoint_dir) {
    std::filesystem::create_directories(*options.checkpoint_dir);
    progress = resume(*options.checkpoint_dir, vocab);
  }

  while (progress.next_row < total) {
    const std::size_t begin = progress.next_row;
    const std::size_t end = std::min(total, begin + options.checkpoint_every);
    std::vector<std::vector<double>> rows(end - begin);
    std::vector<char> ok(end - begin, 0);

    std::atomic<std::size_t> next{begin};
    auto worker = [&] {
      for (std::size_t i = next++; i < end; i = next++) {
        HarvestItem item{i, vocab.word(i), spec.instantiate(vocab.word(i)), spec.layer, spec.position};
        for (int attempt = 0; attempt <= options.retries; ++attempt) {
          try {
            rows[i - begin] = provider.fetch(item);
            ok[i - begin] = 1;
            break;
          } catch (const std::exception& e) {
            if (attempt == options.retries) {
              log::warn("harvest.missing_row", {{"row", i}, {"word", item.word}, {"error", e.what()}});
            }
          }
        }
      }
    };
    const std::size_t threads = provider.concurrent() ? std::max<std::size_t>(1, std::min(options.concurrency, end - begin)) : 1;
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    if (progress.dims == 0) {
      for (std::size_t i = begin; i < end; ++i) {
        if (ok[i - begin]) {
          progress.dims = rows[i - begin].size();
          break;
        }
      }
      if (progress.dims > 0) progress.values.assign(progress.next_row * progress.dims, 0.0);
    }
    for (std::size_t i = begin; i < end; ++i) {
      if (ok[i - begin]) {
        const auto& row = rows[i - begin];
        if (row.empty() || row.size() != progress.dims) {
          throw Error("harvest: provider returned " + std::to_string(row.size()) + " values for row " +
                      std::to_string(i) + ", expected " + std::to_string(progress.dims));
        }
        for (double v : row)
          if (!std::isfinite(v)) throw Error("harvest: non-finite value in row " + std::to_string(i));
      } else {
        progress.missing.push_back(i);
      }
    }
    if (progress.missing.size() > budget) {
      throw Error("harvest: " + std::to_string(progress.missing.size()) + " of " + std::to_string(total) +
                  " rows missing, above the " + std::to_string(options.max_missing_fraction * 100.0) + "% limit");
    }
    for (std::size_t i = begin; i < end; ++i) {
      if (ok[i - begin]) {
        progress.values.insert(progress.values.end(), rows[i - begin].begin(), rows[i - begin].end());
      } else {
        progress.values.insert(progress.values.end(), progress.dims, 0.0);
      }
    }
    progress.next_row = end;
    if (options.checkpoint_dir) commit(progress, *options.checkpoint_dir, vocab);
    log::info("harvest.progress", {{"next_row", progress.next_row}, {"total", total}});
  }

  if (progress.dims == 0) throw Error("harvest: provider delivered no rows");
  return {to_matrix(progress), progress.missing};
}

std::pair<Vocabulary, RepresentationMatrix> drop_rows(const Vocabulary& vocab, const RepresentationMatrix& m,
                                                      const std::vector<std::size_t>& rows) {
  if (vocab.size() != m.rows()) throw Error("drop_rows: vocabulary does not match matrix rows");
  std::vector<char> drop(vocab.size(), 0);
  for (auto r : rows) {
    if (r >= drop.size()) throw Error("drop_rows: row out of range");
    drop[r] = 1;
  }
  Vocabulary kept_vocab;
  std::vector<Eigen::Index> kept;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (drop[i]) continue;
    kept_vocab.add(vocab.word(i), vocab.count(i));
    kept.push_back(static_cast<Eigen::Index>(i));
  }
  RowMatrix values(static_cast<Eigen::Index>(kept.size()), m.values.cols());
  for (std::size_t i = 0; i < kept.size(); ++i) values.row(static_cast<Eigen::Index>(i)) = m.values.row(kept[i]);
  return {std::move(kept_vocab), RepresentationMatrix(std::move(values), m.stage)};
}

}  // namespace semcomp
