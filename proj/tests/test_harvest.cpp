#include <doctest.h>

#include <atomic>
#include <map>
#include <sstream>
#include <unordered_map>

#include "semcomp/harvest.hpp"
#include "semcomp/log.hpp"
#include "semcomp/matrixio.hpp"
#include "support.hpp"

using namespace semcomp;

namespace {

/// Deterministic vector for a prompt: byte statistics, recomputed independently below.
std::vector<double> mock_vector(const std::string& prompt, std::size_t layer) {
  double sum = 0, sq = 0;
  for (unsigned char c : prompt) {
    sum += c;
    sq += static_cast<double>(c) * c;
  }
  return {sum, sq / 1000.0, static_cast<double>(prompt.size()), static_cast<double>(layer)};
}

class CountingProvider : public StateProvider {
 public:
  explicit CountingProvider(std::size_t fail_from = SIZE_MAX) : fail_from_(fail_from) {}
  std::vector<double> fetch(const HarvestItem& item) override {
    ++calls;
    if (item.row >= fail_from_) throw Error("provider down");
    return mock_vector(item.prompt, item.layer);
  }
  std::atomic<std::size_t> calls{0};

 private:
  std::size_t fail_from_;
};

Vocabulary words(std::size_t n) {
  Vocabulary v;
  for (std::size_t i = 0; i < n; ++i) v.add("word" + std::to_string(i), n - i);
  return v;
}

}  // namespace

TEST_CASE("tokenizer keeps word-internal connectors") {
  CHECK(tokenize("pop-rock, search_word; actress/singer it's U.S. end.") ==
        std::vector<std::string>{"pop-rock", "search_word", "actress/singer", "it's", "U.S", "end"});
  CHECK(tokenize("--lead trail-- a--b") == std::vector<std::string>{"lead", "trail", "a", "b"});
  CHECK(tokenize("caf\xC3\xA9 na\xC3\xAFve") == std::vector<std::string>{"caf\xC3\xA9", "na\xC3\xAFve"});
  CHECK(tokenize("").empty());
}

TEST_CASE("build_vocab examples") {
  const auto v = build_vocab(std::string_view("the cat the cat the cat the cat the cat"), 5, 250000);
  REQUIRE(v.size() == 2);
  CHECK(v.word(0) == "the");
  CHECK(v.count(0) == 5);
  CHECK(v.word(1) == "cat");
  CHECK(v.count(1) == 5);

  std::vector<std::string> events;
  log::ScopedSink sink([&](log::Level, std::string_view event, const nlohmann::json&) { events.emplace_back(event); });
  const auto empty = build_vocab(std::string_view("the cat the cat the cat the cat the cat"), 6, 250000);
  CHECK(empty.empty());
  CHECK(std::find(events.begin(), events.end(), "vocab.short") != events.end());
}

TEST_CASE("build_vocab matches a hash-map recount") {
  std::mt19937_64 rng(51);
  std::uniform_int_distribution<int> pick(0, 499);
  std::ostringstream text;
  std::vector<std::string> tokens;
  for (int i = 0; i < 10000; ++i) {
    tokens.push_back("t" + std::to_string(pick(rng) % (1 + pick(rng))));
    text << tokens.back() << ((i % 13 == 0) ? "\n" : " ");
  }
  std::unordered_map<std::string, std::uint64_t> counts;
  std::unordered_map<std::string, std::size_t> first;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    ++counts[tokens[i]];
    first.emplace(tokens[i], i);
  }
  std::vector<std::string> expect;
  for (const auto& [w, c] : counts)
    if (c >= 3) expect.push_back(w);
  std::sort(expect.begin(), expect.end(), [&](const auto& a, const auto& b) {
    return counts[a] != counts[b] ? counts[a] > counts[b] : first[a] < first[b];
  });
  expect.resize(std::min<std::size_t>(expect.size(), 120));

  std::istringstream in(text.str());
  const auto v = build_vocab(in, 3, 120);
  REQUIRE(v.size() == expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) {
    CHECK(v.word(i) == expect[i]);
    CHECK(v.count(i) == counts[expect[i]]);
  }
  std::istringstream again(text.str());
  CHECK(build_vocab(again, 3, 120) == v);
}

TEST_CASE("sampling defaults and request bodies") {
  const SamplingParams defaults;
  CHECK(defaults.temperature == 1.1);
  CHECK(defaults.max_length == 100);
  CHECK(defaults.top_k == 0);

  testsupport::MockServer server([](const std::string&, const nlohmann::json&, httplib::Response& res) {
    res.set_content(R"({"choices":[{"text":"one two three four"}]})", "application/json");
  });
  HttpCompletionClient client(server.base_url(), "m", 10.0, RetryPolicy{0, std::chrono::milliseconds(1)});
  const auto text = sample_text(client, defaults, 10);
  CHECK(server.count() == 3);
  CHECK(tokenize(text).size() == 12);
  for (const auto& body : server.bodies()) {
    CHECK(body["temperature"] == 1.1);
    CHECK(body["max_tokens"] == 100);
    CHECK(body["prompt"] == "");
    CHECK_FALSE(body.contains("top_k"));
  }
  CHECK(server.paths()[0] == "/v1/completions");

  CHECK(sample_text(client, defaults, 0).empty());
  CHECK(server.count() == 3);

  SamplingParams k = defaults;
  k.top_k = 40;
  CHECK(HttpCompletionClient::request_body(k, "")["top_k"] == 40);
  CHECK_FALSE(HttpCompletionClient::request_body(k, "").contains("model"));
}

TEST_CASE("sample_text gives up on an endpoint that yields nothing") {
  testsupport::MockServer server([](const std::string&, const nlohmann::json&, httplib::Response& res) {
    res.set_content(R"({"choices":[{"text":"  "}]})", "application/json");
  });
  HttpCompletionClient client(server.base_url());
  CHECK_THROWS_AS(sample_text(client, {}, 5), Error);
}

TEST_CASE("prompt template needs exactly one slot") {
  HarvestSpec spec;
  CHECK(spec.layer == 8);
  CHECK(spec.instantiate("cat") == "The meaning of the word cat");
  spec.template_text = "no slot";
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.template_text = "<w> and <w>";
  CHECK_THROWS_AS(spec.validate(), Error);
  CountingProvider p;
  spec.template_text = "nothing";
  CHECK_THROWS_AS(harvest_states(p, words(3), spec), Error);
}

TEST_CASE("file provider passes a matrix through") {
  std::mt19937_64 rng(52);
  const RepresentationMatrix m(testsupport::random_matrix(rng, 30, 4), Stage::raw);
  testsupport::TempDir dir("harvest");
  write_matrix(m, dir / "m.scm");
  FileStateProvider p(dir / "m.scm");
  const auto r = harvest_states(p, words(30), {});
  CHECK(r.missing.empty());
  CHECK(r.states == m);
}

TEST_CASE("http provider rows follow the mock function") {
  testsupport::MockServer server([](const std::string&, const nlohmann::json& body, httplib::Response& res) {
    const auto v = mock_vector(body["prompt"], body["layer"]);
    res.set_content(nlohmann::json({{"vector", v}}).dump(), "application/json");
  });
  HttpStateProvider p(server.base_url());
  const auto vocab = words(25);
  HarvestOptions options;
  options.concurrency = 4;
  const auto r = harvest_states(p, vocab, {}, options);
  REQUIRE(r.states.rows() == 25);
  for (std::size_t i = 0; i < 25; ++i) {
    const std::string prompt = "The meaning of the word " + vocab.word(i);
    double sum = 0;
    for (unsigned char c : prompt) sum += c;
    CHECK(r.states.values(static_cast<Eigen::Index>(i), 0) == sum);
    CHECK(r.states.values(static_cast<Eigen::Index>(i), 2) == static_cast<double>(prompt.size()));
    CHECK(r.states.values(static_cast<Eigen::Index>(i), 3) == 8.0);
  }
  CHECK(server.bodies()[0]["position"] == "last");
  CHECK(server.paths()[0] == "/v1/hidden_states");
}

TEST_CASE("checkpoint resume keeps rows aligned") {
  const auto vocab = words(60);
  testsupport::TempDir dir("ckpt");
  HarvestOptions options;
  options.checkpoint_dir = dir / "ckpt";
  options.checkpoint_every = 10;
  options.concurrency = 3;
  options.retries = 0;
  log::ScopedSink quiet([](log::Level, std::string_view, const nlohmann::json&) {});

  CountingProvider failing(25);
  CHECK_THROWS_WITH_AS(harvest_states(failing, vocab, {}, options), doctest::Contains("missing"), Error);
  const auto cursor = nlohmann::json::parse(read_file(dir / "ckpt/cursor.json"));
  CHECK(cursor["next_row"] == 20);

  CountingProvider healthy;
  const auto r = harvest_states(healthy, vocab, {}, options);
  CHECK(healthy.calls == 40);
  CountingProvider fresh;
  const auto expect = harvest_states(fresh, vocab, {});
  CHECK(r.states == expect.states);

  // a checkpoint for another vocabulary is refused
  CHECK_THROWS_AS(harvest_states(healthy, words(61), {}, options), Error);
}

TEST_CASE("missing rows within budget are zero and reported") {
  log::ScopedSink quiet([](log::Level, std::string_view, const nlohmann::json&) {});
  const auto vocab = words(200);
  CountingProvider p(199);
  HarvestOptions options;
  options.retries = 1;
  const auto r = harvest_states(p, vocab, {}, options);
  CHECK(r.missing == std::vector<std::size_t>{199});
  CHECK(r.states.values.row(199).isZero());
  CHECK(p.calls == 201);
  const auto [v2, m2] = drop_rows(vocab, r.states, r.missing);
  CHECK(v2.size() == 199);
  CHECK(m2.rows() == 199);
  CHECK(v2.word(198) == "word198");
}

TEST_CASE("synthetic generator") {
  SyntheticSpec spec;
  const auto a = synth_generate(spec);
  const auto b = synth_generate(spec);
  CHECK(serialize_bits(a.truth) == serialize_bits(b.truth));
  CHECK(serialize_matrix(a.x) == serialize_matrix(b.x));
  CHECK(a.mixing == b.mixing);
  CHECK(a.x.rows() == 200);
  CHECK(a.x.cols() == 40);
  CHECK(a.truth.cols() == 12);
  // recount actives
  std::size_t actives = 0;
  for (std::size_t i = 0; i < a.truth.rows(); ++i)
    for (std::size_t f = 0; f < a.truth.cols(); ++f) actives += a.truth.get(i, f) ? 1 : 0;
  const double mean = static_cast<double>(actives) / 200.0;
  CHECK(std::abs(mean - 3.0) <= 0.5);

  spec.seed = 8;
  CHECK(serialize_matrix(synth_generate(spec).x) != serialize_matrix(a.x));

  SyntheticSpec ident;
  ident.n_features = 6;
  ident.dim = 6;
  ident.noise_sigma = 0;
  ident.identity_mixing = true;
  const auto d = synth_generate(ident);
  bool supports = true;
  for (std::size_t i = 0; i < d.truth.rows(); ++i)
    for (std::size_t f = 0; f < 6; ++f)
      supports = supports && (d.x.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) != 0.0) == d.truth.get(i, f);
  CHECK(supports);

  SyntheticSpec bad;
  bad.n_features = 50;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = {};
  bad.noise_sigma = -1;
  CHECK_THROWS_AS(bad.validate(), Error);

  const auto vocab = synthetic_vocab(3);
  CHECK(vocab.word(2) == "w0002");
  SyntheticStateProvider provider(spec);
  const auto r = harvest_states(provider, synthetic_vocab(spec.n_words), {});
  CHECK(r.states == synth_generate(spec).x);
}
