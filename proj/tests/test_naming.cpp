#include <doctest.h>

#include <atomic>
#include <fstream>

#include "semcomp/naming.hpp"
#include "support.hpp"

using namespace semcomp;

namespace {

const std::string kSystem =
    "You are a Conceptual Grouping and Naming System, designed to analyze a given group of words and identify a "
    "common theme or characteristic.";
const std::string kPrompt =
    "Given the following group of words, provide a short name that encapsulates what they have in common.";

void reply(httplib::Response& res, const std::string& content) {
  const nlohmann::json body = {{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
  res.set_content(body.dump(), "application/json");
}

/// Names a request after the first word of its list, capitalized.
void echo_first_word(const std::string&, const nlohmann::json& body, httplib::Response& res) {
  const std::string user = body["messages"][1]["content"];
  std::string first = user.substr(user.find("\n\n") + 2);
  first = first.substr(0, first.find(','));
  first[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(first[0])));
  reply(res, first);
}

ChatEndpointConfig config_for(const testsupport::MockServer& server) {
  ChatEndpointConfig cfg;
  cfg.base_url = server.base_url();
  cfg.api_key = "test-key";
  cfg.retry_base_delay_ms = 1;
  return cfg;
}

ChatEndpointConfig unreachable() {
  ChatEndpointConfig cfg;
  cfg.base_url = "http://127.0.0.1:9/v1";
  cfg.max_retries = 0;
  cfg.timeout_seconds = 2;
  return cfg;
}

}  // namespace

TEST_CASE("prompt constants are verbatim") {
  CHECK(std::string(kNamingSystemMessage) == kSystem);
  CHECK(std::string(kNamingPrompt) == kPrompt);
  CHECK(std::string(kOneWordSentence) == "If possible, use just one word.");
}

TEST_CASE("user message layout") {
  CHECK(naming_user_message(NamingStyle::one_word, {"cat", "dog"}) ==
        kPrompt + " If possible, use just one word.\n\ncat, dog");
  CHECK(naming_user_message(NamingStyle::unconstrained, {"cat"}) == kPrompt + "\n\ncat");
}

TEST_CASE("request body shape") {
  NamingRequest req;
  req.words = {"a", "b"};
  ChatEndpointConfig cfg;
  const auto body = chat_request_body(req, cfg);
  CHECK(body["model"] == "gpt-4o");
  CHECK(body["temperature"] == 0.0);
  REQUIRE(body["messages"].size() == 2);
  CHECK(body["messages"][0]["role"] == "system");
  CHECK(body["messages"][0]["content"] == kSystem);
  CHECK(body["messages"][1]["role"] == "user");
}

TEST_CASE("name_component against a mock endpoint") {
  testsupport::MockServer server([](const std::string&, const nlohmann::json&, httplib::Response& res) {
    reply(res, "Grammar\n");
  });
  NamingRequest req;
  req.words = {"the", "of", "and", "is"};
  CHECK(name_component(req, config_for(server)) == "Grammar");
  REQUIRE(server.count() == 1);
  CHECK(server.paths()[0] == "/v1/chat/completions");
  CHECK(server.auth_headers()[0] == "Bearer test-key");
  CHECK(server.raw_bodies()[0].find(nlohmann::json(kSystem).dump()) != std::string::npos);
}

TEST_CASE("fallback and errors") {
  NamingRequest req;
  req.words = {"mandolin", "ukulele", "banjo", "harp"};
  CHECK(name_component(req, unreachable()) == "mandolin+ukulele+banjo");
  CHECK(name_component(req, unreachable()) == name_component(req, unreachable()));
  auto strict = unreachable();
  strict.fallback = false;
  CHECK_THROWS_AS(name_component(req, strict), Error);

  ChatEndpointConfig disabled;
  disabled.base_url.clear();
  CHECK(name_component(req, disabled) == "mandolin+ukulele+banjo");

  NamingRequest empty;
  CHECK_THROWS_WITH_AS(name_component(empty, disabled), doctest::Contains("empty naming request"), Error);
  NamingRequest too_many;
  too_many.words.assign(101, "x");
  CHECK_THROWS_AS(too_many.validate(), Error);
}

TEST_CASE("transient server errors are retried") {
  std::atomic<int> calls{0};
  testsupport::MockServer server([&](const std::string&, const nlohmann::json&, httplib::Response& res) {
    if (calls++ == 0) {
      res.status = 503;
      return;
    }
    reply(res, "Music");
  });
  NamingRequest req;
  req.words = {"guitar"};
  CHECK(name_component(req, config_for(server)) == "Music");
  CHECK(server.count() == 2);
}

TEST_CASE("sanitizing names") {
  CHECK(sanitize_name("  \"Music.\"  \nsecond line") == "Music");
  CHECK(sanitize_name("\n\n**Colors**") == "Colors");
  CHECK(sanitize_name(std::string(60, 'a')).size() == kMaxNameLength);
  // multi-byte characters are not split
  std::string accents;
  for (int i = 0; i < 30; ++i) accents += "\xC3\xA9";
  const auto cut = sanitize_name(accents);
  CHECK(cut.size() <= kMaxNameLength);
  CHECK(cut.size() % 2 == 0);
}

TEST_CASE("cache makes reruns free") {
  testsupport::MockServer server(echo_first_word);
  testsupport::TempDir dir("naming");
  NamingRequest req;
  req.words = {"apple", "pear"};
  {
    Namer namer(config_for(server), dir / "cache.jsonl", dir / "audit.jsonl");
    const auto r = namer.name(req);
    CHECK(r.name == "Apple");
    CHECK_FALSE(r.from_cache);
  }
  {
    Namer namer(config_for(server), dir / "cache.jsonl");
    const auto r = namer.name(req);
    CHECK(r.name == "Apple");
    CHECK(r.from_cache);
  }
  CHECK(server.count() == 1);
  NamingRequest other = req;
  other.end = End::negative;
  CHECK(naming_cache_key(other, "gpt-4o") != naming_cache_key(req, "gpt-4o"));
  CHECK(naming_cache_key(req, "gpt-4o") != naming_cache_key(req, "other-model"));
  other = req;
  other.style = NamingStyle::unconstrained;
  CHECK(naming_cache_key(other, "gpt-4o") != naming_cache_key(req, "gpt-4o"));

  std::ifstream audit(dir / "audit.jsonl");
  std::string line;
  REQUIRE(std::getline(audit, line));
  CHECK(line.find("Apple") != std::string::npos);
}

TEST_CASE("name_all names both ends and selects by orientation") {
  testsupport::MockServer server(echo_first_word);
  const std::size_t comps = 512;
  const Eigen::Index rows = 60;
  std::mt19937_64 rng(71);
  const RowMatrix v = testsupport::random_matrix(rng, rows, static_cast<Eigen::Index>(comps));
  Vocabulary vocab;
  for (Eigen::Index i = 0; i < rows; ++i) vocab.add("w" + std::to_string(i), 1);
  std::vector<ComponentMeta> metas(comps);
  for (std::size_t c = 0; c < comps; ++c) {
    metas[c].index = c;
    metas[c].orientation = c % 2 ? -1 : +1;
  }
  auto cfg = config_for(server);
  Namer namer(cfg);
  const auto report = name_all(RepresentationMatrix(v, Stage::normalized), vocab, metas, namer, {30, NamingStyle::one_word});
  CHECK(report.failures.empty());
  CHECK(server.count() == 2 * comps);
  bool all_verbatim = true;
  for (const auto& raw : server.raw_bodies()) {
    all_verbatim = all_verbatim && raw.find(nlohmann::json(kSystem).dump()) != std::string::npos &&
                   raw.find(kPrompt) != std::string::npos;
  }
  CHECK(all_verbatim);
  bool selection_ok = true;
  for (std::size_t c = 0; c < comps; ++c) {
    const auto& m = report.metas[c];
    const std::size_t col = c;
    // independent top word at each end of the column
    Eigen::Index hi = 0, lo = 0;
    for (Eigen::Index i = 1; i < rows; ++i) {
      if (v(i, static_cast<Eigen::Index>(col)) > v(hi, static_cast<Eigen::Index>(col))) hi = i;
      if (v(i, static_cast<Eigen::Index>(col)) < v(lo, static_cast<Eigen::Index>(col))) lo = i;
    }
    selection_ok = selection_ok && m.positive_name == "W" + std::to_string(hi) &&
                   m.negative_name == "W" + std::to_string(lo) &&
                   m.chosen_name == (m.orientation > 0 ? m.positive_name : m.negative_name);
  }
  CHECK(selection_ok);
  // each request lists 30 words
  const auto first = server.bodies()[0]["messages"][1]["content"].get<std::string>();
  const auto list = first.substr(first.find("\n\n") + 2);
  CHECK(std::count(list.begin(), list.end(), ',') == 29);
}
