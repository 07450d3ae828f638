#include <fstream>
#include <random>

#include "doctest.h"
#include "support.hpp"

using namespace mstest;
namespace fs = std::filesystem;

TEST_CASE("payload budgets hold on fuzzed payloads") {
  std::mt19937_64 rng(1234);
  for (int i = 0; i < 400; ++i) {
    const RetrievedMemoryPayload p = random_payload(rng);
    const TruncatedPayload t = truncate_payload(p, 50'000, 2);
    CHECK(utf8_length(t.text) <= 50'000);
    CHECK(t.payload.image_count() <= 2);

    // Order-preserving: kept images are the leading images, the text is a
    // prefix of the image-trimmed serialization, items keep their order.
    const auto before = all_images(p), after = all_images(t.payload);
    REQUIRE(after.size() <= before.size());
    CHECK(std::equal(after.begin(), after.end(), before.begin()));
    const std::string full = payload_text(t.payload);
    CHECK(full.compare(0, t.text.size(), t.text) == 0);
    REQUIRE(t.payload.items.size() == p.items.size());
    for (std::size_t k = 0; k < p.items.size(); ++k) CHECK(t.payload.items[k].text == p.items[k].text);
    CHECK(t.report.dropped_images == static_cast<int>(before.size() - after.size()));
    CHECK(t.report.cut_chars == static_cast<int>(utf8_length(full) - utf8_length(t.text)));

    // Idempotent.
    const TruncatedPayload again = truncate_payload(t.payload, 50'000, 2);
    CHECK(again.payload == t.payload);
    CHECK(again.text == t.text);
    CHECK(again.report.dropped_images == 0);
  }
}

TEST_CASE("small budgets cut on code point boundaries") {
  RetrievedMemoryPayload p;
  p.items.push_back(MemoryItem{std::string("\xf0\x9f\x98\x80\xf0\x9f\x98\x80\xf0\x9f\x98\x80"), {}, {}});
  for (int budget : {0, 1, 5, 17, 20, 21, 22, 1000}) {
    const TruncatedPayload t = truncate_payload(p, budget, 2);
    CHECK(utf8_length(t.text) <= static_cast<std::size_t>(budget));
    CHECK(utf8_length(t.text) == std::min<std::size_t>(budget, utf8_length(payload_text(p))));
  }
  CHECK(utf8_prefix("h\xc3\xa9llo", 2) == "h\xc3\xa9");
  CHECK(utf8_length("h\xc3\xa9llo") == 5);
}

TEST_CASE("image budget keeps images in items order") {
  const RetrievedMemoryPayload p = validate_payload(Json::parse(R"({"items":[
    {"text":"a","images":[{"kind":"url","value":"https://x/1"}]},
    {"images":[{"kind":"url","value":"https://x/2"},{"kind":"url","value":"https://x/3"}]},
    {"images":[{"kind":"path","value":"p/4.png"}]}]})"));
  const TruncatedPayload t = truncate_payload(p, 50'000, 2);
  const auto imgs = all_images(t.payload);
  REQUIRE(imgs.size() == 2);
  CHECK(imgs[0].value == "https://x/1");
  CHECK(imgs[1].value == "https://x/2");
  CHECK(t.report.dropped_images == 2);
  CHECK(t.payload.items[2].images->empty());
}

TEST_CASE("payload validation") {
  CHECK(validate_payload(Json::parse(R"({"items":[]})")) == empty_payload());
  const auto p = validate_payload(Json::parse(R"({"items":[{"text":"x","score":3}],"note":"n"})"));
  CHECK(p.items[0].metadata->at("score") == 3);
  CHECK(p.metadata["note"] == "n");

  auto schema_path = [](const char* text) {
    try {
      validate_payload(Json::parse(text));
    } catch (const SchemaError& e) {
      return e.path();
    }
    return std::string("<valid>");
  };
  CHECK(schema_path(R"([])") == "");
  CHECK(schema_path(R"({"metadata":{}})") == "/items");
  CHECK(schema_path(R"({"items":{"a":1}})") == "/items");
  CHECK(schema_path(R"({"items":[{"items":[]}]})") == "/items/0/items");
  CHECK(schema_path(R"({"items":[{}]})") == "/items/0");
  CHECK(schema_path(R"({"items":[{"text":5}]})") == "/items/0/text");
  CHECK(schema_path(R"({"items":[{"images":[{"kind":"path","value":"/etc/passwd"}]}]})") == "/items/0/images/0/value");
  CHECK(schema_path(R"({"items":[{"images":[{"kind":"path","value":"a/../../x"}]}]})") == "/items/0/images/0/value");
  CHECK(schema_path(R"({"items":[{"images":[{"kind":"url","value":"notaurl"}]}]})") == "/items/0/images/0/value");
  CHECK(schema_path(R"({"items":[{"images":[{"kind":"blob","value":"x"}]}]})") == "/items/0/images/0/kind");
  CHECK(schema_path(R"({"items":[{"text":"ok"}],"metadata":[]})") == "/metadata");
}

TEST_CASE("image resolution stays under the artifact root") {
  TempDir dir("ms-img");
  fs::create_directories(dir / "root/img");
  std::ofstream(dir.path() / "root/img/a.png") << "png";
  std::ofstream(dir.path() / "secret.png") << "secret";
  fs::create_symlink(dir.path() / "secret.png", dir.path() / "root/img/link.png");

  auto payload = [](const std::string& kind, const std::string& value) {
    RetrievedMemoryPayload p;
    p.items.push_back(MemoryItem{std::nullopt, std::vector<ImageRef>{{kind == "url" ? ImageKind::url : ImageKind::path,
                                                                      value, std::string("image/png")}},
                                 std::nullopt});
    return p;
  };
  const auto ok = resolve_images(payload("path", "img/a.png"), dir / "root");
  REQUIRE(ok.size() == 1);
  CHECK(ok[0].local_path == fs::canonical(dir.path() / "root/img/a.png"));
  CHECK(ok[0].mime == "image/png");
  const auto url = resolve_images(payload("url", "https://example.org/a.png"), dir / "root");
  CHECK(url[0].url == "https://example.org/a.png");
  CHECK(url[0].local_path.empty());
  CHECK_THROWS_AS(resolve_images(payload("path", "img/missing.png"), dir / "root"), ResolutionError);
  CHECK_THROWS_AS(resolve_images(payload("path", "../secret.png"), dir / "root"), SecurityError);
  CHECK_THROWS_AS(resolve_images(payload("path", "img/link.png"), dir / "root"), SecurityError);
}

TEST_CASE("episode JSON round-trips") {
  EpisodeRecorder e = finished_episode("t1", "find the red door", 1.0);
  e.init.images.push_back({ImageKind::url, "https://example.org/a.png", std::nullopt});
  e.memory_retrieved = RetrievedMemoryPayload{{MemoryItem{std::string("hint"), {}, {}}}, Json::object()};
  e.messages.push_back({"user", "hello"});
  const EpisodeRecorder back = episode_from_json(to_json(e));
  CHECK(back.task_id == e.task_id);
  CHECK(back.init == e.init);
  CHECK(back.steps == e.steps);
  CHECK(back.reward == e.reward);
  CHECK(back.memory_retrieved == e.memory_retrieved);
  CHECK(back.finished());

  const EpisodeRecorder partial = e.partial_view();
  CHECK(partial.is_partial());
  CHECK(partial.init == e.init);
  CHECK_FALSE(partial.finished());

  Json bad = to_json(e);
  bad["reward"] = 1.5;
  CHECK_THROWS_AS(episode_from_json(bad), SchemaError);
  bad = to_json(e);
  bad["steps"][0]["index"] = 3;
  CHECK_THROWS_AS(episode_from_json(bad), SchemaError);
}
