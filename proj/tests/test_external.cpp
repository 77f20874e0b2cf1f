#include <doctest.h>

#include <mutex>
#include <thread>

#include <httplib.h>

#include "anchoragg/external.hpp"
#include "helpers.hpp"

using namespace anchoragg;
using nlohmann::json;

namespace {

class FakeTransport final : public JsonTransport {
 public:
  using Handler = std::function<json(const json&)>;
  FakeTransport(Handler h, bool concurrent, std::vector<json>* log = nullptr)
      : handler_(std::move(h)), concurrent_(concurrent), log_(log) {}
  json exchange(const json& request) override {
    if (log_) {
      std::lock_guard lock(mutex_);
      log_->push_back(request);
    }
    return handler_(request);
  }
  bool concurrent() const override { return concurrent_; }

 private:
  Handler handler_;
  bool concurrent_;
  std::vector<json>* log_;
  std::mutex mutex_;
};

/// P(b) = number of words / 10, capped at 1.
json length_model(const json& req) {
  json probs = json::array();
  for (const auto& t : req["texts"]) {
    const auto words = tokenize(t.get<std::string>()).size();
    const double pb = std::min(1.0, static_cast<double>(words) / 10.0);
    probs.push_back({1.0 - pb, pb});
  }
  return {{"probs", probs}, {"classes", {"a", "b"}}};
}

std::unique_ptr<JsonTransport> fake(FakeTransport::Handler h, bool concurrent = false,
                                    std::vector<json>* log = nullptr) {
  return std::make_unique<FakeTransport>(std::move(h), concurrent, log);
}

}  // namespace

TEST_CASE("external predictor handshake and single prediction") {
  std::vector<json> log;
  const ExternalPredictorClient client(fake(length_model, false, &log));
  CHECK(client.classes() == std::vector<std::string>{"a", "b"});
  REQUIRE(log.size() == 1);
  CHECK(log[0]["texts"].empty());
  const auto p = client.predict_proba(WordSeq{"x", "y", "z"});
  CHECK(p[1] == doctest::Approx(0.3));
  CHECK(client.predict(WordSeq{"x"}) == 0);
  CHECK(log.back()["texts"][0] == "x");
}

TEST_CASE("batches are chunked and stay aligned") {
  std::vector<WordSeq> batch;
  for (std::size_t n = 0; n < 23; ++n) batch.push_back(WordSeq(n % 11, "w"));
  for (bool concurrent : {false, true}) {
    std::vector<json> log;
    const ExternalPredictorClient client(fake(length_model, concurrent, &log), {5, 3});
    const auto out = client.predict_proba_batch(batch);
    REQUIRE(out.size() == batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      CHECK(out[i][1] == doctest::Approx(static_cast<double>(batch[i].size()) / 10.0));
    }
    CHECK(log.size() == 1 + 5);  // handshake + ceil(23 / 5)
    for (std::size_t i = 1; i < log.size(); ++i) CHECK(log[i]["texts"].size() <= 5);
  }
}

TEST_CASE("malformed predictor responses fail") {
  CHECK_THROWS_AS(ExternalPredictorClient(fake([](const json&) { return json{{"probs", {}}}; })),
                  RuntimeFailure);
  CHECK_THROWS_AS(ExternalPredictorClient(fake([](const json&) { return json::array(); })),
                  RuntimeFailure);

  const auto scripted = [](json reply) {
    return fake([reply](const json& req) {
      if (req["texts"].empty()) return json{{"probs", json::array()}, {"classes", {"a", "b"}}};
      return reply;
    });
  };
  const WordSeq doc{"x"};
  CHECK_THROWS_AS(ExternalPredictorClient(scripted({{"probs", {{0.5, 0.5}, {0.5, 0.5}}}}))
                      .predict_proba(doc),
                  RuntimeFailure);
  CHECK_THROWS_AS(ExternalPredictorClient(scripted({{"probs", {{0.7, 0.7}}}})).predict_proba(doc),
                  RuntimeFailure);
  CHECK_THROWS_AS(ExternalPredictorClient(scripted({{"probs", {{1.0}}}})).predict_proba(doc),
                  RuntimeFailure);
  CHECK_THROWS_AS(ExternalPredictorClient(scripted({{"probs", {{-0.5, 1.5}}}})).predict_proba(doc),
                  RuntimeFailure);
  CHECK_THROWS_AS(
      ExternalPredictorClient(scripted({{"probs", {{0.5, 0.5}}}, {"classes", {"b", "a"}}}))
          .predict_proba(doc),
      RuntimeFailure);
  CHECK_THROWS_AS(ExternalPredictorClient(scripted({{"nothing", 1}})).predict_proba(doc),
                  RuntimeFailure);
  CHECK_NOTHROW(ExternalPredictorClient(scripted({{"probs", {{0.25, 0.75}}}})).predict_proba(doc));
  CHECK_THROWS_AS(ExternalPredictorClient(fake(length_model), {0, 1}), InputError);
}

TEST_CASE("external perturbator fills masked positions from returned candidates") {
  std::vector<json> log;
  const auto handler = [](const json& req) {
    json cands = json::array();
    for (const auto& pos : req["masked_positions"]) {
      cands.push_back({{{"word", "r" + std::to_string(pos.get<int>())}, {"weight", 1.0}}});
    }
    return json{{"candidates", cands}};
  };
  const ExternalPerturbatorClient p(fake(handler, false, &log), 3, 1.0);
  Rng rng(1);
  const WordSeq doc{"a", "b", "c"};
  const std::size_t keep[] = {1};
  CHECK(p.sample(doc, keep, rng) == WordSeq{"r0", "b", "r2"});
  REQUIRE(log.size() == 1);
  CHECK(log[0]["text"] == "a b c");
  CHECK(log[0]["zeta"] == 3);
  CHECK(log[0]["masked_positions"] == json{0, 2});

  const std::size_t all[] = {0, 1, 2};
  CHECK(p.sample(doc, all, rng) == doc);
  CHECK(log.size() == 1);
}

TEST_CASE("malformed perturbator responses fail") {
  const WordSeq doc{"a", "b"};
  const std::size_t keep[] = {0};
  Rng rng(2);
  const auto reply = [](json r) { return fake([r](const json&) { return r; }); };
  CHECK_THROWS_AS(ExternalPerturbatorClient(reply({{"candidates", json::array()}}), 2, 1.0)
                      .sample(doc, keep, rng),
                  RuntimeFailure);
  const json three = {{{"word", "x"}, {"weight", 1}}, {{"word", "y"}, {"weight", 1}},
                      {{"word", "z"}, {"weight", 1}}};
  CHECK_THROWS_AS(ExternalPerturbatorClient(reply({{"candidates", {three}}}), 2, 1.0)
                      .sample(doc, keep, rng),
                  RuntimeFailure);
  const json negative = {{{"word", "x"}, {"weight", -1}}};
  CHECK_THROWS_AS(ExternalPerturbatorClient(reply({{"candidates", {negative}}}), 2, 1.0)
                      .sample(doc, keep, rng),
                  RuntimeFailure);
  CHECK_THROWS_AS(ExternalPerturbatorClient(reply({}), 0, 1.0), InputError);
  CHECK_THROWS_AS(ExternalPerturbatorClient(reply({}), 2, 0.0), InputError);
}

TEST_CASE("http transport against a local server") {
  httplib::Server server;
  server.Post("/predict", [](const httplib::Request& req, httplib::Response& res) {
    res.set_content(length_model(json::parse(req.body)).dump(), "application/json");
  });
  server.Post("/broken", [](const httplib::Request&, httplib::Response& res) {
    res.status = 500;
  });
  server.Post("/garbage", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("not json", "text/plain");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const std::string base = "http://127.0.0.1:" + std::to_string(port);
  const ExternalPredictorClient client(make_transport(base + "/predict", std::chrono::seconds(5)),
                                       {2, 4});
  std::vector<WordSeq> batch{{"a"}, {"a", "b"}, {"a", "b", "c"}, {"a", "b", "c", "d"}, {}};
  const auto out = client.predict_proba_batch(batch);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(out[i][1] == doctest::Approx(static_cast<double>(batch[i].size()) / 10.0));
  }
  CHECK_THROWS_AS(ExternalPredictorClient(make_transport(base + "/broken", std::chrono::seconds(5))),
                  RuntimeFailure);
  CHECK_THROWS_AS(ExternalPredictorClient(make_transport(base + "/garbage", std::chrono::seconds(5))),
                  RuntimeFailure);

  server.stop();
  worker.join();
  CHECK_THROWS_AS(ExternalPredictorClient(make_transport(base + "/predict", std::chrono::seconds(1))),
                  RuntimeFailure);
}

TEST_CASE("subprocess transport") {
  const auto dir = testing::temp_dir("subprocess");
  testing::write_file(dir / "model.py", R"(import json, sys
for line in sys.stdin:
    req = json.loads(line)
    probs = []
    for t in req["texts"]:
        pb = 0.9 if "good" in t.split() else 0.1
        probs.append([1 - pb, pb])
    print(json.dumps({"probs": probs, "classes": ["neg", "pos"]}), flush=True)
)");
  const ExternalPredictorClient client(
      make_transport("cmd:python3 " + (dir / "model.py").string(), std::chrono::seconds(10)));
  CHECK(client.classes() == std::vector<std::string>{"neg", "pos"});
  CHECK(client.predict(WordSeq{"a", "good", "day"}) == 1);
  CHECK(client.predict(WordSeq{"a", "bad", "day"}) == 0);

  CHECK_THROWS_AS(ExternalPredictorClient(make_transport("cmd:sleep 5", std::chrono::milliseconds(200))),
                  RuntimeFailure);
  CHECK_THROWS_AS(ExternalPredictorClient(make_transport("cmd:true", std::chrono::seconds(5))),
                  RuntimeFailure);
  CHECK_THROWS_AS(ExternalPredictorClient(make_transport("cmd:echo nope", std::chrono::seconds(5))),
                  RuntimeFailure);
}

TEST_CASE("endpoint parsing") {
  CHECK_THROWS_AS(make_transport("ftp://x", std::chrono::seconds(1)), InputError);
  CHECK_THROWS_AS(make_transport("http://host:abc/p", std::chrono::seconds(1)), InputError);
  CHECK_THROWS_AS(make_transport("http://", std::chrono::seconds(1)), InputError);
  CHECK(join_words({"a", "b"}) == "a b");
  CHECK(join_words({}).empty());
}
