#include "doctest.h"

#include <random>
#include <thread>

#include "httplib.h"

#include "storyweaver/error.hpp"
#include "storyweaver/random.hpp"
#include "storyweaver/topic.hpp"
#include "support.hpp"

using namespace storyweaver;
using testsupport::TempDir;

namespace {

const char* kDoc =
    "Dinosaurs were reptiles. Many dinosaurs walked on two legs! Some dinosaurs eat plants and leaves. "
    "Tyrannosaurus had tiny arms? Birds are living dinosaurs.";

testsupport::BruteBm25 brute_for(const TopicIndex& index) {
    testsupport::BruteBm25 b;
    for (const auto& s : index.sentences()) b.docs.push_back(tokenize(s));
    return b;
}

}  // namespace

TEST_CASE("build_index sentence splitting") {
    CHECK(TopicIndex::build("t", "Dinosaurs are large. Some eat plants.").sentences().size() == 2);
    CHECK_THROWS_AS(TopicIndex::build("t", "Hi."), EmptyTopic);
    CHECK_THROWS_AS(TopicIndex::build("t", "   "), EmptyTopic);

    const auto mr = TopicIndex::build("t", "We met Mr. Smith ran home. Then tea.");
    CHECK(mr.sentences() == std::vector<std::string>{"We met Mr.", "Smith ran home.", "Then tea."});

    const auto no_split = TopicIndex::build("t", "Version 1.5 is out and e.g.this stays whole");
    CHECK(no_split.sentences().size() == 1);
}

TEST_CASE("index statistics") {
    const auto index = TopicIndex::build("Dinosaur", kDoc);
    const auto n = index.sentences().size();
    REQUIRE(n == 5);
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(index.sentence_lengths()[i] == tokenize(index.sentences()[i]).size());
        total += static_cast<double>(index.sentence_lengths()[i]);
    }
    CHECK(index.avg_length() == doctest::Approx(total / static_cast<double>(n)).epsilon(1e-12));
    for (const auto& [t, df] : index.doc_freq()) CHECK(df <= n);
    CHECK(index.doc_freq().at("dinosaurs") == 4);
    CHECK(index.idf("dinosaurs") == doctest::Approx(std::log(1.0 + 1.5 / 4.5)));
}

TEST_CASE("propose_topic examples") {
    const auto index = TopicIndex::build("Dinosaur", kDoc);
    const auto brute = brute_for(index);

    const auto eat = propose_topic(index, "what do dinosaurs eat");
    REQUIRE(eat);
    CHECK(eat->source == Source::Topic);
    CHECK(eat->text == "Some dinosaurs eat plants and leaves.");
    const double s = brute.score(tokenize("what do dinosaurs eat"), 2);
    CHECK(eat->certainty == doctest::Approx(s / (s + 1.0)).epsilon(1e-12));

    CHECK_FALSE(propose_topic(index, "purple submarine"));
    CHECK_FALSE(propose_topic(index, ""));

    for (std::size_t i = 0; i < index.sentences().size(); ++i) {
        const auto self = propose_topic(index, index.sentences()[i]);
        REQUIRE(self);
        CHECK(self->text == index.sentences()[i]);
    }
}

TEST_CASE("ties go to the lowest sentence index") {
    const auto index = TopicIndex::build("t", "red fish swims. blue fish swims. red fish swims.");
    const auto p = propose_topic(index, "red");
    REQUIRE(p);
    CHECK(p->text == index.sentences()[0]);
}

TEST_CASE("bm25 scores match the brute-force oracle and the serial kernel") {
    const auto index = TopicIndex::build("Dinosaur", kDoc);
    const auto brute = brute_for(index);
    std::vector<std::string> vocab;
    for (const auto& [t, df] : index.doc_freq()) vocab.push_back(t);
    vocab.push_back("zebra");
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        std::string q;
        const auto len = 1 + uniform_index(rng, 6);
        for (std::size_t i = 0; i < len; ++i) q += vocab[uniform_index(rng, vocab.size())] + " ";
        const auto scores = index.score(q);
        CHECK(scores == index.score_serial(q));
        for (std::size_t d = 0; d < scores.size(); ++d)
            CHECK(std::abs(scores[d] - brute.score(tokenize(q), d)) < 1e-9);
    }
}

TEST_CASE("certainty is monotone in the score") {
    const auto index = TopicIndex::build("Dinosaur", kDoc);
    const auto low = propose_topic(index, "tiny");
    const auto high = propose_topic(index, "tyrannosaurus had tiny arms");
    REQUIRE(low);
    REQUIRE(high);
    CHECK(low->text == high->text);
    CHECK(high->certainty > low->certainty);
    CHECK(high->certainty < 1.0);
}

TEST_CASE("topic responder queries the latest turn") {
    TopicResponder r(TopicIndex::build("Dinosaur", kDoc));
    DialogueState s;
    CHECK_FALSE(r.propose(s, 0));
    s.push(Speaker::User, "tell me about birds");
    const auto p = r.propose(s, 0);
    REQUIRE(p);
    CHECK(p->text == "Birds are living dinosaurs.");
}

TEST_CASE("url_encode") {
    CHECK(url_encode("Dinosaur") == "Dinosaur");
    CHECK(url_encode("Tyrannosaurus rex") == "Tyrannosaurus%20rex");
    CHECK(url_encode("a/b?c") == "a%2Fb%3Fc");
    CHECK(url_encode("Ä") == "%C3%84");
}

TEST_CASE("fetch_topic cache, offline and live paths") {
    TempDir dir("topic");
    FetchOptions opts;
    opts.cache_dir = dir / "cache";
    opts.offline = true;
    CHECK_THROWS_AS(fetch_topic("Dinosaur", opts), OfflineMiss);

    std::filesystem::create_directories(opts.cache_dir);
    testsupport::spit(opts.cache_dir / "Dinosaur.txt", "cached text.");
    CHECK(fetch_topic("Dinosaur", opts) == "cached text.");

    const std::string fixture = testsupport::slurp(testsupport::data_path("topics/Dinosaur.txt"));
    httplib::Server stub;
    std::atomic<int> hits{0};
    stub.Get(R"(/extract/(.*))", [&](const httplib::Request& req, httplib::Response& res) {
        ++hits;
        if (req.matches[1] == "Tyrannosaurus%20rex" || req.matches[1] == "Tyrannosaurus rex") {
            res.set_content(fixture, "text/plain");
        } else {
            res.status = 404;
        }
    });
    const int port = stub.bind_to_any_port("127.0.0.1");
    std::thread th([&] { stub.listen_after_bind(); });
    stub.wait_until_ready();

    opts.offline = false;
    opts.base_url = "http://127.0.0.1:" + std::to_string(port) + "/extract/";
    CHECK(fetch_topic("Tyrannosaurus rex", opts) == fixture);
    CHECK(testsupport::slurp(opts.cache_dir / "Tyrannosaurus%20rex.txt") == fixture);
    const int after_first = hits.load();
    CHECK(fetch_topic("Tyrannosaurus rex", opts) == fixture);
    CHECK(hits.load() == after_first);

    CHECK_THROWS_AS(fetch_topic("Nothing Here", opts), FetchFailed);

    // Fetch failure falls back to the bundled copy.
    const auto bundled = load_topic_text("Dinosaur", FetchOptions{opts.base_url, dir / "empty", false, 2},
                                         testsupport::data_path("topics"));
    CHECK(bundled == fixture);
    CHECK_THROWS_AS(load_topic_text("Nothing Here", opts, dir / "nowhere"), ConfigError);

    stub.stop();
    th.join();

    opts.base_url = "http://127.0.0.1:" + std::to_string(port) + "/extract/";
    CHECK_THROWS_AS(fetch_topic("Closed Port", opts), FetchFailed);
}

TEST_CASE("concurrent fetches of one title leave a complete cache file") {
    TempDir dir("topic-race");
    const std::string body(200000, 'x');
    httplib::Server stub;
    stub.Get(R"(/p/(.*))", [&](const httplib::Request&, httplib::Response& res) { res.set_content(body, "text/plain"); });
    const int port = stub.bind_to_any_port("127.0.0.1");
    std::thread th([&] { stub.listen_after_bind(); });
    stub.wait_until_ready();

    FetchOptions opts{"http://127.0.0.1:" + std::to_string(port) + "/p/", dir / "cache", false, 5};
    std::vector<std::thread> workers;
    std::atomic<int> good{0};
    for (int i = 0; i < 6; ++i)
        workers.emplace_back([&] {
            if (fetch_topic("Same", opts) == body) ++good;
        });
    for (auto& w : workers) w.join();
    CHECK(good == 6);
    CHECK(testsupport::slurp(opts.cache_dir / "Same.txt") == body);
    stub.stop();
    th.join();
}
