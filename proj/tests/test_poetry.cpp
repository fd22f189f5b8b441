#include "doctest.h"

#include <random>
#include <set>

#include "storyweaver/error.hpp"
#include "storyweaver/poetry.hpp"
#include "storyweaver/random.hpp"
#include "support.hpp"

using namespace storyweaver;

namespace {

const PoetryAssets& bundled() {
    static const PoetryAssets assets =
        load_poetry_assets(testsupport::data_path("poetry/templates.txt"),
                           testsupport::data_path("poetry/pronouncing.dict"),
                           testsupport::data_path("poetry/glossary.tsv"));
    return assets;
}

const testsupport::BruteRhymer& brute() {
    static const auto r =
        testsupport::BruteRhymer::from_dict(testsupport::slurp(testsupport::data_path("poetry/pronouncing.dict")));
    return r;
}

Phonemes ph(std::initializer_list<const char*> xs) { return Phonemes(xs.begin(), xs.end()); }

}  // namespace

TEST_CASE("rhyme_tail") {
    CHECK(rhyme_tail(ph({"K", "AE1", "T"})) == ph({"AE1", "T"}));
    CHECK(rhyme_tail(ph({"S", "P", "R"})).empty());
    CHECK(rhyme_tail(ph({"AO1", "R", "AH0", "N", "JH"})) == ph({"AO1", "R", "AH0", "N", "JH"}));
    CHECK(rhyme_tail(ph({"B", "AH0", "N", "AE1", "N", "AH0"})) == ph({"AE1", "N", "AH0"}));
    CHECK(rhyme_tail(ph({"DH", "AH0"})) == ph({"AH0"}));
    CHECK(rhyme_tail(ph({"R", "EY1", "N", "B", "OW2"})) == ph({"EY1", "N", "B", "OW2"}));
    CHECK(rhyme_tail({}).empty());
}

TEST_CASE("bundled dictionary entries") {
    const auto& lex = bundled().lexicon;
    REQUIRE(lex.find("cat"));
    CHECK(*lex.find("cat") == ph({"K", "AE1", "T"}));
    CHECK(*lex.find("orange") == ph({"AO1", "R", "AH0", "N", "JH"}));
    CHECK(lex.size() >= 200);
    for (const auto& [word, phones] : lex.entries()) {
        CHECK_FALSE(phones.empty());
        for (char c : word) CHECK_FALSE(std::isupper(static_cast<unsigned char>(c)));
    }
}

TEST_CASE("rhymes examples") {
    const auto& lex = bundled().lexicon;
    CHECK(rhymes("cat", "hat", lex));
    CHECK_FALSE(rhymes("cat", "cat", lex));
    CHECK_FALSE(rhymes("cat", "dog", lex));
    CHECK_FALSE(rhymes("cat", "notaword", lex));
}

TEST_CASE("lexicon parsing") {
    const auto lex = RhymeLexicon::parse(
        ";;; comment\nCAT  K AE1 T\nCAT(1)  K AA1 T\nHAT\tHH AE1 T\n\nBAT K\n  \nSPRR  S P R\nFLAT  F L AE2 T\n");
    CHECK(lex.size() == 5);
    CHECK(*lex.find("cat") == ph({"K", "AE1", "T"}));
    CHECK(lex.rhymes_for("cat") == std::vector<std::string>{"hat"});
    CHECK(lex.rhymes_for("sprr").empty());
    CHECK_FALSE(rhymes("sprr", "sprr", lex));
    // Stress on the initial tail vowel is kept: AE2 T does not match AE1 T.
    CHECK_FALSE(rhymes("flat", "hat", lex));
    CHECK_THROWS_AS(RhymeLexicon::parse("CAT\n"), ConfigError);
}

TEST_CASE("rhymes agrees with the brute-force comparator and is symmetric") {
    const auto& lex = bundled().lexicon;
    std::vector<std::string> words;
    for (const auto& [w, p] : lex.entries()) words.push_back(w);
    for (std::size_t i = 0; i < words.size(); i += 3)
        for (std::size_t j = 0; j < words.size(); j += 2) {
            CHECK(rhymes(words[i], words[j], lex) == brute().rhymes(words[i], words[j]));
            CHECK(rhymes(words[i], words[j], lex) == rhymes(words[j], words[i], lex));
        }
    for (const auto& w : words) {
        std::vector<std::string> expect;
        for (const auto& o : words)
            if (brute().rhymes(w, o)) expect.push_back(o);
        CHECK(lex.rhymes_for(w) == expect);
    }
}

TEST_CASE("glossary parsing") {
    const auto g = Glossary::parse("# c\nCat\ta furry pet\ndog\t  barks  \n");
    CHECK(g.size() == 2);
    CHECK(*g.find("cat") == "a furry pet");
    CHECK(*g.find("dog") == "barks");
    CHECK_THROWS_AS(Glossary::parse("cat no tab\n"), ConfigError);
    CHECK_THROWS_AS(Glossary::parse("cat\t \n"), ConfigError);
}

TEST_CASE("template validation") {
    CHECK_NOTHROW(Template(0, "A {noun} in a {rhyme}"));
    CHECK_THROWS_AS(Template(0, "A {rhyme} alone"), ConfigError);
    CHECK_THROWS_AS(Template(0, "A {verb}"), ConfigError);
    CHECK_THROWS_AS(Template(0, "A {noun"), ConfigError);
    CHECK_THROWS_AS(Template(0, "A noun}"), ConfigError);
    CHECK(Template(0, "plain").is_fallback());
    CHECK(Template(0, "a {noun}").is_fallback());
    CHECK_FALSE(Template(0, "a {noun} is {definition}").is_fallback());
    CHECK(Template(0, "{noun} and {noun} in {rhyme}").fill("cat", "hat", "") == "cat and cat in hat");

    CHECK_THROWS_AS(parse_templates("A {noun} in a {rhyme}\n"), ConfigError);
    const auto ts = parse_templates("# c\nA {noun} in a {rhyme}\n\nOnce upon a time.\n");
    REQUIRE(ts.size() == 2);
    CHECK(ts[1].id() == 1);
    CHECK(bundled().templates.size() >= 10);
}

TEST_CASE("focus noun selection") {
    const auto& a = bundled();
    CHECK(focus_noun("tell me about cats", a.lexicon, a.glossary) == "cat");
    CHECK(focus_noun("a cat and a dog", a.lexicon, a.glossary) == "dog");
    CHECK(focus_noun("the cat went zooming", a.lexicon, a.glossary) == "cat");
    CHECK(focus_noun("zooming xyzzy", a.lexicon, a.glossary) == "xyzzy");
    CHECK(focus_noun("", a.lexicon, a.glossary) == "story");
    CHECK(focus_noun("oh no", a.lexicon, a.glossary) == "story");
}

TEST_CASE("propose_poetry examples") {
    const auto& a = bundled();
    const std::vector<Template> ts{Template(0, "A {noun} in a {rhyme}, imagine that!"), Template(1, "Once upon a time.")};
    const auto cats = propose_poetry(ts, a.lexicon, a.glossary, "tell me about cats", 0);
    std::vector<std::string> expect;
    for (const auto& [w, p] : brute().pron)
        if (brute().rhymes("cat", w)) expect.push_back(w);
    REQUIRE_FALSE(expect.empty());
    CHECK(cats.text == "A cat in a " + expect.front() + ", imagine that!");
    CHECK(cats.certainty == 0.9);
    CHECK(cats.source == Source::Poetry);
    const auto rotated = propose_poetry(ts, a.lexicon, a.glossary, "tell me about cats", 1);
    CHECK(rotated.text == "A cat in a " + expect[1 % expect.size()] + ", imagine that!");

    const auto empty = propose_poetry(a.templates, a.lexicon, a.glossary, "", 0);
    CHECK(empty.certainty == 0.5);
    const auto fall = std::find_if(a.templates.begin(), a.templates.end(), [](const Template& t) { return t.is_fallback(); });
    CHECK(empty.text == fall->fill("story", "", ""));

    const auto odd1 = propose_poetry(a.templates, a.lexicon, a.glossary, "xyzzy plugh", 3);
    const auto odd2 = propose_poetry(a.templates, a.lexicon, a.glossary, "xyzzy plugh", 3);
    CHECK(odd1 == odd2);
    CHECK(odd1.certainty == 0.5);
    CHECK(odd1.text == fall->fill("plugh", "", ""));

    const auto defined = propose_poetry(
        std::vector<Template>{Template(0, "A {noun} is {definition}."), Template(1, "Hm.")}, a.lexicon, a.glossary,
        "I like giraffes", 0);
    CHECK(defined.text == "A giraffe is " + *a.glossary.find("giraffe") + ".");
    CHECK(defined.certainty == 0.7);
}

TEST_CASE("propose_poetry is total and never leaves slot markers") {
    const auto& a = bundled();
    std::vector<std::string> words;
    for (const auto& [w, p] : a.lexicon.entries()) words.push_back(w);
    words.insert(words.end(), {"", "!!", "xyzzy", "cats", "dinosaurs", "a", "Ünïcode"});
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 2000; ++trial) {
        std::string input;
        const auto n = uniform_index(rng, 5);
        for (std::size_t i = 0; i < n; ++i) input += words[uniform_index(rng, words.size())] + " ";
        const auto p = propose_poetry(a.templates, a.lexicon, a.glossary, input, rng());
        CHECK(p.text.find('{') == std::string::npos);
        CHECK(p.text.find('}') == std::string::npos);
        CHECK((p.certainty == 0.5 || p.certainty == 0.7 || p.certainty == 0.9));
        CHECK_FALSE(trim(p.text).empty());
    }
}
