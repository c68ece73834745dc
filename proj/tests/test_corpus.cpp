#include <cmath>

#include "doctest.h"
#include "semtree/corpus.hpp"
#include "testutil.hpp"

using namespace semtree;

TEST_CASE("year-month parsing is strict") {
  YearMonth ym = parse_year_month("2019-07");
  CHECK(ym.year == 2019);
  CHECK(ym.month == 7);
  CHECK(format_year_month(ym) == "2019-07");

  CHECK_THROWS_AS(parse_year_month("2019-7"), ParseError);
  CHECK_THROWS_AS(parse_year_month("2019-13"), ParseError);
  CHECK_THROWS_AS(parse_year_month("2019-00"), ParseError);
  CHECK_THROWS_AS(parse_year_month("2019-07-01"), ParseError);
  CHECK_THROWS_AS(parse_year_month("19-07"), ParseError);
  CHECK_THROWS_AS(parse_year_month("abcd-ef"), ParseError);
  CHECK_THROWS_AS(parse_year_month(""), ParseError);
}

TEST_CASE("year-month ordering") {
  YearMonth a{2019, 7}, b{2019, 8}, c{2020, 1};
  CHECK(a < b);
  CHECK(b < c);
  CHECK(a <= a);
  CHECK_FALSE(c <= b);
  CHECK(a == YearMonth{2019, 7});
}

TEST_CASE("vector math") {
  CHECK(cosine({1.0, 0.0}, {1.0, 1.0}) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  Vec n = normalize({3.0, 4.0});
  CHECK(n[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(n[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(dot({1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}) == doctest::Approx(32.0));
  CHECK(norm({3.0, 4.0}) == doctest::Approx(5.0));

  CHECK_THROWS_AS(cosine({0.0, 0.0}, {1.0, 0.0}), ValidationError);
  CHECK_THROWS_AS(normalize({0.0, 0.0}), ValidationError);
  CHECK_THROWS_AS(dot({1.0}, {1.0, 2.0}), ValidationError);
}

TEST_CASE("corpus jsonl round trip") {
  Corpus corpus = testutil::synth_corpus(7, 4, 11);
  std::string path = testutil::tmp_path("corpus_rt.jsonl");
  save_corpus(corpus, path);
  Corpus loaded = load_corpus(path);

  REQUIRE(loaded.size() == corpus.size());
  CHECK(loaded.dim == corpus.dim);
  for (int64_t i = 0; i < corpus.size(); ++i) {
    CHECK(loaded.at(i).id == corpus.at(i).id);
    CHECK(loaded.at(i).title == corpus.at(i).title);
    CHECK(loaded.at(i).abstract_text == corpus.at(i).abstract_text);
    CHECK(loaded.at(i).date == corpus.at(i).date);
    CHECK(loaded.at(i).embedding == corpus.at(i).embedding); // bit-exact
  }
  CHECK(corpus_fingerprint(loaded) == corpus_fingerprint(corpus));
}

TEST_CASE("corpus loader rejects bad input with line numbers") {
  std::string good =
      R"({"id":"a","title":"t","abstract":"x","date":"2019-01","embedding":[1.0,0.0]})";

  SUBCASE("malformed json names the line") {
    std::string path = testutil::tmp_path("corpus_bad1.jsonl");
    testutil::write_file(path, good + "\n\n{nope\n");
    try {
      load_corpus(path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }

  SUBCASE("missing field") {
    std::string path = testutil::tmp_path("corpus_bad2.jsonl");
    testutil::write_file(path,
                         R"({"id":"a","title":"t","date":"2019-01","embedding":[1.0]})"
                         "\n");
    CHECK_THROWS_AS(load_corpus(path), ParseError);
  }

  SUBCASE("duplicate id names the id") {
    std::string path = testutil::tmp_path("corpus_bad3.jsonl");
    testutil::write_file(path, good + "\n" + good + "\n");
    try {
      load_corpus(path);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("'a'") != std::string::npos);
    }
  }

  SUBCASE("dimension mismatch names the id") {
    std::string other =
        R"({"id":"b","title":"t","abstract":"x","date":"2019-01","embedding":[1.0,0.0,0.5]})";
    std::string path = testutil::tmp_path("corpus_bad4.jsonl");
    testutil::write_file(path, good + "\n" + other + "\n");
    try {
      load_corpus(path);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("'b'") != std::string::npos);
    }
  }

  SUBCASE("non-finite embedding component") {
    std::string path = testutil::tmp_path("corpus_bad5.jsonl");
    testutil::write_file(
        path, R"({"id":"a","title":"t","abstract":"x","date":"2019-01","embedding":[1e999,0.0]})"
              "\n");
    CHECK_THROWS_AS(load_corpus(path), Error);
  }

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_corpus(testutil::tmp_path("no_such_corpus.jsonl")), IoError);
  }

  SUBCASE("empty corpus") {
    std::string path = testutil::tmp_path("corpus_bad6.jsonl");
    testutil::write_file(path, "\n\n");
    CHECK_THROWS_AS(load_corpus(path), ValidationError);
  }
}

TEST_CASE("fingerprint reacts to content") {
  Corpus a = testutil::synth_corpus(5, 3, 21);
  std::string fp = corpus_fingerprint(a);
  CHECK(fp.size() == 16);
  CHECK(fp.find_first_not_of("0123456789abcdef") == std::string::npos);

  Corpus b = testutil::synth_corpus(5, 3, 21);
  CHECK(corpus_fingerprint(b) == fp);

  b.docs[2].embedding[0] = std::nextafter(b.docs[2].embedding[0], 1.0);
  CHECK(corpus_fingerprint(b) != fp);

  Corpus c = testutil::synth_corpus(5, 3, 21);
  c.docs[4].date.month = c.docs[4].date.month == 1 ? 2 : 1;
  CHECK(corpus_fingerprint(c) != fp);
}

TEST_CASE("position lookup") {
  Corpus corpus = testutil::synth_corpus(4, 3, 31);
  CHECK(corpus.position_of(corpus.at(2).id) == 2);
  CHECK(corpus.position_of("missing") == -1);
}
