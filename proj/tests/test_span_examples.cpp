#include <doctest.h>

#include <sstream>

#include "layerscope/errors.hpp"
#include "layerscope/span_examples.hpp"

using namespace layerscope;

namespace {

SpanExampleSet parse(const std::string& text,
                     const std::optional<std::vector<std::string>>& vocab = std::nullopt) {
  std::istringstream in(text);
  return parse_edge_examples(in, "task", vocab);
}

std::size_t parse_error_line(const std::string& text) {
  try {
    parse(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  FAIL("expected a ParseError");
  return 0;
}

}  // namespace

TEST_CASE("single line with one target") {
  const auto set = parse(R"({"tokens":["a","b"],"targets":[{"span1":[0,1],"label":"X"}]})");
  REQUIRE(set.examples.size() == 1);
  CHECK(set.label_vocab == std::vector<std::string>{"X"});
  CHECK(set.examples[0].span1 == Span{0, 1});
  CHECK_FALSE(set.examples[0].span2.has_value());
  CHECK(set.examples[0].labels == std::vector<std::size_t>{0});
  CHECK_FALSE(set.two_span());
}

TEST_CASE("three lines with labels X, Y, X") {
  const auto set = parse(
      "{\"tokens\":[\"a\",\"b\"],\"targets\":[{\"span1\":[0,1],\"label\":\"X\"}]}\n"
      "{\"tokens\":[\"c\"],\"targets\":[{\"span1\":[0,1],\"label\":\"Y\"}]}\n"
      "{\"tokens\":[\"d\",\"e\"],\"targets\":[{\"span1\":[1,2],\"label\":\"X\"}]}\n");
  CHECK(set.label_vocab == std::vector<std::string>{"X", "Y"});
  REQUIRE(set.examples.size() == 3);
  CHECK(set.examples[1].labels == std::vector<std::size_t>{1});
  CHECK(set.examples[2].sentence_index == 2);
}

TEST_CASE("targets sharing spans merge into one multi-label example") {
  const auto set = parse(
      R"({"tokens":["a","b","c"],"targets":[)"
      R"({"span1":[0,1],"span2":[1,3],"label":"B"},)"
      R"({"span1":[0,1],"span2":[1,3],"label":"A"},)"
      R"({"span1":[0,2],"span2":[2,3],"label":["A","C"]}]})");
  CHECK(set.two_span());
  REQUIRE(set.examples.size() == 2);
  CHECK(set.examples[0].labels == std::vector<std::size_t>{0, 1});
  CHECK(set.examples[1].labels == std::vector<std::size_t>{0, 2});
  CHECK(*set.examples[0].span2 == Span{1, 3});
}

TEST_CASE("invalid examples report the line") {
  CHECK(parse_error_line(R"({"tokens":["a"],"targets":[{"span1":[0,0],"label":"X"}]})") == 1);
  CHECK(parse_error_line("\n" R"({"tokens":["a"],"targets":[{"span1":[0,2],"label":"X"}]})") == 2);
  CHECK(parse_error_line(R"({"tokens":["a"],"targets":[{"span1":[-1,1],"label":"X"}]})") == 1);
  CHECK(parse_error_line(R"({"tokens":["a"]})") == 1);
  CHECK(parse_error_line("{not json") == 1);
  CHECK(parse_error_line(
            "{\"tokens\":[\"a\",\"b\"],\"targets\":[{\"span1\":[0,1],\"label\":\"X\"}]}\n"
            "{\"tokens\":[\"a\",\"b\"],\"targets\":[{\"span1\":[0,1],\"span2\":[1,2],\"label\":\"X\"}]}\n") == 2);
}

TEST_CASE("an explicit vocabulary fixes label indices") {
  const auto set = parse(R"({"tokens":["a"],"targets":[{"span1":[0,1],"label":"X"}]})",
                         std::vector<std::string>{"Z", "X"});
  CHECK(set.examples[0].labels == std::vector<std::size_t>{1});
  CHECK_THROWS_AS(parse(R"({"tokens":["a"],"targets":[{"span1":[0,1],"label":"Q"}]})",
                        std::vector<std::string>{"X"}),
                  ConfigError);
}

TEST_CASE("write_edge_examples output parses back") {
  const auto set = parse(
      "{\"tokens\":[\"a\",\"b\"],\"targets\":[{\"span1\":[0,1],\"label\":\"X\"},{\"span1\":[1,2],\"label\":\"Y\"}]}\n"
      "{\"tokens\":[\"c\"],\"targets\":[{\"span1\":[0,1],\"label\":[\"X\",\"Y\"]}]}\n");
  std::ostringstream out;
  write_edge_examples(out, set);
  const auto back = parse(out.str());
  CHECK(back.label_vocab == set.label_vocab);
  REQUIRE(back.examples.size() == set.examples.size());
  for (std::size_t i = 0; i < set.examples.size(); ++i) {
    CHECK(back.examples[i].sentence_index == set.examples[i].sentence_index);
    CHECK(back.examples[i].span1 == set.examples[i].span1);
    CHECK(back.examples[i].labels == set.examples[i].labels);
    CHECK(back.examples[i].tokens == set.examples[i].tokens);
  }
}
